use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("config line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("config line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },

    #[error("missing required key `{0}`")]
    MissingKey(&'static str),

    #[error("timing inconsistency: ns*ts = {symbol_span:e} s but nc*tc = {chip_span:e} s")]
    TimingConsistency { symbol_span: f64, chip_span: f64 },

    #[error("design criterion violated: {0}")]
    DesignCriterion(String),

    #[error("window error: {ns} symbols do not evenly divide {nc} chips")]
    InvalidWindow { ns: usize, nc: usize },

    #[error("neither ns={ns} nor nc={nc} divides the other; use the waveform correlator")]
    Regime { ns: usize, nc: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("trial {trial}: correlator output stayed degenerate after {attempts} draws")]
    DegenerateTrial { trial: u64, attempts: u32 },

    #[error("scenario `{scenario}` is inconsistent with parameters: {reason}")]
    Scenario { scenario: String, reason: String },

    #[error("sweep error: {0}")]
    Sweep(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
