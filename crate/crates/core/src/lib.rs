//! Retrodirective wireless power transfer trained by ambient backscatter.
//!
//! An energy receiver reflects an ambient signal while toggling its antenna
//! through a ±1 chip sequence. The multi-antenna energy transmitter despreads
//! the reflection, conjugates it and beams power back. This crate models the
//! whole chain: path loss and fading, chip sequences, the correlator (closed
//! forms plus an exact waveform integrator), incident and harvested power, and
//! a reproducible parallel Monte Carlo engine with sweep runners.

pub mod config;
pub mod correlator;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod stochastics;
pub mod training;
pub mod wpt;

pub use config::{
    load_config, load_config_file, path_loss, sigma_i2_from_ratio_db, to_config_string, ChipRatio,
    DerivedParams, HarvesterModel, InterferenceReference, SystemParams, CALIBRATED_ALPHA,
};
pub use correlator::{
    correlate_closed_form, correlate_waveform, despread_closed_form, despread_waveform, mu_nu,
    offset_scale, AdditiveTerms, CorrelatorOutput, Despread, LinkGains, MuNu, Regime, Segment,
    SegmentWalker,
};
pub use engine::{
    magnitude_ratio_stat, run_trials, simulate_trial, trial_results, Experiment, Path, RunOptions,
    RunReport, Scenario, TrialResult,
};
pub use error::{Error, Result};
pub use stochastics::{
    sample_channels, sample_nakagami_vector, AmbientFrame, ChannelRealization, Substream, TrialSeed,
};
pub use training::{
    gen_balanced, gen_balanced_pattern, gen_msequence, gen_pn, is_balanced, walsh_hadamard_row,
    BalancedPattern, SequenceKind, TrainingSequence,
};
pub use wpt::{
    harvest, incident_power, incident_power_asymptotic, incident_power_exact, retro_beam,
    AsymptoticInputs, AsymptoticScenario, BeamSignal, PowerSample,
};

/// Crate version, echoed into CSV preambles.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
