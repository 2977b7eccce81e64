//! System parameters, the harvester model and derived link quantities.
//!
//! Parameters are read from a flat `key = value` text format: one entry per
//! line, `#` starts a comment, all values in SI base units (seconds, meters,
//! watts). Keys are the lower_snake_case field names of [`SystemParams`] and
//! [`HarvesterModel`]. Unknown keys are rejected.
//!
//! Every key except `ns` and `nc` has a default; see [`SystemParams::with_defaults`].

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Path-loss exponent used when a config does not set `alpha`.
///
/// Calibrated so that the balanced-training scenario at `ts = 5 us` averages
/// about 50 uW of harvested power with the remaining defaults.
pub const CALIBRATED_ALPHA: f64 = 2.52;

/// Relative tolerance on `ns * ts == nc * tc`.
pub const TIMING_TOLERANCE: f64 = 1e-9;

/// Power-transfer phase duration. Fixed to unit time, so energy and power
/// are used interchangeably.
pub const POWER_TRANSFER_DURATION: f64 = 1.0;

/// Deterministic link and timing parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// AS -> ER distance (m).
    pub d1: f64,
    /// ER -> ET distance (m).
    pub d2: f64,
    /// AS -> ET distance (m).
    pub d3: f64,
    /// Reference distance (m).
    pub d0: f64,
    /// Attenuation at the reference distance.
    pub k0: f64,
    pub alpha: f64,
    /// Ambient source transmit power (W).
    pub ps: f64,
    /// Energy transmitter total power (W).
    pub pt: f64,
    pub sigma_n2: f64,
    /// Neighbouring-source interference power; zero disables it.
    pub sigma_i2: f64,
    /// Ambient symbol duration (s).
    pub ts: f64,
    /// Chip duration (s).
    pub tc: f64,
    /// Ambient symbols per backscatter phase.
    pub ns: usize,
    /// Chips per backscatter phase.
    pub nc: usize,
    /// Antennas at the energy transmitter.
    pub m: usize,
    pub m_g: f64,
    pub m_h: f64,
    pub m_f: f64,
    /// Correlator timing offset (s).
    pub t_off: f64,
}

/// Sigmoid harvester `Q(Q_rf)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarvesterModel {
    /// Nonlinear charging rate (1/W).
    pub a0: f64,
    /// Turn-on input power (W).
    pub b0: f64,
    /// Saturation power (W).
    pub c0: f64,
}

impl Default for HarvesterModel {
    fn default() -> Self {
        HarvesterModel {
            a0: 1500.0,
            b0: 0.0022,
            c0: 0.024,
        }
    }
}

impl HarvesterModel {
    pub fn validate(&self) -> Result<()> {
        positive("a0", self.a0)?;
        positive("b0", self.b0)?;
        positive("c0", self.c0)
    }
}

/// `nc / ns` in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChipRatio {
    pub num: usize,
    pub den: usize,
}

impl ChipRatio {
    pub fn new(nc: usize, ns: usize) -> Self {
        let g = gcd(nc, ns).max(1);
        ChipRatio {
            num: nc / g,
            den: ns / g,
        }
    }

    /// Chips per symbol when that is a whole number.
    pub fn as_integer(&self) -> Option<usize> {
        (self.den == 1).then_some(self.num)
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    /// AS -> ER attenuation.
    pub gamma1: f64,
    /// ER -> ET attenuation.
    pub gamma2: f64,
    /// AS -> ET attenuation.
    pub gamma3: f64,
    /// Backscatter phase duration (s).
    pub tb: f64,
    pub chips_per_symbol: ChipRatio,
}

/// Which received power an interference ratio in dB is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InterferenceReference {
    /// `ps * gamma3`: ambient power arriving at one ET antenna.
    DirectLink,
    /// `ps * gamma1 * gamma2`: ambient power after the AS -> ER -> ET hops.
    #[default]
    BackscatterLink,
}

impl InterferenceReference {
    pub fn as_str(&self) -> &'static str {
        match self {
            InterferenceReference::DirectLink => "direct_link",
            InterferenceReference::BackscatterLink => "backscatter_link",
        }
    }

    pub fn power(&self, params: &SystemParams) -> Result<f64> {
        let g1 = path_loss(params.d1, params.k0, params.d0, params.alpha)?;
        let g2 = path_loss(params.d2, params.k0, params.d0, params.alpha)?;
        let g3 = path_loss(params.d3, params.k0, params.d0, params.alpha)?;
        Ok(match self {
            InterferenceReference::DirectLink => params.ps * g3,
            InterferenceReference::BackscatterLink => params.ps * g1 * g2,
        })
    }
}

impl std::str::FromStr for InterferenceReference {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "direct_link" => Ok(InterferenceReference::DirectLink),
            "backscatter_link" => Ok(InterferenceReference::BackscatterLink),
            other => Err(format!(
                "expected direct_link or backscatter_link, got `{other}`"
            )),
        }
    }
}

/// Interference power for a reference-to-interference ratio given in dB.
pub fn sigma_i2_from_ratio_db(
    params: &SystemParams,
    ratio_db: f64,
    reference: InterferenceReference,
) -> Result<f64> {
    if !ratio_db.is_finite() {
        return Err(Error::invalid("interference_ratio_db", "must be finite"));
    }
    Ok(reference.power(params)? / 10f64.powf(ratio_db / 10.0))
}

/// Large-scale attenuation `k0 * (d / d0)^(-alpha)`.
pub fn path_loss(d: f64, k0: f64, d0: f64, alpha: f64) -> Result<f64> {
    positive("d", d)?;
    positive("d0", d0)?;
    positive("k0", k0)?;
    if !alpha.is_finite() {
        return Err(Error::invalid("alpha", "must be finite"));
    }
    Ok(k0 * (d / d0).powf(-alpha))
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("must be finite and > 0, got {v}"),
        ))
    }
}

fn fading_order(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.5 {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("Nakagami order must be >= 0.5, got {v}"),
        ))
    }
}

impl SystemParams {
    /// Default deployment with the given symbol and chip counts.
    ///
    /// `ts = 5 us` and `tc = 500 ns` are the defaults, so `ns * ts == nc * tc`
    /// only holds when `nc == 10 * ns`; adjust `ts`/`tc` otherwise.
    pub fn with_defaults(ns: usize, nc: usize) -> Self {
        SystemParams {
            d1: 200.0,
            d2: 10.0,
            d3: 200.0,
            d0: 1.0,
            k0: 1e-3,
            alpha: CALIBRATED_ALPHA,
            ps: 1.0,
            pt: 1.0,
            sigma_n2: 1e-18,
            sigma_i2: 0.0,
            ts: 5e-6,
            tc: 500e-9,
            ns,
            nc,
            m: 500,
            m_g: 1.0,
            m_h: 1.0,
            m_f: 10.0,
            t_off: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d1", self.d1),
            ("d2", self.d2),
            ("d3", self.d3),
            ("d0", self.d0),
            ("k0", self.k0),
            ("ps", self.ps),
            ("pt", self.pt),
            ("sigma_n2", self.sigma_n2),
            ("ts", self.ts),
            ("tc", self.tc),
        ] {
            positive(name, v)?;
        }
        if !self.alpha.is_finite() {
            return Err(Error::invalid("alpha", "must be finite"));
        }
        if !(self.sigma_i2.is_finite() && self.sigma_i2 >= 0.0) {
            return Err(Error::invalid("sigma_i2", "must be finite and >= 0"));
        }
        if !(self.t_off.is_finite() && self.t_off >= 0.0) {
            return Err(Error::invalid("t_off", "must be finite and >= 0"));
        }
        if self.ns == 0 {
            return Err(Error::invalid("ns", "must be >= 1"));
        }
        if self.nc == 0 {
            return Err(Error::invalid("nc", "must be >= 1"));
        }
        if self.m == 0 {
            return Err(Error::invalid("m", "must be >= 1"));
        }
        fading_order("m_g", self.m_g)?;
        fading_order("m_h", self.m_h)?;
        fading_order("m_f", self.m_f)?;
        let symbol_span = self.ns as f64 * self.ts;
        let chip_span = self.nc as f64 * self.tc;
        if (symbol_span - chip_span).abs() > TIMING_TOLERANCE * symbol_span.max(chip_span) {
            return Err(Error::TimingConsistency {
                symbol_span,
                chip_span,
            });
        }
        Ok(())
    }

    pub fn derive(&self) -> Result<DerivedParams> {
        self.validate()?;
        Ok(DerivedParams {
            gamma1: path_loss(self.d1, self.k0, self.d0, self.alpha)?,
            gamma2: path_loss(self.d2, self.k0, self.d0, self.alpha)?,
            gamma3: path_loss(self.d3, self.k0, self.d0, self.alpha)?,
            tb: self.ns as f64 * self.ts,
            chips_per_symbol: ChipRatio::new(self.nc, self.ns),
        })
    }

    /// Backscatter phase duration `ns * ts`.
    pub fn tb(&self) -> f64 {
        self.ns as f64 * self.ts
    }

    /// `(key, value)` pairs in config-file order, values in shortest
    /// round-trip form.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("d1", num(self.d1)),
            ("d2", num(self.d2)),
            ("d3", num(self.d3)),
            ("d0", num(self.d0)),
            ("k0", num(self.k0)),
            ("alpha", num(self.alpha)),
            ("ps", num(self.ps)),
            ("pt", num(self.pt)),
            ("sigma_n2", num(self.sigma_n2)),
            ("sigma_i2", num(self.sigma_i2)),
            ("ts", num(self.ts)),
            ("tc", num(self.tc)),
            ("ns", self.ns.to_string()),
            ("nc", self.nc.to_string()),
            ("m", self.m.to_string()),
            ("m_g", num(self.m_g)),
            ("m_h", num(self.m_h)),
            ("m_f", num(self.m_f)),
            ("t_off", num(self.t_off)),
        ]
    }
}

/// Shortest round-trip text, switching to exponent form for very small or
/// large magnitudes.
fn num(x: f64) -> String {
    if x != 0.0 && !(1e-3..1e6).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

impl HarvesterModel {
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("a0", num(self.a0)),
            ("b0", num(self.b0)),
            ("c0", num(self.c0)),
        ]
    }
}

/// Serialize to the config text format. `load_config` reads it back unchanged.
pub fn to_config_string(params: &SystemParams, harvester: &HarvesterModel) -> String {
    let mut out = String::new();
    for (k, v) in params.entries().into_iter().chain(harvester.entries()) {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

/// Parse and validate a config. Missing keys take their defaults; `ns` and
/// `nc` are required.
pub fn load_config(source: &str) -> Result<(SystemParams, HarvesterModel)> {
    let mut p = SystemParams::with_defaults(0, 0);
    let mut h = HarvesterModel::default();
    let (mut have_ns, mut have_nc) = (false, false);
    let mut sigma_i2_set = false;
    let mut ratio_db: Option<f64> = None;
    let mut reference = InterferenceReference::default();

    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: line_no,
            reason: format!("expected `key = value`, got `{line}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let float = || -> Result<f64> {
            value.parse::<f64>().map_err(|e| Error::Parse {
                line: line_no,
                reason: format!("`{key}`: {e}"),
            })
        };
        let count = || -> Result<usize> {
            value.parse::<usize>().map_err(|e| Error::Parse {
                line: line_no,
                reason: format!("`{key}`: {e}"),
            })
        };
        match key {
            "d1" => p.d1 = float()?,
            "d2" => p.d2 = float()?,
            "d3" => p.d3 = float()?,
            "d0" => p.d0 = float()?,
            "k0" => p.k0 = float()?,
            "alpha" => p.alpha = float()?,
            "ps" => p.ps = float()?,
            "pt" => p.pt = float()?,
            "sigma_n2" => p.sigma_n2 = float()?,
            "sigma_i2" => {
                p.sigma_i2 = float()?;
                sigma_i2_set = true;
            }
            "interference_ratio_db" => ratio_db = Some(float()?),
            "interference_reference" => {
                reference = value.parse().map_err(|reason| Error::Parse {
                    line: line_no,
                    reason,
                })?
            }
            "ts" => p.ts = float()?,
            "tc" => p.tc = float()?,
            "ns" => {
                p.ns = count()?;
                have_ns = true;
            }
            "nc" => {
                p.nc = count()?;
                have_nc = true;
            }
            "m" => p.m = count()?,
            "m_g" => p.m_g = float()?,
            "m_h" => p.m_h = float()?,
            "m_f" => p.m_f = float()?,
            "t_off" => p.t_off = float()?,
            "a0" => h.a0 = float()?,
            "b0" => h.b0 = float()?,
            "c0" => h.c0 = float()?,
            other => {
                return Err(Error::UnknownKey {
                    line: line_no,
                    key: other.to_string(),
                })
            }
        }
    }
    if !have_ns {
        return Err(Error::MissingKey("ns"));
    }
    if !have_nc {
        return Err(Error::MissingKey("nc"));
    }
    if let Some(db) = ratio_db {
        if sigma_i2_set {
            return Err(Error::invalid(
                "interference_ratio_db",
                "set either sigma_i2 or interference_ratio_db, not both",
            ));
        }
        p.sigma_i2 = sigma_i2_from_ratio_db(&p, db, reference)?;
    }
    p.validate()?;
    h.validate()?;
    Ok((p, h))
}

pub fn load_config_file(path: impl AsRef<Path>) -> Result<(SystemParams, HarvesterModel)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
        line: 0,
        reason: format!("reading {}: {e}", path.display()),
    })?;
    load_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn path_loss_examples() {
        assert_eq!(path_loss(1.0, 0.001, 1.0, 2.5).unwrap(), 0.001);
        // 0.001 * 10^-2.5 and 0.001 * 200^-2.5, evaluated by hand
        assert!(rel(path_loss(10.0, 0.001, 1.0, 2.5).unwrap(), 3.162_277_660e-6) < 1e-9);
        assert!(rel(path_loss(200.0, 0.001, 1.0, 2.5).unwrap(), 1.767_766_953e-9) < 1e-9);
    }

    #[test]
    fn path_loss_rejects_non_positive() {
        assert!(path_loss(0.0, 0.001, 1.0, 2.5).is_err());
        assert!(path_loss(1.0, 0.0, 1.0, 2.5).is_err());
        assert!(path_loss(1.0, 0.001, -1.0, 2.5).is_err());
    }

    #[test]
    fn derive_examples() {
        let mut p = SystemParams::with_defaults(10, 100);
        p.alpha = 2.5;
        let d = p.derive().unwrap();
        assert!(rel(d.gamma2, 3.162_277_660e-6) < 1e-9);
        assert!(rel(d.tb, 50e-6) < 1e-12);
        assert_eq!(d.chips_per_symbol.as_integer(), Some(10));
        p.d2 = p.d0;
        assert_eq!(p.derive().unwrap().gamma2, p.k0);
    }

    #[test]
    fn config_round_trip() {
        let mut p = SystemParams::with_defaults(4, 160);
        p.ts = 20e-6;
        p.m_f = 1.0;
        p.sigma_i2 = 3.5e-17;
        let h = HarvesterModel {
            a0: 1000.0,
            ..Default::default()
        };
        let text = to_config_string(&p, &h);
        assert_eq!(load_config(&text).unwrap(), (p, h));
    }

    #[test]
    fn config_timing_violation() {
        let err = load_config("ns = 10\nnc = 99\n").unwrap_err();
        assert!(matches!(err, Error::TimingConsistency { .. }), "{err}");
    }

    #[test]
    fn empty_config_needs_counts() {
        assert_eq!(load_config("").unwrap_err(), Error::MissingKey("ns"));
        assert_eq!(load_config("ns = 1").unwrap_err(), Error::MissingKey("nc"));
        let (p, h) = load_config("# defaults\nns = 1\nnc = 10\n").unwrap();
        assert_eq!(p, SystemParams::with_defaults(1, 10));
        assert_eq!(h, HarvesterModel::default());
    }

    #[test]
    fn unknown_key_rejected() {
        let err = load_config("ns = 1\nnc = 10\nsigma_n = 1e-18\n").unwrap_err();
        assert_eq!(
            err,
            Error::UnknownKey {
                line: 3,
                key: "sigma_n".into()
            }
        );
    }

    #[test]
    fn bad_values_rejected() {
        assert!(matches!(
            load_config("ns = 1\nnc = 10\nm_f = 0.3"),
            Err(Error::InvalidParameter { name: "m_f", .. })
        ));
        assert!(matches!(
            load_config("ns = 1\nnc = 10\nm = 0"),
            Err(Error::InvalidParameter { name: "m", .. })
        ));
        assert!(matches!(
            load_config("ns = 1\nnc = 10\nps = abc"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            load_config("ns = 1\nnc = 10\nd1 200"),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn interference_ratio_db() {
        let (p, _) =
            load_config("ns = 4\nnc = 160\nts = 20e-6\ninterference_ratio_db = 20").unwrap();
        let d = p.derive().unwrap();
        assert!(rel(p.sigma_i2, d.gamma1 * d.gamma2 / 100.0) < 1e-12);
        let (p, _) = load_config(
            "ns = 4\nnc = 160\nts = 20e-6\ninterference_ratio_db = 30\ninterference_reference = direct_link",
        )
        .unwrap();
        assert!(rel(p.sigma_i2, p.derive().unwrap().gamma3 / 1000.0) < 1e-12);
        assert!(load_config("ns = 1\nnc = 10\nsigma_i2 = 0\ninterference_ratio_db = 3").is_err());
    }

    proptest::proptest! {
        #[test]
        fn path_loss_decreasing(a in 0.1f64..1e4, stretch in 1.001f64..100.0, alpha in 0.1f64..6.0) {
            let b = a * stretch;
            proptest::prop_assert!(path_loss(a, 1e-3, 1.0, alpha).unwrap() > path_loss(b, 1e-3, 1.0, alpha).unwrap());
        }

        #[test]
        fn derive_is_pure(ns in 1usize..50, k in 1usize..40) {
            let p = SystemParams::with_defaults(ns, ns * k);
            let p = SystemParams { tc: p.ts / k as f64, ..p };
            let a = p.derive().unwrap();
            let b = p.clone().derive().unwrap();
            proptest::prop_assert_eq!(a.gamma1.to_bits(), b.gamma1.to_bits());
            proptest::prop_assert_eq!(a.gamma2.to_bits(), b.gamma2.to_bits());
            proptest::prop_assert_eq!(a.tb.to_bits(), b.tb.to_bits());
        }
    }
}
