//! Parameter sweeps with CSV output, and the self-check suite behind the
//! `validate` command.
//!
//! A CSV starts with `#` lines echoing the tool version, the sweep settings
//! and every base parameter, followed by a header row and one row per sweep
//! value in input order. Numbers are written as lowercase scientific
//! notation with nine significant digits.

use std::fmt::Write as _;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{sigma_i2_from_ratio_db, HarvesterModel, InterferenceReference, SystemParams};
use crate::correlator::{
    correlate_closed_form, correlate_waveform, despread_closed_form, despread_waveform,
    offset_scale, AdditiveTerms,
};
use crate::engine::{run_trials, Experiment, Path, RunOptions, RunReport, Scenario};
use crate::error::{Error, Result};
use crate::stochastics::{
    sample_channels, sample_nakagami_vector, sample_symbols, Substream, TrialSeed,
};
use crate::training::{
    gen_balanced_pattern, gen_pn, is_balanced, walsh_hadamard_row, BalancedPattern,
    TrainingSequence,
};
use crate::wpt::{harvest, incident_power_asymptotic, AsymptoticInputs, AsymptoticScenario};
use crate::VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    /// Backscatter phase duration in seconds; `ns = tb / ts`, `nc = tb / tc`.
    Tb,
    /// Ambient source power in watts.
    Ps,
    /// Antenna count.
    M,
    /// Replica lag in seconds.
    Offset,
    /// Symbols actually sent during the backscatter phase.
    Mismatch,
    /// Reference-to-interference power ratio in dB.
    InterferenceDb,
}

impl SweepVariable {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepVariable::Tb => "tb",
            SweepVariable::Ps => "ps",
            SweepVariable::M => "m",
            SweepVariable::Offset => "offset",
            SweepVariable::Mismatch => "mismatch",
            SweepVariable::InterferenceDb => "interference_db",
        }
    }

    /// First CSV column name, with its unit.
    pub fn column(&self) -> &'static str {
        match self {
            SweepVariable::Tb => "tb_s",
            SweepVariable::Ps => "ps_w",
            SweepVariable::M => "m",
            SweepVariable::Offset => "t_off_s",
            SweepVariable::Mismatch => "actual_symbols",
            SweepVariable::InterferenceDb => "interference_ratio_db",
        }
    }

    fn integral(&self) -> bool {
        matches!(self, SweepVariable::M | SweepVariable::Mismatch)
    }
}

impl FromStr for SweepVariable {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "tb" => SweepVariable::Tb,
            "ps" => SweepVariable::Ps,
            "m" => SweepVariable::M,
            "offset" => SweepVariable::Offset,
            "mismatch" => SweepVariable::Mismatch,
            "interference_db" => SweepVariable::InterferenceDb,
            other => return Err(format!("unknown sweep variable `{other}`")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PathSelection {
    Exact,
    Asymptotic,
    #[default]
    Both,
}

impl PathSelection {
    pub fn as_str(&self) -> &'static str {
        match self {
            PathSelection::Exact => "exact",
            PathSelection::Asymptotic => "asymptotic",
            PathSelection::Both => "both",
        }
    }

    fn includes(&self, path: Path) -> bool {
        matches!(
            (self, path),
            (PathSelection::Both, _)
                | (PathSelection::Exact, Path::Exact)
                | (PathSelection::Asymptotic, Path::Asymptotic)
        )
    }
}

impl FromStr for PathSelection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "exact" => PathSelection::Exact,
            "asymptotic" => PathSelection::Asymptotic,
            "both" => PathSelection::Both,
            other => {
                return Err(format!(
                    "unknown path `{other}`, expected exact, asymptotic or both"
                ))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub base: SystemParams,
    pub harvester: HarvesterModel,
    /// Ignored for offset, mismatch and interference sweeps, which imply
    /// their own scenario.
    pub scenario: Scenario,
    pub paths: PathSelection,
    pub trials: u64,
    pub seed: u64,
    /// When set, `nc = ns * chips_per_symbol` and `tc = tb / nc` at every point.
    pub chips_per_symbol: Option<usize>,
    pub interference_reference: InterferenceReference,
}

impl SweepSpec {
    pub fn new(variable: SweepVariable, values: Vec<f64>, base: SystemParams) -> Self {
        SweepSpec {
            variable,
            values,
            base,
            harvester: HarvesterModel::default(),
            scenario: Scenario::Balanced,
            paths: PathSelection::Both,
            trials: 10_000,
            seed: 1,
            chips_per_symbol: None,
            interference_reference: InterferenceReference::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Sweep(m));
        if self.values.is_empty() {
            return err("no sweep values".into());
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return err(format!("sweep value {v} is not finite"));
        }
        let up = self.values.windows(2).all(|w| w[0] < w[1]);
        let down = self.values.windows(2).all(|w| w[0] > w[1]);
        if !(up || down) {
            return err("sweep values must be strictly increasing or strictly decreasing".into());
        }
        if self.variable.integral() {
            if let Some(v) = self.values.iter().find(|v| v.fract() != 0.0 || **v < 1.0) {
                return err(format!(
                    "{} values must be positive integers, got {v}",
                    self.variable.as_str()
                ));
            }
        }
        if self.trials == 0 {
            return err("trials must be >= 1".into());
        }
        if self.variable == SweepVariable::Mismatch && self.paths == PathSelection::Asymptotic {
            return err("the mismatch sweep has no closed form; use the exact path".into());
        }
        Ok(())
    }

    fn scenario(&self, value: f64) -> Scenario {
        match self.variable {
            SweepVariable::Offset => Scenario::Offset,
            SweepVariable::Mismatch => Scenario::Mismatch {
                actual_symbols: value as usize,
            },
            SweepVariable::InterferenceDb => Scenario::Interference,
            _ => self.scenario,
        }
    }

    /// Parameters at one sweep point.
    pub fn point(&self, value: f64) -> Result<SystemParams> {
        let mut p = self.base.clone();
        match self.variable {
            SweepVariable::Tb => {
                p.ns = whole("tb / ts", value / p.ts)?;
                p.nc = whole("tb / tc", value / p.tc)?;
            }
            SweepVariable::Ps => p.ps = value,
            SweepVariable::M => p.m = value as usize,
            SweepVariable::Offset => p.t_off = value,
            SweepVariable::Mismatch => {}
            SweepVariable::InterferenceDb => {}
        }
        if let Some(k) = self.chips_per_symbol {
            let tb = p.tb();
            p.nc = p.ns * k;
            p.tc = tb / p.nc as f64;
        }
        if self.variable == SweepVariable::InterferenceDb {
            p.sigma_i2 = sigma_i2_from_ratio_db(&p, value, self.interference_reference)?;
        }
        p.validate()?;
        Ok(p)
    }
}

fn whole(what: &str, x: f64) -> Result<usize> {
    let r = x.round();
    if r < 1.0 || (x - r).abs() > 1e-6 * r {
        return Err(Error::Sweep(format!(
            "{what} = {x} is not a positive integer"
        )));
    }
    Ok(r as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub params: SystemParams,
    pub exact: Option<RunReport>,
    pub asymptotic: Option<RunReport>,
}

pub fn run_sweep(spec: &SweepSpec, opts: &RunOptions) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    spec.values
        .iter()
        .map(|&value| {
            let params = spec.point(value)?;
            let scenario = spec.scenario(value);
            let run = |path: Path| -> Result<Option<RunReport>> {
                let has_closed_form = !matches!(scenario, Scenario::Mismatch { .. });
                if !spec.paths.includes(path) || (path == Path::Asymptotic && !has_closed_form) {
                    return Ok(None);
                }
                let exp = Experiment {
                    params: params.clone(),
                    harvester: spec.harvester,
                    scenario,
                    path,
                };
                run_trials(&exp, spec.trials, spec.seed, opts).map(Some)
            };
            Ok(SweepRow {
                value,
                exact: run(Path::Exact)?,
                asymptotic: run(Path::Asymptotic)?,
                params,
            })
        })
        .collect()
}

fn num(x: f64) -> String {
    format!("{x:.8e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Renders rows as CSV, preamble included. Worker count is deliberately not
/// echoed: it never changes the numbers.
pub fn to_csv(spec: &SweepSpec, rows: &[SweepRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# retrowpt {VERSION}");
    let _ = writeln!(out, "# sweep = {}", spec.variable.as_str());
    let scenario = if spec.values.is_empty() {
        spec.scenario
    } else {
        spec.scenario(spec.values[0])
    };
    let _ = writeln!(out, "# scenario = {}", scenario.name());
    let _ = writeln!(out, "# path = {}", spec.paths.as_str());
    let _ = writeln!(out, "# trials = {}", spec.trials);
    let _ = writeln!(out, "# seed = {}", spec.seed);
    let cps = spec
        .chips_per_symbol
        .map(|k| k.to_string())
        .unwrap_or_else(|| "base".into());
    let _ = writeln!(out, "# chips_per_symbol = {cps}");
    let _ = writeln!(
        out,
        "# interference_reference = {}",
        spec.interference_reference.as_str()
    );
    let values: Vec<String> = spec
        .values
        .iter()
        .map(|&v| fmt_value(spec.variable, v))
        .collect();
    let _ = writeln!(out, "# values = {}", values.join(" "));
    for (k, v) in spec
        .base
        .entries()
        .into_iter()
        .chain(spec.harvester.entries())
    {
        let _ = writeln!(out, "# {k} = {v}");
    }
    let _ = writeln!(
        out,
        "{},ns,nc,tc_s,mean_q_exact,stderr_q_exact,mean_q_rf_exact,mean_magnitude_ratio_exact,\
         mean_q_asymptotic,stderr_q_asymptotic,mean_q_rf_asymptotic",
        spec.variable.column()
    );
    for row in rows {
        let e = row.exact.as_ref();
        let a = row.asymptotic.as_ref();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            fmt_value(spec.variable, row.value),
            row.params.ns,
            row.params.nc,
            num(row.params.tc),
            opt(e.map(|r| r.mean_q)),
            opt(e.map(|r| r.stderr_q).filter(|s| s.is_finite())),
            opt(e.map(|r| r.mean_q_rf)),
            opt(e.and_then(|r| r.mean_magnitude_ratio)),
            opt(a.map(|r| r.mean_q)),
            opt(a.map(|r| r.stderr_q).filter(|s| s.is_finite())),
            opt(a.map(|r| r.mean_q_rf)),
        );
    }
    out
}

fn fmt_value(variable: SweepVariable, v: f64) -> String {
    if variable.integral() {
        format!("{}", v as u64)
    } else {
        num(v)
    }
}

/// Outcome of one named self-check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub seed: u64,
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name)
            .collect()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )?;
        }
        Ok(())
    }
}

const INSTANCES: u64 = 200;

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn outcome(name: &'static str, result: Result<(bool, String)>) -> CheckOutcome {
    match result {
        Ok((passed, detail)) => CheckOutcome {
            name,
            passed,
            detail,
        },
        Err(e) => CheckOutcome {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn balanced_params(ns: usize, k: usize) -> SystemParams {
    let mut p = SystemParams::with_defaults(ns, ns * k);
    p.tc = p.ts / k as f64;
    p
}

fn check_closed_form(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0f64;
    for i in 0..INSTANCES {
        let base = rng.random_range(1..=12usize);
        let ratio = rng.random_range(1..=12usize);
        let (ns, nc) = if i % 2 == 0 {
            (base, base * ratio)
        } else {
            (base * ratio, base)
        };
        let mut p = SystemParams::with_defaults(ns, nc);
        p.tc = p.ts * ns as f64 / nc as f64;
        let t = TrialSeed::new(seed, i);
        let ch = sample_channels(&p, &t, 0)?;
        let seq = gen_pn(nc, p.tc, &mut t.stream(Substream::Chips))?;
        let frame = sample_symbols(ns, p.ps, p.ts, &mut t.stream(Substream::Symbols));
        let a = correlate_closed_form(&p, &ch, &frame, &seq, AdditiveTerms::zero(p.m))?;
        let b = correlate_waveform(&p, &ch, &frame, &seq, 0.0, p.ts, AdditiveTerms::zero(p.m))?;
        let scale = norm(&a.x_r);
        let err = a
            .x_r
            .iter()
            .zip(&b.x_r)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
            / scale;
        worst = worst.max(err);
    }
    Ok((
        worst <= 1e-9,
        format!("{INSTANCES} instances, worst relative error {worst:.3e}"),
    ))
}

fn check_cancellation(seed: u64, inject_fault: bool) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a);
    let mut worst = 0f64;
    for i in 0..INSTANCES {
        let ns = rng.random_range(1..=20usize);
        let k = 2 * rng.random_range(1..=20usize);
        let p = balanced_params(ns, k);
        let d = p.derive()?;
        let mut seq = gen_balanced_pattern(ns, k, p.tc, BalancedPattern::ContiguousHalves)?;
        if inject_fault {
            seq = seq.with_flipped_chip(rng.random_range(0..seq.len()));
        }
        let t = TrialSeed::new(seed, i);
        let ch = sample_channels(&p, &t, 0)?;
        let frame = sample_symbols(ns, p.ps, p.ts, &mut t.stream(Substream::Symbols));
        let out = correlate_closed_form(&p, &ch, &frame, &seq, AdditiveTerms::zero(p.m))?;
        worst = worst.max(norm(&out.x_i) / ((d.gamma3 * p.ps).sqrt() * norm(&ch.h)));
    }
    Ok((
        worst <= 1e-12,
        format!("worst ||x_i|| / (sqrt(g3 ps) ||h||) = {worst:.3e}"),
    ))
}

fn check_offset(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5);
    let (mut worst_s, mut worst_i) = (0f64, 0f64);
    for i in 0..INSTANCES {
        let ns = rng.random_range(1..=10usize);
        let k = 2 * rng.random_range(1..=5usize);
        let p = balanced_params(ns, k);
        let seq = gen_balanced_pattern(ns, k, p.tc, BalancedPattern::Alternating)?;
        let frame = sample_symbols(
            ns,
            p.ps,
            p.ts,
            &mut TrialSeed::new(seed, i).stream(Substream::Symbols),
        );
        let t_off = rng.random_range(0.0..=2.0) * p.tc;
        let sync = despread_waveform(&frame, &seq, 0.0, p.ts)?;
        let lag = despread_waveform(&frame, &seq, t_off, p.ts)?;
        // relative to the synchronized gain, since the lagged one can vanish
        worst_s = worst_s.max(
            (lag.signal - sync.signal * offset_scale(t_off, p.tc)).norm() / sync.signal.norm(),
        );
        worst_i = worst_i.max(lag.ambient.norm() / sync.signal.norm());
    }
    Ok((
        worst_s <= 1e-9 && worst_i <= 1e-12,
        format!("worst signal error {worst_s:.3e}, worst residual ambient {worst_i:.3e}"),
    ))
}

fn check_hadamard() -> Result<(bool, String)> {
    let mut order = 2;
    while order <= 64 {
        let rows: Vec<TrainingSequence> = (0..order)
            .map(|r| walsh_hadamard_row(order, r, 1e-6))
            .collect::<Result<_>>()?;
        for (i, a) in rows.iter().enumerate() {
            let sum: i64 = a.chips().iter().map(|&c| c as i64).sum();
            if i > 0 && sum != 0 {
                return Ok((false, format!("row {i} of order {order} sums to {sum}")));
            }
            for (j, b) in rows.iter().enumerate().skip(i + 1) {
                let dot: i64 = a
                    .chips()
                    .iter()
                    .zip(b.chips())
                    .map(|(&x, &y)| (x * y) as i64)
                    .sum();
                if dot != 0 {
                    return Ok((
                        false,
                        format!("rows {i} and {j} of order {order} are not orthogonal"),
                    ));
                }
            }
        }
        if !is_balanced(&rows[order / 2], 1)? {
            return Ok((
                false,
                format!("row {} of order {order} is not balanced", order / 2),
            ));
        }
        order *= 2;
    }
    Ok((
        true,
        "orders 2..64: zero sums and pairwise orthogonal".into(),
    ))
}

fn check_moments(seed: u64) -> Result<(bool, String)> {
    let m = 500;
    let mut detail = Vec::new();
    let mut ok = true;
    for m_f in [1.0, 10.0] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ m_f as u64);
        let trials = 1000;
        let mean = (0..trials)
            .map(|_| sample_nakagami_vector(m_f, m, &mut rng).map(|f| norm(&f).powi(4) / m as f64))
            .sum::<Result<f64>>()?
            / trials as f64;
        let want = m as f64 + 1.0 / m_f;
        let err = (mean - want).abs() / want;
        ok &= err < 0.02;
        detail.push(format!("m_f = {m_f}: E||f||^4/M = {mean:.2} vs {want:.2}"));
    }
    Ok((ok, detail.join("; ")))
}

fn check_reductions(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1234);
    let mut worst = 0f64;
    for _ in 0..INSTANCES {
        let ns = rng.random_range(1..=20usize);
        let k = 2 * rng.random_range(1..=10usize);
        let mut p = balanced_params(ns, k);
        p.sigma_n2 = 10f64.powf(rng.random_range(-22.0..-16.0));
        let d = p.derive()?;
        let x = AsymptoticInputs {
            g_abs2: rng.random_range(0.0..5.0),
            mu: rng.random_range(0.0..50.0),
            nu: 0.0,
        };
        let eq = |s, x: &AsymptoticInputs, p: &SystemParams| incident_power_asymptotic(s, x, p, &d);
        let balanced = eq(AsymptoticScenario::Balanced, &x, &p);
        let pn_nu0 = eq(AsymptoticScenario::PnSymbolsSpanChips, &x, &p);
        let x_nu = AsymptoticInputs {
            nu: rng.random_range(0.0..500.0),
            ..x
        };
        let pn = eq(AsymptoticScenario::PnSymbolsSpanChips, &x_nu, &p);
        let intf = eq(AsymptoticScenario::Interference, &x_nu, &p);
        let offset0 = eq(AsymptoticScenario::Offset, &x, &p);
        for (a, b) in [(balanced, pn_nu0), (intf, pn), (offset0, balanced)] {
            worst = worst.max((a - b).abs() / b);
        }
    }
    Ok((
        worst <= 1e-12,
        format!("worst relative difference {worst:.3e}"),
    ))
}

fn check_harvester(seed: u64) -> Result<(bool, String)> {
    let h = HarvesterModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x77);
    let zero = harvest(0.0, &h);
    let anchor = harvest(h.b0, &h);
    let mut xs: Vec<f64> = (0..10_000).map(|_| rng.random_range(0.0..0.02)).collect();
    xs.sort_by(f64::total_cmp);
    let qs: Vec<f64> = xs.iter().map(|&x| harvest(x, &h)).collect();
    // non-decreasing: deep in saturation neighbouring inputs round to the same q
    let monotone = qs.windows(2).all(|q| q[1] >= q[0]);
    let bounded = qs.iter().all(|&q| (0.0..h.c0).contains(&q));
    let anchor_ok = (anchor - 11.557_401_991_185_1e-3).abs() <= 1e-9;
    Ok((
        zero == 0.0 && anchor_ok && monotone && bounded,
        format!(
            "q(0) = {zero:e}, q(b0) = {:.10} mW, monotone {monotone}, bounded {bounded}",
            anchor * 1e3
        ),
    ))
}

fn check_closed_form_despread_balance(seed: u64) -> Result<(bool, String)> {
    // balanced despread has exactly zero ambient gain, not just small
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x99);
    for i in 0..INSTANCES {
        let ns = rng.random_range(1..=16usize);
        let k = 2 * rng.random_range(1..=8usize);
        let seq = gen_balanced_pattern(ns, k, 1e-6, BalancedPattern::ContiguousHalves)?;
        let frame = sample_symbols(
            ns,
            1.0,
            k as f64 * 1e-6,
            &mut TrialSeed::new(seed, i).stream(Substream::Symbols),
        );
        let d = despread_closed_form(&frame, &seq)?;
        if d.ambient != Complex64::ZERO {
            return Ok((false, format!("instance {i}: ambient gain {}", d.ambient)));
        }
    }
    Ok((
        true,
        format!("{INSTANCES} balanced instances with exactly zero ambient gain"),
    ))
}

/// Runs every self-check. `inject_fault` flips one chip of each balanced
/// sequence in the cancellation check, which must then fail.
pub fn validate(seed: u64, inject_fault: bool) -> ValidationReport {
    let checks = vec![
        outcome("closed_form_vs_waveform", check_closed_form(seed)),
        outcome(
            "balanced_cancellation",
            check_cancellation(seed, inject_fault),
        ),
        outcome(
            "balanced_zero_ambient_gain",
            check_closed_form_despread_balance(seed),
        ),
        outcome("offset_scaling", check_offset(seed)),
        outcome("hadamard_properties", check_hadamard()),
        outcome("asymptotic_moments", check_moments(seed)),
        outcome("closed_form_reductions", check_reductions(seed)),
        outcome("harvester", check_harvester(seed)),
    ];
    ValidationReport { seed, checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pn_spec(values: Vec<f64>) -> SweepSpec {
        let mut s = SweepSpec::new(
            SweepVariable::Tb,
            values,
            SystemParams::with_defaults(1, 10),
        );
        s.scenario = Scenario::Pn;
        s.trials = 50;
        s
    }

    #[test]
    fn spec_validation() {
        assert!(pn_spec(vec![]).validate().is_err());
        assert!(pn_spec(vec![5e-6, 5e-6]).validate().is_err());
        assert!(pn_spec(vec![10e-6, 5e-6, 20e-6]).validate().is_err());
        assert!(pn_spec(vec![20e-6, 10e-6]).validate().is_ok());
        let mut s = pn_spec(vec![3.0, 4.5]);
        s.variable = SweepVariable::M;
        assert!(s.validate().is_err());
        let mut s = pn_spec(vec![8.0]);
        s.variable = SweepVariable::Mismatch;
        s.paths = PathSelection::Asymptotic;
        assert!(s.validate().is_err());
    }

    #[test]
    fn tb_points() {
        let s = pn_spec(vec![5e-6, 15e-6]);
        let p = s.point(15e-6).unwrap();
        assert_eq!((p.ns, p.nc), (3, 30));
        assert!(matches!(s.point(7e-6), Err(Error::Sweep(_))));
        let mut s = s;
        s.chips_per_symbol = Some(4);
        let p = s.point(15e-6).unwrap();
        assert_eq!((p.ns, p.nc), (3, 12));
        assert!((p.tc - 1.25e-6).abs() < 1e-18);
    }

    #[test]
    fn csv_layout() {
        let s = pn_spec(vec![5e-6, 10e-6]);
        let rows = run_sweep(&s, &RunOptions::default()).unwrap();
        let csv = to_csv(&s, &rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("# retrowpt "));
        assert!(csv.contains("# seed = 1\n") && csv.contains("# alpha = "));
        assert!(!csv.contains('\r') && !csv.contains("workers"));
        let header = lines.iter().position(|l| !l.starts_with('#')).unwrap();
        assert!(lines[header].starts_with("tb_s,ns,nc,"));
        let cells: Vec<&str> = lines[header + 1].split(',').collect();
        assert_eq!(cells.len(), 11);
        assert_eq!(cells[0], "5.00000000e-6");
        assert_eq!((cells[1], cells[2]), ("1", "10"));
        for c in &cells[4..] {
            assert!(c.parse::<f64>().is_ok(), "{c}");
        }
        assert_eq!(lines.len(), header + 3);
    }

    #[test]
    fn csv_blank_cells_for_missing_path() {
        let mut s = pn_spec(vec![5e-6]);
        s.paths = PathSelection::Exact;
        let csv = to_csv(&s, &run_sweep(&s, &RunOptions::default()).unwrap());
        let last = csv.lines().last().unwrap();
        assert!(last.ends_with(",,,"), "{last}");
    }

    #[test]
    fn csv_is_reproducible() {
        let mut s = pn_spec(vec![5e-6, 10e-6, 20e-6]);
        s.trials = 40;
        let a = to_csv(
            &s,
            &run_sweep(
                &s,
                &RunOptions {
                    workers: 1,
                    noise_free: false,
                },
            )
            .unwrap(),
        );
        let b = to_csv(
            &s,
            &run_sweep(
                &s,
                &RunOptions {
                    workers: 3,
                    noise_free: false,
                },
            )
            .unwrap(),
        );
        assert_eq!(a, b);
    }

    #[test]
    fn interference_sweep_monotone() {
        let mut base = balanced_params(4, 2);
        base.ts = 20e-6;
        base.tc = 10e-6;
        let mut s = SweepSpec::new(SweepVariable::InterferenceDb, vec![20.0, 35.0, 50.0], base);
        s.trials = 300;
        let rows = run_sweep(&s, &RunOptions::default()).unwrap();
        let q: Vec<f64> = rows
            .iter()
            .map(|r| r.asymptotic.as_ref().unwrap().mean_q)
            .collect();
        assert!(q[0] < q[1] && q[1] < q[2], "{q:?}");
        assert!(rows.iter().all(|r| r.params.sigma_i2 > 0.0));
    }

    #[test]
    fn ps_and_m_sweeps_increase() {
        let mut s = SweepSpec::new(
            SweepVariable::Ps,
            vec![0.1, 1.0, 10.0],
            balanced_params(4, 2),
        );
        s.trials = 500;
        let q: Vec<f64> = run_sweep(&s, &RunOptions::default())
            .unwrap()
            .iter()
            .map(|r| r.exact.as_ref().unwrap().mean_q)
            .collect();
        assert!(q.windows(2).all(|w| w[0] < w[1]), "{q:?}");
        let mut s = SweepSpec::new(
            SweepVariable::M,
            vec![50.0, 200.0, 800.0],
            balanced_params(4, 2),
        );
        s.trials = 500;
        let q: Vec<f64> = run_sweep(&s, &RunOptions::default())
            .unwrap()
            .iter()
            .map(|r| r.asymptotic.as_ref().unwrap().mean_q)
            .collect();
        assert!(q.windows(2).all(|w| w[0] < w[1]), "{q:?}");
    }

    #[test]
    fn offset_sweep_minimum_at_half_chip() {
        let base = balanced_params(4, 2);
        let tc = base.tc;
        let mut s = SweepSpec::new(
            SweepVariable::Offset,
            vec![0.0, 0.25 * tc, 0.5 * tc, 0.75 * tc],
            base,
        );
        s.trials = 300;
        s.paths = PathSelection::Exact;
        let q: Vec<f64> = run_sweep(&s, &RunOptions::default())
            .unwrap()
            .iter()
            .map(|r| r.exact.as_ref().unwrap().mean_q)
            .collect();
        assert!(q[0] > q[1] && q[1] > q[2] && q[2] < q[3], "{q:?}");
    }

    #[test]
    fn validation_passes_and_detects_fault() {
        let r = validate(1, false);
        assert!(r.passed(), "{r}");
        let r = validate(1, true);
        assert_eq!(r.failures(), vec!["balanced_cancellation"]);
    }
}
