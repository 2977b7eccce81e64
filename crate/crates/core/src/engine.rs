//! Monte Carlo estimation of the average harvested power.
//!
//! Every trial draws its randomness from its own [`TrialSeed`] streams, runs
//! on a rayon pool, and lands in a slot indexed by trial number. Reduction
//! walks the slots in order with compensated summation, so a report depends
//! only on `(params, scenario, path, trials, seed)` and never on the number
//! of workers.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::{DerivedParams, HarvesterModel, SystemParams};
use crate::correlator::{
    despread_closed_form, despread_waveform, mu_nu, AdditiveTerms, LinkGains, Regime, SegmentWalker,
};
use crate::error::{Error, Result};
use crate::stochastics::{
    sample_channels, sample_g, sample_post_correlator_noise, sample_symbols, Substream, TrialSeed,
};
use crate::training::{gen_balanced_pattern, gen_pn, BalancedPattern, TrainingSequence};
use crate::wpt::{
    harvest, incident_power, incident_power_asymptotic, AsymptoticInputs, AsymptoticScenario,
};

/// Redraws allowed for a trial whose correlator output is degenerate.
pub const MAX_RESAMPLES: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Fresh pseudo-random chips every trial.
    Pn,
    /// Contiguous balanced chips, perfect synchronization.
    Balanced,
    /// Alternating balanced chips, replica lagging by `params.t_off`.
    Offset,
    /// Balanced chips plus neighbouring interference of power `params.sigma_i2`.
    Interference,
    /// Alternating balanced chips designed for `params.ns` symbols while the ambient
    /// source actually sends `actual_symbols` over the same span.
    Mismatch { actual_symbols: usize },
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Pn => "pn",
            Scenario::Balanced => "balanced",
            Scenario::Offset => "offset",
            Scenario::Interference => "interference",
            Scenario::Mismatch { .. } => "mismatch",
        }
    }

    fn uses_balanced_chips(&self) -> bool {
        !matches!(self, Scenario::Pn)
    }

    /// Layout of the balanced chips. Timing imperfections need a sign flip on
    /// every chip; with perfect timing any balanced layout cancels the direct
    /// link, so the canonical halves are kept there.
    pub fn balanced_pattern(&self) -> BalancedPattern {
        match self {
            Scenario::Offset | Scenario::Mismatch { .. } => BalancedPattern::Alternating,
            _ => BalancedPattern::ContiguousHalves,
        }
    }

    /// Checks that `params` fit this scenario on `path`.
    pub fn check(&self, params: &SystemParams, path: Path) -> Result<()> {
        let fail = |reason: String| {
            Err(Error::Scenario {
                scenario: self.name().to_string(),
                reason,
            })
        };
        params.validate()?;
        if self.uses_balanced_chips() {
            if !params.nc.is_multiple_of(params.ns) {
                return fail(format!(
                    "nc = {} is not a multiple of ns = {}",
                    params.nc, params.ns
                ));
            }
            let k = params.nc / params.ns;
            if k < 2 || !k.is_multiple_of(2) {
                return fail(format!(
                    "balanced chips need an even chips_per_symbol >= 2, got {k}"
                ));
            }
        }
        match (self, path) {
            (Scenario::Pn, Path::Asymptotic) => {
                Regime::of(params.ns, params.nc)?;
            }
            (Scenario::Offset, _) => {
                if params.t_off >= params.tb() {
                    return fail(format!(
                        "t_off = {:e} must be below tb = {:e}",
                        params.t_off,
                        params.tb()
                    ));
                }
            }
            (Scenario::Mismatch { .. }, Path::Asymptotic) => {
                return fail("no closed form exists for a symbol-duration mismatch".into());
            }
            (Scenario::Mismatch { actual_symbols }, Path::Exact) if *actual_symbols == 0 => {
                return fail("actual_symbols must be >= 1".into());
            }
            _ => {}
        }
        Ok(())
    }

    fn asymptotic(&self, params: &SystemParams) -> Result<AsymptoticScenario> {
        Ok(match self {
            Scenario::Pn => match Regime::of(params.ns, params.nc)? {
                Regime::SymbolsSpanChips => AsymptoticScenario::PnSymbolsSpanChips,
                Regime::ChipsSpanSymbols => AsymptoticScenario::PnChipsSpanSymbols,
            },
            Scenario::Balanced => AsymptoticScenario::Balanced,
            Scenario::Offset => AsymptoticScenario::Offset,
            Scenario::Interference => AsymptoticScenario::Interference,
            Scenario::Mismatch { .. } => {
                return Err(Error::Scenario {
                    scenario: self.name().into(),
                    reason: "exact path only".into(),
                })
            }
        })
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::Mismatch { actual_symbols } => write!(f, "mismatch:{actual_symbols}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pn" => Ok(Scenario::Pn),
            "balanced" => Ok(Scenario::Balanced),
            "offset" => Ok(Scenario::Offset),
            "interference" => Ok(Scenario::Interference),
            other => match other.strip_prefix("mismatch:").map(str::parse) {
                Some(Ok(actual_symbols)) => Ok(Scenario::Mismatch { actual_symbols }),
                _ => Err(format!("unknown scenario `{other}`")),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Path {
    /// Correlate, beamform on `x_r` and measure `|f^T x_t|^2` per trial.
    Exact,
    /// Large-array closed forms fed by per-trial `|g|^2`, `mu`, `nu`.
    Asymptotic,
}

impl Path {
    pub fn as_str(&self) -> &'static str {
        match self {
            Path::Exact => "exact",
            Path::Asymptotic => "asymptotic",
        }
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Path {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exact" => Ok(Path::Exact),
            "asymptotic" => Ok(Path::Asymptotic),
            other => Err(format!(
                "unknown path `{other}`, expected exact or asymptotic"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Worker threads; 0 lets rayon decide.
    pub workers: usize,
    /// Drop thermal noise at the correlator output (exact path only).
    pub noise_free: bool,
}

/// Everything a run needs besides the trial count and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub params: SystemParams,
    pub harvester: HarvesterModel,
    pub scenario: Scenario,
    pub path: Path,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialResult {
    pub trial_index: u64,
    pub q_rf: f64,
    pub q: f64,
    /// `||x_i|| / ||x_s||`; `None` on the asymptotic path or when `x_s = 0`.
    pub magnitude_ratio: Option<f64>,
    /// Redraws consumed before a usable realization was found.
    pub resamples: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub mean_q: f64,
    pub mean_q_rf: f64,
    /// Mean over the trials where the ratio is defined.
    pub mean_magnitude_ratio: Option<f64>,
    /// Sample standard deviation of `q` over `sqrt(trials)`; NaN for one trial.
    pub stderr_q: f64,
    pub trials: u64,
    pub master_seed: u64,
    pub path: Path,
    pub scenario: Scenario,
    pub params: SystemParams,
    pub harvester: HarvesterModel,
    /// Total redraws over all trials.
    pub resampled: u64,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        iter.into_iter().for_each(|x| s.add(x));
        s
    }
}

/// Mean and standard error of the mean, both with compensated sums.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().copied().collect::<CompensatedSum>().value() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let ss = xs
        .iter()
        .map(|x| (x - mean).powi(2))
        .collect::<CompensatedSum>()
        .value();
    (mean, (ss / (n - 1.0)).sqrt() / n.sqrt())
}

struct Prepared<'a> {
    exp: &'a Experiment,
    derived: DerivedParams,
    gains: LinkGains,
    balanced: Option<TrainingSequence>,
    asymptotic: Option<AsymptoticScenario>,
    /// Ambient symbols drawn per trial and their on-air duration.
    symbols: usize,
    ts_actual: f64,
    noise_var: f64,
    interference_var: f64,
    noise_free: bool,
}

impl<'a> Prepared<'a> {
    fn new(exp: &'a Experiment, opts: &RunOptions) -> Result<Self> {
        let p = &exp.params;
        exp.scenario.check(p, exp.path)?;
        exp.harvester.validate()?;
        let derived = p.derive()?;
        let balanced = if exp.scenario.uses_balanced_chips() {
            Some(gen_balanced_pattern(
                p.ns,
                p.nc / p.ns,
                p.tc,
                exp.scenario.balanced_pattern(),
            )?)
        } else {
            None
        };
        let asymptotic = match exp.path {
            Path::Asymptotic => Some(exp.scenario.asymptotic(p)?),
            Path::Exact => None,
        };
        let (symbols, ts_actual) = match exp.scenario {
            Scenario::Mismatch { actual_symbols } => {
                let ts_actual = derived.tb / actual_symbols as f64;
                (
                    SegmentWalker::new(p.nc, p.tc, 0.0, ts_actual)?.symbols_needed(),
                    ts_actual,
                )
            }
            _ => (p.ns, p.ts),
        };
        Ok(Prepared {
            exp,
            gains: LinkGains::new(p, &derived),
            noise_var: p.sigma_n2 / derived.tb,
            interference_var: p.sigma_i2 / derived.tb,
            derived,
            balanced,
            asymptotic,
            symbols,
            ts_actual,
            noise_free: opts.noise_free,
        })
    }

    fn sequence(&self, seed: &TrialSeed, attempt: u32) -> Result<TrainingSequence> {
        match &self.balanced {
            Some(seq) => Ok(seq.clone()),
            None => gen_pn(
                self.exp.params.nc,
                self.exp.params.tc,
                &mut seed.stream_for_attempt(Substream::Chips, attempt),
            ),
        }
    }

    /// `Ok(None)` marks a degenerate draw that should be redrawn.
    fn attempt(&self, seed: &TrialSeed, attempt: u32) -> Result<Option<(f64, Option<f64>)>> {
        let p = &self.exp.params;
        let seq = self.sequence(seed, attempt)?;
        let mut sym_rng = seed.stream_for_attempt(Substream::Symbols, attempt);
        let frame = sample_symbols(self.symbols, p.ps, self.ts_actual, &mut sym_rng);

        if let Some(scenario) = self.asymptotic {
            let g = sample_g(p, seed, attempt)?;
            let mn = mu_nu(&frame, &seq)?;
            let inputs = AsymptoticInputs {
                g_abs2: g.norm_sqr(),
                mu: mn.mu,
                nu: mn.nu,
            };
            let q_rf = incident_power_asymptotic(scenario, &inputs, p, &self.derived);
            return Ok(q_rf.is_finite().then_some((q_rf, None)));
        }

        let channels = sample_channels(p, seed, attempt)?;
        let despread = match self.exp.scenario {
            Scenario::Offset => despread_waveform(&frame, &seq, p.t_off, p.ts)?,
            Scenario::Mismatch { .. } => despread_waveform(&frame, &seq, 0.0, self.ts_actual)?,
            _ if Regime::of(p.ns, p.nc).is_ok() => despread_closed_form(&frame, &seq)?,
            _ => despread_waveform(&frame, &seq, 0.0, p.ts)?,
        };
        let n_tilde = if self.noise_free {
            vec![Complex64::ZERO; p.m]
        } else {
            sample_post_correlator_noise(
                self.noise_var,
                p.m,
                &mut seed.stream_for_attempt(Substream::Noise, attempt),
            )?
        };
        let u_tilde = if self.interference_var > 0.0 {
            sample_post_correlator_noise(
                self.interference_var,
                p.m,
                &mut seed.stream_for_attempt(Substream::Interference, attempt),
            )?
        } else {
            vec![Complex64::ZERO; p.m]
        };
        let out = despread.assemble(&self.gains, &channels, AdditiveTerms { n_tilde, u_tilde })?;
        let q_rf = match incident_power(&out.x_r, &channels.f, self.derived.gamma2, p.pt) {
            Ok(q) if q.is_finite() => q,
            Ok(_) | Err(Error::Degenerate(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let xs = norm(&out.x_s);
        let ratio = (xs > 0.0).then(|| norm(&out.x_i) / xs);
        Ok(Some((q_rf, ratio)))
    }

    fn trial(&self, seed: TrialSeed) -> Result<TrialResult> {
        for attempt in 0..=MAX_RESAMPLES {
            if let Some((q_rf, magnitude_ratio)) = self.attempt(&seed, attempt)? {
                return Ok(TrialResult {
                    trial_index: seed.trial_index,
                    q_rf,
                    q: harvest(q_rf, &self.exp.harvester),
                    magnitude_ratio,
                    resamples: attempt,
                });
            }
        }
        Err(Error::DegenerateTrial {
            trial: seed.trial_index,
            attempts: MAX_RESAMPLES + 1,
        })
    }
}

/// One trial, exactly as [`run_trials`] computes it.
pub fn simulate_trial(exp: &Experiment, seed: TrialSeed, opts: &RunOptions) -> Result<TrialResult> {
    Prepared::new(exp, opts)?.trial(seed)
}

/// Per-trial results in trial order.
pub fn trial_results(
    exp: &Experiment,
    trials: u64,
    master_seed: u64,
    opts: &RunOptions,
) -> Result<Vec<TrialResult>> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be >= 1"));
    }
    let prepared = Prepared::new(exp, opts)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))?;
    pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|i| prepared.trial(TrialSeed::new(master_seed, i)))
            .collect()
    })
}

pub fn run_trials(
    exp: &Experiment,
    trials: u64,
    master_seed: u64,
    opts: &RunOptions,
) -> Result<RunReport> {
    let results = trial_results(exp, trials, master_seed, opts)?;
    Ok(summarize(exp, master_seed, &results))
}

pub fn summarize(exp: &Experiment, master_seed: u64, results: &[TrialResult]) -> RunReport {
    let q: Vec<f64> = results.iter().map(|r| r.q).collect();
    let (mean_q, stderr_q) = mean_stderr(&q);
    let n = results.len() as f64;
    let mean_q_rf = results
        .iter()
        .map(|r| r.q_rf)
        .collect::<CompensatedSum>()
        .value()
        / n;
    let ratios: Vec<f64> = results.iter().filter_map(|r| r.magnitude_ratio).collect();
    let mean_magnitude_ratio = (!ratios.is_empty())
        .then(|| ratios.iter().copied().collect::<CompensatedSum>().value() / ratios.len() as f64);
    RunReport {
        mean_q,
        mean_q_rf,
        mean_magnitude_ratio,
        stderr_q,
        trials: results.len() as u64,
        master_seed,
        path: exp.path,
        scenario: exp.scenario,
        params: exp.params.clone(),
        harvester: exp.harvester,
        resampled: results.iter().map(|r| r.resamples as u64).sum(),
    }
}

/// Mean `||x_i|| / ||x_s||` under pseudo-random chips.
pub fn magnitude_ratio_stat(
    params: &SystemParams,
    trials: u64,
    master_seed: u64,
    workers: usize,
) -> Result<Option<f64>> {
    let exp = Experiment {
        params: params.clone(),
        harvester: HarvesterModel::default(),
        scenario: Scenario::Pn,
        path: Path::Exact,
    };
    let opts = RunOptions {
        workers,
        noise_free: true,
    };
    Ok(run_trials(&exp, trials, master_seed, &opts)?.mean_magnitude_ratio)
}
