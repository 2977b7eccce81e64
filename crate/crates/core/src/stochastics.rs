//! Random primitives: Nakagami-m channels, ambient symbols, post-correlator
//! noise, and the per-trial stream splitting that keeps Monte Carlo runs
//! reproducible under any thread count.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::config::SystemParams;
use crate::error::{Error, Result};

/// Independent random stream owned by one consumer within one trial.
pub type Stream = ChaCha8Rng;

/// What a substream is used for. Each label gets its own ChaCha stream, so
/// adding draws to one consumer never shifts another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Substream {
    ChannelG = 0,
    ChannelF = 1,
    ChannelH = 2,
    Symbols = 3,
    Noise = 4,
    Interference = 5,
    Chips = 6,
}

const LABEL_BITS: u32 = 3;
const ATTEMPT_BITS: u32 = 4;

/// Largest redraw attempt index representable in a stream id.
pub const MAX_ATTEMPT: u32 = (1 << ATTEMPT_BITS) - 1;

/// Key of one Monte Carlo trial.
///
/// `(master_seed, trial_index, attempt, label)` maps injectively onto a ChaCha
/// key (from `master_seed`) and a 64-bit stream id, for
/// `trial_index < 2^57` and `attempt <= MAX_ATTEMPT`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrialSeed {
    pub master_seed: u64,
    pub trial_index: u64,
}

impl TrialSeed {
    pub fn new(master_seed: u64, trial_index: u64) -> Self {
        TrialSeed {
            master_seed,
            trial_index,
        }
    }

    pub fn stream(&self, label: Substream) -> Stream {
        self.stream_for_attempt(label, 0)
    }

    /// Stream for a redraw of this trial (used when a draw is degenerate).
    pub fn stream_for_attempt(&self, label: Substream, attempt: u32) -> Stream {
        assert!(
            attempt <= MAX_ATTEMPT,
            "attempt {attempt} exceeds {MAX_ATTEMPT}"
        );
        assert!(
            self.trial_index < 1 << (64 - LABEL_BITS - ATTEMPT_BITS),
            "trial index {} out of range",
            self.trial_index
        );
        let id = (self.trial_index << (LABEL_BITS + ATTEMPT_BITS))
            | ((attempt as u64) << LABEL_BITS)
            | label as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(id);
        rng
    }
}

/// One draw of `CN(0, 1)`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `n` i.i.d. unit-power Nakagami-m fading coefficients.
///
/// `|x|^2 ~ Gamma(m, 1/m)` and the phase is uniform on `[0, 2pi)`; for
/// `m = 1` this is exactly `CN(0, 1)`.
pub fn sample_nakagami_vector<R: Rng + ?Sized>(
    m: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if !(m.is_finite() && m >= 0.5) {
        return Err(Error::invalid(
            "m",
            format!("Nakagami order must be >= 0.5, got {m}"),
        ));
    }
    if n == 0 {
        return Err(Error::invalid("n", "length must be >= 1"));
    }
    let power = Gamma::new(m, 1.0 / m).map_err(|e| Error::invalid("m", e.to_string()))?;
    Ok((0..n)
        .map(|_| {
            let amp = power.sample(rng).sqrt();
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            Complex64::from_polar(amp, phase)
        })
        .collect())
}

/// Fading for one backscatter + power-transfer slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// AS -> ER.
    pub g: Complex64,
    /// ER -> ET, one entry per antenna.
    pub f: Vec<Complex64>,
    /// AS -> ET, one entry per antenna.
    pub h: Vec<Complex64>,
}

pub fn sample_g(params: &SystemParams, seed: &TrialSeed, attempt: u32) -> Result<Complex64> {
    let mut rng = seed.stream_for_attempt(Substream::ChannelG, attempt);
    Ok(sample_nakagami_vector(params.m_g, 1, &mut rng)?[0])
}

pub fn sample_channels(
    params: &SystemParams,
    seed: &TrialSeed,
    attempt: u32,
) -> Result<ChannelRealization> {
    let g = sample_g(params, seed, attempt)?;
    let f = sample_nakagami_vector(
        params.m_f,
        params.m,
        &mut seed.stream_for_attempt(Substream::ChannelF, attempt),
    )?;
    let h = sample_nakagami_vector(
        params.m_h,
        params.m,
        &mut seed.stream_for_attempt(Substream::ChannelH, attempt),
    )?;
    Ok(ChannelRealization { g, f, h })
}

/// Unit-power ambient symbols. The `sqrt(ps)` amplitude is applied when
/// signals are built, not stored here.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientFrame {
    pub symbols: Vec<Complex64>,
    pub ps: f64,
    pub ts: f64,
}

/// `count` i.i.d. `CN(0, 1)` symbols of duration `ts`.
pub fn sample_symbols<R: Rng + ?Sized>(
    count: usize,
    ps: f64,
    ts: f64,
    rng: &mut R,
) -> AmbientFrame {
    AmbientFrame {
        symbols: (0..count).map(|_| complex_normal(rng)).collect(),
        ps,
        ts,
    }
}

pub fn sample_ambient<R: Rng + ?Sized>(params: &SystemParams, rng: &mut R) -> AmbientFrame {
    sample_symbols(params.ns, params.ps, params.ts, rng)
}

/// `m` i.i.d. `CN(0, variance)` entries: correlator-output noise
/// (`sigma_n2 / (nc tc)`) or neighbouring interference (`sigma_i2 / (nc tc)`).
pub fn sample_post_correlator_noise<R: Rng + ?Sized>(
    variance: f64,
    m: usize,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if !(variance.is_finite() && variance > 0.0) {
        return Err(Error::invalid(
            "variance_scale",
            format!("must be > 0, got {variance}"),
        ));
    }
    let scale = variance.sqrt();
    Ok((0..m).map(|_| complex_normal(rng) * scale).collect())
}
