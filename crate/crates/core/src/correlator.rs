//! Despreading at the energy transmitter.
//!
//! The correlator output is `x_r = x_s + x_i + u~ + n~` where `x_s = a f` is
//! the backscattered component and `x_i = b h` the direct-link ambient
//! component. Both scalars are computed two ways:
//!
//! * closed forms valid under perfect synchronization when `ns | nc` or
//!   `nc | ns`;
//! * an exact integration of the piecewise-constant waveforms over their
//!   breakpoint partition, which also covers timing offsets and a mismatched
//!   actual symbol duration.
//!
//! Since every signal is a step function, the waveform integral is a finite
//! sum of interval lengths times products; no quadrature error is involved.

use num_complex::Complex64;

use crate::config::{DerivedParams, SystemParams};
use crate::error::{Error, Result};
use crate::stochastics::{AmbientFrame, ChannelRealization};
use crate::training::TrainingSequence;

/// Which chip/symbol nesting the closed forms use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `ns | nc`: each symbol spans `nc / ns` chips.
    SymbolsSpanChips,
    /// `nc | ns`: each chip spans `ns / nc` symbols.
    ChipsSpanSymbols,
}

impl Regime {
    pub fn of(ns: usize, nc: usize) -> Result<Self> {
        if ns == 0 || nc == 0 {
            return Err(Error::Regime { ns, nc });
        }
        if nc.is_multiple_of(ns) {
            Ok(Regime::SymbolsSpanChips)
        } else if ns.is_multiple_of(nc) {
            Ok(Regime::ChipsSpanSymbols)
        } else {
            Err(Error::Regime { ns, nc })
        }
    }
}

/// `mu = |sum s_i|^2` and the chip-weighted `nu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuNu {
    pub mu: f64,
    pub nu: f64,
    pub regime: Regime,
}

/// Scale-free correlator gains for unit-power symbols:
/// `signal = (1/Tb) int c(t) c_loc(t) s(t) dt` and
/// `ambient = (1/Tb) int c_loc(t) s(t) dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Despread {
    pub signal: Complex64,
    pub ambient: Complex64,
}

/// Amplitudes multiplying the despread gains: `sqrt(g1 g2 ps)` and `sqrt(g3 ps)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGains {
    pub backscatter: f64,
    pub direct: f64,
}

impl LinkGains {
    pub fn new(params: &SystemParams, derived: &DerivedParams) -> Self {
        LinkGains {
            backscatter: (derived.gamma1 * derived.gamma2 * params.ps).sqrt(),
            direct: (derived.gamma3 * params.ps).sqrt(),
        }
    }
}

/// Post-correlation noise and neighbouring interference.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveTerms {
    pub n_tilde: Vec<Complex64>,
    pub u_tilde: Vec<Complex64>,
}

impl AdditiveTerms {
    pub fn zero(m: usize) -> Self {
        AdditiveTerms {
            n_tilde: vec![Complex64::ZERO; m],
            u_tilde: vec![Complex64::ZERO; m],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorOutput {
    pub x_s: Vec<Complex64>,
    pub x_i: Vec<Complex64>,
    pub u_tilde: Vec<Complex64>,
    pub n_tilde: Vec<Complex64>,
    pub x_r: Vec<Complex64>,
    /// `x_s = signal_coeff * f`.
    pub signal_coeff: Complex64,
    /// `x_i = ambient_coeff * h`.
    pub ambient_coeff: Complex64,
}

impl Despread {
    /// Scalars `(a, b)` with `x_s = a f` and `x_i = b h`.
    pub fn coefficients(&self, gains: &LinkGains, g: Complex64) -> (Complex64, Complex64) {
        (
            g * self.signal * gains.backscatter,
            self.ambient * gains.direct,
        )
    }

    pub fn assemble(
        &self,
        gains: &LinkGains,
        channels: &ChannelRealization,
        terms: AdditiveTerms,
    ) -> Result<CorrelatorOutput> {
        let m = channels.f.len();
        if channels.h.len() != m || terms.n_tilde.len() != m || terms.u_tilde.len() != m {
            return Err(Error::invalid(
                "channels",
                "f, h, noise and interference lengths differ",
            ));
        }
        let (a, b) = self.coefficients(gains, channels.g);
        let x_s: Vec<Complex64> = channels.f.iter().map(|f| a * f).collect();
        let x_i: Vec<Complex64> = channels.h.iter().map(|h| b * h).collect();
        let x_r = (0..m)
            .map(|k| x_s[k] + x_i[k] + terms.u_tilde[k] + terms.n_tilde[k])
            .collect();
        Ok(CorrelatorOutput {
            x_s,
            x_i,
            u_tilde: terms.u_tilde,
            n_tilde: terms.n_tilde,
            x_r,
            signal_coeff: a,
            ambient_coeff: b,
        })
    }
}

fn check_frame(frame: &AmbientFrame, seq: &TrainingSequence) -> Result<(usize, usize)> {
    let (ns, nc) = (frame.symbols.len(), seq.len());
    if ns == 0 {
        return Err(Error::invalid("frame", "no symbols"));
    }
    Ok((ns, nc))
}

pub fn mu_nu(frame: &AmbientFrame, seq: &TrainingSequence) -> Result<MuNu> {
    let (ns, nc) = check_frame(frame, seq)?;
    let regime = Regime::of(ns, nc)?;
    let mu = frame.symbols.iter().sum::<Complex64>().norm_sqr();
    let nu = chip_weighted_sum(frame, seq, regime).norm_sqr();
    Ok(MuNu { mu, nu, regime })
}

// sum_i s_i sum_{n in window i} c_n, or sum_n c_n sum_{i in window n} s_i
fn chip_weighted_sum(frame: &AmbientFrame, seq: &TrainingSequence, regime: Regime) -> Complex64 {
    let (ns, nc) = (frame.symbols.len(), seq.len());
    match regime {
        Regime::SymbolsSpanChips => frame
            .symbols
            .iter()
            .zip(seq.window_sums(nc / ns))
            .map(|(s, d)| s * d as f64)
            .sum(),
        Regime::ChipsSpanSymbols => seq
            .chips()
            .iter()
            .zip(frame.symbols.chunks(ns / nc))
            .map(|(&c, w)| w.iter().sum::<Complex64>() * c as f64)
            .sum(),
    }
}

/// Closed-form despread gains under perfect synchronization.
pub fn despread_closed_form(frame: &AmbientFrame, seq: &TrainingSequence) -> Result<Despread> {
    let (ns, nc) = check_frame(frame, seq)?;
    let regime = Regime::of(ns, nc)?;
    let signal = frame.symbols.iter().sum::<Complex64>() / ns as f64;
    let weighted = chip_weighted_sum(frame, seq, regime);
    let ambient = match regime {
        Regime::SymbolsSpanChips => weighted / nc as f64,
        Regime::ChipsSpanSymbols => weighted / ns as f64,
    };
    Ok(Despread { signal, ambient })
}

pub fn correlate_closed_form(
    params: &SystemParams,
    channels: &ChannelRealization,
    frame: &AmbientFrame,
    seq: &TrainingSequence,
    terms: AdditiveTerms,
) -> Result<CorrelatorOutput> {
    let derived = params.derive()?;
    despread_closed_form(frame, seq)?.assemble(&LinkGains::new(params, &derived), channels, terms)
}

/// One interval of the breakpoint partition of `[0, nc * tc]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    /// Index of the chip the tag is applying.
    pub chip: usize,
    /// Index of the local replica chip (delayed by the offset, periodic).
    pub replica_chip: usize,
    /// Index of the ambient symbol on air.
    pub symbol: usize,
}

impl Segment {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }
}

/// Walks the merged chip, replica-chip and symbol boundaries in time order.
#[derive(Debug, Clone)]
pub struct SegmentWalker {
    tc: f64,
    ts: f64,
    t_off: f64,
    tb: f64,
    nc: i64,
    eps: f64,
    t: f64,
    chip: i64,
    replica: i64,
    symbol: usize,
    done: bool,
}

impl SegmentWalker {
    /// `nc` chips of length `tc`, replica delayed by `t_off`, symbols of
    /// length `ts`.
    pub fn new(nc: usize, tc: f64, t_off: f64, ts: f64) -> Result<Self> {
        if nc == 0 {
            return Err(Error::invalid("nc", "must be >= 1"));
        }
        if !(tc.is_finite() && tc > 0.0) {
            return Err(Error::invalid("tc", "must be > 0"));
        }
        if !(ts.is_finite() && ts > 0.0) {
            return Err(Error::invalid("ts_actual", "must be > 0"));
        }
        let tb = nc as f64 * tc;
        if !(t_off.is_finite() && (0.0..tb).contains(&t_off)) {
            return Err(Error::invalid(
                "t_off",
                format!("must lie in [0, {tb:e}), got {t_off:e}"),
            ));
        }
        Ok(SegmentWalker {
            tc,
            ts,
            t_off,
            tb,
            nc: nc as i64,
            eps: 1e-10 * tc.min(ts),
            t: 0.0,
            chip: 0,
            replica: (-t_off / tc).floor() as i64,
            symbol: 0,
            done: false,
        })
    }

    /// Number of symbols the walk touches.
    pub fn symbols_needed(&self) -> usize {
        (((self.tb - self.eps) / self.ts).floor() as usize) + 1
    }
}

impl Iterator for SegmentWalker {
    type Item = Segment;

    fn next(&mut self) -> Option<Segment> {
        if self.done {
            return None;
        }
        let next_chip = (self.chip + 1) as f64 * self.tc;
        let next_replica = self.t_off + (self.replica + 1) as f64 * self.tc;
        let next_symbol = (self.symbol + 1) as f64 * self.ts;
        let end = next_chip.min(next_replica).min(next_symbol).min(self.tb);
        let seg = Segment {
            start: self.t,
            end,
            chip: self.chip as usize,
            replica_chip: self.replica.rem_euclid(self.nc) as usize,
            symbol: self.symbol,
        };
        if end >= self.tb - self.eps {
            self.done = true;
            return Some(Segment {
                end: self.tb,
                ..seg
            });
        }
        if next_chip <= end + self.eps {
            self.chip += 1;
        }
        if next_replica <= end + self.eps {
            self.replica += 1;
        }
        if next_symbol <= end + self.eps {
            self.symbol += 1;
        }
        self.t = end;
        Some(seg)
    }
}

/// Exact despread gains by integrating over the breakpoint partition.
///
/// The local replica is the tag's chip sequence delayed by `t_off` and
/// extended periodically; ambient symbols last `ts_actual` each, while the tag
/// keeps switching on its designed chip grid. `frame` must hold every symbol
/// that overlaps `[0, nc * tc]`.
pub fn despread_waveform(
    frame: &AmbientFrame,
    seq: &TrainingSequence,
    t_off: f64,
    ts_actual: f64,
) -> Result<Despread> {
    let walker = SegmentWalker::new(seq.len(), seq.tc(), t_off, ts_actual)?;
    let needed = walker.symbols_needed();
    if frame.symbols.len() < needed {
        return Err(Error::invalid(
            "frame",
            format!(
                "{} symbols supplied, {needed} overlap the backscatter phase",
                frame.symbols.len()
            ),
        ));
    }
    let tb = seq.len() as f64 * seq.tc();
    let chips = seq.chips();
    let (mut signal, mut ambient) = (Complex64::ZERO, Complex64::ZERO);
    for seg in walker {
        let s = frame.symbols[seg.symbol] * seg.len();
        let local = chips[seg.replica_chip] as f64;
        ambient += s * local;
        signal += s * (local * chips[seg.chip] as f64);
    }
    Ok(Despread {
        signal: signal / tb,
        ambient: ambient / tb,
    })
}

pub fn correlate_waveform(
    params: &SystemParams,
    channels: &ChannelRealization,
    frame: &AmbientFrame,
    seq: &TrainingSequence,
    t_off: f64,
    ts_actual: f64,
    terms: AdditiveTerms,
) -> Result<CorrelatorOutput> {
    let derived = params.derive()?;
    despread_waveform(frame, seq, t_off, ts_actual)?.assemble(
        &LinkGains::new(params, &derived),
        channels,
        terms,
    )
}

/// Factor scaling the synchronized backscatter component when the replica
/// lags by `t_off`, for a chip sequence that alternates sign every chip.
///
/// A triangle wave of period `2 tc`: `1 - 2 t/tc` on `[0, tc]`, then
/// `2 t/tc - 3` on `(tc, 2 tc]`. Zero at odd multiples of `tc/2`.
pub fn offset_scale(t_off: f64, tc: f64) -> f64 {
    let r = t_off.rem_euclid(2.0 * tc);
    if r <= tc {
        1.0 - 2.0 * r / tc
    } else {
        2.0 * r / tc - 3.0
    }
}
