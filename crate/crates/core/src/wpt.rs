//! Power-transfer phase: retrodirective beam, incident RF power at the
//! energy receiver (exact and large-array closed forms) and the sigmoid
//! harvester.

use num_complex::Complex64;

use crate::config::{DerivedParams, HarvesterModel, SystemParams};
use crate::correlator::{offset_scale, CorrelatorOutput};
use crate::error::{Error, Result};
use crate::stochastics::ChannelRealization;

/// Per-antenna transmit amplitudes, `||x_t||^2 = pt`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSignal {
    pub x_t: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSample {
    /// Incident RF power at the receiver (W).
    pub q_rf: f64,
    /// Harvested power (W).
    pub q: f64,
}

/// Conjugate beam `sqrt(pt) * conj(x_r) / ||x_r||`.
pub fn retro_beam(x_r: &[Complex64], pt: f64) -> Result<BeamSignal> {
    let norm = x_r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::Degenerate(format!(
            "cannot beamform on x_r with norm {norm}"
        )));
    }
    let scale = pt.sqrt() / norm;
    Ok(BeamSignal {
        x_t: x_r.iter().map(|z| z.conj() * scale).collect(),
    })
}

/// `|sqrt(gamma2) f^T x_t|^2` with `x_t = retro_beam(x_r, pt)`.
pub fn incident_power(x_r: &[Complex64], f: &[Complex64], gamma2: f64, pt: f64) -> Result<f64> {
    if x_r.len() != f.len() {
        return Err(Error::invalid("f", "length differs from x_r"));
    }
    let beam = retro_beam(x_r, pt)?;
    let r_er: Complex64 = f.iter().zip(&beam.x_t).map(|(f, x)| f * x).sum();
    Ok(gamma2 * r_er.norm_sqr())
}

pub fn incident_power_exact(
    out: &CorrelatorOutput,
    channels: &ChannelRealization,
    params: &SystemParams,
) -> Result<f64> {
    let gamma2 = params.derive()?.gamma2;
    incident_power(&out.x_r, &channels.f, gamma2, params.pt)
}

/// Per-trial random inputs of the large-array closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticInputs {
    pub g_abs2: f64,
    pub mu: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsymptoticScenario {
    /// Pseudo-random chips with `ns <= nc`.
    PnSymbolsSpanChips,
    /// Pseudo-random chips with `ns >= nc`.
    PnChipsSpanSymbols,
    /// Balanced chips: the direct-link term is gone.
    Balanced,
    /// Balanced chips with the replica lagging by `t_off`.
    Offset,
    /// Neighbouring-source interference `sigma_i2` on top of the direct link.
    Interference,
}

/// Large-array incident power for one trial.
///
/// Writing `S = g1 g2 |g|^2 mu`, `A = g3 nu w` (`w = (ns/nc)^2` when
/// `ns <= nc`, else 1) and `N = sigma_n2 ns / (ts ps)`:
///
/// * PN: `g2 pt (S (M + 1/m_f) + A + N) / (S + A + N)`
/// * Balanced: the same with `A = 0`
/// * Offset: numerator signal term scaled by `offset_scale(t_off, tc)^2`
/// * Interference: `sigma_i2 ns / ts` added to both sides (written with the
///   `ps` factor multiplied through)
pub fn incident_power_asymptotic(
    scenario: AsymptoticScenario,
    inputs: &AsymptoticInputs,
    params: &SystemParams,
    derived: &DerivedParams,
) -> f64 {
    let DerivedParams {
        gamma1,
        gamma2,
        gamma3,
        ..
    } = *derived;
    let AsymptoticInputs { g_abs2, mu, nu } = *inputs;
    let array_gain = params.m as f64 + 1.0 / params.m_f;
    let ns = params.ns as f64;
    let nc = params.nc as f64;
    let noise = params.sigma_n2 * ns / (params.ts * params.ps);
    let signal = gamma1 * gamma2 * g_abs2 * mu;
    let ratio = match scenario {
        AsymptoticScenario::PnSymbolsSpanChips => {
            let ambient = gamma3 * nu * (ns / nc).powi(2);
            (signal * array_gain + ambient + noise) / (signal + ambient + noise)
        }
        AsymptoticScenario::PnChipsSpanSymbols => {
            let ambient = gamma3 * nu;
            (signal * array_gain + ambient + noise) / (signal + ambient + noise)
        }
        AsymptoticScenario::Balanced => (signal * array_gain + noise) / (signal + noise),
        AsymptoticScenario::Offset => {
            let k = offset_scale(params.t_off, params.tc).powi(2);
            (k * signal * array_gain + noise) / (signal + noise)
        }
        AsymptoticScenario::Interference => {
            let ps = params.ps;
            let ambient = ps * gamma3 * nu * (ns / nc).powi(2);
            let interference = params.sigma_i2 * ns / params.ts;
            let thermal = params.sigma_n2 * ns / params.ts;
            (ps * signal * array_gain + ambient + interference + thermal)
                / (ps * signal + ambient + interference + thermal)
        }
    };
    gamma2 * params.pt * ratio
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Sigmoid harvester, shifted and rescaled so that `harvest(0) == 0` and
/// `harvest(inf) == c0`.
pub fn harvest(q_rf: f64, model: &HarvesterModel) -> f64 {
    let HarvesterModel { a0, b0, c0 } = *model;
    let floor = logistic(a0 * (0.0 - b0));
    (c0 * logistic(a0 * (q_rf - b0)) - c0 * floor) / (1.0 - floor)
}
