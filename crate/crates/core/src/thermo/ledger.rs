use serde::Serialize;

use crate::backward::p_tr_outcomes;
use crate::error::{Error, Result};
use crate::propagate::{forward_pass, Propagation};
use crate::protocol::{OutcomeHistory, Protocol};
use crate::trajectory::TrajectoryRecord;

/// Entropy bookkeeping of one trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EntropyLedger {
    /// −ln p_f + ln p_a
    pub delta_s: f64,
    pub heat: f64,
    /// delta_s + β·heat; +∞ when p_f = 0.
    pub sigma: f64,
    /// Coarse-grained entropy of the trajectory's record; NaN until set,
    /// +∞ when the reversed record is impossible.
    pub sigma_cg: f64,
}

impl EntropyLedger {
    pub fn sigma_infinite(&self) -> bool {
        self.sigma == f64::INFINITY
    }

    pub fn sigma_cg_infinite(&self) -> bool {
        self.sigma_cg == f64::INFINITY
    }

    pub fn with_sigma_cg(mut self, sigma_cg: f64) -> Self {
        self.sigma_cg = sigma_cg;
        self
    }
}

/// σ[Γ] = −ln p_f + ln p_a + βQ[Γ].
pub fn entropy_production(record: &TrajectoryRecord, protocol: &Protocol) -> EntropyLedger {
    let p_a = protocol.initial_spectrum().probabilities[record.a];
    let p_f = protocol.reference_spectrum().probabilities[record.f];
    let delta_s = if p_f > 0.0 { p_a.ln() - p_f.ln() } else { f64::INFINITY };
    let sigma = delta_s + protocol.beta() * record.heat;
    EntropyLedger { delta_s, heat: record.heat, sigma, sigma_cg: f64::NAN }
}

/// σ_cg[Y] = ln(P[Y] / P_tr[Ȳ | {λ_{τ−t}^Y}]).
pub fn sigma_cg(protocol: &Protocol, y: &OutcomeHistory, mode: Propagation) -> Result<f64> {
    protocol.check_history(y)?;
    let ln_p = forward_pass(protocol, y.entries(), mode)?.ln_probability;
    if ln_p == f64::NEG_INFINITY {
        return Err(Error::UnreachableHistory("the forward record has zero probability".into()));
    }
    let back = p_tr_outcomes(protocol, y, mode)?;
    Ok(if back.is_zero() { f64::INFINITY } else { ln_p - back.ln_value })
}
