//! Built-in qubit protocols: energy- and coherence-basis feedback with one or
//! two measurements, and jump-detection feedback under a periodic drive.

use serde::{Deserialize, Serialize};

use super::{InitialSpec, OutcomeKey, Protocol, ReferenceSpec, Schedule, Window};
use crate::channel::qubit_thermal_pair;
use crate::error::Result;
use crate::kraus::KrausSet;
use crate::linalg::{pauli, ComplexMatrix};
use crate::protocol::Drive;

/// Which readout the discrete feedback protocols use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Energy basis; outcome 1 is answered with a σx flip.
    Classical,
    /// |±⟩ basis; each outcome is rotated onto the ground state.
    Quantum,
}

impl std::str::FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "classical" => Ok(Variant::Classical),
            "quantum" => Ok(Variant::Quantum),
            other => Err(format!("unknown variant '{other}' (expected classical or quantum)")),
        }
    }
}

/// Time before the first measurement; the bath is off until then.
pub const LEAD_TIME: f64 = 0.1;
/// Duration of the final thermalization.
pub const SETTLE_TIME: f64 = 3.5;
/// Rate multiplier during the final thermalization; with the default step
/// it keeps the event probability at 0.09 and leaves e^{−43} of the
/// post-feedback state.
pub const SETTLE_SCALE: f64 = 9.0;
pub const DEFAULT_DT: f64 = 0.01;

/// Feedback unitary for each outcome of the variant.
pub fn feedback_unitaries(variant: Variant) -> [ComplexMatrix; 2] {
    match variant {
        Variant::Classical => [ComplexMatrix::identity(2), pauli::x()],
        Variant::Quantum => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            // |0⟩⟨+| + |1⟩⟨−| and |0⟩⟨−| + |1⟩⟨+|
            [ComplexMatrix::from_real(2, &[s, s, s, -s]), ComplexMatrix::from_real(2, &[s, -s, s, s])]
        }
    }
}

pub fn measurement(variant: Variant, epsilon: f64) -> Result<KrausSet> {
    match variant {
        Variant::Classical => KrausSet::qubit_classical(epsilon),
        Variant::Quantum => KrausSet::qubit_quantum(epsilon),
    }
}

/// Qubit H = (ω/2)σz (ω = κ = 1) starting in its Gibbs state: measurement
/// at t = 0.1, feedback, then thermalization back to the Gibbs state.
pub fn qubit_single(variant: Variant, beta_omega: f64, epsilon: f64) -> Result<Protocol> {
    qubit_feedback(variant, beta_omega, epsilon, &[], DEFAULT_DT)
}

/// As [`qubit_single`] with a second measurement after a partial
/// thermalization of duration `kappa_dt` (κ = 1).
pub fn qubit_double(variant: Variant, beta_omega: f64, epsilon: f64, kappa_dt: f64) -> Result<Protocol> {
    qubit_feedback(variant, beta_omega, epsilon, &[kappa_dt], DEFAULT_DT)
}

/// General form: one measurement at t = 0.1 followed by one more
/// measurement after each of the `gaps`.
pub fn qubit_feedback(variant: Variant, beta_omega: f64, epsilon: f64, gaps: &[f64], dt: f64) -> Result<Protocol> {
    let omega = 1.0;
    let h = pauli::z().scale_real(omega / 2.0);
    let kraus = measurement(variant, epsilon)?;
    let mut times = vec![LEAD_TIME];
    for g in gaps {
        times.push(times.last().unwrap() + g);
    }
    let last = *times.last().unwrap();
    let tau = last + SETTLE_TIME;
    let mut windows: Vec<Window> = times.windows(2).map(|w| Window { start: w[0], end: w[1], scale: 1.0 }).collect();
    windows.push(Window { start: last, end: f64::INFINITY, scale: SETTLE_SCALE });
    let mut b = Protocol::builder(2, beta_omega, tau)
        .name(format!("qubit-{}-{}", variant_name(variant), if gaps.is_empty() { "single".to_string() } else { format!("x{}", gaps.len() + 1) }))
        .dt(dt)
        .hamiltonian(Schedule::constant(h))
        .channels(qubit_thermal_pair(1.0, omega, beta_omega), windows)
        .initial(InitialSpec::Thermal)
        .reference(ReferenceSpec::ThermalFinal);
    for t in times {
        b = b.measurement(t, kraus.clone());
    }
    let [u0, u1] = feedback_unitaries(variant);
    b = b.feedback_unitary(OutcomeKey { event: None, outcome: 0 }, u0).feedback_unitary(OutcomeKey { event: None, outcome: 1 }, u1);
    b.build()
}

fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::Classical => "classical",
        Variant::Quantum => "quantum",
    }
}

/// Parameters of the driven, jump-monitored qubit (β = 1 units).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrivenQubit {
    pub beta: f64,
    pub omega: f64,
    pub chi: f64,
    pub epsilon: f64,
    pub drive_frequency: f64,
    pub kappa: f64,
    pub kappa_m: f64,
    pub tau: f64,
    pub dt: f64,
}

impl Default for DrivenQubit {
    fn default() -> Self {
        DrivenQubit {
            beta: 1.0,
            omega: 0.3,
            chi: 0.04,
            epsilon: 0.2,
            drive_frequency: 0.1 * std::f64::consts::PI,
            kappa: 0.116 * 0.3,
            kappa_m: 1.0,
            tau: 10.0,
            dt: 0.01,
        }
    }
}

/// Detector clicking on the excited state (false clicks with probability ε).
pub fn excited_detector(epsilon: f64) -> Result<KrausSet> {
    KrausSet::unchecked(vec!["click".into()], vec![ComplexMatrix::diag_real(&[epsilon.sqrt(), (1.0 - epsilon).sqrt()])])
}

/// H(t) = (ω/2)σz + χ cos(Ωt) σx with thermal jumps; every detected click
/// is answered with a σx flip.
pub fn driven_qubit(p: &DrivenQubit) -> Result<Protocol> {
    let schedule = Schedule::new(2)
        .with_term(pauli::z(), Drive::Constant(p.omega / 2.0))?
        .with_term(pauli::x(), Drive::Cosine { amplitude: p.chi, frequency: p.drive_frequency, phase: 0.0 })?;
    if !(0.0..=1.0).contains(&p.epsilon) {
        return Err(crate::Error::config("epsilon", "error probability outside [0, 1]"));
    }
    Protocol::builder(2, p.beta, p.tau)
        .name("driven-qubit-monitored")
        .dt(p.dt)
        .hamiltonian(schedule)
        .channels(qubit_thermal_pair(p.kappa, p.omega, p.beta), Vec::new())
        .monitor(p.kappa_m, excited_detector(p.epsilon)?)
        .feedback_unitary(OutcomeKey { event: None, outcome: 0 }, pauli::x())
        .build()
}
