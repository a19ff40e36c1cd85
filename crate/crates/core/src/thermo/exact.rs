use serde::Serialize;

use crate::error::Result;
use crate::linalg::ComplexMatrix;
use crate::propagate::{reversed_pass, walk_records, Node, Propagation};
use crate::protocol::{OutcomeHistory, Protocol};
use crate::state::{matrix_entropy, P_FLOOR};

/// Exact quantities of one complete record.
#[derive(Clone, Debug, Serialize)]
pub struct RecordSummary {
    pub record: OutcomeHistory,
    /// P[Y]
    pub probability: f64,
    /// P_tr[Ȳ | {λ_{τ−t}^Y}]
    pub p_tr: f64,
    /// ln(P[Y]/P_tr[Ȳ]); +∞ when P_tr = 0, NaN when P[Y] = 0.
    pub sigma_cg: f64,
    /// Σ_γ P_tr[Γ̄] restricted to backward endpoints with p_a > 0.
    #[serde(skip)]
    reachable_tr: f64,
}

/// Ensemble averages of a discrete protocol by summation over records.
#[derive(Clone, Debug, Serialize)]
pub struct ExactSummary {
    pub records: Vec<RecordSummary>,
    pub mean_sigma: f64,
    pub mean_sigma_cg: f64,
    pub mean_heat: f64,
    /// ⟨e^{−σ}⟩
    pub exp_neg_sigma: f64,
    /// ⟨e^{−(σ−σ_cg)}⟩ over records with finite σ_cg.
    pub exp_neg_sigma_minus_cg: f64,
    /// Probability mass of records with infinite σ_cg.
    pub excluded_probability: f64,
    /// S(ρ) − Σ_y P[y] S(ρ^y) at the first measurement.
    pub mutual_information: Option<f64>,
    pub transfer_entropy: f64,
    /// Energy removed by the feedback unitaries.
    pub work: f64,
    /// Energy change caused by the measurements themselves.
    pub quantum_heat: f64,
    #[serde(skip)]
    pub average_final: ComplexMatrix,
}

/// Information gained by a measurement on ρ̃ (unnormalized, trace w):
/// w·[S(ρ) − Σ_y P(y) S(ρ_y)].
fn information_gain(rho: &ComplexMatrix, branches: &[ComplexMatrix]) -> f64 {
    let w = rho.trace().re;
    if w <= P_FLOOR {
        return 0.0;
    }
    let mut gain = w * matrix_entropy(&rho.scale_real(1.0 / w));
    for b in branches {
        let p = b.trace().re;
        if p > P_FLOOR {
            gain -= p * matrix_entropy(&b.scale_real(1.0 / p));
        }
    }
    gain
}

pub fn exact_summary(protocol: &Protocol, mode: Propagation) -> Result<ExactSummary> {
    let mut records = Vec::new();
    let mut mean_heat = 0.0;
    let mut average_final = ComplexMatrix::zeros(protocol.dim());
    let mut mutual_information = None;
    let mut transfer_entropy = 0.0;
    let mut work = 0.0;
    let mut quantum_heat = 0.0;
    let init = protocol.initial_spectrum();
    let theta = protocol.theta();
    let reachable_starts: Vec<_> = init
        .vectors
        .iter()
        .zip(&init.probabilities)
        .filter(|(_, &p)| p > 0.0)
        .map(|(v, _)| theta.apply_vector(v))
        .collect();

    walk_records(protocol, mode, &mut |node| {
        match node {
            Node::Heat { heat } => mean_heat += heat,
            Node::Measurement { prefix, state, time, event } => {
                let kraus = &protocol.events()[event].kraus;
                let h = protocol.feedback().hamiltonian(prefix, time);
                let branches: Vec<ComplexMatrix> = kraus.operators().iter().map(|m| m.sandwich(state)).collect();
                let gain = information_gain(state, &branches);
                transfer_entropy += gain;
                if event == 0 {
                    mutual_information = Some(gain);
                }
                let mut full = prefix.to_vec();
                let e_pre = h.trace_product(state).re;
                for (y, b) in branches.iter().enumerate() {
                    let e_post = h.trace_product(b).re;
                    quantum_heat += e_post;
                    full.push(crate::protocol::Outcome { time, event, outcome: y });
                    if let Some(u) = protocol.feedback_unitary(&full) {
                        work += e_post - h.trace_product(&u.sandwich(b)).re;
                    }
                    full.pop();
                }
                quantum_heat -= e_pre;
            }
            Node::Leaf { record, state } => {
                average_final += state;
                let probability = state.trace().re.max(0.0);
                let back = reversed_pass(protocol, record, mode)?;
                let p_tr = back.ln_probability.exp();
                let reachable_tr = if p_tr > 0.0 {
                    p_tr * reachable_starts.iter().map(|v| back.state.expectation(v).re).sum::<f64>()
                } else {
                    0.0
                };
                let sigma_cg = if probability <= 0.0 {
                    f64::NAN
                } else if p_tr <= 0.0 {
                    f64::INFINITY
                } else {
                    probability.ln() - back.ln_probability
                };
                records.push(RecordSummary {
                    record: OutcomeHistory::from_entries(record.to_vec())?,
                    probability,
                    p_tr,
                    sigma_cg,
                    reachable_tr,
                });
            }
        }
        Ok(())
    })?;

    let refs = protocol.reference_spectrum();
    let mut mean_ln_pf = 0.0;
    let mut sigma_infinite = false;
    for (v, &p_f) in refs.vectors.iter().zip(&refs.probabilities) {
        let pop = average_final.expectation(v).re;
        if pop > P_FLOOR {
            if p_f > 0.0 {
                mean_ln_pf += pop * p_f.ln();
            } else {
                sigma_infinite = true;
            }
        }
    }
    let mean_ln_pa: f64 = init.probabilities.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum();
    let mean_sigma =
        if sigma_infinite { f64::INFINITY } else { mean_ln_pa - mean_ln_pf + protocol.beta() * mean_heat };

    let mut mean_sigma_cg = 0.0;
    let mut exp_neg_sigma = 0.0;
    let mut exp_neg_sigma_minus_cg = 0.0;
    let mut excluded_probability = 0.0;
    for r in &records {
        exp_neg_sigma += r.reachable_tr;
        if r.probability <= 0.0 {
            continue;
        }
        if r.sigma_cg.is_infinite() {
            excluded_probability += r.probability;
            continue;
        }
        mean_sigma_cg += r.probability * r.sigma_cg;
        exp_neg_sigma_minus_cg += r.reachable_tr * (r.probability / r.p_tr);
    }
    if excluded_probability > 0.0 {
        mean_sigma_cg = f64::INFINITY;
    }
    Ok(ExactSummary {
        records,
        mean_sigma,
        mean_sigma_cg,
        mean_heat,
        exp_neg_sigma,
        exp_neg_sigma_minus_cg,
        excluded_probability,
        mutual_information,
        transfer_entropy,
        work,
        quantum_heat,
        average_final,
    })
}
