//! Ground truth independent of the sampler and of the density-matrix
//! propagation: closed-form trajectory tables for the qubit feedback
//! protocols, and brute-force enumeration of a small system+reservoir model.

pub mod dilated;
pub mod propagator;
pub mod single;
pub mod two;

pub use dilated::{dilated_verify, DilatedModel, DilatedReport};
pub use propagator::{qubit_propagator_elements, PropagatorElements};
pub use single::enumerate_single_measurement;
pub use two::enumerate_two_measurements;

use serde::Serialize;

/// Trajectories with equal net heat per thermalization segment, grouped.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupedTrajectory {
    /// Initial eigenlabel (0 ground, 1 excited).
    pub a: usize,
    /// Outcome index per measurement.
    pub y: Vec<usize>,
    /// Final eigenlabel.
    pub f: usize,
    /// Net heat released per thermalization segment, in units of ω.
    pub heats: Vec<i32>,
    pub probability: f64,
    pub exp_neg_sigma: f64,
    /// P_tr[Γ̄ | U_Y†]
    pub p_tr: f64,
    /// Symbolic forms of the three values, for audit tables.
    pub formulas: [String; 3],
}

impl GroupedTrajectory {
    pub fn sigma(&self) -> f64 {
        -self.exp_neg_sigma.ln()
    }

    pub fn total_heat(&self) -> i32 {
        self.heats.iter().sum()
    }
}

/// Sums over grouped rows that share the same outcome record.
#[derive(Clone, Debug, PartialEq)]
pub struct RecordMarginal {
    pub y: Vec<usize>,
    pub probability: f64,
    pub p_tr: f64,
}

impl RecordMarginal {
    pub fn sigma_cg(&self) -> f64 {
        (self.probability / self.p_tr).ln()
    }
}

/// P[Y] and P_tr[Ȳ] by summing rows; records in first-appearance order.
pub fn record_marginals(rows: &[GroupedTrajectory]) -> Vec<RecordMarginal> {
    let mut out: Vec<RecordMarginal> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|m| m.y == r.y) {
            Some(m) => {
                m.probability += r.probability;
                m.p_tr += r.p_tr;
            }
            None => out.push(RecordMarginal { y: r.y.clone(), probability: r.probability, p_tr: r.p_tr }),
        }
    }
    out
}

/// P_B[Γ̄] = P_tr[Γ̄|U_Y†]·P[Y]/P_tr[Ȳ|U_Y†] for every row.
pub fn backward_probabilities(rows: &[GroupedTrajectory]) -> Vec<f64> {
    let marginals = record_marginals(rows);
    rows.iter()
        .map(|r| {
            let m = marginals.iter().find(|m| m.y == r.y).expect("row record is in the marginals");
            if m.p_tr > 0.0 {
                r.p_tr * m.probability / m.p_tr
            } else {
                0.0
            }
        })
        .collect()
}

/// Ensemble values of a grouped table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TableAverages {
    pub total_probability: f64,
    pub mean_sigma: f64,
    pub mean_sigma_cg: f64,
    pub exp_neg_sigma: f64,
    pub exp_neg_sigma_minus_cg: f64,
}

pub fn table_averages(rows: &[GroupedTrajectory]) -> TableAverages {
    let marginals = record_marginals(rows);
    let mut t = TableAverages { total_probability: 0.0, mean_sigma: 0.0, mean_sigma_cg: 0.0, exp_neg_sigma: 0.0, exp_neg_sigma_minus_cg: 0.0 };
    for r in rows.iter().filter(|r| r.probability > 0.0) {
        let m = marginals.iter().find(|m| m.y == r.y).unwrap();
        t.total_probability += r.probability;
        t.mean_sigma += r.probability * r.sigma();
        t.mean_sigma_cg += r.probability * m.sigma_cg();
        t.exp_neg_sigma += r.probability * r.exp_neg_sigma;
        t.exp_neg_sigma_minus_cg += r.probability * r.exp_neg_sigma * (m.probability / m.p_tr);
    }
    t
}

/// Gibbs weights (p₀, p₁) of a qubit with splitting ω at inverse temperature β.
pub fn qubit_gibbs(beta_omega: f64) -> (f64, f64) {
    let x = (-beta_omega).exp();
    (1.0 / (1.0 + x), x / (1.0 + x))
}
