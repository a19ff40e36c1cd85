//! Labeled Kraus families (generalized measurements) and the standard qubit
//! instruments.

use crate::error::{Error, Result};
use crate::linalg::{c, ComplexMatrix, StateVector};
use crate::state::{DensityMatrix, Tolerances, P_FLOOR};

#[derive(Clone, Debug)]
pub struct KrausSet {
    labels: Vec<String>,
    operators: Vec<ComplexMatrix>,
}

impl KrausSet {
    /// Validates shapes, label uniqueness and ‖ΣM†M − I‖_F ≤ tol.complete.
    pub fn new(labels: Vec<String>, operators: Vec<ComplexMatrix>, tol: &Tolerances) -> Result<Self> {
        let set = Self::unchecked(labels, operators)?;
        let residual = set.completeness_residual();
        if residual > tol.complete {
            return Err(Error::Incomplete { residual, tol: tol.complete });
        }
        Ok(set)
    }

    /// Shape checks only; used for backward (reversed) families, which need
    /// not be complete.
    pub fn unchecked(labels: Vec<String>, operators: Vec<ComplexMatrix>) -> Result<Self> {
        if labels.is_empty() || labels.len() != operators.len() {
            return Err(Error::Dimension(format!("{} labels for {} Kraus operators", labels.len(), operators.len())));
        }
        let d = operators[0].dim();
        if operators.iter().any(|m| m.dim() != d) {
            return Err(Error::Dimension("Kraus operators of different dimensions".into()));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::Dimension(format!("duplicate outcome label `{l}`")));
            }
        }
        Ok(KrausSet { labels, operators })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.operators[0].dim()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    pub fn operator(&self, y: usize) -> &ComplexMatrix {
        &self.operators[y]
    }

    pub fn label(&self, y: usize) -> &str {
        &self.labels[y]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// ‖Σ M†M − I‖_F
    pub fn completeness_residual(&self) -> f64 {
        let d = self.dim();
        let mut acc = ComplexMatrix::zeros(d);
        for m in &self.operators {
            acc += &(&m.adjoint() * m);
        }
        (&acc - &ComplexMatrix::identity(d)).frobenius_norm()
    }

    /// ‖Σ M M† − I‖_F; zero for unital instruments.
    pub fn unitality_residual(&self) -> f64 {
        let d = self.dim();
        let mut acc = ComplexMatrix::zeros(d);
        for m in &self.operators {
            acc += &m.mul_adjoint(m);
        }
        (&acc - &ComplexMatrix::identity(d)).frobenius_norm()
    }

    /// Single-outcome instrument M = I.
    pub fn trivial(dim: usize) -> Self {
        KrausSet { labels: vec!["0".into()], operators: vec![ComplexMatrix::identity(dim)] }
    }

    /// Computational-basis projectors, labeled "0", "1", ….
    pub fn projective(dim: usize) -> Self {
        let labels = (0..dim).map(|i| i.to_string()).collect();
        let operators = (0..dim).map(|i| StateVector::basis(dim, i).projector()).collect();
        KrausSet { labels, operators }
    }

    /// Energy-basis readout that reports the wrong level with probability ε.
    pub fn qubit_classical(epsilon: f64) -> Result<Self> {
        check_error_probability(epsilon)?;
        let (good, bad) = ((1.0 - epsilon).sqrt(), epsilon.sqrt());
        Ok(KrausSet {
            labels: vec!["0".into(), "1".into()],
            operators: vec![ComplexMatrix::diag_real(&[good, bad]), ComplexMatrix::diag_real(&[bad, good])],
        })
    }

    /// Readout in the |±⟩ basis with error probability ε.
    pub fn qubit_quantum(epsilon: f64) -> Result<Self> {
        check_error_probability(epsilon)?;
        let (good, bad) = ((1.0 - epsilon).sqrt(), epsilon.sqrt());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = StateVector::from_slice(&[c(s, 0.0), c(s, 0.0)]).projector();
        let minus = StateVector::from_slice(&[c(s, 0.0), c(-s, 0.0)]).projector();
        let m_plus = &plus.scale_real(good) + &minus.scale_real(bad);
        let m_minus = &minus.scale_real(good) + &plus.scale_real(bad);
        Ok(KrausSet { labels: vec!["+".into(), "-".into()], operators: vec![m_plus, m_minus] })
    }
}

fn check_error_probability(epsilon: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::config("epsilon", format!("error probability {epsilon} outside [0, 1]")));
    }
    Ok(())
}

/// Result of one measurement branch.
#[derive(Clone, Debug)]
pub struct KrausBranch {
    pub probability: f64,
    /// `None` when the branch probability is at or below the floor.
    pub state: Option<DensityMatrix>,
}

impl KrausBranch {
    pub fn is_zero(&self) -> bool {
        self.state.is_none()
    }
}

/// Applies outcome `y`: returns p = Tr[M†Mρ] and MρM†/p.
pub fn apply_kraus(rho: &DensityMatrix, kraus: &KrausSet, y: usize) -> Result<KrausBranch> {
    if rho.dim() != kraus.dim() {
        return Err(Error::Dimension(format!("state dim {} vs Kraus dim {}", rho.dim(), kraus.dim())));
    }
    if y >= kraus.len() {
        return Err(Error::UnreachableHistory(format!("outcome index {y} out of {} labels", kraus.len())));
    }
    let post = kraus.operator(y).sandwich(rho.matrix());
    let p = post.trace().re;
    if p <= P_FLOOR {
        return Ok(KrausBranch { probability: p.max(0.0), state: None });
    }
    Ok(KrausBranch { probability: p, state: Some(DensityMatrix::new_unchecked(post.scale_real(1.0 / p).hermitian_part())) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pauli;

    const P0: f64 = 0.7310585786300049;

    #[test]
    fn qubit_families_are_complete_and_unital() {
        for eps in [0.0, 0.1, 0.3, 0.5, 1.0] {
            for k in [KrausSet::qubit_classical(eps).unwrap(), KrausSet::qubit_quantum(eps).unwrap()] {
                assert!(k.completeness_residual() < 1e-15);
                assert!(k.unitality_residual() < 1e-15);
            }
        }
        assert!(KrausSet::qubit_classical(1.5).is_err());
    }

    #[test]
    fn incomplete_set_is_rejected() {
        let tol = Tolerances::default();
        let bad = KrausSet::new(vec!["0".into()], vec![ComplexMatrix::diag_real(&[1.0, 0.9])], &tol);
        assert!(matches!(bad, Err(Error::Incomplete { .. })));
    }

    #[test]
    fn classical_exact_readout_of_thermal_state() {
        let tol = Tolerances::default();
        let rho = DensityMatrix::diagonal(&[P0, 1.0 - P0], &tol).unwrap();
        let k = KrausSet::qubit_classical(0.0).unwrap();
        let b = apply_kraus(&rho, &k, 0).unwrap();
        assert!((b.probability - P0).abs() < 1e-15);
        let post = b.state.unwrap();
        assert!((post.matrix() - &ComplexMatrix::diag_real(&[1.0, 0.0])).frobenius_norm() < 1e-15);
    }

    #[test]
    fn uninformative_readout_keeps_populations() {
        let tol = Tolerances::default();
        let rho = DensityMatrix::diagonal(&[0.8, 0.2], &tol).unwrap();
        let k = KrausSet::qubit_classical(0.5).unwrap();
        for y in 0..2 {
            let b = apply_kraus(&rho, &k, y).unwrap();
            assert!((b.probability - 0.5).abs() < 1e-15);
            assert!((b.state.unwrap().matrix() - rho.matrix()).frobenius_norm() < 1e-15);
        }
    }

    #[test]
    fn trivial_measurement_and_zero_branch() {
        let rho = DensityMatrix::pure(&StateVector::basis(2, 0));
        let b = apply_kraus(&rho, &KrausSet::trivial(2), 0).unwrap();
        assert_eq!(b.probability, 1.0);
        assert!((b.state.unwrap().matrix() - rho.matrix()).frobenius_norm() < 1e-15);
        let z = apply_kraus(&rho, &KrausSet::projective(2), 1).unwrap();
        assert!(z.is_zero() && z.probability == 0.0);
    }

    #[test]
    fn quantum_readout_of_ground_state_is_unbiased() {
        let rho = DensityMatrix::pure(&StateVector::basis(2, 0));
        let k = KrausSet::qubit_quantum(0.2).unwrap();
        let total: f64 = (0..2).map(|y| apply_kraus(&rho, &k, y).unwrap().probability).sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert!((apply_kraus(&rho, &k, 0).unwrap().probability - 0.5).abs() < 1e-15);
        // M± commute with σx, not with the Hamiltonian
        assert!(k.operator(0).commutator(&pauli::x()).frobenius_norm() < 1e-15);
    }
}
