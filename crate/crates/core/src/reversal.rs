//! The antiunitary time-reversal map Θ = W·K (K: complex conjugation).

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, StateVector};

#[derive(Clone, Debug, Default)]
pub struct TimeReversal {
    /// `None` means W = I: plain conjugation in the computational basis.
    basis: Option<ComplexMatrix>,
}

impl TimeReversal {
    pub fn standard() -> Self {
        TimeReversal { basis: None }
    }

    /// Θ = W K. Requires W unitary and Θ² = 1, i.e. W·conj(W) = I.
    pub fn with_basis(w: ComplexMatrix) -> Result<Self> {
        let d = w.dim();
        let unitarity = (&(&w.adjoint() * &w) - &ComplexMatrix::identity(d)).frobenius_norm();
        if unitarity > 1e-10 {
            return Err(Error::TimeReversal(format!("conjugation basis is not unitary (residual {unitarity:.2e})")));
        }
        let involution = (&(&w * &w.conj()) - &ComplexMatrix::identity(d)).frobenius_norm();
        if involution > 1e-10 {
            return Err(Error::TimeReversal(format!("Θ² ≠ 1 for this basis (residual {involution:.2e})")));
        }
        Ok(TimeReversal { basis: Some(w) })
    }

    pub fn basis(&self) -> Option<&ComplexMatrix> {
        self.basis.as_ref()
    }

    /// Θ A Θ⁻¹ = W conj(A) W†
    pub fn apply(&self, a: &ComplexMatrix) -> ComplexMatrix {
        match &self.basis {
            None => a.conj(),
            Some(w) => (w * &a.conj()).mul_adjoint(w),
        }
    }

    /// Θ⁻¹ A Θ = conj(W† A W)
    pub fn apply_inverse(&self, a: &ComplexMatrix) -> ComplexMatrix {
        match &self.basis {
            None => a.conj(),
            Some(w) => (&(&w.adjoint() * a) * w).conj(),
        }
    }

    /// Θ|ψ⟩ = W conj(ψ)
    pub fn apply_vector(&self, psi: &StateVector) -> StateVector {
        match &self.basis {
            None => psi.conj(),
            Some(w) => w.apply(&psi.conj()),
        }
    }
}

/// Θ A Θ⁻¹ in the computational basis: entrywise conjugation.
pub fn time_reverse(op: &ComplexMatrix, theta: &TimeReversal) -> ComplexMatrix {
    theta.apply(op)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, pauli, I};

    #[test]
    fn conjugation_examples() {
        let theta = TimeReversal::standard();
        let real = pauli::x();
        assert_eq!(time_reverse(&real, &theta), real);
        // σy is purely imaginary and flips sign; iσy is real and stays put
        let y = pauli::y();
        assert_eq!(time_reverse(&y, &theta), y.scale_real(-1.0));
        let iy = y.scale(I);
        assert_eq!(time_reverse(&iy, &theta), iy);
        let a = ComplexMatrix::from_fn(2, |i, j| c(i as f64 + 0.3, j as f64 - 0.7));
        assert_eq!(time_reverse(&time_reverse(&a, &theta), &theta), a);
    }

    #[test]
    fn spin_flip_basis() {
        // W = iσy gives W conj(W) = −I: not an involution, so it is rejected
        assert!(TimeReversal::with_basis(pauli::y().scale(I)).is_err());
        // W = σx is fine
        let theta = TimeReversal::with_basis(pauli::x()).unwrap();
        let a = ComplexMatrix::from_fn(2, |i, j| c(i as f64 + 0.3, 2.0 * j as f64 - 0.7));
        assert!((&theta.apply(&theta.apply(&a)) - &a).frobenius_norm() < 1e-15);
        assert!((&theta.apply_inverse(&theta.apply(&a)) - &a).frobenius_norm() < 1e-15);
    }
}
