//! Density matrices, their spectra, and Gibbs states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, ComplexMatrix, StateVector};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub herm: f64,
    pub trace: f64,
    pub psd: f64,
    pub complete: f64,
    pub detailed_balance: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { herm: 1e-10, trace: 1e-10, psd: 1e-9, complete: 1e-10, detailed_balance: 1e-12 }
    }
}

/// Probabilities below this are treated as exactly zero branches.
pub const P_FLOOR: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityReport {
    pub hermiticity_residual: f64,
    pub trace_residual: f64,
    pub min_eigenvalue: f64,
    pub hermitian: bool,
    pub unit_trace: bool,
    pub positive: bool,
}

impl DensityReport {
    pub fn passed(&self) -> bool {
        self.hermitian && self.unit_trace && self.positive
    }
}

/// Checks Hermiticity, unit trace and positivity of a candidate state.
pub fn validate_density(mat: &ComplexMatrix, tol: &Tolerances) -> DensityReport {
    let herm = mat.hermiticity_residual();
    let tr = mat.trace();
    let trace_residual = ((tr.re - 1.0).powi(2) + tr.im.powi(2)).sqrt();
    let min_eigenvalue = mat
        .hermitian_part()
        .eigh()
        .map(|e| e.values.last().copied().unwrap_or(0.0))
        .unwrap_or(f64::NEG_INFINITY);
    DensityReport {
        hermiticity_residual: herm,
        trace_residual,
        min_eigenvalue,
        hermitian: herm <= tol.herm,
        unit_trace: trace_residual <= tol.trace,
        positive: min_eigenvalue >= -tol.psd,
    }
}

/// Eigenvalues (descending) with their eigenvectors; the labels `a`/`f` of a
/// trajectory index into this list.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub probabilities: Vec<f64>,
    pub vectors: Vec<StateVector>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(mat: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        let report = validate_density(&mat, tol);
        if !report.passed() {
            return Err(Error::InvalidState(format!(
                "hermiticity {:.3e}, trace {:.3e}, min eigenvalue {:.3e}",
                report.hermiticity_residual, report.trace_residual, report.min_eigenvalue
            )));
        }
        Ok(DensityMatrix { mat: mat.hermitian_part() })
    }

    /// Wraps a matrix already known to be a state (internal propagation).
    pub(crate) fn new_unchecked(mat: ComplexMatrix) -> Self {
        DensityMatrix { mat }
    }

    pub fn pure(psi: &StateVector) -> Self {
        let mut v = psi.clone();
        v.normalize();
        DensityMatrix { mat: v.projector() }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix { mat: ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64) }
    }

    pub fn diagonal(probabilities: &[f64], tol: &Tolerances) -> Result<Self> {
        Self::new(ComplexMatrix::diag_real(probabilities), tol)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn spectrum(&self) -> Spectrum {
        let eig = self.mat.eigh().expect("density matrices are Hermitian");
        Spectrum { probabilities: eig.values.iter().map(|p| p.max(0.0)).collect(), vectors: eig.vectors }
    }

    pub fn expectation(&self, op: &ComplexMatrix) -> f64 {
        op.trace_product(&self.mat).re
    }

    pub fn entropy(&self) -> f64 {
        von_neumann_entropy(self)
    }
}

fn xlnx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// −Σ λ ln λ over the spectrum, 0·ln 0 = 0.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    matrix_entropy(rho.matrix())
}

pub(crate) fn matrix_entropy(m: &ComplexMatrix) -> f64 {
    if m.dim() == 2 {
        // closed form avoids the eigenvector work in the transfer-entropy loops
        let a = m[(0, 0)].re;
        let d = m[(1, 1)].re;
        let half = 0.5 * (a - d);
        let r = (half * half + m[(0, 1)].norm_sqr()).sqrt();
        let mean = 0.5 * (a + d);
        return -(xlnx(mean + r) + xlnx(mean - r));
    }
    let eig = m.hermitian_part().eigh().expect("Hermitian");
    -eig.values.iter().map(|&l| xlnx(l)).sum::<f64>()
}

/// Binary entropy H(x) = −x ln x − (1−x) ln(1−x).
pub fn binary_entropy(x: f64) -> f64 {
    -(xlnx(x) + xlnx(1.0 - x))
}

/// Gibbs state together with the eigen-data used for sampling.
#[derive(Clone, Debug)]
pub struct ThermalState {
    pub density: DensityMatrix,
    pub spectrum: Spectrum,
    pub energies: Vec<f64>,
    /// Some weights underflowed: the state is (numerically) the ground projector.
    pub ground_state_limit: bool,
}

/// e^{−βH}/Z, computed in the eigenbasis of H with the ground energy shifted
/// to zero so large β cannot overflow.
pub fn thermal_state(h: &ComplexMatrix, beta: f64) -> Result<ThermalState> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::InvalidState(format!("inverse temperature {beta} must be finite and ≥ 0")));
    }
    let eig = h.eigh()?;
    // eigh sorts descending; Gibbs order is ascending energy
    let mut pairs: Vec<(f64, StateVector)> = eig.values.into_iter().zip(eig.vectors).collect();
    let tie = 1e-12 * h.max_abs().max(1.0);
    pairs.sort_by(|(ea, va), (eb, vb)| {
        if (ea - eb).abs() > tie {
            ea.partial_cmp(eb).unwrap_or(std::cmp::Ordering::Equal)
        } else {
            va.leading_index().cmp(&vb.leading_index())
        }
    });
    let (energies, vectors): (Vec<f64>, Vec<StateVector>) = pairs.into_iter().unzip();
    let e0 = energies[0];
    let weights: Vec<f64> = energies.iter().map(|e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let probabilities: Vec<f64> = weights.iter().map(|w| w / z).collect();
    let ground_state_limit = probabilities.iter().any(|&p| p == 0.0);
    let d = h.dim();
    let mut mat = ComplexMatrix::zeros(d);
    for (p, v) in probabilities.iter().zip(&vectors) {
        mat += &v.projector().scale(c(*p, 0.0));
    }
    Ok(ThermalState {
        density: DensityMatrix::new_unchecked(mat.hermitian_part()),
        spectrum: Spectrum { probabilities, vectors },
        energies,
        ground_state_limit,
    })
}
