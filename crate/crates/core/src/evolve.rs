//! Non-Hermitian evolution, Liouville-space generators and the per-step
//! Kraus maps shared by the sampler and the exact propagators.

use crate::error::{Error, Result};
use crate::linalg::{c, ComplexMatrix, StateVector, I, ZERO};

/// Anything a propagator can act on: kets (ψ ↦ Kψ) and density matrices
/// (ρ ↦ KρK†).
pub trait Propagate: Sized {
    fn propagate(&self, k: &ComplexMatrix) -> Self;
    /// ‖ψ‖² or Tr ρ.
    fn weight(&self) -> f64;
}

impl Propagate for StateVector {
    fn propagate(&self, k: &ComplexMatrix) -> Self {
        k.apply(self)
    }
    fn weight(&self) -> f64 {
        self.norm_sqr()
    }
}

impl Propagate for ComplexMatrix {
    fn propagate(&self, k: &ComplexMatrix) -> Self {
        k.sandwich(self)
    }
    fn weight(&self) -> f64 {
        self.trace().re
    }
}

/// Applies exp(−i H_eff dt) without renormalizing.
///
/// A growing norm means H_eff has a non-dissipative anti-Hermitian part; that
/// is reported instead of silently continuing.
pub fn evolve_nonhermitian<S: Propagate>(state: &S, h_eff: &ComplexMatrix, dt: f64) -> Result<S> {
    if dt < 0.0 || !dt.is_finite() {
        return Err(Error::Numeric(format!("time step {dt} must be finite and ≥ 0")));
    }
    let before = state.weight();
    let out = state.propagate(&h_eff.scale(-I * dt).expm());
    let after = out.weight();
    if after > before * (1.0 + 1e-10) + 1e-300 {
        return Err(Error::NormIncrease { before, after });
    }
    Ok(out)
}

/// 𝒯 exp(−i∫H_eff) over [t0, t1] with `substeps` midpoint pieces.
pub fn time_ordered_propagator(h_eff: impl Fn(f64) -> ComplexMatrix, t0: f64, t1: f64, substeps: usize) -> ComplexMatrix {
    let n = substeps.max(1);
    let dt = (t1 - t0) / n as f64;
    let mut u = ComplexMatrix::identity(h_eff(t0).dim());
    for k in 0..n {
        let t = t0 + (k as f64 + 0.5) * dt;
        u = &h_eff(t).scale(-I * dt).expm() * &u;
    }
    u
}

/// A linear map on d×d matrices, acting on row-major vec(ρ):
/// vec(AρB) = (A ⊗ Bᵀ) vec(ρ).
#[derive(Clone, Debug, PartialEq)]
pub struct Superoperator {
    mat: ComplexMatrix,
    dim: usize,
}

impl Superoperator {
    pub fn from_matrix(mat: ComplexMatrix, dim: usize) -> Self {
        assert_eq!(mat.dim(), dim * dim);
        Superoperator { mat, dim }
    }

    pub fn zero(dim: usize) -> Self {
        Superoperator { mat: ComplexMatrix::zeros(dim * dim), dim }
    }

    pub fn identity(dim: usize) -> Self {
        Superoperator { mat: ComplexMatrix::identity(dim * dim), dim }
    }

    /// ρ ↦ AρB
    pub fn two_sided(a: &ComplexMatrix, b: &ComplexMatrix) -> Self {
        Superoperator { mat: a.kron(&b.transpose()), dim: a.dim() }
    }

    /// ρ ↦ KρK†
    pub fn conjugation(k: &ComplexMatrix) -> Self {
        Self::two_sided(k, &k.adjoint())
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let d2 = self.dim * self.dim;
        let m = self.mat.as_slice();
        let v = rho.as_slice();
        let mut out = ComplexMatrix::zeros(self.dim);
        let o = out.as_mut_slice();
        for i in 0..d2 {
            let row = &m[i * d2..(i + 1) * d2];
            let mut acc = ZERO;
            for (a, b) in row.iter().zip(v) {
                acc += a * b;
            }
            o[i] = acc;
        }
        out
    }

    /// self ∘ other (other acts first).
    pub fn compose(&self, other: &Superoperator) -> Superoperator {
        Superoperator { mat: &self.mat * &other.mat, dim: self.dim }
    }

    pub fn add(&self, other: &Superoperator) -> Superoperator {
        Superoperator { mat: &self.mat + &other.mat, dim: self.dim }
    }

    pub fn scale(&self, s: f64) -> Superoperator {
        Superoperator { mat: self.mat.scale_real(s), dim: self.dim }
    }

    pub fn exp(&self, t: f64) -> Superoperator {
        Superoperator { mat: self.mat.scale(c(t, 0.0)).expm(), dim: self.dim }
    }

    /// (e^{𝓛t}, ∫₀ᵗ e^{𝓛s} ds) from one block exponential
    /// exp([[𝓛, 𝟙], [0, 0]] t) = [[e^{𝓛t}, ∫e^{𝓛s}], [0, 𝟙]].
    pub fn exp_with_integral(&self, t: f64) -> (Superoperator, Superoperator) {
        let n = self.dim * self.dim;
        let block = ComplexMatrix::from_fn(2 * n, |i, j| match (i < n, j < n) {
            (true, true) => self.mat[(i, j)] * t,
            (true, false) if i == j - n => c(t, 0.0),
            _ => ZERO,
        });
        let e = block.expm();
        let top_left = ComplexMatrix::from_fn(n, |i, j| e[(i, j)]);
        let top_right = ComplexMatrix::from_fn(n, |i, j| e[(i, j + n)]);
        (Superoperator { mat: top_left, dim: self.dim }, Superoperator { mat: top_right, dim: self.dim })
    }
}

/// −i[H,·] + Σ_j (L_j·L_j† − ½{L_j†L_j,·}) − ½{G,·}.
///
/// `extra_damping` G is the no-click back-action of monitored operators that
/// are *not* re-inserted as jumps (their clicks are conditioned on).
pub fn lindblad_generator(h: &ComplexMatrix, jumps: &[&ComplexMatrix], extra_damping: Option<&ComplexMatrix>) -> Superoperator {
    let d = h.dim();
    let id = ComplexMatrix::identity(d);
    let mut gen = Superoperator::two_sided(&h.scale(-I), &id).add(&Superoperator::two_sided(&id, &h.scale(I)));
    let mut damping = ComplexMatrix::zeros(d);
    for l in jumps {
        gen = gen.add(&Superoperator::conjugation(l));
        damping += &(&l.adjoint() * l);
    }
    if let Some(g) = extra_damping {
        damping += g;
    }
    let half = damping.scale_real(-0.5);
    gen.add(&Superoperator::two_sided(&half, &id)).add(&Superoperator::two_sided(&id, &half))
}

/// √(I − dt·G) for positive semidefinite G with dt·‖G‖ ≤ 1.
pub fn damping_root(g: &ComplexMatrix, dt: f64) -> Result<ComplexMatrix> {
    let d = g.dim();
    if g.max_abs() == 0.0 {
        return Ok(ComplexMatrix::identity(d));
    }
    if g.is_diagonal(0.0) {
        let mut out = ComplexMatrix::zeros(d);
        for i in 0..d {
            let x = 1.0 - dt * g[(i, i)].re;
            if x < -1e-12 {
                return Err(Error::StepTooLarge { time: f64::NAN, probability: dt * g[(i, i)].re, cap: 1.0 });
            }
            out[(i, i)] = c(x.max(0.0).sqrt(), 0.0);
        }
        return Ok(out);
    }
    let eig = g.hermitian_part().eigh()?;
    if let Some(&top) = eig.values.first() {
        if dt * top > 1.0 + 1e-12 {
            return Err(Error::StepTooLarge { time: f64::NAN, probability: dt * top, cap: 1.0 });
        }
    }
    Ok(eig.map(|l| c((1.0 - dt * l).max(0.0).sqrt(), 0.0)))
}

/// No-event Kraus operator of one grid step: K₀ = e^{−iH dt} √(I − dt G).
///
/// Together with the jump operators √dt L_j (ΣL_j†L_j + monitored M†M = G) it
/// forms an exactly complete instrument, so the first-order event
/// probabilities of the sampler and the exact propagators describe one and the
/// same discrete process. K₀ agrees with exp(−iH_eff dt) to O(dt²).
pub fn no_event_kraus(h: &ComplexMatrix, g: &ComplexMatrix, dt: f64) -> Result<ComplexMatrix> {
    let u = if h.max_abs() == 0.0 { ComplexMatrix::identity(h.dim()) } else { h.scale(-I * dt).expm() };
    Ok(&u * &damping_root(g, dt)?)
}
