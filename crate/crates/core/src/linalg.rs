//! Dense complex matrices and vectors sized for few-level systems.
//!
//! Storage is row-major and inline up to 4×4, so the hot loops of the
//! trajectory sampler never touch the heap for qubits and two-qubit systems.
//! The matrix exponential and the Hermitian eigensolver are delegated to
//! nalgebra; everything else is written out by hand.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use nalgebra::DMatrix;
use num_complex::Complex64;
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Largest Hilbert-space dimension accepted anywhere in the crate.
pub const MAX_DIM: usize = 64;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: SmallVec<[C64; 16]>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        ComplexMatrix { dim, data: SmallVec::from_elem(ZERO, dim * dim) }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = f(i, j);
            }
        }
        m
    }

    /// Row-major entries; the length must be a perfect square.
    pub fn from_row_major(entries: &[C64]) -> Result<Self> {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        if dim == 0 || dim * dim != entries.len() {
            return Err(Error::Dimension(format!("{} entries do not form a square matrix", entries.len())));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numeric("matrix has non-finite entries".into()));
        }
        Ok(ComplexMatrix { dim, data: entries.iter().copied().collect() })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Dimension("matrix rows do not form a square".into()));
        }
        let flat: Vec<C64> = rows.iter().flatten().copied().collect();
        Self::from_row_major(&flat)
    }

    pub fn from_real(dim: usize, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), dim * dim);
        ComplexMatrix { dim, data: entries.iter().map(|&x| c(x, 0.0)).collect() }
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = c(v, 0.0);
        }
        m
    }

    /// |u⟩⟨v|
    pub fn outer(u: &StateVector, v: &StateVector) -> Self {
        let d = u.len();
        Self::from_fn(d, |i, j| u[i] * v[j].conj())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim;
        Self::from_fn(d, |i, j| self.data[j * d + i].conj())
    }

    pub fn conj(&self) -> Self {
        ComplexMatrix { dim: self.dim, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn transpose(&self) -> Self {
        let d = self.dim;
        Self::from_fn(d, |i, j| self.data[j * d + i])
    }

    pub fn scale(&self, s: C64) -> Self {
        ComplexMatrix { dim: self.dim, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        ComplexMatrix { dim: self.dim, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// ‖A − A†‖_F
    pub fn hermiticity_residual(&self) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += (self.data[i * d + j] - self.data[j * d + i].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    pub fn hermitian_part(&self) -> Self {
        (self + &self.adjoint()).scale_real(0.5)
    }

    /// Largest |Im A_ij|; zero for matrices with real entries.
    pub fn imaginary_magnitude(&self) -> f64 {
        self.data.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let d = self.dim;
        (0..d).all(|i| (0..d).all(|j| i == j || self.data[i * d + j].norm() <= tol))
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (a, b) = (self.dim, other.dim);
        Self::from_fn(a * b, |i, j| self[(i / b, j / b)] * other[(i % b, j % b)])
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn apply(&self, v: &StateVector) -> StateVector {
        let d = self.dim;
        debug_assert_eq!(d, v.len());
        let mut out = StateVector::zeros(d);
        for i in 0..d {
            let row = &self.data[i * d..(i + 1) * d];
            let mut acc = ZERO;
            for (a, b) in row.iter().zip(v.as_slice()) {
                acc += a * b;
            }
            out[i] = acc;
        }
        out
    }

    /// A ρ A†
    pub fn sandwich(&self, rho: &Self) -> Self {
        let left = self * rho;
        left.mul_adjoint(self)
    }

    /// A B†, without forming B†.
    pub fn mul_adjoint(&self, b: &Self) -> Self {
        let d = self.dim;
        debug_assert_eq!(d, b.dim);
        let mut out = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                let mut acc = ZERO;
                for k in 0..d {
                    acc += self.data[i * d + k] * b.data[j * d + k].conj();
                }
                out.data[i * d + j] = acc;
            }
        }
        out
    }

    /// Tr(A B)
    pub fn trace_product(&self, b: &Self) -> C64 {
        let d = self.dim;
        let mut acc = ZERO;
        for i in 0..d {
            for k in 0..d {
                acc += self.data[i * d + k] * b.data[k * d + i];
            }
        }
        acc
    }

    /// ⟨ψ|A|ψ⟩
    pub fn expectation(&self, psi: &StateVector) -> C64 {
        psi.inner(&self.apply(psi))
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        let d = m.nrows();
        Self::from_fn(d, |i, j| m[(i, j)])
    }

    /// Matrix exponential (Padé scaling and squaring).
    pub fn expm(&self) -> Self {
        if self.dim == 1 {
            return ComplexMatrix { dim: 1, data: SmallVec::from_elem(self.data[0].exp(), 1) };
        }
        if self.data.iter().all(|z| *z == ZERO) {
            return Self::identity(self.dim);
        }
        Self::from_nalgebra(&self.to_nalgebra().exp())
    }

    /// exp(−i H t) for Hermitian H through its eigenbasis.
    pub fn unitary_exp(&self, t: f64) -> Result<Self> {
        let eig = self.eigh()?;
        Ok(eig.map(|lambda| (-I * lambda * t).exp()))
    }

    /// Eigendecomposition of a Hermitian matrix.
    ///
    /// Eigenvalues come out in descending order. Each eigenvector has its
    /// first non-negligible component made real and positive. Diagonal input
    /// keeps the computational basis, with a stable sort on ties.
    pub fn eigh(&self) -> Result<HermitianEigen> {
        let scale = self.max_abs().max(1.0);
        if self.hermiticity_residual() > 1e-9 * scale {
            return Err(Error::NotHermitian(self.hermiticity_residual()));
        }
        let d = self.dim;
        let mut pairs: Vec<(f64, StateVector)> = if self.is_diagonal(0.0) {
            (0..d).map(|i| (self[(i, i)].re, StateVector::basis(d, i))).collect()
        } else if d == 2 {
            eigh_2x2(self)
        } else {
            let herm = self.hermitian_part().to_nalgebra();
            let se = nalgebra::SymmetricEigen::new(herm);
            (0..d)
                .map(|k| {
                    let v: SmallVec<[C64; 8]> = (0..d).map(|i| se.eigenvectors[(i, k)]).collect();
                    (se.eigenvalues[k], StateVector(v))
                })
                .collect()
        };
        for (_, v) in pairs.iter_mut() {
            v.normalize();
            v.fix_phase();
        }
        let tie = 1e-12 * scale;
        pairs.sort_by(|(la, va), (lb, vb)| {
            if (la - lb).abs() > tie {
                lb.partial_cmp(la).unwrap_or(std::cmp::Ordering::Equal)
            } else {
                va.leading_index().cmp(&vb.leading_index())
            }
        });
        let (values, vectors) = pairs.into_iter().unzip();
        Ok(HermitianEigen { values, vectors })
    }
}

fn eigh_2x2(m: &ComplexMatrix) -> Vec<(f64, StateVector)> {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = m[(0, 1)];
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let r = (half * half + b.norm_sqr()).sqrt();
    let (l1, l2) = (mean + r, mean - r);
    // eigenvector for λ: (b, λ − a) or (λ − d, b*) — pick the better conditioned.
    let vec_for = |l: f64| {
        let v1 = StateVector::from_slice(&[b, c(l - a, 0.0)]);
        let v2 = StateVector::from_slice(&[c(l - d, 0.0), b.conj()]);
        if v1.norm_sqr() >= v2.norm_sqr() {
            v1
        } else {
            v2
        }
    };
    vec![(l1, vec_for(l1)), (l2, vec_for(l2))]
}

#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<StateVector>,
}

impl HermitianEigen {
    /// Σ f(λ) |v⟩⟨v|
    pub fn map(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let d = self.vectors[0].len();
        let mut out = ComplexMatrix::zeros(d);
        for (l, v) in self.values.iter().zip(&self.vectors) {
            let w = f(*l);
            for i in 0..d {
                for j in 0..d {
                    out[(i, j)] += w * v[i] * v[j].conj();
                }
            }
        }
        out
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}×{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|j| {
                    let z = self[(i, j)];
                    format!("{:+.6}{:+.6}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let d = self.dim;
        assert_eq!(d, rhs.dim, "matrix product dimension mismatch");
        let mut out = ComplexMatrix::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                if a == ZERO {
                    continue;
                }
                let row = &rhs.data[k * d..(k + 1) * d];
                let dst = &mut out.data[i * d..(i + 1) * d];
                for (o, b) in dst.iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

impl Mul for ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: ComplexMatrix) -> ComplexMatrix {
        &self * &rhs
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Add for ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: ComplexMatrix) -> ComplexMatrix {
        &self + &rhs
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

impl Sub for ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: ComplexMatrix) -> ComplexMatrix {
        &self - &rhs
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!(self.dim, rhs.dim);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&ComplexMatrix> for ComplexMatrix {
    fn sub_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!(self.dim, rhs.dim);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_real(-1.0)
    }
}

/// Pure state (or any ket) of a few-level system.
#[derive(Clone, PartialEq)]
pub struct StateVector(SmallVec<[C64; 8]>);

impl StateVector {
    pub fn zeros(dim: usize) -> Self {
        StateVector(SmallVec::from_elem(ZERO, dim))
    }

    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[i] = ONE;
        v
    }

    pub fn from_slice(entries: &[C64]) -> Self {
        StateVector(entries.iter().copied().collect())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Scales to unit norm and returns the squared norm it had before.
    pub fn normalize(&mut self) -> f64 {
        let n2 = self.norm_sqr();
        if n2 > 0.0 {
            let s = 1.0 / n2.sqrt();
            for z in self.0.iter_mut() {
                *z *= s;
            }
        }
        n2
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &Self) -> C64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn conj(&self) -> Self {
        StateVector(self.0.iter().map(|z| z.conj()).collect())
    }

    pub fn projector(&self) -> ComplexMatrix {
        ComplexMatrix::outer(self, self)
    }

    pub(crate) fn leading_index(&self) -> usize {
        self.0.iter().position(|z| z.norm() > 1e-12).unwrap_or(0)
    }

    /// Makes the first non-negligible component real and positive.
    pub fn fix_phase(&mut self) {
        let k = self.leading_index();
        let z = self.0[k];
        if z.norm() > 0.0 {
            let phase = z.conj() / z.norm();
            for w in self.0.iter_mut() {
                *w *= phase;
            }
            self.0[k] = c(self.0[k].re, 0.0);
        }
    }
}

impl Index<usize> for StateVector {
    type Output = C64;
    #[inline]
    fn index(&self, i: usize) -> &C64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for StateVector {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.0[i]
    }
}

impl fmt::Debug for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|z| format!("{:+.6}{:+.6}i", z.re, z.im)).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

pub mod pauli {
    //! Qubit operators with |0⟩ the ground and |1⟩ the excited level.
    use super::{c, ComplexMatrix};

    pub fn x() -> ComplexMatrix {
        ComplexMatrix::from_real(2, &[0.0, 1.0, 1.0, 0.0])
    }

    pub fn y() -> ComplexMatrix {
        ComplexMatrix::from_fn(2, |i, j| match (i, j) {
            (0, 1) => c(0.0, -1.0),
            (1, 0) => c(0.0, 1.0),
            _ => c(0.0, 0.0),
        })
    }

    /// |1⟩⟨1| − |0⟩⟨0|, so that (ω/2)·z has |1⟩ as the excited level.
    pub fn z() -> ComplexMatrix {
        ComplexMatrix::diag_real(&[-1.0, 1.0])
    }

    /// σ₋ = |0⟩⟨1|
    pub fn lower() -> ComplexMatrix {
        ComplexMatrix::from_real(2, &[0.0, 1.0, 0.0, 0.0])
    }

    /// σ₊ = |1⟩⟨0|
    pub fn raise() -> ComplexMatrix {
        ComplexMatrix::from_real(2, &[0.0, 0.0, 1.0, 0.0])
    }

    pub fn by_name(name: &str) -> Option<ComplexMatrix> {
        match name {
            "x" => Some(x()),
            "y" => Some(y()),
            "z" => Some(z()),
            "lower" | "minus" => Some(lower()),
            "raise" | "plus" => Some(raise()),
            "identity" | "i" => Some(ComplexMatrix::identity(2)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_matrix(d: usize, seed: u64) -> ComplexMatrix {
        // small LCG; the tests only need arbitrary entries
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        ComplexMatrix::from_fn(d, |_, _| c(next(), next()))
    }

    #[test]
    fn product_matches_nalgebra() {
        let a = rand_matrix(3, 1);
        let b = rand_matrix(3, 2);
        let ours = &a * &b;
        let theirs = ComplexMatrix::from_nalgebra(&(a.to_nalgebra() * b.to_nalgebra()));
        assert!((&ours - &theirs).frobenius_norm() < 1e-13);
        assert!((&a.mul_adjoint(&b) - &(&a * &b.adjoint())).frobenius_norm() < 1e-13);
    }

    #[test]
    fn expm_of_pauli_rotation() {
        // exp(−iθσx) = cosθ I − i sinθ σx
        let theta = 0.7;
        let u = pauli::x().scale(-I * theta).expm();
        let expect = &ComplexMatrix::identity(2).scale_real(theta.cos()) + &pauli::x().scale(-I * theta.sin());
        assert!((&u - &expect).frobenius_norm() < 1e-14);
        let v = pauli::x().unitary_exp(theta).unwrap();
        assert!((&v - &expect).frobenius_norm() < 1e-14);
    }

    #[test]
    fn eigh_is_sorted_and_reconstructs() {
        let a = rand_matrix(4, 9);
        let h = a.hermitian_part();
        let eig = h.eigh().unwrap();
        assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
        let back = eig.map(|l| c(l, 0.0));
        assert!((&back - &h).frobenius_norm() < 1e-12);
        for v in &eig.vectors {
            let lead = v.as_slice().iter().find(|z| z.norm() > 1e-12).unwrap();
            assert!(lead.im.abs() < 1e-15 && lead.re > 0.0);
        }
    }

    #[test]
    fn eigh_2x2_closed_form_agrees() {
        let h = ComplexMatrix::from_rows(&[vec![c(0.3, 0.0), c(0.1, -0.2)], vec![c(0.1, 0.2), c(-0.5, 0.0)]]).unwrap();
        let eig = h.eigh().unwrap();
        let mean = -0.1;
        let r = (0.16f64 + 0.05).sqrt();
        assert!((eig.values[0] - (mean + r)).abs() < 1e-14);
        assert!((eig.values[1] - (mean - r)).abs() < 1e-14);
        let back = eig.map(|l| c(l, 0.0));
        assert!((&back - &h).frobenius_norm() < 1e-14);
    }

    #[test]
    fn diagonal_ties_keep_basis_order() {
        let eig = ComplexMatrix::diag_real(&[0.5, 0.5]).eigh().unwrap();
        assert_eq!(eig.vectors[0], StateVector::basis(2, 0));
        assert_eq!(eig.vectors[1], StateVector::basis(2, 1));
    }

    #[test]
    fn kron_dimensions_and_entries() {
        let k = pauli::x().kron(&pauli::z());
        assert_eq!(k.dim(), 4);
        assert_eq!(k[(0, 2)], c(-1.0, 0.0));
        assert_eq!(k[(1, 3)], c(1.0, 0.0));
    }
}
