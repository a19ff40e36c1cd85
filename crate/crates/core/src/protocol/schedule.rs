use crate::error::{Error, Result};
use crate::linalg::{c, ComplexMatrix};

/// Scalar control λ(t) multiplying one Hamiltonian term.
#[derive(Clone, Debug, PartialEq)]
pub enum Drive {
    Constant(f64),
    Cosine { amplitude: f64, frequency: f64, phase: f64 },
    /// `values[k]` holds on [times[k], times[k+1]); before times[0] the first value.
    Piecewise { times: Vec<f64>, values: Vec<f64> },
}

impl Drive {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Drive::Constant(v) => *v,
            Drive::Cosine { amplitude, frequency, phase } => amplitude * (frequency * t + phase).cos(),
            Drive::Piecewise { times, values } => {
                let k = times.partition_point(|&s| s <= t);
                values[k.saturating_sub(1)]
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Drive::Constant(_) => true,
            Drive::Cosine { amplitude, frequency, .. } => *amplitude == 0.0 || *frequency == 0.0,
            Drive::Piecewise { values, .. } => values.windows(2).all(|w| w[0] == w[1]),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if let Drive::Piecewise { times, values } = self {
            if times.is_empty() || times.len() != values.len() {
                return Err(Error::config("drive", "piecewise drive needs matching, non-empty times and values"));
            }
            if times.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::config("drive", "piecewise times must increase strictly"));
            }
        }
        Ok(())
    }
}

/// H(t) = Σ_k drive_k(t)·term_k
#[derive(Clone, Debug)]
pub struct Schedule {
    dim: usize,
    terms: Vec<(ComplexMatrix, Drive)>,
}

impl Schedule {
    pub fn new(dim: usize) -> Self {
        Schedule { dim, terms: Vec::new() }
    }

    pub fn constant(h: ComplexMatrix) -> Self {
        let dim = h.dim();
        Schedule { dim, terms: vec![(h, Drive::Constant(1.0))] }
    }

    pub fn with_term(mut self, op: ComplexMatrix, drive: Drive) -> Result<Self> {
        if op.dim() != self.dim {
            return Err(Error::Dimension(format!("Hamiltonian term dim {} vs {}", op.dim(), self.dim)));
        }
        let herm = op.hermiticity_residual();
        if herm > 1e-10 {
            return Err(Error::NotHermitian(herm));
        }
        drive.validate()?;
        self.terms.push((op, drive));
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[(ComplexMatrix, Drive)] {
        &self.terms
    }

    pub fn at(&self, t: f64) -> ComplexMatrix {
        let mut h = ComplexMatrix::zeros(self.dim);
        for (op, drive) in &self.terms {
            let v = drive.value(t);
            if v != 0.0 {
                h += &op.scale(c(v, 0.0));
            }
        }
        h
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|(_, d)| d.is_constant())
    }

    /// Largest imaginary entry over all terms.
    pub fn imaginary_magnitude(&self) -> f64 {
        self.terms.iter().map(|(op, _)| op.imaginary_magnitude()).fold(0.0, f64::max)
    }
}

/// Multiplies a channel's rate by `scale` on [start, end).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub start: f64,
    pub end: f64,
    pub scale: f64,
}

/// Rate multiplier from a window list; an empty list means always on.
pub fn window_scale(windows: &[Window], t: f64) -> f64 {
    if windows.is_empty() {
        return 1.0;
    }
    windows.iter().filter(|w| w.start <= t && t < w.end).map(|w| w.scale).sum()
}
