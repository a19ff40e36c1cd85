use serde::Serialize;

/// Streaming mean and variance (Welford), mergeable across workers (Chan et
/// al. pairwise update). Also tracks the sample maximum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnsembleEstimate {
    count: u64,
    mean: f64,
    m2: f64,
    max: f64,
}

impl Default for EnsembleEstimate {
    fn default() -> Self {
        EnsembleEstimate { count: 0, mean: 0.0, m2: 0.0, max: f64::NEG_INFINITY }
    }
}

impl EnsembleEstimate {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_samples(xs: impl IntoIterator<Item = f64>) -> Self {
        let mut e = Self::new();
        for x in xs {
            e.push(x);
        }
        e
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
        self.max = self.max.max(x);
    }

    pub fn merge(&mut self, other: &EnsembleEstimate) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        let (na, nb) = (self.count as f64, other.count as f64);
        self.mean += delta * nb / n;
        self.m2 += other.m2 + delta * delta * na * nb / n;
        self.count += other.count;
        self.max = self.max.max(other.max);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            f64::NAN
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn standard_error(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    /// |mean − target| in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean() - target).abs() / self.standard_error()
    }

    /// Sample maximum above 10·mean·√n: the mean is dominated by rare
    /// samples and its standard error is not trustworthy.
    pub fn heavy_tail(&self) -> bool {
        self.count > 0 && self.max > 10.0 * self.mean.abs() * (self.count as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, -2.0, 8.5, 3.25];
        let e = EnsembleEstimate::from_samples(xs);
        let m = xs.iter().sum::<f64>() / 5.0;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 4.0;
        assert!((e.mean() - m).abs() < 1e-14 && (e.variance() - v).abs() < 1e-13);
        assert_eq!(e.max(), 8.5);
    }

    #[test]
    fn merge_equals_single_pass() {
        let xs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let whole = EnsembleEstimate::from_samples(xs.iter().copied());
        let mut a = EnsembleEstimate::from_samples(xs[..17].iter().copied());
        a.merge(&EnsembleEstimate::from_samples(xs[17..].iter().copied()));
        assert_eq!(a.count(), 50);
        assert!((a.mean() - whole.mean()).abs() < 1e-14 && (a.variance() - whole.variance()).abs() < 1e-13);
        let mut empty = EnsembleEstimate::new();
        empty.merge(&whole);
        assert_eq!(empty, whole);
    }
}
