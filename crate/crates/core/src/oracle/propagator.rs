use num_complex::Complex64;

/// Matrix elements of the qubit thermalization map e^{ℒt} (H = ωσz/2,
/// emission rate κ, absorption κe^{−βω}). `pop[i][j]` = ⟨j|e^{ℒt}{|i⟩⟨i|}|j⟩.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagatorElements {
    pub pop: [[f64; 2]; 2],
    /// ⟨0|e^{ℒt}{|0⟩⟨1|}|1⟩
    pub coherence_01: Complex64,
    /// ⟨1|e^{ℒt}{|1⟩⟨0|}|0⟩
    pub coherence_10: Complex64,
}

impl PropagatorElements {
    /// ⟨c|e^{ℒt}{|c⟩⟨d|}|d⟩
    pub fn element(&self, c: usize, d: usize) -> Complex64 {
        match (c, d) {
            (0, 1) => self.coherence_01,
            (1, 0) => self.coherence_10,
            _ => Complex64::new(self.pop[c][c], 0.0),
        }
    }
}

/// Closed forms in terms of βω, κt and ωt.
pub fn qubit_propagator_elements(beta_omega: f64, kappa_t: f64, omega_t: f64) -> PropagatorElements {
    let x = (-beta_omega).exp();
    let relax = (-kappa_t * (1.0 + x)).exp();
    let n = 1.0 + x;
    let pop = [[(x * relax + 1.0) / n, x * (1.0 - relax) / n], [(1.0 - relax) / n, (relax + x) / n]];
    let decay = (-kappa_t * (1.0 + x) / 2.0).exp();
    PropagatorElements {
        pop,
        coherence_01: Complex64::from_polar(decay, omega_t),
        coherence_10: Complex64::from_polar(decay, -omega_t),
    }
}
