//! Unobserved reservoir jump channels obeying local detailed balance.

use crate::error::{Error, Result};
use crate::linalg::{pauli, ComplexMatrix, I};
use crate::state::Tolerances;

#[derive(Clone, Debug)]
pub struct JumpChannel {
    pub label: String,
    pub operator: ComplexMatrix,
    /// Energy handed to the reservoir when this jump fires.
    pub heat: f64,
    pub partner: String,
}

/// A validated family of channels; partner labels are resolved to indices.
#[derive(Clone, Debug)]
pub struct ChannelSet {
    channels: Vec<JumpChannel>,
    partners: Vec<usize>,
    /// L†L for every channel (unscaled).
    rates: Vec<ComplexMatrix>,
}

impl ChannelSet {
    pub fn empty() -> Self {
        ChannelSet { channels: Vec::new(), partners: Vec::new(), rates: Vec::new() }
    }

    /// Checks q_j = −q_{j̃} and ‖L_{j̃} − L_j† e^{−βq_j/2}‖_F ≤ tol for every pair.
    pub fn new(channels: Vec<JumpChannel>, beta: f64, dim: usize, tol: &Tolerances) -> Result<Self> {
        let mut partners = Vec::with_capacity(channels.len());
        for (i, ch) in channels.iter().enumerate() {
            if ch.operator.dim() != dim {
                return Err(Error::Dimension(format!("channel `{}` has dim {} (system dim {dim})", ch.label, ch.operator.dim())));
            }
            if channels[..i].iter().any(|o| o.label == ch.label) {
                return Err(Error::config(format!("channels.{}", ch.label), "duplicate channel label"));
            }
            let p = channels
                .iter()
                .position(|o| o.label == ch.partner)
                .ok_or_else(|| Error::config(format!("channels.{}", ch.label), format!("partner `{}` not declared", ch.partner)))?;
            partners.push(p);
        }
        for (i, ch) in channels.iter().enumerate() {
            let partner = &channels[partners[i]];
            if partners[partners[i]] != i {
                return Err(Error::config(format!("channels.{}", ch.label), "partner relation is not symmetric"));
            }
            let mismatch = (ch.heat + partner.heat).abs();
            let expected = ch.operator.adjoint().scale_real((-beta * ch.heat / 2.0).exp());
            let residual = (&partner.operator - &expected).frobenius_norm() + mismatch;
            if residual > tol.detailed_balance * (1.0 + ch.operator.max_abs()) {
                return Err(Error::DetailedBalance { channel: ch.label.clone(), residual });
            }
        }
        let rates = channels.iter().map(|ch| &ch.operator.adjoint() * &ch.operator).collect();
        Ok(ChannelSet { channels, partners, rates })
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn channels(&self) -> &[JumpChannel] {
        &self.channels
    }

    pub fn get(&self, j: usize) -> &JumpChannel {
        &self.channels[j]
    }

    pub fn partner(&self, j: usize) -> usize {
        self.partners[j]
    }

    pub fn rate_operator(&self, j: usize) -> &ComplexMatrix {
        &self.rates[j]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.channels.iter().position(|c| c.label == label)
    }

    /// Largest detailed-balance residual over all channels.
    pub fn detailed_balance_residual(&self, beta: f64) -> f64 {
        (0..self.len())
            .map(|i| {
                let ch = &self.channels[i];
                let p = &self.channels[self.partners[i]];
                (&p.operator - &ch.operator.adjoint().scale_real((-beta * ch.heat / 2.0).exp())).frobenius_norm()
            })
            .fold(0.0, f64::max)
    }
}

/// Emission L₋ = √κ σ₋ (heat +ω) and absorption L₊ = √κ e^{−βω/2} σ₊ (heat −ω).
pub fn qubit_thermal_pair(kappa: f64, omega: f64, beta: f64) -> Vec<JumpChannel> {
    vec![
        JumpChannel { label: "emit".into(), operator: pauli::lower().scale_real(kappa.sqrt()), heat: omega, partner: "absorb".into() },
        JumpChannel {
            label: "absorb".into(),
            operator: pauli::raise().scale_real(kappa.sqrt() * (-beta * omega / 2.0).exp()),
            heat: -omega,
            partner: "emit".into(),
        },
    ]
}

/// H − (i/2)Σ L†L − (i/2)Σ M†M; the monitored operators already carry their rate.
pub fn effective_hamiltonian(h: &ComplexMatrix, jumps: &[&ComplexMatrix], monitored: &[&ComplexMatrix]) -> Result<ComplexMatrix> {
    let d = h.dim();
    let mut out = h.clone();
    for l in jumps.iter().chain(monitored) {
        if l.dim() != d {
            return Err(Error::Dimension(format!("operator dim {} vs Hamiltonian dim {d}", l.dim())));
        }
        out -= &(&l.adjoint() * l).scale(I * 0.5);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn thermal_pair_satisfies_detailed_balance() {
        let tol = Tolerances::default();
        let set = ChannelSet::new(qubit_thermal_pair(0.3, 1.0, 1.0), 1.0, 2, &tol).unwrap();
        assert!(set.detailed_balance_residual(1.0) < 1e-15);
        assert_eq!(set.partner(0), 1);
        // wrong temperature breaks the pairing
        assert!(ChannelSet::new(qubit_thermal_pair(0.3, 1.0, 1.0), 2.0, 2, &tol).is_err());
    }

    #[test]
    fn effective_hamiltonian_examples() {
        let kappa: f64 = 0.4;
        let l = pauli::lower().scale_real(kappa.sqrt());
        let h0 = ComplexMatrix::zeros(2);
        let heff = effective_hamiltonian(&h0, &[&l], &[]).unwrap();
        let expect = ComplexMatrix::diag_real(&[0.0, 1.0]).scale(c(0.0, -kappa / 2.0));
        assert!((&heff - &expect).frobenius_norm() < 1e-16);

        let h = pauli::z().scale_real(0.5);
        assert_eq!(effective_hamiltonian(&h, &[], &[]).unwrap(), h);

        let beta_omega: f64 = 1.0;
        let pair = qubit_thermal_pair(kappa, 1.0, beta_omega);
        let heff = effective_hamiltonian(&h, &[&pair[0].operator, &pair[1].operator], &[]).unwrap();
        let damping = ComplexMatrix::diag_real(&[(-beta_omega).exp(), 1.0]).scale(c(0.0, -kappa / 2.0));
        assert!((&heff - &(&h + &damping)).frobenius_norm() < 1e-15);

        assert!(effective_hamiltonian(&h, &[&ComplexMatrix::zeros(3)], &[]).is_err());
    }
}
