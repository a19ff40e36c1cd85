use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kraus::KrausSet;
use crate::linalg::{pauli, ComplexMatrix, StateVector};

/// One piece of a piecewise-constant joint schedule: coupling V held for
/// `duration` on top of H_S ⊗ I + I ⊗ H_R.
#[derive(Clone, Debug)]
pub struct Piece {
    pub coupling: ComplexMatrix,
    pub duration: f64,
}

/// System ⊗ finite reservoir with everything diagonal in the product
/// computational basis at the start and end: one measurement (optional) on
/// the system, an outcome-dependent unitary, and an outcome-dependent
/// schedule afterwards.
#[derive(Clone, Debug)]
pub struct DilatedModel {
    pub beta: f64,
    /// Diagonal system Hamiltonian (its eigenbasis labels a and f).
    pub system_energies: Vec<f64>,
    pub reservoir_energies: Vec<f64>,
    /// Populations of the initial system state in the energy basis.
    pub initial: Vec<f64>,
    /// Populations of the reference state in the energy basis.
    pub reference: Vec<f64>,
    pub before: Vec<Piece>,
    pub measurement: Option<KrausSet>,
    /// Unitary applied after each outcome.
    pub feedback: Vec<ComplexMatrix>,
    /// Schedule after each outcome.
    pub after: Vec<Vec<Piece>>,
}

pub const MAX_TOTAL_DIM: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DilatedReport {
    /// Number of (a, E₀, Y, f, E_τ) tuples enumerated.
    pub trajectories: usize,
    /// max |P_tr[Γ̄] − e^{−σ[Γ]} P[Γ]|
    pub residual: f64,
    pub total_probability: f64,
    /// Σ_Γ P[Γ](E_τ − E₀)
    pub mean_heat: f64,
    /// Tr{H_R ρ_τ} − Tr{H_R τ_R} from the averaged joint state.
    pub reservoir_energy_change: f64,
    /// Largest ‖U†U − I‖_F over the joint propagators.
    pub unitarity_residual: f64,
}

fn gibbs(energies: &[f64], beta: f64) -> Vec<f64> {
    let e0 = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies.iter().map(|e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

impl DilatedModel {
    fn dims(&self) -> (usize, usize) {
        (self.system_energies.len(), self.reservoir_energies.len())
    }

    fn bare(&self) -> ComplexMatrix {
        let (ds, dr) = self.dims();
        let hs = ComplexMatrix::diag_real(&self.system_energies);
        let hr = ComplexMatrix::diag_real(&self.reservoir_energies);
        &hs.kron(&ComplexMatrix::identity(dr)) + &ComplexMatrix::identity(ds).kron(&hr)
    }

    fn propagate(&self, pieces: &[Piece], reversed: bool) -> Result<ComplexMatrix> {
        let bare = self.bare();
        let mut u = ComplexMatrix::identity(bare.dim());
        let order: Vec<&Piece> = if reversed { pieces.iter().rev().collect() } else { pieces.iter().collect() };
        for p in order {
            let h = &bare + &p.coupling;
            // the backward run uses the time-reversed Hamiltonian Θ H Θ⁻¹
            let h = if reversed { h.conj() } else { h };
            u = &h.unitary_exp(p.duration)? * &u;
        }
        Ok(u)
    }

    fn validate(&self) -> Result<()> {
        let (ds, dr) = self.dims();
        if ds * dr > MAX_TOTAL_DIM {
            return Err(Error::Unsupported(format!("joint dimension {} exceeds {MAX_TOTAL_DIM}", ds * dr)));
        }
        if self.initial.len() != ds || self.reference.len() != ds {
            return Err(Error::Dimension("initial/reference populations vs system dimension".into()));
        }
        let outcomes = self.measurement.as_ref().map_or(1, |k| k.len());
        if self.feedback.len() != outcomes || self.after.len() != outcomes {
            return Err(Error::Dimension("one feedback unitary and one schedule per outcome".into()));
        }
        let bare = self.bare();
        for p in self.before.iter().chain(self.after.iter().flatten()) {
            if p.coupling.dim() != ds * dr {
                return Err(Error::Dimension("coupling dimension".into()));
            }
            if p.coupling.commutator(&bare).frobenius_norm() > 1e-12 {
                return Err(Error::Unsupported("coupling must commute with the bare energy".into()));
            }
        }
        Ok(())
    }

    /// Qubit plus one reservoir qubit of the same splitting, exchange
    /// coupling, projective readout answered by a σx flip.
    pub fn swap_preset(beta: f64) -> Self {
        let swap = &pauli::raise().kron(&pauli::lower()) + &pauli::lower().kron(&pauli::raise());
        let p = gibbs(&[0.0, 1.0], beta);
        DilatedModel {
            beta,
            system_energies: vec![0.0, 1.0],
            reservoir_energies: vec![0.0, 1.0],
            initial: p.clone(),
            reference: p,
            before: vec![Piece { coupling: swap.scale_real(0.7), duration: 0.9 }],
            measurement: Some(KrausSet::projective(2)),
            feedback: vec![ComplexMatrix::identity(2), pauli::x()],
            after: vec![
                vec![Piece { coupling: swap.scale_real(0.4), duration: 1.3 }],
                vec![Piece { coupling: swap.scale_real(1.1), duration: 0.6 }, Piece { coupling: swap.scale_real(0.2), duration: 0.5 }],
            ],
        }
    }

    /// Identity dynamics with no measurement and ρ_r = ρ₀.
    pub fn trivial_preset(beta: f64) -> Self {
        let p = gibbs(&[0.0, 1.0], beta);
        DilatedModel {
            beta,
            system_energies: vec![0.0, 1.0],
            reservoir_energies: vec![0.0, 1.0],
            initial: p.clone(),
            reference: p,
            before: Vec::new(),
            measurement: None,
            feedback: vec![ComplexMatrix::identity(2)],
            after: vec![Vec::new()],
        }
    }

    /// Qubit plus a two-qubit reservoir (all splittings 1) with random real
    /// energy-conserving couplings, a noisy energy readout, σx feedback and
    /// outcome-dependent couplings afterwards.
    pub fn random_preset(seed: u64, beta: f64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let system = vec![0.0, 1.0];
        let reservoir = vec![0.0, 1.0, 1.0, 2.0];
        let shell: Vec<f64> = system.iter().flat_map(|s| reservoir.iter().map(move |r| s + r)).collect();
        let mut random_coupling = |scale: f64| {
            let d = shell.len();
            let mut v = ComplexMatrix::zeros(d);
            for i in 0..d {
                for j in i..d {
                    if shell[i] == shell[j] {
                        let x: f64 = scale * (rng.random::<f64>() * 2.0 - 1.0);
                        v.as_mut_slice()[i * d + j] = x.into();
                        v.as_mut_slice()[j * d + i] = x.into();
                    }
                }
            }
            v
        };
        let before = vec![
            Piece { coupling: random_coupling(1.0), duration: 0.8 },
            Piece { coupling: random_coupling(0.5), duration: 0.4 },
        ];
        let after = vec![
            vec![Piece { coupling: random_coupling(1.0), duration: 1.0 }],
            vec![Piece { coupling: random_coupling(0.8), duration: 0.7 }, Piece { coupling: random_coupling(0.3), duration: 0.5 }],
        ];
        let eps = 0.05 + 0.4 * rng.random::<f64>();
        let p = gibbs(&system, beta);
        let r = rng.random::<f64>() * 0.5 + 0.25;
        Ok(DilatedModel {
            beta,
            system_energies: system,
            reservoir_energies: reservoir,
            initial: p,
            reference: vec![r, 1.0 - r],
            before,
            measurement: Some(KrausSet::qubit_classical(eps)?),
            feedback: vec![ComplexMatrix::identity(2), pauli::x()],
            after,
        })
    }
}

/// Enumerates every (a, E₀, Y, f, E_τ), computes P[Γ] by projection on the
/// forward model and P_tr[Γ̄] on the independently built reversed model,
/// and reports the worst violation of P_tr[Γ̄] = e^{−σ[Γ]}P[Γ].
pub fn dilated_verify(model: &DilatedModel) -> Result<DilatedReport> {
    model.validate()?;
    let (ds, dr) = model.dims();
    let d = ds * dr;
    let p_res = gibbs(&model.reservoir_energies, model.beta);
    let trivial = KrausSet::trivial(ds);
    let kraus = model.measurement.as_ref().unwrap_or(&trivial);
    let id_r = ComplexMatrix::identity(dr);

    let u_before = model.propagate(&model.before, false)?;
    let ubar_before = model.propagate(&model.before, true)?;
    let mut unitarity: f64 = (&(&u_before.adjoint() * &u_before) - &ComplexMatrix::identity(d)).frobenius_norm();

    let mut residual: f64 = 0.0;
    let mut total = 0.0;
    let mut mean_heat = 0.0;
    let mut count = 0;
    let mut rho_final = ComplexMatrix::zeros(d);
    let basis = |s: usize, r: usize| StateVector::basis(d, s * dr + r);

    for y in 0..kraus.len() {
        let um = &model.feedback[y] * kraus.operator(y);
        let u_after = model.propagate(&model.after[y], false)?;
        let ubar_after = model.propagate(&model.after[y], true)?;
        unitarity = unitarity.max((&(&u_after.adjoint() * &u_after) - &ComplexMatrix::identity(d)).frobenius_norm());
        let forward = &(&u_after * &um.kron(&id_r)) * &u_before;
        let reversed_record = um.adjoint().conj().kron(&id_r);
        let backward = &(&ubar_before * &reversed_record) * &ubar_after;

        for a in 0..ds {
            for e0 in 0..dr {
                let start = basis(a, e0);
                let out = forward.apply(&start);
                let weight = model.initial[a] * p_res[e0];
                rho_final += &out.projector().scale_real(weight);
                for f in 0..ds {
                    for et in 0..dr {
                        let amp = basis(f, et).inner(&out);
                        let p = weight * amp.norm_sqr();
                        let back_out = backward.apply(&basis(f, et).conj());
                        let back = model.reference[f] * p_res[et] * start.conj().inner(&back_out).norm_sqr();
                        let heat = model.reservoir_energies[et] - model.reservoir_energies[e0];
                        count += 1;
                        total += p;
                        mean_heat += p * heat;
                        if p == 0.0 {
                            residual = residual.max(back.abs());
                            continue;
                        }
                        let sigma = model.initial[a].ln() - model.reference[f].ln() + p_res[e0].ln() - p_res[et].ln();
                        residual = residual.max((back - (-sigma).exp() * p).abs());
                    }
                }
            }
        }
    }
    let hr = ComplexMatrix::identity(ds).kron(&ComplexMatrix::diag_real(&model.reservoir_energies));
    let thermal: f64 = p_res.iter().zip(&model.reservoir_energies).map(|(p, e)| p * e).sum();
    Ok(DilatedReport {
        trajectories: count,
        residual,
        total_probability: total,
        mean_heat,
        reservoir_energy_change: hr.trace_product(&rho_final).re - thermal,
        unitarity_residual: unitarity,
    })
}
