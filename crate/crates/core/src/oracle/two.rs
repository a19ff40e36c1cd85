use num_complex::Complex64;

use super::propagator::qubit_propagator_elements;
use super::{qubit_gibbs, GroupedTrajectory};
use crate::protocol::presets::Variant;

/// ⟨ℓ'|U_y M_y|ℓ⟩ of the feedback-corrected measurement.
fn amplitude(variant: Variant, epsilon: f64, y: usize, to: usize, from: usize) -> f64 {
    match variant {
        Variant::Classical => {
            let weight = if y == from { (1.0 - epsilon).sqrt() } else { epsilon.sqrt() };
            let routed = if y == 0 { to == from } else { to != from };
            if routed {
                weight
            } else {
                0.0
            }
        }
        Variant::Quantum => {
            let sign = |l: usize| if l == 0 { 1.0 } else { -1.0 };
            let outcome = if y == 0 { 1.0 } else { sign(from) };
            let level = if to == 0 { ((1.0 - epsilon) / 2.0).sqrt() } else { sign(from) * (epsilon / 2.0).sqrt() };
            outcome * level
        }
    }
}

/// The 96 grouped trajectories {a, y₁, y₂, f, q₁, q₂} of the protocol with
/// two feedback rounds separated by a partial thermalization of length Δt
/// (κΔt = `kappa_dt`, ωΔt = `omega_dt`), followed by full thermalization.
pub fn enumerate_two_measurements(
    variant: Variant,
    beta_omega: f64,
    epsilon: f64,
    kappa_dt: f64,
    omega_dt: f64,
) -> Vec<GroupedTrajectory> {
    let (p0, p1) = qubit_gibbs(beta_omega);
    let p = [p0, p1];
    let e = qubit_propagator_elements(beta_omega, kappa_dt, omega_dt);
    let amp = |y: usize, to: usize, from: usize| amplitude(variant, epsilon, y, to, from);
    let mut rows = Vec::with_capacity(96);
    for a in 0..2 {
        for y1 in 0..2 {
            for y2 in 0..2 {
                for f in 0..2 {
                    for q1 in [1i32, -1, 0] {
                        for b in 0..2usize {
                            let q2 = b as i32 - f as i32;
                            let (fwd, back, shape) = match q1 {
                                1 => {
                                    let w = amp(y2, b, 0).powi(2) * amp(y1, 1, a).powi(2);
                                    (w * e.pop[1][0], w * e.pop[0][1], format!("|A{y2}({b},0)|^2*|A{y1}(1,{a})|^2"))
                                }
                                -1 => {
                                    let w = amp(y2, b, 1).powi(2) * amp(y1, 0, a).powi(2);
                                    (w * e.pop[0][1], w * e.pop[1][0], format!("|A{y2}({b},1)|^2*|A{y1}(0,{a})|^2"))
                                }
                                _ => {
                                    let mut f_sum = Complex64::new(0.0, 0.0);
                                    let mut b_sum = Complex64::new(0.0, 0.0);
                                    for c in 0..2 {
                                        for d in 0..2 {
                                            let el = e.element(c, d);
                                            f_sum += el * amp(y2, b, c) * amp(y1, c, a) * amp(y1, d, a) * amp(y2, b, d);
                                            b_sum += el * amp(y1, c, a) * amp(y2, b, c) * amp(y2, b, d) * amp(y1, d, a);
                                        }
                                    }
                                    (f_sum.re, b_sum.re, format!("sum_cd A{y2}({b},c)A{y1}(c,{a})A{y1}(d,{a})A{y2}({b},d)E(c,d)"))
                                }
                            };
                            let prob = p[a] * p[f] * fwd;
                            rows.push(GroupedTrajectory {
                                a,
                                y: vec![y1, y2],
                                f,
                                heats: vec![q1, q2],
                                probability: prob,
                                exp_neg_sigma: p[f] / p[a] * (-beta_omega * (q1 + q2) as f64).exp(),
                                p_tr: p[f] * p[b] * back,
                                formulas: [
                                    format!("p{a}*p{f}*{shape}*L(q1={q1})"),
                                    format!("p{f}/p{a}*exp(-bw*{})", q1 + q2),
                                    format!("p{f}*p{b}*{shape}*Lrev(q1={q1})"),
                                ],
                            });
                        }
                    }
                }
            }
        }
    }
    rows
}
