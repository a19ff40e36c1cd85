use super::{qubit_gibbs, GroupedTrajectory};
use crate::protocol::presets::Variant;

/// Every grouped trajectory of the one-shot feedback protocol: Gibbs start,
/// measurement, feedback, full rethermalization. 8 rows (classical) or 16
/// rows (quantum, where the heat is not fixed by a, Y, f).
pub fn enumerate_single_measurement(variant: Variant, beta_omega: f64, epsilon: f64) -> Vec<GroupedTrajectory> {
    let (p0, p1) = qubit_gibbs(beta_omega);
    let p = [p0, p1];
    let e = epsilon;
    let boltz = |q: i32| (-beta_omega * q as f64).exp();
    let mut rows = Vec::new();
    match variant {
        Variant::Classical => {
            for y in 0..2 {
                for f in 0..2 {
                    for a in 0..2 {
                        // σx flips the level after outcome 1
                        let b = if y == 0 { a } else { 1 - a };
                        let q = b as i32 - f as i32;
                        let hit = a == y;
                        let w = if hit { 1.0 - e } else { e };
                        let back = if hit { p0 * (1.0 - e) } else { p1 * e };
                        let wname = if hit { "(1-e)" } else { "e" };
                        rows.push(GroupedTrajectory {
                            a,
                            y: vec![y],
                            f,
                            heats: vec![q],
                            probability: p[a] * w * p[f],
                            exp_neg_sigma: p[f] / p[a] * boltz(q),
                            p_tr: p[f] * back,
                            formulas: [
                                format!("p{a}*{wname}*p{f}"),
                                format!("p{f}/p{a}*exp(-bw*{q})"),
                                format!("p{f}*p{}*{wname}", if hit { 0 } else { 1 }),
                            ],
                        });
                    }
                }
            }
        }
        Variant::Quantum => {
            // after feedback the level is b = f + q/ω, reached with weight
            // (1−ε)/2 (b = 0) or ε/2 (b = 1) whatever a and Y
            for b in 0..2usize {
                for y in 0..2 {
                    for f in 0..2 {
                        for a in 0..2 {
                            let q = b as i32 - f as i32;
                            let (w, wname) = if b == 0 { (1.0 - e, "(1-e)") } else { (e, "e") };
                            let prob = p[a] * w * p[f] / 2.0;
                            rows.push(GroupedTrajectory {
                                a,
                                y: vec![y],
                                f,
                                heats: vec![q],
                                probability: prob,
                                exp_neg_sigma: p[f] / p[a] * boltz(q),
                                p_tr: p[f] * w * p[b] / 2.0,
                                formulas: [
                                    format!("p{a}*{wname}*p{f}/2"),
                                    format!("p{f}/p{a}*exp(-bw*{q})"),
                                    format!("p{f}*{wname}*p{b}/2"),
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
