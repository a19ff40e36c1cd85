use ftlab::oracle::{backward_probabilities, enumerate_single_measurement, enumerate_two_measurements, GroupedTrajectory};
use ftlab::protocol::presets::Variant;
use ftlab::sweep::format_number;

use crate::{output, CmdResult, Table, TableArgs};

/// Heats are in units of ω; formulas use p0, p1, e (= ε), bw (= βω) and,
/// for two measurements, the propagator elements P(i→j) and C(c,d) and the
/// amplitudes A_y(to,from) of U_y M_y.
pub fn write(a: &TableArgs) -> CmdResult {
    let (rows, two) = match a.table {
        Table::Classical => (enumerate_single_measurement(Variant::Classical, a.beta_omega, a.epsilon), false),
        Table::Quantum => (enumerate_single_measurement(Variant::Quantum, a.beta_omega, a.epsilon), false),
        Table::Two => {
            let omega_dt = a.omega_dt.unwrap_or(a.kappa_dt);
            (enumerate_two_measurements(a.variant, a.beta_omega, a.epsilon, a.kappa_dt, omega_dt), true)
        }
    };
    let mut w = csv::Writer::from_writer(output(&a.out)?);
    let mut header: Vec<&str> = if two { vec!["a", "y1", "y2", "f", "q1", "q2"] } else { vec!["a", "y", "f", "q"] };
    header.extend([
        "probability",
        "exp_neg_sigma",
        "p_tr",
        "p_backward",
        "sigma",
        "formula_probability",
        "formula_exp_neg_sigma",
        "formula_p_tr",
    ]);
    w.write_record(&header)?;
    let pb = backward_probabilities(&rows);
    for (r, pb) in rows.iter().zip(pb) {
        w.write_record(fields(r, pb))?;
    }
    w.flush()?;
    Ok(())
}

fn fields(r: &GroupedTrajectory, pb: f64) -> Vec<String> {
    let mut v = vec![r.a.to_string()];
    v.extend(r.y.iter().map(|y| y.to_string()));
    v.push(r.f.to_string());
    v.extend(r.heats.iter().map(|q| q.to_string()));
    v.extend([r.probability, r.exp_neg_sigma, r.p_tr, pb, r.sigma()].map(format_number));
    v.extend(r.formulas.iter().cloned());
    v
}
