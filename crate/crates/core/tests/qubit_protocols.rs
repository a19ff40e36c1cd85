use ftlab::propagate::Propagation;
use ftlab::protocol::presets::{qubit_double, qubit_single, Variant};
use ftlab::thermo::exact_summary;

fn gibbs(beta_omega: f64) -> (f64, f64) {
    let x = (-beta_omega).exp();
    (1.0 / (1.0 + x), x / (1.0 + x))
}

fn h2(x: f64) -> f64 {
    let t = |p: f64| if p > 0.0 { -p * p.ln() } else { 0.0 };
    t(x) + t(1.0 - x)
}

const EPS: [f64; 6] = [0.0, 0.01, 0.1, 0.25, 0.3, 0.5];

#[test]
fn single_classical_closed_forms() {
    let (p0, p1) = gibbs(1.0);
    for eps in EPS {
        let p = qubit_single(Variant::Classical, 1.0, eps).unwrap();
        let s = exact_summary(&p, Propagation::Lindblad).unwrap();
        let big_p0 = (1.0 - eps) * p0 + eps * p1;
        assert!((s.mean_sigma - (eps - p1)).abs() < 1e-10, "σ at ε={eps}: {}", s.mean_sigma);
        let cg = -h2(big_p0) - big_p0.ln();
        assert!((s.mean_sigma_cg - cg).abs() < 1e-10, "σ_cg at ε={eps}: {} vs {cg}", s.mean_sigma_cg);
        let mi = -h2(eps) + h2(big_p0);
        assert!((s.mutual_information.unwrap() - mi).abs() < 1e-10);
        assert!((s.work - (p1 - eps)).abs() < 1e-10, "W {} vs {}", s.work, p1 - eps);
        assert!((s.exp_neg_sigma_minus_cg - 1.0).abs() < 1e-10);
        for r in &s.records {
            assert!((r.p_tr - big_p0).abs() < 1e-10, "P_tr {} vs {big_p0}", r.p_tr);
        }
    }
}

#[test]
fn single_quantum_closed_forms() {
    let (p0, p1) = gibbs(1.0);
    for eps in EPS {
        let p = qubit_single(Variant::Quantum, 1.0, eps).unwrap();
        let s = exact_summary(&p, Propagation::Lindblad).unwrap();
        let big_p0 = (1.0 - eps) * p0 + eps * p1;
        assert!((s.mean_sigma - (eps - p1)).abs() < 1e-10);
        assert!((s.mean_sigma_cg - (0.5f64.ln() - big_p0.ln())).abs() < 1e-10);
        let d = p0 - p1;
        let mi = h2(p0) - h2((1.0 + (1.0 - 4.0 * eps * (1.0 - eps) * (1.0 - d * d)).sqrt()) / 2.0);
        assert!((s.mutual_information.unwrap() - mi).abs() < 1e-10);
        let w = (0.5 - eps) - d * (eps * (1.0 - eps)).sqrt();
        assert!((s.work - w).abs() < 1e-10, "W {} vs {w}", s.work);
        for r in &s.records {
            assert!((r.probability - 0.5).abs() < 1e-10);
        }
    }
}

#[test]
fn double_measurement_integral_ft() {
    for variant in [Variant::Classical, Variant::Quantum] {
        for kdt in [0.2, 1.0] {
            for eps in [0.0, 0.1, 0.3] {
                let p = qubit_double(variant, 1.0, eps, kdt).unwrap();
                for mode in [Propagation::Lindblad, Propagation::Unraveled] {
                    let s = exact_summary(&p, mode).unwrap();
                    let total: f64 = s.records.iter().map(|r| r.probability).sum();
                    assert!((total - 1.0).abs() < 1e-12);
                    assert!((s.exp_neg_sigma_minus_cg + s.excluded_probability - 1.0).abs() < 1e-10);
                    assert!(s.mean_sigma >= s.mean_sigma_cg - 1e-12);
                }
            }
        }
    }
}
