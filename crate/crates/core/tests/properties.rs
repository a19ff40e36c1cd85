use ftlab::backward::trajectory_weights;
use ftlab::channel::{qubit_thermal_pair, ChannelSet};
use ftlab::evolve::evolve_nonhermitian;
use ftlab::kraus::{apply_kraus, KrausSet};
use ftlab::linalg::{c, pauli, ComplexMatrix, StateVector};
use ftlab::oracle::{enumerate_single_measurement, enumerate_two_measurements, table_averages};
use ftlab::protocol::presets::{qubit_double, Variant};
use ftlab::reversal::{time_reverse, TimeReversal};
use ftlab::state::{thermal_state, DensityMatrix, Tolerances};
use ftlab::thermo::entropy_production;
use ftlab::trajectory::{run_trajectory, RngStream};
use proptest::prelude::*;

fn matrix(dim: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), dim * dim)
        .prop_map(move |v| ComplexMatrix::from_fn(dim, |i, j| c(v[i * dim + j].0, v[i * dim + j].1)))
}

fn hermitian(dim: usize) -> impl Strategy<Value = ComplexMatrix> {
    matrix(dim).prop_map(|a| (&a + &a.adjoint()).scale_real(0.5))
}

fn density(dim: usize) -> impl Strategy<Value = DensityMatrix> {
    matrix(dim).prop_map(|a| {
        let rho = a.mul_adjoint(&a);
        let t = rho.trace().re;
        DensityMatrix::new(rho.scale_real(1.0 / t).hermitian_part(), &Tolerances::default()).unwrap()
    })
}

fn variant() -> impl Strategy<Value = Variant> {
    prop_oneof![Just(Variant::Classical), Just(Variant::Quantum)]
}

proptest! {
    #[test]
    fn qubit_readouts_are_complete(eps in 0.0..=1.0f64) {
        for k in [KrausSet::qubit_classical(eps).unwrap(), KrausSet::qubit_quantum(eps).unwrap()] {
            prop_assert!(k.completeness_residual() <= 1e-10);
        }
    }

    #[test]
    fn outcome_probabilities_sum_to_one(rho in density(2), eps in 0.0..=1.0f64) {
        for k in [KrausSet::qubit_classical(eps).unwrap(), KrausSet::qubit_quantum(eps).unwrap(), KrausSet::projective(2)] {
            let total: f64 = (0..k.len()).map(|y| apply_kraus(&rho, &k, y).unwrap().probability).sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn projective_probabilities_are_populations(rho in density(4)) {
        let k = KrausSet::projective(4);
        for y in 0..4 {
            let p = apply_kraus(&rho, &k, y).unwrap().probability;
            prop_assert!((p - rho.matrix()[(y, y)].re).abs() <= 1e-12);
        }
    }

    #[test]
    fn thermal_channels_satisfy_detailed_balance(kappa in 0.0..5.0f64, omega in 0.01..3.0f64, beta in 0.0..4.0f64) {
        let set = ChannelSet::new(qubit_thermal_pair(kappa, omega, beta), beta, 2, &Tolerances::default()).unwrap();
        prop_assert!(set.detailed_balance_residual(beta) <= 1e-12);
    }

    #[test]
    fn time_reversal_is_an_antilinear_involution(a in matrix(2), re in -2.0..2.0f64, im in -2.0..2.0f64) {
        let z = c(re, im);
        for theta in [TimeReversal::standard(), TimeReversal::with_basis(pauli::x()).unwrap()] {
            let back = theta.apply_inverse(&time_reverse(&a, &theta));
            prop_assert!((&back - &a).frobenius_norm() <= 1e-14);
            let twice = time_reverse(&time_reverse(&a, &theta), &theta);
            prop_assert!((&twice - &a).frobenius_norm() <= 1e-14);
            let lhs = time_reverse(&a.scale(z), &theta);
            let rhs = time_reverse(&a, &theta).scale(z.conj());
            prop_assert!((&lhs - &rhs).frobenius_norm() <= 1e-13);
        }
    }

    #[test]
    fn hermitian_evolution_is_unitary(h in hermitian(3), dt in 0.001..0.05f64) {
        let mut psi = StateVector::basis(3, 0);
        for _ in 0..1000 {
            psi = evolve_nonhermitian(&psi, &h, dt).unwrap();
        }
        prop_assert!((psi.norm_sqr() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn gibbs_weights_follow_boltzmann_ratios(h in hermitian(3), beta in 0.0..3.0f64) {
        let t = thermal_state(&h, beta).unwrap();
        let p = &t.spectrum.probabilities;
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for i in 1..p.len() {
            let ratio = (-beta * (t.energies[i] - t.energies[0])).exp();
            prop_assert!((p[i] / p[0] - ratio).abs() <= 1e-10 * (1.0 + ratio));
        }
    }

    #[test]
    fn single_tables_obey_both_theorems(v in variant(), bw in 0.1..3.0f64, eps in 0.0..=0.5f64) {
        let rows = enumerate_single_measurement(v, bw, eps);
        let avg = table_averages(&rows);
        prop_assert!((avg.total_probability - 1.0).abs() <= 1e-12);
        prop_assert!((avg.exp_neg_sigma_minus_cg - 1.0).abs() <= 1e-10);
        for r in &rows {
            prop_assert!((r.p_tr - r.exp_neg_sigma * r.probability).abs() <= 1e-13);
        }
        // the coarse-grained entropy never exceeds the full one
        prop_assert!(avg.mean_sigma >= avg.mean_sigma_cg - 1e-12);
    }

    #[test]
    fn two_measurement_tables_obey_both_theorems(
        v in variant(), bw in 0.1..3.0f64, eps in 0.0..=0.5f64, kdt in 0.05..3.0f64, wdt in 0.0..6.3f64,
    ) {
        let rows = enumerate_two_measurements(v, bw, eps, kdt, wdt);
        let avg = table_averages(&rows);
        prop_assert!((avg.total_probability - 1.0).abs() <= 1e-12);
        prop_assert!((avg.exp_neg_sigma_minus_cg - 1.0).abs() <= 1e-10);
        prop_assert!(rows.iter().all(|r| r.probability >= -1e-15 && r.p_tr >= -1e-15));
        prop_assert!(avg.mean_sigma >= avg.mean_sigma_cg - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sampled_trajectories_obey_the_detailed_theorem(v in variant(), eps in 0.0..=0.5f64, kdt in 0.1..1.5f64, seed in any::<u64>()) {
        let p = qubit_double(v, 1.0, eps, kdt).unwrap();
        for i in 0..20 {
            let r = run_trajectory(&p, &mut RngStream::new(seed, i)).unwrap();
            let w = trajectory_weights(&p, &r).unwrap();
            let sigma = entropy_production(&r, &p).sigma;
            prop_assert!((w.ln_forward - r.ln_probability).abs() <= 1e-9);
            prop_assert!((w.ln_reversed - w.ln_forward + sigma).abs() <= 1e-9, "trajectory {i}");
        }
    }
}
