//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when a
//! criterion fails that is not listed in `KNOWN_DIVERGENCES`.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ftlab::bundled;
use ftlab::linalg::ComplexMatrix;
use ftlab::oracle::{
    dilated_verify, enumerate_single_measurement, enumerate_two_measurements, qubit_gibbs, table_averages, DilatedModel,
    GroupedTrajectory,
};
use ftlab::propagate::Propagation;
use ftlab::protocol::presets::{
    driven_qubit, feedback_unitaries, measurement, qubit_double, qubit_single, DrivenQubit, Variant,
};
use ftlab::protocol::Protocol;
use ftlab::sweep::{self, RunOptions, SweepSpec};
use ftlab::thermo::{entropy_production, exact_summary, sigma_cg, EnsembleEstimate};
use ftlab::trajectory::{map_batch, BatchOptions};
use ftlab::verify::random_microreversibility;

const EPS_GRID: [f64; 4] = [0.0, 0.1, 0.3, 0.5];
const VARIANTS: [Variant; 2] = [Variant::Classical, Variant::Quantum];

/// Criteria whose stated target disagrees with what the model gives; they
/// are still evaluated and printed as FAIL.
const KNOWN_DIVERGENCES: &[(&str, &str)] = &[(
    "3b",
    "the measured |±⟩ states carry energy −ω(p0−p1)√(ε(1−ε)) that the stated ⟨W⟩ leaves out",
)];

struct Line {
    id: &'static str,
    title: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
}

type Outcome = Result<(bool, String), String>;

struct Suite {
    lines: Vec<Line>,
}

impl Suite {
    fn run(&mut self, id: &'static str, title: &'static str, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        self.record(id, title, passed, detail, start.elapsed());
    }

    fn record(&mut self, id: &'static str, title: &'static str, passed: bool, detail: String, elapsed: Duration) {
        let known = KNOWN_DIVERGENCES.iter().find(|(k, _)| *k == id).map(|(_, why)| *why);
        let tag = if passed { "PASS" } else { "FAIL" };
        println!("{tag} {id:<3} {title} [{:.2} s]", elapsed.as_secs_f64());
        println!("         {detail}");
        if let (false, Some(why)) = (passed, known) {
            println!("         known divergence: {why}");
        }
        self.lines.push(Line { id, title, passed, detail, elapsed });
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

// ---------------------------------------------------------------------------
// 1. symbolic table entries

struct Sym {
    p0: f64,
    p1: f64,
    e: f64,
    /// e^{βω}
    b: f64,
}

type Entry = fn(&Sym) -> f64;

/// (a, y, f, q/ω, P, e^{−σ}, P_tr) for the energy-basis readout.
fn classical_literals() -> Vec<(usize, usize, usize, i32, Entry, Entry, Entry)> {
    vec![
        (0, 0, 0, 0, |s| s.p0 * (1.0 - s.e) * s.p0, |_| 1.0, |s| s.p0 * s.p0 * (1.0 - s.e)),
        (1, 0, 0, 1, |s| s.p1 * s.e * s.p0, |s| s.p0 / s.p1 / s.b, |s| s.p0 * s.p1 * s.e),
        (0, 0, 1, -1, |s| s.p0 * (1.0 - s.e) * s.p1, |s| s.p1 / s.p0 * s.b, |s| s.p1 * s.p0 * (1.0 - s.e)),
        (1, 0, 1, 0, |s| s.p1 * s.e * s.p1, |_| 1.0, |s| s.p1 * s.p1 * s.e),
        (0, 1, 0, 1, |s| s.p0 * s.e * s.p0, |s| 1.0 / s.b, |s| s.p0 * s.p1 * s.e),
        (1, 1, 0, 0, |s| s.p1 * (1.0 - s.e) * s.p0, |s| s.p0 / s.p1, |s| s.p0 * s.p0 * (1.0 - s.e)),
        (0, 1, 1, 0, |s| s.p0 * s.e * s.p1, |s| s.p1 / s.p0, |s| s.p1 * s.p1 * s.e),
        (1, 1, 1, -1, |s| s.p1 * (1.0 - s.e) * s.p1, |s| s.b, |s| s.p1 * s.p0 * (1.0 - s.e)),
    ]
}

/// Same for the |±⟩ readout; both outcomes share the entries.
fn quantum_literals() -> Vec<(usize, usize, usize, i32, Entry, Entry, Entry)> {
    let half: Vec<(usize, usize, i32, Entry, Entry, Entry)> = vec![
        (0, 0, 0, |s| s.p0 * (1.0 - s.e) * s.p0 / 2.0, |_| 1.0, |s| s.p0 * (1.0 - s.e) * s.p0 / 2.0),
        (1, 0, 0, |s| s.p1 * (1.0 - s.e) * s.p0 / 2.0, |s| s.p0 / s.p1, |s| s.p0 * (1.0 - s.e) * s.p0 / 2.0),
        (0, 1, -1, |s| s.p0 * (1.0 - s.e) * s.p1 / 2.0, |s| s.p1 / s.p0 * s.b, |s| s.p1 * (1.0 - s.e) * s.p0 / 2.0),
        (1, 1, -1, |s| s.p1 * (1.0 - s.e) * s.p1 / 2.0, |s| s.b, |s| s.p1 * (1.0 - s.e) * s.p0 / 2.0),
        (0, 0, 1, |s| s.p0 * s.e * s.p0 / 2.0, |s| 1.0 / s.b, |s| s.p0 * s.e * s.p1 / 2.0),
        (1, 0, 1, |s| s.p1 * s.e * s.p0 / 2.0, |s| s.p0 / s.p1 / s.b, |s| s.p0 * s.e * s.p1 / 2.0),
        (0, 1, 0, |s| s.p0 * s.e * s.p1 / 2.0, |s| s.p1 / s.p0, |s| s.p1 * s.e * s.p1 / 2.0),
        (1, 1, 0, |s| s.p1 * s.e * s.p1 / 2.0, |_| 1.0, |s| s.p1 * s.e * s.p1 / 2.0),
    ];
    let mut out = Vec::new();
    for y in 0..2 {
        for &(a, f, q, p, s, t) in &half {
            out.push((a, y, f, q, p, s, t));
        }
    }
    out
}

fn table_reproduction() -> Outcome {
    let beta_omega = 1.0;
    let (p0, p1) = qubit_gibbs(beta_omega);
    let mut worst: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    let mut checked = 0;
    for eps in EPS_GRID {
        let sym = Sym { p0, p1, e: eps, b: beta_omega.exp() };
        for (variant, literals) in [(Variant::Classical, classical_literals()), (Variant::Quantum, quantum_literals())] {
            let rows = enumerate_single_measurement(variant, beta_omega, eps);
            if rows.len() != literals.len() {
                return Ok((false, format!("{variant:?}: {} rows, expected {}", rows.len(), literals.len())));
            }
            for &(a, y, f, q, p, s, t) in &literals {
                let row = rows
                    .iter()
                    .find(|r| r.a == a && r.y == [y] && r.f == f && r.total_heat() == q)
                    .ok_or_else(|| format!("{variant:?}: no row a={a} y={y} f={f} q={q}"))?;
                for (got, want) in [(row.probability, p(&sym)), (row.exp_neg_sigma, s(&sym)), (row.p_tr, t(&sym))] {
                    worst = worst.max((got - want).abs());
                }
                checked += 1;
            }
            worst_sum = worst_sum.max((rows.iter().map(|r| r.probability).sum::<f64>() - 1.0).abs());
        }
    }
    let passed = worst <= 1e-12 && worst_sum <= 1e-12;
    Ok((passed, format!("{checked} rows × 3 entries: max |Δ| = {worst:.1e}; max |ΣP − 1| = {worst_sum:.1e} (tol 1e-12)")))
}

// ---------------------------------------------------------------------------
// 2. exact integral fluctuation theorem

fn exact_integral_ft() -> Outcome {
    let mut worst_oracle: f64 = 0.0;
    let mut worst_engine: f64 = 0.0;
    let mut cases = 0;
    for v in VARIANTS {
        for eps in EPS_GRID {
            let mut tables: Vec<(Vec<GroupedTrajectory>, Protocol)> =
                vec![(enumerate_single_measurement(v, 1.0, eps), qubit_single(v, 1.0, eps).map_err(err)?)];
            for kdt in [0.2, 1.0] {
                tables.push((enumerate_two_measurements(v, 1.0, eps, kdt, kdt), qubit_double(v, 1.0, eps, kdt).map_err(err)?));
            }
            for (rows, protocol) in tables {
                worst_oracle = worst_oracle.max((table_averages(&rows).exp_neg_sigma_minus_cg - 1.0).abs());
                let ex = exact_summary(&protocol, Propagation::Unraveled).map_err(err)?;
                worst_engine = worst_engine.max((ex.exp_neg_sigma_minus_cg - 1.0).abs());
                cases += 1;
            }
        }
    }
    let passed = worst_oracle <= 1e-10 && worst_engine <= 1e-10;
    Ok((
        passed,
        format!("{cases} protocols: max |⟨e^(−(σ−σcg))⟩ − 1| table {worst_oracle:.1e}, step enumeration {worst_engine:.1e} (tol 1e-10)"),
    ))
}

// ---------------------------------------------------------------------------
// 3. closed forms

const MC_N: u64 = 100_000;

/// Per-trajectory work of the single-measurement protocol: energy of M_Y|a⟩
/// before and after the feedback rotation.
fn work_sampler(variant: Variant, eps: f64, protocol: &Protocol) -> Result<impl Fn(usize, usize) -> f64, String> {
    let h = ComplexMatrix::diag_real(&[-0.5, 0.5]);
    let kraus = measurement(variant, eps).map_err(err)?;
    let us = feedback_unitaries(variant);
    let basis = protocol.initial_spectrum().vectors.clone();
    Ok(move |a: usize, y: usize| {
        let mut psi = kraus.operator(y).apply(&basis[a]);
        psi.normalize();
        let after = us[y].apply(&psi);
        h.expectation(&psi).re - h.expectation(&after).re
    })
}

struct ClosedForm {
    sigma_exact: f64,
    sigma_mc: (f64, f64, f64),
    work: Option<(f64, f64, f64)>,
}

fn closed_form_runs() -> Result<BTreeMap<(u8, u64), ClosedForm>, String> {
    let mut out = BTreeMap::new();
    for v in VARIANTS {
        for eps in EPS_GRID {
            let protocol = qubit_single(v, 1.0, eps).map_err(err)?;
            let ex = exact_summary(&protocol, Propagation::Unraveled).map_err(err)?;
            let w = work_sampler(v, eps, &protocol)?;
            let samples = map_batch(&protocol, 0..MC_N, BatchOptions { seed: 11, threads: None }, |r| {
                let l = entropy_production(&r, &protocol);
                Ok((l.sigma, w(r.a, r.outcomes.outcomes()[0])))
            })
            .map_err(err)?;
            let s = EnsembleEstimate::from_samples(samples.iter().map(|x| x.0));
            let wk = EnsembleEstimate::from_samples(samples.iter().map(|x| x.1));
            out.insert(
                (v as u8, eps.to_bits()),
                ClosedForm {
                    sigma_exact: ex.mean_sigma,
                    sigma_mc: (s.mean(), s.standard_error(), s.count() as f64),
                    work: (v == Variant::Quantum).then(|| (ex.work, wk.mean(), wk.standard_error())),
                },
            );
        }
    }
    Ok(out)
}

fn mean_sigma_closed_form(runs: &BTreeMap<(u8, u64), ClosedForm>) -> Outcome {
    let (_, p1) = qubit_gibbs(1.0);
    let mut worst_exact: f64 = 0.0;
    let mut worst_table: f64 = 0.0;
    let mut worst_z: f64 = 0.0;
    for v in VARIANTS {
        for eps in EPS_GRID {
            let target = eps - p1;
            let r = &runs[&(v as u8, eps.to_bits())];
            worst_table = worst_table.max((table_averages(&enumerate_single_measurement(v, 1.0, eps)).mean_sigma - target).abs());
            worst_exact = worst_exact.max((r.sigma_exact - target).abs());
            let (m, se, _) = r.sigma_mc;
            worst_z = worst_z.max(((m - target) / se).abs());
        }
    }
    let passed = worst_table <= 1e-12 && worst_exact <= 1e-12 && worst_z <= 4.0;
    Ok((
        passed,
        format!(
            "⟨σ⟩ = βω(ε − p1), both readouts, ε ∈ {EPS_GRID:?}: |Δ| table {worst_table:.1e}, step enumeration {worst_exact:.1e} (tol 1e-12); MC n = {MC_N} max |z| = {worst_z:.2} (limit 4)"
        ),
    ))
}

fn quantum_work(runs: &BTreeMap<(u8, u64), ClosedForm>, stated: bool) -> Outcome {
    let (p0, p1) = qubit_gibbs(1.0);
    let mut worst: f64 = 0.0;
    let mut worst_z: f64 = 0.0;
    for eps in EPS_GRID {
        let mut target = 0.5 - eps;
        if !stated {
            target -= (p0 - p1) * (eps * (1.0 - eps)).sqrt();
        }
        let (exact, m, se) = runs[&(Variant::Quantum as u8, eps.to_bits())].work.ok_or("no work estimate")?;
        worst = worst.max((exact - target).abs());
        let z = if se > 0.0 { (m - target) / se } else if m == target { 0.0 } else { f64::INFINITY };
        worst_z = worst_z.max(z.abs());
    }
    let form = if stated { "(½ − ε)ω" } else { "(½ − ε)ω − ω(p0 − p1)√(ε(1−ε))" };
    let passed = worst <= 1e-12 && worst_z <= 4.0;
    Ok((passed, format!("⟨W⟩ = {form}: max |Δ| enumeration {worst:.2e} (tol 1e-12); MC max |z| = {worst_z:.2} (limit 4)")))
}

// ---------------------------------------------------------------------------
// 4. second-law ordering

fn discrete_ordering() -> Outcome {
    let mut violations = Vec::new();
    let mut points = 0;
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.05).collect();
    for v in VARIANTS {
        for gap in [None, Some(1.0), Some(0.2)] {
            for &eps in &grid {
                let protocol = match gap {
                    None => qubit_single(v, 1.0, eps),
                    Some(k) => qubit_double(v, 1.0, eps, k),
                }
                .map_err(err)?;
                let ex = exact_summary(&protocol, Propagation::Unraveled).map_err(err)?;
                points += 1;
                if ex.mean_sigma < ex.mean_sigma_cg - 1e-12 {
                    violations.push(format!("{v:?} gap {gap:?} ε={eps}: ⟨σ⟩ < ⟨σcg⟩"));
                }
                if gap.is_none() {
                    let i_mi = ex.mutual_information.ok_or("no mutual information")?;
                    if ex.mean_sigma < -i_mi - 1e-12 {
                        violations.push(format!("{v:?} ε={eps}: ⟨σ⟩ < −⟨I_mi⟩"));
                    }
                }
            }
        }
    }
    let small = exact_summary(&qubit_single(Variant::Classical, 1.0, 0.01).map_err(err)?, Propagation::Unraveled).map_err(err)?;
    let i_mi = small.mutual_information.ok_or("no mutual information")?;
    let tighter = small.mean_sigma_cg > -i_mi;
    let detail = format!(
        "{points} exact points, {} violations{}; ε = 0.01: ⟨σcg⟩ = {:.4} > −⟨I_mi⟩ = {:.4}: {tighter}",
        violations.len(),
        violations.first().map(|v| format!(" (first: {v})")).unwrap_or_default(),
        small.mean_sigma_cg,
        -i_mi
    );
    Ok((violations.is_empty() && tighter, detail))
}

// ---------------------------------------------------------------------------
// 5. continuous fluctuation theorem

const CONTINUOUS_N: u64 = 100_000;
const KAPPA_M: [f64; 3] = [0.1, 1.0, 5.0];

struct ContinuousPoint {
    kappa_m: f64,
    exp_neg_sigma_minus_cg: EnsembleEstimate,
    exp_neg_sigma: EnsembleEstimate,
    sigma_minus_cg: EnsembleEstimate,
    sigma: EnsembleEstimate,
    sigma_cg: EnsembleEstimate,
    excluded: u64,
    elapsed: Duration,
}

fn continuous_runs() -> Result<Vec<ContinuousPoint>, String> {
    let mut out = Vec::new();
    for kappa_m in KAPPA_M {
        let start = Instant::now();
        let protocol = driven_qubit(&DrivenQubit { kappa_m, ..DrivenQubit::default() }).map_err(err)?;
        let ledgers = map_batch(&protocol, 0..CONTINUOUS_N, BatchOptions { seed: 1, threads: None }, |r| {
            Ok(entropy_production(&r, &protocol).with_sigma_cg(sigma_cg(&protocol, &r.outcomes, Propagation::Unraveled)?))
        })
        .map_err(err)?;
        let finite: Vec<_> = ledgers.iter().filter(|l| !l.sigma_infinite() && !l.sigma_cg_infinite()).collect();
        out.push(ContinuousPoint {
            kappa_m,
            exp_neg_sigma_minus_cg: EnsembleEstimate::from_samples(finite.iter().map(|l| (l.sigma_cg - l.sigma).exp())),
            exp_neg_sigma: EnsembleEstimate::from_samples(finite.iter().map(|l| (-l.sigma).exp())),
            sigma_minus_cg: EnsembleEstimate::from_samples(finite.iter().map(|l| l.sigma - l.sigma_cg)),
            sigma: EnsembleEstimate::from_samples(finite.iter().map(|l| l.sigma)),
            sigma_cg: EnsembleEstimate::from_samples(finite.iter().map(|l| l.sigma_cg)),
            excluded: (ledgers.len() - finite.len()) as u64,
            elapsed: start.elapsed(),
        });
    }
    Ok(out)
}

fn continuous_ft(points: &[ContinuousPoint]) -> Outcome {
    let mut parts = Vec::new();
    let mut passed = true;
    for p in points {
        let z = p.exp_neg_sigma_minus_cg.z_score(1.0);
        passed &= z.abs() <= 3.0;
        parts.push(format!(
            "κm={}: ⟨e^(−(σ−σcg))⟩ = {:.4} ± {:.4} (z {:+.2}), ⟨e^(−σ)⟩ = {:.4} ± {:.4}, excluded {}, {:.0} s",
            p.kappa_m,
            p.exp_neg_sigma_minus_cg.mean(),
            p.exp_neg_sigma_minus_cg.standard_error(),
            z,
            p.exp_neg_sigma.mean(),
            p.exp_neg_sigma.standard_error(),
            p.excluded,
            p.elapsed.as_secs_f64()
        ));
    }
    let last = points.last().ok_or("no points")?;
    let z_raw = last.exp_neg_sigma.z_score(1.0);
    let deviates = z_raw.abs() > 3.0;
    parts.push(format!("largest κm: ⟨e^(−σ)⟩ deviates by {z_raw:+.1} SE (need > 3)"));
    Ok((passed && deviates, parts.join("\n         ")))
}

fn continuous_ordering(points: &[ContinuousPoint]) -> Outcome {
    let mut parts = Vec::new();
    let mut passed = true;
    for p in points {
        let d = &p.sigma_minus_cg;
        let ok = d.mean() >= -2.0 * d.standard_error();
        passed &= ok;
        parts.push(format!(
            "κm={}: ⟨σ⟩ = {:.4}, ⟨σcg⟩ = {:.4}, ⟨σ − σcg⟩ = {:.4} ± {:.4}",
            p.kappa_m,
            p.sigma.mean(),
            p.sigma_cg.mean(),
            d.mean(),
            d.standard_error()
        ));
    }
    Ok((passed, parts.join("; ")))
}

// ---------------------------------------------------------------------------
// 6–8

fn microreversibility() -> Outcome {
    let c = random_microreversibility(2024, 20).map_err(err)?;
    Ok((c.passed, format!("{}: max ‖Θ⁻¹ŪΘ − U†‖_F = {:.1e} (tol {:.0e})", c.detail, c.value, c.tolerance)))
}

fn dilated() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut trajectories = 0;
    let mut models = vec![DilatedModel::swap_preset(1.0)];
    for seed in 0..8 {
        models.push(DilatedModel::random_preset(seed, 1.0).map_err(err)?);
    }
    for m in &models {
        let r = dilated_verify(m).map_err(err)?;
        worst = worst.max(r.residual);
        trajectories += r.trajectories;
    }
    Ok((
        worst <= 1e-10,
        format!("{} presets, {trajectories} trajectories: max |P_tr[Γ̄] − e^(−σ)P[Γ]| = {worst:.1e} (tol 1e-10)", models.len()),
    ))
}

fn csv_bytes(config: &str, parameter: &str, values: &[f64], n: u64, threads: usize) -> Result<Vec<u8>, String> {
    let doc = bundled::document(config).map_err(err)?;
    let spec = SweepSpec { parameter: parameter.into(), values: values.to_vec(), n_traj: n, seed: 42 };
    let opts = RunOptions { threads: Some(threads), ..RunOptions::default() };
    let continuous = doc.is_continuous();
    let rows = if continuous { sweep::run_continuous(&doc, &spec, &opts) } else { sweep::run_discrete(&doc, &spec, &opts) }
        .map_err(err)?;
    let mut out = Vec::new();
    let info = if continuous { "i_te" } else { "i_mi" };
    sweep::write_csv(&mut out, parameter, info, &rows).map_err(err)?;
    Ok(out)
}

fn determinism() -> Outcome {
    let cases = [("single-quantum", "epsilon", vec![0.1, 0.3], 3000), ("driven-monitored", "kappa_m", vec![5.0], 300)];
    let mut parts = Vec::new();
    let mut passed = true;
    for (config, parameter, values, n) in cases {
        let runs: Vec<Vec<u8>> =
            [1, 4, 1].iter().map(|&t| csv_bytes(config, parameter, &values, n, t)).collect::<Result<_, _>>()?;
        let same = runs.windows(2).all(|w| w[0] == w[1]);
        passed &= same;
        parts.push(format!("{config}: {} bytes, threads 1/4/1 identical: {same}", runs[0].len()));
    }
    Ok((passed, parts.join("; ")))
}

fn main() -> ExitCode {
    let mut suite = Suite { lines: Vec::new() };
    let total = Instant::now();

    suite.run("1", "symbolic single-measurement tables reproduced", || {
        let start = Instant::now();
        let (ok, detail) = table_reproduction()?;
        let t = start.elapsed().as_secs_f64();
        Ok((ok && t < 1.0, format!("{detail}; {t:.3} s (limit 1 s)")))
    });
    suite.run("2", "exact integral FT by enumeration", || {
        let start = Instant::now();
        let (ok, detail) = exact_integral_ft()?;
        let t = start.elapsed().as_secs_f64();
        Ok((ok && t < 5.0, format!("{detail}; {t:.2} s (limit 5 s)")))
    });

    let start = Instant::now();
    let runs = closed_form_runs();
    let setup = start.elapsed();
    match &runs {
        Ok(runs) => {
            suite.run("3a", "closed-form mean entropy production", || mean_sigma_closed_form(runs));
            suite.run("3b", "closed-form quantum work as stated", || quantum_work(runs, true));
            suite.run("3c", "quantum work including measurement energy change", || quantum_work(runs, false));
        }
        Err(e) => {
            for (id, title) in [("3a", "closed-form mean entropy production"), ("3b", "closed-form quantum work as stated")] {
                suite.record(id, title, false, format!("error: {e}"), setup);
            }
        }
    }
    println!("         (closed-form Monte Carlo: {:.1} s)", setup.as_secs_f64());

    suite.run("4a", "second-law ordering on exact discrete sweeps", discrete_ordering);
    let start = Instant::now();
    let continuous = continuous_runs();
    let setup = start.elapsed();
    match &continuous {
        Ok(points) => {
            suite.run("5", "continuous-monitoring integral FT", || continuous_ft(points));
            suite.run("4b", "second-law ordering under continuous monitoring", || continuous_ordering(points));
        }
        Err(e) => {
            suite.record("5", "continuous-monitoring integral FT", false, format!("error: {e}"), setup);
            suite.record("4b", "second-law ordering under continuous monitoring", false, format!("error: {e}"), setup);
        }
    }
    suite.run("6", "microreversibility on random schedules", || {
        let start = Instant::now();
        let (ok, detail) = microreversibility()?;
        let t = start.elapsed().as_secs_f64();
        Ok((ok && t < 5.0, format!("{detail}; {t:.2} s (limit 5 s)")))
    });
    suite.run("7", "dilated system ⊗ reservoir verifier", || {
        let start = Instant::now();
        let (ok, detail) = dilated()?;
        let t = start.elapsed().as_secs_f64();
        Ok((ok && t < 10.0, format!("{detail}; {t:.2} s (limit 10 s)")))
    });
    suite.run("8", "byte-identical output across thread counts", determinism);

    let failed: Vec<&Line> = suite.lines.iter().filter(|l| !l.passed).collect();
    let unexpected: Vec<&&Line> = failed.iter().filter(|l| !KNOWN_DIVERGENCES.iter().any(|(k, _)| *k == l.id)).collect();
    println!(
        "acceptance: {} passed, {} failed ({} known divergences) in {:.0} s",
        suite.lines.len() - failed.len(),
        failed.len(),
        failed.len() - unexpected.len(),
        total.elapsed().as_secs_f64()
    );
    for l in &unexpected {
        println!("unexpected failure {} {}: {} ({:.1} s)", l.id, l.title, l.detail, l.elapsed.as_secs_f64());
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
