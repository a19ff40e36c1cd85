//! Invariant audits of a protocol: measurement completeness, step
//! instrument completeness, detailed balance, microreversibility, and the
//! detailed and integral fluctuation theorems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::backward::trajectory_weights;
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::oracle::{dilated_verify, DilatedModel};
use crate::propagate::Propagation;
use crate::protocol::config::ConfigDocument;
use crate::protocol::{OutcomeHistory, Protocol};
use crate::reversal::TimeReversal;
use crate::thermo::{entropy_production, exact_summary, sigma_cg, EnsembleAccumulator};
use crate::trajectory::{map_batch, BatchOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    /// Must hold to numerical precision.
    Invariant,
    /// Sampled; judged in standard errors.
    Statistical,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub kind: CheckKind,
    pub passed: bool,
    /// Residual (invariants) or |z| (statistical).
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    fn invariant(name: &str, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Check { name: name.into(), kind: CheckKind::Invariant, passed: value <= tolerance, value, tolerance, detail: detail.into() }
    }

    fn statistical(name: &str, z: f64, limit: f64, detail: impl Into<String>) -> Self {
        let value = z.abs();
        Check { name: name.into(), kind: CheckKind::Statistical, passed: value <= limit, value, tolerance: limit, detail: detail.into() }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct VerifyReport {
    pub subject: String,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// The most serious failure: invariants outrank statistical checks.
    pub fn worst_failure(&self) -> Option<CheckKind> {
        let failed = |k| self.checks.iter().any(|c| !c.passed && c.kind == k);
        if failed(CheckKind::Invariant) {
            Some(CheckKind::Invariant)
        } else if failed(CheckKind::Statistical) {
            Some(CheckKind::Statistical)
        } else {
            None
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    /// Trajectories for the sampled checks.
    pub n_traj: u64,
    pub seed: u64,
    pub threads: Option<usize>,
    /// |z| limit of the statistical checks.
    pub z_limit: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { n_traj: 2000, seed: 1, threads: None, z_limit: 4.0 }
    }
}

const COMPLETE_TOL: f64 = 1e-10;
const BALANCE_TOL: f64 = 1e-12;
const REVERSAL_TOL: f64 = 1e-8;
const DETAILED_TOL: f64 = 1e-8;
const INTEGRAL_TOL: f64 = 1e-10;
const DILATED_TOL: f64 = 1e-10;

/// Audits a document. Measurements are not rejected at load time here, so
/// an incomplete POVM shows up as a failed check.
pub fn verify_document(doc: &ConfigDocument, opts: &VerifyOptions) -> Result<VerifyReport> {
    let protocol = doc.build_for_audit()?;
    let mut report = verify_protocol(&protocol, opts)?;
    report.subject = doc.name().to_string();
    Ok(report)
}

pub fn verify_protocol(protocol: &Protocol, opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    let complete = povm_check(protocol);
    let povm_ok = complete.passed;
    checks.push(complete);
    checks.push(Check::invariant(
        "detailed-balance",
        protocol.channels().detailed_balance_residual(protocol.beta()),
        BALANCE_TOL,
        format!("{} channels", protocol.channels().len()),
    ));
    checks.push(schedule_reversal_check(protocol)?);
    checks.push(random_microreversibility(opts.seed, 20)?);
    // everything below presumes a valid instrument
    if povm_ok {
        checks.push(instrument_check(protocol)?);
        checks.push(detailed_ft_check(protocol, opts)?);
        checks.push(integral_ft_check(protocol, opts)?);
    }
    Ok(VerifyReport { subject: protocol.name().to_string(), checks })
}

fn povm_check(protocol: &Protocol) -> Check {
    match protocol.monitor() {
        Some(m) => {
            // detections are completed by the no-detection branch; only
            // M†M ≤ I is required
            let worst = m
                .kraus
                .operators()
                .iter()
                .map(|op| (&op.adjoint() * op).hermitian_part().eigh().map(|e| e.values[0]).unwrap_or(f64::INFINITY))
                .fold(0.0, f64::max);
            Check::invariant("povm-completeness", (worst - 1.0).max(0.0), COMPLETE_TOL, "continuous detector: max eig M†M − 1")
        }
        None => {
            let (mut worst, mut at) = (0.0_f64, None);
            for (n, ev) in protocol.events().iter().enumerate() {
                let r = ev.kraus.completeness_residual();
                if r > worst {
                    worst = r;
                    at = Some(n);
                }
            }
            let detail = match at {
                Some(n) if worst > COMPLETE_TOL => format!("measurement {n}: ‖ΣM†M − I‖_F = {worst:.3e}"),
                _ => format!("{} measurements", protocol.events().len()),
            };
            Check::invariant("povm-completeness", worst, COMPLETE_TOL, detail)
        }
    }
}

/// Σ K†K over the no-event, jump and detection branches of every grid step
/// (along every record for discrete protocols, the empty one otherwise).
fn instrument_check(protocol: &Protocol) -> Result<Check> {
    let records = if protocol.is_continuous() { vec![OutcomeHistory::new()] } else { protocol.outcome_records()? };
    let id = ComplexMatrix::identity(protocol.dim());
    let mut worst: f64 = 0.0;
    for r in &records {
        for k in 0..protocol.grid().steps() {
            let ops = protocol.step(r.entries(), k)?;
            let mut sum = &ops.no_event.adjoint() * &ops.no_event;
            for (_, _, jj) in &ops.jumps {
                sum += jj;
            }
            for (_, mm) in &ops.detections {
                sum += mm;
            }
            worst = worst.max((&sum - &id).frobenius_norm());
        }
    }
    Ok(Check::invariant("step-completeness", worst, COMPLETE_TOL, format!("{} steps × {} records", protocol.grid().steps(), records.len())))
}

/// Θ⁻¹ Ū Θ = U† for the Hamiltonian part of the protocol's own schedule
/// (empty record), with Ū built from Θ H Θ⁻¹ in reversed order.
fn schedule_reversal_check(protocol: &Protocol) -> Result<Check> {
    let grid = protocol.grid();
    let mut pieces = Vec::with_capacity(grid.steps());
    for k in 0..grid.steps() {
        pieces.push((protocol.resolve_controls(&[], grid.mid(k))?.hamiltonian, grid.dt(k)));
    }
    let r = reversal_residual(&pieces, protocol.theta())?;
    Ok(Check::invariant("microreversibility", r, REVERSAL_TOL, format!("{} pieces of the protocol schedule", pieces.len())))
}

/// ‖Θ⁻¹ Ū Θ − U†‖_F for a piecewise-constant schedule.
pub fn reversal_residual(pieces: &[(ComplexMatrix, f64)], theta: &TimeReversal) -> Result<f64> {
    let d = pieces.first().map_or(1, |p| p.0.dim());
    let mut u = ComplexMatrix::identity(d);
    for (h, t) in pieces {
        u = &h.unitary_exp(*t)? * &u;
    }
    let mut ubar = ComplexMatrix::identity(d);
    for (h, t) in pieces.iter().rev() {
        ubar = &theta.apply(h).unitary_exp(*t)? * &ubar;
    }
    Ok((&theta.apply_inverse(&ubar) - &u.adjoint()).frobenius_norm())
}

/// Random real piecewise-constant schedules alternating between d = 2 and
/// d = 4; reports the largest reversal residual.
pub fn random_microreversibility(seed: u64, schedules: usize) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = TimeReversal::standard();
    let mut worst: f64 = 0.0;
    for s in 0..schedules {
        let d = if s % 2 == 0 { 2 } else { 4 };
        let n = rng.random_range(1..=8);
        let mut pieces = Vec::with_capacity(n);
        for _ in 0..n {
            let mut h = ComplexMatrix::zeros(d);
            for i in 0..d {
                for j in i..d {
                    let x = rng.random_range(-2.0..2.0);
                    h[(i, j)] = x.into();
                    h[(j, i)] = x.into();
                }
            }
            pieces.push((h, rng.random_range(0.01..1.5)));
        }
        worst = worst.max(reversal_residual(&pieces, &theta)?);
    }
    Ok(Check::invariant("microreversibility-random", worst, REVERSAL_TOL, format!("{schedules} random real schedules, d ∈ {{2, 4}}")))
}

/// ln P_tr[Γ̄] − ln P[Γ] = −σ[Γ] on sampled trajectories.
fn detailed_ft_check(protocol: &Protocol, opts: &VerifyOptions) -> Result<Check> {
    let n = opts.n_traj.min(200);
    let batch = BatchOptions { seed: opts.seed, threads: opts.threads };
    let residuals = map_batch(protocol, 0..n, batch, |r| {
        let w = trajectory_weights(protocol, &r)?;
        let sigma = entropy_production(&r, protocol).sigma;
        Ok(if w.ln_reversed.is_finite() && sigma.is_finite() { (w.ln_reversed - w.ln_forward + sigma).abs() } else { 0.0 })
    })?;
    let worst = residuals.into_iter().fold(0.0, f64::max);
    Ok(Check::invariant("detailed-ft", worst, DETAILED_TOL, format!("{n} sampled trajectories")))
}

fn full_rank(protocol: &Protocol) -> bool {
    protocol.initial_spectrum().probabilities.iter().all(|&p| p > 0.0)
}

/// ⟨e^{−(σ−σ_cg)}⟩ = 1: exact for discrete protocols, sampled otherwise.
fn integral_ft_check(protocol: &Protocol, opts: &VerifyOptions) -> Result<Check> {
    if !protocol.is_continuous() {
        let s = exact_summary(protocol, Propagation::Unraveled)?;
        if !full_rank(protocol) {
            return Ok(Check::invariant(
                "integral-ft",
                0.0,
                INTEGRAL_TOL,
                format!("initial state not full rank; ⟨e^(−(σ−σcg))⟩ = {:.12} (identity not expected)", s.exp_neg_sigma_minus_cg),
            ));
        }
        return Ok(Check::invariant(
            "integral-ft",
            (s.exp_neg_sigma_minus_cg - 1.0).abs(),
            INTEGRAL_TOL,
            format!("exact: ⟨e^(−(σ−σcg))⟩ = {:.12}", s.exp_neg_sigma_minus_cg),
        ));
    }
    let batch = BatchOptions { seed: opts.seed, threads: opts.threads };
    let ledgers = map_batch(protocol, 0..opts.n_traj, batch, |r| {
        Ok(entropy_production(&r, protocol).with_sigma_cg(sigma_cg(protocol, &r.outcomes, Propagation::Unraveled)?))
    })?;
    let mut acc = EnsembleAccumulator::default();
    for l in &ledgers {
        acc.push(l, None);
    }
    let e = &acc.exp_neg_sigma_minus_cg;
    if e.count() == 0 {
        return Err(Error::Numeric("no trajectory with finite σ_cg".into()));
    }
    Ok(Check::statistical(
        "integral-ft",
        e.z_score(1.0),
        opts.z_limit,
        format!("sampled (n = {}): ⟨e^(−(σ−σcg))⟩ = {:.5} ± {:.5}", e.count(), e.mean(), e.standard_error()),
    ))
}

/// The dilated system ⊗ reservoir presets: the swap model and `seeds`
/// random energy-conserving couplings.
pub fn verify_dilated(seeds: u64) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    let r = dilated_verify(&DilatedModel::swap_preset(1.0))?;
    checks.push(Check::invariant("dilated-swap", r.residual, DILATED_TOL, format!("{} trajectories", r.trajectories)));
    let mut worst: f64 = 0.0;
    let mut heat: f64 = 0.0;
    for seed in 0..seeds {
        let r = dilated_verify(&DilatedModel::random_preset(seed, 1.0)?)?;
        worst = worst.max(r.residual);
        heat = heat.max((r.mean_heat - r.reservoir_energy_change).abs());
    }
    checks.push(Check::invariant("dilated-random", worst, DILATED_TOL, format!("{seeds} random couplings")));
    checks.push(Check::invariant("dilated-heat", heat, DILATED_TOL, "⟨Q⟩ vs reservoir energy change"));
    Ok(VerifyReport { subject: "dilated presets".into(), checks })
}
