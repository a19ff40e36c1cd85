//! The backward experiment: reversed outcome probabilities, the backward
//! trajectory distribution, postselection, and reversed-measurement checks.

use crate::error::{Error, Result};
use crate::kraus::KrausSet;
use crate::linalg::{ComplexMatrix, StateVector};
use crate::propagate::{forward_pass, record_points, reversed_pass, reversed_step, Propagation};
use crate::protocol::history::Outcome;
use crate::protocol::reversed::step_length_at;
use crate::protocol::{OutcomeHistory, Protocol};
use crate::trajectory::{BatchOptions, RngStream, TrajectoryRecord};

/// P[Y]: probability of the forward record.
pub fn p_forward_outcomes(protocol: &Protocol, y: &OutcomeHistory, mode: Propagation) -> Result<f64> {
    protocol.check_history(y)?;
    Ok(forward_pass(protocol, y.entries(), mode)?.ln_probability.exp())
}

/// P_tr[Ȳ | {λ_{τ−t}^Y}] with an explicit flag for unreachable reversed
/// records.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BackwardProbability {
    pub ln_value: f64,
}

impl BackwardProbability {
    pub fn value(&self) -> f64 {
        self.ln_value.exp()
    }

    /// True when the reversed record cannot occur (σ_cg diverges).
    pub fn is_zero(&self) -> bool {
        self.ln_value == f64::NEG_INFINITY
    }
}

pub fn p_tr_outcomes(protocol: &Protocol, y: &OutcomeHistory, mode: Propagation) -> Result<BackwardProbability> {
    protocol.check_history(y)?;
    Ok(BackwardProbability { ln_value: reversed_pass(protocol, y.entries(), mode)?.ln_probability })
}

/// P_B[Γ̄] = P_tr[Γ̄] · P[Y] / P_tr[Ȳ].
pub fn backward_distribution(p_tr_trajectory: f64, p_forward: f64, p_tr_outcomes: f64) -> Result<f64> {
    if !(p_tr_outcomes > 0.0) {
        return Err(Error::UnreachableHistory("reversed record has zero probability".into()));
    }
    Ok(p_tr_trajectory * p_forward / p_tr_outcomes)
}

/// ln P[Γ] and ln P_tr[Γ̄] of a sampled trajectory under the step
/// instrument, recomputed from its amplitudes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryWeights {
    pub ln_forward: f64,
    pub ln_reversed: f64,
}

pub fn trajectory_weights(protocol: &Protocol, record: &TrajectoryRecord) -> Result<TrajectoryWeights> {
    let entries = record.outcomes.entries();
    let points = record_points(protocol, entries)?;
    let steps = protocol.grid().steps();
    let mut jump_at: Vec<Option<usize>> = vec![None; steps];
    for j in &record.jumps {
        if j.step >= steps || jump_at[j.step].is_some() {
            return Err(Error::UnreachableHistory(format!("jump record at step {} is invalid", j.step)));
        }
        jump_at[j.step] = Some(j.channel);
    }
    let continuous = protocol.is_continuous();
    let record_op = |n: usize| {
        let dt = if continuous { step_length_at(protocol, entries[n].time) } else { 1.0 };
        protocol.record_operator(&entries[..=n], dt)
    };
    let init = protocol.initial_spectrum();
    let refs = protocol.reference_spectrum();
    let (a, f) = (record.a, record.f);

    let mut psi = init.vectors[a].clone();
    let mut ln_norm = 0.0;
    let push = |psi: &mut StateVector, op: &ComplexMatrix, ln: &mut f64| -> bool {
        *psi = op.apply(psi);
        let n = psi.normalize();
        if n > 0.0 {
            *ln += n.ln();
            true
        } else {
            *ln = f64::NEG_INFINITY;
            false
        }
    };
    let mut alive = true;
    for k in 0..steps {
        let ops = protocol.step(entries, k)?;
        let op = match (jump_at[k], continuous, points[k + 1]) {
            (Some(j), _, _) => match ops.jumps.iter().find(|(c, _, _)| *c == j) {
                Some((_, op, _)) => op.clone(),
                None => ComplexMatrix::zeros(protocol.dim()),
            },
            (None, true, Some(n)) => record_op(n),
            _ => ops.no_event.clone(),
        };
        alive &= push(&mut psi, &op, &mut ln_norm);
        if alive && !continuous {
            if let Some(n) = points[k + 1] {
                alive &= push(&mut psi, &record_op(n), &mut ln_norm);
            }
        }
        if !alive {
            break;
        }
    }
    let ln_forward = if alive {
        init.probabilities[a].ln() + ln_norm + refs.vectors[f].inner(&psi).norm_sqr().ln()
    } else {
        f64::NEG_INFINITY
    };

    let theta = protocol.theta();
    let mut phi = theta.apply_vector(&refs.vectors[f]);
    let mut ln_norm = 0.0;
    let mut alive = true;
    for k in (0..steps).rev() {
        if !continuous {
            if let Some(n) = points[k + 1] {
                alive &= push(&mut phi, &theta.apply(&record_op(n).adjoint()), &mut ln_norm);
            }
        }
        if !alive {
            break;
        }
        let ops = protocol.step(entries, k)?;
        let op = match (jump_at[k], continuous, points[k + 1]) {
            (Some(j), _, _) => match ops.jumps.iter().position(|(c, _, _)| *c == j) {
                Some(i) => ops.rev_jumps[i].clone(),
                None => ComplexMatrix::zeros(protocol.dim()),
            },
            (None, true, Some(n)) => theta.apply(&record_op(n).adjoint()),
            _ => ops.rev_no_event.clone(),
        };
        alive &= push(&mut phi, &op, &mut ln_norm);
        if !alive {
            break;
        }
    }
    let ln_reversed = if alive {
        let start = theta.apply_vector(&init.vectors[a]);
        refs.probabilities[f].ln() + ln_norm + start.inner(&phi).norm_sqr().ln()
    } else {
        f64::NEG_INFINITY
    };
    Ok(TrajectoryWeights { ln_forward, ln_reversed })
}

/// Acceptance statistics of the postselected backward experiment for one
/// forward record.
#[derive(Clone, Debug)]
pub struct PostselectionRow {
    pub record: OutcomeHistory,
    pub p_forward: f64,
    pub p_tr: f64,
    pub sampled: u64,
    pub accepted: u64,
}

impl PostselectionRow {
    pub fn acceptance(&self) -> f64 {
        if self.sampled == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.sampled as f64
        }
    }

    /// Binomial standard error of the acceptance frequency around P_tr.
    pub fn standard_error(&self) -> f64 {
        if self.sampled == 0 {
            return f64::NAN;
        }
        (self.p_tr * (1.0 - self.p_tr) / self.sampled as f64).sqrt()
    }
}

/// Backward runs of a discrete protocol: Y ~ P[Y], then the fixed reversed
/// schedule with the reversed measurements; a run is accepted when every
/// reversed measurement yields the recorded outcome. Measurements whose
/// reversed family is incomplete are read per outcome as accept/reject
/// tests, which gives the same acceptance probability.
pub fn postselection_simulate(protocol: &Protocol, n: u64, opts: BatchOptions, mode: Propagation) -> Result<Vec<PostselectionRow>> {
    let records = protocol.outcome_records()?;
    let mut rows = Vec::with_capacity(records.len());
    for r in &records {
        rows.push(PostselectionRow {
            record: r.clone(),
            p_forward: p_forward_outcomes(protocol, r, mode)?,
            p_tr: p_tr_outcomes(protocol, r, mode)?.value(),
            sampled: 0,
            accepted: 0,
        });
    }
    let weights: Vec<f64> = rows.iter().map(|r| r.p_forward).collect();
    let run = |i: u64| -> Result<(usize, bool)> {
        let mut rng = RngStream::new(opts.seed, i);
        let which = rng.choose(&weights).ok_or_else(|| Error::Numeric("all records have zero probability".into()))?;
        let accepted = backward_run(protocol, records[which].entries(), mode, &mut rng)?;
        Ok((which, accepted))
    };
    let outcomes: Vec<(usize, bool)> = {
        use rayon::prelude::*;
        let work = || (0..n).into_par_iter().map(run).collect::<Result<Vec<_>>>();
        match opts.threads {
            Some(t) => rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::Numeric(e.to_string()))?
                .install(work)?,
            None => work()?,
        }
    };
    for (which, acc) in outcomes {
        rows[which].sampled += 1;
        rows[which].accepted += acc as u64;
    }
    Ok(rows)
}

fn backward_run(protocol: &Protocol, entries: &[Outcome], mode: Propagation, rng: &mut RngStream) -> Result<bool> {
    let points = record_points(protocol, entries)?;
    let none = vec![None; points.len()];
    let theta = protocol.theta();
    let mut rho = theta.apply(protocol.reference().matrix());
    for k in (0..protocol.grid().steps()).rev() {
        if let Some(n) = points[k + 1] {
            let op = theta.apply(&protocol.record_operator(&entries[..=n], 1.0).adjoint());
            let post = op.sandwich(&rho);
            let p = post.trace().re;
            if !(rng.uniform() < p) {
                return Ok(false);
            }
            rho = post.scale_real(1.0 / p);
        }
        rho = reversed_step(protocol, entries, &none, k, mode, &rho)?;
        let tr = rho.trace().re;
        rho = rho.scale_real(1.0 / tr);
    }
    Ok(true)
}

/// Properties of the reversed family {ΘM†(y)Θ⁻¹} of a measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct BackwardMeasurementReport {
    /// Every reversed operator satisfies M̄†M̄ ≤ I.
    pub element_valid: bool,
    /// Largest eigenvalue of M M† over outcomes.
    pub max_element_norm: f64,
    /// ‖Σ M M† − I‖_F
    pub unitality_residual: f64,
    /// The reversed family is itself a complete measurement.
    pub unital_complete: bool,
    /// Backward runs must be read per outcome via an ancilla dilation.
    pub dilation_required: bool,
}

pub fn validate_backward_measurement(kraus: &KrausSet, tol: f64) -> Result<BackwardMeasurementReport> {
    let mut max_norm: f64 = 0.0;
    for m in kraus.operators() {
        let mm = m.mul_adjoint(m);
        let top = mm.hermitian_part().eigh()?.values[0];
        max_norm = max_norm.max(top);
    }
    let unitality = kraus.unitality_residual();
    let complete = unitality <= tol;
    Ok(BackwardMeasurementReport {
        element_valid: max_norm <= 1.0 + tol,
        max_element_norm: max_norm,
        unitality_residual: unitality,
        unital_complete: complete,
        dilation_required: !complete,
    })
}
