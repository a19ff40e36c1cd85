use std::ops::Range;

use rayon::prelude::*;

use super::record::{JumpRecord, TrajectoryRecord};
use super::rng::RngStream;
use crate::error::{Error, Result};
use crate::linalg::StateVector;
use crate::protocol::{Outcome, OutcomeHistory, Protocol};
use crate::state::P_FLOOR;

/// What happened during one grid step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepEvent {
    NoJump,
    Jump(usize),
    Detection(usize),
}

/// Mutable state of a trajectory in flight.
#[derive(Clone, Debug)]
pub struct TrajectoryState {
    pub psi: StateVector,
    pub a: usize,
    pub outcomes: OutcomeHistory,
    pub jumps: Vec<JumpRecord>,
    pub heat: f64,
    pub ln_probability: f64,
}

/// Draws the initial eigenlabel a with probability p_a.
pub fn sample_initial(protocol: &Protocol, rng: &mut RngStream) -> TrajectoryState {
    let spec = protocol.initial_spectrum();
    let a = rng.choose(&spec.probabilities).unwrap_or(0);
    TrajectoryState {
        psi: spec.vectors[a].clone(),
        a,
        outcomes: OutcomeHistory::new(),
        jumps: Vec::new(),
        heat: 0.0,
        ln_probability: spec.probabilities[a].ln(),
    }
}

fn advance(state: &mut TrajectoryState, protocol: &Protocol, k: usize, rng: &mut RngStream) -> Result<StepEvent> {
    let ops = protocol.step(state.outcomes.entries(), k)?;
    let psi = &state.psi;
    let mut weights: Vec<f64> = Vec::with_capacity(ops.jumps.len() + ops.detections.len() + 1);
    weights.extend(ops.jumps.iter().map(|(_, _, rate)| rate.expectation(psi).re.max(0.0)));
    weights.extend(ops.detections.iter().map(|(_, rate)| rate.expectation(psi).re.max(0.0)));
    let total: f64 = weights.iter().sum();
    if total > protocol.step_cap() * (1.0 + 1e-9) {
        return Err(Error::StepTooLarge { time: protocol.grid().t(k), probability: total, cap: protocol.step_cap() });
    }
    let u = rng.uniform();
    let t_end = protocol.grid().t(k + 1);
    let mut acc = 0.0;
    let mut chosen = None;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if w > 0.0 && u < acc {
            chosen = Some(i);
            break;
        }
    }
    let (mut next, event) = match chosen {
        None => (ops.no_event.apply(psi), StepEvent::NoJump),
        Some(i) if i < ops.jumps.len() => {
            let (channel, op, _) = &ops.jumps[i];
            (op.apply(psi), StepEvent::Jump(*channel))
        }
        Some(i) => {
            let y = i - ops.jumps.len();
            let n = state.outcomes.len();
            state.outcomes.push(Outcome { time: t_end, event: n, outcome: y })?;
            let v = protocol.feedback_unitary(state.outcomes.entries());
            let mut out = ops.detections[y].0.apply(psi);
            if let Some(v) = v {
                out = v.apply(&out);
            }
            (out, StepEvent::Detection(y))
        }
    };
    let norm = next.normalize();
    if !(norm > 0.0) {
        return Err(Error::Numeric(format!("trajectory collapsed to zero norm at t = {t_end}")));
    }
    state.ln_probability += norm.ln();
    state.psi = next;
    if let StepEvent::Jump(j) = event {
        state.heat += protocol.channels().get(j).heat;
        state.jumps.push(JumpRecord { time: t_end, step: k, channel: j });
    }
    Ok(event)
}

/// One grid step with unobserved jumps only.
pub fn step_discrete(state: &mut TrajectoryState, protocol: &Protocol, k: usize, rng: &mut RngStream) -> Result<StepEvent> {
    if protocol.is_continuous() {
        return Err(Error::Unsupported("step_discrete on a continuously monitored protocol".into()));
    }
    advance(state, protocol, k, rng)
}

/// One grid step with unobserved jumps and monitored detections; a detection
/// is followed at once by its feedback unitary.
pub fn step_continuous(state: &mut TrajectoryState, protocol: &Protocol, k: usize, rng: &mut RngStream) -> Result<StepEvent> {
    if !protocol.is_continuous() {
        return Err(Error::Unsupported("step_continuous on a discrete protocol".into()));
    }
    advance(state, protocol, k, rng)
}

/// Samples the outcome of measurement `event`, updates the state, and
/// applies the feedback unitary declared for it.
pub fn apply_measurement_event(state: &mut TrajectoryState, protocol: &Protocol, event: usize, rng: &mut RngStream) -> Result<usize> {
    let ev = protocol
        .events()
        .get(event)
        .ok_or_else(|| Error::Unsupported(format!("no measurement {event}")))?;
    let branches: Vec<StateVector> = ev.kraus.operators().iter().map(|m| m.apply(&state.psi)).collect();
    let weights: Vec<f64> = branches.iter().map(|b| b.norm_sqr()).collect();
    if weights.iter().all(|&w| w <= P_FLOOR) {
        return Err(Error::DegenerateMeasurement);
    }
    let y = rng.choose(&weights).ok_or(Error::DegenerateMeasurement)?;
    state.outcomes.push(Outcome { time: ev.time, event, outcome: y })?;
    let mut next = branches[y].clone();
    let p = next.normalize();
    if let Some(u) = protocol.feedback_unitary(state.outcomes.entries()) {
        next = u.apply(&next);
    }
    state.ln_probability += p.ln();
    state.psi = next;
    Ok(y)
}

/// Projects onto the reference eigenbasis and returns the label f.
pub fn sample_final(state: &mut TrajectoryState, protocol: &Protocol, rng: &mut RngStream) -> usize {
    let spec = protocol.reference_spectrum();
    let weights: Vec<f64> = spec.vectors.iter().map(|v| v.inner(&state.psi).norm_sqr()).collect();
    let f = rng.choose(&weights).unwrap_or(0);
    state.ln_probability += weights[f].ln();
    f
}

/// Samples one full trajectory Γ from the stream.
pub fn run_trajectory(protocol: &Protocol, rng: &mut RngStream) -> Result<TrajectoryRecord> {
    let mut state = sample_initial(protocol, rng);
    let grid = protocol.grid();
    for k in 0..grid.steps() {
        advance(&mut state, protocol, k, rng)?;
        if let Some(n) = grid.event_at(k + 1) {
            apply_measurement_event(&mut state, protocol, n, rng)?;
        }
    }
    let f = sample_final(&mut state, protocol, rng);
    Ok(TrajectoryRecord {
        index: rng.index(),
        a: state.a,
        f,
        jumps: state.jumps,
        outcomes: state.outcomes,
        heat: state.heat,
        ln_probability: state.ln_probability,
    })
}

/// Seed and worker count for a batch. `threads: None` uses the global pool.
#[derive(Clone, Copy, Debug, Default)]
pub struct BatchOptions {
    pub seed: u64,
    pub threads: Option<usize>,
}

/// Runs trajectories `indices` and maps each through `f`, in index order.
/// Each trajectory owns stream (seed, index), so the output does not depend
/// on the thread count.
pub fn map_batch<T, F>(protocol: &Protocol, indices: Range<u64>, opts: BatchOptions, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(TrajectoryRecord) -> Result<T> + Sync,
{
    let work = || -> Result<Vec<T>> {
        indices
            .clone()
            .into_par_iter()
            .map(|i| {
                let mut rng = RngStream::new(opts.seed, i);
                f(run_trajectory(protocol, &mut rng)?)
            })
            .collect()
    };
    match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Numeric(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

/// `n` trajectories with indices 0..n.
pub fn run_batch(protocol: &Protocol, n: u64, opts: BatchOptions) -> Result<Vec<TrajectoryRecord>> {
    map_batch(protocol, 0..n, opts, Ok)
}
