//! Deterministic density-matrix propagation along outcome records: P[Y],
//! P_tr[Ȳ], and the per-record quantities the accounting needs.

use crate::error::{Error, Result};
use crate::protocol::history::Outcome;
use crate::protocol::reversed::step_length_at;
use crate::protocol::{Mode, Protocol};
use crate::linalg::ComplexMatrix;
use crate::state::DensityMatrix;

/// How the no-record part of each grid step is applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Propagation {
    /// The sampler's own first-order step instrument; Monte Carlo estimates
    /// are unbiased against it.
    #[default]
    Unraveled,
    /// Exact Liouvillian exponentials on each step.
    Lindblad,
}

/// Grid point → index of the record taken there.
pub(crate) fn record_points(protocol: &Protocol, entries: &[Outcome]) -> Result<Vec<Option<usize>>> {
    let grid = protocol.grid();
    let mut points = vec![None; grid.steps() + 1];
    match protocol.mode() {
        Mode::Discrete(events) => {
            if entries.len() > events.len() {
                return Err(Error::UnreachableHistory("more outcomes than measurements".into()));
            }
            let mut n = 0;
            for (k, slot) in points.iter_mut().enumerate() {
                if grid.event_at(k).is_some() && n < entries.len() {
                    *slot = Some(n);
                    n += 1;
                }
            }
        }
        Mode::Continuous(_) => {
            let times = grid.times();
            for (n, o) in entries.iter().enumerate() {
                let k = times.partition_point(|&s| s < o.time - 1e-12);
                if k == 0 || k >= times.len() || (times[k] - o.time).abs() > 1e-9 {
                    return Err(Error::UnreachableHistory(format!("detection at t = {} is off the grid", o.time)));
                }
                points[k] = Some(n);
            }
        }
    }
    Ok(points)
}

fn record_op(protocol: &Protocol, entries: &[Outcome], n: usize) -> ComplexMatrix {
    let dt = if protocol.is_continuous() { step_length_at(protocol, entries[n].time) } else { 1.0 };
    protocol.record_operator(&entries[..=n], dt)
}

/// Advances an unnormalized ρ through grid step k, then applies the record
/// taken at grid point k+1 if any. Returns the expected heat released.
pub(crate) fn forward_step(
    protocol: &Protocol,
    entries: &[Outcome],
    points: &[Option<usize>],
    k: usize,
    mode: Propagation,
    rho: &ComplexMatrix,
) -> Result<(ComplexMatrix, f64)> {
    let record = points[k + 1];
    if let (Propagation::Unraveled, true, Some(n)) = (mode, protocol.is_continuous(), record) {
        return Ok((record_op(protocol, entries, n).sandwich(rho), 0.0));
    }
    let (mut next, heat) = match mode {
        Propagation::Unraveled => {
            let ops = protocol.step(entries, k)?;
            let heat = ops.heat.trace_product(rho).re;
            (ops.fwd_map.apply(rho), heat)
        }
        Propagation::Lindblad => {
            let ops = protocol.lindblad_step(entries, k);
            let heat = ops.heat_rate.trace_product(&ops.fwd_integral.apply(rho)).re;
            (ops.fwd.apply(rho), heat)
        }
    };
    if let Some(n) = record {
        next = record_op(protocol, entries, n).sandwich(&next);
    }
    Ok((next, heat))
}

/// Mirror of [`forward_step`] for the backward run: applies the reversed
/// record at grid point k+1, then the reversed step k.
pub(crate) fn reversed_step(
    protocol: &Protocol,
    entries: &[Outcome],
    points: &[Option<usize>],
    k: usize,
    mode: Propagation,
    rho: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    let record = points[k + 1];
    let reversed_record = |n: usize| protocol.theta().apply(&record_op(protocol, entries, n).adjoint());
    if let (Propagation::Unraveled, true, Some(n)) = (mode, protocol.is_continuous(), record) {
        return Ok(reversed_record(n).sandwich(rho));
    }
    let mut cur = match record {
        Some(n) => reversed_record(n).sandwich(rho),
        None => rho.clone(),
    };
    cur = match mode {
        Propagation::Unraveled => protocol.step(entries, k)?.rev_map.apply(&cur),
        Propagation::Lindblad => protocol.lindblad_step(entries, k).rev.apply(&cur),
    };
    Ok(cur)
}

/// Result of pushing a state through a complete record.
#[derive(Clone, Debug)]
pub struct Pass {
    /// ln of the final trace (−∞ when the record is impossible).
    pub ln_probability: f64,
    /// Final state normalized to unit trace (meaningless if impossible).
    pub state: ComplexMatrix,
}

fn renormalize(rho: &mut ComplexMatrix, ln_p: &mut f64) -> bool {
    let tr = rho.trace().re;
    if !(tr > 0.0) || !tr.is_finite() {
        *ln_p = f64::NEG_INFINITY;
        return false;
    }
    *ln_p += tr.ln();
    *rho = rho.scale_real(1.0 / tr);
    true
}

/// ln P[Y]: ρ₀ propagated with the forward measurement maps interleaved.
pub fn forward_pass(protocol: &Protocol, entries: &[Outcome], mode: Propagation) -> Result<Pass> {
    let points = record_points(protocol, entries)?;
    let mut rho = protocol.initial().matrix().clone();
    let mut ln_p = 0.0;
    for k in 0..protocol.grid().steps() {
        rho = forward_step(protocol, entries, &points, k, mode, &rho)?.0;
        if !renormalize(&mut rho, &mut ln_p) {
            break;
        }
    }
    Ok(Pass { ln_probability: ln_p, state: rho })
}

/// ln P_tr[Ȳ | {λ_{τ−t}^Y}]: Θρ_rΘ⁻¹ propagated backwards through the
/// reversed maps.
pub fn reversed_pass(protocol: &Protocol, entries: &[Outcome], mode: Propagation) -> Result<Pass> {
    let points = record_points(protocol, entries)?;
    let mut rho = protocol.theta().apply(protocol.reference().matrix());
    let mut ln_p = 0.0;
    for k in (0..protocol.grid().steps()).rev() {
        rho = reversed_step(protocol, entries, &points, k, mode, &rho)?;
        if !renormalize(&mut rho, &mut ln_p) {
            break;
        }
    }
    Ok(Pass { ln_probability: ln_p, state: rho })
}

/// Ensemble-averaged final state Σ_Y ρ̃_τ^Y of a discrete protocol.
pub fn average_final_state(protocol: &Protocol) -> Result<DensityMatrix> {
    let mut acc = ComplexMatrix::zeros(protocol.dim());
    walk_records(protocol, Propagation::Lindblad, &mut |node| {
        if let Node::Leaf { state, .. } = node {
            acc += state;
        }
        Ok(())
    })?;
    let tr = acc.trace().re;
    DensityMatrix::new(acc.scale_real(1.0 / tr), protocol.tolerances())
}

/// Visited nodes of the record tree of a discrete protocol. States are
/// unnormalized: their traces are the probabilities of the record prefix.
pub(crate) enum Node<'n> {
    /// Just before measurement `event`, with the records before it.
    Measurement { prefix: &'n [Outcome], state: &'n ComplexMatrix, time: f64, event: usize },
    /// Expected heat released between the previous record and the next one.
    Heat { heat: f64 },
    /// Complete record, state at τ.
    Leaf { record: &'n [Outcome], state: &'n ComplexMatrix },
}

/// Depth-first walk over all complete records of a discrete protocol.
/// Records of zero probability are still visited.
pub(crate) fn walk_records(
    protocol: &Protocol,
    mode: Propagation,
    visit: &mut dyn FnMut(Node<'_>) -> Result<()>,
) -> Result<()> {
    let events = match protocol.mode() {
        Mode::Discrete(e) => e,
        Mode::Continuous(_) => return Err(Error::Unsupported("record enumeration needs a discrete protocol".into())),
    };
    let grid = protocol.grid();
    let mut bounds = vec![0];
    for k in 1..=grid.steps() {
        if grid.event_at(k).is_some() {
            bounds.push(k);
        }
    }
    bounds.push(grid.steps());
    let mut prefix: Vec<Outcome> = Vec::with_capacity(events.len());
    descend(protocol, mode, &bounds, 0, protocol.initial().matrix().clone(), &mut prefix, visit)
}

fn descend(
    protocol: &Protocol,
    mode: Propagation,
    bounds: &[usize],
    segment: usize,
    mut rho: ComplexMatrix,
    prefix: &mut Vec<Outcome>,
    visit: &mut dyn FnMut(Node<'_>) -> Result<()>,
) -> Result<()> {
    let no_records = vec![None; protocol.grid().steps() + 1];
    let mut heat = 0.0;
    for k in bounds[segment]..bounds[segment + 1] {
        let (next, q) = forward_step(protocol, prefix, &no_records, k, mode, &rho)?;
        rho = next;
        heat += q;
    }
    visit(Node::Heat { heat })?;
    let events = protocol.events();
    if segment == events.len() {
        return visit(Node::Leaf { record: prefix, state: &rho });
    }
    let ev = &events[segment];
    visit(Node::Measurement { prefix, state: &rho, time: ev.time, event: segment })?;
    for y in 0..ev.kraus.len() {
        prefix.push(Outcome { time: ev.time, event: segment, outcome: y });
        let op = protocol.record_operator(prefix, 1.0);
        let branch = op.sandwich(&rho);
        descend(protocol, mode, bounds, segment + 1, branch, prefix, visit)?;
        prefix.pop();
    }
    Ok(())
}
