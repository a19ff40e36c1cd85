use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::protocol::{OutcomeHistory, Protocol};

/// An unobserved jump: detected at the end of grid step `step`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub time: f64,
    pub step: usize,
    pub channel: usize,
}

/// Γ = {Y, γ}: initial and final eigenlabels, jumps, outcome record, heat.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub index: u64,
    /// Eigenlabel of the initial state (descending-probability order).
    pub a: usize,
    /// Eigenlabel of the reference state.
    pub f: usize,
    pub jumps: Vec<JumpRecord>,
    pub outcomes: OutcomeHistory,
    /// Σ_k q_{j_k}, energy released to the reservoir.
    pub heat: f64,
    /// ln P[Γ] under the step instrument, accumulated while sampling.
    pub ln_probability: f64,
}

impl TrajectoryRecord {
    /// Net heat released during [t0, t1).
    pub fn heat_between(&self, protocol: &Protocol, t0: f64, t1: f64) -> f64 {
        self.jumps
            .iter()
            .filter(|j| j.time > t0 && j.time <= t1)
            .map(|j| protocol.channels().get(j.channel).heat)
            .sum()
    }
}

#[derive(Serialize)]
struct DumpLine<'r> {
    index: u64,
    a: usize,
    f: usize,
    jumps: Vec<(f64, &'r str)>,
    outcomes: Vec<(f64, &'r str)>,
    heat: f64,
    ln_probability: f64,
}

/// One JSON object per line: index, a, f, jumps as [time, channel label],
/// outcomes as [time, outcome label], heat, ln_probability.
pub fn write_jsonl<W: Write>(out: &mut W, protocol: &Protocol, records: &[TrajectoryRecord]) -> Result<()> {
    for r in records {
        let jumps = r.jumps.iter().map(|j| (j.time, protocol.channels().get(j.channel).label.as_str())).collect();
        let outcomes = r.outcomes.entries().iter().map(|o| (o.time, outcome_label(protocol, o.event, o.outcome))).collect();
        let line = DumpLine { index: r.index, a: r.a, f: r.f, jumps, outcomes, heat: r.heat, ln_probability: r.ln_probability };
        serde_json::to_writer(&mut *out, &line).map_err(|e| crate::Error::Numeric(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub(crate) fn outcome_label(protocol: &Protocol, event: usize, outcome: usize) -> &str {
    match protocol.monitor() {
        Some(m) => m.kraus.label(outcome),
        None => protocol.events()[event].kraus.label(outcome),
    }
}
