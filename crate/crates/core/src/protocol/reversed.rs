use super::history::{prefix_before, OutcomeHistory};
use super::{Mode, Protocol};
use crate::error::{Error, Result};
use crate::kraus::KrausSet;
use crate::linalg::ComplexMatrix;
use crate::state::DensityMatrix;

/// One measurement of the backward run.
#[derive(Clone, Debug)]
pub struct ReversedEvent {
    /// Backward time τ − t_n.
    pub time: f64,
    /// Index of the forward record this event mirrors.
    pub source: usize,
    /// Outcome that must be observed for the run to be accepted.
    pub outcome: usize,
    /// Θ(V·M)†Θ⁻¹ for the recorded outcome, feedback unitary included.
    pub operator: ComplexMatrix,
}

/// The backward experiment for one forward record: a fixed schedule, reversed
/// measurements in reversed order, and the reversed reference state.
#[derive(Debug)]
pub struct ReversedProtocol<'a> {
    forward: &'a Protocol,
    record: OutcomeHistory,
    initial: DensityMatrix,
    events: Vec<ReversedEvent>,
}

/// Builds the backward experiment of `protocol` for the record `y`.
pub fn reverse_protocol<'a>(protocol: &'a Protocol, y: &OutcomeHistory) -> Result<ReversedProtocol<'a>> {
    protocol.check_history(y)?;
    let theta = protocol.theta();
    let tau = protocol.tau();
    let entries = y.entries();
    let mut events = Vec::with_capacity(entries.len());
    for n in (0..entries.len()).rev() {
        let dt = match protocol.mode() {
            Mode::Continuous(_) => step_length_at(protocol, entries[n].time),
            Mode::Discrete(_) => 1.0,
        };
        let op = protocol.record_operator(&entries[..=n], dt);
        events.push(ReversedEvent { time: tau - entries[n].time, source: n, outcome: entries[n].outcome, operator: theta.apply(&op.adjoint()) });
    }
    let initial = DensityMatrix::new(theta.apply(protocol.reference().matrix()), protocol.tolerances())
        .map_err(|e| Error::InvalidState(format!("reversed reference state: {e}")))?;
    Ok(ReversedProtocol { forward: protocol, record: y.clone(), initial, events })
}

/// Length of the grid step ending at `t`.
pub(crate) fn step_length_at(protocol: &Protocol, t: f64) -> f64 {
    let times = protocol.grid().times();
    let k = times.partition_point(|&s| s < t - 1e-12).clamp(1, times.len() - 1);
    times[k] - times[k - 1]
}

impl<'a> ReversedProtocol<'a> {
    pub fn forward(&self) -> &Protocol {
        self.forward
    }

    pub fn record(&self) -> &OutcomeHistory {
        &self.record
    }

    pub fn tau(&self) -> f64 {
        self.forward.tau()
    }

    /// Θρ_rΘ⁻¹
    pub fn initial(&self) -> &DensityMatrix {
        &self.initial
    }

    /// Reversed measurements in backward-time order.
    pub fn events(&self) -> &[ReversedEvent] {
        &self.events
    }

    /// ξ_t = Θ H(λ_{τ−t}^Y) Θ⁻¹
    pub fn hamiltonian(&self, t: f64) -> ComplexMatrix {
        let s = self.tau() - t;
        let prefix = prefix_before(self.record.entries(), s);
        self.forward.theta().apply(&self.forward.feedback().hamiltonian(prefix, s))
    }

    /// Rate multiplier of channel j in the backward run. A forward jump j
    /// shows up as its partner, so the backward channel j̃ carries the
    /// forward multiplier of j.
    pub fn channel_scale(&self, t: f64, channel: usize) -> f64 {
        let s = self.tau() - t;
        let prefix = prefix_before(self.record.entries(), s);
        let p = self.forward.channels().partner(channel);
        self.forward.feedback().channel_scale(prefix, s, p)
    }

    /// Θ L_j Θ⁻¹
    pub fn jump_operator(&self, channel: usize) -> ComplexMatrix {
        self.forward.theta().apply(&self.forward.channels().get(channel).operator)
    }

    /// Backward label of a forward jump.
    pub fn reversed_channel(&self, forward_channel: usize) -> usize {
        self.forward.channels().partner(forward_channel)
    }

    /// The full reversed family {ΘM†(y)Θ⁻¹} of forward measurement `event`
    /// (discrete mode), without feedback.
    pub fn reversed_family(&self, event: usize) -> Result<KrausSet> {
        let ev = self
            .forward
            .events()
            .get(event)
            .ok_or_else(|| Error::Unsupported(format!("no measurement {event} in this protocol")))?;
        reversed_kraus(&ev.kraus, self.forward.theta())
    }
}

/// {ΘM†(y)Θ⁻¹}; not necessarily complete.
pub fn reversed_kraus(kraus: &KrausSet, theta: &crate::reversal::TimeReversal) -> Result<KrausSet> {
    let ops = kraus.operators().iter().map(|m| theta.apply(&m.adjoint())).collect();
    KrausSet::unchecked(kraus.labels().to_vec(), ops)
}
