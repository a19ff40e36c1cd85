use std::fmt::Debug;

use super::history::Outcome;
use super::schedule::{window_scale, Schedule, Window};
use crate::linalg::ComplexMatrix;

/// Maps the outcome record to the controls in force.
///
/// Implementations must be pure functions of their arguments; the sampler
/// calls them from many threads and the backward experiment replays them.
pub trait FeedbackRule: Send + Sync + Debug {
    /// Hamiltonian at time `t` given the outcomes recorded before `t`.
    fn hamiltonian(&self, history: &[Outcome], t: f64) -> ComplexMatrix;

    /// Rate multiplier for an unobserved channel (0 switches it off).
    fn channel_scale(&self, _history: &[Outcome], _t: f64, _channel: usize) -> f64 {
        1.0
    }

    /// Unitary applied right after the last record of `history`.
    fn unitary(&self, history: &[Outcome]) -> Option<ComplexMatrix>;

    /// True when the Hamiltonian and channel scales ignore the record, which
    /// lets per-step operators be computed once and shared.
    fn history_independent(&self) -> bool {
        false
    }
}

/// Selects which records a rule reacts to: the event index (any if `None`)
/// and the outcome index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OutcomeKey {
    pub event: Option<usize>,
    pub outcome: usize,
}

impl OutcomeKey {
    fn matches(&self, o: &Outcome) -> bool {
        self.outcome == o.outcome && self.event.is_none_or(|e| e == o.event)
    }
}

/// Table-driven rule built from a config document: a base schedule, optional
/// schedule overrides keyed on the latest outcome, channel windows, and
/// per-outcome unitaries.
#[derive(Clone, Debug)]
pub struct ControlTable {
    pub base: Schedule,
    pub overrides: Vec<(OutcomeKey, Schedule)>,
    pub windows: Vec<Vec<Window>>,
    pub unitaries: Vec<(OutcomeKey, ComplexMatrix)>,
}

impl ControlTable {
    pub fn new(base: Schedule, channels: usize) -> Self {
        ControlTable { base, overrides: Vec::new(), windows: vec![Vec::new(); channels], unitaries: Vec::new() }
    }
}

impl FeedbackRule for ControlTable {
    fn hamiltonian(&self, history: &[Outcome], t: f64) -> ComplexMatrix {
        if let Some(last) = history.last() {
            if let Some((_, s)) = self.overrides.iter().find(|(k, _)| k.matches(last)) {
                return s.at(t);
            }
        }
        self.base.at(t)
    }

    fn channel_scale(&self, _history: &[Outcome], t: f64, channel: usize) -> f64 {
        self.windows.get(channel).map_or(1.0, |w| window_scale(w, t))
    }

    fn unitary(&self, history: &[Outcome]) -> Option<ComplexMatrix> {
        let last = history.last()?;
        self.unitaries.iter().find(|(k, _)| k.matches(last)).map(|(_, u)| u.clone())
    }

    fn history_independent(&self) -> bool {
        self.overrides.is_empty()
    }
}
