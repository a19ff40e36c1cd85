use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One recorded measurement outcome.
///
/// `event` counts records from zero: in discrete mode it is the index of the
/// scheduled measurement, in continuous mode the running detection number.
/// `outcome` indexes the label list of the Kraus family that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub time: f64,
    pub event: usize,
    pub outcome: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutcomeHistory {
    entries: Vec<Outcome>,
}

impl OutcomeHistory {
    pub fn new() -> Self {
        OutcomeHistory { entries: Vec::new() }
    }

    pub fn from_entries(entries: Vec<Outcome>) -> Result<Self> {
        let mut h = OutcomeHistory::new();
        for e in entries {
            h.push(e)?;
        }
        Ok(h)
    }

    /// Appends a record; times must increase strictly.
    pub fn push(&mut self, o: Outcome) -> Result<()> {
        if let Some(last) = self.entries.last() {
            if o.time <= last.time {
                return Err(Error::UnreachableHistory(format!("outcome at t = {} does not follow t = {}", o.time, last.time)));
            }
        }
        self.entries.push(o);
        Ok(())
    }

    pub fn entries(&self) -> &[Outcome] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Records strictly before `t`.
    pub fn before(&self, t: f64) -> &[Outcome] {
        prefix_before(&self.entries, t)
    }

    pub fn outcomes(&self) -> Vec<usize> {
        self.entries.iter().map(|o| o.outcome).collect()
    }

    pub fn pop(&mut self) -> Option<Outcome> {
        self.entries.pop()
    }
}

pub fn prefix_before(entries: &[Outcome], t: f64) -> &[Outcome] {
    let n = entries.partition_point(|o| o.time < t);
    &entries[..n]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_and_prefix() {
        let mut h = OutcomeHistory::new();
        h.push(Outcome { time: 0.5, event: 0, outcome: 1 }).unwrap();
        h.push(Outcome { time: 1.5, event: 1, outcome: 0 }).unwrap();
        assert!(h.push(Outcome { time: 1.5, event: 2, outcome: 0 }).is_err());
        assert_eq!(h.before(0.5).len(), 0);
        assert_eq!(h.before(0.6).len(), 1);
        assert_eq!(h.before(9.0).len(), 2);
    }
}
