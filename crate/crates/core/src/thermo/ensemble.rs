use std::collections::HashMap;

use serde::Serialize;

use super::estimate::EnsembleEstimate;
use super::exact::exact_summary;
use super::ledger::{entropy_production, sigma_cg, EntropyLedger};
use crate::error::{Error, Result};
use crate::propagate::Propagation;
use crate::protocol::{OutcomeHistory, Protocol};
use crate::trajectory::TrajectoryRecord;

/// Where per-trajectory σ_cg values come from: a table over all records of
/// a discrete protocol, or exact propagation along each sampled record.
#[derive(Clone, Debug)]
pub enum SigmaCgSource {
    Table(HashMap<Vec<usize>, f64>),
    PerRecord(Propagation),
}

impl SigmaCgSource {
    pub fn for_protocol(protocol: &Protocol, mode: Propagation) -> Result<Self> {
        if protocol.is_continuous() {
            return Ok(SigmaCgSource::PerRecord(mode));
        }
        let table = exact_summary(protocol, mode)?
            .records
            .into_iter()
            .map(|r| (r.record.outcomes(), r.sigma_cg))
            .collect();
        Ok(SigmaCgSource::Table(table))
    }

    pub fn get(&self, protocol: &Protocol, y: &OutcomeHistory) -> Result<f64> {
        match self {
            SigmaCgSource::Table(t) => t
                .get(&y.outcomes())
                .copied()
                .ok_or_else(|| Error::UnreachableHistory(format!("record {:?} is not in the table", y.outcomes()))),
            SigmaCgSource::PerRecord(mode) => sigma_cg(protocol, y, *mode),
        }
    }
}

/// Running estimates of the fluctuation-theorem observables.
#[derive(Clone, Debug, Default, Serialize)]
pub struct EnsembleAccumulator {
    pub sigma: EnsembleEstimate,
    pub sigma_cg: EnsembleEstimate,
    pub exp_neg_sigma: EnsembleEstimate,
    pub exp_neg_sigma_minus_cg: EnsembleEstimate,
    pub heat: EnsembleEstimate,
    pub transfer_entropy: EnsembleEstimate,
    pub samples: u64,
    /// Trajectories with infinite σ or σ_cg, left out of every estimate.
    pub excluded: u64,
}

impl EnsembleAccumulator {
    pub fn push(&mut self, ledger: &EntropyLedger, transfer_entropy: Option<f64>) {
        self.samples += 1;
        if let Some(te) = transfer_entropy {
            self.transfer_entropy.push(te);
        }
        if ledger.sigma_infinite() || ledger.sigma_cg_infinite() || !ledger.sigma.is_finite() {
            self.excluded += 1;
            return;
        }
        self.sigma.push(ledger.sigma);
        self.heat.push(ledger.heat);
        self.exp_neg_sigma.push((-ledger.sigma).exp());
        if ledger.sigma_cg.is_finite() {
            self.sigma_cg.push(ledger.sigma_cg);
            self.exp_neg_sigma_minus_cg.push((ledger.sigma_cg - ledger.sigma).exp());
        }
    }

    pub fn merge(&mut self, other: &EnsembleAccumulator) {
        self.sigma.merge(&other.sigma);
        self.sigma_cg.merge(&other.sigma_cg);
        self.exp_neg_sigma.merge(&other.exp_neg_sigma);
        self.exp_neg_sigma_minus_cg.merge(&other.exp_neg_sigma_minus_cg);
        self.heat.merge(&other.heat);
        self.transfer_entropy.merge(&other.transfer_entropy);
        self.samples += other.samples;
        self.excluded += other.excluded;
    }

    pub fn finish(&self) -> EnsembleReport {
        let heavy = self.exp_neg_sigma.heavy_tail() || self.exp_neg_sigma_minus_cg.heavy_tail();
        EnsembleReport { estimates: self.clone(), heavy_tail: heavy }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleReport {
    pub estimates: EnsembleAccumulator,
    /// The exponential averages are dominated by rare samples.
    pub heavy_tail: bool,
}

impl std::ops::Deref for EnsembleReport {
    type Target = EnsembleAccumulator;
    fn deref(&self) -> &EnsembleAccumulator {
        &self.estimates
    }
}

/// ⟨σ⟩, ⟨σ_cg⟩, ⟨e^{−σ}⟩, ⟨e^{−(σ−σ_cg)}⟩ and ⟨Q⟩ with standard errors.
pub fn ensemble_averages(records: &[TrajectoryRecord], protocol: &Protocol, source: &SigmaCgSource) -> Result<EnsembleReport> {
    if records.len() < 2 {
        return Err(Error::Unsupported("ensemble averages need at least two trajectories".into()));
    }
    let mut acc = EnsembleAccumulator::default();
    for r in records {
        let ledger = entropy_production(r, protocol).with_sigma_cg(source.get(protocol, &r.outcomes)?);
        acc.push(&ledger, None);
    }
    Ok(acc.finish())
}
