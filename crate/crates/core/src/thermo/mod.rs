//! Entropy production, coarse-grained entropy, information measures, and
//! ensemble estimators.

pub mod ensemble;
pub mod estimate;
pub mod exact;
pub mod info;
pub mod ledger;

pub use ensemble::{ensemble_averages, EnsembleAccumulator, EnsembleReport, SigmaCgSource};
pub use estimate::EnsembleEstimate;
pub use exact::{exact_summary, ExactSummary, RecordSummary};
pub use info::{
    extracted_work, information_measures, mutual_information, quantum_heat, transfer_entropy, transfer_entropy_along,
    InformationMeasures,
};
pub use ledger::{entropy_production, sigma_cg, EntropyLedger};
