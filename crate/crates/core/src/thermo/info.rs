use serde::Serialize;

use super::exact::exact_summary;
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::propagate::{forward_step, record_points, Propagation};
use crate::protocol::{Outcome, Protocol};
use crate::state::{matrix_entropy, P_FLOOR};

/// Information and energy measures of a protocol.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InformationMeasures {
    pub mutual_information: Option<f64>,
    pub transfer_entropy: f64,
    pub work: f64,
}

pub fn information_measures(protocol: &Protocol, mode: Propagation) -> Result<InformationMeasures> {
    let s = exact_summary(protocol, mode)?;
    Ok(InformationMeasures { mutual_information: s.mutual_information, transfer_entropy: s.transfer_entropy, work: s.work })
}

/// S(ρ₀) − Σ_Y P[Y] S(ρ^Y) for a protocol with exactly one measurement.
pub fn mutual_information(protocol: &Protocol, mode: Propagation) -> Result<f64> {
    if protocol.is_continuous() || protocol.events().len() != 1 {
        return Err(Error::Unsupported("mutual information needs exactly one discrete measurement".into()));
    }
    Ok(exact_summary(protocol, mode)?.mutual_information.unwrap_or(0.0))
}

/// Σ_n Σ_{Y_n} P[Y_n] [S(ρ^{Y_n}) − Σ_y P[y|Y_n] S(ρ^{Y_n,y})], summed over
/// the measurements of a discrete protocol.
pub fn transfer_entropy(protocol: &Protocol, mode: Propagation) -> Result<f64> {
    if protocol.is_continuous() {
        return Err(Error::Unsupported(
            "continuous transfer entropy is estimated per trajectory; see transfer_entropy_along".into(),
        ));
    }
    Ok(exact_summary(protocol, mode)?.transfer_entropy)
}

/// Σ_Y P[Y] (Tr{Hρ^Y} − Tr{H U_Y ρ^Y U_Y†}), summed over measurements.
pub fn extracted_work(protocol: &Protocol, mode: Propagation) -> Result<f64> {
    Ok(exact_summary(protocol, mode)?.work)
}

/// Σ_Y P[Y] Tr{Hρ^Y} − Tr{Hρ}: energy change caused by the measurements.
pub fn quantum_heat(protocol: &Protocol, mode: Propagation) -> Result<f64> {
    Ok(exact_summary(protocol, mode)?.quantum_heat)
}

/// Transfer-entropy contribution of one continuously monitored record:
/// each grid step is read as a measurement with outcomes {no click, click y},
/// and the information it yields about the record-conditioned state is
/// summed along the record. Averaging over sampled records estimates the
/// transfer entropy.
pub fn transfer_entropy_along(protocol: &Protocol, entries: &[Outcome]) -> Result<f64> {
    if !protocol.is_continuous() {
        return Err(Error::Unsupported("transfer_entropy_along needs a continuously monitored protocol".into()));
    }
    let points = record_points(protocol, entries)?;
    let mut rho = protocol.initial().matrix().clone();
    let mut total = 0.0;
    for k in 0..protocol.grid().steps() {
        let ops = protocol.step(entries, k)?;
        let quiet = ops.fwd_map.apply(&rho);
        let clicks: Vec<ComplexMatrix> = ops.detections.iter().map(|(d, _)| d.sandwich(&rho)).collect();
        let mut avg = quiet.clone();
        for c in &clicks {
            avg += c;
        }
        let mut gain = matrix_entropy(&avg);
        for b in std::iter::once(&quiet).chain(clicks.iter()) {
            let p = b.trace().re;
            if p > P_FLOOR {
                gain -= p * matrix_entropy(&b.scale_real(1.0 / p));
            }
        }
        total += gain;
        rho = forward_step(protocol, entries, &points, k, Propagation::Unraveled, &rho)?.0;
        let tr = rho.trace().re;
        if !(tr > 0.0) {
            return Err(Error::UnreachableHistory("record has zero probability".into()));
        }
        rho = rho.scale_real(1.0 / tr);
    }
    Ok(total)
}
