//! Parameter sweeps over a config document and their CSV tables.

use std::io::Write;

use crate::error::{Error, Result};
use crate::propagate::Propagation;
use crate::protocol::config::ConfigDocument;
use crate::protocol::Protocol;
use crate::thermo::{entropy_production, exact_summary, sigma_cg, transfer_entropy_along, EnsembleAccumulator, SigmaCgSource};
use crate::trajectory::{map_batch, BatchOptions};

pub const DEFAULT_TRAJECTORIES: u64 = 10_000;
pub const DEFAULT_SEED: u64 = 1;

/// Which parameter to vary, over which values, with how many trajectories.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub parameter: String,
    pub values: Vec<f64>,
    pub n_traj: u64,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::config("sweep", "grid is empty"));
        }
        if self.n_traj < 1 {
            return Err(Error::config("sweep", "trajectory count must be ≥ 1"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("sweep", "grid values must be finite"));
        }
        Ok(())
    }

    /// `name=v1,v2,…` or `name=start:stop:points` (inclusive, evenly spaced).
    pub fn parse_grid(text: &str) -> Result<(String, Vec<f64>)> {
        let (name, grid) = text
            .split_once('=')
            .ok_or_else(|| Error::config("--sweep", "expected name=v1,v2,… or name=start:stop:points"))?;
        let bad = |what: &str| Error::config("--sweep", format!("cannot parse {what} in `{text}`"));
        let values = if grid.contains(':') {
            let parts: Vec<&str> = grid.split(':').collect();
            if parts.len() != 3 {
                return Err(bad("range"));
            }
            let start: f64 = parts[0].trim().parse().map_err(|_| bad("start"))?;
            let stop: f64 = parts[1].trim().parse().map_err(|_| bad("stop"))?;
            let n: usize = parts[2].trim().parse().map_err(|_| bad("point count"))?;
            match n {
                0 => Vec::new(),
                1 => vec![start],
                _ => (0..n).map(|i| start + (stop - start) * i as f64 / (n - 1) as f64).collect(),
            }
        } else {
            grid.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| bad("value"))).collect::<Result<_>>()?
        };
        Ok((name.trim().to_string(), values))
    }
}

/// Execution knobs shared by the sweep runners.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub threads: Option<usize>,
    /// Overrides the document's time step.
    pub dt: Option<f64>,
    /// Estimate the transfer entropy along every continuous record (costly).
    pub transfer_entropy: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Exact,
    Sampled,
}

impl Source {
    fn as_str(self) -> &'static str {
        match self {
            Source::Exact => "exact",
            Source::Sampled => "sampled",
        }
    }
}

/// A value with its standard error (0 for exact values).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub se: f64,
}

impl Stat {
    fn exact(mean: f64) -> Self {
        Stat { mean, se: 0.0 }
    }

    fn of(e: &crate::thermo::EnsembleEstimate) -> Self {
        Stat { mean: e.mean(), se: e.standard_error() }
    }

    /// (mean − target)/se; ±∞ for a nonzero offset with zero spread.
    pub fn z(&self, target: f64) -> f64 {
        let d = self.mean - target;
        if self.se > 0.0 {
            d / self.se
        } else if d == 0.0 {
            0.0
        } else {
            d.signum() * f64::INFINITY
        }
    }
}

/// One row of a sweep table.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub parameter: f64,
    pub source: Source,
    pub samples: u64,
    pub sigma: Stat,
    pub sigma_cg: Stat,
    /// ⟨I_mi⟩ (single measurement) or ⟨I_te⟩.
    pub information: Option<Stat>,
    /// β⟨W⟩
    pub beta_work: Option<f64>,
    pub exp_neg_sigma: Stat,
    pub exp_neg_sigma_minus_cg: Stat,
    pub excluded: u64,
}

/// Name of the information column for a document: mutual information when
/// it holds exactly one discrete measurement, transfer entropy otherwise.
pub fn information_label(protocol: &Protocol) -> &'static str {
    if !protocol.is_continuous() && protocol.events().len() == 1 {
        "i_mi"
    } else {
        "i_te"
    }
}

fn point(doc: &ConfigDocument, spec: &SweepSpec, value: f64, opts: &RunOptions) -> Result<Protocol> {
    let mut d = doc.clone();
    d.set_parameter(&spec.parameter, value)?;
    let mut b = d.builder()?;
    if let Some(dt) = opts.dt {
        b = b.dt(dt);
    }
    b.build()
}

/// Per point: the exact ensemble (record enumeration on the step
/// instrument) and a Monte Carlo estimate from `spec.n_traj` trajectories.
pub fn run_discrete(doc: &ConfigDocument, spec: &SweepSpec, opts: &RunOptions) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let mut rows = Vec::with_capacity(2 * spec.values.len());
    for &value in &spec.values {
        let protocol = point(doc, spec, value, opts)?;
        if protocol.is_continuous() {
            return Err(Error::config("mode.type", "run-discrete needs a discrete-mode document"));
        }
        let exact = exact_summary(&protocol, Propagation::Unraveled)?;
        let information = exact.mutual_information.filter(|_| protocol.events().len() == 1).unwrap_or(exact.transfer_entropy);
        let beta_work = protocol.beta() * exact.work;
        rows.push(SweepRow {
            parameter: value,
            source: Source::Exact,
            samples: 0,
            sigma: Stat::exact(exact.mean_sigma),
            sigma_cg: Stat::exact(exact.mean_sigma_cg),
            information: Some(Stat::exact(information)),
            beta_work: Some(beta_work),
            exp_neg_sigma: Stat::exact(exact.exp_neg_sigma),
            exp_neg_sigma_minus_cg: Stat::exact(exact.exp_neg_sigma_minus_cg),
            excluded: 0,
        });
        let table = SigmaCgSource::Table(exact.records.iter().map(|r| (r.record.outcomes(), r.sigma_cg)).collect());
        let batch = BatchOptions { seed: spec.seed, threads: opts.threads };
        let ledgers = map_batch(&protocol, 0..spec.n_traj, batch, |r| {
            Ok(entropy_production(&r, &protocol).with_sigma_cg(table.get(&protocol, &r.outcomes)?))
        })?;
        let mut acc = EnsembleAccumulator::default();
        for l in &ledgers {
            acc.push(l, None);
        }
        rows.push(sampled_row(value, &acc, None));
    }
    Ok(rows)
}

fn sampled_row(value: f64, acc: &EnsembleAccumulator, information: Option<Stat>) -> SweepRow {
    SweepRow {
        parameter: value,
        source: Source::Sampled,
        samples: acc.samples,
        sigma: Stat::of(&acc.sigma),
        sigma_cg: Stat::of(&acc.sigma_cg),
        information,
        beta_work: None,
        exp_neg_sigma: Stat::of(&acc.exp_neg_sigma),
        exp_neg_sigma_minus_cg: Stat::of(&acc.exp_neg_sigma_minus_cg),
        excluded: acc.excluded,
    }
}

/// Per point: Monte Carlo estimates with σ_cg from exact propagation along
/// every sampled record.
pub fn run_continuous(doc: &ConfigDocument, spec: &SweepSpec, opts: &RunOptions) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let mut rows = Vec::with_capacity(spec.values.len());
    for &value in &spec.values {
        let protocol = point(doc, spec, value, opts)?;
        if !protocol.is_continuous() {
            return Err(Error::config("mode.type", "run-continuous needs a continuous-mode document"));
        }
        let batch = BatchOptions { seed: spec.seed, threads: opts.threads };
        let with_te = opts.transfer_entropy;
        let results = map_batch(&protocol, 0..spec.n_traj, batch, |r| {
            let ledger = entropy_production(&r, &protocol).with_sigma_cg(sigma_cg(&protocol, &r.outcomes, Propagation::Unraveled)?);
            let te = if with_te { Some(transfer_entropy_along(&protocol, r.outcomes.entries())?) } else { None };
            Ok((ledger, te))
        })?;
        let mut acc = EnsembleAccumulator::default();
        for (l, te) in &results {
            acc.push(l, *te);
        }
        let info = with_te.then(|| Stat::of(&acc.transfer_entropy));
        rows.push(sampled_row(value, &acc, info));
    }
    Ok(rows)
}

pub const CSV_VERSION: &str = "1";

/// Shortest round-trip text of `x`, in exponent form when tiny or huge.
pub fn format_number(x: f64) -> String {
    if x != 0.0 && x.is_finite() && (x.abs() < 1e-4 || x.abs() >= 1e15) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// Writes the sweep table. Columns: parameter, source, n, sigma, sigma_se,
/// sigma_cg, sigma_cg_se, <info>, <info>_se, beta_work, exp_neg_sigma,
/// exp_neg_sigma_se, exp_neg_sigma_minus_cg, exp_neg_sigma_minus_cg_se,
/// n_excluded. Missing values are empty cells.
pub fn write_csv<W: Write>(out: &mut W, parameter: &str, information: &str, rows: &[SweepRow]) -> Result<()> {
    writeln!(
        out,
        "{parameter},source,n,sigma,sigma_se,sigma_cg,sigma_cg_se,{information},{information}_se,beta_work,\
         exp_neg_sigma,exp_neg_sigma_se,exp_neg_sigma_minus_cg,exp_neg_sigma_minus_cg_se,n_excluded"
    )?;
    let opt = |x: Option<f64>| x.map(format_number).unwrap_or_default();
    let n = format_number;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            n(r.parameter),
            r.source.as_str(),
            r.samples,
            n(r.sigma.mean),
            n(r.sigma.se),
            n(r.sigma_cg.mean),
            n(r.sigma_cg.se),
            opt(r.information.map(|s| s.mean)),
            opt(r.information.map(|s| s.se)),
            opt(r.beta_work),
            n(r.exp_neg_sigma.mean),
            n(r.exp_neg_sigma.se),
            n(r.exp_neg_sigma_minus_cg.mean),
            n(r.exp_neg_sigma_minus_cg.se),
            r.excluded
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let (n, v) = SweepSpec::parse_grid("epsilon=0:0.5:3").unwrap();
        assert_eq!((n.as_str(), v), ("epsilon", vec![0.0, 0.25, 0.5]));
        let (_, v) = SweepSpec::parse_grid("kappa_m = 0.1, 1 ,5").unwrap();
        assert_eq!(v, vec![0.1, 1.0, 5.0]);
        assert!(SweepSpec::parse_grid("epsilon").is_err());
        assert!(SweepSpec::parse_grid("x=1:2").is_err());
        assert!(SweepSpec::parse_grid("x=a,b").is_err());
    }

    #[test]
    fn z_scores() {
        assert_eq!(Stat { mean: 1.0, se: 0.0 }.z(1.0), 0.0);
        assert_eq!(Stat { mean: 1.2, se: 0.1 }.z(1.0).round(), 2.0);
        assert!(Stat { mean: 1.1, se: 0.0 }.z(1.0).is_infinite());
    }

    #[test]
    fn number_text() {
        assert_eq!(format_number(0.25), "0.25");
        assert_eq!(format_number(1.5e-17), "1.5e-17");
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(-3e20), "-3e20");
    }
}
