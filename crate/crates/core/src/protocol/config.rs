//! JSON protocol documents (schema `ftlab/protocol-v1`).
//!
//! Every numeric field accepts a number or a string expression over the
//! document's `parameters` (`"$epsilon"`, `"0.1 + $kappa_dt"`); complex
//! entries are `[re, im]`. Errors carry the JSON path of the offending value.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{Map, Value};

use super::{InitialSpec, OutcomeKey, Protocol, ProtocolBuilder, ReferenceSpec, Schedule, Window};
use crate::channel::{qubit_thermal_pair, JumpChannel};
use crate::error::{Error, Result};
use crate::kraus::KrausSet;
use crate::linalg::{c, pauli, ComplexMatrix, StateVector, C64};
use crate::protocol::presets::excited_detector;
use crate::protocol::Drive;
use crate::reversal::TimeReversal;
use crate::state::Tolerances;
use crate::sweep::SweepSpec;

pub const SCHEMA: &str = "ftlab/protocol-v1";

/// A parsed document with its parameter table; parameters may be overridden
/// before the protocol is built (this is how sweeps are run).
#[derive(Clone, Debug)]
pub struct ConfigDocument {
    root: Map<String, Value>,
    parameters: BTreeMap<String, f64>,
}

/// Parses and validates a protocol document.
pub fn load_protocol(text: &str) -> Result<Protocol> {
    ConfigDocument::parse(text)?.build()
}

pub fn load_protocol_file(path: impl AsRef<Path>) -> Result<Protocol> {
    ConfigDocument::from_path(path)?.build()
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| Error::config(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
        let Value::Object(root) = value else {
            return Err(Error::config("$", "document must be a JSON object"));
        };
        match root.get("schema") {
            Some(Value::String(s)) if s == SCHEMA => {}
            Some(other) => return Err(Error::config("schema", format!("unsupported schema {other}; expected \"{SCHEMA}\""))),
            None => return Err(Error::config("schema", format!("missing; expected \"{SCHEMA}\""))),
        }
        let mut parameters = BTreeMap::new();
        if let Some(p) = root.get("parameters") {
            let obj = p.as_object().ok_or_else(|| Error::config("parameters", "expected an object"))?;
            for (k, v) in obj {
                // defaults are numbers or constant expressions such as "0.1 * pi"
                let at = format!("parameters.{k}");
                let x = match v {
                    Value::Number(n) => n.as_f64().unwrap_or(f64::NAN),
                    Value::String(s) => eval(s, &BTreeMap::new()).map_err(|m| Error::config(&at, m))?,
                    _ => return Err(Error::config(at, "expected a number or a constant expression")),
                };
                if !x.is_finite() {
                    return Err(Error::config(at, "default must be finite"));
                }
                parameters.insert(k.clone(), x);
            }
        }
        Ok(ConfigDocument { root, parameters })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), format!("cannot read: {e}")))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config { location, message } => Error::config(format!("{}: {location}", path.display()), message),
            other => other,
        })
    }

    pub fn name(&self) -> &str {
        self.root.get("name").and_then(Value::as_str).unwrap_or("protocol")
    }

    pub fn parameters(&self) -> &BTreeMap<String, f64> {
        &self.parameters
    }

    /// Overrides a declared parameter.
    pub fn set_parameter(&mut self, name: &str, value: f64) -> Result<()> {
        match self.parameters.get_mut(name) {
            Some(slot) => {
                *slot = value;
                Ok(())
            }
            None => Err(Error::config(format!("parameters.{name}"), "not declared in this document")),
        }
    }

    /// The document's default sweep, if it declares one.
    pub fn sweep(&self) -> Result<Option<SweepSpec>> {
        let Some(v) = self.root.get("sweep") else { return Ok(None) };
        let ctx = Ctx { params: &self.parameters, strict: true };
        let obj = ctx.object(v, "sweep")?;
        let parameter = ctx.string(field(obj, "sweep", "parameter")?, "sweep.parameter")?.to_string();
        let values = ctx.number_list(field(obj, "sweep", "values")?, "sweep.values")?;
        let n_traj = match obj.get("n_traj") {
            Some(n) => ctx.count(n, "sweep.n_traj")?,
            None => crate::sweep::DEFAULT_TRAJECTORIES,
        };
        let seed = match obj.get("seed") {
            Some(n) => ctx.count(n, "sweep.seed")?,
            None => crate::sweep::DEFAULT_SEED,
        };
        let spec = SweepSpec { parameter, values, n_traj, seed };
        spec.validate()?;
        Ok(Some(spec))
    }

    pub fn is_continuous(&self) -> bool {
        self.root.get("mode").and_then(|m| m.get("type")).and_then(Value::as_str) == Some("continuous")
    }

    pub fn build(&self) -> Result<Protocol> {
        self.builder()?.build()
    }

    /// The validated builder; callers may adjust `dt` before building.
    pub fn builder(&self) -> Result<ProtocolBuilder> {
        self.builder_with(true)
    }

    /// Builds without rejecting incomplete measurements, so that an audit
    /// can report them as findings instead of load errors.
    pub fn build_for_audit(&self) -> Result<Protocol> {
        self.builder_with(false)?.build()
    }

    fn builder_with(&self, strict: bool) -> Result<ProtocolBuilder> {
        let ctx = Ctx { params: &self.parameters, strict };
        let root = &self.root;
        let dim = ctx.count(field(root, "$", "dim")?, "dim")? as usize;
        let beta = ctx.number(field(root, "$", "beta")?, "beta")?;
        let tau = ctx.number(field(root, "$", "tau")?, "tau")?;
        let mut b = Protocol::builder(dim, beta, tau).name(self.name());
        if let Some(v) = root.get("dt") {
            b = b.dt(ctx.number(v, "dt")?);
        }
        if let Some(v) = root.get("step_cap") {
            b = b.step_cap(ctx.number(v, "step_cap")?);
        }
        if let Some(v) = root.get("tolerances") {
            let tol: Tolerances =
                serde_json::from_value(v.clone()).map_err(|e| Error::config("tolerances", e.to_string()))?;
            b = b.tolerances(tol);
        }
        if let Some(v) = root.get("initial_state") {
            b = b.initial(ctx.initial(v, dim, "initial_state")?);
        }
        if let Some(v) = root.get("reference_state") {
            b = b.reference(ctx.reference(v, dim, "reference_state")?);
        }
        if let Some(v) = root.get("time_reversal") {
            b = b.time_reversal(ctx.time_reversal(v, dim, "time_reversal")?);
        }
        if let Some(v) = root.get("hamiltonian") {
            b = b.hamiltonian(ctx.schedule(v, dim, "hamiltonian")?);
        } else {
            b = b.hamiltonian(Schedule::new(dim));
        }
        if let Some(v) = root.get("channels") {
            for (i, item) in ctx.array(v, "channels")?.iter().enumerate() {
                let at = format!("channels[{i}]");
                let (chs, windows) = ctx.channel(item, dim, beta, &at)?;
                b = b.channels(chs, windows);
            }
        }

        let mode = ctx.object(field(root, "$", "mode")?, "mode")?;
        let labels: Vec<Vec<String>>;
        match ctx.string(field(mode, "mode", "type")?, "mode.type")? {
            "discrete" => {
                let events = ctx.array(field(mode, "mode", "events")?, "mode.events")?;
                let mut all = Vec::new();
                for (i, ev) in events.iter().enumerate() {
                    let at = format!("mode.events[{i}]");
                    let obj = ctx.object(ev, &at)?;
                    let time = ctx.number(field(obj, &at, "time")?, &format!("{at}.time"))?;
                    let kraus = ctx.kraus(field(obj, &at, "kraus")?, dim, &format!("{at}.kraus"), true)?;
                    all.push(kraus.labels().to_vec());
                    b = b.measurement(time, kraus);
                }
                labels = all;
            }
            "continuous" => {
                let rate = ctx.number(field(mode, "mode", "rate")?, "mode.rate")?;
                if !(rate >= 0.0) {
                    return Err(Error::config("mode.rate", "monitoring rate must be ≥ 0"));
                }
                let kraus = ctx.kraus(field(mode, "mode", "kraus")?, dim, "mode.kraus", false)?;
                labels = vec![kraus.labels().to_vec()];
                b = b.monitor(rate, kraus);
            }
            other => return Err(Error::config("mode.type", format!("unknown mode `{other}` (discrete or continuous)"))),
        }

        if let Some(v) = root.get("feedback") {
            for (i, item) in ctx.array(v, "feedback")?.iter().enumerate() {
                let at = format!("feedback[{i}]");
                let obj = ctx.object(item, &at)?;
                let key = ctx.outcome_key(obj, &labels, &at)?;
                let u = ctx.operator(field(obj, &at, "unitary")?, dim, &format!("{at}.unitary"))?;
                super::check_unitary(&u, dim, &format!("{at}.unitary"))?;
                b = b.feedback_unitary(key, u);
            }
        }
        if let Some(v) = root.get("hamiltonian_after_outcome") {
            for (i, item) in ctx.array(v, "hamiltonian_after_outcome")?.iter().enumerate() {
                let at = format!("hamiltonian_after_outcome[{i}]");
                let obj = ctx.object(item, &at)?;
                let key = ctx.outcome_key(obj, &labels, &at)?;
                let s = ctx.schedule(field(obj, &at, "hamiltonian")?, dim, &format!("{at}.hamiltonian"))?;
                b = b.hamiltonian_after(key, s);
            }
        }
        Ok(b)
    }
}

fn field<'v>(obj: &'v Map<String, Value>, at: &str, name: &str) -> Result<&'v Value> {
    obj.get(name).ok_or_else(|| Error::config(at, format!("missing field `{name}`")))
}

struct Ctx<'p> {
    params: &'p BTreeMap<String, f64>,
    /// Reject incomplete measurement families while parsing.
    strict: bool,
}

impl Ctx<'_> {
    fn object<'v>(&self, v: &'v Value, at: &str) -> Result<&'v Map<String, Value>> {
        v.as_object().ok_or_else(|| Error::config(at, "expected an object"))
    }

    fn array<'v>(&self, v: &'v Value, at: &str) -> Result<&'v Vec<Value>> {
        v.as_array().ok_or_else(|| Error::config(at, "expected an array"))
    }

    fn string<'v>(&self, v: &'v Value, at: &str) -> Result<&'v str> {
        v.as_str().ok_or_else(|| Error::config(at, "expected a string"))
    }

    fn number(&self, v: &Value, at: &str) -> Result<f64> {
        let x = match v {
            Value::Number(n) => n.as_f64().unwrap_or(f64::NAN),
            Value::String(s) => eval(s, self.params).map_err(|m| Error::config(at, m))?,
            Value::Null => f64::INFINITY,
            _ => return Err(Error::config(at, "expected a number or an expression")),
        };
        if x.is_nan() {
            return Err(Error::config(at, "value is not a number"));
        }
        Ok(x)
    }

    fn count(&self, v: &Value, at: &str) -> Result<u64> {
        let x = self.number(v, at)?;
        if x < 0.0 || x.fract() != 0.0 || !x.is_finite() {
            return Err(Error::config(at, "expected a non-negative integer"));
        }
        Ok(x as u64)
    }

    fn number_list(&self, v: &Value, at: &str) -> Result<Vec<f64>> {
        self.array(v, at)?.iter().enumerate().map(|(i, x)| self.number(x, &format!("{at}[{i}]"))).collect()
    }

    fn complex(&self, v: &Value, at: &str) -> Result<C64> {
        match v {
            Value::Array(pair) if pair.len() == 2 => {
                Ok(c(self.number(&pair[0], &format!("{at}[0]"))?, self.number(&pair[1], &format!("{at}[1]"))?))
            }
            Value::Array(_) => Err(Error::config(at, "complex numbers are [re, im] pairs")),
            other => Ok(c(self.number(other, at)?, 0.0)),
        }
    }

    /// A named qubit operator ("x", "z", "lower", …, optionally scaled as
    /// {"name": .., "scale": ..}) or dense rows.
    fn operator(&self, v: &Value, dim: usize, at: &str) -> Result<ComplexMatrix> {
        let m = match v {
            Value::String(name) => pauli::by_name(name)
                .or_else(|| (name == "identity").then(|| ComplexMatrix::identity(dim)))
                .ok_or_else(|| Error::config(at, format!("unknown operator name `{name}`")))?,
            Value::Object(obj) => {
                let base = self.operator(field(obj, at, "name")?, dim, &format!("{at}.name"))?;
                let s = match obj.get("scale") {
                    Some(s) => self.complex(s, &format!("{at}.scale"))?,
                    None => c(1.0, 0.0),
                };
                base.scale(s)
            }
            Value::Array(rows) => {
                let mut parsed = Vec::with_capacity(rows.len());
                for (i, row) in rows.iter().enumerate() {
                    let at_row = format!("{at}[{i}]");
                    let entries = self.array(row, &at_row)?;
                    parsed.push(
                        entries
                            .iter()
                            .enumerate()
                            .map(|(j, x)| self.complex(x, &format!("{at_row}[{j}]")))
                            .collect::<Result<Vec<_>>>()?,
                    );
                }
                ComplexMatrix::from_rows(&parsed).map_err(|e| Error::config(at, e.to_string()))?
            }
            _ => return Err(Error::config(at, "expected an operator name or a matrix")),
        };
        if m.dim() != dim {
            return Err(Error::config(at, format!("operator has dimension {} (system dimension {dim})", m.dim())));
        }
        Ok(m)
    }

    fn vector(&self, v: &Value, dim: usize, at: &str) -> Result<StateVector> {
        let entries = self.array(v, at)?;
        if entries.len() != dim {
            return Err(Error::config(at, format!("vector has {} entries (system dimension {dim})", entries.len())));
        }
        let xs = entries.iter().enumerate().map(|(i, x)| self.complex(x, &format!("{at}[{i}]"))).collect::<Result<Vec<_>>>()?;
        Ok(StateVector::from_slice(&xs))
    }

    fn initial(&self, v: &Value, dim: usize, at: &str) -> Result<InitialSpec> {
        match v {
            Value::String(s) if s == "thermal" => Ok(InitialSpec::Thermal),
            Value::Object(obj) => {
                if let Some(m) = obj.get("matrix") {
                    Ok(InitialSpec::Matrix(self.operator(m, dim, &format!("{at}.matrix"))?))
                } else if let Some(p) = obj.get("pure") {
                    Ok(InitialSpec::Pure(self.vector(p, dim, &format!("{at}.pure"))?))
                } else if let Some(d) = obj.get("diagonal") {
                    Ok(InitialSpec::Matrix(self.diagonal(d, dim, &format!("{at}.diagonal"))?))
                } else {
                    Err(Error::config(at, "expected one of `matrix`, `pure`, `diagonal`"))
                }
            }
            _ => Err(Error::config(at, "expected \"thermal\" or an object")),
        }
    }

    fn diagonal(&self, v: &Value, dim: usize, at: &str) -> Result<ComplexMatrix> {
        let d = self.number_list(v, at)?;
        if d.len() != dim {
            return Err(Error::config(at, format!("{} entries for dimension {dim}", d.len())));
        }
        Ok(ComplexMatrix::diag_real(&d))
    }

    fn reference(&self, v: &Value, dim: usize, at: &str) -> Result<ReferenceSpec> {
        match v {
            Value::String(s) if s == "thermal-final" => Ok(ReferenceSpec::ThermalFinal),
            Value::String(s) if s == "average-final" => Ok(ReferenceSpec::AverageFinal),
            Value::Object(obj) => {
                if let Some(m) = obj.get("matrix") {
                    Ok(ReferenceSpec::Explicit(self.operator(m, dim, &format!("{at}.matrix"))?))
                } else if let Some(d) = obj.get("diagonal") {
                    Ok(ReferenceSpec::Explicit(self.diagonal(d, dim, &format!("{at}.diagonal"))?))
                } else {
                    Err(Error::config(at, "expected `matrix` or `diagonal`"))
                }
            }
            _ => Err(Error::config(at, "expected \"thermal-final\", \"average-final\" or an object")),
        }
    }

    fn time_reversal(&self, v: &Value, dim: usize, at: &str) -> Result<TimeReversal> {
        match v {
            Value::String(s) if s == "conjugation" => Ok(TimeReversal::standard()),
            Value::Object(obj) => {
                let w = self.operator(field(obj, at, "basis")?, dim, &format!("{at}.basis"))?;
                TimeReversal::with_basis(w).map_err(|e| Error::config(at, e.to_string()))
            }
            _ => Err(Error::config(at, "expected \"conjugation\" or {\"basis\": matrix}")),
        }
    }

    /// A list of terms {operator, coefficient | drive}, or a single operator.
    fn schedule(&self, v: &Value, dim: usize, at: &str) -> Result<Schedule> {
        let Value::Array(items) = v else {
            return Ok(Schedule::constant(self.operator(v, dim, at)?));
        };
        // dense matrices are arrays too: a list of terms holds objects
        if items.first().is_some_and(|x| !x.is_object()) {
            return Ok(Schedule::constant(self.operator(v, dim, at)?));
        }
        let mut s = Schedule::new(dim);
        for (i, term) in items.iter().enumerate() {
            let at_t = format!("{at}[{i}]");
            let obj = self.object(term, &at_t)?;
            let op = self.operator(field(obj, &at_t, "operator")?, dim, &format!("{at_t}.operator"))?;
            let drive = match (obj.get("coefficient"), obj.get("drive")) {
                (Some(x), None) => Drive::Constant(self.number(x, &format!("{at_t}.coefficient"))?),
                (None, Some(d)) => self.drive(d, &format!("{at_t}.drive"))?,
                (None, None) => Drive::Constant(1.0),
                _ => return Err(Error::config(&at_t, "give either `coefficient` or `drive`")),
            };
            s = s.with_term(op, drive).map_err(|e| Error::config(&at_t, e.to_string()))?;
        }
        Ok(s)
    }

    fn drive(&self, v: &Value, at: &str) -> Result<Drive> {
        let obj = self.object(v, at)?;
        match self.string(field(obj, at, "type")?, &format!("{at}.type"))? {
            "constant" => Ok(Drive::Constant(self.number(field(obj, at, "value")?, &format!("{at}.value"))?)),
            "cosine" => Ok(Drive::Cosine {
                amplitude: self.number(field(obj, at, "amplitude")?, &format!("{at}.amplitude"))?,
                frequency: self.number(field(obj, at, "frequency")?, &format!("{at}.frequency"))?,
                phase: match obj.get("phase") {
                    Some(p) => self.number(p, &format!("{at}.phase"))?,
                    None => 0.0,
                },
            }),
            "piecewise" => {
                let times = self.number_list(field(obj, at, "times")?, &format!("{at}.times"))?;
                let values = self.number_list(field(obj, at, "values")?, &format!("{at}.values"))?;
                let d = Drive::Piecewise { times, values };
                d.validate().map_err(|e| Error::config(at, e.to_string()))?;
                Ok(d)
            }
            other => Err(Error::config(format!("{at}.type"), format!("unknown drive `{other}`"))),
        }
    }

    fn windows(&self, obj: &Map<String, Value>, at: &str) -> Result<Vec<Window>> {
        let Some(v) = obj.get("windows") else { return Ok(Vec::new()) };
        let mut out = Vec::new();
        for (i, w) in self.array(v, &format!("{at}.windows"))?.iter().enumerate() {
            let at_w = format!("{at}.windows[{i}]");
            let o = self.object(w, &at_w)?;
            let start = self.number(field(o, &at_w, "start")?, &format!("{at_w}.start"))?;
            let end = match o.get("end") {
                Some(e) => self.number(e, &format!("{at_w}.end"))?,
                None => f64::INFINITY,
            };
            let scale = match o.get("scale") {
                Some(s) => self.number(s, &format!("{at_w}.scale"))?,
                None => 1.0,
            };
            if !(end > start) || !(scale >= 0.0) {
                return Err(Error::config(at_w, "windows need start < end and scale ≥ 0"));
            }
            out.push(Window { start, end, scale });
        }
        Ok(out)
    }

    fn channel(&self, v: &Value, dim: usize, beta: f64, at: &str) -> Result<(Vec<JumpChannel>, Vec<Window>)> {
        let obj = self.object(v, at)?;
        let windows = self.windows(obj, at)?;
        if let Some(family) = obj.get("family") {
            return match self.string(family, &format!("{at}.family"))? {
                "qubit-thermal" => {
                    if dim != 2 {
                        return Err(Error::config(at, "the qubit-thermal family needs dim = 2"));
                    }
                    let kappa = self.number(field(obj, at, "kappa")?, &format!("{at}.kappa"))?;
                    let omega = self.number(field(obj, at, "omega")?, &format!("{at}.omega"))?;
                    if !(kappa >= 0.0) {
                        return Err(Error::config(format!("{at}.kappa"), "rate must be ≥ 0"));
                    }
                    Ok((qubit_thermal_pair(kappa, omega, beta), windows))
                }
                other => Err(Error::config(format!("{at}.family"), format!("unknown channel family `{other}`"))),
            };
        }
        let label = self.string(field(obj, at, "label")?, &format!("{at}.label"))?.to_string();
        let operator = self.operator(field(obj, at, "operator")?, dim, &format!("{at}.operator"))?;
        let heat = self.number(field(obj, at, "heat")?, &format!("{at}.heat"))?;
        let partner = self.string(field(obj, at, "partner")?, &format!("{at}.partner"))?.to_string();
        Ok((vec![JumpChannel { label, operator, heat, partner }], windows))
    }

    fn kraus(&self, v: &Value, dim: usize, at: &str, complete: bool) -> Result<KrausSet> {
        let obj = self.object(v, at)?;
        let family = self.string(field(obj, at, "family")?, &format!("{at}.family"))?;
        let epsilon = || self.number(field(obj, at, "epsilon")?, &format!("{at}.epsilon"));
        let qubit = || {
            if dim == 2 {
                Ok(())
            } else {
                Err(Error::config(at, format!("family `{family}` needs dim = 2")))
            }
        };
        let located = |e: Error| match e {
            Error::Config { message, .. } => Error::config(at, message),
            other => Error::config(at, other.to_string()),
        };
        let set = match family {
            "qubit-classical" => {
                qubit()?;
                KrausSet::qubit_classical(epsilon()?).map_err(located)?
            }
            "qubit-quantum" => {
                qubit()?;
                KrausSet::qubit_quantum(epsilon()?).map_err(located)?
            }
            "qubit-excited-detector" => {
                qubit()?;
                let e = epsilon()?;
                if !(0.0..=1.0).contains(&e) {
                    return Err(Error::config(format!("{at}.epsilon"), "error probability outside [0, 1]"));
                }
                excited_detector(e).map_err(located)?
            }
            "projective" => KrausSet::projective(dim),
            "trivial" => KrausSet::trivial(dim),
            "explicit" => {
                let outcomes = self.array(field(obj, at, "outcomes")?, &format!("{at}.outcomes"))?;
                let mut labels = Vec::new();
                let mut ops = Vec::new();
                for (i, o) in outcomes.iter().enumerate() {
                    let at_o = format!("{at}.outcomes[{i}]");
                    let oo = self.object(o, &at_o)?;
                    labels.push(self.string(field(oo, &at_o, "label")?, &format!("{at_o}.label"))?.to_string());
                    ops.push(self.operator(field(oo, &at_o, "operator")?, dim, &format!("{at_o}.operator"))?);
                }
                if complete && self.strict {
                    KrausSet::new(labels, ops, &Tolerances::default()).map_err(|e| Error::config(at, e.to_string()))?
                } else {
                    KrausSet::unchecked(labels, ops).map_err(located)?
                }
            }
            other => return Err(Error::config(format!("{at}.family"), format!("unknown measurement family `{other}`"))),
        };
        if complete && self.strict && !matches!(family, "explicit") {
            let r = set.completeness_residual();
            if r > 1e-10 {
                return Err(Error::config(at, Error::Incomplete { residual: r, tol: 1e-10 }.to_string()));
            }
        }
        Ok(set)
    }

    /// {"event": n (optional), "outcome": label or index}
    fn outcome_key(&self, obj: &Map<String, Value>, labels: &[Vec<String>], at: &str) -> Result<OutcomeKey> {
        let event = match obj.get("event") {
            None | Some(Value::Null) => None,
            Some(v) => {
                let e = self.count(v, &format!("{at}.event"))? as usize;
                if e >= labels.len() {
                    return Err(Error::config(format!("{at}.event"), format!("no measurement {e}")));
                }
                Some(e)
            }
        };
        let names = &labels[event.unwrap_or(0).min(labels.len().saturating_sub(1))];
        let outcome = match field(obj, at, "outcome")? {
            Value::String(s) => names
                .iter()
                .position(|l| l == s)
                .ok_or_else(|| Error::config(format!("{at}.outcome"), format!("unknown outcome label `{s}`")))?,
            v => {
                let y = self.count(v, &format!("{at}.outcome"))? as usize;
                if y >= names.len() {
                    return Err(Error::config(format!("{at}.outcome"), format!("outcome index {y} out of range")));
                }
                y
            }
        };
        Ok(OutcomeKey { event, outcome })
    }
}

/// Evaluates `+ − * / ^`, parentheses, numbers, `$name` parameters, the
/// constants `pi`/`inf` and the functions exp, ln, sqrt, sin, cos.
fn eval(src: &str, params: &BTreeMap<String, f64>) -> std::result::Result<f64, String> {
    let mut p = Parser { s: src.as_bytes(), i: 0, params };
    let v = p.expr()?;
    p.ws();
    if p.i != p.s.len() {
        return Err(format!("unexpected `{}` in expression `{src}`", &src[p.i..]));
    }
    Ok(v)
}

struct Parser<'a> {
    s: &'a [u8],
    i: usize,
    params: &'a BTreeMap<String, f64>,
}

impl Parser<'_> {
    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn eat(&mut self, ch: u8) -> bool {
        self.ws();
        if self.s.get(self.i) == Some(&ch) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> std::result::Result<f64, String> {
        let mut v = self.term()?;
        loop {
            if self.eat(b'+') {
                v += self.term()?;
            } else if self.eat(b'-') {
                v -= self.term()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn term(&mut self) -> std::result::Result<f64, String> {
        let mut v = self.unary()?;
        loop {
            if self.eat(b'*') {
                v *= self.unary()?;
            } else if self.eat(b'/') {
                v /= self.unary()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn unary(&mut self) -> std::result::Result<f64, String> {
        if self.eat(b'-') {
            return Ok(-self.unary()?);
        }
        let base = self.atom()?;
        if self.eat(b'^') {
            return Ok(base.powf(self.unary()?));
        }
        Ok(base)
    }

    fn ident(&mut self) -> &str {
        let start = self.i;
        while self.i < self.s.len() && (self.s[self.i].is_ascii_alphanumeric() || self.s[self.i] == b'_') {
            self.i += 1;
        }
        std::str::from_utf8(&self.s[start..self.i]).unwrap_or("")
    }

    fn atom(&mut self) -> std::result::Result<f64, String> {
        self.ws();
        if self.eat(b'(') {
            let v = self.expr()?;
            return if self.eat(b')') { Ok(v) } else { Err("missing `)`".into()) };
        }
        match self.s.get(self.i) {
            Some(b'$') => {
                self.i += 1;
                let name = self.ident().to_string();
                self.params.get(&name).copied().ok_or_else(|| format!("unknown parameter `${name}`"))
            }
            Some(ch) if ch.is_ascii_digit() || *ch == b'.' => {
                let start = self.i;
                while self.i < self.s.len() {
                    let ch = self.s[self.i];
                    let exp_sign = (ch == b'+' || ch == b'-') && matches!(self.s[self.i - 1], b'e' | b'E');
                    if ch.is_ascii_digit() || ch == b'.' || ch == b'e' || ch == b'E' || exp_sign {
                        self.i += 1;
                    } else {
                        break;
                    }
                }
                let text = std::str::from_utf8(&self.s[start..self.i]).unwrap_or("");
                text.parse().map_err(|_| format!("bad number `{text}`"))
            }
            Some(ch) if ch.is_ascii_alphabetic() => {
                let name = self.ident().to_string();
                match name.as_str() {
                    "pi" => return Ok(std::f64::consts::PI),
                    "inf" => return Ok(f64::INFINITY),
                    _ => {}
                }
                let f: fn(f64) -> f64 = match name.as_str() {
                    "exp" => f64::exp,
                    "ln" => f64::ln,
                    "sqrt" => f64::sqrt,
                    "sin" => f64::sin,
                    "cos" => f64::cos,
                    _ => return Err(format!("unknown name `{name}`")),
                };
                if !self.eat(b'(') {
                    return Err(format!("`{name}` needs an argument in parentheses"));
                }
                let v = self.expr()?;
                if !self.eat(b')') {
                    return Err("missing `)`".into());
                }
                Ok(f(v))
            }
            _ => Err("expected a number, `$parameter` or `(`".into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> BTreeMap<String, f64> {
        [("a".to_string(), 2.0), ("kappa_dt".to_string(), 0.2)].into_iter().collect()
    }

    #[test]
    fn expressions() {
        let p = params();
        assert_eq!(eval("1 + 2 * 3", &p).unwrap(), 7.0);
        assert_eq!(eval("(1 + 2) * 3", &p).unwrap(), 9.0);
        assert_eq!(eval("-$a ^ 2", &p).unwrap(), -4.0);
        assert_eq!(eval("1/2", &p).unwrap(), 0.5);
        assert!((eval("0.1 + $kappa_dt", &p).unwrap() - 0.3).abs() < 1e-15);
        assert!((eval("0.1 * pi", &p).unwrap() - 0.1 * std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(eval("1e-3 + 2E+1", &p).unwrap(), 20.001);
        assert!((eval("exp(-ln(4))", &p).unwrap() - 0.25).abs() < 1e-15);
        assert!(eval("$missing", &p).is_err());
        assert!(eval("1 +", &p).is_err());
        assert!(eval("2 3", &p).is_err());
    }

    #[test]
    fn located_errors() {
        let doc = r#"{"schema": "ftlab/protocol-v1", "dim": 2, "beta": 1, "tau": 1,
            "mode": {"type": "discrete", "events": [{"time": 0.5, "kraus": {"family": "qubit-classical", "epsilon": 1.5}}]}}"#;
        let err = load_protocol(doc).unwrap_err().to_string();
        assert!(err.contains("mode.events[0].kraus"), "{err}");

        let doc = r#"{"schema": "ftlab/protocol-v1", "dim": 2, "beta": 1, "tau": 1, "mode": {"type": "sideways"}}"#;
        assert!(load_protocol(doc).unwrap_err().to_string().contains("mode.type"));

        let doc = r#"{"schema": "other", "dim": 2}"#;
        assert!(load_protocol(doc).unwrap_err().to_string().contains("schema"));
    }

    #[test]
    fn parameters_and_overrides() {
        let doc = r#"{"schema": "ftlab/protocol-v1", "dim": 2, "beta": "$b", "tau": "2 * $b",
            "parameters": {"b": 0.5},
            "hamiltonian": [{"operator": "z", "coefficient": 0.5}],
            "mode": {"type": "discrete", "events": []}}"#;
        let mut d = ConfigDocument::parse(doc).unwrap();
        assert_eq!(d.build().unwrap().tau(), 1.0);
        d.set_parameter("b", 2.0).unwrap();
        let p = d.build().unwrap();
        assert_eq!((p.beta(), p.tau()), (2.0, 4.0));
        assert!(d.set_parameter("nope", 1.0).is_err());
    }
}
