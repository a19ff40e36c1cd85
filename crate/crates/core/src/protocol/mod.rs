//! Forward experiments: states, schedules, measurements, feedback, and the
//! time grid they are discretized on.

pub mod config;
pub mod feedback;
pub mod history;
pub mod presets;
pub mod reversed;
pub mod schedule;

use std::sync::{Arc, OnceLock};

use crate::channel::{ChannelSet, JumpChannel};
use crate::error::{Error, Result};
use crate::evolve::{lindblad_generator, no_event_kraus, Superoperator};
use crate::kraus::KrausSet;
use crate::linalg::{ComplexMatrix, StateVector, MAX_DIM};
use crate::reversal::TimeReversal;
use crate::state::{thermal_state, DensityMatrix, Spectrum, Tolerances};

pub use feedback::{ControlTable, FeedbackRule, OutcomeKey};
pub use history::{Outcome, OutcomeHistory};
pub use reversed::{reverse_protocol, ReversedEvent, ReversedProtocol};
pub use schedule::{Drive, Schedule, Window};

/// Default cap on the total event probability of one grid step.
pub const DEFAULT_STEP_CAP: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub enum InitialSpec {
    /// Gibbs state of H(0).
    Thermal,
    Matrix(ComplexMatrix),
    Pure(StateVector),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ReferenceSpec {
    /// Gibbs state of H(τ).
    ThermalFinal,
    /// The ensemble-averaged final state of the forward run.
    AverageFinal,
    Explicit(ComplexMatrix),
}

#[derive(Clone, Debug)]
pub struct MeasurementEvent {
    pub time: f64,
    pub kraus: KrausSet,
}

/// Continuously monitored jump operators; a click with label y happens with
/// probability rate·⟨M_y†M_y⟩·dt per step.
#[derive(Clone, Debug)]
pub struct Monitor {
    pub rate: f64,
    pub kraus: KrausSet,
}

impl Monitor {
    /// rate·Σ M_y†M_y
    pub fn damping(&self) -> ComplexMatrix {
        let d = self.kraus.dim();
        let mut g = ComplexMatrix::zeros(d);
        for m in self.kraus.operators() {
            g += &(&m.adjoint() * m);
        }
        g.scale_real(self.rate)
    }
}

#[derive(Clone, Debug)]
pub enum Mode {
    Discrete(Vec<MeasurementEvent>),
    Continuous(Monitor),
}

/// Grid points 0 = t_0 < … < t_N = τ containing every measurement time.
#[derive(Clone, Debug)]
pub struct TimeGrid {
    times: Vec<f64>,
    /// grid index → discrete event index
    event_at: Vec<Option<usize>>,
}

impl TimeGrid {
    fn build(tau: f64, dt: f64, event_times: &[f64]) -> Self {
        let mut cuts = vec![0.0];
        cuts.extend_from_slice(event_times);
        cuts.push(tau);
        let mut times = vec![0.0];
        let mut event_at = vec![None];
        for (seg, w) in cuts.windows(2).enumerate() {
            let len = w[1] - w[0];
            let n = if len <= 0.0 { 0 } else { ((len / dt) - 1e-9).ceil().max(1.0) as usize };
            for i in 1..=n {
                times.push(if i == n { w[1] } else { w[0] + len * i as f64 / n as f64 });
                event_at.push(None);
            }
            if seg < event_times.len() {
                *event_at.last_mut().unwrap() = Some(seg);
            }
        }
        TimeGrid { times, event_at }
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn t(&self, k: usize) -> f64 {
        self.times[k]
    }

    pub fn dt(&self, k: usize) -> f64 {
        self.times[k + 1] - self.times[k]
    }

    pub fn mid(&self, k: usize) -> f64 {
        0.5 * (self.times[k] + self.times[k + 1])
    }

    /// Discrete event scheduled at grid point k, if any.
    pub fn event_at(&self, k: usize) -> Option<usize> {
        self.event_at[k]
    }
}

/// Controls resolved for one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct Controls {
    pub hamiltonian: ComplexMatrix,
    /// Rate multiplier per channel (0 = off).
    pub scales: Vec<f64>,
}

/// Everything one grid step needs, computed once per distinct control value.
#[derive(Debug)]
pub(crate) struct StepOps {
    pub no_event: ComplexMatrix,
    /// (channel, √(dt·s)·L_j, dt·s·L_j†L_j), active channels only.
    pub jumps: Vec<(usize, ComplexMatrix, ComplexMatrix)>,
    /// √(dt·rate)·M_y and its dt·rate·M_y†M_y (continuous mode).
    pub detections: Vec<(ComplexMatrix, ComplexMatrix)>,
    /// Σ q_j J_j†J_j: expected heat of the step is Tr(heat ρ).
    pub heat: ComplexMatrix,
    pub rev_no_event: ComplexMatrix,
    /// Θ J_{j̃} Θ⁻¹, aligned with `jumps`.
    pub rev_jumps: Vec<ComplexMatrix>,
    /// No-detection maps as superoperators.
    pub fwd_map: Superoperator,
    pub rev_map: Superoperator,
}

/// The Liouvillian exponentials of one grid step.
#[derive(Debug)]
pub(crate) struct LindbladOps {
    pub fwd: Superoperator,
    pub fwd_integral: Superoperator,
    /// Σ q_j s_j L_j†L_j: heat current is Tr(rate ρ(t)).
    pub heat_rate: ComplexMatrix,
    pub rev: Superoperator,
}

pub struct Protocol {
    name: String,
    dim: usize,
    beta: f64,
    tau: f64,
    dt: f64,
    grid: TimeGrid,
    initial: DensityMatrix,
    initial_spectrum: Spectrum,
    reference_spec: ReferenceSpec,
    reference: DensityMatrix,
    reference_spectrum: Spectrum,
    channels: ChannelSet,
    mode: Mode,
    feedback: Arc<dyn FeedbackRule>,
    theta: TimeReversal,
    tolerances: Tolerances,
    step_cap: f64,
    steps: OnceLock<Vec<Arc<StepOps>>>,
    lindblad: OnceLock<Vec<Arc<LindbladOps>>>,
}

impl std::fmt::Debug for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Protocol")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("beta", &self.beta)
            .field("tau", &self.tau)
            .field("steps", &self.grid.steps())
            .field("mode", &self.mode)
            .finish()
    }
}

impl Protocol {
    pub fn builder(dim: usize, beta: f64, tau: f64) -> ProtocolBuilder {
        ProtocolBuilder::new(dim, beta, tau)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    pub fn initial(&self) -> &DensityMatrix {
        &self.initial
    }
    pub fn initial_spectrum(&self) -> &Spectrum {
        &self.initial_spectrum
    }
    pub fn reference_spec(&self) -> &ReferenceSpec {
        &self.reference_spec
    }
    pub fn reference(&self) -> &DensityMatrix {
        &self.reference
    }
    pub fn reference_spectrum(&self) -> &Spectrum {
        &self.reference_spectrum
    }
    pub fn channels(&self) -> &ChannelSet {
        &self.channels
    }
    pub fn mode(&self) -> &Mode {
        &self.mode
    }
    pub fn feedback(&self) -> &Arc<dyn FeedbackRule> {
        &self.feedback
    }
    pub fn theta(&self) -> &TimeReversal {
        &self.theta
    }
    pub fn tolerances(&self) -> &Tolerances {
        &self.tolerances
    }
    pub fn step_cap(&self) -> f64 {
        self.step_cap
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.mode, Mode::Continuous(_))
    }

    pub fn events(&self) -> &[MeasurementEvent] {
        match &self.mode {
            Mode::Discrete(e) => e,
            Mode::Continuous(_) => &[],
        }
    }

    pub fn monitor(&self) -> Option<&Monitor> {
        match &self.mode {
            Mode::Continuous(m) => Some(m),
            Mode::Discrete(_) => None,
        }
    }

    /// Hamiltonian and channel scales at `t`, from the records before `t`.
    pub fn resolve_controls(&self, history: &[Outcome], t: f64) -> Result<Controls> {
        if !(0.0..=self.tau).contains(&t) {
            return Err(Error::UnreachableHistory(format!("time {t} outside [0, {}]", self.tau)));
        }
        let prefix = history::prefix_before(history, t);
        self.check_prefix(prefix)?;
        Ok(self.controls_unchecked(prefix, t))
    }

    fn controls_unchecked(&self, prefix: &[Outcome], t: f64) -> Controls {
        let hamiltonian = self.feedback.hamiltonian(prefix, t);
        let scales = (0..self.channels.len()).map(|j| self.feedback.channel_scale(prefix, t, j)).collect();
        Controls { hamiltonian, scales }
    }

    fn check_prefix(&self, prefix: &[Outcome]) -> Result<()> {
        match &self.mode {
            Mode::Discrete(events) => {
                if prefix.len() > events.len() {
                    return Err(Error::UnreachableHistory(format!("{} outcomes for {} measurements", prefix.len(), events.len())));
                }
                for (n, o) in prefix.iter().enumerate() {
                    let ev = &events[n];
                    if o.event != n || o.outcome >= ev.kraus.len() || (o.time - ev.time).abs() > 1e-12 {
                        return Err(Error::UnreachableHistory(format!("record {n} does not match measurement {n} at t = {}", ev.time)));
                    }
                }
            }
            Mode::Continuous(m) => {
                for (n, o) in prefix.iter().enumerate() {
                    if o.event != n || o.outcome >= m.kraus.len() {
                        return Err(Error::UnreachableHistory(format!("detection record {n} is malformed")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Checks that `history` is a complete record this protocol can produce.
    pub fn check_history(&self, history: &OutcomeHistory) -> Result<()> {
        self.check_prefix(history.entries())?;
        if let Mode::Discrete(events) = &self.mode {
            if history.len() != events.len() {
                return Err(Error::UnreachableHistory(format!("{} outcomes for {} measurements", history.len(), events.len())));
            }
        } else {
            let grid = self.grid.times();
            for o in history.entries() {
                let k = grid.partition_point(|&s| s < o.time - 1e-12);
                if k == 0 || k >= grid.len() || (grid[k] - o.time).abs() > 1e-9 {
                    return Err(Error::UnreachableHistory(format!("detection at t = {} is not on the time grid", o.time)));
                }
            }
        }
        Ok(())
    }

    /// Feedback unitary after the last record of `history`.
    pub fn feedback_unitary(&self, history: &[Outcome]) -> Option<ComplexMatrix> {
        self.feedback.unitary(history)
    }

    /// V·M for the last record (discrete events) or V·√(rate·dt)·M
    /// (continuous detections, `dt` the step length).
    pub(crate) fn record_operator(&self, history: &[Outcome], dt: f64) -> ComplexMatrix {
        let last = history.last().expect("non-empty record");
        let m = match &self.mode {
            Mode::Discrete(events) => events[last.event].kraus.operator(last.outcome).clone(),
            Mode::Continuous(mon) => mon.kraus.operator(last.outcome).scale_real((mon.rate * dt).sqrt()),
        };
        match self.feedback.unitary(history) {
            Some(v) => &v * &m,
            None => m,
        }
    }

    /// All complete outcome records of a discrete protocol, in lexicographic
    /// order of outcome indices.
    pub fn outcome_records(&self) -> Result<Vec<OutcomeHistory>> {
        let events = match &self.mode {
            Mode::Discrete(e) => e,
            Mode::Continuous(_) => return Err(Error::Unsupported("outcome records are not enumerable in continuous mode".into())),
        };
        let mut out = vec![OutcomeHistory::new()];
        for (n, ev) in events.iter().enumerate() {
            let mut next = Vec::with_capacity(out.len() * ev.kraus.len());
            for h in &out {
                for y in 0..ev.kraus.len() {
                    let mut h2 = h.clone();
                    h2.push(Outcome { time: ev.time, event: n, outcome: y })?;
                    next.push(h2);
                }
            }
            out = next;
        }
        Ok(out)
    }

    fn step_ops(&self, controls: &Controls, dt: f64, t: f64) -> Result<StepOps> {
        let d = self.dim;
        let mut g = ComplexMatrix::zeros(d);
        let mut jumps = Vec::new();
        let mut heat = ComplexMatrix::zeros(d);
        for (j, &s) in controls.scales.iter().enumerate() {
            if s <= 0.0 {
                continue;
            }
            let op = self.channels.get(j).operator.scale_real((s * dt).sqrt());
            let rate = &op.adjoint() * &op;
            g += &rate;
            heat += &rate.scale_real(self.channels.get(j).heat);
            jumps.push((j, op, rate));
        }
        let mut detections = Vec::new();
        if let Mode::Continuous(mon) = &self.mode {
            for m in mon.kraus.operators() {
                let op = m.scale_real((mon.rate * dt).sqrt());
                let rate = &op.adjoint() * &op;
                g += &rate;
                detections.push((op, rate));
            }
        }
        let worst = if g.max_abs() == 0.0 { 0.0 } else { g.hermitian_part().eigh()?.values[0] };
        if worst > self.step_cap * (1.0 + 1e-12) {
            return Err(Error::StepTooLarge { time: t, probability: worst, cap: self.step_cap });
        }
        let no_event = no_event_kraus(&controls.hamiltonian, &g.scale_real(1.0 / dt), dt)?;
        let theta = &self.theta;
        let rev_no_event = theta.apply(&no_event.adjoint());
        let mut rev_jumps = Vec::with_capacity(jumps.len());
        for (j, _, _) in &jumps {
            let p = self.channels.partner(*j);
            let sp = controls.scales[p];
            if (sp - controls.scales[*j]).abs() > 1e-12 {
                return Err(Error::DetailedBalance {
                    channel: self.channels.get(*j).label.clone(),
                    residual: (sp - controls.scales[*j]).abs(),
                });
            }
            rev_jumps.push(theta.apply(&self.channels.get(p).operator.scale_real((sp * dt).sqrt())));
        }
        let mut fwd_map = Superoperator::conjugation(&no_event);
        for (_, op, _) in &jumps {
            fwd_map = fwd_map.add(&Superoperator::conjugation(op));
        }
        let mut rev_map = Superoperator::conjugation(&rev_no_event);
        for op in &rev_jumps {
            rev_map = rev_map.add(&Superoperator::conjugation(op));
        }
        Ok(StepOps {
            no_event,
            jumps,
            detections,
            heat,
            rev_no_event,
            rev_jumps,
            fwd_map,
            rev_map,
        })
    }

    fn lindblad_ops(&self, controls: &Controls, dt: f64) -> LindbladOps {
        let d = self.dim;
        let mut ops = Vec::new();
        let mut rev_ops = Vec::new();
        let mut heat_rate = ComplexMatrix::zeros(d);
        for (j, &s) in controls.scales.iter().enumerate() {
            if s <= 0.0 {
                continue;
            }
            let ch = self.channels.get(j);
            let op = ch.operator.scale_real(s.sqrt());
            heat_rate += &(&op.adjoint() * &op).scale_real(ch.heat);
            rev_ops.push(self.theta.apply(&op));
            ops.push(op);
        }
        let damping = self.monitor().map(|m| m.damping());
        let refs: Vec<&ComplexMatrix> = ops.iter().collect();
        let gen = lindblad_generator(&controls.hamiltonian, &refs, damping.as_ref());
        let rev_refs: Vec<&ComplexMatrix> = rev_ops.iter().collect();
        let rev_damping = damping.as_ref().map(|g| self.theta.apply(g));
        let rev_gen = lindblad_generator(&self.theta.apply(&controls.hamiltonian), &rev_refs, rev_damping.as_ref());
        let (fwd, fwd_integral) = gen.exp_with_integral(dt);
        LindbladOps { fwd, fwd_integral, heat_rate, rev: rev_gen.exp(dt) }
    }

    fn build_step_cache<T>(&self, make: impl Fn(&Controls, f64, f64) -> Result<T>) -> Result<Vec<Arc<T>>> {
        let mut out: Vec<Arc<T>> = Vec::with_capacity(self.grid.steps());
        let mut last: Option<(Controls, f64)> = None;
        for k in 0..self.grid.steps() {
            let t = self.grid.mid(k);
            let dt = self.grid.dt(k);
            let controls = self.controls_unchecked(&[], t);
            if let Some((prev, prev_dt)) = &last {
                if *prev == controls && (prev_dt - dt).abs() <= 1e-14 * dt {
                    let again = out.last().unwrap().clone();
                    out.push(again);
                    continue;
                }
            }
            out.push(Arc::new(make(&controls, dt, t)?));
            last = Some((controls, dt));
        }
        Ok(out)
    }

    /// Operators of grid step k under the records in `history`.
    pub(crate) fn step(&self, history: &[Outcome], k: usize) -> Result<Arc<StepOps>> {
        if self.feedback.history_independent() {
            if let Some(cache) = self.steps.get() {
                return Ok(cache[k].clone());
            }
            let built = self.build_step_cache(|c, dt, t| self.step_ops(c, dt, t))?;
            let _ = self.steps.set(built);
            return Ok(self.steps.get().unwrap()[k].clone());
        }
        let t = self.grid.mid(k);
        let prefix = history::prefix_before(history, t);
        let controls = self.controls_unchecked(prefix, t);
        Ok(Arc::new(self.step_ops(&controls, self.grid.dt(k), t)?))
    }

    pub(crate) fn lindblad_step(&self, history: &[Outcome], k: usize) -> Arc<LindbladOps> {
        if self.feedback.history_independent() {
            let cache = self.lindblad.get_or_init(|| {
                self.build_step_cache(|c, dt, _| Ok(self.lindblad_ops(c, dt))).expect("infallible")
            });
            return cache[k].clone();
        }
        let t = self.grid.mid(k);
        let prefix = history::prefix_before(history, t);
        let controls = self.controls_unchecked(prefix, t);
        Arc::new(self.lindblad_ops(&controls, self.grid.dt(k)))
    }

    /// Checks the event-probability cap on every step (history-independent
    /// controls) so that misconfigured grids fail before any sampling.
    fn precheck_steps(&self) -> Result<()> {
        if self.feedback.history_independent() {
            self.step(&[], 0).map(|_| ())?;
        }
        Ok(())
    }
}

/// Programmatic construction of a [`Protocol`].
#[derive(Clone)]
pub struct ProtocolBuilder {
    name: String,
    dim: usize,
    beta: f64,
    tau: f64,
    dt: Option<f64>,
    initial: InitialSpec,
    reference: ReferenceSpec,
    table: ControlTable,
    channels: Vec<JumpChannel>,
    events: Vec<MeasurementEvent>,
    monitor: Option<Monitor>,
    rule: Option<Arc<dyn FeedbackRule>>,
    theta: TimeReversal,
    tolerances: Tolerances,
    step_cap: f64,
}

impl ProtocolBuilder {
    pub fn new(dim: usize, beta: f64, tau: f64) -> Self {
        ProtocolBuilder {
            name: "protocol".into(),
            dim,
            beta,
            tau,
            dt: None,
            initial: InitialSpec::Thermal,
            reference: ReferenceSpec::ThermalFinal,
            table: ControlTable::new(Schedule::new(dim.max(1)), 0),
            channels: Vec::new(),
            events: Vec::new(),
            monitor: None,
            rule: None,
            theta: TimeReversal::standard(),
            tolerances: Tolerances::default(),
            step_cap: DEFAULT_STEP_CAP,
        }
    }

    pub fn name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn initial(mut self, spec: InitialSpec) -> Self {
        self.initial = spec;
        self
    }

    pub fn reference(mut self, spec: ReferenceSpec) -> Self {
        self.reference = spec;
        self
    }

    pub fn hamiltonian(mut self, schedule: Schedule) -> Self {
        self.table.base = schedule;
        self
    }

    /// Hamiltonian used after the latest record matches `key`.
    pub fn hamiltonian_after(mut self, key: OutcomeKey, schedule: Schedule) -> Self {
        self.table.overrides.push((key, schedule));
        self
    }

    pub fn channel(mut self, ch: JumpChannel, windows: Vec<Window>) -> Self {
        self.channels.push(ch);
        self.table.windows.push(windows);
        self
    }

    pub fn channels(mut self, chs: Vec<JumpChannel>, windows: Vec<Window>) -> Self {
        for ch in chs {
            self = self.channel(ch, windows.clone());
        }
        self
    }

    pub fn measurement(mut self, time: f64, kraus: KrausSet) -> Self {
        self.events.push(MeasurementEvent { time, kraus });
        self
    }

    pub fn monitor(mut self, rate: f64, kraus: KrausSet) -> Self {
        self.monitor = Some(Monitor { rate, kraus });
        self
    }

    /// Unitary applied right after a record matching `key`.
    pub fn feedback_unitary(mut self, key: OutcomeKey, u: ComplexMatrix) -> Self {
        self.table.unitaries.push((key, u));
        self
    }

    /// Replaces the table-driven controls with a custom rule.
    pub fn feedback_rule(mut self, rule: Arc<dyn FeedbackRule>) -> Self {
        self.rule = Some(rule);
        self
    }

    pub fn time_reversal(mut self, theta: TimeReversal) -> Self {
        self.theta = theta;
        self
    }

    pub fn tolerances(mut self, tol: Tolerances) -> Self {
        self.tolerances = tol;
        self
    }

    pub fn step_cap(mut self, cap: f64) -> Self {
        self.step_cap = cap;
        self
    }

    pub fn build(self) -> Result<Protocol> {
        let d = self.dim;
        if d == 0 || d > MAX_DIM {
            return Err(Error::config("dim", format!("dimension {d} outside 1..={MAX_DIM}")));
        }
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(Error::config("beta", "inverse temperature must be finite and ≥ 0"));
        }
        if !self.tau.is_finite() || self.tau < 0.0 {
            return Err(Error::config("tau", "duration must be finite and ≥ 0"));
        }
        let dt = self.dt.unwrap_or(if self.tau > 0.0 { self.tau / 1000.0 } else { 1.0 });
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::config("dt", "time step must be positive"));
        }
        if !(self.step_cap > 0.0 && self.step_cap <= 1.0) {
            return Err(Error::config("step_cap", "event-probability cap must lie in (0, 1]"));
        }
        if self.table.base.dim() != d {
            return Err(Error::config("hamiltonian", format!("dimension {} vs system dim {d}", self.table.base.dim())));
        }
        for (_, s) in &self.table.overrides {
            if s.dim() != d {
                return Err(Error::config("hamiltonian_after_outcome", "dimension mismatch"));
            }
        }
        if self.theta.basis().is_none() {
            let imag = std::iter::once(&self.table.base)
                .chain(self.table.overrides.iter().map(|(_, s)| s))
                .map(|s| s.imaginary_magnitude())
                .fold(0.0, f64::max);
            if imag > 0.0 {
                return Err(Error::TimeReversal(
                    "Hamiltonian has complex entries; declare a conjugation basis for the time reversal".into(),
                ));
            }
        } else if self.theta.basis().unwrap().dim() != d {
            return Err(Error::config("time_reversal", "basis dimension mismatch"));
        }
        let channels = ChannelSet::new(self.channels.clone(), self.beta, d, &self.tolerances)?;
        for j in 0..channels.len() {
            let p = channels.partner(j);
            if self.rule.is_none() && self.table.windows[j] != self.table.windows[p] {
                return Err(Error::config(
                    format!("channels.{}", channels.get(j).label),
                    "a channel and its partner must share their activity windows",
                ));
            }
        }
        for (key, u) in &self.table.unitaries {
            check_unitary(u, d, &format!("feedback unitary for outcome {}", key.outcome))?;
        }
        let mode = match (self.monitor, self.events.is_empty()) {
            (Some(_), false) => {
                return Err(Error::config("mode", "a protocol is either discrete or continuous, not both"));
            }
            (Some(m), true) => {
                if !(m.rate >= 0.0) || !m.rate.is_finite() {
                    return Err(Error::config("mode.continuous.rate", "monitoring rate must be finite and ≥ 0"));
                }
                if m.kraus.dim() != d {
                    return Err(Error::config("mode.continuous.monitor", "dimension mismatch"));
                }
                Mode::Continuous(m)
            }
            (None, _) => {
                let mut prev = 0.0;
                for (n, ev) in self.events.iter().enumerate() {
                    if !(ev.time > prev && ev.time < self.tau) && !(n == 0 && ev.time > 0.0 && ev.time < self.tau) {
                        return Err(Error::config(
                            format!("mode.discrete.events[{n}]"),
                            format!("measurement time {} must lie in (0, τ) and increase", ev.time),
                        ));
                    }
                    if ev.kraus.dim() != d {
                        return Err(Error::config(format!("mode.discrete.events[{n}]"), "Kraus dimension mismatch"));
                    }
                    prev = ev.time;
                }
                Mode::Discrete(self.events)
            }
        };
        let feedback: Arc<dyn FeedbackRule> = match self.rule {
            Some(r) => r,
            None => Arc::new(self.table),
        };
        let event_times: Vec<f64> = match &mode {
            Mode::Discrete(e) => e.iter().map(|e| e.time).collect(),
            Mode::Continuous(_) => Vec::new(),
        };
        let grid = TimeGrid::build(self.tau, dt, &event_times);

        let initial = match &self.initial {
            InitialSpec::Thermal => thermal_state(&feedback.hamiltonian(&[], 0.0), self.beta)?.density,
            InitialSpec::Matrix(m) => {
                DensityMatrix::new(m.clone(), &self.tolerances).map_err(|e| Error::config("initial_state", e.to_string()))?
            }
            InitialSpec::Pure(v) => DensityMatrix::pure(v),
        };
        if initial.dim() != d {
            return Err(Error::config("initial_state", "dimension mismatch"));
        }
        let initial_spectrum = initial.spectrum();

        let mut protocol = Protocol {
            name: self.name,
            dim: d,
            beta: self.beta,
            tau: self.tau,
            dt,
            grid,
            initial_spectrum,
            initial: initial.clone(),
            reference_spec: self.reference.clone(),
            reference: initial.clone(),
            reference_spectrum: initial.spectrum(),
            channels,
            mode,
            feedback,
            theta: self.theta,
            tolerances: self.tolerances,
            step_cap: self.step_cap,
            steps: OnceLock::new(),
            lindblad: OnceLock::new(),
        };
        protocol.precheck_steps()?;
        let reference = match &self.reference {
            ReferenceSpec::ThermalFinal => thermal_state(&protocol.feedback.hamiltonian(&[], protocol.tau), protocol.beta)?.density,
            ReferenceSpec::Explicit(m) => {
                DensityMatrix::new(m.clone(), &protocol.tolerances).map_err(|e| Error::config("reference_state", e.to_string()))?
            }
            ReferenceSpec::AverageFinal => {
                if protocol.is_continuous() {
                    return Err(Error::config("reference_state", "average-final reference needs a discrete protocol"));
                }
                crate::propagate::average_final_state(&protocol)?
            }
        };
        if reference.dim() != d {
            return Err(Error::config("reference_state", "dimension mismatch"));
        }
        protocol.reference_spectrum = reference.spectrum();
        protocol.reference = reference;
        Ok(protocol)
    }
}

pub(crate) fn check_unitary(u: &ComplexMatrix, d: usize, what: &str) -> Result<()> {
    if u.dim() != d {
        return Err(Error::config(what, format!("dimension {} vs system dim {d}", u.dim())));
    }
    let r = (&(&u.adjoint() * u) - &ComplexMatrix::identity(d)).frobenius_norm();
    if r > 1e-10 {
        return Err(Error::config(what, format!("not unitary (residual {r:.2e})")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_contains_event_times() {
        let g = TimeGrid::build(2.0, 0.3, &[0.5, 1.25]);
        assert!(g.times().contains(&0.5) && g.times().contains(&1.25));
        assert_eq!(*g.times().last().unwrap(), 2.0);
        assert!((0..g.steps()).all(|k| g.dt(k) <= 0.3 + 1e-12));
        let k = g.times().iter().position(|&t| t == 0.5).unwrap();
        assert_eq!(g.event_at(k), Some(0));
        assert_eq!(g.event_at(0), None);
    }

    #[test]
    fn uniform_grid() {
        let g = TimeGrid::build(10.0, 0.01, &[]);
        assert_eq!(g.steps(), 1000);
        let zero = TimeGrid::build(0.0, 0.01, &[]);
        assert_eq!(zero.steps(), 0);
    }
}
