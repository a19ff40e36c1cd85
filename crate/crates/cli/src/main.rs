use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ftlab::backward::postselection_simulate;
use ftlab::propagate::Propagation;
use ftlab::protocol::config::ConfigDocument;
use ftlab::protocol::presets::Variant;
use ftlab::sweep::{self, format_number, RunOptions, Source, SweepRow, SweepSpec};
use ftlab::trajectory::{run_batch, write_jsonl, BatchOptions};
use ftlab::verify::{verify_dilated, verify_document, CheckKind, VerifyOptions, VerifyReport};
use ftlab::{bundled, Error};

mod tables;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_STATISTICAL: u8 = 4;
const ABS_SLACK: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "ftlab", version, about = "Fluctuation-theorem experiments for measured and feedback-controlled quantum systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep a discrete-measurement protocol: exact and sampled averages per grid point (CSV).
    RunDiscrete(RunArgs),
    /// Sweep a continuously monitored protocol: sampled averages per grid point (CSV).
    RunContinuous {
        #[command(flatten)]
        run: RunArgs,
        /// Also estimate the transfer entropy along every record (slow).
        #[arg(long)]
        transfer_entropy: bool,
    },
    /// Audit protocols: POVM completeness, detailed balance, microreversibility, fluctuation theorems.
    Verify(VerifyArgs),
    /// Write the grouped-trajectory tables of the qubit feedback protocols (CSV).
    VerifyTables(TableArgs),
    /// Sample trajectories and dump them as JSON lines.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        n_traj: u64,
    },
    /// Run the postselected backward experiment of a discrete protocol (CSV).
    Postselect {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        n_traj: u64,
        #[arg(long, default_value_t = 4.0)]
        z_limit: f64,
    },
    /// List the bundled protocol documents.
    Configs,
}

#[derive(Args)]
struct Common {
    /// Bundled config name (see `ftlab configs`) or path to a JSON document.
    #[arg(long)]
    config: String,
    /// Override a declared parameter; repeatable.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    set: Vec<String>,
    #[arg(long, env = "FTLAB_SEED")]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "FTLAB_THREADS")]
    threads: Option<usize>,
    /// Override the time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// `name=v1,v2,…` or `name=start:stop:points`; defaults to the document's sweep.
    #[arg(long)]
    sweep: Option<String>,
    /// Trajectories per grid point.
    #[arg(long)]
    n_traj: Option<u64>,
    /// Largest tolerated |z| of ⟨e^{−(σ−σ_cg)}⟩ − 1 on sampled rows.
    #[arg(long, default_value_t = 4.0)]
    z_limit: f64,
}

#[derive(Args)]
struct VerifyArgs {
    /// Documents to audit; all bundled ones when omitted. Repeatable.
    #[arg(long)]
    config: Vec<String>,
    #[arg(long = "set", value_name = "NAME=VALUE")]
    set: Vec<String>,
    #[arg(long, default_value_t = 2000)]
    n_traj: u64,
    #[arg(long, env = "FTLAB_SEED", default_value_t = 1)]
    seed: u64,
    #[arg(long, env = "FTLAB_THREADS")]
    threads: Option<usize>,
    /// Random couplings for the dilated system ⊗ reservoir check.
    #[arg(long, default_value_t = 10)]
    dilated_seeds: u64,
    /// Skip the dilated check.
    #[arg(long)]
    no_dilated: bool,
    /// Emit the reports as JSON instead of text.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Table {
    /// One energy-basis measurement.
    Classical,
    /// One coherence-basis measurement.
    Quantum,
    /// Two measurements with a partial thermalization in between (96 rows).
    Two,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long, value_enum)]
    table: Table,
    /// Readout of the two-measurement table.
    #[arg(long, default_value = "classical")]
    variant: Variant,
    #[arg(long, default_value_t = 1.0)]
    beta_omega: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa_dt: f64,
    /// Phase ωΔt accumulated between the measurements (default: κΔt, i.e. ω = κ).
    #[arg(long)]
    omega_dt: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: if e.is_config() { EXIT_CONFIG } else { EXIT_NUMERIC }, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure { code: EXIT_NUMERIC, message: format!("i/o error: {e}") }
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure { code: EXIT_NUMERIC, message: format!("csv: {e}") }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::RunDiscrete(a) => run(a, false, false),
        Command::RunContinuous { run: a, transfer_entropy } => run(a, true, transfer_entropy),
        Command::Verify(a) => verify(a),
        Command::VerifyTables(a) => tables::write(&a),
        Command::Simulate { common, n_traj } => simulate(common, n_traj),
        Command::Postselect { common, n_traj, z_limit } => postselect(common, n_traj, z_limit),
        Command::Configs => {
            for n in bundled::names() {
                println!("{n}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load(config: &str, set: &[String]) -> Result<ConfigDocument, Error> {
    let mut doc = if Path::new(config).exists() { ConfigDocument::from_path(config)? } else { bundled::document(config)? };
    for s in set {
        let (name, value) =
            s.split_once('=').ok_or_else(|| Error::config("--set", format!("expected NAME=VALUE, got `{s}`")))?;
        let v: f64 =
            value.trim().parse().map_err(|_| Error::config("--set", format!("`{value}` is not a number")))?;
        doc.set_parameter(name.trim(), v)?;
    }
    Ok(doc)
}

fn output(out: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(a: RunArgs, continuous: bool, transfer_entropy: bool) -> CmdResult {
    let c = &a.common;
    let doc = load(&c.config, &c.set)?;
    let mut spec = match (&a.sweep, doc.sweep()?) {
        (Some(text), declared) => {
            // a grid override keeps the document's counts
            let (parameter, values) = SweepSpec::parse_grid(text)?;
            let (n_traj, seed) = declared.map_or((sweep::DEFAULT_TRAJECTORIES, sweep::DEFAULT_SEED), |d| (d.n_traj, d.seed));
            SweepSpec { parameter, values, n_traj, seed }
        }
        (None, Some(s)) => s,
        (None, None) => return Err(Error::config("--sweep", "the document declares no sweep; pass --sweep").into()),
    };
    if let Some(n) = a.n_traj {
        spec.n_traj = n;
    }
    if let Some(s) = c.seed {
        spec.seed = s;
    }
    spec.validate()?;
    if doc.is_continuous() != continuous {
        let want = if continuous { "run-continuous needs a continuous-mode document" } else { "run-discrete needs a discrete-mode document" };
        return Err(Error::config("mode.type", want).into());
    }
    let opts = RunOptions { threads: c.threads, dt: c.dt, transfer_entropy };
    let rows = if continuous { sweep::run_continuous(&doc, &spec, &opts)? } else { sweep::run_discrete(&doc, &spec, &opts)? };
    let mut probe = doc.clone();
    probe.set_parameter(&spec.parameter, spec.values[0])?;
    let info = sweep::information_label(&probe.build()?);
    let mut out = output(&c.out)?;
    sweep::write_csv(&mut out, &spec.parameter, info, &rows)?;
    out.flush()?;
    check_rows(&spec.parameter, &rows, a.z_limit)
}

/// Sampled rows must reproduce ⟨e^{−(σ−σ_cg)}⟩ = 1 within `z_limit` SE.
fn check_rows(parameter: &str, rows: &[SweepRow], z_limit: f64) -> CmdResult {
    let mut bad = Vec::new();
    for r in rows.iter().filter(|r| r.source == Source::Sampled && r.samples > 1) {
        let e = r.exp_neg_sigma_minus_cg;
        // records that pin σ = σ_cg give zero spread; allow rounding
        if (e.mean - 1.0).abs() <= ABS_SLACK {
            continue;
        }
        let z = e.z(1.0);
        if !(z.abs() <= z_limit) {
            bad.push(format!("{parameter} = {}: ⟨e^(−(σ−σcg))⟩ = {:.5} ± {:.5} (z = {z:.2})", r.parameter, r.exp_neg_sigma_minus_cg.mean, r.exp_neg_sigma_minus_cg.se));
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure { code: EXIT_STATISTICAL, message: format!("fluctuation theorem outside {z_limit} SE:\n  {}", bad.join("\n  ")) })
    }
}

fn print_report(out: &mut dyn Write, r: &VerifyReport) -> io::Result<()> {
    writeln!(out, "== {}", r.subject)?;
    for c in &r.checks {
        let kind = match c.kind {
            CheckKind::Invariant => "residual",
            CheckKind::Statistical => "|z|",
        };
        writeln!(
            out,
            "{} {:<26} {kind} {:.3e} (limit {:.1e})  {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance,
            c.detail
        )?;
    }
    Ok(())
}

fn verify(a: VerifyArgs) -> CmdResult {
    let names: Vec<String> = if a.config.is_empty() { bundled::names().map(String::from).collect() } else { a.config.clone() };
    let opts = VerifyOptions { n_traj: a.n_traj, seed: a.seed, threads: a.threads, ..Default::default() };
    let mut reports = Vec::new();
    for n in &names {
        reports.push(verify_document(&load(n, &a.set)?, &opts)?);
    }
    if !a.no_dilated {
        reports.push(verify_dilated(a.dilated_seeds)?);
    }
    let mut out = output(&a.out)?;
    if a.json {
        serde_json::to_writer_pretty(&mut out, &reports).map_err(|e| Failure { code: EXIT_NUMERIC, message: e.to_string() })?;
        writeln!(out)?;
    } else {
        for r in &reports {
            print_report(&mut out, r)?;
        }
    }
    out.flush()?;
    let worst = reports.iter().filter_map(|r| r.worst_failure()).min_by_key(|k| match k {
        CheckKind::Invariant => 0,
        CheckKind::Statistical => 1,
    });
    match worst {
        None => Ok(()),
        Some(CheckKind::Invariant) => Err(Failure { code: EXIT_NUMERIC, message: "invariant checks failed".into() }),
        Some(CheckKind::Statistical) => Err(Failure { code: EXIT_STATISTICAL, message: "statistical checks failed".into() }),
    }
}

fn simulate(c: Common, n: u64) -> CmdResult {
    let doc = load(&c.config, &c.set)?;
    let mut b = doc.builder()?;
    if let Some(dt) = c.dt {
        b = b.dt(dt);
    }
    let protocol = b.build()?;
    let records = run_batch(&protocol, n, BatchOptions { seed: c.seed.unwrap_or(sweep::DEFAULT_SEED), threads: c.threads })?;
    let mut out = output(&c.out)?;
    write_jsonl(&mut out, &protocol, &records)?;
    out.flush()?;
    Ok(())
}

fn postselect(c: Common, n: u64, z_limit: f64) -> CmdResult {
    let doc = load(&c.config, &c.set)?;
    let mut b = doc.builder()?;
    if let Some(dt) = c.dt {
        b = b.dt(dt);
    }
    let protocol = b.build()?;
    if protocol.is_continuous() {
        return Err(Error::config("mode.type", "postselect needs a discrete-mode document").into());
    }
    let opts = BatchOptions { seed: c.seed.unwrap_or(sweep::DEFAULT_SEED), threads: c.threads };
    let rows = postselection_simulate(&protocol, n, opts, Propagation::Unraveled)?;
    let mut w = csv::Writer::from_writer(output(&c.out)?);
    w.write_record(["record", "p_forward", "p_tr", "sampled", "accepted", "acceptance", "acceptance_se"])?;
    let mut bad = Vec::new();
    for r in &rows {
        let label: Vec<&str> =
            r.record.entries().iter().map(|o| protocol.events()[o.event].kraus.label(o.outcome)).collect();
        let label = label.join("|");
        w.write_record([
            label.clone(),
            format_number(r.p_forward),
            format_number(r.p_tr),
            r.sampled.to_string(),
            r.accepted.to_string(),
            format_number(r.acceptance()),
            format_number(r.standard_error()),
        ])?;
        let se = r.standard_error();
        if r.sampled > 0 && se > 0.0 && ((r.acceptance() - r.p_tr) / se).abs() > z_limit {
            bad.push(format!("record {label}: acceptance {:.5} vs P_tr {:.5}", r.acceptance(), r.p_tr));
        }
    }
    w.flush()?;
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure { code: EXIT_STATISTICAL, message: format!("acceptance outside {z_limit} SE:\n  {}", bad.join("\n  ")) })
    }
}
