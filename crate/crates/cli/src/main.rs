//! `jackflow`: simulate the Jack chains, their diffusion limits and the
//! limiting ensembles, and run the verification suites.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use jackflow::combinatorics::addable_cells;
use jackflow::ctmc::{batch, rescale_state, state_at, ChainConfig, ChainState, Record};
use jackflow::diffusion::{integrate_batch, SdeConfig, SdeKind};
use jackflow::ensembles::{sample_corners, sample_hermite, EnsembleParams};
use jackflow::jack::{jack_measure, jack_plancherel, jack_principal, single_level_rate};
use jackflow::verify::{run_suite, CriterionOutcome, Suite};
use jackflow::{Error, Partition, ScalingParams};

use config::{load_config, Overrides, RunConfig};
use output::{unix_now, write_json, Field, Manifest, Table};

#[derive(Parser, Debug)]
#[command(
    name = "jackflow",
    version,
    about = "Jack-polynomial particle dynamics and their β-Dyson limits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat TOML file with the same keys as the flags; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: Overrides,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate Jack quantities at --lambda.
    Jack {
        #[command(subcommand)]
        op: JackOp,
    },
    /// Run the single-level or multilevel Jack chain from the empty diagram.
    Chain {
        #[arg(value_enum)]
        kind: Level,
    },
    /// Integrate β-Dyson motion or the multilevel SDE from zero.
    Sde {
        #[arg(value_enum)]
        kind: Level,
    },
    /// Draw from the Hermite ensemble or the corners process.
    Sample {
        #[arg(value_enum)]
        kind: Ensemble,
    },
    /// Run a verification suite: identities, rates, convergence,
    /// intertwining, sde or all.
    Verify { suite: String },
}

#[derive(Subcommand, Debug)]
enum JackOp {
    Eval,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Level {
    #[value(alias = "dyson")]
    Single,
    #[value(alias = "multilevel")]
    Multi,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Ensemble {
    Hermite,
    Corners,
}

/// Failures split by exit code: bad input is 2, everything else 1.
enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidPartition(_)
            | Error::TooManyRows { .. }
            | Error::InvalidPoint(_)
            | Error::OutOfRange(_)
            | Error::Parse(_) => Failure::Usage(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

struct Outcome {
    tables: Vec<Table>,
    notes: Vec<String>,
    reports: Option<Vec<CriterionOutcome>>,
    /// Print the tables rather than write them when no --out is given.
    print_only: bool,
    failed: bool,
}

impl Outcome {
    fn data(tables: Vec<Table>, notes: Vec<String>) -> Self {
        Self {
            tables,
            notes,
            reports: None,
            print_only: false,
            failed: false,
        }
    }
}

const DEFAULT_OUT: &str = "jackflow-out";

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(1),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn init_workers() -> Result<usize, Failure> {
    if let Ok(v) = std::env::var("JACKFLOW_WORKERS") {
        let w: usize = v.parse().ok().filter(|&w| w > 0).ok_or_else(|| {
            Failure::Usage(format!(
                "JACKFLOW_WORKERS must be a positive integer, got '{v}'"
            ))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Failure::Run(format!("cannot start {w} workers: {e}")))?;
    }
    Ok(rayon::current_num_threads())
}

/// Returns whether a verification failed.
fn run(cli: Cli) -> Result<bool, Failure> {
    let cfg = load_config(cli.config.as_deref(), cli.flags).map_err(Failure::Usage)?;
    let workers = init_workers()?;
    let started = unix_now();
    let outcome = match &cli.command {
        Command::Jack { op: JackOp::Eval } => jack_eval(&cfg)?,
        Command::Chain { kind } => chain(&cfg, matches!(kind, Level::Multi))?,
        Command::Sde { kind } => sde(&cfg, matches!(kind, Level::Multi))?,
        Command::Sample { kind } => sample(&cfg, matches!(kind, Ensemble::Corners))?,
        Command::Verify { suite } => verify(&cfg, suite)?,
    };
    let out_dir = match (&cfg.out, outcome.print_only) {
        (Some(d), _) => Some(d.clone()),
        (None, true) => None,
        (None, false) => Some(PathBuf::from(DEFAULT_OUT)),
    };
    match out_dir {
        None => {
            for t in &outcome.tables {
                print_table(t);
            }
        }
        Some(dir) => {
            std::fs::create_dir_all(&dir)
                .map_err(|e| Failure::Run(format!("cannot create {}: {e}", dir.display())))?;
            let mut outputs = Vec::new();
            for t in &outcome.tables {
                outputs.push(t.write(&dir, cfg.format).map_err(Failure::Run)?);
            }
            if let Some(r) = &outcome.reports {
                let path = dir.join("reports.json");
                write_json(&path, r).map_err(Failure::Run)?;
                outputs.push(path);
            }
            let manifest_path = dir.join("manifest.json");
            outputs.push(manifest_path.clone());
            let manifest = Manifest {
                command: std::env::args().collect(),
                config: cfg.clone(),
                seed: cfg.seed,
                workers,
                version: env!("CARGO_PKG_VERSION"),
                started_unix: started,
                finished_unix: unix_now(),
                outputs,
                notes: outcome.notes.clone(),
                reports: outcome.reports.as_ref(),
            };
            write_json(&manifest_path, &manifest).map_err(Failure::Run)?;
        }
    }
    Ok(outcome.failed)
}

fn print_table(t: &Table) {
    println!("{}", t.header.join(","));
    for row in &t.rows {
        let cells: Vec<String> = row
            .iter()
            .map(|f| match f {
                Field::Int(v) => v.to_string(),
                Field::Float(v) => format!("{v:.16e}"),
                Field::Text(s) => s.clone(),
            })
            .collect();
        println!("{}", cells.join(","));
    }
}

fn jack_eval(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let text = cfg
        .lambda
        .as_deref()
        .ok_or_else(|| Failure::Usage("jack eval needs --lambda, e.g. --lambda 3,1".into()))?;
    let lambda: Partition = text.parse()?;
    let (n, theta, s) = (cfg.n, cfg.theta(), cfg.time);
    if lambda.length() > n {
        return Err(Error::TooManyRows {
            diagram: lambda.to_string(),
            level: n,
        }
        .into());
    }
    let mut t = Table::new("jack", &["quantity", "log_value", "value"]);
    let mut push = |name: String, log: f64, value: f64| {
        t.push(vec![
            Field::Text(name),
            Field::Float(log),
            Field::Float(value),
        ]);
    };
    let p = jack_principal(&lambda, n, theta);
    push(format!("J_λ(1^{n})"), p.ln(), p.value());
    let pl = jack_plancherel(&lambda, s, theta);
    push(format!("J_λ(plancherel s={s})"), pl.ln(), pl.value());
    let m = jack_measure(&lambda, n, s, theta);
    push(format!("jack measure N={n} s={s}"), m.ln(), m.value());
    for cell in addable_cells(&lambda, n) {
        let q = single_level_rate(&lambda, cell, n, theta)?;
        push(format!("rate row {}", cell.row), q.ln(), q);
    }
    Ok(Outcome {
        print_only: true,
        ..Outcome::data(vec![t], Vec::new())
    })
}

const SNAPSHOT_HEADER: &[&str] = &["path", "time", "level", "index", "value"];

fn push_levels(t: &mut Table, path: usize, time: f64, levels: &[Vec<f64>], top: usize) {
    // a single stored level is level `top`
    let first = top + 1 - levels.len();
    for (k, lvl) in levels.iter().enumerate() {
        for (i, &v) in lvl.iter().enumerate() {
            t.push(vec![
                Field::Int(path as u64),
                Field::Float(time),
                Field::Int((first + k) as u64),
                Field::Int(i as u64 + 1),
                Field::Float(v),
            ]);
        }
    }
}

fn with_end(mut times: Vec<f64>, end: f64) -> Vec<f64> {
    if times.last() != Some(&end) {
        times.push(end);
    }
    times
}

/// Without --epsilon, --time is chain time and the tables hold the event log
/// and raw row lengths. With it, --time is diffusive time and snapshots are
/// rescaled; no event log is kept.
fn chain(cfg: &RunConfig, multi: bool) -> Result<Outcome, Failure> {
    let theta = cfg.theta();
    let times = with_end(cfg.snapshots.clone(), cfg.time);
    let scaling = cfg
        .epsilon
        .map(|eps| ScalingParams::new(eps, cfg.time, cfg.theta))
        .transpose()?;
    let horizon = scaling.map_or(cfg.time, |s| s.chain_time());
    let base = if multi {
        ChainConfig::multi(cfg.n, theta, horizon, cfg.seed)
    } else {
        ChainConfig::single(cfg.n, theta, horizon, cfg.seed)
    };
    let chain_cfg = match scaling {
        None => base,
        Some(sc) => base.with_snapshots(
            times
                .iter()
                .map(|t| t / (cfg.theta * sc.epsilon()))
                .collect(),
        ),
    };
    let runs = batch(&chain_cfg, cfg.paths, 0)?;
    let mut snaps = Table::new("snapshots", SNAPSHOT_HEADER);
    let mut events = Table::new("events", &["path", "time", "level", "row", "pushed"]);
    for (p, traj) in runs.iter().enumerate() {
        match scaling {
            None => {
                for e in &traj.events {
                    events.push(vec![
                        Field::Int(p as u64),
                        Field::Float(e.time),
                        Field::Int(e.level as u64),
                        Field::Int(e.row as u64),
                        Field::Int(u64::from(e.pushed)),
                    ]);
                }
                for &s in &times {
                    let state = state_at(traj, s)?;
                    push_rows(&mut snaps, p, s, &state, cfg.n);
                }
            }
            Some(sc) => {
                debug_assert!(matches!(traj.config.record, Record::Snapshots(_)));
                for ((_, state), &t) in traj.snapshots.iter().zip(&times) {
                    let y = rescale_state(state, cfg.n, &sc.with_time(t)?)?;
                    push_levels(&mut snaps, p, t, &y.levels(), cfg.n);
                }
            }
        }
    }
    let mut tables = vec![snaps];
    if scaling.is_none() {
        tables.insert(0, events);
    }
    Ok(Outcome::data(tables, Vec::new()))
}

fn push_rows(t: &mut Table, path: usize, time: f64, state: &ChainState, n: usize) {
    let levels: Vec<&Partition> = match state {
        ChainState::Single(l) => vec![l],
        ChainState::Multi(a) => a.levels().iter().collect(),
    };
    let first = n + 1 - levels.len();
    for (k, lvl) in levels.iter().enumerate() {
        let level = first + k;
        for i in 1..=level {
            t.push(vec![
                Field::Int(path as u64),
                Field::Float(time),
                Field::Int(level as u64),
                Field::Int(i as u64),
                Field::Int(u64::from(lvl.row(i))),
            ]);
        }
    }
}

fn sde(cfg: &RunConfig, multi: bool) -> Result<Outcome, Failure> {
    let mut sc = SdeConfig::new(cfg.n, cfg.theta(), cfg.time, cfg.dt, cfg.seed)
        .with_snapshots(cfg.snapshots.clone());
    sc.delta_stop = cfg.delta;
    let kind = if multi {
        SdeKind::Multilevel
    } else {
        SdeKind::Dyson
    };
    let paths = integrate_batch(&sc, kind, cfg.paths, 0)?;
    let mut snaps = Table::new("snapshots", SNAPSHOT_HEADER);
    let mut events = Table::new("events", &["path", "event", "time"]);
    let mut notes: Vec<String> = Vec::new();
    for (p, path) in paths.iter().enumerate() {
        for (t, levels) in &path.snapshots {
            push_levels(&mut snaps, p, *t, levels, cfg.n);
        }
        let s = &path.stopping;
        for (name, time) in [
            ("hat_tau_delta", s.hat_tau_delta),
            ("tau_delta", s.tau_delta),
        ] {
            if let Some(time) = time {
                events.push(vec![
                    Field::Int(p as u64),
                    Field::Text(name.into()),
                    Field::Float(time),
                ]);
            }
        }
        for f in &path.flags {
            if !notes.contains(f) {
                notes.push(f.clone());
            }
        }
    }
    let steps: u64 = paths.iter().map(|p| p.steps).sum();
    let implicit: u64 = paths.iter().map(|p| p.implicit_steps).sum();
    notes.push(format!("{steps} accepted steps, {implicit} drift-implicit"));
    Ok(Outcome::data(vec![events, snaps], notes))
}

fn sample(cfg: &RunConfig, corners: bool) -> Result<Outcome, Failure> {
    let p = EnsembleParams::new(cfg.n, cfg.theta(), cfg.time)?;
    let mut snaps = Table::new("snapshots", SNAPSHOT_HEADER);
    let diagnostics = if corners {
        let s = sample_corners(&p, cfg.paths, cfg.seed)?;
        for (i, c) in s.points.iter().enumerate() {
            push_levels(&mut snaps, i, cfg.time, c.levels(), cfg.n);
        }
        format!("{:?}; degenerate links: {}", s.diagnostics, s.degenerate)
    } else {
        let s = sample_hermite(&p, cfg.paths, cfg.seed)?;
        for (i, w) in s.points.iter().enumerate() {
            push_levels(&mut snaps, i, cfg.time, &[w.coords().to_vec()], cfg.n);
        }
        format!("{:?}", s.diagnostics)
    };
    Ok(Outcome::data(vec![snaps], vec![diagnostics]))
}

fn verify(cfg: &RunConfig, suite: &str) -> Result<Outcome, Failure> {
    let suite: Suite = suite.parse()?;
    let reports = run_suite(suite, cfg.seed, |o| {
        for r in &o.reports {
            println!("    {}", r.summary_line());
        }
        println!("{}", o.summary_line());
    })?;
    let failed = reports.iter().any(|o| !o.pass);
    println!(
        "suite {suite}: {}",
        if failed { "FAILED" } else { "passed" }
    );
    Ok(Outcome {
        tables: Vec::new(),
        notes: Vec::new(),
        failed,
        print_only: true,
        reports: Some(reports),
    })
}
