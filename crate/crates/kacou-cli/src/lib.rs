//! Command-line front end: `simulate`, `fpt`, `invariant`, `scaling` and
//! `validate`. Every run writes its data files atomically and finishes with a
//! JSON manifest whose path is printed on stdout.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use kacou::config::{RunConfig, SimMode};
use kacou::fpt::{fpt_integral_oracle, laplace_fpt, FptQuery};
use kacou::invariant::{empirical_invariant_distance, stationarity_residual, InvariantDensity, Support};
use kacou::io::{content_hash, write_atomic, write_json, Cell, CensorCounts, CsvTable, FptCaps, RunManifest, Versions};
use kacou::par::{num_threads, par_map};
use kacou::rng::rng_stream;
use kacou::scaling::convergence_check;
use kacou::sim::{
    path_segments, sample_fpt, sample_m_path, sample_switch_sequence, stationary_state, CensorReason, FptOutcome,
};
use kacou::validate::{run_suite, Level};
use kacou::{pattern_phi, KacError, State};

#[derive(Parser, Debug)]
#[command(name = "kacou", version, about = "Kac–Ornstein–Uhlenbeck processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate trajectories or first-passage samples.
    Simulate(RunArgs),
    /// First-passage Laplace transforms: closed form, oracle and Monte Carlo.
    Fpt(RunArgs),
    /// Invariant density table and summary.
    Invariant(RunArgs),
    /// Finite-n moments against the scaling limit.
    Scaling(RunArgs),
    /// Run the cross-check suite.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override a config entry, `section.key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Only the ten acceptance checks.
    #[arg(long)]
    quick: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(String),
    Breach(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Breach(_) | Failure::Runtime(_) => 1,
        }
    }
}

impl From<KacError> for Failure {
    fn from(e: KacError) -> Self {
        match e {
            KacError::Config { .. } => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code: 0 on success, 2 on usage or config errors, 1 on
/// runtime errors or a failed check.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Validate(a) => validate(&a),
        Command::Simulate(a) => with_config(&a, "simulate", simulate),
        Command::Fpt(a) => with_config(&a, "fpt", fpt),
        Command::Invariant(a) => with_config(&a, "invariant", invariant),
        Command::Scaling(a) => with_config(&a, "scaling", scaling),
    };
    match result {
        Ok(manifest) => {
            println!("{}", manifest.display());
            0
        }
        Err(f) => {
            match &f {
                Failure::Config(m) => eprintln!("error: {m}"),
                Failure::Breach(m) => eprintln!("validation failed: {m}"),
                Failure::Runtime(m) => eprintln!("error: {m}"),
            }
            f.code()
        }
    }
}

/// What a command hands back for the manifest.
#[derive(Default)]
struct Outcome {
    outputs: Vec<PathBuf>,
    censored: CensorCounts,
    caps: Option<FptCaps>,
    notes: Vec<String>,
}

type Handler = fn(&RunConfig, &Path) -> Result<Outcome, Failure>;

fn with_config(args: &RunArgs, command: &str, handler: Handler) -> Result<PathBuf, Failure> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let cfg = RunConfig::from_text(&text, &args.set)?;
    let out = args.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    let t0 = Instant::now();
    let mut outcome = handler(&cfg, &out)?;
    if let Some(z) = State::BOTH.into_iter().find(|&s| cfg.model.gamma(s) == 0.0) {
        let a = cfg.model.a(z).abs();
        if a > 0.0 && a != 1.0 {
            outcome.notes.push(format!(
                "non-strict closed forms use the spatial scale |a{}| = {a}: z = (x − ρ)(q + λ)/|a|",
                z.index()
            ));
        }
    }
    let manifest = RunManifest {
        command: command.to_string(),
        config_hash: content_hash(&cfg.canonical),
        seed: cfg.seed,
        regime: cfg.model.regime().tag().to_string(),
        model: Some(cfg.model),
        caps: outcome.caps,
        versions: Versions::default(),
        threads: num_threads(),
        wall_clock_seconds: t0.elapsed().as_secs_f64(),
        censored: outcome.censored,
        outputs: outcome.outputs,
        notes: outcome.notes,
    };
    let path = out.join(format!("{command}_manifest.json"));
    write_json(&path, &manifest)?;
    Ok(path)
}

fn note_once(notes: &mut Vec<String>, note: String) {
    if !notes.contains(&note) {
        notes.push(note);
    }
}

fn state_cell(s: State) -> Cell {
    Cell::Int(s.index() as u64)
}

fn fpt(cfg: &RunConfig, out: &Path) -> Result<Outcome, Failure> {
    let b = &cfg.fpt;
    let mut rows = Vec::new();
    for &q in &b.q {
        for &x in &b.x {
            for &y in &b.y {
                for &s in &b.states {
                    let query = FptQuery::new(q, x, y, s).map_err(|e| match e {
                        KacError::CoincidentPoints(_) => {
                            KacError::Config { key: "fpt.y".into(), reason: e.to_string() }
                        }
                        other => other,
                    })?;
                    rows.push(query);
                }
            }
        }
    }
    let caps = FptCaps::default();
    let mut o = Outcome { caps: Some(caps), ..Outcome::default() };
    let mut table = CsvTable::new(&["q", "x", "y", "state", "closed_form", "oracle", "mc_mean", "mc_stderr"]);
    for (row, query) in rows.iter().enumerate() {
        let closed = laplace_fpt(query, &cfg.model);
        let oracle = fpt_integral_oracle(query, &cfg.model, b.oracle_tol);
        let seed = cfg.seed.wrapping_add(row as u64);
        let (mc, censored) = kacou::sim::mc_laplace_fpt_with_caps(query, &cfg.model, b.mc_samples, seed, caps);
        o.censored.add(censored);
        let mut cell = |r: kacou::Result<f64>, what: &str| match r {
            Ok(v) => Cell::Num(v),
            Err(e) => {
                note_once(&mut o.notes, format!("{what} unavailable for some rows: {e}"));
                Cell::Empty
            }
        };
        let c = cell(closed, "closed_form");
        let r = cell(oracle, "oracle");
        table.push(&[
            Cell::Num(query.q),
            Cell::Num(query.x),
            Cell::Num(query.y),
            state_cell(query.initial_state),
            c,
            r,
            Cell::Num(mc.mean),
            Cell::Num(mc.stderr),
        ])?;
    }
    o.notes.push("Monte Carlo: censored samples (horizon or switch cap) count as T = ∞ and contribute 0".into());
    o.notes.push("row k uses Monte Carlo seed `seed + k`".into());
    let path = out.join("fpt.csv");
    write_atomic(&path, table.as_str().as_bytes())?;
    o.outputs.push(path);
    Ok(o)
}

#[derive(Serialize)]
struct InvariantSummary {
    exists: bool,
    regime: String,
    support: Support,
    normalizer: Option<f64>,
    /// |∫(π₀+π₁) − 1|.
    mass_check: Option<f64>,
    residual_max: Option<f64>,
    histogram_l1: Option<f64>,
    histogram_per_state_l1: Option<[f64; 2]>,
}

fn invariant(cfg: &RunConfig, out: &Path) -> Result<Outcome, Failure> {
    let b = &cfg.invariant;
    let mut o = Outcome::default();
    let mut table = CsvTable::new(&["x", "pi0", "pi1"]);
    let mut summary = InvariantSummary {
        exists: false,
        regime: cfg.model.regime().tag().to_string(),
        support: Support::Empty,
        normalizer: None,
        mass_check: None,
        residual_max: None,
        histogram_l1: None,
        histogram_per_state_l1: None,
    };
    match InvariantDensity::new(&cfg.model) {
        Ok(dens) => {
            summary.exists = true;
            summary.support = dens.support;
            summary.normalizer = Some(dens.normalizer);
            summary.mass_check = Some((dens.total_mass() - 1.0).abs());
            let (lo, hi) = dens.display_range(1e-3).expect("non-empty support");
            if matches!(dens.support, Support::Below(_) | Support::Above(_)) {
                o.notes.push("half-line support: table truncated where the pooled tail mass is 1e-3".into());
            }
            let mut worst = 0.0f64;
            for k in 0..b.grid {
                // cell midpoints keep the table off singular endpoints
                let x = lo + (hi - lo) * (k as f64 + 0.5) / b.grid as f64;
                let p = [dens.density(x, State::Zero), dens.density(x, State::One)];
                let r = stationarity_residual(x, &cfg.model)?;
                worst = worst.max(r[0].abs()).max(r[1].abs());
                table.push(&[Cell::Num(x), Cell::Num(p[0]), Cell::Num(p[1])])?;
            }
            summary.residual_max = Some(worst);
            if b.n_paths > 0 {
                let h = empirical_invariant_distance(&cfg.model, b.n_paths, b.horizon, b.bins, cfg.seed)?;
                summary.histogram_l1 = Some(h.l1);
                summary.histogram_per_state_l1 = h.per_state_l1;
            }
            o.notes.push("residual_max is relative to the sum of the magnitudes of the balance terms".into());
        }
        Err(KacError::NoInvariantMeasure) | Err(KacError::DegenerateEqualRho) => {
            o.notes.push("no invariant probability density for this model".into());
        }
        Err(e) => return Err(e.into()),
    }
    let csv = out.join("invariant.csv");
    write_atomic(&csv, table.as_str().as_bytes())?;
    let json = out.join("invariant_summary.json");
    write_json(&json, &summary)?;
    o.outputs.extend([csv, json]);
    Ok(o)
}

fn simulate(cfg: &RunConfig, out: &Path) -> Result<Outcome, Failure> {
    let b = &cfg.simulate;
    let model = &cfg.model;
    let mut o = Outcome::default();
    if b.state.is_none() {
        o.notes.push("ε(0) drawn from the stationary law of the chain".into());
    }
    let initial = |rng: &mut kacou::rng::Stream| b.state.unwrap_or_else(|| stationary_state(&model.rates, rng));
    let path = match b.mode {
        SimMode::Path => {
            let steps = (b.horizon / b.dt + 1e-9).floor() as u64;
            let times: Vec<f64> = (0..=steps).map(|k| (k as f64 * b.dt).min(b.horizon)).collect();
            let paths = par_map(b.n_paths, |i| -> kacou::Result<Vec<[f64; 3]>> {
                let mut rng = rng_stream(cfg.seed, "simulate", i);
                let s0 = initial(&mut rng);
                let seq = sample_switch_sequence(&model.rates, s0, b.horizon, &mut rng)?;
                let segs = path_segments(&seq, b.x0, model);
                let m = if b.with_m { sample_m_path(&seq, b.x0, &times, model, &mut rng)? } else { Vec::new() };
                let mut k = 0;
                Ok(times
                    .iter()
                    .enumerate()
                    .map(|(j, &t)| {
                        while k + 1 < segs.len() && segs[k + 1].t_start < t {
                            k += 1;
                        }
                        let g = &segs[k];
                        let x = pattern_phi(g.state, t - g.t_start, g.x_start, model);
                        [seq.state_at(t).index() as f64, x, m.get(j).copied().unwrap_or(0.0)]
                    })
                    .collect())
            });
            let mut header = vec!["path", "t", "state", "x"];
            if b.with_m {
                header.push("m");
            }
            let mut table = CsvTable::new(&header);
            for (i, p) in paths.into_iter().enumerate() {
                for (&t, r) in times.iter().zip(p?) {
                    let mut row = vec![Cell::Int(i as u64), Cell::Num(t), Cell::Int(r[0] as u64), Cell::Num(r[1])];
                    if b.with_m {
                        row.push(Cell::Num(r[2]));
                    }
                    table.push(&row)?;
                }
            }
            o.notes.push("state at a switch instant is the state after the switch".into());
            let p = out.join("paths.csv");
            write_atomic(&p, table.as_str().as_bytes())?;
            p
        }
        SimMode::Fpt => {
            let caps = FptCaps { horizon: b.horizon, max_switches: b.max_switches };
            o.caps = Some(caps);
            let samples = par_map(b.n_paths, |i| {
                let mut rng = rng_stream(cfg.seed, "simulate-fpt", i);
                let s0 = initial(&mut rng);
                sample_fpt(b.x0, b.y, s0, model, &mut rng, caps)
            });
            let mut table = CsvTable::new(&["path", "status", "time"]);
            for (i, s) in samples.into_iter().enumerate() {
                let (status, time) = match s {
                    FptOutcome::Hit(t) => ("hit", t),
                    FptOutcome::Censored { time, reason: CensorReason::Horizon } => {
                        o.censored.horizon += 1;
                        ("censored_horizon", time)
                    }
                    FptOutcome::Censored { time, reason: CensorReason::SwitchCap } => {
                        o.censored.switch_cap += 1;
                        ("censored_switch_cap", time)
                    }
                };
                table.push(&[Cell::Int(i as u64), Cell::Text(status.into()), Cell::Num(time)])?;
            }
            o.notes.push("censored rows report the censoring time; T itself is only known to exceed it".into());
            let p = out.join("fpt_samples.csv");
            write_atomic(&p, table.as_str().as_bytes())?;
            p
        }
    };
    o.outputs.push(path);
    Ok(o)
}

fn scaling(cfg: &RunConfig, out: &Path) -> Result<Outcome, Failure> {
    let b = &cfg.scaling;
    let rows = convergence_check(&b.spec, b.t, &b.n_list, b.n_paths, cfg.seed)?;
    let mut table = CsvTable::new(&[
        "n",
        "mean",
        "var",
        "limit_mean",
        "limit_var",
        "mean_gap",
        "var_gap",
        "mean_stderr",
        "var_stderr",
        "cdf_dist",
    ]);
    for r in &rows {
        table.push(&[
            Cell::Num(r.n),
            Cell::Num(r.mean),
            Cell::Num(r.var),
            Cell::Num(r.limit_mean),
            Cell::Num(r.limit_var),
            Cell::Num(r.mean_gap),
            Cell::Num(r.var_gap),
            Cell::Num(r.mean_stderr),
            Cell::Num(r.var_stderr),
            r.cdf_dist.map_or(Cell::Empty, Cell::Num),
        ])?;
    }
    let path = out.join("scaling.csv");
    write_atomic(&path, table.as_str().as_bytes())?;
    Ok(Outcome {
        outputs: vec![path],
        notes: vec![
            "ε(0) drawn from the stationary law at every n".into(),
            "cdf_dist is empty when the limit law is not Gaussian".into(),
        ],
        ..Outcome::default()
    })
}

#[derive(Serialize)]
struct ValidateReport {
    level: Level,
    passed: bool,
    checks: Vec<kacou::validate::CheckResult>,
}

fn validate(args: &ValidateArgs) -> Result<PathBuf, Failure> {
    let level = if args.quick { Level::Quick } else { Level::Full };
    let t0 = Instant::now();
    let checks = run_suite(level);
    for c in &checks {
        println!("{}", c.line());
    }
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.id.clone()).collect();
    let report_path = args.out.join("validate.json");
    write_json(&report_path, &ValidateReport { level, passed: failed.is_empty(), checks })?;
    let manifest = RunManifest {
        command: "validate".into(),
        config_hash: content_hash(&format!("level = {level:?}\n")),
        seed: kacou::validate::SUITE_SEED,
        regime: "suite".into(),
        model: None,
        caps: None,
        versions: Versions::default(),
        threads: num_threads(),
        wall_clock_seconds: t0.elapsed().as_secs_f64(),
        censored: CensorCounts::default(),
        outputs: vec![report_path],
        notes: vec!["each check's runtime budget is part of its pass condition".into()],
    };
    let path = args.out.join("validate_manifest.json");
    write_json(&path, &manifest)?;
    if failed.is_empty() {
        Ok(path)
    } else {
        println!("{}", path.display());
        Err(Failure::Breach(format!("checks {} failed", failed.join(", "))))
    }
}
