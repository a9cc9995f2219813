//! `consistency-lab`: run a scenario file and write its tables.

mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use consistency_lab::report::{RunOutput, Verdict};
use consistency_lab::scenarios::{self, RunSettings, Scenario};
use sha2::{Digest, Sha256};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "consistency-lab", version, about = "Distinguishability, Kraft bounds and discernible test schedules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Separation margins of the scenario's partition test.
    Distinguish(RunArgs),
    /// Hull variation and Kraft lower bounds.
    Bound(RunArgs),
    /// Exact and Monte Carlo error curves.
    Simulate(RunArgs),
    /// Interleaved schedule and discernibility curve.
    Schedule(RunArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; nothing is written when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replications, overriding the scenario's `sim.replications`.
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long, env = "CONSISTENCY_LAB_WORKERS")]
    workers: Option<usize>,
    /// Also write SVG line plots.
    #[arg(long)]
    plots: bool,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] consistency_lab::Error),
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(consistency_lab::Error::Construction(_) | consistency_lab::Error::Degenerate(_)) => 2,
            _ => 1,
        }
    }
}

struct Loaded {
    scenario: Scenario,
    sha256: String,
}

fn load(path: &Path) -> Result<Loaded, CliError> {
    let bytes = fs::read(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|e| CliError::Invalid(format!("{}: not UTF-8: {e}", path.display())))?;
    // Report syntax errors with their position before schema checks.
    serde_json::from_str::<serde_json::Value>(&text).map_err(|e| {
        CliError::Invalid(format!(
            "{}: malformed JSON at line {} column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    let scenario = Scenario::from_json(&text)?;
    Ok(Loaded {
        scenario,
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

fn execute(name: &str, args: &RunArgs, scenario: &Scenario) -> Result<RunOutput, CliError> {
    if args.reps == Some(0) {
        return Err(CliError::Invalid("--reps must be positive".into()));
    }
    let settings = RunSettings {
        seed: args.seed,
        replications: args.reps,
    };
    let run = || -> consistency_lab::Result<RunOutput> {
        match name {
            "distinguish" => scenarios::distinguish(scenario),
            "bound" => scenarios::bound(scenario),
            "simulate" => scenarios::simulate(scenario, &settings),
            _ => scenarios::schedule(scenario, &settings),
        }
    };
    let out = match args.workers {
        Some(0) => return Err(CliError::Invalid("--workers must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(run)?,
        None => run()?,
    };
    Ok(out)
}

fn manifest(name: &str, args: &RunArgs, loaded: &Loaded, out: &RunOutput) -> serde_json::Value {
    serde_json::json!({
        "version": VERSION,
        "command": name,
        "scenario": loaded.scenario.name,
        "scenario_sha256": loaded.sha256,
        "seed": args.seed,
        "replications": args.reps.unwrap_or(loaded.scenario.sim.replications),
        "verdict": out.verdict,
        "files": out.tables.iter().map(|t| format!("{name}_{}.csv", t.name)).collect::<Vec<_>>(),
    })
}

/// Renders every output file in memory so that a failure leaves the
/// directory untouched.
fn render_files(name: &str, args: &RunArgs, loaded: &Loaded, out: &RunOutput) -> Vec<(String, String)> {
    let header = vec![
        format!("consistency-lab {VERSION}"),
        format!("command {name}"),
        format!("scenario {}", loaded.scenario.name),
        format!("scenario_sha256 {}", loaded.sha256),
        format!("seed {}", args.seed),
        format!(
            "replications {}",
            args.reps.unwrap_or(loaded.scenario.sim.replications)
        ),
    ];
    let mut files = Vec::new();
    for table in &out.tables {
        files.push((format!("{name}_{}.csv", table.name), table.to_csv(&header)));
        if args.plots {
            if let Some(spec) = plot::spec_for(&table.name) {
                let series = plot::series(table, &spec);
                if !series.is_empty() {
                    let title = format!("{} {}", loaded.scenario.name, table.name);
                    files.push((format!("{name}_{}.svg", table.name), plot::render(&title, spec.x, &series)));
                }
            }
        }
    }
    let manifest = manifest(name, args, loaded, out);
    let summary = serde_json::json!({ "manifest": manifest, "summary": out.summary });
    files.push((format!("{name}_summary.json"), pretty(&summary)));
    files.push(("manifest.json".into(), pretty(&manifest)));
    files
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn write_files(dir: &Path, files: &[(String, String)]) -> Result<(), CliError> {
    let wrap = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Write { path, source }
    };
    fs::create_dir_all(dir).map_err(wrap(dir))?;
    for (file, body) in files {
        let path = dir.join(file);
        fs::write(&path, body).map_err(wrap(&path))?;
    }
    Ok(())
}

fn run(name: &str, args: &RunArgs) -> Result<Verdict, CliError> {
    let loaded = load(&args.scenario)?;
    let out = execute(name, args, &loaded.scenario)?;
    let files = render_files(name, args, &loaded, &out);
    if let Some(dir) = &args.out {
        write_files(dir, &files)?;
    }
    println!("{}", pretty(&serde_json::json!({ "command": name, "summary": out.summary, "verdict": out.verdict })).trim_end());
    Ok(out.verdict)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Distinguish(a) => ("distinguish", a),
        Command::Bound(a) => ("bound", a),
        Command::Simulate(a) => ("simulate", a),
        Command::Schedule(a) => ("schedule", a),
    };
    match run(name, args) {
        Ok(Verdict::Ok) => ExitCode::SUCCESS,
        Ok(Verdict::Indistinguishable(detail)) => {
            eprintln!("indistinguishable: {detail}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
