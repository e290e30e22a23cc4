use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use paa_core::config::{parse_config_text, resolve_spec, RawConfig};
use paa_core::harness::{run_experiment, summarize, write_outputs};
use paa_core::suite::list_problems;
use paa_core::verify::run_all;
use paa_core::Error;

#[derive(Parser)]
#[command(
    name = "paa",
    about = "Preconditioned Anderson acceleration benchmark harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Run an experiment from a config file, with optional flag overrides
    Run(RunArgs),
    /// List the built-in benchmark problems and their parameters
    ListProblems,
    /// Run the built-in verification suite against the reference oracles
    Verify,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file (key = value lines)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Problem name (kelley, trig, bratu, convdiff)
    #[arg(long)]
    problem: Option<String>,
    /// Problem parameter override, e.g. --param n=50 (repeatable)
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Preconditioner kind: const:A, diag, block:B, full, linfull, lindiag
    #[arg(long)]
    precond: Option<String>,
    /// Window size
    #[arg(long)]
    m: Option<usize>,
    /// Mixing parameter
    #[arg(long)]
    beta: Option<f64>,
    /// Rebuild the preconditioner every N iterations
    #[arg(long = "n-update")]
    n_update: Option<usize>,
    /// Residual-norm convergence tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    /// Master seed for initial-guess sampling
    #[arg(long)]
    seed: Option<u64>,
    /// Number of runs per solver configuration
    #[arg(long)]
    runs: Option<usize>,
    /// Output directory for history.csv, summary.csv, summary.txt
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fixed initial guess: scalar (broadcast) or comma list
    #[arg(long)]
    x0: Option<String>,
    /// Lower bound of the random initial-guess box
    #[arg(long)]
    lower: Option<String>,
    /// Upper bound of the random initial-guess box
    #[arg(long)]
    upper: Option<String>,
}

impl RunArgs {
    /// Fold the flag overrides into the raw key-value config. A solver flag
    /// override clears any `solver.<label>` lines from the file, since the
    /// flags describe a single configuration.
    fn apply(&self, raw: &mut RawConfig) -> Result<(), Error> {
        let mut set = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                raw.keys.insert(k.to_string(), v);
            }
        };
        set("problem", self.problem.clone());
        set("precond", self.precond.clone());
        set("m", self.m.map(|v| v.to_string()));
        set("beta", self.beta.map(|v| v.to_string()));
        set("n_update", self.n_update.map(|v| v.to_string()));
        set("tol", self.tol.map(|v| v.to_string()));
        set("max_iter", self.max_iter.map(|v| v.to_string()));
        set("seed", self.seed.map(|v| v.to_string()));
        set("runs", self.runs.map(|v| v.to_string()));
        set("out", self.out.as_ref().map(|p| p.display().to_string()));
        set("x0", self.x0.clone());
        set("lower", self.lower.clone());
        set("upper", self.upper.clone());
        for p in &self.params {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Error::InvalidSpec(format!("--param '{p}': expected KEY=VALUE")))?;
            raw.keys.insert(format!("param.{k}"), v.to_string());
        }
        if self.precond.is_some() || self.m.is_some() {
            raw.solvers.clear();
        }
        Ok(())
    }
}

fn cmd_run(args: &RunArgs) -> Result<(), Error> {
    let mut raw = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })?;
            parse_config_text(&text)?
        }
        None => RawConfig::default(),
    };
    args.apply(&mut raw)?;
    let spec = resolve_spec(&raw)?;
    let records = run_experiment(&spec)?;
    write_outputs(&records, &spec.out_dir)?;
    print!("{}", summarize(&records));
    println!("wrote {}", spec.out_dir.display());
    Ok(())
}

fn cmd_list_problems() {
    for (name, desc) in list_problems() {
        println!("{name:10} {desc}");
    }
}

fn cmd_verify() -> bool {
    let results = run_all();
    let mut ok = true;
    for r in &results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {} - {}", r.name, r.detail);
        ok &= r.passed;
    }
    ok
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::Io { .. } => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not errors
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command {
        Command::Run(args) => match cmd_run(&args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                exit_code_for(&e)
            }
        },
        Command::ListProblems => {
            cmd_list_problems();
            ExitCode::SUCCESS
        }
        Command::Verify => {
            if cmd_verify() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
