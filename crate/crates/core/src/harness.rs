//! Benchmark harness: seeded multi-start experiments across labeled solver
//! configurations, CSV output, and plain-text summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::problem::{random_guess, InitialGuessBox, NonlinearProblem};
use crate::solver::{paa_solve, SolveStatus, SolverConfig};
use crate::suite::make_problem;

#[derive(Debug, Clone)]
pub struct LabeledConfig {
    pub label: String,
    pub config: SolverConfig,
}

#[derive(Debug, Clone)]
pub enum GuessSpec {
    Fixed(Vec<f64>),
    Box(InitialGuessBox),
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub problem: String,
    pub params: BTreeMap<String, String>,
    pub solvers: Vec<LabeledConfig>,
    pub guess: GuessSpec,
    pub runs: usize,
    pub master_seed: u64,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub label: String,
    pub run: usize,
    pub seed: u64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub jacobian_builds: usize,
    pub wall_time: f64,
    pub residual_norms: Vec<f64>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.runs < 1 {
            return Err(Error::InvalidSpec("run count must be >= 1".into()));
        }
        if self.solvers.is_empty() {
            return Err(Error::InvalidSpec(
                "at least one solver config required".into(),
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.solvers {
            if !seen.insert(&s.label) {
                return Err(Error::InvalidSpec(format!(
                    "duplicate solver label '{}'",
                    s.label
                )));
            }
            s.config.validate()?;
        }
        Ok(())
    }

    pub fn build_problem(&self) -> Result<NonlinearProblem> {
        make_problem(&self.problem, &self.params)
    }
}

/// Execute every (configuration, run index) pair. Per-run seeds are derived
/// additively from the master seed, so runs can be re-executed in isolation.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<RunRecord>> {
    spec.validate()?;
    let problem = spec.build_problem()?;
    if let GuessSpec::Fixed(x0) = &spec.guess {
        if x0.len() != problem.dim {
            return Err(Error::InvalidSpec(format!(
                "fixed x0 has length {}, problem dimension is {}",
                x0.len(),
                problem.dim
            )));
        }
    }
    let mut records = Vec::new();
    for lc in &spec.solvers {
        for run in 0..spec.runs {
            let seed = spec.master_seed + run as u64;
            let x0 = match &spec.guess {
                GuessSpec::Fixed(x) => x.clone(),
                GuessSpec::Box(b) => {
                    let b = b.with_seed(seed);
                    if b.lower.len() != problem.dim {
                        return Err(Error::InvalidSpec(format!(
                            "guess box has dimension {}, problem dimension is {}",
                            b.lower.len(),
                            problem.dim
                        )));
                    }
                    random_guess(&b)
                }
            };
            let report = paa_solve(&problem, &x0, &lc.config)?;
            records.push(RunRecord {
                label: lc.label.clone(),
                run,
                seed,
                status: report.status,
                iterations: report.iterations,
                jacobian_builds: report.jacobian_builds,
                wall_time: report.wall_time,
                residual_norms: report.residual_norms,
            });
        }
    }
    Ok(records)
}

fn fmt_f64(v: f64) -> String {
    // 17 significant digits, round-trips to the same double
    format!("{v:.16e}")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Write `history.csv` (long format) and `summary.csv` into the directory.
pub fn write_csv(records: &[RunRecord], out_dir: &Path) -> Result<()> {
    assert!(!records.is_empty(), "no records to write");
    fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.display().to_string(),
        source: e,
    })?;
    let mut ordered: Vec<&RunRecord> = records.iter().collect();
    ordered.sort_by(|a, b| (&a.label, a.run).cmp(&(&b.label, b.run)));

    let mut hist = String::from("label,run,iter,residual_norm\n");
    for r in &ordered {
        for (iter, v) in r.residual_norms.iter().enumerate() {
            let _ = writeln!(hist, "{},{},{},{}", r.label, r.run, iter, fmt_f64(*v));
        }
    }
    write_file(&out_dir.join("history.csv"), &hist)?;

    let mut summ = String::from("label,run,status,iterations,jacobian_builds,wall_time_s\n");
    for r in &ordered {
        let _ = writeln!(
            summ,
            "{},{},{},{},{},{}",
            r.label,
            r.run,
            r.status.as_str(),
            r.iterations,
            r.jacobian_builds,
            fmt_f64(r.wall_time)
        );
    }
    write_file(&out_dir.join("summary.csv"), &summ)?;
    Ok(())
}

/// Parse a history.csv back into (label, run) -> residual sequences.
pub fn parse_history_csv(text: &str) -> Result<BTreeMap<(String, usize), Vec<f64>>> {
    let mut out: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::InvalidSpec(format!("bad history row: {line}")));
        }
        let run: usize = parts[1]
            .parse()
            .map_err(|_| Error::InvalidSpec(format!("bad run index: {line}")))?;
        let v: f64 = parts[3]
            .parse()
            .map_err(|_| Error::InvalidSpec(format!("bad residual: {line}")))?;
        out.entry((parts[0].to_string(), run)).or_default().push(v);
    }
    Ok(out)
}

/// Per-label means over converged runs plus divergence counts, as an aligned
/// plain-text table.
pub fn summarize(records: &[RunRecord]) -> String {
    assert!(!records.is_empty());
    let mut labels: Vec<&str> = records.iter().map(|r| r.label.as_str()).collect();
    labels.dedup();
    let mut unique: Vec<&str> = Vec::new();
    for l in labels {
        if !unique.contains(&l) {
            unique.push(l);
        }
    }

    let mut rows = Vec::new();
    for label in unique {
        let group: Vec<&RunRecord> = records.iter().filter(|r| r.label == label).collect();
        let converged: Vec<&&RunRecord> = group
            .iter()
            .filter(|r| r.status == SolveStatus::Converged)
            .collect();
        let failed = group.len() - converged.len();
        let (iters, builds, time) = if converged.is_empty() {
            (String::new(), String::new(), String::new())
        } else {
            let n = converged.len() as f64;
            let mi = converged.iter().map(|r| r.iterations as f64).sum::<f64>() / n;
            let mb = converged
                .iter()
                .map(|r| r.jacobian_builds as f64)
                .sum::<f64>()
                / n;
            let mt = converged.iter().map(|r| r.wall_time).sum::<f64>() / n;
            (format!("{mi:.1}"), format!("{mb:.1}"), format!("{mt:.4}"))
        };
        rows.push((label.to_string(), iters, builds, time, failed.to_string()));
    }

    let headers = [
        "label",
        "mean_iters",
        "mean_jac_builds",
        "mean_time_s",
        "failed",
    ];
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for r in &rows {
        let cells = [&r.0, &r.1, &r.2, &r.3, &r.4];
        for (w, c) in widths.iter_mut().zip(cells.iter()) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    for (h, w) in headers.iter().zip(widths.iter()) {
        let _ = write!(out, "{h:<w$}  ");
    }
    out.push('\n');
    for r in &rows {
        let cells = [&r.0, &r.1, &r.2, &r.3, &r.4];
        for (c, w) in cells.iter().zip(widths.iter()) {
            let _ = write!(out, "{c:<w$}  ");
        }
        out.push('\n');
    }
    out
}

/// Write the summary table alongside the CSVs.
pub fn write_outputs(records: &[RunRecord], out_dir: &Path) -> Result<()> {
    write_csv(records, out_dir)?;
    write_file(&out_dir.join("summary.txt"), &summarize(records))
}
