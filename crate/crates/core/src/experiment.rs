//! Repeated independent runs per algorithm, their on-disk layout and the
//! aggregate comparison table.
//!
//! Output layout under the experiment directory:
//!
//! ```text
//! <algo>_run<NN>/suite.json    archived tests of run NN (seed = base + NN)
//! <algo>_run<NN>/report.csv    coverage over time
//! <algo>_run<NN>/model.dot     final automaton (model-guided runs only)
//! aggregate.csv                medians, IQRs, rank-sum p and A12 per metric
//! coverage.csv, coverage.gp    mean coverage per generation and a gnuplot script (--plot)
//! PARTIAL                      present only if a run failed; holds the error
//! ```

use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use thiserror::Error;

use crate::api::ApiSchema;
use crate::engine::{self, Algorithm, EngineError, RunOutcome, SearchConfig};
use crate::exec::Executor;
use crate::http::{LiveConfig, LiveConfigError, LiveExecutor};
use crate::report::{self, ReportError};
use crate::sim::{Scenario, Simulator};
use crate::stats::{vargha_delaney_a12, wilcoxon_rank_sum, SampleSet};

pub const AGGREGATE_HEADER: &str = "metric,algorithm,runs,median,iqr,versus,p_value,a12,magnitude";

/// What the runs execute against.
#[derive(Debug, Clone)]
pub enum Target {
    Sim(Scenario),
    Live(LiveConfig),
}

impl Target {
    pub fn label(&self) -> &str {
        match self {
            Target::Sim(s) => &s.name,
            Target::Live(c) => c.label(),
        }
    }

    pub fn schema(&self) -> ApiSchema {
        match self {
            Target::Sim(s) => s.api_schema(),
            Target::Live(c) => c.api_schema(),
        }
    }

    /// A fresh executor; simulators share nothing between runs.
    pub fn executor(&self) -> Result<Box<dyn Executor>, LiveConfigError> {
        Ok(match self {
            Target::Sim(s) => Box::new(Simulator::new(s.clone())),
            Target::Live(c) => Box::new(LiveExecutor::new(c.clone())?),
        })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub target: Target,
    pub algorithms: Vec<Algorithm>,
    pub repeats: u32,
    pub base_seed: u64,
    /// Per-run settings; the seed is overridden with `base_seed + repeat`.
    pub search: SearchConfig,
    /// Worker threads. Live targets always run one at a time.
    pub jobs: usize,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error("run {run} failed: {source}")]
    Run {
        run: String,
        #[source]
        source: EngineError,
    },
    #[error("run {run} could not start: {source}")]
    Setup {
        run: String,
        #[source]
        source: LiveConfigError,
    },
    #[error(transparent)]
    Report(#[from] ReportError),
}

#[derive(Debug)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub repeat: u32,
    pub seed: u64,
    pub outcome: RunOutcome,
}

impl RunRecord {
    pub fn dir_name(&self) -> String {
        run_dir_name(self.algorithm, self.repeat)
    }
}

pub fn run_dir_name(algorithm: Algorithm, repeat: u32) -> String {
    format!("{algorithm}_run{repeat:02}")
}

/// Completed runs plus the first failure, if any.
#[derive(Debug)]
pub struct ExperimentResult {
    pub records: Vec<RunRecord>,
    pub failure: Option<ExperimentError>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.repeats == 0 {
            return Err(ExperimentError::Invalid(
                "repeats must be at least 1".into(),
            ));
        }
        if self.algorithms.is_empty() {
            return Err(ExperimentError::Invalid("no algorithm selected".into()));
        }
        self.search
            .validate()
            .map_err(|e| ExperimentError::Invalid(e.to_string()))
    }
}

fn run_one(
    cfg: &ExperimentConfig,
    algorithm: Algorithm,
    repeat: u32,
) -> Result<RunRecord, ExperimentError> {
    let seed = cfg.base_seed.wrapping_add(u64::from(repeat));
    let run = run_dir_name(algorithm, repeat);
    let mut exec = cfg
        .target
        .executor()
        .map_err(|source| ExperimentError::Setup {
            run: run.clone(),
            source,
        })?;
    let search = SearchConfig {
        seed,
        ..cfg.search.clone()
    };
    let outcome = engine::run(
        algorithm,
        search,
        cfg.target.schema(),
        exec.as_mut(),
        cfg.target.label(),
    )
    .map_err(|source| ExperimentError::Run { run, source })?;
    Ok(RunRecord {
        algorithm,
        repeat,
        seed,
        outcome,
    })
}

/// Runs every (algorithm, repeat) pair. Results come back in that order
/// regardless of how many workers ran them.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    cfg.validate()?;
    let jobs: Vec<(Algorithm, u32)> = cfg
        .algorithms
        .iter()
        .flat_map(|&a| (0..cfg.repeats).map(move |r| (a, r)))
        .collect();
    let workers = match cfg.target {
        Target::Live(_) => 1,
        Target::Sim(_) => cfg.jobs.clamp(1, jobs.len()),
    };

    let slots: Vec<Mutex<Option<Result<RunRecord, ExperimentError>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let failed = std::sync::atomic::AtomicBool::new(false);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if failed.load(Ordering::Relaxed) {
                    return;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(algorithm, repeat)) = jobs.get(i) else {
                    return;
                };
                let result = run_one(cfg, algorithm, repeat);
                if result.is_err() {
                    failed.store(true, Ordering::Relaxed);
                }
                *slots[i].lock().unwrap() = Some(result);
            });
        }
    });

    let mut records = Vec::new();
    let mut failure = None;
    for slot in slots {
        match slot.into_inner().unwrap() {
            Some(Ok(r)) => records.push(r),
            Some(Err(e)) => {
                failure.get_or_insert(e);
            }
            None => {}
        }
    }
    Ok(ExperimentResult { records, failure })
}

pub fn write_run(dir: &Path, record: &RunRecord) -> Result<(), ReportError> {
    std::fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    report::write(&dir.join("suite.json"), &record.outcome.suite.to_json())?;
    report::write(&dir.join("report.csv"), &record.outcome.report.to_csv())?;
    if let Some(model) = &record.outcome.model {
        report::write(&dir.join("model.dot"), &model.export_dot())?;
    }
    Ok(())
}

fn metric_values(records: &[RunRecord], algorithm: Algorithm, metric: &str) -> Vec<f64> {
    records
        .iter()
        .filter(|r| r.algorithm == algorithm)
        .map(|r| match metric {
            "covered_targets" => r.outcome.report.covered.len() as f64,
            _ => r.outcome.report.faults.len() as f64,
        })
        .collect()
}

/// Summary rows per algorithm, then one comparison row per ordered pair.
pub fn aggregate_csv(records: &[RunRecord], algorithms: &[Algorithm]) -> String {
    let mut out = String::from(AGGREGATE_HEADER);
    out.push('\n');
    for metric in ["covered_targets", "faults"] {
        let sets: Vec<Option<SampleSet>> = algorithms
            .iter()
            .map(|&a| SampleSet::new(a.to_string(), metric_values(records, a, metric)).ok())
            .collect();
        for (i, a) in algorithms.iter().enumerate() {
            let Some(set) = &sets[i] else { continue };
            let n = set.values.len();
            let (median, iqr) = (set.median(), set.iqr());
            let _ = writeln!(out, "{metric},{a},{n},{median},{iqr},,,,");
            for (j, b) in algorithms.iter().enumerate() {
                let Some(other) = &sets[j] else { continue };
                if i == j {
                    continue;
                }
                let p = wilcoxon_rank_sum(set, other)
                    .map(|t| t.p_value.to_string())
                    .unwrap_or_else(|_| "NA".into());
                let effect = vargha_delaney_a12(set, other);
                let _ = writeln!(
                    out,
                    "{metric},{a},{n},{median},{iqr},{b},{p},{},{}",
                    effect.a12, effect.magnitude
                );
            }
        }
    }
    out
}

/// Mean covered targets per generation, one column per algorithm.
pub fn coverage_csv(records: &[RunRecord], algorithms: &[Algorithm]) -> String {
    let last = records
        .iter()
        .map(|r| r.outcome.report.generations)
        .max()
        .unwrap_or(0);
    let mut out = String::from("generation");
    for a in algorithms {
        let _ = write!(out, ",{a}");
    }
    out.push('\n');
    for g in 0..=last {
        let _ = write!(out, "{g}");
        for &a in algorithms {
            let values: Vec<f64> = records
                .iter()
                .filter(|r| r.algorithm == a)
                .filter_map(|r| r.outcome.report.at_generation(g))
                .map(|s| s.covered_targets as f64)
                .collect();
            let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
            let _ = write!(out, ",{mean}");
        }
        out.push('\n');
    }
    out
}

pub fn gnuplot_script(algorithms: &[Algorithm]) -> String {
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead left bottom\n\
         set xlabel 'generation'\n\
         set ylabel 'covered targets (mean over runs)'\n\
         set terminal pngcairo size 900,540\n\
         set output 'coverage.png'\n\
         plot for [i=2:{}] 'coverage.csv' using 1:i with lines lw 2\n",
        algorithms.len() + 1
    )
}

/// Writes per-run directories, the aggregate table and, when asked, plot
/// data. A failed run leaves a `PARTIAL` marker next to the completed ones.
pub fn write_experiment(
    out: &Path,
    cfg: &ExperimentConfig,
    result: &ExperimentResult,
    plot: bool,
) -> Result<(), ReportError> {
    std::fs::create_dir_all(out).map_err(|source| ReportError::Io {
        path: out.display().to_string(),
        source,
    })?;
    for record in &result.records {
        write_run(&out.join(record.dir_name()), record)?;
    }
    let marker = out.join("PARTIAL");
    if let Some(failure) = &result.failure {
        report::write(&marker, &format!("{failure}\n"))?;
        return Ok(());
    }
    if marker.exists() {
        let _ = std::fs::remove_file(&marker);
    }
    report::write(
        &out.join("aggregate.csv"),
        &aggregate_csv(&result.records, &cfg.algorithms),
    )?;
    if plot {
        report::write(
            &out.join("coverage.csv"),
            &coverage_csv(&result.records, &cfg.algorithms),
        )?;
        report::write(&out.join("coverage.gp"), &gnuplot_script(&cfg.algorithms))?;
    }
    Ok(())
}
