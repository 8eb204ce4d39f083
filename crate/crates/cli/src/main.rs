use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mish_core::automaton::LearnerConfig;
use mish_core::engine::{self, Algorithm, Budget, EngineError, SearchConfig};
use mish_core::exec::ExecError;
use mish_core::experiment::{self, ExperimentConfig, ExperimentError, Target};
use mish_core::fitness::FitnessKind;
use mish_core::http::LiveConfig;
use mish_core::report::{self, TestSuite};
use mish_core::sim::Scenario;
use mish_core::trace::TestId;

/// Search-based test generation for REST services, steered by a model
/// learned from their logs.
#[derive(Parser)]
#[command(name = "mish", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one search and write its suite, coverage report and model.
    Run(RunArgs),
    /// Repeat searches across algorithms and seeds and compare them.
    Experiment(ExperimentArgs),
    /// Re-execute a saved suite and check that its coverage still holds.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct TargetArgs {
    /// Builtin scenario name or path to a scenario file.
    #[arg(
        long,
        required_unless_present = "live_config",
        conflicts_with = "live_config"
    )]
    scenario: Option<String>,
    /// Live target description (TOML).
    #[arg(long)]
    live_config: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    /// Fitness for `mish`: lm or ws.
    #[arg(long)]
    fitness: Option<FitnessKind>,
    #[arg(long, env = "MISH_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, conflicts_with = "seconds")]
    generations: Option<u64>,
    /// Wall-clock budget per run.
    #[arg(long)]
    seconds: Option<f64>,
    #[arg(long, default_value_t = 20)]
    population: usize,
    /// Significance level of the state-merging test.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Minimum visits before a state is considered for merging.
    #[arg(long, default_value_t = 10)]
    merge_min_count: u64,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    target: TargetArgs,
    #[command(flatten)]
    search: SearchArgs,
    /// mish-lm, mish-ws, mish or random.
    #[arg(long, default_value = "mish-lm")]
    algo: String,
    #[arg(long, default_value = "mish-out")]
    out: PathBuf,
    /// Also write the model dump and the template table.
    #[arg(long)]
    export_model: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    target: TargetArgs,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, value_delimiter = ',', default_value = "mish-lm,mish-ws,random")]
    algo: Vec<String>,
    #[arg(long, default_value_t = 20)]
    repeats: u32,
    #[arg(long, default_value = "mish-experiment")]
    out: PathBuf,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Write coverage-over-time data and a gnuplot script.
    #[arg(long)]
    plot: bool,
}

#[derive(Args)]
struct ReplayArgs {
    #[command(flatten)]
    target: TargetArgs,
    /// Suite file written by `run` or `experiment`.
    #[arg(long)]
    suite: PathBuf,
}

enum Failure {
    Config(String),
    Fatal(String),
    Regression(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Fatal(_) => 1,
            Failure::Regression(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Fatal(m) | Failure::Regression(m) => m,
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::InvalidConfig(_) | EngineError::EmptyScenario => {
                Failure::Config(e.to_string())
            }
            _ => Failure::Fatal(e.to_string()),
        }
    }
}

impl From<report::ReportError> for Failure {
    fn from(e: report::ReportError) -> Self {
        Failure::Fatal(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Replay(args) => cmd_replay(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("mish: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn load_target(args: &TargetArgs) -> Result<Target, Failure> {
    match (&args.scenario, &args.live_config) {
        (Some(s), _) => Scenario::resolve(s)
            .map(Target::Sim)
            .map_err(|e| Failure::Config(e.to_string())),
        (None, Some(path)) => LiveConfig::load(path)
            .map(Target::Live)
            .map_err(|e| Failure::Config(e.to_string())),
        (None, None) => Err(Failure::Config("need --scenario or --live-config".into())),
    }
}

fn parse_algorithm(name: &str, fitness: Option<FitnessKind>) -> Result<Algorithm, Failure> {
    let algo: Algorithm = name.parse().map_err(Failure::Config)?;
    match (algo, fitness) {
        (Algorithm::Mish(_), Some(f)) if name.eq_ignore_ascii_case("mish") => {
            Ok(Algorithm::Mish(f))
        }
        (Algorithm::Mish(k), Some(f)) if k != f => Err(Failure::Config(format!(
            "--algo {name} conflicts with --fitness {f}"
        ))),
        _ => Ok(algo),
    }
}

fn search_config(args: &SearchArgs) -> Result<SearchConfig, Failure> {
    let budget = match (args.generations, args.seconds) {
        (_, Some(s)) => Budget::Seconds(s),
        (Some(g), None) => Budget::Generations(g),
        (None, None) => Budget::Generations(100),
    };
    let cfg = SearchConfig {
        population: args.population,
        budget,
        seed: args.seed,
        learner: LearnerConfig {
            alpha: args.alpha,
            min_count: args.merge_min_count,
            ..LearnerConfig::default()
        },
        ..SearchConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let target = load_target(&args.target)?;
    let algorithm = parse_algorithm(&args.algo, args.search.fitness)?;
    let config = search_config(&args.search)?;
    let mut exec = target
        .executor()
        .map_err(|e| Failure::Config(e.to_string()))?;
    let outcome = engine::run(
        algorithm,
        config,
        target.schema(),
        exec.as_mut(),
        target.label(),
    )?;

    let out = &args.out;
    std::fs::create_dir_all(out)
        .map_err(|e| Failure::Fatal(format!("cannot create {}: {e}", out.display())))?;
    report::write(&out.join("suite.json"), &outcome.suite.to_json())?;
    report::write(&out.join("report.csv"), &outcome.report.to_csv())?;
    if let Some(model) = &outcome.model {
        report::write(&out.join("model.dot"), &model.export_dot())?;
        if args.export_model {
            report::write(&out.join("model.txt"), &model.dump())?;
        }
    }
    if let (true, Some(templates)) = (args.export_model, &outcome.templates) {
        report::write(&out.join("templates.tsv"), &templates.export())?;
    }

    let r = &outcome.report;
    println!(
        "targets={} faults={} generations={}",
        r.covered.len(),
        r.faults.len(),
        r.generations
    );
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<(), Failure> {
    let target = load_target(&args.target)?;
    let algorithms = args
        .algo
        .iter()
        .map(|a| parse_algorithm(a, args.search.fitness))
        .collect::<Result<Vec<_>, _>>()?;
    let search = search_config(&args.search)?;
    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let cfg = ExperimentConfig {
        target,
        algorithms,
        repeats: args.repeats,
        base_seed: args.search.seed,
        search,
        jobs,
    };
    let result = experiment::run_experiment(&cfg).map_err(classify)?;
    experiment::write_experiment(&args.out, &cfg, &result, args.plot)?;
    if let Some(failure) = result.failure {
        return Err(classify(failure));
    }
    println!("runs={} out={}", result.records.len(), args.out.display());
    Ok(())
}

fn classify(e: ExperimentError) -> Failure {
    match e {
        ExperimentError::Invalid(_) | ExperimentError::Setup { .. } => {
            Failure::Config(e.to_string())
        }
        ExperimentError::Run { ref source, .. }
            if matches!(
                source,
                EngineError::InvalidConfig(_) | EngineError::EmptyScenario
            ) =>
        {
            Failure::Config(e.to_string())
        }
        _ => Failure::Fatal(e.to_string()),
    }
}

fn cmd_replay(args: ReplayArgs) -> Result<(), Failure> {
    let target = load_target(&args.target)?;
    let suite = load_suite(&args.suite)?;
    let mut exec = target
        .executor()
        .map_err(|e| Failure::Config(e.to_string()))?;
    exec.reset();

    let mut covered = std::collections::BTreeSet::new();
    let mut faults = std::collections::BTreeSet::new();
    for test in &suite.tests {
        let result = exec
            .execute(&test.test_case(), TestId(test.id))
            .map_err(|e| match e {
                ExecError::UnknownEndpoint(_) => Failure::Fatal(format!(
                    "suite does not match target `{}`: {e}",
                    target.label()
                )),
                _ => Failure::Fatal(e.to_string()),
            })?;
        covered.extend(result.covered);
        faults.extend(result.faults);
    }
    println!("targets={} faults={}", covered.len(), faults.len());

    let missing: Vec<String> = suite
        .covered()
        .difference(&covered)
        .map(|t| t.to_string())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Failure::Regression(format!(
            "coverage regression, no longer covered: {}",
            missing.join(", ")
        )))
    }
}

fn load_suite(path: &Path) -> Result<TestSuite, Failure> {
    TestSuite::load(path).map_err(|e| Failure::Config(e.to_string()))
}
