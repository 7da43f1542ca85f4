use std::error::Error;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ipa_ppm::domain::{default_config, SimulationConfig};
use ipa_ppm::evaluation::{matrix_json, matrix_markdown, run_benchmark, run_matrix, BenchmarkConfig};
use ipa_ppm::features::{FeatureRegime, Featurizer, LabeledDataset, Task};
use ipa_ppm::learners::{train, Hyper, Learner, Model, ProbabilisticModel};
use ipa_ppm::log_io::{read_csv, validate, write_csv};
use ipa_ppm::prescriber::{prescribe_batch, write_jsonl, BatchOptions, Engines, Mode, DEFAULT_K, DEFAULT_THRESHOLD};
use ipa_ppm::simulator::simulate_cases;

type Result<T> = std::result::Result<T, Box<dyn Error>>;

/// Synthetic chatbot process logs and prescriptive monitoring.
#[derive(Parser)]
#[command(name = "ipa-ppm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulation config files.
    #[command(subcommand)]
    Config(ConfigCommand),
    /// Generate an event log.
    Simulate(SimulateArgs),
    /// Check a log's structural invariants; exits 1 on violations.
    Validate {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Turn a log into a labeled dataset.
    Featurize(FeaturizeArgs),
    /// Fit a model on a dataset.
    Train(TrainArgs),
    /// Grouped cross-validation of one or all configurations.
    Evaluate(EvaluateArgs),
    /// Next-action recommendations and deadline alerts for every user turn.
    Recommend(RecommendArgs),
}

#[derive(Subcommand)]
enum ConfigCommand {
    /// Write the default config with every field spelled out.
    Init {
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON config; the built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Defaults to the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Number of cases, scaling the team structure down with it.
    #[arg(long)]
    cases: Option<u32>,
}

#[derive(Args)]
struct FeaturizeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    task: Task,
    #[arg(long)]
    regime: FeatureRegime,
    #[arg(long)]
    out: PathBuf,
    /// Lateness only: drop turns after the regular deadline.
    #[arg(long)]
    pre_deadline_only: bool,
    /// Config whose calendar defines the deadline and working days.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    learner: Learner,
    #[arg(long)]
    out: PathBuf,
    /// JSON with `logit` and/or `gbdt` sections.
    #[arg(long)]
    hyper: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    task: Task,
    /// Every learner under every regime.
    #[arg(long, conflicts_with_all = ["learner", "regime"])]
    matrix: bool,
    #[arg(long, required_unless_present = "matrix")]
    learner: Option<Learner>,
    #[arg(long, required_unless_present = "matrix")]
    regime: Option<FeatureRegime>,
    /// Fixes the fold assignment and training seeds.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Hyperparameters used when `--hyper` is absent.
    #[arg(long, value_enum, default_value_t = Profile::Desk)]
    profile: Profile,
    /// Overrides the profile; missing fields take learner defaults.
    #[arg(long)]
    hyper: Option<PathBuf>,
    #[arg(long)]
    pre_deadline_only: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write the Markdown table here (it always goes to stdout).
    #[arg(long)]
    markdown: Option<PathBuf>,
    /// Machine-readable results with per-fold metrics.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct RecommendArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Repeat to pass both a next-activity and a lateness model.
    #[arg(long = "model", required = true)]
    models: Vec<PathBuf>,
    #[arg(long)]
    mode: Mode,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Emit only turns whose deadline risk calls for a reminder.
    #[arg(long)]
    flag_only: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn load_config(path: Option<&Path>) -> Result<SimulationConfig> {
    Ok(match path {
        Some(p) => SimulationConfig::from_json(&fs::read_to_string(p)?)?,
        None => default_config(),
    })
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    /// 40 trees of depth 5, logit step 1.0
    Desk,
    /// learner defaults
    Full,
}

fn load_hyper(path: Option<&Path>, profile: Profile) -> Result<Hyper> {
    Ok(match (path, profile) {
        (Some(p), _) => Hyper::from_json(&fs::read_to_string(p)?)?,
        (None, Profile::Desk) => Hyper::desk(),
        (None, Profile::Full) => Hyper::default(),
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Config(ConfigCommand::Init { out }) => {
            let text = default_config().to_json() + "\n";
            match out {
                Some(p) => write_text(&p, &text)?,
                None => io::stdout().write_all(text.as_bytes())?,
            }
        }
        Command::Simulate(a) => {
            let config = load_config(a.config.as_deref())?;
            let seed = a.seed.unwrap_or(config.master_seed);
            let log = simulate_cases(&config, seed, a.cases.unwrap_or(config.n_cases()))?;
            write_csv(&log, &a.out)?;
            eprintln!("wrote {} rows for {} cases to {}", log.len(), log.case_ids().count(), a.out.display());
        }
        Command::Validate { input } => {
            let log = read_csv(&input)?;
            let violations = validate(&log);
            let mut out = io::stdout().lock();
            for v in &violations {
                writeln!(out, "{v}")?;
            }
            if !violations.is_empty() {
                eprintln!("{} violation(s)", violations.len());
                return Ok(ExitCode::from(1));
            }
            eprintln!("ok: {} rows, {} cases", log.len(), log.case_ids().count());
        }
        Command::Featurize(a) => {
            let log = read_csv(&a.input)?;
            let calendar = load_config(a.config.as_deref())?.calendar;
            let f = Featurizer::new(a.regime, a.task).with_calendar(calendar.clone());
            let data = match a.task {
                Task::NextActivity => f.next_activity_dataset(&log)?,
                Task::Lateness => f.lateness_dataset(&log, calendar.regular_deadline, a.pre_deadline_only)?,
            };
            data.write_csv(&a.out)?;
            eprintln!("wrote {} rows x {} features to {}", data.len(), data.n_features(), a.out.display());
        }
        Command::Train(a) => {
            let data = LabeledDataset::read_csv(&a.data)?;
            let model = train(&data, a.learner, &load_hyper(a.hyper.as_deref(), Profile::Full)?, a.seed)?;
            model.save(&a.out)?;
            eprintln!("trained {} on {} rows, saved to {}", a.learner, data.len(), a.out.display());
        }
        Command::Evaluate(a) => {
            let log = read_csv(&a.input)?;
            let config = BenchmarkConfig {
                k: a.folds,
                seed: a.seed,
                hyper: load_hyper(a.hyper.as_deref(), a.profile)?,
                calendar: load_config(a.config.as_deref())?.calendar,
                pre_deadline_only: a.pre_deadline_only,
            };
            let reports = if a.matrix {
                run_matrix(&log, a.task, &config)?
            } else {
                vec![run_benchmark(&log, a.task, a.learner.unwrap(), a.regime.unwrap(), &config)?]
            };
            let table = matrix_markdown(&reports);
            print!("{table}");
            if let Some(p) = a.markdown {
                write_text(&p, &table)?;
            }
            if let Some(p) = a.json {
                write_text(&p, &(matrix_json(&reports) + "\n"))?;
            }
        }
        Command::Recommend(a) => {
            let log = read_csv(&a.input)?;
            let models = a.models.iter().map(|p| Model::load(p)).collect::<std::result::Result<Vec<_>, _>>()?;
            let mut engines = Engines::default();
            for m in &models {
                let slot = match Task::from_feature_names(m.feature_names()) {
                    Task::NextActivity => &mut engines.next_activity,
                    Task::Lateness => &mut engines.lateness,
                };
                if slot.is_some() {
                    return Err("two models for the same task".into());
                }
                *slot = Some(m as &dyn ProbabilisticModel);
            }
            let options = BatchOptions {
                k: a.k,
                threshold: a.threshold,
                flag_only: a.flag_only,
                calendar: load_config(a.config.as_deref())?.calendar,
            };
            let lines = prescribe_batch(engines, &log, a.mode, &options)?;
            write_jsonl(&lines, BufWriter::new(fs::File::create(&a.out)?))?;
            eprintln!("wrote {} prescriptions to {}", lines.len(), a.out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
