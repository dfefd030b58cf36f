use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use fpd_core::fpd::solve_fpd;
use fpd_core::harness::{
    bench_rule_time, generate_past_data, generate_system, make_past_ideal, paired_differences,
    run_experiment_partial, write_bench_csv, write_runs_csv, write_summary_csv, BenchConfig,
    ExperimentConfig, Method, PastIdeal,
};
use fpd_core::io::JsonDocument;
use fpd_core::model::{IdealClosedLoopModel, Rollout, StateActionSpace, TransitionModel};
use fpd_core::rng::{seeded, substream, Purpose};
use fpd_core::FpdError;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<FpdError> for CliError {
    fn from(e: FpdError) -> Self {
        CliError::Runtime(e.into())
    }
}

type CliResult = Result<(), CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "fpd-tl",
    version,
    about = "Fully probabilistic design and similarity-based transfer learning of decision policies"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo comparison of Rand, TL, TLexplore, FPDlearn and FPD.
    RunExperiment(RunExperimentArgs),
    /// Draw a random transition model (flat Dirichlet rows).
    GenerateSystem(GenerateSystemArgs),
    /// Simulate past closed-loop data under the FPD policy of a past ideal.
    GenerateData(GenerateDataArgs),
    /// Solve the finite-horizon FPD problem and write the policy.
    SolveFpd(SolveFpdArgs),
    /// Time the first-rule computation of TLexplore and FPDlearn.
    Bench(BenchArgs),
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside the range [0, 1]"))
    }
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be a positive number"))
    }
}

fn parse_past_ideal(s: &str) -> Result<PastIdeal, String> {
    s.parse().map_err(|e: FpdError| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: FpdError| e.to_string())
}

fn parse_rollout(s: &str) -> Result<Rollout, String> {
    s.parse().map_err(|e: FpdError| e.to_string())
}

#[derive(Debug, Args)]
pub struct RunExperimentArgs {
    /// JSON experiment config; explicit flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Ideal that generated the past data: P1, P12 or P3 [default: P1]
    #[arg(long, value_parser = parse_past_ideal)]
    pub past_ideal: Option<PastIdeal>,
    /// Output directory for runs.csv, summary.csv and effective_config.json.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Number of repetitions [default: 100]
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub reps: Option<u64>,
    /// Root seed [default: 10]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Exploration probability ε [default: 0.3]
    #[arg(long, value_parser = unit_interval)]
    pub epsilon: Option<f64>,
    /// Threshold q on the mean of recent similarities [default: 0.4]
    #[arg(long, value_parser = unit_interval)]
    pub q_threshold: Option<f64>,
    /// Number m of recent similarities averaged [default: 10]
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub window_m: Option<u64>,
    /// Pseudo-count of the transition estimate used by FPDlearn [default: 1/|S|]
    #[arg(long, value_parser = positive_f64)]
    pub kappa: Option<f64>,
    /// FPD optimisation horizon H [default: 10]
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub horizon: Option<u64>,
    /// Length k of the past data [default: 60]
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub k_past: Option<u64>,
    /// Length h of the evaluation run [default: 100]
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub h_current: Option<u64>,
    /// Number of states |S| [default: 3]
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_states: Option<u64>,
    /// Number of actions |A| [default: 4]
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_actions: Option<u64>,
    /// Comma-separated subset of Rand,TL,TLexplore,FPDlearn,FPD [default: all]
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    pub methods: Option<Vec<Method>>,
    /// Rule used past the FPD horizon: first or cycle [default: first]
    #[arg(long, value_parser = parse_rollout)]
    pub rollout_rule: Option<Rollout>,
    /// Re-estimate the model and re-plan FPDlearn after every step [default: off]
    #[arg(long)]
    pub online_model_update: bool,
    /// Freeze the TL statistics at the past data [default: off]
    #[arg(long)]
    pub freeze_stats: bool,
}

#[derive(Debug, Args)]
pub struct GenerateSystemArgs {
    /// Number of states |S|
    #[arg(long, default_value_t = 3)]
    pub n_states: usize,
    /// Number of actions |A|
    #[arg(long, default_value_t = 4)]
    pub n_actions: usize,
    /// Seed
    #[arg(long, default_value_t = 10)]
    pub seed: u64,
    /// Output JSON file
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateDataArgs {
    /// System transition model (JSON)
    #[arg(long)]
    pub model: PathBuf,
    /// Canned past ideal (ignored when --ideal is given)
    #[arg(long, value_parser = parse_past_ideal, default_value = "P1")]
    pub past_ideal: PastIdeal,
    /// Ideal closed-loop model (JSON) used instead of a canned one
    #[arg(long)]
    pub ideal: Option<PathBuf>,
    /// FPD horizon H
    #[arg(long, default_value_t = 10)]
    pub horizon: usize,
    /// Number of epochs k
    #[arg(long, default_value_t = 60)]
    pub k: usize,
    /// Seed
    #[arg(long, default_value_t = 10)]
    pub seed: u64,
    /// Rule used past the horizon: first or cycle
    #[arg(long, value_parser = parse_rollout, default_value = "first")]
    pub rollout_rule: Rollout,
    /// Output JSON file
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveFpdArgs {
    /// Transition model (JSON)
    #[arg(long)]
    pub model: PathBuf,
    /// Ideal closed-loop model (JSON)
    #[arg(long)]
    pub ideal: PathBuf,
    /// Optimisation horizon H
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub horizon: u64,
    /// Output JSON policy; stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated state-space sizes
    #[arg(long, value_delimiter = ',', default_value = "3,6,12,24,48")]
    pub sizes: Vec<usize>,
    /// Number of actions |A|
    #[arg(long, default_value_t = 4)]
    pub n_actions: usize,
    /// Length k of the past data
    #[arg(long, default_value_t = 30)]
    pub k: usize,
    /// FPD horizon H
    #[arg(long, default_value_t = 10)]
    pub horizon: usize,
    /// Timed batches per point (median reported)
    #[arg(long, default_value_t = 31)]
    pub samples: usize,
    /// Seed
    #[arg(long, default_value_t = 10)]
    pub seed: u64,
    /// Output directory for bench.csv
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

pub fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::RunExperiment(a) => run_experiment(a),
        Command::GenerateSystem(a) => generate_system_cmd(a),
        Command::GenerateData(a) => generate_data_cmd(a),
        Command::SolveFpd(a) => solve_fpd_cmd(a),
        Command::Bench(a) => bench_cmd(a),
    }
}

/// Loads the config file (if any) and applies explicit flags on top.
pub fn effective_config(a: &RunExperimentArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(v) = a.past_ideal {
        cfg.past_ideal = v;
    }
    if let Some(v) = a.reps {
        cfg.n_reps = v as usize;
    }
    if let Some(v) = a.seed {
        cfg.root_seed = v;
    }
    if let Some(v) = a.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = a.q_threshold {
        cfg.q_threshold = v;
    }
    if let Some(v) = a.window_m {
        cfg.window_m = v as usize;
    }
    if let Some(v) = a.kappa {
        cfg.kappa = Some(v);
    }
    if let Some(v) = a.horizon {
        cfg.horizon = v as usize;
    }
    if let Some(v) = a.k_past {
        cfg.k_past = v as usize;
    }
    if let Some(v) = a.h_current {
        cfg.h_current = v as usize;
    }
    if let Some(v) = a.n_states {
        cfg.n_states = v as usize;
    }
    if let Some(v) = a.n_actions {
        cfg.n_actions = v as usize;
    }
    if let Some(v) = &a.methods {
        cfg.methods = v.clone();
    }
    if let Some(v) = a.rollout_rule {
        cfg.rollout_rule = v;
    }
    if a.online_model_update {
        cfg.online_model_update = true;
    }
    if a.freeze_stats {
        cfg.freeze_stats = true;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if cfg.n_states != 3 {
        return Err(CliError::Usage(format!(
            "the canned past ideals need --n-states 3, got {}",
            cfg.n_states
        )));
    }
    Ok(cfg)
}

fn create_writer(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn run_experiment(a: RunExperimentArgs) -> CliResult {
    let cfg = effective_config(&a)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    fs::write(
        a.out.join("effective_config.json"),
        serde_json::to_string_pretty(&cfg).context("serializing config")? + "\n",
    )
    .context("writing effective_config.json")?;

    let (output, failure) = run_experiment_partial(&cfg);
    write_runs_csv(&output.rows, create_writer(&a.out.join("runs.csv"))?)?;
    if let Some(e) = failure {
        return Err(CliError::Runtime(anyhow::Error::new(e).context(
            "experiment failed; runs.csv holds the completed repetitions",
        )));
    }
    let summary = output.summary();
    write_summary_csv(&summary, create_writer(&a.out.join("summary.csv"))?)?;
    if cfg.methods.contains(&Method::Rand) {
        write_summary_csv(
            &paired_differences(&output.rows),
            create_writer(&a.out.join("summary_vs_rand.csv"))?,
        )?;
    }
    for s in &summary {
        println!(
            "{:<10} min {:>5} q1 {:>6} median {:>6} q3 {:>6} max {:>5}",
            s.method, s.min, s.q1, s.median, s.q3, s.max
        );
    }
    Ok(())
}

fn generate_system_cmd(a: GenerateSystemArgs) -> CliResult {
    let space = StateActionSpace::new(a.n_states, a.n_actions)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let model = generate_system(space, &mut substream(a.seed, 0, Purpose::System))?;
    model.write_json(&a.out)?;
    Ok(())
}

fn generate_data_cmd(a: GenerateDataArgs) -> CliResult {
    let system = TransitionModel::read_json(&a.model)?;
    let ideal = match &a.ideal {
        Some(p) => IdealClosedLoopModel::read_json(p)?,
        None => make_past_ideal(a.past_ideal, system.space())
            .map_err(|e| CliError::Usage(e.to_string()))?,
    };
    let record = generate_past_data(
        &system,
        &ideal,
        a.horizon,
        a.k,
        a.rollout_rule,
        &mut seeded(a.seed),
    )?;
    record.write_json(&a.out)?;
    Ok(())
}

fn solve_fpd_cmd(a: SolveFpdArgs) -> CliResult {
    let model = TransitionModel::read_json(&a.model)?;
    let ideal = IdealClosedLoopModel::read_json(&a.ideal)?;
    let policy = solve_fpd(&model, &ideal, a.horizon as usize)?;
    match &a.out {
        Some(path) => policy.write_json(path)?,
        None => println!("{}", policy.to_json()?),
    }
    Ok(())
}

fn bench_cmd(a: BenchArgs) -> CliResult {
    if a.sizes.contains(&0) || a.n_actions == 0 || a.horizon == 0 {
        return Err(CliError::Usage(
            "sizes, actions and horizon must be positive".into(),
        ));
    }
    let cfg = BenchConfig {
        state_sizes: a.sizes,
        n_actions: a.n_actions,
        k: a.k,
        horizon: a.horizon,
        samples: a.samples,
        seed: a.seed,
        ..BenchConfig::default()
    };
    let rows = bench_rule_time(&cfg)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_bench_csv(&rows, create_writer(&a.out.join("bench.csv"))?)?;
    for r in &rows {
        println!(
            "{:>4} {:<10} {:.3e} s",
            r.n_states, r.method, r.median_seconds
        );
    }
    Ok(())
}
