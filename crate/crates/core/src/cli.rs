//! Command-line entry point.
//!
//! Exit status: 0 on success, 1 on a validation error (bad flags, malformed
//! or inconsistent inputs), 2 on an I/O error. Every subcommand that writes
//! files also writes `<out>.manifest.json` listing inputs and outputs with
//! their SHA-256 digests.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::annotate::{annotate, entropy_profile, read_dataset, write_dataset, write_entropy_csv, AnnotateParams, Dataset};
use crate::distance::{distance_sweep, write_sweep_csv, Metric};
use crate::distributions::{make_support, PosteriorSpec, SupportKind};
use crate::env::{calibrate_threshold, EnvConfig, ReasoningTreeEnv, State};
use crate::eval::{beam_search_eval, best_of_n, EvalProblems, EvalReport, Scorer, TrueValueScorer};
use crate::verifier::{train, LossMode, ModelFile, Supervision, TrainConfig};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "structprior", version, about = "Structural-prior value verifier laboratory")]
struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Describe an environment, optionally calibrating its threshold.
    EnvInfo(EnvInfoArgs),
    /// Sample solutions and Monte Carlo-annotate every prefix.
    Annotate(AnnotateArgs),
    /// Train a verifier on an annotated dataset.
    Train(TrainArgs),
    /// Best-of-N reranking evaluation.
    EvalBon(EvalBonArgs),
    /// Verifier-guided beam search evaluation.
    EvalBeam(EvalBeamArgs),
    /// Statistics-based distance of posterior families over a p grid.
    DistanceSweep(SweepArgs),
    /// Entropy of estimated values by step position.
    Entropy(EntropyArgs),
}

#[derive(Debug, Args)]
struct EnvInfoArgs {
    /// Environment config JSON; overrides the inline flags.
    #[arg(long)]
    env: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    branching: usize,
    #[arg(long, default_value_t = 8)]
    depth: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
    /// Set the threshold so the mean root value hits this target.
    #[arg(long)]
    calibrate: Option<f64>,
    /// Problems used for calibration and summary statistics.
    #[arg(long, default_value_t = 50)]
    problems: u64,
    /// Summary JSON destination (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the (possibly calibrated) config here.
    #[arg(long)]
    write_env: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnnotateArgs {
    #[arg(long)]
    env: PathBuf,
    #[arg(long)]
    problems: u64,
    #[arg(long)]
    solutions: usize,
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    problem_offset: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Environment config; defaults to the one embedded in the dataset.
    #[arg(long)]
    env: Option<PathBuf>,
    /// scalar-mse, exp-mse, hl or combined.
    #[arg(long)]
    loss: String,
    /// Weight of expectation regression in the combined loss.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// one-hot, gauss-dynamic or gauss-static.
    #[arg(long, default_value = "gauss-dynamic")]
    posterior: String,
    #[arg(long)]
    static_sigma: Option<f64>,
    /// process or outcome-only.
    #[arg(long, default_value = "process")]
    supervision: String,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Hidden layer widths, comma separated.
    #[arg(long, default_value = "64,64", value_delimiter = ',')]
    hidden: Vec<usize>,
    /// Support of the categorical head.
    #[arg(long, default_value = "equidistant")]
    support_kind: String,
    /// Number of support locations (default k + 1).
    #[arg(long)]
    support_size: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalCommon {
    /// Trained model; required unless scoring with the true value.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    env: PathBuf,
    #[arg(long, default_value_t = 200)]
    problems: u64,
    /// First evaluation problem id, kept apart from training ids.
    #[arg(long, default_value_t = 1_000_000)]
    problem_offset: u64,
    #[arg(long)]
    seed: u64,
    /// model or true-value.
    #[arg(long, default_value = "model")]
    scorer: String,
    /// Label for the method column (defaults to the model's loss).
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalBonArgs {
    #[command(flatten)]
    common: EvalCommon,
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
}

#[derive(Debug, Args)]
struct EvalBeamArgs {
    #[command(flatten)]
    common: EvalCommon,
    #[arg(long, default_value_t = 4)]
    beams: usize,
    #[arg(long, default_value_t = 4)]
    width: usize,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    posterior: Vec<String>,
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long, default_value_t = 0.05)]
    grid: f64,
    /// Width of gauss-static (default 2 / (3k)).
    #[arg(long)]
    static_sigma: Option<f64>,
    #[arg(long, default_value = "wasserstein")]
    metric: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EntropyArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

/// Provenance record written beside every output.
#[derive(Debug, Serialize)]
struct RunManifest {
    subcommand: String,
    tool_version: String,
    config: serde_json::Value,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    duration_secs: f64,
    finished_unix: u64,
}

/// Collects input digests and buffered outputs; nothing touches the disk
/// until the whole subcommand has succeeded.
struct Run {
    subcommand: &'static str,
    config: serde_json::Value,
    inputs: Vec<FileDigest>,
    outputs: Vec<(PathBuf, Vec<u8>)>,
}

impl Run {
    fn new(subcommand: &'static str) -> Self {
        Run { subcommand, config: json!({}), inputs: Vec::new(), outputs: Vec::new() }
    }

    fn read_input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        self.inputs.push(FileDigest { path: path.display().to_string(), sha256: sha256_hex(&bytes) });
        Ok(bytes)
    }

    fn output(&mut self, path: &Path, bytes: Vec<u8>) {
        self.outputs.push((path.to_path_buf(), bytes));
    }

    fn finish(self, manifest_next_to: &Path, started: Instant) -> Result<()> {
        for (path, bytes) in &self.outputs {
            fs::write(path, bytes)?;
        }
        let manifest = RunManifest {
            subcommand: self.subcommand.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config: self.config,
            inputs: self.inputs,
            outputs: self
                .outputs
                .iter()
                .map(|(p, b)| FileDigest { path: p.display().to_string(), sha256: sha256_hex(b) })
                .collect(),
            duration_secs: started.elapsed().as_secs_f64(),
            finished_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let mut path = manifest_next_to.as_os_str().to_owned();
        path.push(".manifest.json");
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        bytes.push(b'\n');
        fs::write(PathBuf::from(path), bytes)?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn parse_json<T: serde::de::DeserializeOwned>(bytes: &[u8], what: &Path) -> Result<T> {
    serde_json::from_slice(bytes)
        .map_err(|e| Error::Parse { line: e.line(), message: format!("{}: {e}", what.display()) })
}

fn load_env(run: &mut Run, path: &Path) -> Result<ReasoningTreeEnv> {
    let bytes = run.read_input(path)?;
    ReasoningTreeEnv::new(parse_json(&bytes, path)?)
}

fn load_dataset(run: &mut Run, path: &Path) -> Result<Dataset> {
    let bytes = run.read_input(path)?;
    read_dataset(BufReader::new(bytes.as_slice()))
}

fn to_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Summary path for a report: `bon.csv` becomes `bon.summary.json`.
fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.json")
}

fn env_info(args: EnvInfoArgs) -> Result<()> {
    let started = Instant::now();
    let mut run = Run::new("env-info");
    let mut config = match &args.env {
        Some(path) => {
            let bytes = run.read_input(path)?;
            parse_json::<EnvConfig>(&bytes, path)?
        }
        None => EnvConfig {
            branching: args.branching,
            depth: args.depth,
            seed: args.seed,
            policy_beta: args.beta,
            threshold: args.threshold,
        },
    };
    config.validate()?;
    if args.problems == 0 {
        return Err(Error::invalid("--problems must be positive"));
    }
    if let Some(target) = args.calibrate {
        config.threshold = calibrate_threshold(&config, 0..args.problems, target)?;
    }
    let env = ReasoningTreeEnv::new(config.clone())?;
    let roots: Vec<f64> =
        (0..args.problems).map(|p| env.true_value(&State::root(p))).collect::<Result<_>>()?;
    let accuracy: f64 = (0..args.problems).map(|p| env.leaf_accuracy(p)).sum::<f64>() / args.problems as f64;
    let info = json!({
        "config": config,
        "config_hash": config.hash(),
        "leaves_per_problem": config.leaves_per_problem(),
        "problems": args.problems,
        "mean_root_value": roots.iter().sum::<f64>() / roots.len() as f64,
        "mean_leaf_accuracy": accuracy,
    });
    let mut text = serde_json::to_vec_pretty(&info).expect("info serializes");
    text.push(b'\n');
    run.config = json!({ "problems": args.problems, "calibrate": args.calibrate });
    if let Some(path) = &args.write_env {
        let mut bytes = serde_json::to_vec_pretty(&config).expect("config serializes");
        bytes.push(b'\n');
        run.output(path, bytes);
    }
    match args.out.clone().or(args.write_env.clone()) {
        Some(anchor) => {
            if let Some(out) = &args.out {
                run.output(out, text);
            } else {
                std::io::stdout().write_all(&text)?;
            }
            run.finish(&anchor, started)
        }
        None => {
            std::io::stdout().write_all(&text)?;
            Ok(())
        }
    }
}

fn annotate_cmd(args: AnnotateArgs) -> Result<()> {
    let started = Instant::now();
    let mut run = Run::new("annotate");
    let env = load_env(&mut run, &args.env)?;
    let params = AnnotateParams {
        n_problems: args.problems,
        n_solutions: args.solutions,
        k: args.k,
        problem_offset: args.problem_offset,
    };
    let dataset = annotate(&env, &params, args.seed)?;
    run.config = json!({ "params": params, "seed": args.seed, "env_hash": env.config().hash() });
    let bytes = to_bytes(|b| write_dataset(&dataset, b))?;
    run.output(&args.out, bytes);
    run.finish(&args.out, started)
}

fn train_cmd(args: TrainArgs) -> Result<()> {
    let started = Instant::now();
    let mut run = Run::new("train");
    let dataset = load_dataset(&mut run, &args.data)?;
    let env = match &args.env {
        Some(path) => load_env(&mut run, path)?,
        None => match &dataset.header.env {
            Some(config) => ReasoningTreeEnv::new(config.clone())?,
            None => return Err(Error::invalid("dataset carries no env config; pass --env")),
        },
    };
    if env.config().hash() != dataset.header.env_hash {
        return Err(Error::Integrity("environment does not match the dataset's env_hash".into()));
    }
    let loss = match args.loss.as_str() {
        "scalar-mse" => LossMode::ScalarMse,
        "exp-mse" => LossMode::ExpMse,
        "hl" => LossMode::Hl,
        "combined" => LossMode::Combined { alpha: args.alpha },
        other => return Err(Error::invalid(format!("unknown loss `{other}`"))),
    };
    let mut posterior: PosteriorSpec = args.posterior.parse()?;
    if let Some(sigma) = args.static_sigma {
        posterior = PosteriorSpec::gauss_static(sigma)?;
    }
    let supervision = match args.supervision.as_str() {
        "process" => Supervision::Process,
        "outcome-only" => Supervision::OutcomeOnly,
        other => return Err(Error::invalid(format!("unknown supervision `{other}`"))),
    };
    let kind: SupportKind = args.support_kind.parse()?;
    let support = match (kind, args.support_size) {
        (SupportKind::Equidistant, None) => None,
        (kind, size) => Some(make_support(size.unwrap_or(dataset.k() + 1), kind)?),
    };
    let config = TrainConfig {
        loss,
        posterior,
        supervision,
        learning_rate: args.lr,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed: args.seed,
        hidden: args.hidden,
        support,
    };
    let outcome = train(&env, &dataset, &config)?;
    let file = ModelFile::new(&outcome, &config, &dataset);
    run.config = serde_json::to_value(&config).expect("config serializes");
    let bytes = to_bytes(|b| file.write(b))?;
    run.output(&args.out, bytes);
    run.finish(&args.out, started)
}

enum LoadedScorer {
    Model(Box<ModelFile>),
    TrueValue,
}

impl LoadedScorer {
    fn scorer(&self) -> &dyn Scorer {
        match self {
            LoadedScorer::Model(file) => &file.model,
            LoadedScorer::TrueValue => &TrueValueScorer,
        }
    }

    fn default_method(&self) -> String {
        match self {
            LoadedScorer::Model(file) => {
                let cfg = &file.train_config;
                if cfg.loss.needs_posterior() {
                    format!("{}+{}", cfg.loss.name(), cfg.posterior.name())
                } else {
                    cfg.loss.name().to_string()
                }
            }
            LoadedScorer::TrueValue => "true-value".into(),
        }
    }
}

fn load_scorer(run: &mut Run, common: &EvalCommon, env: &ReasoningTreeEnv) -> Result<LoadedScorer> {
    match common.scorer.as_str() {
        "true-value" => Ok(LoadedScorer::TrueValue),
        "model" => {
            let path = common.model.as_ref().ok_or_else(|| Error::invalid("--model is required"))?;
            let bytes = run.read_input(path)?;
            let file = ModelFile::read(bytes.as_slice())?;
            if file.env_hash != env.config().hash() {
                return Err(Error::Integrity("model was trained on a different environment".into()));
            }
            Ok(LoadedScorer::Model(Box::new(file)))
        }
        other => Err(Error::invalid(format!("unknown scorer `{other}`"))),
    }
}

fn finish_report(mut run: Run, report: &EvalReport, out: &Path, started: Instant) -> Result<()> {
    let csv = to_bytes(|b| report.write_csv(b))?;
    let summary = to_bytes(|b| report.write_json(b))?;
    run.output(out, csv);
    run.output(&summary_path(out), summary);
    run.finish(out, started)
}

fn eval_bon_cmd(args: EvalBonArgs) -> Result<()> {
    let started = Instant::now();
    let mut run = Run::new("eval-bon");
    let c = &args.common;
    let env = load_env(&mut run, &c.env)?;
    let scorer = load_scorer(&mut run, c, &env)?;
    let problems = EvalProblems { n_problems: c.problems, problem_offset: c.problem_offset, seed: c.seed };
    let method = c.method.clone().unwrap_or_else(|| scorer.default_method());
    let report = best_of_n(&env, scorer.scorer(), &method, &args.n, &problems)?;
    run.config = json!({ "n": args.n, "problems": problems, "scorer": c.scorer });
    finish_report(run, &report, &c.out, started)
}

fn eval_beam_cmd(args: EvalBeamArgs) -> Result<()> {
    let started = Instant::now();
    let mut run = Run::new("eval-beam");
    let c = &args.common;
    let env = load_env(&mut run, &c.env)?;
    let scorer = load_scorer(&mut run, c, &env)?;
    let problems = EvalProblems { n_problems: c.problems, problem_offset: c.problem_offset, seed: c.seed };
    let method = c.method.clone().unwrap_or_else(|| scorer.default_method());
    let report = beam_search_eval(&env, scorer.scorer(), &method, args.beams, args.width, &problems)?;
    run.config = json!({ "beams": args.beams, "width": args.width, "problems": problems, "scorer": c.scorer });
    finish_report(run, &report, &c.out, started)
}

fn sweep_cmd(args: SweepArgs) -> Result<()> {
    let started = Instant::now();
    let mut run = Run::new("distance-sweep");
    let specs = args
        .posterior
        .iter()
        .map(|name| {
            let spec: PosteriorSpec = name.parse()?;
            match (spec, args.static_sigma) {
                (PosteriorSpec { kind: crate::distributions::PosteriorKind::GaussStatic, static_sigma: None }, Some(s)) => {
                    PosteriorSpec::gauss_static(s)
                }
                _ => Ok(spec),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let metric: Metric = args.metric.parse()?;
    let rows = distance_sweep(&specs, args.k, args.grid, metric)?;
    run.config = json!({ "posteriors": specs, "k": args.k, "grid": args.grid, "metric": metric });
    let bytes = to_bytes(|b| write_sweep_csv(&rows, b))?;
    run.output(&args.out, bytes);
    run.finish(&args.out, started)
}

fn entropy_cmd(args: EntropyArgs) -> Result<()> {
    let started = Instant::now();
    let mut run = Run::new("entropy");
    let dataset = load_dataset(&mut run, &args.data)?;
    let profile = entropy_profile(&dataset)?;
    for note in &profile.notes {
        eprintln!("note: {note}");
    }
    run.config = json!({ "notes": profile.notes });
    let bytes = to_bytes(|b| write_entropy_csv(&profile, b))?;
    run.output(&args.out, bytes);
    run.finish(&args.out, started)
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::EnvInfo(a) => env_info(a),
        Command::Annotate(a) => annotate_cmd(a),
        Command::Train(a) => train_cmd(a),
        Command::EvalBon(a) => eval_bon_cmd(a),
        Command::EvalBeam(a) => eval_beam_cmd(a),
        Command::DistanceSweep(a) => sweep_cmd(a),
        Command::Entropy(a) => entropy_cmd(a),
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => 2,
        _ => 1,
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.threads {
        Some(0) => Err(Error::invalid("--threads must be positive")),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command)),
            Err(e) => Err(Error::invalid(format!("cannot build thread pool: {e}"))),
        },
        None => dispatch(cli.command),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
