//! `symnlf` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 input/output error, 3 numeric
//! failure. Every command is deterministic for fixed flags and seed; wall
//! times are only written when `--timing` is passed.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::eval::{generate_synthetic, rmse, run_data_case, CaseOptions, DataCaseSpec};
use crate::model::{Exec, Model, ModelConfig};
use crate::network::{
    load_edge_list_path, scale_weights, split_edges, write_edge_list, Edge, LoadOptions,
    SelfLoopPolicy, SymmetricSparseNetwork,
};
use crate::seed::{derive_seed, Purpose};
use crate::trainer::{train_first_order, train_second_order, StepControl};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Environment variable supplying the default `--seed`.
pub const SEED_ENV: &str = "SYMNLF_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "symnlf",
    version,
    about = "Second-order symmetric non-negative latent factor models for undirected weighted networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split an edge list, train a model and write it with its training report.
    #[command(args_override_self = true, after_help = TRAIN_HELP)]
    Train(TrainArgs),
    /// Predict weights for "u i" query pairs.
    #[command(args_override_self = true)]
    Predict(PredictArgs),
    /// RMSE of a saved model on an edge list in original units.
    #[command(args_override_self = true)]
    Evaluate(EvaluateArgs),
    /// Repeated split/train/test evaluation of one data case.
    #[command(args_override_self = true, after_help = CV_HELP)]
    Cv(CvArgs),
    /// Generate a synthetic network from planted parameters.
    #[command(args_override_self = true)]
    Synth(SynthArgs),
}

const TRAIN_HELP: &str = "\
Report columns (--format csv): index, objective, validation_rmse, mu, learning_rate,
cg_iterations, cg_flag, accepted, step_length.
Config files (--config) hold one key=value per line, keys named like the long flags;
flags given on the command line win.";

const CV_HELP: &str = "\
CSV columns: optimizer, row, rmse, rmse_std, iterations, stop_reason[, time_ms].
One row per repeat (row = repeat index) plus one aggregate row (row = mean, rmse = mean,
rmse_std = sample standard deviation) per optimizer. time_ms only with --timing.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Optimizer {
    SecondOrder,
    FirstOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SelfLoops {
    Reject,
    Drop,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Master seed; all random streams derive from it.
    #[arg(long, env = SEED_ENV, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads. 1 runs sequentially.
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
    /// Optional key=value file of flag defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Self-loop handling at ingestion.
    #[arg(long, value_enum, default_value_t = SelfLoops::Reject)]
    pub self_loops: SelfLoops,
    /// Rescale weights so the minimum maps here (requires --scale-hi).
    #[arg(long, requires = "scale_hi")]
    pub scale_lo: Option<f64>,
    /// Rescale weights so the maximum maps here (requires --scale-lo).
    #[arg(long, requires = "scale_lo")]
    pub scale_hi: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Total columns per node (1 bias + d-1 latent factors).
    #[arg(long, default_value_t = 8)]
    pub d: usize,
    /// Regularization strength.
    #[arg(long, default_value_t = 0.05)]
    pub lambda: f64,
    /// Initial damping.
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    /// Relative residual tolerance of the CG inner solve.
    #[arg(long, default_value_t = 0.1)]
    pub cg_tol: f64,
    #[arg(long, default_value_t = 50)]
    pub cg_max_iters: usize,
    /// Outer iteration cap.
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub plateau_delta: f64,
    #[arg(long, default_value_t = 10)]
    pub plateau_window: usize,
    /// Initial parameters are uniform on (-r, r).
    #[arg(long, default_value_t = 1.0)]
    pub init_range: f64,
    /// Use the exact regularizer second derivative in the curvature product.
    #[arg(long, default_value_t = false)]
    pub exact_reg_curvature: bool,
}

#[derive(Debug, Args)]
pub struct StepArgs {
    #[arg(long, default_value_t = 0.5)]
    pub backtrack_factor: f64,
    #[arg(long, default_value_t = 20)]
    pub max_backtracks: usize,
    /// Adapt damping from the reduction ratio (false keeps mu fixed).
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub mu_adapt: bool,
    #[arg(long, default_value_t = 1.5)]
    pub mu_raise: f64,
    #[arg(long, default_value_t = 1.5)]
    pub mu_drop: f64,
    #[arg(long, default_value_t = 0.25)]
    pub rho_low: f64,
    #[arg(long, default_value_t = 0.75)]
    pub rho_high: f64,
    /// Stop when the gradient's max-norm falls to this value.
    #[arg(long, default_value_t = 1e-8)]
    pub grad_tol: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Edge list ("u i w" per line).
    #[arg(long)]
    pub input: PathBuf,
    /// Where to write the trained model.
    #[arg(long)]
    pub model_out: PathBuf,
    /// Where to write the training report (stdout when absent).
    #[arg(long)]
    pub report_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    pub format: ReportFormat,
    #[arg(long, value_enum, default_value_t = Optimizer::SecondOrder)]
    pub optimizer: Optimizer,
    /// Learning rate of the first-order optimizer.
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    /// Fraction of edges used for training (rest is the test set).
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    /// Fraction of the training edges held out for validation.
    #[arg(long, default_value_t = 0.1)]
    pub validation_fraction: f64,
    /// Also write train.txt, validation.txt and test.txt into this directory.
    #[arg(long)]
    pub export_split: Option<PathBuf>,
    /// Include wall time in the report.
    #[arg(long, default_value_t = false)]
    pub timing: bool,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub step: StepArgs,
    #[command(flatten)]
    pub ingest: IngestArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Query file with one "u i" pair per line; a trailing weight column is ignored.
    #[arg(long)]
    pub queries: PathBuf,
    /// Output file for "u i prediction" lines (stdout when absent).
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Edge list in original weight units.
    #[arg(long)]
    pub input: PathBuf,
    /// Output file for the JSON result (stdout when absent).
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Label of the data case.
    #[arg(long, default_value = "case")]
    pub name: String,
    #[arg(long, default_value_t = 0.2)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0.1)]
    pub validation_fraction: f64,
    /// Also run the first-order baseline on every repeat.
    #[arg(long, default_value_t = false)]
    pub compare: bool,
    /// Learning rate of the first-order baseline.
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    /// CSV output (stdout when absent).
    #[arg(long)]
    pub csv_out: Option<PathBuf>,
    /// JSON summary output.
    #[arg(long)]
    pub summary_out: Option<PathBuf>,
    /// Include wall times in the outputs.
    #[arg(long, default_value_t = false)]
    pub timing: bool,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub step: StepArgs,
    #[command(flatten)]
    pub ingest: IngestArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub nodes: usize,
    /// Columns of the planted parameters.
    #[arg(long, default_value_t = 4)]
    pub d_true: usize,
    /// Probability that an unordered pair is a known edge.
    #[arg(long, default_value_t = 0.2)]
    pub density: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_std: f64,
    /// Edge list output.
    #[arg(long)]
    pub output: PathBuf,
    /// Planted parameters and metadata (default: <output>.planted.json).
    #[arg(long)]
    pub planted_out: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Long flags that take no value; `key=true` in a config file becomes `--key`.
const SWITCHES: [&str; 4] = ["exact-reg-curvature", "compare", "timing", "help"];

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidArgument(_) | Error::TooFewEdges { .. } | Error::EmptyNetwork => {
                EXIT_USAGE
            }
            Error::NonFinite { .. } | Error::LengthMismatch { .. } => EXIT_NUMERIC,
            Error::Malformed { .. }
            | Error::NonFiniteWeight { .. }
            | Error::SelfLoop { .. }
            | Error::ConflictingDuplicate { .. }
            | Error::NodeOutOfRange { .. }
            | Error::ModelFormat(_)
            | Error::Io { .. } => EXIT_IO,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::from(Error::io(path, e))
}

/// Splices `--key=value` tokens from a `--config` file in front of the
/// user's own flags so the latter override them.
fn expand_config(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let strs: Vec<String> = args
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let mut path = None;
    for (k, a) in strs.iter().enumerate() {
        if a == "--config" {
            path = strs.get(k + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let path = PathBuf::from(path);
    let text = std::fs::read_to_string(&path).map_err(|e| io_failure(&path, e))?;
    let mut injected = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Failure {
                code: EXIT_USAGE,
                message: format!("{}:{}: expected key=value", path.display(), n + 1),
            });
        };
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        let value = value.trim();
        if key == "config" {
            continue;
        }
        if SWITCHES.contains(&key.as_str()) {
            match value {
                "true" => injected.push(OsString::from(format!("--{key}"))),
                "false" => {}
                other => {
                    return Err(Failure {
                        code: EXIT_USAGE,
                        message: format!(
                            "{}:{}: {key} expects true or false, got {other}",
                            path.display(),
                            n + 1
                        ),
                    })
                }
            }
        } else {
            injected.push(OsString::from(format!("--{key}={value}")));
        }
    }
    // args[0] is the program, args[1] the subcommand.
    let split = 2.min(args.len());
    let mut out: Vec<OsString> = args[..split].to_vec();
    out.extend(injected);
    out.extend(args[split..].iter().cloned());
    Ok(out)
}

fn model_config(m: &ModelArgs, seed: u64, exec: Exec) -> ModelConfig {
    ModelConfig {
        d: m.d,
        lambda: m.lambda,
        mu: m.mu,
        cg_tolerance: m.cg_tol,
        cg_max_iters: m.cg_max_iters,
        outer_max_iters: m.max_iters,
        plateau_delta: m.plateau_delta,
        plateau_window: m.plateau_window,
        init_range: m.init_range,
        seed,
        exact_regularization_curvature: m.exact_reg_curvature,
        exec,
    }
}

fn step_control(s: &StepArgs) -> StepControl {
    StepControl {
        backtrack_factor: s.backtrack_factor,
        max_backtracks: s.max_backtracks,
        mu_adapt: s.mu_adapt,
        mu_raise: s.mu_raise,
        mu_drop: s.mu_drop,
        rho_low: s.rho_low,
        rho_high: s.rho_high,
        grad_tol: s.grad_tol,
        ..StepControl::default()
    }
}

fn exec_for(parallel: usize) -> CliResult<Exec> {
    match parallel {
        0 => Err(Failure {
            code: EXIT_USAGE,
            message: "--parallel must be at least 1".into(),
        }),
        1 => Ok(Exec::Sequential),
        _ => Ok(Exec::Parallel),
    }
}

fn load_network(path: &Path, ingest: &IngestArgs) -> CliResult<SymmetricSparseNetwork> {
    let options = LoadOptions {
        self_loops: match ingest.self_loops {
            SelfLoops::Reject => SelfLoopPolicy::Reject,
            SelfLoops::Drop => SelfLoopPolicy::Drop,
        },
    };
    let net = load_edge_list_path(path, options)?;
    match (ingest.scale_lo, ingest.scale_hi) {
        (Some(lo), Some(hi)) => Ok(scale_weights(&net, lo, hi)?),
        _ => Ok(net),
    }
}

fn write_output(path: Option<&Path>, text: &str, stdout: &mut dyn Write) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| io_failure(p, e)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| io_failure(Path::new("<stdout>"), e)),
    }
}

fn with_threads<T: Send>(parallel: usize, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    if parallel <= 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel)
        .build()
        .map_err(|e| Failure {
            code: EXIT_USAGE,
            message: format!("thread pool: {e}"),
        })?;
    Ok(pool.install(f))
}

fn cmd_train(args: TrainArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let exec = exec_for(args.common.parallel)?;
    let net = load_network(&args.input, &args.ingest)?;
    let seed = args.common.seed;
    let split = split_edges(
        &net,
        args.train_fraction,
        args.validation_fraction,
        derive_seed(seed, Purpose::Split),
    )?;
    if let Some(dir) = &args.export_split {
        split.export(dir, net.labels())?;
    }
    let config = model_config(&args.model, derive_seed(seed, Purpose::Init), exec);
    let control = step_control(&args.step);
    let (model, report) = with_threads(args.common.parallel, || match args.optimizer {
        Optimizer::SecondOrder => train_second_order(&net, &split, &config, &control),
        Optimizer::FirstOrder => train_first_order(&net, &split, &config, args.learning_rate),
    })??;
    let test_rmse = rmse(&model, &split.test)?;
    model.save(&args.model_out)?;

    let text = match args.format {
        ReportFormat::Json => {
            let mut value = report.to_json_value(args.timing);
            value["test_rmse"] = serde_json::json!(test_rmse);
            value["edges"] = serde_json::json!({
                "train": split.train.len(),
                "validation": split.validation.len(),
                "test": split.test.len(),
            });
            serde_json::to_string_pretty(&value).expect("report serialization cannot fail") + "\n"
        }
        ReportFormat::Csv => report.to_csv(),
    };
    write_output(args.report_out.as_deref(), &text, stdout)?;
    let _ = writeln!(
        stderr,
        "{}: {} iterations, stopped on {}, test RMSE {}",
        report.optimizer, report.iterations_run, report.stop_reason, test_rmse
    );
    Ok(())
}

fn cmd_predict(args: PredictArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let model = Model::load(&args.model)?;
    let text = std::fs::read_to_string(&args.queries).map_err(|e| io_failure(&args.queries, e))?;
    let mut out = String::new();
    let (mut queries, mut failures) = (0usize, 0usize);
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        queries += 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        let result = match fields.as_slice() {
            [u, i] | [u, i, _] => match (model.node_index(u), model.node_index(i)) {
                (Some(a), Some(b)) => model.predict(a, b).map_err(|e| e.to_string()),
                (None, _) => Err(format!("unknown node '{u}'")),
                (_, None) => Err(format!("unknown node '{i}'")),
            },
            _ => Err(format!("expected \"u i\", found {} fields", fields.len())),
        };
        match result {
            Ok(g) => out.push_str(&format!("{} {} {}\n", fields[0], fields[1], g)),
            Err(msg) => {
                failures += 1;
                let _ = writeln!(stderr, "line {}: {msg}", n + 1);
            }
        }
    }
    write_output(args.output.as_deref(), &out, stdout)?;
    if queries > 0 && failures == queries {
        return Err(Failure {
            code: EXIT_IO,
            message: format!("all {queries} queries failed"),
        });
    }
    Ok(())
}

/// Reads `u i w` lines, resolving node tokens through the model's labels and
/// mapping weights onto the model's internal scale.
fn read_model_edges(model: &Model, path: &Path) -> CliResult<Vec<Edge>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let mut edges = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = |reason: String| {
            Failure::from(Error::Malformed {
                line: n + 1,
                reason,
            })
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [u, i, w] = fields.as_slice() else {
            return Err(malformed(format!(
                "expected 3 fields, found {}",
                fields.len()
            )));
        };
        let weight: f64 = w
            .parse()
            .map_err(|_| malformed(format!("invalid weight '{w}'")))?;
        if !weight.is_finite() {
            return Err(Error::NonFiniteWeight { line: n + 1 }.into());
        }
        let resolve = |tok: &str| {
            model
                .node_index(tok)
                .ok_or_else(|| malformed(format!("unknown node '{tok}'")))
        };
        edges.push(Edge::new(
            resolve(u)?,
            resolve(i)?,
            model.weight_map.forward(weight),
        ));
    }
    Ok(edges)
}

fn cmd_evaluate(args: EvaluateArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let model = Model::load(&args.model)?;
    let edges = read_model_edges(&model, &args.input)?;
    let value = rmse(&model, &edges)?;
    let text = serde_json::to_string_pretty(&serde_json::json!({
        "edges": edges.len(),
        "rmse": value,
    }))
    .expect("json")
        + "\n";
    write_output(args.output.as_deref(), &text, stdout)
}

fn cmd_cv(args: CvArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let exec = exec_for(args.common.parallel)?;
    let net = load_network(&args.input, &args.ingest)?;
    let spec = DataCaseSpec {
        name: args.name.clone(),
        train_fraction: args.train_fraction,
        repeats: args.repeats,
        validation_fraction_of_train: args.validation_fraction,
    };
    let config = model_config(&args.model, 0, exec);
    let options = CaseOptions {
        control: step_control(&args.step),
        first_order_rate: args.compare.then_some(args.learning_rate),
        parallel_repeats: exec == Exec::Parallel,
    };
    let seed = args.common.seed;
    let report = with_threads(args.common.parallel, || {
        run_data_case(
            &net,
            &spec,
            &config,
            &options,
            derive_seed(seed, Purpose::Repeat),
        )
    })??;
    write_output(args.csv_out.as_deref(), &report.to_csv(args.timing), stdout)?;
    if let Some(p) = &args.summary_out {
        write_output(Some(p), &(report.summary_json(args.timing) + "\n"), stdout)?;
    }
    let _ = writeln!(
        stderr,
        "{}: second-order RMSE {} ± {}",
        spec.name, report.second_order.rmse_mean, report.second_order.rmse_std
    );
    if let Some(f) = &report.first_order {
        let _ = writeln!(
            stderr,
            "{}: first-order RMSE {} ± {}",
            spec.name, f.rmse_mean, f.rmse_std
        );
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> CliResult<()> {
    let syn = generate_synthetic(
        args.nodes,
        args.d_true,
        args.density,
        args.noise_std,
        args.common.seed,
    )?;
    let file = std::fs::File::create(&args.output).map_err(|e| io_failure(&args.output, e))?;
    write_edge_list(std::io::BufWriter::new(file), syn.network.edges(), None)
        .map_err(|e| io_failure(&args.output, e))?;
    let sidecar = args.planted_out.clone().unwrap_or_else(|| {
        let mut s = args.output.clone().into_os_string();
        s.push(".planted.json");
        PathBuf::from(s)
    });
    let meta = serde_json::json!({
        "nodes": args.nodes,
        "d_true": args.d_true,
        "density": args.density,
        "noise_std": args.noise_std,
        "seed": args.common.seed,
        "edges": syn.network.edge_count(),
        "planted": syn.planted.as_slice(),
    });
    let text = serde_json::to_string_pretty(&meta).expect("json") + "\n";
    std::fs::write(&sidecar, text).map_err(|e| io_failure(&sidecar, e))
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run(args: Vec<OsString>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            return f.code;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{e}");
                return EXIT_USAGE;
            }
            let _ = write!(stdout, "{e}");
            return EXIT_OK;
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a, stdout, stderr),
        Command::Predict(a) => cmd_predict(a, stdout, stderr),
        Command::Evaluate(a) => cmd_evaluate(a, stdout),
        Command::Cv(a) => cmd_cv(a, stdout, stderr),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}
