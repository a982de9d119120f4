//! Command-line front end. [`run`] maps arguments to harness calls and
//! returns the process exit code:
//!
//! * 0: success (for `gwl`: not distinguished)
//! * 1: `gwl` found the hypergraphs distinguishable
//! * 2: usage or input error
//! * 3: numerical failure

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::autodiff::gradcheck::{op_suite, DEFAULT_TOLERANCE};
use crate::autodiff::Scalar;
use crate::gwl::{distinguish, Verdict};
use crate::hypergraph::IncidenceStructure;
use crate::layers::{gradcheck::model_suite, Model, ModelSpec, Variant};
use crate::train::synthetic::{planted_partition, SyntheticConfig};
use crate::train::{
    depth_sweep, evaluate, format_table, grid, load_dataset, self_loop_ablation, sweep, train_transductive,
    DatasetBundle, ReportRule, RunReport, SweepProtocol, TrainConfig, TrainError, WeightDecay,
};

/// Environment variable naming the default directory for report files.
pub const OUT_DIR_ENV: &str = "UNIGNN_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "unignn", version, about = "Hypergraph neural networks: training, evaluation and 1-GWL tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one model on one split and report test accuracy.
    Train(TrainArgs),
    /// Evaluate saved weights on a dataset split.
    Eval(EvalArgs),
    /// Repeat training over a grid of splits and seeds.
    Sweep(SweepArgs),
    /// Accuracy as a function of network depth.
    DepthSweep(DepthArgs),
    /// Compare training with and without hyperedge self-loops.
    AblateSelfloops(GridArgs),
    /// Decide whether 1-GWL distinguishes two hypergraphs.
    Gwl(GwlArgs),
    /// Finite-difference check of all gradients.
    Gradcheck(GradcheckArgs),
    /// Write the small example hypergraphs and datasets to a directory.
    Fixtures(FixturesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RuleArg {
    LastEpoch,
    BestValidation,
}

#[derive(Debug, Clone, Args)]
struct OutputArgs {
    /// Element type used for training and evaluation.
    #[arg(long, value_enum, default_value = "f32")]
    precision: Precision,
    /// Console format of the result.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write the JSON report to this file (default: $UNIGNN_OUT_DIR/<command>.json when set).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct ModelArgs {
    /// Dataset JSON file.
    #[arg(long)]
    dataset: PathBuf,
    /// JSON file with defaults for any of the options below; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model variant: unigcn, unigat, unigin, unisage, unigcnii or unigcn_star.
    #[arg(long)]
    model: Option<Variant>,
    /// Number of message passing layers.
    #[arg(long)]
    layers: Option<usize>,
    /// Hidden width (per attention head for unigat).
    #[arg(long)]
    hidden: Option<usize>,
    /// Attention heads for unigat.
    #[arg(long)]
    heads: Option<usize>,
    /// Dropout on each layer's input.
    #[arg(long)]
    dropout: Option<f64>,
    /// Dropout on the raw features (defaults to --dropout).
    #[arg(long)]
    input_dropout: Option<f64>,
    /// Dropout on normalized attention weights (unigat).
    #[arg(long)]
    attn_dropout: Option<f64>,
    /// Initial-residual strength for unigcnii.
    #[arg(long)]
    alpha: Option<f64>,
    /// Identity-mapping schedule constant for unigcnii: beta_l = ln(lambda / l + 1).
    #[arg(long)]
    lambda: Option<f64>,
    /// Freeze the unigin epsilon at 0 instead of learning it.
    #[arg(long)]
    fixed_eps: bool,
    /// Disable the row-wise L2 normalization after aggregation.
    #[arg(long)]
    no_norm: bool,
    /// Force hyperedge self-loops on or off (default depends on the variant).
    #[arg(long, value_enum)]
    self_loops: Option<OnOff>,
    /// Adam learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// L2 weight decay for all parameters.
    #[arg(long)]
    wd: Option<f64>,
    /// L2 weight decay for convolution parameters (with --wd-dense).
    #[arg(long, requires = "wd_dense")]
    wd_conv: Option<f64>,
    /// L2 weight decay for dense parameters (with --wd-conv).
    #[arg(long, requires = "wd_conv")]
    wd_dense: Option<f64>,
    /// Training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Early-stopping patience in epochs; 0 disables.
    #[arg(long)]
    patience: Option<usize>,
    /// Which epoch's weights are evaluated.
    #[arg(long, value_enum)]
    report_rule: Option<RuleArg>,
}

#[derive(Debug, Clone, Args)]
struct TrainArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Split id inside the dataset file.
    #[arg(long)]
    split: Option<String>,
    /// Seed for initialization and dropout.
    #[arg(long)]
    seed: Option<u64>,
    /// Save trained weights as <STEM>.bin plus <STEM>.json.
    #[arg(long)]
    save_weights: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
struct GridArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated split ids (default: every split in the dataset).
    #[arg(long, value_delimiter = ',')]
    splits: Vec<String>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    /// Parallel workers; results do not depend on this.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProtocolArg {
    Transductive,
    Inductive,
}

#[derive(Debug, Clone, Args)]
struct SweepArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Transductive, or inductive with vertices withheld during training.
    #[arg(long, value_enum, default_value = "transductive")]
    protocol: ProtocolArg,
    /// Inductive: fraction of vertices removed during training.
    #[arg(long, default_value_t = 0.4)]
    unseen_fraction: f64,
    /// Inductive: fraction of vertices used as training labels.
    #[arg(long, default_value_t = 0.2)]
    train_fraction: f64,
}

#[derive(Debug, Clone, Args)]
struct DepthArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Comma-separated variants to sweep (default: --model).
    #[arg(long, value_delimiter = ',')]
    models: Vec<Variant>,
    /// Comma-separated depths.
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32")]
    depths: Vec<usize>,
    /// Cells whose estimated tape size exceeds this many MiB are recorded as OOM.
    #[arg(long, default_value_t = 8192)]
    memory_budget_mb: usize,
}

#[derive(Debug, Clone, Args)]
struct EvalArgs {
    /// Weights stem written by `train --save-weights`.
    #[arg(long)]
    weights: PathBuf,
    /// Dataset JSON file.
    #[arg(long)]
    dataset: PathBuf,
    /// Split id inside the dataset file.
    #[arg(long, default_value = "0")]
    split: String,
    /// Which index list of the split to score.
    #[arg(long, value_enum, default_value = "test")]
    mask: MaskArg,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MaskArg {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Args)]
struct GwlArgs {
    /// First hypergraph JSON file.
    #[arg(long)]
    a: PathBuf,
    /// Second hypergraph JSON file.
    #[arg(long)]
    b: PathBuf,
    /// Upper bound on refinement iterations.
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    /// Write the verdict JSON to this file as well.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OpsArg {
    All,
    Engine,
    Models,
}

#[derive(Debug, Clone, Args)]
struct GradcheckArgs {
    /// Which checks to run.
    #[arg(long, value_enum, default_value = "all")]
    ops: OpsArg,
    /// First seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of consecutive seeds.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Maximum accepted relative error.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
    /// Write the summary JSON to this file as well.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct FixturesArgs {
    /// Directory to write into (created if missing).
    #[arg(long)]
    out_dir: PathBuf,
}

/// Options accepted in `--config` files. Every field is optional.
#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub model: Option<Variant>,
    pub layers: Option<usize>,
    pub hidden: Option<usize>,
    pub heads: Option<usize>,
    pub dropout: Option<f64>,
    pub input_dropout: Option<f64>,
    pub attn_dropout: Option<f64>,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub epsilon_learnable: Option<bool>,
    pub use_norm: Option<bool>,
    pub self_loops: Option<bool>,
    pub lr: Option<f64>,
    pub weight_decay: Option<WeightDecay>,
    pub epochs: Option<usize>,
    pub patience: Option<usize>,
    pub report_rule: Option<ReportRule>,
    pub split: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Debug)]
struct CliError {
    code: i32,
    kind: &'static str,
    message: String,
}

impl CliError {
    fn input(kind: &'static str, message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            kind,
            message: message.into(),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        let (code, kind) = if e.is_numerical() {
            (3, "numerical_failure")
        } else {
            match e {
                TrainError::Schema { .. } => (2, "schema_error"),
                TrainError::Io { .. } => (2, "io_error"),
                _ => (2, "invalid_input"),
            }
        };
        CliError {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

impl From<crate::layers::LayerError> for CliError {
    fn from(e: crate::layers::LayerError) -> Self {
        TrainError::from(e).into()
    }
}

fn read_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input("io_error", format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        CliError::input(
            "config_error",
            format!("{}: at '{}': {}", path.display(), e.path(), e.inner()),
        )
    })
}

/// Defaults, then the config file, then flags.
fn resolve(args: &ModelArgs, split: Option<&str>, seed: Option<u64>, bundle: &DatasetBundle) -> Result<TrainConfig, CliError> {
    let file = match &args.config {
        Some(p) => read_config(p)?,
        None => ConfigFile::default(),
    };
    let variant = args.model.or(file.model).unwrap_or(Variant::UniGcn);
    let mut c = TrainConfig::reference(ModelSpec::new(variant, bundle.feature_dim(), bundle.num_classes));
    macro_rules! set {
        ($target:expr, $file:expr, $flag:expr) => {
            if let Some(v) = $file {
                $target = v;
            }
            if let Some(v) = $flag {
                $target = v;
            }
        };
    }
    let m = &mut c.model;
    set!(m.num_layers, file.layers, args.layers);
    set!(m.hidden_dim, file.hidden, args.hidden);
    set!(m.heads, file.heads, args.heads);
    set!(m.dropout, file.dropout, args.dropout);
    set!(m.attention_dropout, file.attn_dropout, args.attn_dropout);
    set!(m.alpha, file.alpha, args.alpha);
    set!(m.lambda, file.lambda, args.lambda);
    if file.input_dropout.is_some() {
        m.input_dropout = file.input_dropout;
    }
    if args.input_dropout.is_some() {
        m.input_dropout = args.input_dropout;
    }
    set!(m.epsilon_learnable, file.epsilon_learnable, args.fixed_eps.then_some(false));
    set!(m.use_norm, file.use_norm, args.no_norm.then_some(false));
    if file.self_loops.is_some() {
        m.self_loops = file.self_loops;
    }
    if let Some(s) = args.self_loops {
        m.self_loops = Some(s == OnOff::On);
    }
    set!(c.lr, file.lr, args.lr);
    let flag_wd = match (args.wd, args.wd_conv, args.wd_dense) {
        (_, Some(conv), Some(dense)) => Some(WeightDecay::Split { conv, dense }),
        (Some(w), _, _) => Some(WeightDecay::Single(w)),
        _ => None,
    };
    set!(c.weight_decay, file.weight_decay, flag_wd);
    set!(c.epochs, file.epochs, args.epochs);
    set!(c.patience, file.patience, args.patience);
    let rule = args.report_rule.map(|r| match r {
        RuleArg::LastEpoch => ReportRule::LastEpoch,
        RuleArg::BestValidation => ReportRule::BestValidation,
    });
    set!(c.report_rule, file.report_rule, rule);
    set!(c.split_id, file.split, split.map(str::to_string));
    set!(c.seed, file.seed, seed);
    c.model.seed = c.seed;
    c.validate()?;
    Ok(c)
}

fn default_out(explicit: &Option<PathBuf>, command: &str) -> Option<PathBuf> {
    explicit
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(|d| PathBuf::from(d).join(format!("{command}.json"))))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::input("io_error", format!("{}: {e}", parent.display())))?;
    }
    let text = serde_json::to_string_pretty(value).expect("json serializes") + "\n";
    std::fs::write(path, text).map_err(|e| CliError::input("io_error", format!("{}: {e}", path.display())))
}

fn emit(
    stdout: &mut dyn Write,
    output: &OutputArgs,
    command: &str,
    value: &serde_json::Value,
    table: impl FnOnce() -> String,
) -> Result<(), CliError> {
    if let Some(path) = default_out(&output.out, command) {
        write_json(&path, value)?;
    }
    let text = match output.format {
        Format::Json => serde_json::to_string_pretty(value).expect("json serializes") + "\n",
        Format::Table => table(),
    };
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| CliError::input("io_error", e.to_string()))
}

/// Number of stratified splits drawn for datasets that ship without any.
pub const DEFAULT_SPLITS: usize = 10;

fn load(path: &Path) -> Result<DatasetBundle, CliError> {
    let mut bundle = load_dataset(path)?;
    bundle.ensure_splits(DEFAULT_SPLITS, &mut ChaCha8Rng::seed_from_u64(0));
    Ok(bundle)
}

fn all_splits(requested: &[String], bundle: &DatasetBundle) -> Result<Vec<String>, CliError> {
    if !requested.is_empty() {
        return Ok(requested.to_vec());
    }
    if bundle.splits.is_empty() {
        return Err(CliError::input("invalid_input", format!("dataset '{}' has no splits", bundle.name)));
    }
    Ok(bundle.splits.keys().cloned().collect())
}

fn cmd_train<T: Scalar>(args: &TrainArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let bundle = load(&args.model.dataset)?;
    let config = resolve(&args.model, args.split.as_deref(), args.seed, &bundle)?;
    let (timing, started) = crate::train::Timing::start();
    let run = train_transductive::<T>(&bundle, &config)?;
    if let Some(stem) = &args.save_weights {
        run.model
            .save(&stem.with_extension("bin"), &stem.with_extension("json"))?;
    }
    let report = RunReport::new(
        "transductive",
        &bundle.name,
        config.model.variant.to_string(),
        config,
        vec![run.record],
        timing.finish(started),
    );
    let value = serde_json::to_value(&report).expect("report serializes");
    emit(stdout, &args.output, "train", &value, || format_table(std::slice::from_ref(&report)))?;
    Ok(0)
}

fn cmd_eval<T: Scalar>(args: &EvalArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let bundle = load(&args.dataset)?;
    let model = Model::<T>::load(&args.weights.with_extension("bin"), &args.weights.with_extension("json"))?;
    let split = bundle.split(&args.split)?;
    let (name, mask) = match args.mask {
        MaskArg::Train => ("train", &split.train),
        MaskArg::Val => ("val", &split.val),
        MaskArg::Test => ("test", &split.test),
    };
    let acc = evaluate(&model, &bundle, mask)?;
    let value = json!({
        "dataset": bundle.name,
        "split": args.split,
        "mask": name,
        "accuracy": acc,
        "model": model.spec(),
    });
    emit(stdout, &args.output, "eval", &value, || {
        format!("{} {} {}: {:.1}%\n", bundle.name, args.split, name, 100.0 * acc)
    })?;
    Ok(0)
}

fn cmd_sweep<T: Scalar>(args: &SweepArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let g = &args.grid;
    let bundle = load(&g.model.dataset)?;
    let config = resolve(&g.model, None, None, &bundle)?;
    let protocol = match args.protocol {
        ProtocolArg::Transductive => SweepProtocol::Transductive,
        ProtocolArg::Inductive => SweepProtocol::Inductive {
            unseen_fraction: args.unseen_fraction,
            train_fraction: args.train_fraction,
        },
    };
    let splits = match (args.protocol, g.splits.is_empty()) {
        // inductive splits are drawn from the split id, so any ids will do
        (ProtocolArg::Inductive, true) => vec!["0".to_string()],
        _ => all_splits(&g.splits, &bundle)?,
    };
    let report = sweep::<T>(&bundle, &config, protocol, &grid(&splits, &g.seeds), g.jobs)?;
    let value = serde_json::to_value(&report).expect("report serializes");
    emit(stdout, &g.output, "sweep", &value, || format_table(std::slice::from_ref(&report)))?;
    Ok(0)
}

fn cmd_depth<T: Scalar>(args: &DepthArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let g = &args.grid;
    let bundle = load(&g.model.dataset)?;
    let models = if args.models.is_empty() {
        vec![g.model.model.unwrap_or(Variant::UniGcn)]
    } else {
        args.models.clone()
    };
    let mut bases = Vec::new();
    for v in models {
        let mut margs = g.model.clone();
        margs.model = Some(v);
        bases.push(resolve(&margs, None, None, &bundle)?);
    }
    let splits = all_splits(&g.splits, &bundle)?;
    let cells = depth_sweep::<T>(
        &bundle,
        &bases,
        &args.depths,
        &grid(&splits, &g.seeds),
        g.jobs,
        args.memory_budget_mb.saturating_mul(1 << 20),
    )?;
    let value = serde_json::to_value(&cells).expect("cells serialize");
    emit(stdout, &g.output, "depth-sweep", &value, || depth_table(&cells, &args.depths))?;
    Ok(0)
}

fn depth_table(cells: &[crate::train::DepthCell], depths: &[usize]) -> String {
    let mut rows = vec![std::iter::once("model".to_string())
        .chain(depths.iter().map(|d| d.to_string()))
        .collect::<Vec<_>>()];
    let mut variants: Vec<Variant> = cells.iter().map(|c| c.variant).collect();
    variants.dedup();
    for v in variants {
        let mut row = vec![v.to_string()];
        for &d in depths {
            let cell = cells.iter().find(|c| c.variant == v && c.depth == d);
            row.push(match cell {
                Some(c) => match (&c.report, &c.failure) {
                    (Some(r), _) => format!("{:.1} ± {:.1}", 100.0 * r.summary.test.mean, 100.0 * r.summary.test.std),
                    (None, Some(_)) => "OOM".into(),
                    _ => "-".into(),
                },
                None => "-".into(),
            });
        }
        rows.push(row);
    }
    crate::train::report_render(&rows)
}

fn cmd_ablate<T: Scalar>(args: &GridArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let bundle = load(&args.model.dataset)?;
    let config = resolve(&args.model, None, None, &bundle)?;
    let splits = all_splits(&args.splits, &bundle)?;
    let (with, without) = self_loop_ablation::<T>(&bundle, &config, &grid(&splits, &args.seeds), args.jobs)?;
    let value = json!({ "with_self_loops": with, "without_self_loops": without });
    emit(stdout, &args.output, "ablate-selfloops", &value, || format_table(&[with.clone(), without.clone()]))?;
    Ok(0)
}

fn cmd_gwl(args: &GwlArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let read = |p: &Path| IncidenceStructure::load_json(p).map_err(|e| CliError::input("input_error", e.to_string()));
    let (a, b) = (read(&args.a)?, read(&args.b)?);
    let d = distinguish(&a, &b, args.max_iters);
    let value = serde_json::to_value(d).expect("verdict serializes");
    if let Some(p) = &args.out {
        write_json(p, &value)?;
    }
    writeln!(stdout, "{value}").map_err(|e| CliError::input("io_error", e.to_string()))?;
    Ok(match d.verdict {
        Verdict::Distinguishable => 1,
        Verdict::NotDistinguished => 0,
    })
}

fn cmd_gradcheck(args: &GradcheckArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let mut results = Vec::new();
    for seed in args.seed..args.seed + args.seeds.max(1) {
        if args.ops != OpsArg::Models {
            let ops = op_suite(seed).map_err(|e| CliError {
                code: 3,
                kind: "numerical_failure",
                message: e.to_string(),
            })?;
            results.extend(ops.into_iter().map(|r| (seed, r)));
        }
        if args.ops != OpsArg::Engine {
            results.extend(model_suite(seed)?.into_iter().map(|r| (seed, format_model(r))));
        }
    }
    let max = results.iter().map(|(_, r)| r.max_rel_error).fold(0.0, f64::max);
    let failures: Vec<_> = results
        .iter()
        .filter(|(_, r)| !r.passed(args.tolerance))
        .map(|(s, r)| json!({"seed": s, "name": r.name, "rel_error": r.max_rel_error}))
        .collect();
    let value = json!({
        "checks": results.len(),
        "max_rel_error": max,
        "tolerance": args.tolerance,
        "failures": failures,
    });
    if let Some(p) = &args.out {
        write_json(p, &value)?;
    }
    writeln!(stdout, "{}", serde_json::to_string_pretty(&value).expect("json"))
        .map_err(|e| CliError::input("io_error", e.to_string()))?;
    Ok(if failures.is_empty() { 0 } else { 3 })
}

fn format_model(mut r: crate::autodiff::gradcheck::GradCheck) -> crate::autodiff::gradcheck::GradCheck {
    r.name = format!("model:{}", r.name);
    r
}

/// Hand-checkable inputs used in the docs and tests.
pub fn fixture_files() -> Vec<(&'static str, serde_json::Value)> {
    let hg = |n: usize, edges: &[&[usize]]| {
        let h = IncidenceStructure::build(n, edges).expect("fixture is valid");
        serde_json::to_value(h.to_json()).expect("json")
    };
    let mini = json!({
        "name": "mini",
        "num_vertices": 3,
        "hyperedges": [[0, 1], [1, 2]],
        "features": {"dense": [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]},
        "labels": [0, 1, 1],
        "num_classes": 2,
        "splits": {"0": {"train": [0, 1], "test": [2]}}
    });
    let planted = planted_partition(&SyntheticConfig {
        num_vertices: 200,
        num_edges: 120,
        feature_dim: 32,
        label_rate: 0.1,
        ..SyntheticConfig::default()
    });
    vec![
        // same clique expansion, different hypergraphs
        ("single_edge.json", hg(3, &[&[0, 1, 2]])),
        ("pairwise_triangle.json", hg(3, &[&[0, 1], &[1, 2], &[0, 2]])),
        ("path.json", hg(4, &[&[0, 1], &[1, 2, 3]])),
        ("path_permuted.json", hg(4, &[&[3, 2], &[2, 1, 0]])),
        ("mini_dataset.json", mini),
        ("planted_dataset.json", serde_json::to_value(planted.to_json()).expect("json")),
    ]
}

fn cmd_fixtures(args: &FixturesArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::input("io_error", format!("{}: {e}", args.out_dir.display())))?;
    let mut written = Vec::new();
    for (name, value) in fixture_files() {
        let path = args.out_dir.join(name);
        let text = serde_json::to_string(&value).expect("json") + "\n";
        std::fs::write(&path, text).map_err(|e| CliError::input("io_error", format!("{}: {e}", path.display())))?;
        written.push(path.display().to_string());
    }
    writeln!(stdout, "{}", json!({ "written": written })).map_err(|e| CliError::input("io_error", e.to_string()))?;
    Ok(0)
}

macro_rules! by_precision {
    ($p:expr, $f:ident, $args:expr, $out:expr) => {
        match $p {
            Precision::F32 => $f::<f32>($args, $out),
            Precision::F64 => $f::<f64>($args, $out),
        }
    };
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write) -> Result<i32, CliError> {
    match &cli.command {
        Command::Train(a) => by_precision!(a.output.precision, cmd_train, a, stdout),
        Command::Eval(a) => by_precision!(a.output.precision, cmd_eval, a, stdout),
        Command::Sweep(a) => by_precision!(a.grid.output.precision, cmd_sweep, a, stdout),
        Command::DepthSweep(a) => by_precision!(a.grid.output.precision, cmd_depth, a, stdout),
        Command::AblateSelfloops(a) => by_precision!(a.output.precision, cmd_ablate, a, stdout),
        Command::Gwl(a) => cmd_gwl(a, stdout),
        Command::Gradcheck(a) => cmd_gradcheck(a, stdout),
        Command::Fixtures(a) => cmd_fixtures(a, stdout),
    }
}

/// Runs the CLI with explicit output streams and returns the exit code.
pub fn run_with<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{}", e.render());
                return 0;
            }
            let msg = json!({"error": "usage", "message": e.render().to_string().trim_end(), "exit_code": 2});
            let _ = writeln!(stderr, "{msg}");
            return 2;
        }
    };
    match dispatch(&cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let msg = json!({"error": e.kind, "message": e.message, "exit_code": e.code});
            let _ = writeln!(stderr, "{msg}");
            e.code
        }
    }
}

/// Runs the CLI on the process streams.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_with(std::iter::once("unignn").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let (code, _, err) = call(&["gwl", "--a", "x", "--b", "y", "--bogus"]);
        assert_eq!(code, 2);
        let v: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
        assert_eq!(v["error"], "usage");
    }

    #[test]
    fn help_exits_zero_for_every_subcommand() {
        for sub in ["train", "eval", "sweep", "depth-sweep", "ablate-selfloops", "gwl", "gradcheck", "fixtures"] {
            let (code, out, _) = call(&[sub, "--help"]);
            assert_eq!(code, 0, "{sub}");
            assert!(out.contains("Usage"), "{sub}");
        }
    }

    #[test]
    fn missing_file_is_input_error() {
        let (code, _, err) = call(&["gwl", "--a", "/nonexistent/a.json", "--b", "/nonexistent/b.json"]);
        assert_eq!(code, 2);
        assert!(err.contains("input_error"));
    }

    #[test]
    fn config_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"model": "unigat", "hidden": 16, "lr": 0.05, "epochs": 7}"#).unwrap();
        let bundle = DatasetBundle::from_json(serde_json::from_value(fixture_files()[4].1.clone()).unwrap()).unwrap();
        let args = TrainArgs::try_parse_from_args(&["--dataset", "d.json", "--config", cfg.to_str().unwrap(), "--epochs", "3"]);
        let c = resolve(&args.model, None, None, &bundle).unwrap();
        assert_eq!(c.model.variant, Variant::UniGat);
        assert_eq!(c.model.hidden_dim, 16);
        assert_eq!(c.lr, 0.05);
        assert_eq!(c.epochs, 3);
        assert_eq!(c.model.heads, 8);
    }

    #[test]
    fn config_file_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"learning_rate": 0.1}"#).unwrap();
        let err = read_config(&cfg).unwrap_err();
        assert_eq!(err.code, 2);
    }

    impl TrainArgs {
        fn try_parse_from_args(args: &[&str]) -> TrainArgs {
            #[derive(Parser)]
            struct Wrap {
                #[command(flatten)]
                inner: TrainArgs,
            }
            Wrap::try_parse_from(std::iter::once("t").chain(args.iter().copied())).unwrap().inner
        }
    }
}
