use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, Matrix, Scalar, Tape};
use crate::layers::{LayerContext, Model, Variant};

use super::config::{dataset_overrides, Protocol, ReportRule, TrainConfig};
use super::dataset::{DatasetBundle, Split};
use super::report::{RunRecord, RunReport, Timing};
use super::TrainError;

/// A finished run together with the weights that were evaluated.
#[derive(Debug, Clone)]
pub struct TrainedRun<T> {
    pub record: RunRecord,
    pub model: Model<T>,
}

/// Fraction of `mask` rows whose arg-max logit equals the label.
pub fn accuracy<T: Scalar>(logits: &Matrix<T>, labels: &[usize], mask: &[usize]) -> Result<f64, TrainError> {
    if mask.is_empty() {
        return Err(TrainError::EmptyMask("accuracy".into()));
    }
    let pred = logits.argmax_rows();
    let correct = mask.iter().filter(|&&v| pred[v] == labels[v]).count();
    Ok(correct as f64 / mask.len() as f64)
}

/// Mean cross-entropy over `mask`, computed in `f64`.
pub fn cross_entropy<T: Scalar>(logits: &Matrix<T>, labels: &[usize], mask: &[usize]) -> f64 {
    let mut total = 0.0;
    for &v in mask {
        let row: Vec<f64> = logits.row(v).iter().map(|x| x.as_f64()).collect();
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        total += lse - row[labels[v]];
    }
    total / mask.len().max(1) as f64
}

fn check_dims<T: Scalar>(model: &Model<T>, bundle: &DatasetBundle) -> Result<(), TrainError> {
    let s = model.spec();
    if s.input_dim != bundle.feature_dim() || s.num_classes != bundle.num_classes {
        return Err(TrainError::DimensionMismatch(format!(
            "model expects {} features and {} classes, dataset '{}' has {} and {}",
            s.input_dim,
            s.num_classes,
            bundle.name,
            bundle.feature_dim(),
            bundle.num_classes
        )));
    }
    Ok(())
}

/// Accuracy of `model` on `mask`, with one eval-mode pass over the full hypergraph.
pub fn evaluate<T: Scalar>(model: &Model<T>, bundle: &DatasetBundle, mask: &[usize]) -> Result<f64, TrainError> {
    check_dims(model, bundle)?;
    if mask.is_empty() {
        return Err(TrainError::EmptyMask("evaluation".into()));
    }
    let ctx = model.prepare(&bundle.hypergraph)?;
    let logits = model.predict(&ctx, &bundle.features.cast())?;
    accuracy(&logits, &bundle.labels, mask)
}

/// The configuration a protocol actually runs: dataset overrides applied and
/// the run seed copied into the model spec.
pub fn effective_config(bundle: &DatasetBundle, config: &TrainConfig, protocol: Protocol) -> TrainConfig {
    let mut c = config.clone();
    dataset_overrides(&bundle.name, protocol).apply(&mut c);
    c.model.seed = c.seed;
    c
}

struct FitOutcome {
    epochs_run: usize,
    reported_epoch: usize,
    val_accuracy: Option<f64>,
    loss_before: f64,
    loss_after: f64,
}

/// Full-batch Adam on `train` rows of one context. Validation (when given)
/// is evaluated on the same context after every epoch.
fn fit<T: Scalar>(
    model: &mut Model<T>,
    ctx: &LayerContext<T>,
    x: &Matrix<T>,
    labels: &[usize],
    train: &[usize],
    val: &[usize],
    config: &TrainConfig,
) -> Result<FitOutcome, TrainError> {
    if train.is_empty() {
        return Err(TrainError::EmptyMask("training".into()));
    }
    let needs_val = config.report_rule == ReportRule::BestValidation || config.patience > 0;
    if needs_val && val.is_empty() {
        return Err(TrainError::InvalidConfig(
            "best-validation reporting and early stopping need a non-empty validation split".into(),
        ));
    }
    let labels_arc = Arc::new(labels.to_vec());
    let train_arc = Arc::new(train.to_vec());
    let wd: Vec<f64> = model
        .params()
        .iter()
        .map(|p| config.weight_decay.for_group(p.group))
        .collect();
    let mut adam = Adam::new(config.adam(), model.params().iter().map(|p| &p.value));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);

    let loss_before = cross_entropy(&model.predict(ctx, x)?, labels, train);
    let mut best: Option<(f64, usize, Vec<Matrix<T>>)> = None;
    let mut since_best = 0;
    let mut epochs_run = 0;
    let mut last_val = None;
    for epoch in 1..=config.epochs {
        let mut tape = Tape::new();
        let params = model.bind(&mut tape);
        let xv = tape.constant(x.clone());
        let logits = model.forward_bound(&mut tape, &params, ctx, xv, true, &mut rng)?;
        let loss = tape.softmax_cross_entropy(logits, labels_arc.clone(), train_arc.clone())?;
        let value = tape.value(loss).get(0, 0).as_f64();
        if !value.is_finite() {
            let norms = model
                .params()
                .iter()
                .map(|p| format!("{}={:.3e}", p.name, p.value.frobenius_norm()))
                .collect::<Vec<_>>()
                .join(", ");
            return Err(TrainError::NonFiniteLoss {
                epoch,
                loss: value,
                diagnostics: norms,
            });
        }
        tape.backward(loss)?;
        let grads: Vec<Option<&Matrix<T>>> = params.iter().map(|&p| tape.grad(p)).collect();
        let mut values: Vec<&mut Matrix<T>> = model.params_mut().iter_mut().map(|p| &mut p.value).collect();
        adam.step(&mut values, &grads, &wd);
        epochs_run = epoch;

        if needs_val {
            let acc = accuracy(&model.predict(ctx, x)?, labels, val)?;
            last_val = Some(acc);
            if best.as_ref().is_none_or(|b| acc > b.0) {
                let snapshot = model.params().iter().map(|p| p.value.clone()).collect();
                best = Some((acc, epoch, snapshot));
                since_best = 0;
            } else {
                since_best += 1;
                if config.patience > 0 && since_best >= config.patience {
                    break;
                }
            }
        }
    }
    let (reported_epoch, val_accuracy) = match (config.report_rule, best) {
        (ReportRule::BestValidation, Some((acc, epoch, snapshot))) => {
            for (p, v) in model.params_mut().iter_mut().zip(snapshot) {
                p.value = v;
            }
            (epoch, Some(acc))
        }
        _ => (epochs_run, last_val),
    };
    let loss_after = cross_entropy(&model.predict(ctx, x)?, labels, train);
    Ok(FitOutcome {
        epochs_run,
        reported_epoch,
        val_accuracy,
        loss_before,
        loss_after,
    })
}

fn record(config: &TrainConfig, fit: &FitOutcome, test: f64) -> RunRecord {
    RunRecord {
        split_id: config.split_id.clone(),
        seed: config.seed,
        test_accuracy: test,
        val_accuracy: fit.val_accuracy,
        seen_accuracy: None,
        unseen_accuracy: None,
        epochs_run: fit.epochs_run,
        reported_epoch: fit.reported_epoch,
        train_loss_before: fit.loss_before,
        train_loss_after: fit.loss_after,
    }
}

fn transductive_on_split<T: Scalar>(
    bundle: &DatasetBundle,
    config: &TrainConfig,
    split: &Split,
) -> Result<TrainedRun<T>, TrainError> {
    config.validate()?;
    let mut model = Model::<T>::new(config.model.clone())?;
    check_dims(&model, bundle)?;
    let ctx = model.prepare(&bundle.hypergraph)?;
    let x: Matrix<T> = bundle.features.cast();
    let fit = fit(&mut model, &ctx, &x, &bundle.labels, &split.train, &split.val, config)?;
    let test = accuracy(&model.predict(&ctx, &x)?, &bundle.labels, &split.test)?;
    Ok(TrainedRun {
        record: record(config, &fit, test),
        model,
    })
}

/// Semi-supervised training on the full hypergraph with the split named by
/// `config.split_id`; test accuracy follows `config.report_rule`.
pub fn train_transductive<T: Scalar>(bundle: &DatasetBundle, config: &TrainConfig) -> Result<TrainedRun<T>, TrainError> {
    let config = effective_config(bundle, config, Protocol::Transductive);
    let split = bundle.split(&config.split_id)?.clone();
    transductive_on_split(bundle, &config, &split)
}

/// Vertex partition for the inductive protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InductiveSplit {
    pub train: Vec<usize>,
    pub seen_test: Vec<usize>,
    pub unseen: Vec<usize>,
}

impl InductiveSplit {
    /// Shuffles the vertices; the first `unseen_fraction` become unseen, the
    /// next `train_fraction` train, and the rest seen test vertices.
    pub fn sample(n: usize, unseen_fraction: f64, train_fraction: f64, seed: u64) -> Result<Self, TrainError> {
        if !(0.0..1.0).contains(&unseen_fraction)
            || !(train_fraction > 0.0 && unseen_fraction + train_fraction <= 1.0)
        {
            return Err(TrainError::InvalidConfig(format!(
                "fractions unseen={unseen_fraction}, train={train_fraction} do not fit in [0, 1]"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let nu = (unseen_fraction * n as f64).round() as usize;
        let nt = ((train_fraction * n as f64).round() as usize).clamp(1, n - nu);
        let take = |range: std::ops::Range<usize>| {
            let mut v = order[range].to_vec();
            v.sort_unstable();
            v
        };
        Ok(InductiveSplit {
            unseen: take(0..nu),
            train: take(nu..nu + nt),
            seen_test: take(nu + nt..n),
        })
    }

    pub fn visible(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.train.iter().chain(&self.seen_test).copied().collect();
        v.sort_unstable();
        v
    }
}

/// Seed for deriving a split from its id.
pub fn split_seed(split_id: &str) -> u64 {
    split_id.parse().unwrap_or_else(|_| {
        split_id
            .bytes()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
    })
}

/// Trains on the hypergraph induced by the visible vertices only. Neither
/// features nor structure of unseen vertices are read.
pub fn train_on_visible<T: Scalar>(
    bundle: &DatasetBundle,
    split: &InductiveSplit,
    config: &TrainConfig,
) -> Result<Model<T>, TrainError> {
    Ok(fit_visible(bundle, split, config)?.0)
}

fn fit_visible<T: Scalar>(
    bundle: &DatasetBundle,
    split: &InductiveSplit,
    config: &TrainConfig,
) -> Result<(Model<T>, FitOutcome), TrainError> {
    // no validation vertices exist in this protocol
    let mut config = config.clone();
    config.report_rule = ReportRule::LastEpoch;
    config.patience = 0;
    let config = &config;
    config.validate()?;
    let mut model = Model::<T>::new(config.model.clone())?;
    check_dims(&model, bundle)?;
    let visible = split.visible();
    let (sub, map) = bundle.hypergraph.induce(&visible)?;
    let x: Matrix<T> = bundle.features.select_rows(&visible).cast();
    let labels: Vec<usize> = visible.iter().map(|&v| bundle.labels[v]).collect();
    let train: Vec<usize> = split.train.iter().map(|&v| map[v].expect("train vertices are visible")).collect();
    let ctx = model.prepare(&sub)?;
    let fit = fit(&mut model, &ctx, &x, &labels, &train, &[], config)?;
    Ok((model, fit))
}

/// Inductive protocol: train on `induce(H, V \ unseen)`, then evaluate one
/// forward pass on the full hypergraph. The split is drawn from the split id.
pub fn train_inductive<T: Scalar>(
    bundle: &DatasetBundle,
    config: &TrainConfig,
    unseen_fraction: f64,
    train_fraction: f64,
) -> Result<TrainedRun<T>, TrainError> {
    let mut config = effective_config(bundle, config, Protocol::Inductive);
    config.report_rule = ReportRule::LastEpoch;
    config.patience = 0;
    let split = InductiveSplit::sample(
        bundle.num_vertices(),
        unseen_fraction,
        train_fraction,
        split_seed(&config.split_id),
    )?;
    let (model, fit) = fit_visible::<T>(bundle, &split, &config)?;
    let ctx = model.prepare(&bundle.hypergraph)?;
    let logits = model.predict(&ctx, &bundle.features.cast())?;
    let seen = accuracy(&logits, &bundle.labels, &split.seen_test)?;
    let unseen = if split.unseen.is_empty() {
        None
    } else {
        Some(accuracy(&logits, &bundle.labels, &split.unseen)?)
    };
    let mut all_test = split.seen_test.clone();
    all_test.extend(&split.unseen);
    let mut rec = record(&config, &fit, accuracy(&logits, &bundle.labels, &all_test)?);
    rec.seen_accuracy = Some(seen);
    rec.unseen_accuracy = unseen;
    Ok(TrainedRun { record: rec, model })
}

/// Which protocol a sweep repeats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "snake_case")]
pub enum SweepProtocol {
    Transductive,
    Inductive { unseen_fraction: f64, train_fraction: f64 },
}

fn run_grid<F>(grid: &[(String, u64)], jobs: usize, run: F) -> Result<Vec<RunRecord>, TrainError>
where
    F: Fn(&str, u64) -> Result<RunRecord, TrainError> + Sync,
{
    if grid.is_empty() {
        return Err(TrainError::InvalidConfig("empty (split, seed) grid".into()));
    }
    if jobs <= 1 {
        return grid.iter().map(|(s, seed)| run(s, *seed)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| TrainError::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| grid.par_iter().map(|(s, seed)| run(s, *seed)).collect())
}

/// The (split, seed) cross product in row-major order.
pub fn grid(splits: &[String], seeds: &[u64]) -> Vec<(String, u64)> {
    splits
        .iter()
        .flat_map(|s| seeds.iter().map(move |&seed| (s.clone(), seed)))
        .collect()
}

/// Repeats a protocol over `grid` and aggregates. Results are identical for
/// any `jobs`, because each run owns its model and random streams.
pub fn sweep<T: Scalar>(
    bundle: &DatasetBundle,
    config: &TrainConfig,
    protocol: SweepProtocol,
    grid: &[(String, u64)],
    jobs: usize,
) -> Result<RunReport, TrainError> {
    let (timing, started) = Timing::start();
    let runs = run_grid(grid, jobs, |split, seed| {
        let mut c = config.clone();
        c.split_id = split.to_string();
        c.seed = seed;
        let run = match protocol {
            SweepProtocol::Transductive => train_transductive::<T>(bundle, &c)?,
            SweepProtocol::Inductive {
                unseen_fraction,
                train_fraction,
            } => train_inductive::<T>(bundle, &c, unseen_fraction, train_fraction)?,
        };
        Ok(run.record)
    })?;
    let (name, proto) = match protocol {
        SweepProtocol::Transductive => ("transductive", Protocol::Transductive),
        SweepProtocol::Inductive { .. } => ("inductive", Protocol::Inductive),
    };
    let echo = effective_config(bundle, config, proto);
    Ok(RunReport::new(
        name,
        &bundle.name,
        config.model.variant.to_string(),
        echo,
        runs,
        timing.finish(started),
    ))
}

/// One (model, depth) entry of a depth sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthCell {
    pub variant: Variant,
    pub depth: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<RunReport>,
    /// Set instead of `report` when the cell could not run (e.g. `"OOM"`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Moves a seeded 20% of the test vertices into validation.
pub fn carve_validation(split: &Split, seed: u64) -> Split {
    let mut test = split.test.clone();
    test.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let nv = (0.2 * test.len() as f64).round() as usize;
    let mut val: Vec<usize> = test[..nv].to_vec();
    let mut rest = test[nv..].to_vec();
    val.extend(&split.val);
    val.sort_unstable();
    rest.sort_unstable();
    Split {
        train: split.train.clone(),
        val,
        test: rest,
    }
}

/// Rough upper bound on the bytes a training step keeps on the tape.
pub fn estimated_tape_bytes<T: Scalar>(config: &TrainConfig, bundle: &DatasetBundle) -> usize {
    let s = &config.model;
    let h = &bundle.hypergraph;
    let pairs = h.num_incidences() + h.num_vertices();
    let rows = h.num_vertices() + h.num_edges() + pairs;
    let width = s.hidden_dim.max(s.num_classes) * s.heads;
    let input = bundle.num_vertices() * bundle.feature_dim();
    T::BYTES * (2 * input + 12 * s.num_layers * rows * width)
}

/// Depth table: for every base configuration and depth, a sweep over `grid`
/// with 20% of each test split held out for validation. Shallow models report
/// their best-validation epoch; `UniGcnii` keeps its own stopping rule.
pub fn depth_sweep<T: Scalar>(
    bundle: &DatasetBundle,
    bases: &[TrainConfig],
    depths: &[usize],
    grid: &[(String, u64)],
    jobs: usize,
    memory_budget_bytes: usize,
) -> Result<Vec<DepthCell>, TrainError> {
    if depths.is_empty() {
        return Err(TrainError::InvalidConfig("depths must be non-empty".into()));
    }
    let mut cells = Vec::new();
    for base in bases {
        for &depth in depths {
            let mut config = base.clone();
            config.model.num_layers = depth;
            if config.model.variant != Variant::UniGcnii {
                config.report_rule = ReportRule::BestValidation;
            }
            let need = estimated_tape_bytes::<T>(&config, bundle);
            if need > memory_budget_bytes {
                cells.push(DepthCell {
                    variant: config.model.variant,
                    depth,
                    report: None,
                    failure: Some(format!("OOM (estimated {need} bytes > budget {memory_budget_bytes})")),
                });
                continue;
            }
            let (timing, started) = Timing::start();
            let runs = run_grid(grid, jobs, |split_id, seed| {
                let mut c = effective_config(bundle, &config, Protocol::DepthSweep);
                c.split_id = split_id.to_string();
                c.seed = seed;
                c.model.seed = seed;
                let split = carve_validation(bundle.split(split_id)?, split_seed(split_id));
                Ok(transductive_on_split::<T>(bundle, &c, &split)?.record)
            })?;
            let label = format!("{} L={depth}", config.model.variant);
            cells.push(DepthCell {
                variant: config.model.variant,
                depth,
                report: Some(RunReport::new(
                    "depth_sweep",
                    &bundle.name,
                    label,
                    config,
                    runs,
                    timing.finish(started),
                )),
                failure: None,
            });
        }
    }
    Ok(cells)
}

/// Same pipeline with and without hyperedge self-loops; returns (with, without).
pub fn self_loop_ablation<T: Scalar>(
    bundle: &DatasetBundle,
    config: &TrainConfig,
    grid: &[(String, u64)],
    jobs: usize,
) -> Result<(RunReport, RunReport), TrainError> {
    if !matches!(config.model.variant, Variant::UniGcn | Variant::UniGat) {
        return Err(TrainError::InvalidConfig(format!(
            "self-loop ablation applies to unigcn and unigat, not {}",
            config.model.variant
        )));
    }
    let arm = |loops: bool| -> Result<RunReport, TrainError> {
        let mut c = config.clone();
        c.model.self_loops = Some(loops);
        let mut r = sweep::<T>(bundle, &c, SweepProtocol::Transductive, grid, jobs)?;
        r.protocol = "self_loop_ablation".into();
        r.label = format!("{} {}", c.model.variant, if loops { "with self-loops" } else { "without self-loops" });
        Ok(r)
    };
    Ok((arm(true)?, arm(false)?))
}
