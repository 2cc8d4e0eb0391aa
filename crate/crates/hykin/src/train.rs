//! Training loop: shuffled minibatches on a fresh tape per step, grouped
//! optimizer updates, per-epoch metrics, checkpointing, and retrieval
//! evaluation.
//!
//! Determinism contract: for a fixed config (including seed) the metrics
//! file and checkpoint are byte-identical across runs. All randomness flows
//! from seeded ChaCha streams, batches iterate in shuffled-index order, and
//! no wall-clock quantity is ever written to an output file.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::checkpoint;
use crate::config::TrainConfig;
use crate::data::{make_batch, Dataset, Split};
use crate::error::{Error, Result};
use crate::model::{retrieval_metrics, Mode, Model};
use crate::optim::{clip_global_grad_norm, LrSchedule, OptimConfig, Optimizer, ParamStore};
use crate::stgcn::PARTS;

/// Distinct stream tag for the epoch-shuffle RNG, so parameter
/// initialization (seeded with the raw seed) and batch order never share a
/// stream.
const SHUFFLE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;
/// Stream tag for evaluation-time keypoint noise.
const NOISE_STREAM: u64 = 0x517c_c1b7_2722_0a95;

/// Quantities logged once per epoch. Losses and radii are means over the
/// epoch's steps; `alpha` and `c` are their values at the epoch's last step.
#[derive(Debug, Clone, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub ce: f64,
    pub hyp: f64,
    pub alpha: f64,
    pub c: f64,
    /// Mean geodesic distance from the origin per part, [`PARTS`] order.
    pub radii: Vec<f64>,
}

/// Evaluation-split summary: pose→text retrieval plus teacher-forced token
/// accuracy, with the loss values and per-part radii on the same pass.
#[derive(Debug, Clone, Serialize)]
pub struct EvalMetrics {
    pub top1: f64,
    pub top5: f64,
    pub token_accuracy: f64,
    pub ce: f64,
    pub hyp: f64,
    pub radii: Vec<f64>,
}

/// Everything a finished run hands back to callers (ablations, tests, CLI).
pub struct TrainOutput {
    pub metrics: Vec<EpochMetrics>,
    pub eval: EvalMetrics,
    pub model: Model,
    pub store: ParamStore,
    /// Paths written when the run persists artifacts.
    pub metrics_path: Option<PathBuf>,
    pub checkpoint_path: Option<PathBuf>,
}

/// Train from a persisted dataset (`cfg.dataset`), writing `metrics.jsonl`
/// and `model.ckpt` into `cfg.out_dir`.
pub fn train(cfg: &TrainConfig) -> Result<TrainOutput> {
    let ds = Dataset::load(Path::new(&cfg.dataset))?;
    train_with(cfg, &ds, true)
}

/// Train on an in-memory dataset. With `persist` the run writes
/// `metrics.jsonl` and `model.ckpt` under `cfg.out_dir`; without, nothing
/// touches the filesystem (used by ablations that only need the numbers).
pub fn train_with(cfg: &TrainConfig, ds: &Dataset, persist: bool) -> Result<TrainOutput> {
    cfg.validate()?;
    check_dataset_matches(cfg, ds)?;

    let (model, mut store) = Model::init(cfg, ds.vocab_size)?;
    let mut optimizer = Optimizer::new(OptimConfig {
        lr: cfg.lr,
        hyp_lr: cfg.hyp_lr,
        weight_decay: cfg.weight_decay,
        grad_clip_norm: cfg.grad_clip,
        ..OptimConfig::default()
    });
    let schedule = LrSchedule::new(cfg.warmup_epochs, cfg.epochs as f64, cfg.lr, cfg.min_lr);

    let train_idx = ds.indices(Split::Train);
    let steps_per_epoch = train_idx.len().div_ceil(cfg.batch_size);
    let total_steps = steps_per_epoch * cfg.epochs;
    if steps_per_epoch == 0 {
        return Err(Error::Dataset("no training samples".into()));
    }

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SHUFFLE_STREAM);
    let mut metrics = Vec::with_capacity(cfg.epochs);
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        let mut order = train_idx.clone();
        order.shuffle(&mut shuffle_rng);

        let mut ce_sum = 0.0;
        let mut hyp_sum = 0.0;
        let mut radii_sum = vec![0.0; PARTS.len()];
        let mut alpha_last = 0.0;
        let mut c_last = model.c0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = make_batch(ds, chunk, None)?;
            let ctx = store.step()?;
            let out = model.forward(&ctx, &batch, step, total_steps, Mode::Train)?;
            let loss_value = out.loss.scalar_value()?;
            if !loss_value.is_finite() {
                let dump = dump_bad_batch(cfg, &batch, &out, epoch, step, persist)?;
                return Err(Error::NonFiniteLoss { epoch, step, dump });
            }
            out.loss.backward()?;
            let mut grads = ctx.grads(&store);
            clip_global_grad_norm(&mut grads, cfg.grad_clip);
            let lr_factor = schedule.factor(step as f64 / steps_per_epoch as f64);
            optimizer.step(&mut store, &grads, lr_factor, out.c)?;

            ce_sum += out.ce.scalar_value()?;
            hyp_sum += out.hyp.scalar_value()?;
            for (acc, r) in radii_sum.iter_mut().zip(&out.radii) {
                *acc += r;
            }
            alpha_last = out.alpha.scalar_value()?;
            c_last = out.c;
            step += 1;
        }

        let n = steps_per_epoch as f64;
        metrics.push(EpochMetrics {
            epoch,
            ce: ce_sum / n,
            hyp: hyp_sum / n,
            alpha: alpha_last,
            c: c_last,
            radii: radii_sum.iter().map(|r| r / n).collect(),
        });
    }

    let eval = evaluate(&model, &store, ds, cfg.eval_noise, cfg.seed)?;

    let (metrics_path, checkpoint_path) = if persist {
        let out_dir = PathBuf::from(&cfg.out_dir);
        fs::create_dir_all(&out_dir)?;
        let m_path = out_dir.join("metrics.jsonl");
        write_metrics(&m_path, cfg, &metrics, &eval)?;
        let c_path = out_dir.join("model.ckpt");
        let manifest_cfg = serde_json::json!({
            "config": cfg.to_json(),
            "vocab": ds.vocab_size,
        });
        checkpoint::save(&c_path, &store, &manifest_cfg)?;
        (Some(m_path), Some(c_path))
    } else {
        (None, None)
    };

    Ok(TrainOutput {
        metrics,
        eval,
        model,
        store,
        metrics_path,
        checkpoint_path,
    })
}

/// Score the evaluation split in a single pass: pose→text retrieval over
/// all eval samples, teacher-forced token accuracy, and the loss values.
/// `sigma > 0` perturbs raw keypoints (before anchor normalization) with
/// seeded Gaussian noise, the robustness-ablation setting.
pub fn evaluate(
    model: &Model,
    store: &ParamStore,
    ds: &Dataset,
    sigma: f64,
    seed: u64,
) -> Result<EvalMetrics> {
    let idx = ds.indices(Split::Eval);
    if idx.is_empty() {
        return Err(Error::Dataset("no evaluation samples".into()));
    }
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed ^ NOISE_STREAM);
    let noise = if sigma > 0.0 {
        Some((&mut noise_rng, sigma))
    } else {
        None
    };
    let batch = make_batch(ds, &idx, noise)?;
    let ctx = store.eval()?;
    let total_steps = 1; // schedule position is irrelevant at evaluation
    let out = model.forward(&ctx, &batch, total_steps, total_steps, Mode::Eval)?;
    let emb = out
        .embeddings
        .expect("eval mode always fills embeddings");
    let dists = emb.distances(out.c)?;
    let (top1, top5) = retrieval_metrics(&dists, &batch.labels)?;
    Ok(EvalMetrics {
        top1,
        top5,
        token_accuracy: out.token_correct as f64 / out.token_total.max(1) as f64,
        ce: out.ce.scalar_value()?,
        hyp: out.hyp.scalar_value()?,
        radii: out.radii,
    })
}

pub(crate) fn check_dataset_matches(cfg: &TrainConfig, ds: &Dataset) -> Result<()> {
    if ds.gen.labels != cfg.labels
        || ds.gen.frames != cfg.frames
        || ds.gen.samples_per_class != cfg.samples_per_class
    {
        return Err(Error::Dataset(format!(
            "dataset shape (labels={}, samples_per_class={}, frames={}) does not match \
             config (labels={}, samples_per_class={}, frames={})",
            ds.gen.labels,
            ds.gen.samples_per_class,
            ds.gen.frames,
            cfg.labels,
            cfg.samples_per_class,
            cfg.frames
        )));
    }
    Ok(())
}

fn write_metrics(
    path: &Path,
    cfg: &TrainConfig,
    metrics: &[EpochMetrics],
    eval: &EvalMetrics,
) -> Result<()> {
    let mut f = fs::File::create(path)?;
    let header = serde_json::json!({
        "format": "hykin-metrics",
        "version": 1,
        "config": cfg.to_json(),
    });
    writeln!(f, "{header}")?;
    for m in metrics {
        writeln!(f, "{}", serde_json::to_string(m)?)?;
    }
    writeln!(f, "{}", serde_json::json!({ "eval": eval }))?;
    Ok(())
}

/// Persist the offending batch when a loss goes non-finite so the failure
/// is diagnosable; returns a short description (with the dump path when one
/// was written).
fn dump_bad_batch(
    cfg: &TrainConfig,
    batch: &crate::data::Batch,
    out: &crate::model::ForwardOut,
    epoch: usize,
    step: usize,
    persist: bool,
) -> Result<String> {
    let report = serde_json::json!({
        "epoch": epoch,
        "step": step,
        "sample_ids": batch.ids,
        "labels": batch.labels,
        "ce": out.ce.scalar_value().unwrap_or(f64::NAN),
        "hyp": out.hyp.scalar_value().unwrap_or(f64::NAN),
        "alpha": out.alpha.scalar_value().unwrap_or(f64::NAN),
        "c": out.c,
    });
    if persist {
        let out_dir = PathBuf::from(&cfg.out_dir);
        fs::create_dir_all(&out_dir)?;
        let path = out_dir.join("nan_dump.json");
        fs::write(&path, serde_json::to_string_pretty(&report)?)?;
        Ok(format!("batch dump written to {}", path.display()))
    } else {
        Ok(report.to_string())
    }
}
