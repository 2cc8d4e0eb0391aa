//! Ablation runners: curvature sweeps (frozen and learnable) and paired
//! evaluation-noise robustness, built on [`crate::train::train_with`].
//!
//! Each runner trains from scratch per configuration on a shared dataset and
//! seed, so rows differ only in the ablated quantity. Reports are
//! line-delimited JSON with a versioned header, like the metrics files.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Strategy, TrainConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::train::{evaluate, train_with, EvalMetrics};

/// Curvature grid: near-flat through strongly curved.
pub const DEFAULT_C_LIST: [f64; 6] = [0.001, 0.1, 0.5, 1.0, 1.5, 2.0];
/// Evaluation noise grid (standard deviation on raw keypoints).
pub const DEFAULT_SIGMA_LIST: [f64; 6] = [0.0, 0.01, 0.02, 0.03, 0.04, 0.05];

/// One curvature-sweep run.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureRow {
    pub c_init: f64,
    pub learnable: bool,
    pub c_final: f64,
    pub top1: f64,
    pub top5: f64,
    pub token_accuracy: f64,
    pub ce: f64,
    pub hyp: f64,
    /// Curvature at each epoch's last step (constant when frozen).
    pub c_trajectory: Vec<f64>,
}

/// Train once per `c_list` entry with curvature started at that value,
/// frozen or learnable, and report final retrieval metrics and losses.
/// With `persist`, writes `curvature.jsonl` under `cfg.out_dir`.
pub fn ablate_curvature(
    cfg: &TrainConfig,
    ds: &Dataset,
    c_list: &[f64],
    learnable: bool,
    persist: bool,
) -> Result<(Vec<CurvatureRow>, Option<PathBuf>)> {
    if c_list.is_empty() {
        return Err(Error::Config("curvature ablation: empty c list".into()));
    }
    if cfg.strategy.is_euclidean() || cfg.strategy == Strategy::None {
        return Err(Error::Config(format!(
            "curvature ablation needs a hyperbolic strategy, got {}",
            cfg.strategy.as_str()
        )));
    }
    let mut rows = Vec::with_capacity(c_list.len());
    for &c in c_list {
        if !(c > 0.0) {
            return Err(Error::Config(format!("curvature must be positive, got {c}")));
        }
        let mut run = cfg.clone();
        run.init_c = c;
        run.learnable_c = learnable;
        let out = train_with(&run, ds, false)?;
        let trajectory: Vec<f64> = out.metrics.iter().map(|m| m.c).collect();
        rows.push(CurvatureRow {
            c_init: c,
            learnable,
            c_final: *trajectory.last().expect("≥ 1 epoch"),
            top1: out.eval.top1,
            top5: out.eval.top5,
            token_accuracy: out.eval.token_accuracy,
            ce: out.eval.ce,
            hyp: out.eval.hyp,
            c_trajectory: trajectory,
        });
    }
    let path = if persist {
        Some(write_report(
            Path::new(&cfg.out_dir),
            "curvature.jsonl",
            "hykin-curvature-ablation",
            cfg,
            &rows,
        )?)
    } else {
        None
    };
    Ok((rows, path))
}

/// One noise level of the paired robustness sweep.
#[derive(Debug, Clone, Serialize)]
pub struct NoiseRow {
    pub sigma: f64,
    pub hyp: EvalMetrics,
    pub euc: EvalMetrics,
    /// Fractional top-1 loss relative to each arm's own σ = 0 baseline.
    pub hyp_degradation: f64,
    pub euc_degradation: f64,
}

/// Train the configured hyperbolic strategy and its Euclidean twin once
/// each, then evaluate both under shared per-σ keypoint noise. Degradation
/// is relative to each arm's clean baseline, so the two arms are compared
/// on robustness rather than raw accuracy. With `persist`, writes
/// `noise.jsonl` under `cfg.out_dir`.
pub fn ablate_noise(
    cfg: &TrainConfig,
    ds: &Dataset,
    sigma_list: &[f64],
    persist: bool,
) -> Result<(Vec<NoiseRow>, Option<PathBuf>)> {
    if sigma_list.is_empty() {
        return Err(Error::Config("noise ablation: empty sigma list".into()));
    }
    let euclidean_twin = match cfg.strategy {
        Strategy::Token => Strategy::EuclideanToken,
        Strategy::Pooled => Strategy::EuclideanPooled,
        other => {
            return Err(Error::Config(format!(
                "noise ablation needs strategy token or pooled, got {}",
                other.as_str()
            )))
        }
    };
    let hyp_out = train_with(cfg, ds, false)?;
    let mut euc_cfg = cfg.clone();
    euc_cfg.strategy = euclidean_twin;
    let euc_out = train_with(&euc_cfg, ds, false)?;

    let mut base_hyp = None;
    let mut base_euc = None;
    let mut rows = Vec::with_capacity(sigma_list.len());
    for (i, &sigma) in sigma_list.iter().enumerate() {
        if sigma < 0.0 {
            return Err(Error::Config(format!("noise σ must be ≥ 0, got {sigma}")));
        }
        // One noise stream per σ, shared by both arms: the comparison is
        // paired on identical perturbations.
        let noise_seed = cfg.seed.wrapping_add(i as u64);
        let hyp = evaluate(&hyp_out.model, &hyp_out.store, ds, sigma, noise_seed)?;
        let euc = evaluate(&euc_out.model, &euc_out.store, ds, sigma, noise_seed)?;
        if sigma == 0.0 {
            base_hyp = Some(hyp.top1);
            base_euc = Some(euc.top1);
        }
        let hyp_base = base_hyp.unwrap_or(hyp.top1);
        let euc_base = base_euc.unwrap_or(euc.top1);
        rows.push(NoiseRow {
            sigma,
            hyp_degradation: degradation(hyp_base, hyp.top1),
            euc_degradation: degradation(euc_base, euc.top1),
            hyp,
            euc,
        });
    }
    let path = if persist {
        Some(write_report(
            Path::new(&cfg.out_dir),
            "noise.jsonl",
            "hykin-noise-ablation",
            cfg,
            &rows,
        )?)
    } else {
        None
    };
    Ok((rows, path))
}

/// Fractional metric loss against a clean baseline; 0 when the baseline is
/// 0 (nothing to degrade) or the metric improved.
pub fn degradation(baseline: f64, noisy: f64) -> f64 {
    if baseline <= 0.0 {
        return 0.0;
    }
    ((baseline - noisy) / baseline).max(0.0)
}

fn write_report<R: Serialize>(
    out_dir: &Path,
    file: &str,
    format: &str,
    cfg: &TrainConfig,
    rows: &[R],
) -> Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(file);
    let mut f = fs::File::create(&path)?;
    let header = serde_json::json!({
        "format": format,
        "version": 1,
        "config": cfg.to_json(),
    });
    writeln!(f, "{header}")?;
    for row in rows {
        writeln!(f, "{}", serde_json::to_string(row)?)?;
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate;

    fn quick_cfg() -> TrainConfig {
        let mut cfg = TrainConfig::default();
        cfg.strategy = Strategy::Token;
        cfg.labels = 3;
        cfg.samples_per_class = 5;
        cfg.frames = 8;
        cfg.d_gcn = 6;
        cfg.d_model = 6;
        cfg.d_hyp = 4;
        cfg.batch_size = 6;
        cfg.epochs = 1;
        cfg.warmup_epochs = 0.5;
        cfg
    }

    #[test]
    fn curvature_sweep_reports_one_row_per_c() {
        let cfg = quick_cfg();
        let ds = generate(&cfg).unwrap();
        let (rows, _) = ablate_curvature(&cfg, &ds, &[0.5, 1.5], false, false).unwrap();
        assert_eq!(rows.len(), 2);
        for (row, want_c) in rows.iter().zip([0.5, 1.5]) {
            assert_eq!(row.c_init, want_c);
            assert!(!row.learnable);
            assert_eq!(row.c_final, want_c, "frozen c must not move");
            assert!(row.c_trajectory.iter().all(|&c| c == want_c));
            assert!(row.top1.is_finite() && row.ce.is_finite());
        }

        let (rows, _) = ablate_curvature(&cfg, &ds, &[1.5], true, false).unwrap();
        assert!(rows[0].learnable);
        assert_eq!(rows[0].c_trajectory.len(), cfg.epochs);
        assert!(rows[0].c_final > 0.0);
    }

    #[test]
    fn curvature_sweep_rejects_bad_inputs() {
        let cfg = quick_cfg();
        let ds = generate(&cfg).unwrap();
        assert!(ablate_curvature(&cfg, &ds, &[], false, false).is_err());
        assert!(ablate_curvature(&cfg, &ds, &[-1.0], false, false).is_err());
        let mut euc = quick_cfg();
        euc.strategy = Strategy::EuclideanToken;
        assert!(ablate_curvature(&euc, &ds, &[1.0], false, false).is_err());
    }

    #[test]
    fn noise_sweep_pairs_arms_and_reports_degradation() {
        let cfg = quick_cfg();
        let ds = generate(&cfg).unwrap();
        let (rows, _) = ablate_noise(&cfg, &ds, &[0.0, 0.05], false).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].sigma, 0.0);
        assert_eq!(rows[0].hyp_degradation, 0.0, "clean row is its own baseline");
        assert_eq!(rows[0].euc_degradation, 0.0);
        for row in &rows {
            assert!((0.0..=1.0).contains(&row.hyp_degradation));
            assert!((0.0..=1.0).contains(&row.euc_degradation));
            assert!(row.hyp.top1.is_finite() && row.euc.top1.is_finite());
        }
    }

    #[test]
    fn degradation_is_clamped_and_guarded() {
        assert!((degradation(0.5, 0.4) - 0.2).abs() < 1e-12); // (0.5−0.4)/0.5
        assert_eq!(degradation(0.5, 0.6), 0.0, "improvement is not degradation");
        assert_eq!(degradation(0.0, 0.0), 0.0, "zero baseline guarded");
    }

    #[test]
    fn reports_persist_with_versioned_headers() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = quick_cfg();
        cfg.out_dir = dir.path().to_string_lossy().into_owned();
        let ds = generate(&cfg).unwrap();
        let (_, path) = ablate_curvature(&cfg, &ds, &[1.5], false, true).unwrap();
        let text = std::fs::read_to_string(path.unwrap()).unwrap();
        let mut lines = text.lines();
        let header: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
        assert_eq!(header["format"], "hykin-curvature-ablation");
        assert_eq!(header["version"], 1);
        let row: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
        assert_eq!(row["c_init"], 1.5);
    }
}
