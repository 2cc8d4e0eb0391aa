//! Embedding export: flatten a trained checkpoint's evaluation-split part
//! points into CSV, with an optional SVG disk plot.
//!
//! Each evaluation sample contributes one row per skeleton part holding the
//! geodesic distance from the origin (the point's "radius"), the full
//! tangent-space coordinates at the origin, and a 2-D view of those tangent
//! vectors: principal components over all rows, rescaled so every projected
//! point lies strictly inside the unit disk. The tangent map preserves
//! distances to the origin, so the radius column always equals the Euclidean
//! norm of the tangent coordinates.
//!
//! Output is deterministic: rows follow dataset order, the PCA iteration
//! starts from a fixed vector, and floats are written in shortest
//! round-trip form, so identical checkpoints produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use crate::checkpoint;
use crate::config::TrainConfig;
use crate::data::{make_batch, Dataset, Split};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::optim::ParamStore;
use crate::stgcn::PARTS;
use crate::train::check_dataset_matches;

/// Largest projected norm after the disk rescale; keeps every point strictly
/// inside the unit circle with a visible margin.
const DISK_FILL: f64 = 0.95;

/// One exported point: a single (sample, part) pair.
pub struct ExportRow {
    pub sample_id: usize,
    /// Entry of [`PARTS`].
    pub part: &'static str,
    pub label: usize,
    /// Geodesic distance from the ball origin.
    pub radius: f64,
    /// Tangent coordinates at the origin (`d_hyp` values).
    pub tangent: Vec<f64>,
    /// 2-D principal-component view, rescaled into the unit disk.
    pub disk: [f64; 2],
}

/// All rows plus per-part radius means (in [`PARTS`] order).
pub struct ExportSummary {
    pub rows: Vec<ExportRow>,
    pub mean_radii: Vec<(&'static str, f64)>,
}

/// Rebuild a model and its parameters from a checkpoint written by training.
/// The manifest must carry the run config and vocabulary size.
pub fn load_model(checkpoint_path: &Path) -> Result<(Model, ParamStore)> {
    let ckpt = checkpoint::load(checkpoint_path)?;
    let cfg_json = ckpt.config().get("config").ok_or_else(|| {
        Error::Checkpoint(format!(
            "{}: manifest has no `config` entry",
            checkpoint_path.display()
        ))
    })?;
    let cfg = TrainConfig::from_json(cfg_json)?;
    let vocab = ckpt
        .config()
        .get("vocab")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| {
            Error::Checkpoint(format!(
                "{}: manifest has no `vocab` entry",
                checkpoint_path.display()
            ))
        })? as usize;
    let (model, mut store) = Model::init(&cfg, vocab)?;
    ckpt.restore_into(&mut store)?;
    Ok((model, store))
}

/// Project every evaluation sample's part points and assemble export rows.
pub fn export_rows(model: &Model, store: &ParamStore, ds: &Dataset) -> Result<ExportSummary> {
    let idx = ds.indices(Split::Eval);
    if idx.is_empty() {
        return Err(Error::Empty { op: "export" });
    }
    let batch = make_batch(ds, &idx, None)?;
    let ctx = store.eval()?;
    let (ball, parts) = model.part_points(&ctx, &batch)?;

    let n = idx.len();
    let d = model.cfg.d_hyp;
    // Per part: radii (n) and tangent coordinates (n, d).
    let mut radii = Vec::with_capacity(PARTS.len());
    let mut tangents = Vec::with_capacity(PARTS.len());
    for point in &parts {
        radii.push(ball.dist0(point)?.data().to_vec());
        tangents.push(ball.logmap0(point)?.coords().data().to_vec());
    }

    // PCA over all (sample, part) rows, sample-major to match row order.
    let mut matrix = vec![0.0; n * PARTS.len() * d];
    for (row_out, chunk) in matrix.chunks_exact_mut(d).enumerate() {
        let (i, p) = (row_out / PARTS.len(), row_out % PARTS.len());
        chunk.copy_from_slice(&tangents[p][i * d..(i + 1) * d]);
    }
    let disk = principal_disk(&matrix, d)?;

    let mut rows = Vec::with_capacity(n * PARTS.len());
    for i in 0..n {
        for (p, part) in PARTS.iter().enumerate() {
            let flat = i * PARTS.len() + p;
            rows.push(ExportRow {
                sample_id: batch.ids[i],
                part,
                label: batch.labels[i],
                radius: radii[p][i],
                tangent: tangents[p][i * d..(i + 1) * d].to_vec(),
                disk: disk[flat],
            });
        }
    }
    let mean_radii = PARTS
        .iter()
        .zip(&radii)
        .map(|(part, r)| (*part, r.iter().sum::<f64>() / r.len() as f64))
        .collect();
    Ok(ExportSummary { rows, mean_radii })
}

/// Top-2 principal components of the centered `(rows, d)` matrix by power
/// iteration with deflation, projected and rescaled so the largest row norm
/// is [`DISK_FILL`]. Components use a fixed start vector and a largest-entry
/// sign convention, so the view is deterministic.
fn principal_disk(matrix: &[f64], d: usize) -> Result<Vec<[f64; 2]>> {
    let n = matrix.len() / d;
    let mut means = vec![0.0; d];
    for row in matrix.chunks_exact(d) {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let centered: Vec<f64> = matrix
        .chunks_exact(d)
        .flat_map(|row| row.iter().zip(&means).map(|(v, m)| v - m))
        .collect();

    // Covariance (d, d); d is small, so the dense product is cheap.
    let denom = (n.max(2) - 1) as f64;
    let mut cov = vec![0.0; d * d];
    for row in centered.chunks_exact(d) {
        for a in 0..d {
            for b in 0..d {
                cov[a * d + b] += row[a] * row[b] / denom;
            }
        }
    }

    let mut axes = [vec![0.0; d], vec![0.0; d]];
    for axis in &mut axes {
        let Some((v, lambda)) = dominant_eigenvector(&cov, d) else {
            break; // remaining variance is zero; axis stays zero
        };
        // Deflate so the next iteration finds the following component.
        for a in 0..d {
            for b in 0..d {
                cov[a * d + b] -= lambda * v[a] * v[b];
            }
        }
        *axis = v;
    }

    let mut disk: Vec<[f64; 2]> = centered
        .chunks_exact(d)
        .map(|row| {
            [
                row.iter().zip(&axes[0]).map(|(r, a)| r * a).sum(),
                row.iter().zip(&axes[1]).map(|(r, a)| r * a).sum(),
            ]
        })
        .collect();
    let max_norm = disk
        .iter()
        .map(|p| p[0].hypot(p[1]))
        .fold(0.0f64, f64::max);
    if !max_norm.is_finite() {
        return Err(Error::NonFinite { op: "export_pca" });
    }
    if max_norm > 0.0 {
        let scale = DISK_FILL / max_norm;
        for p in &mut disk {
            p[0] *= scale;
            p[1] *= scale;
        }
    }
    Ok(disk)
}

/// Power iteration on a symmetric matrix from a fixed start vector. Returns
/// the unit eigenvector (largest entry made positive) and its eigenvalue, or
/// `None` when the matrix is numerically zero.
fn dominant_eigenvector(cov: &[f64], d: usize) -> Option<(Vec<f64>, f64)> {
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    for _ in 0..1000 {
        let mut next = vec![0.0; d];
        for a in 0..d {
            next[a] = (0..d).map(|b| cov[a * d + b] * v[b]).sum();
        }
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return None;
        }
        for x in &mut next {
            *x /= norm;
        }
        // Convergence up to sign.
        let dot: f64 = next.iter().zip(&v).map(|(a, b)| a * b).sum();
        let delta: f64 = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b * dot.signum()).powi(2))
            .sum::<f64>()
            .sqrt();
        v = next;
        if delta < 1e-13 {
            break;
        }
    }
    let lead = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).expect("finite axis"))
        .map(|(i, _)| i)
        .expect("d >= 1");
    if v[lead] < 0.0 {
        for x in &mut v {
            *x = -*x;
        }
    }
    let lambda = (0..d)
        .map(|a| v[a] * (0..d).map(|b| cov[a * d + b] * v[b]).sum::<f64>())
        .sum();
    Some((v, lambda))
}

/// Write rows as CSV: `sample_id,part,label,radius,t0..t{d−1},disk_x,disk_y`.
/// Floats use shortest round-trip formatting, so parsing the file back
/// recovers the exact values.
pub fn write_csv(summary: &ExportSummary, d_hyp: usize, path: &Path) -> Result<()> {
    let mut out = String::from("sample_id,part,label,radius");
    for t in 0..d_hyp {
        write!(out, ",t{t}").expect("string write");
    }
    out.push_str(",disk_x,disk_y\n");
    for row in &summary.rows {
        write!(out, "{},{},{},{}", row.sample_id, row.part, row.label, row.radius)
            .expect("string write");
        for t in &row.tangent {
            write!(out, ",{t}").expect("string write");
        }
        writeln!(out, ",{},{}", row.disk[0], row.disk[1]).expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Render the disk view as a standalone SVG: the unit circle, one dot per
/// row colored by part, and a small legend.
pub fn write_svg(summary: &ExportSummary, path: &Path) -> Result<()> {
    const SIZE: f64 = 520.0;
    const CENTER: f64 = SIZE / 2.0;
    const RADIUS: f64 = 245.0;
    const COLORS: [&str; 4] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"];

    let mut out = String::new();
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" \
         viewBox=\"0 0 {SIZE} {SIZE}\">"
    )
    .expect("string write");
    writeln!(
        out,
        "  <circle cx=\"{CENTER}\" cy=\"{CENTER}\" r=\"{RADIUS}\" fill=\"none\" \
         stroke=\"#888\" stroke-width=\"1\"/>"
    )
    .expect("string write");
    for row in &summary.rows {
        let color = PARTS
            .iter()
            .position(|p| *p == row.part)
            .map(|i| COLORS[i])
            .unwrap_or("#000");
        let cx = CENTER + row.disk[0] * RADIUS;
        let cy = CENTER - row.disk[1] * RADIUS;
        writeln!(
            out,
            "  <circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"3\" fill=\"{color}\" \
             fill-opacity=\"0.7\"/>"
        )
        .expect("string write");
    }
    for (i, part) in PARTS.iter().enumerate() {
        let y = 18.0 + 16.0 * i as f64;
        writeln!(
            out,
            "  <circle cx=\"14\" cy=\"{y:.0}\" r=\"4\" fill=\"{}\"/>\
             <text x=\"24\" y=\"{:.0}\" font-size=\"12\" font-family=\"sans-serif\">{part}</text>",
            COLORS[i],
            y + 4.0
        )
        .expect("string write");
    }
    out.push_str("</svg>\n");
    std::fs::write(path, out)?;
    Ok(())
}

/// One-call export: load the checkpoint and dataset, project the evaluation
/// split, and write the CSV (plus SVG when requested).
pub fn export_embeddings(
    checkpoint_path: &Path,
    dataset_path: &Path,
    csv_path: &Path,
    svg_path: Option<&Path>,
) -> Result<ExportSummary> {
    let (model, store) = load_model(checkpoint_path)?;
    let ds = Dataset::load(dataset_path)?;
    check_dataset_matches(&model.cfg, &ds)?;
    let summary = export_rows(&model, &store, &ds)?;
    write_csv(&summary, model.cfg.d_hyp, csv_path)?;
    if let Some(svg) = svg_path {
        write_svg(&summary, svg)?;
    }
    Ok(summary)
}
