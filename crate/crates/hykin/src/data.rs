//! Synthetic multi-part skeleton dataset: generation, file format, and
//! batching.
//!
//! Labels factor into a coarse *group* and a fine *variant*. The body
//! prototype motion depends only on the group and moves at large amplitude;
//! hand articulation depends on the full label at roughly an order of
//! magnitude finer spatial scale — each variant holds a distinct finger-curl
//! pattern, and the pattern is rotated per group so the cue only resolves
//! jointly with the coarse context. The face pulses at the same fine scale
//! but with a per-sample phase, so it carries no class information. Class
//! identity is therefore hierarchical: telling groups apart needs only the
//! body, telling classes within a group apart needs the hands.
//! Within a class, samples differ by smooth sinusoidal jitter, a random time
//! warp, and small keypoint noise. Token sequences are a fixed template per
//! label, so pose↔text alignment is learnable.
//!
//! File format: line-delimited JSON. Line 1 is a header
//! `{"format":"hykin-dataset","version":1,…}`; every further line is one
//! sample `{"id","label","split","tokens","body","left_hand","right_hand",
//! "face"}` with keypoints as flat row-major `T×V×2` arrays rounded to six
//! decimals (so regeneration with one seed is byte-identical).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Padding token id.
pub const PAD: usize = 0;
/// Sequence-start token id.
pub const BOS: usize = 1;
/// Sequence-end token id.
pub const EOS: usize = 2;

/// Joint counts per part, in [`crate::stgcn::PARTS`] order.
pub const PART_JOINTS: [usize; 4] = [9, 21, 21, 16];

const FORMAT: &str = "hykin-dataset";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Eval,
}

/// One clip: raw world-coordinate keypoints per part plus label and tokens.
#[derive(Clone, Serialize, Deserialize)]
pub struct Sample {
    pub id: usize,
    pub label: usize,
    pub split: Split,
    pub tokens: Vec<usize>,
    /// Flat row-major `T×9×2`.
    pub body: Vec<f64>,
    /// Flat row-major `T×21×2`.
    pub left_hand: Vec<f64>,
    /// Flat row-major `T×21×2`.
    pub right_hand: Vec<f64>,
    /// Flat row-major `T×16×2`.
    pub face: Vec<f64>,
}

impl Sample {
    pub fn part(&self, p: usize) -> &[f64] {
        match p {
            0 => &self.body,
            1 => &self.left_hand,
            2 => &self.right_hand,
            3 => &self.face,
            _ => panic!("part index {p} out of range"),
        }
    }
}

/// Generator parameters echoed into the file header.
#[derive(Clone, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub labels: usize,
    pub samples_per_class: usize,
    pub frames: usize,
    pub gen_noise: f64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    config: GenConfig,
    vocab_size: usize,
    parts: Vec<String>,
    joints: Vec<usize>,
}

/// A full synthetic dataset held in memory.
pub struct Dataset {
    pub frames: usize,
    pub vocab_size: usize,
    pub labels: usize,
    pub gen: GenConfig,
    pub samples: Vec<Sample>,
}

/// Label factorization used by the generator and the token template.
fn factor(labels: usize) -> (usize, usize) {
    let groups = labels.min(5);
    let variants = labels.div_ceil(groups);
    (groups, variants)
}

/// Token template for a label: `[BOS, group word, variant word, class noun,
/// EOS]`, with the noun doubled for odd labels so sequence lengths vary.
pub fn label_tokens(label: usize, labels: usize) -> Vec<usize> {
    let (groups, variants) = factor(labels);
    let g = label % groups;
    let f = label / groups;
    debug_assert!(f < variants);
    let mut toks = vec![BOS, 3 + g, 3 + groups + f, 3 + groups + variants + label];
    if label % 2 == 1 {
        toks.push(3 + groups + variants + label);
    }
    toks.push(EOS);
    toks
}

/// Vocabulary size implied by the token template.
pub fn vocab_size(labels: usize) -> usize {
    let (groups, variants) = factor(labels);
    3 + groups + variants + labels
}

/// Base body pose: 0 neck, 1 head, 2 hip, 3/4 shoulders, 5/6 elbows,
/// 7/8 wrists (matching the body graph's joint semantics).
const BODY_BASE: [[f64; 2]; 9] = [
    [0.0, 0.60],
    [0.0, 0.80],
    [0.0, 0.10],
    [-0.25, 0.55],
    [0.25, 0.55],
    [-0.35, 0.35],
    [0.35, 0.35],
    [-0.40, 0.15],
    [0.40, 0.15],
];

/// How strongly each body joint follows the group sway.
const BODY_WEIGHT: [f64; 9] = [0.30, 0.35, 0.20, 0.50, 0.50, 0.80, 0.80, 1.00, 1.00];

const BODY_AMP: f64 = 0.35;
const HAND_SCALE: f64 = 0.12;
/// Depth of the static per-variant finger-curl pattern.
const HAND_SHAPE_DEPTH: f64 = 0.28;
/// Depth of the shared curl oscillation riding on top of the pattern.
const HAND_MOTION_DEPTH: f64 = 0.10;
/// Fractional swing of the finger fan angles over a clip.
const HAND_SPREAD_SWING: f64 = 0.18;
const FACE_RADIUS: f64 = 0.10;

const TAU: f64 = std::f64::consts::TAU;

/// Per-sample variation drawn once per clip.
struct Variation {
    warp_amp: f64,
    warp_phase: f64,
    face_phase: f64,
    drift_amp: [[f64; 2]; 2],
    drift_freq: [f64; 2],
    drift_phase: [[f64; 2]; 2],
    noise: Vec<f64>,
}

impl Variation {
    fn draw(rng: &mut ChaCha8Rng, sigma: f64, total_coords: usize) -> Self {
        let mut drift_amp = [[0.0; 2]; 2];
        let mut drift_phase = [[0.0; 2]; 2];
        let mut drift_freq = [0.0; 2];
        for k in 0..2 {
            drift_freq[k] = rng.gen_range(0.5..2.5);
            for ax in 0..2 {
                drift_amp[k][ax] = rng.gen_range(0.0..sigma);
                drift_phase[k][ax] = rng.gen_range(0.0..1.0);
            }
        }
        Self {
            warp_amp: rng.gen_range(0.0..1.2),
            warp_phase: rng.gen_range(0.0..1.0),
            face_phase: rng.gen_range(0.0..1.0),
            drift_amp,
            drift_freq,
            drift_phase,
            noise: (0..total_coords)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    z * sigma * 0.2
                })
                .collect(),
        }
    }

    /// Warped clip progress for frame `t` of `frames`.
    fn progress(&self, t: usize, frames: usize) -> f64 {
        let u = t as f64 / frames as f64;
        (t as f64 + self.warp_amp * (TAU * (u + self.warp_phase)).sin()) / frames as f64
    }

    /// Smooth whole-body drift at progress `u`.
    fn drift(&self, u: f64) -> [f64; 2] {
        let mut d = [0.0; 2];
        for k in 0..2 {
            for (ax, dv) in d.iter_mut().enumerate() {
                *dv += self.drift_amp[k][ax]
                    * (TAU * (self.drift_freq[k] * u + self.drift_phase[k][ax])).sin();
            }
        }
        d
    }
}

/// Group sway vector at progress `u`: each group has its own frequency,
/// phase, and direction mix.
fn group_sway(g: usize, groups: usize, u: f64) -> [f64; 2] {
    let freq = 1.0 + g as f64;
    let phase = g as f64 / groups as f64;
    let a = TAU * (freq * u + phase);
    [BODY_AMP * a.sin(), 0.6 * BODY_AMP * (0.5 * a + TAU * phase).cos()]
}

fn body_joint(g: usize, groups: usize, j: usize, u: f64) -> [f64; 2] {
    let s = group_sway(g, groups, u);
    // Arms counter-sway slightly so left/right differ.
    let side = match j {
        3 | 5 | 7 => -0.15,
        4 | 6 | 8 => 0.15,
        _ => 0.0,
    };
    let a = TAU * ((1.0 + g as f64) * u);
    [
        BODY_BASE[j][0] + BODY_WEIGHT[j] * s[0] + side * a.cos() * BODY_AMP * 0.3,
        BODY_BASE[j][1] + BODY_WEIGHT[j] * s[1],
    ]
}

/// Local hand articulation: five finger chains fanned around the wrist. Each
/// variant holds a distinct static curl pattern across the fingers — the
/// leaf-level cue that separates classes within a group — modulated by a
/// group-paced oscillation at fine amplitude.
fn hand_local(label: usize, labels: usize, right: bool, joint: usize, u: f64) -> [f64; 2] {
    if joint == 0 {
        return [0.0, 0.0];
    }
    let (groups, variants) = factor(labels);
    let g = label % groups;
    let f = label / groups;
    let finger = (joint - 1) / 4;
    let seg = ((joint - 1) % 4 + 1) as f64 / 4.0;
    let mirror = if right { -1.0 } else { 1.0 };
    let base_angle = (-60.0 + 30.0 * finger as f64).to_radians();
    // Deterministic variant×finger pattern; the group term rotates the
    // patterns so the same handshape reads differently in each group.
    let shape = (TAU
        * (0.37 * f as f64 + finger as f64 * (0.23 + 0.11 * f as f64) + 0.19 * g as f64))
        .sin();
    let osc = (TAU
        * ((1.5 + 0.5 * g as f64) * u
            + f as f64 / variants as f64
            + if right { 0.25 } else { 0.0 }))
        .sin();
    let spread = base_angle * (1.0 + HAND_SPREAD_SWING * osc);
    let curl = 0.55 + HAND_SHAPE_DEPTH * shape + HAND_MOTION_DEPTH * osc;
    let r = HAND_SCALE * seg * curl;
    [mirror * r * spread.sin(), r * spread.cos()]
}

/// Face ring around the head with a shared ellipse pulse whose phase is
/// drawn per sample: fine-scale motion with no class information.
fn face_local(joint: usize, u: f64, phase: f64) -> [f64; 2] {
    let phi = TAU * joint as f64 / 16.0;
    let osc = (TAU * (2.0 * u + phase)).sin();
    let ex = 1.0 + 0.22 * osc;
    let ey = 1.0 - 0.18 * osc;
    [FACE_RADIUS * ex * phi.cos(), FACE_RADIUS * ey * phi.sin() + 0.02]
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Generate a dataset from the config's generator fields. Deterministic for
/// a fixed seed.
pub fn generate(cfg: &TrainConfig) -> Result<Dataset> {
    cfg.validate()?;
    let vs = vocab_size(cfg.labels);
    if vs > 64 {
        return Err(Error::Config(format!(
            "labels = {} implies a {vs}-token vocabulary (limit 64)",
            cfg.labels
        )));
    }
    let (groups, _) = factor(cfg.labels);
    let frames = cfg.frames;
    let total_coords: usize = PART_JOINTS.iter().map(|v| frames * v * 2).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let spc = cfg.samples_per_class;
    let eval_per_class = if spc >= 2 { (spc / 5).max(1) } else { 0 };
    let mut samples = Vec::with_capacity(cfg.labels * spc);
    for label in 0..cfg.labels {
        let g = label % groups;
        for inst in 0..spc {
            let split = if inst >= spc - eval_per_class {
                Split::Eval
            } else {
                Split::Train
            };
            let var = Variation::draw(&mut rng, cfg.gen_noise, total_coords);
            let mut parts: [Vec<f64>; 4] = [
                Vec::with_capacity(frames * 9 * 2),
                Vec::with_capacity(frames * 21 * 2),
                Vec::with_capacity(frames * 21 * 2),
                Vec::with_capacity(frames * 16 * 2),
            ];
            let mut noise_at = 0usize;
            let mut push = |buf: &mut Vec<f64>, p: [f64; 2], d: [f64; 2], noise: &[f64]| {
                buf.push(round6(p[0] + d[0] + noise[noise_at]));
                buf.push(round6(p[1] + d[1] + noise[noise_at + 1]));
                noise_at += 2;
            };
            for t in 0..frames {
                let u = var.progress(t, frames);
                let d = var.drift(u);
                let mut body_t = [[0.0; 2]; 9];
                for (j, bj) in body_t.iter_mut().enumerate() {
                    *bj = body_joint(g, groups, j, u);
                }
                for bj in &body_t {
                    push(&mut parts[0], *bj, d, &var.noise);
                }
                for (pi, right) in [(1usize, false), (2usize, true)] {
                    let wrist = body_t[if right { 8 } else { 7 }];
                    for j in 0..21 {
                        let l = hand_local(label, cfg.labels, right, j, u);
                        push(&mut parts[pi], [wrist[0] + l[0], wrist[1] + l[1]], d, &var.noise);
                    }
                }
                let head = body_t[1];
                for j in 0..16 {
                    let l = face_local(j, u, var.face_phase);
                    push(&mut parts[3], [head[0] + l[0], head[1] + l[1]], d, &var.noise);
                }
            }
            let [body, left_hand, right_hand, face] = parts;
            samples.push(Sample {
                id: samples.len(),
                label,
                split,
                tokens: label_tokens(label, cfg.labels),
                body,
                left_hand,
                right_hand,
                face,
            });
        }
    }
    Ok(Dataset {
        frames,
        vocab_size: vs,
        labels: cfg.labels,
        gen: GenConfig {
            seed: cfg.seed,
            labels: cfg.labels,
            samples_per_class: spc,
            frames,
            gen_noise: cfg.gen_noise,
        },
        samples,
    })
}

impl Dataset {
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let mut w = BufWriter::new(File::create(path)?);
        let header = Header {
            format: FORMAT.into(),
            version: VERSION,
            config: self.gen.clone(),
            vocab_size: self.vocab_size,
            parts: crate::stgcn::PARTS.iter().map(|s| s.to_string()).collect(),
            joints: PART_JOINTS.to_vec(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for s in &self.samples {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Dataset> {
        let mut lines = BufReader::new(File::open(path)?).lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::Dataset(format!("{}: empty file", path.display())))??;
        let header: Header = serde_json::from_str(&header_line)
            .map_err(|e| Error::Dataset(format!("{}: bad header ({e})", path.display())))?;
        if header.format != FORMAT {
            return Err(Error::Dataset(format!(
                "{}: not a dataset file (format {})",
                path.display(),
                header.format
            )));
        }
        if header.version != VERSION {
            return Err(Error::Dataset(format!(
                "{}: unsupported version {}",
                path.display(),
                header.version
            )));
        }
        if header.joints != PART_JOINTS {
            return Err(Error::Dataset(format!(
                "{}: joint counts {:?} do not match {:?}",
                path.display(),
                header.joints,
                PART_JOINTS
            )));
        }
        let frames = header.config.frames;
        let mut samples = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let s: Sample = serde_json::from_str(&line)
                .map_err(|e| Error::Dataset(format!("{}: sample line {} ({e})", path.display(), i + 2)))?;
            for (p, joints) in PART_JOINTS.iter().enumerate() {
                if s.part(p).len() != frames * joints * 2 {
                    return Err(Error::Dataset(format!(
                        "{}: sample {} part {} holds {} values, expected {}",
                        path.display(),
                        s.id,
                        crate::stgcn::PARTS[p],
                        s.part(p).len(),
                        frames * joints * 2
                    )));
                }
            }
            samples.push(s);
        }
        if samples.is_empty() {
            return Err(Error::Dataset(format!("{}: no samples", path.display())));
        }
        Ok(Dataset {
            frames,
            vocab_size: header.vocab_size,
            labels: header.config.labels,
            gen: header.config,
            samples,
        })
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        self.samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.split == split)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn max_token_len(&self) -> usize {
        self.samples.iter().map(|s| s.tokens.len()).max().unwrap_or(0)
    }
}

/// A model-ready minibatch.
pub struct Batch {
    /// Per-part keypoints `(B, T, V, 2)`, hands/face anchor-normalized.
    pub keypoints: Vec<Tensor>,
    /// Unpadded token sequences.
    pub tokens: Vec<Vec<usize>>,
    pub labels: Vec<usize>,
    pub ids: Vec<usize>,
}

/// Assemble a batch. Optional `(rng, σ)` adds iid Gaussian noise to every raw
/// keypoint coordinate (evaluation-time robustness probing) before anchor
/// normalization. Hands and face are normalized by subtracting their own
/// joint 0 per frame; the body stream keeps world coordinates.
pub fn make_batch(
    ds: &Dataset,
    idx: &[usize],
    mut noise: Option<(&mut ChaCha8Rng, f64)>,
) -> Result<Batch> {
    if idx.is_empty() {
        return Err(Error::Empty { op: "make_batch" });
    }
    let b = idx.len();
    let t = ds.frames;
    let mut keypoints = Vec::with_capacity(4);
    for (p, &v) in PART_JOINTS.iter().enumerate() {
        let mut buf = Vec::with_capacity(b * t * v * 2);
        for &si in idx {
            let s = &ds.samples[si];
            let raw = s.part(p);
            let mut vals = raw.to_vec();
            if let Some((rng, sigma)) = noise.as_mut() {
                if *sigma > 0.0 {
                    for x in &mut vals {
                        let z: f64 = rng.sample(StandardNormal);
                        *x += z * *sigma;
                    }
                }
            }
            if p > 0 {
                for f in 0..t {
                    let base = f * v * 2;
                    let (ax, ay) = (vals[base], vals[base + 1]);
                    for j in 0..v {
                        vals[base + j * 2] -= ax;
                        vals[base + j * 2 + 1] -= ay;
                    }
                }
            }
            buf.extend_from_slice(&vals);
        }
        keypoints.push(Tensor::new(buf, &[b, t, v, 2])?);
    }
    Ok(Batch {
        keypoints,
        tokens: idx.iter().map(|&i| ds.samples[i].tokens.clone()).collect(),
        labels: idx.iter().map(|&i| ds.samples[i].label).collect(),
        ids: idx.iter().map(|&i| ds.samples[i].id).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> TrainConfig {
        let mut cfg = TrainConfig::default();
        cfg.labels = 4;
        cfg.samples_per_class = 5;
        cfg.frames = 8;
        cfg
    }

    #[test]
    fn same_seed_gives_byte_identical_files() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
        generate(&small_cfg()).unwrap().save(&a).unwrap();
        generate(&small_cfg()).unwrap().save(&b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

        let mut other = small_cfg();
        other.seed = 43;
        let c = dir.path().join("c.jsonl");
        generate(&other).unwrap().save(&c).unwrap();
        assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
    }

    #[test]
    fn labels_are_balanced_and_splits_cover_every_class() {
        let mut cfg = small_cfg();
        cfg.labels = 2;
        let ds = generate(&cfg).unwrap();
        let mut counts = [0usize; 2];
        let mut eval_counts = [0usize; 2];
        for s in &ds.samples {
            counts[s.label] += 1;
            if s.split == Split::Eval {
                eval_counts[s.label] += 1;
            }
        }
        assert!(counts[0].abs_diff(counts[1]) <= 1);
        assert!(eval_counts.iter().all(|&c| c >= 1));
        assert_eq!(
            ds.indices(Split::Train).len() + ds.indices(Split::Eval).len(),
            ds.samples.len()
        );
    }

    #[test]
    fn tokens_are_class_consistent_and_distinct_across_classes() {
        let ds = generate(&small_cfg()).unwrap();
        for s in &ds.samples {
            assert_eq!(s.tokens, label_tokens(s.label, ds.labels));
            assert_eq!(*s.tokens.first().unwrap(), BOS);
            assert_eq!(*s.tokens.last().unwrap(), EOS);
            assert!(s.tokens.iter().all(|&t| t < ds.vocab_size));
        }
        for a in 0..ds.labels {
            for b in a + 1..ds.labels {
                assert_ne!(label_tokens(a, ds.labels), label_tokens(b, ds.labels));
            }
        }
        assert!(vocab_size(20) <= 64);
        assert!(generate(&{
            let mut c = TrainConfig::default();
            c.labels = 60;
            c
        })
        .is_err());
    }

    #[test]
    fn file_round_trip_preserves_samples_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.jsonl");
        let ds = generate(&small_cfg()).unwrap();
        ds.save(&path).unwrap();
        let back = Dataset::load(&path).unwrap();
        assert_eq!(back.samples.len(), ds.samples.len());
        assert_eq!(back.vocab_size, ds.vocab_size);
        for (a, b) in ds.samples.iter().zip(&back.samples) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.label, b.label);
            assert_eq!(a.tokens, b.tokens);
            for p in 0..4 {
                assert_eq!(a.part(p), b.part(p), "part {p} drifted");
            }
        }
    }

    #[test]
    fn malformed_files_are_rejected_with_dataset_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "not json\n").unwrap();
        assert!(matches!(Dataset::load(&path), Err(Error::Dataset(_))));
        std::fs::write(
            &path,
            "{\"format\":\"other\",\"version\":1,\"config\":{\"seed\":1,\"labels\":2,\"samples_per_class\":1,\"frames\":8,\"gen_noise\":0.0},\"vocab_size\":10,\"parts\":[],\"joints\":[9,21,21,16]}\n",
        )
        .unwrap();
        assert!(matches!(Dataset::load(&path), Err(Error::Dataset(_))));
    }

    #[test]
    fn hands_articulate_finer_than_body() {
        let ds = generate(&small_cfg()).unwrap();
        let t = ds.frames;
        // Temporal variance of anchor-normalized hand joints vs body joints.
        let mut body_var = 0.0;
        let mut hand_var = 0.0;
        for s in &ds.samples {
            body_var += temporal_variance(&s.body, t, 9, false);
            hand_var += temporal_variance(&s.left_hand, t, 21, true);
        }
        assert!(
            hand_var < body_var * 0.25,
            "hand variance {hand_var} not finer than body {body_var}"
        );
    }

    fn temporal_variance(raw: &[f64], t: usize, v: usize, normalize: bool) -> f64 {
        let mut vals = raw.to_vec();
        if normalize {
            for f in 0..t {
                let base = f * v * 2;
                let (ax, ay) = (vals[base], vals[base + 1]);
                for j in 0..v {
                    vals[base + j * 2] -= ax;
                    vals[base + j * 2 + 1] -= ay;
                }
            }
        }
        let mut var = 0.0;
        for j in 0..v {
            for ax in 0..2 {
                let series: Vec<f64> = (0..t).map(|f| vals[(f * v + j) * 2 + ax]).collect();
                let mean = series.iter().sum::<f64>() / t as f64;
                var += series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / t as f64;
            }
        }
        var / (v * 2) as f64
    }

    #[test]
    fn within_class_samples_differ_but_share_structure() {
        let ds = generate(&small_cfg()).unwrap();
        let same: Vec<&Sample> = ds.samples.iter().filter(|s| s.label == 0).collect();
        assert!(same.len() >= 2);
        assert_ne!(same[0].body, same[1].body);
        assert_eq!(same[0].tokens, same[1].tokens);
    }

    #[test]
    fn batches_are_normalized_shaped_and_noise_is_seeded() {
        let ds = generate(&small_cfg()).unwrap();
        let idx = [0usize, 5, 9];
        let batch = make_batch(&ds, &idx, None).unwrap();
        assert_eq!(batch.keypoints[0].shape(), &[3, 8, 9, 2]);
        assert_eq!(batch.keypoints[1].shape(), &[3, 8, 21, 2]);
        assert_eq!(batch.keypoints[3].shape(), &[3, 8, 16, 2]);
        assert_eq!(batch.labels.len(), 3);
        // Hands/face joint 0 sits at the origin every frame; body does not.
        let hand = batch.keypoints[1].data();
        for b in 0..3 {
            for f in 0..8 {
                let base = ((b * 8 + f) * 21) * 2;
                assert_eq!(hand[base], 0.0);
                assert_eq!(hand[base + 1], 0.0);
            }
        }
        assert!(batch.keypoints[0].data()[..2].iter().any(|&x| x != 0.0));

        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let n1 = make_batch(&ds, &idx, Some((&mut r1, 0.03))).unwrap();
        let n2 = make_batch(&ds, &idx, Some((&mut r2, 0.03))).unwrap();
        assert_eq!(n1.keypoints[0].data(), n2.keypoints[0].data());
        assert_ne!(n1.keypoints[0].data(), batch.keypoints[0].data());
    }
}
