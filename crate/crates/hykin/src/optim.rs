//! Parameter storage and optimizers.
//!
//! Parameters live in a [`ParamStore`] as plain named buffers. Every training
//! step opens a fresh tape ([`ParamStore::step`]), materializes tracked leaf
//! tensors for the forward pass, harvests gradients after `backward`, and
//! applies updates to the stored buffers — so there is no long-lived graph
//! and no stale handles.
//!
//! Three parameter groups, fixed by construction:
//! * `Backbone` — encoder/decoder weights: AdamW at the base learning rate
//!   with decoupled weight decay;
//! * `HypEuclidean` — Euclidean parameters of the hyperbolic modules
//!   (projections, key matrix, temperatures, margin, blend logit): AdamW at
//!   the hyperbolic learning rate;
//! * `RiemannianPoint` / `RiemannianScalar` — ball points (the key bias) and
//!   `log_c`: Riemannian Adam at the hyperbolic learning rate, no weight
//!   decay. Point updates convert the Euclidean gradient with the conformal
//!   factor (`g/λ²`), keep Adam moments in ambient coordinates, step through
//!   the exponential map at the current point, and re-project into the ball;
//!   `log_c` steps as a plain scalar.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::manifold::{ManifoldPoint, PoincareBall, TangentVector};
use crate::tensor::{GradTape, Tensor};

/// Optimizer group a parameter belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Group {
    /// Encoder/decoder weights — AdamW, base lr, weight decay.
    Backbone,
    /// Euclidean parameters of hyperbolic modules — AdamW, hyperbolic lr.
    HypEuclidean,
    /// Points on the ball — Riemannian Adam, hyperbolic lr, no decay.
    RiemannianPoint,
    /// `log_c` — plain Adam scalar inside the Riemannian group.
    RiemannianScalar,
}

struct ParamEntry {
    name: String,
    data: Vec<f64>,
    shape: Vec<usize>,
    group: Group,
}

/// Named parameter buffers with group assignment; insertion order is the
/// canonical (deterministic) iteration order everywhere.
#[derive(Default)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a parameter; names must be unique.
    pub fn add(&mut self, name: &str, data: Vec<f64>, shape: &[usize], group: Group) -> Result<()> {
        if self.index.contains_key(name) {
            return Err(Error::Config(format!("duplicate parameter name: {name}")));
        }
        let numel: usize = shape.iter().product::<usize>().max(1);
        if data.len() != numel {
            return Err(Error::InvalidShape {
                op: "param_store",
                shape: shape.to_vec(),
                msg: format!("{name}: buffer has {} values", data.len()),
            });
        }
        self.index.insert(name.to_string(), self.entries.len());
        self.entries.push(ParamEntry {
            name: name.to_string(),
            data,
            shape: shape.to_vec(),
            group,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// Current raw values of a parameter.
    pub fn values(&self, name: &str) -> Result<&[f64]> {
        let i = self.lookup(name)?;
        Ok(&self.entries[i].data)
    }

    pub fn shape(&self, name: &str) -> Result<&[usize]> {
        let i = self.lookup(name)?;
        Ok(&self.entries[i].shape)
    }

    /// Overwrite a parameter buffer (checkpoint restore).
    pub fn set_values(&mut self, name: &str, data: Vec<f64>) -> Result<()> {
        let i = self.lookup(name)?;
        if data.len() != self.entries[i].data.len() {
            return Err(Error::InvalidShape {
                op: "param_store",
                shape: self.entries[i].shape.clone(),
                msg: format!("{name}: expected {} values, got {}", self.entries[i].data.len(), data.len()),
            });
        }
        self.entries[i].data = data;
        Ok(())
    }

    /// Iterate `(name, shape, group, values)` in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[usize], Group, &[f64])> {
        self.entries
            .iter()
            .map(|e| (e.name.as_str(), e.shape.as_slice(), e.group, e.data.as_slice()))
    }

    fn lookup(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown parameter: {name}")))
    }

    /// Open a training step: a fresh tape with tracked leaves for every
    /// parameter.
    pub fn step(&self) -> Result<StepCtx> {
        self.ctx(true)
    }

    /// Open an evaluation pass: untracked leaves, no tape recording.
    pub fn eval(&self) -> Result<StepCtx> {
        self.ctx(false)
    }

    fn ctx(&self, train: bool) -> Result<StepCtx> {
        let tape = GradTape::new();
        let mut leaves = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            let t = if train {
                tape.leaf(e.data.clone(), &e.shape, true)?
            } else {
                Tensor::new(e.data.clone(), &e.shape)?
            };
            leaves.push(t);
        }
        let index = self.index.clone();
        Ok(StepCtx {
            tape,
            leaves,
            index,
        })
    }
}

/// Leaf tensors for one forward/backward pass.
pub struct StepCtx {
    tape: GradTape,
    leaves: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl StepCtx {
    pub fn tape(&self) -> &GradTape {
        &self.tape
    }

    /// Leaf tensor for `name`; clones share the same tape slot, so gradients
    /// from every use accumulate together.
    pub fn leaf(&self, name: &str) -> Result<Tensor> {
        self.index
            .get(name)
            .map(|&i| self.leaves[i].clone())
            .ok_or_else(|| Error::Config(format!("unknown parameter: {name}")))
    }

    /// Harvest gradients after `backward`, in store order. `None` for
    /// parameters the loss never touched.
    pub fn grads(&self, store: &ParamStore) -> Vec<Option<Vec<f64>>> {
        store
            .entries
            .iter()
            .map(|e| self.leaves[self.index[&e.name]].grad())
            .collect()
    }
}

/// Scale all gradients so the global L2 norm is at most `max_norm`; returns
/// the factor applied (1.0 when already within bounds).
pub fn clip_global_grad_norm(grads: &mut [Option<Vec<f64>>], max_norm: f64) -> f64 {
    let mut sq = 0.0;
    for g in grads.iter().flatten() {
        for v in g {
            sq += v * v;
        }
    }
    let norm = sq.sqrt();
    if norm <= max_norm || norm == 0.0 {
        return 1.0;
    }
    let scale = max_norm / norm;
    for g in grads.iter_mut().flatten() {
        for v in g.iter_mut() {
            *v *= scale;
        }
    }
    scale
}

/// Adam moment buffers for one parameter.
#[derive(Clone)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Hyperparameters shared by both update rules.
#[derive(Clone, Debug)]
pub struct OptimConfig {
    /// Base learning rate (Backbone group).
    pub lr: f64,
    /// Hyperbolic-module learning rate (all other groups).
    pub hyp_lr: f64,
    pub betas: (f64, f64),
    pub eps: f64,
    /// Decoupled weight decay, Backbone group only.
    pub weight_decay: f64,
    /// Global gradient-norm clip.
    pub grad_clip_norm: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            lr: 3e-5,
            hyp_lr: 1e-3,
            betas: (0.9, 0.999),
            eps: 1e-8,
            weight_decay: 0.01,
            grad_clip_norm: 1.0,
        }
    }
}

/// AdamW for Euclidean groups plus Riemannian Adam for ball points and the
/// curvature scalar. One instance drives all parameters of a store.
pub struct Optimizer {
    cfg: OptimConfig,
    step_count: u64,
    moments: Vec<Option<Moments>>,
}

impl Optimizer {
    pub fn new(cfg: OptimConfig) -> Self {
        Self {
            cfg,
            step_count: 0,
            moments: Vec::new(),
        }
    }

    pub fn config(&self) -> &OptimConfig {
        &self.cfg
    }

    /// Apply one update. `grads` is the store-ordered gradient list (already
    /// clipped by the caller if desired); `lr_factor` scales both learning
    /// rates (cosine schedule); `c` is the current curvature magnitude used
    /// for Riemannian point updates.
    pub fn step(
        &mut self,
        store: &mut ParamStore,
        grads: &[Option<Vec<f64>>],
        lr_factor: f64,
        c: f64,
    ) -> Result<()> {
        if grads.len() != store.entries.len() {
            return Err(Error::Config(format!(
                "optimizer: {} grads for {} params",
                grads.len(),
                store.entries.len()
            )));
        }
        if self.moments.len() != store.entries.len() {
            self.moments.resize(store.entries.len(), None);
        }
        self.step_count += 1;
        let t = self.step_count;
        let (b1, b2) = self.cfg.betas;
        let bc1 = 1.0 - b1.powi(t as i32);
        let bc2 = 1.0 - b2.powi(t as i32);
        for i in 0..store.entries.len() {
            let Some(g) = &grads[i] else { continue };
            let group = store.entries[i].group;
            let lr = match group {
                Group::Backbone => self.cfg.lr,
                _ => self.cfg.hyp_lr,
            } * lr_factor;
            let moments = self.moments[i].get_or_insert_with(|| Moments {
                m: vec![0.0; g.len()],
                v: vec![0.0; g.len()],
            });
            match group {
                Group::Backbone | Group::HypEuclidean | Group::RiemannianScalar => {
                    let wd = if group == Group::Backbone {
                        self.cfg.weight_decay
                    } else {
                        0.0
                    };
                    let p = &mut store.entries[i].data;
                    for j in 0..p.len() {
                        if wd > 0.0 {
                            p[j] *= 1.0 - lr * wd;
                        }
                        moments.m[j] = b1 * moments.m[j] + (1.0 - b1) * g[j];
                        moments.v[j] = b2 * moments.v[j] + (1.0 - b2) * g[j] * g[j];
                        let mh = moments.m[j] / bc1;
                        let vh = moments.v[j] / bc2;
                        p[j] -= lr * mh / (vh.sqrt() + self.cfg.eps);
                    }
                }
                Group::RiemannianPoint => {
                    // Riemannian gradient: rescale by 1/λ² at the current
                    // point, run Adam in ambient coordinates, then step with
                    // the exponential map and re-project.
                    let p = &store.entries[i].data;
                    let nsq: f64 = p.iter().map(|x| x * x).sum();
                    let lam = 2.0 / (1.0 - c * nsq).max(PoincareBall::EPS_DIV);
                    let inv = 1.0 / (lam * lam);
                    let mut step_vec = vec![0.0; p.len()];
                    for j in 0..p.len() {
                        let rg = g[j] * inv;
                        moments.m[j] = b1 * moments.m[j] + (1.0 - b1) * rg;
                        moments.v[j] = b2 * moments.v[j] + (1.0 - b2) * rg * rg;
                        let mh = moments.m[j] / bc1;
                        let vh = moments.v[j] / bc2;
                        step_vec[j] = -lr * mh / (vh.sqrt() + self.cfg.eps);
                    }
                    let ball = PoincareBall::new(c)?;
                    let shape = store.entries[i].shape.clone();
                    let x = ManifoldPoint::new_unchecked(
                        &ball,
                        Tensor::new(p.clone(), &shape)?,
                    );
                    let v = TangentVector::at_point(&x, Tensor::new(step_vec, &shape)?);
                    let moved = ball.expmap(&x, &v)?;
                    store.entries[i].data = moved.coords().to_vec();
                }
            }
        }
        Ok(())
    }
}

/// Cosine learning-rate schedule with linear warmup; produces a factor in
/// [min_lr/base, 1] multiplying both learning rates.
#[derive(Clone, Debug)]
pub struct LrSchedule {
    pub warmup_epochs: f64,
    pub total_epochs: f64,
    /// Floor expressed as an absolute rate for the base lr.
    pub min_lr: f64,
    pub base_lr: f64,
}

impl LrSchedule {
    pub fn new(warmup_epochs: f64, total_epochs: f64, base_lr: f64, min_lr: f64) -> Self {
        Self {
            warmup_epochs,
            total_epochs,
            min_lr,
            base_lr,
        }
    }

    /// Factor at a fractional epoch position in `[0, total_epochs]`.
    pub fn factor(&self, epoch: f64) -> f64 {
        let floor = (self.min_lr / self.base_lr).min(1.0);
        if self.total_epochs <= 0.0 {
            return 1.0;
        }
        if epoch < self.warmup_epochs && self.warmup_epochs > 0.0 {
            // Linear ramp; never exactly zero so the first steps still move.
            return ((epoch + 1e-9) / self.warmup_epochs).min(1.0).max(floor);
        }
        let span = (self.total_epochs - self.warmup_epochs).max(1e-9);
        let p = ((epoch - self.warmup_epochs) / span).clamp(0.0, 1.0);
        let cos = 0.5 * (1.0 + (std::f64::consts::PI * p).cos());
        floor + (1.0 - floor) * cos
    }
}
