//! End-to-end pose→text model: parameter registration and per-pass assembly.
//!
//! The network couples three stages:
//!
//! 1. four skeleton part encoders ([`crate::stgcn`]) whose frame features are
//!    fused and fed to a small recurrent decoder for teacher-forced token
//!    prediction;
//! 2. per-part hyperbolic projections of the pooled pose summaries into a
//!    shared Poincaré ball;
//! 3. a strategy-selected alignment loss between part points and decoder
//!    token states, blended with the token cross-entropy by the α schedule.
//!
//! Parameters live in a [`ParamStore`]; every pass reopens them through a
//! [`StepCtx`] and rebuilds the layer structs, so a training step sees
//! tracked leaves on a fresh tape while evaluation sees plain tensors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{Strategy, TrainConfig};
use crate::data::{Batch, PAD};
use crate::error::{Error, Result};
use crate::frechet::FrechetConfig;
use crate::layers::{
    contrastive_loss, contrastive_loss_parts, cross_entropy_masked, pooled_align, token_align,
    AlphaSchedule, ContrastiveHead, HyperbolicAttention, HyperbolicProjection,
};
use crate::manifold::{ManifoldPoint, PoincareBall};
use crate::optim::{Group, ParamStore, StepCtx};
use crate::stgcn::{
    build_graph, encode_parts, AdjacencyStrategy, FuseLayer, GcnUnit, PartEncoder, PartFeatures,
    SkeletonGraph, StgcnBlock, TemporalConv, DEFAULT_ANCHORS, PARTS,
};
use crate::tensor::{stack, Tensor};

/// Curvature used by the `euclidean_*` strategies: small enough that the
/// ball is numerically flat at working radii. Frozen for the whole run.
pub const EUCLIDEAN_C: f64 = 1e-3;

/// ST-GCN blocks per part encoder.
const BLOCKS: usize = 2;
/// Temporal kernel size for every temporal convolution.
const T_KERNEL: usize = 3;
/// Neighbourhood radius of the adjacency kernels.
const MAX_HOP: usize = 1;
/// Initial `log_scale` of the hyperbolic projections. Batch-normalized
/// features have norms around `sqrt(d)`, which untempered would land every
/// projected point on the tangent-clip boundary; this starts them mid-ball
/// and lets the learnable scale take over.
const INIT_LOG_SCALE: f64 = -1.5;

/// Model description: everything needed to rebuild the network from a
/// [`StepCtx`]. The learnable state itself lives in the [`ParamStore`]
/// returned by [`Model::init`].
pub struct Model {
    pub cfg: TrainConfig,
    /// Token vocabulary size (logit width of the decoder).
    pub vocab: usize,
    /// One skeleton graph per entry of [`PARTS`].
    graphs: Vec<SkeletonGraph>,
    /// Whether `ball.log_c` is registered as a trainable parameter.
    pub learn_c: bool,
    /// Curvature at initialization, resolved from strategy and config.
    pub c0: f64,
}

/// Outputs of one forward pass.
pub struct ForwardOut {
    /// Teacher-forced token cross-entropy (scalar, tracked in train mode).
    pub ce: Tensor,
    /// Alignment loss (scalar); an untracked zero for [`Strategy::None`].
    pub hyp: Tensor,
    /// Blend factor α at this step (scalar).
    pub alpha: Tensor,
    /// Training objective: `α·ce + (1−α)·hyp`, or plain `ce` when the
    /// strategy is `none`.
    pub loss: Tensor,
    /// Current curvature value.
    pub c: f64,
    /// Mean geodesic distance from the origin per part, in [`PARTS`] order.
    pub radii: Vec<f64>,
    /// Correctly predicted tokens under teacher forcing.
    pub token_correct: usize,
    /// Predicted (non-padding) token positions.
    pub token_total: usize,
    /// Retrieval embeddings; populated in [`Mode::Eval`] only.
    pub embeddings: Option<EvalEmbeddings>,
}

/// Forward-pass flavour: training records the tape and skips retrieval
/// embeddings; evaluation computes them on untracked tensors.
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Pose- and text-side points used for retrieval scoring. Which variant is
/// produced follows the alignment strategy, so ranking reproduces the score
/// the training loss optimizes.
pub enum EvalEmbeddings {
    /// `pose`, `text`: `(B, d_hyp)` ball coordinates.
    Pooled { pose: Tensor, text: Tensor },
    /// `parts`, `contexts`: `(B, P, d_hyp)` ball coordinates.
    Token { parts: Tensor, contexts: Tensor },
}

impl EvalEmbeddings {
    /// Pose→text distance matrix `(B, B)`: entry `(i, j)` scores query
    /// pose `i` against candidate text `j` (smaller is better). The token
    /// variant averages geodesic distances over parts.
    pub fn distances(&self, c: f64) -> Result<Tensor> {
        let ball = PoincareBall::new(c)?;
        match self {
            EvalEmbeddings::Pooled { pose, text } => {
                let p = ManifoldPoint::new(&ball, pose.clone())?;
                let t = ManifoldPoint::new(&ball, text.clone())?;
                ball.dist_pairwise(&p, &t)
            }
            EvalEmbeddings::Token { parts, contexts } => {
                let (b, p_count, d) = (
                    parts.shape()[0],
                    parts.shape()[1],
                    parts.shape()[2],
                );
                let mut total: Option<Tensor> = None;
                for p in 0..p_count {
                    let q = ManifoldPoint::new(
                        &ball,
                        parts.narrow(1, p, 1)?.reshape(&[b, d])?,
                    )?;
                    let k = ManifoldPoint::new(
                        &ball,
                        contexts.narrow(1, p, 1)?.reshape(&[b, d])?,
                    )?;
                    let dists = ball.dist_pairwise(&q, &k)?;
                    total = Some(match total {
                        Some(acc) => acc.add(&dists)?,
                        None => dists,
                    });
                }
                total
                    .expect("P ≥ 1 by construction")
                    .affine(1.0 / p_count as f64, 0.0)
            }
        }
    }
}

/// Top-1 and top-5 pose→text retrieval accuracy from a distance matrix
/// `(B, B)`: a query is correct if any of its k nearest candidate texts
/// carries the query's label. Ties break toward the lower index, which keeps
/// the metric deterministic.
pub fn retrieval_metrics(dists: &Tensor, labels: &[usize]) -> Result<(f64, f64)> {
    let shape = dists.shape();
    if dists.rank() != 2 || shape[0] != shape[1] || shape[0] != labels.len() {
        return Err(Error::InvalidShape {
            op: "retrieval",
            shape: shape.to_vec(),
            msg: format!("expected square distances over {} labels", labels.len()),
        });
    }
    let b = shape[0];
    let mut top1 = 0usize;
    let mut top5 = 0usize;
    for i in 0..b {
        let mut order: Vec<usize> = (0..b).collect();
        order.sort_by(|&x, &y| {
            dists
                .at(&[i, x])
                .partial_cmp(&dists.at(&[i, y]))
                .expect("distances are finite")
                .then(x.cmp(&y))
        });
        if labels[order[0]] == labels[i] {
            top1 += 1;
        }
        if order.iter().take(5).any(|&j| labels[j] == labels[i]) {
            top5 += 1;
        }
    }
    Ok((top1 as f64 / b as f64, top5 as f64 / b as f64))
}

impl Model {
    /// Build the model description and register every parameter.
    ///
    /// Initial values are drawn from a ChaCha stream seeded with `cfg.seed`
    /// in a fixed registration order, so initialization is reproducible.
    /// Weight matrices use normal draws scaled by `sqrt(2/fan_in)` ahead of
    /// ReLU and `sqrt(1/fan_in)` elsewhere; biases, batch-norm shifts and
    /// the attention key bias start at zero.
    pub fn init(cfg: &TrainConfig, vocab: usize) -> Result<(Self, ParamStore)> {
        cfg.validate()?;
        if vocab < 4 {
            return Err(Error::Config(format!(
                "vocabulary needs padding, BOS, EOS and at least one content token; got {vocab}"
            )));
        }
        let euclidean = cfg.strategy.is_euclidean();
        let c0 = if euclidean { EUCLIDEAN_C } else { cfg.init_c };
        let learn_c = cfg.learnable_c && !euclidean;
        let mut graphs = Vec::with_capacity(PARTS.len());
        for part in PARTS {
            graphs.push(build_graph(part, AdjacencyStrategy::Uniform, MAX_HOP)?);
        }

        let (dg, dm, dh) = (cfg.d_gcn, cfg.d_model, cfg.d_hyp);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut store = ParamStore::default();

        fn normal(rng: &mut ChaCha8Rng, n: usize, std: f64) -> Vec<f64> {
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    z * std
                })
                .collect()
        }
        let he = |fan_in: usize| (2.0 / fan_in as f64).sqrt();
        let lin = |fan_in: usize| (1.0 / fan_in as f64).sqrt();

        // ===== backbone: part encoders → fusion → decoder =====
        for part in PARTS {
            let p = |suffix: &str| format!("enc.{part}.{suffix}");
            store.add(&p("proj.w"), normal(&mut rng, 2 * dg, lin(2)), &[2, dg], Group::Backbone)?;
            store.add(&p("proj.b"), vec![0.0; dg], &[dg], Group::Backbone)?;
            for blk in 0..BLOCKS {
                let b = |suffix: &str| p(&format!("block{blk}.{suffix}"));
                store.add(&b("gcn.w"), normal(&mut rng, dg * dg, he(dg)), &[dg, dg], Group::Backbone)?;
                store.add(&b("gcn.b"), vec![0.0; dg], &[dg], Group::Backbone)?;
                store.add(&b("gcn.gamma"), vec![1.0; dg], &[dg], Group::Backbone)?;
                store.add(&b("gcn.beta"), vec![0.0; dg], &[dg], Group::Backbone)?;
                store.add(
                    &b("tcn.w"),
                    normal(&mut rng, T_KERNEL * dg * dg, he(T_KERNEL * dg)),
                    &[T_KERNEL, dg, dg],
                    Group::Backbone,
                )?;
                store.add(&b("tcn.b"), vec![0.0; dg], &[dg], Group::Backbone)?;
                store.add(&b("tcn.gamma"), vec![1.0; dg], &[dg], Group::Backbone)?;
                store.add(&b("tcn.beta"), vec![0.0; dg], &[dg], Group::Backbone)?;
            }
            store.add(
                &p("temporal.w"),
                normal(&mut rng, T_KERNEL * dg * dg, he(T_KERNEL * dg)),
                &[T_KERNEL, dg, dg],
                Group::Backbone,
            )?;
            store.add(&p("temporal.b"), vec![0.0; dg], &[dg], Group::Backbone)?;
            store.add(&p("temporal.gamma"), vec![1.0; dg], &[dg], Group::Backbone)?;
            store.add(&p("temporal.beta"), vec![0.0; dg], &[dg], Group::Backbone)?;
        }
        let fused_in = PARTS.len() * dg;
        store.add("fuse.w", normal(&mut rng, fused_in * dm, lin(fused_in)), &[fused_in, dm], Group::Backbone)?;
        store.add("fuse.b", vec![0.0; dm], &[dm], Group::Backbone)?;

        store.add("dec.embed", normal(&mut rng, vocab * dm, lin(dm)), &[vocab, dm], Group::Backbone)?;
        store.add("dec.w_in", normal(&mut rng, dm * dm, lin(dm)), &[dm, dm], Group::Backbone)?;
        store.add("dec.w_h", normal(&mut rng, dm * dm, lin(dm)), &[dm, dm], Group::Backbone)?;
        store.add("dec.w_c", normal(&mut rng, dm * dm, lin(dm)), &[dm, dm], Group::Backbone)?;
        store.add("dec.b", vec![0.0; dm], &[dm], Group::Backbone)?;
        store.add("dec.out.w", normal(&mut rng, dm * vocab, lin(dm)), &[dm, vocab], Group::Backbone)?;
        store.add("dec.out.b", vec![0.0; vocab], &[vocab], Group::Backbone)?;

        // ===== hyperbolic head: Euclidean-parameterized pieces =====
        for part in PARTS {
            store.add(
                &format!("hyp.proj.{part}.w"),
                normal(&mut rng, dg * dh, lin(dg)),
                &[dg, dh],
                Group::HypEuclidean,
            )?;
            store.add(
                &format!("hyp.proj.{part}.scale"),
                vec![INIT_LOG_SCALE],
                &[],
                Group::HypEuclidean,
            )?;
        }
        store.add("hyp.text.w", normal(&mut rng, dm * dh, lin(dm)), &[dm, dh], Group::HypEuclidean)?;
        store.add("hyp.text.scale", vec![INIT_LOG_SCALE], &[], Group::HypEuclidean)?;
        store.add("hyp.attn.key.w", normal(&mut rng, dh * dh, lin(dh)), &[dh, dh], Group::HypEuclidean)?;
        store.add("hyp.attn.tau", vec![0.0], &[], Group::HypEuclidean)?;
        store.add(
            "hyp.head.tau",
            vec![ContrastiveHead::init_log_tau(cfg.tau0)],
            &[],
            Group::HypEuclidean,
        )?;
        store.add("hyp.head.margin", vec![cfg.margin], &[], Group::HypEuclidean)?;
        store.add("hyp.alpha", vec![0.0], &[], Group::HypEuclidean)?;

        // ===== manifold-valued parameters =====
        store.add("hyp.attn.key.b", vec![0.0; dh], &[dh], Group::RiemannianPoint)?;
        if learn_c {
            store.add("ball.log_c", vec![c0.ln()], &[], Group::RiemannianScalar)?;
        }

        Ok((
            Self {
                cfg: cfg.clone(),
                vocab,
                graphs,
                learn_c,
                c0,
            },
            store,
        ))
    }

    /// The working ball: reads `ball.log_c` from the pass when curvature is
    /// learnable (so distance gradients reach it), otherwise a frozen ball.
    pub fn ball(&self, ctx: &StepCtx) -> Result<PoincareBall> {
        if self.learn_c {
            PoincareBall::from_log_c(&ctx.leaf("ball.log_c")?)
        } else {
            PoincareBall::new(self.c0)
        }
    }

    fn build_encoders(&self, ctx: &StepCtx) -> Result<Vec<PartEncoder>> {
        let use_norm = self.cfg.use_norm;
        PARTS
            .iter()
            .enumerate()
            .map(|(i, part)| {
                let p = |suffix: &str| format!("enc.{part}.{suffix}");
                let mut blocks = Vec::with_capacity(BLOCKS);
                for blk in 0..BLOCKS {
                    let b = |suffix: &str| p(&format!("block{blk}.{suffix}"));
                    let gcn = GcnUnit::new(
                        ctx.leaf(&b("gcn.w"))?,
                        ctx.leaf(&b("gcn.b"))?,
                        self.graphs[i].a.clone(),
                        ctx.leaf(&b("gcn.gamma"))?,
                        ctx.leaf(&b("gcn.beta"))?,
                        use_norm,
                    )?;
                    let tcn = TemporalConv::new(ctx.leaf(&b("tcn.w"))?, ctx.leaf(&b("tcn.b"))?, 1)?;
                    blocks.push(StgcnBlock::new(
                        gcn,
                        tcn,
                        ctx.leaf(&b("tcn.gamma"))?,
                        ctx.leaf(&b("tcn.beta"))?,
                        None,
                        use_norm,
                    )?);
                }
                PartEncoder::new(
                    ctx.leaf(&p("proj.w"))?,
                    ctx.leaf(&p("proj.b"))?,
                    blocks,
                    TemporalConv::new(ctx.leaf(&p("temporal.w"))?, ctx.leaf(&p("temporal.b"))?, 1)?,
                    ctx.leaf(&p("temporal.gamma"))?,
                    ctx.leaf(&p("temporal.beta"))?,
                    use_norm,
                )
            })
            .collect()
    }

    /// Teacher-forced decoder pass. Consumes the padded token grid one step
    /// at a time with the recurrence
    /// `s_t = tanh(E[y_t]·W_in + s_{t−1}·W_h + summary·W_c + b)` and scores
    /// the next token from each state. Returns the stacked states
    /// `(N, L, d_model)`, the non-padding mask `(N, L)`, the smoothed
    /// cross-entropy over non-padding targets, and greedy-accuracy counts.
    fn decode(
        &self,
        ctx: &StepCtx,
        summary: &Tensor,
        tokens: &[Vec<usize>],
    ) -> Result<(Tensor, Tensor, Tensor, usize, usize)> {
        let n = tokens.len();
        let l = tokens.iter().map(Vec::len).max().unwrap_or(0);
        if n == 0 || l < 2 {
            return Err(Error::Empty { op: "decoder" });
        }
        let dm = self.cfg.d_model;
        let embed = ctx.leaf("dec.embed")?;
        let w_in = ctx.leaf("dec.w_in")?;
        let w_h = ctx.leaf("dec.w_h")?;
        let w_c = ctx.leaf("dec.w_c")?;
        let b = ctx.leaf("dec.b")?;
        let out_w = ctx.leaf("dec.out.w")?;
        let out_b = ctx.leaf("dec.out.b")?;

        let summary_term = summary.matmul(&w_c)?;
        let mut state = Tensor::zeros(&[n, dm])?;
        let mut states = Vec::with_capacity(l);
        let mut logits = Vec::with_capacity(l);
        let mut mask = vec![0.0; n * l];
        for t in 0..l {
            let ids: Vec<usize> = tokens
                .iter()
                .map(|seq| seq.get(t).copied().unwrap_or(PAD))
                .collect();
            for (row, &id) in ids.iter().enumerate() {
                if id != PAD {
                    mask[row * l + t] = 1.0;
                }
            }
            let emb = embed.index_select(0, &ids)?;
            state = emb
                .matmul(&w_in)?
                .add(&state.matmul(&w_h)?)?
                .add(&summary_term)?
                .add(&b)?
                .tanh()?;
            logits.push(state.matmul(&out_w)?.add(&out_b)?);
            states.push(state.clone());
        }

        let state_refs: Vec<&Tensor> = states.iter().collect();
        let stacked_states = stack(&state_refs, 1)?; // (N, L, dm)
        let logit_refs: Vec<&Tensor> = logits.iter().collect();
        let flat_logits = stack(&logit_refs, 1)?.reshape(&[n * l, self.vocab])?;

        // The state after consuming token t predicts token t+1; rows with no
        // next token get a padding target and drop out of the loss.
        let mut targets = vec![PAD; n * l];
        for (row, seq) in tokens.iter().enumerate() {
            for t in 0..l {
                if t + 1 < seq.len() {
                    targets[row * l + t] = seq[t + 1];
                }
            }
        }
        let ce = cross_entropy_masked(&flat_logits, &targets, Some(PAD), self.cfg.smoothing)?;

        let mut correct = 0usize;
        let mut total = 0usize;
        let data = flat_logits.data();
        for (row, &target) in targets.iter().enumerate() {
            if target == PAD {
                continue;
            }
            let slice = &data[row * self.vocab..(row + 1) * self.vocab];
            let argmax = slice
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite logits").then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .expect("vocab ≥ 4");
            if argmax == target {
                correct += 1;
            }
            total += 1;
        }

        Ok((stacked_states, Tensor::new(mask, &[n, l])?, ce, correct, total))
    }

    /// Encoder features plus their per-part ball points: the shared front
    /// half of [`Model::forward`], also used standalone by the embedding
    /// exporter.
    fn encode_and_project(
        &self,
        ctx: &StepCtx,
        batch: &Batch,
    ) -> Result<(PartFeatures, PoincareBall, Vec<ManifoldPoint>)> {
        let encoders = self.build_encoders(ctx)?;
        let feats = encode_parts(&encoders, &batch.keypoints, None, &DEFAULT_ANCHORS)?;
        let ball = self.ball(ctx)?;
        let mut parts = Vec::with_capacity(PARTS.len());
        for (p, part) in PARTS.iter().enumerate() {
            let proj = HyperbolicProjection::new(
                ctx.leaf(&format!("hyp.proj.{part}.w"))?,
                ctx.leaf(&format!("hyp.proj.{part}.scale"))?,
            )?;
            parts.push(proj.project(&ball, &feats.pooled[p])?);
        }
        Ok((feats, ball, parts))
    }

    /// Per-part ball points for a batch, in [`PARTS`] order. Each point holds
    /// `(B, d_hyp)` coordinates on the working ball.
    pub fn part_points(
        &self,
        ctx: &StepCtx,
        batch: &Batch,
    ) -> Result<(PoincareBall, Vec<ManifoldPoint>)> {
        let (_, ball, parts) = self.encode_and_project(ctx, batch)?;
        Ok((ball, parts))
    }

    /// One full pass over a batch. `step`/`total_steps` drive the α
    /// schedule; evaluation callers typically pass the final step.
    pub fn forward(
        &self,
        ctx: &StepCtx,
        batch: &Batch,
        step: usize,
        total_steps: usize,
        mode: Mode,
    ) -> Result<ForwardOut> {
        let (feats, ball, parts) = self.encode_and_project(ctx, batch)?;

        let fuse = FuseLayer::new(ctx.leaf("fuse.w")?, ctx.leaf("fuse.b")?)?;
        let fused = fuse.forward(&feats.z)?; // (N, T, d_model)
        let summary = fused.mean(Some(1), false)?; // (N, d_model)
        let (states, token_mask, ce, token_correct, token_total) =
            self.decode(ctx, &summary, &batch.tokens)?;

        let mut radii = Vec::with_capacity(parts.len());
        for point in &parts {
            let d0 = ball.dist0(point)?;
            radii.push(d0.data().iter().sum::<f64>() / d0.numel() as f64);
        }

        let text_proj =
            HyperbolicProjection::new(ctx.leaf("hyp.text.w")?, ctx.leaf("hyp.text.scale")?)?;
        let head = ContrastiveHead {
            log_tau: ctx.leaf("hyp.head.tau")?,
            margin: ctx.leaf("hyp.head.margin")?,
            label_smoothing: self.cfg.smoothing,
        };
        let fcfg = FrechetConfig {
            weight_temperature: self.cfg.weight_temperature,
            ..FrechetConfig::default()
        };

        let mut embeddings = None;
        let hyp = match self.cfg.strategy {
            Strategy::None => {
                if mode == Mode::Eval {
                    let (pose, text) =
                        pooled_align(&ball, &parts, &states, &token_mask, &text_proj, &fcfg)?;
                    embeddings = Some(EvalEmbeddings::Pooled {
                        pose: pose.coords().detach(),
                        text: text.coords().detach(),
                    });
                }
                Tensor::scalar(0.0)
            }
            Strategy::Pooled | Strategy::EuclideanPooled => {
                let (pose, text) =
                    pooled_align(&ball, &parts, &states, &token_mask, &text_proj, &fcfg)?;
                let loss = contrastive_loss(&pose, &text, &head)?;
                if mode == Mode::Eval {
                    embeddings = Some(EvalEmbeddings::Pooled {
                        pose: pose.coords().detach(),
                        text: text.coords().detach(),
                    });
                }
                loss
            }
            Strategy::Token | Strategy::EuclideanToken => {
                let attn = HyperbolicAttention {
                    m_key: ctx.leaf("hyp.attn.key.w")?,
                    b_key: ctx.leaf("hyp.attn.key.b")?,
                    log_tau_attn: ctx.leaf("hyp.attn.tau")?,
                };
                let aligned =
                    token_align(&ball, &parts, &states, &token_mask, &text_proj, &attn, &fcfg)?;
                let loss = contrastive_loss_parts(&aligned.parts, &aligned.contexts, &head)?;
                if mode == Mode::Eval {
                    embeddings = Some(EvalEmbeddings::Token {
                        parts: aligned.parts.coords().detach(),
                        contexts: aligned.contexts.coords().detach(),
                    });
                }
                loss
            }
        };

        let schedule = AlphaSchedule {
            alpha_init: self.cfg.alpha_init,
            logit_alpha: ctx.leaf("hyp.alpha")?,
            total_steps,
        };
        let alpha = schedule.alpha(step)?;
        let loss = if self.cfg.strategy == Strategy::None {
            // CE-only: α stays out of the graph so its logit gets no
            // spurious gradient from a loss it does not blend.
            ce.clone()
        } else {
            crate::layers::total_loss(&ce, &hyp, &alpha)?
        };

        Ok(ForwardOut {
            ce,
            hyp,
            alpha,
            loss,
            c: ball.c(),
            radii,
            token_correct,
            token_total,
            embeddings,
        })
    }
}
