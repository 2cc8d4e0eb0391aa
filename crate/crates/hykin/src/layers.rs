//! Hyperbolic model layers: tangent-space projection, the Pooled and Token
//! alignment strategies, the geometric contrastive loss, and the dynamic
//! loss-blend schedule.
//!
//! All layers are thin parameter holders over tape tensors; the ball is
//! passed per call so a learnable curvature built from the current `log_c`
//! threads through every operation.

use crate::error::{Error, Result};
use crate::frechet::{self, FrechetConfig};
use crate::manifold::{ManifoldPoint, PoincareBall, TangentVector};
use crate::tensor::{stack, Tensor};

// ===== projection =====

/// Projects Euclidean features into the ball: `h = expmap0(s·W·x)` with a
/// learnable matrix `W (d_in, d_hyp)` and scale `s = exp(log_scale)`.
#[derive(Clone)]
pub struct HyperbolicProjection {
    /// Weight matrix, `(d_in, d_hyp)`; applied as `x·W` to row features.
    pub w: Tensor,
    /// Log of the positive feature scale.
    pub log_scale: Tensor,
}

impl HyperbolicProjection {
    pub fn new(w: Tensor, log_scale: Tensor) -> Result<Self> {
        if w.rank() != 2 {
            return Err(Error::InvalidShape {
                op: "hyperbolic_projection",
                shape: w.shape().to_vec(),
                msg: "weight must be a matrix (d_in, d_hyp)".into(),
            });
        }
        if log_scale.numel() != 1 {
            return Err(Error::InvalidShape {
                op: "hyperbolic_projection",
                shape: log_scale.shape().to_vec(),
                msg: "log_scale must be a scalar".into(),
            });
        }
        Ok(Self { w, log_scale })
    }

    /// Map features `(..., d_in)` onto the ball. The scaled tangent is
    /// norm-clipped inside the exponential map and the result projected.
    pub fn project(&self, ball: &PoincareBall, x: &Tensor) -> Result<ManifoldPoint> {
        if x.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { op: "project" });
        }
        let (d_in, d_hyp) = (self.w.shape()[0], self.w.shape()[1]);
        if x.rank() == 0 || *x.shape().last().expect("rank checked") != d_in {
            return Err(Error::ShapeMismatch {
                op: "project",
                lhs: x.shape().to_vec(),
                rhs: self.w.shape().to_vec(),
            });
        }
        let rows = x.numel() / d_in;
        let t = x.reshape(&[rows, d_in])?.matmul(&self.w)?;
        let t = t.mul(&self.log_scale.exp()?)?;
        let mut out_shape = x.shape().to_vec();
        *out_shape.last_mut().expect("rank checked") = d_hyp;
        ball.expmap0(&TangentVector::at_origin(t.reshape(&out_shape)?))
    }
}

// ===== pooled alignment =====

/// Pooled strategy: one global pose embedding (weighted Fréchet mean of the
/// part embeddings, radius-weighted) aligned against one text embedding
/// (masked mean of token features, projected).
///
/// `parts` are P points shaped `(..., d_hyp)`; `tokens (..., T, d_model)`
/// with `mask (..., T)` (1 = real token). Returns `(pose, text)`.
pub fn pooled_align(
    ball: &PoincareBall,
    parts: &[ManifoldPoint],
    tokens: &Tensor,
    mask: &Tensor,
    text_proj: &HyperbolicProjection,
    cfg: &FrechetConfig,
) -> Result<(ManifoldPoint, ManifoldPoint)> {
    let weights = frechet::part_weights(ball, parts, cfg)?;
    let pose = frechet::frechet_mean(parts, &weights, cfg)?.mean;
    let text = text_proj.project(ball, &masked_mean_tokens(tokens, mask)?)?;
    Ok((pose, text))
}

/// Mean over the token axis of `tokens (..., T, d)` restricted to
/// `mask (..., T) > 0.5`; errors on a fully masked lane.
fn masked_mean_tokens(tokens: &Tensor, mask: &Tensor) -> Result<Tensor> {
    let rank = tokens.rank();
    if rank < 2 || mask.shape() != &tokens.shape()[..rank - 1] {
        return Err(Error::ShapeMismatch {
            op: "masked_mean",
            lhs: tokens.shape().to_vec(),
            rhs: mask.shape().to_vec(),
        });
    }
    let t = tokens.shape()[rank - 2];
    for (lane, chunk) in mask.data().chunks(t).enumerate() {
        if !chunk.iter().any(|&m| m > 0.5) {
            return Err(Error::FullyMaskedLane { lane: vec![lane] });
        }
    }
    let me = mask.unsqueeze(rank - 1)?; // (..., T, 1)
    let summed = tokens.mul(&me)?.sum(Some(rank - 2), false)?; // (..., d)
    let count = mask.sum(Some(rank - 2), false)?.unsqueeze(rank - 2)?; // (..., 1)
    summed.div(&count)
}

// ===== token alignment (hyperbolic attention) =====

/// Hyperbolic cross-attention parameters: a Möbius affine key map
/// (`k = (M_key ⊗ v) ⊕ b_key`) and a positive temperature
/// `τ_attn = exp(log_tau_attn)`.
#[derive(Clone)]
pub struct HyperbolicAttention {
    /// Key transform, `(d_hyp, d_hyp)`.
    pub m_key: Tensor,
    /// Key bias — a point on the ball, `(d_hyp,)`; kept inside the ball by
    /// the Riemannian optimizer.
    pub b_key: Tensor,
    /// Log of the attention temperature.
    pub log_tau_attn: Tensor,
}

/// Token strategy output: per-part queries and their attended text contexts,
/// both `(..., P, d_hyp)`, plus the attention rows `(..., P, T)`.
pub struct TokenAlign {
    pub parts: ManifoldPoint,
    pub contexts: ManifoldPoint,
    pub weights: Tensor,
    /// Whether the midpoint iteration converged in every lane.
    pub midpoint_converged: bool,
}

/// Token strategy: project tokens to value points, form keys with the Möbius
/// affine map, score each part query by negative geodesic distance, softmax
/// over unmasked tokens at temperature τ_attn, and aggregate values with the
/// weighted hyperbolic midpoint.
pub fn token_align(
    ball: &PoincareBall,
    parts: &[ManifoldPoint],
    tokens: &Tensor,
    mask: &Tensor,
    text_proj: &HyperbolicProjection,
    attn: &HyperbolicAttention,
    cfg: &FrechetConfig,
) -> Result<TokenAlign> {
    if parts.is_empty() {
        return Err(Error::Empty { op: "token_align" });
    }
    let rank = tokens.rank();
    if rank < 2 || mask.shape() != &tokens.shape()[..rank - 1] {
        return Err(Error::ShapeMismatch {
            op: "token_align",
            lhs: tokens.shape().to_vec(),
            rhs: mask.shape().to_vec(),
        });
    }
    // Values: tokens projected onto the ball, (..., T, d).
    let values = text_proj.project(ball, tokens)?;
    let d = values.dim();
    let t = tokens.shape()[rank - 2];
    // Keys: Möbius affine transform of the values, (..., T, d).
    let mapped = ball.mobius_matvec(&attn.m_key, &values)?;
    let bias = ManifoldPoint::new_unchecked(
        ball,
        attn.b_key.broadcast_to(mapped.coords().shape())?,
    );
    let keys = ball.mobius_add(&mapped, &bias)?;
    // Queries: stacked parts, (..., P, d).
    let p = parts.len();
    let coord_refs: Vec<&Tensor> = parts.iter().map(|pt| pt.coords()).collect();
    let queries = stack(&coord_refs, rank - 2)?;
    // Scores −dist(h_p, k_t): broadcast to (..., P, T, d) pairs.
    let mut pair_shape = tokens.shape()[..rank - 2].to_vec();
    pair_shape.extend_from_slice(&[p, t, d]);
    let qe = queries.unsqueeze(rank - 1)?.broadcast_to(&pair_shape)?;
    let ke = keys.coords().unsqueeze(rank - 2)?.broadcast_to(&pair_shape)?;
    let scores = ball
        .dist(
            &ManifoldPoint::new_unchecked(ball, qe),
            &ManifoldPoint::new_unchecked(ball, ke),
        )?
        .neg()?; // (..., P, T)
    let scaled = scores.div(&attn.log_tau_attn.exp()?)?;
    let mask_e = mask
        .unsqueeze(rank - 2)?
        .broadcast_to(scaled.shape())?;
    let weights = scaled.softmax(scaled.rank() - 1, Some(&mask_e))?;
    let mid = frechet::weighted_midpoint(&values, &weights, cfg)?;
    Ok(TokenAlign {
        parts: ManifoldPoint::new_unchecked(ball, queries),
        contexts: mid.mean,
        weights,
        midpoint_converged: mid.converged,
    })
}

// ===== contrastive loss =====

/// Geometric InfoNCE head. Temperature `τ = 2·sigmoid(log_tau) + 0.01`
/// (bounded positive); margin `m` clamped at 0 and subtracted from
/// off-diagonal logits; label smoothing applied to the cross-entropy.
#[derive(Clone)]
pub struct ContrastiveHead {
    pub log_tau: Tensor,
    pub margin: Tensor,
    pub label_smoothing: f64,
}

impl ContrastiveHead {
    /// `log_tau` initialization matching a target temperature `tau0`:
    /// `logit(tau0/2)`, so `τ = 2·sigmoid(log_tau) + 0.01 ≈ tau0`.
    pub fn init_log_tau(tau0: f64) -> f64 {
        let p = tau0 / 2.0;
        (p / (1.0 - p)).ln()
    }

    /// Current temperature value.
    pub fn tau(&self) -> Result<Tensor> {
        self.log_tau.sigmoid()?.affine(2.0, 0.01)
    }
}

/// Per-row InfoNCE losses, `(B,)`: row `i` scores pose `i` against all text
/// points with logits `−dist(p_i, t_j)/τ − m·𝟙(i≠j)` and takes the
/// label-smoothed cross-entropy against target `i`.
pub fn contrastive_row_losses(
    pose: &ManifoldPoint,
    text: &ManifoldPoint,
    head: &ContrastiveHead,
) -> Result<Tensor> {
    let shape = pose.coords().shape();
    if pose.coords().rank() != 2 || shape != text.coords().shape() {
        return Err(Error::ShapeMismatch {
            op: "contrastive_loss",
            lhs: shape.to_vec(),
            rhs: text.coords().shape().to_vec(),
        });
    }
    let b = shape[0];
    let ball = pose.ball();
    let d = ball.dist_pairwise(pose, text)?; // (B, B)
    let logits = d.neg()?.div(&head.tau()?)?;
    // Subtract the clamped margin from off-diagonal logits, so negatives
    // must be beaten by a geodesic gap before they stop contributing.
    let mut off = vec![1.0; b * b];
    for i in 0..b {
        off[i * b + i] = 0.0;
    }
    let off = Tensor::new(off, &[b, b])?;
    let logits = logits.sub(&off.mul(&head.margin.clamp_min(0.0)?)?)?;
    let logp = log_softmax_last(&logits)?;
    // Label-smoothed dense targets: (1−s) on the diagonal, s/B everywhere.
    let s = head.label_smoothing;
    let mut q = vec![s / b as f64; b * b];
    for i in 0..b {
        q[i * b + i] += 1.0 - s;
    }
    let q = Tensor::new(q, &[b, b])?;
    q.mul(&logp)?.sum(Some(1), false)?.neg()
}

/// Batch-averaged contrastive loss (see [`contrastive_row_losses`]).
pub fn contrastive_loss(
    pose: &ManifoldPoint,
    text: &ManifoldPoint,
    head: &ContrastiveHead,
) -> Result<Tensor> {
    contrastive_row_losses(pose, text, head)?.mean_all()
}

/// Token-strategy loss: the contrastive loss per part, averaged over the P
/// parts. `parts` and `contexts` are `(B, P, d)`.
pub fn contrastive_loss_parts(
    parts: &ManifoldPoint,
    contexts: &ManifoldPoint,
    head: &ContrastiveHead,
) -> Result<Tensor> {
    let shape = parts.coords().shape();
    if parts.coords().rank() != 3 || shape != contexts.coords().shape() {
        return Err(Error::ShapeMismatch {
            op: "contrastive_loss_parts",
            lhs: shape.to_vec(),
            rhs: contexts.coords().shape().to_vec(),
        });
    }
    let (b, p, d) = (shape[0], shape[1], shape[2]);
    let ball = parts.ball();
    let mut total: Option<Tensor> = None;
    for k in 0..p {
        let hp = ManifoldPoint::new_unchecked(
            ball,
            parts.coords().narrow(1, k, 1)?.reshape(&[b, d])?,
        );
        let cp = ManifoldPoint::new_unchecked(
            ball,
            contexts.coords().narrow(1, k, 1)?.reshape(&[b, d])?,
        );
        let l = contrastive_loss(&hp, &cp, head)?;
        total = Some(match total {
            Some(acc) => acc.add(&l)?,
            None => l,
        });
    }
    total
        .expect("p ≥ 1 by shape validation")
        .affine(1.0 / p as f64, 0.0)
}

/// Log-softmax over the last axis, computed stably as
/// `x − max − log Σ exp(x − max)`.
pub fn log_softmax_last(x: &Tensor) -> Result<Tensor> {
    let axis = x.rank() - 1;
    let m = x.max(Some(axis), true)?;
    let sh = x.sub(&m)?;
    let lse = sh.exp()?.sum(Some(axis), true)?.log()?;
    sh.sub(&lse)
}

/// Cross-entropy of row logits `(N, K)` against integer targets, averaged
/// over rows whose target is not `pad`. Errors if every row is padding.
///
/// `smoothing` mixes the one-hot target with the uniform distribution:
/// `q = (1−s)·onehot + s/K`. Zero recovers plain cross-entropy.
pub fn cross_entropy_masked(
    logits: &Tensor,
    targets: &[usize],
    pad: Option<usize>,
    smoothing: f64,
) -> Result<Tensor> {
    if logits.rank() != 2 || logits.shape()[0] != targets.len() {
        return Err(Error::InvalidShape {
            op: "cross_entropy",
            shape: logits.shape().to_vec(),
            msg: format!("expected (N, K) logits for {} targets", targets.len()),
        });
    }
    if !(0.0..1.0).contains(&smoothing) {
        return Err(Error::Domain {
            op: "cross_entropy",
            value: smoothing,
        });
    }
    let (n, k) = (logits.shape()[0], logits.shape()[1]);
    let mut q = vec![0.0; n * k];
    let mut kept = 0usize;
    for (i, &t) in targets.iter().enumerate() {
        if t >= k {
            return Err(Error::InvalidShape {
                op: "cross_entropy",
                shape: logits.shape().to_vec(),
                msg: format!("target {t} out of range for {k} classes"),
            });
        }
        if pad == Some(t) {
            continue;
        }
        for j in 0..k {
            q[i * k + j] = smoothing / k as f64;
        }
        q[i * k + t] += 1.0 - smoothing;
        kept += 1;
    }
    if kept == 0 {
        return Err(Error::Empty {
            op: "cross_entropy",
        });
    }
    let logp = log_softmax_last(logits)?;
    logp.mul(&Tensor::new(q, &[n, k])?)?
        .sum_all()?
        .affine(-1.0 / kept as f64, 0.0)
}

// ===== loss blending =====

/// Dynamic blend factor for `L = α·L_CE + (1−α)·L_hyp`:
/// `α = clamp(α_init + 0.1·progress + sigmoid(logit_α)·0.2, 0.1, 1.0)`.
#[derive(Clone)]
pub struct AlphaSchedule {
    pub alpha_init: f64,
    pub logit_alpha: Tensor,
    pub total_steps: usize,
}

impl AlphaSchedule {
    /// Blend factor at `step`, a scalar tensor with gradient to `logit_alpha`.
    pub fn alpha(&self, step: usize) -> Result<Tensor> {
        if self.total_steps == 0 {
            return Err(Error::Config("alpha schedule: total_steps must be > 0".into()));
        }
        if step > self.total_steps {
            return Err(Error::Domain {
                op: "alpha",
                value: step as f64,
            });
        }
        let progress = step as f64 / self.total_steps as f64;
        let base = self.alpha_init + 0.1 * progress;
        self.logit_alpha
            .sigmoid()?
            .affine(0.2, base)?
            .clamp_min(0.1)?
            .clamp_max(1.0)
    }
}

/// Convex loss blend `a·ce + (1−a)·hyp`; gradients reach both losses and,
/// through `a`, the schedule's logit.
pub fn total_loss(ce: &Tensor, hyp_reg: &Tensor, a: &Tensor) -> Result<Tensor> {
    let one_minus = a.affine(-1.0, 1.0)?;
    ce.mul(a)?.add(&hyp_reg.mul(&one_minus)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::GradTape;

    fn identity(d: usize) -> Tensor {
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            m[i * d + i] = 1.0;
        }
        Tensor::new(m, &[d, d]).unwrap()
    }

    fn proj_identity(d: usize) -> HyperbolicProjection {
        HyperbolicProjection::new(identity(d), Tensor::scalar(0.0)).unwrap()
    }

    fn radial(ball: &PoincareBall, s: f64) -> ManifoldPoint {
        // Point at signed arc-length s along the first axis, built directly
        // (dist(0, ·) = s exactly; bypasses the tangent clip).
        let sc = ball.c().sqrt();
        let r = (s * sc / 2.0).tanh() / sc;
        ManifoldPoint::new(ball, Tensor::new(vec![r, 0.0], &[2]).unwrap()).unwrap()
    }

    #[test]
    fn project_keeps_origin_fixed() {
        let ball = PoincareBall::new(1.0).unwrap();
        let p = proj_identity(2)
            .project(&ball, &Tensor::zeros(&[2]).unwrap())
            .unwrap();
        assert_eq!(p.coords().to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn project_radius_matches_feature_norm() {
        let ball = PoincareBall::new(1.0).unwrap();
        let p = proj_identity(2)
            .project(&ball, &Tensor::new(vec![0.5, 0.0], &[2]).unwrap())
            .unwrap();
        let r = ball.dist0(&p).unwrap().scalar_value().unwrap();
        assert!((r - 0.5).abs() < 1e-9, "radius {r}");
    }

    #[test]
    fn log_scale_shift_doubles_tangent_norm() {
        let ball = PoincareBall::new(1.0).unwrap();
        let x = Tensor::new(vec![0.1, 0.2], &[2]).unwrap();
        let base = proj_identity(2);
        let doubled =
            HyperbolicProjection::new(identity(2), Tensor::scalar(2.0f64.ln())).unwrap();
        let n = |p: &HyperbolicProjection| {
            let pt = p.project(&ball, &x).unwrap();
            let t = ball.logmap0(&pt).unwrap();
            t.coords().data().iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        let (n1, n2) = (n(&base), n(&doubled));
        assert!((n2 - 2.0 * n1).abs() < 1e-9, "{n1} vs {n2}");
    }

    #[test]
    fn project_rejects_non_finite_input() {
        let ball = PoincareBall::new(1.0).unwrap();
        let x = Tensor::new(vec![f64::NAN, 0.0], &[2]).unwrap();
        assert!(matches!(
            proj_identity(2).project(&ball, &x),
            Err(Error::NonFinite { .. })
        ));
    }

    fn tokens_1x(d: usize, vals: &[f64]) -> Tensor {
        Tensor::new(vals.to_vec(), &[vals.len() / d, d]).unwrap()
    }

    #[test]
    fn pooled_identical_parts_fixed_point_and_single_token_text() {
        let ball = PoincareBall::new(1.0).unwrap();
        let p = ManifoldPoint::new(&ball, Tensor::new(vec![0.2, 0.1], &[2]).unwrap()).unwrap();
        let parts = vec![p.clone(), p.clone(), p.clone(), p.clone()];
        let tokens = tokens_1x(2, &[0.3, -0.1]);
        let mask = Tensor::new(vec![1.0], &[1]).unwrap();
        let (pose, text) = pooled_align(
            &ball,
            &parts,
            &tokens,
            &mask,
            &proj_identity(2),
            &FrechetConfig::default(),
        )
        .unwrap();
        for (a, b) in pose.coords().data().iter().zip(p.coords().data()) {
            assert!((a - b).abs() < 1e-9);
        }
        let want = proj_identity(2)
            .project(&ball, &Tensor::new(vec![0.3, -0.1], &[2]).unwrap())
            .unwrap();
        for (a, b) in text.coords().data().iter().zip(want.coords().data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pooled_symmetric_parts_meet_at_origin() {
        let ball = PoincareBall::new(1.0).unwrap();
        let r = 0.3;
        let parts: Vec<ManifoldPoint> = [[r, 0.0], [-r, 0.0], [0.0, r], [0.0, -r]]
            .iter()
            .map(|xy| ManifoldPoint::new(&ball, Tensor::new(xy.to_vec(), &[2]).unwrap()).unwrap())
            .collect();
        let tokens = tokens_1x(2, &[0.1, 0.1]);
        let mask = Tensor::new(vec![1.0], &[1]).unwrap();
        let (pose, _) = pooled_align(
            &ball,
            &parts,
            &tokens,
            &mask,
            &proj_identity(2),
            &FrechetConfig::default(),
        )
        .unwrap();
        for a in pose.coords().data() {
            assert!(a.abs() < 1e-6, "pose {:?}", pose.coords().to_vec());
        }
    }

    #[test]
    fn pooled_empty_mask_is_an_error() {
        let ball = PoincareBall::new(1.0).unwrap();
        let p = ManifoldPoint::new(&ball, Tensor::new(vec![0.2, 0.1], &[2]).unwrap()).unwrap();
        let res = pooled_align(
            &ball,
            &[p.clone(), p],
            &tokens_1x(2, &[0.3, -0.1]),
            &Tensor::new(vec![0.0], &[1]).unwrap(),
            &proj_identity(2),
            &FrechetConfig::default(),
        );
        assert!(matches!(res, Err(Error::FullyMaskedLane { .. })));
    }

    fn test_attention(d: usize) -> HyperbolicAttention {
        HyperbolicAttention {
            m_key: identity(d),
            b_key: Tensor::zeros(&[d]).unwrap(),
            log_tau_attn: Tensor::scalar(0.0),
        }
    }

    #[test]
    fn identical_keys_give_uniform_attention() {
        let ball = PoincareBall::new(1.0).unwrap();
        // Zero key matrix maps every value to b_key: all keys coincide, so
        // every unmasked token is equidistant from any query.
        let attn = HyperbolicAttention {
            m_key: Tensor::zeros(&[2, 2]).unwrap(),
            b_key: Tensor::new(vec![0.1, 0.0], &[2]).unwrap(),
            log_tau_attn: Tensor::scalar(0.0),
        };
        let parts = vec![
            ManifoldPoint::new(&ball, Tensor::new(vec![0.2, 0.1], &[2]).unwrap()).unwrap(),
        ];
        let tokens = tokens_1x(2, &[0.3, 0.0, -0.1, 0.2, 0.0, 0.4]);
        let mask = Tensor::new(vec![1.0, 1.0, 1.0], &[3]).unwrap();
        let out = token_align(
            &ball,
            &parts,
            &tokens,
            &mask,
            &proj_identity(2),
            &attn,
            &FrechetConfig::default(),
        )
        .unwrap();
        for w in out.weights.data() {
            assert!((w - 1.0 / 3.0).abs() < 1e-10, "weights {:?}", out.weights.to_vec());
        }
    }

    #[test]
    fn masked_tokens_get_zero_weight_and_do_not_affect_context() {
        let ball = PoincareBall::new(1.0).unwrap();
        let parts = vec![
            ManifoldPoint::new(&ball, Tensor::new(vec![0.2, 0.1], &[2]).unwrap()).unwrap(),
        ];
        let mask = Tensor::new(vec![1.0, 1.0, 0.0], &[3]).unwrap();
        let run = |third: [f64; 2]| {
            let tokens = tokens_1x(2, &[0.3, 0.0, -0.1, 0.2, third[0], third[1]]);
            token_align(
                &ball,
                &parts,
                &tokens,
                &mask,
                &proj_identity(2),
                &test_attention(2),
                &FrechetConfig::default(),
            )
            .unwrap()
        };
        let a = run([0.0, 0.4]);
        let b = run([-0.5, -0.2]);
        assert_eq!(a.weights.at(&[0, 2]), 0.0);
        let wsum: f64 = a.weights.data().iter().sum();
        assert!((wsum - 1.0).abs() < 1e-10);
        for (x, y) in a
            .contexts
            .coords()
            .data()
            .iter()
            .zip(b.contexts.coords().data())
        {
            assert_eq!(x, y, "masked token leaked into the context");
        }
    }

    #[test]
    fn sharp_temperature_selects_nearest_key_value() {
        let ball = PoincareBall::new(1.0).unwrap();
        let query = ManifoldPoint::new(&ball, Tensor::new(vec![0.25, 0.05], &[2]).unwrap()).unwrap();
        let attn = HyperbolicAttention {
            m_key: identity(2),
            b_key: Tensor::zeros(&[2]).unwrap(),
            log_tau_attn: Tensor::scalar(1e-4f64.ln()),
        };
        let tok = [0.3, 0.0, -0.1, 0.2, 0.0, 0.4];
        let tokens = tokens_1x(2, &tok);
        let mask = Tensor::new(vec![1.0, 1.0, 1.0], &[3]).unwrap();
        let proj = proj_identity(2);
        let out = token_align(
            &ball,
            std::slice::from_ref(&query),
            &tokens,
            &mask,
            &proj,
            &attn,
            &FrechetConfig::default(),
        )
        .unwrap();
        // Brute-force nearest key (keys = values here: identity map, zero bias).
        let values = proj.project(&ball, &tokens).unwrap();
        let mut best = (f64::INFINITY, 0);
        for t in 0..3 {
            let v = ManifoldPoint::new(
                &ball,
                values.coords().narrow(0, t, 1).unwrap().reshape(&[2]).unwrap(),
            )
            .unwrap();
            let d = ball.dist(&query, &v).unwrap().scalar_value().unwrap();
            if d < best.0 {
                best = (d, t);
            }
        }
        let chosen = ManifoldPoint::new(
            &ball,
            values
                .coords()
                .narrow(0, best.1, 1)
                .unwrap()
                .reshape(&[2])
                .unwrap(),
        )
        .unwrap();
        let ctx = ManifoldPoint::new(
            &ball,
            out.contexts.coords().reshape(&[2]).unwrap(),
        )
        .unwrap();
        let gap = ball.dist(&ctx, &chosen).unwrap().scalar_value().unwrap();
        assert!(gap < 1e-4, "context is {gap} from the nearest-key value");
        // And the context stays strictly inside the ball.
        let n = ctx.coords().data().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(n < 1.0);
    }

    fn head(tau: f64, margin: f64, smoothing: f64) -> ContrastiveHead {
        let p = (tau - 0.01) / 2.0;
        ContrastiveHead {
            log_tau: Tensor::scalar((p / (1.0 - p)).ln()),
            margin: Tensor::scalar(margin),
            label_smoothing: smoothing,
        }
    }

    #[test]
    fn single_pair_loss_is_exactly_zero_without_smoothing() {
        let ball = PoincareBall::new(1.0).unwrap();
        let p = ManifoldPoint::new(&ball, Tensor::new(vec![0.2, 0.1], &[1, 2]).unwrap()).unwrap();
        let t = ManifoldPoint::new(&ball, Tensor::new(vec![-0.1, 0.3], &[1, 2]).unwrap()).unwrap();
        let l = contrastive_loss(&p, &t, &head(1.0, 0.0, 0.0))
            .unwrap()
            .scalar_value()
            .unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn frozen_two_pair_value() {
        // Points along one geodesic through the origin at arc-length
        // positions p = [0, −1.5], t = [0.5, −2.0]: pairwise distances are
        // d(p_i, t_j) = |p_i − t_j| = [[0.5, 2.0], [2.0, 0.5]].
        let ball = PoincareBall::new(1.0).unwrap();
        let pose = ManifoldPoint::new(
            &ball,
            crate::tensor::concat(
                &[radial(&ball, 0.0).coords(), radial(&ball, -1.5).coords()],
                0,
            )
            .unwrap()
            .reshape(&[2, 2])
            .unwrap(),
        )
        .unwrap();
        let text = ManifoldPoint::new(
            &ball,
            crate::tensor::concat(
                &[radial(&ball, 0.5).coords(), radial(&ball, -2.0).coords()],
                0,
            )
            .unwrap()
            .reshape(&[2, 2])
            .unwrap(),
        )
        .unwrap();
        let l = contrastive_loss(&pose, &text, &head(1.0, 0.0, 0.0))
            .unwrap()
            .scalar_value()
            .unwrap();
        let want = (1.0 + (-1.5f64).exp()).ln(); // −log(e^{−0.5}/(e^{−0.5}+e^{−2}))
        assert!((l - want).abs() < 1e-4, "loss {l} vs {want} (≈0.20141)");
        assert!((l - 0.20141).abs() < 1e-4);
    }

    #[test]
    fn subtractive_margin_never_increases_the_loss() {
        // With the margin subtracted from off-diagonal logits, negatives
        // appear farther, so the unsmoothed loss is non-increasing in m.
        let ball = PoincareBall::new(1.0).unwrap();
        let pose = ManifoldPoint::new(
            &ball,
            Tensor::new(vec![0.2, 0.1, -0.3, 0.2], &[2, 2]).unwrap(),
        )
        .unwrap();
        let text = ManifoldPoint::new(
            &ball,
            Tensor::new(vec![0.1, 0.25, -0.1, -0.2], &[2, 2]).unwrap(),
        )
        .unwrap();
        let mut prev = f64::INFINITY;
        for m in [0.0, 0.1, 0.5, 1.0] {
            let l = contrastive_loss(&pose, &text, &head(1.0, m, 0.0))
                .unwrap()
                .scalar_value()
                .unwrap();
            assert!(l <= prev + 1e-12, "m={m}: {l} > {prev}");
            prev = l;
        }
    }

    #[test]
    fn perfect_alignment_loss_vanishes_with_separation() {
        let ball = PoincareBall::new(1.0).unwrap();
        let mut prev = f64::INFINITY;
        for sep in [2.0, 5.0, 10.0] {
            let a = radial(&ball, -sep / 2.0);
            let b = radial(&ball, sep / 2.0);
            let coords = crate::tensor::concat(&[a.coords(), b.coords()], 0)
                .unwrap()
                .reshape(&[2, 2])
                .unwrap();
            let pts = ManifoldPoint::new(&ball, coords).unwrap();
            let l = contrastive_loss(&pts, &pts.clone(), &head(1.0, 0.0, 0.0))
                .unwrap()
                .scalar_value()
                .unwrap();
            assert!(l < prev, "separation {sep}: {l} ≥ {prev}");
            prev = l;
        }
        assert!(prev < 1e-4, "loss at separation 10 still {prev}");
    }

    #[test]
    fn batch_permutation_permutes_row_losses() {
        let ball = PoincareBall::new(1.0).unwrap();
        let pose = ManifoldPoint::new(
            &ball,
            Tensor::new(vec![0.2, 0.1, -0.3, 0.2, 0.05, -0.15], &[3, 2]).unwrap(),
        )
        .unwrap();
        let text = ManifoldPoint::new(
            &ball,
            Tensor::new(vec![0.1, 0.25, -0.1, -0.2, 0.3, 0.0], &[3, 2]).unwrap(),
        )
        .unwrap();
        let h = head(0.7, 0.1, 0.2);
        let rows = contrastive_row_losses(&pose, &text, &h).unwrap().to_vec();
        let perm = [2usize, 0, 1];
        let pose_p =
            ManifoldPoint::new(&ball, pose.coords().index_select(0, &perm).unwrap()).unwrap();
        let text_p =
            ManifoldPoint::new(&ball, text.coords().index_select(0, &perm).unwrap()).unwrap();
        let rows_p = contrastive_row_losses(&pose_p, &text_p, &h).unwrap().to_vec();
        for (i, &src) in perm.iter().enumerate() {
            assert!(
                (rows_p[i] - rows[src]).abs() < 1e-12,
                "row {i}: {} vs {}",
                rows_p[i],
                rows[src]
            );
        }
    }

    #[test]
    fn parts_loss_averages_per_part_losses() {
        let ball = PoincareBall::new(1.0).unwrap();
        let parts = ManifoldPoint::new(
            &ball,
            Tensor::new(vec![0.2, 0.1, -0.3, 0.2, 0.1, 0.25, -0.1, -0.2], &[2, 2, 2]).unwrap(),
        )
        .unwrap();
        let ctx = ManifoldPoint::new(
            &ball,
            Tensor::new(vec![0.15, 0.12, -0.2, 0.1, 0.12, 0.2, -0.15, -0.1], &[2, 2, 2]).unwrap(),
        )
        .unwrap();
        let h = head(1.0, 0.0, 0.2);
        let total = contrastive_loss_parts(&parts, &ctx, &h)
            .unwrap()
            .scalar_value()
            .unwrap();
        let mut manual = 0.0;
        for p in 0..2 {
            let hp = ManifoldPoint::new(
                &ball,
                parts.coords().narrow(1, p, 1).unwrap().reshape(&[2, 2]).unwrap(),
            )
            .unwrap();
            let cp = ManifoldPoint::new(
                &ball,
                ctx.coords().narrow(1, p, 1).unwrap().reshape(&[2, 2]).unwrap(),
            )
            .unwrap();
            manual += contrastive_loss(&hp, &cp, &h).unwrap().scalar_value().unwrap();
        }
        assert!((total - manual / 2.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_uniform_logits_and_padding() {
        let logits = Tensor::zeros(&[3, 5]).unwrap();
        let l = cross_entropy_masked(&logits, &[1, 2, 0], Some(0), 0.0)
            .unwrap()
            .scalar_value()
            .unwrap();
        assert!((l - 5.0f64.ln()).abs() < 1e-12, "uniform CE {l}");
        assert!(matches!(
            cross_entropy_masked(&logits, &[0, 0, 0], Some(0), 0.0),
            Err(Error::Empty { .. })
        ));
    }

    #[test]
    fn cross_entropy_smoothing_blends_onehot_with_uniform() {
        // Distinct logits so the smoothed loss differs from the plain one.
        let logits =
            Tensor::new(vec![1.0, -0.5, 0.25, 2.0, 0.0, -1.0, 0.5, 1.5], &[2, 4]).unwrap();
        let s = 0.2;
        let smoothed = cross_entropy_masked(&logits, &[2, 1], None, s)
            .unwrap()
            .scalar_value()
            .unwrap();
        // Manual: −Σ_k q_k log p_k with q = (1−s)·onehot + s/K, averaged over rows.
        let mut manual = 0.0;
        for (row, &t) in [2usize, 1].iter().enumerate() {
            let x: Vec<f64> = (0..4).map(|j| logits.at(&[row, j])).collect();
            let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            for (j, &v) in x.iter().enumerate() {
                let q = s / 4.0 + if j == t { 1.0 - s } else { 0.0 };
                manual -= q * (v - lse);
            }
        }
        manual /= 2.0;
        assert!((smoothed - manual).abs() < 1e-12, "{smoothed} vs {manual}");
        // Gradient still flows through the smoothed objective.
        let tape = GradTape::new();
        let lg = tape
            .leaf(logits.data().to_vec(), &[2, 4], true)
            .unwrap();
        cross_entropy_masked(&lg, &[2, 1], None, s)
            .unwrap()
            .backward()
            .unwrap();
        let g = lg.grad().unwrap();
        assert!(g.iter().any(|v| v.abs() > 1e-6));
        // Rows of ∂CE/∂logits sum to zero (softmax minus target distribution).
        for row in 0..2 {
            let rs: f64 = (0..4).map(|j| g[row * 4 + j]).sum();
            assert!(rs.abs() < 1e-12, "row grad sum {rs}");
        }
    }

    #[test]
    fn alpha_schedule_frozen_value_and_clamps() {
        let sched = AlphaSchedule {
            alpha_init: 0.7,
            logit_alpha: Tensor::scalar(0.0),
            total_steps: 100,
        };
        let a = sched.alpha(0).unwrap().scalar_value().unwrap();
        assert!((a - 0.8).abs() < 1e-12, "alpha {a}");
        let low = AlphaSchedule {
            alpha_init: 0.0,
            logit_alpha: Tensor::scalar(-30.0),
            total_steps: 100,
        };
        assert!((low.alpha(0).unwrap().scalar_value().unwrap() - 0.1).abs() < 1e-12);
        let high = AlphaSchedule {
            alpha_init: 0.9,
            logit_alpha: Tensor::scalar(30.0),
            total_steps: 100,
        };
        assert!((high.alpha(100).unwrap().scalar_value().unwrap() - 1.0).abs() < 1e-12);
        assert!(high.alpha(101).is_err());
        let bad = AlphaSchedule {
            alpha_init: 0.7,
            logit_alpha: Tensor::scalar(0.0),
            total_steps: 0,
        };
        assert!(matches!(bad.alpha(0), Err(Error::Config(_))));
    }

    #[test]
    fn alpha_gradient_reaches_logit() {
        let tape = GradTape::new();
        let logit = tape.leaf(vec![0.3], &[], true).unwrap();
        let sched = AlphaSchedule {
            alpha_init: 0.7,
            logit_alpha: logit.clone(),
            total_steps: 10,
        };
        sched.alpha(5).unwrap().backward().unwrap();
        let g = logit.grad().unwrap()[0];
        assert!(g > 0.0, "expected positive dα/dlogit, got {g}");
    }

    #[test]
    fn total_loss_blend_and_gradient() {
        let tape = GradTape::new();
        let ce = tape.leaf(vec![2.0], &[], true).unwrap();
        let hyp = tape.leaf(vec![4.0], &[], true).unwrap();
        let a = Tensor::scalar(0.5);
        let l = total_loss(&ce, &hyp, &a).unwrap();
        assert!((l.scalar_value().unwrap() - 3.0).abs() < 1e-15);
        l.backward().unwrap();
        assert!((ce.grad().unwrap()[0] - 0.5).abs() < 1e-15);
        assert!((hyp.grad().unwrap()[0] - 0.5).abs() < 1e-15);
        let exact = total_loss(&Tensor::scalar(7.0), &Tensor::scalar(0.0), &Tensor::scalar(1.0))
            .unwrap();
        assert_eq!(exact.scalar_value().unwrap(), 7.0);
    }
}
