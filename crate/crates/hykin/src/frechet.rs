//! Weighted Fréchet (Karcher) mean and the weighted hyperbolic midpoint.
//!
//! The Fréchet mean of points `h_p` under weights `w_p` minimizes the
//! weighted sum of squared geodesic distances. It is computed by the fixed
//! iteration
//!
//! ```text
//! μ ← project(exp_μ(η · Σ_p w_p · log_μ(h_p)))
//! ```
//!
//! initialized at the first point, stopping when successive iterates are
//! closer than `tol` in geodesic distance or after `max_iter` steps.
//! Non-convergence is reported through a flag, never as an error.
//!
//! Everything is batched: the same kernel serves the per-part mean (one
//! weight row) and the attention midpoint (one weight row per query), and it
//! runs all lanes simultaneously until the slowest one converges. Gradients
//! flow by unrolling the iterations actually executed — weights, points, and
//! curvature all receive gradients through the tape.

use crate::error::{Error, Result};
use crate::manifold::{scalar_dist, ManifoldPoint, PoincareBall, TangentVector};
use crate::tensor::{stack, Tensor};

/// Iteration controls for the Fréchet mean.
#[derive(Clone, Debug)]
pub struct FrechetConfig {
    /// Maximum update steps (≥ 1).
    pub max_iter: usize,
    /// Convergence threshold on the geodesic distance between successive
    /// iterates (> 0).
    pub tol: f64,
    /// Step size η applied to the aggregated tangent, in (0, 2].
    pub step: f64,
    /// Temperature λ_w of the radius softmax in [`part_weights`].
    pub weight_temperature: f64,
    /// Replace the iteration by a single tangent-at-origin step
    /// `expmap0(Σ w_p·logmap0(h_p))` — a fast approximation, off by default.
    pub one_step_origin: bool,
}

impl Default for FrechetConfig {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol: 1e-5,
            step: 1.0,
            weight_temperature: 1.0,
            one_step_origin: false,
        }
    }
}

impl FrechetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(Error::Config("frechet: max_iter must be ≥ 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!(
                "frechet: tol must be > 0, got {}",
                self.tol
            )));
        }
        if !(self.step > 0.0 && self.step <= 2.0) {
            return Err(Error::Config(format!(
                "frechet: step must lie in (0, 2], got {}",
                self.step
            )));
        }
        if !(self.weight_temperature > 0.0) {
            return Err(Error::Config(format!(
                "frechet: weight_temperature must be > 0, got {}",
                self.weight_temperature
            )));
        }
        Ok(())
    }
}

/// Normalized per-part weights, shaped `(..., P)` with each row summing to 1.
#[derive(Clone)]
pub struct PartWeights {
    w: Tensor,
}

impl PartWeights {
    /// Wrap a weight tensor, enforcing nonnegativity and row sums of 1
    /// (within 1e−10).
    pub fn from_tensor(w: Tensor) -> Result<Self> {
        validate_weight_rows(&w, "part_weights", 1e-10)?;
        Ok(Self { w })
    }

    /// Uniform weights over `p` parts.
    pub fn uniform(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::Empty { op: "part_weights" });
        }
        Self::from_tensor(Tensor::full(&[p], 1.0 / p as f64)?)
    }

    pub fn weights(&self) -> &Tensor {
        &self.w
    }
}

fn validate_weight_rows(w: &Tensor, op: &'static str, tol: f64) -> Result<()> {
    if w.rank() == 0 {
        return Err(Error::InvalidShape {
            op,
            shape: vec![],
            msg: "weights need at least one axis".into(),
        });
    }
    let p = *w.shape().last().expect("rank checked");
    if p == 0 {
        return Err(Error::Empty { op });
    }
    for row in w.data().chunks(p) {
        let mut sum = 0.0;
        for &x in row {
            if !(x >= 0.0) {
                return Err(Error::Domain { op, value: x });
            }
            sum += x;
        }
        if (sum - 1.0).abs() > tol {
            return Err(Error::Domain { op, value: sum });
        }
    }
    Ok(())
}

/// Radius-based part weights: `w_p = softmax_p(dist(0, h_p)/λ_w)`, so parts
/// farther from the origin — carrying more signal — weigh more. Points share
/// a leading batch shape; the result is `(..., P)` and differentiable.
pub fn part_weights(
    ball: &PoincareBall,
    points: &[ManifoldPoint],
    cfg: &FrechetConfig,
) -> Result<PartWeights> {
    cfg.validate()?;
    if points.is_empty() {
        return Err(Error::Empty { op: "part_weights" });
    }
    let mut radii = Vec::with_capacity(points.len());
    for p in points {
        radii.push(ball.dist0(p)?);
    }
    let refs: Vec<&Tensor> = radii.iter().collect();
    let stacked = stack(&refs, radii[0].rank())?; // (..., P)
    let scaled = stacked.affine(1.0 / cfg.weight_temperature, 0.0)?;
    let w = scaled.softmax(scaled.rank() - 1, None)?;
    Ok(PartWeights { w })
}

/// Output of the mean iteration.
pub struct FrechetResult {
    /// Final iterate, on the input ball.
    pub mean: ManifoldPoint,
    /// Update steps executed.
    pub iterations: usize,
    /// Whether every batch lane moved less than `tol` in the last step.
    pub converged: bool,
}

/// Weighted Fréchet mean of `points` (each shaped `(..., d)`, identical
/// shapes) under `weights` shaped `(..., P)`. Initialized at the first point.
pub fn frechet_mean(
    points: &[ManifoldPoint],
    weights: &PartWeights,
    cfg: &FrechetConfig,
) -> Result<FrechetResult> {
    frechet_mean_with_init(None, points, weights, cfg)
}

/// [`frechet_mean`] from an explicit starting iterate (used e.g. to verify
/// multi-start agreement). `None` starts at the first point.
pub fn frechet_mean_with_init(
    init: Option<&ManifoldPoint>,
    points: &[ManifoldPoint],
    weights: &PartWeights,
    cfg: &FrechetConfig,
) -> Result<FrechetResult> {
    cfg.validate()?;
    if points.is_empty() {
        return Err(Error::Empty { op: "frechet_mean" });
    }
    let ball = points[0].ball().clone();
    let shape = points[0].coords().shape().to_vec();
    for p in points {
        if p.coords().shape() != shape {
            return Err(Error::ShapeMismatch {
                op: "frechet_mean",
                lhs: shape,
                rhs: p.coords().shape().to_vec(),
            });
        }
    }
    validate_weight_rows(&weights.w, "frechet_mean", 1e-8)?;
    let rank = points[0].coords().rank();
    let lead = &shape[..rank - 1];
    let p = points.len();
    let mut wshape = lead.to_vec();
    wshape.push(p);
    if weights.w.shape() != wshape {
        return Err(Error::ShapeMismatch {
            op: "frechet_mean",
            lhs: wshape,
            rhs: weights.w.shape().to_vec(),
        });
    }
    // Stack to (..., P, d) values with a single query row (..., 1, P).
    let coord_refs: Vec<&Tensor> = points.iter().map(|pt| pt.coords()).collect();
    let values = stack(&coord_refs, rank - 1)?;
    let w = weights.w.unsqueeze(rank - 1)?;
    let init = match init {
        Some(m) => {
            ball.compatible(m.ball(), "frechet_mean")?;
            m.coords().unsqueeze(rank - 1)?
        }
        None => points[0].coords().unsqueeze(rank - 1)?,
    };
    let (mu, iterations, converged) = karcher(&ball, &values, &w, &init, cfg)?;
    let mean = ManifoldPoint::new_unchecked(&ball, mu.squeeze(rank - 1)?);
    Ok(FrechetResult {
        mean,
        iterations,
        converged,
    })
}

/// Weighted hyperbolic midpoint: the Fréchet mean of `values` under each
/// weight row. `values` is shaped `(..., T, d)`, `weights` `(..., Q, T)` with
/// rows summing to 1; the result holds one mean per query row, `(..., Q, d)`.
/// This is the aggregation step of hyperbolic attention.
pub fn weighted_midpoint(
    values: &ManifoldPoint,
    weights: &Tensor,
    cfg: &FrechetConfig,
) -> Result<FrechetResult> {
    cfg.validate()?;
    let ball = values.ball().clone();
    let vshape = values.coords().shape();
    if values.coords().rank() < 2 {
        return Err(Error::InvalidShape {
            op: "weighted_midpoint",
            shape: vshape.to_vec(),
            msg: "values must be (..., T, d)".into(),
        });
    }
    let rank = values.coords().rank();
    let t = vshape[rank - 2];
    let lead = &vshape[..rank - 2];
    validate_weight_rows(weights, "weighted_midpoint", 1e-8)?;
    if weights.rank() != rank
        || *weights.shape().last().expect("validated") != t
        || &weights.shape()[..rank - 2] != lead
    {
        return Err(Error::ShapeMismatch {
            op: "weighted_midpoint",
            lhs: vshape.to_vec(),
            rhs: weights.shape().to_vec(),
        });
    }
    let q = weights.shape()[rank - 2];
    // Initialize every query at the first value point.
    let d = vshape[rank - 1];
    let mut init_shape = lead.to_vec();
    init_shape.extend_from_slice(&[q, d]);
    let init = values
        .coords()
        .narrow(rank - 2, 0, 1)?
        .broadcast_to(&init_shape)?;
    let (mu, iterations, converged) = karcher(&ball, values.coords(), weights, &init, cfg)?;
    Ok(FrechetResult {
        mean: ManifoldPoint::new_unchecked(&ball, mu),
        iterations,
        converged,
    })
}

/// Batched mean iteration. `values (..., T, d)`, `weights (..., Q, T)`,
/// `init (..., Q, d)`; returns the final iterate `(..., Q, d)` with the
/// iteration count and an all-lanes-converged flag.
fn karcher(
    ball: &PoincareBall,
    values: &Tensor,
    weights: &Tensor,
    init: &Tensor,
    cfg: &FrechetConfig,
) -> Result<(Tensor, usize, bool)> {
    let rank = values.rank();
    let d = values.shape()[rank - 1];
    let mut pair_shape = weights.shape().to_vec(); // (..., Q, T)
    pair_shape.push(d); // (..., Q, T, d)
    let we = weights.unsqueeze(rank)?; // (..., Q, T, 1)

    if cfg.one_step_origin {
        // Single aggregated step from the origin: tangent-average under the
        // weight rows, mapped back. Cheap stand-in for the full iteration.
        let t0 = ball.logmap0_raw(values)?; // (..., T, d)
        let te = t0.unsqueeze(rank - 2)?.broadcast_to(&pair_shape)?;
        let agg = te.mul(&we)?.sum(Some(rank - 1), false)?; // (..., Q, d)
        let mean = ball.expmap0(&TangentVector::at_origin(agg))?;
        return Ok((mean.coords().clone(), 1, true));
    }

    let ve = values.unsqueeze(rank - 2)?.broadcast_to(&pair_shape)?;
    let ve_pt = ManifoldPoint::new_unchecked(ball, ve);
    let mut mu = init.clone();
    let c = ball.c();
    let lanes = init.numel() / d;
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        iterations += 1;
        let mu_e = mu.unsqueeze(rank - 1)?.broadcast_to(&pair_shape)?;
        let mu_e_pt = ManifoldPoint::new_unchecked(ball, mu_e);
        let v = ball.logmap(&mu_e_pt, &ve_pt)?; // (..., Q, T, d)
        let mut agg = v.coords().mul(&we)?.sum(Some(rank - 1), false)?; // (..., Q, d)
        if cfg.step != 1.0 {
            agg = agg.affine(cfg.step, 0.0)?;
        }
        let mu_pt = ManifoldPoint::new_unchecked(ball, mu.clone());
        let next = ball
            .expmap(&mu_pt, &TangentVector::at_point(&mu_pt, agg))?
            .coords()
            .clone();
        // Convergence on detached values: max lane movement under tol.
        let (prev_d, next_d) = (mu.data(), next.data());
        let mut max_move = 0.0f64;
        for l in 0..lanes {
            let m = scalar_dist(&prev_d[l * d..(l + 1) * d], &next_d[l * d..(l + 1) * d], c);
            if m > max_move {
                max_move = m;
            }
        }
        mu = next;
        if max_move < cfg.tol {
            converged = true;
            break;
        }
    }
    Ok((mu, iterations, converged))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{finite_difference_grad, GradTape};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn point(ball: &PoincareBall, xs: &[f64]) -> ManifoldPoint {
        ManifoldPoint::new(ball, Tensor::new(xs.to_vec(), &[xs.len()]).unwrap()).unwrap()
    }

    fn objective(ball: &PoincareBall, mu: &ManifoldPoint, pts: &[ManifoldPoint], w: &[f64]) -> f64 {
        pts.iter()
            .zip(w)
            .map(|(p, wi)| {
                let d = ball.dist(mu, p).unwrap().scalar_value().unwrap();
                wi * d * d
            })
            .sum()
    }

    #[test]
    fn part_weights_frozen_radii_example() {
        // radii {0, 2·artanh(0.5) = 1.0986…} at λ_w = 1 → softmax [0.25, 0.75].
        let ball = PoincareBall::new(1.0).unwrap();
        let pts = [point(&ball, &[0.0, 0.0]), point(&ball, &[0.5, 0.0])];
        let w = part_weights(&ball, &pts, &FrechetConfig::default()).unwrap();
        let data = w.weights().to_vec();
        assert!((data[0] - 0.25).abs() < 1e-3, "got {data:?}");
        assert!((data[1] - 0.75).abs() < 1e-3, "got {data:?}");
        assert!((data.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn part_weights_uniform_at_equal_radius_and_monotone() {
        let ball = PoincareBall::new(1.0).unwrap();
        let pts = [point(&ball, &[0.3, 0.0]), point(&ball, &[0.0, -0.3])];
        let w = part_weights(&ball, &pts, &FrechetConfig::default()).unwrap();
        let data = w.weights().to_vec();
        assert!((data[0] - 0.5).abs() < 1e-10);
        let pts2 = [point(&ball, &[0.0, 0.0]), point(&ball, &[0.4, 0.0])];
        let w2 = part_weights(&ball, &pts2, &FrechetConfig::default()).unwrap();
        let d2 = w2.weights().to_vec();
        assert!(d2[1] > d2[0], "farther point must weigh more: {d2:?}");
    }

    #[test]
    fn single_point_is_a_fixed_point() {
        let ball = PoincareBall::new(1.0).unwrap();
        let p = point(&ball, &[0.3, -0.2]);
        let res = frechet_mean(
            &[p.clone()],
            &PartWeights::uniform(1).unwrap(),
            &FrechetConfig::default(),
        )
        .unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 1);
        for (a, b) in res.mean.coords().data().iter().zip(p.coords().data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_pair_meets_at_origin() {
        let ball = PoincareBall::new(1.0).unwrap();
        let pts = [point(&ball, &[0.5, 0.0]), point(&ball, &[-0.5, 0.0])];
        let res = frechet_mean(
            &pts,
            &PartWeights::uniform(2).unwrap(),
            &FrechetConfig::default(),
        )
        .unwrap();
        assert!(res.converged);
        for a in res.mean.coords().data() {
            assert!(a.abs() < 1e-6, "mean {:?}", res.mean.coords().to_vec());
        }
    }

    #[test]
    fn equal_weight_midpoint_is_equidistant() {
        let ball = PoincareBall::new(1.0).unwrap();
        let a = [0.4, 0.1];
        let b = [-0.2, 0.3];
        let values = ManifoldPoint::new(
            &ball,
            Tensor::new(vec![a[0], a[1], b[0], b[1]], &[2, 2]).unwrap(),
        )
        .unwrap();
        let w = Tensor::new(vec![0.5, 0.5], &[1, 2]).unwrap();
        let res = weighted_midpoint(&values, &w, &FrechetConfig::default()).unwrap();
        assert!(res.converged);
        let m = ManifoldPoint::new(&ball, res.mean.coords().reshape(&[2]).unwrap()).unwrap();
        let da = ball.dist(&m, &point(&ball, &a)).unwrap().scalar_value().unwrap();
        let db = ball.dist(&m, &point(&ball, &b)).unwrap().scalar_value().unwrap();
        assert!((da - db).abs() < 1e-6, "da={da} db={db}");
    }

    #[test]
    fn one_hot_weights_select_the_value() {
        let ball = PoincareBall::new(1.0).unwrap();
        let values = ManifoldPoint::new(
            &ball,
            Tensor::new(vec![0.1, 0.2, -0.3, 0.05, 0.0, 0.4], &[3, 2]).unwrap(),
        )
        .unwrap();
        let w = Tensor::new(vec![0.0, 1.0, 0.0], &[1, 3]).unwrap();
        let res = weighted_midpoint(&values, &w, &FrechetConfig::default()).unwrap();
        let m = res.mean.coords().to_vec();
        assert!((m[0] - (-0.3)).abs() < 1e-6 && (m[1] - 0.05).abs() < 1e-6, "{m:?}");
    }

    #[test]
    fn identical_values_are_fixed_regardless_of_weights() {
        let ball = PoincareBall::new(1.0).unwrap();
        let values = ManifoldPoint::new(
            &ball,
            Tensor::new(vec![0.2, -0.1, 0.2, -0.1, 0.2, -0.1], &[3, 2]).unwrap(),
        )
        .unwrap();
        let w = Tensor::new(vec![0.6, 0.3, 0.1], &[1, 3]).unwrap();
        let res = weighted_midpoint(&values, &w, &FrechetConfig::default()).unwrap();
        let m = res.mean.coords().to_vec();
        assert!((m[0] - 0.2).abs() < 1e-9 && (m[1] + 0.1).abs() < 1e-9, "{m:?}");
    }

    #[test]
    fn euclidean_limit_matches_weighted_average() {
        let ball = PoincareBall::new(1e-3).unwrap();
        let pts = [
            point(&ball, &[0.08, -0.02]),
            point(&ball, &[-0.05, 0.06]),
            point(&ball, &[0.01, 0.09]),
        ];
        let w = [0.5, 0.3, 0.2];
        let weights =
            PartWeights::from_tensor(Tensor::new(w.to_vec(), &[3]).unwrap()).unwrap();
        let res = frechet_mean(&pts, &weights, &FrechetConfig::default()).unwrap();
        assert!(res.converged);
        for i in 0..2 {
            let want: f64 = pts
                .iter()
                .zip(&w)
                .map(|(p, wi)| wi * p.coords().data()[i])
                .sum();
            let got = res.mean.coords().data()[i];
            assert!((got - want).abs() < 1e-3, "coord {i}: {got} vs {want}");
        }
    }

    #[test]
    fn objective_is_monotone_over_iterations() {
        let ball = PoincareBall::new(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let pts: Vec<ManifoldPoint> = (0..3)
                .map(|_| {
                    point(
                        &ball,
                        &[rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6)],
                    )
                })
                .collect();
            let raw: Vec<f64> = (0..3).map(|_| rng.gen_range(0.1..1.0)).collect();
            let sum: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|x| x / sum).collect();
            let weights =
                PartWeights::from_tensor(Tensor::new(w.clone(), &[3]).unwrap()).unwrap();
            let mut prev = f64::INFINITY;
            for k in 1..=10 {
                let cfg = FrechetConfig {
                    max_iter: k,
                    tol: 1e-300,
                    ..FrechetConfig::default()
                };
                let res = frechet_mean(&pts, &weights, &cfg).unwrap();
                let f = objective(&ball, &res.mean, &pts, &w);
                assert!(f <= prev + 1e-12, "iteration {k}: {f} > {prev}");
                prev = f;
            }
        }
    }

    #[test]
    fn gradient_through_unrolled_iterations_matches_finite_differences() {
        let ball_c = 1.0;
        let target = [0.1, -0.2];
        let p2 = [0.35, 0.2];
        let p3 = [-0.3, 0.25];
        let w = [0.5, 0.25, 0.25];
        let run = |x0: &[f64]| -> Result<f64> {
            let ball = PoincareBall::new(ball_c)?;
            let pts = [
                ManifoldPoint::new(&ball, Tensor::new(x0.to_vec(), &[2])?)?,
                ManifoldPoint::new(&ball, Tensor::new(p2.to_vec(), &[2])?)?,
                ManifoldPoint::new(&ball, Tensor::new(p3.to_vec(), &[2])?)?,
            ];
            let weights = PartWeights::from_tensor(Tensor::new(w.to_vec(), &[3])?)?;
            let cfg = FrechetConfig {
                max_iter: 5,
                tol: 1e-300,
                ..FrechetConfig::default()
            };
            let res = frechet_mean(&pts, &weights, &cfg)?;
            let tgt = ManifoldPoint::new(&ball, Tensor::new(target.to_vec(), &[2])?)?;
            ball.dist(&res.mean, &tgt)?.scalar_value()
        };
        let x0 = vec![0.25, -0.15];
        let fd = finite_difference_grad(&mut |x| run(x), &x0, 1e-6).unwrap();

        let ball = PoincareBall::new(ball_c).unwrap();
        let tape = GradTape::new();
        let leaf = tape.leaf(x0.clone(), &[2], true).unwrap();
        let pts = [
            ManifoldPoint::new(&ball, leaf.clone()).unwrap(),
            point(&ball, &p2),
            point(&ball, &p3),
        ];
        let weights = PartWeights::from_tensor(Tensor::new(w.to_vec(), &[3]).unwrap()).unwrap();
        let cfg = FrechetConfig {
            max_iter: 5,
            tol: 1e-300,
            ..FrechetConfig::default()
        };
        let res = frechet_mean(&pts, &weights, &cfg).unwrap();
        let tgt = point(&ball, &target);
        ball.dist(&res.mean, &tgt)
            .unwrap()
            .backward()
            .unwrap();
        let grad = leaf.grad().unwrap();
        for (g, f) in grad.iter().zip(&fd) {
            let rel = (g - f).abs() / f.abs().max(1e-9);
            assert!(rel < 1e-4, "unrolled grad {g} vs fd {f} (rel {rel})");
        }
    }

    #[test]
    fn batched_lanes_match_individual_runs() {
        let ball = PoincareBall::new(1.0).unwrap();
        // Two independent instances side by side in a leading batch axis.
        let a = [[0.4, 0.1], [-0.2, 0.3]];
        let b = [[0.0, -0.5], [0.1, 0.1]];
        let batched: Vec<ManifoldPoint> = (0..2)
            .map(|p| {
                let src = if p == 0 { &a } else { &b };
                ManifoldPoint::new(
                    &ball,
                    Tensor::new(vec![src[0][0], src[0][1], src[1][0], src[1][1]], &[2, 2])
                        .unwrap(),
                )
                .unwrap()
            })
            .collect();
        let w = PartWeights::from_tensor(
            Tensor::new(vec![0.7, 0.3, 0.7, 0.3], &[2, 2]).unwrap(),
        )
        .unwrap();
        let res = frechet_mean(&batched, &w, &FrechetConfig::default()).unwrap();
        for lane in 0..2 {
            let pts = [
                point(&ball, &a[lane]),
                point(&ball, &b[lane]),
            ];
            let wl =
                PartWeights::from_tensor(Tensor::new(vec![0.7, 0.3], &[2]).unwrap()).unwrap();
            let single = frechet_mean(&pts, &wl, &FrechetConfig::default()).unwrap();
            for i in 0..2 {
                let got = res.mean.coords().at(&[lane, i]);
                let want = single.mean.coords().data()[i];
                assert!((got - want).abs() < 2e-5, "lane {lane} coord {i}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn one_step_origin_matches_tangent_average() {
        let ball = PoincareBall::new(1.0).unwrap();
        let pts = [point(&ball, &[0.3, 0.0]), point(&ball, &[0.0, 0.4])];
        let weights = PartWeights::uniform(2).unwrap();
        let cfg = FrechetConfig {
            one_step_origin: true,
            ..FrechetConfig::default()
        };
        let res = frechet_mean(&pts, &weights, &cfg).unwrap();
        assert_eq!(res.iterations, 1);
        let expect = {
            let t: Vec<f64> = {
                let t0 = ball.logmap0(&pts[0]).unwrap();
                let t1 = ball.logmap0(&pts[1]).unwrap();
                t0.coords()
                    .data()
                    .iter()
                    .zip(t1.coords().data())
                    .map(|(x, y)| 0.5 * (x + y))
                    .collect()
            };
            ball.expmap0(&TangentVector::at_origin(Tensor::new(t, &[2]).unwrap()))
                .unwrap()
        };
        for (a, b) in res.mean.coords().data().iter().zip(expect.coords().data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let ball = PoincareBall::new(1.0).unwrap();
        let empty: [ManifoldPoint; 0] = [];
        assert!(matches!(
            frechet_mean(
                &empty,
                &PartWeights::uniform(1).unwrap(),
                &FrechetConfig::default()
            ),
            Err(Error::Empty { .. })
        ));
        assert!(PartWeights::from_tensor(Tensor::new(vec![0.8, 0.8], &[2]).unwrap()).is_err());
        assert!(PartWeights::from_tensor(Tensor::new(vec![-0.2, 1.2], &[2]).unwrap()).is_err());
        let bad_cfg = FrechetConfig {
            step: 2.5,
            ..FrechetConfig::default()
        };
        let p = point(&ball, &[0.1, 0.1]);
        assert!(matches!(
            frechet_mean(&[p], &PartWeights::uniform(1).unwrap(), &bad_cfg),
            Err(Error::Config(_))
        ));
    }
}
