//! Analytic-versus-numeric gradient audit across the geometry and loss stack.
//!
//! Every differentiable operation exposed by [`crate::manifold`],
//! [`crate::frechet`] and [`crate::layers`] registers a named check here.
//! A check draws small random inputs, traces a scalar through the operation
//! on a fresh tape, and compares each input's reverse-mode gradient against
//! central finite differences; it reports the worst relative error seen.
//! The registry doubles as the coverage contract: a new differentiable op is
//! not done until it has (or extends) a check.
//!
//! Iterative ops (Fréchet means, midpoints, and the alignment layers built
//! on them) run under a pinned iteration count with an unreachable
//! convergence tolerance, because an early-exit test that flips under an
//! input perturbation would poison the finite-difference oracle.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::PAD;
use crate::error::Result;
use crate::frechet::{
    frechet_mean, part_weights, weighted_midpoint, FrechetConfig, PartWeights,
};
use crate::layers::{
    contrastive_loss, contrastive_loss_parts, cross_entropy_masked, log_softmax_last,
    pooled_align, token_align, total_loss, AlphaSchedule, ContrastiveHead, HyperbolicAttention,
    HyperbolicProjection,
};
use crate::manifold::{ManifoldPoint, PoincareBall, TangentVector};
use crate::tensor::{finite_difference_grad, GradTape, Tensor};

/// Central-difference step. Balances truncation against round-off for
/// values of order one.
const H: f64 = 1e-5;

/// Tolerance for general ops.
const TOL_OP: f64 = 1e-4;

/// Tolerance for the geodesic distance gradient, which both the contrastive
/// losses and Riemannian optimization lean on.
const TOL_DIST: f64 = 1e-5;

/// One registered check.
pub struct OpCheck {
    pub name: &'static str,
    /// Largest admissible worst-case relative error.
    pub threshold: f64,
    run: Box<dyn Fn(&mut ChaCha8Rng) -> Result<f64>>,
}

/// Outcome of one check.
pub struct CheckResult {
    pub name: &'static str,
    pub threshold: f64,
    /// Worst relative error across all inputs and trials.
    pub worst: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.worst < self.threshold
    }
}

/// Results for a whole registry run.
pub struct CheckReport {
    pub results: Vec<CheckResult>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(CheckResult::passed)
    }

    /// One line per op plus a summary line, ready for the terminal.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.results {
            writeln!(
                out,
                "{:<24} worst {:>9.2e}  limit {:>7.0e}  {}",
                r.name,
                r.worst,
                r.threshold,
                if r.passed() { "ok" } else { "FAIL" }
            )
            .expect("string write");
        }
        let ok = self.results.iter().filter(|r| r.passed()).count();
        writeln!(
            out,
            "gradient audit: {ok}/{} ops within tolerance",
            self.results.len()
        )
        .expect("string write");
        out
    }
}

/// Run every registered check with a seeded RNG.
pub fn check_grads(seed: u64) -> Result<CheckReport> {
    run_checks(&registry(), seed)
}

/// Run an explicit list of checks (the registry, or fixtures in tests).
pub fn run_checks(checks: &[OpCheck], seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::with_capacity(checks.len());
    for c in checks {
        results.push(CheckResult {
            name: c.name,
            threshold: c.threshold,
            worst: (c.run)(&mut rng)?,
        });
    }
    Ok(CheckReport { results })
}

// ===== comparison machinery =====

/// Trace one scalar computation from leaf tensors, then compare every leaf's
/// reverse-mode gradient against central differences of the same trace over
/// plain tensors. Returns the worst relative error across inputs.
fn compare(
    inputs: &[(Vec<f64>, Vec<usize>)],
    trace: &dyn Fn(&[Tensor]) -> Result<Tensor>,
) -> Result<f64> {
    let tape = GradTape::new();
    let leaves: Vec<Tensor> = inputs
        .iter()
        .map(|(data, shape)| tape.leaf(data.clone(), shape, true))
        .collect::<Result<_>>()?;
    trace(&leaves)?.backward()?;

    let mut worst = 0.0f64;
    for (i, leaf) in leaves.iter().enumerate() {
        let analytic = leaf
            .grad()
            .unwrap_or_else(|| vec![0.0; inputs[i].0.len()]);
        let mut f = |x: &[f64]| -> Result<f64> {
            let plain: Vec<Tensor> = inputs
                .iter()
                .enumerate()
                .map(|(j, (data, shape))| {
                    Tensor::new(if j == i { x.to_vec() } else { data.clone() }, shape)
                })
                .collect::<Result<_>>()?;
            trace(&plain)?.scalar_value()
        };
        let numeric = finite_difference_grad(&mut f, &inputs[i].0, H)?;
        worst = worst.max(rel_error(&analytic, &numeric));
    }
    Ok(worst)
}

/// Vector-level relative error `‖a−b‖ / max(‖a‖, ‖b‖)`, floored so two
/// all-zero gradients compare as exactly equal.
fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let l2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    diff / l2(a).max(l2(b)).max(1e-8)
}

/// Fixed-iteration Fréchet setup; see the module docs for why early exit is
/// disabled under finite differencing.
fn pinned_frechet() -> FrechetConfig {
    FrechetConfig {
        max_iter: 8,
        tol: 1e-300,
        step: 1.0,
        weight_temperature: 1.0,
        one_step_origin: false,
    }
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * scale
        })
        .collect()
}

/// Random ball points, one `d`-row at a time, with norms in a mid-ball band:
/// away from the origin (where the norm has a kink) and from the boundary
/// clamp.
fn point_rows(rng: &mut ChaCha8Rng, ball: &PoincareBall, rows: usize, d: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * d);
    for _ in 0..rows {
        let dir = normal_vec(rng, d, 1.0);
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        let radius = ball.max_norm() * rng.gen_range(0.15..0.75);
        out.extend(dir.iter().map(|x| x / norm * radius));
    }
    out
}

/// Reduce an arbitrary-shape output to a scalar through a fixed random
/// functional, so every output component influences the gradient.
fn weighted_sum(t: &Tensor, r: &[f64]) -> Result<Tensor> {
    let n = t.numel();
    t.mul(&Tensor::new(r[..n].to_vec(), t.shape())?)?.sum_all()
}

fn check(
    name: &'static str,
    threshold: f64,
    run: impl Fn(&mut ChaCha8Rng) -> Result<f64> + 'static,
) -> OpCheck {
    OpCheck {
        name,
        threshold,
        run: Box::new(run),
    }
}

// ===== the registry =====

/// Every registered differentiable op, in audit order.
pub fn registry() -> Vec<OpCheck> {
    vec![
        check("mobius_add", TOL_OP, |rng| {
            let mut worst = 0.0f64;
            for &c in &[0.5, 1.5] {
                let ball = PoincareBall::new(c)?;
                for _ in 0..4 {
                    let (rows, d) = (2, 3);
                    let u = point_rows(rng, &ball, rows, d);
                    let v = point_rows(rng, &ball, rows, d);
                    let r = normal_vec(rng, rows * d, 1.0);
                    let b = ball.clone();
                    worst = worst.max(compare(
                        &[(u, vec![rows, d]), (v, vec![rows, d])],
                        &move |xs| {
                            let pu = ManifoldPoint::new(&b, xs[0].clone())?;
                            let pv = ManifoldPoint::new(&b, xs[1].clone())?;
                            weighted_sum(b.mobius_add(&pu, &pv)?.coords(), &r)
                        },
                    )?);
                }
            }
            Ok(worst)
        }),
        check("mobius_matvec", TOL_OP, |rng| {
            let mut worst = 0.0f64;
            let ball = PoincareBall::new(1.0)?;
            for _ in 0..4 {
                let d = 3;
                let m = normal_vec(rng, d * d, 0.5);
                let x = point_rows(rng, &ball, 2, d);
                let r = normal_vec(rng, 2 * d, 1.0);
                let b = ball.clone();
                worst = worst.max(compare(
                    &[(m, vec![d, d]), (x, vec![2, d])],
                    &move |xs| {
                        let px = ManifoldPoint::new(&b, xs[1].clone())?;
                        weighted_sum(b.mobius_matvec(&xs[0], &px)?.coords(), &r)
                    },
                )?);
            }
            Ok(worst)
        }),
        check("expmap0", TOL_OP, |rng| {
            let mut worst = 0.0f64;
            for &c in &[0.5, 1.5] {
                let ball = PoincareBall::new(c)?;
                for _ in 0..4 {
                    let v = normal_vec(rng, 6, 0.1);
                    let r = normal_vec(rng, 6, 1.0);
                    let b = ball.clone();
                    worst = worst.max(compare(&[(v, vec![2, 3])], &move |xs| {
                        let tv = TangentVector::at_origin(xs[0].clone());
                        weighted_sum(b.expmap0(&tv)?.coords(), &r)
                    })?);
                }
            }
            Ok(worst)
        }),
        check("logmap0", TOL_OP, |rng| {
            let mut worst = 0.0f64;
            for &c in &[0.5, 1.5] {
                let ball = PoincareBall::new(c)?;
                for _ in 0..4 {
                    let y = point_rows(rng, &ball, 2, 3);
                    let r = normal_vec(rng, 6, 1.0);
                    let b = ball.clone();
                    worst = worst.max(compare(&[(y, vec![2, 3])], &move |xs| {
                        let py = ManifoldPoint::new(&b, xs[0].clone())?;
                        weighted_sum(b.logmap0(&py)?.coords(), &r)
                    })?);
                }
            }
            Ok(worst)
        }),
        check("expmap", TOL_OP, |rng| {
            let mut worst = 0.0f64;
            let ball = PoincareBall::new(1.0)?;
            for _ in 0..4 {
                let x = point_rows(rng, &ball, 2, 3);
                let v = normal_vec(rng, 6, 0.1);
                let r = normal_vec(rng, 6, 1.0);
                let b = ball.clone();
                worst = worst.max(compare(
                    &[(x, vec![2, 3]), (v, vec![2, 3])],
                    &move |xs| {
                        let px = ManifoldPoint::new(&b, xs[0].clone())?;
                        let tv = TangentVector::at_point(&px, xs[1].clone());
                        weighted_sum(b.expmap(&px, &tv)?.coords(), &r)
                    },
                )?);
            }
            Ok(worst)
        }),
        check("logmap", TOL_OP, |rng| {
            let mut worst = 0.0f64;
            let ball = PoincareBall::new(1.0)?;
            for _ in 0..4 {
                let x = point_rows(rng, &ball, 2, 3);
                let y = point_rows(rng, &ball, 2, 3);
                let r = normal_vec(rng, 6, 1.0);
                let b = ball.clone();
                worst = worst.max(compare(
                    &[(x, vec![2, 3]), (y, vec![2, 3])],
                    &move |xs| {
                        let px = ManifoldPoint::new(&b, xs[0].clone())?;
                        let py = ManifoldPoint::new(&b, xs[1].clone())?;
                        weighted_sum(b.logmap(&px, &py)?.coords(), &r)
                    },
                )?);
            }
            Ok(worst)
        }),
        check("project", TOL_OP, |rng| {
            // One interior row (identity branch) and one far-outside row
            // (rescale branch), both away from the switch point.
            let mut worst = 0.0f64;
            let ball = PoincareBall::new(1.0)?;
            for _ in 0..4 {
                let mut coords = point_rows(rng, &ball, 1, 3);
                let dir = normal_vec(rng, 3, 1.0);
                let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                coords.extend(dir.iter().map(|x| x / norm * 1.5 * ball.max_norm()));
                let r = normal_vec(rng, 6, 1.0);
                let b = ball.clone();
                worst = worst.max(compare(&[(coords, vec![2, 3])], &move |xs| {
                    weighted_sum(b.project(&xs[0])?.coords(), &r)
                })?);
            }
            Ok(worst)
        }),
        check("clip_tangent", TOL_OP, |rng| {
            // Same two-branch setup as `project`, for the tangent-norm cap.
            let mut worst = 0.0f64;
            let ball = PoincareBall::new(1.5)?;
            for _ in 0..4 {
                let mut v = normal_vec(rng, 3, 0.05);
                let long = normal_vec(rng, 3, 1.0);
                let norm = long.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                v.extend(long.iter().map(|x| x / norm * 2.0 * ball.max_norm()));
                let r = normal_vec(rng, 6, 1.0);
                let b = ball.clone();
                worst = worst.max(compare(&[(v, vec![2, 3])], &move |xs| {
                    weighted_sum(&b.clip_tangent(&xs[0])?, &r)
                })?);
            }
            Ok(worst)
        }),
        check("conformal_factor", TOL_OP, |rng| {
            let mut worst = 0.0f64;
            let ball = PoincareBall::new(1.0)?;
            for _ in 0..4 {
                let x = point_rows(rng, &ball, 3, 3);
                let r = normal_vec(rng, 3, 1.0);
                let b = ball.clone();
                worst = worst.max(compare(&[(x, vec![3, 3])], &move |xs| {
                    let px = ManifoldPoint::new(&b, xs[0].clone())?;
                    weighted_sum(&b.lambda(&px)?, &r)
                })?);
            }
            Ok(worst)
        }),
        check("dist", TOL_DIST, |rng| {
            // The workhorse: per-pair audit across the curvatures the
            // training sweeps cover.
            let mut worst = 0.0f64;
            for &c in &[0.1, 1.0, 2.0] {
                let ball = PoincareBall::new(c)?;
                for _ in 0..100 {
                    let d = 4;
                    let u = point_rows(rng, &ball, 1, d);
                    let v = point_rows(rng, &ball, 1, d);
                    let b = ball.clone();
                    worst = worst.max(compare(
                        &[(u, vec![1, d]), (v, vec![1, d])],
                        &move |xs| {
                            let pu = ManifoldPoint::new(&b, xs[0].clone())?;
                            let pv = ManifoldPoint::new(&b, xs[1].clone())?;
                            b.dist(&pu, &pv)?.sum_all()
                        },
                    )?);
                }
            }
            Ok(worst)
        }),
        check("dist0", TOL_OP, |rng| {
            let mut worst = 0.0f64;
            for &c in &[0.5, 1.5] {
                let ball = PoincareBall::new(c)?;
                for _ in 0..4 {
                    let x = point_rows(rng, &ball, 3, 3);
                    let r = normal_vec(rng, 3, 1.0);
                    let b = ball.clone();
                    worst = worst.max(compare(&[(x, vec![3, 3])], &move |xs| {
                        let px = ManifoldPoint::new(&b, xs[0].clone())?;
                        weighted_sum(&b.dist0(&px)?, &r)
                    })?);
                }
            }
            Ok(worst)
        }),
        check("dist_pairwise", TOL_OP, |rng| {
            let mut worst = 0.0f64;
            let ball = PoincareBall::new(1.0)?;
            for _ in 0..3 {
                let a = point_rows(rng, &ball, 2, 3);
                let bpts = point_rows(rng, &ball, 3, 3);
                let r = normal_vec(rng, 6, 1.0);
                let b = ball.clone();
                worst = worst.max(compare(
                    &[(a, vec![2, 3]), (bpts, vec![3, 3])],
                    &move |xs| {
                        let pa = ManifoldPoint::new(&b, xs[0].clone())?;
                        let pb = ManifoldPoint::new(&b, xs[1].clone())?;
                        weighted_sum(&b.dist_pairwise(&pa, &pb)?, &r)
                    },
                )?);
            }
            Ok(worst)
        }),
        check("dist_grad_closed_form", TOL_DIST, |rng| {
            // The explicit gradient formula the Riemannian optimizer trusts,
            // checked directly rather than through the tape.
            let mut worst = 0.0f64;
            for &c in &[0.1, 1.0, 2.0] {
                let ball = PoincareBall::new(c)?;
                for _ in 0..20 {
                    let d = 4;
                    let u = point_rows(rng, &ball, 1, d);
                    let v = point_rows(rng, &ball, 1, d);
                    let pu = ManifoldPoint::new(&ball, Tensor::new(u.clone(), &[1, d])?)?;
                    let pv = ManifoldPoint::new(&ball, Tensor::new(v.clone(), &[1, d])?)?;
                    let g = ball.dist_grad(&pu, &pv)?;

                    let (bu, vv) = (ball.clone(), v.clone());
                    let mut fu = move |x: &[f64]| -> Result<f64> {
                        let a = ManifoldPoint::new(&bu, Tensor::new(x.to_vec(), &[1, d])?)?;
                        let b2 = ManifoldPoint::new(&bu, Tensor::new(vv.clone(), &[1, d])?)?;
                        bu.dist(&a, &b2)?.scalar_value()
                    };
                    let nu = finite_difference_grad(&mut fu, &u, H)?;
                    worst = worst.max(rel_error(g.grad_u.coords().data(), &nu));

                    let (bv, uu) = (ball.clone(), u.clone());
                    let mut fv = move |x: &[f64]| -> Result<f64> {
                        let a = ManifoldPoint::new(&bv, Tensor::new(uu.clone(), &[1, d])?)?;
                        let b2 = ManifoldPoint::new(&bv, Tensor::new(x.to_vec(), &[1, d])?)?;
                        bv.dist(&a, &b2)?.scalar_value()
                    };
                    let nv = finite_difference_grad(&mut fv, &v, H)?;
                    worst = worst.max(rel_error(g.grad_v.coords().data(), &nv));
                }
            }
            Ok(worst)
        }),
        check("curvature_gradient", TOL_OP, |rng| {
            // d dist / d log_c through a ball rebuilt from the tracked scalar.
            let mut worst = 0.0f64;
            for &c in &[0.5, 1.5] {
                let probe = PoincareBall::new(c)?;
                for _ in 0..3 {
                    let u = point_rows(rng, &probe, 2, 3);
                    let v = point_rows(rng, &probe, 2, 3);
                    let (uu, vv) = (u.clone(), v.clone());
                    worst = worst.max(compare(
                        &[(vec![c.ln()], vec![])],
                        &move |xs| {
                            let ball = PoincareBall::from_log_c(&xs[0])?;
                            let pu =
                                ManifoldPoint::new(&ball, Tensor::new(uu.clone(), &[2, 3])?)?;
                            let pv =
                                ManifoldPoint::new(&ball, Tensor::new(vv.clone(), &[2, 3])?)?;
                            ball.dist(&pu, &pv)?.sum_all()
                        },
                    )?);
                }
            }
            Ok(worst)
        }),
        check("part_weights", TOL_OP, |rng| {
            let mut worst = 0.0f64;
            let ball = PoincareBall::new(1.0)?;
            let cfg = pinned_frechet();
            for _ in 0..3 {
                let p0 = point_rows(rng, &ball, 2, 3);
                let p1 = point_rows(rng, &ball, 2, 3);
                let p2 = point_rows(rng, &ball, 2, 3);
                let r = normal_vec(rng, 6, 1.0);
                let (b, fc) = (ball.clone(), cfg.clone());
                worst = worst.max(compare(
                    &[(p0, vec![2, 3]), (p1, vec![2, 3]), (p2, vec![2, 3])],
                    &move |xs| {
                        let pts: Vec<ManifoldPoint> = xs
                            .iter()
                            .map(|x| ManifoldPoint::new(&b, x.clone()))
                            .collect::<Result<_>>()?;
                        weighted_sum(part_weights(&b, &pts, &fc)?.weights(), &r)
                    },
                )?);
            }
            Ok(worst)
        }),
        check("frechet_mean", TOL_OP, |rng| {
            // Weights enter through a softmax of leaf logits so that
            // perturbed rows still sum to one.
            let mut worst = 0.0f64;
            let ball = PoincareBall::new(1.0)?;
            let cfg = pinned_frechet();
            for _ in 0..2 {
                let p0 = point_rows(rng, &ball, 2, 3);
                let p1 = point_rows(rng, &ball, 2, 3);
                let p2 = point_rows(rng, &ball, 2, 3);
                let logits = normal_vec(rng, 6, 0.5);
                let r = normal_vec(rng, 6, 1.0);
                let (b, fc) = (ball.clone(), cfg.clone());
                worst = worst.max(compare(
                    &[
                        (p0, vec![2, 3]),
                        (p1, vec![2, 3]),
                        (p2, vec![2, 3]),
                        (logits, vec![2, 3]),
                    ],
                    &move |xs| {
                        let pts: Vec<ManifoldPoint> = xs[..3]
                            .iter()
                            .map(|x| ManifoldPoint::new(&b, x.clone()))
                            .collect::<Result<_>>()?;
                        let w = PartWeights::from_tensor(xs[3].softmax(1, None)?)?;
                        weighted_sum(frechet_mean(&pts, &w, &fc)?.mean.coords(), &r)
                    },
                )?);
            }
            Ok(worst)
        }),
        check("weighted_midpoint", TOL_OP, |rng| {
            let mut worst = 0.0f64;
            let ball = PoincareBall::new(1.0)?;
            let cfg = pinned_frechet();
            for _ in 0..2 {
                let values = point_rows(rng, &ball, 3, 3);
                let logits = normal_vec(rng, 6, 0.5);
                let r = normal_vec(rng, 6, 1.0);
                let (b, fc) = (ball.clone(), cfg.clone());
                worst = worst.max(compare(
                    &[(values, vec![3, 3]), (logits, vec![2, 3])],
                    &move |xs| {
                        let vals = ManifoldPoint::new(&b, xs[0].clone())?;
                        let w = xs[1].softmax(1, None)?;
                        weighted_sum(weighted_midpoint(&vals, &w, &fc)?.mean.coords(), &r)
                    },
                )?);
            }
            Ok(worst)
        }),
        check("hyperbolic_projection", TOL_OP, |rng| {
            let mut worst = 0.0f64;
            let ball = PoincareBall::new(1.5)?;
            for _ in 0..3 {
                let w = normal_vec(rng, 12, 0.5);
                let scale = vec![-0.5 + 0.2 * normal_vec(rng, 1, 1.0)[0]];
                let x = normal_vec(rng, 8, 1.0);
                let r = normal_vec(rng, 6, 1.0);
                let b = ball.clone();
                worst = worst.max(compare(
                    &[(w, vec![4, 3]), (scale, vec![]), (x, vec![2, 4])],
                    &move |xs| {
                        let proj = HyperbolicProjection::new(xs[0].clone(), xs[1].clone())?;
                        weighted_sum(proj.project(&b, &xs[2])?.coords(), &r)
                    },
                )?);
            }
            Ok(worst)
        }),
        check("pooled_align", TOL_OP, |rng| {
            let mut worst = 0.0f64;
            let ball = PoincareBall::new(1.0)?;
            let cfg = pinned_frechet();
            let mask = vec![1.0, 1.0, 1.0, 1.0, 1.0, 0.0];
            for _ in 0..2 {
                let parts0 = point_rows(rng, &ball, 2, 3);
                let parts1 = point_rows(rng, &ball, 2, 3);
                let states = normal_vec(rng, 2 * 3 * 4, 0.5);
                let w = normal_vec(rng, 12, 0.5);
                let scale = vec![-0.5];
                let r = normal_vec(rng, 12, 1.0);
                let (b, fc, m) = (ball.clone(), cfg.clone(), mask.clone());
                worst = worst.max(compare(
                    &[
                        (parts0, vec![2, 3]),
                        (parts1, vec![2, 3]),
                        (states, vec![2, 3, 4]),
                        (w, vec![4, 3]),
                        (scale, vec![]),
                    ],
                    &move |xs| {
                        let pts = vec![
                            ManifoldPoint::new(&b, xs[0].clone())?,
                            ManifoldPoint::new(&b, xs[1].clone())?,
                        ];
                        let mask = Tensor::new(m.clone(), &[2, 3])?;
                        let proj = HyperbolicProjection::new(xs[3].clone(), xs[4].clone())?;
                        let (pose, text) = pooled_align(&b, &pts, &xs[2], &mask, &proj, &fc)?;
                        weighted_sum(pose.coords(), &r)?
                            .add(&weighted_sum(text.coords(), &r[6..])?)
                    },
                )?);
            }
            Ok(worst)
        }),
        check("token_align", TOL_OP, |rng| {
            let mut worst = 0.0f64;
            let ball = PoincareBall::new(1.0)?;
            let cfg = pinned_frechet();
            let mask = vec![1.0, 1.0, 1.0, 1.0, 1.0, 0.0];
            for _ in 0..2 {
                let parts0 = point_rows(rng, &ball, 2, 3);
                let parts1 = point_rows(rng, &ball, 2, 3);
                let states = normal_vec(rng, 2 * 3 * 4, 0.5);
                let w = normal_vec(rng, 12, 0.5);
                let m_key = normal_vec(rng, 9, 0.5);
                let b_key = normal_vec(rng, 3, 0.05);
                let r = normal_vec(rng, 24, 1.0);
                let (b, fc, m) = (ball.clone(), cfg.clone(), mask.clone());
                worst = worst.max(compare(
                    &[
                        (parts0, vec![2, 3]),
                        (parts1, vec![2, 3]),
                        (states, vec![2, 3, 4]),
                        (w, vec![4, 3]),
                        (vec![-0.5], vec![]),
                        (m_key, vec![3, 3]),
                        (b_key, vec![3]),
                        (vec![0.1], vec![]),
                    ],
                    &move |xs| {
                        let pts = vec![
                            ManifoldPoint::new(&b, xs[0].clone())?,
                            ManifoldPoint::new(&b, xs[1].clone())?,
                        ];
                        let mask = Tensor::new(m.clone(), &[2, 3])?;
                        let proj = HyperbolicProjection::new(xs[3].clone(), xs[4].clone())?;
                        let attn = HyperbolicAttention {
                            m_key: xs[5].clone(),
                            b_key: xs[6].clone(),
                            log_tau_attn: xs[7].clone(),
                        };
                        let out = token_align(&b, &pts, &xs[2], &mask, &proj, &attn, &fc)?;
                        weighted_sum(out.parts.coords(), &r)?
                            .add(&weighted_sum(out.contexts.coords(), &r[12..])?)
                    },
                )?);
            }
            Ok(worst)
        }),
        check("contrastive_loss", TOL_OP, |rng| {
            let mut worst = 0.0f64;
            let ball = PoincareBall::new(1.0)?;
            for _ in 0..3 {
                let pose = point_rows(rng, &ball, 3, 4);
                let text = point_rows(rng, &ball, 3, 4);
                let b = ball.clone();
                worst = worst.max(compare(
                    &[
                        (pose, vec![3, 4]),
                        (text, vec![3, 4]),
                        (vec![-1.2], vec![]),
                        (vec![0.2], vec![]),
                    ],
                    &move |xs| {
                        let p = ManifoldPoint::new(&b, xs[0].clone())?;
                        let t = ManifoldPoint::new(&b, xs[1].clone())?;
                        let head = ContrastiveHead {
                            log_tau: xs[2].clone(),
                            margin: xs[3].clone(),
                            label_smoothing: 0.1,
                        };
                        contrastive_loss(&p, &t, &head)
                    },
                )?);
            }
            Ok(worst)
        }),
        check("contrastive_loss_parts", TOL_OP, |rng| {
            let mut worst = 0.0f64;
            let ball = PoincareBall::new(1.0)?;
            for _ in 0..3 {
                let parts = point_rows(rng, &ball, 4, 3);
                let contexts = point_rows(rng, &ball, 4, 3);
                let b = ball.clone();
                worst = worst.max(compare(
                    &[
                        (parts, vec![2, 2, 3]),
                        (contexts, vec![2, 2, 3]),
                        (vec![-1.2], vec![]),
                        (vec![0.2], vec![]),
                    ],
                    &move |xs| {
                        let p = ManifoldPoint::new(&b, xs[0].clone())?;
                        let t = ManifoldPoint::new(&b, xs[1].clone())?;
                        let head = ContrastiveHead {
                            log_tau: xs[2].clone(),
                            margin: xs[3].clone(),
                            label_smoothing: 0.1,
                        };
                        contrastive_loss_parts(&p, &t, &head)
                    },
                )?);
            }
            Ok(worst)
        }),
        check("cross_entropy", TOL_OP, |rng| {
            let mut worst = 0.0f64;
            let targets = [3usize, 1, PAD, 2];
            for _ in 0..3 {
                let logits = normal_vec(rng, 4 * 6, 1.0);
                let t = targets;
                worst = worst.max(compare(&[(logits, vec![4, 6])], &move |xs| {
                    cross_entropy_masked(&xs[0], &t, Some(PAD), 0.1)
                })?);
            }
            Ok(worst)
        }),
        check("log_softmax", TOL_OP, |rng| {
            let mut worst = 0.0f64;
            for _ in 0..3 {
                let x = normal_vec(rng, 15, 1.0);
                let r = normal_vec(rng, 15, 1.0);
                worst = worst.max(compare(&[(x, vec![3, 5])], &move |xs| {
                    weighted_sum(&log_softmax_last(&xs[0])?, &r)
                })?);
            }
            Ok(worst)
        }),
        check("alpha_schedule", TOL_OP, |rng| {
            let mut worst = 0.0f64;
            for _ in 0..3 {
                let logit = normal_vec(rng, 1, 0.5);
                worst = worst.max(compare(&[(logit, vec![])], &move |xs| {
                    AlphaSchedule {
                        alpha_init: 0.5,
                        logit_alpha: xs[0].clone(),
                        total_steps: 10,
                    }
                    .alpha(3)
                })?);
            }
            Ok(worst)
        }),
        check("total_loss", TOL_OP, |rng| {
            let mut worst = 0.0f64;
            for _ in 0..3 {
                let ce = vec![1.0 + normal_vec(rng, 1, 0.2)[0]];
                let hyp = vec![2.0 + normal_vec(rng, 1, 0.2)[0]];
                let a = vec![0.6];
                worst = worst.max(compare(
                    &[(ce, vec![]), (hyp, vec![]), (a, vec![])],
                    &move |xs| total_loss(&xs[0], &xs[1], &xs[2]),
                )?);
            }
            Ok(worst)
        }),
    ]
}

/// Test fixture, not part of [`registry`]: compares a deliberately
/// sign-flipped copy of the closed-form distance gradient against the
/// oracle, so the audit's failure path stays exercised.
pub fn negative_control() -> OpCheck {
    check("dist_grad_sign_flipped", TOL_DIST, |rng| {
        let ball = PoincareBall::new(1.0)?;
        let d = 3;
        let u = point_rows(rng, &ball, 1, d);
        let v = point_rows(rng, &ball, 1, d);
        let pu = ManifoldPoint::new(&ball, Tensor::new(u.clone(), &[1, d])?)?;
        let pv = ManifoldPoint::new(&ball, Tensor::new(v.clone(), &[1, d])?)?;
        let g = ball.dist_grad(&pu, &pv)?;
        let flipped: Vec<f64> = g.grad_u.coords().data().iter().map(|x| -x).collect();

        let (b, vv) = (ball.clone(), v);
        let mut f = move |x: &[f64]| -> Result<f64> {
            let a = ManifoldPoint::new(&b, Tensor::new(x.to_vec(), &[1, d])?)?;
            let c = ManifoldPoint::new(&b, Tensor::new(vv.clone(), &[1, d])?)?;
            b.dist(&a, &c)?.scalar_value()
        };
        let numeric = finite_difference_grad(&mut f, &u, H)?;
        Ok(rel_error(&flipped, &numeric))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_registered_op_matches_finite_differences() {
        let report = check_grads(7).unwrap();
        assert!(report.passed(), "audit failed:\n{}", report.render());
        // Typical worst errors sit far below the limits; flag silent decay.
        for r in &report.results {
            assert!(
                r.worst < r.threshold,
                "{}: worst {} exceeds {}",
                r.name,
                r.worst,
                r.threshold
            );
        }
    }

    #[test]
    fn registry_covers_the_stack_with_unique_names() {
        let checks = registry();
        let mut names: Vec<&str> = checks.iter().map(|c| c.name).collect();
        let total = names.len();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), total, "duplicate check names");
        for required in [
            "mobius_add",
            "mobius_matvec",
            "expmap0",
            "logmap0",
            "expmap",
            "logmap",
            "project",
            "clip_tangent",
            "conformal_factor",
            "dist",
            "dist0",
            "dist_pairwise",
            "dist_grad_closed_form",
            "curvature_gradient",
            "part_weights",
            "frechet_mean",
            "weighted_midpoint",
            "hyperbolic_projection",
            "pooled_align",
            "token_align",
            "contrastive_loss",
            "contrastive_loss_parts",
            "cross_entropy",
            "log_softmax",
            "alpha_schedule",
            "total_loss",
        ] {
            assert!(names.binary_search(&required).is_ok(), "missing {required}");
        }
    }

    #[test]
    fn sign_flipped_distance_gradient_is_reported_as_failure() {
        let report = run_checks(&[negative_control()], 3).unwrap();
        assert!(!report.passed());
        assert!(report.results[0].worst > 1.0, "a sign flip is a gross error");
        let text = report.render();
        assert!(text.contains("FAIL"), "render must flag the failure:\n{text}");
        assert!(text.contains("0/1 ops within tolerance"));
    }

    #[test]
    fn report_renders_one_line_per_op_plus_summary() {
        let report = run_checks(&registry()[..3], 11).unwrap();
        let text = report.render();
        assert_eq!(text.lines().count(), 4);
        assert!(text.contains("mobius_add"));
        assert!(text.lines().last().unwrap().contains("3/3 ops"));
    }
}
