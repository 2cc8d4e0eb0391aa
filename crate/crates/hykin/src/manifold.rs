//! Poincaré ball geometry with learnable curvature.
//!
//! The ball of curvature magnitude `c > 0` is `{ x : √c‖x‖ < 1 }`. All
//! operations are batched over leading axes: a [`ManifoldPoint`] wraps a
//! tensor of shape `(..., d)` whose rows are points. Curvature enters as a
//! scalar tensor (`c = exp(log_c)` when learnable), so curvature gradients
//! flow through every operation.
//!
//! Conventions, fixed by the radial identity `dist(0, expmap0(v)) = ‖v‖`:
//!
//! * Möbius addition
//!   `u ⊕ v = ((1 + 2c⟨u,v⟩ + c‖v‖²)u + (1 − c‖u‖²)v) / (1 + 2c⟨u,v⟩ + c²‖u‖²‖v‖²)`;
//! * geodesic distance `dist(u,v) = (2/√c)·artanh(√c‖(−u)⊕v‖)`;
//! * origin maps `expmap0(v) = tanh(√c‖v‖/2)·v/(√c‖v‖)` and
//!   `logmap0(y) = (2/√c)·artanh(√c‖y‖)·y/‖y‖`, exact inverses of each other;
//! * translated maps `expmap(x,v) = x ⊕ expmap0(v)` and
//!   `logmap(x,y) = logmap0((−x) ⊕ y)`, for which `dist(x, expmap(x,v)) = ‖v‖`.
//!
//! `dist` is a single fused tape node whose registered backward *is* the
//! analytic gradient `∇_u dist = −λ_u^c · w/‖w‖` (with `w = (−u)⊕v` and
//! conformal factor `λ_x^c = 2/(1 − c‖x‖²)`), together with the matching
//! analytic curvature partial. [`PoincareBall::dist_grad`] exposes the same
//! kernel, so autodiff through `dist` and the closed form agree bit for bit.
//!
//! Numerical guards: `artanh` arguments are clamped to magnitude ≤ 1 − 1e−12,
//! denominators are floored at `EPS_DIV`, points are re-projected to radius
//! `(1 − EPS_BOUNDARY)/√c`, and tangent arguments pass through
//! [`PoincareBall::clip_tangent`] before any exponential map.

use crate::error::{Error, Result};
use crate::tensor::ops::ARTANH_GUARD;
use crate::tensor::{make_result, Tensor};

// ===== ball =====

/// Poincaré ball of one curvature, used for a single forward pass. Cheap to
/// clone; caches `√c` and the projection radius as tensors so repeated
/// operations share tape nodes.
#[derive(Clone)]
pub struct PoincareBall {
    c: Tensor,
    sqrt_c: Tensor,
    c_value: f64,
}

impl PoincareBall {
    /// Points are re-projected to Euclidean norm `(1 − EPS_BOUNDARY)/√c`.
    pub const EPS_BOUNDARY: f64 = 1e-5;
    /// Floor applied to denominators.
    pub const EPS_DIV: f64 = 1e-15;
    /// Additive guard in the tangent clip denominator.
    pub const CLIP_EPS: f64 = 1e-5;

    /// Ball with fixed (non-learnable) curvature magnitude `c > 0`.
    pub fn new(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Domain {
                op: "poincare_ball",
                value: c,
            });
        }
        Self::from_c_tensor(Tensor::scalar(c))
    }

    /// Ball with curvature `c = exp(log_c)`. When `log_c` is a tape leaf the
    /// curvature is learnable: every operation contributes to its gradient.
    pub fn from_log_c(log_c: &Tensor) -> Result<Self> {
        if log_c.numel() != 1 {
            return Err(Error::InvalidShape {
                op: "poincare_ball",
                shape: log_c.shape().to_vec(),
                msg: "log_c must be a scalar".into(),
            });
        }
        Self::from_c_tensor(log_c.exp()?)
    }

    fn from_c_tensor(c: Tensor) -> Result<Self> {
        let c_value = c.data()[0];
        if !(c_value.is_finite() && c_value > 0.0) {
            return Err(Error::Domain {
                op: "poincare_ball",
                value: c_value,
            });
        }
        let sqrt_c = c.sqrt()?;
        Ok(Self {
            c,
            sqrt_c,
            c_value,
        })
    }

    /// Curvature magnitude as a plain value.
    pub fn c(&self) -> f64 {
        self.c_value
    }

    /// Curvature magnitude as a (possibly tracked) scalar tensor.
    pub fn c_tensor(&self) -> &Tensor {
        &self.c
    }

    /// Maximum Euclidean norm points are projected to.
    pub fn max_norm(&self) -> f64 {
        (1.0 - Self::EPS_BOUNDARY) / self.c_value.sqrt()
    }

    pub(crate) fn compatible(&self, other: &PoincareBall, op: &'static str) -> Result<()> {
        if self.c_value.to_bits() != other.c_value.to_bits() {
            return Err(Error::BallMismatch {
                op,
                lhs: self.c_value,
                rhs: other.c_value,
            });
        }
        Ok(())
    }
}

// ===== points and tangent vectors =====

/// Batch of points strictly inside a ball; wraps a tensor shaped `(..., d)`.
#[derive(Clone)]
pub struct ManifoldPoint {
    coords: Tensor,
    ball: PoincareBall,
}

impl ManifoldPoint {
    /// Validate raw coordinates as points on `ball`. Rows must satisfy
    /// `√c‖x‖ < 1`; use [`PoincareBall::project`] first for raw model output.
    pub fn new(ball: &PoincareBall, coords: Tensor) -> Result<Self> {
        if coords.rank() == 0 {
            return Err(Error::InvalidShape {
                op: "manifold_point",
                shape: vec![],
                msg: "expected at least one axis (the coordinate axis)".into(),
            });
        }
        let d = *coords.shape().last().expect("rank checked");
        let sqrt_c = ball.c_value.sqrt();
        for row in coords.data().chunks(d) {
            let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            let r = sqrt_c * n;
            if !r.is_finite() || r >= 1.0 {
                return Err(Error::Domain {
                    op: "manifold_point",
                    value: r,
                });
            }
        }
        Ok(Self {
            coords,
            ball: ball.clone(),
        })
    }

    pub(crate) fn new_unchecked(ball: &PoincareBall, coords: Tensor) -> Self {
        Self {
            coords,
            ball: ball.clone(),
        }
    }

    /// Origin of the ball, broadcast to `shape + [d]`.
    pub fn origin(ball: &PoincareBall, shape: &[usize], d: usize) -> Result<Self> {
        let mut full = shape.to_vec();
        full.push(d);
        Ok(Self::new_unchecked(ball, Tensor::zeros(&full)?))
    }

    pub fn coords(&self) -> &Tensor {
        &self.coords
    }

    pub fn ball(&self) -> &PoincareBall {
        &self.ball
    }

    /// Coordinate dimension (last axis).
    pub fn dim(&self) -> usize {
        *self.coords.shape().last().expect("validated at construction")
    }

    fn check_pair(&self, other: &ManifoldPoint, op: &'static str) -> Result<()> {
        self.ball.compatible(&other.ball, op)?;
        if self.coords.shape() != other.coords.shape() {
            return Err(Error::ShapeMismatch {
                op,
                lhs: self.coords.shape().to_vec(),
                rhs: other.coords.shape().to_vec(),
            });
        }
        Ok(())
    }
}

/// Tangent vector(s), tagged with their base point (`None` = origin).
#[derive(Clone)]
pub struct TangentVector {
    coords: Tensor,
    base: Option<Tensor>,
}

impl TangentVector {
    /// Tangent vector at the origin.
    pub fn at_origin(coords: Tensor) -> Self {
        Self {
            coords,
            base: None,
        }
    }

    /// Tangent vector at `base`.
    pub fn at_point(base: &ManifoldPoint, coords: Tensor) -> Self {
        Self {
            coords,
            base: Some(base.coords().clone()),
        }
    }

    pub fn coords(&self) -> &Tensor {
        &self.coords
    }

    /// Base point coordinates, if not the origin.
    pub fn base(&self) -> Option<&Tensor> {
        self.base.as_ref()
    }
}

// ===== shared tensor-level helpers =====

/// Squared norm over the last axis, keepdim: shape `(..., 1)`.
fn sumsq_keepdim(x: &Tensor) -> Result<Tensor> {
    let last = x.rank() - 1;
    x.mul(x)?.sum(Some(last), true)
}

/// Norm over the last axis with a tiny floor inside the square root so that
/// zero rows stay differentiable; shape `(..., 1)`.
fn norm_keepdim(x: &Tensor) -> Result<Tensor> {
    sumsq_keepdim(x)?.affine(1.0, 1e-30)?.sqrt()
}

impl PoincareBall {
    /// Conformal factor `λ_x^c = 2/(1 − c‖x‖²)`, shape `(..., 1)`.
    pub fn lambda(&self, x: &ManifoldPoint) -> Result<Tensor> {
        self.compatible(&x.ball, "lambda")?;
        let denom = sumsq_keepdim(&x.coords)?
            .mul(&self.c)?
            .affine(-1.0, 1.0)?
            .clamp_min(Self::EPS_DIV)?;
        Tensor::scalar(2.0).div(&denom)
    }

    /// Re-project raw coordinates onto the ball: rows with
    /// `√c‖x‖ ≥ 1 − EPS_BOUNDARY` are rescaled to that radius, interior rows
    /// pass through unchanged.
    pub fn project(&self, coords: &Tensor) -> Result<ManifoldPoint> {
        let norm = norm_keepdim(coords)?;
        // max allowed norm (1 − eps)/√c as a tensor, so curvature gradients
        // flow through active projections.
        let max_norm = Tensor::scalar(1.0 - Self::EPS_BOUNDARY).div(&self.sqrt_c)?;
        let scale = max_norm.div(&norm)?.clamp_max(1.0)?;
        Ok(ManifoldPoint::new_unchecked(self, coords.mul(&scale)?))
    }

    /// Norm-clip a tangent batch: `v / max(1, √c‖v‖ + ε)`. Applied before
    /// every exponential map; keeps `√c‖v‖` at or below ~1.
    pub fn clip_tangent(&self, v: &Tensor) -> Result<Tensor> {
        let norm = norm_keepdim(v)?;
        let denom = norm
            .mul(&self.sqrt_c)?
            .affine(1.0, Self::CLIP_EPS)?
            .clamp_min(1.0)?;
        v.div(&denom)
    }

    /// Möbius addition `u ⊕ v`, projected back onto the ball.
    pub fn mobius_add(&self, u: &ManifoldPoint, v: &ManifoldPoint) -> Result<ManifoldPoint> {
        u.check_pair(v, "mobius_add")?;
        self.compatible(&u.ball, "mobius_add")?;
        let out = self.mobius_add_raw(&u.coords, &v.coords)?;
        self.project(&out)
    }

    fn mobius_add_raw(&self, u: &Tensor, v: &Tensor) -> Result<Tensor> {
        let c = &self.c;
        let uv = u.mul(v)?.sum(Some(u.rank() - 1), true)?;
        let nu = sumsq_keepdim(u)?;
        let nv = sumsq_keepdim(v)?;
        let c_uv2 = uv.mul(c)?.affine(2.0, 1.0)?; // 1 + 2c⟨u,v⟩
        let a = c_uv2.add(&nv.mul(c)?)?; // + c‖v‖²
        let b = nu.mul(c)?.affine(-1.0, 1.0)?; // 1 − c‖u‖²
        let d = c_uv2
            .add(&nu.mul(&nv)?.mul(&c.mul(c)?)?)? // + c²‖u‖²‖v‖²
            .clamp_min(Self::EPS_DIV)?;
        u.mul(&a)?.add(&v.mul(&b)?)?.div(&d)
    }

    /// Exponential map at the origin: clips the tangent argument, then
    /// `tanh(√c‖v‖/2)·v/(√c‖v‖)`, projected.
    pub fn expmap0(&self, v: &TangentVector) -> Result<ManifoldPoint> {
        let clipped = self.clip_tangent(&v.coords)?;
        let out = self.expmap0_postclip(&clipped)?;
        self.project(&out)
    }

    fn expmap0_postclip(&self, v: &Tensor) -> Result<Tensor> {
        let norm = norm_keepdim(v)?;
        let sn = norm.mul(&self.sqrt_c)?; // √c‖v‖
        let scale = sn.affine(0.5, 0.0)?.tanh()?.div(&sn.clamp_min(Self::EPS_DIV)?)?;
        v.mul(&scale)
    }

    /// Logarithmic map at the origin: `(2/√c)·artanh(√c‖y‖)·y/‖y‖`. Inverse
    /// of [`expmap0`] on the clip's range.
    pub fn logmap0(&self, y: &ManifoldPoint) -> Result<TangentVector> {
        self.compatible(&y.ball, "logmap0")?;
        Ok(TangentVector::at_origin(self.logmap0_raw(&y.coords)?))
    }

    pub(crate) fn logmap0_raw(&self, y: &Tensor) -> Result<Tensor> {
        let norm = norm_keepdim(y)?;
        let sn = norm.mul(&self.sqrt_c)?;
        let scale = sn.artanh()?.affine(2.0, 0.0)?.div(&sn.clamp_min(Self::EPS_DIV)?)?;
        y.mul(&scale)
    }

    /// Exponential map at `x`: `x ⊕ expmap0(v)`, projected. Satisfies
    /// `dist(x, expmap(x, v)) = ‖v‖` (after clipping).
    pub fn expmap(&self, x: &ManifoldPoint, v: &TangentVector) -> Result<ManifoldPoint> {
        self.compatible(&x.ball, "expmap")?;
        let clipped = self.clip_tangent(&v.coords)?;
        let step = self.expmap0_postclip(&clipped)?;
        let out = self.mobius_add_raw(&x.coords, &step)?;
        self.project(&out)
    }

    /// Logarithmic map at `x`: `logmap0((−x) ⊕ y)`. Inverse of [`expmap`].
    pub fn logmap(&self, x: &ManifoldPoint, y: &ManifoldPoint) -> Result<TangentVector> {
        x.check_pair(y, "logmap")?;
        self.compatible(&x.ball, "logmap")?;
        let w = self.mobius_add_raw(&x.coords.neg()?, &y.coords)?;
        Ok(TangentVector {
            coords: self.logmap0_raw(&w)?,
            base: Some(x.coords.clone()),
        })
    }

    /// Möbius matrix-vector product `M ⊗ x = expmap0(M · logmap0(x))` for
    /// `M` of shape `(d_out, d_in)` and points shaped `(..., d_in)`.
    pub fn mobius_matvec(&self, m: &Tensor, x: &ManifoldPoint) -> Result<ManifoldPoint> {
        self.compatible(&x.ball, "mobius_matvec")?;
        if m.rank() != 2 || m.shape()[1] != x.dim() {
            return Err(Error::ShapeMismatch {
                op: "mobius_matvec",
                lhs: m.shape().to_vec(),
                rhs: x.coords.shape().to_vec(),
            });
        }
        let d_in = x.dim();
        let d_out = m.shape()[0];
        let rows = x.coords.numel() / d_in;
        let t = self.logmap0_raw(&x.coords)?.reshape(&[rows, d_in])?;
        let mt = m.permute(&[1, 0])?;
        let mapped = t.matmul(&mt)?;
        let mut out_shape = x.coords.shape().to_vec();
        *out_shape.last_mut().expect("rank ≥ 1") = d_out;
        let mapped = mapped.reshape(&out_shape)?;
        self.expmap0(&TangentVector::at_origin(mapped))
    }
}

// ===== geodesic distance (fused op with analytic backward) =====

/// Distance between two coordinate rows, plain scalars. Single source of
/// truth for the `dist` forward; also used for cheap convergence checks.
pub(crate) fn scalar_dist(u: &[f64], v: &[f64], c: f64) -> f64 {
    let d = u.len();
    let mut uv = 0.0;
    let mut nu2 = 0.0;
    let mut nv2 = 0.0;
    for i in 0..d {
        uv += u[i] * v[i];
        nu2 += u[i] * u[i];
        nv2 += v[i] * v[i];
    }
    let a = 1.0 - 2.0 * c * uv + c * nv2;
    let b = 1.0 - c * nu2;
    let den = (1.0 - 2.0 * c * uv + c * c * nu2 * nv2).max(PoincareBall::EPS_DIV);
    let mut n2 = 0.0;
    for i in 0..d {
        let w = (-a * u[i] + b * v[i]) / den;
        n2 += w * w;
    }
    let n = (n2 + 1e-30).sqrt();
    let s = c.sqrt();
    let arg = (s * n).min(ARTANH_GUARD);
    2.0 / s * arg.atanh()
}

/// Unscaled per-row distance gradients, shared verbatim between the tape
/// backward of `dist` and the public `dist_grad`. Writes `∇_u` and `∇_v`,
/// returns `∂dist/∂c` and the degenerate flag (coincident pair → zero
/// subgradient).
fn dist_grad_row(u: &[f64], v: &[f64], c: f64, gu: &mut [f64], gv: &mut [f64]) -> (f64, bool) {
    let d = u.len();
    let mut uv = 0.0;
    let mut nu2 = 0.0;
    let mut nv2 = 0.0;
    for i in 0..d {
        uv += u[i] * v[i];
        nu2 += u[i] * u[i];
        nv2 += v[i] * v[i];
    }
    // w_u = (−u) ⊕ v  (Möbius coefficients with first operand −u).
    let au = 1.0 - 2.0 * c * uv + c * nv2;
    let bu = 1.0 - c * nu2;
    let den = (1.0 - 2.0 * c * uv + c * c * nu2 * nv2).max(PoincareBall::EPS_DIV);
    let mut n2 = 0.0;
    for i in 0..d {
        let w = (-au * u[i] + bu * v[i]) / den;
        gu[i] = w;
        n2 += w * w;
    }
    if n2 < 1e-24 {
        gu.fill(0.0);
        gv.fill(0.0);
        return (0.0, true);
    }
    let n = (n2 + 1e-30).sqrt();
    // ∂dist/∂c before the direction terms: dist = 2c^{−1/2}·artanh(√c·n(c)).
    let s = c.sqrt();
    let arg = (s * n).min(ARTANH_GUARD);
    let dn_dc = {
        // dw/dc = (A'·(−u) + B'·v)/D − w·D'/D with the coefficient
        // derivatives of w_u in c.
        let ap = -2.0 * uv + nv2;
        let bp = -nu2;
        let dp = -2.0 * uv + 2.0 * c * nu2 * nv2;
        let mut acc = 0.0;
        for i in 0..d {
            let w = gu[i];
            let dw = (-ap * u[i] + bp * v[i]) / den - w * (dp / den);
            acc += (w / n) * dw;
        }
        acc
    };
    let dc = -arg.atanh() / (c * s) + (n / c + 2.0 * dn_dc) / (1.0 - arg * arg);
    // ∇_u = −λ_u · w_u/‖w_u‖ (w_u currently sits in gu).
    let lam_u = 2.0 / (1.0 - c * nu2).max(PoincareBall::EPS_DIV);
    for g in gu.iter_mut() {
        *g = -lam_u * (*g / n);
    }
    // ∇_v = −λ_v · w_v/‖w_v‖ with w_v = (−v) ⊕ u (roles swapped; the
    // denominator is symmetric in u, v).
    let av = 1.0 - 2.0 * c * uv + c * nu2;
    let bv = 1.0 - c * nv2;
    let mut nv_2 = 0.0;
    for i in 0..d {
        let w = (-av * v[i] + bv * u[i]) / den;
        gv[i] = w;
        nv_2 += w * w;
    }
    let nv = (nv_2 + 1e-30).sqrt();
    let lam_v = 2.0 / (1.0 - c * nv2).max(PoincareBall::EPS_DIV);
    for g in gv.iter_mut() {
        *g = -lam_v * (*g / nv);
    }
    (dc, false)
}

/// Gradients of the geodesic distance, as returned by
/// [`PoincareBall::dist_grad`].
pub struct DistGrad {
    /// `∇_u dist(u,v)`, a tangent batch at `u`.
    pub grad_u: TangentVector,
    /// `∇_v dist(u,v)`, a tangent batch at `v`.
    pub grad_v: TangentVector,
    /// Per-row flag: coincident pair, zero subgradient returned.
    pub degenerate: Vec<bool>,
}

impl PoincareBall {
    /// Geodesic distance `(2/√c)·artanh(√c‖(−u)⊕v‖)`, batched over rows.
    /// Output shape is the input shape minus the coordinate axis.
    ///
    /// This is one fused tape node; its registered backward evaluates the
    /// same analytic kernel as [`dist_grad`] (plus the curvature partial), so
    /// the two agree bit for bit.
    pub fn dist(&self, u: &ManifoldPoint, v: &ManifoldPoint) -> Result<Tensor> {
        u.check_pair(v, "dist")?;
        self.compatible(&u.ball, "dist")?;
        let shape = u.coords.shape();
        let d = *shape.last().expect("validated");
        let out_shape: Vec<usize> = shape[..shape.len() - 1].to_vec();
        let rows = u.coords.numel() / d;
        let c = self.c_value;
        let (ud, vd) = (u.coords.data(), v.coords.data());
        let mut out = vec![0.0; rows];
        for r in 0..rows {
            out[r] = scalar_dist(&ud[r * d..(r + 1) * d], &vd[r * d..(r + 1) * d], c);
        }
        let u_data = u.coords.data_rc();
        let v_data = v.coords.data_rc();
        make_result(
            "dist",
            &[&u.coords, &v.coords, &self.c],
            out,
            out_shape,
            move || {
                Box::new(move |g, sink| {
                    let mut acc_u = if sink.needs(0) {
                        Some(vec![0.0; u_data.len()])
                    } else {
                        None
                    };
                    let mut acc_v = if sink.needs(1) {
                        Some(vec![0.0; v_data.len()])
                    } else {
                        None
                    };
                    let mut acc_c = 0.0;
                    let mut gu = vec![0.0; d];
                    let mut gv = vec![0.0; d];
                    for (r, &go) in g.iter().enumerate() {
                        let (ur, vr) = (&u_data[r * d..(r + 1) * d], &v_data[r * d..(r + 1) * d]);
                        let (dc, _) = dist_grad_row(ur, vr, c, &mut gu, &mut gv);
                        if let Some(acc) = &mut acc_u {
                            for i in 0..d {
                                acc[r * d + i] += go * gu[i];
                            }
                        }
                        if let Some(acc) = &mut acc_v {
                            for i in 0..d {
                                acc[r * d + i] += go * gv[i];
                            }
                        }
                        acc_c += go * dc;
                    }
                    if let Some(acc) = acc_u {
                        sink.add(0, acc);
                    }
                    if let Some(acc) = acc_v {
                        sink.add(1, acc);
                    }
                    sink.add(2, vec![acc_c]);
                })
            },
        )
    }

    /// Distance to the origin (radius), batched.
    pub fn dist0(&self, x: &ManifoldPoint) -> Result<Tensor> {
        let origin = ManifoldPoint::new_unchecked(self, Tensor::zeros(x.coords.shape())?);
        self.dist(&origin, x)
    }

    /// Analytic gradients of `dist(u, v)` with respect to both arguments:
    /// `∇_u = −λ_u^c·w_u/‖w_u‖` (`w_u = (−u)⊕v`) and symmetrically for `v`.
    /// Coincident pairs return the zero subgradient and are flagged.
    pub fn dist_grad(&self, u: &ManifoldPoint, v: &ManifoldPoint) -> Result<DistGrad> {
        u.check_pair(v, "dist_grad")?;
        self.compatible(&u.ball, "dist_grad")?;
        let d = u.dim();
        let rows = u.coords.numel() / d;
        let (ud, vd) = (u.coords.data(), v.coords.data());
        let mut gu = vec![0.0; rows * d];
        let mut gv = vec![0.0; rows * d];
        let mut degenerate = vec![false; rows];
        for r in 0..rows {
            let (_, flag) = dist_grad_row(
                &ud[r * d..(r + 1) * d],
                &vd[r * d..(r + 1) * d],
                self.c_value,
                &mut gu[r * d..(r + 1) * d],
                &mut gv[r * d..(r + 1) * d],
            );
            degenerate[r] = flag;
        }
        let shape = u.coords.shape();
        Ok(DistGrad {
            grad_u: TangentVector {
                coords: Tensor::new(gu, shape)?,
                base: Some(u.coords.clone()),
            },
            grad_v: TangentVector {
                coords: Tensor::new(gv, shape)?,
                base: Some(v.coords.clone()),
            },
            degenerate,
        })
    }

    /// All-pairs distances between row batches `a (R,d)` and `b (S,d)`,
    /// shaped `(R, S)`.
    pub fn dist_pairwise(&self, a: &ManifoldPoint, b: &ManifoldPoint) -> Result<Tensor> {
        self.compatible(&a.ball, "dist_pairwise")?;
        self.compatible(&b.ball, "dist_pairwise")?;
        if a.coords.rank() != 2 || b.coords.rank() != 2 || a.dim() != b.dim() {
            return Err(Error::ShapeMismatch {
                op: "dist_pairwise",
                lhs: a.coords.shape().to_vec(),
                rhs: b.coords.shape().to_vec(),
            });
        }
        let (r, s, d) = (a.coords.shape()[0], b.coords.shape()[0], a.dim());
        let ae = a.coords.unsqueeze(1)?.broadcast_to(&[r, s, d])?;
        let be = b.coords.unsqueeze(0)?.broadcast_to(&[r, s, d])?;
        self.dist(
            &ManifoldPoint::new_unchecked(self, ae),
            &ManifoldPoint::new_unchecked(self, be),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{finite_difference_grad, GradTape};

    fn point(ball: &PoincareBall, xs: &[f64]) -> ManifoldPoint {
        ManifoldPoint::new(ball, Tensor::new(xs.to_vec(), &[xs.len()]).unwrap()).unwrap()
    }

    #[test]
    fn mobius_add_collinear_example() {
        let ball = PoincareBall::new(1.0).unwrap();
        let u = point(&ball, &[0.3, 0.0]);
        let v = point(&ball, &[0.4, 0.0]);
        let s = ball.mobius_add(&u, &v).unwrap();
        assert!((s.coords().data()[0] - 0.625).abs() < 1e-12);
        assert!(s.coords().data()[1].abs() < 1e-12);
    }

    #[test]
    fn mobius_identity_and_inverse() {
        let ball = PoincareBall::new(1.0).unwrap();
        let zero = point(&ball, &[0.0, 0.0, 0.0]);
        let v = point(&ball, &[0.2, -0.3, 0.1]);
        let s = ball.mobius_add(&zero, &v).unwrap();
        for (a, b) in s.coords().data().iter().zip(v.coords().data()) {
            assert!((a - b).abs() < 1e-12);
        }
        let neg = ManifoldPoint::new(&ball, v.coords().neg().unwrap()).unwrap();
        let z = ball.mobius_add(&neg, &v).unwrap();
        for a in z.coords().data() {
            assert!(a.abs() < 1e-12);
        }
    }

    #[test]
    fn distance_matches_closed_form_at_origin() {
        let ball = PoincareBall::new(1.0).unwrap();
        let u = point(&ball, &[0.0, 0.0]);
        let v = point(&ball, &[0.5, 0.0]);
        let d = ball.dist(&u, &v).unwrap().scalar_value().unwrap();
        assert!((d - 2.0 * 0.5f64.atanh()).abs() < 1e-9);
        assert!((d - 1.0986123).abs() < 1e-6);
    }

    #[test]
    fn radial_identity_dist_of_expmap0_is_norm() {
        for c in [0.1, 1.0, 2.0] {
            let ball = PoincareBall::new(c).unwrap();
            let v = TangentVector::at_origin(Tensor::new(vec![0.5, 0.0], &[2]).unwrap());
            let p = ball.expmap0(&v).unwrap();
            let d = ball.dist0(&p).unwrap().scalar_value().unwrap();
            assert!(
                (d - 0.5).abs() < 1e-9,
                "c={c}: dist(0, expmap0(v)) = {d}, expected 0.5"
            );
        }
    }

    #[test]
    fn exp_log_roundtrip_at_origin() {
        let ball = PoincareBall::new(1.5).unwrap();
        let v0 = vec![0.3, -0.2, 0.1, 0.05];
        let v = TangentVector::at_origin(Tensor::new(v0.clone(), &[4]).unwrap());
        let p = ball.expmap0(&v).unwrap();
        let back = ball.logmap0(&p).unwrap();
        for (a, b) in back.coords().data().iter().zip(&v0) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn translated_map_preserves_norm_as_distance() {
        let ball = PoincareBall::new(1.0).unwrap();
        let x = point(&ball, &[0.3, -0.1, 0.2]);
        let v0 = vec![0.25, 0.1, -0.3];
        let v = TangentVector::at_point(&x, Tensor::new(v0.clone(), &[3]).unwrap());
        let y = ball.expmap(&x, &v).unwrap();
        let d = ball.dist(&x, &y).unwrap().scalar_value().unwrap();
        let n = v0.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!((d - n).abs() < 1e-8, "dist {d} vs ‖v‖ {n}");
        let back = ball.logmap(&x, &y).unwrap();
        for (a, b) in back.coords().data().iter().zip(&v0) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn mobius_matvec_matches_composed_maps() {
        let ball = PoincareBall::new(1.0).unwrap();
        let x = point(&ball, &[0.3, 0.0]);
        let m = Tensor::new(vec![2.0, 0.0, 0.0, 2.0], &[2, 2]).unwrap();
        let got = ball.mobius_matvec(&m, &x).unwrap();
        let t = ball.logmap0(&x).unwrap();
        let doubled = TangentVector::at_origin(t.coords().affine(2.0, 0.0).unwrap());
        let want = ball.expmap0(&doubled).unwrap();
        for (a, b) in got.coords().data().iter().zip(want.coords().data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn project_rescales_outside_points_only() {
        let ball = PoincareBall::new(1.0).unwrap();
        let outside = Tensor::new(vec![3.0, 4.0], &[2]).unwrap();
        let p = ball.project(&outside).unwrap();
        let n = p.coords().data().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - (1.0 - PoincareBall::EPS_BOUNDARY)).abs() < 1e-12);
        let inside = Tensor::new(vec![0.3, 0.1], &[2]).unwrap();
        let q = ball.project(&inside).unwrap();
        for (a, b) in q.coords().data().iter().zip(inside.data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn clip_tangent_example() {
        let ball = PoincareBall::new(1.0).unwrap();
        let v = Tensor::new(vec![2.0, 0.0], &[2]).unwrap();
        let clipped = ball.clip_tangent(&v).unwrap();
        let expected = 2.0 / (2.0 + PoincareBall::CLIP_EPS);
        assert!((clipped.data()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn lambda_at_origin_is_two() {
        let ball = PoincareBall::new(0.7).unwrap();
        let zero = point(&ball, &[0.0, 0.0]);
        let l = ball.lambda(&zero).unwrap();
        assert!((l.data()[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn dist_backward_is_bitwise_the_analytic_gradient() {
        let ball = PoincareBall::new(1.3).unwrap();
        let u0 = vec![0.31, -0.12, 0.05];
        let v0 = vec![-0.2, 0.4, 0.1];
        let tape = GradTape::new();
        let u = ManifoldPoint::new(&ball, tape.leaf(u0.clone(), &[3], true).unwrap()).unwrap();
        let v = ManifoldPoint::new(&ball, tape.leaf(v0.clone(), &[3], true).unwrap()).unwrap();
        let d = ball.dist(&u, &v).unwrap();
        d.backward().unwrap();
        let analytic = ball.dist_grad(&u, &v).unwrap();
        assert_eq!(u.coords().grad().unwrap(), analytic.grad_u.coords().to_vec());
        assert_eq!(v.coords().grad().unwrap(), analytic.grad_v.coords().to_vec());
        assert!(!analytic.degenerate[0]);
    }

    #[test]
    fn dist_gradient_matches_finite_differences_including_curvature() {
        for c in [0.1, 1.0, 2.0] {
            let ball = PoincareBall::new(c).unwrap();
            let scale = 0.8 / c.sqrt();
            let u0 = vec![0.31 * scale, -0.12 * scale];
            let v0 = vec![-0.25 * scale, 0.33 * scale];
            let analytic = ball
                .dist_grad(
                    &point(&ball, &u0),
                    &point(&ball, &v0),
                )
                .unwrap();
            let fd = finite_difference_grad(
                &mut |xs| {
                    let b = PoincareBall::new(c)?;
                    let u = ManifoldPoint::new(&b, Tensor::new(xs.to_vec(), &[2])?)?;
                    let v = ManifoldPoint::new(&b, Tensor::new(v0.clone(), &[2])?)?;
                    b.dist(&u, &v)?.scalar_value()
                },
                &u0,
                1e-7,
            )
            .unwrap();
            for (a, f) in analytic.grad_u.coords().data().iter().zip(&fd) {
                assert!((a - f).abs() / f.abs().max(1e-9) < 1e-6, "c={c}: {a} vs {f}");
            }
            // Curvature partial through the tape (c = exp(log_c) leaf).
            let tape = GradTape::new();
            let log_c = tape.leaf(vec![c.ln()], &[], true).unwrap();
            let bl = PoincareBall::from_log_c(&log_c).unwrap();
            let u = ManifoldPoint::new(&bl, Tensor::new(u0.clone(), &[2]).unwrap()).unwrap();
            let v = ManifoldPoint::new(&bl, Tensor::new(v0.clone(), &[2]).unwrap()).unwrap();
            bl.dist(&u, &v).unwrap().backward().unwrap();
            let g_logc = log_c.grad().unwrap()[0];
            let fd_logc = finite_difference_grad(
                &mut |xs| {
                    let b = PoincareBall::new(xs[0].exp())?;
                    let u = ManifoldPoint::new(&b, Tensor::new(u0.clone(), &[2])?)?;
                    let v = ManifoldPoint::new(&b, Tensor::new(v0.clone(), &[2])?)?;
                    b.dist(&u, &v)?.scalar_value()
                },
                &[c.ln()],
                1e-6,
            )
            .unwrap()[0];
            assert!(
                (g_logc - fd_logc).abs() / fd_logc.abs().max(1e-9) < 1e-5,
                "c={c}: ∂dist/∂log_c {g_logc} vs fd {fd_logc}"
            );
        }
    }

    #[test]
    fn coincident_pair_flagged_with_zero_subgradient() {
        let ball = PoincareBall::new(1.0).unwrap();
        let u = point(&ball, &[0.2, 0.3]);
        let g = ball.dist_grad(&u, &u.clone()).unwrap();
        assert!(g.degenerate[0]);
        assert_eq!(g.grad_u.coords().to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn points_outside_the_ball_are_rejected() {
        let ball = PoincareBall::new(1.0).unwrap();
        let res = ManifoldPoint::new(&ball, Tensor::new(vec![1.2, 0.0], &[2]).unwrap());
        assert!(matches!(res, Err(Error::Domain { .. })));
    }

    #[test]
    fn balls_with_different_curvature_do_not_mix() {
        let b1 = PoincareBall::new(1.0).unwrap();
        let b2 = PoincareBall::new(2.0).unwrap();
        let u = point(&b1, &[0.1, 0.0]);
        let v = point(&b2, &[0.2, 0.0]);
        assert!(matches!(
            b1.mobius_add(&u, &v),
            Err(Error::BallMismatch { .. })
        ));
    }

    #[test]
    fn near_origin_distances_are_euclidean_in_tangent_coordinates() {
        let ball = PoincareBall::new(1e-3).unwrap();
        let a0 = vec![0.07, -0.03];
        let b0 = vec![-0.02, 0.05];
        let pa = ball
            .expmap0(&TangentVector::at_origin(Tensor::new(a0.clone(), &[2]).unwrap()))
            .unwrap();
        let pb = ball
            .expmap0(&TangentVector::at_origin(Tensor::new(b0.clone(), &[2]).unwrap()))
            .unwrap();
        let d = ball.dist(&pa, &pb).unwrap().scalar_value().unwrap();
        let e = a0
            .iter()
            .zip(&b0)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        assert!((d - e).abs() / e < 1e-2, "hyperbolic {d} vs euclidean {e}");
    }

    #[test]
    fn pairwise_distances_match_rowwise() {
        let ball = PoincareBall::new(1.0).unwrap();
        let a = ManifoldPoint::new(
            &ball,
            Tensor::new(vec![0.1, 0.0, 0.0, 0.2], &[2, 2]).unwrap(),
        )
        .unwrap();
        let b = ManifoldPoint::new(
            &ball,
            Tensor::new(vec![0.3, 0.1, -0.2, 0.0, 0.05, 0.05], &[3, 2]).unwrap(),
        )
        .unwrap();
        let m = ball.dist_pairwise(&a, &b).unwrap();
        assert_eq!(m.shape(), &[2, 3]);
        for i in 0..2 {
            for j in 0..3 {
                let u = ManifoldPoint::new(
                    &ball,
                    a.coords().narrow(0, i, 1).unwrap().reshape(&[2]).unwrap(),
                )
                .unwrap();
                let v = ManifoldPoint::new(
                    &ball,
                    b.coords().narrow(0, j, 1).unwrap().reshape(&[2]).unwrap(),
                )
                .unwrap();
                let want = ball.dist(&u, &v).unwrap().scalar_value().unwrap();
                assert!((m.at(&[i, j]) - want).abs() < 1e-12);
            }
        }
    }
}
