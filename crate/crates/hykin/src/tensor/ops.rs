//! Math operations: broadcasting elementwise ops, matrix multiply, axis
//! reductions, masked softmax, batch normalization, and the finite-difference
//! gradient oracle.
//!
//! Elementwise binary ops follow standard right-aligned broadcasting. The
//! broadcast engine collapses contiguous axes into runs so the hot loops are
//! tight even on rank-4/5 tensors, and backward accumulates straight into
//! input-shaped buffers (the strided accumulation reduces over broadcast axes
//! for free).

use std::rc::Rc;

use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};

use crate::error::{Error, Result};

use super::{make_result, numel, strides_of, Tensor};

// ===== broadcasting machinery =====

/// Broadcast two shapes (right-aligned; each axis must match or be 1).
pub(crate) fn broadcast_shapes(
    op: &'static str,
    a: &[usize],
    b: &[usize],
) -> Result<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0usize; rank];
    for i in 0..rank {
        let ad = if i >= rank - a.len() { a[i - (rank - a.len())] } else { 1 };
        let bd = if i >= rank - b.len() { b[i - (rank - b.len())] } else { 1 };
        if ad != bd && ad != 1 && bd != 1 {
            return Err(Error::ShapeMismatch {
                op,
                lhs: a.to_vec(),
                rhs: b.to_vec(),
            });
        }
        out[i] = ad.max(bd);
    }
    Ok(out)
}

/// Per-axis loop description after collapsing: (length, stride_a, stride_b).
/// Broadcast axes carry stride 0. The last entry is the innermost run.
fn plan2(out_shape: &[usize], a_shape: &[usize], b_shape: &[usize]) -> Vec<(usize, usize, usize)> {
    let rank = out_shape.len();
    let pad_strides = |shape: &[usize]| -> Vec<usize> {
        let s = strides_of(shape);
        let mut out = vec![0usize; rank];
        let off = rank - shape.len();
        for i in 0..shape.len() {
            out[off + i] = if shape[i] == out_shape[off + i] { s[i] } else { 0 };
        }
        out
    };
    let sa = pad_strides(a_shape);
    let sb = pad_strides(b_shape);
    let mut dims: Vec<(usize, usize, usize)> = Vec::with_capacity(rank.max(1));
    for i in (0..rank).rev() {
        if out_shape[i] == 1 {
            continue;
        }
        match dims.last_mut() {
            // Merge axis i into the inner run when both operands are
            // contiguous across the boundary (0-stride counts as contiguous).
            Some((len, ia, ib)) if sa[i] == *len * *ia && sb[i] == *len * *ib => {
                *len *= out_shape[i];
            }
            _ => dims.push((out_shape[i], sa[i], sb[i])),
        }
    }
    dims.reverse();
    if dims.is_empty() {
        dims.push((1, 0, 0));
    }
    dims
}

/// Iterate the collapsed loops, invoking `f` once per innermost run with the
/// operand offsets, the contiguous output offset, and the run description.
fn for_each_run2(
    dims: &[(usize, usize, usize)],
    mut f: impl FnMut(usize, usize, usize, usize, usize, usize),
) {
    let (inner_len, isa, isb) = *dims.last().unwrap();
    let outer = &dims[..dims.len() - 1];
    let mut counters = vec![0usize; outer.len()];
    let (mut a_off, mut b_off, mut out_off) = (0usize, 0usize, 0usize);
    loop {
        f(a_off, b_off, out_off, inner_len, isa, isb);
        out_off += inner_len;
        let mut d = outer.len();
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            counters[d] += 1;
            a_off += outer[d].1;
            b_off += outer[d].2;
            if counters[d] < outer[d].0 {
                break;
            }
            a_off -= outer[d].0 * outer[d].1;
            b_off -= outer[d].0 * outer[d].2;
            counters[d] = 0;
        }
    }
}

/// Shared implementation of broadcasting binary ops. `f` computes the value,
/// `dfa`/`dfb` the partial derivatives as functions of the operand values.
pub(crate) fn bin_op(
    name: &'static str,
    a: &Tensor,
    b: &Tensor,
    f: fn(f64, f64) -> f64,
    dfa: fn(f64, f64) -> f64,
    dfb: fn(f64, f64) -> f64,
) -> Result<Tensor> {
    let out_shape = broadcast_shapes(name, &a.shape, &b.shape)?;
    let dims = plan2(&out_shape, &a.shape, &b.shape);
    let mut data = vec![0.0; numel(&out_shape)];
    {
        let (ad, bd) = (a.data(), b.data());
        for_each_run2(&dims, |ao, bo, oo, len, sa, sb| {
            let out = &mut data[oo..oo + len];
            match (sa, sb) {
                (1, 1) => {
                    for (o, (x, y)) in out
                        .iter_mut()
                        .zip(ad[ao..ao + len].iter().zip(&bd[bo..bo + len]))
                    {
                        *o = f(*x, *y);
                    }
                }
                (1, 0) => {
                    let y = bd[bo];
                    for (o, x) in out.iter_mut().zip(&ad[ao..ao + len]) {
                        *o = f(*x, y);
                    }
                }
                (0, 1) => {
                    let x = ad[ao];
                    for (o, y) in out.iter_mut().zip(&bd[bo..bo + len]) {
                        *o = f(x, *y);
                    }
                }
                _ => {
                    let (mut ai, mut bi) = (ao, bo);
                    for o in out.iter_mut() {
                        *o = f(ad[ai], bd[bi]);
                        ai += sa;
                        bi += sb;
                    }
                }
            }
        });
    }
    let a_data = a.data_rc();
    let b_data = b.data_rc();
    let a_shape = a.shape.clone();
    let b_shape = b.shape.clone();
    let out_shape_cl = out_shape.clone();
    make_result(name, &[a, b], data, out_shape, move || {
        Box::new(move |g, sink| {
            let dims = plan2(&out_shape_cl, &a_shape, &b_shape);
            for input in 0..2 {
                if !sink.needs(input) {
                    continue;
                }
                let size = if input == 0 {
                    numel(&a_shape)
                } else {
                    numel(&b_shape)
                };
                let mut acc = vec![0.0; size];
                for_each_run2(&dims, |ao, bo, oo, len, sa, sb| {
                    let gs = &g[oo..oo + len];
                    let (mut ai, mut bi) = (ao, bo);
                    for gi in gs {
                        let d = if input == 0 {
                            dfa(a_data[ai], b_data[bi])
                        } else {
                            dfb(a_data[ai], b_data[bi])
                        };
                        let target = if input == 0 { ai } else { bi };
                        acc[target] += gi * d;
                        ai += sa;
                        bi += sb;
                    }
                });
                sink.add(input, acc);
            }
        })
    })
}

/// Shared implementation of elementwise unary ops. `df` receives the input
/// and output values.
pub(crate) fn unary_op(
    name: &'static str,
    x: &Tensor,
    f: impl Fn(f64) -> f64,
    df: fn(f64, f64) -> f64,
) -> Result<Tensor> {
    let data: Vec<f64> = x.data().iter().map(|&v| f(v)).collect();
    let x_data = x.data_rc();
    let y_data = Rc::new(data.clone());
    make_result(name, &[x], data, x.shape.clone(), move || {
        Box::new(move |g, sink| {
            if !sink.needs(0) {
                return;
            }
            let contrib: Vec<f64> = g
                .iter()
                .zip(x_data.iter().zip(y_data.iter()))
                .map(|(gi, (&xi, &yi))| gi * df(xi, yi))
                .collect();
            sink.add(0, contrib);
        })
    })
}

fn check_finite(op: &'static str, data: &[f64]) -> Result<()> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { op });
    }
    Ok(())
}

/// Magnitude clamp applied inside `artanh` (keeps the argument strictly
/// inside the open unit interval).
pub(crate) const ARTANH_GUARD: f64 = 1.0 - 1e-12;

// ===== public elementwise API =====

impl Tensor {
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        bin_op("add", self, other, |a, b| a + b, |_, _| 1.0, |_, _| 1.0)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        bin_op("sub", self, other, |a, b| a - b, |_, _| 1.0, |_, _| -1.0)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        bin_op("mul", self, other, |a, b| a * b, |_, b| b, |a, _| a)
    }

    /// Elementwise division. Divisors must be bounded away from zero.
    pub fn div(&self, other: &Tensor) -> Result<Tensor> {
        if let Some(&bad) = other.data().iter().find(|v| v.abs() < 1e-300) {
            return Err(Error::Domain {
                op: "div",
                value: bad,
            });
        }
        bin_op(
            "div",
            self,
            other,
            |a, b| a / b,
            |_, b| 1.0 / b,
            |a, b| -a / (b * b),
        )
    }

    /// `mul * x + add` with scalar coefficients.
    pub fn affine(&self, mul: f64, add: f64) -> Result<Tensor> {
        let data: Vec<f64> = self.data().iter().map(|&v| mul * v + add).collect();
        make_result("affine", &[self], data, self.shape.clone(), move || {
            Box::new(move |g, sink| {
                if sink.needs(0) {
                    sink.add(0, g.iter().map(|gi| gi * mul).collect());
                }
            })
        })
    }

    pub fn neg(&self) -> Result<Tensor> {
        self.affine(-1.0, 0.0)
    }

    pub fn tanh(&self) -> Result<Tensor> {
        unary_op("tanh", self, f64::tanh, |_, y| 1.0 - y * y)
    }

    /// Inverse hyperbolic tangent. Inputs must lie in (−1, 1); values inside
    /// the interval are additionally clamped to magnitude ≤ 1 − 1e−12 before
    /// evaluation, and the derivative is taken at the clamped argument.
    pub fn artanh(&self) -> Result<Tensor> {
        if let Some(&bad) = self.data().iter().find(|v| v.abs() >= 1.0) {
            return Err(Error::Domain {
                op: "artanh",
                value: bad,
            });
        }
        unary_op(
            "artanh",
            self,
            |v| v.clamp(-ARTANH_GUARD, ARTANH_GUARD).atanh(),
            |x, _| {
                let xc = x.clamp(-ARTANH_GUARD, ARTANH_GUARD);
                1.0 / (1.0 - xc * xc)
            },
        )
    }

    pub fn exp(&self) -> Result<Tensor> {
        let out = unary_op("exp", self, f64::exp, |_, y| y)?;
        check_finite("exp", out.data())?;
        Ok(out)
    }

    /// Natural logarithm; inputs must be strictly positive.
    pub fn log(&self) -> Result<Tensor> {
        if let Some(&bad) = self.data().iter().find(|&&v| v <= 0.0) {
            return Err(Error::Domain {
                op: "log",
                value: bad,
            });
        }
        unary_op("log", self, f64::ln, |x, _| 1.0 / x)
    }

    pub fn sigmoid(&self) -> Result<Tensor> {
        unary_op(
            "sigmoid",
            self,
            |v| {
                if v >= 0.0 {
                    1.0 / (1.0 + (-v).exp())
                } else {
                    let e = v.exp();
                    e / (1.0 + e)
                }
            },
            |_, y| y * (1.0 - y),
        )
    }

    pub fn relu(&self) -> Result<Tensor> {
        unary_op(
            "relu",
            self,
            |v| v.max(0.0),
            |x, _| if x > 0.0 { 1.0 } else { 0.0 },
        )
    }

    /// Square root; inputs must be non-negative. The derivative is guarded at
    /// zero (library code keeps arguments bounded away from it).
    pub fn sqrt(&self) -> Result<Tensor> {
        if let Some(&bad) = self.data().iter().find(|&&v| v < 0.0) {
            return Err(Error::Domain {
                op: "sqrt",
                value: bad,
            });
        }
        unary_op("sqrt", self, f64::sqrt, |_, y| 0.5 / y.max(1e-150))
    }

    /// Elementwise `max(x, t)`.
    pub fn clamp_min(&self, t: f64) -> Result<Tensor> {
        unary_op(
            "clamp_min",
            self,
            move |v| v.max(t),
            move |x, y| if x >= y { 1.0 } else { 0.0 },
        )
    }

    /// Elementwise `min(x, t)`.
    pub fn clamp_max(&self, t: f64) -> Result<Tensor> {
        unary_op(
            "clamp_max",
            self,
            move |v| v.min(t),
            move |x, y| if x <= y { 1.0 } else { 0.0 },
        )
    }
}

// ===== matrix multiply =====

impl Tensor {
    /// 2-D matrix product `(m,k) × (k,n) → (m,n)`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.rank() != 2 || other.rank() != 2 {
            return Err(Error::InvalidShape {
                op: "matmul",
                shape: if self.rank() != 2 {
                    self.shape.clone()
                } else {
                    other.shape.clone()
                },
                msg: "matmul expects rank-2 operands".into(),
            });
        }
        let (m, k) = (self.shape[0], self.shape[1]);
        let (k2, n) = (other.shape[0], other.shape[1]);
        if k != k2 {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        let mut data = vec![0.0; m * n];
        {
            let a = ArrayView2::from_shape((m, k), self.data()).expect("validated");
            let b = ArrayView2::from_shape((k, n), other.data()).expect("validated");
            let mut c = ArrayViewMut2::from_shape((m, n), &mut data).expect("validated");
            general_mat_mul(1.0, &a, &b, 0.0, &mut c);
        }
        let a_data = self.data_rc();
        let b_data = other.data_rc();
        make_result("matmul", &[self, other], data, vec![m, n], move || {
            Box::new(move |g, sink| {
                let gv = ArrayView2::from_shape((m, n), g).expect("validated");
                let a = ArrayView2::from_shape((m, k), &a_data[..]).expect("validated");
                let b = ArrayView2::from_shape((k, n), &b_data[..]).expect("validated");
                if sink.needs(0) {
                    let mut ga = vec![0.0; m * k];
                    let mut gav = ArrayViewMut2::from_shape((m, k), &mut ga).expect("validated");
                    general_mat_mul(1.0, &gv, &b.t(), 0.0, &mut gav);
                    sink.add(0, ga);
                }
                if sink.needs(1) {
                    let mut gb = vec![0.0; k * n];
                    let mut gbv = ArrayViewMut2::from_shape((k, n), &mut gb).expect("validated");
                    general_mat_mul(1.0, &a.t(), &gv, 0.0, &mut gbv);
                    sink.add(1, gb);
                }
            })
        })
    }
}

// ===== reductions =====

#[derive(Clone, Copy, PartialEq, Eq)]
enum Reduce {
    Sum,
    Mean,
    Max,
}

/// Decompose a shape around `axis` into (outer, mid, inner) extents.
fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer: usize = shape[..axis].iter().product();
    let mid = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    (outer, mid, inner)
}

fn reduced_shape(shape: &[usize], axis: Option<usize>, keepdim: bool) -> Vec<usize> {
    match axis {
        None => {
            if keepdim {
                vec![1; shape.len()]
            } else {
                vec![]
            }
        }
        Some(ax) => {
            let mut s = shape.to_vec();
            if keepdim {
                s[ax] = 1;
            } else {
                s.remove(ax);
            }
            s
        }
    }
}

impl Tensor {
    fn reduce(&self, kind: Reduce, axis: Option<usize>, keepdim: bool) -> Result<Tensor> {
        let name: &'static str = match kind {
            Reduce::Sum => "sum",
            Reduce::Mean => "mean",
            Reduce::Max => "max",
        };
        if let Some(ax) = axis {
            if ax >= self.rank() {
                return Err(Error::InvalidShape {
                    op: name,
                    shape: self.shape.clone(),
                    msg: format!("axis {ax} out of range"),
                });
            }
        }
        let (outer, mid, inner) = match axis {
            None => (1, self.numel(), 1),
            Some(ax) => axis_split(&self.shape, ax),
        };
        let out_shape = reduced_shape(&self.shape, axis, keepdim);
        let mut data = vec![0.0; outer * inner];
        let mut argmax: Vec<usize> = Vec::new();
        let xd = self.data();
        match kind {
            Reduce::Sum | Reduce::Mean => {
                for o in 0..outer {
                    for j in 0..mid {
                        let base = (o * mid + j) * inner;
                        let out = &mut data[o * inner..(o + 1) * inner];
                        for (ov, &xv) in out.iter_mut().zip(&xd[base..base + inner]) {
                            *ov += xv;
                        }
                    }
                }
                if kind == Reduce::Mean {
                    let inv = 1.0 / mid as f64;
                    for v in &mut data {
                        *v *= inv;
                    }
                }
            }
            Reduce::Max => {
                argmax = vec![0; outer * inner];
                for o in 0..outer {
                    for i in 0..inner {
                        let mut best = xd[o * mid * inner + i];
                        let mut best_j = 0;
                        for j in 1..mid {
                            let v = xd[(o * mid + j) * inner + i];
                            // Strict comparison: ties resolve to the first.
                            if v > best {
                                best = v;
                                best_j = j;
                            }
                        }
                        data[o * inner + i] = best;
                        argmax[o * inner + i] = best_j;
                    }
                }
            }
        }
        let in_size = self.numel();
        make_result(name, &[self], data, out_shape, move || {
            Box::new(move |g, sink| {
                if !sink.needs(0) {
                    return;
                }
                let mut acc = vec![0.0; in_size];
                match kind {
                    Reduce::Sum | Reduce::Mean => {
                        let scale = if kind == Reduce::Mean {
                            1.0 / mid as f64
                        } else {
                            1.0
                        };
                        for o in 0..outer {
                            let gs = &g[o * inner..(o + 1) * inner];
                            for j in 0..mid {
                                let base = (o * mid + j) * inner;
                                for (av, &gv) in acc[base..base + inner].iter_mut().zip(gs) {
                                    *av += gv * scale;
                                }
                            }
                        }
                    }
                    Reduce::Max => {
                        for o in 0..outer {
                            for i in 0..inner {
                                let j = argmax[o * inner + i];
                                acc[(o * mid + j) * inner + i] += g[o * inner + i];
                            }
                        }
                    }
                }
                sink.add(0, acc);
            })
        })
    }

    /// Sum over one axis (or all, with `axis = None`).
    pub fn sum(&self, axis: Option<usize>, keepdim: bool) -> Result<Tensor> {
        self.reduce(Reduce::Sum, axis, keepdim)
    }

    /// Mean over one axis (or all, with `axis = None`).
    pub fn mean(&self, axis: Option<usize>, keepdim: bool) -> Result<Tensor> {
        self.reduce(Reduce::Mean, axis, keepdim)
    }

    /// Maximum over one axis; gradient routes to the first argmax of each lane.
    pub fn max(&self, axis: Option<usize>, keepdim: bool) -> Result<Tensor> {
        self.reduce(Reduce::Max, axis, keepdim)
    }

    /// Scalar sum of all elements.
    pub fn sum_all(&self) -> Result<Tensor> {
        self.sum(None, false)
    }

    /// Scalar mean of all elements.
    pub fn mean_all(&self) -> Result<Tensor> {
        self.mean(None, false)
    }
}

// ===== softmax =====

impl Tensor {
    /// Numerically stabilized softmax along `axis`, with an optional mask.
    ///
    /// Mask entries > 0.5 are kept; masked entries come out exactly 0 and
    /// receive no gradient. The mask must broadcast to this tensor's shape
    /// and is not differentiated through. A lane whose mask excludes every
    /// entry is an error identifying the lane.
    pub fn softmax(&self, axis: usize, mask: Option<&Tensor>) -> Result<Tensor> {
        if axis >= self.rank() {
            return Err(Error::InvalidShape {
                op: "softmax",
                shape: self.shape.clone(),
                msg: format!("axis {axis} out of range"),
            });
        }
        let keep: Option<Vec<bool>> = match mask {
            None => None,
            Some(m) => {
                let full = m.broadcast_to(&self.shape)?;
                Some(full.data().iter().map(|&v| v > 0.5).collect())
            }
        };
        let (outer, mid, inner) = axis_split(&self.shape, axis);
        let xd = self.data();
        let mut data = vec![0.0; self.numel()];
        for o in 0..outer {
            for i in 0..inner {
                let idx = |j: usize| (o * mid + j) * inner + i;
                let kept = |j: usize| keep.as_ref().map_or(true, |k| k[idx(j)]);
                let mut m = f64::NEG_INFINITY;
                for j in 0..mid {
                    if kept(j) {
                        m = m.max(xd[idx(j)]);
                    }
                }
                if m == f64::NEG_INFINITY {
                    return Err(Error::FullyMaskedLane {
                        lane: lane_index(&self.shape, axis, o, i),
                    });
                }
                let mut s = 0.0;
                for j in 0..mid {
                    let e = if kept(j) { (xd[idx(j)] - m).exp() } else { 0.0 };
                    data[idx(j)] = e;
                    s += e;
                }
                let inv = 1.0 / s;
                for j in 0..mid {
                    data[idx(j)] *= inv;
                }
            }
        }
        let y = Rc::new(data.clone());
        make_result("softmax", &[self], data, self.shape.clone(), move || {
            Box::new(move |g, sink| {
                if !sink.needs(0) {
                    return;
                }
                let mut acc = vec![0.0; y.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let idx = |j: usize| (o * mid + j) * inner + i;
                        let mut dot = 0.0;
                        for j in 0..mid {
                            dot += y[idx(j)] * g[idx(j)];
                        }
                        for j in 0..mid {
                            acc[idx(j)] = y[idx(j)] * (g[idx(j)] - dot);
                        }
                    }
                }
                sink.add(0, acc);
            })
        })
    }
}

/// Multi-index of a softmax lane (the softmax axis removed), recovered from
/// the (outer, inner) decomposition.
fn lane_index(shape: &[usize], axis: usize, outer: usize, inner: usize) -> Vec<usize> {
    let mut lane = Vec::with_capacity(shape.len().saturating_sub(1));
    let mut o = outer;
    let outer_dims = &shape[..axis];
    let mut rev = Vec::new();
    for &d in outer_dims.iter().rev() {
        rev.push(o % d);
        o /= d;
    }
    lane.extend(rev.into_iter().rev());
    let mut idx = inner;
    let inner_dims = &shape[axis + 1..];
    let mut rev = Vec::new();
    for &d in inner_dims.iter().rev() {
        rev.push(idx % d);
        idx /= d;
    }
    lane.extend(rev.into_iter().rev());
    lane
}

// ===== batch normalization =====

impl Tensor {
    /// Batch normalization over all axes except axis 1 (channels), with
    /// per-call batch statistics and learnable `gamma`/`beta` of shape `[C]`.
    pub fn batch_norm(&self, gamma: &Tensor, beta: &Tensor, eps: f64) -> Result<Tensor> {
        if self.rank() < 2 {
            return Err(Error::InvalidShape {
                op: "batch_norm",
                shape: self.shape.clone(),
                msg: "expected rank ≥ 2 with channels on axis 1".into(),
            });
        }
        let c = self.shape[1];
        if gamma.shape() != [c] || beta.shape() != [c] {
            return Err(Error::ShapeMismatch {
                op: "batch_norm",
                lhs: vec![c],
                rhs: if gamma.shape() != [c] {
                    gamma.shape().to_vec()
                } else {
                    beta.shape().to_vec()
                },
            });
        }
        let n = self.shape[0];
        let inner: usize = self.shape[2..].iter().product();
        let m = (n * inner) as f64;
        let xd = self.data();
        let mut mean = vec![0.0; c];
        let mut var = vec![0.0; c];
        for b in 0..n {
            for ch in 0..c {
                let base = (b * c + ch) * inner;
                let mu = &mut mean[ch];
                for &v in &xd[base..base + inner] {
                    *mu += v;
                }
            }
        }
        for mu in &mut mean {
            *mu /= m;
        }
        for b in 0..n {
            for ch in 0..c {
                let base = (b * c + ch) * inner;
                let mu = mean[ch];
                let vs = &mut var[ch];
                for &v in &xd[base..base + inner] {
                    let d = v - mu;
                    *vs += d * d;
                }
            }
        }
        let invstd: Vec<f64> = var.iter().map(|&v| 1.0 / (v / m + eps).sqrt()).collect();
        let mut xhat = vec![0.0; self.numel()];
        let mut data = vec![0.0; self.numel()];
        let (gd, bd) = (gamma.data(), beta.data());
        for b in 0..n {
            for ch in 0..c {
                let base = (b * c + ch) * inner;
                let (mu, is, ga, be) = (mean[ch], invstd[ch], gd[ch], bd[ch]);
                for k in 0..inner {
                    let xh = (xd[base + k] - mu) * is;
                    xhat[base + k] = xh;
                    data[base + k] = ga * xh + be;
                }
            }
        }
        let xhat = Rc::new(xhat);
        let gamma_data = gamma.data_rc();
        make_result(
            "batch_norm",
            &[self, gamma, beta],
            data,
            self.shape.clone(),
            move || {
                Box::new(move |g, sink| {
                    // Per channel: sums of g and g·x̂ feed both the parameter
                    // gradients and the input gradient.
                    let mut sum_g = vec![0.0; c];
                    let mut sum_gx = vec![0.0; c];
                    for b in 0..n {
                        for ch in 0..c {
                            let base = (b * c + ch) * inner;
                            let (mut sg, mut sgx) = (0.0, 0.0);
                            for k in 0..inner {
                                sg += g[base + k];
                                sgx += g[base + k] * xhat[base + k];
                            }
                            sum_g[ch] += sg;
                            sum_gx[ch] += sgx;
                        }
                    }
                    if sink.needs(1) {
                        sink.add(1, sum_gx.clone());
                    }
                    if sink.needs(2) {
                        sink.add(2, sum_g.clone());
                    }
                    if sink.needs(0) {
                        let mut acc = vec![0.0; xhat.len()];
                        for b in 0..n {
                            for ch in 0..c {
                                let base = (b * c + ch) * inner;
                                let coef = gamma_data[ch] * invstd[ch];
                                let (mg, mgx) = (sum_g[ch] / m, sum_gx[ch] / m);
                                for k in 0..inner {
                                    acc[base + k] =
                                        coef * (g[base + k] - mg - xhat[base + k] * mgx);
                                }
                            }
                        }
                        sink.add(0, acc);
                    }
                })
            },
        )
    }
}

// ===== finite differences =====

/// Central-difference gradient of a scalar function: the oracle analytic
/// gradients are checked against.
pub fn finite_difference_grad(
    f: &mut dyn FnMut(&[f64]) -> Result<f64>,
    x: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; x.len()];
    let mut xs = x.to_vec();
    for i in 0..x.len() {
        let orig = xs[i];
        xs[i] = orig + h;
        let fp = f(&xs)?;
        xs[i] = orig - h;
        let fm = f(&xs)?;
        xs[i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    Ok(grad)
}
