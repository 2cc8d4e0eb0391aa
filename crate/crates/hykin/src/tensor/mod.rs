//! Dense `f64` tensors with reverse-mode automatic differentiation.
//!
//! Tensors are immutable row-major values. Differentiation uses an explicit
//! [`GradTape`]: leaves are registered on a tape, every operation whose inputs
//! carry that tape records one node, and [`Tensor::backward`] replays the
//! nodes in reverse execution order exactly once, accumulating gradients into
//! the tape. There is no global state — a tape is created per training step,
//! travels inside the tensors derived from its leaves, and is dropped with
//! them.
//!
//! Operations come in two layers:
//!
//! * structural ops (reshape, permute, concat, slicing, broadcasting) live in
//!   this module;
//! * math ops (elementwise, matmul, reductions, softmax, batch norm) live in
//!   [`ops`] and are exposed as inherent methods.
//!
//! All public operations validate shapes and domains up front and return
//! [`crate::Result`]; values are checked to stay finite wherever the math can
//! produce NaN/inf from finite inputs. [`finite_difference_grad`] provides the
//! central-difference oracle the gradient-checking suite is built on.

use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

use crate::error::{Error, Result};

pub mod ops;

pub use ops::finite_difference_grad;

// ===== shape helpers =====

/// Number of elements implied by a shape (empty shape = scalar = 1).
pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Row-major strides for a shape.
pub(crate) fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

fn check_shape(op: &'static str, shape: &[usize]) -> Result<()> {
    if shape.iter().any(|&d| d == 0) {
        return Err(Error::InvalidShape {
            op,
            shape: shape.to_vec(),
            msg: "zero-sized dimensions are not supported".into(),
        });
    }
    Ok(())
}

// ===== gradient tape =====

/// Backward function of one recorded node: receives the output gradient and a
/// sink that accumulates per-input gradient contributions.
pub(crate) type BackFn = Box<dyn Fn(&[f64], &mut Sink<'_>)>;

struct Node {
    /// Value id of the node's output.
    out: usize,
    /// Value ids of the inputs (None for constants off the tape).
    in_vids: Vec<Option<usize>>,
    backward: BackFn,
}

#[derive(Default)]
struct TapeInner {
    nodes: Vec<Node>,
    /// Accumulated gradients per value id. Leaf gradients persist across
    /// backward calls; intermediate gradients are consumed during replay.
    grads: Vec<Option<Vec<f64>>>,
    /// Element count per value id, for validation.
    sizes: Vec<usize>,
}

/// Accumulates gradient contributions into the tape during backward replay.
pub(crate) struct Sink<'a> {
    in_vids: &'a [Option<usize>],
    grads: &'a mut [Option<Vec<f64>>],
    sizes: &'a [usize],
}

impl Sink<'_> {
    /// Whether input `i` is on the tape (i.e. a gradient is wanted).
    pub(crate) fn needs(&self, i: usize) -> bool {
        self.in_vids[i].is_some()
    }

    /// Add a full-shape gradient contribution for input `i`. The first
    /// contribution is moved in without copying.
    pub(crate) fn add(&mut self, i: usize, contrib: Vec<f64>) {
        let Some(vid) = self.in_vids[i] else { return };
        debug_assert_eq!(contrib.len(), self.sizes[vid], "gradient size mismatch");
        match &mut self.grads[vid] {
            Some(g) => {
                for (gi, ci) in g.iter_mut().zip(&contrib) {
                    *gi += ci;
                }
            }
            slot @ None => *slot = Some(contrib),
        }
    }
}

/// Explicit, scoped Wengert tape. Cheap to clone (shared handle).
#[derive(Clone, Default)]
pub struct GradTape {
    inner: Rc<RefCell<TapeInner>>,
}

impl GradTape {
    /// Create an empty tape.
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a leaf tensor. With `requires_grad` the leaf participates in
    /// differentiation; otherwise this is equivalent to [`Tensor::new`].
    pub fn leaf(&self, data: Vec<f64>, shape: &[usize], requires_grad: bool) -> Result<Tensor> {
        check_shape("leaf", shape)?;
        if data.len() != numel(shape) {
            return Err(Error::InvalidShape {
                op: "leaf",
                shape: shape.to_vec(),
                msg: format!("data length {} does not match", data.len()),
            });
        }
        let tape = if requires_grad {
            let vid = self.alloc(data.len());
            Some((self.clone(), vid))
        } else {
            None
        };
        Ok(Tensor {
            data: Rc::new(data),
            shape: shape.to_vec(),
            tape,
        })
    }

    /// Clear all accumulated gradients (leaves included).
    pub fn zero_grads(&self) {
        for g in self.inner.borrow_mut().grads.iter_mut() {
            *g = None;
        }
    }

    /// Number of recorded operation nodes.
    pub fn node_count(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    fn alloc(&self, size: usize) -> usize {
        let mut inner = self.inner.borrow_mut();
        inner.grads.push(None);
        inner.sizes.push(size);
        inner.sizes.len() - 1
    }

    fn same_tape(&self, other: &GradTape) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }
}

// ===== tensor =====

/// Immutable dense row-major `f64` tensor, optionally attached to a tape.
#[derive(Clone)]
pub struct Tensor {
    data: Rc<Vec<f64>>,
    shape: Vec<usize>,
    tape: Option<(GradTape, usize)>,
}

impl Tensor {
    /// Constant tensor from data and shape.
    pub fn new(data: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        check_shape("new", shape)?;
        if data.len() != numel(shape) {
            return Err(Error::InvalidShape {
                op: "new",
                shape: shape.to_vec(),
                msg: format!("data length {} does not match", data.len()),
            });
        }
        Ok(Tensor {
            data: Rc::new(data),
            shape: shape.to_vec(),
            tape: None,
        })
    }

    /// Scalar constant (rank 0).
    pub fn scalar(v: f64) -> Tensor {
        Tensor {
            data: Rc::new(vec![v]),
            shape: vec![],
            tape: None,
        }
    }

    /// All-zero constant.
    pub fn zeros(shape: &[usize]) -> Result<Tensor> {
        Tensor::new(vec![0.0; numel(shape)], shape)
    }

    /// Constant filled with `v`.
    pub fn full(shape: &[usize], v: f64) -> Result<Tensor> {
        Tensor::new(vec![v; numel(shape)], shape)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Raw row-major data.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Copy of the data.
    pub fn to_vec(&self) -> Vec<f64> {
        self.data.to_vec()
    }

    /// Element at a multi-index.
    pub fn at(&self, index: &[usize]) -> f64 {
        debug_assert_eq!(index.len(), self.shape.len());
        let strides = strides_of(&self.shape);
        let off: usize = index.iter().zip(&strides).map(|(i, s)| i * s).sum();
        self.data[off]
    }

    /// Value of a single-element tensor.
    pub fn scalar_value(&self) -> Result<f64> {
        if self.numel() != 1 {
            return Err(Error::InvalidShape {
                op: "scalar_value",
                shape: self.shape.clone(),
                msg: "expected exactly one element".into(),
            });
        }
        Ok(self.data[0])
    }

    /// Same data, no tape: gradients do not flow past this point.
    pub fn detach(&self) -> Tensor {
        Tensor {
            data: self.data.clone(),
            shape: self.shape.clone(),
            tape: None,
        }
    }

    /// Whether this tensor records onto a tape.
    pub fn is_tracked(&self) -> bool {
        self.tape.is_some()
    }

    /// Accumulated gradient (after `backward`), if any.
    pub fn grad(&self) -> Option<Vec<f64>> {
        let (tape, vid) = self.tape.as_ref()?;
        tape.inner.borrow().grads[*vid].clone()
    }

    /// Reverse-mode differentiation from a scalar. Visits recorded nodes in
    /// reverse execution order exactly once; repeated calls accumulate into
    /// leaf gradients until [`GradTape::zero_grads`] is called.
    pub fn backward(&self) -> Result<()> {
        let (tape, vid) = self.tape.as_ref().ok_or(Error::NoTape { op: "backward" })?;
        if self.numel() != 1 {
            return Err(Error::NonScalarBackward {
                shape: self.shape.clone(),
            });
        }
        let mut borrow = tape.inner.borrow_mut();
        match &mut borrow.grads[*vid] {
            Some(g) => g[0] += 1.0,
            slot @ None => *slot = Some(vec![1.0]),
        }
        let TapeInner {
            nodes,
            grads,
            sizes,
        } = &mut *borrow;
        for node in nodes.iter().rev() {
            let Some(gout) = grads[node.out].take() else {
                continue;
            };
            let mut sink = Sink {
                in_vids: &node.in_vids,
                grads,
                sizes,
            };
            (node.backward)(&gout, &mut sink);
        }
        Ok(())
    }

    pub(crate) fn data_rc(&self) -> Rc<Vec<f64>> {
        self.data.clone()
    }

    fn vid_on(&self, tape: &GradTape) -> Option<usize> {
        match &self.tape {
            Some((t, vid)) if t.same_tape(tape) => Some(*vid),
            _ => None,
        }
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let head: Vec<f64> = self.data.iter().take(8).copied().collect();
        let ell = if self.numel() > 8 { ", .." } else { "" };
        write!(
            f,
            "Tensor(shape={:?}, tracked={}, data={:?}{})",
            self.shape,
            self.is_tracked(),
            head,
            ell
        )
    }
}

/// Find the common tape among inputs, erroring if two different tapes meet.
fn merge_tapes(op: &'static str, inputs: &[&Tensor]) -> Result<Option<GradTape>> {
    let mut found: Option<GradTape> = None;
    for t in inputs {
        if let Some((tape, _)) = &t.tape {
            match &found {
                None => found = Some(tape.clone()),
                Some(f) if f.same_tape(tape) => {}
                Some(_) => return Err(Error::TapeMismatch { op }),
            }
        }
    }
    Ok(found)
}

/// Core recording primitive: builds the output tensor and, when any input is
/// tracked, records one node whose backward is built lazily.
pub(crate) fn make_result<F>(
    op: &'static str,
    inputs: &[&Tensor],
    data: Vec<f64>,
    shape: Vec<usize>,
    mk_backward: F,
) -> Result<Tensor>
where
    F: FnOnce() -> BackFn,
{
    debug_assert_eq!(data.len(), numel(&shape), "{op}: output size mismatch");
    let tape = merge_tapes(op, inputs)?;
    let tape = match tape {
        None => None,
        Some(t) => {
            let vid = t.alloc(data.len());
            let in_vids = inputs.iter().map(|x| x.vid_on(&t)).collect();
            t.inner.borrow_mut().nodes.push(Node {
                out: vid,
                in_vids,
                backward: mk_backward(),
            });
            Some((t, vid))
        }
    };
    Ok(Tensor {
        data: Rc::new(data),
        shape,
        tape,
    })
}

// ===== structural operations =====

impl Tensor {
    /// Reinterpret the data with a new shape of equal element count. Shares
    /// the underlying buffer.
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        check_shape("reshape", shape)?;
        if numel(shape) != self.numel() {
            return Err(Error::InvalidShape {
                op: "reshape",
                shape: shape.to_vec(),
                msg: format!("element count differs from {:?}", self.shape),
            });
        }
        let data = self.data.clone();
        let out = make_result(
            "reshape",
            &[self],
            // Shared buffer: make_result wraps in a fresh Rc, so hand it the
            // raw Vec only when uniquely owned; otherwise copy. Reshapes of
            // live tensors share via clone below.
            (*data).clone(),
            shape.to_vec(),
            || Box::new(|g, sink| sink.add(0, g.to_vec())),
        )?;
        Ok(out)
    }

    /// Insert a size-1 axis at `axis`.
    pub fn unsqueeze(&self, axis: usize) -> Result<Tensor> {
        let mut shape = self.shape.clone();
        if axis > shape.len() {
            return Err(Error::InvalidShape {
                op: "unsqueeze",
                shape: self.shape.clone(),
                msg: format!("axis {axis} out of range"),
            });
        }
        shape.insert(axis, 1);
        self.reshape(&shape)
    }

    /// Remove a size-1 axis at `axis`.
    pub fn squeeze(&self, axis: usize) -> Result<Tensor> {
        if axis >= self.shape.len() || self.shape[axis] != 1 {
            return Err(Error::InvalidShape {
                op: "squeeze",
                shape: self.shape.clone(),
                msg: format!("axis {axis} is not a size-1 axis"),
            });
        }
        let mut shape = self.shape.clone();
        shape.remove(axis);
        self.reshape(&shape)
    }

    /// Permute axes: output axis `i` is input axis `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Tensor> {
        let rank = self.shape.len();
        let mut seen = vec![false; rank];
        if perm.len() != rank || perm.iter().any(|&p| p >= rank || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidShape {
                op: "permute",
                shape: self.shape.clone(),
                msg: format!("invalid permutation {perm:?}"),
            });
        }
        let out_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let data = permute_data(&self.data, &self.shape, perm);
        let in_shape = self.shape.clone();
        let perm_owned = perm.to_vec();
        make_result("permute", &[self], data, out_shape.clone(), move || {
            // Backward permutes the gradient with the inverse permutation.
            let mut inv = vec![0usize; perm_owned.len()];
            for (i, &p) in perm_owned.iter().enumerate() {
                inv[p] = i;
            }
            let _ = in_shape;
            Box::new(move |g, sink| {
                if sink.needs(0) {
                    sink.add(0, permute_data(g, &out_shape, &inv));
                }
            })
        })
    }

    /// Select indexed slices along `axis` (gather). Indices may repeat.
    pub fn index_select(&self, axis: usize, indices: &[usize]) -> Result<Tensor> {
        if axis >= self.shape.len() {
            return Err(Error::InvalidShape {
                op: "index_select",
                shape: self.shape.clone(),
                msg: format!("axis {axis} out of range"),
            });
        }
        if indices.is_empty() {
            return Err(Error::Empty { op: "index_select" });
        }
        let dim = self.shape[axis];
        if let Some(&bad) = indices.iter().find(|&&i| i >= dim) {
            return Err(Error::InvalidShape {
                op: "index_select",
                shape: self.shape.clone(),
                msg: format!("index {bad} out of range for axis {axis}"),
            });
        }
        let inner: usize = self.shape[axis + 1..].iter().product();
        let outer: usize = self.shape[..axis].iter().product();
        let mut out_shape = self.shape.clone();
        out_shape[axis] = indices.len();
        let mut data = Vec::with_capacity(outer * indices.len() * inner);
        for o in 0..outer {
            let base = o * dim * inner;
            for &ix in indices {
                data.extend_from_slice(&self.data[base + ix * inner..base + (ix + 1) * inner]);
            }
        }
        let idx = indices.to_vec();
        let in_size = self.numel();
        make_result("index_select", &[self], data, out_shape, move || {
            Box::new(move |g, sink| {
                if !sink.needs(0) {
                    return;
                }
                let mut acc = vec![0.0; in_size];
                let mut src = 0;
                for o in 0..outer {
                    let base = o * dim * inner;
                    for &ix in &idx {
                        let dst = base + ix * inner;
                        for k in 0..inner {
                            acc[dst + k] += g[src + k];
                        }
                        src += inner;
                    }
                }
                sink.add(0, acc);
            })
        })
    }

    /// Contiguous slice `[start, start+len)` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Tensor> {
        if axis >= self.shape.len() || start + len > self.shape[axis] || len == 0 {
            return Err(Error::InvalidShape {
                op: "narrow",
                shape: self.shape.clone(),
                msg: format!("range {start}..{} out of bounds on axis {axis}", start + len),
            });
        }
        let dim = self.shape[axis];
        let inner: usize = self.shape[axis + 1..].iter().product();
        let outer: usize = self.shape[..axis].iter().product();
        let mut out_shape = self.shape.clone();
        out_shape[axis] = len;
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * dim * inner + start * inner;
            data.extend_from_slice(&self.data[base..base + len * inner]);
        }
        let in_size = self.numel();
        make_result("narrow", &[self], data, out_shape, move || {
            Box::new(move |g, sink| {
                if !sink.needs(0) {
                    return;
                }
                let mut acc = vec![0.0; in_size];
                for o in 0..outer {
                    let dst = o * dim * inner + start * inner;
                    let src = o * len * inner;
                    acc[dst..dst + len * inner].copy_from_slice(&g[src..src + len * inner]);
                }
                sink.add(0, acc);
            })
        })
    }

    /// Materialize this tensor broadcast to `shape` (standard right-aligned
    /// broadcasting rules).
    pub fn broadcast_to(&self, shape: &[usize]) -> Result<Tensor> {
        check_shape("broadcast_to", shape)?;
        let out_shape = ops::broadcast_shapes("broadcast_to", &self.shape, shape)?;
        if out_shape != shape {
            return Err(Error::ShapeMismatch {
                op: "broadcast_to",
                lhs: self.shape.clone(),
                rhs: shape.to_vec(),
            });
        }
        let zero = Tensor::zeros(shape)?;
        // Reuse the broadcasting add kernel; backward reduces over the
        // broadcast axes automatically.
        ops::bin_op("broadcast_to", self, &zero, |a, _| a, |_, _| 1.0, |_, _| 0.0)
    }
}

/// Concatenate along an existing axis.
pub fn concat(tensors: &[&Tensor], axis: usize) -> Result<Tensor> {
    if tensors.is_empty() {
        return Err(Error::Empty { op: "concat" });
    }
    let first = tensors[0];
    if axis >= first.shape.len() {
        return Err(Error::InvalidShape {
            op: "concat",
            shape: first.shape.clone(),
            msg: format!("axis {axis} out of range"),
        });
    }
    for t in tensors {
        if t.shape.len() != first.shape.len()
            || t.shape
                .iter()
                .zip(&first.shape)
                .enumerate()
                .any(|(i, (a, b))| i != axis && a != b)
        {
            return Err(Error::ShapeMismatch {
                op: "concat",
                lhs: first.shape.clone(),
                rhs: t.shape.clone(),
            });
        }
    }
    let inner: usize = first.shape[axis + 1..].iter().product();
    let outer: usize = first.shape[..axis].iter().product();
    let axis_lens: Vec<usize> = tensors.iter().map(|t| t.shape[axis]).collect();
    let total_axis: usize = axis_lens.iter().sum();
    let mut out_shape = first.shape.clone();
    out_shape[axis] = total_axis;
    let mut data = Vec::with_capacity(outer * total_axis * inner);
    for o in 0..outer {
        for (t, &al) in tensors.iter().zip(&axis_lens) {
            let base = o * al * inner;
            data.extend_from_slice(&t.data[base..base + al * inner]);
        }
    }
    let sizes: Vec<usize> = tensors.iter().map(|t| t.numel()).collect();
    make_result("concat", tensors, data, out_shape, move || {
        Box::new(move |g, sink| {
            let mut offsets = vec![0usize; axis_lens.len()];
            let mut parts: Vec<Option<Vec<f64>>> = sizes
                .iter()
                .enumerate()
                .map(|(i, &s)| if sink.needs(i) { Some(vec![0.0; s]) } else { None })
                .collect();
            let mut src = 0;
            for _o in 0..outer {
                for (i, &al) in axis_lens.iter().enumerate() {
                    let chunk = al * inner;
                    if let Some(p) = &mut parts[i] {
                        p[offsets[i]..offsets[i] + chunk].copy_from_slice(&g[src..src + chunk]);
                    }
                    offsets[i] += chunk;
                    src += chunk;
                }
            }
            for (i, p) in parts.into_iter().enumerate() {
                if let Some(p) = p {
                    sink.add(i, p);
                }
            }
        })
    })
}

/// Stack along a new axis.
pub fn stack(tensors: &[&Tensor], axis: usize) -> Result<Tensor> {
    if tensors.is_empty() {
        return Err(Error::Empty { op: "stack" });
    }
    let unsqueezed: Vec<Tensor> = tensors
        .iter()
        .map(|t| t.unsqueeze(axis))
        .collect::<Result<_>>()?;
    let refs: Vec<&Tensor> = unsqueezed.iter().collect();
    concat(&refs, axis)
}

/// Strided permutation copy used by `permute` in both directions.
fn permute_data(data: &[f64], shape: &[usize], perm: &[usize]) -> Vec<f64> {
    let rank = shape.len();
    if rank == 0 {
        return data.to_vec();
    }
    let in_strides = strides_of(shape);
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let src_stride: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let mut out = Vec::with_capacity(data.len());
    let inner_len = out_shape[rank - 1];
    let inner_stride = src_stride[rank - 1];
    let mut counters = vec![0usize; rank - 1];
    let mut base = 0usize;
    loop {
        if inner_stride == 1 {
            out.extend_from_slice(&data[base..base + inner_len]);
        } else {
            let mut off = base;
            for _ in 0..inner_len {
                out.push(data[off]);
                off += inner_stride;
            }
        }
        // Odometer over the outer axes.
        let mut d = rank - 1;
        loop {
            if d == 0 {
                return out;
            }
            d -= 1;
            counters[d] += 1;
            base += src_stride[d];
            if counters[d] < out_shape[d] {
                break;
            }
            base -= out_shape[d] * src_stride[d];
            counters[d] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaf_and_backward_accumulate() {
        let tape = GradTape::new();
        let x = tape.leaf(vec![2.0], &[1], true).unwrap();
        let y = x.mul(&x).unwrap().sum(None, false).unwrap();
        y.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![4.0]);
        // Second backward replays and accumulates.
        y.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![8.0]);
        tape.zero_grads();
        assert!(x.grad().is_none());
    }

    #[test]
    fn backward_requires_scalar() {
        let tape = GradTape::new();
        let x = tape.leaf(vec![1.0, 2.0], &[2], true).unwrap();
        assert!(matches!(
            x.backward(),
            Err(Error::NonScalarBackward { .. })
        ));
    }

    #[test]
    fn mixing_tapes_is_an_error() {
        let t1 = GradTape::new();
        let t2 = GradTape::new();
        let a = t1.leaf(vec![1.0], &[1], true).unwrap();
        let b = t2.leaf(vec![1.0], &[1], true).unwrap();
        assert!(matches!(a.add(&b), Err(Error::TapeMismatch { .. })));
    }

    #[test]
    fn detach_blocks_gradients() {
        let tape = GradTape::new();
        let x = tape.leaf(vec![3.0], &[1], true).unwrap();
        let d = x.detach();
        let y = x.mul(&d).unwrap().sum(None, false).unwrap();
        y.backward().unwrap();
        // d treated as the constant 3.0: dy/dx = 3, not 6.
        assert_eq!(x.grad().unwrap(), vec![3.0]);
    }

    #[test]
    fn permute_roundtrip_and_grad() {
        let tape = GradTape::new();
        let x = tape
            .leaf((0..24).map(|v| v as f64).collect(), &[2, 3, 4], true)
            .unwrap();
        let p = x.permute(&[2, 0, 1]).unwrap();
        assert_eq!(p.shape(), &[4, 2, 3]);
        assert_eq!(p.at(&[1, 0, 2]), x.at(&[0, 2, 1]));
        let s = p.sum(None, false).unwrap();
        s.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![1.0; 24]);
    }

    #[test]
    fn concat_and_narrow_invert() {
        let tape = GradTape::new();
        let a = tape.leaf(vec![1.0, 2.0, 3.0, 4.0], &[2, 2], true).unwrap();
        let b = tape.leaf(vec![5.0, 6.0], &[2, 1], true).unwrap();
        let c = concat(&[&a, &b], 1).unwrap();
        assert_eq!(c.shape(), &[2, 3]);
        assert_eq!(c.to_vec(), vec![1.0, 2.0, 5.0, 3.0, 4.0, 6.0]);
        let back = c.narrow(1, 0, 2).unwrap();
        assert_eq!(back.to_vec(), a.to_vec());
        let s = c.narrow(1, 2, 1).unwrap().sum(None, false).unwrap();
        s.backward().unwrap();
        assert_eq!(b.grad().unwrap(), vec![1.0, 1.0]);
        assert!(a.grad().is_none() || a.grad().unwrap() == vec![0.0; 4]);
    }

    #[test]
    fn index_select_gathers_and_scatters() {
        let tape = GradTape::new();
        let x = tape
            .leaf(vec![10.0, 11.0, 20.0, 21.0, 30.0, 31.0], &[3, 2], true)
            .unwrap();
        let g = x.index_select(0, &[2, 0, 2]).unwrap();
        assert_eq!(g.to_vec(), vec![30.0, 31.0, 10.0, 11.0, 30.0, 31.0]);
        let s = g.sum(None, false).unwrap();
        s.backward().unwrap();
        // Row 2 selected twice accumulates twice.
        assert_eq!(x.grad().unwrap(), vec![1.0, 1.0, 0.0, 0.0, 2.0, 2.0]);
    }

    #[test]
    fn broadcast_to_reduces_on_backward() {
        let tape = GradTape::new();
        let x = tape.leaf(vec![1.0, 2.0], &[2], true).unwrap();
        let b = x.broadcast_to(&[3, 2]).unwrap();
        assert_eq!(b.to_vec(), vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let s = b.sum(None, false).unwrap();
        s.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![3.0, 3.0]);
    }

    #[test]
    fn zero_dim_shapes_rejected() {
        assert!(Tensor::zeros(&[2, 0]).is_err());
    }
}
