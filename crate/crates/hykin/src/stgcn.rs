//! Spatio-temporal graph convolutional encoders over 2-D skeleton parts.
//!
//! Each body part (body, left hand, right hand, face) is a small fixed graph
//! of joints. A [`GcnUnit`] mixes channels with a 1×1 transform and then
//! aggregates across neighboring joints with normalized adjacency kernels;
//! an [`StgcnBlock`] follows that with a temporal convolution and a residual
//! path. [`encode_parts`] runs the body stream first and adds its features at
//! an anchor joint — detached, so the body encoder never receives gradients
//! through the part streams — into each remaining part before the final
//! temporal stage.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::{concat, Tensor};

/// Part names in canonical order; the body stream must come first because it
/// provides residual context for the others.
pub const PARTS: [&str; 4] = ["body", "left_hand", "right_hand", "face"];

/// Body joint supplying residual context for each non-body part, in [`PARTS`]
/// order: hands attach at the wrists (joints 7 and 8), the face at the head
/// (joint 1). See [`build_graph`] for the body joint semantics.
pub const DEFAULT_ANCHORS: [usize; 3] = [7, 8, 1];

/// How adjacency weights are derived from hop distances.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdjacencyStrategy {
    /// Equal weight over all joints within `max_hop`, row-normalized.
    Uniform,
    /// Reciprocal hop distance (self-dominant), row-normalized.
    Distance,
}

impl FromStr for AdjacencyStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "distance" => Ok(Self::Distance),
            other => Err(Error::Config(format!("unknown adjacency strategy: {other}"))),
        }
    }
}

/// A fixed joint graph for one body part: edges, shortest-path hops capped at
/// `max_hop`, and the normalized adjacency kernels used by [`GcnUnit`].
#[derive(Clone, Debug)]
pub struct SkeletonGraph {
    pub layout: String,
    pub num_nodes: usize,
    /// Joint pairs including self-loops `(i, i)`.
    pub edges: Vec<(usize, usize)>,
    /// Anchor joint for this part's own layout.
    pub center: usize,
    /// Row-major `V×V` shortest-path matrix; pairs farther than `max_hop`
    /// hold `f64::INFINITY`.
    pub hop: Vec<f64>,
    /// Adjacency kernels, shape `(K, V, V)` with `K = 1`.
    pub a: Tensor,
}

impl SkeletonGraph {
    pub fn hop_at(&self, i: usize, j: usize) -> f64 {
        self.hop[i * self.num_nodes + j]
    }
}

/// Edge lists for the supported layouts.
///
/// * `body` (9 joints): 0 neck, 1 head, 2 hip, 3/4 shoulders, 5/6 elbows,
///   7/8 wrists; torso edges connect the neck to joints 1–4 and the arms
///   chain shoulder → elbow → wrist on each side.
/// * `left_hand` / `right_hand` (21 joints): wrist 0 plus five four-joint
///   finger chains.
/// * `face` (16 joints): a closed ring, centered at joint 8.
fn layout_edges(layout: &str) -> Result<(usize, Vec<(usize, usize)>, usize)> {
    match layout {
        "left_hand" | "right_hand" | "left" | "right" => {
            let fingers: [[usize; 5]; 5] = [
                [0, 1, 2, 3, 4],
                [0, 5, 6, 7, 8],
                [0, 9, 10, 11, 12],
                [0, 13, 14, 15, 16],
                [0, 17, 18, 19, 20],
            ];
            let mut edges: Vec<(usize, usize)> = (0..21).map(|i| (i, i)).collect();
            for f in &fingers {
                for w in f.windows(2) {
                    edges.push((w[0], w[1]));
                }
            }
            Ok((21, edges, 0))
        }
        "body" => {
            let mut edges: Vec<(usize, usize)> = (0..9).map(|i| (i, i)).collect();
            edges.extend((1..5).map(|i| (0, i)));
            edges.extend([(3, 5), (5, 7), (4, 6), (6, 8)]);
            Ok((9, edges, 0))
        }
        "face" | "face_all" => {
            let mut edges: Vec<(usize, usize)> = (0..16).map(|i| (i, i)).collect();
            edges.extend((0..16).map(|i| (i, (i + 1) % 16)));
            Ok((16, edges, 8))
        }
        other => Err(Error::Config(format!("unknown layout: {other}"))),
    }
}

/// Shortest-path length between all joint pairs, capped at `max_hop`
/// (`INFINITY` beyond the cap), via boolean powers of the adjacency matrix.
fn hop_distance(num_nodes: usize, edges: &[(usize, usize)], max_hop: usize) -> Vec<f64> {
    let v = num_nodes;
    let mut adj = vec![0.0f64; v * v];
    for &(i, j) in edges {
        adj[i * v + j] = 1.0;
        adj[j * v + i] = 1.0;
    }
    // reach[d] = support of adj^d; writing smaller d last keeps true
    // shortest-path values (hop(i,i) = 0 despite self-loops).
    let mut powers: Vec<Vec<bool>> = Vec::with_capacity(max_hop + 1);
    let mut cur: Vec<f64> = (0..v * v)
        .map(|i| if i / v == i % v { 1.0 } else { 0.0 })
        .collect();
    powers.push(cur.iter().map(|&x| x > 0.0).collect());
    for _ in 0..max_hop {
        let mut next = vec![0.0f64; v * v];
        for i in 0..v {
            for k in 0..v {
                let x = cur[i * v + k];
                if x == 0.0 {
                    continue;
                }
                for j in 0..v {
                    next[i * v + j] += x * adj[k * v + j];
                }
            }
        }
        powers.push(next.iter().map(|&x| x > 0.0).collect());
        cur = next;
    }
    let mut hop = vec![f64::INFINITY; v * v];
    for d in (0..=max_hop).rev() {
        for i in 0..v * v {
            if powers[d][i] {
                hop[i] = d as f64;
            }
        }
    }
    hop
}

/// Build the graph for a named layout. `max_hop` caps the neighborhoods
/// (default 1); rows of every adjacency kernel are normalized with a `1e-6`
/// guard on the row sums.
pub fn build_graph(
    layout: &str,
    strategy: AdjacencyStrategy,
    max_hop: usize,
) -> Result<SkeletonGraph> {
    let (v, edges, center) = layout_edges(layout)?;
    let hop = hop_distance(v, &edges, max_hop);
    let mut a = vec![0.0f64; v * v];
    match strategy {
        AdjacencyStrategy::Uniform => {
            for i in 0..v * v {
                if hop[i].is_finite() {
                    a[i] = 1.0;
                }
            }
        }
        AdjacencyStrategy::Distance => {
            for i in 0..v * v {
                let w = 1.0 / (hop[i] + 1e-6);
                a[i] = if w.is_finite() { w } else { 0.0 };
            }
        }
    }
    for r in 0..v {
        let sum: f64 = a[r * v..(r + 1) * v].iter().sum();
        let inv = 1.0 / (sum + 1e-6);
        for x in &mut a[r * v..(r + 1) * v] {
            *x *= inv;
        }
    }
    Ok(SkeletonGraph {
        layout: layout.to_string(),
        num_nodes: v,
        edges,
        center,
        hop,
        a: Tensor::new(a, &[1, v, v])?,
    })
}

/// Spatial graph convolution: a 1×1 channel transform into `K` kernel groups,
/// neighbor aggregation through the adjacency kernels (contracting the kernel
/// and joint axes), then batch norm and ReLU.
///
/// `a` may be a tracked leaf to make the adjacency learnable; by default it
/// is the constant graph kernel.
pub struct GcnUnit {
    /// Channel transform `(Cin, Cout·K)`; column `k·Cout + co` feeds kernel
    /// `k`, output channel `co`.
    pub w: Tensor,
    pub b: Tensor,
    /// Adjacency kernels `(K, V, V)`.
    pub a: Tensor,
    pub gamma: Tensor,
    pub beta: Tensor,
    pub use_norm: bool,
    cin: usize,
    cout: usize,
    k: usize,
    v: usize,
}

impl GcnUnit {
    pub fn new(
        w: Tensor,
        b: Tensor,
        a: Tensor,
        gamma: Tensor,
        beta: Tensor,
        use_norm: bool,
    ) -> Result<Self> {
        if w.rank() != 2 {
            return Err(Error::InvalidShape {
                op: "gcn_unit",
                shape: w.shape().to_vec(),
                msg: "channel transform must be (Cin, Cout*K)".into(),
            });
        }
        if a.rank() != 3 || a.shape()[1] != a.shape()[2] {
            return Err(Error::InvalidShape {
                op: "gcn_unit",
                shape: a.shape().to_vec(),
                msg: "adjacency must be (K, V, V)".into(),
            });
        }
        let k = a.shape()[0];
        let (cin, wide) = (w.shape()[0], w.shape()[1]);
        if wide % k != 0 {
            return Err(Error::InvalidShape {
                op: "gcn_unit",
                shape: w.shape().to_vec(),
                msg: format!("transform width {wide} not divisible by {k} kernels"),
            });
        }
        let cout = wide / k;
        if b.shape() != [wide] || gamma.shape() != [cout] || beta.shape() != [cout] {
            return Err(Error::ShapeMismatch {
                op: "gcn_unit",
                lhs: vec![wide, cout],
                rhs: vec![b.numel(), gamma.numel()],
            });
        }
        let v = a.shape()[1];
        Ok(Self {
            w,
            b,
            a,
            gamma,
            beta,
            use_norm,
            cin,
            cout,
            k,
            v,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.cout
    }

    pub fn in_channels(&self) -> usize {
        self.cin
    }

    /// `x`: `(N, Cin, T, V)` → `(N, Cout, T, V)`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.rank() != 4 || x.shape()[1] != self.cin || x.shape()[3] != self.v {
            return Err(Error::ShapeMismatch {
                op: "gcn_unit",
                lhs: x.shape().to_vec(),
                rhs: vec![0, self.cin, 0, self.v],
            });
        }
        let (n, t, v) = (x.shape()[0], x.shape()[2], x.shape()[3]);
        let h = x
            .permute(&[0, 2, 3, 1])?
            .reshape(&[n * t * v, self.cin])?
            .matmul(&self.w)?
            .add(&self.b)?
            .reshape(&[n, t, v, self.k, self.cout])?
            .permute(&[3, 0, 4, 1, 2])?; // (K, N, Cout, T, V)
        let mut agg: Option<Tensor> = None;
        for k in 0..self.k {
            let hk = h
                .narrow(0, k, 1)?
                .reshape(&[n * self.cout * t, v])?;
            let ak = self.a.narrow(0, k, 1)?.reshape(&[v, v])?;
            let y = hk.matmul(&ak)?;
            agg = Some(match agg {
                None => y,
                Some(s) => s.add(&y)?,
            });
        }
        let y = agg.expect("k >= 1").reshape(&[n, self.cout, t, v])?;
        let y = if self.use_norm {
            y.batch_norm(&self.gamma, &self.beta, 1e-5)?
        } else {
            y
        };
        y.relu()
    }
}

/// Temporal convolution along the frame axis with same padding: kernel
/// `(t_kernel, 1)`, stride `(stride, 1)`, so the output length is
/// `⌈T/stride⌉`.
pub struct TemporalConv {
    /// Tap weights `(t_kernel, Cin, Cout)`.
    pub w: Tensor,
    pub b: Tensor,
    pub stride: usize,
    cin: usize,
    cout: usize,
    t_kernel: usize,
}

impl TemporalConv {
    pub fn new(w: Tensor, b: Tensor, stride: usize) -> Result<Self> {
        if w.rank() != 3 || w.shape()[0] % 2 == 0 {
            return Err(Error::InvalidShape {
                op: "temporal_conv",
                shape: w.shape().to_vec(),
                msg: "weights must be (t_kernel, Cin, Cout) with odd t_kernel".into(),
            });
        }
        if stride == 0 {
            return Err(Error::Config("temporal stride must be >= 1".into()));
        }
        let (t_kernel, cin, cout) = (w.shape()[0], w.shape()[1], w.shape()[2]);
        if b.shape() != [cout] {
            return Err(Error::ShapeMismatch {
                op: "temporal_conv",
                lhs: vec![cout],
                rhs: b.shape().to_vec(),
            });
        }
        Ok(Self {
            w,
            b,
            stride,
            cin,
            cout,
            t_kernel,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.cin
    }

    pub fn out_channels(&self) -> usize {
        self.cout
    }

    /// `x`: `(N, Cin, T, V)` → `(N, Cout, ⌈T/stride⌉, V)`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.rank() != 4 || x.shape()[1] != self.cin {
            return Err(Error::ShapeMismatch {
                op: "temporal_conv",
                lhs: x.shape().to_vec(),
                rhs: vec![0, self.cin, 0, 0],
            });
        }
        let (n, t, v) = (x.shape()[0], x.shape()[2], x.shape()[3]);
        let pad = (self.t_kernel - 1) / 2;
        let xc = x.permute(&[0, 2, 3, 1])?; // (N, T, V, Cin)
        let padded = if pad > 0 {
            let z = Tensor::zeros(&[n, pad, v, self.cin])?;
            concat(&[&z, &xc, &z], 1)?
        } else {
            xc
        };
        let mut acc: Option<Tensor> = None;
        for tap in 0..self.t_kernel {
            let xs = padded
                .narrow(1, tap, t)?
                .reshape(&[n * t * v, self.cin])?;
            let wt = self.w.narrow(0, tap, 1)?.reshape(&[self.cin, self.cout])?;
            let y = xs.matmul(&wt)?;
            acc = Some(match acc {
                None => y,
                Some(s) => s.add(&y)?,
            });
        }
        let y = acc
            .expect("t_kernel >= 1")
            .add(&self.b)?
            .reshape(&[n, t, v, self.cout])?;
        let y = if self.stride > 1 {
            let idx: Vec<usize> = (0..t).step_by(self.stride).collect();
            y.index_select(1, &idx)?
        } else {
            y
        };
        y.permute(&[0, 3, 1, 2])
    }
}

/// One encoder block: spatial graph convolution, temporal convolution with
/// batch norm, and a residual path (identity when channels and stride are
/// unchanged, otherwise a strided 1×1 projection), finished with ReLU.
pub struct StgcnBlock {
    pub gcn: GcnUnit,
    pub tcn: TemporalConv,
    pub tcn_gamma: Tensor,
    pub tcn_beta: Tensor,
    /// `None` → identity residual; `Some((w, b))` → 1×1 projection.
    pub res: Option<(Tensor, Tensor)>,
    pub use_norm: bool,
}

impl StgcnBlock {
    pub fn new(
        gcn: GcnUnit,
        tcn: TemporalConv,
        tcn_gamma: Tensor,
        tcn_beta: Tensor,
        res: Option<(Tensor, Tensor)>,
        use_norm: bool,
    ) -> Result<Self> {
        if gcn.out_channels() != tcn.in_channels() {
            return Err(Error::ShapeMismatch {
                op: "stgcn_block",
                lhs: vec![gcn.out_channels()],
                rhs: vec![tcn.in_channels()],
            });
        }
        let (cin, cout) = (gcn.in_channels(), tcn.out_channels());
        match &res {
            None => {
                if cin != cout || tcn.stride != 1 {
                    return Err(Error::Config(format!(
                        "identity residual needs matching channels and stride 1, got {cin}->{cout} stride {}",
                        tcn.stride
                    )));
                }
            }
            Some((w, b)) => {
                if w.shape() != [cin, cout] || b.shape() != [cout] {
                    return Err(Error::ShapeMismatch {
                        op: "stgcn_block",
                        lhs: vec![cin, cout],
                        rhs: w.shape().to_vec(),
                    });
                }
            }
        }
        if tcn_gamma.shape() != [cout] || tcn_beta.shape() != [cout] {
            return Err(Error::ShapeMismatch {
                op: "stgcn_block",
                lhs: vec![cout],
                rhs: tcn_gamma.shape().to_vec(),
            });
        }
        Ok(Self {
            gcn,
            tcn,
            tcn_gamma,
            tcn_beta,
            res,
            use_norm,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.gcn.in_channels()
    }

    pub fn out_channels(&self) -> usize {
        self.tcn.out_channels()
    }

    /// `x`: `(N, Cin, T, V)` → `(N, Cout, ⌈T/stride⌉, V)`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = self.gcn.forward(x)?;
        let y = self.tcn.forward(&y)?;
        let y = if self.use_norm {
            y.batch_norm(&self.tcn_gamma, &self.tcn_beta, 1e-5)?
        } else {
            y
        };
        let r = match &self.res {
            None => x.clone(),
            Some((w, b)) => {
                let (n, t, v) = (x.shape()[0], x.shape()[2], x.shape()[3]);
                let xs = if self.tcn.stride > 1 {
                    let idx: Vec<usize> = (0..t).step_by(self.tcn.stride).collect();
                    x.index_select(2, &idx)?
                } else {
                    x.clone()
                };
                let ts = xs.shape()[2];
                xs.permute(&[0, 2, 3, 1])?
                    .reshape(&[n * ts * v, self.in_channels()])?
                    .matmul(w)?
                    .add(b)?
                    .reshape(&[n, ts, v, self.out_channels()])?
                    .permute(&[0, 3, 1, 2])?
            }
        };
        y.add(&r)?.relu()
    }
}

/// Full single-part encoder: input projection from 2-D keypoints, a stack of
/// [`StgcnBlock`]s, and a final temporal stage whose joint-mean output is the
/// part's feature sequence.
pub struct PartEncoder {
    /// Keypoint projection `(2, C)` applied per joint and frame.
    pub proj_w: Tensor,
    pub proj_b: Tensor,
    pub blocks: Vec<StgcnBlock>,
    pub temporal: TemporalConv,
    pub t_gamma: Tensor,
    pub t_beta: Tensor,
    pub use_norm: bool,
}

impl PartEncoder {
    pub fn new(
        proj_w: Tensor,
        proj_b: Tensor,
        blocks: Vec<StgcnBlock>,
        temporal: TemporalConv,
        t_gamma: Tensor,
        t_beta: Tensor,
        use_norm: bool,
    ) -> Result<Self> {
        if proj_w.rank() != 2 || proj_w.shape()[0] != 2 {
            return Err(Error::InvalidShape {
                op: "part_encoder",
                shape: proj_w.shape().to_vec(),
                msg: "keypoint projection must be (2, C)".into(),
            });
        }
        if blocks.is_empty() {
            return Err(Error::Empty { op: "part_encoder" });
        }
        let mut c = proj_w.shape()[1];
        for blk in &blocks {
            if blk.in_channels() != c {
                return Err(Error::ShapeMismatch {
                    op: "part_encoder",
                    lhs: vec![c],
                    rhs: vec![blk.in_channels()],
                });
            }
            c = blk.out_channels();
        }
        if temporal.in_channels() != c {
            return Err(Error::ShapeMismatch {
                op: "part_encoder",
                lhs: vec![c],
                rhs: vec![temporal.in_channels()],
            });
        }
        Ok(Self {
            proj_w,
            proj_b,
            blocks,
            temporal,
            t_gamma,
            t_beta,
            use_norm,
        })
    }

    /// Keypoints `(N, T, V, 2)` → spatial feature map `(N, C, T', V)`.
    pub fn spatial(&self, x: &Tensor) -> Result<Tensor> {
        if x.rank() != 4 || x.shape()[3] != 2 {
            return Err(Error::InvalidShape {
                op: "part_encoder",
                shape: x.shape().to_vec(),
                msg: "keypoints must be (N, T, V, 2)".into(),
            });
        }
        let (n, t, v) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let c = self.proj_w.shape()[1];
        let mut h = x
            .reshape(&[n * t * v, 2])?
            .matmul(&self.proj_w)?
            .add(&self.proj_b)?
            .reshape(&[n, t, v, c])?
            .permute(&[0, 3, 1, 2])?;
        for blk in &self.blocks {
            h = blk.forward(&h)?;
        }
        Ok(h)
    }

    /// Spatial map `(N, C, T, V)` → per-frame features `(N, T', C)` after the
    /// final temporal stage and a mean over joints.
    pub fn temporal_stage(&self, x: &Tensor) -> Result<Tensor> {
        let y = self.temporal.forward(x)?;
        let y = if self.use_norm {
            y.batch_norm(&self.t_gamma, &self.t_beta, 1e-5)?
        } else {
            y
        };
        y.relu()?.mean(Some(3), false)?.permute(&[0, 2, 1])
    }
}

/// Per-part encoder outputs: frame features `z[p]` of shape `(N, T, C)` and
/// temporally pooled summaries `pooled[p]` of shape `(N, C)`.
pub struct PartFeatures {
    pub z: Vec<Tensor>,
    pub pooled: Vec<Tensor>,
}

/// Encode all parts. The first encoder/keypoint pair is the body stream; its
/// spatial output is detached and added at `anchors[i]` (a body joint index)
/// to part `i+1` before that part's temporal stage, so body parameters are a
/// fixed context for the part branches.
///
/// `frame_mask` (`(N, T)`, 1 = valid) zeroes padded frames before encoding
/// and restricts the temporal mean to valid frames. Requires stride-1
/// temporal stages so frames stay aligned with the mask.
pub fn encode_parts(
    encoders: &[PartEncoder],
    keypoints: &[Tensor],
    frame_mask: Option<&Tensor>,
    anchors: &[usize],
) -> Result<PartFeatures> {
    if encoders.is_empty() || encoders.len() != keypoints.len() {
        return Err(Error::Config(format!(
            "encode_parts: {} encoders for {} keypoint sets",
            encoders.len(),
            keypoints.len()
        )));
    }
    if anchors.len() + 1 != encoders.len() {
        return Err(Error::Config(format!(
            "encode_parts: {} anchors for {} non-body parts",
            anchors.len(),
            encoders.len() - 1
        )));
    }
    let (n, t) = (keypoints[0].shape()[0], keypoints[0].shape()[1]);
    if t == 0 {
        return Err(Error::Empty { op: "encode_parts" });
    }
    for kp in keypoints {
        if kp.shape()[0] != n || kp.shape()[1] != t {
            return Err(Error::ShapeMismatch {
                op: "encode_parts",
                lhs: vec![n, t],
                rhs: kp.shape()[..2].to_vec(),
            });
        }
    }
    let masked: Vec<Tensor>;
    let inputs: &[Tensor] = match frame_mask {
        None => keypoints,
        Some(m) => {
            if m.shape() != [n, t] {
                return Err(Error::ShapeMismatch {
                    op: "encode_parts",
                    lhs: vec![n, t],
                    rhs: m.shape().to_vec(),
                });
            }
            for row in 0..n {
                let valid: f64 = m.data()[row * t..(row + 1) * t].iter().sum();
                if valid == 0.0 {
                    return Err(Error::Empty { op: "encode_parts" });
                }
            }
            let me = m.unsqueeze(2)?.unsqueeze(3)?;
            masked = keypoints
                .iter()
                .map(|kp| kp.mul(&me))
                .collect::<Result<_>>()?;
            &masked
        }
    };

    let body = encoders[0].spatial(&inputs[0])?;
    let body_ctx = body.detach();
    let v_body = body.shape()[3];
    let mut z = vec![encoders[0].temporal_stage(&body)?];
    for (i, anchor) in anchors.iter().enumerate() {
        if *anchor >= v_body {
            return Err(Error::Config(format!(
                "encode_parts: anchor joint {anchor} outside body layout of {v_body} joints"
            )));
        }
        let enc = &encoders[i + 1];
        let sp = enc.spatial(&inputs[i + 1])?;
        if sp.shape()[2] != body_ctx.shape()[2] {
            return Err(Error::ShapeMismatch {
                op: "encode_parts",
                lhs: body_ctx.shape().to_vec(),
                rhs: sp.shape().to_vec(),
            });
        }
        let joint = body_ctx.narrow(3, *anchor, 1)?; // (N, C, T, 1), broadcast over V
        z.push(enc.temporal_stage(&sp.add(&joint)?)?);
    }

    let mut pooled = Vec::with_capacity(z.len());
    for zp in &z {
        let p = match frame_mask {
            None => zp.mean(Some(1), false)?,
            Some(m) => {
                if zp.shape()[1] != t {
                    return Err(Error::ShapeMismatch {
                        op: "encode_parts",
                        lhs: vec![n, t],
                        rhs: zp.shape().to_vec(),
                    });
                }
                let me = m.unsqueeze(2)?;
                let sums = zp.mul(&me)?.sum(Some(1), false)?; // (N, C)
                let counts = m.sum(Some(1), true)?; // (N, 1)
                sums.div(&counts)?
            }
        };
        pooled.push(p);
    }
    Ok(PartFeatures { z, pooled })
}

/// Concatenate per-part frame features along the channel axis and project to
/// the decoder width.
pub struct FuseLayer {
    /// `(ΣC_p, d_model)`.
    pub w: Tensor,
    pub b: Tensor,
}

impl FuseLayer {
    pub fn new(w: Tensor, b: Tensor) -> Result<Self> {
        if w.rank() != 2 || b.shape() != [w.shape()[1]] {
            return Err(Error::InvalidShape {
                op: "fuse_for_decoder",
                shape: w.shape().to_vec(),
                msg: "projection must be (sum of part widths, d_model)".into(),
            });
        }
        Ok(Self { w, b })
    }

    /// `z[p]`: `(N, T, C_p)` each, equal `N` and `T` → `(N, T, d_model)`.
    pub fn forward(&self, z: &[Tensor]) -> Result<Tensor> {
        if z.is_empty() {
            return Err(Error::Empty { op: "fuse_for_decoder" });
        }
        let (n, t) = (z[0].shape()[0], z[0].shape()[1]);
        for zp in z {
            if zp.rank() != 3 || zp.shape()[0] != n || zp.shape()[1] != t {
                return Err(Error::ShapeMismatch {
                    op: "fuse_for_decoder",
                    lhs: vec![n, t],
                    rhs: zp.shape().to_vec(),
                });
            }
        }
        let refs: Vec<&Tensor> = z.iter().collect();
        let cat = concat(&refs, 2)?;
        let width: usize = cat.shape()[2];
        if width != self.w.shape()[0] {
            return Err(Error::ShapeMismatch {
                op: "fuse_for_decoder",
                lhs: vec![self.w.shape()[0]],
                rhs: vec![width],
            });
        }
        let dm = self.w.shape()[1];
        cat.reshape(&[n * t, width])?
            .matmul(&self.w)?
            .add(&self.b)?
            .reshape(&[n, t, dm])
    }
}
