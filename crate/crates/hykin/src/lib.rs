//! Hyperbolic representation learning for skeletal motion.
//!
//! This crate implements a complete, desk-scale stack for embedding skeletal
//! pose streams and text into a shared Poincaré ball with learnable curvature:
//!
//! * [`tensor`] — dense `f64` tensors with an explicit reverse-mode gradient
//!   tape and a finite-difference oracle;
//! * [`manifold`] — the Poincaré ball: Möbius arithmetic, exponential/log
//!   maps, geodesic distance with its analytic gradient, projections and
//!   tangent clipping;
//! * [`frechet`] — weighted Fréchet means and midpoints by Karcher iteration;
//! * [`layers`] — hyperbolic projection, distance-based token attention,
//!   contrastive alignment losses, and the loss-blend schedule;
//! * [`stgcn`] — skeleton graph layouts and spatio-temporal graph
//!   convolution blocks for per-part pose encoders;
//! * [`optim`] — AdamW and a Riemannian Adam that updates parameters through
//!   the exponential map, with warmup + cosine learning-rate scheduling;
//! * harness modules ([`config`], [`data`], [`model`], [`train`], [`ablate`],
//!   [`export`], [`gradcheck`], [`checkpoint`]) — synthetic dataset
//!   generation, the pose-to-text training loop, ablation runners, embedding
//!   export, and the analytic-vs-numeric gradient audit behind the CLI.
//!
//! Everything is deterministic for a fixed seed: single-threaded runs, seeded
//! ChaCha RNG streams, and stable file formats byte-for-byte.

pub mod ablate;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod export;
pub mod frechet;
pub mod gradcheck;
pub mod layers;
pub mod manifold;
pub mod model;
pub mod optim;
pub mod stgcn;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
