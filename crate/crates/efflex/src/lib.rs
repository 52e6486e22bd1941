//! Trajectory representation learning: multi-scale KNN similarity graphs
//! over exact trajectory distances, fused by a lightweight attention module
//! and embedded with a sequential GCN, validated through top-k similarity
//! search.
//!
//! Pipeline stages, each backed by an artifact file:
//!
//! 1. [`data`] — ingest GPS trajectories (Porto CSV, Geolife PLT, or
//!    synthetic clusters), project to planar meters, filter and grid-snap.
//! 2. [`dist`] — exact pairwise distance matrices (DTW, discrete Fréchet,
//!    Hausdorff, aligned Euclidean).
//! 3. [`graph`] — per-scale KNN adjacencies with softmax edge weights.
//! 4. [`embed`] — attention fusion + GCN training against a ground-truth
//!    similarity target.
//! 5. [`eval`] — top-k retrieval metrics (HR@10, HR@50, R10@50) and the
//!    qualitative query task.
//!
//! The `efflex` binary in this crate drives the stages from a JSON config;
//! see the repository README.

pub mod cli;
pub mod data;
pub mod dist;
pub mod embed;
pub mod error;
pub mod eval;
pub mod graph;
mod io_util;
pub mod numerics;

pub use error::{Error, Result};
