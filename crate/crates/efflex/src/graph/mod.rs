//! Per-scale KNN adjacency matrices from a distance matrix, with
//! softmax-normalized edge weights, plus the multi-scale set.

use std::io::Write;
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::DistanceMatrix;
use crate::error::{Error, Result};
use crate::io_util;
use crate::numerics::Matrix;

// Floor for the per-row softmax temperature.
const TEMPERATURE_EPS: f64 = 1e-12;

/// Sign of the exponent in the edge-weight softmax. `Negated` (the default)
/// gives nearer neighbors larger weights; `AsWritten` keeps the positive
/// exponent, applied to temperature-normalized distances so it cannot
/// overflow.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelSign {
    #[default]
    Negated,
    AsWritten,
}

/// Strictly increasing neighbor counts, one per scale.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ScaleList {
    ks: Vec<usize>,
}

impl ScaleList {
    pub fn new(ks: Vec<usize>) -> Result<Self> {
        if ks.is_empty() {
            return Err(Error::Config("scales: need at least one k".into()));
        }
        if ks[0] < 1 {
            return Err(Error::Config("scales: every k must be >= 1".into()));
        }
        if ks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "scales must be strictly increasing, got {ks:?}"
            )));
        }
        Ok(ScaleList { ks })
    }

    pub fn ks(&self) -> &[usize] {
        &self.ks
    }

    pub fn len(&self) -> usize {
        self.ks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ks.is_empty()
    }

    pub fn max_k(&self) -> usize {
        *self.ks.last().expect("non-empty by construction")
    }

    /// Every k must be < n for an n-node graph.
    pub fn validate_against(&self, n: usize) -> Result<()> {
        if self.max_k() >= n {
            return Err(Error::domain(format!(
                "scales: k={} must be < n={n}",
                self.max_k()
            )));
        }
        Ok(())
    }
}

impl Default for ScaleList {
    fn default() -> Self {
        ScaleList {
            ks: vec![10, 20, 50],
        }
    }
}

impl TryFrom<Vec<usize>> for ScaleList {
    type Error = Error;

    fn try_from(ks: Vec<usize>) -> Result<Self> {
        ScaleList::new(ks)
    }
}

impl From<ScaleList> for Vec<usize> {
    fn from(s: ScaleList) -> Vec<usize> {
        s.ks
    }
}

/// Row-stochastic KNN adjacency: row i holds exactly k (neighbor id, weight)
/// entries ordered by ascending (distance, id), weights summing to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseAdjacency {
    n: usize,
    k: usize,
    rows: Vec<Vec<(u32, f64)>>,
}

impl SparseAdjacency {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[(u32, f64)] {
        &self.rows[i]
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                m.set(i, j as usize, w);
            }
        }
        m
    }

    /// Mean weight over the n*k edges. With row-stochastic rows this is
    /// exactly 1/k; kept data-driven so it stays honest for any weights.
    pub fn mean_edge_weight(&self) -> f64 {
        let total: f64 = self.rows.iter().flatten().map(|&(_, w)| w).sum();
        total / (self.n * self.k) as f64
    }
}

/// The k nearest neighbors of node i (excluding i), ordered by ascending
/// (distance, id); ties go to the smaller id.
pub fn knn_neighbors(dm: &DistanceMatrix, i: usize, k: usize) -> Result<Vec<usize>> {
    let order = sorted_row(dm, i)?;
    if k >= dm.n() {
        return Err(Error::domain(format!("knn: k={k} must be < n={}", dm.n())));
    }
    Ok(order[..k].iter().map(|&(j, _)| j as usize).collect())
}

fn sorted_row(dm: &DistanceMatrix, i: usize) -> Result<Vec<(u32, f64)>> {
    let row = dm.row(i);
    if row.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain(format!("knn: non-finite distance in row {i}")));
    }
    let mut order: Vec<(u32, f64)> = (0..dm.n())
        .filter(|&j| j != i)
        .map(|j| (j as u32, row[j]))
        .collect();
    order.sort_unstable_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(order)
}

/// Softmax weights over the k-nearest-neighbor prefix of a sorted row. The
/// exponent is dist / temperature with the sign picked by `sign`, where the
/// temperature is the median neighbor distance (floored at a tiny epsilon),
/// which makes the weights invariant to uniform distance scaling.
fn weighted_prefix(order: &[(u32, f64)], k: usize, sign: KernelSign) -> Vec<(u32, f64)> {
    let prefix = &order[..k];
    let mid = k / 2;
    let median = if k % 2 == 1 {
        prefix[mid].1
    } else {
        (prefix[mid - 1].1 + prefix[mid].1) / 2.0
    };
    let temperature = median.max(TEMPERATURE_EPS);
    let signed = match sign {
        KernelSign::Negated => -1.0,
        KernelSign::AsWritten => 1.0,
    };
    let exponents: Vec<f64> = prefix.iter().map(|&(_, d)| signed * d / temperature).collect();
    let max = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = exponents.iter().map(|e| (e - max).exp()).collect();
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    prefix
        .iter()
        .zip(weights)
        .map(|(&(j, _), w)| (j, w))
        .collect()
}

/// Single-scale weighted KNN adjacency.
pub fn build_adjacency(dm: &DistanceMatrix, k: usize, sign: KernelSign) -> Result<SparseAdjacency> {
    if k >= dm.n() {
        return Err(Error::domain(format!(
            "build_adjacency: k={k} must be < n={}",
            dm.n()
        )));
    }
    let rows: Vec<Vec<(u32, f64)>> = (0..dm.n())
        .into_par_iter()
        .map(|i| sorted_row(dm, i).map(|order| weighted_prefix(&order, k, sign)))
        .collect::<Result<_>>()?;
    Ok(SparseAdjacency { n: dm.n(), k, rows })
}

/// One adjacency per scale. Each row is sorted once and every scale reuses
/// its prefix, so neighbor supports nest across increasing k by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiScaleAdjacency {
    pub scales: ScaleList,
    pub mats: Vec<SparseAdjacency>,
}

impl MultiScaleAdjacency {
    pub fn n(&self) -> usize {
        self.mats.first().map_or(0, |m| m.n())
    }

    /// The adjacency built at scale k, if k is one of the scales.
    pub fn at_scale(&self, k: usize) -> Option<&SparseAdjacency> {
        self.scales.ks().iter().position(|&x| x == k).map(|i| &self.mats[i])
    }
}

pub fn build_multiscale(
    dm: &DistanceMatrix,
    scales: &ScaleList,
    sign: KernelSign,
) -> Result<MultiScaleAdjacency> {
    scales.validate_against(dm.n())?;
    let orders: Vec<Vec<(u32, f64)>> = (0..dm.n())
        .into_par_iter()
        .map(|i| sorted_row(dm, i))
        .collect::<Result<_>>()?;
    let mats = scales
        .ks()
        .iter()
        .map(|&k| SparseAdjacency {
            n: dm.n(),
            k,
            rows: orders
                .iter()
                .map(|order| weighted_prefix(order, k, sign))
                .collect(),
        })
        .collect();
    Ok(MultiScaleAdjacency {
        scales: scales.clone(),
        mats,
    })
}

const MAGIC: &[u8] = b"EFLXAJ1";

/// Adjacency file: magic, u32 n, u32 k, then per row k x (u32 id, f64 weight).
pub fn save_adjacency(adj: &SparseAdjacency, path: &Path) -> Result<()> {
    let mut w = io_util::create(path)?;
    io_util::write_all(&mut w, path, MAGIC)?;
    let werr = |e| io_util::write_error(path, e);
    w.write_u32::<LittleEndian>(adj.n as u32).map_err(werr)?;
    w.write_u32::<LittleEndian>(adj.k as u32).map_err(werr)?;
    for row in &adj.rows {
        for &(j, weight) in row {
            w.write_u32::<LittleEndian>(j).map_err(werr)?;
            w.write_f64::<LittleEndian>(weight).map_err(werr)?;
        }
    }
    w.flush().map_err(werr)?;
    Ok(())
}

pub fn load_adjacency(path: &Path) -> Result<SparseAdjacency> {
    let mut r = io_util::open(path)?;
    io_util::expect_magic(&mut r, path, MAGIC)?;
    let rerr = |e| io_util::read_error(path, e);
    let n = r.read_u32::<LittleEndian>().map_err(rerr)? as usize;
    let k = r.read_u32::<LittleEndian>().map_err(rerr)? as usize;
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = Vec::with_capacity(k);
        for _ in 0..k {
            let j = r.read_u32::<LittleEndian>().map_err(rerr)?;
            let weight = r.read_f64::<LittleEndian>().map_err(rerr)?;
            row.push((j, weight));
        }
        rows.push(row);
    }
    io_util::expect_eof(&mut r, path)?;
    Ok(SparseAdjacency { n, k, rows })
}
