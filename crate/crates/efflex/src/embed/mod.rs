//! The learnable pipeline: attention fusion of the multi-scale adjacencies,
//! node-feature construction, a lightweight sequential GCN, and the losses
//! comparing the embedding gram matrix against a ground-truth similarity
//! target.

mod store;
mod train;

pub use store::{load_embeddings, save_embeddings, EmbeddingFile};
pub use train::{train, train_config_hash, EpochRecord, TrainConfig, TrainingLog, DEFAULT_EPOCHS};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::DistanceMatrix;
use crate::error::{Error, Result};
use crate::graph::MultiScaleAdjacency;
use crate::numerics::{Matrix, ParamTensor, Tape, Var};

pub const DEFAULT_EMBEDDING_DIM: usize = 128;
pub const DEFAULT_GCN_HIDDEN: usize = 256;
pub const DEFAULT_FUSION_HIDDEN: usize = 16;
pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    #[default]
    Cosine,
    L1,
    Mse,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Cosine, LossKind::L1, LossKind::Mse];

    pub fn as_str(&self) -> &'static str {
        match self {
            LossKind::Cosine => "cosine",
            LossKind::L1 => "l1",
            LossKind::Mse => "mse",
        }
    }
}

/// How ground-truth distances become the similarity target the gram matrix
/// is trained against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GtTransform {
    /// Row-softmax of -GT/tau with the row-median temperature.
    #[default]
    SoftmaxSim,
    /// Plain negation of the distances.
    RawNeg,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    #[default]
    Attention,
    Addition,
    SingleScale(usize),
}

impl std::fmt::Display for FusionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FusionMode::Attention => write!(f, "attention"),
            FusionMode::Addition => write!(f, "addition"),
            FusionMode::SingleScale(k) => write!(f, "single_scale_k{k}"),
        }
    }
}

/// Two linear stages mapping the m-vector of per-scale statistics to m
/// attention logits, with a LeakyReLU in between.
#[derive(Clone, Debug)]
pub struct FusionParams {
    pub w1: ParamTensor,
    pub b1: ParamTensor,
    pub w2: ParamTensor,
    pub b2: ParamTensor,
}

impl FusionParams {
    pub fn init(num_scales: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        FusionParams {
            w1: ParamTensor::new("fusion.w1", crate::numerics::xavier_init(num_scales, hidden, rng)),
            b1: ParamTensor::new("fusion.b1", Matrix::zeros(1, hidden)),
            w2: ParamTensor::new("fusion.w2", crate::numerics::xavier_init(hidden, num_scales, rng)),
            b2: ParamTensor::new("fusion.b2", Matrix::zeros(1, num_scales)),
        }
    }

    pub fn num_scales(&self) -> usize {
        self.w1.value.rows()
    }

    pub(crate) fn into_tensors(self) -> Vec<ParamTensor> {
        vec![self.w1, self.b1, self.w2, self.b2]
    }
}

#[derive(Clone, Debug)]
pub struct GcnLayer {
    pub weight: ParamTensor,
    pub bias: ParamTensor,
}

/// Layer chain for the sequential GCN; weights are Xavier-initialized, biases
/// start at zero.
#[derive(Clone, Debug)]
pub struct GcnParams {
    pub layers: Vec<GcnLayer>,
}

impl GcnParams {
    pub fn init(dims: &[usize], rng: &mut impl Rng) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::domain("gcn: need at least input and output dims"));
        }
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| GcnLayer {
                weight: ParamTensor::new(
                    format!("gcn.{i}.weight"),
                    crate::numerics::xavier_init(w[0], w[1], rng),
                ),
                bias: ParamTensor::new(format!("gcn.{i}.bias"), Matrix::zeros(1, w[1])),
            })
            .collect();
        Ok(GcnParams { layers })
    }

    pub(crate) fn into_tensors(self) -> Vec<ParamTensor> {
        self.layers
            .into_iter()
            .flat_map(|l| [l.weight, l.bias])
            .collect()
    }
}

/// Fused adjacency with entries in [0, 1]; the mask marks cells where at
/// least one scale has an edge (everything else is structurally zero).
#[derive(Clone, Debug, PartialEq)]
pub struct FusedAdjacency {
    pub mat: Matrix,
    pub mask: Vec<bool>,
}

impl FusedAdjacency {
    pub fn n(&self) -> usize {
        self.mat.rows()
    }
}

/// One row of embeddings per trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    pub values: Matrix,
}

impl EmbeddingMatrix {
    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    /// Cosine similarity between two embedding rows; 0 when either is zero.
    pub fn cosine(&self, i: usize, j: usize) -> f64 {
        let a = self.row(i);
        let b = self.row(j);
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            dot / (na * nb)
        }
    }
}

pub(crate) fn dense_scales(msa: &MultiScaleAdjacency) -> Vec<Matrix> {
    msa.mats.iter().map(|m| m.to_dense()).collect()
}

pub(crate) fn union_mask(dense: &[Matrix]) -> Vec<bool> {
    let len = dense[0].data().len();
    let mut mask = vec![false; len];
    for m in dense {
        for (flag, &v) in mask.iter_mut().zip(m.data()) {
            *flag |= v > 0.0;
        }
    }
    mask
}

/// Per-scale descriptor feeding the attention stages: the mean edge weight
/// of each stacked matrix.
pub(crate) fn scale_descriptor(msa: &MultiScaleAdjacency) -> Matrix {
    let desc: Vec<f64> = msa.mats.iter().map(|m| m.mean_edge_weight()).collect();
    Matrix::from_vec(1, desc.len(), desc).expect("descriptor is finite")
}

/// Tape graph for attention fusion: descriptor -> two linear stages with
/// LeakyReLU -> softmax attention -> weighted combination -> min-max Norm.
/// `params` is [w1, b1, w2, b2]. Returns (fused adjacency, attention weights).
pub(crate) fn fusion_attention_graph(
    tape: &mut Tape,
    desc: &Matrix,
    dense: &[Matrix],
    mask: &[bool],
    params: [Var; 4],
) -> Result<(Var, Var)> {
    let [w1, b1, w2, b2] = params;
    let vd = tape.leaf(desc.clone());
    let stage1 = tape.matmul(vd, w1)?;
    let stage1 = tape.add_bias_row(stage1, b1)?;
    let hidden = tape.leaky_relu(stage1, LEAKY_SLOPE);
    let stage2 = tape.matmul(hidden, w2)?;
    let logits = tape.add_bias_row(stage2, b2)?;
    let attention = tape.softmax_rows(logits);
    let combined = tape.weighted_sum(attention, dense.to_vec())?;
    let fused = tape.minmax_norm(combined, mask.to_vec())?;
    Ok((fused, attention))
}

/// Tape graph for the sequential GCN: each layer computes
/// act(S' * (H * W) + bias), LeakyReLU between layers, identity on the last.
pub(crate) fn gcn_graph(
    tape: &mut Tape,
    fused: Var,
    features: Var,
    layers: &[(Var, Var)],
    slope: f64,
) -> Result<Var> {
    let mut h = features;
    let last = layers.len() - 1;
    for (idx, &(w, b)) in layers.iter().enumerate() {
        let hw = tape.matmul(h, w)?;
        let propagated = tape.matmul(fused, hw)?;
        let biased = tape.add_bias_row(propagated, b)?;
        h = if idx == last {
            biased
        } else {
            tape.leaky_relu(biased, slope)
        };
    }
    Ok(h)
}

/// Tape graph for the loss against a fixed similarity target.
pub(crate) fn loss_graph(
    tape: &mut Tape,
    embeddings: Var,
    target: &Matrix,
    kind: LossKind,
) -> Result<Var> {
    let gram = tape.matmul_nt(embeddings, embeddings)?;
    match kind {
        LossKind::Cosine => {
            let sim = tape.cosine_sim(target.clone(), gram)?;
            Ok(tape.affine(sim, -1.0, 1.0))
        }
        LossKind::L1 => tape.l1_against(target.clone(), gram),
        LossKind::Mse => tape.mse_against(target.clone(), gram),
    }
}

/// Converts a ground-truth distance matrix into the similarity target the
/// gram matrix is compared against.
pub fn similarity_target(gt: &DistanceMatrix, transform: GtTransform) -> Matrix {
    let n = gt.n();
    let mut out = Matrix::zeros(n, n);
    match transform {
        GtTransform::RawNeg => {
            for (o, &v) in out.data_mut().iter_mut().zip(gt.values()) {
                *o = -v;
            }
        }
        GtTransform::SoftmaxSim => {
            for i in 0..n {
                let row = gt.row(i);
                let mut off: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| row[j]).collect();
                off.sort_unstable_by(f64::total_cmp);
                let median = if off.is_empty() {
                    1.0
                } else if off.len() % 2 == 1 {
                    off[off.len() / 2]
                } else {
                    (off[off.len() / 2 - 1] + off[off.len() / 2]) / 2.0
                };
                let temperature = median.max(1e-12);
                for (j, &d) in row.iter().enumerate() {
                    out.set(i, j, -d / temperature);
                }
            }
            out = crate::numerics::softmax_rows(&out);
        }
    }
    out
}

/// Learnable fusion of the multi-scale adjacency set. Returns the fused
/// adjacency and the attention weights over the scales.
pub fn fuse(msa: &MultiScaleAdjacency, fp: &FusionParams) -> Result<(FusedAdjacency, Vec<f64>)> {
    if fp.num_scales() != msa.scales.len() {
        return Err(Error::domain(format!(
            "fuse: params expect {} scales, multiscale set has {}",
            fp.num_scales(),
            msa.scales.len()
        )));
    }
    let dense = dense_scales(msa);
    let mask = union_mask(&dense);
    let desc = scale_descriptor(msa);

    let mut tape = Tape::new();
    let vars = [
        tape.leaf(fp.w1.value.clone()),
        tape.leaf(fp.b1.value.clone()),
        tape.leaf(fp.w2.value.clone()),
        tape.leaf(fp.b2.value.clone()),
    ];
    let (fused, attention) = fusion_attention_graph(&mut tape, &desc, &dense, &mask, vars)?;
    Ok((
        FusedAdjacency {
            mat: tape.value(fused).clone(),
            mask,
        },
        tape.value(attention).row(0).to_vec(),
    ))
}

/// Ablation baseline: unweighted sum of the scales followed by min-max Norm.
pub fn fuse_addition(msa: &MultiScaleAdjacency) -> Result<FusedAdjacency> {
    let dense = dense_scales(msa);
    let mask = union_mask(&dense);
    let mut sum = Matrix::zeros(dense[0].rows(), dense[0].cols());
    for m in &dense {
        sum.add_assign(m);
    }
    let mut tape = Tape::new();
    let leaf = tape.leaf(sum);
    let fused = tape.minmax_norm(leaf, mask.clone())?;
    Ok(FusedAdjacency {
        mat: tape.value(fused).clone(),
        mask,
    })
}

/// The adjacency of one scale used directly, bypassing fusion.
pub fn single_scale(msa: &MultiScaleAdjacency, k: usize) -> Result<FusedAdjacency> {
    let adj = msa.at_scale(k).ok_or_else(|| {
        Error::Config(format!(
            "single_scale: k={k} is not one of the scales {:?}",
            msa.scales.ks()
        ))
    })?;
    let mat = adj.to_dense();
    let mask = mat.data().iter().map(|&v| v > 0.0).collect();
    Ok(FusedAdjacency { mat, mask })
}

/// Node features: row-normalized (S' + I).
pub fn node_features(sp: &FusedAdjacency) -> Result<Matrix> {
    let mut tape = Tape::new();
    let leaf = tape.leaf(sp.mat.clone());
    let fv = tape.self_loop_row_norm(leaf)?;
    Ok(tape.value(fv).clone())
}

/// Forward pass of the GCN for fixed parameters.
pub fn gcn_forward(sp: &FusedAdjacency, fv: &Matrix, gp: &GcnParams) -> Result<EmbeddingMatrix> {
    let mut tape = Tape::new();
    let fused = tape.leaf(sp.mat.clone());
    let features = tape.leaf(fv.clone());
    let layers: Vec<(Var, Var)> = gp
        .layers
        .iter()
        .map(|l| {
            (
                tape.leaf(l.weight.value.clone()),
                tape.leaf(l.bias.value.clone()),
            )
        })
        .collect();
    let out = gcn_graph(&mut tape, fused, features, &layers, LEAKY_SLOPE)?;
    Ok(EmbeddingMatrix {
        values: tape.value(out).clone(),
    })
}

/// Loss and analytic parameter gradients of the full attention-fusion
/// objective (fusion -> node features -> GCN -> loss) at fixed parameters.
/// Gradients come back in parameter order: fusion w1, b1, w2, b2, then each
/// GCN layer's weight and bias.
#[derive(Clone, Debug)]
pub struct ObjectiveEval {
    pub loss: f64,
    pub fusion_grads: Vec<Matrix>,
    pub gcn_grads: Vec<Matrix>,
}

pub fn objective(
    msa: &MultiScaleAdjacency,
    gt: &DistanceMatrix,
    fp: &FusionParams,
    gp: &GcnParams,
    kind: LossKind,
    transform: GtTransform,
) -> Result<ObjectiveEval> {
    if fp.num_scales() != msa.scales.len() {
        return Err(Error::domain("objective: fusion params do not match scales"));
    }
    let dense = dense_scales(msa);
    let mask = union_mask(&dense);
    let desc = scale_descriptor(msa);
    let target = similarity_target(gt, transform);

    let mut tape = Tape::new();
    let fusion_vars = [
        tape.leaf(fp.w1.value.clone()),
        tape.leaf(fp.b1.value.clone()),
        tape.leaf(fp.w2.value.clone()),
        tape.leaf(fp.b2.value.clone()),
    ];
    let layer_vars: Vec<(Var, Var)> = gp
        .layers
        .iter()
        .map(|l| {
            (
                tape.leaf(l.weight.value.clone()),
                tape.leaf(l.bias.value.clone()),
            )
        })
        .collect();
    let (fused, _) = fusion_attention_graph(&mut tape, &desc, &dense, &mask, fusion_vars)?;
    let features = tape.self_loop_row_norm(fused)?;
    let embeddings = gcn_graph(&mut tape, fused, features, &layer_vars, LEAKY_SLOPE)?;
    let loss_var = loss_graph(&mut tape, embeddings, &target, kind)?;
    let loss = tape.scalar(loss_var);
    tape.backward(loss_var)?;
    Ok(ObjectiveEval {
        loss,
        fusion_grads: fusion_vars.iter().map(|&v| tape.grad(v).clone()).collect(),
        gcn_grads: layer_vars
            .iter()
            .flat_map(|&(w, b)| [tape.grad(w).clone(), tape.grad(b).clone()])
            .collect(),
    })
}

/// Loss of an embedding matrix against the ground truth under the chosen
/// kind and ground-truth transform.
pub fn loss(
    em: &EmbeddingMatrix,
    gt: &DistanceMatrix,
    kind: LossKind,
    transform: GtTransform,
) -> Result<f64> {
    if gt.n() != em.n() {
        return Err(Error::domain(format!(
            "loss: gt has {} rows, embeddings {}",
            gt.n(),
            em.n()
        )));
    }
    let target = similarity_target(gt, transform);
    let mut tape = Tape::new();
    let leaf = tape.leaf(em.values.clone());
    let out = loss_graph(&mut tape, leaf, &target, kind)?;
    Ok(tape.scalar(out))
}
