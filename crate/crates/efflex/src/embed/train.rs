use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::dist::{DistanceKind, DistanceMatrix};
use crate::embed::{
    dense_scales, fuse_addition, fusion_attention_graph, gcn_graph, loss_graph, scale_descriptor,
    similarity_target, single_scale, union_mask, EmbeddingMatrix, FusionMode, FusionParams,
    GcnParams, GtTransform, LossKind, DEFAULT_EMBEDDING_DIM, DEFAULT_FUSION_HIDDEN,
    DEFAULT_GCN_HIDDEN, LEAKY_SLOPE,
};
use crate::error::{Error, Result};
use crate::graph::{MultiScaleAdjacency, ScaleList};
use crate::numerics::{AdamW, LrSchedule, Matrix, ParamTensor, Tape, Var};

pub const DEFAULT_EPOCHS: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub scales: ScaleList,
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub fusion_hidden: usize,
    pub epochs: usize,
    pub lr: LrSchedule,
    pub seed: u64,
    pub gt_kind: DistanceKind,
    pub gt_transform: GtTransform,
    pub loss_kind: LossKind,
    pub fusion_mode: FusionMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            scales: ScaleList::default(),
            embedding_dim: DEFAULT_EMBEDDING_DIM,
            hidden_dim: DEFAULT_GCN_HIDDEN,
            fusion_hidden: DEFAULT_FUSION_HIDDEN,
            epochs: DEFAULT_EPOCHS,
            lr: LrSchedule::default(),
            seed: 0,
            gt_kind: DistanceKind::Dtw,
            gt_transform: GtTransform::SoftmaxSim,
            loss_kind: LossKind::Cosine,
            fusion_mode: FusionMode::Attention,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim < 1 {
            return Err(Error::Config("train: embedding_dim must be >= 1".into()));
        }
        if self.hidden_dim < 1 || self.fusion_hidden < 1 {
            return Err(Error::Config("train: hidden widths must be >= 1".into()));
        }
        if self.epochs < 1 {
            return Err(Error::Config("train: epochs must be >= 1".into()));
        }
        self.lr.validate()?;
        if let FusionMode::SingleScale(k) = self.fusion_mode {
            if !self.scales.ks().contains(&k) {
                return Err(Error::Config(format!(
                    "train: single_scale k={k} is not one of the scales {:?}",
                    self.scales.ks()
                )));
            }
        }
        Ok(())
    }
}

/// SHA-256 of the canonical JSON encoding; ties artifacts to the exact
/// configuration that produced them.
pub fn train_config_hash(cfg: &TrainConfig) -> [u8; 32] {
    let json = serde_json::to_string(cfg).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(json.as_bytes());
    hasher.finalize().into()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
}

/// Per-epoch loss and learning rate, serialized as "epoch,loss,lr" lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<EpochRecord>,
}

impl TrainingLog {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&format!("{},{:e},{:e}\n", r.epoch, r.loss, r.lr));
        }
        out
    }

    pub fn first_loss(&self) -> Option<f64> {
        self.records.first().map(|r| r.loss)
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss)
    }
}

enum FusionStage {
    /// Learnable attention: fusion parameters occupy the first four slots of
    /// the parameter vector.
    Attention {
        desc: Matrix,
        dense: Vec<Matrix>,
        mask: Vec<bool>,
    },
    /// Fixed fused adjacency (addition fusion or a single scale).
    Fixed(Matrix),
}

/// Trains fusion + GCN jointly against the ground-truth matrix and returns
/// the final embeddings with the per-epoch log. Deterministic for a fixed
/// seed.
pub fn train(
    ds: &Dataset,
    gt: &DistanceMatrix,
    msa: &MultiScaleAdjacency,
    cfg: &TrainConfig,
) -> Result<(EmbeddingMatrix, TrainingLog)> {
    cfg.validate()?;
    let n = ds.len();
    if gt.n() != n || msa.n() != n {
        return Err(Error::domain(format!(
            "train: inconsistent sizes (dataset {n}, gt {}, graph {})",
            gt.n(),
            msa.n()
        )));
    }
    if msa.scales != cfg.scales {
        return Err(Error::Config(format!(
            "train: config scales {:?} do not match graph scales {:?}",
            cfg.scales.ks(),
            msa.scales.ks()
        )));
    }
    if gt.kind() != cfg.gt_kind {
        return Err(Error::Config(format!(
            "train: ground truth is {} but config expects {}",
            gt.kind(),
            cfg.gt_kind
        )));
    }

    let mut rng = crate::numerics::seeded_rng(cfg.seed);
    let stage = match cfg.fusion_mode {
        FusionMode::Attention => {
            let dense = dense_scales(msa);
            let mask = union_mask(&dense);
            FusionStage::Attention {
                desc: scale_descriptor(msa),
                dense,
                mask,
            }
        }
        FusionMode::Addition => FusionStage::Fixed(fuse_addition(msa)?.mat),
        FusionMode::SingleScale(k) => FusionStage::Fixed(single_scale(msa, k)?.mat),
    };

    let mut params: Vec<ParamTensor> = Vec::new();
    if matches!(stage, FusionStage::Attention { .. }) {
        params.extend(
            FusionParams::init(msa.scales.len(), cfg.fusion_hidden, &mut rng).into_tensors(),
        );
    }
    let gcn_dims = [n, cfg.hidden_dim, cfg.embedding_dim];
    let gcn_offset = params.len();
    params.extend(GcnParams::init(&gcn_dims, &mut rng)?.into_tensors());

    let target = similarity_target(gt, cfg.gt_transform);
    let mut optimizer = AdamW::default();
    let mut log = TrainingLog::default();

    for epoch in 0..cfg.epochs {
        let mut tape = Tape::new();
        let (vars, embeddings) = forward(&mut tape, &stage, &params, gcn_offset)?;
        let loss_var = loss_graph(&mut tape, embeddings, &target, cfg.loss_kind)?;
        let loss_value = tape.scalar(loss_var);
        if !loss_value.is_finite() {
            return Err(Error::Numeric(format!(
                "loss became non-finite at epoch {epoch}; param norms: {}",
                params
                    .iter()
                    .map(|p| format!("{}={:.3e}", p.name, p.value.frobenius_norm()))
                    .collect::<Vec<_>>()
                    .join(", ")
            )));
        }
        tape.backward(loss_var)?;
        for (param, &var) in params.iter_mut().zip(&vars) {
            param.grad = tape.grad(var).clone();
        }
        let lr = cfg.lr.lr_at(epoch as u32);
        optimizer.step(&mut params, lr);
        log.records.push(EpochRecord {
            epoch,
            loss: loss_value,
            lr,
        });
    }

    // one extra forward pass so the embeddings reflect the last step
    let mut tape = Tape::new();
    let (_, embeddings) = forward(&mut tape, &stage, &params, gcn_offset)?;
    let values = tape.value(embeddings).clone();
    if !values.is_finite() {
        return Err(Error::Numeric("final embeddings are non-finite".into()));
    }
    Ok((EmbeddingMatrix { values }, log))
}

fn forward(
    tape: &mut Tape,
    stage: &FusionStage,
    params: &[ParamTensor],
    gcn_offset: usize,
) -> Result<(Vec<Var>, Var)> {
    let vars: Vec<Var> = params
        .iter()
        .map(|p| tape.leaf(p.value.clone()))
        .collect();
    let fused = match stage {
        FusionStage::Attention { desc, dense, mask } => {
            let (fused, _) =
                fusion_attention_graph(tape, desc, dense, mask, [vars[0], vars[1], vars[2], vars[3]])?;
            fused
        }
        FusionStage::Fixed(mat) => tape.leaf(mat.clone()),
    };
    let features = tape.self_loop_row_norm(fused)?;
    let layers: Vec<(Var, Var)> = vars[gcn_offset..]
        .chunks(2)
        .map(|pair| (pair[0], pair[1]))
        .collect();
    let embeddings = gcn_graph(tape, fused, features, &layers, LEAKY_SLOPE)?;
    Ok((vars, embeddings))
}
