use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dist::{DistanceKind, DEFAULT_RESAMPLE_LEN};
use crate::embed::{FusionMode, GtTransform, LossKind, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::{KernelSign, ScaleList};
use crate::numerics::LrSchedule;

/// The whole pipeline in one JSON document. Unknown keys are rejected
/// everywhere; every field has a default, so `{}` is a valid config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub dataset: DatasetConfig,
    pub preprocess: PreprocessConfig,
    pub distance: DistanceConfig,
    pub graph: GraphConfig,
    pub train: TrainSection,
    pub seed: u64,
    /// 0 lets the runtime pick; EFFLEX_THREADS caps it either way.
    pub workers: usize,
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            dataset: DatasetConfig::default(),
            preprocess: PreprocessConfig::default(),
            distance: DistanceConfig::default(),
            graph: GraphConfig::default(),
            train: TrainSection::default(),
            seed: 7,
            workers: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Synthetic,
    Porto,
    Geolife,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub source: Source,
    /// CSV file (porto) or PLT directory root (geolife).
    pub path: Option<PathBuf>,
    pub limit: Option<usize>,
    pub synthetic: SyntheticParams,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            source: Source::Synthetic,
            path: None,
            limit: None,
            synthetic: SyntheticParams::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticParams {
    pub n_clusters: usize,
    pub per_cluster: usize,
    pub points_per_traj: usize,
    pub noise_m: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            n_clusters: 4,
            per_cluster: 50,
            points_per_traj: 60,
            noise_m: 25.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub min_points: usize,
    pub grid_size_m: f64,
    pub grid_snap: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            min_points: crate::data::DEFAULT_MIN_POINTS,
            grid_size_m: crate::data::DEFAULT_GRID_SIZE_M,
            grid_snap: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistanceConfig {
    pub kinds: Vec<DistanceKind>,
    pub resample_len: usize,
}

impl Default for DistanceConfig {
    fn default() -> Self {
        DistanceConfig {
            kinds: vec![DistanceKind::Dtw],
            resample_len: DEFAULT_RESAMPLE_LEN,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphConfig {
    pub scales: ScaleList,
    pub kernel_sign: KernelSign,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub fusion_hidden: usize,
    pub epochs: usize,
    pub lr: LrSchedule,
    pub loss: LossKind,
    pub fusion: FusionMode,
    /// None falls back to the first configured distance kind.
    pub gt_kind: Option<DistanceKind>,
    pub gt_transform: GtTransform,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            embedding_dim: crate::embed::DEFAULT_EMBEDDING_DIM,
            hidden_dim: crate::embed::DEFAULT_GCN_HIDDEN,
            fusion_hidden: crate::embed::DEFAULT_FUSION_HIDDEN,
            epochs: crate::embed::DEFAULT_EPOCHS,
            lr: LrSchedule::default(),
            loss: LossKind::default(),
            fusion: FusionMode::default(),
            gt_kind: None,
            gt_transform: GtTransform::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.distance.kinds.is_empty() {
            return Err(Error::Config("distance.kinds must not be empty".into()));
        }
        if self.distance.resample_len < 2 {
            return Err(Error::Config("distance.resample_len must be >= 2".into()));
        }
        if self.dataset.source != Source::Synthetic && self.dataset.path.is_none() {
            return Err(Error::Config(
                "dataset.path is required for porto/geolife sources".into(),
            ));
        }
        self.to_train_config().validate()
    }

    /// Ground-truth distance kind: explicit, or the first configured kind.
    pub fn gt_kind(&self) -> DistanceKind {
        self.train.gt_kind.unwrap_or(self.distance.kinds[0])
    }

    pub fn to_train_config(&self) -> TrainConfig {
        TrainConfig {
            scales: self.graph.scales.clone(),
            embedding_dim: self.train.embedding_dim,
            hidden_dim: self.train.hidden_dim,
            fusion_hidden: self.train.fusion_hidden,
            epochs: self.train.epochs,
            lr: self.train.lr,
            seed: self.seed,
            gt_kind: self.gt_kind(),
            gt_transform: self.train.gt_transform,
            loss_kind: self.train.loss,
            fusion_mode: self.train.fusion,
        }
    }

    /// SHA-256 over the canonical JSON of the fully resolved config.
    pub fn hash(&self) -> [u8; 32] {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        hasher.finalize().into()
    }

    pub fn hash_hex(&self) -> String {
        self.hash().iter().map(|b| format!("{b:02x}")).collect()
    }

    // artifact paths, all under output_dir
    pub fn dataset_path(&self) -> PathBuf {
        self.output_dir.join("dataset.eflxds")
    }

    pub fn matrix_path(&self, kind: DistanceKind) -> PathBuf {
        self.output_dir.join(format!("dist_{kind}.eflxdm"))
    }

    pub fn adjacency_path(&self, k: usize) -> PathBuf {
        self.output_dir.join(format!("adj_k{k}.eflxaj"))
    }

    pub fn embeddings_path(&self) -> PathBuf {
        self.output_dir.join("embeddings.eflxem")
    }

    pub fn training_log_path(&self) -> PathBuf {
        self.output_dir.join("training_log.csv")
    }

    pub fn report_path(&self) -> PathBuf {
        self.output_dir.join("report.json")
    }

    pub fn query_path(&self, id: usize) -> PathBuf {
        self.output_dir.join(format!("query_{id}.geojson"))
    }

    pub fn sweep_path(&self, axis: &str) -> PathBuf {
        self.output_dir.join(format!("sweep_{axis}.csv"))
    }
}

/// Loads a config file, applies `--set key.path=value` overrides, and
/// validates the result. Unknown keys fail deserialization.
pub fn load_config(path: &Path, sets: &[String]) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: invalid JSON: {e}", path.display())))?;
    for spec in sets {
        apply_set(&mut value, spec)?;
    }
    let cfg: PipelineConfig = serde_json::from_value(value)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Applies one `dotted.path=value` override. The value is parsed as JSON
/// when possible, otherwise taken as a string.
fn apply_set(root: &mut serde_json::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--set '{spec}' is not KEY=VALUE")))?;
    let parsed: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut cursor = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        if seg.is_empty() {
            return Err(Error::Config(format!("--set '{spec}' has an empty path segment")));
        }
        if !cursor.is_object() {
            return Err(Error::Config(format!(
                "--set '{spec}': '{}' is not an object",
                segments[..i].join(".")
            )));
        }
        let map = cursor.as_object_mut().expect("checked above");
        if i == segments.len() - 1 {
            map.insert(seg.to_string(), parsed);
            return Ok(());
        }
        cursor = map
            .entry(seg.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    unreachable!("split always yields at least one segment")
}
