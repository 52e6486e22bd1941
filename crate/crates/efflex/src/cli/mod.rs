//! Operator-facing pipeline: every stage reads and writes artifact files in
//! the configured output directory, so expensive distance matrices are
//! reused across training and ablation runs.

mod config;

pub use config::{
    load_config, DatasetConfig, DistanceConfig, GraphConfig, PipelineConfig, PreprocessConfig,
    Source, SyntheticParams, TrainSection,
};

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::data::{self, Dataset};
use crate::dist::{self, DistanceKind, DistanceMatrix};
use crate::embed::{self, FusionMode, LossKind, TrainConfig};
use crate::error::{Error, Result};
use crate::eval;
use crate::graph::{self, MultiScaleAdjacency};

/// One command at a time per output directory.
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(".efflex.lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(OutputLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "output directory is locked by another command; remove {} if stale",
                path.display()
            ))),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// Worker budget: the config value (0 = automatic), capped by the
/// EFFLEX_THREADS environment variable when set.
pub fn effective_workers(configured: usize) -> usize {
    let cap = std::env::var("EFFLEX_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v > 0);
    capped_workers(configured, cap)
}

fn capped_workers(configured: usize, cap: Option<usize>) -> usize {
    match (configured, cap) {
        (0, Some(cap)) => cap,
        (w, Some(cap)) => w.min(cap),
        (w, None) => w,
    }
}

fn length_stats(ds: &Dataset) -> (usize, f64, usize) {
    let mut min = usize::MAX;
    let mut max = 0;
    let mut total = 0usize;
    for t in &ds.trajectories {
        min = min.min(t.len());
        max = max.max(t.len());
        total += t.len();
    }
    (min, total as f64 / ds.len() as f64, max)
}

fn load_dataset_artifact(cfg: &PipelineConfig) -> Result<Dataset> {
    let path = cfg.dataset_path();
    if !path.exists() {
        return Err(Error::Config(format!(
            "dataset artifact {} not found; run `efflex ingest` first",
            path.display()
        )));
    }
    data::load_dataset(&path)
}

fn load_matrix_artifact(cfg: &PipelineConfig, kind: DistanceKind) -> Result<DistanceMatrix> {
    let path = cfg.matrix_path(kind);
    if !path.exists() {
        return Err(Error::Config(format!(
            "distance matrix {} not found; run `efflex distances` first",
            path.display()
        )));
    }
    dist::load_matrix(&path)
}

/// Parse/generate, preprocess, and persist the canonical dataset.
pub fn cmd_ingest(cfg: &PipelineConfig) -> Result<()> {
    let _lock = OutputLock::acquire(&cfg.output_dir)?;
    let started = Instant::now();
    let (raw, skipped) = match cfg.dataset.source {
        Source::Synthetic => {
            let p = cfg.dataset.synthetic;
            let ds = data::generate_synthetic(
                p.n_clusters,
                p.per_cluster,
                p.points_per_traj,
                p.noise_m,
                cfg.seed,
            )?;
            (ds, 0)
        }
        Source::Porto => {
            let path = cfg.dataset.path.as_ref().expect("validated");
            let (ds, stats) = data::parse_porto_csv(path, cfg.dataset.limit)?;
            (ds, stats.skipped)
        }
        Source::Geolife => {
            let path = cfg.dataset.path.as_ref().expect("validated");
            let (ds, stats) = data::parse_geolife_plt(path, cfg.dataset.limit)?;
            (ds, stats.skipped)
        }
    };
    let ds = data::preprocess(
        &raw,
        cfg.preprocess.min_points,
        cfg.preprocess.grid_size_m,
        cfg.preprocess.grid_snap,
    )?;
    data::save_dataset(&ds, &cfg.dataset_path())?;
    let (min, mean, max) = length_stats(&ds);
    println!(
        "ingested {} trajectories (skipped {skipped}, filtered {}) lengths min/mean/max {min}/{mean:.1}/{max} in {:.2}s -> {}",
        ds.len(),
        raw.len() - ds.len(),
        started.elapsed().as_secs_f64(),
        cfg.dataset_path().display()
    );
    Ok(())
}

/// One distance matrix artifact per configured kind.
pub fn cmd_distances(cfg: &PipelineConfig) -> Result<()> {
    let _lock = OutputLock::acquire(&cfg.output_dir)?;
    let ds = load_dataset_artifact(cfg)?;
    let workers = effective_workers(cfg.workers);
    for &kind in &cfg.distance.kinds {
        let started = Instant::now();
        let dm = dist::pairwise_matrix_with(&ds, kind, workers, cfg.distance.resample_len)?;
        dist::save_matrix(&dm, &cfg.matrix_path(kind))?;
        println!(
            "{kind}: {}x{} matrix in {:.2}s -> {}",
            dm.n(),
            dm.n(),
            started.elapsed().as_secs_f64(),
            cfg.matrix_path(kind).display()
        );
    }
    Ok(())
}

fn build_graph(cfg: &PipelineConfig, dm: &DistanceMatrix) -> Result<MultiScaleAdjacency> {
    cfg.graph.scales.validate_against(dm.n())?;
    graph::build_multiscale(dm, &cfg.graph.scales, cfg.graph.kernel_sign)
}

/// Builds the multi-scale graph, trains, and writes embeddings plus the
/// per-epoch log.
pub fn cmd_train(cfg: &PipelineConfig) -> Result<()> {
    let _lock = OutputLock::acquire(&cfg.output_dir)?;
    let ds = load_dataset_artifact(cfg)?;
    let gt = load_matrix_artifact(cfg, cfg.gt_kind())?;
    let msa = build_graph(cfg, &gt)?;
    for (k, adj) in cfg.graph.scales.ks().iter().zip(&msa.mats) {
        graph::save_adjacency(adj, &cfg.adjacency_path(*k))?;
    }
    let train_cfg = cfg.to_train_config();
    let started = Instant::now();
    let (em, log) = embed::train(&ds, &gt, &msa, &train_cfg)?;
    embed::save_embeddings(&em, cfg.seed, cfg.hash(), &cfg.embeddings_path())?;
    std::fs::write(cfg.training_log_path(), log.to_text())
        .map_err(|e| Error::io(cfg.training_log_path(), e))?;
    println!(
        "trained {} epochs ({} mode) loss {:.6} -> {:.6} in {:.2}s -> {}",
        train_cfg.epochs,
        train_cfg.fusion_mode,
        log.first_loss().unwrap_or(f64::NAN),
        log.last_loss().unwrap_or(f64::NAN),
        started.elapsed().as_secs_f64(),
        cfg.embeddings_path().display()
    );
    Ok(())
}

/// Evaluates embeddings against the ground-truth matrix and writes the
/// JSON report.
pub fn cmd_evaluate(cfg: &PipelineConfig) -> Result<()> {
    let _lock = OutputLock::acquire(&cfg.output_dir)?;
    let file = embed::load_embeddings(&cfg.embeddings_path())?;
    if file.config_hash != cfg.hash() {
        eprintln!(
            "warning: embeddings at {} were produced by a different config",
            cfg.embeddings_path().display()
        );
    }
    let gt = load_matrix_artifact(cfg, cfg.gt_kind())?;
    let mut report = eval::evaluate(&file.embeddings, &gt)?;
    report.config_hash = cfg.hash_hex();
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Config(format!("report serialization: {e}")))?;
    std::fs::write(cfg.report_path(), json + "\n")
        .map_err(|e| Error::io(cfg.report_path(), e))?;
    println!("distance    HR@10   HR@50   R10@50");
    println!(
        "{:<11} {:.4}  {:.4}  {:.4}",
        report.distance, report.hr10, report.hr50, report.r10_50
    );
    println!("report -> {}", cfg.report_path().display());
    Ok(())
}

/// Side-by-side predicted vs ground-truth top-k for one query, exported as
/// GeoJSON.
pub fn cmd_query(cfg: &PipelineConfig, query_id: usize, k: usize) -> Result<()> {
    let _lock = OutputLock::acquire(&cfg.output_dir)?;
    let ds = load_dataset_artifact(cfg)?;
    let file = embed::load_embeddings(&cfg.embeddings_path())?;
    let gt = load_matrix_artifact(cfg, cfg.gt_kind())?;
    let (pred, truth) = eval::topk_query(&file.embeddings, &gt, query_id, k)?;
    let geo = eval::query_geojson(&ds, query_id, &pred, &truth);
    let path = cfg.query_path(query_id);
    std::fs::write(&path, serde_json::to_string_pretty(&geo).expect("geojson") + "\n")
        .map_err(|e| Error::io(&path, e))?;
    print!("{}", eval::query_text(query_id, &pred, &truth));
    println!("geojson -> {}", path.display());
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepAxis {
    Dimension,
    Scale,
    Loss,
    Fusion,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::Dimension => "dimension",
            SweepAxis::Scale => "scale",
            SweepAxis::Loss => "loss",
            SweepAxis::Fusion => "fusion",
        }
    }
}

const DIMENSION_GRID: [usize; 5] = [16, 32, 64, 128, 256];

/// Runs the grid for one ablation axis; each run trains and evaluates
/// in-memory against the shared artifacts, and failures are recorded as rows
/// rather than aborting the sweep.
pub fn cmd_sweep(cfg: &PipelineConfig, axis: SweepAxis) -> Result<()> {
    let _lock = OutputLock::acquire(&cfg.output_dir)?;
    let ds = load_dataset_artifact(cfg)?;
    let gt = load_matrix_artifact(cfg, cfg.gt_kind())?;
    let msa = build_graph(cfg, &gt)?;
    let base = cfg.to_train_config();

    let variants: Vec<(String, TrainConfig)> = match axis {
        SweepAxis::Dimension => DIMENSION_GRID
            .iter()
            .map(|&d| {
                let mut c = base.clone();
                c.embedding_dim = d;
                (d.to_string(), c)
            })
            .collect(),
        SweepAxis::Scale => {
            let mut v: Vec<(String, TrainConfig)> = cfg
                .graph
                .scales
                .ks()
                .iter()
                .map(|&k| {
                    let mut c = base.clone();
                    c.fusion_mode = FusionMode::SingleScale(k);
                    (format!("k{k}"), c)
                })
                .collect();
            let mut multi = base.clone();
            multi.fusion_mode = FusionMode::Attention;
            v.push(("multi".into(), multi));
            v
        }
        SweepAxis::Loss => LossKind::ALL
            .iter()
            .map(|&l| {
                let mut c = base.clone();
                c.loss_kind = l;
                (l.as_str().to_string(), c)
            })
            .collect(),
        SweepAxis::Fusion => [FusionMode::Attention, FusionMode::Addition]
            .iter()
            .map(|&f| {
                let mut c = base.clone();
                c.fusion_mode = f;
                (f.to_string(), c)
            })
            .collect(),
    };

    let path = cfg.sweep_path(axis.as_str());
    let mut w = csv::Writer::from_path(&path).map_err(|e| {
        Error::Config(format!("cannot write {}: {e}", path.display()))
    })?;
    w.write_record(["axis", "value", "hr10", "hr50", "r10_50", "seconds", "status"])
        .map_err(|e| Error::Config(format!("csv: {e}")))?;
    for (label, train_cfg) in variants {
        let started = Instant::now();
        let outcome = embed::train(&ds, &gt, &msa, &train_cfg)
            .and_then(|(em, _)| eval::evaluate(&em, &gt));
        let seconds = started.elapsed().as_secs_f64();
        let record = match &outcome {
            Ok(report) => [
                axis.as_str().to_string(),
                label.clone(),
                format!("{:.6}", report.hr10),
                format!("{:.6}", report.hr50),
                format!("{:.6}", report.r10_50),
                format!("{seconds:.2}"),
                "ok".to_string(),
            ],
            Err(e) => [
                axis.as_str().to_string(),
                label.clone(),
                String::new(),
                String::new(),
                String::new(),
                format!("{seconds:.2}"),
                format!("error: {e}"),
            ],
        };
        println!("sweep {}={label}: {}", axis.as_str(), record[6]);
        w.write_record(&record)
            .map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    println!("sweep -> {}", path.display());
    Ok(())
}

/// Writes the default config as a starting point.
pub fn write_default_config(path: &Path) -> Result<()> {
    let cfg = PipelineConfig::default();
    let json = serde_json::to_string_pretty(&cfg).expect("config serializes");
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all((json + "\n").as_bytes()).map_err(|e| Error::io(path, e))?;
    Ok(())
}
