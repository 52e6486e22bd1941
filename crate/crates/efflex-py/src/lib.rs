//! Python bindings for the trajectory-embedding pipeline: datasets, distance
//! matrices, multi-scale KNN graphs, training, and top-k evaluation.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use efflex::embed::{FusionMode, GtTransform, LossKind, TrainConfig};
use efflex::graph::{KernelSign, ScaleList};

fn to_py_err(e: efflex::Error) -> PyErr {
    match &e {
        efflex::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        efflex::Error::Numeric(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn points_from_py(pts: Vec<(f64, f64)>) -> Vec<[f64; 2]> {
    pts.into_iter().map(|(x, y)| [x, y]).collect()
}

fn parse_kind(kind: &str) -> PyResult<efflex::dist::DistanceKind> {
    kind.parse().map_err(to_py_err)
}

fn parse_sign(sign: &str) -> PyResult<KernelSign> {
    match sign {
        "negated" => Ok(KernelSign::Negated),
        "as_written" => Ok(KernelSign::AsWritten),
        other => Err(PyValueError::new_err(format!(
            "kernel_sign must be 'negated' or 'as_written', got '{other}'"
        ))),
    }
}

/// A set of trajectories in projected planar meters.
#[pyclass(name = "Dataset")]
struct PyDataset {
    inner: efflex::data::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Deterministic clustered test data.
    #[staticmethod]
    #[pyo3(signature = (n_clusters, per_cluster, points_per_traj, noise_m, seed=0))]
    fn synthetic(
        n_clusters: usize,
        per_cluster: usize,
        points_per_traj: usize,
        noise_m: f64,
        seed: u64,
    ) -> PyResult<Self> {
        efflex::data::generate_synthetic(n_clusters, per_cluster, points_per_traj, noise_m, seed)
            .map(|inner| PyDataset { inner })
            .map_err(to_py_err)
    }

    /// Porto taxi CSV (POLYLINE column of [lon, lat] pairs).
    #[staticmethod]
    #[pyo3(signature = (path, limit=None))]
    fn from_porto_csv(path: PathBuf, limit: Option<usize>) -> PyResult<Self> {
        efflex::data::parse_porto_csv(&path, limit)
            .map(|(inner, _)| PyDataset { inner })
            .map_err(to_py_err)
    }

    /// Geolife PLT directory tree (one trajectory per .plt file).
    #[staticmethod]
    #[pyo3(signature = (root, limit=None))]
    fn from_geolife_plt(root: PathBuf, limit: Option<usize>) -> PyResult<Self> {
        efflex::data::parse_geolife_plt(&root, limit)
            .map(|(inner, _)| PyDataset { inner })
            .map_err(to_py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        efflex::data::load_dataset(&path)
            .map(|inner| PyDataset { inner })
            .map_err(to_py_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        efflex::data::save_dataset(&self.inner, &path).map_err(to_py_err)
    }

    /// Length filter plus optional 50m-grid snapping; returns a new dataset.
    #[pyo3(signature = (min_points=50, grid_size_m=50.0, grid_snap=false))]
    fn preprocess(&self, min_points: usize, grid_size_m: f64, grid_snap: bool) -> PyResult<Self> {
        efflex::data::preprocess(&self.inner, min_points, grid_size_m, grid_snap)
            .map(|inner| PyDataset { inner })
            .map_err(to_py_err)
    }

    fn points(&self, id: usize) -> PyResult<Vec<(f64, f64)>> {
        if id >= self.inner.len() {
            return Err(PyValueError::new_err(format!("trajectory {id} out of range")));
        }
        Ok(self.inner.points_of(id).iter().map(|p| (p[0], p[1])).collect())
    }

    #[getter]
    fn anchor(&self) -> (f64, f64) {
        self.inner.anchor
    }

    #[getter]
    fn provenance(&self) -> String {
        self.inner.provenance.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, provenance={:?})", self.inner.len(), self.inner.provenance)
    }
}

/// Symmetric pairwise trajectory distances under one kernel.
#[pyclass(name = "DistanceMatrix")]
struct PyDistanceMatrix {
    inner: efflex::dist::DistanceMatrix,
}

#[pymethods]
impl PyDistanceMatrix {
    /// Full pairwise matrix; `kind` is one of dtw/frechet/hausdorff/euclidean.
    #[staticmethod]
    #[pyo3(signature = (dataset, kind="dtw", workers=0, resample_len=64))]
    fn pairwise(
        dataset: &PyDataset,
        kind: &str,
        workers: usize,
        resample_len: usize,
    ) -> PyResult<Self> {
        let kind = parse_kind(kind)?;
        efflex::dist::pairwise_matrix_with(&dataset.inner, kind, workers, resample_len)
            .map(|inner| PyDistanceMatrix { inner })
            .map_err(to_py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        efflex::dist::load_matrix(&path)
            .map(|inner| PyDistanceMatrix { inner })
            .map_err(to_py_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        efflex::dist::save_matrix(&self.inner, &path).map_err(to_py_err)
    }

    fn get(&self, i: usize, j: usize) -> PyResult<f64> {
        if i >= self.inner.n() || j >= self.inner.n() {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(self.inner.get(i, j))
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn kind(&self) -> String {
        self.inner.kind().to_string()
    }

    fn __repr__(&self) -> String {
        format!("DistanceMatrix(kind={}, n={})", self.inner.kind(), self.inner.n())
    }
}

/// Per-scale row-stochastic KNN adjacencies.
#[pyclass(name = "MultiScaleAdjacency")]
struct PyMultiScale {
    inner: efflex::graph::MultiScaleAdjacency,
}

#[pymethods]
impl PyMultiScale {
    #[staticmethod]
    #[pyo3(signature = (dm, scales, kernel_sign="negated"))]
    fn build(dm: &PyDistanceMatrix, scales: Vec<usize>, kernel_sign: &str) -> PyResult<Self> {
        let scales = ScaleList::new(scales).map_err(to_py_err)?;
        let sign = parse_sign(kernel_sign)?;
        efflex::graph::build_multiscale(&dm.inner, &scales, sign)
            .map(|inner| PyMultiScale { inner })
            .map_err(to_py_err)
    }

    /// Neighbor (id, weight) pairs of one row at one scale.
    fn row(&self, k: usize, i: usize) -> PyResult<Vec<(u32, f64)>> {
        let adj = self
            .inner
            .at_scale(k)
            .ok_or_else(|| PyValueError::new_err(format!("no scale k={k}")))?;
        if i >= adj.n() {
            return Err(PyValueError::new_err("row out of range"));
        }
        Ok(adj.row(i).to_vec())
    }

    #[getter]
    fn scales(&self) -> Vec<usize> {
        self.inner.scales.ks().to_vec()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("MultiScaleAdjacency(n={}, scales={:?})", self.inner.n(), self.inner.scales.ks())
    }
}

/// Trained trajectory embeddings, one row per trajectory.
#[pyclass(name = "Embeddings")]
struct PyEmbeddings {
    inner: efflex::embed::EmbeddingMatrix,
}

#[pymethods]
impl PyEmbeddings {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        efflex::embed::load_embeddings(&path)
            .map(|f| PyEmbeddings {
                inner: f.embeddings,
            })
            .map_err(to_py_err)
    }

    #[pyo3(signature = (path, seed=0))]
    fn save(&self, path: PathBuf, seed: u64) -> PyResult<()> {
        efflex::embed::save_embeddings(&self.inner, seed, [0u8; 32], &path).map_err(to_py_err)
    }

    fn row(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.inner.n() {
            return Err(PyValueError::new_err("row out of range"));
        }
        Ok(self.inner.row(i).to_vec())
    }

    fn cosine(&self, i: usize, j: usize) -> PyResult<f64> {
        if i >= self.inner.n() || j >= self.inner.n() {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(self.inner.cosine(i, j))
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __repr__(&self) -> String {
        format!("Embeddings(n={}, dim={})", self.inner.n(), self.inner.dim())
    }
}

type EpochLog = Vec<(usize, f64, f64)>;

/// Trains fusion + GCN against the ground-truth matrix. Returns the
/// embeddings and the per-epoch (epoch, loss, lr) log.
#[pyfunction]
#[pyo3(signature = (
    dataset, gt, graph,
    embedding_dim=128, hidden_dim=256, fusion_hidden=16, epochs=50, seed=0,
    loss="cosine", fusion="attention", single_scale_k=None,
    gt_transform="softmax_sim", base_lr=0.001, lr_gamma=0.1, lr_step_epochs=5
))]
#[allow(clippy::too_many_arguments)]
fn train(
    dataset: &PyDataset,
    gt: &PyDistanceMatrix,
    graph: &PyMultiScale,
    embedding_dim: usize,
    hidden_dim: usize,
    fusion_hidden: usize,
    epochs: usize,
    seed: u64,
    loss: &str,
    fusion: &str,
    single_scale_k: Option<usize>,
    gt_transform: &str,
    base_lr: f64,
    lr_gamma: f64,
    lr_step_epochs: u32,
) -> PyResult<(PyEmbeddings, EpochLog)> {
    let loss_kind = match loss {
        "cosine" => LossKind::Cosine,
        "l1" => LossKind::L1,
        "mse" => LossKind::Mse,
        other => return Err(PyValueError::new_err(format!("unknown loss '{other}'"))),
    };
    let fusion_mode = match (fusion, single_scale_k) {
        ("attention", None) => FusionMode::Attention,
        ("addition", None) => FusionMode::Addition,
        ("single_scale", Some(k)) => FusionMode::SingleScale(k),
        ("single_scale", None) => {
            return Err(PyValueError::new_err("single_scale fusion needs single_scale_k"))
        }
        (other, _) => return Err(PyValueError::new_err(format!("unknown fusion '{other}'"))),
    };
    let transform = match gt_transform {
        "softmax_sim" => GtTransform::SoftmaxSim,
        "raw_neg" => GtTransform::RawNeg,
        other => {
            return Err(PyValueError::new_err(format!("unknown gt_transform '{other}'")))
        }
    };
    let cfg = TrainConfig {
        scales: graph.inner.scales.clone(),
        embedding_dim,
        hidden_dim,
        fusion_hidden,
        epochs,
        lr: efflex::numerics::LrSchedule {
            base_lr,
            gamma: lr_gamma,
            step_epochs: lr_step_epochs,
        },
        seed,
        gt_kind: gt.inner.kind(),
        gt_transform: transform,
        loss_kind,
        fusion_mode,
    };
    let (em, log) = efflex::embed::train(&dataset.inner, &gt.inner, &graph.inner, &cfg)
        .map_err(to_py_err)?;
    Ok((
        PyEmbeddings { inner: em },
        log.records.iter().map(|r| (r.epoch, r.loss, r.lr)).collect(),
    ))
}

/// HR@10 / HR@50 / R10@50 averaged over every query.
#[pyfunction]
fn evaluate<'py>(py: Python<'py>, em: &PyEmbeddings, gt: &PyDistanceMatrix) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let report = efflex::eval::evaluate(&em.inner, &gt.inner).map_err(to_py_err)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("hr10", report.hr10)?;
    dict.set_item("hr50", report.hr50)?;
    dict.set_item("r10_50", report.r10_50)?;
    dict.set_item("n", report.n)?;
    dict.set_item("distance", report.distance)?;
    let per_query: Vec<(usize, f64, f64, f64)> = report
        .per_query
        .iter()
        .map(|p| (p.query, p.hr10, p.hr50, p.r10_50))
        .collect();
    dict.set_item("per_query", per_query)?;
    Ok(dict)
}

/// Top candidates for a query by embedding cosine similarity.
#[pyfunction]
fn rank_by_embedding(em: &PyEmbeddings, query: usize, top: usize) -> PyResult<Vec<(usize, f64)>> {
    efflex::eval::rank_by_embedding(&em.inner, query, top)
        .map(|r| r.entries)
        .map_err(to_py_err)
}

/// Top candidates for a query by ascending ground-truth distance.
#[pyfunction]
fn rank_by_distance(dm: &PyDistanceMatrix, query: usize, top: usize) -> PyResult<Vec<(usize, f64)>> {
    efflex::eval::rank_by_distance(&dm.inner, query, top)
        .map(|r| r.entries)
        .map_err(to_py_err)
}

#[pyfunction]
fn dtw(a: Vec<(f64, f64)>, b: Vec<(f64, f64)>) -> PyResult<f64> {
    efflex::dist::dtw(&points_from_py(a), &points_from_py(b)).map_err(to_py_err)
}

#[pyfunction]
fn discrete_frechet(a: Vec<(f64, f64)>, b: Vec<(f64, f64)>) -> PyResult<f64> {
    efflex::dist::discrete_frechet(&points_from_py(a), &points_from_py(b)).map_err(to_py_err)
}

#[pyfunction]
fn hausdorff(a: Vec<(f64, f64)>, b: Vec<(f64, f64)>) -> PyResult<f64> {
    efflex::dist::hausdorff(&points_from_py(a), &points_from_py(b)).map_err(to_py_err)
}

#[pyfunction]
#[pyo3(signature = (a, b, resample_len=64))]
fn euclidean_aligned(a: Vec<(f64, f64)>, b: Vec<(f64, f64)>, resample_len: usize) -> PyResult<f64> {
    efflex::dist::euclidean_aligned(&points_from_py(a), &points_from_py(b), resample_len)
        .map_err(to_py_err)
}

#[pymodule]
fn efflex_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyDistanceMatrix>()?;
    m.add_class::<PyMultiScale>()?;
    m.add_class::<PyEmbeddings>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(rank_by_embedding, m)?)?;
    m.add_function(wrap_pyfunction!(rank_by_distance, m)?)?;
    m.add_function(wrap_pyfunction!(dtw, m)?)?;
    m.add_function(wrap_pyfunction!(discrete_frechet, m)?)?;
    m.add_function(wrap_pyfunction!(hausdorff, m)?)?;
    m.add_function(wrap_pyfunction!(euclidean_aligned, m)?)?;
    Ok(())
}
