use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{Dataset, Trajectory};
use crate::error::{Error, Result};

// Cluster template geometry: random-walk step length and heading jitter.
const STEP_MIN_M: f64 = 30.0;
const STEP_MAX_M: f64 = 70.0;
const TURN_MAX_RAD: f64 = 0.3;
// Clusters are laid out on a grid with this spacing so intra-cluster
// distances stay well below inter-cluster ones at the default noise level.
const CLUSTER_SPACING_M: f64 = 6_000.0;
// Whole-trajectory translation, in units of noise_m. A per-trajectory offset
// keeps pairwise distances inside a cluster distinguishable instead of
// concentrating them all at the iid-noise expectation.
const OFFSET_SCALE: f64 = 2.0;

/// Deterministic clustered test data: each cluster is a random-walk template
/// path, each trajectory a noisy copy of its cluster template (per-trajectory
/// translation plus per-point jitter, both proportional to `noise_m`).
pub fn generate_synthetic(
    n_clusters: usize,
    per_cluster: usize,
    points_per_traj: usize,
    noise_m: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_clusters < 1 || per_cluster < 1 {
        return Err(Error::domain("generate_synthetic: counts must be >= 1"));
    }
    if points_per_traj < 2 {
        return Err(Error::domain(
            "generate_synthetic: points_per_traj must be >= 2",
        ));
    }
    if !noise_m.is_finite() || noise_m < 0.0 {
        return Err(Error::domain("generate_synthetic: noise_m must be >= 0"));
    }

    let mut rng = crate::numerics::seeded_rng(seed);
    let grid_cols = (n_clusters as f64).sqrt().ceil() as usize;

    let mut trajectories = Vec::with_capacity(n_clusters * per_cluster);
    for cluster in 0..n_clusters {
        let cx = (cluster % grid_cols) as f64 * CLUSTER_SPACING_M;
        let cy = (cluster / grid_cols) as f64 * CLUSTER_SPACING_M;

        let mut template = Vec::with_capacity(points_per_traj);
        let mut heading: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let (mut x, mut y) = (cx, cy);
        template.push([x, y]);
        for _ in 1..points_per_traj {
            heading += rng.random_range(-TURN_MAX_RAD..TURN_MAX_RAD);
            let step = rng.random_range(STEP_MIN_M..STEP_MAX_M);
            x += heading.cos() * step;
            y += heading.sin() * step;
            template.push([x, y]);
        }

        for _ in 0..per_cluster {
            let ox: f64 = StandardNormal.sample(&mut rng);
            let oy: f64 = StandardNormal.sample(&mut rng);
            let (ox, oy) = (ox * OFFSET_SCALE * noise_m, oy * OFFSET_SCALE * noise_m);
            let points = template
                .iter()
                .map(|p| {
                    let jx: f64 = StandardNormal.sample(&mut rng);
                    let jy: f64 = StandardNormal.sample(&mut rng);
                    [p[0] + ox + jx * noise_m, p[1] + oy + jy * noise_m]
                })
                .collect();
            trajectories.push(Trajectory {
                id: trajectories.len() as u32,
                points,
            });
        }
    }

    Ok(Dataset {
        trajectories,
        anchor: (0.0, 0.0),
        grid_size_m: crate::data::DEFAULT_GRID_SIZE_M,
        provenance: format!(
            "synthetic:clusters={n_clusters},per_cluster={per_cluster},points={points_per_traj},noise_m={noise_m},seed={seed}"
        ),
    })
}

/// Cluster index of a synthetic trajectory id.
pub fn synthetic_cluster_of(id: usize, per_cluster: usize) -> usize {
    id / per_cluster
}
