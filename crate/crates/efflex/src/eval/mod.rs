//! Top-k similarity search over embeddings, hitting-ratio / recall metrics,
//! and the side-by-side query task with its GeoJSON export.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data::{unproject, Dataset};
use crate::dist::DistanceMatrix;
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Ranked candidates for one query: (candidate id, score) in descending
/// score order, ascending id on ties, query excluded.
#[derive(Clone, Debug, PartialEq)]
pub struct Ranking {
    pub query: usize,
    pub entries: Vec<(usize, f64)>,
}

impl Ranking {
    pub fn ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|&(id, _)| id)
    }

    pub fn top_ids(&self, k: usize) -> Vec<usize> {
        self.entries[..k].iter().map(|&(id, _)| id).collect()
    }
}

fn rank_scores(query: usize, scores: Vec<(usize, f64)>, top: usize, n: usize) -> Result<Ranking> {
    if query >= n {
        return Err(Error::domain(format!("query id {query} out of range (n={n})")));
    }
    if top > n - 1 {
        return Err(Error::domain(format!(
            "top={top} exceeds candidate count {}",
            n - 1
        )));
    }
    let mut entries = scores;
    entries.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    entries.truncate(top);
    Ok(Ranking { query, entries })
}

/// Ranks candidates by cosine similarity of embedding rows.
pub fn rank_by_embedding(em: &EmbeddingMatrix, query: usize, top: usize) -> Result<Ranking> {
    let n = em.n();
    if query >= n {
        return Err(Error::domain(format!("query id {query} out of range (n={n})")));
    }
    let scores: Vec<(usize, f64)> = (0..n)
        .filter(|&j| j != query)
        .map(|j| (j, em.cosine(query, j)))
        .collect();
    rank_scores(query, scores, top, n)
}

/// Ranks candidates by ascending ground-truth distance. Scores are negated
/// distances so the shared descending-score order applies.
pub fn rank_by_distance(dm: &DistanceMatrix, query: usize, top: usize) -> Result<Ranking> {
    let n = dm.n();
    if query >= n {
        return Err(Error::domain(format!("query id {query} out of range (n={n})")));
    }
    let scores: Vec<(usize, f64)> = (0..n)
        .filter(|&j| j != query)
        .map(|j| (j, -dm.get(query, j)))
        .collect();
    rank_scores(query, scores, top, n)
}

/// |top-k(pred) ∩ top-k(truth)| / k
pub fn hitting_ratio(pred: &Ranking, truth: &Ranking, k: usize) -> Result<f64> {
    if pred.entries.len() < k || truth.entries.len() < k {
        return Err(Error::domain(format!(
            "hitting_ratio: need {k} entries, have {} and {}",
            pred.entries.len(),
            truth.entries.len()
        )));
    }
    let truth_top: std::collections::HashSet<usize> = truth.top_ids(k).into_iter().collect();
    let hits = pred.top_ids(k).iter().filter(|id| truth_top.contains(id)).count();
    Ok(hits as f64 / k as f64)
}

/// |top-50(pred) ∩ top-10(truth)| / 10
pub fn recall_10_50(pred: &Ranking, truth: &Ranking) -> Result<f64> {
    if pred.entries.len() < 50 || truth.entries.len() < 10 {
        return Err(Error::domain(format!(
            "recall_10_50: need 50 predicted and 10 truth entries, have {} and {}",
            pred.entries.len(),
            truth.entries.len()
        )));
    }
    let pred_top: std::collections::HashSet<usize> = pred.top_ids(50).into_iter().collect();
    let hits = truth.top_ids(10).iter().filter(|id| pred_top.contains(id)).count();
    Ok(hits as f64 / 10.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerQuery {
    pub query: usize,
    pub hr10: f64,
    pub hr50: f64,
    pub r10_50: f64,
}

/// Metrics averaged over every query, with the per-query breakdown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub hr10: f64,
    pub hr50: f64,
    pub r10_50: f64,
    pub n: usize,
    pub distance: String,
    pub config_hash: String,
    pub per_query: Vec<PerQuery>,
}

/// Runs the top-N similarity search task over all queries: HR@10, HR@50 and
/// R10@50 against the ground-truth ranking, each query excluded from its own
/// candidate pool.
pub fn evaluate(em: &EmbeddingMatrix, gt_dm: &DistanceMatrix) -> Result<EvalReport> {
    let n = em.n();
    if gt_dm.n() != n {
        return Err(Error::domain(format!(
            "evaluate: embeddings have {n} rows, gt matrix {}",
            gt_dm.n()
        )));
    }
    if n < 51 {
        return Err(Error::domain(format!(
            "evaluate: need at least 51 trajectories for top-50 metrics, have {n}"
        )));
    }
    let per_query: Vec<PerQuery> = (0..n)
        .into_par_iter()
        .map(|q| -> Result<PerQuery> {
            let pred = rank_by_embedding(em, q, 50)?;
            let truth = rank_by_distance(gt_dm, q, 50)?;
            Ok(PerQuery {
                query: q,
                hr10: hitting_ratio(&pred, &truth, 10)?,
                hr50: hitting_ratio(&pred, &truth, 50)?,
                r10_50: recall_10_50(&pred, &truth)?,
            })
        })
        .collect::<Result<_>>()?;

    let mean = |f: fn(&PerQuery) -> f64| per_query.iter().map(f).sum::<f64>() / n as f64;
    Ok(EvalReport {
        hr10: mean(|p| p.hr10),
        hr50: mean(|p| p.hr50),
        r10_50: mean(|p| p.r10_50),
        n,
        distance: gt_dm.kind().to_string(),
        config_hash: String::new(),
        per_query,
    })
}

/// Predicted vs ground-truth top-k for one query, for qualitative inspection.
pub fn topk_query(
    em: &EmbeddingMatrix,
    gt_dm: &DistanceMatrix,
    query: usize,
    k: usize,
) -> Result<(Ranking, Ranking)> {
    if em.n() != gt_dm.n() {
        return Err(Error::domain("topk_query: size mismatch"));
    }
    let pred = rank_by_embedding(em, query, k)?;
    let truth = rank_by_distance(gt_dm, query, k)?;
    Ok((pred, truth))
}

fn line_string(ds: &Dataset, id: usize) -> serde_json::Value {
    let coords: Vec<[f64; 2]> = ds
        .points_of(id)
        .iter()
        .map(|&p| {
            let (lon, lat) = unproject(p, ds.anchor);
            [lon, lat]
        })
        .collect();
    json!({ "type": "LineString", "coordinates": coords })
}

/// GeoJSON FeatureCollection of the query trajectory plus the predicted and
/// ground-truth rankings, with rank/score/role properties per feature.
pub fn query_geojson(
    ds: &Dataset,
    query: usize,
    pred: &Ranking,
    truth: &Ranking,
) -> serde_json::Value {
    let mut features = vec![json!({
        "type": "Feature",
        "geometry": line_string(ds, query),
        "properties": { "role": "query", "trajectory": query }
    })];
    for (rank, &(id, score)) in pred.entries.iter().enumerate() {
        features.push(json!({
            "type": "Feature",
            "geometry": line_string(ds, id),
            "properties": {
                "role": "prediction",
                "trajectory": id,
                "rank": rank + 1,
                "score": score
            }
        }));
    }
    for (rank, &(id, score)) in truth.entries.iter().enumerate() {
        features.push(json!({
            "type": "Feature",
            "geometry": line_string(ds, id),
            "properties": {
                "role": "ground_truth",
                "trajectory": id,
                "rank": rank + 1,
                "distance": -score
            }
        }));
    }
    json!({ "type": "FeatureCollection", "features": features })
}

/// Plain-text side-by-side comparison of the two rankings.
pub fn query_text(query: usize, pred: &Ranking, truth: &Ranking) -> String {
    let mut out = format!("query {query}: predicted vs ground truth\n");
    out.push_str("rank  predicted  cosine      truth  distance\n");
    for (i, (p, t)) in pred.entries.iter().zip(&truth.entries).enumerate() {
        out.push_str(&format!(
            "{:<5} {:<10} {:<11.6} {:<6} {:.3}\n",
            i + 1,
            p.0,
            p.1,
            t.0,
            -t.1
        ));
    }
    out
}
