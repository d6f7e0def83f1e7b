//! Ranking metrics over prediction lists.
//!
//! Two metrics, evaluated at each requested K over the top-K prefix of
//! every prediction:
//!
//! ```text
//! HitRate@K = (1/N) * sum_i  1{ f_K(src_i) ∩ GroundTruth(src_i) ≠ ∅ }
//! Recall@K  = (1/N) * sum_i  |f_K(src_i) ∩ GroundTruth(src_i)| / |GroundTruth(src_i)|
//! ```
//!
//! When every ground-truth set is a singleton the two are identical, which
//! is why hit rate is only meaningful for 1:1 data; m:n ground truth should
//! be reported as recall. Source columns with an empty ground-truth set
//! (NA: no counterpart exists) are excluded from N by default; the
//! alternative policy scores them as a hit exactly when the prediction list
//! is empty.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::RankedPrediction;
use crate::schema::{ColumnRef, GroundTruth};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no ground truth entry for source column {column}")]
    MissingGroundTruth { column: ColumnRef },
    #[error("duplicate prediction for source column {column}")]
    DuplicateSource { column: ColumnRef },
    #[error("duplicate target {target} in the prediction for {column}")]
    DuplicateTarget {
        column: ColumnRef,
        target: ColumnRef,
    },
    #[error("k must be >= 1")]
    InvalidK,
    #[error("manifest and ground truth reference different schemas: {detail}")]
    SchemaMismatch { detail: String },
}

/// How source columns with empty ground-truth sets enter the metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NaPolicy {
    /// Leave NA columns out of the denominator entirely.
    #[default]
    Exclude,
    /// Count them: a hit (recall 1) exactly when nothing was predicted.
    Score,
}

/// Per-query contribution to HitRate@K, or `None` when the query is
/// excluded by the NA policy.
fn query_hit(
    prediction: &RankedPrediction,
    targets: &[ColumnRef],
    k: usize,
    policy: NaPolicy,
) -> Option<bool> {
    if targets.is_empty() {
        return match policy {
            NaPolicy::Exclude => None,
            NaPolicy::Score => Some(prediction.ranked_targets.is_empty()),
        };
    }
    let hit = prediction
        .ranked_targets
        .iter()
        .take(k)
        .any(|t| targets.contains(t));
    Some(hit)
}

/// Per-query contribution to Recall@K, or `None` when excluded.
fn query_recall(
    prediction: &RankedPrediction,
    targets: &[ColumnRef],
    k: usize,
    policy: NaPolicy,
) -> Option<f64> {
    if targets.is_empty() {
        return match policy {
            NaPolicy::Exclude => None,
            NaPolicy::Score => Some(if prediction.ranked_targets.is_empty() {
                1.0
            } else {
                0.0
            }),
        };
    }
    let found = targets
        .iter()
        .filter(|t| prediction.ranked_targets.iter().take(k).any(|p| p == *t))
        .count();
    Some(found as f64 / targets.len() as f64)
}

fn validate(predictions: &[RankedPrediction], gt: &GroundTruth) -> Result<(), EvalError> {
    let mut sources = HashSet::new();
    for prediction in predictions {
        if !sources.insert(prediction.source.clone()) {
            return Err(EvalError::DuplicateSource {
                column: prediction.source.clone(),
            });
        }
        let mut targets = HashSet::new();
        for target in &prediction.ranked_targets {
            if !targets.insert(target.clone()) {
                return Err(EvalError::DuplicateTarget {
                    column: prediction.source.clone(),
                    target: target.clone(),
                });
            }
        }
        if gt.targets(&prediction.source).is_none() {
            return Err(EvalError::MissingGroundTruth {
                column: prediction.source.clone(),
            });
        }
    }
    Ok(())
}

/// Fraction of queries whose top-K list contains at least one ground-truth
/// target.
pub fn hit_rate_at_k(
    predictions: &[RankedPrediction],
    gt: &GroundTruth,
    k: usize,
    policy: NaPolicy,
) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    validate(predictions, gt)?;
    let mut n = 0usize;
    let mut total = 0.0;
    for prediction in predictions {
        let targets = gt.targets(&prediction.source).expect("validated");
        if let Some(hit) = query_hit(prediction, targets, k, policy) {
            n += 1;
            if hit {
                total += 1.0;
            }
        }
    }
    Ok(if n == 0 { 0.0 } else { total / n as f64 })
}

/// Mean fraction of each query's ground-truth set found in its top-K list.
pub fn recall_at_k(
    predictions: &[RankedPrediction],
    gt: &GroundTruth,
    k: usize,
    policy: NaPolicy,
) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    validate(predictions, gt)?;
    let mut n = 0usize;
    let mut total = 0.0;
    for prediction in predictions {
        let targets = gt.targets(&prediction.source).expect("validated");
        if let Some(fraction) = query_recall(prediction, targets, k, policy) {
            n += 1;
            total += fraction;
        }
    }
    Ok(if n == 0 { 0.0 } else { total / n as f64 })
}

/// One row per scored query: hit indicator and recall fraction at each K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerQueryMetrics {
    pub source: ColumnRef,
    pub ground_truth_size: usize,
    pub hits: Vec<(usize, bool)>,
    pub recall: Vec<(usize, f64)>,
}

/// Aggregated metrics plus the per-query breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dataset: String,
    /// Number of scored queries (after the NA policy is applied).
    pub n_queries: usize,
    pub na_policy: NaPolicy,
    /// Queries left out of the denominator by [`NaPolicy::Exclude`].
    pub excluded_na: usize,
    /// True when any ground-truth set has more than one target (m:n data),
    /// in which case hit rate is not a meaningful headline metric.
    pub multi_target: bool,
    pub ks: Vec<usize>,
    pub hit_rate: Vec<(usize, f64)>,
    pub recall: Vec<(usize, f64)>,
    pub per_query: Vec<PerQueryMetrics>,
}

/// Evaluate predictions at every K in `ks`.
pub fn evaluate(
    dataset: &str,
    predictions: &[RankedPrediction],
    gt: &GroundTruth,
    ks: &[usize],
    policy: NaPolicy,
) -> Result<MetricsReport, EvalError> {
    let mut ks: Vec<usize> = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() || ks[0] == 0 {
        return Err(EvalError::InvalidK);
    }
    validate(predictions, gt)?;

    let mut hit_rate = Vec::new();
    let mut recall = Vec::new();
    for &k in &ks {
        hit_rate.push((k, hit_rate_at_k(predictions, gt, k, policy)?));
        recall.push((k, recall_at_k(predictions, gt, k, policy)?));
    }

    let mut per_query = Vec::new();
    let mut excluded_na = 0usize;
    for prediction in predictions {
        let targets = gt.targets(&prediction.source).expect("validated");
        if targets.is_empty() && policy == NaPolicy::Exclude {
            excluded_na += 1;
            continue;
        }
        per_query.push(PerQueryMetrics {
            source: prediction.source.clone(),
            ground_truth_size: targets.len(),
            hits: ks
                .iter()
                .map(|&k| {
                    (
                        k,
                        query_hit(prediction, targets, k, policy).expect("scored"),
                    )
                })
                .collect(),
            recall: ks
                .iter()
                .map(|&k| {
                    (
                        k,
                        query_recall(prediction, targets, k, policy).expect("scored"),
                    )
                })
                .collect(),
        });
    }

    Ok(MetricsReport {
        dataset: dataset.to_string(),
        n_queries: per_query.len(),
        na_policy: policy,
        excluded_na,
        multi_target: gt.has_multi_target(),
        ks,
        hit_rate,
        recall,
        per_query,
    })
}

impl MetricsReport {
    /// Human-readable table, percentages to two decimals. Hit rate is
    /// suppressed (with a note) for m:n ground truth unless forced.
    pub fn render_table(&self, force_hit_rate: bool) -> String {
        let show_hit_rate = force_hit_rate || !self.multi_target;
        let mut out = String::new();
        out.push_str(&format!(
            "Dataset: {}  (N = {} scored queries, {} NA excluded)\n",
            self.dataset, self.n_queries, self.excluded_na
        ));
        if show_hit_rate {
            out.push_str(&format!(
                "{:<6}{:>12}{:>12}\n",
                "K", "HitRate@K", "Recall@K"
            ));
            for ((k, hr), (_, rc)) in self.hit_rate.iter().zip(&self.recall) {
                out.push_str(&format!(
                    "{:<6}{:>11.2}%{:>11.2}%\n",
                    k,
                    hr * 100.0,
                    rc * 100.0
                ));
            }
        } else {
            out.push_str(&format!("{:<6}{:>12}\n", "K", "Recall@K"));
            for (k, rc) in &self.recall {
                out.push_str(&format!("{:<6}{:>11.2}%\n", k, rc * 100.0));
            }
            out.push_str(
                "note: ground truth contains m:n mappings; hit rate is suppressed because it assumes a single target per query (use --force to print it).\n",
            );
        }
        out
    }
}

/// Per-query detail rows: source, expected targets, and the first two
/// predictions, for qualitative inspection of near-misses.
pub fn per_query_detail_csv(predictions: &[RankedPrediction], gt: &GroundTruth) -> String {
    let mut out = String::from("source,expected_targets,prediction_1,prediction_2\n");
    for prediction in predictions {
        let expected = gt
            .targets(&prediction.source)
            .map(|targets| {
                if targets.is_empty() {
                    "NA".to_string()
                } else {
                    targets
                        .iter()
                        .map(ToString::to_string)
                        .collect::<Vec<_>>()
                        .join("; ")
                }
            })
            .unwrap_or_default();
        let first = prediction
            .ranked_targets
            .first()
            .map(ToString::to_string)
            .unwrap_or_default();
        let second = prediction
            .ranked_targets
            .get(1)
            .map(ToString::to_string)
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{}\n",
            prediction.source, expected, first, second
        ));
    }
    out
}
