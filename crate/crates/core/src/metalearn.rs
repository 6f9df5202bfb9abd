//! Meta-learning: rank aggregation of quality vectors into a meta-target,
//! meta-database assembly, a random-forest meta-model, and its holdout
//! evaluation against majority and random baselines.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discovery::{AlgorithmId, DEFAULT_TIMING_REPETITIONS};
use crate::eventlog::EventLog;
use crate::metafeatures::{extract_features, FeatureManifest};
use crate::quality::{evaluate_with, measure, EvaluationOptions, QualityVector};

#[derive(Debug, Error)]
pub enum MetaError {
    #[error("need at least two algorithms to rank, got {0}")]
    TooFewAlgorithms(usize),
    #[error("metric `{metric}` is missing for algorithm `{algorithm}`")]
    MissingMetric { algorithm: String, metric: &'static str },
    #[error("every log failed; the meta-database is empty")]
    EmptyDatabase,
    #[error("feature dimension {found} does not match the manifest ({expected})")]
    Dimension { expected: usize, found: usize },
    #[error("manifest fingerprint mismatch: model {model}, data {data}")]
    Fingerprint { model: String, data: String },
    #[error("split {0} must lie strictly between 0 and 1")]
    InvalidSplit(f64),
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error("test split is empty")]
    EmptyTestSplit,
    #[error("unsupported model format version {0}")]
    ModelVersion(u32),
    #[error("meta-database row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// Ranking

/// Metric columns in ranking order with their direction.
const METRICS: [(&str, bool); 5] = [("f", true), ("p", true), ("g", true), ("s", true), ("t", false)];

fn metric_value(q: &QualityVector, i: usize) -> f64 {
    [q.f, q.p, q.g, q.s, q.t][i]
}

/// Average (fractional) ranks, 1 = best. Ties share the mean of the
/// positions they occupy.
pub fn fractional_ranks(values: &[f64], higher_is_better: bool) -> Vec<f64> {
    values
        .iter()
        .map(|x| {
            let better = values
                .iter()
                .filter(|y| if higher_is_better { *y > x } else { *y < x })
                .count();
            let equal = values.iter().filter(|y| *y == x).count();
            better as f64 + (equal as f64 + 1.0) / 2.0
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub algorithm: String,
    pub quality: QualityVector,
    /// R_f, R_p, R_g, R_s and, when time is included, R_t.
    pub metric_ranks: Vec<f64>,
    pub average_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub rows: Vec<RankRow>,
    /// Index of the winning row.
    pub target: usize,
    /// Whether other rows share the winning average rank.
    pub tied: bool,
}

impl Ranking {
    pub fn target_name(&self) -> &str {
        &self.rows[self.target].algorithm
    }
}

/// Ranks each metric across algorithms (higher is better for f, p, g, s;
/// lower for t), averages the ranks, and picks the lowest average. Ties go to
/// the earliest row.
pub fn rank_algorithms<S: AsRef<str>>(scores: &[(S, QualityVector)], include_time: bool) -> Result<Ranking, MetaError> {
    if scores.len() < 2 {
        return Err(MetaError::TooFewAlgorithms(scores.len()));
    }
    let n_metrics = if include_time { 5 } else { 4 };
    for (name, q) in scores {
        for (i, (metric, _)) in METRICS.iter().enumerate().take(n_metrics) {
            if !metric_value(q, i).is_finite() {
                return Err(MetaError::MissingMetric {
                    algorithm: name.as_ref().to_string(),
                    metric,
                });
            }
        }
    }
    let mut rows: Vec<RankRow> = scores
        .iter()
        .map(|(name, q)| RankRow {
            algorithm: name.as_ref().to_string(),
            quality: *q,
            metric_ranks: Vec::with_capacity(n_metrics),
            average_rank: 0.0,
        })
        .collect();
    for (i, &(_, higher)) in METRICS.iter().enumerate().take(n_metrics) {
        let column: Vec<f64> = scores.iter().map(|(_, q)| metric_value(q, i)).collect();
        for (row, r) in rows.iter_mut().zip(fractional_ranks(&column, higher)) {
            row.metric_ranks.push(r);
        }
    }
    for row in &mut rows {
        row.average_rank = row.metric_ranks.iter().sum::<f64>() / n_metrics as f64;
    }
    let best = rows
        .iter()
        .map(|r| r.average_rank)
        .fold(f64::INFINITY, f64::min);
    let target = rows.iter().position(|r| r.average_rank == best).expect("non-empty");
    let tied = rows.iter().filter(|r| r.average_rank == best).count() > 1;
    Ok(Ranking { rows, target, tied })
}

// ---------------------------------------------------------------------------
// Meta-database

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaRow {
    pub log_id: String,
    pub features: Vec<f64>,
    pub target: AlgorithmId,
}

/// Per-log ranking details kept next to the database.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowDetail {
    pub log_id: String,
    pub scores: Vec<QualityVector>,
    pub average_ranks: Vec<f64>,
    pub tied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub log_id: String,
    pub algorithm: Option<AlgorithmId>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaDatabaseInfo {
    pub roster: Vec<AlgorithmId>,
    pub include_time: bool,
    pub manifest_fingerprint: String,
    pub dim: usize,
    pub details: Vec<RowDetail>,
    pub excluded: Vec<Exclusion>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaDatabase {
    pub rows: Vec<MetaRow>,
    pub info: MetaDatabaseInfo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    pub include_time: bool,
    /// When false, discovery is not timed and `t` is recorded as 0, which
    /// makes every output byte-reproducible.
    pub timing: bool,
    pub timing_repetitions: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            include_time: true,
            timing: true,
            timing_repetitions: DEFAULT_TIMING_REPETITIONS,
        }
    }
}

impl BuildOptions {
    /// Four-metric ranking without timing.
    pub fn untimed() -> Self {
        BuildOptions {
            include_time: false,
            timing: false,
            timing_repetitions: 1,
        }
    }
}

enum LogOutcome {
    Row(MetaRow, RowDetail),
    Excluded(Exclusion),
}

fn score_pair(log: &EventLog, algo: AlgorithmId, opts: &BuildOptions) -> Result<QualityVector, String> {
    let algorithm = algo.default_algorithm();
    if opts.timing {
        evaluate_with(
            log,
            &algorithm,
            EvaluationOptions {
                timing_repetitions: opts.timing_repetitions.max(1),
            },
        )
        .map(|e| e.quality)
        .map_err(|e| e.to_string())
    } else {
        let net = algorithm.discover(log).map_err(|e| e.to_string())?;
        measure(log, &net).map(|(q, _)| q).map_err(|e| e.to_string())
    }
}

fn process_log(log_id: &str, log: &EventLog, roster: &[AlgorithmId], opts: &BuildOptions) -> LogOutcome {
    let features = match extract_features(log_id, log) {
        Ok(f) => f,
        Err(e) => {
            return LogOutcome::Excluded(Exclusion {
                log_id: log_id.to_string(),
                algorithm: None,
                reason: format!("feature extraction: {e}"),
            })
        }
    };
    let scores: Vec<Result<QualityVector, String>> = roster
        .par_iter()
        .map(|&a| score_pair(log, a, opts))
        .collect();
    let mut ok = Vec::with_capacity(roster.len());
    for (&algo, s) in roster.iter().zip(scores) {
        match s {
            Ok(q) => ok.push((algo.as_str(), q)),
            Err(reason) => {
                return LogOutcome::Excluded(Exclusion {
                    log_id: log_id.to_string(),
                    algorithm: Some(algo),
                    reason,
                })
            }
        }
    }
    match rank_algorithms(&ok, opts.include_time) {
        Ok(ranking) => LogOutcome::Row(
            MetaRow {
                log_id: log_id.to_string(),
                features: features.values,
                target: roster[ranking.target],
            },
            RowDetail {
                log_id: log_id.to_string(),
                scores: ok.iter().map(|(_, q)| *q).collect(),
                average_ranks: ranking.rows.iter().map(|r| r.average_rank).collect(),
                tied: ranking.tied,
            },
        ),
        Err(e) => LogOutcome::Excluded(Exclusion {
            log_id: log_id.to_string(),
            algorithm: None,
            reason: e.to_string(),
        }),
    }
}

/// Extracts features, evaluates every roster algorithm and ranks them, for
/// every log. Logs with a failing (log, algorithm) pair are excluded and
/// recorded. Rows are ordered by log id.
pub fn build_meta_database(
    logs: &[(String, EventLog)],
    roster: &[AlgorithmId],
    opts: BuildOptions,
) -> Result<MetaDatabase, MetaError> {
    if roster.len() < 2 {
        return Err(MetaError::TooFewAlgorithms(roster.len()));
    }
    let outcomes: Vec<LogOutcome> = logs
        .par_iter()
        .map(|(id, log)| process_log(id, log, roster, &opts))
        .collect();
    let mut rows = Vec::new();
    let mut details = Vec::new();
    let mut excluded = Vec::new();
    for o in outcomes {
        match o {
            LogOutcome::Row(r, d) => {
                rows.push(r);
                details.push(d);
            }
            LogOutcome::Excluded(e) => {
                log::warn!("excluding log {}: {}", e.log_id, e.reason);
                excluded.push(e);
            }
        }
    }
    if rows.is_empty() {
        return Err(MetaError::EmptyDatabase);
    }
    rows.sort_by(|a, b| a.log_id.cmp(&b.log_id));
    details.sort_by(|a, b| a.log_id.cmp(&b.log_id));
    excluded.sort_by(|a, b| a.log_id.cmp(&b.log_id));
    let manifest = FeatureManifest::canonical();
    Ok(MetaDatabase {
        rows,
        info: MetaDatabaseInfo {
            roster: roster.to_vec(),
            include_time: opts.include_time,
            manifest_fingerprint: manifest.fingerprint(),
            dim: manifest.len(),
            details,
            excluded,
        },
    })
}

impl MetaDatabase {
    /// Row count per roster algorithm.
    pub fn class_distribution(&self) -> BTreeMap<AlgorithmId, usize> {
        let mut out: BTreeMap<AlgorithmId, usize> = self.info.roster.iter().map(|&a| (a, 0)).collect();
        for r in &self.rows {
            *out.entry(r.target).or_default() += 1;
        }
        out
    }

    fn class_index(&self, a: AlgorithmId) -> usize {
        self.info.roster.iter().position(|&r| r == a).expect("target in roster")
    }

    /// CSV: `log_id`, the manifest columns, `meta_target`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), MetaError> {
        let manifest = FeatureManifest::canonical();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["log_id"];
        header.extend(manifest.names());
        header.push("meta_target");
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.log_id.clone()];
            rec.extend(row.features.iter().map(|v| v.to_string()));
            rec.push(row.target.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_info<W: Write>(&self, out: W) -> Result<(), MetaError> {
        serde_json::to_writer_pretty(out, &self.info)?;
        Ok(())
    }

    pub fn read<R1: Read, R2: Read>(csv_in: R1, info_in: R2) -> Result<Self, MetaError> {
        let info: MetaDatabaseInfo = serde_json::from_reader(info_in)?;
        let manifest = FeatureManifest::canonical();
        if info.manifest_fingerprint != manifest.fingerprint() {
            return Err(MetaError::Fingerprint {
                model: manifest.fingerprint(),
                data: info.manifest_fingerprint,
            });
        }
        let mut r = csv::Reader::from_reader(csv_in);
        let width = r.headers()?.len();
        if width != manifest.len() + 2 {
            return Err(MetaError::Dimension {
                expected: manifest.len(),
                found: width.saturating_sub(2),
            });
        }
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = i + 2;
            let bad = |message: String| MetaError::Row { row, message };
            let features = rec
                .iter()
                .skip(1)
                .take(manifest.len())
                .map(|v| v.parse::<f64>().map_err(|e| bad(format!("`{v}`: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let target: AlgorithmId = rec[width - 1].parse().map_err(bad)?;
            if !info.roster.contains(&target) {
                return Err(bad(format!("target {target} is not in the roster")));
            }
            rows.push(MetaRow {
                log_id: rec[0].to_string(),
                features,
                target,
            });
        }
        Ok(MetaDatabase { rows, info })
    }
}

// ---------------------------------------------------------------------------
// Random forest

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// `None` means ⌈√dimension⌉.
    pub features_per_split: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            features_per_split: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Sample-weighted Gini decrease of this split, relative to the
        /// tree's bootstrap size.
        gain: f64,
    },
    Leaf {
        histogram: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    fn leaf(&self, x: &[f64]) -> &[usize] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                TreeNode::Leaf { histogram } => return histogram,
            }
        }
    }

    /// Class of the majority in the reached leaf; ties go to the lower index.
    pub fn predict(&self, x: &[f64]) -> usize {
        argmax_first(self.leaf(x))
    }
}

fn argmax_first(counts: &[usize]) -> usize {
    let best = counts.iter().copied().max().unwrap_or(0);
    counts.iter().position(|&c| c == best).unwrap_or(0)
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    params: ForestParams,
    mtry: usize,
    total: usize,
    nodes: Vec<TreeNode>,
}

impl TreeBuilder<'_> {
    fn histogram(&self, idx: &[usize]) -> Vec<usize> {
        let mut h = vec![0; self.n_classes];
        for &i in idx {
            h[self.y[i]] += 1;
        }
        h
    }

    /// Best threshold for one feature: (weighted child impurity, threshold).
    fn best_threshold(&self, idx: &[usize], feature: usize) -> Option<(f64, f64)> {
        let mut order: Vec<usize> = idx.to_vec();
        order.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]));
        let n = order.len();
        let mut left = vec![0usize; self.n_classes];
        let mut right = self.histogram(idx);
        let mut best: Option<(f64, f64)> = None;
        let min_leaf = self.params.min_samples_leaf.max(1);
        for k in 0..n - 1 {
            let c = self.y[order[k]];
            left[c] += 1;
            right[c] -= 1;
            let (v, w) = (self.x[order[k]][feature], self.x[order[k + 1]][feature]);
            if v == w {
                continue;
            }
            let (nl, nr) = (k + 1, n - k - 1);
            if nl < min_leaf || nr < min_leaf {
                continue;
            }
            let impurity = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
            if best.is_none_or(|(b, _)| impurity < b) {
                let mid = v + (w - v) / 2.0;
                // Guard against the midpoint rounding onto the upper value.
                let threshold = if mid < w { mid } else { v };
                best = Some((impurity, threshold));
            }
        }
        best
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let hist = self.histogram(&idx);
        let n = idx.len();
        let impurity = gini(&hist, n);
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { histogram: hist.clone() });
        if impurity == 0.0 || !depth_ok || n < 2 * self.params.min_samples_leaf.max(1) {
            return id;
        }
        let dim = self.x[0].len();
        let mut features: Vec<usize> = (0..dim).collect();
        features.shuffle(rng);
        let mut tried = 0;
        let mut best: Option<(f64, usize, f64)> = None;
        for f in features {
            if tried >= self.mtry {
                break;
            }
            let first = self.x[idx[0]][f];
            if idx.iter().all(|&i| self.x[i][f] == first) {
                continue;
            }
            tried += 1;
            if let Some((imp, thr)) = self.best_threshold(&idx, f) {
                if best.is_none_or(|(b, _, _)| imp < b) {
                    best = Some((imp, f, thr));
                }
            }
        }
        let Some((child_impurity, feature, threshold)) = best else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let gain = n as f64 / self.total as f64 * (impurity - child_impurity);
        let left = self.build(l, depth + 1, rng);
        let right = self.build(r, depth + 1, rng);
        self.nodes[id] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
            gain,
        };
        id
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaModel {
    pub format_version: u32,
    pub roster: Vec<AlgorithmId>,
    pub manifest_fingerprint: String,
    pub dim: usize,
    pub params: ForestParams,
    pub seed: u64,
    pub trees: Vec<DecisionTree>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub algorithm: AlgorithmId,
    /// Vote share per roster algorithm, in roster order.
    pub votes: Vec<(AlgorithmId, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    /// (feature, importance), most important first; ties in manifest order.
    pub ranked: Vec<(String, f64)>,
    /// Set when the forest has no split; importances are then all zero and
    /// not normalized.
    pub degenerate: bool,
}

fn tree_seed(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Trains a forest on raw rows; `y` holds class indices into `roster`.
pub fn train_forest(
    x: &[Vec<f64>],
    y: &[usize],
    roster: &[AlgorithmId],
    params: ForestParams,
    seed: u64,
) -> Result<MetaModel, MetaError> {
    let manifest = FeatureManifest::canonical();
    let dim = x.first().map_or(0, Vec::len);
    if let Some(bad) = x.iter().find(|r| r.len() != dim) {
        return Err(MetaError::Dimension {
            expected: dim,
            found: bad.len(),
        });
    }
    if x.is_empty() {
        return Err(MetaError::EmptyDatabase);
    }
    let mtry = params
        .features_per_split
        .unwrap_or_else(|| (dim as f64).sqrt().ceil() as usize)
        .clamp(1, dim.max(1));
    let n = x.len();
    let trees: Vec<DecisionTree> = (0..params.n_trees.max(1))
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_seed(seed, t as u64 + 1);
            let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut b = TreeBuilder {
                x,
                y,
                n_classes: roster.len(),
                params,
                mtry,
                total: n,
                nodes: Vec::new(),
            };
            b.build(sample, 0, &mut rng);
            DecisionTree { nodes: b.nodes }
        })
        .collect();
    Ok(MetaModel {
        format_version: MODEL_FORMAT_VERSION,
        roster: roster.to_vec(),
        manifest_fingerprint: if dim == manifest.len() {
            manifest.fingerprint()
        } else {
            format!("custom-{dim}")
        },
        dim,
        params,
        seed,
        trees,
    })
}

pub fn train_random_forest(db: &MetaDatabase, params: ForestParams, seed: u64) -> Result<MetaModel, MetaError> {
    let manifest = FeatureManifest::canonical();
    if db.info.manifest_fingerprint != manifest.fingerprint() {
        return Err(MetaError::Fingerprint {
            model: manifest.fingerprint(),
            data: db.info.manifest_fingerprint.clone(),
        });
    }
    if let Some(r) = db.rows.iter().find(|r| r.features.len() != manifest.len()) {
        return Err(MetaError::Dimension {
            expected: manifest.len(),
            found: r.features.len(),
        });
    }
    let x: Vec<Vec<f64>> = db.rows.iter().map(|r| r.features.clone()).collect();
    let y: Vec<usize> = db.rows.iter().map(|r| db.class_index(r.target)).collect();
    train_forest(&x, &y, &db.info.roster, params, seed)
}

impl MetaModel {
    fn check_dim(&self, x: &[f64]) -> Result<(), MetaError> {
        if x.len() != self.dim {
            return Err(MetaError::Dimension {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    fn votes(&self, x: &[f64]) -> Vec<usize> {
        let mut votes = vec![0usize; self.roster.len()];
        for t in &self.trees {
            votes[t.predict(x)] += 1;
        }
        votes
    }

    /// Class index by hard majority vote; ties go to roster order.
    pub fn predict_index(&self, x: &[f64]) -> Result<usize, MetaError> {
        self.check_dim(x)?;
        Ok(argmax_first(&self.votes(x)))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction, MetaError> {
        self.check_dim(x)?;
        let votes = self.votes(x);
        let total = votes.iter().sum::<usize>() as f64;
        Ok(Prediction {
            algorithm: self.roster[argmax_first(&votes)],
            votes: self
                .roster
                .iter()
                .zip(&votes)
                .map(|(&a, &v)| (a, v as f64 / total))
                .collect(),
        })
    }

    /// Mean decrease in Gini impurity: per tree normalized to 1, averaged
    /// over trees with at least one split, then normalized again.
    pub fn feature_importance_values(&self) -> (Vec<f64>, bool) {
        let mut total = vec![0.0; self.dim];
        let mut split_trees = 0usize;
        for t in &self.trees {
            let mut imp = vec![0.0; self.dim];
            for node in &t.nodes {
                if let TreeNode::Split { feature, gain, .. } = node {
                    imp[*feature] += gain.max(0.0);
                }
            }
            let s: f64 = imp.iter().sum();
            if s > 0.0 {
                split_trees += 1;
                for (acc, v) in total.iter_mut().zip(imp) {
                    *acc += v / s;
                }
            }
        }
        let s: f64 = total.iter().sum();
        if split_trees == 0 || s <= 0.0 {
            return (vec![0.0; self.dim], true);
        }
        (total.into_iter().map(|v| v / s).collect(), false)
    }

    pub fn feature_importance(&self, names: &[&str]) -> FeatureImportance {
        let (values, degenerate) = self.feature_importance_values();
        let mut ranked: Vec<(String, f64)> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (names.get(i).map_or_else(|| format!("f{i}"), |n| n.to_string()), v))
            .collect();
        // Stable sort keeps manifest order among ties.
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        FeatureImportance { ranked, degenerate }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, MetaError> {
        let m: MetaModel = serde_json::from_str(s)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(MetaError::ModelVersion(m.format_version));
        }
        for t in &m.trees {
            for n in &t.nodes {
                if let TreeNode::Split { feature, .. } = n {
                    if *feature >= m.dim {
                        return Err(MetaError::Dimension {
                            expected: m.dim,
                            found: *feature + 1,
                        });
                    }
                }
            }
        }
        Ok(m)
    }
}

// ---------------------------------------------------------------------------
// Evaluation

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationConfig {
    pub split: f64,
    pub repetitions: usize,
    pub seed: u64,
    pub forest: ForestParams,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            split: 0.75,
            repetitions: 30,
            seed: 0,
            forest: ForestParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub accuracy: f64,
    pub f_score: f64,
    pub accuracy_runs: Vec<f64>,
    pub f_score_runs: Vec<f64>,
}

impl ScoreSummary {
    fn from_runs(runs: &[(f64, f64)]) -> Self {
        let n = runs.len() as f64;
        ScoreSummary {
            accuracy: runs.iter().map(|r| r.0).sum::<f64>() / n,
            f_score: runs.iter().map(|r| r.1).sum::<f64>() / n,
            accuracy_runs: runs.iter().map(|r| r.0).collect(),
            f_score_runs: runs.iter().map(|r| r.1).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub roster: Vec<AlgorithmId>,
    pub repetitions: usize,
    pub split: f64,
    pub seed: u64,
    pub model: ScoreSummary,
    pub majority: ScoreSummary,
    pub random: ScoreSummary,
    /// Summed over repetitions; rows are true classes, columns predictions.
    pub confusion: Vec<Vec<usize>>,
    pub class_distribution: Vec<(AlgorithmId, usize)>,
}

pub fn accuracy(truth: &[usize], pred: &[usize]) -> f64 {
    let hits = truth.iter().zip(pred).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}

/// Unweighted mean of per-class F1 over the classes present in `truth`.
pub fn macro_f_score(truth: &[usize], pred: &[usize], n_classes: usize) -> f64 {
    let mut present = vec![false; n_classes];
    truth.iter().for_each(|&c| present[c] = true);
    let mut sum = 0.0;
    let mut k = 0;
    for c in (0..n_classes).filter(|&c| present[c]) {
        let tp = truth.iter().zip(pred).filter(|(t, p)| **t == c && **p == c).count() as f64;
        let fp = truth.iter().zip(pred).filter(|(t, p)| **t != c && **p == c).count() as f64;
        let fneg = truth.iter().zip(pred).filter(|(t, p)| **t == c && **p != c).count() as f64;
        let f1 = if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fneg) };
        sum += f1;
        k += 1;
    }
    if k == 0 {
        0.0
    } else {
        sum / k as f64
    }
}

/// Train/test indices. Stratified by class when every present class has at
/// least two members, plain random otherwise.
pub fn holdout_split(y: &[usize], split: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in y.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    if by_class.values().all(|v| v.len() >= 2) {
        for mut members in by_class.into_values() {
            members.shuffle(rng);
            let k = ((members.len() as f64 * split).round() as usize).clamp(1, members.len() - 1);
            train.extend_from_slice(&members[..k]);
            test.extend_from_slice(&members[k..]);
        }
    } else {
        let mut all: Vec<usize> = (0..y.len()).collect();
        all.shuffle(rng);
        let k = ((y.len() as f64 * split).round() as usize).min(y.len());
        train.extend_from_slice(&all[..k]);
        test.extend_from_slice(&all[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

struct RunResult {
    model: (f64, f64),
    majority: (f64, f64),
    random: (f64, f64),
    confusion: Vec<Vec<usize>>,
}

/// Repeated holdout evaluation of the forest against the majority-class and
/// uniform-random baselines.
pub fn evaluate_meta_model(db: &MetaDatabase, cfg: EvaluationConfig) -> Result<EvaluationReport, MetaError> {
    if !(cfg.split > 0.0 && cfg.split < 1.0) {
        return Err(MetaError::InvalidSplit(cfg.split));
    }
    if cfg.repetitions == 0 {
        return Err(MetaError::NoRepetitions);
    }
    let k = db.info.roster.len();
    let x: Vec<Vec<f64>> = db.rows.iter().map(|r| r.features.clone()).collect();
    let y: Vec<usize> = db.rows.iter().map(|r| db.class_index(r.target)).collect();
    let runs: Vec<RunResult> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut rng = tree_seed(cfg.seed, rep as u64 + 1);
            let (train, test) = holdout_split(&y, cfg.split, &mut rng);
            if test.is_empty() || train.is_empty() {
                return Err(MetaError::EmptyTestSplit);
            }
            let tx: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
            let ty: Vec<usize> = train.iter().map(|&i| y[i]).collect();
            let model = train_forest(&tx, &ty, &db.info.roster, cfg.forest, rng.random())?;
            let truth: Vec<usize> = test.iter().map(|&i| y[i]).collect();
            let pred: Vec<usize> = test
                .iter()
                .map(|&i| model.predict_index(&x[i]))
                .collect::<Result<_, _>>()?;
            let mut counts = vec![0usize; k];
            ty.iter().for_each(|&c| counts[c] += 1);
            let majority_class = argmax_first(&counts);
            let majority = vec![majority_class; truth.len()];
            let random: Vec<usize> = (0..truth.len()).map(|_| rng.random_range(0..k)).collect();
            let mut confusion = vec![vec![0usize; k]; k];
            for (&t, &p) in truth.iter().zip(&pred) {
                confusion[t][p] += 1;
            }
            let score = |p: &[usize]| (accuracy(&truth, p), macro_f_score(&truth, p, k));
            Ok(RunResult {
                model: score(&pred),
                majority: score(&majority),
                random: score(&random),
                confusion,
            })
        })
        .collect::<Result<_, MetaError>>()?;
    let mut confusion = vec![vec![0usize; k]; k];
    for r in &runs {
        for (row, add) in confusion.iter_mut().zip(&r.confusion) {
            for (c, a) in row.iter_mut().zip(add) {
                *c += a;
            }
        }
    }
    let pick = |f: fn(&RunResult) -> (f64, f64)| runs.iter().map(f).collect::<Vec<_>>();
    Ok(EvaluationReport {
        roster: db.info.roster.clone(),
        repetitions: cfg.repetitions,
        split: cfg.split,
        seed: cfg.seed,
        model: ScoreSummary::from_runs(&pick(|r| r.model)),
        majority: ScoreSummary::from_runs(&pick(|r| r.majority)),
        random: ScoreSummary::from_runs(&pick(|r| r.random)),
        confusion,
        class_distribution: db.class_distribution().into_iter().collect(),
    })
}
