//! Log descriptors used as meta-features: trace-length statistics, variant
//! frequencies, activity occurrence statistics, log-level counts and a suite
//! of entropy measures.
//!
//! Every extractor sorts or canonicalizes its inputs first, so the values do
//! not depend on the order of traces in the log.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::eventlog::{variants, EventLog, VariantTable};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("feature `{name}` ({family}) is not finite: {value}")]
    NonFinite {
        name: String,
        family: FeatureFamily,
        value: f64,
    },
    #[error("feature vector has {found} values, manifest has {expected}")]
    Length { expected: usize, found: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureFamily {
    TraceLength,
    Variant,
    ActivityAll,
    ActivityStart,
    ActivityEnd,
    LogLevel,
    Entropy,
}

impl FeatureFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureFamily::TraceLength => "trace_length",
            FeatureFamily::Variant => "variant",
            FeatureFamily::ActivityAll => "activity_all",
            FeatureFamily::ActivityStart => "activity_start",
            FeatureFamily::ActivityEnd => "activity_end",
            FeatureFamily::LogLevel => "log_level",
            FeatureFamily::Entropy => "entropy",
        }
    }
}

impl std::fmt::Display for FeatureFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub family: FeatureFamily,
}

/// Ordered feature names. The order is the column order of every feature
/// vector and file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureManifest {
    pub features: Vec<FeatureSpec>,
}

const PROFILE_STATS: [&str; 15] = [
    "min",
    "max",
    "mean",
    "median",
    "mode",
    "std",
    "variance",
    "q1",
    "q3",
    "iqr",
    "geometric_mean",
    "geometric_std",
    "harmonic_mean",
    "coefficient_variation",
    "entropy",
];

const ACTIVITY_STATS: [&str; 11] = [
    "min", "max", "mean", "median", "std", "variance", "q1", "q3", "iqr", "skewness", "kurtosis",
];

/// Percentages for the top-variant ratios.
pub const TOP_VARIANT_PERCENTS: [u32; 6] = [1, 5, 10, 20, 50, 75];

const ENTROPY_NAMES: [&str; 14] = [
    "entropy_trace",
    "entropy_prefix",
    "entropy_global_block",
    "entropy_lempel_ziv",
    "entropy_k_block_diff_1",
    "entropy_k_block_diff_3",
    "entropy_k_block_diff_5",
    "entropy_k_block_ratio_1",
    "entropy_k_block_ratio_3",
    "entropy_k_block_ratio_5",
    "entropy_knn_3",
    "entropy_knn_5",
    "entropy_knn_7",
    "entropy_kozachenko_leonenko",
];

impl FeatureManifest {
    pub fn canonical() -> Self {
        let mut features = Vec::new();
        let mut push = |name: String, family| features.push(FeatureSpec { name, family });
        for s in PROFILE_STATS {
            push(format!("trace_len_{s}"), FeatureFamily::TraceLength);
        }
        for i in 1..=10 {
            push(format!("trace_len_hist{i}"), FeatureFamily::TraceLength);
        }
        push("trace_len_skewness".into(), FeatureFamily::TraceLength);
        push("trace_len_kurtosis".into(), FeatureFamily::TraceLength);
        for s in ["mean", "std", "skewness", "kurtosis"] {
            push(format!("variant_{s}"), FeatureFamily::Variant);
        }
        push("ratio_most_common_variant".into(), FeatureFamily::Variant);
        for q in TOP_VARIANT_PERCENTS {
            push(format!("ratio_top_{q}_variants"), FeatureFamily::Variant);
        }
        for (prefix, family) in [
            ("", FeatureFamily::ActivityAll),
            ("start_", FeatureFamily::ActivityStart),
            ("end_", FeatureFamily::ActivityEnd),
        ] {
            push(format!("{prefix}activities_count"), family);
            for s in ACTIVITY_STATS {
                push(format!("{prefix}activities_{s}"), family);
            }
        }
        for s in ["n_traces", "n_unique_traces", "ratio_unique_traces_per_trace", "n_events"] {
            push(s.into(), FeatureFamily::LogLevel);
        }
        for s in ENTROPY_NAMES {
            push(s.into(), FeatureFamily::Entropy);
        }
        FeatureManifest { features }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// SHA-256 over `name:family` lines; identifies the column layout.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for f in &self.features {
            h.update(f.name.as_bytes());
            h.update(b":");
            h.update(f.family.as_str().as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// One `index name family` line per feature.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, f) in self.features.iter().enumerate() {
            let _ = writeln!(s, "{i}\t{}\t{}", f.name, f.family);
        }
        s
    }
}

/// Number of features in the canonical manifest.
pub const DIM: usize = 92;

// ---------------------------------------------------------------------------
// Descriptive statistics

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
}

/// Linear interpolation between closest ranks; `sorted` must be ascending.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Biased sample skewness; 0 for constant samples.
pub fn skewness(x: &[f64]) -> f64 {
    let var = variance(x);
    if var <= f64::EPSILON * mean(x).abs().max(1.0) {
        return 0.0;
    }
    let m = mean(x);
    let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / x.len() as f64;
    m3 / var.powf(1.5)
}

/// Excess (Fisher) kurtosis; 0 for constant samples.
pub fn kurtosis(x: &[f64]) -> f64 {
    let var = variance(x);
    if var <= f64::EPSILON * mean(x).abs().max(1.0) {
        return 0.0;
    }
    let m = mean(x);
    let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / x.len() as f64;
    m4 / (var * var) - 3.0
}

/// Shannon entropy (natural log) of a frequency table.
pub fn shannon<I: IntoIterator<Item = usize>>(counts: I) -> f64 {
    let counts: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    let h = -counts
        .iter()
        .map(|&c| {
            let p = c as f64 / t;
            p * p.ln()
        })
        .sum::<f64>();
    h.max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticsProfile {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    pub mode: f64,
    pub std: f64,
    pub variance: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub geometric_mean: f64,
    pub geometric_std: f64,
    pub harmonic_mean: f64,
    pub coefficient_variation: f64,
    pub entropy: f64,
    pub histogram: [f64; 10],
    pub skewness: f64,
    pub kurtosis: f64,
}

/// Profile of a non-empty sample of positive values.
///
/// # Panics
/// On an empty sample.
pub fn statistics_profile(values: &[f64]) -> StatisticsProfile {
    assert!(!values.is_empty(), "statistics of an empty sample");
    let mut x = values.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let (min, max) = (x[0], x[x.len() - 1]);
    let m = mean(&x);
    let var = variance(&x);
    let std = var.sqrt();

    let mut freq: BTreeMap<u64, usize> = BTreeMap::new();
    for v in &x {
        *freq.entry(v.to_bits()).or_default() += 1;
    }
    // Ties resolve to the smallest value; positive floats order like their bits.
    let mode = f64::from_bits(
        *freq
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .expect("non-empty")
            .0,
    );

    let logs: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let geometric_mean = mean(&logs).exp();
    let geometric_std = variance(&logs).sqrt().exp();
    let harmonic_mean = n / x.iter().map(|v| 1.0 / v).sum::<f64>();

    let mut histogram = [0.0; 10];
    let width = (max - min) / 10.0;
    for v in &x {
        let bin = if width > 0.0 {
            (((v - min) / width) as usize).min(9)
        } else {
            0
        };
        histogram[bin] += 1.0;
    }

    let (q1, q3) = (percentile(&x, 0.25), percentile(&x, 0.75));
    StatisticsProfile {
        min,
        max,
        mean: m,
        median: percentile(&x, 0.5),
        mode,
        std,
        variance: var,
        q1,
        q3,
        iqr: q3 - q1,
        geometric_mean,
        geometric_std,
        harmonic_mean,
        coefficient_variation: if m != 0.0 { std / m } else { 0.0 },
        entropy: shannon(freq.values().copied()),
        histogram,
        skewness: skewness(&x),
        kurtosis: kurtosis(&x),
    }
}

// ---------------------------------------------------------------------------
// Families

fn trace_length_features(log: &EventLog) -> Vec<f64> {
    let lengths: Vec<f64> = log.traces().iter().map(|t| t.len() as f64).collect();
    let p = statistics_profile(&lengths);
    let mut out = vec![
        p.min,
        p.max,
        p.mean,
        p.median,
        p.mode,
        p.std,
        p.variance,
        p.q1,
        p.q3,
        p.iqr,
        p.geometric_mean,
        p.geometric_std,
        p.harmonic_mean,
        p.coefficient_variation,
        p.entropy,
    ];
    out.extend(p.histogram);
    out.push(p.skewness);
    out.push(p.kurtosis);
    out
}

/// Mean, std, skewness and kurtosis of variant counts, the share of the most
/// common variant, and the share of the top ⌈q·n/100⌉ variants for each
/// percentage in [`TOP_VARIANT_PERCENTS`].
pub fn variant_features(vt: &VariantTable) -> Vec<f64> {
    let counts = vt.counts_descending();
    let x: Vec<f64> = counts.iter().rev().map(|&c| c as f64).collect();
    let total = vt.total as f64;
    let n = counts.len();
    let mut out = vec![
        mean(&x),
        variance(&x).sqrt(),
        skewness(&x),
        kurtosis(&x),
        counts[0] as f64 / total,
    ];
    for q in TOP_VARIANT_PERCENTS {
        let k = (q as usize * n).div_ceil(100);
        out.push(counts[..k].iter().sum::<usize>() as f64 / total);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivityGroup {
    All,
    Start,
    End,
}

pub fn activity_counts(log: &EventLog, group: ActivityGroup) -> BTreeMap<&str, usize> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for trace in log.traces() {
        let events = trace.events();
        let picked: &[_] = match group {
            ActivityGroup::All => events,
            ActivityGroup::Start => &events[..1],
            ActivityGroup::End => &events[events.len() - 1..],
        };
        for e in picked {
            *counts.entry(e.activity.as_str()).or_default() += 1;
        }
    }
    counts
}

/// Distinct-activity count followed by statistics of the occurrence counts.
pub fn activity_features(log: &EventLog, group: ActivityGroup) -> Vec<f64> {
    let counts = activity_counts(log, group);
    let mut x: Vec<f64> = counts.values().map(|&c| c as f64).collect();
    x.sort_by(f64::total_cmp);
    let (q1, q3) = (percentile(&x, 0.25), percentile(&x, 0.75));
    vec![
        x.len() as f64,
        x[0],
        x[x.len() - 1],
        mean(&x),
        percentile(&x, 0.5),
        variance(&x).sqrt(),
        variance(&x),
        q1,
        q3,
        q3 - q1,
        skewness(&x),
        kurtosis(&x),
    ]
}

fn log_level_features(log: &EventLog, vt: &VariantTable) -> Vec<f64> {
    let n = log.traces().len() as f64;
    vec![n, vt.len() as f64, vt.len() as f64 / n, log.num_events() as f64]
}

// ---------------------------------------------------------------------------
// Entropy suite

/// Encoded variants with counts, in canonical order.
fn encoded_variants(log: &EventLog) -> Vec<(Vec<u32>, usize)> {
    let (_, traces) = log.encoded();
    let mut map: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
    for t in traces {
        *map.entry(t).or_default() += 1;
    }
    map.into_iter().collect()
}

/// Shannon entropy of the variant distribution.
pub fn trace_entropy(log: &EventLog) -> f64 {
    shannon(encoded_variants(log).into_iter().map(|(_, c)| c))
}

/// Entropy over the multiset of all non-empty trace prefixes.
pub fn prefix_entropy(log: &EventLog) -> f64 {
    let mut counts: HashMap<&[u32], usize> = HashMap::new();
    let vars = encoded_variants(log);
    for (t, c) in &vars {
        for j in 1..=t.len() {
            *counts.entry(&t[..j]).or_default() += c;
        }
    }
    let mut c: Vec<usize> = counts.into_values().collect();
    c.sort_unstable();
    shannon(c)
}

/// Sentinel used to pad windows that run past the end of a trace.
const END: u32 = u32::MAX;

/// `H_k`: entropy over the length-`k` windows starting at each position of
/// each trace, windows past the end padded with a terminal symbol. Every
/// window refines the shorter one at the same position, so `H_k` is
/// non-decreasing in `k`.
pub fn k_block_entropy(log: &EventLog, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let vars = encoded_variants(log);
    let mut counts: HashMap<Vec<u32>, usize> = HashMap::new();
    for (t, c) in &vars {
        for i in 0..t.len() {
            let w: Vec<u32> = (i..i + k).map(|j| t.get(j).copied().unwrap_or(END)).collect();
            *counts.entry(w).or_default() += c;
        }
    }
    let mut c: Vec<usize> = counts.into_values().collect();
    c.sort_unstable();
    shannon(c)
}

/// Entropy over all substrings of every length, counted with a trie.
pub fn global_block_entropy(log: &EventLog) -> f64 {
    let vars = encoded_variants(log);
    // Node 0 is the root; children keyed by (node, symbol).
    let mut children: HashMap<(usize, u32), usize> = HashMap::new();
    let mut counts: Vec<usize> = vec![0];
    for (t, c) in &vars {
        for start in 0..t.len() {
            let mut node = 0;
            for &a in &t[start..] {
                let next = counts.len();
                node = *children.entry((node, a)).or_insert(next);
                if node == next {
                    counts.push(0);
                }
                counts[node] += c;
            }
        }
    }
    counts[1..].sort_unstable();
    shannon(counts[1..].iter().copied())
}

/// LZ76 complexity (Kaspar–Schuster phrase count) of `s`.
pub fn lz76_complexity(s: &[u32]) -> usize {
    let n = s.len();
    if n == 0 {
        return 0;
    }
    if n == 1 {
        return 1;
    }
    let (mut c, mut l, mut i, mut k, mut k_max) = (1usize, 1usize, 0usize, 1usize, 1usize);
    loop {
        if s[i + k - 1] == s[l + k - 1] {
            k += 1;
            if l + k > n {
                c += 1;
                break;
            }
        } else {
            k_max = k_max.max(k);
            i += 1;
            if i == l {
                c += 1;
                l += k_max;
                if l + 1 > n {
                    break;
                }
                i = 0;
                k = 1;
                k_max = 1;
            } else {
                k = 1;
            }
        }
    }
    c
}

/// LZ76 complexity of all traces (sorted, joined by a separator), divided
/// by the length of the joined sequence.
pub fn lempel_ziv_entropy(log: &EventLog) -> f64 {
    let (_, mut traces) = log.encoded();
    traces.sort();
    let mut seq = Vec::with_capacity(log.num_events() + traces.len());
    for (i, t) in traces.iter().enumerate() {
        if i > 0 {
            seq.push(END);
        }
        seq.extend_from_slice(t);
    }
    lz76_complexity(&seq) as f64 / seq.len() as f64
}

/// ψ(n) for a positive integer: `-γ + Σ_{i<n} 1/i`.
pub fn digamma(n: usize) -> f64 {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    -EULER_GAMMA + (1..n).map(|i| 1.0 / i as f64).sum::<f64>()
}

/// Trace embeddings `(length, distinct activities)` with multiplicities.
fn embeddings(log: &EventLog) -> Vec<((u32, u32), usize)> {
    let mut map: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    for (t, c) in encoded_variants(log) {
        let mut distinct = t.clone();
        distinct.sort_unstable();
        distinct.dedup();
        *map.entry((t.len() as u32, distinct.len() as u32)).or_default() += c;
    }
    map.into_iter().collect()
}

/// k-nearest-neighbour entropy estimate in the plane:
/// `ψ(N) − ψ(k) + ln π + (2/N) Σ ln max(ρ_k, 1)`.
///
/// Embeddings lie on the integer lattice, so distinct points are at least 1
/// apart; coincident points contribute `ln 1 = 0` instead of `−∞`.
pub fn knn_entropy(log: &EventLog, k: usize) -> f64 {
    let points = embeddings(log);
    let n: usize = points.iter().map(|(_, c)| c).sum();
    if n < 2 {
        return 0.0;
    }
    let k = k.clamp(1, n - 1);
    let mut log_sum = 0.0;
    for &((x, y), mult) in &points {
        // Neighbours: the other copies of this point, then the rest by distance.
        let mut dists: Vec<(f64, usize)> = points
            .iter()
            .map(|&((u, v), c)| {
                let d = ((x as f64 - u as f64).powi(2) + (y as f64 - v as f64).powi(2)).sqrt();
                if (u, v) == (x, y) {
                    (0.0, c - 1)
                } else {
                    (d, c)
                }
            })
            .collect();
        dists.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut seen = 0;
        let mut rho = 0.0;
        for (d, c) in dists {
            seen += c;
            if seen >= k {
                rho = d;
                break;
            }
        }
        log_sum += mult as f64 * rho.max(1.0).ln();
    }
    let h = digamma(n) - digamma(k) + std::f64::consts::PI.ln() + 2.0 * log_sum / n as f64;
    h.max(0.0)
}

/// Kozachenko–Leonenko estimate: the nearest-neighbour (k = 1) case.
pub fn kozachenko_leonenko_entropy(log: &EventLog) -> f64 {
    knn_entropy(log, 1)
}

pub fn entropy_suite(log: &EventLog) -> Vec<f64> {
    let h: Vec<f64> = (0..=5).map(|k| k_block_entropy(log, k)).collect();
    let diff = |k: usize| (h[k] - h[k - 1]).max(0.0);
    let ratio = |k: usize| h[k] / k as f64;
    vec![
        trace_entropy(log),
        prefix_entropy(log),
        global_block_entropy(log),
        lempel_ziv_entropy(log),
        diff(1),
        diff(3),
        diff(5),
        ratio(1),
        ratio(3),
        ratio(5),
        knn_entropy(log, 3),
        knn_entropy(log, 5),
        knn_entropy(log, 7),
        kozachenko_leonenko_entropy(log),
    ]
}

// ---------------------------------------------------------------------------
// Extraction and output

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub log_id: String,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn get(&self, manifest: &FeatureManifest, name: &str) -> Option<f64> {
        manifest.index_of(name).map(|i| self.values[i])
    }
}

pub fn extract_features(log_id: impl Into<String>, log: &EventLog) -> Result<FeatureVector, FeatureError> {
    let manifest = FeatureManifest::canonical();
    let vt = variants(log);
    let mut values = trace_length_features(log);
    values.extend(variant_features(&vt));
    values.extend(activity_features(log, ActivityGroup::All));
    values.extend(activity_features(log, ActivityGroup::Start));
    values.extend(activity_features(log, ActivityGroup::End));
    values.extend(log_level_features(log, &vt));
    values.extend(entropy_suite(log));
    if values.len() != manifest.len() {
        return Err(FeatureError::Length {
            expected: manifest.len(),
            found: values.len(),
        });
    }
    if let Some((spec, &value)) = manifest
        .features
        .iter()
        .zip(&values)
        .find(|(_, v)| !v.is_finite())
    {
        return Err(FeatureError::NonFinite {
            name: spec.name.clone(),
            family: spec.family,
            value,
        });
    }
    Ok(FeatureVector {
        log_id: log_id.into(),
        values,
    })
}

/// CSV with a `log_id` column followed by the manifest columns.
pub fn write_features_csv<W: Write>(out: W, manifest: &FeatureManifest, rows: &[FeatureVector]) -> Result<(), FeatureError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["log_id"];
    header.extend(manifest.names());
    w.write_record(&header).map_err(csv_io)?;
    for row in rows {
        let mut rec = vec![row.log_id.clone()];
        rec.extend(row.values.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> FeatureError {
    FeatureError::Io(std::io::Error::other(e))
}

/// `{"log_id": .., "features": {name: value}}`.
pub fn features_json(manifest: &FeatureManifest, row: &FeatureVector) -> serde_json::Value {
    let features: serde_json::Map<String, serde_json::Value> = manifest
        .features
        .iter()
        .zip(&row.values)
        .map(|(f, v)| (f.name.clone(), serde_json::json!(v)))
        .collect();
    serde_json::json!({ "log_id": row.log_id, "features": features })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(seqs: &[Vec<&str>]) -> EventLog {
        EventLog::from_sequences(seqs).unwrap()
    }

    #[test]
    fn manifest_shape() {
        let m = FeatureManifest::canonical();
        assert_eq!(m.len(), DIM);
        let mut names = m.names();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), DIM);
        assert_eq!(m.fingerprint().len(), 64);
    }

    #[test]
    fn constant_sample() {
        let p = statistics_profile(&[5.0; 4]);
        assert_eq!((p.min, p.max, p.mean, p.median, p.mode), (5.0, 5.0, 5.0, 5.0, 5.0));
        assert_eq!(p.std, 0.0);
        assert_eq!(p.entropy, 0.0);
        assert_eq!(p.histogram[0], 4.0);
        assert_eq!(p.histogram.iter().sum::<f64>(), 4.0);
        assert_eq!((p.skewness, p.kurtosis), (0.0, 0.0));
    }

    #[test]
    fn single_value() {
        let p = statistics_profile(&[7.0]);
        assert_eq!((p.skewness, p.kurtosis), (0.0, 0.0));
        assert_eq!(p.iqr, 0.0);
    }

    #[test]
    fn variant_ratios() {
        let mut seqs = vec![vec!["a"]; 6];
        seqs.extend(vec![vec!["b"]; 3]);
        seqs.push(vec!["c"]);
        let f = variant_features(&variants(&log(&seqs)));
        assert!((f[4] - 0.6).abs() < 1e-12);
        // top 50% of 3 variants = 2 variants
        assert!((f[5 + 4] - 0.9).abs() < 1e-12);
        // top 1% still takes one variant
        assert!((f[5] - 0.6).abs() < 1e-12);

        let single = variant_features(&variants(&log(&vec![vec!["a", "b"]; 10])));
        assert!(single[4..].iter().all(|&r| r == 1.0));
    }

    #[test]
    fn activity_groups() {
        let l = log(&vec![vec!["a", "b"]; 4]);
        let f = activity_features(&l, ActivityGroup::Start);
        assert_eq!(&f[..4], &[1.0, 4.0, 4.0, 4.0]);
        assert_eq!(f[5], 0.0);
        let f = activity_features(&log(&[vec!["a", "b"], vec!["c", "b"]]), ActivityGroup::End);
        assert_eq!(&f[..2], &[1.0, 2.0]);
    }

    #[test]
    fn log_level() {
        let l = log(&vec![vec!["a", "b"]; 3]);
        let v = extract_features("x", &l).unwrap();
        let m = FeatureManifest::canonical();
        assert_eq!(v.get(&m, "n_traces"), Some(3.0));
        assert_eq!(v.get(&m, "n_unique_traces"), Some(1.0));
        assert_eq!(v.get(&m, "ratio_unique_traces_per_trace"), Some(1.0 / 3.0));
        assert_eq!(v.get(&m, "n_events"), Some(6.0));
    }

    #[test]
    fn trace_entropies() {
        assert_eq!(trace_entropy(&log(&vec![vec!["a", "b"]; 5])), 0.0);
        let h = trace_entropy(&log(&[vec!["a"], vec!["b"]]));
        assert!((h - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn lz76_known_values() {
        // Kaspar & Schuster's example: 0001101001000101 → 6 phrases.
        let s: Vec<u32> = "0001101001000101".bytes().map(|b| (b - b'0') as u32).collect();
        assert_eq!(lz76_complexity(&s), 6);
        assert_eq!(lz76_complexity(&[0; 50]), 2);
        assert_eq!(lz76_complexity(&[0, 1]), 2);
    }

    #[test]
    fn k_block_monotone() {
        let l = log(&[vec!["a", "b", "c", "a"], vec!["b", "b", "a"], vec!["c"]]);
        let h: Vec<f64> = (0..=6).map(|k| k_block_entropy(&l, k)).collect();
        assert_eq!(h[0], 0.0);
        assert!(h.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn digamma_values() {
        assert!((digamma(1) + 0.5772156649015329).abs() < 1e-12);
        assert!((digamma(2) - (1.0 - 0.5772156649015329)).abs() < 1e-12);
    }
}
