//! Synthetic log generation: random process trees, play-out simulation and
//! trace-level noise, with the generating tree kept as ground truth.

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eventlog::{Event, EventLog, LogError, Trace};
use crate::petrinet::{Operator, ProcessTree};

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Log(#[from] LogError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorWeights {
    pub sequence: f64,
    pub xor: f64,
    pub parallel: f64,
    #[serde(rename = "loop")]
    pub loop_: f64,
}

impl OperatorWeights {
    pub fn uniform() -> Self {
        OperatorWeights {
            sequence: 0.25,
            xor: 0.25,
            parallel: 0.25,
            loop_: 0.25,
        }
    }

    fn as_array(&self) -> [f64; 4] {
        [self.sequence, self.xor, self.parallel, self.loop_]
    }

    pub fn weight(&self, op: Operator) -> f64 {
        match op {
            Operator::Sequence => self.sequence,
            Operator::Xor => self.xor,
            Operator::Parallel => self.parallel,
            Operator::Loop => self.loop_,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    None,
    /// Drop one event.
    Skip,
    /// Insert a random activity of the tree's alphabet.
    Insert,
    /// Swap two adjacent events.
    Swap,
}

impl std::str::FromStr for NoiseKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(NoiseKind::None),
            "skip" => Ok(NoiseKind::Skip),
            "insert" => Ok(NoiseKind::Insert),
            "swap" => Ok(NoiseKind::Swap),
            other => Err(format!("unknown noise kind `{other}` (expected none|skip|insert|swap)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Inclusive range for the number of distinct activities.
    pub activity_range: (usize, usize),
    /// Inclusive range for the tree depth (a single leaf has depth 0).
    pub depth_range: (usize, usize),
    pub operator_weights: OperatorWeights,
    pub n_cases: usize,
    pub noise_kind: NoiseKind,
    pub noise_rate: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            activity_range: (5, 12),
            depth_range: (2, 4),
            operator_weights: OperatorWeights::uniform(),
            n_cases: 200,
            noise_kind: NoiseKind::None,
            noise_rate: 0.0,
            seed: 0,
        }
    }
}

/// Most children any generated operator node gets.
pub const MAX_FAN_OUT: usize = 4;
/// Hard cap on redo iterations per loop execution.
pub const MAX_LOOP_ITERATIONS: usize = 10;
pub const LOOP_CONTINUE_PROBABILITY: f64 = 0.5;

fn max_leaves(depth: usize) -> usize {
    MAX_FAN_OUT.saturating_pow(depth as u32)
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        let bad = |m: String| Err(GeneratorError::InvalidConfig(m));
        let w = self.operator_weights.as_array();
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return bad("operator probabilities must be non-negative".into());
        }
        if (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad(format!("operator probabilities sum to {}, not 1", w.iter().sum::<f64>()));
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return bad(format!("noise rate {} outside [0, 1]", self.noise_rate));
        }
        if self.n_cases == 0 {
            return bad("n_cases must be at least 1".into());
        }
        let (amin, amax) = self.activity_range;
        let (dmin, dmax) = self.depth_range;
        if amin == 0 || amin > amax || dmin > dmax {
            return bad("empty activity or depth range".into());
        }
        if self.feasible_depths().is_empty() {
            return bad(format!(
                "no tree of depth {dmin}..={dmax} has between {amin} and {amax} activities"
            ));
        }
        Ok(())
    }

    /// Depths for which some activity count in range admits a tree.
    fn feasible_depths(&self) -> Vec<usize> {
        let (amin, amax) = self.activity_range;
        (self.depth_range.0..=self.depth_range.1)
            .filter(|&d| amin.max(d + 1) <= amax.min(max_leaves(d)) || (d == 0 && amin <= 1))
            .collect()
    }
}

/// Activity names `a`..`z`, then `aa`, `ab`, …
pub fn activity_name(mut i: usize) -> String {
    let mut out = Vec::new();
    loop {
        out.push(b'a' + (i % 26) as u8);
        if i < 26 {
            break;
        }
        i = i / 26 - 1;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

fn pick_operator(weights: &OperatorWeights, rng: &mut ChaCha8Rng) -> Operator {
    let w = weights.as_array();
    let mut x = rng.random::<f64>() * w.iter().sum::<f64>();
    for (op, wi) in Operator::ALL.into_iter().zip(w) {
        if x < wi {
            return op;
        }
        x -= wi;
    }
    *Operator::ALL
        .iter()
        .rev()
        .zip(w.iter().rev())
        .find(|(_, &wi)| wi > 0.0)
        .map(|(op, _)| op)
        .expect("some positive weight")
}

/// Shape of a tree with `leaves` leaves and exactly `depth` levels.
fn build_shape(leaves: usize, depth: usize, weights: &OperatorWeights, rng: &mut ChaCha8Rng) -> ProcessTree {
    if depth == 0 {
        debug_assert_eq!(leaves, 1);
        return ProcessTree::Silent;
    }
    let op = pick_operator(weights, rng);
    let cap = max_leaves(depth - 1);
    // One child carries the full remaining depth and needs `depth` leaves.
    let k_min = leaves.div_ceil(cap).max(2);
    let k_max = MAX_FAN_OUT.min(leaves + 1 - depth);
    let k = match op {
        Operator::Loop if k_min <= 2 => 2,
        _ => rng.random_range(k_min..=k_max.max(k_min)),
    };
    let mut sizes = vec![1usize; k];
    sizes[0] = depth;
    let mut rest = leaves - sizes.iter().sum::<usize>();
    while rest > 0 {
        let open: Vec<usize> = (0..k).filter(|&i| sizes[i] < cap).collect();
        let i = *open.choose(rng).expect("capacity remains");
        sizes[i] += 1;
        rest -= 1;
    }
    let mut children: Vec<ProcessTree> = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let d = if i == 0 {
                depth - 1
            } else {
                let lo = (0..).find(|&e| max_leaves(e) >= n).expect("finite");
                let hi = (depth - 1).min(n - 1);
                rng.random_range(lo..=hi)
            };
            build_shape(n, d, weights, rng)
        })
        .collect();
    children.shuffle(rng);
    ProcessTree::node(op, children)
}

fn label_leaves(tree: ProcessTree, names: &mut std::vec::IntoIter<String>) -> ProcessTree {
    match tree {
        ProcessTree::Silent => ProcessTree::Activity(names.next().expect("one name per leaf")),
        ProcessTree::Node { operator, children } => ProcessTree::Node {
            operator,
            children: children.into_iter().map(|c| label_leaves(c, names)).collect(),
        },
        leaf => leaf,
    }
}

pub fn generate_process_tree(config: &GeneratorConfig) -> Result<ProcessTree, GeneratorError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let depths = config.feasible_depths();
    let depth = *depths.choose(&mut rng).expect("validated");
    let (amin, amax) = config.activity_range;
    let (lo, hi) = (amin.max(depth + 1), amax.min(max_leaves(depth)));
    let leaves = if depth == 0 { 1 } else { rng.random_range(lo..=hi) };
    let shape = build_shape(leaves, depth, &config.operator_weights, &mut rng);
    let mut names: Vec<String> = (0..leaves).map(activity_name).collect();
    names.shuffle(&mut rng);
    Ok(label_leaves(shape, &mut names.into_iter()))
}

/// One random execution of the tree.
pub fn play_out(tree: &ProcessTree, rng: &mut impl Rng) -> Vec<String> {
    let mut out = Vec::new();
    play_into(tree, rng, &mut out);
    out
}

fn play_into(tree: &ProcessTree, rng: &mut impl Rng, out: &mut Vec<String>) {
    match tree {
        ProcessTree::Activity(a) => out.push(a.clone()),
        ProcessTree::Silent => {}
        ProcessTree::Node { operator, children } => match operator {
            Operator::Sequence => children.iter().for_each(|c| play_into(c, rng, out)),
            Operator::Xor => {
                let i = rng.random_range(0..children.len());
                play_into(&children[i], rng, out);
            }
            Operator::Parallel => {
                let mut parts: Vec<std::collections::VecDeque<String>> =
                    children.iter().map(|c| play_out(c, rng).into()).collect();
                // Uniform over interleavings: pick a branch with probability
                // proportional to its remaining length.
                let mut left: usize = parts.iter().map(|p| p.len()).sum();
                while left > 0 {
                    let mut x = rng.random_range(0..left);
                    let i = parts
                        .iter()
                        .position(|p| {
                            if x < p.len() {
                                true
                            } else {
                                x -= p.len();
                                false
                            }
                        })
                        .expect("x < left");
                    out.push(parts[i].pop_front().expect("non-empty branch"));
                    left -= 1;
                }
            }
            Operator::Loop => {
                play_into(&children[0], rng, out);
                let mut iterations = 0;
                while iterations < MAX_LOOP_ITERATIONS && rng.random_bool(LOOP_CONTINUE_PROBABILITY) {
                    let redo = rng.random_range(1..children.len());
                    play_into(&children[redo], rng, out);
                    play_into(&children[0], rng, out);
                    iterations += 1;
                }
            }
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseAnnotation {
    /// Index of the affected trace in the log.
    pub trace: usize,
    pub kind: NoiseKind,
    /// Position in the trace where the change happened.
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub tree: ProcessTree,
    pub config: GeneratorConfig,
    pub noise: Vec<NoiseAnnotation>,
}

impl GroundTruth {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ground truth serializes")
    }
}

fn apply_noise(
    trace: &mut Vec<String>,
    kind: NoiseKind,
    alphabet: &[String],
    rng: &mut impl Rng,
) -> Option<usize> {
    match kind {
        NoiseKind::None => None,
        NoiseKind::Skip if trace.len() >= 2 => {
            let i = rng.random_range(0..trace.len());
            trace.remove(i);
            Some(i)
        }
        NoiseKind::Insert => {
            let i = rng.random_range(0..=trace.len());
            let a = alphabet[rng.random_range(0..alphabet.len())].clone();
            trace.insert(i, a);
            Some(i)
        }
        NoiseKind::Swap if trace.len() >= 2 => {
            let i = rng.random_range(0..trace.len() - 1);
            trace.swap(i, i + 1);
            Some(i)
        }
        _ => None,
    }
}

fn base_time() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).single().expect("valid date")
}

/// Simulates `config.n_cases` play-outs of the tree. Each case draws from its
/// own stream of the master seed, so cases can be simulated in parallel.
pub fn simulate_log(tree: &ProcessTree, config: &GeneratorConfig) -> Result<(EventLog, GroundTruth), GeneratorError> {
    config.validate()?;
    tree.validate().map_err(|e| GeneratorError::InvalidConfig(e.to_string()))?;
    let alphabet: Vec<String> = tree.activities().into_iter().collect();
    if alphabet.is_empty() {
        return Err(GeneratorError::InvalidConfig("tree has no activities".into()));
    }
    let cases: Vec<(Trace, Option<NoiseAnnotation>)> = (0..config.n_cases)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64 + 1);
            let mut seq = play_out(tree, &mut rng);
            let mut note = None;
            if rng.random_bool(config.noise_rate) {
                if let Some(position) = apply_noise(&mut seq, config.noise_kind, &alphabet, &mut rng) {
                    note = Some(NoiseAnnotation {
                        trace: i,
                        kind: config.noise_kind,
                        position,
                    });
                }
            }
            if seq.is_empty() {
                // Only a tree made of silent steps plays out empty.
                seq.push(alphabet[0].clone());
            }
            let mut t = base_time() + Duration::hours(i as i64);
            let events = seq
                .into_iter()
                .map(|a| {
                    t += Duration::seconds(rng.random_range(1..=600));
                    Event::with_timestamp(a, t)
                })
                .collect();
            Ok((Trace::new(format!("case_{i}"), events)?, note))
        })
        .collect::<Result<_, LogError>>()?;
    let (traces, notes): (Vec<Trace>, Vec<Option<NoiseAnnotation>>) = cases.into_iter().unzip();
    let log = EventLog::new(traces)?;
    let truth = GroundTruth {
        tree: tree.clone(),
        config: config.clone(),
        noise: notes.into_iter().flatten().collect(),
    };
    Ok((log, truth))
}

/// Tree generation followed by simulation.
pub fn generate_log(config: &GeneratorConfig) -> Result<(EventLog, GroundTruth), GeneratorError> {
    let tree = generate_process_tree(config)?;
    simulate_log(&tree, config)
}

/// Behavioural regimes used to build varied corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    SequenceHeavy,
    ChoiceHeavy,
    ParallelHeavy,
    Noisy,
}

impl Regime {
    pub const ALL: [Regime; 4] = [
        Regime::SequenceHeavy,
        Regime::ChoiceHeavy,
        Regime::ParallelHeavy,
        Regime::Noisy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::SequenceHeavy => "sequence-heavy",
            Regime::ChoiceHeavy => "choice-heavy",
            Regime::ParallelHeavy => "parallel-heavy",
            Regime::Noisy => "noisy",
        }
    }

    pub fn config(self, seed: u64, n_cases: usize) -> GeneratorConfig {
        let weights = |sequence, xor, parallel, loop_| OperatorWeights {
            sequence,
            xor,
            parallel,
            loop_,
        };
        let base = GeneratorConfig {
            seed,
            n_cases,
            ..GeneratorConfig::default()
        };
        match self {
            Regime::SequenceHeavy => GeneratorConfig {
                operator_weights: weights(0.7, 0.1, 0.1, 0.1),
                ..base
            },
            Regime::ChoiceHeavy => GeneratorConfig {
                operator_weights: weights(0.2, 0.6, 0.1, 0.1),
                ..base
            },
            Regime::ParallelHeavy => GeneratorConfig {
                operator_weights: weights(0.2, 0.1, 0.6, 0.1),
                ..base
            },
            Regime::Noisy => GeneratorConfig {
                operator_weights: OperatorWeights::uniform(),
                noise_kind: [NoiseKind::Skip, NoiseKind::Insert, NoiseKind::Swap][(seed % 3) as usize],
                noise_rate: 0.2,
                ..base
            },
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Regime::ALL
            .into_iter()
            .find(|r| r.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown regime `{s}`"))
    }
}

/// Configuration of the `index`-th log of a corpus: regimes rotate, seeds
/// are derived from the corpus seed.
pub fn corpus_config(corpus_seed: u64, index: usize, n_cases: usize) -> (Regime, GeneratorConfig) {
    let regime = Regime::ALL[index % Regime::ALL.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(corpus_seed);
    rng.set_stream(index as u64 + 1);
    (regime, regime.config(rng.random(), n_cases))
}

/// Generates `count` logs with rotating regimes. Ids are `log_0000`, ...
pub fn generate_corpus(
    corpus_seed: u64,
    count: usize,
    n_cases: usize,
) -> Result<Vec<(String, Regime, EventLog, GroundTruth)>, GeneratorError> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let (regime, config) = corpus_config(corpus_seed, i, n_cases);
            let (log, truth) = generate_log(&config)?;
            Ok((format!("log_{i:04}"), regime, log, truth))
        })
        .collect()
}
