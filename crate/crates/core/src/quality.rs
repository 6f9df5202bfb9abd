//! Model quality: token-replay fitness, escaping-edges precision,
//! generalization, simplicity, and the combined evaluation of a discovery
//! algorithm on a log.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discovery::{timed_discovery, DiscoveryAlgorithm, DiscoveryError, DEFAULT_TIMING_REPETITIONS};
use crate::eventlog::EventLog;
use crate::petrinet::{AcceptingPetriNet, Marking, SilentSearch, TransitionId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QualityError {
    #[error("degenerate net: {0}")]
    DegenerateNet(String),
}

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("discovery failed: {0}")]
    Discovery(#[from] DiscoveryError),
    #[error("{metric} failed: {source}")]
    Metric {
        metric: &'static str,
        #[source]
        source: QualityError,
    },
}

/// Token counts of one replayed case.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenCounts {
    pub consumed: u64,
    pub produced: u64,
    pub missing: u64,
    pub remaining: u64,
}

impl TokenCounts {
    fn add_scaled(&mut self, other: &TokenCounts, k: u64) {
        self.consumed += other.consumed * k;
        self.produced += other.produced * k;
        self.missing += other.missing * k;
        self.remaining += other.remaining * k;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayResult {
    /// Counts per case, in log order.
    pub cases: Vec<TokenCounts>,
    pub total: TokenCounts,
    /// Executions per node, places first then transitions (the order of
    /// [`AcceptingPetriNet::node_degrees`]).
    pub node_executions: Vec<u64>,
}

impl ReplayResult {
    /// `½(1 − Σm/Σc) + ½(1 − Σr/Σp)`.
    pub fn fitness(&self) -> Result<f64, QualityError> {
        fitness_from_counts(&self.total)
    }
}

pub fn fitness_from_counts(t: &TokenCounts) -> Result<f64, QualityError> {
    if t.consumed == 0 || t.produced == 0 {
        return Err(QualityError::DegenerateNet(
            "replay consumed or produced no tokens".into(),
        ));
    }
    Ok(0.5 * (1.0 - t.missing as f64 / t.consumed as f64)
        + 0.5 * (1.0 - t.remaining as f64 / t.produced as f64))
}

/// Token game for a single trace with missing-token repair.
struct Replayer<'a> {
    net: &'a AcceptingPetriNet,
    search: SilentSearch,
    marking: Marking,
    counts: TokenCounts,
    place_exec: Vec<u64>,
    transition_exec: Vec<u64>,
}

impl<'a> Replayer<'a> {
    fn new(net: &'a AcceptingPetriNet) -> Self {
        let marking = net.initial_marking().clone();
        let counts = TokenCounts {
            produced: marking.total(),
            ..Default::default()
        };
        Replayer {
            net,
            search: SilentSearch::for_net(net),
            marking,
            counts,
            place_exec: vec![0; net.places().len()],
            transition_exec: vec![0; net.transitions().len()],
        }
    }

    fn fire(&mut self, t: TransitionId) {
        for &p in self.net.preset(t) {
            let have = self.marking.tokens(p);
            if have == 0 {
                self.counts.missing += 1;
            } else {
                self.marking.set(p, have - 1);
            }
            self.place_exec[p.0] += 1;
        }
        for &p in self.net.postset(t) {
            self.marking.set(p, self.marking.tokens(p) + 1);
        }
        self.counts.consumed += self.net.preset(t).len() as u64;
        self.counts.produced += self.net.postset(t).len() as u64;
        self.transition_exec[t.0] += 1;
    }

    fn shortfall(&self, t: TransitionId) -> usize {
        self.net
            .preset(t)
            .iter()
            .filter(|&&p| self.marking.tokens(p) == 0)
            .count()
    }

    fn step(&mut self, label: &str) {
        let candidates: Vec<TransitionId> = self.net.transitions_with_label(label).collect();
        if candidates.is_empty() {
            // The event cannot be mapped: one token missing and one left over.
            self.counts.consumed += 1;
            self.counts.produced += 1;
            self.counts.missing += 1;
            self.counts.remaining += 1;
            return;
        }
        if let Some(&t) = candidates.iter().find(|&&t| self.net.is_enabled(&self.marking, t)) {
            self.fire(t);
            return;
        }
        let net = self.net;
        let path = self.search.find_path(net, &self.marking, |m| {
            candidates.iter().any(|&t| net.is_enabled(m, t))
        });
        if let Some(path) = path {
            for s in path {
                self.fire(s);
            }
            let t = *candidates
                .iter()
                .find(|&&t| net.is_enabled(&self.marking, t))
                .expect("search goal enables a candidate");
            self.fire(t);
            return;
        }
        let t = *candidates
            .iter()
            .min_by_key(|&&t| self.shortfall(t))
            .expect("non-empty candidates");
        self.fire(t);
    }

    fn finish(&mut self) {
        let net = self.net;
        let target = net.final_marking().clone();
        let path = self
            .search
            .find_path(net, &self.marking, |m| *m == target)
            .or_else(|| self.search.find_path(net, &self.marking, |m| m.covers(&target)));
        for s in path.unwrap_or_default() {
            self.fire(s);
        }
        for (p, want) in target.support() {
            let have = self.marking.tokens(p);
            self.counts.missing += u64::from(want.saturating_sub(have));
            self.counts.consumed += u64::from(want);
            self.place_exec[p.0] += u64::from(want);
            self.marking.set(p, have.saturating_sub(want));
        }
        self.counts.remaining += self.marking.total();
    }
}

/// Distinct activity sequences with their multiplicity and the positions of
/// the cases that share them.
fn grouped_variants(log: &EventLog) -> BTreeMap<Vec<&str>, Vec<usize>> {
    let mut out: BTreeMap<Vec<&str>, Vec<usize>> = BTreeMap::new();
    for (i, trace) in log.traces().iter().enumerate() {
        out.entry(trace.activities().collect()).or_default().push(i);
    }
    out
}

/// Replays every case of the log on the net and collects token counts and
/// node executions.
pub fn token_replay(log: &EventLog, net: &AcceptingPetriNet) -> ReplayResult {
    let mut cases = vec![TokenCounts::default(); log.traces().len()];
    let mut total = TokenCounts::default();
    let mut node_executions = vec![0u64; net.num_nodes()];
    let n_places = net.places().len();
    for (seq, members) in grouped_variants(log) {
        let mut r = Replayer::new(net);
        for label in &seq {
            r.step(label);
        }
        r.finish();
        let k = members.len() as u64;
        for &i in &members {
            cases[i] = r.counts;
        }
        total.add_scaled(&r.counts, k);
        for (i, e) in r.place_exec.iter().enumerate() {
            node_executions[i] += e * k;
        }
        for (i, e) in r.transition_exec.iter().enumerate() {
            node_executions[n_places + i] += e * k;
        }
    }
    ReplayResult {
        cases,
        total,
        node_executions,
    }
}

pub fn token_replay_fitness(log: &EventLog, net: &AcceptingPetriNet) -> Result<(f64, ReplayResult), QualityError> {
    let replay = token_replay(log, net);
    Ok((replay.fitness()?, replay))
}

/// One prefix state of the precision automaton.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixState {
    /// Number of traces passing through this prefix.
    pub weight: usize,
    /// Next activities seen in the log; `None` marks the end of a trace.
    pub observed: BTreeSet<Option<String>>,
    /// Visible labels the model allows from the replay state.
    pub allowed: BTreeSet<String>,
}

impl PrefixState {
    pub fn escaping(&self) -> usize {
        self.allowed
            .iter()
            .filter(|a| !self.observed.contains(&Some((*a).clone())))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionAutomaton {
    pub states: BTreeMap<Vec<String>, PrefixState>,
}

impl PrecisionAutomaton {
    /// `1 − Σ w·|E_E| / Σ w·|A_T|`, or 1 when the model allows nothing.
    pub fn precision(&self) -> f64 {
        let (mut escaping, mut allowed) = (0u64, 0u64);
        for s in self.states.values() {
            escaping += (s.weight * s.escaping()) as u64;
            allowed += (s.weight * s.allowed.len()) as u64;
        }
        if allowed == 0 {
            1.0
        } else {
            1.0 - escaping as f64 / allowed as f64
        }
    }
}

fn allowed_labels(net: &AcceptingPetriNet, search: &SilentSearch, marking: &Marking) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for m in search.closure(net, marking) {
        for t in net.transition_ids() {
            if let Some(label) = &net.transition(t).label {
                if net.is_enabled(&m, t) {
                    out.insert(label.clone());
                }
            }
        }
    }
    out
}

pub fn precision_automaton(log: &EventLog, net: &AcceptingPetriNet) -> PrecisionAutomaton {
    let mut states: BTreeMap<Vec<String>, PrefixState> = BTreeMap::new();
    let search = SilentSearch::for_net(net);
    for (seq, members) in grouped_variants(log) {
        let weight = members.len();
        let mut r = Replayer::new(net);
        for j in 0..=seq.len() {
            let prefix: Vec<String> = seq[..j].iter().map(|s| s.to_string()).collect();
            let next = seq.get(j).map(|s| s.to_string());
            let state = states.entry(prefix).or_insert_with(|| PrefixState {
                weight: 0,
                observed: BTreeSet::new(),
                allowed: allowed_labels(net, &search, &r.marking),
            });
            state.weight += weight;
            state.observed.insert(next);
            if let Some(label) = seq.get(j) {
                r.step(label);
            }
        }
    }
    PrecisionAutomaton { states }
}

pub fn escaping_edges_precision(log: &EventLog, net: &AcceptingPetriNet) -> f64 {
    precision_automaton(log, net).precision()
}

/// `1 − Σ (√exec)⁻¹ / #nodes`; unexecuted nodes count as executed once.
pub fn generalization_from_counts(executions: &[u64]) -> Result<f64, QualityError> {
    if executions.is_empty() {
        return Err(QualityError::DegenerateNet("net has no nodes".into()));
    }
    let sum: f64 = executions
        .iter()
        .map(|&e| 1.0 / (e.max(1) as f64).sqrt())
        .sum();
    Ok(1.0 - sum / executions.len() as f64)
}

pub fn generalization(log: &EventLog, net: &AcceptingPetriNet) -> Result<f64, QualityError> {
    generalization_from_counts(&token_replay(log, net).node_executions)
}

/// `1 / (1 + max(0, mean degree − 2))`.
pub fn simplicity_from_degrees(degrees: &[usize]) -> Result<f64, QualityError> {
    if degrees.is_empty() {
        return Err(QualityError::DegenerateNet("net has no nodes".into()));
    }
    let mean = degrees.iter().sum::<usize>() as f64 / degrees.len() as f64;
    Ok(1.0 / (1.0 + (mean - 2.0).max(0.0)))
}

pub fn simplicity(net: &AcceptingPetriNet) -> Result<f64, QualityError> {
    simplicity_from_degrees(&net.node_degrees())
}

/// Fitness, precision, generalization, simplicity and discovery time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityVector {
    pub f: f64,
    pub p: f64,
    pub g: f64,
    pub s: f64,
    pub t: f64,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub quality: QualityVector,
    pub net: AcceptingPetriNet,
    /// Metric values that fell outside [0, 1] and were clamped.
    pub clamp_events: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluationOptions {
    pub timing_repetitions: usize,
}

impl Default for EvaluationOptions {
    fn default() -> Self {
        EvaluationOptions {
            timing_repetitions: DEFAULT_TIMING_REPETITIONS,
        }
    }
}

fn clamp_unit(x: f64, events: &mut usize) -> f64 {
    if (0.0..=1.0).contains(&x) {
        x
    } else {
        *events += 1;
        x.clamp(0.0, 1.0)
    }
}

/// Quality of a given net on a log; `t` is left at 0.
pub fn measure(log: &EventLog, net: &AcceptingPetriNet) -> Result<(QualityVector, usize), EvaluationError> {
    let tag = |metric: &'static str| move |source| EvaluationError::Metric { metric, source };
    let replay = token_replay(log, net);
    let f = replay.fitness().map_err(tag("fitness"))?;
    let p = escaping_edges_precision(log, net);
    let g = generalization_from_counts(&replay.node_executions).map_err(tag("generalization"))?;
    let s = simplicity(net).map_err(tag("simplicity"))?;
    let mut clamps = 0;
    let q = QualityVector {
        f: clamp_unit(f, &mut clamps),
        p: clamp_unit(p, &mut clamps),
        g: clamp_unit(g, &mut clamps),
        s: clamp_unit(s, &mut clamps),
        t: 0.0,
    };
    Ok((q, clamps))
}

pub fn evaluate(log: &EventLog, algorithm: &DiscoveryAlgorithm) -> Result<Evaluation, EvaluationError> {
    evaluate_with(log, algorithm, EvaluationOptions::default())
}

pub fn evaluate_with(
    log: &EventLog,
    algorithm: &DiscoveryAlgorithm,
    options: EvaluationOptions,
) -> Result<Evaluation, EvaluationError> {
    let timed = timed_discovery(log, algorithm, options.timing_repetitions)?;
    let (mut quality, clamp_events) = measure(log, &timed.net)?;
    quality.t = timed.duration;
    Ok(Evaluation {
        quality,
        net: timed.net,
        clamp_events,
    })
}

/// Flat record of one (log, algorithm) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityRow {
    pub log_id: String,
    pub algorithm: String,
    pub f: f64,
    pub p: f64,
    pub g: f64,
    pub s: f64,
    pub t: f64,
}

impl QualityRow {
    pub fn new(log_id: impl Into<String>, algorithm: impl Into<String>, q: &QualityVector) -> Self {
        QualityRow {
            log_id: log_id.into(),
            algorithm: algorithm.into(),
            f: q.f,
            p: q.p,
            g: q.g,
            s: q.s,
            t: q.t,
        }
    }

    /// CSV line with metrics rounded to 6 decimals.
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.log_id, self.algorithm, self.f, self.p, self.g, self.s, self.t
        )
    }

    pub const CSV_HEADER: &'static str = "log_id,algorithm,f,p,g,s,t";
}
