//! Independent reference implementations checked against the library.

use std::collections::{BTreeMap, BTreeSet};

use pmrec_core::discovery::{FootprintMatrix, Relation};
use pmrec_core::eventlog::build_dfg;
use pmrec_core::metalearn::{rank_algorithms, train_forest, ForestParams};
use pmrec_core::petrinet::{tree_to_petri_net, NetBuilder, PlaceId};
use pmrec_core::quality::{
    escaping_edges_precision, generalization_from_counts, simplicity_from_degrees, token_replay,
};
use pmrec_core::{AlgorithmId, EventLog, ProcessTree, QualityVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_log(rng: &mut ChaCha8Rng) -> EventLog {
    let alphabet = ["a", "b", "c", "d", "e", "f"];
    let k = rng.random_range(2..=alphabet.len());
    let seqs: Vec<Vec<&str>> = (0..rng.random_range(1..12))
        .map(|_| {
            (0..rng.random_range(1..8))
                .map(|_| alphabet[rng.random_range(0..k)])
                .collect()
        })
        .collect();
    EventLog::from_sequences(&seqs).unwrap()
}

fn brute_footprint(log: &EventLog, a: &str, b: &str) -> Relation {
    let follows = |x: &str, y: &str| {
        log.sequences()
            .iter()
            .any(|s| (0..s.len().saturating_sub(1)).any(|i| s[i] == x && s[i + 1] == y))
    };
    match (follows(a, b), follows(b, a)) {
        (true, false) => Relation::Causal,
        (false, true) => Relation::ReverseCausal,
        (true, true) => Relation::Parallel,
        (false, false) => Relation::Choice,
    }
}

#[test]
fn footprints_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..100 {
        let log = random_log(&mut rng);
        let fp = FootprintMatrix::from_dfg(&build_dfg(&log));
        assert_eq!(fp.len(), log.alphabet().len());
        for a in log.alphabet() {
            for b in log.alphabet() {
                assert_eq!(fp.relation_of(a, b), Some(brute_footprint(&log, a, b)), "{a},{b}");
            }
        }
    }
}

#[test]
fn dfg_matches_pair_counter() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..100 {
        let log = random_log(&mut rng);
        let mut pairs: BTreeMap<(String, String), usize> = BTreeMap::new();
        let mut starts: BTreeMap<String, usize> = BTreeMap::new();
        let mut ends: BTreeMap<String, usize> = BTreeMap::new();
        for s in log.sequences() {
            *starts.entry(s[0].to_string()).or_default() += 1;
            *ends.entry(s[s.len() - 1].to_string()).or_default() += 1;
            for i in 1..s.len() {
                *pairs.entry((s[i - 1].to_string(), s[i].to_string())).or_default() += 1;
            }
        }
        let dfg = build_dfg(&log);
        assert_eq!(dfg.edge_counts, pairs);
        assert_eq!(dfg.start_counts, starts);
        assert_eq!(dfg.end_counts, ends);
    }
}

/// p0 -a-> p1 -b-> p2, built by hand.
fn chain_ab() -> pmrec_core::AcceptingPetriNet {
    let mut b = NetBuilder::new();
    let p: Vec<PlaceId> = (0..3).map(|i| b.add_place(format!("p{i}"))).collect();
    let ta = b.add_transition("a", Some("a"));
    let tb = b.add_transition("b", Some("b"));
    b.arc_pt(p[0], ta);
    b.arc_tp(ta, p[1]);
    b.arc_pt(p[1], tb);
    b.arc_tp(tb, p[2]);
    b.build(&[(p[0], 1)], &[(p[2], 1)]).unwrap()
}

#[test]
fn hand_token_game() {
    // <a, c, b>: produce 1 initially; a consumes 1 and produces 1; c is
    // unknown and counts one of each; b consumes 1 and produces 1; the final
    // marking consumes 1. c = p = 4, m = r = 1.
    let net = chain_ab();
    let log = EventLog::from_sequences(&[vec!["a", "c", "b"]]).unwrap();
    let r = token_replay(&log, &net);
    assert_eq!(
        (r.total.consumed, r.total.produced, r.total.missing, r.total.remaining),
        (4, 4, 1, 1)
    );
    assert!((r.fitness().unwrap() - 0.75).abs() < 1e-12);

    // <b>: b is not enabled, one token is missing; the initial token stays.
    let log = EventLog::from_sequences(&[vec!["b"]]).unwrap();
    let r = token_replay(&log, &net);
    assert_eq!((r.total.missing, r.total.remaining), (1, 1));
    let perfect = EventLog::from_sequences(&[vec!["a", "b"]]).unwrap();
    assert_eq!(token_replay(&perfect, &net).fitness().unwrap(), 1.0);
}

#[test]
fn flower_precision_by_enumeration() {
    let leaf = |s: &str| ProcessTree::Activity(s.to_string());
    let flower = ProcessTree::looped(vec![
        ProcessTree::xor(vec![leaf("a"), leaf("b"), leaf("c")]),
        ProcessTree::Silent,
    ]);
    let net = tree_to_petri_net(&flower).unwrap();
    let log = EventLog::from_sequences(&[vec!["a", "b", "c"]]).unwrap();
    // States <>, <a>, <a,b>, <a,b,c>, each allowing {a, b, c}; the end
    // pseudo-activity observed last escapes all three.
    let expected = 1.0 - (2.0 + 2.0 + 2.0 + 3.0) / 12.0;
    assert!((escaping_edges_precision(&log, &net) - expected).abs() < 1e-12);
    assert!((expected - 0.25).abs() < 1e-12);
}

#[test]
fn generalization_and_simplicity_arithmetic() {
    let g = generalization_from_counts(&[1, 4, 100]).unwrap();
    assert!((g - (1.0 - (1.0 + 0.5 + 0.1) / 3.0)).abs() < 1e-12);
    assert!((generalization_from_counts(&[4; 7]).unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(generalization_from_counts(&[1, 1, 1]).unwrap(), 0.0);
    assert_eq!(generalization_from_counts(&[0, 1]).unwrap(), 0.0);
    assert!(generalization_from_counts(&[]).is_err());

    assert_eq!(simplicity_from_degrees(&[2, 2, 2]).unwrap(), 1.0);
    assert!((simplicity_from_degrees(&[4, 4]).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(simplicity_from_degrees(&[1, 2]).unwrap(), 1.0);
    assert!(simplicity_from_degrees(&[]).is_err());
    // The hand-built chain has degrees 1, 2, 1 (places) and 2, 2.
    assert_eq!(pmrec_core::quality::simplicity(&chain_ab()).unwrap(), 1.0);
}

#[test]
fn ranking_matches_published_example() {
    let q = |f, p, g, s| QualityVector { f, p, g, s, t: 0.0 };
    let r = rank_algorithms(
        &[
            ("A1", q(1.0, 0.27, 0.91, 0.6)),
            ("A2", q(0.98, 0.38, 0.93, 0.64)),
            ("A3", q(0.99, 0.2, 0.9, 0.59)),
        ],
        false,
    )
    .unwrap();
    // Hand ranks: f (1,3,2), p (2,1,3), g (2,1,3), s (2,1,3).
    let hand = [[1.0, 2.0, 2.0, 2.0], [3.0, 1.0, 1.0, 1.0], [2.0, 3.0, 3.0, 3.0]];
    for (row, h) in r.rows.iter().zip(hand) {
        assert_eq!(row.metric_ranks, h);
        assert_eq!(row.average_rank, h.iter().sum::<f64>() / 4.0);
    }
    assert_eq!(
        r.rows.iter().map(|x| x.average_rank).collect::<Vec<_>>(),
        vec![1.75, 1.5, 2.75]
    );
    assert_eq!(r.target_name(), "A2");
}

/// Feature 3 decides the class; the rest is noise.
pub fn separable_set(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let class = i % 2;
        let mut row: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
        row[3] = class as f64 * 10.0 + rng.random::<f64>();
        x.push(row);
        y.push(class);
    }
    (x, y)
}

#[test]
fn forest_separates_and_ranks_the_separating_feature() {
    let (x, y) = separable_set(80, 5);
    let roster = [AlgorithmId::AM, AlgorithmId::IM];
    let model = train_forest(&x, &y, &roster, ForestParams::default(), 9).unwrap();
    let hits = x
        .iter()
        .zip(&y)
        .filter(|(row, &c)| model.predict_index(row).unwrap() == c)
        .count();
    assert_eq!(hits, x.len());
    let names = ["n0", "n1", "n2", "sep", "n4", "n5"];
    let imp = model.feature_importance(&names);
    assert!(!imp.degenerate);
    assert_eq!(imp.ranked[0].0, "sep");
    let total: f64 = imp.ranked.iter().map(|(_, v)| v).sum();
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn forest_is_deterministic_per_seed() {
    let (x, y) = separable_set(40, 2);
    let roster = [AlgorithmId::AM, AlgorithmId::IM];
    let a = train_forest(&x, &y, &roster, ForestParams::default(), 1).unwrap();
    let b = train_forest(&x, &y, &roster, ForestParams::default(), 1).unwrap();
    let c = train_forest(&x, &y, &roster, ForestParams::default(), 2).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_ne!(a.to_json(), c.to_json());
    let labels: BTreeSet<usize> = y.iter().copied().collect();
    assert_eq!(labels.len(), 2);
}
