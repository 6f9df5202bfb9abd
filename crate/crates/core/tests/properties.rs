use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pmrec_core::eventlog::{build_dfg, parse_csv, variants, write_csv};
use pmrec_core::loggen::{generate_log, NoiseKind};
use pmrec_core::metalearn::{
    fractional_ranks, holdout_split, macro_f_score, rank_algorithms, train_forest, ForestParams,
};
use pmrec_core::petrinet::{accepts_sequence, tree_to_petri_net, Operator};
use pmrec_core::quality::{generalization_from_counts, measure, token_replay};
use pmrec_core::{
    extract_features, AlgorithmId, ColumnMapping, EventLog, FeatureManifest, GeneratorConfig, ProcessTree,
    QualityVector, Trace,
};

fn log_strategy() -> impl Strategy<Value = EventLog> {
    prop::collection::vec(prop::collection::vec(0u8..6, 1..9), 1..15).prop_map(|seqs| {
        let named: Vec<Vec<String>> = seqs
            .iter()
            .map(|s| s.iter().map(|&c| ((b'a' + c) as char).to_string()).collect())
            .collect();
        EventLog::from_sequences(&named).unwrap()
    })
}

#[derive(Debug, Clone)]
enum Shape {
    Leaf,
    Tau,
    Node(Operator, Vec<Shape>),
}

fn shape_strategy() -> impl Strategy<Value = Shape> {
    let leaf = prop_oneof![4 => Just(Shape::Leaf), 1 => Just(Shape::Tau)];
    leaf.prop_recursive(3, 7, 3, |inner| {
        (
            prop::sample::select(Operator::ALL.to_vec()),
            prop::collection::vec(inner, 2..=3),
        )
            .prop_map(|(op, ch)| Shape::Node(op, ch))
    })
}

fn label(shape: &Shape, next: &mut u8) -> ProcessTree {
    match shape {
        Shape::Leaf => {
            let a = ((b'a' + *next) as char).to_string();
            *next += 1;
            ProcessTree::Activity(a)
        }
        Shape::Tau => ProcessTree::Silent,
        Shape::Node(op, ch) => ProcessTree::node(*op, ch.iter().map(|c| label(c, next)).collect()),
    }
}

fn tree_strategy() -> impl Strategy<Value = ProcessTree> {
    shape_strategy().prop_map(|s| label(&s, &mut 0))
}

type Lang = BTreeSet<Vec<String>>;

fn interleave(a: &[String], b: &[String], prefix: &mut Vec<String>, out: &mut Lang) {
    if a.is_empty() || b.is_empty() {
        let mut s = prefix.clone();
        s.extend_from_slice(a);
        s.extend_from_slice(b);
        out.insert(s);
        return;
    }
    prefix.push(a[0].clone());
    interleave(&a[1..], b, prefix, out);
    prefix.pop();
    prefix.push(b[0].clone());
    interleave(a, &b[1..], prefix, out);
    prefix.pop();
}

fn concat(x: &Lang, y: &Lang, max: usize) -> Lang {
    x.iter()
        .flat_map(|a| y.iter().map(move |b| [a.as_slice(), b.as_slice()].concat()))
        .filter(|s| s.len() <= max)
        .collect()
}

/// Every word of the tree's language up to length `max`.
fn language(tree: &ProcessTree, max: usize) -> Lang {
    match tree {
        ProcessTree::Activity(a) => [vec![a.clone()]].into_iter().collect(),
        ProcessTree::Silent => [vec![]].into_iter().collect(),
        ProcessTree::Node { operator, children } => {
            let langs: Vec<Lang> = children.iter().map(|c| language(c, max)).collect();
            match operator {
                Operator::Sequence => langs[1..].iter().fold(langs[0].clone(), |acc, l| concat(&acc, l, max)),
                Operator::Xor => langs.into_iter().flatten().collect(),
                Operator::Parallel => langs[1..].iter().fold(langs[0].clone(), |acc, l| {
                    let mut out = Lang::new();
                    for a in &acc {
                        for b in l {
                            if a.len() + b.len() <= max {
                                interleave(a, b, &mut Vec::new(), &mut out);
                            }
                        }
                    }
                    out
                }),
                Operator::Loop => {
                    let body = &langs[0];
                    let redo: Lang = langs[1..].iter().flatten().cloned().collect();
                    let mut all = body.clone();
                    let mut frontier = body.clone();
                    while !frontier.is_empty() {
                        let next = concat(&concat(&frontier, &redo, max), body, max);
                        frontier = next.difference(&all).cloned().collect();
                        all.extend(frontier.iter().cloned());
                    }
                    all
                }
            }
        }
    }
}

fn all_words(alphabet: &[String], max: usize) -> Vec<Vec<String>> {
    let mut out = vec![vec![]];
    let mut layer = vec![vec![]];
    for _ in 0..max {
        layer = layer
            .iter()
            .flat_map(|w: &Vec<String>| {
                alphabet.iter().map(move |a| {
                    let mut w = w.clone();
                    w.push(a.clone());
                    w
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

fn shuffled(log: &EventLog, seed: u64) -> EventLog {
    let mut traces: Vec<Trace> = log.traces().to_vec();
    traces.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    EventLog::new(traces).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip(log in log_strategy()) {
        let mapping = ColumnMapping::default();
        let mut buf = Vec::new();
        write_csv(&log, &mut buf, &mapping).unwrap();
        let back = parse_csv(buf.as_slice(), &mapping).unwrap();
        prop_assert_eq!(back.sequences(), log.sequences());
        let ids = |l: &EventLog| l.traces().iter().map(|t| t.case_id.clone()).collect::<Vec<_>>();
        prop_assert_eq!(ids(&back), ids(&log));
        let again = parse_csv(buf.as_slice(), &mapping).unwrap();
        prop_assert_eq!(again, back);
    }

    #[test]
    fn variant_and_dfg_totals(log in log_strategy()) {
        prop_assert_eq!(variants(&log).total, log.traces().len());
        let pairs: usize = log.traces().iter().map(|t| t.len() - 1).sum();
        prop_assert_eq!(build_dfg(&log).total_edge_count(), pairs);
    }

    #[test]
    fn tree_nets_accept_exactly_their_language(tree in tree_strategy()) {
        let net = tree_to_petri_net(&tree).unwrap();
        prop_assert_eq!(&net, &tree_to_petri_net(&tree).unwrap());
        let lang = language(&tree, 8);
        for w in &lang {
            prop_assert!(accepts_sequence(&net, w), "rejected member {:?} of {}", w, tree);
        }
        let alphabet: Vec<String> = tree.activities().into_iter().collect();
        let short = if alphabet.len() > 5 { 3 } else { 4 };
        for w in all_words(&alphabet, short) {
            prop_assert_eq!(accepts_sequence(&net, &w), lang.contains(&w), "word {:?} of {}", w, tree);
        }
    }

    #[test]
    fn miners_are_deterministic_and_metrics_bounded(log in log_strategy()) {
        for id in AlgorithmId::ALL {
            let algo = id.default_algorithm();
            let net = algo.discover(&log).unwrap();
            prop_assert_eq!(&net, &algo.discover(&log).unwrap());
            let (q, _) = measure(&log, &net).unwrap();
            for v in [q.f, q.p, q.g, q.s] {
                prop_assert!((0.0..=1.0).contains(&v), "{} gave {:?}", id, q);
            }
            prop_assert_eq!(q, measure(&log, &net).unwrap().0);
        }
        let net = AlgorithmId::IM.default_algorithm().discover(&log).unwrap();
        let r = token_replay(&log, &net);
        prop_assert_eq!((r.total.missing, r.total.remaining), (0, 0));
        prop_assert_eq!(r.fitness().unwrap(), 1.0);
    }

    #[test]
    fn simplicity_ignores_the_log(a in log_strategy(), b in log_strategy()) {
        let net = AlgorithmId::HM.default_algorithm().discover(&a).unwrap();
        prop_assert_eq!(measure(&a, &net).unwrap().0.s, measure(&b, &net).unwrap().0.s);
    }

    #[test]
    fn generalization_grows_with_scaled_executions(counts in prop::collection::vec(1u64..1000, 1..30), k in 2u64..10) {
        let scaled: Vec<u64> = counts.iter().map(|c| c * k).collect();
        prop_assert!(generalization_from_counts(&scaled).unwrap() > generalization_from_counts(&counts).unwrap());
    }

    #[test]
    fn features_ignore_case_order(log in log_strategy(), seed in any::<u64>()) {
        let a = extract_features("x", &log).unwrap();
        let b = extract_features("x", &shuffled(&log, seed)).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!(close(*x, *y), "{} vs {}", x, y);
        }
        prop_assert_eq!(a.values.clone(), extract_features("x", &log).unwrap().values);
    }

    #[test]
    fn duplication_keeps_shape_features(log in log_strategy()) {
        let mut traces = log.traces().to_vec();
        traces.extend(log.traces().iter().map(|t| Trace::new(format!("{}_dup", t.case_id), t.events().to_vec()).unwrap()));
        let doubled = EventLog::new(traces).unwrap();
        let m = FeatureManifest::canonical();
        let a = extract_features("a", &log).unwrap();
        let b = extract_features("b", &doubled).unwrap();
        // Interpolated quartiles are excluded: duplication moves their
        // interpolation points.
        let stable = [
            "trace_len_min", "trace_len_max", "trace_len_mean", "trace_len_median", "trace_len_std",
            "trace_len_variance", "trace_len_geometric_mean",
            "trace_len_harmonic_mean", "trace_len_coefficient_variation", "trace_len_skewness",
            "trace_len_kurtosis", "variant_skewness", "variant_kurtosis", "ratio_most_common_variant",
            "ratio_top_1_variants", "ratio_top_10_variants", "ratio_top_50_variants", "n_unique_traces",
            "activities_count", "activities_skewness", "activities_kurtosis", "entropy_trace",
        ];
        for name in stable {
            let (x, y) = (a.get(&m, name).unwrap(), b.get(&m, name).unwrap());
            prop_assert!(close(x, y), "{}: {} vs {}", name, x, y);
        }
        prop_assert_eq!(b.get(&m, "n_traces").unwrap(), 2.0 * a.get(&m, "n_traces").unwrap());
        prop_assert_eq!(b.get(&m, "n_events").unwrap(), 2.0 * a.get(&m, "n_events").unwrap());
        for (spec, v) in m.features.iter().zip(&a.values) {
            if spec.name.starts_with("entropy_") && !spec.name.contains("diff") && !spec.name.contains("knn") && !spec.name.contains("kozachenko") {
                prop_assert!(*v >= 0.0, "{} = {}", spec.name, v);
            }
        }
    }
}

fn score_table() -> impl Strategy<Value = Vec<QualityVector>> {
    // Two decimals make ties common.
    let unit = (0u32..=100).prop_map(|v| v as f64 / 100.0);
    prop::collection::vec(
        (unit.clone(), unit.clone(), unit.clone(), unit, 0.0f64..5.0)
            .prop_map(|(f, p, g, s, t)| QualityVector { f, p, g, s, t }),
        2..6,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn ranks_are_fractional_permutations(table in score_table(), include_time in any::<bool>()) {
        let named: Vec<(String, QualityVector)> = table.iter().enumerate().map(|(i, q)| (format!("A{i}"), *q)).collect();
        let r = rank_algorithms(&named, include_time).unwrap();
        let n = table.len() as f64;
        let k = if include_time { 5 } else { 4 };
        for m in 0..k {
            let col: f64 = r.rows.iter().map(|row| row.metric_ranks[m]).sum();
            prop_assert!((col - n * (n + 1.0) / 2.0).abs() < 1e-9);
        }
        for row in &r.rows {
            prop_assert_eq!(row.metric_ranks.len(), k);
            let mean = row.metric_ranks.iter().sum::<f64>() / k as f64;
            prop_assert!((row.average_rank - mean).abs() < 1e-12);
        }
        let best = r.rows.iter().map(|x| x.average_rank).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(r.rows[r.target].average_rank, best);
        prop_assert!(r.rows[..r.target].iter().all(|x| x.average_rank > best));
    }

    #[test]
    fn increasing_transform_keeps_ranks(table in score_table(), metric in 0usize..5, include_time in any::<bool>()) {
        let cube = |mut q: QualityVector| {
            match metric {
                0 => q.f = q.f.powi(3),
                1 => q.p = q.p.powi(3),
                2 => q.g = q.g.powi(3),
                3 => q.s = q.s.powi(3),
                _ => q.t = q.t.powi(3),
            }
            q
        };
        let named: Vec<(&str, QualityVector)> = table.iter().map(|q| ("x", *q)).collect();
        let moved: Vec<(&str, QualityVector)> = table.iter().map(|q| ("x", cube(*q))).collect();
        let a = rank_algorithms(&named, include_time).unwrap();
        let b = rank_algorithms(&moved, include_time).unwrap();
        prop_assert_eq!(a.target, b.target);
        for (x, y) in a.rows.iter().zip(&b.rows) {
            prop_assert_eq!(&x.metric_ranks, &y.metric_ranks);
            prop_assert_eq!(x.average_rank, y.average_rank);
        }
    }

    #[test]
    fn fractional_ranks_of_distinct_values_are_a_permutation(values in prop::collection::btree_set(0u32..1000, 1..12)) {
        let v: Vec<f64> = values.iter().rev().map(|&x| x as f64).collect();
        let r = fractional_ranks(&v, true);
        prop_assert_eq!(r, (1..=v.len()).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn perfect_classifier_scores_one(truth in prop::collection::vec(0usize..4, 1..40)) {
        prop_assert_eq!(macro_f_score(&truth, &truth, 4), 1.0);
        let constant = vec![0; truth.len()];
        let f = macro_f_score(&truth, &constant, 4);
        prop_assert!((0.0..=1.0).contains(&f));
    }

    #[test]
    fn holdout_is_a_partition(y in prop::collection::vec(0usize..3, 4..60), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (train, test) = holdout_split(&y, 0.75, &mut rng);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..y.len()).collect::<Vec<_>>());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn forest_predictions_are_vote_fractions(seed in any::<u64>(), n in 4usize..30) {
        let x: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, (i * 7 % 5) as f64, 1.0]).collect();
        let y: Vec<usize> = (0..n).map(|i| (i * 3 / n).min(2)).collect();
        let roster = [AlgorithmId::AM, AlgorithmId::HM, AlgorithmId::IM];
        let params = ForestParams { n_trees: 15, ..Default::default() };
        let m = train_forest(&x, &y, &roster, params, seed).unwrap();
        for row in &x {
            let p = m.predict(row).unwrap();
            let total: f64 = p.votes.iter().map(|v| v.1).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            let best = p.votes.iter().map(|v| v.1).fold(0.0, f64::max);
            prop_assert_eq!(p.votes.iter().find(|v| v.1 == best).unwrap().0, p.algorithm);
        }
        for t in &m.trees {
            for node in &t.nodes {
                if let pmrec_core::metalearn::TreeNode::Split { feature, .. } = node {
                    prop_assert!(*feature < 3);
                }
                if let pmrec_core::metalearn::TreeNode::Leaf { histogram } = node {
                    prop_assert!(histogram.iter().sum::<usize>() > 0);
                }
            }
        }
        prop_assert_eq!(m, train_forest(&x, &y, &roster, params, seed).unwrap());
    }

    #[test]
    fn generator_is_seed_deterministic(seed in any::<u64>()) {
        let config = GeneratorConfig { seed, n_cases: 30, ..GeneratorConfig::default() };
        let (a, ta) = generate_log(&config).unwrap();
        let (b, tb) = generate_log(&config).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(ta, tb);
    }

    #[test]
    fn noise_free_logs_fit_their_tree(seed in any::<u64>()) {
        let config = GeneratorConfig { seed, n_cases: 50, ..GeneratorConfig::default() };
        let (log, truth) = generate_log(&config).unwrap();
        let net = tree_to_petri_net(&truth.tree).unwrap();
        prop_assert_eq!(token_replay(&log, &net).fitness().unwrap(), 1.0);
    }
}

#[test]
fn noise_rate_is_respected() {
    for (i, kind) in [NoiseKind::Skip, NoiseKind::Insert, NoiseKind::Swap].into_iter().enumerate() {
        let config = GeneratorConfig {
            seed: 100 + i as u64,
            n_cases: 2000,
            noise_kind: kind,
            noise_rate: 0.2,
            ..GeneratorConfig::default()
        };
        let (_, truth) = generate_log(&config).unwrap();
        let fraction = truth.noise.len() as f64 / config.n_cases as f64;
        assert!((fraction - 0.2).abs() <= 0.03, "{kind:?}: {fraction}");
    }
}
