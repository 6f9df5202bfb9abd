use pmrec_core::loggen::generate_corpus;
use pmrec_core::metalearn::{MetaError, MetaRow};
use pmrec_core::{
    build_meta_database, evaluate_meta_model, train_random_forest, AlgorithmId, BuildOptions, EvaluationConfig,
    EventLog, ForestParams, MetaDatabase,
};

fn corpus(n: usize) -> Vec<(String, EventLog)> {
    generate_corpus(21, n, 60)
        .unwrap()
        .into_iter()
        .map(|(id, _, log, _)| (id, log))
        .collect()
}

fn bytes(db: &MetaDatabase) -> (Vec<u8>, Vec<u8>) {
    let (mut c, mut j) = (Vec::new(), Vec::new());
    db.write_csv(&mut c).unwrap();
    db.write_info(&mut j).unwrap();
    (c, j)
}

#[test]
fn serial_and_parallel_builds_agree() {
    let mut logs = corpus(12);
    let roster = [AlgorithmId::AM, AlgorithmId::HM, AlgorithmId::IM];
    let parallel = build_meta_database(&logs, &roster, BuildOptions::untimed()).unwrap();
    logs.reverse();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let serial = pool.install(|| build_meta_database(&logs, &roster, BuildOptions::untimed()).unwrap());
    assert_eq!(bytes(&parallel), bytes(&serial));
    assert_eq!(parallel.rows.len(), 12);
    assert!(parallel.rows.windows(2).all(|w| w[0].log_id < w[1].log_id));
    let dist = parallel.class_distribution();
    assert_eq!(dist.values().sum::<usize>(), 12);
}

#[test]
fn meta_database_round_trips_through_files() {
    let logs = corpus(6);
    let roster = [AlgorithmId::IM, AlgorithmId::IMd];
    let db = build_meta_database(&logs, &roster, BuildOptions::untimed()).unwrap();
    let (c, j) = bytes(&db);
    let back = MetaDatabase::read(c.as_slice(), j.as_slice()).unwrap();
    assert_eq!(back, db);
}

#[test]
fn single_log_row_uses_the_ranking_winner() {
    let log = EventLog::from_sequences(&[vec!["a", "b", "c"], vec!["a", "c", "b"]]).unwrap();
    let roster = [AlgorithmId::AM, AlgorithmId::HM, AlgorithmId::IM];
    let db = build_meta_database(&[("one".into(), log)], &roster, BuildOptions::untimed()).unwrap();
    assert_eq!(db.rows.len(), 1);
    let d = &db.info.details[0];
    let best = d.average_ranks.iter().copied().fold(f64::INFINITY, f64::min);
    let first = d.average_ranks.iter().position(|&r| r == best).unwrap();
    assert_eq!(db.rows[0].target, roster[first]);
}

#[test]
fn roster_and_input_errors() {
    let logs = corpus(1);
    assert!(matches!(
        build_meta_database(&logs, &[AlgorithmId::IM], BuildOptions::untimed()),
        Err(MetaError::TooFewAlgorithms(1))
    ));
    assert!(matches!(
        build_meta_database(&[], &[AlgorithmId::IM, AlgorithmId::AM], BuildOptions::untimed()),
        Err(MetaError::EmptyDatabase)
    ));
}

#[test]
fn timed_build_ranks_five_metrics() {
    let logs = corpus(2);
    let roster = [AlgorithmId::AM, AlgorithmId::IM];
    let db = build_meta_database(&logs, &roster, BuildOptions::default()).unwrap();
    assert!(db.info.include_time);
    assert!(db.info.details.iter().all(|d| d.scores.iter().all(|q| q.t >= 0.0)));
}

#[test]
fn majority_baseline_matches_training_majority_frequency() {
    let logs = corpus(24);
    let roster = [AlgorithmId::AM, AlgorithmId::HM, AlgorithmId::IM];
    let db = build_meta_database(&logs, &roster, BuildOptions::untimed()).unwrap();
    let cfg = EvaluationConfig {
        repetitions: 5,
        seed: 3,
        forest: ForestParams {
            n_trees: 20,
            ..Default::default()
        },
        ..Default::default()
    };
    let report = evaluate_meta_model(&db, cfg).unwrap();
    assert_eq!(report.model.accuracy_runs.len(), 5);
    let y: Vec<usize> = db
        .rows
        .iter()
        .map(|r| roster.iter().position(|&a| a == r.target).unwrap())
        .collect();
    for rep in 0..5 {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        rng.set_stream(rep as u64 + 1);
        let (train, test) = pmrec_core::metalearn::holdout_split(&y, 0.75, &mut rng);
        let mut counts = [0usize; 3];
        train.iter().for_each(|&i| counts[y[i]] += 1);
        let top = *counts.iter().max().unwrap();
        let majority = counts.iter().position(|&c| c == top).unwrap();
        let freq = test.iter().filter(|&&i| y[i] == majority).count() as f64 / test.len() as f64;
        assert!((report.majority.accuracy_runs[rep] - freq).abs() < 1e-12);
    }
    for s in [&report.model, &report.majority, &report.random] {
        assert!((0.0..=1.0).contains(&s.accuracy) && (0.0..=1.0).contains(&s.f_score));
    }
    let again = evaluate_meta_model(&db, cfg).unwrap();
    assert_eq!(serde_json::to_string(&report).unwrap(), serde_json::to_string(&again).unwrap());
}

#[test]
fn model_rejects_foreign_manifest_and_dimension() {
    let logs = corpus(4);
    let roster = [AlgorithmId::AM, AlgorithmId::IM];
    let mut db = build_meta_database(&logs, &roster, BuildOptions::untimed()).unwrap();
    let model = train_random_forest(&db, ForestParams::default(), 1).unwrap();
    assert!(model.predict(&[0.0; 3]).is_err());
    db.info.manifest_fingerprint = "other".into();
    assert!(matches!(
        train_random_forest(&db, ForestParams::default(), 1),
        Err(MetaError::Fingerprint { .. })
    ));
    let short = MetaDatabase {
        rows: vec![MetaRow {
            log_id: "x".into(),
            features: vec![1.0],
            target: AlgorithmId::AM,
        }],
        info: {
            let mut info = db.info.clone();
            info.manifest_fingerprint = pmrec_core::FeatureManifest::canonical().fingerprint();
            info
        },
    };
    assert!(matches!(
        train_random_forest(&short, ForestParams::default(), 1),
        Err(MetaError::Dimension { .. })
    ));
}
