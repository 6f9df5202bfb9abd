use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use pmrec_core::discovery::{HeuristicParams, DEFAULT_IMF_NOISE};
use pmrec_core::eventlog::{read_log_file, write_csv};
use pmrec_core::loggen::{corpus_config, generate_log, NoiseKind, Regime};
use pmrec_core::metafeatures::{features_json, write_features_csv};
use pmrec_core::metalearn::{FeatureImportance, Prediction};
use pmrec_core::petrinet::{to_dot, to_pnml};
use pmrec_core::quality::{evaluate_with, measure, EvaluationOptions, QualityRow};
use pmrec_core::{
    build_meta_database, evaluate_meta_model, extract_features, train_random_forest, AlgorithmId,
    BuildOptions, ColumnMapping, DiscoveryAlgorithm, EvaluationConfig, EventLog, FeatureManifest, ForestParams,
    MetaDatabase, MetaModel,
};

/// Recommends a process discovery algorithm for an event log.
#[derive(Debug, Parser)]
#[command(name = "pmrec", version)]
struct Cli {
    /// Seed for every stochastic step. A random seed is drawn and printed when absent.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for batch work (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Machine-readable JSON output on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Do not time discovery; `t` is reported as 0 and outputs are byte-reproducible.
    #[arg(long, global = true)]
    no_timing: bool,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Columns {
    /// CSV column holding the case id.
    #[arg(long, default_value = "case:concept:name")]
    case_column: String,
    /// CSV column holding the activity.
    #[arg(long, default_value = "concept:name")]
    activity_column: String,
    /// CSV column holding the timestamp ("" for none).
    #[arg(long, default_value = "time:timestamp")]
    timestamp_column: String,
}

impl Columns {
    fn mapping(&self) -> ColumnMapping {
        ColumnMapping {
            case: self.case_column.clone(),
            activity: self.activity_column.clone(),
            timestamp: (!self.timestamp_column.is_empty()).then(|| self.timestamp_column.clone()),
        }
    }
}

#[derive(Debug, Args)]
struct Thresholds {
    /// IMf noise threshold.
    #[arg(long, default_value_t = DEFAULT_IMF_NOISE)]
    noise: f64,
    /// HM dependency threshold.
    #[arg(long, default_value_t = HeuristicParams::default().dependency_threshold)]
    dependency: f64,
    /// HM AND threshold.
    #[arg(long, default_value_t = HeuristicParams::default().and_threshold)]
    and_threshold: f64,
}

impl Thresholds {
    fn algorithm(&self, id: AlgorithmId) -> DiscoveryAlgorithm {
        match id {
            AlgorithmId::HM => DiscoveryAlgorithm::Heuristic(HeuristicParams {
                dependency_threshold: self.dependency,
                and_threshold: self.and_threshold,
            }),
            AlgorithmId::IMf => DiscoveryAlgorithm::InductiveInfrequent {
                noise_threshold: self.noise,
            },
            other => other.default_algorithm(),
        }
    }
}

#[derive(Debug, Args)]
struct Inputs {
    /// Log files (.xes, .xes.gz or .csv).
    #[arg(long = "log")]
    logs: Vec<PathBuf>,
    /// Directory whose log files are all read.
    #[arg(long)]
    dir: Option<PathBuf>,
    #[command(flatten)]
    columns: Columns,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a corpus of synthetic logs with ground-truth trees.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 200)]
        cases: usize,
        /// Fix one regime instead of rotating through all of them.
        #[arg(long)]
        regime: Option<Regime>,
        /// Override the noise kind (none, skip, insert, swap).
        #[arg(long)]
        noise_kind: Option<NoiseKind>,
        #[arg(long)]
        noise_rate: Option<f64>,
    },
    /// Extract meta-features to CSV.
    Extract {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Discover a Petri net and write it as PNML (and optionally DOT).
    Discover {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value = "IM")]
        algorithm: AlgorithmId,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dot: Option<PathBuf>,
        #[command(flatten)]
        thresholds: Thresholds,
        #[command(flatten)]
        columns: Columns,
    },
    /// Evaluate discovery algorithms on logs (fitness, precision, generalization, simplicity, time).
    Evaluate {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_delimiter = ',', default_value = "AM,HM,IM,IMf,IMd")]
        algorithms: Vec<AlgorithmId>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        thresholds: Thresholds,
    },
    /// Build the meta-database: features plus the best-ranked algorithm per log.
    BuildMetadb {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_delimiter = ',', default_value = "AM,HM,IM,IMf,IMd")]
        roster: Vec<AlgorithmId>,
        /// Rank discovery time as a fifth metric.
        #[arg(long)]
        include_time: bool,
        /// Output CSV; the sidecar is written next to it as `<stem>.meta.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the random-forest meta-model.
    Train {
        #[arg(long)]
        metadb: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        forest: Forest,
    },
    /// Repeated holdout evaluation of the meta-model against baselines.
    EvaluateModel {
        #[arg(long)]
        metadb: PathBuf,
        #[arg(long, default_value_t = 0.75)]
        split: f64,
        #[arg(long, default_value_t = 30)]
        repetitions: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        forest: Forest,
    },
    /// Recommend an algorithm for a log; optionally run it.
    Recommend {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Run the recommended algorithm and write its net as PNML here.
        #[arg(long)]
        run: Option<PathBuf>,
        #[command(flatten)]
        columns: Columns,
    },
    /// Print the feature manifest.
    Manifest,
}

#[derive(Debug, Args)]
struct Forest {
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long, default_value_t = 1)]
    min_samples_leaf: usize,
    #[arg(long)]
    features_per_split: Option<usize>,
}

impl Forest {
    fn params(&self) -> ForestParams {
        ForestParams {
            n_trees: self.trees,
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            features_per_split: self.features_per_split,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn seed(cli: &Cli) -> u64 {
    cli.seed.unwrap_or_else(|| {
        let s = rand::random();
        eprintln!("seed: {s}");
        s
    })
}

fn create(path: &Path) -> Result<io::BufWriter<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(io::BufWriter::new(f))
}

fn is_log_file(path: &Path) -> bool {
    let name = path.file_name().map(|n| n.to_string_lossy().to_lowercase()).unwrap_or_default();
    name.ends_with(".xes") || name.ends_with(".xes.gz") || name.ends_with(".csv")
}

fn log_id(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    for ext in [".xes.gz", ".xes", ".csv"] {
        if name.to_lowercase().ends_with(ext) {
            return name[..name.len() - ext.len()].to_string();
        }
    }
    name
}

fn read_log(path: &Path, mapping: &ColumnMapping) -> Result<EventLog> {
    read_log_file(path, mapping).with_context(|| format!("reading {}", path.display()))
}

fn load_inputs(inputs: &Inputs) -> Result<Vec<(String, EventLog)>> {
    let mut paths = inputs.logs.clone();
    if let Some(dir) = &inputs.dir {
        let mut found: Vec<PathBuf> = fs::read_dir(dir)
            .with_context(|| format!("reading directory {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && is_log_file(p))
            .collect();
        found.sort();
        paths.extend(found);
    }
    if paths.is_empty() {
        bail!("no input logs; pass --log or --dir");
    }
    let mapping = inputs.columns.mapping();
    let mut logs: Vec<(String, EventLog)> = paths
        .par_iter()
        .map(|p| Ok((log_id(p), read_log(p, &mapping)?)))
        .collect::<Result<_>>()?;
    logs.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(logs)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(bytes)?;
            w.flush()?;
        }
        None => io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn sidecar_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv.with_file_name(format!("{stem}.meta.json"))
}

fn read_metadb(path: &Path) -> Result<MetaDatabase> {
    let side = sidecar_path(path);
    let csv = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let info = fs::File::open(&side).with_context(|| format!("opening {}", side.display()))?;
    MetaDatabase::read(io::BufReader::new(csv), io::BufReader::new(info))
        .with_context(|| format!("reading meta-database {}", path.display()))
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate {
            out,
            count,
            cases,
            regime,
            noise_kind,
            noise_rate,
        } => {
            let seed = seed(cli);
            fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
            let mapping = ColumnMapping::default();
            let summary: Vec<(String, Regime, usize)> = (0..*count)
                .into_par_iter()
                .map(|i| {
                    let (rotating, mut config) = corpus_config(seed, i, *cases);
                    let regime = regime.unwrap_or(rotating);
                    if regime != rotating {
                        config = regime.config(config.seed, *cases);
                    }
                    if let Some(k) = noise_kind {
                        config.noise_kind = *k;
                    }
                    if let Some(r) = noise_rate {
                        config.noise_rate = *r;
                    }
                    let (log, truth) = generate_log(&config)?;
                    let id = format!("log_{i:04}");
                    let mut w = create(&out.join(format!("{id}.csv")))?;
                    write_csv(&log, &mut w, &mapping)?;
                    w.flush()?;
                    fs::write(out.join(format!("{id}.truth.json")), truth.to_json())?;
                    Ok((id, regime, log.traces().len()))
                })
                .collect::<Result<_>>()?;
            if cli.json {
                let rows: Vec<_> = summary
                    .iter()
                    .map(|(id, r, n)| serde_json::json!({"log_id": id, "regime": r, "cases": n}))
                    .collect();
                println!("{}", serde_json::to_string_pretty(&rows)?);
            } else {
                for (id, r, n) in &summary {
                    println!("{id}\t{}\t{n} cases", r.as_str());
                }
            }
        }
        Command::Extract { inputs, out } => {
            let logs = load_inputs(inputs)?;
            let manifest = FeatureManifest::canonical();
            let rows = logs
                .par_iter()
                .map(|(id, log)| extract_features(id.clone(), log).with_context(|| format!("extracting {id}")))
                .collect::<Result<Vec<_>>>()?;
            let mut buf = Vec::new();
            if cli.json {
                let v: Vec<_> = rows.iter().map(|r| features_json(&manifest, r)).collect();
                serde_json::to_writer_pretty(&mut buf, &v)?;
                buf.push(b'\n');
            } else {
                write_features_csv(&mut buf, &manifest, &rows)?;
            }
            emit(out.as_deref(), &buf)?;
        }
        Command::Discover {
            log,
            algorithm,
            out,
            dot,
            thresholds,
            columns,
        } => {
            let el = read_log(log, &columns.mapping())?;
            let net = thresholds
                .algorithm(*algorithm)
                .discover(&el)
                .with_context(|| format!("discovering {algorithm} on {}", log.display()))?;
            emit(Some(out), to_pnml(&net).as_bytes())?;
            if let Some(d) = dot {
                emit(Some(d), to_dot(&net).as_bytes())?;
            }
            let (p, t) = (net.places().len(), net.transitions().len());
            if cli.json {
                println!("{}", serde_json::json!({"algorithm": algorithm, "places": p, "transitions": t}));
            } else {
                println!("{algorithm}: {p} places, {t} transitions -> {}", out.display());
            }
        }
        Command::Evaluate {
            inputs,
            algorithms,
            out,
            thresholds,
        } => {
            let logs = load_inputs(inputs)?;
            let pairs: Vec<(&String, &EventLog, AlgorithmId)> = logs
                .iter()
                .flat_map(|(id, l)| algorithms.iter().map(move |&a| (id, l, a)))
                .collect();
            let no_timing = cli.no_timing;
            let rows = pairs
                .par_iter()
                .map(|&(id, log, a)| {
                    let algo = thresholds.algorithm(a);
                    let q = if no_timing {
                        let net = algo.discover(log)?;
                        measure(log, &net)?.0
                    } else {
                        evaluate_with(log, &algo, EvaluationOptions::default())?.quality
                    };
                    Ok(QualityRow::new(id.clone(), a.as_str(), &q))
                })
                .collect::<Result<Vec<_>, anyhow::Error>>()?;
            let mut buf = Vec::new();
            if cli.json {
                serde_json::to_writer_pretty(&mut buf, &rows)?;
                buf.push(b'\n');
            } else {
                writeln!(buf, "{}", QualityRow::CSV_HEADER)?;
                for r in &rows {
                    writeln!(buf, "{}", r.to_csv_line())?;
                }
            }
            emit(out.as_deref(), &buf)?;
        }
        Command::BuildMetadb {
            inputs,
            roster,
            include_time,
            out,
        } => {
            if *include_time && cli.no_timing {
                bail!("--include-time needs timing; drop --no-timing");
            }
            let logs = load_inputs(inputs)?;
            let opts = BuildOptions {
                include_time: *include_time,
                timing: !cli.no_timing,
                ..BuildOptions::default()
            };
            let db = build_meta_database(&logs, roster, opts)?;
            let mut w = create(out)?;
            db.write_csv(&mut w)?;
            w.flush()?;
            let mut w = create(&sidecar_path(out))?;
            db.write_info(&mut w)?;
            w.flush()?;
            let dist = db.class_distribution();
            if cli.json {
                println!(
                    "{}",
                    serde_json::json!({"rows": db.rows.len(), "excluded": db.info.excluded, "class_distribution": dist})
                );
            } else {
                println!("{} rows, {} excluded", db.rows.len(), db.info.excluded.len());
                for (a, n) in dist {
                    println!("  {a:<4} {n}");
                }
            }
        }
        Command::Train { metadb, out, forest } => {
            let seed = seed(cli);
            let db = read_metadb(metadb)?;
            let model = train_random_forest(&db, forest.params(), seed)?;
            emit(Some(out), model.to_json().as_bytes())?;
            let manifest = FeatureManifest::canonical();
            let imp = model.feature_importance(&manifest.names());
            print_importance(cli.json, &imp)?;
        }
        Command::EvaluateModel {
            metadb,
            split,
            repetitions,
            out,
            forest,
        } => {
            let seed = seed(cli);
            let db = read_metadb(metadb)?;
            let report = evaluate_meta_model(
                &db,
                EvaluationConfig {
                    split: *split,
                    repetitions: *repetitions,
                    seed,
                    forest: forest.params(),
                },
            )?;
            if let Some(p) = out {
                emit(Some(p), serde_json::to_string_pretty(&report)?.as_bytes())?;
            }
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                println!("{:<10} {:>8} {:>8}", "", "accuracy", "f-score");
                for (name, s) in [("meta-model", &report.model), ("majority", &report.majority), ("random", &report.random)] {
                    println!("{name:<10} {:>8.3} {:>8.3}", s.accuracy, s.f_score);
                }
            }
        }
        Command::Recommend {
            log,
            model,
            run,
            columns,
        } => {
            let text = fs::read_to_string(model).with_context(|| format!("reading {}", model.display()))?;
            let model = MetaModel::from_json(&text).with_context(|| format!("loading model {}", model.display()))?;
            let manifest = FeatureManifest::canonical();
            if model.manifest_fingerprint != manifest.fingerprint() {
                bail!("model was trained on a different feature manifest");
            }
            let el = read_log(log, &columns.mapping())?;
            let fv = extract_features(log_id(log), &el)?;
            let pred = model.predict(&fv.values)?;
            print_prediction(cli.json, &pred)?;
            if let Some(path) = run {
                let net = pred.algorithm.default_algorithm().discover(&el)?;
                emit(Some(path), to_pnml(&net).as_bytes())?;
            }
        }
        Command::Manifest => {
            let manifest = FeatureManifest::canonical();
            if cli.json {
                println!(
                    "{}",
                    serde_json::json!({"fingerprint": manifest.fingerprint(), "features": manifest.features})
                );
            } else {
                print!("{}", manifest.to_text());
            }
        }
    }
    Ok(())
}

fn print_prediction(json: bool, pred: &Prediction) -> Result<()> {
    if json {
        println!("{}", serde_json::to_string_pretty(pred)?);
    } else {
        println!("{}", pred.algorithm);
        for (a, v) in &pred.votes {
            println!("  {a:<4} {v:.3}");
        }
    }
    Ok(())
}

fn print_importance(json: bool, imp: &FeatureImportance) -> Result<()> {
    if json {
        println!("{}", serde_json::to_string_pretty(imp)?);
    } else if imp.degenerate {
        println!("forest has no splits; feature importance is undefined");
    } else {
        println!("top features:");
        for (name, v) in imp.ranked.iter().take(10) {
            println!("  {name:<40} {v:.4}");
        }
    }
    Ok(())
}
