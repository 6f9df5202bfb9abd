//! Process discovery, model quality measurement and meta-learned algorithm
//! recommendation over event logs.

pub mod discovery;
pub mod eventlog;
pub mod loggen;
pub mod metafeatures;
pub mod metalearn;
pub mod petrinet;
pub mod quality;

pub use discovery::{AlgorithmId, DiscoveryAlgorithm};
pub use eventlog::{ColumnMapping, EventLog, Trace};
pub use loggen::{GeneratorConfig, Regime};
pub use metafeatures::{extract_features, FeatureManifest, FeatureVector};
pub use metalearn::{
    build_meta_database, evaluate_meta_model, rank_algorithms, train_random_forest, BuildOptions,
    EvaluationConfig, EvaluationReport, ForestParams, MetaDatabase, MetaModel,
};
pub use petrinet::{AcceptingPetriNet, Marking, ProcessTree};
pub use quality::{evaluate, QualityVector};
