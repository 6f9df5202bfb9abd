//! The five discovery algorithms used as recommendation targets, each a pure
//! function from an [`EventLog`] to an [`AcceptingPetriNet`].

mod alpha;
mod heuristic;
mod inductive;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eventlog::EventLog;
use crate::petrinet::{AcceptingPetriNet, NetError};

pub use alpha::{alpha_miner, FootprintMatrix, Relation};
pub use heuristic::{
    and_measure, dependency_graph, dependency_measure, heuristic_miner, DependencyGraph,
    HeuristicParams,
};
pub use inductive::{discover_process_tree, inductive_miner, infrequent_filtered_dfg, InductiveVariant};

#[derive(Debug, Error)]
pub enum DiscoveryError {
    #[error("{name} must lie in [0, 1], got {value}")]
    InvalidThreshold { name: &'static str, value: f64 },
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Identifier of a discovery algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AlgorithmId {
    AM,
    HM,
    IM,
    IMf,
    IMd,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 5] = [
        AlgorithmId::AM,
        AlgorithmId::HM,
        AlgorithmId::IM,
        AlgorithmId::IMf,
        AlgorithmId::IMd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmId::AM => "AM",
            AlgorithmId::HM => "HM",
            AlgorithmId::IM => "IM",
            AlgorithmId::IMf => "IMf",
            AlgorithmId::IMd => "IMd",
        }
    }

    /// The algorithm with its default parameters.
    pub fn default_algorithm(self) -> DiscoveryAlgorithm {
        match self {
            AlgorithmId::AM => DiscoveryAlgorithm::Alpha,
            AlgorithmId::HM => DiscoveryAlgorithm::Heuristic(HeuristicParams::default()),
            AlgorithmId::IM => DiscoveryAlgorithm::Inductive,
            AlgorithmId::IMf => DiscoveryAlgorithm::InductiveInfrequent {
                noise_threshold: DEFAULT_IMF_NOISE,
            },
            AlgorithmId::IMd => DiscoveryAlgorithm::InductiveDirectlyFollows,
        }
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlgorithmId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "am" | "alpha" => Ok(AlgorithmId::AM),
            "hm" | "heuristic" => Ok(AlgorithmId::HM),
            "im" => Ok(AlgorithmId::IM),
            "imf" => Ok(AlgorithmId::IMf),
            "imd" => Ok(AlgorithmId::IMd),
            other => Err(format!("unknown algorithm `{other}` (expected am|hm|im|imf|imd)")),
        }
    }
}

pub const DEFAULT_IMF_NOISE: f64 = 0.2;

/// A discovery algorithm together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DiscoveryAlgorithm {
    Alpha,
    Heuristic(HeuristicParams),
    Inductive,
    InductiveInfrequent { noise_threshold: f64 },
    InductiveDirectlyFollows,
}

fn check_fraction(name: &'static str, value: f64) -> Result<(), DiscoveryError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(DiscoveryError::InvalidThreshold { name, value })
    }
}

impl DiscoveryAlgorithm {
    pub fn id(&self) -> AlgorithmId {
        match self {
            DiscoveryAlgorithm::Alpha => AlgorithmId::AM,
            DiscoveryAlgorithm::Heuristic(_) => AlgorithmId::HM,
            DiscoveryAlgorithm::Inductive => AlgorithmId::IM,
            DiscoveryAlgorithm::InductiveInfrequent { .. } => AlgorithmId::IMf,
            DiscoveryAlgorithm::InductiveDirectlyFollows => AlgorithmId::IMd,
        }
    }

    pub fn validate(&self) -> Result<(), DiscoveryError> {
        match *self {
            DiscoveryAlgorithm::Heuristic(p) => {
                check_fraction("dependency threshold", p.dependency_threshold)?;
                check_fraction("AND threshold", p.and_threshold)
            }
            DiscoveryAlgorithm::InductiveInfrequent { noise_threshold } => {
                check_fraction("noise threshold", noise_threshold)
            }
            _ => Ok(()),
        }
    }

    pub fn discover(&self, log: &EventLog) -> Result<AcceptingPetriNet, DiscoveryError> {
        self.validate()?;
        Ok(match *self {
            DiscoveryAlgorithm::Alpha => alpha_miner(log)?,
            DiscoveryAlgorithm::Heuristic(p) => heuristic_miner(log, p)?,
            DiscoveryAlgorithm::Inductive => inductive_miner(log, InductiveVariant::Im)?,
            DiscoveryAlgorithm::InductiveInfrequent { noise_threshold } => {
                inductive_miner(log, InductiveVariant::Imf { noise_threshold })?
            }
            DiscoveryAlgorithm::InductiveDirectlyFollows => {
                inductive_miner(log, InductiveVariant::Imd)?
            }
        })
    }
}

#[derive(Debug, Clone)]
pub struct TimedDiscoveryResult {
    pub net: AcceptingPetriNet,
    /// Median wall-clock seconds of the discovery call.
    pub duration: f64,
}

pub const DEFAULT_TIMING_REPETITIONS: usize = 3;

/// Runs discovery `repetitions` times on a monotonic clock and reports the
/// median duration together with the (deterministic) net.
pub fn timed_discovery(
    log: &EventLog,
    algorithm: &DiscoveryAlgorithm,
    repetitions: usize,
) -> Result<TimedDiscoveryResult, DiscoveryError> {
    if repetitions == 0 {
        return Err(DiscoveryError::NoRepetitions);
    }
    let mut durations = Vec::with_capacity(repetitions);
    let mut net = None;
    for _ in 0..repetitions {
        let start = Instant::now();
        let mined = algorithm.discover(log)?;
        durations.push(start.elapsed().as_secs_f64());
        net.get_or_insert(mined);
    }
    durations.sort_by(f64::total_cmp);
    let mid = durations.len() / 2;
    let duration = if durations.len() % 2 == 1 {
        durations[mid]
    } else {
        0.5 * (durations[mid - 1] + durations[mid])
    };
    Ok(TimedDiscoveryResult {
        net: net.expect("at least one repetition"),
        duration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip_through_strings() {
        for id in AlgorithmId::ALL {
            assert_eq!(id.as_str().parse::<AlgorithmId>().unwrap(), id);
            assert_eq!(id.default_algorithm().id(), id);
        }
        assert!("split".parse::<AlgorithmId>().is_err());
    }

    #[test]
    fn thresholds_are_validated() {
        let bad = DiscoveryAlgorithm::InductiveInfrequent {
            noise_threshold: 1.5,
        };
        assert!(matches!(
            bad.validate(),
            Err(DiscoveryError::InvalidThreshold { .. })
        ));
        let bad = DiscoveryAlgorithm::Heuristic(HeuristicParams {
            dependency_threshold: -0.1,
            and_threshold: 0.5,
        });
        assert!(bad.validate().is_err());
    }

    #[test]
    fn timing_is_non_negative_and_net_is_stable() {
        let log = EventLog::from_sequences(&[vec!["a", "b", "c"], vec!["a", "c", "b"]]).unwrap();
        for id in AlgorithmId::ALL {
            let algo = id.default_algorithm();
            let one = timed_discovery(&log, &algo, 1).unwrap();
            let three = timed_discovery(&log, &algo, 3).unwrap();
            assert!(one.duration >= 0.0 && three.duration >= 0.0);
            assert_eq!(one.net, three.net, "{id}");
        }
        assert!(timed_discovery(&log, &DiscoveryAlgorithm::Alpha, 0).is_err());
    }
}
