//! Alpha miner.

use std::collections::{BTreeSet, HashSet};

use crate::eventlog::{build_dfg, DirectlyFollowsGraph, EventLog};
use crate::petrinet::{AcceptingPetriNet, NetBuilder, NetError};

/// Footprint relation of an ordered activity pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    /// `a -> b`: a directly followed by b, never the reverse.
    Causal,
    /// `a <- b`.
    ReverseCausal,
    /// `a || b`: both orders observed.
    Parallel,
    /// `a # b`: neither order observed.
    Choice,
}

/// Pairwise footprint relations over the sorted activity alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FootprintMatrix {
    activities: Vec<String>,
    relations: Vec<Vec<Relation>>,
}

impl FootprintMatrix {
    pub fn from_dfg(dfg: &DirectlyFollowsGraph) -> Self {
        let activities: Vec<String> = dfg.nodes.iter().cloned().collect();
        let n = activities.len();
        let mut follows = vec![vec![false; n]; n];
        for ((a, b), &count) in &dfg.edge_counts {
            if count > 0 {
                let i = activities.binary_search(a).expect("edge endpoint is a node");
                let j = activities.binary_search(b).expect("edge endpoint is a node");
                follows[i][j] = true;
            }
        }
        let relations = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| match (follows[i][j], follows[j][i]) {
                        (true, false) => Relation::Causal,
                        (false, true) => Relation::ReverseCausal,
                        (true, true) => Relation::Parallel,
                        (false, false) => Relation::Choice,
                    })
                    .collect()
            })
            .collect();
        FootprintMatrix {
            activities,
            relations,
        }
    }

    pub fn activities(&self) -> &[String] {
        &self.activities
    }

    pub fn relation(&self, a: usize, b: usize) -> Relation {
        self.relations[a][b]
    }

    pub fn relation_of(&self, a: &str, b: &str) -> Option<Relation> {
        let i = self.activities.binary_search_by(|x| x.as_str().cmp(a)).ok()?;
        let j = self.activities.binary_search_by(|x| x.as_str().cmp(b)).ok()?;
        Some(self.relations[i][j])
    }

    pub fn len(&self) -> usize {
        self.activities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.activities.is_empty()
    }
}

type Pair = (BTreeSet<usize>, BTreeSet<usize>);

/// Upper bound on candidate place pairs; merging stops once reached.
const MAX_CANDIDATE_PAIRS: usize = 2_048;

fn valid_pair(fp: &FootprintMatrix, a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> bool {
    let all_choice = |set: &BTreeSet<usize>| {
        set.iter()
            .all(|&x| set.iter().all(|&y| fp.relation(x, y) == Relation::Choice))
    };
    all_choice(a)
        && all_choice(b)
        && a.iter()
            .all(|&x| b.iter().all(|&y| fp.relation(x, y) == Relation::Causal))
}

/// Maximal `(A, B)` pairs: every element of A causally precedes every element
/// of B, and elements within A (resp. B) are pairwise in choice.
pub(crate) fn maximal_pairs(fp: &FootprintMatrix) -> Vec<Pair> {
    let n = fp.len();
    let mut pairs: Vec<Pair> = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let (sa, sb) = (BTreeSet::from([a]), BTreeSet::from([b]));
            if valid_pair(fp, &sa, &sb) {
                pairs.push((sa, sb));
            }
        }
    }
    let mut seen: HashSet<Pair> = pairs.iter().cloned().collect();
    let mut i = 0;
    'grow: while i < pairs.len() {
        let mut j = i + 1;
        while j < pairs.len() {
            let (a1, b1) = &pairs[i];
            let (a2, b2) = &pairs[j];
            let related = a1.is_subset(a2) || a2.is_subset(a1) || b1.is_subset(b2) || b2.is_subset(b1);
            if related {
                let a: BTreeSet<usize> = a1.union(a2).copied().collect();
                let b: BTreeSet<usize> = b1.union(b2).copied().collect();
                let merged = (a, b);
                if !seen.contains(&merged) && valid_pair(fp, &merged.0, &merged.1) {
                    if pairs.len() >= MAX_CANDIDATE_PAIRS {
                        log::warn!("alpha miner: candidate pair limit reached, stopping merge");
                        break 'grow;
                    }
                    seen.insert(merged.clone());
                    pairs.push(merged);
                }
            }
            j += 1;
        }
        i += 1;
    }
    let mut maximal: Vec<Pair> = pairs
        .iter()
        .filter(|(a, b)| {
            !pairs
                .iter()
                .any(|(a2, b2)| (a2 != a || b2 != b) && a.is_subset(a2) && b.is_subset(b2))
        })
        .cloned()
        .collect();
    maximal.sort();
    maximal.dedup();
    maximal
}

/// Classic alpha algorithm: one transition per activity, one place per
/// maximal causal pair, plus source and sink places wired to the start and
/// end activities.
pub fn alpha_miner(log: &EventLog) -> Result<AcceptingPetriNet, NetError> {
    let dfg = build_dfg(log);
    let fp = FootprintMatrix::from_dfg(&dfg);
    let pairs = maximal_pairs(&fp);

    let mut b = NetBuilder::new();
    let source = b.add_place("source");
    let sink = b.add_place("sink");
    let transitions: Vec<_> = fp
        .activities()
        .iter()
        .map(|a| b.add_transition(a.clone(), Some(a)))
        .collect();
    for (set_a, set_b) in &pairs {
        let name = |set: &BTreeSet<usize>| {
            set.iter()
                .map(|&i| fp.activities()[i].as_str())
                .collect::<Vec<_>>()
                .join(",")
        };
        let p = b.add_place(format!("({{{}}},{{{}}})", name(set_a), name(set_b)));
        for &x in set_a {
            b.arc_tp(transitions[x], p);
        }
        for &y in set_b {
            b.arc_pt(p, transitions[y]);
        }
    }
    for (i, a) in fp.activities().iter().enumerate() {
        if dfg.start_counts.contains_key(a) {
            b.arc_pt(source, transitions[i]);
        }
        if dfg.end_counts.contains_key(a) {
            b.arc_tp(transitions[i], sink);
        }
    }
    b.build(&[(source, 1)], &[(sink, 1)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::petrinet::accepts_sequence;

    #[test]
    fn single_activity() {
        let log = EventLog::from_sequences(&[vec!["a"]]).unwrap();
        let net = alpha_miner(&log).unwrap();
        assert_eq!(net.places().len(), 2);
        assert_eq!(net.transitions().len(), 1);
        assert!(accepts_sequence(&net, &["a"]));
    }

    #[test]
    fn choice_between_b_and_c() {
        let log = EventLog::from_sequences(&[vec!["a", "b", "d"], vec!["a", "c", "d"]]).unwrap();
        let net = alpha_miner(&log).unwrap();
        // source, sink, ({a},{b,c}), ({b,c},{d})
        assert_eq!(net.places().len(), 4);
        assert!(net.places().iter().any(|p| p.name == "({a},{b,c})"));
        assert!(accepts_sequence(&net, &["a", "b", "d"]));
        assert!(accepts_sequence(&net, &["a", "c", "d"]));
        assert!(!accepts_sequence(&net, &["a", "b", "c", "d"]));
        assert!(!accepts_sequence(&net, &["a", "d"]));
    }

    #[test]
    fn concurrency_has_no_place_between() {
        let log = EventLog::from_sequences(&[vec!["a", "b", "c", "d"], vec!["a", "c", "b", "d"]])
            .unwrap();
        let fp = FootprintMatrix::from_dfg(&build_dfg(&log));
        assert_eq!(fp.relation_of("b", "c"), Some(Relation::Parallel));
        let net = alpha_miner(&log).unwrap();
        assert!(!net.places().iter().any(|p| p.name.contains("{b},{c}") || p.name.contains("{c},{b}")));
        assert!(accepts_sequence(&net, &["a", "b", "c", "d"]));
        assert!(accepts_sequence(&net, &["a", "c", "b", "d"]));
    }
}
