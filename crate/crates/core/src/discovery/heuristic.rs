//! Heuristic miner: frequency-based dependency graph, AND/XOR split and join
//! resolution, and conversion of the causal structure to a Petri net through
//! silent routing transitions.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::eventlog::{build_dfg, DirectlyFollowsGraph, EventLog};
use crate::petrinet::{AcceptingPetriNet, NetBuilder, NetError, PlaceId, TransitionId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicParams {
    pub dependency_threshold: f64,
    pub and_threshold: f64,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        HeuristicParams {
            dependency_threshold: 0.9,
            and_threshold: 0.65,
        }
    }
}

/// `(|a>b| - |b>a|) / (|a>b| + |b>a| + 1)`; for a self-loop, `|a>a| / (|a>a| + 1)`.
pub fn dependency_measure(ab: usize, ba: usize, self_loop: bool) -> f64 {
    if self_loop {
        ab as f64 / (ab as f64 + 1.0)
    } else {
        (ab as f64 - ba as f64) / (ab as f64 + ba as f64 + 1.0)
    }
}

/// Evidence that `x` and `y` are concurrent around `pivot`:
/// `(|x>y| + |y>x|) / (|pivot~x| + |pivot~y| + 1)`, where `pivot~x` is the
/// directly-follows count linking the pivot and `x` (pivot→x for splits,
/// x→pivot for joins).
pub fn and_measure(xy: usize, yx: usize, pivot_x: usize, pivot_y: usize) -> f64 {
    (xy + yx) as f64 / (pivot_x + pivot_y + 1) as f64
}

/// Kept dependency arcs with their measures.
#[derive(Debug, Clone, PartialEq)]
pub struct DependencyGraph {
    pub activities: Vec<String>,
    pub arcs: BTreeMap<(String, String), f64>,
    pub start_activities: BTreeSet<String>,
    pub end_activities: BTreeSet<String>,
    pub dfg: DirectlyFollowsGraph,
}

pub fn dependency_graph(log: &EventLog, params: HeuristicParams) -> DependencyGraph {
    let dfg = build_dfg(log);
    let mut arcs = BTreeMap::new();
    for (a, b) in dfg.edge_counts.keys() {
        let dep = dependency_measure(dfg.edge(a, b), dfg.edge(b, a), a == b);
        if dep >= params.dependency_threshold {
            arcs.insert((a.clone(), b.clone()), dep);
        }
    }
    DependencyGraph {
        activities: dfg.nodes.iter().cloned().collect(),
        arcs,
        start_activities: dfg.start_counts.keys().cloned().collect(),
        end_activities: dfg.end_counts.keys().cloned().collect(),
        dfg,
    }
}

/// Virtual endpoints share the node index space with activities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Node {
    Start,
    Act(usize),
    End,
}

fn components(members: &[Node], xor: impl Fn(Node, Node) -> bool) -> Vec<Vec<Node>> {
    let n = members.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for j in i + 1..n {
            if xor(members[i], members[j]) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<Node>> = BTreeMap::new();
    for (i, &m) in members.iter().enumerate().take(n) {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(m);
    }
    groups.into_values().collect()
}

/// Mines the dependency graph and converts it to a Petri net.
///
/// Each kept arc `(a, b)` becomes a place. The successors of an activity are
/// grouped into XOR-components (connected through pairs whose AND-measure
/// falls below the threshold); the activity produces a token for every
/// component, and a multi-member component routes it through silent
/// transitions. Joins are resolved symmetrically.
pub fn heuristic_miner(log: &EventLog, params: HeuristicParams) -> Result<AcceptingPetriNet, NetError> {
    let graph = dependency_graph(log, params);
    let acts = &graph.activities;
    let index: BTreeMap<&str, usize> = acts.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();
    let count = |x: usize, y: usize| graph.dfg.edge(&acts[x], &acts[y]);

    let mut successors: BTreeMap<Node, Vec<Node>> = BTreeMap::new();
    let mut predecessors: BTreeMap<Node, Vec<Node>> = BTreeMap::new();
    let mut link = |from: Node, to: Node| {
        successors.entry(from).or_default().push(to);
        predecessors.entry(to).or_default().push(from);
    };
    for a in &graph.start_activities {
        link(Node::Start, Node::Act(index[a.as_str()]));
    }
    for (a, b) in graph.arcs.keys() {
        link(Node::Act(index[a.as_str()]), Node::Act(index[b.as_str()]));
    }
    for a in &graph.end_activities {
        link(Node::Act(index[a.as_str()]), Node::End);
    }
    successors.values_mut().for_each(|v| v.sort());
    predecessors.values_mut().for_each(|v| v.sort());

    let mut b = NetBuilder::new();
    let mut tau = 0usize;
    let mut silent = |b: &mut NetBuilder| -> TransitionId {
        tau += 1;
        b.add_transition(format!("tau_{tau}"), None)
    };
    let transitions: Vec<TransitionId> = acts.iter().map(|a| b.add_transition(a.clone(), Some(a))).collect();
    let name = |n: Node| match n {
        Node::Start => "start".to_string(),
        Node::End => "end".to_string(),
        Node::Act(i) => acts[i].clone(),
    };
    let mut arc_place: BTreeMap<(Node, Node), PlaceId> = BTreeMap::new();
    for (&from, tos) in &successors {
        for &to in tos {
            let p = b.add_place(format!("({},{})", name(from), name(to)));
            arc_place.insert((from, to), p);
        }
    }

    // Output side of every node.
    let mut source = None;
    for (&from, tos) in &successors {
        let groups = components(tos, |x, y| match (from, x, y) {
            (Node::Act(a), Node::Act(bx), Node::Act(by)) if bx != a && by != a => {
                and_measure(count(bx, by), count(by, bx), count(a, bx), count(a, by)) < params.and_threshold
            }
            _ => true,
        });
        for group in groups {
            match (from, group.as_slice()) {
                (Node::Start, [only]) => source = Some(arc_place[&(from, *only)]),
                (Node::Start, members) => {
                    let q = b.add_place("source");
                    for &to in members {
                        let t = silent(&mut b);
                        b.arc_pt(q, t);
                        b.arc_tp(t, arc_place[&(from, to)]);
                    }
                    source = Some(q);
                }
                (Node::Act(a), [only]) => b.arc_tp(transitions[a], arc_place[&(from, *only)]),
                (Node::Act(a), members) => {
                    let q = b.add_place(format!("split_{}", acts[a]));
                    b.arc_tp(transitions[a], q);
                    for &to in members {
                        let t = silent(&mut b);
                        b.arc_pt(q, t);
                        b.arc_tp(t, arc_place[&(from, to)]);
                    }
                }
                (Node::End, _) => unreachable!("end has no successors"),
            }
        }
    }

    // Input side of every node.
    let mut sink = None;
    for (&to, froms) in &predecessors {
        let groups = components(froms, |x, y| match (to, x, y) {
            (Node::Act(c), Node::Act(ax), Node::Act(ay)) if ax != c && ay != c => {
                and_measure(count(ax, ay), count(ay, ax), count(ax, c), count(ay, c)) < params.and_threshold
            }
            _ => true,
        });
        for group in groups {
            match (to, group.as_slice()) {
                (Node::End, [only]) => sink = Some(arc_place[&(*only, to)]),
                (Node::End, members) => {
                    let r = b.add_place("sink");
                    for &from in members {
                        let t = silent(&mut b);
                        b.arc_pt(arc_place[&(from, to)], t);
                        b.arc_tp(t, r);
                    }
                    sink = Some(r);
                }
                (Node::Act(c), [only]) => b.arc_pt(arc_place[&(*only, to)], transitions[c]),
                (Node::Act(c), members) => {
                    let r = b.add_place(format!("join_{}", acts[c]));
                    for &from in members {
                        let t = silent(&mut b);
                        b.arc_pt(arc_place[&(from, to)], t);
                        b.arc_tp(t, r);
                    }
                    b.arc_pt(r, transitions[c]);
                }
                (Node::Start, _) => unreachable!("start has no predecessors"),
            }
        }
    }

    let source = source.expect("logs have at least one start activity");
    let sink = sink.expect("logs have at least one end activity");
    b.build(&[(source, 1)], &[(sink, 1)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::petrinet::accepts_sequence;

    fn repeat(seq: &[&'static str], n: usize) -> Vec<Vec<&'static str>> {
        vec![seq.to_vec(); n]
    }

    #[test]
    fn dependency_arithmetic() {
        let log = EventLog::from_sequences(&repeat(&["a", "b"], 10)).unwrap();
        let g = dependency_graph(&log, HeuristicParams::default());
        let dep = g.arcs[&("a".to_string(), "b".to_string())];
        assert!((dep - 10.0 / 11.0).abs() < 1e-12);
        assert!(dep >= 0.9);
    }

    #[test]
    fn infrequent_arc_is_dropped() {
        let mut seqs = repeat(&["a", "b"], 99);
        seqs.push(vec!["a", "c"]);
        let log = EventLog::from_sequences(&seqs).unwrap();
        let g = dependency_graph(&log, HeuristicParams::default());
        assert!((dependency_measure(1, 0, false) - 0.5).abs() < 1e-12);
        assert!(!g.arcs.contains_key(&("a".to_string(), "c".to_string())));
        assert!(g.arcs.contains_key(&("a".to_string(), "b".to_string())));
    }

    #[test]
    fn xor_and_and_splits() {
        let mut seqs = repeat(&["a", "b", "d"], 20);
        seqs.extend(repeat(&["a", "c", "d"], 20));
        let net = heuristic_miner(&EventLog::from_sequences(&seqs).unwrap(), HeuristicParams::default()).unwrap();
        assert!(accepts_sequence(&net, &["a", "b", "d"]));
        assert!(accepts_sequence(&net, &["a", "c", "d"]));
        assert!(!accepts_sequence(&net, &["a", "b", "c", "d"]));

        let mut seqs = repeat(&["a", "b", "c", "d"], 20);
        seqs.extend(repeat(&["a", "c", "b", "d"], 20));
        let params = HeuristicParams {
            dependency_threshold: 0.5,
            and_threshold: 0.65,
        };
        let net = heuristic_miner(&EventLog::from_sequences(&seqs).unwrap(), params).unwrap();
        assert!(accepts_sequence(&net, &["a", "b", "c", "d"]));
        assert!(accepts_sequence(&net, &["a", "c", "b", "d"]));
        assert!(!accepts_sequence(&net, &["a", "b", "d"]));
    }

    #[test]
    fn self_loop_is_replayable() {
        let mut seqs = repeat(&["a", "b", "b", "c"], 10);
        seqs.extend(repeat(&["a", "b", "c"], 10));
        let net = heuristic_miner(&EventLog::from_sequences(&seqs).unwrap(), HeuristicParams::default()).unwrap();
        assert!(accepts_sequence(&net, &["a", "b", "c"]));
        assert!(accepts_sequence(&net, &["a", "b", "b", "b", "c"]));
    }
}
