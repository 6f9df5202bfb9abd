//! Accepting Petri nets, token-game semantics and process trees.
//!
//! Nets are immutable once built; markings are plain values. Transitions
//! without a label are silent: they take part in replay but never correspond
//! to a log event.

mod export;
mod tree;

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use export::{to_dot, to_pnml};
pub use tree::{tree_to_petri_net, Operator, ProcessTree};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetError {
    #[error("unknown place p{0}")]
    UnknownPlace(usize),
    #[error("unknown transition t{0}")]
    UnknownTransition(usize),
    #[error("transition {0} is not enabled")]
    NotEnabled(String),
    #[error("marking has {found} places, net has {expected}")]
    MarkingSize { expected: usize, found: usize },
    #[error("malformed process tree: {0}")]
    MalformedTree(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PlaceId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TransitionId(pub usize);

impl fmt::Display for PlaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

impl fmt::Display for TransitionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Place {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub name: String,
    /// `None` marks a silent transition.
    pub label: Option<String>,
}

impl Transition {
    pub fn is_silent(&self) -> bool {
        self.label.is_none()
    }
}

/// Directed arc; the variant fixes the bipartite direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Arc {
    PlaceToTransition(PlaceId, TransitionId),
    TransitionToPlace(TransitionId, PlaceId),
}

/// Token counts indexed by place id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Marking(Vec<u32>);

impl Marking {
    pub fn empty(num_places: usize) -> Self {
        Marking(vec![0; num_places])
    }

    pub fn from_tokens(num_places: usize, tokens: &[(PlaceId, u32)]) -> Result<Self, NetError> {
        let mut m = Self::empty(num_places);
        for &(p, n) in tokens {
            *m.0.get_mut(p.0).ok_or(NetError::UnknownPlace(p.0))? += n;
        }
        Ok(m)
    }

    pub fn tokens(&self, place: PlaceId) -> u32 {
        self.0.get(place.0).copied().unwrap_or(0)
    }

    pub fn set(&mut self, place: PlaceId, count: u32) {
        self.0[place.0] = count;
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    /// Places holding at least one token.
    pub fn support(&self) -> impl Iterator<Item = (PlaceId, u32)> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (PlaceId(i), c))
    }

    /// `self >= other` place-wise.
    pub fn covers(&self, other: &Marking) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a >= b)
    }
}

/// A Petri net with initial and final markings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcceptingPetriNet {
    places: Vec<Place>,
    transitions: Vec<Transition>,
    arcs: Vec<Arc>,
    initial_marking: Marking,
    final_marking: Marking,
    preset: Vec<Vec<PlaceId>>,
    postset: Vec<Vec<PlaceId>>,
    place_in: Vec<usize>,
    place_out: Vec<usize>,
}

impl AcceptingPetriNet {
    pub fn places(&self) -> &[Place] {
        &self.places
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn initial_marking(&self) -> &Marking {
        &self.initial_marking
    }

    pub fn final_marking(&self) -> &Marking {
        &self.final_marking
    }

    pub fn num_nodes(&self) -> usize {
        self.places.len() + self.transitions.len()
    }

    pub fn transition(&self, t: TransitionId) -> &Transition {
        &self.transitions[t.0]
    }

    pub fn preset(&self, t: TransitionId) -> &[PlaceId] {
        &self.preset[t.0]
    }

    pub fn postset(&self, t: TransitionId) -> &[PlaceId] {
        &self.postset[t.0]
    }

    pub fn transition_ids(&self) -> impl Iterator<Item = TransitionId> {
        (0..self.transitions.len()).map(TransitionId)
    }

    pub fn silent_transitions(&self) -> impl Iterator<Item = TransitionId> + '_ {
        self.transition_ids()
            .filter(|&t| self.transitions[t.0].is_silent())
    }

    /// Transitions carrying `label`, in id order.
    pub fn transitions_with_label<'a>(
        &'a self,
        label: &'a str,
    ) -> impl Iterator<Item = TransitionId> + 'a {
        self.transition_ids()
            .filter(move |&t| self.transitions[t.0].label.as_deref() == Some(label))
    }

    /// Distinct visible labels.
    pub fn labels(&self) -> BTreeSet<&str> {
        self.transitions
            .iter()
            .filter_map(|t| t.label.as_deref())
            .collect()
    }

    /// Per-node arc degree (inputs + outputs): places first, then transitions.
    pub fn node_degrees(&self) -> Vec<usize> {
        let places = (0..self.places.len()).map(|p| self.place_in[p] + self.place_out[p]);
        let transitions = (0..self.transitions.len()).map(|t| self.preset[t].len() + self.postset[t].len());
        places.chain(transitions).collect()
    }

    pub fn is_enabled(&self, marking: &Marking, t: TransitionId) -> bool {
        self.preset[t.0].iter().all(|&p| marking.0[p.0] > 0)
    }

    /// Fires without checking enablement; callers guarantee enough tokens.
    pub(crate) fn fire_unchecked(&self, marking: &mut Marking, t: TransitionId) {
        for &p in &self.preset[t.0] {
            marking.0[p.0] -= 1;
        }
        for &p in &self.postset[t.0] {
            marking.0[p.0] += 1;
        }
    }

    fn check_marking(&self, marking: &Marking) -> Result<(), NetError> {
        if marking.0.len() != self.places.len() {
            return Err(NetError::MarkingSize {
                expected: self.places.len(),
                found: marking.0.len(),
            });
        }
        Ok(())
    }
}

/// Incrementally assembles an [`AcceptingPetriNet`].
#[derive(Debug, Default, Clone)]
pub struct NetBuilder {
    places: Vec<Place>,
    transitions: Vec<Transition>,
    arcs: BTreeSet<Arc>,
}

impl NetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_place(&mut self, name: impl Into<String>) -> PlaceId {
        self.places.push(Place { name: name.into() });
        PlaceId(self.places.len() - 1)
    }

    pub fn add_transition(&mut self, name: impl Into<String>, label: Option<&str>) -> TransitionId {
        self.transitions.push(Transition {
            name: name.into(),
            label: label.map(str::to_string),
        });
        TransitionId(self.transitions.len() - 1)
    }

    pub fn arc_pt(&mut self, p: PlaceId, t: TransitionId) {
        self.arcs.insert(Arc::PlaceToTransition(p, t));
    }

    pub fn arc_tp(&mut self, t: TransitionId, p: PlaceId) {
        self.arcs.insert(Arc::TransitionToPlace(t, p));
    }

    pub fn num_places(&self) -> usize {
        self.places.len()
    }

    pub fn build(
        self,
        initial: &[(PlaceId, u32)],
        final_: &[(PlaceId, u32)],
    ) -> Result<AcceptingPetriNet, NetError> {
        let np = self.places.len();
        let nt = self.transitions.len();
        let mut preset = vec![Vec::new(); nt];
        let mut postset = vec![Vec::new(); nt];
        let mut place_in = vec![0; np];
        let mut place_out = vec![0; np];
        for arc in &self.arcs {
            let (p, t) = match *arc {
                Arc::PlaceToTransition(p, t) | Arc::TransitionToPlace(t, p) => (p, t),
            };
            if p.0 >= np {
                return Err(NetError::UnknownPlace(p.0));
            }
            if t.0 >= nt {
                return Err(NetError::UnknownTransition(t.0));
            }
            match *arc {
                Arc::PlaceToTransition(..) => {
                    preset[t.0].push(p);
                    place_out[p.0] += 1;
                }
                Arc::TransitionToPlace(..) => {
                    postset[t.0].push(p);
                    place_in[p.0] += 1;
                }
            }
        }
        Ok(AcceptingPetriNet {
            initial_marking: Marking::from_tokens(np, initial)?,
            final_marking: Marking::from_tokens(np, final_)?,
            places: self.places,
            transitions: self.transitions,
            arcs: self.arcs.into_iter().collect(),
            preset,
            postset,
            place_in,
            place_out,
        })
    }
}

/// Transitions whose every input place holds a token under `marking`.
pub fn enabled_transitions(net: &AcceptingPetriNet, marking: &Marking) -> Vec<TransitionId> {
    net.transition_ids()
        .filter(|&t| net.is_enabled(marking, t))
        .collect()
}

/// Fires `t`, returning the successor marking.
pub fn fire(net: &AcceptingPetriNet, marking: &Marking, t: TransitionId) -> Result<Marking, NetError> {
    net.check_marking(marking)?;
    if t.0 >= net.transitions.len() {
        return Err(NetError::UnknownTransition(t.0));
    }
    if !net.is_enabled(marking, t) {
        return Err(NetError::NotEnabled(net.transitions[t.0].name.clone()));
    }
    let mut next = marking.clone();
    net.fire_unchecked(&mut next, t);
    Ok(next)
}

/// Bounds for breadth-first searches over silent firings.
#[derive(Debug, Clone, Copy)]
pub struct SilentSearch {
    pub max_depth: usize,
    pub max_states: usize,
}

impl SilentSearch {
    /// Depth cap of twice the number of transitions.
    pub fn for_net(net: &AcceptingPetriNet) -> Self {
        SilentSearch {
            max_depth: 2 * net.transitions.len(),
            max_states: 4096,
        }
    }

    /// Shortest silent firing sequence from `start` to a marking satisfying
    /// `goal` (checked on `start` first). Ties resolve by transition id.
    pub fn find_path(
        &self,
        net: &AcceptingPetriNet,
        start: &Marking,
        mut goal: impl FnMut(&Marking) -> bool,
    ) -> Option<Vec<TransitionId>> {
        if goal(start) {
            return Some(Vec::new());
        }
        let silent: Vec<TransitionId> = net.silent_transitions().collect();
        if silent.is_empty() {
            return None;
        }
        // Parent links: (marking, parent index, transition fired).
        let mut nodes: Vec<(Marking, usize, TransitionId, usize)> =
            vec![(start.clone(), usize::MAX, TransitionId(0), 0)];
        let mut seen: HashSet<Marking> = HashSet::from([start.clone()]);
        let mut queue = VecDeque::from([0usize]);
        while let Some(idx) = queue.pop_front() {
            let depth = nodes[idx].3;
            if depth >= self.max_depth {
                continue;
            }
            for &t in &silent {
                if !net.is_enabled(&nodes[idx].0, t) {
                    continue;
                }
                let mut next = nodes[idx].0.clone();
                net.fire_unchecked(&mut next, t);
                if seen.contains(&next) {
                    continue;
                }
                if goal(&next) {
                    let mut path = vec![t];
                    let mut cur = idx;
                    while nodes[cur].1 != usize::MAX {
                        path.push(nodes[cur].2);
                        cur = nodes[cur].1;
                    }
                    path.reverse();
                    return Some(path);
                }
                if seen.len() >= self.max_states {
                    return None;
                }
                seen.insert(next.clone());
                nodes.push((next, idx, t, depth + 1));
                queue.push_back(nodes.len() - 1);
            }
        }
        None
    }

    /// Markings reachable from `start` through silent firings, `start` first.
    pub fn closure(&self, net: &AcceptingPetriNet, start: &Marking) -> Vec<Marking> {
        let silent: Vec<TransitionId> = net.silent_transitions().collect();
        let mut out = vec![start.clone()];
        if silent.is_empty() {
            return out;
        }
        let mut seen: HashSet<Marking> = HashSet::from([start.clone()]);
        let mut queue = VecDeque::from([(0usize, 0usize)]);
        while let Some((idx, depth)) = queue.pop_front() {
            if depth >= self.max_depth {
                continue;
            }
            for &t in &silent {
                if !net.is_enabled(&out[idx], t) {
                    continue;
                }
                let mut next = out[idx].clone();
                net.fire_unchecked(&mut next, t);
                if seen.len() >= self.max_states {
                    return out;
                }
                if seen.insert(next.clone()) {
                    out.push(next);
                    queue.push_back((out.len() - 1, depth + 1));
                }
            }
        }
        out
    }
}

/// Whether the net can fire the visible sequence `seq` (interleaved with any
/// silent firings) from its initial marking and end in its final marking.
pub fn accepts_sequence<S: AsRef<str>>(net: &AcceptingPetriNet, seq: &[S]) -> bool {
    let search = SilentSearch::for_net(net);
    let mut frontier: BTreeSet<Marking> = search
        .closure(net, net.initial_marking())
        .into_iter()
        .collect();
    for label in seq {
        let mut next = BTreeSet::new();
        for m in &frontier {
            for t in net.transitions_with_label(label.as_ref()) {
                if net.is_enabled(m, t) {
                    let mut fired = m.clone();
                    net.fire_unchecked(&mut fired, t);
                    next.extend(search.closure(net, &fired));
                }
            }
        }
        if next.is_empty() {
            return false;
        }
        frontier = next;
    }
    frontier.contains(net.final_marking())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> (AcceptingPetriNet, PlaceId, PlaceId, TransitionId) {
        let mut b = NetBuilder::new();
        let a = b.add_place("a");
        let z = b.add_place("b");
        let t = b.add_transition("t", Some("x"));
        b.arc_pt(a, t);
        b.arc_tp(t, z);
        (b.build(&[(a, 1)], &[(z, 1)]).unwrap(), a, z, t)
    }

    #[test]
    fn enabled_and_fire_on_chain() {
        let (net, a, z, t) = chain();
        let m = net.initial_marking().clone();
        assert_eq!(enabled_transitions(&net, &m), vec![t]);
        let next = fire(&net, &m, t).unwrap();
        assert_eq!((next.tokens(a), next.tokens(z)), (0, 1));
        // Value semantics: the input is untouched.
        assert_eq!(m.tokens(a), 1);
        let empty = Marking::empty(2);
        assert!(enabled_transitions(&net, &empty).is_empty());
        assert!(matches!(fire(&net, &empty, t), Err(NetError::NotEnabled(_))));
    }

    #[test]
    fn self_loop_keeps_token() {
        let mut b = NetBuilder::new();
        let p = b.add_place("p");
        let t = b.add_transition("t", Some("x"));
        b.arc_pt(p, t);
        b.arc_tp(t, p);
        let net = b.build(&[(p, 1)], &[(p, 1)]).unwrap();
        let next = fire(&net, net.initial_marking(), t).unwrap();
        assert_eq!(next.tokens(p), 1);
        assert_eq!(net.node_degrees(), vec![2, 2]);
    }

    #[test]
    fn builder_rejects_unknown_ids() {
        let mut b = NetBuilder::new();
        let p = b.add_place("p");
        b.arc_pt(p, TransitionId(3));
        assert_eq!(b.build(&[], &[]).unwrap_err(), NetError::UnknownTransition(3));
        let b = NetBuilder::new();
        assert_eq!(b.build(&[(PlaceId(0), 1)], &[]).unwrap_err(), NetError::UnknownPlace(0));
    }

    #[test]
    fn silent_path_search() {
        // p0 -tau-> p1 -tau-> p2 -a-> p3
        let mut b = NetBuilder::new();
        let p: Vec<_> = (0..4).map(|i| b.add_place(format!("p{i}"))).collect();
        let t0 = b.add_transition("t0", None);
        let t1 = b.add_transition("t1", None);
        let a = b.add_transition("a", Some("a"));
        b.arc_pt(p[0], t0);
        b.arc_tp(t0, p[1]);
        b.arc_pt(p[1], t1);
        b.arc_tp(t1, p[2]);
        b.arc_pt(p[2], a);
        b.arc_tp(a, p[3]);
        let net = b.build(&[(p[0], 1)], &[(p[3], 1)]).unwrap();
        let search = SilentSearch::for_net(&net);
        let path = search
            .find_path(&net, net.initial_marking(), |m| net.is_enabled(m, a))
            .unwrap();
        assert_eq!(path, vec![t0, t1]);
        assert_eq!(search.closure(&net, net.initial_marking()).len(), 3);
        assert!(accepts_sequence(&net, &["a"]));
        assert!(!accepts_sequence(&net, &["a", "a"]));
        assert!(!accepts_sequence::<&str>(&net, &[]));
    }
}
