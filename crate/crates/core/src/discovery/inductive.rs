//! Inductive miner family: IM, IMf (infrequent-behaviour filtering) and IMd
//! (recursion on the directly-follows graph alone).
//!
//! Cuts are searched in the fixed order exclusive choice, sequence, parallel,
//! loop. When none applies, the flower model over the remaining activities is
//! used.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::eventlog::{DirectlyFollowsGraph, EventLog};
use crate::petrinet::{tree_to_petri_net, AcceptingPetriNet, NetError, Operator, ProcessTree};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InductiveVariant {
    Im,
    Imf { noise_threshold: f64 },
    Imd,
}

type Variants = BTreeMap<Vec<u32>, usize>;
type Part = BTreeSet<u32>;

#[derive(Debug, Clone, Default)]
struct Graph {
    acts: BTreeSet<u32>,
    edges: BTreeMap<(u32, u32), usize>,
    starts: BTreeMap<u32, usize>,
    ends: BTreeMap<u32, usize>,
    empty: usize,
}

impl Graph {
    fn from_variants(variants: &Variants) -> Self {
        let mut g = Graph::default();
        for (trace, &count) in variants {
            let (Some(&first), Some(&last)) = (trace.first(), trace.last()) else {
                g.empty += count;
                continue;
            };
            g.acts.extend(trace.iter().copied());
            *g.starts.entry(first).or_default() += count;
            *g.ends.entry(last).or_default() += count;
            for w in trace.windows(2) {
                *g.edges.entry((w[0], w[1])).or_default() += count;
            }
        }
        g
    }

    fn has_edge(&self, a: u32, b: u32) -> bool {
        self.edges.contains_key(&(a, b))
    }

    /// Drops edges below `noise` times the heaviest outgoing edge of their
    /// source, and start/end entries below `noise` times the heaviest one.
    fn filtered(&self, noise: f64) -> Graph {
        let mut max_out: BTreeMap<u32, usize> = BTreeMap::new();
        for (&(a, _), &c) in &self.edges {
            let m = max_out.entry(a).or_default();
            *m = (*m).max(c);
        }
        let keep_rel = |counts: &BTreeMap<u32, usize>| {
            let max = counts.values().copied().max().unwrap_or(0);
            counts
                .iter()
                .filter(|(_, &c)| c as f64 >= noise * max as f64)
                .map(|(&a, &c)| (a, c))
                .collect::<BTreeMap<_, _>>()
        };
        Graph {
            acts: self.acts.clone(),
            edges: self
                .edges
                .iter()
                .filter(|(&(a, _), &c)| c as f64 >= noise * max_out[&a] as f64)
                .map(|(&k, &c)| (k, c))
                .collect(),
            starts: keep_rel(&self.starts),
            ends: keep_rel(&self.ends),
            empty: self.empty,
        }
    }

    /// Activities reachable from a start activity that also reach an end
    /// activity.
    fn connected_activities(&self) -> Part {
        let forward = self.reach_from(self.starts.keys().copied(), false);
        let backward = self.reach_from(self.ends.keys().copied(), true);
        forward.intersection(&backward).copied().collect()
    }

    fn reach_from(&self, seeds: impl Iterator<Item = u32>, reverse: bool) -> Part {
        let mut adj: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for &(a, b) in self.edges.keys() {
            let (x, y) = if reverse { (b, a) } else { (a, b) };
            adj.entry(x).or_default().push(y);
        }
        let mut seen: Part = seeds.collect();
        let mut queue: VecDeque<u32> = seen.iter().copied().collect();
        while let Some(x) = queue.pop_front() {
            for &y in adj.get(&x).map(Vec::as_slice).unwrap_or(&[]) {
                if seen.insert(y) {
                    queue.push_back(y);
                }
            }
        }
        seen
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }

    /// Groups of `items`, ordered by their smallest member.
    fn groups(&mut self, items: &[u32]) -> Vec<Part> {
        let mut by_root: BTreeMap<usize, Part> = BTreeMap::new();
        for (i, &a) in items.iter().enumerate() {
            let r = self.find(i);
            by_root.entry(r).or_default().insert(a);
        }
        let mut out: Vec<Part> = by_root.into_values().collect();
        out.sort_by_key(|p| *p.iter().next().expect("non-empty group"));
        out
    }
}

fn xor_cut(g: &Graph) -> Option<Vec<Part>> {
    let acts: Vec<u32> = g.acts.iter().copied().collect();
    let pos: BTreeMap<u32, usize> = acts.iter().enumerate().map(|(i, &a)| (a, i)).collect();
    let mut uf = UnionFind::new(acts.len());
    for &(a, b) in g.edges.keys() {
        uf.union(pos[&a], pos[&b]);
    }
    let groups = uf.groups(&acts);
    (groups.len() > 1).then_some(groups)
}

fn reachability(g: &Graph, acts: &[u32]) -> Vec<Vec<bool>> {
    acts.iter()
        .map(|&a| {
            let mut r = g.reach_from(
                g.edges.keys().filter(|&&(x, _)| x == a).map(|&(_, y)| y),
                false,
            );
            // reach_from seeds with direct successors, so `a` is only in its
            // own set when it lies on a cycle.
            let reached: Vec<bool> = acts.iter().map(|b| r.remove(b)).collect();
            reached
        })
        .collect()
}

fn sequence_cut(g: &Graph) -> Option<Vec<Part>> {
    let acts: Vec<u32> = g.acts.iter().copied().collect();
    let n = acts.len();
    let reach = reachability(g, &acts);
    let mut uf = UnionFind::new(n);
    for (i, row) in reach.iter().enumerate() {
        for j in i + 1..n {
            if row[j] == reach[j][i] {
                uf.union(i, j);
            }
        }
    }
    let pos: BTreeMap<u32, usize> = acts.iter().enumerate().map(|(i, &a)| (a, i)).collect();
    let mut groups = uf.groups(&acts);
    if groups.len() < 2 {
        return None;
    }
    let reaches = |x: &Part, y: &Part| x.iter().any(|a| y.iter().any(|b| reach[pos[a]][pos[b]]));
    let reached_count: Vec<usize> = groups
        .iter()
        .map(|x| groups.iter().filter(|y| reaches(x, y)).count())
        .collect();
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(reached_count[i]));
    groups = order.into_iter().map(|i| groups[i].clone()).collect();
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            for a in &groups[i] {
                for b in &groups[j] {
                    if !reach[pos[a]][pos[b]] || reach[pos[b]][pos[a]] {
                        return None;
                    }
                }
            }
        }
    }
    Some(groups)
}

fn parallel_cut(g: &Graph) -> Option<Vec<Part>> {
    let acts: Vec<u32> = g.acts.iter().copied().collect();
    let n = acts.len();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (acts[i], acts[j]);
            if !(g.has_edge(a, b) && g.has_edge(b, a)) {
                uf.union(i, j);
            }
        }
    }
    let groups = uf.groups(&acts);
    if groups.len() < 2 {
        return None;
    }
    let complete = |p: &Part| {
        p.iter().any(|a| g.starts.contains_key(a)) && p.iter().any(|a| g.ends.contains_key(a))
    };
    let mut parts: Vec<Part> = Vec::new();
    let mut buffer = Part::new();
    for group in groups {
        if complete(&group) {
            parts.push(group);
        } else {
            buffer.extend(group);
            if complete(&buffer) {
                parts.push(std::mem::take(&mut buffer));
            }
        }
    }
    if !buffer.is_empty() {
        parts.last_mut()?.extend(buffer);
    }
    (parts.len() > 1).then_some(parts)
}

fn loop_cut(g: &Graph) -> Option<Vec<Part>> {
    let starts: Part = g.starts.keys().copied().collect();
    let ends: Part = g.ends.keys().copied().collect();
    let mut body: Part = starts.union(&ends).copied().collect();
    let rest: Vec<u32> = g.acts.difference(&body).copied().collect();
    if rest.is_empty() {
        return None;
    }
    let pos: BTreeMap<u32, usize> = rest.iter().enumerate().map(|(i, &a)| (a, i)).collect();
    let mut uf = UnionFind::new(rest.len());
    for &(a, b) in g.edges.keys() {
        if let (Some(&i), Some(&j)) = (pos.get(&a), pos.get(&b)) {
            uf.union(i, j);
        }
    }
    let mut redo = uf.groups(&rest);
    loop {
        let before = redo.len();
        redo.retain(|c| {
            let ok = g.edges.keys().all(|&(x, y)| match (c.contains(&x), c.contains(&y)) {
                (false, true) => {
                    body.contains(&x) && ends.contains(&x) && ends.iter().all(|&e| g.has_edge(e, y))
                }
                (true, false) => {
                    body.contains(&y) && starts.contains(&y) && starts.iter().all(|&s| g.has_edge(x, s))
                }
                _ => true,
            });
            if !ok {
                body.extend(c.iter().copied());
            }
            ok
        });
        if redo.len() == before {
            break;
        }
    }
    if redo.is_empty() {
        return None;
    }
    let mut parts = vec![body];
    parts.extend(redo);
    Some(parts)
}

fn find_cut(g: &Graph) -> Option<(Operator, Vec<Part>)> {
    if let Some(p) = xor_cut(g) {
        return Some((Operator::Xor, p));
    }
    if let Some(p) = sequence_cut(g) {
        return Some((Operator::Sequence, p));
    }
    if let Some(p) = parallel_cut(g) {
        return Some((Operator::Parallel, p));
    }
    loop_cut(g).map(|p| (Operator::Loop, p))
}

fn flower(acts: &Part, names: &[String]) -> ProcessTree {
    let leaves: Vec<ProcessTree> = acts
        .iter()
        .map(|&a| ProcessTree::activity(names[a as usize].clone()))
        .collect();
    let body = if leaves.len() == 1 {
        leaves.into_iter().next().expect("one leaf")
    } else {
        ProcessTree::xor(leaves)
    };
    ProcessTree::looped(vec![body, ProcessTree::Silent])
}

fn skippable(tree: ProcessTree) -> ProcessTree {
    ProcessTree::xor(vec![ProcessTree::Silent, tree])
}

fn project(variants: &Variants, part: &Part) -> Variants {
    let mut out = Variants::new();
    for (trace, &count) in variants {
        let sub: Vec<u32> = trace.iter().copied().filter(|a| part.contains(a)).collect();
        *out.entry(sub).or_default() += count;
    }
    out
}

struct LogMiner<'a> {
    names: &'a [String],
    noise: Option<f64>,
}

impl LogMiner<'_> {
    fn mine(&self, variants: Variants) -> ProcessTree {
        let total: usize = variants.values().sum();
        let empty = variants.get(&Vec::new()).copied().unwrap_or(0);
        if total == 0 || empty == total {
            return ProcessTree::Silent;
        }
        if empty > 0 {
            let mut rest = variants;
            rest.remove(&Vec::new());
            let drop = self.noise.is_some_and(|noise| (empty as f64) / (total as f64) < noise);
            let tree = self.mine(rest);
            return if drop { tree } else { skippable(tree) };
        }

        let (variants, graph) = match self.noise {
            None => {
                let g = Graph::from_variants(&variants);
                (variants, g)
            }
            Some(noise) => {
                let projected = filter_and_project(&variants, noise);
                let g = Graph::from_variants(&projected).filtered(noise);
                (projected, g)
            }
        };

        if graph.acts.len() == 1 {
            let a = *graph.acts.iter().next().expect("one activity");
            let leaf = ProcessTree::activity(self.names[a as usize].clone());
            return if variants.keys().all(|t| t.len() == 1) {
                leaf
            } else {
                ProcessTree::looped(vec![leaf, ProcessTree::Silent])
            };
        }

        let Some((op, parts)) = find_cut(&graph) else {
            return flower(&graph.acts, self.names);
        };
        match op {
            Operator::Xor => {
                let mut subs: Vec<Variants> = vec![Variants::new(); parts.len()];
                for (trace, &count) in &variants {
                    let best = (0..parts.len())
                        .max_by_key(|&i| {
                            let hits = trace.iter().filter(|a| parts[i].contains(a)).count();
                            (hits, std::cmp::Reverse(i))
                        })
                        .expect("at least two parts");
                    let sub: Vec<u32> = trace.iter().copied().filter(|a| parts[best].contains(a)).collect();
                    *subs[best].entry(sub).or_default() += count;
                }
                let mut children: Vec<ProcessTree> = subs
                    .into_iter()
                    .filter(|s| !s.is_empty())
                    .map(|s| self.mine(s))
                    .collect();
                if children.len() == 1 {
                    children.pop().expect("one child")
                } else {
                    ProcessTree::xor(children)
                }
            }
            Operator::Sequence | Operator::Parallel => {
                let children = parts.iter().map(|p| self.mine(project(&variants, p))).collect();
                ProcessTree::node(op, children)
            }
            Operator::Loop => {
                let subs = split_loop(&variants, &parts);
                ProcessTree::looped(subs.into_iter().map(|s| self.mine(s)).collect())
            }
        }
    }
}

/// Splits traces into body and redo segments. A trace that starts or ends in
/// a redo part, or switches directly between two redo parts, gets an empty
/// body segment at that position.
fn split_loop(variants: &Variants, parts: &[Part]) -> Vec<Variants> {
    let part_of = |a: u32| parts.iter().position(|p| p.contains(&a)).expect("activity covered by cut");
    let mut subs: Vec<Variants> = vec![Variants::new(); parts.len()];
    for (trace, &count) in variants {
        let mut runs: Vec<(usize, Vec<u32>)> = Vec::new();
        for &a in trace {
            let p = part_of(a);
            match runs.last_mut() {
                Some((q, run)) if *q == p => run.push(a),
                _ => runs.push((p, vec![a])),
            }
        }
        let mut prev_body = false;
        for (i, (p, run)) in runs.iter().enumerate() {
            if *p != 0 && !prev_body {
                *subs[0].entry(Vec::new()).or_default() += count;
            }
            *subs[*p].entry(run.clone()).or_default() += count;
            prev_body = *p == 0;
            if i + 1 == runs.len() && *p != 0 {
                *subs[0].entry(Vec::new()).or_default() += count;
            }
        }
    }
    subs
}

/// Keeps the activities that stay connected start-to-end once infrequent
/// edges are removed, and projects the traces onto them. Traces left empty
/// are dropped.
fn filter_and_project(variants: &Variants, noise: f64) -> Variants {
    let graph = Graph::from_variants(variants);
    let kept = graph.filtered(noise).connected_activities();
    if kept.is_empty() || kept.len() == graph.acts.len() {
        return variants.clone();
    }
    let mut out = project(variants, &kept);
    out.remove(&Vec::new());
    if out.is_empty() {
        variants.clone()
    } else {
        out
    }
}

struct DfgMiner<'a> {
    names: &'a [String],
}

impl DfgMiner<'_> {
    fn mine(&self, g: &Graph) -> ProcessTree {
        if g.acts.is_empty() {
            return ProcessTree::Silent;
        }
        let tree = self.mine_activities(g);
        if g.empty > 0 {
            skippable(tree)
        } else {
            tree
        }
    }

    fn mine_activities(&self, g: &Graph) -> ProcessTree {
        if g.acts.len() == 1 {
            let a = *g.acts.iter().next().expect("one activity");
            let leaf = ProcessTree::activity(self.names[a as usize].clone());
            return if g.has_edge(a, a) {
                ProcessTree::looped(vec![leaf, ProcessTree::Silent])
            } else {
                leaf
            };
        }
        let Some((op, parts)) = find_cut(g) else {
            return flower(&g.acts, self.names);
        };
        let children: Vec<ProcessTree> = match op {
            Operator::Xor | Operator::Parallel => parts
                .iter()
                .map(|p| self.mine(&sub_graph(g, p, Boundary::Original)))
                .collect(),
            Operator::Sequence => parts
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let child = self.mine(&sub_graph(g, p, Boundary::Crossing));
                    if sequence_part_skippable(g, &parts, i) {
                        skippable(child)
                    } else {
                        child
                    }
                })
                .collect(),
            Operator::Loop => parts
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let mode = if i == 0 { Boundary::OriginalAndCrossing } else { Boundary::Crossing };
                    self.mine(&sub_graph(g, p, mode))
                })
                .collect(),
        };
        ProcessTree::node(op, children)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Boundary {
    /// Start/end activities restricted to the part.
    Original,
    /// Activities entered from (left towards) outside the part, plus the
    /// original start/end activities inside it.
    Crossing,
    OriginalAndCrossing,
}

fn sub_graph(g: &Graph, part: &Part, mode: Boundary) -> Graph {
    let mut sub = Graph {
        acts: part.clone(),
        ..Default::default()
    };
    for (&(a, b), &c) in &g.edges {
        match (part.contains(&a), part.contains(&b)) {
            (true, true) => {
                sub.edges.insert((a, b), c);
            }
            (false, true) if mode != Boundary::Original => *sub.starts.entry(b).or_default() += c,
            (true, false) if mode != Boundary::Original => *sub.ends.entry(a).or_default() += c,
            _ => {}
        }
    }
    for (&a, &c) in &g.starts {
        if part.contains(&a) {
            *sub.starts.entry(a).or_default() += c;
        }
    }
    for (&a, &c) in &g.ends {
        if part.contains(&a) {
            *sub.ends.entry(a).or_default() += c;
        }
    }
    sub
}

/// Whether behaviour can pass from before part `i` to after it without
/// executing it.
fn sequence_part_skippable(g: &Graph, parts: &[Part], i: usize) -> bool {
    let index = |a: u32| parts.iter().position(|p| p.contains(&a)).expect("covered");
    g.edges.keys().any(|&(a, b)| index(a) < i && index(b) > i)
        || g.starts.keys().any(|&a| index(a) > i)
        || g.ends.keys().any(|&a| index(a) < i)
}

fn encoded_variants(log: &EventLog) -> (Vec<String>, Variants) {
    let (names, traces) = log.encoded();
    let mut variants = Variants::new();
    for t in traces {
        *variants.entry(t).or_default() += 1;
    }
    (names, variants)
}

/// Mines a process tree from the log.
pub fn discover_process_tree(log: &EventLog, variant: InductiveVariant) -> ProcessTree {
    let (names, variants) = encoded_variants(log);
    match variant {
        InductiveVariant::Im => LogMiner { names: &names, noise: None }.mine(variants),
        InductiveVariant::Imf { noise_threshold } => LogMiner {
            names: &names,
            noise: Some(noise_threshold),
        }
        .mine(variants),
        InductiveVariant::Imd => DfgMiner { names: &names }.mine(&Graph::from_variants(&variants)),
    }
}

pub fn inductive_miner(log: &EventLog, variant: InductiveVariant) -> Result<AcceptingPetriNet, NetError> {
    tree_to_petri_net(&discover_process_tree(log, variant))
}

/// The directly-follows graph IMf uses for its first cut: infrequent edges,
/// start and end activities removed, activities that lose their start-to-end
/// connection projected away.
pub fn infrequent_filtered_dfg(log: &EventLog, noise_threshold: f64) -> DirectlyFollowsGraph {
    let (names, variants) = encoded_variants(log);
    let mut nonempty = variants;
    nonempty.remove(&Vec::new());
    let g = Graph::from_variants(&filter_and_project(&nonempty, noise_threshold)).filtered(noise_threshold);
    let name = |a: u32| names[a as usize].clone();
    DirectlyFollowsGraph {
        nodes: g.acts.iter().map(|&a| name(a)).collect(),
        edge_counts: g.edges.iter().map(|(&(a, b), &c)| ((name(a), name(b)), c)).collect(),
        start_counts: g.starts.iter().map(|(&a, &c)| (name(a), c)).collect(),
        end_counts: g.ends.iter().map(|(&a, &c)| (name(a), c)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::petrinet::accepts_sequence;

    fn a(s: &str) -> ProcessTree {
        ProcessTree::activity(s)
    }

    fn mine(seqs: &[Vec<&str>], variant: InductiveVariant) -> ProcessTree {
        discover_process_tree(&EventLog::from_sequences(seqs).unwrap(), variant)
    }

    #[test]
    fn sequence_of_two() {
        let t = mine(&[vec!["a", "b"]], InductiveVariant::Im);
        assert_eq!(t, ProcessTree::seq(vec![a("a"), a("b")]));
    }

    #[test]
    fn sequence_then_parallel() {
        let t = mine(&[vec!["a", "b", "c"], vec!["a", "c", "b"]], InductiveVariant::Im);
        assert_eq!(t, ProcessTree::seq(vec![a("a"), ProcessTree::par(vec![a("b"), a("c")])]));
    }

    #[test]
    fn choice_and_skip() {
        let t = mine(&[vec!["a", "b", "d"], vec!["a", "c", "d"], vec!["a", "d"]], InductiveVariant::Im);
        assert_eq!(
            t,
            ProcessTree::seq(vec![
                a("a"),
                ProcessTree::xor(vec![ProcessTree::Silent, ProcessTree::xor(vec![a("b"), a("c")])]),
                a("d"),
            ])
        );
    }

    #[test]
    fn redo_loop() {
        let seqs = [vec!["a", "b"], vec!["a", "b", "c", "a", "b"]];
        let t = mine(&seqs, InductiveVariant::Im);
        assert_eq!(t, ProcessTree::looped(vec![ProcessTree::seq(vec![a("a"), a("b")]), a("c")]));
        let net = tree_to_petri_net(&t).unwrap();
        assert!(accepts_sequence(&net, &["a", "b", "c", "a", "b", "c", "a", "b"]));
    }

    #[test]
    fn repeated_single_activity() {
        let t = mine(&[vec!["a"], vec!["a", "a"]], InductiveVariant::Im);
        assert_eq!(t, ProcessTree::looped(vec![a("a"), ProcessTree::Silent]));
    }

    #[test]
    fn flower_fall_through() {
        let t = mine(&[vec!["a", "b", "a", "b"], vec!["b", "a"]], InductiveVariant::Im);
        let net = tree_to_petri_net(&t).unwrap();
        assert!(accepts_sequence(&net, &["a", "b", "a", "b"]));
        assert!(accepts_sequence(&net, &["b", "a"]));
    }

    #[test]
    fn imf_filters_rare_detour() {
        let mut seqs = vec![vec!["a", "b"]; 99];
        seqs.push(vec!["a", "z", "b"]);
        let log = EventLog::from_sequences(&seqs).unwrap();
        let dfg = infrequent_filtered_dfg(&log, 0.2);
        assert!(!dfg.nodes.contains("z"));
        assert!(dfg.edge_counts.keys().all(|(x, y)| x != "z" && y != "z"));
        let t = discover_process_tree(&log, InductiveVariant::Imf { noise_threshold: 0.2 });
        assert_eq!(t, ProcessTree::seq(vec![a("a"), a("b")]));
        // Plain IM keeps the detour as an optional step.
        let t = discover_process_tree(&log, InductiveVariant::Im);
        assert!(t.activities().contains("z"));
    }

    #[test]
    fn imd_matches_im_on_simple_logs() {
        let logs: Vec<Vec<Vec<&str>>> = vec![
            vec![vec!["a", "b", "c"], vec!["a", "c", "b"]],
            vec![vec!["a", "b", "d"], vec!["a", "c", "d"], vec!["a", "d"]],
            vec![vec!["a", "b"], vec!["a", "b", "c", "a", "b"]],
        ];
        for seqs in logs {
            assert_eq!(mine(&seqs, InductiveVariant::Im), mine(&seqs, InductiveVariant::Imd));
        }
    }
}
