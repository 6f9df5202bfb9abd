//! Process trees and their block-structured translation to workflow nets.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AcceptingPetriNet, NetBuilder, NetError, PlaceId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operator {
    Sequence,
    Xor,
    Parallel,
    /// Redo loop: the first child is the do-part, the rest are redo parts.
    Loop,
}

impl Operator {
    pub const ALL: [Operator; 4] = [
        Operator::Sequence,
        Operator::Xor,
        Operator::Parallel,
        Operator::Loop,
    ];

    fn symbol(self) -> &'static str {
        match self {
            Operator::Sequence => "->",
            Operator::Xor => "X",
            Operator::Parallel => "+",
            Operator::Loop => "*",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessTree {
    Activity(String),
    Silent,
    Node {
        operator: Operator,
        children: Vec<ProcessTree>,
    },
}

impl ProcessTree {
    pub fn activity(label: impl Into<String>) -> Self {
        ProcessTree::Activity(label.into())
    }

    pub fn node(operator: Operator, children: Vec<ProcessTree>) -> Self {
        ProcessTree::Node { operator, children }
    }

    pub fn seq(children: Vec<ProcessTree>) -> Self {
        Self::node(Operator::Sequence, children)
    }

    pub fn xor(children: Vec<ProcessTree>) -> Self {
        Self::node(Operator::Xor, children)
    }

    pub fn par(children: Vec<ProcessTree>) -> Self {
        Self::node(Operator::Parallel, children)
    }

    pub fn looped(children: Vec<ProcessTree>) -> Self {
        Self::node(Operator::Loop, children)
    }

    /// Checks that every operator has at least two children.
    pub fn validate(&self) -> Result<(), NetError> {
        match self {
            ProcessTree::Activity(a) if a.trim().is_empty() => {
                Err(NetError::MalformedTree("empty activity label".into()))
            }
            ProcessTree::Activity(_) | ProcessTree::Silent => Ok(()),
            ProcessTree::Node { operator, children } => {
                if children.len() < 2 {
                    return Err(NetError::MalformedTree(format!(
                        "{operator:?} node with {} child(ren)",
                        children.len()
                    )));
                }
                children.iter().try_for_each(ProcessTree::validate)
            }
        }
    }

    /// Visible labels occurring in the tree.
    pub fn activities(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_activities(&mut out);
        out
    }

    fn collect_activities(&self, out: &mut BTreeSet<String>) {
        match self {
            ProcessTree::Activity(a) => {
                out.insert(a.clone());
            }
            ProcessTree::Silent => {}
            ProcessTree::Node { children, .. } => {
                children.iter().for_each(|c| c.collect_activities(out))
            }
        }
    }

    /// Number of operator levels; a leaf has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            ProcessTree::Node { children, .. } => {
                1 + children.iter().map(ProcessTree::depth).max().unwrap_or(0)
            }
            _ => 0,
        }
    }

    /// Operators in preorder.
    pub fn operators(&self) -> Vec<Operator> {
        let mut out = Vec::new();
        self.collect_operators(&mut out);
        out
    }

    fn collect_operators(&self, out: &mut Vec<Operator>) {
        if let ProcessTree::Node { operator, children } = self {
            out.push(*operator);
            children.iter().for_each(|c| c.collect_operators(out));
        }
    }
}

impl fmt::Display for ProcessTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessTree::Activity(a) => write!(f, "'{a}'"),
            ProcessTree::Silent => write!(f, "tau"),
            ProcessTree::Node { operator, children } => {
                write!(f, "{}(", operator.symbol())?;
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
        }
    }
}

struct Translator {
    builder: NetBuilder,
    silent: usize,
}

impl Translator {
    fn place(&mut self) -> PlaceId {
        let n = self.builder.num_places();
        self.builder.add_place(format!("p{n}"))
    }

    fn tau(&mut self) -> super::TransitionId {
        self.silent += 1;
        self.builder.add_transition(format!("tau_{}", self.silent), None)
    }

    fn build(&mut self, tree: &ProcessTree, entry: PlaceId, exit: PlaceId) {
        match tree {
            ProcessTree::Activity(label) => {
                let t = self.builder.add_transition(label.clone(), Some(label));
                self.builder.arc_pt(entry, t);
                self.builder.arc_tp(t, exit);
            }
            ProcessTree::Silent => {
                let t = self.tau();
                self.builder.arc_pt(entry, t);
                self.builder.arc_tp(t, exit);
            }
            ProcessTree::Node { operator, children } => match operator {
                Operator::Sequence => {
                    let mut from = entry;
                    for (i, child) in children.iter().enumerate() {
                        let to = if i + 1 == children.len() { exit } else { self.place() };
                        self.build(child, from, to);
                        from = to;
                    }
                }
                Operator::Xor => {
                    for child in children {
                        self.build(child, entry, exit);
                    }
                }
                Operator::Parallel => {
                    let split = self.tau();
                    self.builder.arc_pt(entry, split);
                    let mut outs = Vec::with_capacity(children.len());
                    for child in children {
                        let (i, o) = (self.place(), self.place());
                        self.builder.arc_tp(split, i);
                        self.build(child, i, o);
                        outs.push(o);
                    }
                    let join = self.tau();
                    for o in outs {
                        self.builder.arc_pt(o, join);
                    }
                    self.builder.arc_tp(join, exit);
                }
                Operator::Loop => {
                    // Private entry/exit places keep the cycle away from
                    // places shared with an enclosing choice.
                    let enter = self.tau();
                    let (body_in, body_out) = (self.place(), self.place());
                    self.builder.arc_pt(entry, enter);
                    self.builder.arc_tp(enter, body_in);
                    self.build(&children[0], body_in, body_out);
                    for redo in &children[1..] {
                        self.build(redo, body_out, body_in);
                    }
                    let leave = self.tau();
                    self.builder.arc_pt(body_out, leave);
                    self.builder.arc_tp(leave, exit);
                }
            },
        }
    }
}

/// Translates a process tree into a sound workflow net with one source and
/// one sink place. Node ids follow a preorder walk of the tree.
pub fn tree_to_petri_net(tree: &ProcessTree) -> Result<AcceptingPetriNet, NetError> {
    tree.validate()?;
    let mut tr = Translator {
        builder: NetBuilder::new(),
        silent: 0,
    };
    let source = tr.builder.add_place("source");
    let sink = tr.builder.add_place("sink");
    tr.build(tree, source, sink);
    tr.builder.build(&[(source, 1)], &[(sink, 1)])
}
