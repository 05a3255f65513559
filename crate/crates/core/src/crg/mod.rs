//! Conditional return graphs.
//!
//! One layered graph per agent. Layer `t` holds the local states reachable at
//! stage `t`; every local transition leaving a node points to a tree that
//! resolves the other agents' actions and state pairs down to the leaf carrying
//! the owner's share of the reward.

mod analysis;
mod audit;
mod build;
mod partition;

use std::collections::HashMap;

use thiserror::Error;

use crate::model::{Instance, LocalTransition, StateKey, View};

pub use analysis::{active_transitions, ActionSelector, Analysis, KeyPair, RewardIndex};
pub use audit::{size_audit, LayerSize, SizeAudit};
pub use build::{build_all, build_crg};
pub use partition::{partition_rewards, PartitionStrategy, RewardPartition};

#[derive(Debug, Error, PartialEq)]
pub enum CrgError {
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error("agent {0} does not exist")]
    UnknownAgent(usize),
    #[error("no tree for transition {from} -{action}-> {to}", from = .0.from, action = .0.action, to = .0.to)]
    MissingTransition(LocalTransition),
    #[error("tree of transition {from} -{action}-> {to} has no arc for agent {agent}", from = .transition.from, action = .transition.action, to = .transition.to)]
    Unresolvable { transition: LocalTransition, agent: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CrgOptions {
    /// Keep only the locally optimal action at locally independent states.
    pub prune_local_cri: bool,
}

impl Default for CrgOptions {
    fn default() -> Self {
        CrgOptions { prune_local_cri: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ArcLabel {
    Action(usize),
    /// Every non-dependent action.
    AnyAction,
    Pair(StateKey, StateKey),
    /// Every state pair outside the influence set.
    NoInfluence,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchKind {
    Action,
    Influence,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeRef {
    Branch(usize),
    Leaf(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub agent: usize,
    pub kind: BranchKind,
    pub arcs: Vec<(ArcLabel, NodeRef)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Leaf {
    /// Value of each owned function, aligned with [`Crg::functions`].
    pub values: Vec<f64>,
    pub total: f64,
}

/// The joint transitions sharing one local transition of the owner.
#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    pub transition: LocalTransition,
    pub root: NodeRef,
    pub branches: Vec<Branch>,
    pub leaves: Vec<Leaf>,
    /// Built with one arc per action and state pair instead of wildcards.
    pub explicit: bool,
    pub min_total: f64,
    pub max_total: f64,
}

impl Tree {
    pub fn depth(&self) -> usize {
        let mut depth = 0;
        let mut node = self.root;
        while let NodeRef::Branch(b) = node {
            depth += 1;
            node = self.branches[b].arcs[0].1;
        }
        depth
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrgArc {
    pub next: usize,
    pub probability: f64,
    pub tree: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrgAction {
    pub action: usize,
    pub outcomes: Vec<CrgArc>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrgNode {
    pub state: usize,
    pub lower: f64,
    pub upper: f64,
    pub local_cri: bool,
    /// Per watched function: whether a non-default value is still reachable.
    pub live: Vec<bool>,
    pub actions: Vec<CrgAction>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Crg {
    pub owner: usize,
    pub horizon: usize,
    /// Owned reward functions, ascending.
    pub functions: Vec<usize>,
    /// Default value of each owned function.
    pub defaults: Vec<f64>,
    /// Scope of each owned function.
    pub scopes: Vec<Vec<usize>>,
    /// Per agent: how the owner's functions read it, `None` when they do not.
    pub views: Vec<Option<View>>,
    /// Interaction functions with the owner in scope, ascending.
    pub watched: Vec<usize>,
    pub layers: Vec<Vec<CrgNode>>,
    pub trees: Vec<Tree>,
    node_index: Vec<HashMap<usize, usize>>,
    tree_index: HashMap<LocalTransition, usize>,
}

/// Owner's reward on a resolved tree path.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    pub values: Vec<f64>,
    pub total: f64,
}

impl Crg {
    pub fn node(&self, t: usize, state: usize) -> Option<&CrgNode> {
        let idx = *self.node_index.get(t)?.get(&state)?;
        Some(&self.layers[t][idx])
    }

    pub fn tree(&self, tr: &LocalTransition) -> Option<&Tree> {
        self.tree_index.get(tr).map(|&k| &self.trees[k])
    }

    pub fn bounds(&self, t: usize, state: usize) -> Option<(f64, f64)> {
        self.node(t, state).map(|n| (n.lower, n.upper))
    }

    /// Locally independent: no watched function can still take a non-default value.
    pub fn local_cri(&self, t: usize, state: usize) -> bool {
        self.node(t, state).map(|n| n.local_cri).unwrap_or(true)
    }

    /// Whether watched function `function` may still take a non-default value from this node.
    pub fn interaction_reachable(&self, t: usize, state: usize, function: usize) -> bool {
        let Some(w) = self.watched.iter().position(|&f| f == function) else {
            return false;
        };
        self.node(t, state).map(|n| n.live[w]).unwrap_or(false)
    }

    /// Owner's reward for `tr` given the other agents' transitions.
    ///
    /// `context` is indexed by agent. An absent agent takes the first arc and
    /// every function that reads it contributes its default.
    pub fn lookup_transition_reward(
        &self,
        m: &Instance,
        tr: &LocalTransition,
        context: &[Option<LocalTransition>],
    ) -> Result<Resolved, CrgError> {
        let k = *self.tree_index.get(tr).ok_or(CrgError::MissingTransition(*tr))?;
        self.resolve(m, k, context)
    }

    /// Like [`Crg::lookup_transition_reward`] for the tree with index `k`.
    pub fn resolve(&self, m: &Instance, k: usize, context: &[Option<LocalTransition>]) -> Result<Resolved, CrgError> {
        let tree = &self.trees[k];
        let tr = &tree.transition;
        let mut node = tree.root;
        while let NodeRef::Branch(b) = node {
            let branch = &tree.branches[b];
            let j = branch.agent;
            let next = match context.get(j).copied().flatten() {
                None => Some(branch.arcs[0].1),
                Some(trj) => match branch.kind {
                    BranchKind::Action => branch
                        .arcs
                        .iter()
                        .find(|(l, _)| *l == ArcLabel::Action(trj.action))
                        .or_else(|| branch.arcs.iter().find(|(l, _)| *l == ArcLabel::AnyAction))
                        .map(|(_, n)| *n),
                    BranchKind::Influence => {
                        let view = self.views[j].as_ref().unwrap_or(&View::State);
                        let from = m.project(j, view, trj.from);
                        let to = m.project(j, view, trj.to);
                        branch
                            .arcs
                            .iter()
                            .find(|(l, _)| matches!(l, ArcLabel::Pair(x, y) if *x == from && *y == to))
                            .or_else(|| branch.arcs.iter().find(|(l, _)| *l == ArcLabel::NoInfluence))
                            .map(|(_, n)| *n)
                    }
                },
            };
            node = next.ok_or(CrgError::Unresolvable {
                transition: *tr,
                agent: j,
            })?;
        }
        let NodeRef::Leaf(l) = node else { unreachable!() };
        let leaf = &tree.leaves[l];
        let absent = |scope: &Vec<usize>| scope.iter().any(|&a| context.get(a).copied().flatten().is_none() && a != self.owner);
        if self.scopes.iter().any(absent) {
            let values: Vec<f64> = leaf
                .values
                .iter()
                .zip(&self.scopes)
                .zip(&self.defaults)
                .map(|((&v, scope), &d)| if absent(scope) { d } else { v })
                .collect();
            let total = values.iter().sum();
            Ok(Resolved { values, total })
        } else {
            Ok(Resolved {
                values: leaf.values.clone(),
                total: leaf.total,
            })
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }
}
