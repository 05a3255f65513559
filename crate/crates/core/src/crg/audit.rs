use crate::model::Instance;

use super::{ArcLabel, BranchKind, Crg, Tree};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LayerSize {
    pub nodes: usize,
    /// Internal tree nodes hanging off this layer's transitions.
    pub internal: usize,
    /// Every arc: action arcs, tree arcs and reward-labelled leaf arcs.
    pub arcs: usize,
    pub leaf_arcs: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SizeAudit {
    pub layers: Vec<LayerSize>,
    /// Largest number of dependent-action arcs at one branch.
    pub alpha: usize,
    /// Largest owned scope minus one.
    pub rho: usize,
    /// Largest number of other agents resolved in one tree.
    pub tree_depth: usize,
    /// Largest number of state-pair arcs at one branch.
    pub i_max: usize,
    pub measured: u128,
    pub size_bound: u128,
}

impl SizeAudit {
    pub fn within_bound(&self) -> bool {
        self.measured <= self.size_bound
    }
}

fn tree_size(tree: &Tree) -> (usize, usize) {
    let arcs: usize = tree.branches.iter().map(|b| b.arcs.len()).sum();
    (tree.branches.len(), arcs + tree.leaves.len())
}

/// Counts nodes and arcs per layer and evaluates the worst-case size
/// `(h+1)|S| + h |A| |S|^2 c ((alpha+1)(I+1))^rho'`, where `rho'` also covers
/// trees resolving more agents than one scope holds and `c = 2(2 rho' + 1) + 2`.
pub fn size_audit(m: &Instance, g: &Crg) -> SizeAudit {
    let mut layers = Vec::with_capacity(g.layers.len());
    let mut alpha = 0;
    let mut i_max = 0;
    let mut tree_depth = 0;
    for tree in &g.trees {
        tree_depth = tree_depth.max(tree.depth());
        for b in &tree.branches {
            match b.kind {
                BranchKind::Action => {
                    alpha = alpha.max(b.arcs.iter().filter(|(l, _)| matches!(l, ArcLabel::Action(_))).count())
                }
                BranchKind::Influence => {
                    i_max = i_max.max(b.arcs.iter().filter(|(l, _)| matches!(l, ArcLabel::Pair(..))).count())
                }
            }
        }
    }
    for layer in &g.layers {
        let mut size = LayerSize {
            nodes: layer.len(),
            ..LayerSize::default()
        };
        for node in layer {
            for action in &node.actions {
                size.arcs += 1;
                for arc in &action.outcomes {
                    let tree = &g.trees[arc.tree];
                    let (internal, arcs) = tree_size(tree);
                    size.internal += internal;
                    size.arcs += arcs;
                    size.leaf_arcs += tree.leaves.len();
                }
            }
        }
        layers.push(size);
    }
    let rho = g.scopes.iter().map(|s| s.len().saturating_sub(1)).max().unwrap_or(0);
    let measured: u128 = layers
        .iter()
        .map(|l| (l.nodes + l.internal + l.arcs) as u128)
        .sum();

    let mdp = &m.agents[g.owner];
    let s = mdp.num_states() as u128;
    let a = mdp.num_actions() as u128;
    let h = g.horizon as u128;
    let rho_eff = rho.max(tree_depth) as u32;
    let per_tree = ((alpha as u128 + 1).saturating_mul(i_max as u128 + 1)).saturating_pow(rho_eff);
    let c = 2 * (2 * rho_eff as u128 + 1) + 2;
    let size_bound = (h + 1)
        .saturating_mul(s)
        .saturating_add(h.saturating_mul(a).saturating_mul(s * s).saturating_mul(c).saturating_mul(per_tree));
    SizeAudit {
        layers,
        alpha,
        rho,
        tree_depth,
        i_max,
        measured,
        size_bound,
    }
}
