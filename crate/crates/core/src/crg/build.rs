use std::collections::{BTreeSet, HashMap, HashSet};

use crate::model::{Instance, LocalTransition, TransitionKey};

use super::analysis::{Analysis, KeyPair, RewardIndex};
use super::partition::RewardPartition;
use super::{ArcLabel, Branch, BranchKind, Crg, CrgAction, CrgArc, CrgError, CrgNode, CrgOptions, Leaf, NodeRef, Tree};

/// Builds the graph of every agent.
pub fn build_all(m: &Instance, partition: &RewardPartition, options: CrgOptions) -> Result<Vec<Crg>, CrgError> {
    let index = RewardIndex::new(m);
    (0..m.num_agents())
        .map(|i| build_with_index(&index, partition, i, options))
        .collect()
}

pub fn build_crg(m: &Instance, partition: &RewardPartition, owner: usize, options: CrgOptions) -> Result<Crg, CrgError> {
    let index = RewardIndex::new(m);
    build_with_index(&index, partition, owner, options)
}

fn check_partition(m: &Instance, partition: &RewardPartition) -> Result<(), CrgError> {
    if partition.assignment.len() != m.num_agents() {
        return Err(CrgError::Partition(format!(
            "{} agents in partition, {} in instance",
            partition.assignment.len(),
            m.num_agents()
        )));
    }
    let mut seen = vec![0usize; m.rewards.len()];
    for (agent, fs) in partition.assignment.iter().enumerate() {
        for &f in fs {
            let func = m
                .rewards
                .get(f)
                .ok_or_else(|| CrgError::Partition(format!("reward function {f} does not exist")))?;
            if !func.involves(agent) {
                return Err(CrgError::Partition(format!(
                    "reward function '{}' assigned to agent {agent} outside its scope",
                    func.name
                )));
            }
            seen[f] += 1;
        }
    }
    if let Some(f) = seen.iter().position(|&c| c != 1) {
        return Err(CrgError::Partition(format!(
            "reward function '{}' assigned {} times",
            m.rewards[f].name, seen[f]
        )));
    }
    Ok(())
}

pub(crate) fn build_with_index(
    index: &RewardIndex,
    partition: &RewardPartition,
    owner: usize,
    options: CrgOptions,
) -> Result<Crg, CrgError> {
    let m = index.m;
    if owner >= m.num_agents() {
        return Err(CrgError::UnknownAgent(owner));
    }
    check_partition(m, partition)?;
    let mdp = &m.agents[owner];
    let h = m.horizon;
    let full = mdp.reachable_by_stage(m.initial[owner], h);

    let watched: Vec<usize> = (0..m.rewards.len())
        .filter(|&f| m.rewards[f].is_interaction() && m.rewards[f].involves(owner))
        .collect();
    let locals: Vec<usize> = (0..m.rewards.len())
        .filter(|&f| m.rewards[f].scope.len() == 1 && m.rewards[f].scope[0].0 == owner)
        .collect();

    // Backward pass: which watched functions stay reachable, and the local optimum.
    let mut touch_cache: HashMap<LocalTransition, Vec<bool>> = HashMap::new();
    let mut live: Vec<HashMap<usize, Vec<bool>>> = vec![HashMap::new(); h + 1];
    let mut value: Vec<HashMap<usize, f64>> = vec![HashMap::new(); h + 1];
    let mut best: Vec<HashMap<usize, usize>> = vec![HashMap::new(); h + 1];
    for &s in &full[h] {
        live[h].insert(s, vec![false; watched.len()]);
        value[h].insert(s, 0.0);
    }
    for t in (0..h).rev() {
        for &s in &full[t] {
            let mut flags = vec![false; watched.len()];
            let mut best_value = f64::NEG_INFINITY;
            let mut best_action = usize::MAX;
            for a in mdp.available_actions(s) {
                let mut q = 0.0;
                for o in mdp.outcomes(s, a) {
                    let tr = LocalTransition::new(s, a, o.next);
                    let touched = touch_cache
                        .entry(tr)
                        .or_insert_with(|| watched.iter().map(|&f| index.touches(f, owner, &tr)).collect());
                    let next_flags = &live[t + 1][&o.next];
                    for w in 0..watched.len() {
                        flags[w] |= touched[w] || next_flags[w];
                    }
                    let r: f64 = locals
                        .iter()
                        .map(|&f| {
                            let func = &m.rewards[f];
                            func.lookup(&[m.transition_key(owner, &func.reads[0], &tr)])
                        })
                        .sum();
                    q += o.probability * (r + value[t + 1][&o.next]);
                }
                if q > best_value {
                    best_value = q;
                    best_action = a;
                }
            }
            live[t].insert(s, flags);
            value[t].insert(s, best_value);
            best[t].insert(s, best_action);
        }
    }

    // Forward pass over the kept transitions.
    let analysis = Analysis::new(index, partition, owner);
    let mut layers: Vec<Vec<CrgNode>> = Vec::with_capacity(h + 1);
    let mut node_index: Vec<HashMap<usize, usize>> = Vec::with_capacity(h + 1);
    let mut trees: Vec<Tree> = Vec::new();
    let mut tree_index: HashMap<LocalTransition, usize> = HashMap::new();
    let mut current: BTreeSet<usize> = BTreeSet::from([m.initial[owner]]);
    for t in 0..=h {
        let mut nodes = Vec::with_capacity(current.len());
        let mut idx = HashMap::new();
        let mut next_layer = BTreeSet::new();
        for &s in &current {
            let flags = live[t][&s].clone();
            let local_cri = !flags.iter().any(|&b| b);
            let mut actions = Vec::new();
            if t < h {
                let chosen: Vec<usize> = if local_cri && options.prune_local_cri {
                    vec![best[t][&s]]
                } else {
                    mdp.available_actions(s).collect()
                };
                for a in chosen {
                    let mut outs: Vec<_> = mdp.outcomes(s, a).iter().filter(|o| o.probability > 0.0).collect();
                    outs.sort_by_key(|o| o.next);
                    let mut arcs = Vec::with_capacity(outs.len());
                    for o in outs {
                        let tr = LocalTransition::new(s, a, o.next);
                        let tree = *tree_index.entry(tr).or_insert_with(|| {
                            trees.push(build_tree(&analysis, &tr));
                            trees.len() - 1
                        });
                        next_layer.insert(o.next);
                        arcs.push(CrgArc {
                            next: o.next,
                            probability: o.probability,
                            tree,
                        });
                    }
                    actions.push(CrgAction { action: a, outcomes: arcs });
                }
            }
            idx.insert(s, nodes.len());
            nodes.push(CrgNode {
                state: s,
                lower: 0.0,
                upper: 0.0,
                local_cri,
                live: flags,
                actions,
            });
        }
        layers.push(nodes);
        node_index.push(idx);
        current = next_layer;
    }

    // Bounds, one backward pass.
    for t in (0..h).rev() {
        let (head, tail) = layers.split_at_mut(t + 1);
        let next = &tail[0];
        for node in head[t].iter_mut() {
            // Upper: best action against the most favourable interactions.
            // Lower: best action against the least favourable ones, which any
            // agent can secure on its own.
            let mut lower = f64::NEG_INFINITY;
            let mut upper = f64::NEG_INFINITY;
            for action in &node.actions {
                let (mut lo, mut hi) = (0.0, 0.0);
                for arc in &action.outcomes {
                    let succ = &next[node_index[t + 1][&arc.next]];
                    let tree = &trees[arc.tree];
                    lo += arc.probability * (tree.min_total + succ.lower);
                    hi += arc.probability * (tree.max_total + succ.upper);
                }
                lower = lower.max(lo);
                upper = upper.max(hi);
            }
            node.lower = lower;
            node.upper = upper;
        }
    }

    let functions = analysis.functions.clone();
    Ok(Crg {
        owner,
        horizon: h,
        defaults: functions.iter().map(|&f| m.rewards[f].default).collect(),
        scopes: functions
            .iter()
            .map(|&f| m.rewards[f].scope.iter().map(|a| a.0).collect())
            .collect(),
        functions,
        views: analysis.views.clone(),
        watched,
        layers,
        trees,
        node_index,
        tree_index,
    })
}

/// Classes of one tree agent: action arcs, and per action arc its pair arcs.
struct AgentClasses {
    agent: usize,
    actions: Vec<(ArcLabel, Vec<(ArcLabel, Vec<LocalTransition>)>)>,
}

fn pair_classes(
    analysis: &Analysis,
    j: usize,
    members: Vec<LocalTransition>,
    influence: Option<&BTreeSet<KeyPair>>,
) -> Vec<(ArcLabel, Vec<LocalTransition>)> {
    let mut by_pair: Vec<(KeyPair, Vec<LocalTransition>)> = Vec::new();
    let mut rest = Vec::new();
    for tr in members {
        let pair = analysis.pair_key(j, &tr);
        let listed = influence.map(|inf| inf.contains(&pair)).unwrap_or(true);
        if listed {
            match by_pair.iter_mut().find(|(p, _)| *p == pair) {
                Some((_, v)) => v.push(tr),
                None => by_pair.push((pair, vec![tr])),
            }
        } else {
            rest.push(tr);
        }
    }
    by_pair.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out: Vec<_> = by_pair
        .into_iter()
        .map(|((x, y), v)| (ArcLabel::Pair(x, y), v))
        .collect();
    if !rest.is_empty() {
        out.push((ArcLabel::NoInfluence, rest));
    }
    out
}

fn classes(analysis: &Analysis, tr: &LocalTransition, explicit: bool) -> Vec<AgentClasses> {
    let active = &analysis.index.active;
    let mut out = Vec::new();
    for j in analysis.other_agents() {
        if explicit {
            let actions: BTreeSet<usize> = active[j].iter().map(|t| t.action).collect();
            let classes = actions
                .into_iter()
                .map(|a| {
                    let members = active[j].iter().filter(|t| t.action == a).copied().collect();
                    (ArcLabel::Action(a), pair_classes(analysis, j, members, None))
                })
                .collect();
            out.push(AgentClasses { agent: j, actions: classes });
            continue;
        }
        let dep = analysis.dependent_actions(tr, j);
        let mut star_influence = BTreeSet::new();
        let mut per_action = Vec::new();
        for &a in &dep {
            per_action.push((a, analysis.influence_set(tr, j, super::ActionSelector::Action(a))));
        }
        for a in 0..analysis.index.m.agents[j].num_actions() {
            if !dep.contains(&a) {
                star_influence.extend(analysis.influence_set(tr, j, super::ActionSelector::Action(a)));
            }
        }
        if dep.is_empty() && star_influence.is_empty() {
            continue;
        }
        let mut classes = Vec::new();
        for (a, inf) in &per_action {
            let members = active[j].iter().filter(|t| t.action == *a).copied().collect();
            classes.push((ArcLabel::Action(*a), pair_classes(analysis, j, members, Some(inf))));
        }
        let star: Vec<LocalTransition> = active[j].iter().filter(|t| !dep.contains(&t.action)).copied().collect();
        if !star.is_empty() {
            classes.push((ArcLabel::AnyAction, pair_classes(analysis, j, star, Some(&star_influence))));
        }
        out.push(AgentClasses { agent: j, actions: classes });
    }
    out
}

/// Values one owned function can take over the given member transitions;
/// `None` marks an agent outside the tree, which ranges over all its active transitions.
fn value_set(analysis: &Analysis, f: usize, tr: &LocalTransition, members: &[Option<&[LocalTransition]>]) -> Vec<f64> {
    let m = analysis.index.m;
    let func = &m.rewards[f];
    let owner = analysis.owner;
    let pi = func.position(owner).expect("owned function involves owner");
    let key_i = m.transition_key(owner, &func.reads[pi], tr);
    let keysets: Vec<Option<HashSet<TransitionKey>>> = func
        .scope
        .iter()
        .zip(&func.reads)
        .map(|(agent, view)| {
            if agent.0 == owner {
                return None;
            }
            let trs = members[agent.0].unwrap_or(&analysis.index.active[agent.0]);
            Some(trs.iter().map(|t| m.transition_key(agent.0, view, t)).collect())
        })
        .collect();
    let combos = keysets
        .iter()
        .flatten()
        .fold(1u128, |acc, s| acc.saturating_mul(s.len() as u128));
    let mut values: Vec<f64> = Vec::new();
    let mut matched: u128 = 0;
    for (key, v) in analysis.index.entries_at(f, pi, &key_i) {
        let inside = key
            .iter()
            .zip(&keysets)
            .all(|(k, set)| set.as_ref().map(|s| s.contains(k)).unwrap_or(true));
        if inside {
            matched += 1;
            if !values.contains(&v) {
                values.push(v);
            }
        }
    }
    if matched < combos && !values.contains(&func.default) {
        values.push(func.default);
    }
    if values.is_empty() {
        values.push(func.default);
    }
    values
}

struct TreeBuilder<'x, 'r, 'a> {
    analysis: &'x Analysis<'r, 'a>,
    tr: LocalTransition,
    agents: Vec<AgentClasses>,
    branches: Vec<Branch>,
    leaves: Vec<Leaf>,
    ambiguous: bool,
}

impl TreeBuilder<'_, '_, '_> {
    fn action_level(&mut self, k: usize, chosen: &mut Vec<usize>) -> NodeRef {
        if k == self.agents.len() {
            return self.influence_level(0, chosen, &mut Vec::new());
        }
        let id = self.branches.len();
        self.branches.push(Branch {
            agent: self.agents[k].agent,
            kind: BranchKind::Action,
            arcs: Vec::new(),
        });
        for c in 0..self.agents[k].actions.len() {
            chosen.push(c);
            let child = self.action_level(k + 1, chosen);
            chosen.pop();
            let label = self.agents[k].actions[c].0.clone();
            self.branches[id].arcs.push((label, child));
        }
        NodeRef::Branch(id)
    }

    fn influence_level(&mut self, k: usize, actions: &[usize], pairs: &mut Vec<usize>) -> NodeRef {
        if k == self.agents.len() {
            return self.leaf(actions, pairs);
        }
        let id = self.branches.len();
        self.branches.push(Branch {
            agent: self.agents[k].agent,
            kind: BranchKind::Influence,
            arcs: Vec::new(),
        });
        for p in 0..self.agents[k].actions[actions[k]].1.len() {
            pairs.push(p);
            let child = self.influence_level(k + 1, actions, pairs);
            pairs.pop();
            let label = self.agents[k].actions[actions[k]].1[p].0.clone();
            self.branches[id].arcs.push((label, child));
        }
        NodeRef::Branch(id)
    }

    fn leaf(&mut self, actions: &[usize], pairs: &[usize]) -> NodeRef {
        let m = self.analysis.index.m;
        let mut members: Vec<Option<&[LocalTransition]>> = vec![None; m.num_agents()];
        for (k, ac) in self.agents.iter().enumerate() {
            members[ac.agent] = Some(ac.actions[actions[k]].1[pairs[k]].1.as_slice());
        }
        let mut values = Vec::with_capacity(self.analysis.functions.len());
        for &f in &self.analysis.functions {
            let vs = value_set(self.analysis, f, &self.tr, &members);
            if vs.len() > 1 {
                self.ambiguous = true;
            }
            values.push(vs[0]);
        }
        let total = values.iter().sum();
        self.leaves.push(Leaf { values, total });
        NodeRef::Leaf(self.leaves.len() - 1)
    }
}

fn build_tree(analysis: &Analysis, tr: &LocalTransition) -> Tree {
    for explicit in [false, true] {
        let mut builder = TreeBuilder {
            analysis,
            tr: *tr,
            agents: classes(analysis, tr, explicit),
            branches: Vec::new(),
            leaves: Vec::new(),
            ambiguous: false,
        };
        let root = builder.action_level(0, &mut Vec::new());
        if builder.ambiguous && !explicit {
            continue;
        }
        let min_total = builder.leaves.iter().map(|l| l.total).fold(f64::INFINITY, f64::min);
        let max_total = builder.leaves.iter().map(|l| l.total).fold(f64::NEG_INFINITY, f64::max);
        return Tree {
            transition: *tr,
            root,
            branches: builder.branches,
            leaves: builder.leaves,
            explicit,
            min_total,
            max_total,
        };
    }
    unreachable!("explicit trees resolve every owned function")
}
