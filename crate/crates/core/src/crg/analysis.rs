//! Dependent actions and transition influence.
//!
//! Both sets are computed from the listed table entries of the owner's reward
//! functions, which is exact because an unlisted key always yields the default.
//! Realizability is judged over the active transitions of every agent: those
//! with positive probability that leave a state reachable before the horizon.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::model::{Instance, LocalTransition, StateKey, TransitionKey, View};

use super::partition::RewardPartition;

pub type KeyPair = (StateKey, StateKey);

/// Which action of the other agent an influence query is about.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActionSelector {
    Action(usize),
    /// Every action that is not dependent.
    Wildcard,
}

/// Active local transitions per agent, sorted.
pub fn active_transitions(m: &Instance) -> Vec<Vec<LocalTransition>> {
    m.agents
        .iter()
        .zip(&m.initial)
        .map(|(mdp, &init)| {
            let layers = mdp.reachable_by_stage(init, m.horizon);
            let mut live = vec![false; mdp.num_states()];
            for layer in &layers[..m.horizon] {
                for &s in layer {
                    live[s] = true;
                }
            }
            mdp.transitions()
                .into_iter()
                .map(|(tr, _)| tr)
                .filter(|tr| live[tr.from])
                .collect()
        })
        .collect()
}

struct PositionIndex {
    realizable: HashSet<TransitionKey>,
    active_by_key: HashMap<TransitionKey, Vec<LocalTransition>>,
    by_key: HashMap<TransitionKey, Vec<usize>>,
    action_siblings: HashMap<Vec<TransitionKey>, Vec<(usize, f64)>>,
    pair_siblings: HashMap<Vec<TransitionKey>, Vec<(StateKey, StateKey, f64)>>,
}

struct FunctionIndex {
    entries: Vec<(Vec<TransitionKey>, f64)>,
    positions: Vec<PositionIndex>,
}

fn blank_action(key: &[TransitionKey], pos: usize) -> Vec<TransitionKey> {
    let mut k = key.to_vec();
    k[pos].action = usize::MAX;
    k
}

fn blank_pair(key: &[TransitionKey], pos: usize) -> Vec<TransitionKey> {
    let mut k = key.to_vec();
    k[pos].from = StateKey(Vec::new());
    k[pos].to = StateKey(Vec::new());
    k
}

/// Lookup structures over every reward table of an instance.
pub struct RewardIndex<'a> {
    pub m: &'a Instance,
    pub active: Vec<Vec<LocalTransition>>,
    functions: Vec<FunctionIndex>,
}

impl<'a> RewardIndex<'a> {
    pub fn new(m: &'a Instance) -> Self {
        let active = active_transitions(m);
        let functions = m
            .rewards
            .iter()
            .map(|f| {
                let entries: Vec<(Vec<TransitionKey>, f64)> =
                    f.table.iter().map(|(k, &v)| (k.clone(), v)).collect();
                let positions = f
                    .scope
                    .iter()
                    .zip(&f.reads)
                    .enumerate()
                    .map(|(pos, (agent, view))| {
                        let mut realizable = HashSet::new();
                        let mut active_by_key: HashMap<TransitionKey, Vec<LocalTransition>> = HashMap::new();
                        for tr in &active[agent.0] {
                            let key = m.transition_key(agent.0, view, tr);
                            realizable.insert(key.clone());
                            active_by_key.entry(key).or_default().push(*tr);
                        }
                        let mut by_key: HashMap<TransitionKey, Vec<usize>> = HashMap::new();
                        let mut action_siblings: HashMap<_, Vec<_>> = HashMap::new();
                        let mut pair_siblings: HashMap<_, Vec<_>> = HashMap::new();
                        for (e, (key, v)) in entries.iter().enumerate() {
                            if key.len() != f.scope.len() {
                                continue;
                            }
                            by_key.entry(key[pos].clone()).or_default().push(e);
                            action_siblings
                                .entry(blank_action(key, pos))
                                .or_default()
                                .push((key[pos].action, *v));
                            pair_siblings.entry(blank_pair(key, pos)).or_default().push((
                                key[pos].from.clone(),
                                key[pos].to.clone(),
                                *v,
                            ));
                        }
                        PositionIndex {
                            realizable,
                            active_by_key,
                            by_key,
                            action_siblings,
                            pair_siblings,
                        }
                    })
                    .collect();
                FunctionIndex { entries, positions }
            })
            .collect();
        RewardIndex { m, active, functions }
    }

    /// Listed entries of function `f` whose component at `pos` equals `key`.
    pub fn entries_at(&self, f: usize, pos: usize, key: &TransitionKey) -> impl Iterator<Item = (&[TransitionKey], f64)> {
        let fi = &self.functions[f];
        fi.positions[pos]
            .by_key
            .get(key)
            .into_iter()
            .flatten()
            .map(move |&e| (fi.entries[e].0.as_slice(), fi.entries[e].1))
    }

    pub fn is_realizable(&self, f: usize, pos: usize, key: &TransitionKey) -> bool {
        self.functions[f].positions[pos].realizable.contains(key)
    }

    /// Whether every component except those at `skip` is realized by some active transition.
    pub fn others_realizable(&self, f: usize, key: &[TransitionKey], skip: &[usize]) -> bool {
        key.iter()
            .enumerate()
            .all(|(pos, k)| skip.contains(&pos) || self.is_realizable(f, pos, k))
    }

    /// Whether some listed, non-default, realizable entry of `f` contains `tr`
    /// as the component of `agent`.
    pub fn touches(&self, f: usize, agent: usize, tr: &LocalTransition) -> bool {
        let func = &self.m.rewards[f];
        let Some(pos) = func.position(agent) else {
            return false;
        };
        let key = self.m.transition_key(agent, &func.reads[pos], tr);
        self.entries_at(f, pos, &key)
            .any(|(k, v)| v != func.default && self.others_realizable(f, k, &[pos]))
    }
}

/// Dependent actions and influence sets for the functions owned by one agent.
pub struct Analysis<'r, 'a> {
    pub index: &'r RewardIndex<'a>,
    pub owner: usize,
    pub functions: Vec<usize>,
    /// Per other agent: the union of what the owner's functions read of it.
    pub views: Vec<Option<View>>,
    /// Per agent: the number of distinct keys of its states under `views`.
    key_space: Vec<usize>,
    /// Per (agent, function): how many keys under `views` project to each function key.
    key_counts: HashMap<(usize, usize), HashMap<StateKey, usize>>,
}

impl<'r, 'a> Analysis<'r, 'a> {
    pub fn new(index: &'r RewardIndex<'a>, partition: &RewardPartition, owner: usize) -> Self {
        let m = index.m;
        let functions = partition.functions(owner).to_vec();
        let mut views: Vec<Option<View>> = vec![None; m.num_agents()];
        for &f in &functions {
            let func = &m.rewards[f];
            for (agent, view) in func.scope.iter().zip(&func.reads) {
                if agent.0 == owner {
                    continue;
                }
                let slot = &mut views[agent.0];
                *slot = Some(match slot.take() {
                    None => view.clone(),
                    Some(v) => v.join(view),
                });
            }
        }
        let mut key_space = vec![0; m.num_agents()];
        let mut key_counts = HashMap::new();
        for (j, view) in views.iter().enumerate() {
            let Some(view) = view else { continue };
            let mut reps: HashMap<StateKey, usize> = HashMap::new();
            for s in 0..m.agents[j].num_states() {
                reps.entry(m.project(j, view, s)).or_insert(s);
            }
            key_space[j] = reps.len();
            for &f in &functions {
                let func = &m.rewards[f];
                let Some(pos) = func.position(j) else { continue };
                let mut counts: HashMap<StateKey, usize> = HashMap::new();
                for &s in reps.values() {
                    *counts.entry(m.project(j, &func.reads[pos], s)).or_default() += 1;
                }
                key_counts.insert((j, f), counts);
            }
        }
        Analysis {
            index,
            owner,
            functions,
            views,
            key_space,
            key_counts,
        }
    }

    /// Agents other than the owner that appear in some owned function, ascending.
    pub fn other_agents(&self) -> Vec<usize> {
        (0..self.views.len()).filter(|&j| self.views[j].is_some()).collect()
    }

    pub fn pair_key(&self, j: usize, tr: &LocalTransition) -> KeyPair {
        let m = self.index.m;
        let view = self.views[j].as_ref().unwrap_or(&View::State);
        (m.project(j, view, tr.from), m.project(j, view, tr.to))
    }

    /// Non-default listed entries of owned functions over `j` that contain `tr`
    /// and whose components other than `j` are realizable.
    fn candidate_entries(&self, tr: &LocalTransition, j: usize) -> Vec<(usize, usize, &'r [TransitionKey], f64)> {
        let m = self.index.m;
        let index: &'r RewardIndex<'a> = self.index;
        let mut out = Vec::new();
        for &f in &self.functions {
            let func = &m.rewards[f];
            let (Some(pi), Some(pj)) = (func.position(self.owner), func.position(j)) else {
                continue;
            };
            if pi == pj {
                continue;
            }
            let key = m.transition_key(self.owner, &func.reads[pi], tr);
            for (k, v) in index.entries_at(f, pi, &key) {
                if v != func.default && index.others_realizable(f, k, &[pi, pj]) {
                    out.push((f, pj, k, v));
                }
            }
        }
        out
    }

    /// Actions of agent `j` that may change an owned reward when the owner makes transition `tr`.
    pub fn dependent_actions(&self, tr: &LocalTransition, j: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        if j == self.owner {
            return out;
        }
        let num_actions = self.index.m.agents[j].num_actions();
        for (f, pj, key, v) in self.candidate_entries(tr, j) {
            if !self.index.is_realizable(f, pj, &key[pj]) {
                continue;
            }
            let same = self.index.functions[f].positions[pj]
                .action_siblings
                .get(&blank_action(key, pj))
                .map(|sib| sib.iter().filter(|(_, w)| *w == v).count())
                .unwrap_or(0);
            if same < num_actions {
                out.insert(key[pj].action);
            }
        }
        out
    }

    /// State pairs of agent `j`, under the view the owner reads it through,
    /// that may change an owned reward given the owner's transition `tr`.
    pub fn influence_set(&self, tr: &LocalTransition, j: usize, selector: ActionSelector) -> BTreeSet<KeyPair> {
        match selector {
            ActionSelector::Action(a) => self.influence_for_actions(tr, j, &[a]),
            ActionSelector::Wildcard => {
                let dep = self.dependent_actions(tr, j);
                let others: Vec<usize> = (0..self.index.m.agents[j].num_actions())
                    .filter(|a| !dep.contains(a))
                    .collect();
                self.influence_for_actions(tr, j, &others)
            }
        }
    }

    fn influence_for_actions(&self, tr: &LocalTransition, j: usize, actions: &[usize]) -> BTreeSet<KeyPair> {
        let mut out = BTreeSet::new();
        if j == self.owner || self.views[j].is_none() {
            return out;
        }
        let space = self.key_space[j] * self.key_space[j];
        for (f, pj, key, v) in self.candidate_entries(tr, j) {
            if !actions.contains(&key[pj].action) {
                continue;
            }
            let Some(members) = self.index.functions[f].positions[pj].active_by_key.get(&key[pj]) else {
                continue;
            };
            let counts = &self.key_counts[&(j, f)];
            let same: usize = self.index.functions[f].positions[pj]
                .pair_siblings
                .get(&blank_pair(key, pj))
                .map(|sib| {
                    sib.iter()
                        .filter(|(_, _, w)| *w == v)
                        .map(|(x, y, _)| counts.get(x).unwrap_or(&0) * counts.get(y).unwrap_or(&0))
                        .sum()
                })
                .unwrap_or(0);
            if same < space {
                for member in members {
                    out.insert(self.pair_key(j, member));
                }
            }
        }
        out
    }
}
