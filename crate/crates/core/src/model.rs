//! Transition-independent multi-agent MDPs.
//!
//! An [`Instance`] holds one local MDP per agent, a set of scoped reward
//! functions and a finite horizon. Joint states and joint actions are plain
//! slices indexed by agent, so projecting onto one agent is a single index.
//! The joint transition probability is the product of the local ones and the
//! team reward is the sum of every reward function restricted to its scope.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Probability mass tolerance used by validation.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AgentId(pub usize);

impl AgentId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalState {
    pub id: usize,
    pub label: String,
    /// Feature values aligned with [`LocalMdp::feature_names`].
    pub features: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalAction {
    pub id: usize,
    pub label: String,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub next: usize,
    pub probability: f64,
}

/// One agent's step `(from, action, to)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalTransition {
    pub from: usize,
    pub action: usize,
    pub to: usize,
}

impl LocalTransition {
    pub fn new(from: usize, action: usize, to: usize) -> Self {
        LocalTransition { from, action, to }
    }
}

/// The local MDP of a single agent.
///
/// An action is available in a state iff it has at least one outcome there.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalMdp {
    pub name: String,
    pub feature_names: Vec<String>,
    pub states: Vec<LocalState>,
    pub actions: Vec<LocalAction>,
    outcomes: Vec<Vec<Vec<Outcome>>>,
}

impl LocalMdp {
    pub fn new(
        name: impl Into<String>,
        feature_names: Vec<String>,
        states: Vec<LocalState>,
        actions: Vec<LocalAction>,
    ) -> Self {
        let outcomes = vec![vec![Vec::new(); actions.len()]; states.len()];
        LocalMdp {
            name: name.into(),
            feature_names,
            states,
            actions,
            outcomes,
        }
    }

    pub fn set_outcomes(&mut self, state: usize, action: usize, outcomes: Vec<Outcome>) {
        self.outcomes[state][action] = outcomes;
    }

    pub fn outcomes(&self, state: usize, action: usize) -> &[Outcome] {
        self.outcomes
            .get(state)
            .and_then(|row| row.get(action))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    /// Available actions in ascending id order.
    pub fn available_actions(&self, state: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.actions.len()).filter(move |&a| !self.outcomes(state, a).is_empty())
    }

    pub fn probability(&self, from: usize, action: usize, to: usize) -> f64 {
        self.outcomes(from, action)
            .iter()
            .filter(|o| o.next == to)
            .map(|o| o.probability)
            .sum()
    }

    pub fn is_realizable(&self, tr: &LocalTransition) -> bool {
        self.probability(tr.from, tr.action, tr.to) > 0.0
    }

    /// Every transition with positive probability, ordered by (from, action, to).
    pub fn transitions(&self) -> Vec<(LocalTransition, f64)> {
        let mut out = Vec::new();
        for (s, row) in self.outcomes.iter().enumerate() {
            for (a, outs) in row.iter().enumerate() {
                let mut sorted: Vec<_> = outs.iter().filter(|o| o.probability > 0.0).collect();
                sorted.sort_by_key(|o| o.next);
                for o in sorted {
                    out.push((LocalTransition::new(s, a, o.next), o.probability));
                }
            }
        }
        out
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }

    /// States reachable from `initial` at each stage `0..=horizon`.
    pub fn reachable_by_stage(&self, initial: usize, horizon: usize) -> Vec<Vec<usize>> {
        let mut layers = Vec::with_capacity(horizon + 1);
        let mut current = vec![initial];
        for _ in 0..horizon {
            let mut next = vec![false; self.states.len()];
            for &s in &current {
                for a in self.available_actions(s) {
                    for o in self.outcomes(s, a) {
                        if o.probability > 0.0 && o.next < next.len() {
                            next[o.next] = true;
                        }
                    }
                }
            }
            let following = next
                .iter()
                .enumerate()
                .filter_map(|(s, &r)| r.then_some(s))
                .collect();
            layers.push(std::mem::replace(&mut current, following));
        }
        layers.push(current);
        layers
    }
}

/// Which part of an agent's local state a reward function reads.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum View {
    /// The full local state, keyed by state id.
    State,
    /// Only the listed feature indices, in that order.
    Features(Vec<usize>),
}

impl View {
    /// Smallest view that is at least as fine as both.
    pub fn join(&self, other: &View) -> View {
        match (self, other) {
            (View::Features(a), View::Features(b)) => {
                let mut f: Vec<usize> = a.iter().chain(b).copied().collect();
                f.sort_unstable();
                f.dedup();
                View::Features(f)
            }
            _ => View::State,
        }
    }
}

/// A local state as seen through a [`View`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateKey(pub Vec<i64>);

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TransitionKey {
    pub from: StateKey,
    pub action: usize,
    pub to: StateKey,
}

/// A reward function over the local transitions of the agents in `scope`.
///
/// Entries are sparse; unlisted transitions earn `default`. Each scope agent
/// is keyed through its [`View`], so a table written over features is
/// invariant to the unread parts of the state by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardFunction {
    pub name: String,
    pub scope: Vec<AgentId>,
    pub reads: Vec<View>,
    pub default: f64,
    pub table: BTreeMap<Vec<TransitionKey>, f64>,
}

impl RewardFunction {
    pub fn new(name: impl Into<String>, scope: Vec<AgentId>, reads: Vec<View>, default: f64) -> Self {
        RewardFunction {
            name: name.into(),
            scope,
            reads,
            default,
            table: BTreeMap::new(),
        }
    }

    pub fn is_interaction(&self) -> bool {
        self.scope.len() > 1
    }

    pub fn involves(&self, agent: usize) -> bool {
        self.scope.iter().any(|a| a.0 == agent)
    }

    pub fn position(&self, agent: usize) -> Option<usize> {
        self.scope.iter().position(|a| a.0 == agent)
    }

    pub fn insert(&mut self, key: Vec<TransitionKey>, value: f64) {
        self.table.insert(key, value);
    }

    pub fn lookup(&self, key: &[TransitionKey]) -> f64 {
        self.table.get(key).copied().unwrap_or(self.default)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metadata {
    pub generator: String,
    pub rng: Option<String>,
    pub seed: Option<u64>,
    pub params: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub metadata: Metadata,
    pub agents: Vec<LocalMdp>,
    pub rewards: Vec<RewardFunction>,
    pub horizon: usize,
    pub initial: Vec<usize>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("{what} has {found} entries, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid execution sequence: {0}")]
    InvalidSequence(String),
}

/// An execution sequence `[s_0, a_0, s_1, ..., s_t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExecutionSequence {
    pub states: Vec<Vec<usize>>,
    pub actions: Vec<Vec<usize>>,
}

impl ExecutionSequence {
    pub fn start(initial: Vec<usize>) -> Self {
        ExecutionSequence {
            states: vec![initial],
            actions: Vec::new(),
        }
    }

    pub fn push(&mut self, action: Vec<usize>, next: Vec<usize>) {
        self.actions.push(action);
        self.states.push(next);
    }

    /// Current stage `t`.
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn last_state(&self) -> &[usize] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceReturn {
    pub total: f64,
    /// Return per reward function, indexed like [`Instance::rewards`].
    pub per_component: Vec<f64>,
}

impl Instance {
    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn agent(&self, id: AgentId) -> &LocalMdp {
        &self.agents[id.0]
    }

    pub fn project(&self, agent: usize, view: &View, state: usize) -> StateKey {
        match view {
            View::State => StateKey(vec![state as i64]),
            View::Features(fs) => {
                let features = &self.agents[agent].states[state].features;
                StateKey(fs.iter().map(|&f| features[f]).collect())
            }
        }
    }

    pub fn transition_key(&self, agent: usize, view: &View, tr: &LocalTransition) -> TransitionKey {
        TransitionKey {
            from: self.project(agent, view, tr.from),
            action: tr.action,
            to: self.project(agent, view, tr.to),
        }
    }

    /// Key of function `f` for the given per-scope-agent transitions.
    pub fn reward_key(&self, f: &RewardFunction, components: &[LocalTransition]) -> Vec<TransitionKey> {
        f.scope
            .iter()
            .zip(&f.reads)
            .zip(components)
            .map(|((agent, view), tr)| self.transition_key(agent.0, view, tr))
            .collect()
    }

    /// Value of reward function `f` on a joint transition.
    pub fn reward_value(&self, f: &RewardFunction, s: &[usize], a: &[usize], next: &[usize]) -> f64 {
        let components: Vec<LocalTransition> = f
            .scope
            .iter()
            .map(|ag| LocalTransition::new(s[ag.0], a[ag.0], next[ag.0]))
            .collect();
        f.lookup(&self.reward_key(f, &components))
    }

    fn check_dims(&self, what: &'static str, v: &[usize]) -> Result<(), ModelError> {
        if v.len() != self.agents.len() {
            return Err(ModelError::DimensionMismatch {
                what,
                expected: self.agents.len(),
                found: v.len(),
            });
        }
        Ok(())
    }

    /// Product of the local transition probabilities; 0 when any is absent.
    pub fn joint_transition_probability(
        &self,
        s: &[usize],
        a: &[usize],
        next: &[usize],
    ) -> Result<f64, ModelError> {
        self.check_dims("joint state", s)?;
        self.check_dims("joint action", a)?;
        self.check_dims("next joint state", next)?;
        Ok(self
            .agents
            .iter()
            .enumerate()
            .map(|(i, mdp)| mdp.probability(s[i], a[i], next[i]))
            .product())
    }

    /// Team reward: the sum of every reward function on its scope.
    pub fn total_reward(&self, s: &[usize], a: &[usize], next: &[usize]) -> f64 {
        self.rewards
            .iter()
            .map(|f| self.reward_value(f, s, a, next))
            .sum()
    }

    /// All joint successors with positive probability, ordered
    /// lexicographically with agent 0 most significant.
    pub fn enumerate_successors(&self, s: &[usize], a: &[usize]) -> Vec<(Vec<usize>, f64)> {
        let locals: Vec<Vec<Outcome>> = self
            .agents
            .iter()
            .enumerate()
            .map(|(i, mdp)| {
                let mut outs: Vec<Outcome> = mdp
                    .outcomes(s[i], a[i])
                    .iter()
                    .filter(|o| o.probability > 0.0)
                    .copied()
                    .collect();
                outs.sort_by_key(|o| o.next);
                outs
            })
            .collect();
        cartesian_outcomes(&locals)
    }

    /// Return of an execution sequence, in total and per reward function.
    ///
    /// Both are accumulated step by step in the same order, so with rewards on
    /// a common dyadic grid the components add up to the total exactly.
    pub fn sequence_return(&self, phi: &ExecutionSequence) -> Result<SequenceReturn, ModelError> {
        self.check_sequence(phi)?;
        let mut total = 0.0;
        let mut per_component = vec![0.0; self.rewards.len()];
        for x in 0..phi.len() {
            let (s, a, next) = (&phi.states[x], &phi.actions[x], &phi.states[x + 1]);
            total += self.total_reward(s, a, next);
            for (acc, f) in per_component.iter_mut().zip(&self.rewards) {
                *acc += self.reward_value(f, s, a, next);
            }
        }
        Ok(SequenceReturn {
            total,
            per_component,
        })
    }

    pub fn check_sequence(&self, phi: &ExecutionSequence) -> Result<(), ModelError> {
        if phi.states.len() != phi.actions.len() + 1 {
            return Err(ModelError::InvalidSequence(format!(
                "{} states for {} actions",
                phi.states.len(),
                phi.actions.len()
            )));
        }
        if phi.len() > self.horizon {
            return Err(ModelError::InvalidSequence(format!(
                "length {} exceeds horizon {}",
                phi.len(),
                self.horizon
            )));
        }
        for s in &phi.states {
            self.check_dims("joint state", s)?;
        }
        for x in 0..phi.len() {
            let p = self.joint_transition_probability(&phi.states[x], &phi.actions[x], &phi.states[x + 1])?;
            if p <= 0.0 {
                return Err(ModelError::InvalidSequence(format!("step {x} has probability 0")));
            }
        }
        Ok(())
    }

    /// Checks every structural invariant; an empty list means the instance is valid.
    pub fn validate(&self) -> Vec<Violation> {
        crate::validate::validate_instance(self)
    }
}

/// Cartesian product of per-agent outcome lists.
pub(crate) fn cartesian_outcomes(locals: &[Vec<Outcome>]) -> Vec<(Vec<usize>, f64)> {
    let mut out = vec![(Vec::with_capacity(locals.len()), 1.0)];
    for outs in locals {
        let mut next = Vec::with_capacity(out.len() * outs.len());
        for (prefix, p) in &out {
            for o in outs {
                let mut s = prefix.clone();
                s.push(o.next);
                next.push((s, p * o.probability));
            }
        }
        out = next;
    }
    out
}

/// A broken invariant, naming what it concerns.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub subject: Subject,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Subject {
    Instance,
    Agent(usize),
    State { agent: usize, state: usize },
    Transition { agent: usize, state: usize, action: usize },
    Reward { index: usize, name: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.subject {
            Subject::Instance => write!(f, "instance: {}", self.message),
            Subject::Agent(i) => write!(f, "agent {i}: {}", self.message),
            Subject::State { agent, state } => write!(f, "agent {agent}, state {state}: {}", self.message),
            Subject::Transition { agent, state, action } => {
                write!(f, "agent {agent}, (state {state}, action {action}): {}", self.message)
            }
            Subject::Reward { index, name } => write!(f, "reward {index} ({name}): {}", self.message),
        }
    }
}
