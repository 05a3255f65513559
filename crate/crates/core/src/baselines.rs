//! Exact reference solvers.

use std::collections::HashMap;
use std::time::Instant;

use thiserror::Error;

use crate::model::Instance;
use crate::policy::Policy;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("more than {limit} joint states would be stored")]
    StateBudget { limit: usize },
    #[error("time limit reached")]
    Timeout,
    #[error("policy has no action at stage {t} in joint state {state:?}")]
    PolicyUndefined { t: usize, state: Vec<usize> },
    #[error("policy action {action:?} at stage {t} in joint state {state:?} is not available")]
    PolicyUnavailable {
        t: usize,
        state: Vec<usize>,
        action: Vec<usize>,
    },
    #[error("{0} local policy combinations exceed the limit of {1}")]
    TooManyPolicies(u128, u128),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DpConfig {
    pub max_states: Option<usize>,
    pub deadline: Option<Instant>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DpStats {
    /// Expanded (stage, joint state, joint action) triples, not counting
    /// states with a single joint action.
    pub joint_actions_evaluated: u64,
    pub states: usize,
}

/// Optimal value per stage and reachable joint state.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValueTable {
    pub stages: Vec<HashMap<Vec<usize>, f64>>,
}

impl ValueTable {
    /// Value at stage `t`; the final stage is 0 everywhere.
    pub fn get(&self, t: usize, state: &[usize]) -> Option<f64> {
        if t + 1 == self.stages.len() {
            return Some(0.0);
        }
        self.stages.get(t)?.get(state).copied()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DpResult {
    pub value: f64,
    pub table: ValueTable,
    pub policy: Policy,
    pub stats: DpStats,
}

/// All joint actions available in `state`, lexicographic with agent 0 most significant.
pub fn joint_actions(m: &Instance, state: &[usize]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = vec![Vec::new()];
    for (i, mdp) in m.agents.iter().enumerate() {
        let avail: Vec<usize> = mdp.available_actions(state[i]).collect();
        out = out
            .iter()
            .flat_map(|prefix| {
                avail.iter().map(move |&a| {
                    let mut v = prefix.clone();
                    v.push(a);
                    v
                })
            })
            .collect();
    }
    out
}

struct Dp<'a> {
    m: &'a Instance,
    cfg: &'a DpConfig,
    table: ValueTable,
    policy: Policy,
    stats: DpStats,
}

impl Dp<'_> {
    fn value(&mut self, t: usize, state: &[usize]) -> Result<f64, BaselineError> {
        if t == self.m.horizon {
            return Ok(0.0);
        }
        if let Some(v) = self.table.get(t, state) {
            return Ok(v);
        }
        if let Some(d) = self.cfg.deadline {
            if Instant::now() >= d {
                return Err(BaselineError::Timeout);
            }
        }
        if let Some(limit) = self.cfg.max_states {
            if self.stats.states >= limit {
                return Err(BaselineError::StateBudget { limit });
            }
        }
        self.stats.states += 1;
        let mut best = f64::NEG_INFINITY;
        let mut best_action = Vec::new();
        let actions = joint_actions(self.m, state);
        let choice = actions.len() > 1;
        for a in actions {
            if choice {
                self.stats.joint_actions_evaluated += 1;
            }
            let mut q = 0.0;
            for (next, p) in self.m.enumerate_successors(state, &a) {
                let r = self.m.total_reward(state, &a, &next);
                q += p * (r + self.value(t + 1, &next)?);
            }
            if q > best {
                best = q;
                best_action = a;
            }
        }
        self.table.stages[t].insert(state.to_vec(), best);
        self.policy.insert(t, state.to_vec(), best_action);
        Ok(best)
    }
}

/// Backward induction over the joint states reachable from the initial state.
///
/// The greedy policy keeps the lexicographically first maximizing joint action.
pub fn dp_solve(m: &Instance, cfg: &DpConfig) -> Result<DpResult, BaselineError> {
    let mut dp = Dp {
        m,
        cfg,
        table: ValueTable {
            stages: vec![HashMap::new(); m.horizon + 1],
        },
        policy: Policy::new(),
        stats: DpStats::default(),
    };
    let value = dp.value(0, &m.initial)?;
    // The policy map keeps only what the greedy policy itself reaches.
    let mut policy = Policy::new();
    let mut frontier = vec![m.initial.clone()];
    for t in 0..m.horizon {
        let mut next_frontier = Vec::new();
        for s in frontier {
            let a = dp.policy.action(t, &s).expect("every visited state has an action").to_vec();
            for (next, _) in m.enumerate_successors(&s, &a) {
                next_frontier.push(next);
            }
            policy.insert(t, s, a);
        }
        next_frontier.sort();
        next_frontier.dedup();
        frontier = next_frontier;
    }
    Ok(DpResult {
        value,
        table: dp.table,
        policy,
        stats: dp.stats,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    /// Total probability of the enumerated full-length sequences.
    pub probability_mass: f64,
    pub sequences: u64,
}

/// Expected return of `pi`, summed over every execution sequence it can produce.
pub fn evaluate_policy(m: &Instance, pi: &Policy) -> Result<Evaluation, BaselineError> {
    let mut eval = Evaluation {
        value: 0.0,
        probability_mass: 0.0,
        sequences: 0,
    };
    descend(m, pi, 0, &m.initial, 1.0, 0.0, &mut eval)?;
    Ok(eval)
}

fn descend(
    m: &Instance,
    pi: &Policy,
    t: usize,
    state: &[usize],
    probability: f64,
    ret: f64,
    eval: &mut Evaluation,
) -> Result<(), BaselineError> {
    if t == m.horizon {
        eval.value += probability * ret;
        eval.probability_mass += probability;
        eval.sequences += 1;
        return Ok(());
    }
    let action = pi.action(t, state).ok_or_else(|| BaselineError::PolicyUndefined {
        t,
        state: state.to_vec(),
    })?;
    let available = action.len() == m.num_agents()
        && action.iter().enumerate().all(|(i, &a)| !m.agents[i].outcomes(state[i], a).is_empty());
    if !available {
        return Err(BaselineError::PolicyUnavailable {
            t,
            state: state.to_vec(),
            action: action.to_vec(),
        });
    }
    for (next, p) in m.enumerate_successors(state, action) {
        let r = m.total_reward(state, action, &next);
        descend(m, pi, t + 1, &next, probability * p, ret + r, eval)?;
    }
    Ok(())
}

/// Best value when every agent acts on its own local state only, found by
/// enumerating all combinations of deterministic local policies.
pub fn best_decentralized_value(m: &Instance, limit: u128) -> Result<f64, BaselineError> {
    let h = m.horizon;
    let mut slots: Vec<Vec<(usize, usize, Vec<usize>)>> = Vec::new();
    let mut count: u128 = 1;
    for (i, mdp) in m.agents.iter().enumerate() {
        let layers = mdp.reachable_by_stage(m.initial[i], h);
        let mut agent_slots = Vec::new();
        for (t, layer) in layers.iter().enumerate().take(h) {
            for &s in layer {
                let avail: Vec<usize> = mdp.available_actions(s).collect();
                count = count.saturating_mul(avail.len() as u128);
                agent_slots.push((t, s, avail));
            }
        }
        slots.push(agent_slots);
    }
    if count > limit {
        return Err(BaselineError::TooManyPolicies(count, limit));
    }
    let flat: Vec<(usize, usize, usize, &Vec<usize>)> = slots
        .iter()
        .enumerate()
        .flat_map(|(i, v)| v.iter().map(move |(t, s, a)| (i, *t, *s, a)))
        .collect();
    let mut choice = vec![0usize; flat.len()];
    let mut best = f64::NEG_INFINITY;
    loop {
        let mut local: HashMap<(usize, usize, usize), usize> = HashMap::new();
        for (k, &(i, t, s, avail)) in flat.iter().enumerate() {
            local.insert((i, t, s), avail[choice[k]]);
        }
        best = best.max(evaluate_local(m, &local, 0, &m.initial));
        let mut advanced = false;
        for k in (0..flat.len()).rev() {
            choice[k] += 1;
            if choice[k] < flat[k].3.len() {
                advanced = true;
                break;
            }
            choice[k] = 0;
        }
        if !advanced {
            return Ok(best);
        }
    }
}

fn evaluate_local(m: &Instance, local: &HashMap<(usize, usize, usize), usize>, t: usize, state: &[usize]) -> f64 {
    if t == m.horizon {
        return 0.0;
    }
    let action: Vec<usize> = (0..m.num_agents()).map(|i| local[&(i, t, state[i])]).collect();
    m.enumerate_successors(state, &action)
        .into_iter()
        .map(|(next, p)| p * (m.total_reward(state, &action, &next) + evaluate_local(m, local, t + 1, &next)))
        .sum()
}
