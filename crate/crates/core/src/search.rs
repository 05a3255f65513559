//! Branch-and-bound policy search over execution sequences.
//!
//! At every search node the agents are split into groups that can no longer
//! affect each other's rewards. Each group picks its joint action separately,
//! skipping actions whose upper bound falls below the best lower bound seen.

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::crg::{Crg, CrgError};
use crate::model::{Instance, LocalTransition};
use crate::policy::Policy;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndependenceTest {
    /// Reachability flags stored in the graphs.
    Graph,
    /// Enumerates every future joint transition of a function's scope.
    Exhaustive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    /// Off gives the plain graph-based policy search.
    pub pruning: bool,
    pub memoization: bool,
    pub tolerance: f64,
    pub time_budget: Option<Duration>,
    pub independence: IndependenceTest,
    /// Keep every candidate's bounds for export.
    pub trace: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            pruning: true,
            memoization: false,
            tolerance: 1e-9,
            time_budget: None,
            independence: IndependenceTest::Graph,
            trace: false,
        }
    }
}

impl SearchConfig {
    pub fn core() -> Self {
        SearchConfig::default()
    }

    pub fn crg_ps() -> Self {
        SearchConfig {
            pruning: false,
            ..SearchConfig::default()
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SearchStats {
    /// Joint actions valued against at least one alternative; forced moves are free.
    pub joint_actions_evaluated: u64,
    pub nodes_pruned: u64,
    pub decouple_events: u64,
    pub max_component_size: usize,
}

/// Search node: stage, agents of the group, and their local states.
pub type DecisionKey = (usize, Vec<usize>, Vec<usize>);

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub action: Vec<usize>,
    pub lower: f64,
    pub upper: f64,
    /// Absent when the action was pruned.
    pub value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub action: Vec<usize>,
    pub value: f64,
    pub candidates: Vec<Candidate>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub value: Option<f64>,
    pub complete: bool,
    pub stats: SearchStats,
    pub wall_time: Duration,
    pub decisions: BTreeMap<DecisionKey, Decision>,
}

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("{0} graphs given for {1} agents")]
    GraphCount(usize, usize),
    #[error("the search did not complete")]
    Incomplete,
    #[error("no decision recorded at stage {t} for agents {agents:?} in states {state:?}")]
    MissingDecision {
        t: usize,
        agents: Vec<usize>,
        state: Vec<usize>,
    },
    #[error(transparent)]
    Graph(#[from] CrgError),
}

#[derive(Debug)]
enum Abort {
    Timeout,
    Graph(CrgError),
}

impl From<CrgError> for Abort {
    fn from(e: CrgError) -> Self {
        Abort::Graph(e)
    }
}

struct Successor {
    next: Vec<usize>,
    probability: f64,
    reward: f64,
}

struct JointAction {
    action: Vec<usize>,
    lower: f64,
    upper: f64,
    successors: Vec<Successor>,
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut y = x;
    while parent[y] != r {
        let next = parent[y];
        parent[y] = r;
        y = next;
    }
    r
}

pub struct CoreSolver<'a> {
    m: &'a Instance,
    crgs: &'a [Crg],
    cfg: SearchConfig,
    /// Interaction functions, by index into the instance rewards.
    interactions: Vec<usize>,
    deadline: Option<Instant>,
    stats: SearchStats,
    memo: HashMap<DecisionKey, f64>,
    decisions: BTreeMap<DecisionKey, Decision>,
    exhaustive_cache: HashMap<(usize, usize, Vec<usize>), bool>,
}

impl<'a> CoreSolver<'a> {
    pub fn new(m: &'a Instance, crgs: &'a [Crg], cfg: SearchConfig) -> Result<Self, SearchError> {
        if crgs.len() != m.num_agents() {
            return Err(SearchError::GraphCount(crgs.len(), m.num_agents()));
        }
        let interactions = (0..m.rewards.len()).filter(|&f| m.rewards[f].is_interaction()).collect();
        Ok(CoreSolver {
            m,
            crgs,
            cfg,
            interactions,
            deadline: None,
            stats: SearchStats::default(),
            memo: HashMap::new(),
            decisions: BTreeMap::new(),
            exhaustive_cache: HashMap::new(),
        })
    }

    pub fn solve(&mut self) -> Result<SolveReport, SearchError> {
        let start = Instant::now();
        self.deadline = self.cfg.time_budget.map(|d| start + d);
        self.stats = SearchStats::default();
        self.memo.clear();
        self.decisions.clear();
        let agents: Vec<usize> = (0..self.m.num_agents()).collect();
        let initial = self.m.initial.clone();
        let result = self.solve_set(0, &agents, &initial);
        let wall_time = start.elapsed();
        let decisions = std::mem::take(&mut self.decisions);
        match result {
            Ok(v) => Ok(SolveReport {
                value: Some(v),
                complete: true,
                stats: self.stats,
                wall_time,
                decisions,
            }),
            Err(Abort::Timeout) => Ok(SolveReport {
                value: None,
                complete: false,
                stats: self.stats,
                wall_time,
                decisions,
            }),
            Err(Abort::Graph(e)) => Err(e.into()),
        }
    }

    /// Groups of `agents` that still share a live interaction function.
    pub fn components(&mut self, t: usize, agents: &[usize], state: &[usize]) -> Vec<Vec<usize>> {
        let n = self.m.num_agents();
        let mut parent: Vec<usize> = (0..n).collect();
        let mut member = vec![false; n];
        for &a in agents {
            member[a] = true;
        }
        for k in 0..self.interactions.len() {
            let f = self.interactions[k];
            let scope: Vec<usize> = self.m.rewards[f].scope.iter().map(|a| a.0).collect();
            if !scope.iter().all(|&a| member[a]) {
                continue;
            }
            if !self.function_live(t, f, &scope, state) {
                continue;
            }
            let root = find(&mut parent, scope[0]);
            for &a in &scope[1..] {
                let r = find(&mut parent, a);
                parent[r] = root;
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &a in agents {
            let r = find(&mut parent, a);
            groups.entry(r).or_default().push(a);
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().collect();
        out.sort();
        out
    }

    fn function_live(&mut self, t: usize, f: usize, scope: &[usize], state: &[usize]) -> bool {
        match self.cfg.independence {
            IndependenceTest::Graph => scope
                .iter()
                .all(|&a| self.crgs[a].interaction_reachable(t, state[a], f)),
            IndependenceTest::Exhaustive => {
                let sub: Vec<usize> = scope.iter().map(|&a| state[a]).collect();
                self.exhaustive_live(t, f, scope, sub)
            }
        }
    }

    fn exhaustive_live(&mut self, t: usize, f: usize, scope: &[usize], sub: Vec<usize>) -> bool {
        if t >= self.m.horizon {
            return false;
        }
        if let Some(&v) = self.exhaustive_cache.get(&(t, f, sub.clone())) {
            return v;
        }
        let m = self.m;
        let func = &m.rewards[f];
        let mut steps: Vec<(Vec<LocalTransition>, Vec<usize>)> = vec![(Vec::new(), Vec::new())];
        for (k, &a) in scope.iter().enumerate() {
            let mdp = &m.agents[a];
            let mut next = Vec::new();
            for (trs, succ) in &steps {
                for act in mdp.available_actions(sub[k]) {
                    for o in mdp.outcomes(sub[k], act) {
                        let mut trs = trs.clone();
                        trs.push(LocalTransition::new(sub[k], act, o.next));
                        let mut succ = succ.clone();
                        succ.push(o.next);
                        next.push((trs, succ));
                    }
                }
            }
            steps = next;
        }
        let mut live = false;
        for (trs, succ) in steps {
            if func.lookup(&m.reward_key(func, &trs)) != func.default || self.exhaustive_live(t + 1, f, scope, succ) {
                live = true;
                break;
            }
        }
        self.exhaustive_cache.insert((t, f, sub), live);
        live
    }

    fn check_deadline(&self) -> Result<(), Abort> {
        match self.deadline {
            Some(d) if Instant::now() >= d => Err(Abort::Timeout),
            _ => Ok(()),
        }
    }

    fn solve_set(&mut self, t: usize, agents: &[usize], state: &[usize]) -> Result<f64, Abort> {
        self.check_deadline()?;
        if t == self.m.horizon {
            return Ok(0.0);
        }
        let groups = self.components(t, agents, state);
        if groups.len() >= 2 {
            self.stats.decouple_events += 1;
        }
        let mut value = 0.0;
        for group in &groups {
            value += self.solve_group(t, group, state)?;
        }
        Ok(value)
    }

    fn joint_actions(&self, t: usize, group: &[usize], state: &[usize]) -> Result<Vec<JointAction>, Abort> {
        let m = self.m;
        let n = m.num_agents();
        let nodes: Vec<_> = group
            .iter()
            .map(|&a| self.crgs[a].node(t, state[a]).expect("search stays inside the graphs"))
            .collect();
        let mut out = Vec::new();
        let mut choice = vec![0usize; group.len()];
        loop {
            let action: Vec<usize> = choice.iter().zip(&nodes).map(|(&c, n)| n.actions[c].action).collect();
            let mut successors = Vec::new();
            let mut lower = 0.0;
            let mut upper = 0.0;
            let mut pick = vec![0usize; group.len()];
            'outcomes: loop {
                let mut probability = 1.0;
                let mut context: Vec<Option<LocalTransition>> = vec![None; n];
                let mut next = state.to_vec();
                for (k, &a) in group.iter().enumerate() {
                    let arc = &nodes[k].actions[choice[k]].outcomes[pick[k]];
                    probability *= arc.probability;
                    context[a] = Some(LocalTransition::new(state[a], action[k], arc.next));
                    next[a] = arc.next;
                }
                let mut reward = 0.0;
                let mut lo = 0.0;
                let mut hi = 0.0;
                for (k, &a) in group.iter().enumerate() {
                    let crg = &self.crgs[a];
                    let arc = &nodes[k].actions[choice[k]].outcomes[pick[k]];
                    reward += crg.resolve(m, arc.tree, &context)?.total;
                    let (l, u) = crg.bounds(t + 1, arc.next).expect("successor node exists");
                    lo += l;
                    hi += u;
                }
                lower += probability * (reward + lo);
                upper += probability * (reward + hi);
                successors.push(Successor {
                    next,
                    probability,
                    reward,
                });
                for k in (0..group.len()).rev() {
                    pick[k] += 1;
                    if pick[k] < nodes[k].actions[choice[k]].outcomes.len() {
                        continue 'outcomes;
                    }
                    pick[k] = 0;
                }
                break;
            }
            out.push(JointAction {
                action,
                lower,
                upper,
                successors,
            });
            let mut advanced = false;
            for k in (0..group.len()).rev() {
                choice[k] += 1;
                if choice[k] < nodes[k].actions.len() {
                    advanced = true;
                    break;
                }
                choice[k] = 0;
            }
            if !advanced {
                return Ok(out);
            }
        }
    }

    fn solve_group(&mut self, t: usize, group: &[usize], state: &[usize]) -> Result<f64, Abort> {
        let key: DecisionKey = (t, group.to_vec(), group.iter().map(|&a| state[a]).collect());
        if self.cfg.memoization {
            if let Some(&v) = self.memo.get(&key) {
                return Ok(v);
            }
        }
        self.stats.max_component_size = self.stats.max_component_size.max(group.len());
        let actions = self.joint_actions(t, group, state)?;
        let mut lower_max = actions.iter().map(|a| a.lower).fold(f64::NEG_INFINITY, f64::max);
        let mut order: Vec<usize> = (0..actions.len()).collect();
        order.sort_by(|&x, &y| actions[y].upper.total_cmp(&actions[x].upper));
        let tol = self.cfg.tolerance;
        let mut values: Vec<Option<f64>> = vec![None; actions.len()];
        let mut best: Option<usize> = None;
        for idx in order {
            let ja = &actions[idx];
            if self.cfg.pruning && ja.upper < lower_max - tol {
                self.stats.nodes_pruned += 1;
                continue;
            }
            if actions.len() > 1 {
                self.stats.joint_actions_evaluated += 1;
            }
            let mut v = 0.0;
            for s in &ja.successors {
                v += s.probability * (s.reward + self.solve_set(t + 1, group, &s.next)?);
            }
            values[idx] = Some(v);
            lower_max = lower_max.max(v);
            best = match best {
                None => Some(idx),
                Some(b) => {
                    let bv = values[b].unwrap_or(f64::NEG_INFINITY);
                    if v > bv + tol || (v >= bv - tol && ja.action < actions[b].action) {
                        Some(idx)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        let best = best.expect("the best lower bound is never pruned");
        let value = values[best].unwrap_or_default();
        let candidates = if self.cfg.trace {
            actions
                .iter()
                .zip(&values)
                .map(|(a, v)| Candidate {
                    action: a.action.clone(),
                    lower: a.lower,
                    upper: a.upper,
                    value: *v,
                })
                .collect()
        } else {
            Vec::new()
        };
        self.decisions.insert(
            key.clone(),
            Decision {
                action: actions[best].action.clone(),
                value,
                candidates,
            },
        );
        if self.cfg.memoization {
            self.memo.insert(key, value);
        }
        Ok(value)
    }

    /// Assembles the full joint policy from the recorded group decisions.
    pub fn extract_policy(&mut self, report: &SolveReport) -> Result<Policy, SearchError> {
        if !report.complete {
            return Err(SearchError::Incomplete);
        }
        let m = self.m;
        let agents: Vec<usize> = (0..m.num_agents()).collect();
        let mut policy = Policy::new();
        let mut frontier: Vec<Vec<usize>> = vec![m.initial.clone()];
        for t in 0..m.horizon {
            let mut next_frontier: Vec<Vec<usize>> = Vec::new();
            for state in frontier {
                let mut action = vec![0; m.num_agents()];
                for group in self.components(t, &agents, &state) {
                    let sub: Vec<usize> = group.iter().map(|&a| state[a]).collect();
                    let key = (t, group.clone(), sub.clone());
                    let decision = report.decisions.get(&key).ok_or(SearchError::MissingDecision {
                        t,
                        agents: group.clone(),
                        state: sub,
                    })?;
                    for (k, &a) in group.iter().enumerate() {
                        action[a] = decision.action[k];
                    }
                }
                for (next, _) in m.enumerate_successors(&state, &action) {
                    next_frontier.push(next);
                }
                policy.insert(t, state, action);
            }
            next_frontier.sort();
            next_frontier.dedup();
            frontier = next_frontier;
        }
        Ok(policy)
    }
}

/// Runs the search once; see [`CoreSolver`].
pub fn core_solve(m: &Instance, crgs: &[Crg], cfg: SearchConfig) -> Result<SolveReport, SearchError> {
    CoreSolver::new(m, crgs, cfg)?.solve()
}

/// Expected bounds of a group's joint action: the realized reward plus the
/// future bounds of every group member, weighted over the successors.
pub fn joint_action_bounds(
    m: &Instance,
    crgs: &[Crg],
    t: usize,
    group: &[usize],
    state: &[usize],
    action: &[usize],
) -> Result<(f64, f64), SearchError> {
    let n = m.num_agents();
    let mut lower = 0.0;
    let mut upper = 0.0;
    let locals: Vec<Vec<(usize, f64)>> = group
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let mut outs: Vec<(usize, f64)> = m.agents[a]
                .outcomes(state[a], action[k])
                .iter()
                .filter(|o| o.probability > 0.0)
                .map(|o| (o.next, o.probability))
                .collect();
            outs.sort_by_key(|o| o.0);
            outs
        })
        .collect();
    let mut combos: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 1.0)];
    for outs in &locals {
        combos = combos
            .iter()
            .flat_map(|(prefix, p)| {
                outs.iter().map(move |&(s, q)| {
                    let mut v = prefix.clone();
                    v.push(s);
                    (v, p * q)
                })
            })
            .collect();
    }
    for (next, p) in combos {
        let mut context: Vec<Option<LocalTransition>> = vec![None; n];
        for (k, &a) in group.iter().enumerate() {
            context[a] = Some(LocalTransition::new(state[a], action[k], next[k]));
        }
        let mut reward = 0.0;
        let mut lo = 0.0;
        let mut hi = 0.0;
        for (k, &a) in group.iter().enumerate() {
            let tr = context[a].expect("set above");
            reward += crgs[a].lookup_transition_reward(m, &tr, &context)?.total;
            let (l, u) = crgs[a]
                .bounds(t + 1, next[k])
                .ok_or(CrgError::MissingTransition(tr))?;
            lo += l;
            hi += u;
        }
        lower += p * (reward + lo);
        upper += p * (reward + hi);
    }
    Ok((lower, upper))
}
