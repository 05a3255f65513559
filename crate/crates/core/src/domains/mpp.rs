//! Maintenance planning: agents schedule once-only tasks that may run late.
//!
//! Local state features are the current period `t` followed by one status per
//! task: `0` pending, `r > 0` periods of work left, `-1` done. A task in
//! progress must be continued; otherwise the agent starts a pending task or
//! idles. Whether a task runs late is drawn when it is started.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::model::{
    AgentId, Instance, LocalAction, LocalMdp, LocalState, LocalTransition, Metadata, Outcome, RewardFunction,
    StateKey, TransitionKey, View,
};

const PENDING: i64 = 0;
const DONE: i64 = -1;

#[derive(Clone, Debug, PartialEq)]
pub struct MaintenanceTask {
    pub name: String,
    pub duration: usize,
    pub delay_probability: f64,
    pub delayed_duration: usize,
    /// Cost of working on the task in each period.
    pub costs: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MppAgent {
    pub name: String,
    pub tasks: Vec<MaintenanceTask>,
}

/// A task, as (agent, task index).
pub type TaskRef = (usize, usize);

#[derive(Clone, Debug, PartialEq)]
pub struct MppInstance {
    pub agents: Vec<MppAgent>,
    /// Reward (at most 0) when both tasks are worked on in the same period.
    pub hindrance: BTreeMap<(TaskRef, TaskRef, usize), i64>,
    pub horizon: usize,
    /// Charged on the last step for every task that is not done.
    pub unfinished_penalty: i64,
    pub metadata: Metadata,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompiledMpp {
    pub instance: Instance,
    /// Tasks too long to finish even when started at once.
    pub unfinishable: Vec<TaskRef>,
}

fn status_label(v: i64) -> String {
    match v {
        PENDING => "P".into(),
        DONE => "D".into(),
        r => r.to_string(),
    }
}

struct AgentModel {
    mdp: LocalMdp,
    /// Per task and period: transitions that work on the task.
    work: Vec<Vec<Vec<LocalTransition>>>,
}

fn compile_agent(agent: &MppAgent, horizon: usize, penalty: i64) -> (AgentModel, Vec<(LocalTransition, f64)>) {
    let k = agent.tasks.len();
    let mut feature_names = vec!["t".to_string()];
    feature_names.extend(agent.tasks.iter().map(|t| t.name.clone()));
    let mut actions: Vec<LocalAction> = agent
        .tasks
        .iter()
        .enumerate()
        .map(|(id, t)| LocalAction {
            id,
            label: format!("start:{}", t.name),
        })
        .collect();
    let cont = k;
    let idle = k + 1;
    actions.push(LocalAction {
        id: cont,
        label: "continue".into(),
    });
    actions.push(LocalAction {
        id: idle,
        label: "idle".into(),
    });

    let mut ids: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut features: Vec<Vec<i64>> = Vec::new();
    let mut queue = VecDeque::new();
    let initial: Vec<i64> = std::iter::once(0).chain(std::iter::repeat_n(PENDING, k)).collect();
    ids.insert(initial.clone(), 0);
    features.push(initial.clone());
    queue.push_back(initial);
    let mut edges: Vec<(usize, usize, Vec<(Vec<i64>, f64)>)> = Vec::new();
    while let Some(f) = queue.pop_front() {
        let t = f[0] as usize;
        if t >= horizon {
            continue;
        }
        let s = ids[&f];
        let active = (0..k).find(|&x| f[1 + x] > 0);
        let mut options: Vec<(usize, Vec<(Vec<i64>, f64)>)> = Vec::new();
        let step = |mut g: Vec<i64>| {
            g[0] += 1;
            g
        };
        match active {
            Some(x) => {
                let mut g = f.clone();
                g[1 + x] = if f[1 + x] == 1 { DONE } else { f[1 + x] - 1 };
                options.push((cont, vec![(step(g), 1.0)]));
            }
            None => {
                for (x, task) in agent.tasks.iter().enumerate() {
                    if f[1 + x] != PENDING {
                        continue;
                    }
                    let after = |d: usize| {
                        let mut g = f.clone();
                        g[1 + x] = if d <= 1 { DONE } else { d as i64 - 1 };
                        step(g)
                    };
                    let p = task.delay_probability;
                    let nominal = after(task.duration);
                    let delayed = after(task.delayed_duration);
                    let outs = if nominal == delayed || p <= 0.0 {
                        vec![(nominal, 1.0)]
                    } else if p >= 1.0 {
                        vec![(delayed, 1.0)]
                    } else {
                        vec![(nominal, 1.0 - p), (delayed, p)]
                    };
                    options.push((x, outs));
                }
                options.push((idle, vec![(step(f.clone()), 1.0)]));
            }
        }
        for (a, outs) in options {
            for (g, _) in &outs {
                if !ids.contains_key(g) {
                    ids.insert(g.clone(), features.len());
                    features.push(g.clone());
                    queue.push_back(g.clone());
                }
            }
            edges.push((s, a, outs));
        }
    }

    let states = features
        .iter()
        .enumerate()
        .map(|(id, f)| LocalState {
            id,
            label: format!(
                "t{}:{}",
                f[0],
                f[1..].iter().map(|&v| status_label(v)).collect::<Vec<_>>().join(",")
            ),
            features: f.clone(),
        })
        .collect();
    let mut mdp = LocalMdp::new(agent.name.clone(), feature_names, states, actions);
    let mut work = vec![vec![Vec::new(); horizon]; k];
    let mut rewards = Vec::new();
    for (s, a, outs) in edges {
        let from = &features[s];
        let t = from[0] as usize;
        let worked = if a == idle {
            None
        } else if a == cont {
            (0..k).find(|&x| from[1 + x] > 0)
        } else {
            Some(a)
        };
        let mut list = Vec::new();
        for (g, p) in outs {
            let to = ids[&g];
            list.push(Outcome { next: to, probability: p });
            let tr = LocalTransition::new(s, a, to);
            let mut r = 0i64;
            if let Some(x) = worked {
                r -= agent.tasks[x].costs.get(t).copied().unwrap_or(0);
                work[x][t].push(tr);
            }
            if t + 1 == horizon {
                r -= penalty * g[1..].iter().filter(|&&v| v != DONE).count() as i64;
            }
            if r != 0 {
                rewards.push((tr, r as f64));
            }
        }
        mdp.set_outcomes(s, a, list);
    }
    (AgentModel { mdp, work }, rewards)
}

/// Turns a maintenance problem into a transition-independent model.
pub fn compile_mpp(inst: &MppInstance) -> CompiledMpp {
    let h = inst.horizon;
    let mut models = Vec::new();
    let mut rewards = Vec::new();
    for (i, agent) in inst.agents.iter().enumerate() {
        let (model, local) = compile_agent(agent, h, inst.unfinished_penalty);
        let mut f = RewardFunction::new(format!("cost:{}", agent.name), vec![AgentId(i)], vec![View::State], 0.0);
        for (tr, r) in local {
            f.insert(
                vec![TransitionKey {
                    from: StateKey(vec![tr.from as i64]),
                    action: tr.action,
                    to: StateKey(vec![tr.to as i64]),
                }],
                r,
            );
        }
        rewards.push(f);
        models.push(model);
    }
    let mut pairs: BTreeMap<(TaskRef, TaskRef), Vec<(usize, i64)>> = BTreeMap::new();
    for (&(x, y, period), &v) in &inst.hindrance {
        let (x, y) = if x <= y { (x, y) } else { (y, x) };
        if x.0 == y.0 || v == 0 {
            continue;
        }
        pairs.entry((x, y)).or_default().push((period, v));
    }
    let placeholder = Instance {
        metadata: Metadata::default(),
        agents: models.iter().map(|m| m.mdp.clone()).collect(),
        rewards: Vec::new(),
        horizon: h,
        initial: vec![0; models.len()],
    };
    for ((x, y), periods) in pairs {
        let vx = View::Features(vec![0, 1 + x.1]);
        let vy = View::Features(vec![0, 1 + y.1]);
        let name = format!(
            "hindrance:{}.{}-{}.{}",
            inst.agents[x.0].name, inst.agents[x.0].tasks[x.1].name, inst.agents[y.0].name, inst.agents[y.0].tasks[y.1].name
        );
        let mut f = RewardFunction::new(name, vec![AgentId(x.0), AgentId(y.0)], vec![vx.clone(), vy.clone()], 0.0);
        for (period, v) in periods {
            if period >= h {
                continue;
            }
            let kx: BTreeSet<TransitionKey> = models[x.0].work[x.1][period]
                .iter()
                .map(|tr| placeholder.transition_key(x.0, &vx, tr))
                .collect();
            let ky: BTreeSet<TransitionKey> = models[y.0].work[y.1][period]
                .iter()
                .map(|tr| placeholder.transition_key(y.0, &vy, tr))
                .collect();
            for a in &kx {
                for b in &ky {
                    f.insert(vec![a.clone(), b.clone()], v as f64);
                }
            }
        }
        if !f.table.is_empty() {
            rewards.push(f);
        }
    }
    let unfinishable = inst
        .agents
        .iter()
        .enumerate()
        .flat_map(|(i, a)| {
            a.tasks
                .iter()
                .enumerate()
                .filter(|(_, t)| t.duration > h)
                .map(move |(x, _)| (i, x))
        })
        .collect::<Vec<_>>();
    let mut metadata = inst.metadata.clone();
    if !unfinishable.is_empty() {
        metadata.params.insert(
            "unfinishable".into(),
            unfinishable
                .iter()
                .map(|(i, x)| format!("{i}.{x}"))
                .collect::<Vec<_>>()
                .join(","),
        );
    }
    CompiledMpp {
        instance: Instance {
            metadata,
            agents: placeholder.agents,
            rewards,
            horizon: h,
            initial: vec![0; models.len()],
        },
        unfinishable,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(duration: usize, p: f64, delayed: usize, costs: Vec<i64>) -> MaintenanceTask {
        MaintenanceTask {
            name: "x".into(),
            duration,
            delay_probability: p,
            delayed_duration: delayed,
            costs,
        }
    }

    #[test]
    fn single_task_two_periods() {
        let inst = MppInstance {
            agents: vec![MppAgent {
                name: "a".into(),
                tasks: vec![task(1, 0.0, 1, vec![5, 3])],
            }],
            hindrance: BTreeMap::new(),
            horizon: 2,
            unfinished_penalty: 100,
            metadata: Metadata::default(),
        };
        let c = compile_mpp(&inst);
        assert!(c.instance.validate().is_empty());
        let mdp = &c.instance.agents[0];
        // Start and idle at t=0, then from each of the two results.
        assert_eq!(mdp.available_actions(0).collect::<Vec<_>>(), vec![0, 2]);
        assert!(c.unfinishable.is_empty());
    }

    #[test]
    fn delay_splits_the_start() {
        let inst = MppInstance {
            agents: vec![MppAgent {
                name: "a".into(),
                tasks: vec![task(1, 0.25, 2, vec![1, 1, 1])],
            }],
            hindrance: BTreeMap::new(),
            horizon: 3,
            unfinished_penalty: 10,
            metadata: Metadata::default(),
        };
        let c = compile_mpp(&inst);
        let outs = c.instance.agents[0].outcomes(0, 0);
        let probs: Vec<f64> = outs.iter().map(|o| o.probability).collect();
        assert_eq!(probs, vec![0.75, 0.25]);
    }

    #[test]
    fn long_task_is_flagged() {
        let inst = MppInstance {
            agents: vec![MppAgent {
                name: "a".into(),
                tasks: vec![task(3, 0.0, 3, vec![1, 1])],
            }],
            hindrance: BTreeMap::new(),
            horizon: 2,
            unfinished_penalty: 10,
            metadata: Metadata::default(),
        };
        assert_eq!(compile_mpp(&inst).unfinishable, vec![(0, 0)]);
    }
}
