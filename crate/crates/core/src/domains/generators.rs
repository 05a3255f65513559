use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::model::{
    AgentId, Instance, LocalAction, LocalMdp, LocalState, Metadata, Outcome, RewardFunction, TransitionKey, View,
};

use super::mpp::{MaintenanceTask, MppAgent, MppInstance};
use super::{stream_rng, RNG_NAME};

fn metadata(generator: &str, seed: u64, params: &[(&str, String)]) -> Metadata {
    Metadata {
        generator: generator.into(),
        rng: Some(RNG_NAME.into()),
        seed: Some(seed),
        params: params.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MppParams {
    pub agents: usize,
    pub tasks: usize,
    pub horizon: usize,
    pub max_duration: usize,
    /// Delay probabilities are drawn from this range, in steps of 0.05.
    pub delay: (f64, f64),
    pub cost: (i64, i64),
    /// Magnitude range of a hindrance penalty.
    pub hindrance: (i64, i64),
    /// Fraction of cross-agent task pairs that hinder each other.
    pub density: f64,
    /// Hindrance only occurs in periods before this one.
    pub interaction_until: Option<usize>,
    pub unfinished_penalty: i64,
    pub seed: u64,
}

impl Default for MppParams {
    fn default() -> Self {
        MppParams {
            agents: 2,
            tasks: 3,
            horizon: 5,
            max_duration: 2,
            delay: (0.1, 0.5),
            cost: (1, 5),
            hindrance: (1, 8),
            density: 0.5,
            interaction_until: None,
            unfinished_penalty: 20,
            seed: 0,
        }
    }
}

fn random_tasks(rng: &mut ChaCha8Rng, p: &MppParams, agent: usize) -> MppAgent {
    let tasks = (0..p.tasks)
        .map(|x| {
            let duration = rng.random_range(1..=p.max_duration.max(1));
            let steps_lo = (p.delay.0 * 20.0).round() as i64;
            let steps_hi = (p.delay.1 * 20.0).round() as i64;
            let delay_probability = rng.random_range(steps_lo..=steps_hi.max(steps_lo)) as f64 / 20.0;
            MaintenanceTask {
                name: format!("t{x}"),
                duration,
                delay_probability,
                delayed_duration: duration + 1,
                costs: (0..p.horizon).map(|_| rng.random_range(p.cost.0..=p.cost.1)).collect(),
            }
        })
        .collect();
    MppAgent {
        name: format!("agent{agent}"),
        tasks,
    }
}

fn mpp_params_metadata(generator: &str, p: &MppParams) -> Metadata {
    let mut list = vec![
        ("agents", p.agents.to_string()),
        ("tasks", p.tasks.to_string()),
        ("horizon", p.horizon.to_string()),
        ("density", p.density.to_string()),
    ];
    if let Some(u) = p.interaction_until {
        list.push(("interaction_until", u.to_string()));
    }
    metadata(generator, p.seed, &list)
}

/// Random maintenance problem; the seed fixes every draw.
pub fn gen_random_mpp(p: &MppParams) -> MppInstance {
    let mut rng = stream_rng(p.seed, 0);
    let agents: Vec<MppAgent> = (0..p.agents).map(|i| random_tasks(&mut rng, p, i)).collect();
    let until = p.interaction_until.unwrap_or(p.horizon).min(p.horizon);
    let mut hindrance = BTreeMap::new();
    for i in 0..p.agents {
        for j in i + 1..p.agents {
            for x in 0..p.tasks {
                for y in 0..p.tasks {
                    if !rng.random_bool(p.density.clamp(0.0, 1.0)) {
                        continue;
                    }
                    for period in 0..until {
                        let v = rng.random_range(p.hindrance.0..=p.hindrance.1);
                        hindrance.insert(((i, x), (j, y), period), -v);
                    }
                }
            }
        }
    }
    MppInstance {
        agents,
        hindrance,
        horizon: p.horizon,
        unfinished_penalty: p.unfinished_penalty,
        metadata: mpp_params_metadata("mpp", p),
    }
}

/// Agent `k`'s first task hinders the first tasks of agents `2k` and `2k+1`
/// (counting from 1); there are no other interactions.
pub fn gen_pyra(n: usize, horizon: usize, tasks: usize, seed: u64) -> MppInstance {
    let p = MppParams {
        agents: n,
        tasks,
        horizon,
        density: 0.0,
        seed,
        ..MppParams::default()
    };
    let mut inst = gen_random_mpp(&p);
    let mut rng = stream_rng(seed, 1);
    for k in 1..=n {
        for child in [2 * k, 2 * k + 1] {
            if child > n {
                continue;
            }
            for period in 0..horizon {
                let v = rng.random_range(p.hindrance.0..=p.hindrance.1);
                inst.hindrance.insert(((k - 1, 0), (child - 1, 0), period), -v);
            }
        }
    }
    inst.metadata = metadata(
        "pyra",
        seed,
        &[
            ("agents", n.to_string()),
            ("tasks", tasks.to_string()),
            ("horizon", horizon.to_string()),
        ],
    );
    inst
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoordintParams {
    pub seed: u64,
    /// Replaces the drawn delay probability of the first agent's task.
    pub delay_override: Option<f64>,
}

/// Two agents whose best schedule depends on whether the first agent's task
/// ran late, which only a policy observing both agents can react to.
///
/// The first agent's task is cheap only in period 0 and runs one period late
/// with probability `p`. The second agent's task is cheapest in period 1,
/// `delta` dearer in period 2, and overlapping the first task costs `H > delta`.
pub fn gen_coordint(params: &CoordintParams) -> MppInstance {
    let mut rng = stream_rng(params.seed, 0);
    let p = params
        .delay_override
        .unwrap_or_else(|| rng.random_range(4..=16) as f64 / 20.0);
    let base_a = rng.random_range(1..=3);
    let base_b = rng.random_range(1..=3);
    let delta = rng.random_range(2..=4);
    let h_cost = delta + rng.random_range(1..=5);
    let expensive = 30;
    let agents = vec![
        MppAgent {
            name: "agent0".into(),
            tasks: vec![MaintenanceTask {
                name: "A".into(),
                duration: 1,
                delay_probability: p,
                delayed_duration: 2,
                costs: vec![base_a, expensive, expensive],
            }],
        },
        MppAgent {
            name: "agent1".into(),
            tasks: vec![MaintenanceTask {
                name: "B".into(),
                duration: 1,
                delay_probability: 0.0,
                delayed_duration: 1,
                costs: vec![expensive, base_b, base_b + delta],
            }],
        },
    ];
    let hindrance = (0..3).map(|t| (((0, 0), (1, 0), t), -h_cost)).collect();
    MppInstance {
        agents,
        hindrance,
        horizon: 3,
        unfinished_penalty: 2 * expensive,
        metadata: metadata(
            "coordint",
            params.seed,
            &[
                ("delay", p.to_string()),
                ("delta", delta.to_string()),
                ("hindrance", h_cost.to_string()),
            ],
        ),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmallParams {
    pub agents: (usize, usize),
    pub actions: (usize, usize),
    pub states: (usize, usize),
    pub horizon: (usize, usize),
}

impl Default for SmallParams {
    fn default() -> Self {
        SmallParams {
            agents: (2, 3),
            actions: (2, 3),
            states: (2, 4),
            horizon: (1, 4),
        }
    }
}

fn random_mdp(rng: &mut ChaCha8Rng, name: String, p: &SmallParams, horizon: usize) -> LocalMdp {
    let ns = rng.random_range(p.states.0..=p.states.1);
    let na = rng.random_range(p.actions.0..=p.actions.1);
    let states = (0..ns)
        .map(|id| LocalState {
            id,
            label: format!("s{id}"),
            features: vec![(id % 2) as i64, (id / 2) as i64],
        })
        .collect();
    let actions = (0..na)
        .map(|id| LocalAction {
            id,
            label: format!("a{id}"),
        })
        .collect();
    let mut mdp = LocalMdp::new(name, vec!["parity".into(), "half".into()], states, actions);
    let dyadic = [0.25, 0.5, 0.75];
    for s in 0..ns {
        let unavailable = if na > 1 && rng.random_bool(0.2) {
            Some(rng.random_range(0..na))
        } else {
            None
        };
        for a in 0..na {
            if Some(a) == unavailable {
                continue;
            }
            let x = rng.random_range(0..ns);
            let outs = if rng.random_bool(0.4) && ns > 1 {
                let mut y = rng.random_range(0..ns);
                if y == x {
                    y = (x + 1) % ns;
                }
                let q = *dyadic.choose(rng).expect("non-empty");
                vec![Outcome { next: x, probability: q }, Outcome { next: y, probability: 1.0 - q }]
            } else {
                vec![Outcome { next: x, probability: 1.0 }]
            };
            mdp.set_outcomes(s, a, outs);
        }
    }
    restrict_to_reachable(mdp, horizon)
}

/// Drops states not reachable from state 0 within `horizon` and renumbers the rest.
fn restrict_to_reachable(mdp: LocalMdp, horizon: usize) -> LocalMdp {
    let layers = mdp.reachable_by_stage(0, horizon);
    let keep: BTreeSet<usize> = layers.iter().flatten().copied().collect();
    let map: BTreeMap<usize, usize> = keep.iter().enumerate().map(|(new, &old)| (old, new)).collect();
    let states = keep
        .iter()
        .map(|&old| {
            let mut s = mdp.states[old].clone();
            s.id = map[&old];
            s
        })
        .collect();
    let mut out = LocalMdp::new(mdp.name.clone(), mdp.feature_names.clone(), states, mdp.actions.clone());
    // States first reached at the horizon may lead outside the kept set; they never act.
    let acting: BTreeSet<usize> = layers[..horizon].iter().flatten().copied().collect();
    for &old in &acting {
        for a in 0..mdp.num_actions() {
            let outs: Vec<Outcome> = mdp
                .outcomes(old, a)
                .iter()
                .map(|o| Outcome {
                    next: map[&o.next],
                    probability: o.probability,
                })
                .collect();
            if !outs.is_empty() {
                out.set_outcomes(map[&old], a, outs);
            }
        }
    }
    out
}

fn random_view(rng: &mut ChaCha8Rng) -> View {
    match rng.random_range(0..4) {
        0 => View::Features(vec![0]),
        1 => View::Features(vec![1]),
        2 => View::Features(vec![0, 1]),
        _ => View::State,
    }
}

/// Small random instance with integer rewards, for exhaustive cross-checks.
pub fn random_small(seed: u64, p: &SmallParams) -> Instance {
    let mut rng = stream_rng(seed, 0);
    let n = rng.random_range(p.agents.0..=p.agents.1);
    let horizon = rng.random_range(p.horizon.0..=p.horizon.1);
    let agents: Vec<LocalMdp> = (0..n).map(|i| random_mdp(&mut rng, format!("agent{i}"), p, horizon)).collect();
    let mut m = Instance {
        metadata: metadata("random-small", seed, &[("agents", n.to_string()), ("horizon", horizon.to_string())]),
        agents,
        rewards: Vec::new(),
        horizon,
        initial: vec![0; n],
    };
    let transitions: Vec<Vec<_>> = m.agents.iter().map(|a| a.transitions()).collect();
    for i in 0..n {
        let mut f = RewardFunction::new(format!("local{i}"), vec![AgentId(i)], vec![View::State], 0.0);
        for (tr, _) in &transitions[i] {
            if rng.random_bool(0.6) {
                let key = m.transition_key(i, &View::State, tr);
                f.insert(vec![key], rng.random_range(-4..=6) as f64);
            }
        }
        m.rewards.push(f);
    }
    let mut scopes: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(0.75) {
                scopes.push(vec![i, j]);
            }
        }
    }
    if n >= 3 && rng.random_bool(0.3) {
        scopes.push((0..n).collect());
    }
    for (k, scope) in scopes.into_iter().enumerate() {
        let reads: Vec<View> = scope.iter().map(|_| random_view(&mut rng)).collect();
        let default = if rng.random_bool(0.15) { rng.random_range(-1..=1) as f64 } else { 0.0 };
        let mut f = RewardFunction::new(
            format!("interaction{k}"),
            scope.iter().map(|&a| AgentId(a)).collect(),
            reads.clone(),
            default,
        );
        let entries = rng.random_range(1..=6);
        for _ in 0..entries {
            let key: Vec<TransitionKey> = scope
                .iter()
                .zip(&reads)
                .map(|(&a, view)| {
                    if rng.random_bool(0.9) {
                        let (tr, _) = transitions[a].choose(&mut rng).expect("agents have transitions");
                        m.transition_key(a, view, tr)
                    } else {
                        // A key that may not be realizable.
                        let s = rng.random_range(0..m.agents[a].num_states());
                        let t = rng.random_range(0..m.agents[a].num_states());
                        let act = rng.random_range(0..m.agents[a].num_actions());
                        TransitionKey {
                            from: m.project(a, view, s),
                            action: act,
                            to: m.project(a, view, t),
                        }
                    }
                })
                .collect();
            let mut v = rng.random_range(-5..=5);
            if v == 0 {
                v = 2;
            }
            f.insert(key, v as f64);
        }
        m.rewards.push(f);
    }
    m
}
