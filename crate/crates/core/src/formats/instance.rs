use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::canonical::to_canonical;
use super::{parse, FormatError, SCHEMA_VERSION};
use crate::model::{
    AgentId, Instance, LocalAction, LocalMdp, LocalState, Metadata, Outcome, RewardFunction, StateKey, TransitionKey,
    View,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReadOptions {
    /// Reject fields the schema does not know.
    pub strict: bool,
}

impl Default for ReadOptions {
    fn default() -> Self {
        ReadOptions { strict: true }
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceDoc {
    schema_version: String,
    metadata: MetadataDoc,
    horizon: usize,
    initial: Vec<usize>,
    agents: Vec<AgentDoc>,
    rewards: Vec<RewardDoc>,
}

#[derive(Serialize, Deserialize)]
struct MetadataDoc {
    generator: String,
    #[serde(default)]
    rng: Option<String>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    params: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct AgentDoc {
    name: String,
    #[serde(default)]
    features: Vec<String>,
    states: Vec<StateDoc>,
    actions: Vec<ActionDoc>,
    transitions: Vec<TransitionDoc>,
}

#[derive(Serialize, Deserialize)]
struct StateDoc {
    id: usize,
    #[serde(default)]
    label: String,
    #[serde(default)]
    features: Vec<i64>,
}

#[derive(Serialize, Deserialize)]
struct ActionDoc {
    id: usize,
    #[serde(default)]
    label: String,
}

#[derive(Serialize, Deserialize)]
struct TransitionDoc {
    from: usize,
    action: usize,
    outcomes: Vec<OutcomeDoc>,
}

#[derive(Serialize, Deserialize)]
struct OutcomeDoc {
    to: usize,
    probability: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ViewDoc {
    State,
    Features(Vec<usize>),
}

#[derive(Serialize, Deserialize)]
struct RewardDoc {
    name: String,
    scope: Vec<usize>,
    reads: Vec<ViewDoc>,
    default: f64,
    entries: Vec<EntryDoc>,
}

#[derive(Serialize, Deserialize)]
struct EntryDoc {
    key: Vec<KeyDoc>,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct KeyDoc {
    from: Vec<i64>,
    action: usize,
    to: Vec<i64>,
}

/// Canonical JSON for `m`.
pub fn write_instance(m: &Instance) -> String {
    let doc = InstanceDoc {
        schema_version: SCHEMA_VERSION.into(),
        metadata: MetadataDoc {
            generator: m.metadata.generator.clone(),
            rng: m.metadata.rng.clone(),
            seed: m.metadata.seed,
            params: m.metadata.params.clone(),
        },
        horizon: m.horizon,
        initial: m.initial.clone(),
        agents: m.agents.iter().map(agent_doc).collect(),
        rewards: m.rewards.iter().map(reward_doc).collect(),
    };
    to_canonical(&doc)
}

fn agent_doc(mdp: &LocalMdp) -> AgentDoc {
    let mut transitions = Vec::new();
    for s in 0..mdp.num_states() {
        for a in 0..mdp.num_actions() {
            let outs = mdp.outcomes(s, a);
            if !outs.is_empty() {
                transitions.push(TransitionDoc {
                    from: s,
                    action: a,
                    outcomes: outs
                        .iter()
                        .map(|o| OutcomeDoc {
                            to: o.next,
                            probability: o.probability,
                        })
                        .collect(),
                });
            }
        }
    }
    AgentDoc {
        name: mdp.name.clone(),
        features: mdp.feature_names.clone(),
        states: mdp
            .states
            .iter()
            .enumerate()
            .map(|(id, s)| StateDoc {
                id,
                label: s.label.clone(),
                features: s.features.clone(),
            })
            .collect(),
        actions: mdp
            .actions
            .iter()
            .enumerate()
            .map(|(id, a)| ActionDoc {
                id,
                label: a.label.clone(),
            })
            .collect(),
        transitions,
    }
}

fn reward_doc(f: &RewardFunction) -> RewardDoc {
    RewardDoc {
        name: f.name.clone(),
        scope: f.scope.iter().map(|a| a.0).collect(),
        reads: f
            .reads
            .iter()
            .map(|v| match v {
                View::State => ViewDoc::State,
                View::Features(x) => ViewDoc::Features(x.clone()),
            })
            .collect(),
        default: f.default,
        entries: f
            .table
            .iter()
            .map(|(key, &value)| EntryDoc {
                key: key
                    .iter()
                    .map(|k| KeyDoc {
                        from: k.from.0.clone(),
                        action: k.action,
                        to: k.to.0.clone(),
                    })
                    .collect(),
                value,
            })
            .collect(),
    }
}

/// Strict read of an instance document.
pub fn read_instance(text: &str) -> Result<Instance, FormatError> {
    read_instance_with(text, ReadOptions::default())
}

/// Reads an instance document. State and action ids may be any distinct
/// numbers; they are renumbered densely in ascending order.
///
/// Only the shape of the document and its references are checked here; use
/// [`crate::validate_instance`] for the model's own rules.
pub fn read_instance_with(text: &str, options: ReadOptions) -> Result<Instance, FormatError> {
    let doc: InstanceDoc = parse(text, options.strict)?;
    let mut state_ids = Vec::new();
    let mut action_ids = Vec::new();
    let mut agents = Vec::new();
    for (i, a) in doc.agents.into_iter().enumerate() {
        let (mdp, states, actions) = load_agent(i, a)?;
        agents.push(mdp);
        state_ids.push(states);
        action_ids.push(actions);
    }
    let initial = doc
        .initial
        .iter()
        .enumerate()
        .map(|(i, &s)| match state_ids.get(i) {
            Some(ids) => resolve(ids, s, || format!("initial[{i}]"), "state"),
            None => Ok(s),
        })
        .collect::<Result<_, _>>()?;
    let mut rewards = Vec::new();
    for (k, r) in doc.rewards.into_iter().enumerate() {
        rewards.push(load_reward(k, r, &state_ids, &action_ids)?);
    }
    Ok(Instance {
        metadata: Metadata {
            generator: doc.metadata.generator,
            rng: doc.metadata.rng,
            seed: doc.metadata.seed,
            params: doc.metadata.params,
        },
        agents,
        rewards,
        horizon: doc.horizon,
        initial,
    })
}

fn resolve(ids: &HashMap<usize, usize>, id: usize, path: impl Fn() -> String, what: &str) -> Result<usize, FormatError> {
    ids.get(&id).copied().ok_or_else(|| FormatError::Reference {
        path: path(),
        message: format!("unknown {what} id {id}"),
    })
}

/// Ranks distinct ids in ascending order.
fn dense(ids: impl Iterator<Item = usize>, path: impl Fn(usize) -> String) -> Result<HashMap<usize, usize>, FormatError> {
    let mut raw: Vec<(usize, usize)> = ids.enumerate().map(|(pos, id)| (id, pos)).collect();
    raw.sort();
    let mut map = HashMap::new();
    for w in raw.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(FormatError::Reference {
                path: path(w[1].1),
                message: format!("duplicate id {}", w[1].0),
            });
        }
    }
    for (rank, (id, _)) in raw.into_iter().enumerate() {
        map.insert(id, rank);
    }
    Ok(map)
}

type Loaded = (LocalMdp, HashMap<usize, usize>, HashMap<usize, usize>);

fn load_agent(i: usize, a: AgentDoc) -> Result<Loaded, FormatError> {
    let sid = dense(a.states.iter().map(|s| s.id), |p| format!("agents[{i}].states[{p}].id"))?;
    let aid = dense(a.actions.iter().map(|x| x.id), |p| format!("agents[{i}].actions[{p}].id"))?;
    let mut states: Vec<Option<LocalState>> = vec![None; a.states.len()];
    for s in a.states {
        let id = sid[&s.id];
        states[id] = Some(LocalState {
            id,
            label: s.label,
            features: s.features,
        });
    }
    let mut actions: Vec<Option<LocalAction>> = vec![None; a.actions.len()];
    for x in a.actions {
        let id = aid[&x.id];
        actions[id] = Some(LocalAction { id, label: x.label });
    }
    let mut mdp = LocalMdp::new(a.name, a.features, states.into_iter().flatten().collect(), actions.into_iter().flatten().collect());
    let mut seen = std::collections::HashSet::new();
    for (k, tr) in a.transitions.into_iter().enumerate() {
        let path = |field: &str| format!("agents[{i}].transitions[{k}].{field}");
        let from = resolve(&sid, tr.from, || path("from"), "state")?;
        let action = resolve(&aid, tr.action, || path("action"), "action")?;
        if !seen.insert((from, action)) {
            return Err(FormatError::Reference {
                path: path("action"),
                message: format!("state {} and action {} listed twice", tr.from, tr.action),
            });
        }
        let outcomes = tr
            .outcomes
            .iter()
            .enumerate()
            .map(|(o, out)| {
                Ok(Outcome {
                    next: resolve(&sid, out.to, || path(&format!("outcomes[{o}].to")), "state")?,
                    probability: out.probability,
                })
            })
            .collect::<Result<_, FormatError>>()?;
        mdp.set_outcomes(from, action, outcomes);
    }
    Ok((mdp, sid, aid))
}

fn load_reward(
    k: usize,
    r: RewardDoc,
    state_ids: &[HashMap<usize, usize>],
    action_ids: &[HashMap<usize, usize>],
) -> Result<RewardFunction, FormatError> {
    let reads: Vec<View> = r
        .reads
        .into_iter()
        .map(|v| match v {
            ViewDoc::State => View::State,
            ViewDoc::Features(x) => View::Features(x),
        })
        .collect();
    let mut f = RewardFunction::new(r.name, r.scope.iter().map(|&a| AgentId(a)).collect(), reads, r.default);
    for (e, entry) in r.entries.into_iter().enumerate() {
        let mut key = Vec::with_capacity(entry.key.len());
        for (p, part) in entry.key.into_iter().enumerate() {
            let path = |field: &str| format!("rewards[{k}].entries[{e}].key[{p}].{field}");
            let agent = r.scope.get(p).copied();
            let (mut from, mut action, mut to) = (part.from, part.action, part.to);
            // Ids of missing agents are left for validation to report.
            if let Some(j) = agent.filter(|&j| j < action_ids.len()) {
                action = resolve(&action_ids[j], action, || path("action"), "action")?;
                if f.reads.get(p) == Some(&View::State) {
                    for (field, key) in [("from", &mut from), ("to", &mut to)] {
                        if let [id] = key.as_mut_slice() {
                            let raw = usize::try_from(*id).map_err(|_| FormatError::Reference {
                                path: path(field),
                                message: format!("unknown state id {id}"),
                            })?;
                            *id = resolve(&state_ids[j], raw, || path(field), "state")? as i64;
                        }
                    }
                }
            }
            key.push(TransitionKey {
                from: StateKey(from),
                action,
                to: StateKey(to),
            });
        }
        if f.table.insert(key, entry.value).is_some() {
            return Err(FormatError::Reference {
                path: format!("rewards[{k}].entries[{e}].key"),
                message: "key listed twice".into(),
            });
        }
    }
    Ok(f)
}
