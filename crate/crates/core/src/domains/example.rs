//! Two agents with actions a, b and c, each usable once over two steps.
//!
//! Agent 1's feature `f1` is unknown (-1) until it performs a, and becomes 1
//! when a is performed first and 0 when it is performed second. Agent 2's c has
//! outcomes c and c' with probabilities 0.75 and 0.25. The only interaction is
//! between a of agent 1 and a of agent 2 and depends on how `f1` is set.
//!
//! Rewards: agent 1 earns a=2, b=1, c=3; agent 2 earns a=2, b=1, c=4, c'=0;
//! the interaction pays +5 when `f1` becomes 1 and -3 when it becomes 0.

use std::collections::{BTreeMap, HashMap};

use crate::crg::PartitionStrategy;
use crate::model::{
    AgentId, Instance, LocalAction, LocalMdp, LocalState, Metadata, Outcome, RewardFunction, StateKey, TransitionKey,
    View,
};

const ACTIONS: [&str; 3] = ["a", "b", "c"];

/// Builds the local MDP whose states are the sequences of performed actions.
/// `outcomes(action)` lists the labels appended by that action with probabilities.
fn sequence_mdp(
    name: &str,
    feature_names: Vec<String>,
    outcomes: impl Fn(usize) -> Vec<(&'static str, f64)>,
    features: impl Fn(&str) -> Vec<i64>,
) -> LocalMdp {
    let mut labels: Vec<String> = vec![String::new()];
    let mut ids: HashMap<String, usize> = HashMap::from([(String::new(), 0)]);
    let mut edges: Vec<(usize, usize, Vec<(usize, f64)>)> = Vec::new();
    let mut frontier = vec![String::new()];
    for _ in 0..2 {
        let mut next = Vec::new();
        for label in &frontier {
            let s = ids[label];
            for (a, name) in ACTIONS.iter().enumerate() {
                if label.contains(name) {
                    continue;
                }
                let mut outs = Vec::new();
                for (suffix, p) in outcomes(a) {
                    let l = format!("{label}{suffix}");
                    let id = *ids.entry(l.clone()).or_insert_with(|| {
                        labels.push(l.clone());
                        next.push(l.clone());
                        labels.len() - 1
                    });
                    outs.push((id, p));
                }
                edges.push((s, a, outs));
            }
        }
        frontier = next;
    }
    let states = labels
        .iter()
        .enumerate()
        .map(|(id, l)| LocalState {
            id,
            label: if l.is_empty() { "0".into() } else { l.clone() },
            features: features(l),
        })
        .collect();
    let actions = ACTIONS
        .iter()
        .enumerate()
        .map(|(id, l)| LocalAction { id, label: l.to_string() })
        .collect();
    let mut mdp = LocalMdp::new(name, feature_names, states, actions);
    for (s, a, outs) in edges {
        mdp.set_outcomes(
            s,
            a,
            outs.into_iter().map(|(next, probability)| Outcome { next, probability }).collect(),
        );
    }
    mdp
}

fn f1(label: &str) -> i64 {
    match label.find('a') {
        None => -1,
        Some(0) => 1,
        Some(_) => 0,
    }
}

/// The bundled two-agent example.
pub fn example_two_agent() -> Instance {
    let agent1 = sequence_mdp(
        "agent1",
        vec!["f1".into()],
        |a| vec![(["a", "b", "c"][a], 1.0)],
        |l| vec![f1(l)],
    );
    let agent2 = sequence_mdp(
        "agent2",
        Vec::new(),
        |a| match a {
            2 => vec![("c", 0.75), ("C", 0.25)],
            _ => vec![(["a", "b", "c"][a], 1.0)],
        },
        |_| Vec::new(),
    );

    let by_action = |name: &str, agent: usize, mdp: &LocalMdp, value: &dyn Fn(usize, &str) -> f64| {
        let mut f = RewardFunction::new(name, vec![AgentId(agent)], vec![View::State], 0.0);
        for (tr, _) in mdp.transitions() {
            let v = value(tr.action, &mdp.states[tr.to].label);
            f.insert(
                vec![TransitionKey {
                    from: StateKey(vec![tr.from as i64]),
                    action: tr.action,
                    to: StateKey(vec![tr.to as i64]),
                }],
                v,
            );
        }
        f
    };
    let r1 = by_action("R1", 0, &agent1, &|a, _| [2.0, 1.0, 3.0][a]);
    let r2 = by_action("R2", 1, &agent2, &|a, to| match a {
        2 if to.ends_with('C') => 0.0,
        _ => [2.0, 1.0, 4.0][a],
    });
    let mut r12 = RewardFunction::new(
        "R12",
        vec![AgentId(0), AgentId(1)],
        vec![View::Features(vec![0]), View::Features(Vec::new())],
        0.0,
    );
    let empty = || StateKey(Vec::new());
    for (to, value) in [(1, 5.0), (0, -3.0)] {
        r12.insert(
            vec![
                TransitionKey {
                    from: StateKey(vec![-1]),
                    action: 0,
                    to: StateKey(vec![to]),
                },
                TransitionKey {
                    from: empty(),
                    action: 0,
                    to: empty(),
                },
            ],
            value,
        );
    }
    Instance {
        metadata: Metadata {
            generator: "example".into(),
            rng: None,
            seed: None,
            params: BTreeMap::new(),
        },
        agents: vec![agent1, agent2],
        rewards: vec![r1, r2, r12],
        horizon: 2,
        initial: vec![0, 0],
    }
}

/// The interaction function goes to the second agent.
pub fn example_partition() -> PartitionStrategy {
    PartitionStrategy::Fixed(vec![0, 1, 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{dp_solve, joint_actions, DpConfig};
    use crate::crg::{build_all, partition_rewards, size_audit, ArcLabel, CrgOptions, NodeRef};
    use crate::model::LocalTransition;

    #[test]
    fn is_valid() {
        assert!(example_two_agent().validate().is_empty());
    }

    #[test]
    fn first_stage_counts() {
        let m = example_two_agent();
        let actions = joint_actions(&m, &m.initial);
        assert_eq!(actions.len(), 9);
        let successors: usize = actions.iter().map(|a| m.enumerate_successors(&m.initial, a).len()).sum();
        assert_eq!(successors, 12);
    }

    #[test]
    fn optimum_is_coordinated_a() {
        let m = example_two_agent();
        let r = dp_solve(&m, &DpConfig::default()).unwrap();
        // a with a at the start, then c for both.
        assert!((r.value - 15.0).abs() < 1e-9);
        assert_eq!(r.policy.action(0, &m.initial), Some(&[0, 0][..]));
    }

    #[test]
    fn graphs_match_the_hand_count() {
        let m = example_two_agent();
        let p = partition_rewards(&m, &example_partition()).unwrap();
        let g = build_all(&m, &p, CrgOptions::default()).unwrap();
        assert_eq!(g[0].layers[1].len(), 3);
        assert_eq!(g[1].layers[1].len(), 4);
        assert_eq!(size_audit(&m, &g[0]).layers[0].leaf_arcs, 3);
        assert_eq!(size_audit(&m, &g[1]).layers[0].leaf_arcs, 6);

        let tree = g[1].tree(&LocalTransition::new(0, 0, 1)).unwrap();
        let NodeRef::Branch(root) = tree.root else { panic!("expected a branch") };
        let arcs = &tree.branches[root].arcs;
        assert_eq!(arcs.len(), 2);
        assert_eq!(arcs[0].0, ArcLabel::Action(0));
        assert_eq!(arcs[1].0, ArcLabel::AnyAction);
        let NodeRef::Branch(inner) = arcs[0].1 else { panic!("expected a branch") };
        let labels: Vec<&ArcLabel> = tree.branches[inner].arcs.iter().map(|(l, _)| l).collect();
        assert_eq!(labels.len(), 2);
        assert!(labels.iter().all(|l| matches!(l, ArcLabel::Pair(..))));
        let NodeRef::Branch(rest) = arcs[1].1 else { panic!("expected a branch") };
        assert_eq!(tree.branches[rest].arcs.len(), 1);
        assert_eq!(tree.branches[rest].arcs[0].0, ArcLabel::NoInfluence);

        // After a, agent 1 no longer affects the interaction and keeps only c.
        let node = g[0].node(1, 1).unwrap();
        assert!(node.local_cri);
        assert_eq!(node.actions.iter().map(|a| a.action).collect::<Vec<_>>(), vec![2]);
    }
}
