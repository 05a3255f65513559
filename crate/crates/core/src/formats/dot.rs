use std::fmt::Write;

use crate::crg::{ArcLabel, BranchKind, Crg, NodeRef, Tree};
use crate::model::{Instance, StateKey, View};
use crate::search::SolveReport;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DotOptions {
    /// Show `[L, U]` under each local state.
    pub bounds: bool,
}

/// Agents are numbered from 1 in labels.
fn sup(agent: usize) -> String {
    const DIGITS: [char; 10] = ['⁰', '¹', '²', '³', '⁴', '⁵', '⁶', '⁷', '⁸', '⁹'];
    (agent + 1)
        .to_string()
        .chars()
        .map(|c| DIGITS[c.to_digit(10).unwrap() as usize])
        .collect()
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn state_id(t: usize, s: usize) -> String {
    format!("s{t}_{s}")
}

struct Renderer<'a> {
    m: &'a Instance,
    g: &'a Crg,
    out: String,
}

impl Renderer<'_> {
    fn key_label(&self, j: usize, key: &StateKey) -> String {
        match self.g.views[j].as_ref().unwrap_or(&View::State) {
            View::State => key
                .0
                .first()
                .and_then(|&s| self.m.agents[j].states.get(s as usize))
                .map(|s| s.label.clone())
                .unwrap_or_else(|| format!("{:?}", key.0)),
            View::Features(_) => {
                let parts: Vec<String> = key.0.iter().map(i64::to_string).collect();
                format!("({})", parts.join(","))
            }
        }
    }

    fn arc_label(&self, agent: usize, label: &ArcLabel) -> String {
        match label {
            ArcLabel::Action(a) => format!("{}{}", self.m.agents[agent].actions[*a].label, sup(agent)),
            ArcLabel::AnyAction => format!("*{}", sup(agent)),
            ArcLabel::Pair(x, y) => format!("{}→{}", self.key_label(agent, x), self.key_label(agent, y)),
            ArcLabel::NoInfluence => format!("⊥{}", sup(agent)),
        }
    }

    fn edge(&mut self, from: &str, to: &str, label: &str) {
        writeln!(self.out, "  {} -> {} [label={}];", quote(from), quote(to), quote(label)).unwrap();
    }

    fn tree(&mut self, prefix: &str, tree: &Tree, target: &str) {
        let root_kind_parent: Vec<Option<BranchKind>> = {
            let mut parent = vec![None; tree.branches.len()];
            for b in &tree.branches {
                for (_, child) in &b.arcs {
                    if let NodeRef::Branch(c) = child {
                        parent[*c] = Some(b.kind);
                    }
                }
            }
            parent
        };
        for (b, branch) in tree.branches.iter().enumerate() {
            let id = format!("{prefix}_b{b}");
            let influence_root = branch.kind == BranchKind::Influence && root_kind_parent[b] != Some(BranchKind::Influence);
            let shape = if influence_root {
                "shape=triangle, label=\"\", width=0.2, height=0.2"
            } else {
                "shape=point"
            };
            writeln!(self.out, "  {} [{shape}];", quote(&id)).unwrap();
            for (label, child) in &branch.arcs {
                let text = self.arc_label(branch.agent, label);
                match child {
                    NodeRef::Branch(c) => self.edge(&id, &format!("{prefix}_b{c}"), &text),
                    NodeRef::Leaf(l) => self.edge(&id, target, &format!("{text} : {}", tree.leaves[*l].total)),
                }
            }
        }
    }
}

/// Layered graph of one agent. Local states are circles, action-tree nodes
/// points and influence-tree roots triangles; leaf arcs carry the reward.
pub fn export_dot(m: &Instance, g: &Crg, options: DotOptions) -> String {
    let mut r = Renderer { m, g, out: String::new() };
    let owner = g.owner;
    writeln!(r.out, "digraph {} {{", quote(&format!("crg{}", sup(owner)))).unwrap();
    writeln!(r.out, "  rankdir=TB;").unwrap();
    for (t, layer) in g.layers.iter().enumerate() {
        let mut ids = Vec::new();
        for node in layer {
            let id = state_id(t, node.state);
            let mut label = m.agents[owner].states[node.state].label.clone();
            if options.bounds {
                write!(label, "\n[{}, {}]", node.lower, node.upper).unwrap();
            }
            writeln!(r.out, "  {} [shape=circle, label={}];", quote(&id), quote(&label)).unwrap();
            ids.push(quote(&id));
        }
        writeln!(r.out, "  subgraph {{ rank=same; {} }}", ids.join("; ")).unwrap();
    }
    let mut count = 0;
    for (t, layer) in g.layers.iter().enumerate() {
        for node in layer {
            let from = state_id(t, node.state);
            for action in &node.actions {
                for arc in &action.outcomes {
                    let tree = &g.trees[arc.tree];
                    let target = state_id(t + 1, arc.next);
                    let mut label = format!("{}{}", m.agents[owner].actions[action.action].label, sup(owner));
                    if arc.probability < 1.0 {
                        write!(label, " ({})", arc.probability).unwrap();
                    }
                    match tree.root {
                        NodeRef::Leaf(l) => {
                            let reward = tree.leaves[l].total;
                            r.edge(&from, &target, &format!("{label} : {reward}"));
                        }
                        NodeRef::Branch(b) => {
                            let prefix = format!("t{t}_{count}");
                            count += 1;
                            r.edge(&from, &format!("{prefix}_b{b}"), &label);
                            r.tree(&prefix, tree, &target);
                        }
                    }
                }
            }
        }
    }
    r.out.push_str("}\n");
    r.out
}

/// Decisions taken by the policy search. Every candidate joint action shows
/// its bounds; pruned ones are dashed and the chosen one is bold.
pub fn export_trace_dot(m: &Instance, report: &SolveReport) -> String {
    let mut out = String::new();
    writeln!(out, "digraph \"trace\" {{").unwrap();
    writeln!(out, "  rankdir=LR;").unwrap();
    let keys: Vec<_> = report.decisions.keys().collect();
    let agents_text = |agents: &[usize]| agents.iter().map(|&a| (a + 1).to_string()).collect::<Vec<_>>().join(",");
    for (k, ((t, agents, state), d)) in report.decisions.iter().enumerate() {
        let states: Vec<&str> = agents
            .iter()
            .zip(state)
            .map(|(&a, &s)| m.agents[a].states[s].label.as_str())
            .collect();
        let label = format!("t={t} agents {{{}}}\n({})\nV={}", agents_text(agents), states.join(", "), d.value);
        writeln!(out, "  \"d{k}\" [shape=box, label={}];", quote(&label)).unwrap();
        for (c, cand) in d.candidates.iter().enumerate() {
            let actions: Vec<&str> = agents
                .iter()
                .zip(&cand.action)
                .map(|(&a, &x)| m.agents[a].actions[x].label.as_str())
                .collect();
            let mut label = format!("({}) [{}, {}]", actions.join(", "), cand.lower, cand.upper);
            let style = match cand.value {
                Some(v) => {
                    write!(label, "\nQ={v}").unwrap();
                    if cand.action == d.action {
                        "bold"
                    } else {
                        "solid"
                    }
                }
                None => "dashed",
            };
            writeln!(out, "  \"d{k}_c{c}\" [shape=ellipse, style={style}, label={}];", quote(&label)).unwrap();
            writeln!(out, "  \"d{k}\" -> \"d{k}_c{c}\";").unwrap();
        }
        let chosen = d
            .candidates
            .iter()
            .position(|c| c.action == d.action)
            .map(|c| format!("d{k}_c{c}"))
            .unwrap_or_else(|| format!("d{k}"));
        // A later decision follows if its agents belong to this group and each
        // of their states can result from the chosen action.
        for (n, (t2, agents2, state2)) in keys.iter().enumerate() {
            if *t2 != t + 1 {
                continue;
            }
            let follows = agents2.iter().zip(state2).all(|(a, s2)| {
                agents.iter().position(|x| x == a).is_some_and(|p| {
                    m.agents[*a]
                        .outcomes(state[p], d.action[p])
                        .iter()
                        .any(|o| o.next == *s2)
                })
            });
            if follows {
                writeln!(out, "  {} -> \"d{n}\";", quote(&chosen)).unwrap();
            }
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crg::{build_all, partition_rewards, CrgOptions, PartitionStrategy};
    use crate::model::{AgentId, LocalAction, LocalMdp, LocalState, Metadata, Outcome, RewardFunction};

    #[test]
    fn single_agent_two_states() {
        let mut mdp = LocalMdp::new(
            "x",
            Vec::new(),
            (0..2)
                .map(|id| LocalState {
                    id,
                    label: format!("s{id}"),
                    features: Vec::new(),
                })
                .collect(),
            vec![LocalAction { id: 0, label: "go".into() }],
        );
        mdp.set_outcomes(0, 0, vec![Outcome { next: 1, probability: 1.0 }]);
        let m = Instance {
            metadata: Metadata::default(),
            agents: vec![mdp],
            rewards: vec![RewardFunction::new("r", vec![AgentId(0)], vec![View::State], 1.0)],
            horizon: 1,
            initial: vec![0],
        };
        let p = partition_rewards(&m, &PartitionStrategy::Balanced).unwrap();
        let g = build_all(&m, &p, CrgOptions::default()).unwrap();
        let dot = export_dot(&m, &g[0], DotOptions::default());
        assert_eq!(dot.matches("shape=circle").count(), 2);
        assert_eq!(dot.matches(" -> ").count(), 1);
        assert!(dot.contains("label=\"go¹ : 1\""));
    }
}
