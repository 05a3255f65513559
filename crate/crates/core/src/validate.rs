use std::collections::BTreeSet;

use crate::model::{Instance, Subject, View, Violation, PROBABILITY_TOLERANCE};

fn violation(subject: Subject, message: impl Into<String>) -> Violation {
    Violation {
        subject,
        message: message.into(),
    }
}

/// Checks every structural invariant of `m`. Violations are data, never errors.
pub fn validate_instance(m: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = m.agents.len();
    if n == 0 {
        out.push(violation(Subject::Instance, "instance has no agents"));
    }
    if m.horizon == 0 {
        out.push(violation(Subject::Instance, "horizon must be at least 1"));
    }
    if m.initial.len() != n {
        out.push(violation(
            Subject::Instance,
            format!("initial state has {} entries for {n} agents", m.initial.len()),
        ));
    }

    for (i, mdp) in m.agents.iter().enumerate() {
        let nf = mdp.feature_names.len();
        for (sid, s) in mdp.states.iter().enumerate() {
            if s.id != sid {
                out.push(violation(
                    Subject::State { agent: i, state: sid },
                    format!("state id {} stored at position {sid}", s.id),
                ));
            }
            if s.features.len() != nf {
                out.push(violation(
                    Subject::State { agent: i, state: sid },
                    format!("{} feature values for {nf} features", s.features.len()),
                ));
            }
        }
        for (aid, a) in mdp.actions.iter().enumerate() {
            if a.id != aid {
                out.push(violation(Subject::Agent(i), format!("action id {} stored at position {aid}", a.id)));
            }
        }
        for s in 0..mdp.num_states() {
            for a in 0..mdp.num_actions() {
                let outs = mdp.outcomes(s, a);
                if outs.is_empty() {
                    continue;
                }
                let subject = || Subject::Transition { agent: i, state: s, action: a };
                let mut sum = 0.0;
                let mut targets = BTreeSet::new();
                for o in outs {
                    if !(o.probability.is_finite() && o.probability > 0.0) {
                        out.push(violation(subject(), format!("probability {} is not positive", o.probability)));
                    }
                    if o.next >= mdp.num_states() {
                        out.push(violation(subject(), format!("successor {} does not exist", o.next)));
                    }
                    if !targets.insert(o.next) {
                        out.push(violation(subject(), format!("successor {} listed twice", o.next)));
                    }
                    sum += o.probability;
                }
                if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
                    out.push(violation(subject(), format!("probabilities sum to {sum}")));
                }
            }
        }
        if let Some(&init) = m.initial.get(i) {
            if init >= mdp.num_states() {
                out.push(violation(Subject::Agent(i), format!("initial state {init} does not exist")));
            } else if m.horizon > 0 {
                check_reachability(m, i, init, &mut out);
            }
        }
    }

    for (k, f) in m.rewards.iter().enumerate() {
        let subject = || Subject::Reward { index: k, name: f.name.clone() };
        if f.scope.is_empty() {
            out.push(violation(subject(), "scope is empty"));
        }
        if f.scope.windows(2).any(|w| w[0] >= w[1]) {
            out.push(violation(subject(), "scope is not strictly ascending"));
        }
        if let Some(bad) = f.scope.iter().find(|a| a.0 >= n) {
            out.push(violation(subject(), format!("scope agent {bad} is not part of the instance")));
            continue;
        }
        if f.reads.len() != f.scope.len() {
            out.push(violation(subject(), "one view per scope agent is required"));
            continue;
        }
        if !f.default.is_finite() {
            out.push(violation(subject(), "default value is not finite"));
        }
        for (agent, view) in f.scope.iter().zip(&f.reads) {
            if let View::Features(fs) = view {
                let nf = m.agents[agent.0].feature_names.len();
                if fs.iter().any(|&x| x >= nf) {
                    out.push(violation(subject(), format!("view of agent {agent} reads a missing feature")));
                }
            }
        }
        for (key, value) in &f.table {
            if !value.is_finite() {
                out.push(violation(subject(), format!("entry value {value} is not finite")));
            }
            if key.len() != f.scope.len() {
                out.push(violation(subject(), "entry key length differs from scope size"));
                continue;
            }
            for ((agent, view), tk) in f.scope.iter().zip(&f.reads).zip(key) {
                let mdp = &m.agents[agent.0];
                if tk.action >= mdp.num_actions() {
                    out.push(violation(subject(), format!("entry uses missing action {} of agent {agent}", tk.action)));
                }
                let width = match view {
                    View::State => 1,
                    View::Features(fs) => fs.len(),
                };
                if tk.from.0.len() != width || tk.to.0.len() != width {
                    out.push(violation(subject(), format!("entry key for agent {agent} has the wrong width")));
                } else if *view == View::State {
                    for id in [tk.from.0[0], tk.to.0[0]] {
                        if id < 0 || id as usize >= mdp.num_states() {
                            out.push(violation(subject(), format!("entry uses missing state {id} of agent {agent}")));
                        }
                    }
                }
            }
        }
    }
    out
}

fn check_reachability(m: &Instance, agent: usize, init: usize, out: &mut Vec<Violation>) {
    let mdp = &m.agents[agent];
    let layers = mdp.reachable_by_stage(init, m.horizon);
    let mut seen = vec![false; mdp.num_states()];
    for (t, layer) in layers.iter().enumerate() {
        for &s in layer {
            seen[s] = true;
            if t < m.horizon && mdp.available_actions(s).next().is_none() {
                out.push(violation(
                    Subject::State { agent, state: s },
                    format!("no available action at stage {t}"),
                ));
            }
        }
    }
    for (s, &r) in seen.iter().enumerate() {
        if !r {
            out.push(violation(
                Subject::State { agent, state: s },
                format!("unreachable within horizon {}", m.horizon),
            ));
        }
    }
}
