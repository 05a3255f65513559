use serde::{Deserialize, Serialize};

use super::canonical::to_canonical;
use super::{parse, FormatError, SCHEMA_VERSION};
use crate::policy::Policy;

#[derive(Serialize, Deserialize)]
struct PolicyDoc {
    schema_version: String,
    decisions: Vec<DecisionDoc>,
}

#[derive(Serialize, Deserialize)]
struct DecisionDoc {
    t: usize,
    state: Vec<usize>,
    action: Vec<usize>,
}

/// Canonical JSON for `pi`, decisions ordered by stage then joint state.
pub fn write_policy(pi: &Policy) -> String {
    let doc = PolicyDoc {
        schema_version: SCHEMA_VERSION.into(),
        decisions: pi
            .decisions
            .iter()
            .map(|((t, state), action)| DecisionDoc {
                t: *t,
                state: state.clone(),
                action: action.clone(),
            })
            .collect(),
    };
    to_canonical(&doc)
}

pub fn read_policy(text: &str) -> Result<Policy, FormatError> {
    let doc: PolicyDoc = parse(text, true)?;
    let mut pi = Policy::new();
    for (k, d) in doc.decisions.into_iter().enumerate() {
        if pi.action(d.t, &d.state).is_some() {
            return Err(FormatError::Reference {
                path: format!("decisions[{k}]"),
                message: format!("stage {} and state {:?} listed twice", d.t, d.state),
            });
        }
        pi.insert(d.t, d.state, d.action);
    }
    Ok(pi)
}
