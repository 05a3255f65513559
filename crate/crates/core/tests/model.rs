use crgsolve::domains::example_two_agent;
use crgsolve::{validate_instance, AgentId, ExecutionSequence, ModelError, RewardFunction, Subject, View};

#[test]
fn joint_probability_is_a_product() {
    let m = example_two_agent();
    // Agent 1 plays a deterministically, agent 2 plays c with outcomes 0.75 / 0.25.
    let p = m.joint_transition_probability(&[0, 0], &[0, 2], &[1, 3]).unwrap();
    let q = m.joint_transition_probability(&[0, 0], &[0, 2], &[1, 4]).unwrap();
    assert_eq!((p, q), (0.75, 0.25));
    assert_eq!(m.joint_transition_probability(&[0, 0], &[0, 2], &[2, 3]).unwrap(), 0.0);
    assert!(matches!(
        m.joint_transition_probability(&[0], &[0, 0], &[1, 1]),
        Err(ModelError::DimensionMismatch { .. })
    ));
}

#[test]
fn successors_cover_all_mass() {
    let m = example_two_agent();
    let succ = m.enumerate_successors(&[0, 0], &[1, 2]);
    assert_eq!(succ.len(), 2);
    assert_eq!(succ.iter().map(|(_, p)| p).sum::<f64>(), 1.0);
    assert!(succ.windows(2).all(|w| w[0].0 < w[1].0));
}

#[test]
fn coordinated_sequence_return() {
    let m = example_two_agent();
    let mut phi = ExecutionSequence::start(m.initial.clone());
    phi.push(vec![0, 0], vec![1, 1]);
    let r = m.sequence_return(&phi).unwrap();
    // 2 + 2 from the local rewards and 5 from the interaction.
    assert_eq!(r.total, 9.0);
    assert_eq!(r.per_component.iter().sum::<f64>(), r.total);
}

#[test]
fn impossible_sequences_rejected() {
    let m = example_two_agent();
    let mut phi = ExecutionSequence::start(m.initial.clone());
    phi.push(vec![0, 0], vec![2, 1]);
    assert!(matches!(m.sequence_return(&phi), Err(ModelError::InvalidSequence(_))));
    let mut long = ExecutionSequence::start(m.initial.clone());
    for _ in 0..=m.horizon {
        long.push(vec![0, 0], vec![0, 0]);
    }
    assert!(m.check_sequence(&long).is_err());
}

#[test]
fn example_is_valid() {
    assert!(validate_instance(&example_two_agent()).is_empty());
}

#[test]
fn violations_name_their_subject() {
    let mut m = example_two_agent();
    m.initial = vec![0, 99];
    m.rewards
        .push(RewardFunction::new("bad", vec![AgentId(1), AgentId(0)], vec![View::State, View::Features(vec![7])], 0.0));
    let v = validate_instance(&m);
    assert!(v.iter().any(|x| x.subject == Subject::Agent(1)));
    let bad: Vec<_> = v.iter().filter(|x| matches!(x.subject, Subject::Reward { .. })).collect();
    assert_eq!(bad.len(), 2, "{bad:?}");
}

#[test]
fn empty_instance_is_invalid() {
    let mut m = example_two_agent();
    m.agents.clear();
    m.rewards.clear();
    m.initial.clear();
    m.horizon = 0;
    assert_eq!(validate_instance(&m).len(), 2);
}
