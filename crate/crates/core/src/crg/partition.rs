use crate::model::Instance;

use super::CrgError;

/// Assignment of every reward function to exactly one agent in its scope.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewardPartition {
    /// `assignment[i]` lists the indices of the functions owned by agent `i`, ascending.
    pub assignment: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PartitionStrategy {
    Balanced,
    /// Owner per reward function, indexed like `Instance::rewards`.
    Fixed(Vec<usize>),
}

impl RewardPartition {
    pub fn owner_of(&self, function: usize) -> Option<usize> {
        self.assignment.iter().position(|fs| fs.contains(&function))
    }

    pub fn functions(&self, agent: usize) -> &[usize] {
        self.assignment.get(agent).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Splits the reward functions over the agents.
///
/// Local functions always go to their own agent. Under the balanced strategy
/// each interaction function then goes to the in-scope agent holding the
/// fewest functions so far, ties to the lowest id.
pub fn partition_rewards(m: &Instance, strategy: &PartitionStrategy) -> Result<RewardPartition, CrgError> {
    let n = m.num_agents();
    let mut assignment = vec![Vec::new(); n];
    match strategy {
        PartitionStrategy::Balanced => {
            for (k, f) in m.rewards.iter().enumerate() {
                if !f.is_interaction() {
                    assignment[f.scope[0].0].push(k);
                }
            }
            for (k, f) in m.rewards.iter().enumerate() {
                if f.is_interaction() {
                    let owner = f
                        .scope
                        .iter()
                        .map(|a| a.0)
                        .min_by_key(|&a| (assignment[a].len(), a))
                        .expect("interaction scope is non-empty");
                    assignment[owner].push(k);
                }
            }
        }
        PartitionStrategy::Fixed(owners) => {
            if owners.len() != m.rewards.len() {
                return Err(CrgError::Partition(format!(
                    "{} owners given for {} reward functions",
                    owners.len(),
                    m.rewards.len()
                )));
            }
            for (k, (&owner, f)) in owners.iter().zip(&m.rewards).enumerate() {
                if !f.involves(owner) {
                    return Err(CrgError::Partition(format!(
                        "reward function '{}' assigned to agent {owner} outside its scope",
                        f.name
                    )));
                }
                assignment[owner].push(k);
            }
        }
    }
    for fs in &mut assignment {
        fs.sort_unstable();
    }
    Ok(RewardPartition { assignment })
}
