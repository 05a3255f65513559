use std::collections::BTreeMap;

/// Joint action per (stage, joint state).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Policy {
    pub decisions: BTreeMap<(usize, Vec<usize>), Vec<usize>>,
}

impl Policy {
    pub fn new() -> Self {
        Policy::default()
    }

    pub fn insert(&mut self, t: usize, state: Vec<usize>, action: Vec<usize>) {
        self.decisions.insert((t, state), action);
    }

    pub fn action(&self, t: usize, state: &[usize]) -> Option<&[usize]> {
        self.decisions.get(&(t, state.to_vec())).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }
}
