//! Exact solver for finite-horizon transition-independent multi-agent MDPs.
//!
//! Rewards are stored per agent in conditional return graphs, which yield
//! admissible bounds for a branch-and-bound policy search that splits the
//! agents into independent groups whenever their interactions run out.

pub mod baselines;
pub mod crg;
pub mod domains;
pub mod formats;
pub mod model;
pub mod policy;
pub mod search;
pub mod validate;

pub use model::*;
pub use policy::Policy;
pub use validate::validate_instance;
