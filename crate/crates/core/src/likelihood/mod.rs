//! Execution likelihood: the probability that a vertex runs at least once.

mod engine;
mod model;
mod scc;

pub use engine::{Engine, EngineError, LikelihoodResult};
pub use model::{dempster_shafer_combine, BranchModel, Heuristic, HeuristicTable, ModelError, ModelKind};
