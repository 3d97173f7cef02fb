//! Execution likelihood analysis for MicroC programs.
//!
//! The pipeline parses a program ([`frontend`]), builds a control-only
//! system dependence graph ([`sdg`]), and estimates for any vertex the
//! probability that it executes at least once in a run ([`likelihood`]).
//! Those estimates order static-analysis warnings ([`ranker`]) and can be
//! checked against measured behaviour from the reference interpreter
//! ([`profiler`], [`evaluation`]).

pub mod evaluation;
pub mod frontend;
pub mod likelihood;
pub mod profiler;
pub mod ranker;
pub mod sdg;
pub mod synth;

pub use frontend::{parse_program, ParseError, Program};
pub use likelihood::{BranchModel, Engine, LikelihoodResult, ModelKind};
pub use sdg::{build_sdg, Sdg, VertexId};
