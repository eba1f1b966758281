//! Multi-agent engine that turns a natural-language computational task into
//! verified, optimized and packaged solver code.
//!
//! The pipeline is split into agents that each own one module:
//!
//! * [`analyzer`] classifies the query, formalizes optimization tasks and
//!   retrieves candidate tools through [`retrieval`].
//! * [`solver`] plans, generates and debugs solver code against the
//!   [`executor`] sandbox.
//! * [`evalgen`] synthesizes the evaluator and runs the joint
//!   solver/evaluator referee loop.
//! * [`evolution`] refines a verified solver using the evaluator as fitness.
//! * [`packager`] assembles a standalone project from the final solver.
//!
//! [`benchmark`] implements the task format and the metric suite used to
//! score runs, and [`pipeline`] wires everything together for the CLI.

pub mod analyzer;
pub mod benchmark;
pub mod config;
pub mod evalgen;
pub mod evolution;
pub mod executor;
pub mod llm;
pub mod packager;
pub mod par;
pub mod pipeline;
pub mod pylit;
pub mod registry;
pub mod retrieval;
pub mod solver;
pub mod template;
pub mod transcript;

pub use analyzer::{ProblemSpec, RefAnswer, TaskType};
pub use executor::{ExecutionResult, ExecutionStatus, Executor, RunConfig};
pub use llm::{ChatRequest, Gateway, PromptId};
pub use registry::{Registry, ToolHandle, ToolKind, ToolSet, ToolSpec};

/// Version string recorded in packaged project manifests.
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
