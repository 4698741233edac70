//! planorch-core: a deterministic plan-and-orchestrate engine for
//! long-horizon editing of simulated scene documents.
//!
//! The crate is organized around the engine's data flow:
//!
//! - [`scene`]: the document world, instructions, checklists, goal checks
//! - [`tools`]: the tool registry, call protocol, and simulated dynamics
//! - [`judge`]: rubric scoring, reward aggregation, and the verifier
//! - [`planner`]: plan representation, the trainable plan model, refinement
//! - [`policy`]: candidate enumeration, reward tables, the selection policy
//! - [`search`]: inference-time episodes and brute-force oracles
//! - [`pipeline`]: dataset generation, staged experiments, reporting

pub mod judge;
pub mod planner;
pub mod scene;
pub mod tools;
pub mod util;
pub mod vocab;

pub use scene::{Checklist, Constraint, Instance, Instruction, SceneDoc};
