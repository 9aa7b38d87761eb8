//! Language-model-generated task curricula for goal-conditioned point environments.
//!
//! The pipeline asks a language model for a sequence of subtasks, asks it again
//! for reward programs and goal distributions for each subtask, trains a policy
//! for every candidate with the cross-entropy method, and lets the model pick the
//! candidate whose rollout statistics fit the subtask best.

pub mod dsl;
pub mod env;
pub mod llm;
pub mod orchestrator;
pub mod par;
pub mod seed;
pub mod stats;
pub mod trainer;
