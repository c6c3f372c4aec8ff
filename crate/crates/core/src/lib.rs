//! Benchmark harness for LLM-generated planner programs on task and motion
//! planning problems.

pub mod bench;
pub mod complexity;
pub mod continuous;
pub mod envs;
pub mod geometry;
pub mod llm;
pub mod model;
pub mod oracles;
pub mod prompt;
pub mod orchestrator;
pub mod rng;
pub mod sandbox;
pub mod verifier;
pub mod wire;
