//! dsgforge: a multi-agent workflow engine for LLM-driven conceptual
//! engineering design, plus the offline harness that evaluates it.
//!
//! The crate is organized bottom-up:
//!
//! - [`dsg`]: the Design-State Graph document model.
//! - [`llm`]: chat-completion gateway: one HTTP backend, one scripted
//!   offline backend, and a structured-output retry loop.
//! - [`agents`]: role prompts, context assembly, and typed output parsing
//!   for the eleven agent roles.
//! - [`workflow`]: the per-run state machine (multi-agent and two-agent
//!   variants), checkpointing, and failure classification.
//! - [`metrics`]: the M1 to M7 run metrics and their per-condition
//!   aggregation.
//! - [`harness`]: experiment-matrix enumeration, execution, and summary
//!   export.
//!
//! With the default `parallel` feature the harness fans independent runs
//! (and script executions) out over a rayon pool; without it everything
//! runs sequentially. Results are identical either way.

pub mod agents;
pub mod dsg;
pub mod harness;
pub mod llm;
pub mod metrics;
pub mod workflow;
