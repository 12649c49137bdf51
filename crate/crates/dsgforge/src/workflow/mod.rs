//! The per-run state machines: stage sequencing for the multi-agent and
//! two-agent workflows, checkpoint snapshots, and failure classification.
//!
//! One run executes stages one at a time; each successfully executed stage
//! is one transition and writes one snapshot. Faults never unwind: they
//! mark the run failed with a [`FailureReason`] and the record keeps
//! everything produced up to that point. Entering `done` is itself a
//! transition, so a happy-path trace ends with a `done` snapshot carrying
//! the final design state.

mod engine;
mod store;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dsg::DesignState;
use crate::llm::CallLogEntry;

pub use engine::{Engine, RunParams};
pub use store::{RunStore, StorageError};

/// Transition budget per run: a run that has not terminated after this
/// many stage executions is failed with `recursion_limit`.
pub const RECURSION_LIMIT: u32 = 30;

/// Which workflow drives the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Mas,
    TwoAs,
}

impl SystemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SystemKind::Mas => "mas",
            SystemKind::TwoAs => "two_as",
        }
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SystemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mas" => Ok(SystemKind::Mas),
            "two_as" | "2as" => Ok(SystemKind::TwoAs),
            other => Err(format!("unknown system {other:?} (expected mas or two_as)")),
        }
    }
}

/// Every stage a run can occupy. `done` and `failed` are absorbing; only
/// executed stages appear in snapshots, so `failed` never does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Requirements,
    Supervisor,
    Generation,
    Coder,
    Reflection,
    Ranking,
    MetaReview,
    Orchestrator,
    Worker,
    Done,
    Failed,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Requirements => "requirements",
            Stage::Supervisor => "supervisor",
            Stage::Generation => "generation",
            Stage::Coder => "coder",
            Stage::Reflection => "reflection",
            Stage::Ranking => "ranking",
            Stage::MetaReview => "meta_review",
            Stage::Orchestrator => "orchestrator",
            Stage::Worker => "worker",
            Stage::Done => "done",
            Stage::Failed => "failed",
        }
    }
}

/// Why a run failed. `None` is the explicit "did not fail" value so the
/// record always carries a definite answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    None,
    RecursionLimit,
    ContextOverflow,
    SchemaExhausted,
    Transport,
}

impl FailureReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureReason::None => "none",
            FailureReason::RecursionLimit => "recursion_limit",
            FailureReason::ContextOverflow => "context_overflow",
            FailureReason::SchemaExhausted => "schema_exhausted",
            FailureReason::Transport => "transport",
        }
    }
}

/// One checkpoint: wall-clock (or logical) time, the stage just executed,
/// and the accepted design state at that point, if any exists yet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    /// UTC seconds with millisecond precision; non-decreasing within a run.
    pub timestamp: f64,
    pub stage: Stage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design_state: Option<DesignState>,
    pub transition_count: u32,
}

/// The experiment coordinates echoed into every record. `backend` names
/// the gateway kind only; credentials are never echoed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model_id: String,
    pub system: SystemKind,
    pub temperature: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cdc_path: Option<String>,
    pub backend: String,
}

/// Everything one run produced. `completed` implies `failure_reason` is
/// `None` and a final state is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub completed: bool,
    pub failure_reason: FailureReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_detail: Option<String>,
    pub transition_count: u32,
    pub iteration_count: u32,
    #[serde(default)]
    pub warnings: Vec<String>,
    pub snapshots: Vec<Snapshot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_state: Option<DesignState>,
    pub agent_io_log: Vec<CallLogEntry>,
}

/// Snapshot timestamp source. Scripted runs default to the logical clock
/// so every persisted byte is reproducible; live runs use wall time
/// clamped to be non-decreasing.
#[derive(Debug, Clone, Copy)]
pub enum Clock {
    System { last: f64 },
    Logical { next: f64 },
}

impl Clock {
    pub fn system() -> Self {
        Clock::System { last: 0.0 }
    }

    pub fn logical() -> Self {
        Clock::Logical { next: 0.0 }
    }

    pub fn now(&mut self) -> f64 {
        match self {
            Clock::System { last } => {
                let raw = std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs_f64())
                    .unwrap_or(*last);
                let stamp = ((raw * 1000.0).round() / 1000.0).max(*last);
                *last = stamp;
                stamp
            }
            Clock::Logical { next } => {
                let stamp = *next;
                *next += 1.0;
                stamp
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn system_kind_round_trips_through_strings() {
        assert_eq!("mas".parse::<SystemKind>().unwrap(), SystemKind::Mas);
        assert_eq!("two_as".parse::<SystemKind>().unwrap(), SystemKind::TwoAs);
        assert_eq!("2as".parse::<SystemKind>().unwrap(), SystemKind::TwoAs);
        assert!("three_as".parse::<SystemKind>().is_err());
        assert_eq!(
            serde_json::to_string(&SystemKind::TwoAs).unwrap(),
            "\"two_as\""
        );
    }

    #[test]
    fn stage_names_match_their_serde_form() {
        for stage in [
            Stage::Requirements,
            Stage::Supervisor,
            Stage::Generation,
            Stage::Coder,
            Stage::Reflection,
            Stage::Ranking,
            Stage::MetaReview,
            Stage::Orchestrator,
            Stage::Worker,
            Stage::Done,
            Stage::Failed,
        ] {
            let json = serde_json::to_string(&stage).unwrap();
            assert_eq!(json, format!("\"{}\"", stage.name()));
        }
    }

    #[test]
    fn logical_clock_counts_up_from_zero() {
        let mut clock = Clock::logical();
        assert_eq!(clock.now(), 0.0);
        assert_eq!(clock.now(), 1.0);
        assert_eq!(clock.now(), 2.0);
    }

    #[test]
    fn system_clock_is_non_decreasing() {
        let mut clock = Clock::system();
        let mut last = clock.now();
        for _ in 0..100 {
            let next = clock.now();
            assert!(next >= last);
            last = next;
        }
    }
}
