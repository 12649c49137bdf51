//! The typed output family for the agent roles, plus the parsers that
//! locate and validate role replies inside free-form completion text.
//!
//! Every parser returns `Result<T, String>`; the error string is fed back
//! to the model verbatim as the re-prompt in the structured-output retry
//! loop, so messages name the offending field and the expected shape.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use super::extract;

/// Marker prefix on validation errors that must surface as
/// `InvalidSelection` rather than plain schema exhaustion once retries run
/// out.
pub(crate) const INVALID_SELECTION_PREFIX: &str = "selected index out of range:";

/// One functional or non-functional requirement row. `id` tolerates the
/// numeric form the extractor prompt shows and any string form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReqItem {
    #[serde(deserialize_with = "stringish")]
    pub id: String,
    #[serde(default)]
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RequirementsDoc {
    pub project_name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub objectives: Vec<String>,
    #[serde(default)]
    pub functional_requirements: Vec<ReqItem>,
    #[serde(default)]
    pub non_functional_requirements: Vec<ReqItem>,
    #[serde(default, deserialize_with = "stringish_map")]
    pub constraints: BTreeMap<String, String>,
    #[serde(default)]
    pub assumptions: Vec<String>,
    #[serde(default)]
    pub open_questions: Vec<String>,
    /// Set by the extraction loop, never parsed from the reply: true only
    /// once the assistant printed FINALIZED with no open questions left.
    #[serde(default, skip_deserializing)]
    pub finalized: bool,
}

/// The supervisor's verdict: directives for the next iteration and the
/// workflow's only MAS stop signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisorVerdict {
    pub instructions: String,
    #[serde(default)]
    pub stop: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Critique {
    pub proposal_index: usize,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub research_requested: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub proposal_index: usize,
    pub score: f64,
    #[serde(default)]
    pub justification: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankingOutput {
    pub scores: Vec<ScoreEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalStatus {
    Selected,
    Rejected,
    #[serde(alias = "needs iteration")]
    NeedsIteration,
}

impl FinalStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            FinalStatus::Selected => "selected",
            FinalStatus::Rejected => "rejected",
            FinalStatus::NeedsIteration => "needs_iteration",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaDecision {
    pub proposal_index: usize,
    pub final_status: FinalStatus,
    #[serde(default)]
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaReviewOutput {
    pub selected_proposal_index: usize,
    #[serde(default)]
    pub detailed_summary_for_graph: String,
    pub decisions: Vec<MetaDecision>,
}

/// The 2AS reflector reply: critiques plus a machine-readable verdict with
/// the termination bit. Parsed and validated like a meta review.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectorVerdict2as {
    #[serde(default)]
    pub critiques: Vec<Critique>,
    pub selected_index: usize,
    pub statuses: Vec<MetaDecision>,
    #[serde(default)]
    pub terminate: bool,
    #[serde(default)]
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResearchTask {
    pub topic: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResearchPlan {
    #[serde(default)]
    pub tasks: Vec<ResearchTask>,
    #[serde(default)]
    pub response: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkerReport {
    #[serde(default)]
    pub findings: String,
    #[serde(default)]
    pub design_insight: String,
}

/// Candidate reply from a generator that wants external research before
/// proposing designs.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub(crate) struct ResearchSignal {
    pub research_requested: bool,
    #[serde(default)]
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub(crate) struct ReflectionReply {
    pub critiques: Vec<Critique>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub(crate) struct RankerReply {
    pub scores: Vec<ScoreEntry>,
    #[serde(default)]
    pub research_requested: bool,
    #[serde(default)]
    pub question: String,
}

/// Accepts strings, numbers, and booleans where a string is expected;
/// models routinely emit `"id": 1`.
fn stringish<'de, D: Deserializer<'de>>(deserializer: D) -> Result<String, D::Error> {
    let value = Value::deserialize(deserializer)?;
    value_to_string(&value).ok_or_else(|| {
        serde::de::Error::custom(format!("expected a string-like value, got {value}"))
    })
}

fn stringish_map<'de, D: Deserializer<'de>>(
    deserializer: D,
) -> Result<BTreeMap<String, String>, D::Error> {
    let raw: BTreeMap<String, Value> = BTreeMap::deserialize(deserializer)?;
    raw.into_iter()
        .map(|(k, v)| {
            value_to_string(&v).map(|s| (k.clone(), s)).ok_or_else(|| {
                serde::de::Error::custom(format!("constraint {k:?} must be string-like"))
            })
        })
        .collect()
}

fn value_to_string(value: &Value) -> Option<String> {
    match value {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

/// Finds the first JSON candidate in `text` that contains at least one
/// anchor key and deserializes as `T`. Anchors keep all-default types from
/// hoovering up unrelated objects in the reply.
pub(crate) fn first_match<T: DeserializeOwned>(
    text: &str,
    anchors: &[&str],
    label: &str,
) -> Result<T, String> {
    let mut shape_error = None;
    for candidate in extract::json_candidates(text) {
        let Ok(value) = serde_json::from_str::<Value>(&candidate) else {
            continue;
        };
        let Some(object) = value.as_object() else {
            continue;
        };
        if !anchors.iter().any(|key| object.contains_key(*key)) {
            continue;
        }
        match serde_json::from_value::<T>(value) {
            Ok(parsed) => return Ok(parsed),
            Err(e) => shape_error = Some(e.to_string()),
        }
    }
    Err(match shape_error {
        Some(e) => format!("the {label} object failed validation: {e}"),
        None => format!(
            "no JSON object with any of the keys {anchors:?} found; reply with exactly one {label} object"
        ),
    })
}

pub(crate) fn parse_requirements(text: &str) -> Result<RequirementsDoc, String> {
    first_match(text, &["project_name"], "requirements document")
}

pub(crate) fn parse_supervisor(text: &str) -> Result<SupervisorVerdict, String> {
    first_match(text, &["instructions", "stop"], "supervisor verdict")
}

/// One critique per proposal, indices exactly 0..count, sorted.
pub(crate) fn parse_critiques(text: &str, count: usize) -> Result<Vec<Critique>, String> {
    let reply: ReflectionReply = first_match(text, &["critiques"], "critique list")?;
    let mut critiques = reply.critiques;
    check_index_coverage(
        critiques.iter().map(|c| c.proposal_index),
        count,
        "critiques",
    )?;
    critiques.sort_by_key(|c| c.proposal_index);
    Ok(critiques)
}

/// One score per proposal, indices exactly 0..count, sorted. Range
/// clamping happens in the calling operation so it can record a warning.
pub(crate) fn parse_ranking(text: &str, count: usize) -> Result<RankerReply, String> {
    let mut reply: RankerReply = first_match(text, &["scores"], "ranking")?;
    check_index_coverage(
        reply.scores.iter().map(|s| s.proposal_index),
        count,
        "scores",
    )?;
    reply.scores.sort_by_key(|s| s.proposal_index);
    Ok(reply)
}

pub(crate) fn parse_meta_review(text: &str, count: usize) -> Result<MetaReviewOutput, String> {
    let output: MetaReviewOutput = first_match(
        text,
        &["selected_proposal_index", "decisions"],
        "MetaReviewOutput",
    )?;
    validate_selection(
        output.selected_proposal_index,
        &output.decisions,
        count,
        "selected_proposal_index",
    )?;
    Ok(output)
}

pub(crate) fn parse_verdict_2as(text: &str, count: usize) -> Result<ReflectorVerdict2as, String> {
    let verdict: ReflectorVerdict2as = first_match(
        text,
        &["selected_index", "statuses", "terminate"],
        "reflection verdict",
    )?;
    validate_selection(
        verdict.selected_index,
        &verdict.statuses,
        count,
        "selected_index",
    )?;
    for critique in &verdict.critiques {
        if critique.proposal_index >= count {
            return Err(format!(
                "critique refers to proposal {} but only {count} proposals exist",
                critique.proposal_index
            ));
        }
    }
    Ok(verdict)
}

pub(crate) fn parse_research_plan(text: &str) -> Result<ResearchPlan, String> {
    let plan: ResearchPlan = first_match(text, &["tasks", "response"], "research plan")?;
    if plan.tasks.is_empty() && plan.response.trim().is_empty() {
        return Err(
            "the plan has neither tasks nor a direct response; provide one or the other"
                .to_string(),
        );
    }
    Ok(plan)
}

pub(crate) fn parse_worker_report(text: &str) -> Result<WorkerReport, String> {
    let report: WorkerReport = first_match(text, &["findings", "design_insight"], "worker report")?;
    if report.findings.trim().is_empty() && report.design_insight.trim().is_empty() {
        return Err(
            "both findings and design_insight are empty; state at least your \
                    findings or an explicit insufficiency note"
                .to_string(),
        );
    }
    Ok(report)
}

/// Exactly one status is `selected`, it names `selected_index`, and every
/// index is in range. An out-of-range selection gets the marker prefix so
/// exhaustion maps to `InvalidSelection`.
fn validate_selection(
    selected_index: usize,
    decisions: &[MetaDecision],
    count: usize,
    field: &str,
) -> Result<(), String> {
    if decisions.is_empty() {
        return Err("the decision list is empty; give one decision per proposal".to_string());
    }
    if selected_index >= count {
        return Err(format!(
            "{INVALID_SELECTION_PREFIX} {field}={selected_index} but only {count} proposals exist"
        ));
    }
    let selected: Vec<usize> = decisions
        .iter()
        .filter(|d| d.final_status == FinalStatus::Selected)
        .map(|d| d.proposal_index)
        .collect();
    if selected.len() != 1 {
        return Err(format!(
            "exactly one decision must have final_status \"selected\"; found {}",
            selected.len()
        ));
    }
    if selected[0] != selected_index {
        return Err(format!(
            "{field}={selected_index} does not match the decision marked selected ({})",
            selected[0]
        ));
    }
    for decision in decisions {
        if decision.proposal_index >= count {
            return Err(format!(
                "decision refers to proposal {} but only {count} proposals exist",
                decision.proposal_index
            ));
        }
    }
    Ok(())
}

fn check_index_coverage(
    indices: impl Iterator<Item = usize>,
    count: usize,
    what: &str,
) -> Result<(), String> {
    let mut seen = vec![false; count];
    for index in indices {
        if index >= count {
            return Err(format!(
                "{what} refer to proposal {index} but only {count} proposals exist"
            ));
        }
        if seen[index] {
            return Err(format!("{what} list proposal {index} more than once"));
        }
        seen[index] = true;
    }
    if let Some(missing) = seen.iter().position(|covered| !covered) {
        return Err(format!(
            "{what} must cover every proposal; proposal {missing} is missing"
        ));
    }
    Ok(())
}
