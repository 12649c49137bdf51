//! One function per agent role: assemble the prompt, run the structured
//! retry loop, validate, and return an [`Outcome`] the workflow can act on
//! without ever seeing raw completion text.

use serde_json::Value;

use crate::dsg::{self, DesignState, NodePatch};
use crate::llm::ChatMessage;

use super::outputs::{self, ResearchSignal};
use super::{
    arxiv, assemble_prompt, extract, AgentCall, AgentError, AgentRole, CoderInput,
    MetaReviewOutput, Outcome, PromptContext, RankingOutput, ReflectorVerdict2as, RequirementsDoc,
    ResearchPlan, ResearchTask, SupervisorVerdict, ToolsConfig, WorkerReport,
};

/// Supplies the human side of the requirements dialogue. `None` ends the
/// conversation (stdin closed, script exhausted).
pub trait DialogueDriver {
    fn next_user_turn(&mut self, last_assistant: Option<&str>) -> Option<String>;
}

/// Replays a fixed list of user turns; the standard driver for tests and
/// batch runs.
#[derive(Debug, Clone)]
pub struct ScriptedDialogue {
    turns: std::collections::VecDeque<String>,
}

impl ScriptedDialogue {
    pub fn new(turns: Vec<String>) -> Self {
        ScriptedDialogue {
            turns: turns.into(),
        }
    }
}

impl DialogueDriver for ScriptedDialogue {
    fn next_user_turn(&mut self, _last_assistant: Option<&str>) -> Option<String> {
        self.turns.pop_front()
    }
}

/// Runs the structured loop for one role over an assembled prompt.
fn call_structured<T>(
    call: &AgentCall,
    role: AgentRole,
    ctx: &PromptContext,
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<crate::llm::Structured<T>, AgentError> {
    let messages = assemble_prompt(role, ctx)?;
    let request = call.request(role, messages);
    call.client
        .complete_structured(&request, parse)
        .map_err(|e| AgentError::from_structured(role.tag(), e))
}

/// Drives the requirements dialogue until the assistant prints FINALIZED
/// with no open questions left. Every accepted assistant reply joins the
/// history; in-loop validation retries do not.
pub fn extract_requirements(
    call: &AgentCall,
    driver: &mut dyn DialogueDriver,
) -> Result<Outcome<RequirementsDoc>, AgentError> {
    let role = AgentRole::Extractor;
    let mut history = vec![ChatMessage::system(role.system_prompt())];
    let mut last_assistant: Option<String> = None;
    let mut warnings = Vec::new();
    let mut retries = 0;

    loop {
        let Some(turn) = driver.next_user_turn(last_assistant.as_deref()) else {
            return Err(AgentError::DialogueAborted);
        };
        history.push(ChatMessage::user(turn));
        let request = call.request(role, history.clone());
        let structured = call
            .client
            .complete_structured(&request, outputs::parse_requirements)
            .map_err(|e| AgentError::from_structured(role.tag(), e))?;
        retries += structured.retries;
        history.push(ChatMessage::assistant(structured.raw.clone()));

        if structured.raw.contains("FINALIZED") {
            if structured.value.open_questions.is_empty() {
                let mut doc = structured.value;
                doc.finalized = true;
                let mut outcome = Outcome::new(doc, retries);
                outcome.warnings = warnings;
                return Ok(outcome);
            }
            warnings.push(format!(
                "extractor printed FINALIZED with {} open question(s) remaining; continuing",
                structured.value.open_questions.len()
            ));
        }
        last_assistant = Some(structured.raw);
    }
}

pub fn supervise(
    call: &AgentCall,
    ctx: &PromptContext,
) -> Result<Outcome<SupervisorVerdict>, AgentError> {
    let structured = call_structured(call, AgentRole::Supervisor, ctx, outputs::parse_supervisor)?;
    let mut outcome = Outcome::new(structured.value, structured.retries);
    if outcome.value.instructions.trim().is_empty() && !outcome.value.stop {
        outcome
            .warnings
            .push("supervisor continued without instructions".to_string());
    }
    Ok(outcome)
}

enum GenerationReply {
    Proposals(Vec<DesignState>),
    Research(String),
}

/// Runs a generator (either workflow) and parses up to three design-state
/// documents out of the reply. A MAS generator may instead hand back a
/// research request; the 2AS generator has no orchestrator to serve one,
/// so there the escape is re-prompted away like any other bad reply.
pub fn generate_proposals(
    call: &AgentCall,
    role: AgentRole,
    ctx: &PromptContext,
) -> Result<Outcome<Vec<DesignState>>, AgentError> {
    debug_assert!(matches!(
        role,
        AgentRole::Generator | AgentRole::Generator2as
    ));
    let allow_research = role == AgentRole::Generator;

    let parse = |text: &str| -> Result<GenerationReply, String> {
        if let Ok(signal) = outputs::first_match::<ResearchSignal>(
            text,
            &["research_requested"],
            "research request",
        ) {
            if signal.research_requested {
                if allow_research {
                    return Ok(GenerationReply::Research(signal.question));
                }
                return Err("external research is not available here; propose designs \
                            from the given context"
                    .to_string());
            }
        }
        let mut states = Vec::new();
        let mut first_error = None;
        for candidate in extract::json_candidates(text) {
            let Ok(value) = serde_json::from_str::<Value>(&candidate) else {
                continue;
            };
            if !value.as_object().is_some_and(|o| o.contains_key("nodes")) {
                continue;
            }
            match dsg::design_state_from_value(value) {
                Ok(state) => states.push(state),
                Err(e) => {
                    if first_error.is_none() {
                        first_error = Some(e.to_string());
                    }
                }
            }
        }
        if states.is_empty() {
            return Err(match first_error {
                Some(e) => format!("a design-state document failed validation: {e}"),
                None => "no design-state documents found; reply with one to three fenced \
                         JSON objects, each with nodes and edges"
                    .to_string(),
            });
        }
        Ok(GenerationReply::Proposals(states))
    };

    let structured = call_structured(call, role, ctx, parse)?;
    match structured.value {
        GenerationReply::Research(question) => {
            let mut outcome = Outcome::new(Vec::new(), structured.retries);
            if question.trim().is_empty() {
                outcome
                    .warnings
                    .push("generator requested research without a question".to_string());
                outcome.research_request = Some("unspecified research request".to_string());
            } else {
                outcome.research_request = Some(question);
            }
            Ok(outcome)
        }
        GenerationReply::Proposals(mut states) => {
            let mut outcome = Outcome::new(Vec::new(), structured.retries);
            if states.len() > 3 {
                outcome.warnings.push(format!(
                    "generator returned {} proposals; keeping the first three",
                    states.len()
                ));
                states.truncate(3);
            } else if states.len() < 3 {
                outcome.warnings.push(format!(
                    "generator returned {} proposal(s) where three were expected",
                    states.len()
                ));
            }
            outcome.value = states;
            Ok(outcome)
        }
    }
}

/// Sends every physics model in the state through the coder, node by node
/// in key order, models in list order. A model whose revision never
/// validates keeps its current code under a warning; truncation and
/// transport failures abort the pass.
pub fn refine_code(
    call: &AgentCall,
    state: &DesignState,
) -> Result<Outcome<DesignState>, AgentError> {
    let mut revised = state.clone();
    let mut warnings = Vec::new();
    let mut retries = 0;

    let node_ids: Vec<String> = state.nodes.keys().cloned().collect();
    for node_id in node_ids {
        let node = &state.nodes[&node_id];
        for (model_index, model) in node.physics_models.iter().enumerate() {
            let ctx = PromptContext {
                coder_input: Some(CoderInput {
                    node_name: if node.name.is_empty() {
                        node_id.clone()
                    } else {
                        node.name.clone()
                    },
                    model_index,
                    equation: model.equation.clone(),
                    assumptions: model.assumptions.clone(),
                    current_code: model.code.clone(),
                }),
                ..PromptContext::default()
            };
            match call_structured(call, AgentRole::Coder, &ctx, |text| {
                extract::python_block(text)
            }) {
                Ok(structured) => {
                    retries += structured.retries;
                    let patch = NodePatch::replace_code(model_index, structured.value);
                    revised = dsg::mutate_subtree(&revised, &node_id, &patch)?;
                }
                Err(AgentError::SchemaExhausted { last_error, .. }) => {
                    warnings.push(format!(
                        "coder could not revise model {model_index} of node {node_id}; \
                         keeping existing code ({last_error})"
                    ));
                }
                Err(other) => return Err(other),
            }
        }
    }

    let mut outcome = Outcome::new(revised, retries);
    outcome.warnings = warnings;
    Ok(outcome)
}

/// Runs the MAS reflector over the current proposals. Critiques flagged
/// `research_requested` surface as one combined research request.
pub fn reflect(
    call: &AgentCall,
    ctx: &PromptContext,
    proposal_count: usize,
) -> Result<Outcome<Vec<outputs::Critique>>, AgentError> {
    let structured = call_structured(call, AgentRole::Reflector, ctx, |text| {
        outputs::parse_critiques(text, proposal_count)
    })?;
    let mut outcome = Outcome::new(structured.value, structured.retries);
    let requests: Vec<String> = outcome
        .value
        .iter()
        .filter(|c| c.research_requested)
        .map(|c| format!("Proposal {}: {}", c.proposal_index, c.text))
        .collect();
    if !requests.is_empty() {
        outcome.research_request = Some(requests.join("\n"));
    }
    Ok(outcome)
}

pub fn rank(
    call: &AgentCall,
    ctx: &PromptContext,
    proposal_count: usize,
) -> Result<Outcome<RankingOutput>, AgentError> {
    let structured = call_structured(call, AgentRole::Ranker, ctx, |text| {
        outputs::parse_ranking(text, proposal_count)
    })?;
    let reply = structured.value;
    let mut outcome = Outcome::new(
        RankingOutput {
            scores: reply.scores,
        },
        structured.retries,
    );
    for entry in &mut outcome.value.scores {
        if !(0.0..=10.0).contains(&entry.score) {
            outcome.warnings.push(format!(
                "score {} for proposal {} clamped into 0..10",
                entry.score, entry.proposal_index
            ));
            entry.score = entry.score.clamp(0.0, 10.0);
        }
    }
    if reply.research_requested {
        outcome.research_request = Some(if reply.question.trim().is_empty() {
            "unspecified research request".to_string()
        } else {
            reply.question
        });
    }
    Ok(outcome)
}

pub fn meta_review(
    call: &AgentCall,
    ctx: &PromptContext,
    proposal_count: usize,
) -> Result<Outcome<MetaReviewOutput>, AgentError> {
    let structured = call_structured(call, AgentRole::MetaReviewer, ctx, |text| {
        outputs::parse_meta_review(text, proposal_count)
    })?;
    let mut outcome = Outcome::new(structured.value, structured.retries);
    if outcome.value.detailed_summary_for_graph.trim().is_empty() {
        outcome
            .warnings
            .push("meta-reviewer gave no improvement summary".to_string());
    }
    Ok(outcome)
}

pub fn reflect_2as(
    call: &AgentCall,
    ctx: &PromptContext,
    proposal_count: usize,
) -> Result<Outcome<ReflectorVerdict2as>, AgentError> {
    let structured = call_structured(call, AgentRole::Reflector2as, ctx, |text| {
        outputs::parse_verdict_2as(text, proposal_count)
    })?;
    Ok(Outcome::new(structured.value, structured.retries))
}

/// Turns a research request into a task list (at most three tasks kept) or
/// a direct response.
pub fn orchestrate_research(
    call: &AgentCall,
    ctx: &PromptContext,
) -> Result<Outcome<ResearchPlan>, AgentError> {
    let structured = call_structured(
        call,
        AgentRole::Orchestrator,
        ctx,
        outputs::parse_research_plan,
    )?;
    let mut outcome = Outcome::new(structured.value, structured.retries);
    if outcome.value.tasks.len() > 3 {
        outcome.warnings.push(format!(
            "orchestrator planned {} tasks; keeping the first three",
            outcome.value.tasks.len()
        ));
        outcome.value.tasks.truncate(3);
    }
    Ok(outcome)
}

/// Runs the tools for one research task and asks the worker to digest the
/// results. Tool failures degrade in-band: the worker sees a limitation
/// note instead of results and reports accordingly.
pub fn execute_worker_task(
    call: &AgentCall,
    task: &ResearchTask,
    tools: &ToolsConfig,
) -> Result<Outcome<WorkerReport>, AgentError> {
    let query = if task.topic.trim().is_empty() {
        task.description.clone()
    } else {
        task.topic.clone()
    };
    let literature = match arxiv::search(tools, &query) {
        Ok(entries) if entries.is_empty() => "Literature search returned no results.".to_string(),
        Ok(entries) => format!(
            "Literature search results:\n{}",
            arxiv::render_entries(&entries)
        ),
        Err(note) => format!("Literature search unavailable: {note}"),
    };
    let web = if tools.web_search_enabled {
        "Web search returned no additional results for this task."
    } else {
        "Web search is not available in this run."
    };

    let worker_task = if task.description.trim().is_empty() {
        task.topic.clone()
    } else {
        format!("{}\n\n{}", task.topic, task.description)
    };
    let ctx = PromptContext {
        worker_task: Some(worker_task),
        tool_results: Some(format!("{literature}\n\n{web}")),
        ..PromptContext::default()
    };
    let structured = call_structured(call, AgentRole::Worker, &ctx, outputs::parse_worker_report)?;
    Ok(Outcome::new(structured.value, structured.retries))
}
