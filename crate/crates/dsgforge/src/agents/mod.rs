//! The agent roles: prompt assembly, typed outputs, and the operations
//! that drive each role through the gateway.
//!
//! A role is a system prompt bundled at compile time plus an ordered list
//! of context sections rendered as user messages. The operations in
//! [`ops`] pair each role with a parser from [`outputs`] and run the
//! structured-output retry loop; the workflow engine never touches raw
//! completion text.

pub mod arxiv;
mod extract;
mod ops;
mod outputs;

use thiserror::Error;

use crate::dsg::DesignState;
use crate::llm::{ChatMessage, CompletionRequest, GatewayError, LlmClient, StructuredError};

pub use arxiv::{ArxivEntry, ArxivTool, ToolsConfig, ARXIV_API_BASE};
pub use ops::{
    execute_worker_task, extract_requirements, generate_proposals, meta_review,
    orchestrate_research, rank, refine_code, reflect, reflect_2as, supervise, DialogueDriver,
    ScriptedDialogue,
};
pub use outputs::{
    Critique, FinalStatus, MetaDecision, MetaReviewOutput, RankingOutput, ReflectorVerdict2as,
    ReqItem, RequirementsDoc, ResearchPlan, ResearchTask, ScoreEntry, SupervisorVerdict,
    WorkerReport,
};

/// Every role in the system. The multi-agent workflow uses the first nine;
/// the two-agent workflow uses the `2as` pair plus the shared extractor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgentRole {
    Extractor,
    Supervisor,
    Generator,
    Coder,
    Reflector,
    Ranker,
    MetaReviewer,
    Orchestrator,
    Worker,
    Generator2as,
    Reflector2as,
}

impl AgentRole {
    /// Stable identifier used for log entries and scripted-table keys.
    pub fn tag(self) -> &'static str {
        match self {
            AgentRole::Extractor => "extractor",
            AgentRole::Supervisor => "supervisor",
            AgentRole::Generator => "generator",
            AgentRole::Coder => "coder",
            AgentRole::Reflector => "reflector",
            AgentRole::Ranker => "ranker",
            AgentRole::MetaReviewer => "meta_reviewer",
            AgentRole::Orchestrator => "orchestrator",
            AgentRole::Worker => "worker",
            AgentRole::Generator2as => "generator_2as",
            AgentRole::Reflector2as => "reflector_2as",
        }
    }

    /// The role's system prompt, bundled into the binary verbatim.
    pub fn system_prompt(self) -> &'static str {
        match self {
            AgentRole::Extractor => include_str!("../../assets/prompts/extractor.txt"),
            AgentRole::Supervisor => include_str!("../../assets/prompts/supervisor.txt"),
            AgentRole::Generator => include_str!("../../assets/prompts/generator_mas.txt"),
            AgentRole::Coder => include_str!("../../assets/prompts/coder.txt"),
            AgentRole::Reflector => include_str!("../../assets/prompts/reflector_mas.txt"),
            AgentRole::Ranker => include_str!("../../assets/prompts/ranker.txt"),
            AgentRole::MetaReviewer => include_str!("../../assets/prompts/meta_reviewer.txt"),
            AgentRole::Orchestrator => include_str!("../../assets/prompts/orchestrator.txt"),
            AgentRole::Worker => include_str!("../../assets/prompts/worker.txt"),
            AgentRole::Generator2as => include_str!("../../assets/prompts/generator_2as.txt"),
            AgentRole::Reflector2as => include_str!("../../assets/prompts/reflector_2as.txt"),
        }
    }
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("{role} prompt is missing required context section {section:?}")]
    MissingContext {
        role: &'static str,
        section: &'static str,
    },
    #[error("{role} reply failed validation after {attempts} attempts: {last_error}")]
    SchemaExhausted {
        role: &'static str,
        attempts: u32,
        last_error: String,
    },
    #[error("{role} made an invalid selection: {detail}")]
    InvalidSelection { role: &'static str, detail: String },
    #[error("{role} reply was cut off at {completion_tokens} completion tokens")]
    Truncated {
        role: &'static str,
        completion_tokens: u64,
    },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Graph(#[from] crate::dsg::DsgError),
    #[error("requirements dialogue ended before the document was finalized")]
    DialogueAborted,
}

impl AgentError {
    /// Attaches the role to a structured-output failure. Exhaustion whose
    /// final complaint was an out-of-range selection becomes
    /// `InvalidSelection`; the workflow reports it distinctly.
    pub(crate) fn from_structured(role: &'static str, err: StructuredError) -> Self {
        match err {
            StructuredError::SchemaExhausted {
                attempts,
                last_error,
            } => {
                if last_error.starts_with(outputs::INVALID_SELECTION_PREFIX) {
                    AgentError::InvalidSelection {
                        role,
                        detail: last_error,
                    }
                } else {
                    AgentError::SchemaExhausted {
                        role,
                        attempts,
                        last_error,
                    }
                }
            }
            StructuredError::Truncated { completion_tokens } => AgentError::Truncated {
                role,
                completion_tokens,
            },
            StructuredError::Gateway(g) => AgentError::Gateway(g),
        }
    }
}

/// A validated agent result plus everything the workflow wants to know
/// about how it went.
#[derive(Debug, Clone)]
pub struct Outcome<T> {
    pub value: T,
    /// Non-fatal oddities: wrong proposal counts, clamped scores, prompts
    /// while open questions remain. Recorded in the run log.
    pub warnings: Vec<String>,
    /// Set when the agent asked for external research instead of (or on
    /// top of) its normal output.
    pub research_request: Option<String>,
    /// Re-prompts the gateway needed before the reply validated.
    pub retries: u32,
}

impl<T> Outcome<T> {
    fn new(value: T, retries: u32) -> Self {
        Outcome {
            value,
            warnings: Vec::new(),
            research_request: None,
            retries,
        }
    }
}

/// Per-call settings the workflow threads through every operation.
#[derive(Clone, Copy)]
pub struct AgentCall<'a> {
    pub client: &'a LlmClient,
    pub model_id: &'a str,
    pub temperature: f64,
    pub seed: u64,
    pub max_completion_tokens: u32,
}

impl AgentCall<'_> {
    pub(crate) fn request(&self, role: AgentRole, messages: Vec<ChatMessage>) -> CompletionRequest {
        let mut request = CompletionRequest::new(self.model_id, role.tag(), messages);
        request.temperature = self.temperature;
        request.seed = self.seed;
        request.max_completion_tokens = self.max_completion_tokens;
        request.output_schema = reply_contract(role).map(str::to_string);
        request
    }
}

/// Everything a prompt section can draw on. The workflow fills in what the
/// current stage knows; `assemble_prompt` checks that the role's required
/// sections are present.
#[derive(Debug, Clone, Default)]
pub struct PromptContext {
    pub cdc: Option<String>,
    pub dsg_summary: Option<String>,
    pub supervisor_instructions: Option<String>,
    pub previous_instructions: Option<String>,
    pub meta_review_notes: Option<String>,
    /// Canonical serializations of the current proposals, index order.
    pub proposals: Option<Vec<String>>,
    pub critiques: Option<String>,
    pub ranking: Option<String>,
    pub research_findings: Option<String>,
    pub reflector_feedback: Option<String>,
    pub coder_input: Option<CoderInput>,
    pub research_request: Option<String>,
    pub worker_task: Option<String>,
    pub tool_results: Option<String>,
}

/// The one physics model a coder call revises.
#[derive(Debug, Clone, Default)]
pub struct CoderInput {
    pub node_name: String,
    pub model_index: usize,
    pub equation: String,
    pub assumptions: Vec<String>,
    pub current_code: String,
}

/// Builds the message list for one agent call: the bundled system prompt,
/// then one user message per context section in the role's fixed order,
/// with the reply contract appended to the final user message.
pub fn assemble_prompt(
    role: AgentRole,
    ctx: &PromptContext,
) -> Result<Vec<ChatMessage>, AgentError> {
    let tag = role.tag();
    let mut sections: Vec<(&'static str, String)> = Vec::new();

    match role {
        AgentRole::Extractor => {
            // Dialogue-driven: the extraction loop supplies user turns.
        }
        AgentRole::Supervisor => {
            push_optional(&mut sections, "Current design state", &ctx.dsg_summary);
            sections.push(("Design challenge", required(tag, "cdc", &ctx.cdc)?));
            push_optional(&mut sections, "Meta-review notes", &ctx.meta_review_notes);
            push_optional(
                &mut sections,
                "Your previous instructions",
                &ctx.previous_instructions,
            );
        }
        AgentRole::Generator => {
            sections.push((
                "Supervisor instructions",
                required(tag, "supervisor_instructions", &ctx.supervisor_instructions)?,
            ));
            sections.push(("Design challenge", required(tag, "cdc", &ctx.cdc)?));
            push_optional(&mut sections, "Current design state", &ctx.dsg_summary);
            push_optional(&mut sections, "Meta-review notes", &ctx.meta_review_notes);
            push_optional(&mut sections, "Research findings", &ctx.research_findings);
        }
        AgentRole::Generator2as => {
            sections.push(("Design challenge", required(tag, "cdc", &ctx.cdc)?));
            push_optional(&mut sections, "Current design state", &ctx.dsg_summary);
            push_optional(&mut sections, "Reflector feedback", &ctx.reflector_feedback);
            push_optional(&mut sections, "Research findings", &ctx.research_findings);
        }
        AgentRole::Coder => {
            let input = ctx.coder_input.as_ref().ok_or(AgentError::MissingContext {
                role: tag,
                section: "coder_input",
            })?;
            sections.push(("Task", render_coder_task(input)));
        }
        AgentRole::Reflector => {
            sections.push((
                "Supervisor instructions",
                required(tag, "supervisor_instructions", &ctx.supervisor_instructions)?,
            ));
            sections.push(("Design challenge", required(tag, "cdc", &ctx.cdc)?));
            sections.push(("Design proposals", render_proposals(tag, &ctx.proposals)?));
            push_optional(&mut sections, "Research findings", &ctx.research_findings);
        }
        AgentRole::Reflector2as => {
            sections.push(("Design challenge", required(tag, "cdc", &ctx.cdc)?));
            sections.push(("Design proposals", render_proposals(tag, &ctx.proposals)?));
        }
        AgentRole::Ranker => {
            push_optional(
                &mut sections,
                "Supervisor instructions",
                &ctx.supervisor_instructions,
            );
            sections.push(("Design challenge", required(tag, "cdc", &ctx.cdc)?));
            sections.push(("Design proposals", render_proposals(tag, &ctx.proposals)?));
            sections.push(("Critiques", required(tag, "critiques", &ctx.critiques)?));
            push_optional(&mut sections, "Research findings", &ctx.research_findings);
        }
        AgentRole::MetaReviewer => {
            push_optional(
                &mut sections,
                "Supervisor instructions",
                &ctx.supervisor_instructions,
            );
            sections.push(("Design challenge", required(tag, "cdc", &ctx.cdc)?));
            sections.push(("Design proposals", render_proposals(tag, &ctx.proposals)?));
            sections.push(("Critiques", required(tag, "critiques", &ctx.critiques)?));
            sections.push(("Ranking", required(tag, "ranking", &ctx.ranking)?));
        }
        AgentRole::Orchestrator => {
            sections.push((
                "Research request",
                required(tag, "research_request", &ctx.research_request)?,
            ));
        }
        AgentRole::Worker => {
            sections.push((
                "Research task",
                required(tag, "worker_task", &ctx.worker_task)?,
            ));
            push_optional(&mut sections, "Tool results", &ctx.tool_results);
        }
    }

    let mut messages = vec![ChatMessage::system(role.system_prompt())];
    for (title, body) in sections {
        messages.push(ChatMessage::user(format!("## {title}\n\n{body}")));
    }
    if let Some(contract) = reply_contract(role) {
        match messages.last_mut() {
            Some(last) if last.role == crate::llm::ChatRole::User => {
                last.content.push_str("\n\n");
                last.content.push_str(contract);
            }
            _ => messages.push(ChatMessage::user(contract.to_string())),
        }
    }
    Ok(messages)
}

/// The machine-readable reply shape, restated at the end of every prompt.
/// The extractor's contract lives in its system prompt, so it has none.
fn reply_contract(role: AgentRole) -> Option<&'static str> {
    match role {
        AgentRole::Extractor => None,
        AgentRole::Supervisor => Some(
            "Reply with exactly one JSON object: {\"instructions\": \"<directives for this \
             iteration>\", \"stop\": <true only when the design is complete>}.",
        ),
        AgentRole::Generator => Some(
            "Reply with one fenced ```json block per proposed design state (at most three). \
             Each document is an object with \"nodes\" (an object keyed by UUID, each node \
             carrying node_kind, name, description, embodiment, physics_models, linked_reqs, \
             verification_plan, maturity, tags) and \"edges\" (an array of [source, target] \
             UUID pairs). If you need external research before proposing, reply instead with \
             {\"research_requested\": true, \"question\": \"<what to investigate>\"}.",
        ),
        AgentRole::Generator2as => Some(
            "Reply with one fenced ```json block per proposed design state (at most three). \
             Each document is an object with \"nodes\" (an object keyed by UUID, each node \
             carrying node_kind, name, description, embodiment, physics_models, linked_reqs, \
             verification_plan, maturity, tags) and \"edges\" (an array of [source, target] \
             UUID pairs).",
        ),
        AgentRole::Coder => Some(
            "Reply with exactly one fenced ```python block containing the complete revised \
             script.",
        ),
        AgentRole::Reflector => Some(
            "Reply with exactly one JSON object: {\"critiques\": [{\"proposal_index\": \
             <0-based index>, \"text\": \"<critique>\", \"research_requested\": <optional \
             bool>}, ...]} with exactly one critique per proposal.",
        ),
        AgentRole::Ranker => Some(
            "Reply with exactly one JSON object: {\"scores\": [{\"proposal_index\": <0-based \
             index>, \"score\": <0 to 10>, \"justification\": \"<reason>\"}, ...]} scoring \
             every proposal exactly once. To request external research add \
             \"research_requested\": true and \"question\": \"<what to investigate>\".",
        ),
        AgentRole::MetaReviewer => Some(
            "Reply with exactly one JSON object: {\"selected_proposal_index\": <0-based \
             index>, \"detailed_summary_for_graph\": \"<improvement directions for the next \
             iteration>\", \"decisions\": [{\"proposal_index\": <0-based index>, \
             \"final_status\": \"selected\" | \"rejected\" | \"needs_iteration\", \"reason\": \
             \"<reason>\"}, ...]} with exactly one decision per proposal and exactly one \
             marked selected.",
        ),
        AgentRole::Orchestrator => Some(
            "Reply with exactly one JSON object: {\"tasks\": [{\"topic\": \"<search topic>\", \
             \"description\": \"<what the worker should establish>\"}, ...], \"response\": \
             \"<direct answer if no research is needed>\"}. List at most three tasks; leave \
             tasks empty when the response alone settles the request.",
        ),
        AgentRole::Worker => Some(
            "Reply with exactly one JSON object: {\"findings\": \"<what the sources \
             establish>\", \"design_insight\": \"<how it bears on the design>\"}. If the \
             available tools cannot answer the task, say so explicitly in findings.",
        ),
        AgentRole::Reflector2as => Some(
            "Reply with exactly one JSON object: {\"critiques\": [{\"proposal_index\": \
             <0-based index>, \"text\": \"<critique>\"}, ...], \"selected_index\": <0-based \
             index of the best proposal>, \"statuses\": [{\"proposal_index\": <0-based \
             index>, \"final_status\": \"selected\" | \"rejected\" | \"needs_iteration\", \
             \"reason\": \"<reason>\"}, ...], \"terminate\": <true only when the selected \
             design fully answers the challenge>, \"reason\": \"<termination reasoning>\"} \
             with exactly one status per proposal and exactly one marked selected.",
        ),
    }
}

fn push_optional(
    sections: &mut Vec<(&'static str, String)>,
    title: &'static str,
    field: &Option<String>,
) {
    if let Some(body) = field {
        if !body.trim().is_empty() {
            sections.push((title, body.clone()));
        }
    }
}

fn required(
    role: &'static str,
    section: &'static str,
    field: &Option<String>,
) -> Result<String, AgentError> {
    match field {
        Some(body) if !body.trim().is_empty() => Ok(body.clone()),
        _ => Err(AgentError::MissingContext { role, section }),
    }
}

fn render_proposals(
    role: &'static str,
    proposals: &Option<Vec<String>>,
) -> Result<String, AgentError> {
    let list = match proposals {
        Some(list) if !list.is_empty() => list,
        _ => {
            return Err(AgentError::MissingContext {
                role,
                section: "proposals",
            })
        }
    };
    let mut out = String::new();
    for (index, body) in list.iter().enumerate() {
        if index > 0 {
            out.push_str("\n\n");
        }
        out.push_str(&format!("### Proposal index {index}\n\n{body}"));
    }
    Ok(out)
}

fn render_coder_task(input: &CoderInput) -> String {
    let mut out = format!(
        "Revise physics model {} of node {:?}.\n\nEquation:\n{}\n",
        input.model_index, input.node_name, input.equation
    );
    if !input.assumptions.is_empty() {
        out.push_str("\nAssumptions:\n");
        for assumption in &input.assumptions {
            out.push_str(&format!("- {assumption}\n"));
        }
    }
    out.push_str(&format!(
        "\nCurrent code:\n```python\n{}\n```",
        input.current_code
    ));
    out
}

/// Deterministic plain-text digest of a design state for prompt context.
/// Nodes render in key order; edges in stored order.
pub fn summarize_state(state: &DesignState) -> String {
    if state.nodes.is_empty() {
        return "The design state is empty.".to_string();
    }
    let mut out = format!(
        "Design state: {} node(s), {} edge(s).\n",
        state.nodes.len(),
        state.edges.len()
    );
    for (id, node) in &state.nodes {
        let name = if node.name.is_empty() { id } else { &node.name };
        out.push_str(&format!("\n[{id}] {name}"));
        if !node.node_kind.is_empty() {
            out.push_str(&format!(" ({})", node.node_kind));
        }
        out.push('\n');
        if !node.description.is_empty() {
            out.push_str(&format!("  {}\n", node.description));
        }
        if let Some(embodiment) = &node.embodiment {
            if !embodiment.principle.is_empty() {
                out.push_str(&format!("  embodiment: {}\n", embodiment.principle));
            }
            if !embodiment.design_parameters.is_empty() {
                let params: Vec<String> = embodiment
                    .design_parameters
                    .iter()
                    .map(|(k, p)| format!("{k}={} {}", p.value, p.unit))
                    .collect();
                out.push_str(&format!("  parameters: {}\n", params.join(", ")));
            }
        }
        if !node.physics_models.is_empty() {
            out.push_str(&format!(
                "  physics models: {}\n",
                node.physics_models.len()
            ));
        }
        if !node.linked_reqs.is_empty() {
            out.push_str(&format!("  linked reqs: {}\n", node.linked_reqs.join(", ")));
        }
    }
    if !state.edges.is_empty() {
        out.push_str("\nedges:\n");
        for edge in &state.edges {
            let label = |id: &str| {
                state
                    .nodes
                    .get(id)
                    .filter(|n| !n.name.is_empty())
                    .map(|n| n.name.clone())
                    .unwrap_or_else(|| id.to_string())
            };
            out.push_str(&format!(
                "  {} -> {}\n",
                label(&edge.source),
                label(&edge.target)
            ));
        }
    }
    out
}
