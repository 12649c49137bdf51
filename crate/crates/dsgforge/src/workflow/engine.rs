//! The run engine. `step()` executes exactly one stage, writes one
//! checkpoint, and advances the stage pointer; `run_to_completion()` loops
//! until the run is absorbed into `done` or `failed` and assembles the
//! record.

use std::collections::HashSet;

use regex::Regex;

use crate::agents::{
    self, AgentCall, AgentError, AgentRole, Critique, DialogueDriver, Outcome, PromptContext,
    RankingOutput, ReflectorVerdict2as, RequirementsDoc, ResearchTask, ToolsConfig,
};
use crate::dsg::{serialize_design_state, DesignState};
use crate::llm::{LlmClient, GLOBAL_TOKEN_CAP};

use super::{
    Clock, FailureReason, RunConfig, RunRecord, RunStore, Snapshot, Stage, SystemKind,
    RECURSION_LIMIT,
};

/// Everything that parameterizes one run besides the backend itself.
#[derive(Debug, Clone)]
pub struct RunParams {
    pub system: SystemKind,
    pub model_id: String,
    pub temperature: f64,
    pub seed: u64,
    /// The design-challenge document fed to every prompting stage. When it
    /// contains the standalone token FINALIZED the requirements stage is
    /// skipped and the document is used directly.
    pub cdc: String,
    /// Echoed into the record when the CDC came from a file.
    pub cdc_path: Option<String>,
    pub recursion_limit: u32,
    pub max_completion_tokens: u32,
    pub tools: ToolsConfig,
}

impl RunParams {
    pub fn new(
        system: SystemKind,
        model_id: impl Into<String>,
        temperature: f64,
        seed: u64,
        cdc: impl Into<String>,
    ) -> Self {
        RunParams {
            system,
            model_id: model_id.into(),
            temperature,
            seed,
            cdc: cdc.into(),
            cdc_path: None,
            recursion_limit: RECURSION_LIMIT,
            max_completion_tokens: GLOBAL_TOKEN_CAP,
            tools: ToolsConfig::default(),
        }
    }
}

enum Next {
    Goto(Stage),
    Finish,
}

/// One in-flight run. The engine owns all workflow context; agent
/// operations see only the [`PromptContext`] slices they declare.
pub struct Engine<'a> {
    client: &'a LlmClient,
    params: RunParams,
    clock: Clock,
    store: Option<RunStore>,
    driver: Option<Box<dyn DialogueDriver + 'a>>,

    stage: Stage,
    finished: bool,
    completed: bool,
    failure_reason: FailureReason,
    failure_detail: Option<String>,
    transition_count: u32,
    iteration_count: u32,
    snapshots: Vec<Snapshot>,
    warnings: Vec<String>,

    requirements: Option<RequirementsDoc>,
    best_state: Option<DesignState>,
    proposals: Vec<DesignState>,
    critiques: Option<String>,
    ranking: Option<String>,
    supervisor_instructions: Option<String>,
    previous_instructions: Option<String>,
    meta_review_notes: Option<String>,
    reflector_feedback: Option<String>,
    research_findings: Option<String>,
    /// A granted research detour: the question and the stage to resume.
    pending_research: Option<(String, Stage)>,
    plan_tasks: Vec<ResearchTask>,
    plan_response: Option<String>,
    /// Stages that already spent their one detour this iteration.
    detoured: HashSet<Stage>,
}

impl<'a> Engine<'a> {
    pub fn new(client: &'a LlmClient, params: RunParams) -> Self {
        let clock = if client.backend_name() == "scripted" {
            Clock::logical()
        } else {
            Clock::system()
        };
        let stage = if cdc_is_finalized(&params.cdc) {
            first_loop_stage(params.system)
        } else {
            Stage::Requirements
        };
        Engine {
            client,
            params,
            clock,
            store: None,
            driver: None,
            stage,
            finished: false,
            completed: false,
            failure_reason: FailureReason::None,
            failure_detail: None,
            transition_count: 0,
            iteration_count: 0,
            snapshots: Vec::new(),
            warnings: Vec::new(),
            requirements: None,
            best_state: None,
            proposals: Vec::new(),
            critiques: None,
            ranking: None,
            supervisor_instructions: None,
            previous_instructions: None,
            meta_review_notes: None,
            reflector_feedback: None,
            research_findings: None,
            pending_research: None,
            plan_tasks: Vec::new(),
            plan_response: None,
            detoured: HashSet::new(),
        }
    }

    pub fn with_store(mut self, store: RunStore) -> Self {
        self.store = Some(store);
        self
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    /// Supplies the human side of the requirements dialogue. Without one,
    /// a CDC lacking FINALIZED fails the run at the requirements stage.
    pub fn with_driver(mut self, driver: Box<dyn DialogueDriver + 'a>) -> Self {
        self.driver = Some(driver);
        self
    }

    pub fn current_stage(&self) -> Stage {
        self.stage
    }

    pub fn transition_count(&self) -> u32 {
        self.transition_count
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Executes one stage. On success this is one transition: the count
    /// increments, a snapshot is written, and the stage pointer advances;
    /// continuing past the recursion limit fails the run instead. A fault
    /// absorbs the run into `failed` without a snapshot.
    pub fn step(&mut self) {
        if self.finished {
            return;
        }
        match self.execute_stage(self.stage) {
            Ok(next) => {
                self.transition_count += 1;
                let executed = self.stage;
                self.checkpoint(executed);
                if self.finished {
                    return;
                }
                match next {
                    Next::Finish => {
                        self.completed = true;
                        self.finished = true;
                    }
                    Next::Goto(next_stage) => {
                        if self.transition_count >= self.params.recursion_limit {
                            self.fail(
                                FailureReason::RecursionLimit,
                                format!(
                                    "no termination within {} transitions",
                                    self.params.recursion_limit
                                ),
                            );
                        } else {
                            self.stage = next_stage;
                        }
                    }
                }
            }
            Err(error) => self.fail_agent(error),
        }
    }

    pub fn run_to_completion(mut self) -> RunRecord {
        while !self.finished {
            self.step();
        }
        self.into_record()
    }

    fn execute_stage(&mut self, stage: Stage) -> Result<Next, AgentError> {
        match stage {
            Stage::Requirements => self.run_requirements(),
            Stage::Supervisor => self.run_supervisor(),
            Stage::Generation => self.run_generation(),
            Stage::Coder => self.run_coder(),
            Stage::Reflection => match self.params.system {
                SystemKind::Mas => self.run_reflection_mas(),
                SystemKind::TwoAs => self.run_reflection_2as(),
            },
            Stage::Ranking => self.run_ranking(),
            Stage::MetaReview => self.run_meta_review(),
            Stage::Orchestrator => self.run_orchestrator(),
            Stage::Worker => self.run_worker(),
            Stage::Done => Ok(Next::Finish),
            Stage::Failed => unreachable!("failed is absorbing; step() never executes it"),
        }
    }

    fn run_requirements(&mut self) -> Result<Next, AgentError> {
        let mut driver = self.driver.take().ok_or(AgentError::DialogueAborted)?;
        let result = agents::extract_requirements(&self.call(), driver.as_mut());
        self.driver = Some(driver);
        let outcome = result?;
        self.absorb(Stage::Requirements, &outcome);
        self.requirements = Some(outcome.value);
        Ok(Next::Goto(first_loop_stage(self.params.system)))
    }

    fn run_supervisor(&mut self) -> Result<Next, AgentError> {
        let ctx = PromptContext {
            cdc: Some(self.cdc_context()),
            dsg_summary: self.best_state.as_ref().map(agents::summarize_state),
            meta_review_notes: self.meta_review_notes.clone(),
            previous_instructions: self.previous_instructions.clone(),
            ..PromptContext::default()
        };
        let outcome = agents::supervise(&self.call(), &ctx)?;
        self.absorb(Stage::Supervisor, &outcome);
        let verdict = outcome.value;
        self.previous_instructions = Some(verdict.instructions.clone());
        if verdict.stop {
            return Ok(Next::Goto(Stage::Done));
        }
        // The generator requires instructions; an empty continue would
        // strand the run, so substitute a neutral directive (the warning
        // was already recorded by the operation).
        self.supervisor_instructions = if verdict.instructions.trim().is_empty() {
            Some("Continue developing the design against the design challenge.".to_string())
        } else {
            Some(verdict.instructions)
        };
        self.begin_iteration();
        Ok(Next::Goto(Stage::Generation))
    }

    fn run_generation(&mut self) -> Result<Next, AgentError> {
        let role = match self.params.system {
            SystemKind::Mas => AgentRole::Generator,
            SystemKind::TwoAs => {
                // A 2AS iteration is one generation/reflection round; it
                // opens here. MAS iterations open at the supervisor, so a
                // detour re-entry never resets iteration context.
                self.begin_iteration();
                AgentRole::Generator2as
            }
        };
        let ctx = PromptContext {
            supervisor_instructions: self.supervisor_instructions.clone(),
            cdc: Some(self.cdc_context()),
            dsg_summary: self.best_state.as_ref().map(agents::summarize_state),
            meta_review_notes: self.meta_review_notes.clone(),
            reflector_feedback: self.reflector_feedback.clone(),
            research_findings: self.research_findings.clone(),
            ..PromptContext::default()
        };
        let outcome = agents::generate_proposals(&self.call(), role, &ctx)?;
        self.absorb(Stage::Generation, &outcome);
        if let Some(question) = outcome.research_request {
            if self.grant_detour(Stage::Generation, question) {
                return Ok(Next::Goto(Stage::Orchestrator));
            }
            if outcome.value.is_empty() {
                return Err(AgentError::SchemaExhausted {
                    role: "generator",
                    attempts: 1,
                    last_error: "no proposals produced and the research detour is spent"
                        .to_string(),
                });
            }
        }
        self.proposals = outcome.value;
        Ok(Next::Goto(match self.params.system {
            SystemKind::Mas => Stage::Coder,
            SystemKind::TwoAs => Stage::Reflection,
        }))
    }

    fn run_coder(&mut self) -> Result<Next, AgentError> {
        let proposals = std::mem::take(&mut self.proposals);
        let mut refined = Vec::with_capacity(proposals.len());
        for state in &proposals {
            let outcome = agents::refine_code(&self.call(), state)?;
            self.absorb(Stage::Coder, &outcome);
            refined.push(outcome.value);
        }
        self.proposals = refined;
        Ok(Next::Goto(Stage::Reflection))
    }

    fn run_reflection_mas(&mut self) -> Result<Next, AgentError> {
        let ctx = PromptContext {
            supervisor_instructions: self.supervisor_instructions.clone(),
            cdc: Some(self.cdc_context()),
            proposals: Some(self.rendered_proposals()),
            research_findings: self.research_findings.clone(),
            ..PromptContext::default()
        };
        let outcome = agents::reflect(&self.call(), &ctx, self.proposals.len())?;
        self.absorb(Stage::Reflection, &outcome);
        self.critiques = Some(render_critiques(&outcome.value));
        if let Some(question) = outcome.research_request {
            if self.grant_detour(Stage::Reflection, question) {
                return Ok(Next::Goto(Stage::Orchestrator));
            }
        }
        Ok(Next::Goto(Stage::Ranking))
    }

    fn run_reflection_2as(&mut self) -> Result<Next, AgentError> {
        let ctx = PromptContext {
            cdc: Some(self.cdc_context()),
            proposals: Some(self.rendered_proposals()),
            ..PromptContext::default()
        };
        let outcome = agents::reflect_2as(&self.call(), &ctx, self.proposals.len())?;
        self.absorb(Stage::Reflection, &outcome);
        let verdict = outcome.value;
        self.best_state = Some(self.proposals[verdict.selected_index].clone());
        self.reflector_feedback = Some(render_feedback(&verdict));
        if verdict.terminate {
            Ok(Next::Goto(Stage::Done))
        } else {
            Ok(Next::Goto(Stage::Generation))
        }
    }

    fn run_ranking(&mut self) -> Result<Next, AgentError> {
        let ctx = PromptContext {
            supervisor_instructions: self.supervisor_instructions.clone(),
            cdc: Some(self.cdc_context()),
            proposals: Some(self.rendered_proposals()),
            critiques: self.critiques.clone(),
            research_findings: self.research_findings.clone(),
            ..PromptContext::default()
        };
        let outcome = agents::rank(&self.call(), &ctx, self.proposals.len())?;
        self.absorb(Stage::Ranking, &outcome);
        self.ranking = Some(render_ranking(&outcome.value));
        if let Some(question) = outcome.research_request {
            if self.grant_detour(Stage::Ranking, question) {
                return Ok(Next::Goto(Stage::Orchestrator));
            }
        }
        Ok(Next::Goto(Stage::MetaReview))
    }

    fn run_meta_review(&mut self) -> Result<Next, AgentError> {
        let ctx = PromptContext {
            supervisor_instructions: self.supervisor_instructions.clone(),
            cdc: Some(self.cdc_context()),
            proposals: Some(self.rendered_proposals()),
            critiques: self.critiques.clone(),
            ranking: self.ranking.clone(),
            ..PromptContext::default()
        };
        let outcome = agents::meta_review(&self.call(), &ctx, self.proposals.len())?;
        self.absorb(Stage::MetaReview, &outcome);
        let review = outcome.value;
        self.best_state = Some(self.proposals[review.selected_proposal_index].clone());
        if !review.detailed_summary_for_graph.trim().is_empty() {
            self.meta_review_notes = Some(review.detailed_summary_for_graph);
        }
        Ok(Next::Goto(Stage::Supervisor))
    }

    fn run_orchestrator(&mut self) -> Result<Next, AgentError> {
        let Some((question, resume)) = self.pending_research.clone() else {
            return Err(AgentError::MissingContext {
                role: "orchestrator",
                section: "research_request",
            });
        };
        let ctx = PromptContext {
            research_request: Some(question),
            ..PromptContext::default()
        };
        let outcome = agents::orchestrate_research(&self.call(), &ctx)?;
        self.absorb(Stage::Orchestrator, &outcome);
        let plan = outcome.value;
        if plan.tasks.is_empty() {
            self.research_findings = Some(plan.response);
            self.pending_research = None;
            return Ok(Next::Goto(resume));
        }
        self.plan_tasks = plan.tasks;
        self.plan_response = if plan.response.trim().is_empty() {
            None
        } else {
            Some(plan.response)
        };
        Ok(Next::Goto(Stage::Worker))
    }

    fn run_worker(&mut self) -> Result<Next, AgentError> {
        let Some((_, resume)) = self.pending_research.take() else {
            return Err(AgentError::MissingContext {
                role: "worker",
                section: "worker_task",
            });
        };
        let tasks = std::mem::take(&mut self.plan_tasks);
        let mut findings = Vec::new();
        if let Some(direct) = self.plan_response.take() {
            findings.push(direct);
        }
        for task in &tasks {
            let outcome = agents::execute_worker_task(&self.call(), task, &self.params.tools)?;
            self.absorb(Stage::Worker, &outcome);
            findings.push(format!(
                "Task: {}\nFindings: {}\nDesign insight: {}",
                task.topic, outcome.value.findings, outcome.value.design_insight
            ));
        }
        self.research_findings = Some(findings.join("\n\n"));
        Ok(Next::Goto(resume))
    }

    /// Grants at most one orchestrator detour per requesting stage per
    /// iteration; a repeat request is declined with a warning.
    fn grant_detour(&mut self, stage: Stage, question: String) -> bool {
        if self.detoured.contains(&stage) {
            self.warnings.push(format!(
                "{}: repeated research request not honored this iteration",
                stage.name()
            ));
            return false;
        }
        self.detoured.insert(stage);
        self.pending_research = Some((question, stage));
        true
    }

    fn begin_iteration(&mut self) {
        self.iteration_count += 1;
        self.detoured.clear();
        self.research_findings = None;
        self.proposals.clear();
        self.critiques = None;
        self.ranking = None;
    }

    fn checkpoint(&mut self, stage: Stage) {
        let snapshot = Snapshot {
            timestamp: self.clock.now(),
            stage,
            design_state: self.best_state.clone(),
            transition_count: self.transition_count,
        };
        if let Some(store) = &self.store {
            if let Err(e) = store.write_snapshot(&snapshot) {
                self.snapshots.push(snapshot);
                self.fail(FailureReason::Transport, e.to_string());
                return;
            }
        }
        self.snapshots.push(snapshot);
    }

    fn fail(&mut self, reason: FailureReason, detail: String) {
        self.finished = true;
        self.completed = false;
        self.failure_reason = reason;
        self.failure_detail = Some(detail);
        self.stage = Stage::Failed;
    }

    fn fail_agent(&mut self, error: AgentError) {
        let reason = match &error {
            AgentError::Truncated { .. } => FailureReason::ContextOverflow,
            AgentError::Gateway(_) => FailureReason::Transport,
            AgentError::SchemaExhausted { .. }
            | AgentError::InvalidSelection { .. }
            | AgentError::MissingContext { .. }
            | AgentError::Graph(_)
            | AgentError::DialogueAborted => FailureReason::SchemaExhausted,
        };
        self.fail(reason, error.to_string());
    }

    fn absorb<T>(&mut self, stage: Stage, outcome: &Outcome<T>) {
        for warning in &outcome.warnings {
            self.warnings.push(format!("{}: {}", stage.name(), warning));
        }
        if outcome.retries > 0 {
            self.warnings.push(format!(
                "{}: accepted after {} validation re-prompt(s)",
                stage.name(),
                outcome.retries
            ));
        }
    }

    fn call(&self) -> AgentCall<'_> {
        AgentCall {
            client: self.client,
            model_id: &self.params.model_id,
            temperature: self.params.temperature,
            seed: self.params.seed,
            max_completion_tokens: self.params.max_completion_tokens,
        }
    }

    /// What prompting stages see as the design challenge: the extracted
    /// requirements document when the dialogue ran, else the CDC verbatim.
    fn cdc_context(&self) -> String {
        match &self.requirements {
            Some(doc) => serde_json::to_string_pretty(doc).expect("doc serializes"),
            None => self.params.cdc.clone(),
        }
    }

    fn rendered_proposals(&self) -> Vec<String> {
        self.proposals.iter().map(serialize_design_state).collect()
    }

    fn into_record(self) -> RunRecord {
        let mut record = RunRecord {
            config: RunConfig {
                model_id: self.params.model_id,
                system: self.params.system,
                temperature: self.params.temperature,
                seed: self.params.seed,
                cdc_path: self.params.cdc_path,
                backend: self.client.backend_name().to_string(),
            },
            completed: self.completed,
            failure_reason: self.failure_reason,
            failure_detail: self.failure_detail,
            transition_count: self.transition_count,
            iteration_count: self.iteration_count,
            warnings: self.warnings,
            snapshots: self.snapshots,
            final_state: self.best_state,
            agent_io_log: self.client.take_log(),
        };
        if let Some(store) = &self.store {
            if let Err(e) = store.write_log(&record.agent_io_log) {
                record
                    .warnings
                    .push(format!("post-run log write failed: {e}"));
            }
            if let Err(e) = store.write_record(&record) {
                record
                    .warnings
                    .push(format!("post-run record write failed: {e}"));
            }
        }
        record
    }
}

fn cdc_is_finalized(cdc: &str) -> bool {
    Regex::new(r"\bFINALIZED\b")
        .expect("valid pattern")
        .is_match(cdc)
}

fn first_loop_stage(kind: SystemKind) -> Stage {
    match kind {
        SystemKind::Mas => Stage::Supervisor,
        SystemKind::TwoAs => Stage::Generation,
    }
}

fn render_critiques(critiques: &[Critique]) -> String {
    critiques
        .iter()
        .map(|c| format!("Proposal {}: {}", c.proposal_index, c.text))
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_ranking(ranking: &RankingOutput) -> String {
    ranking
        .scores
        .iter()
        .map(|s| {
            let mut line = format!("Proposal {}: score {} of 10", s.proposal_index, s.score);
            if !s.justification.is_empty() {
                line.push_str(&format!(" ({})", s.justification));
            }
            line
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_feedback(verdict: &ReflectorVerdict2as) -> String {
    let mut lines = Vec::new();
    for critique in &verdict.critiques {
        lines.push(format!(
            "Proposal {}: {}",
            critique.proposal_index, critique.text
        ));
    }
    for status in &verdict.statuses {
        let mut line = format!(
            "Proposal {} status: {}",
            status.proposal_index,
            status.final_status.as_str()
        );
        if !status.reason.trim().is_empty() {
            line.push_str(&format!(" ({})", status.reason));
        }
        lines.push(line);
    }
    if !verdict.reason.trim().is_empty() {
        lines.push(format!("Reviewer reasoning: {}", verdict.reason));
    }
    lines.join("\n")
}
