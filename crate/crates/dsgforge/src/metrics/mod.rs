//! The level-1 evaluation metrics over run records and final design
//! states, plus per-condition aggregation and the summary CSV.
//!
//! M1 parse validity, M2 requirement coverage, M3 embodiment presence and
//! M7 graph size are pure functions of the data. M4 code executability
//! shells out to an interpreter (see [`exec`]). M5 run completion and M6
//! wall clock come from the run record. Failed runs still contribute
//! whatever their snapshots support; nothing here requires completion.

mod exec;

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsg::{self, parse_design_state, serialize_design_state, DesignState};
use crate::workflow::{RunRecord, SystemKind};

pub use exec::{ExecConfig, ScriptStats, DEFAULT_EXEC_TIMEOUT};

/// How many system requirements the coverage denominator holds (SR-01
/// through SR-10).
pub const SR_COUNT: usize = 10;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("run record has no snapshots")]
    NoSnapshots,
    #[error("no snapshot carries a design state")]
    NoFinalDsg,
    #[error("interpreter {command:?} is not executable: {message}")]
    InterpreterMissing { command: String, message: String },
    #[error("script execution failed: {0}")]
    Exec(String),
}

/// Degenerate inputs a report was computed over. Zeroes accompanied by a
/// marker mean "nothing to measure", not "measured and found wanting".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Marker {
    /// The run produced no parseable design state; M2, M3, M4 and M7 are
    /// reported as 0.
    AbsentDsg,
    /// The final state holds no non-empty code fields; M4 is reported as 0.
    NoScripts,
    /// The run wrote no snapshots at all; M6 is reported as 0.
    NoSnapshots,
}

impl Marker {
    pub fn as_str(self) -> &'static str {
        match self {
            Marker::AbsentDsg => "absent_dsg",
            Marker::NoScripts => "no_scripts",
            Marker::NoSnapshots => "no_snapshots",
        }
    }
}

/// The per-run metric values. M5 is a per-condition count and lives on
/// [`ConditionSummary`] instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub m1_json_validity: f64,
    pub m2_requirements_coverage: f64,
    pub m3_embodiment_presence: f64,
    pub m4_code_executability: f64,
    pub m6_wall_clock: f64,
    pub m7_graph_size: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub markers: Vec<Marker>,
}

/// M1: 1.0 iff the final document parses as a design state.
pub fn m1_json_validity(final_dsg_text: Option<&str>) -> f64 {
    match final_dsg_text {
        Some(text) if parse_design_state(text).is_ok() => 1.0,
        _ => 0.0,
    }
}

/// How tolerant the M2 matcher is about identifier spelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchMode {
    /// Case-insensitive, optional zero padding, hyphen/space/no separator:
    /// sr1, SR-1 and sr-01 all canonicalize to SR-01.
    #[default]
    Lenient,
    /// Only the canonical zero-padded form SR-01 through SR-10.
    Strict,
}

/// The distinct requirement identifiers mentioned anywhere in a state.
/// Stakeholder needs (SN-x) never enter the coverage fraction; they are
/// kept as a side diagnostic.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Coverage {
    /// Canonical SR-01..SR-10 identifiers found.
    pub covered: BTreeSet<String>,
    /// Canonical SN-1..SN-5 identifiers found (diagnostic only).
    pub sn_mentions: BTreeSet<String>,
}

impl Coverage {
    pub fn fraction(&self) -> f64 {
        self.covered.len() as f64 / SR_COUNT as f64
    }
}

fn lenient_sr() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\bsr[ -]?(10|0?[1-9])\b").expect("valid pattern"))
}

fn strict_sr() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\bSR-(0[1-9]|10)\b").expect("valid pattern"))
}

fn lenient_sn() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\bsn[ -]?0?([1-5])\b").expect("valid pattern"))
}

/// Scans every node's canonical serialization (names, descriptions,
/// linked requirements, tags, code, comments inside code) for requirement
/// identifiers.
pub fn requirement_coverage(state: &DesignState, mode: MatchMode) -> Coverage {
    let mut coverage = Coverage::default();
    for node in state.nodes.values() {
        let surface = serde_json::to_string_pretty(node).expect("node serializes");
        match mode {
            MatchMode::Lenient => {
                for caps in lenient_sr().captures_iter(&surface) {
                    let index: u32 = caps[1].parse().expect("matched digits");
                    coverage.covered.insert(format!("SR-{index:02}"));
                }
            }
            MatchMode::Strict => {
                for caps in strict_sr().captures_iter(&surface) {
                    coverage.covered.insert(format!("SR-{}", &caps[1]));
                }
            }
        }
        for caps in lenient_sn().captures_iter(&surface) {
            coverage.sn_mentions.insert(format!("SN-{}", &caps[1]));
        }
    }
    coverage
}

/// M2: distinct SR-01..SR-10 mentions over 10, using the lenient matcher.
pub fn m2_requirements_coverage(state: &DesignState) -> f64 {
    requirement_coverage(state, MatchMode::Lenient).fraction()
}

/// M3: fraction of nodes whose embodiment is present and carries a
/// non-empty principle or description. An empty graph scores 0.
pub fn m3_embodiment_presence(state: &DesignState) -> f64 {
    if state.nodes.is_empty() {
        return 0.0;
    }
    let filled = state
        .nodes
        .values()
        .filter(|node| {
            node.embodiment
                .as_ref()
                .is_some_and(|e| !e.principle.is_empty() || !e.description.is_empty())
        })
        .count();
    filled as f64 / state.nodes.len() as f64
}

/// M4: fraction of physics-model scripts that exit 0 under `--help`
/// within the timeout. See [`exec`] for the execution contract.
pub fn m4_code_executability(
    state: &DesignState,
    config: &ExecConfig,
) -> Result<ScriptStats, MetricsError> {
    exec::run_scripts(state, config)
}

/// M6: wall-clock span between the first and last snapshot, in seconds.
pub fn m6_wall_clock(record: &RunRecord) -> Result<f64, MetricsError> {
    let first = record.snapshots.first().ok_or(MetricsError::NoSnapshots)?;
    let last = record.snapshots.last().expect("non-empty");
    Ok(last.timestamp - first.timestamp)
}

/// M7: node count of the last snapshot that carries a design state.
pub fn m7_graph_size(record: &RunRecord) -> Result<usize, MetricsError> {
    let state = last_design_state(record).ok_or(MetricsError::NoFinalDsg)?;
    Ok(dsg::graph_size(state))
}

fn last_design_state(record: &RunRecord) -> Option<&DesignState> {
    record
        .snapshots
        .iter()
        .rev()
        .find_map(|s| s.design_state.as_ref())
}

/// Computes the full per-run report. The final design state is taken from
/// the last snapshot that carries one and re-validated through the codec,
/// so M1 measures the persisted artifact rather than in-memory state.
pub fn evaluate_record(
    record: &RunRecord,
    config: &ExecConfig,
) -> Result<MetricsReport, MetricsError> {
    let mut markers = Vec::new();
    let final_text = last_design_state(record).map(serialize_design_state);
    let m1 = m1_json_validity(final_text.as_deref());
    let m6 = if record.snapshots.is_empty() {
        markers.push(Marker::NoSnapshots);
        0.0
    } else {
        m6_wall_clock(record)?
    };
    if m1 == 0.0 {
        markers.insert(0, Marker::AbsentDsg);
        return Ok(MetricsReport {
            m1_json_validity: 0.0,
            m2_requirements_coverage: 0.0,
            m3_embodiment_presence: 0.0,
            m4_code_executability: 0.0,
            m6_wall_clock: m6,
            m7_graph_size: 0,
            markers,
        });
    }
    let state = last_design_state(record).expect("m1=1 implies a state");
    let stats = m4_code_executability(state, config)?;
    if stats.total == 0 {
        markers.push(Marker::NoScripts);
    }
    Ok(MetricsReport {
        m1_json_validity: m1,
        m2_requirements_coverage: m2_requirements_coverage(state),
        m3_embodiment_presence: m3_embodiment_presence(state),
        m4_code_executability: stats.fraction(),
        m6_wall_clock: m6,
        m7_graph_size: dsg::graph_size(state) as u64,
        markers,
    })
}

/// Mean and sample standard deviation (n−1 denominator). Zero or one
/// observation yields a std of 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> MeanStd {
    if values.is_empty() {
        return MeanStd {
            mean: 0.0,
            std: 0.0,
        };
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return MeanStd { mean, std: 0.0 };
    }
    let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    MeanStd {
        mean,
        std: (ss / (n - 1.0)).sqrt(),
    }
}

/// One evaluated run, tagged with the condition it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub model_id: String,
    pub system: SystemKind,
    pub temperature: f64,
    pub seed: u64,
    pub completed: bool,
    pub report: MetricsReport,
}

/// Per-condition aggregate: mean and std of each metric over the seeds,
/// plus the completion count (M5).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub model_id: String,
    pub system: SystemKind,
    pub temperature: f64,
    pub runs: usize,
    pub m1: MeanStd,
    pub m2: MeanStd,
    pub m3: MeanStd,
    pub m4: MeanStd,
    pub m5_run_completion: usize,
    pub m6: MeanStd,
    pub m7: MeanStd,
}

/// Groups runs by (model, system, temperature) and aggregates each group.
/// Output order and values are invariant to input order: groups sort by
/// model, then system, then temperature, and every metric is averaged
/// over the group's runs sorted by seed.
pub fn aggregate(runs: &[RunMetrics]) -> Vec<ConditionSummary> {
    let mut sorted: Vec<&RunMetrics> = runs.iter().collect();
    sorted.sort_by(|a, b| {
        a.model_id
            .cmp(&b.model_id)
            .then(a.system.as_str().cmp(b.system.as_str()))
            .then(a.temperature.total_cmp(&b.temperature))
            .then(a.seed.cmp(&b.seed))
    });
    let mut summaries = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let head = sorted[i];
        let mut group = Vec::new();
        while i < sorted.len()
            && sorted[i].model_id == head.model_id
            && sorted[i].system == head.system
            && sorted[i].temperature == head.temperature
        {
            group.push(sorted[i]);
            i += 1;
        }
        let column = |f: fn(&MetricsReport) -> f64| {
            mean_std(&group.iter().map(|r| f(&r.report)).collect::<Vec<_>>())
        };
        summaries.push(ConditionSummary {
            model_id: head.model_id.clone(),
            system: head.system,
            temperature: head.temperature,
            runs: group.len(),
            m1: column(|r| r.m1_json_validity),
            m2: column(|r| r.m2_requirements_coverage),
            m3: column(|r| r.m3_embodiment_presence),
            m4: column(|r| r.m4_code_executability),
            m5_run_completion: group.iter().filter(|r| r.completed).count(),
            m6: column(|r| r.m6_wall_clock),
            m7: column(|r| r.m7_graph_size as f64),
        });
    }
    summaries
}

pub const SUMMARY_HEADER: &str = "model,system,temperature,m1_mean,m1_std,m2_mean,m2_std,m3_mean,m3_std,m4_mean,m4_std,m5_count,m6_mean,m6_std,m7_mean,m7_std";

/// Renders the summary CSV. Fraction metrics (M1 through M4) appear as
/// percentages with one decimal; M6 and M7 keep their units, also with
/// one decimal.
pub fn summary_csv(summaries: &[ConditionSummary]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for s in summaries {
        let pct = |m: MeanStd| format!("{:.1},{:.1}", m.mean * 100.0, m.std * 100.0);
        let raw = |m: MeanStd| format!("{:.1},{:.1}", m.mean, m.std);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            s.model_id,
            s.system,
            s.temperature,
            pct(s.m1),
            pct(s.m2),
            pct(s.m3),
            pct(s.m4),
            s.m5_run_completion,
            raw(s.m6),
            raw(s.m7),
        ));
    }
    out
}
