//! Experiment-matrix enumeration and execution. Each run gets its own
//! directory keyed by the four axes; a fault in one run is recorded in
//! that run's record and never aborts the rest of the matrix.

use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::agents::ToolsConfig;
use crate::dsg;
use crate::llm::{BackendConfig, LlmClient, GLOBAL_TOKEN_CAP};
use crate::metrics::{
    aggregate, evaluate_record, summary_csv, ExecConfig, MetricsError, MetricsReport, RunMetrics,
};
use crate::workflow::{
    Engine, FailureReason, RunConfig, RunParams, RunRecord, RunStore, StorageError, SystemKind,
    RECURSION_LIMIT,
};

/// The bundled cahier des charges. It ends with the standalone FINALIZED
/// token, so runs against it skip the interactive extractor.
pub const BUNDLED_CDC: &str = include_str!("../../assets/cdc_solar_filtration.md");

pub const DEFAULT_MODELS: [&str; 2] = ["llama-3.3-70b", "deepseek-r1-70b"];
pub const DEFAULT_TEMPERATURES: [f64; 3] = [0.0, 0.5, 1.0];
pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("matrix axis {axis:?} is empty")]
    EmptyAxis { axis: &'static str },
    #[error("matrix axis {axis:?} repeats the value {value}")]
    DuplicateAxisValue { axis: &'static str, value: String },
    #[error("{path} already holds run results; pass overwrite to replace them")]
    WouldOverwrite { path: PathBuf },
    #[error("bad run directory {path}: {message}")]
    BadRunDir { path: PathBuf, message: String },
    #[error("i/o failure at {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// The four experiment axes. The cartesian product is the run set.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSpec {
    pub models: Vec<String>,
    pub systems: Vec<SystemKind>,
    pub temperatures: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for MatrixSpec {
    /// 2 models x 2 systems x 3 temperatures x 5 seeds = 60 runs.
    fn default() -> Self {
        MatrixSpec {
            models: DEFAULT_MODELS.iter().map(|m| m.to_string()).collect(),
            systems: vec![SystemKind::Mas, SystemKind::TwoAs],
            temperatures: DEFAULT_TEMPERATURES.to_vec(),
            seeds: DEFAULT_SEEDS.to_vec(),
        }
    }
}

/// One cell of the matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model_id: String,
    pub system: SystemKind,
    pub temperature: f64,
    pub seed: u64,
}

/// Everything shared across the runs of a matrix: the challenge document,
/// the backend, metric execution settings, and scheduling knobs.
#[derive(Clone)]
pub struct RunOptions {
    pub cdc: String,
    pub cdc_path: Option<String>,
    pub backend: BackendConfig,
    pub tools: ToolsConfig,
    pub exec: ExecConfig,
    pub recursion_limit: u32,
    pub max_completion_tokens: u32,
    pub overwrite: bool,
    /// Independent runs driven at once. 1 = sequential. Values above 1
    /// take effect only with the `parallel` feature (the default); the
    /// sequential fallback ignores them.
    pub parallelism: usize,
}

impl RunOptions {
    pub fn new(cdc: impl Into<String>, backend: BackendConfig) -> Self {
        RunOptions {
            cdc: cdc.into(),
            cdc_path: None,
            backend,
            tools: ToolsConfig::default(),
            exec: ExecConfig::default(),
            recursion_limit: RECURSION_LIMIT,
            max_completion_tokens: GLOBAL_TOKEN_CAP,
            overwrite: false,
            parallelism: 1,
        }
    }
}

/// One executed cell: the run's record and its metric report.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixOutcome {
    pub config: ExperimentConfig,
    pub record: RunRecord,
    pub report: MetricsReport,
}

fn check_axis<T: ToString>(
    axis: &'static str,
    values: &[T],
    key: impl Fn(&T) -> String,
) -> Result<(), HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::EmptyAxis { axis });
    }
    let mut seen = BTreeSet::new();
    for value in values {
        if !seen.insert(key(value)) {
            return Err(HarnessError::DuplicateAxisValue {
                axis,
                value: value.to_string(),
            });
        }
    }
    Ok(())
}

/// Expands the axes into configs, ordered models, then systems, then
/// temperatures, then seeds innermost. The order is part of the contract:
/// run directories and summaries are reproducible from the axes alone.
pub fn enumerate_matrix(spec: &MatrixSpec) -> Result<Vec<ExperimentConfig>, HarnessError> {
    check_axis("models", &spec.models, |m| m.clone())?;
    check_axis("systems", &spec.systems, |s| s.as_str().to_string())?;
    check_axis("temperatures", &spec.temperatures, |t| {
        t.to_bits().to_string()
    })?;
    check_axis("seeds", &spec.seeds, |s| s.to_string())?;
    let mut configs = Vec::with_capacity(
        spec.models.len() * spec.systems.len() * spec.temperatures.len() * spec.seeds.len(),
    );
    for model in &spec.models {
        for &system in &spec.systems {
            for &temperature in &spec.temperatures {
                for &seed in &spec.seeds {
                    configs.push(ExperimentConfig {
                        model_id: model.clone(),
                        system,
                        temperature,
                        seed,
                    });
                }
            }
        }
    }
    Ok(configs)
}

/// `{out}/{model}/{system}/{temperature}/{seed}`. Temperatures render via
/// the shortest f64 form (0, 0.5, 1), matching the summary CSV.
pub fn run_dir(out_dir: &Path, config: &ExperimentConfig) -> PathBuf {
    out_dir
        .join(&config.model_id)
        .join(config.system.as_str())
        .join(config.temperature.to_string())
        .join(config.seed.to_string())
}

/// Executes one experiment into its run directory and evaluates metrics.
/// The directory afterwards holds `run_record.json`, every snapshot,
/// `agent_io_log.jsonl`, and `metrics.json`.
pub fn execute_run(
    config: &ExperimentConfig,
    options: &RunOptions,
    out_dir: &Path,
) -> Result<(RunRecord, MetricsReport), HarnessError> {
    let dir = run_dir(out_dir, config);
    if dir.join("run_record.json").exists() {
        if !options.overwrite {
            return Err(HarnessError::WouldOverwrite { path: dir });
        }
        // Replace rather than overlay: a shorter rerun must not leave
        // stale snapshots from the previous execution behind.
        fs::remove_dir_all(&dir).map_err(|e| HarnessError::Io {
            path: dir.clone(),
            message: e.to_string(),
        })?;
    }
    let store = RunStore::create(&dir)?;
    let client = LlmClient::new(options.backend.clone());
    let mut params = RunParams::new(
        config.system,
        &config.model_id,
        config.temperature,
        config.seed,
        &options.cdc,
    );
    params.cdc_path = options.cdc_path.clone();
    params.recursion_limit = options.recursion_limit;
    params.max_completion_tokens = options.max_completion_tokens;
    params.tools = options.tools.clone();
    let record = Engine::new(&client, params)
        .with_store(store)
        .run_to_completion();
    let report = evaluate_record(&record, &options.exec)?;
    write_metrics(&dir, &report)?;
    Ok((record, report))
}

fn write_metrics(dir: &Path, report: &MetricsReport) -> Result<(), HarnessError> {
    let path = dir.join("metrics.json");
    let text = serde_json::to_string_pretty(report).expect("report serializes") + "\n";
    fs::write(&path, text).map_err(|e| HarnessError::Io {
        path,
        message: e.to_string(),
    })
}

/// Runs every cell of the matrix. Faults inside a run (including panics)
/// are contained in that cell's outcome; only configuration errors that
/// would poison every cell (a missing interpreter, an occupied output
/// directory without overwrite) abort the matrix.
pub fn run_matrix(
    spec: &MatrixSpec,
    options: &RunOptions,
    out_dir: &Path,
) -> Result<Vec<MatrixOutcome>, HarnessError> {
    let configs = enumerate_matrix(spec)?;
    if !options.overwrite {
        for config in &configs {
            let dir = run_dir(out_dir, config);
            if dir.join("run_record.json").exists() {
                return Err(HarnessError::WouldOverwrite { path: dir });
            }
        }
    }

    let results: Vec<Result<MatrixOutcome, HarnessError>>;
    #[cfg(feature = "parallel")]
    {
        if options.parallelism > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(options.parallelism)
                .build()
                .map_err(|e| HarnessError::Io {
                    path: out_dir.to_path_buf(),
                    message: format!("could not build thread pool: {e}"),
                })?;
            results = pool.install(|| {
                use rayon::prelude::*;
                configs
                    .par_iter()
                    .map(|config| run_contained(config, options, out_dir))
                    .collect()
            });
        } else {
            results = configs
                .iter()
                .map(|config| run_contained(config, options, out_dir))
                .collect();
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        results = configs
            .iter()
            .map(|config| run_contained(config, options, out_dir))
            .collect();
    }

    results.into_iter().collect()
}

fn run_contained(
    config: &ExperimentConfig,
    options: &RunOptions,
    out_dir: &Path,
) -> Result<MatrixOutcome, HarnessError> {
    let result = catch_unwind(AssertUnwindSafe(|| execute_run(config, options, out_dir)));
    match result {
        Ok(Ok((record, report))) => Ok(MatrixOutcome {
            config: config.clone(),
            record,
            report,
        }),
        // Matrix-poisoning configuration errors propagate; anything else
        // is contained as a failed cell.
        Ok(Err(e @ HarnessError::Metrics(MetricsError::InterpreterMissing { .. })))
        | Ok(Err(e @ HarnessError::WouldOverwrite { .. })) => Err(e),
        Ok(Err(other)) => Ok(synthetic_outcome(config, options, other.to_string())),
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "opaque panic payload".to_string());
            Ok(synthetic_outcome(
                config,
                options,
                format!("internal panic: {message}"),
            ))
        }
    }
}

/// Stand-in outcome for a cell whose run could not even produce a record
/// of its own. Transport is the closest failure class: the run was lost
/// to the environment, not to the model.
fn synthetic_outcome(
    config: &ExperimentConfig,
    options: &RunOptions,
    detail: String,
) -> MatrixOutcome {
    let record = RunRecord {
        config: RunConfig {
            model_id: config.model_id.clone(),
            system: config.system,
            temperature: config.temperature,
            seed: config.seed,
            cdc_path: options.cdc_path.clone(),
            backend: options.backend.backend_name().to_string(),
        },
        completed: false,
        failure_reason: FailureReason::Transport,
        failure_detail: Some(detail),
        transition_count: 0,
        iteration_count: 0,
        warnings: Vec::new(),
        snapshots: Vec::new(),
        final_state: None,
        agent_io_log: Vec::new(),
    };
    let report = evaluate_record(&record, &options.exec)
        .expect("empty record evaluates without subprocesses");
    MatrixOutcome {
        config: config.clone(),
        record,
        report,
    }
}

fn to_run_metrics(outcome: &MatrixOutcome) -> RunMetrics {
    RunMetrics {
        model_id: outcome.config.model_id.clone(),
        system: outcome.config.system,
        temperature: outcome.config.temperature,
        seed: outcome.config.seed,
        completed: outcome.record.completed,
        report: outcome.report.clone(),
    }
}

/// The fixed-column condition summary CSV over in-memory outcomes.
pub fn summarize(outcomes: &[MatrixOutcome]) -> String {
    let runs: Vec<RunMetrics> = outcomes.iter().map(to_run_metrics).collect();
    summary_csv(&aggregate(&runs))
}

/// Finds every run directory (a directory containing `run_record.json`)
/// under `root`, in sorted path order.
pub fn collect_run_dirs(root: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut found = Vec::new();
    walk(root, &mut found)?;
    found.sort();
    Ok(found)
}

fn walk(dir: &Path, found: &mut Vec<PathBuf>) -> Result<(), HarnessError> {
    if dir.join("run_record.json").is_file() {
        found.push(dir.to_path_buf());
        return Ok(());
    }
    let entries = fs::read_dir(dir).map_err(|e| HarnessError::Io {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })?;
    for entry in entries {
        let entry = entry.map_err(|e| HarnessError::Io {
            path: dir.to_path_buf(),
            message: e.to_string(),
        })?;
        if entry.path().is_dir() {
            walk(&entry.path(), found)?;
        }
    }
    Ok(())
}

pub fn load_record(run_dir: &Path) -> Result<RunRecord, HarnessError> {
    let path = run_dir.join("run_record.json");
    let text = fs::read_to_string(&path).map_err(|e| HarnessError::BadRunDir {
        path: run_dir.to_path_buf(),
        message: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| HarnessError::BadRunDir {
        path: run_dir.to_path_buf(),
        message: format!("run_record.json does not parse: {e}"),
    })
}

/// Recomputes metrics for every run directory under `root` and rewrites
/// each `metrics.json`. Returns the per-run rows in directory order.
pub fn eval_dirs(root: &Path, exec: &ExecConfig) -> Result<Vec<RunMetrics>, HarnessError> {
    let mut rows = Vec::new();
    for dir in collect_run_dirs(root)? {
        let record = load_record(&dir)?;
        let report = evaluate_record(&record, exec)?;
        write_metrics(&dir, &report)?;
        rows.push(run_metrics_of(&record, report));
    }
    Ok(rows)
}

/// Builds the summary CSV from persisted runs. Uses each directory's
/// `metrics.json` when present, recomputing it otherwise.
pub fn summarize_dirs(root: &Path, exec: &ExecConfig) -> Result<String, HarnessError> {
    let mut rows = Vec::new();
    for dir in collect_run_dirs(root)? {
        let record = load_record(&dir)?;
        let metrics_path = dir.join("metrics.json");
        let report = if metrics_path.is_file() {
            let text = fs::read_to_string(&metrics_path).map_err(|e| HarnessError::BadRunDir {
                path: dir.clone(),
                message: e.to_string(),
            })?;
            serde_json::from_str(&text).map_err(|e| HarnessError::BadRunDir {
                path: dir.clone(),
                message: format!("metrics.json does not parse: {e}"),
            })?
        } else {
            evaluate_record(&record, exec)?
        };
        rows.push(run_metrics_of(&record, report));
    }
    Ok(summary_csv(&aggregate(&rows)))
}

fn run_metrics_of(record: &RunRecord, report: MetricsReport) -> RunMetrics {
    RunMetrics {
        model_id: record.config.model_id.clone(),
        system: record.config.system,
        temperature: record.config.temperature,
        seed: record.config.seed,
        completed: record.completed,
        report,
    }
}

/// Writes the final design state of a persisted run as a DOT graph:
/// one vertex per node labeled by name, one directed edge per edge-list
/// entry, duplicates preserved.
pub fn export_graph(run_dir: &Path, out_path: &Path) -> Result<(), HarnessError> {
    let record = load_record(run_dir)?;
    let state = record
        .snapshots
        .iter()
        .rev()
        .find_map(|s| s.design_state.as_ref())
        .or(record.final_state.as_ref())
        .ok_or(MetricsError::NoFinalDsg)?;
    let dot = dsg::to_dot(state);
    fs::write(out_path, dot).map_err(|e| HarnessError::Io {
        path: out_path.to_path_buf(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ScriptTable;

    const CDC: &str = "Build a widget.\n\nFINALIZED\n";

    fn proposal(id_digit: u8) -> String {
        format!(
            r#"```json
{{"nodes": {{"{0}{0}{0}{0}{0}{0}{0}{0}-{0}{0}{0}{0}-4{0}{0}{0}-8{0}{0}{0}-{0}{0}{0}{0}{0}{0}{0}{0}{0}{0}{0}{0}": {{"name": "part {0}", "node_kind": "component"}}}}, "edges": []}}
```"#,
            id_digit
        )
    }

    fn happy_table() -> ScriptTable {
        let mut table = ScriptTable::new();
        table.insert(
            "supervisor",
            Some(0),
            None,
            r#"{"instructions": "go", "stop": false}"#,
        );
        table.insert(
            "generator",
            Some(0),
            None,
            format!("{}\n{}\n{}", proposal(1), proposal(2), proposal(3)),
        );
        table.insert(
            "reflector",
            Some(0),
            None,
            r#"{"critiques": [
                {"proposal_index": 0, "text": "a"},
                {"proposal_index": 1, "text": "b"},
                {"proposal_index": 2, "text": "c"}]}"#,
        );
        table.insert(
            "ranker",
            Some(0),
            None,
            r#"{"scores": [
                {"proposal_index": 0, "score": 5, "justification": ""},
                {"proposal_index": 1, "score": 8, "justification": ""},
                {"proposal_index": 2, "score": 2, "justification": ""}]}"#,
        );
        table.insert(
            "meta_reviewer",
            Some(0),
            None,
            r#"{"selected_proposal_index": 1, "detailed_summary_for_graph": "keep 1",
                "decisions": [
                {"proposal_index": 0, "final_status": "rejected", "reason": ""},
                {"proposal_index": 1, "final_status": "selected", "reason": ""},
                {"proposal_index": 2, "final_status": "rejected", "reason": ""}]}"#,
        );
        table.insert(
            "supervisor",
            Some(1),
            None,
            r#"{"instructions": "", "stop": true}"#,
        );
        // 2AS cells of the same matrix.
        table.wildcard("generator_2as", proposal(4));
        table.insert(
            "reflector_2as",
            Some(0),
            None,
            r#"{"selected_index": 0, "terminate": true, "reason": "fine",
                "statuses": [{"proposal_index": 0, "final_status": "selected", "reason": ""}]}"#,
        );
        table
    }

    fn small_spec() -> MatrixSpec {
        MatrixSpec {
            models: vec!["alpha".to_string(), "beta".to_string()],
            systems: vec![SystemKind::Mas, SystemKind::TwoAs],
            temperatures: vec![0.0],
            seeds: vec![0, 1],
        }
    }

    fn options() -> RunOptions {
        RunOptions::new(CDC, BackendConfig::scripted(happy_table()))
    }

    #[test]
    fn default_axes_enumerate_sixty_configs() {
        let configs = enumerate_matrix(&MatrixSpec::default()).unwrap();
        assert_eq!(configs.len(), 60);
        // Seeds vary innermost; models outermost.
        assert_eq!(configs[0].seed, 0);
        assert_eq!(configs[1].seed, 1);
        assert_eq!(configs[0].model_id, configs[29].model_id);
        assert_ne!(configs[0].model_id, configs[30].model_id);
    }

    #[test]
    fn axis_validation_rejects_empty_and_duplicates() {
        let mut spec = MatrixSpec::default();
        spec.models.clear();
        assert!(matches!(
            enumerate_matrix(&spec),
            Err(HarnessError::EmptyAxis { axis: "models" })
        ));
        let spec = MatrixSpec {
            seeds: vec![0, 1, 0],
            ..Default::default()
        };
        assert!(matches!(
            enumerate_matrix(&spec),
            Err(HarnessError::DuplicateAxisValue { axis: "seeds", .. })
        ));
    }

    #[test]
    fn matrix_run_persists_every_artifact() {
        let out = tempfile::tempdir().unwrap();
        let outcomes = run_matrix(&small_spec(), &options(), out.path()).unwrap();
        assert_eq!(outcomes.len(), 8);
        assert!(outcomes.iter().all(|o| o.record.completed));
        for outcome in &outcomes {
            let dir = run_dir(out.path(), &outcome.config);
            for file in ["run_record.json", "agent_io_log.jsonl", "metrics.json"] {
                assert!(dir.join(file).is_file(), "{file} missing in {dir:?}");
            }
            assert!(dir.join("snapshot_001.meta.json").is_file());
        }
        let dirs = collect_run_dirs(out.path()).unwrap();
        assert_eq!(dirs.len(), 8);
    }

    #[test]
    fn one_faulted_cell_leaves_the_rest_untouched() {
        let mut table = happy_table();
        // Seed 1's supervisor refuses to produce JSON on all three
        // attempts (fully-keyed rows outrank the happy defaults).
        for step in 0..3 {
            table.insert("supervisor", Some(step), Some(1), "not json at all");
        }
        let out = tempfile::tempdir().unwrap();
        let mut options = options();
        options.backend = BackendConfig::scripted(table);
        let outcomes = run_matrix(&small_spec(), &options, out.path()).unwrap();
        let failed: Vec<_> = outcomes.iter().filter(|o| !o.record.completed).collect();
        // Both models' MAS seed-1 cells fail; 2AS has no supervisor.
        assert_eq!(failed.len(), 2);
        assert!(failed
            .iter()
            .all(|o| o.record.failure_reason == FailureReason::SchemaExhausted));
        assert_eq!(outcomes.iter().filter(|o| o.record.completed).count(), 6);
    }

    #[test]
    fn rerun_is_refused_without_overwrite() {
        let out = tempfile::tempdir().unwrap();
        run_matrix(&small_spec(), &options(), out.path()).unwrap();
        let err = run_matrix(&small_spec(), &options(), out.path()).unwrap_err();
        assert!(matches!(err, HarnessError::WouldOverwrite { .. }));
        let mut options = options();
        options.overwrite = true;
        run_matrix(&small_spec(), &options, out.path()).unwrap();
    }

    #[test]
    fn summaries_group_into_condition_rows() {
        let out = tempfile::tempdir().unwrap();
        let outcomes = run_matrix(&small_spec(), &options(), out.path()).unwrap();
        let csv = summarize(&outcomes);
        let lines: Vec<&str> = csv.lines().collect();
        // Header plus 2 models x 2 systems x 1 temperature.
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("alpha,mas,0,100.0,0.0,"));
        // Disk-backed summary agrees with the in-memory one.
        let from_disk = summarize_dirs(out.path(), &ExecConfig::default()).unwrap();
        assert_eq!(csv, from_disk);
    }

    #[test]
    fn eval_dirs_recomputes_and_rewrites_metrics() {
        let out = tempfile::tempdir().unwrap();
        let outcomes = run_matrix(&small_spec(), &options(), out.path()).unwrap();
        let rows = eval_dirs(out.path(), &ExecConfig::default()).unwrap();
        assert_eq!(rows.len(), 8);
        for outcome in &outcomes {
            let row = rows
                .iter()
                .find(|r| {
                    r.model_id == outcome.config.model_id
                        && r.system == outcome.config.system
                        && r.seed == outcome.config.seed
                })
                .unwrap();
            assert_eq!(row.report, outcome.report);
        }
    }

    #[test]
    fn parallel_and_sequential_matrices_agree() {
        let sequential_out = tempfile::tempdir().unwrap();
        let sequential = run_matrix(&small_spec(), &options(), sequential_out.path()).unwrap();
        let parallel_out = tempfile::tempdir().unwrap();
        let mut options = options();
        options.parallelism = 4;
        let parallel = run_matrix(&small_spec(), &options, parallel_out.path()).unwrap();
        assert_eq!(sequential, parallel);
        assert_eq!(summarize(&sequential), summarize(&parallel));
    }

    #[test]
    fn export_writes_a_dot_file_for_the_final_state() {
        let out = tempfile::tempdir().unwrap();
        let outcomes = run_matrix(&small_spec(), &options(), out.path()).unwrap();
        let dir = run_dir(out.path(), &outcomes[0].config);
        let dot_path = out.path().join("final.dot");
        export_graph(&dir, &dot_path).unwrap();
        let dot = std::fs::read_to_string(&dot_path).unwrap();
        assert!(dot.starts_with("digraph"));
        assert!(dot.contains("part 2"));
    }

    #[test]
    fn export_fails_without_a_design_state() {
        let mut table = ScriptTable::new();
        table.wildcard("supervisor", r#"{"instructions": "", "stop": true}"#);
        let out = tempfile::tempdir().unwrap();
        let spec = MatrixSpec {
            models: vec!["alpha".to_string()],
            systems: vec![SystemKind::Mas],
            temperatures: vec![0.0],
            seeds: vec![0],
        };
        let mut options = options();
        options.backend = BackendConfig::scripted(table);
        let outcomes = run_matrix(&spec, &options, out.path()).unwrap();
        assert!(outcomes[0].record.completed);
        let dir = run_dir(out.path(), &outcomes[0].config);
        let err = export_graph(&dir, &out.path().join("x.dot")).unwrap_err();
        assert!(matches!(
            err,
            HarnessError::Metrics(MetricsError::NoFinalDsg)
        ));
    }

    #[test]
    fn bundled_cdc_carries_the_bypass_token() {
        assert!(BUNDLED_CDC.lines().any(|line| line.trim() == "FINALIZED"));
    }
}
