//! dsgforge: run design-graph experiments, sweep the evaluation matrix,
//! re-score stored runs, and drive requirements extraction by hand.

mod config;

use std::fs;
use std::io::{self, Write as _};
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dsgforge::agents::{extract_requirements, AgentCall, DialogueDriver};
use dsgforge::harness::{
    self, ExperimentConfig, MatrixSpec, RunOptions, BUNDLED_CDC, DEFAULT_MODELS,
};
use dsgforge::llm::{BackendConfig, HttpConfig, LlmClient, ScriptTable, GLOBAL_TOKEN_CAP};
use dsgforge::metrics::{ExecConfig, MetricsReport};
use dsgforge::workflow::{RunRecord, SystemKind};

use crate::config::FileConfig;

#[derive(Parser)]
#[command(
    name = "dsgforge",
    version,
    about = "design-state graph experiment harness"
)]
struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a single run and evaluate its metrics.
    Run(RunArgs),
    /// Execute every cell of the experiment matrix and write summary.csv.
    Matrix(MatrixArgs),
    /// Re-evaluate stored run directories and print per-run metrics.
    Eval(EvalArgs),
    /// Aggregate stored run directories into a summary CSV.
    Summarize(SummarizeArgs),
    /// Export a run's final design state as Graphviz dot.
    ExportGraph(ExportGraphArgs),
    /// Interactive requirements extraction over stdin.
    Extract(ExtractArgs),
}

#[derive(Args)]
struct BackendArgs {
    /// Gateway: http (endpoint from DSGFORGE_API_BASE, key from
    /// DSGFORGE_API_KEY) or scripted.
    #[arg(long)]
    backend: Option<String>,
    /// Reply directory for the scripted backend (ROLE__STEP__SEED.txt).
    #[arg(long)]
    scripts: Option<PathBuf>,
}

#[derive(Args)]
struct ExecArgs {
    /// Interpreter used to probe embodiment scripts.
    #[arg(long)]
    interpreter: Option<String>,
    /// Per-script timeout in seconds.
    #[arg(long)]
    exec_timeout: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    /// Model identifier sent to the gateway.
    #[arg(long)]
    model: Option<String>,
    /// Workflow: mas or two_as.
    #[arg(long)]
    system: Option<SystemKind>,
    /// Sampling temperature.
    #[arg(long)]
    temp: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Design challenge file; the bundled challenge when absent.
    #[arg(long)]
    cdc: Option<PathBuf>,
    /// Output root; the run lands in {out}/{model}/{system}/{temp}/{seed}.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    exec: ExecArgs,
    #[arg(long)]
    recursion_limit: Option<u32>,
    #[arg(long)]
    max_completion_tokens: Option<u32>,
    /// Replace an existing run directory instead of refusing.
    #[arg(long)]
    overwrite: bool,
}

#[derive(Args)]
struct MatrixArgs {
    /// TOML file describing the matrix; flags override it.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    models: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    systems: Vec<SystemKind>,
    #[arg(long, value_delimiter = ',')]
    temps: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long)]
    cdc: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    exec: ExecArgs,
    #[arg(long)]
    recursion_limit: Option<u32>,
    #[arg(long)]
    max_completion_tokens: Option<u32>,
    /// Worker threads for cell execution.
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    overwrite: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Root holding run directories (searched recursively).
    root: PathBuf,
    #[command(flatten)]
    exec: ExecArgs,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Root holding run directories (searched recursively).
    root: PathBuf,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    exec: ExecArgs,
}

#[derive(Args)]
struct ExportGraphArgs {
    /// One run directory (holds run_record.json).
    #[arg(long)]
    run: PathBuf,
    /// Destination .dot file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    temp: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_completion_tokens: Option<u32>,
    #[command(flatten)]
    backend: BackendArgs,
    /// Write the extracted document here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let file = FileConfig::load_or_default(cli.config.as_deref())?;
    match cli.command {
        Command::Run(args) => cmd_run(args, file),
        Command::Matrix(args) => cmd_matrix(args, file),
        Command::Eval(args) => cmd_eval(args, file),
        Command::Summarize(args) => cmd_summarize(args, file),
        Command::ExportGraph(args) => cmd_export_graph(args),
        Command::Extract(args) => cmd_extract(args, file),
    }
}

fn cmd_run(args: RunArgs, cfg: FileConfig) -> Result<()> {
    let config = ExperimentConfig {
        model_id: args
            .model
            .or_else(|| cfg.model.clone())
            .unwrap_or_else(|| DEFAULT_MODELS[0].to_string()),
        system: resolve_system(args.system, cfg.system.as_deref())?,
        temperature: args.temp.or(cfg.temperature).unwrap_or(0.0),
        seed: args.seed.or(cfg.seed).unwrap_or(0),
    };
    let out = args
        .out
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("runs"));
    let options = build_options(
        args.cdc,
        &args.backend,
        &args.exec,
        args.recursion_limit,
        args.max_completion_tokens,
        args.overwrite,
        None,
        &cfg,
    )?;
    let (record, report) = harness::execute_run(&config, &options, &out)?;
    print_run_line(&config, &record);
    print_report(&report);
    println!(
        "run directory: {}",
        harness::run_dir(&out, &config).display()
    );
    Ok(())
}

fn cmd_matrix(args: MatrixArgs, cfg: FileConfig) -> Result<()> {
    let spec_file = FileConfig::load_or_default(args.spec.as_deref())?;
    let merged = spec_file.merged_over(cfg);
    let spec = build_matrix_spec(&args, &merged)?;
    let out = args
        .out
        .or_else(|| merged.out.clone())
        .unwrap_or_else(|| PathBuf::from("runs"));
    let options = build_options(
        args.cdc,
        &args.backend,
        &args.exec,
        args.recursion_limit,
        args.max_completion_tokens,
        args.overwrite,
        args.parallelism,
        &merged,
    )?;
    let outcomes = harness::run_matrix(&spec, &options, &out)?;
    for outcome in &outcomes {
        print_run_line(&outcome.config, &outcome.record);
    }
    let completed = outcomes.iter().filter(|o| o.record.completed).count();
    println!("{completed} of {} runs completed", outcomes.len());

    let summary_path = out.join("summary.csv");
    fs::write(&summary_path, harness::summarize(&outcomes))
        .with_context(|| format!("could not write {}", summary_path.display()))?;
    println!("summary: {}", summary_path.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs, cfg: FileConfig) -> Result<()> {
    let exec = build_exec(&args.exec, &cfg);
    let rows = harness::eval_dirs(&args.root, &exec)?;
    for row in &rows {
        let verdict = if row.completed { "completed" } else { "failed" };
        println!(
            "{} {} t={} seed={}: {verdict}  m1 {:.3}  m2 {:.3}  m3 {:.3}  m4 {:.3}  m6 {:.1}s  m7 {}",
            row.model_id,
            row.system.as_str(),
            row.temperature,
            row.seed,
            row.report.m1_json_validity,
            row.report.m2_requirements_coverage,
            row.report.m3_embodiment_presence,
            row.report.m4_code_executability,
            row.report.m6_wall_clock,
            row.report.m7_graph_size,
        );
    }
    println!("{} runs under {}", rows.len(), args.root.display());
    Ok(())
}

fn cmd_summarize(args: SummarizeArgs, cfg: FileConfig) -> Result<()> {
    let exec = build_exec(&args.exec, &cfg);
    let csv = harness::summarize_dirs(&args.root, &exec)?;
    match args.out {
        Some(path) => {
            fs::write(&path, &csv)
                .with_context(|| format!("could not write {}", path.display()))?;
            println!("summary: {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_export_graph(args: ExportGraphArgs) -> Result<()> {
    harness::export_graph(&args.run, &args.out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_extract(args: ExtractArgs, cfg: FileConfig) -> Result<()> {
    let backend = build_backend(&args.backend, &cfg)?;
    let client = LlmClient::new(backend);
    let model = args
        .model
        .or_else(|| cfg.model.clone())
        .unwrap_or_else(|| DEFAULT_MODELS[0].to_string());
    let call = AgentCall {
        client: &client,
        model_id: &model,
        temperature: args.temp.or(cfg.temperature).unwrap_or(0.0),
        seed: args.seed.or(cfg.seed).unwrap_or(0),
        max_completion_tokens: args
            .max_completion_tokens
            .or(cfg.max_completion_tokens)
            .unwrap_or(GLOBAL_TOKEN_CAP),
    };
    eprintln!("describe the design challenge; the session ends once the extractor prints FINALIZED (ctrl-d aborts)");
    let outcome = extract_requirements(&call, &mut StdinDialogue::new())?;
    for warning in &outcome.warnings {
        eprintln!("warning: {warning}");
    }
    let doc = serde_json::to_string_pretty(&outcome.value).expect("document serializes") + "\n";
    match args.out {
        Some(path) => {
            fs::write(&path, &doc)
                .with_context(|| format!("could not write {}", path.display()))?;
            println!("wrote {}", path.display());
        }
        None => print!("{doc}"),
    }
    Ok(())
}

/// Reads user turns from stdin, echoing each assistant reply first. EOF
/// aborts the dialogue.
struct StdinDialogue {
    lines: io::Lines<io::StdinLock<'static>>,
}

impl StdinDialogue {
    fn new() -> Self {
        StdinDialogue {
            lines: io::stdin().lines(),
        }
    }
}

impl DialogueDriver for StdinDialogue {
    fn next_user_turn(&mut self, last_assistant: Option<&str>) -> Option<String> {
        if let Some(reply) = last_assistant {
            println!("\n{reply}\n");
        }
        print!("> ");
        io::stdout().flush().ok();
        self.lines.next()?.ok()
    }
}

fn resolve_system(flag: Option<SystemKind>, file: Option<&str>) -> Result<SystemKind> {
    match (flag, file) {
        (Some(system), _) => Ok(system),
        (None, Some(name)) => name.parse().map_err(|e: String| anyhow!(e)),
        (None, None) => Ok(SystemKind::Mas),
    }
}

/// The challenge text plus its source path (None for the bundled one).
fn load_cdc(path: Option<PathBuf>) -> Result<(String, Option<String>)> {
    match path {
        Some(path) => {
            let text = fs::read_to_string(&path)
                .with_context(|| format!("could not read challenge file {}", path.display()))?;
            Ok((text, Some(path.display().to_string())))
        }
        None => Ok((BUNDLED_CDC.to_string(), None)),
    }
}

fn build_backend(args: &BackendArgs, cfg: &FileConfig) -> Result<BackendConfig> {
    let name = args
        .backend
        .as_deref()
        .or(cfg.backend.as_deref())
        .unwrap_or("http");
    match name {
        "http" => Ok(BackendConfig::http(HttpConfig::from_env()?)),
        "scripted" => {
            let dir = args
                .scripts
                .clone()
                .or_else(|| cfg.scripts.clone())
                .ok_or_else(|| {
                    anyhow!("the scripted backend needs --scripts DIR (ROLE__STEP__SEED.txt files)")
                })?;
            Ok(BackendConfig::scripted(ScriptTable::from_dir(&dir)?))
        }
        other => bail!("unknown backend {other:?} (expected http or scripted)"),
    }
}

fn build_exec(args: &ExecArgs, cfg: &FileConfig) -> ExecConfig {
    let mut exec = ExecConfig::default();
    if let Some(interpreter) = args.interpreter.clone().or_else(|| cfg.interpreter.clone()) {
        exec.interpreter = interpreter;
    }
    if let Some(secs) = args.exec_timeout.or(cfg.exec_timeout_secs) {
        exec.timeout = Duration::from_secs(secs);
    }
    exec
}

#[allow(clippy::too_many_arguments)]
fn build_options(
    cdc: Option<PathBuf>,
    backend: &BackendArgs,
    exec: &ExecArgs,
    recursion_limit: Option<u32>,
    max_completion_tokens: Option<u32>,
    overwrite: bool,
    parallelism: Option<usize>,
    cfg: &FileConfig,
) -> Result<RunOptions> {
    let (cdc_text, cdc_path) = load_cdc(cdc.or_else(|| cfg.cdc.clone()))?;
    let mut options = RunOptions::new(cdc_text, build_backend(backend, cfg)?);
    options.cdc_path = cdc_path;
    options.exec = build_exec(exec, cfg);
    if let Some(limit) = recursion_limit.or(cfg.recursion_limit) {
        options.recursion_limit = limit;
    }
    if let Some(cap) = max_completion_tokens.or(cfg.max_completion_tokens) {
        options.max_completion_tokens = cap;
    }
    options.overwrite = overwrite;
    options.parallelism = parallelism.or(cfg.parallelism).unwrap_or(1);
    Ok(options)
}

fn build_matrix_spec(args: &MatrixArgs, cfg: &FileConfig) -> Result<MatrixSpec> {
    let default = MatrixSpec::default();
    let models = if !args.models.is_empty() {
        args.models.clone()
    } else {
        cfg.models.clone().unwrap_or(default.models)
    };
    let systems = if !args.systems.is_empty() {
        args.systems.clone()
    } else if let Some(names) = &cfg.systems {
        names
            .iter()
            .map(|name| name.parse().map_err(|e: String| anyhow!(e)))
            .collect::<Result<Vec<_>>>()?
    } else {
        default.systems
    };
    let temperatures = if !args.temps.is_empty() {
        args.temps.clone()
    } else {
        cfg.temperatures.clone().unwrap_or(default.temperatures)
    };
    let seeds = if !args.seeds.is_empty() {
        args.seeds.clone()
    } else {
        cfg.seeds.clone().unwrap_or(default.seeds)
    };
    Ok(MatrixSpec {
        models,
        systems,
        temperatures,
        seeds,
    })
}

fn print_run_line(config: &ExperimentConfig, record: &RunRecord) {
    let verdict = if record.completed {
        "completed".to_string()
    } else {
        format!("failed ({})", record.failure_reason.as_str())
    };
    println!(
        "{} {} t={} seed={}: {verdict} after {} transitions, {} iterations",
        config.model_id,
        config.system.as_str(),
        config.temperature,
        config.seed,
        record.transition_count,
        record.iteration_count,
    );
    for warning in &record.warnings {
        eprintln!("  warning: {warning}");
    }
}

fn print_report(report: &MetricsReport) {
    println!(
        "metrics: m1 {:.3}  m2 {:.3}  m3 {:.3}  m4 {:.3}  m6 {:.1}s  m7 {}",
        report.m1_json_validity,
        report.m2_requirements_coverage,
        report.m3_embodiment_presence,
        report.m4_code_executability,
        report.m6_wall_clock,
        report.m7_graph_size,
    );
    if !report.markers.is_empty() {
        let names: Vec<&str> = report.markers.iter().map(|m| m.as_str()).collect();
        println!("markers: {}", names.join(", "));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    fn parse(argv: &[&str]) -> Cli {
        Cli::try_parse_from(argv).expect("argv parses")
    }

    #[test]
    fn matrix_axis_flags_split_on_commas() {
        let cli = parse(&[
            "dsgforge",
            "matrix",
            "--models",
            "a,b",
            "--systems",
            "mas,two_as",
            "--temps",
            "0,0.5",
            "--seeds",
            "0,1",
        ]);
        let Command::Matrix(args) = cli.command else {
            panic!("expected matrix");
        };
        let spec = build_matrix_spec(&args, &FileConfig::default()).unwrap();
        assert_eq!(spec.models, ["a", "b"]);
        assert_eq!(spec.systems, [SystemKind::Mas, SystemKind::TwoAs]);
        assert_eq!(harness::enumerate_matrix(&spec).unwrap().len(), 16);
    }

    #[test]
    fn bare_matrix_falls_back_to_the_full_default_grid() {
        let cli = parse(&["dsgforge", "matrix"]);
        let Command::Matrix(args) = cli.command else {
            panic!("expected matrix");
        };
        let spec = build_matrix_spec(&args, &FileConfig::default()).unwrap();
        assert_eq!(harness::enumerate_matrix(&spec).unwrap().len(), 60);
    }

    #[test]
    fn system_flag_beats_the_config_file() {
        let got = resolve_system(Some(SystemKind::TwoAs), Some("mas")).unwrap();
        assert_eq!(got, SystemKind::TwoAs);
        let got = resolve_system(None, Some("two_as")).unwrap();
        assert_eq!(got, SystemKind::TwoAs);
        assert_eq!(resolve_system(None, None).unwrap(), SystemKind::Mas);
    }

    #[test]
    fn missing_cdc_flag_uses_the_bundled_challenge() {
        let (text, path) = load_cdc(None).unwrap();
        assert_eq!(text, BUNDLED_CDC);
        assert!(path.is_none());
    }

    fn backend_error(args: &BackendArgs) -> anyhow::Error {
        match build_backend(args, &FileConfig::default()) {
            Ok(_) => panic!("expected an error"),
            Err(e) => e,
        }
    }

    #[test]
    fn unknown_backend_is_rejected() {
        let args = BackendArgs {
            backend: Some("carrier-pigeon".into()),
            scripts: None,
        };
        assert!(backend_error(&args).to_string().contains("carrier-pigeon"));
    }

    #[test]
    fn scripted_backend_requires_a_script_dir() {
        let args = BackendArgs {
            backend: Some("scripted".into()),
            scripts: None,
        };
        assert!(backend_error(&args).to_string().contains("--scripts"));
    }

    #[test]
    fn scripted_backend_loads_reply_files() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("supervisor__any__any.txt"), "{}").unwrap();
        let args = BackendArgs {
            backend: Some("scripted".into()),
            scripts: Some(dir.path().to_path_buf()),
        };
        let backend = build_backend(&args, &FileConfig::default()).unwrap();
        assert_eq!(backend.backend_name(), "scripted");
    }

    #[test]
    fn exec_timeout_flag_beats_the_config_value() {
        let args = ExecArgs {
            interpreter: None,
            exec_timeout: Some(2),
        };
        let cfg: FileConfig =
            toml::from_str("interpreter = \"python3.12\"\nexec_timeout_secs = 90\n").unwrap();
        let exec = build_exec(&args, &cfg);
        assert_eq!(exec.interpreter, "python3.12");
        assert_eq!(exec.timeout, Duration::from_secs(2));
    }
}
