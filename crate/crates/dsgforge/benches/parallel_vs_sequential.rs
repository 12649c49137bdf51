//! Compares the rayon-parallel execution paths against single-threaded
//! runs of the same work: the scripted experiment matrix (worker-pool
//! fan-out over run cells) and the M4 script probe (one subprocess per
//! physics script).

use std::time::Duration;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use tempfile::TempDir;

use dsgforge::dsg::parse_design_state;
use dsgforge::harness::{self, MatrixSpec, RunOptions};
use dsgforge::llm::{BackendConfig, ScriptTable};
use dsgforge::metrics::{m4_code_executability, ExecConfig};
use dsgforge::workflow::SystemKind;

const CDC: &str = "Design a solar water filter.\n\nFINALIZED\n";

fn proposal_doc(id: &str, name: &str) -> String {
    format!(
        r#"```json
{{"nodes": {{"{id}": {{"name": "{name}", "node_kind": "component"}}}}, "edges": []}}
```"#
    )
}

/// Happy-path replies for both workflows, valid under any seed.
fn dual_workflow_table() -> ScriptTable {
    let p0 = "11111111-1111-4111-8111-111111111111";
    let p1 = "22222222-2222-4222-8222-222222222222";
    let p2 = "33333333-3333-4333-8333-333333333333";
    let mut table = ScriptTable::new();
    table.insert(
        "supervisor",
        Some(0),
        None,
        r#"{"instructions": "explore the space", "stop": false}"#,
    );
    table.insert(
        "supervisor",
        Some(1),
        None,
        r#"{"instructions": "", "stop": true}"#,
    );
    table.wildcard(
        "generator",
        format!(
            "{}\n{}\n{}",
            proposal_doc(p0, "membrane"),
            proposal_doc(p1, "uv"),
            proposal_doc(p2, "thermal")
        ),
    );
    table.wildcard(
        "reflector",
        r#"{"critiques": [
            {"proposal_index": 0, "text": "weak flux"},
            {"proposal_index": 1, "text": "solid"},
            {"proposal_index": 2, "text": "heavy"}]}"#,
    );
    table.wildcard(
        "ranker",
        r#"{"scores": [
            {"proposal_index": 0, "score": 7, "justification": "ok"},
            {"proposal_index": 1, "score": 9, "justification": "best"},
            {"proposal_index": 2, "score": 4, "justification": "bulky"}]}"#,
    );
    table.wildcard(
        "meta_reviewer",
        r#"{"selected_proposal_index": 1, "detailed_summary_for_graph": "add storage",
            "decisions": [
            {"proposal_index": 0, "final_status": "rejected", "reason": "flux"},
            {"proposal_index": 1, "final_status": "selected", "reason": "best"},
            {"proposal_index": 2, "final_status": "needs_iteration", "reason": "mass"}]}"#,
    );
    table.wildcard("generator_2as", proposal_doc(p0, "membrane"));
    table.insert(
        "reflector_2as",
        Some(0),
        None,
        r#"{"selected_index": 0, "terminate": false, "reason": "expand",
            "statuses": [{"proposal_index": 0, "final_status": "selected", "reason": "only"}]}"#,
    );
    table.insert(
        "reflector_2as",
        Some(1),
        None,
        r#"{"selected_index": 0, "terminate": true, "reason": "complete",
            "statuses": [{"proposal_index": 0, "final_status": "selected", "reason": "done"}]}"#,
    );
    table
}

fn bench_matrix(c: &mut Criterion) {
    let spec = MatrixSpec {
        models: vec!["alpha-70b".into()],
        systems: vec![SystemKind::Mas, SystemKind::TwoAs],
        temperatures: vec![0.0, 1.0],
        seeds: vec![0, 1],
    };
    let mut group = c.benchmark_group("matrix_8_runs");
    group.sample_size(10);
    for (label, parallelism) in [("sequential", 1usize), ("parallel_4", 4)] {
        let mut options = RunOptions::new(CDC, BackendConfig::scripted(dual_workflow_table()));
        options.parallelism = parallelism;
        group.bench_function(label, |b| {
            b.iter_batched(
                || TempDir::new().unwrap(),
                |dir| {
                    harness::run_matrix(&spec, &options, dir.path()).unwrap();
                    dir
                },
                BatchSize::PerIteration,
            )
        });
    }
    group.finish();
}

fn bench_m4(c: &mut Criterion) {
    let models: Vec<String> = (0..8)
        .map(|_| r#"{"equation": "q = a", "code": "print('ok')\n"}"#.to_string())
        .collect();
    let state = parse_design_state(&format!(
        r#"{{"nodes": {{"00000000-0000-4000-8000-000000000001":
            {{"physics_models": [{}]}}}}, "edges": []}}"#,
        models.join(", ")
    ))
    .unwrap();
    let exec = ExecConfig::default();

    let mut group = c.benchmark_group("m4_8_scripts");
    group.sample_size(10);
    group.measurement_time(Duration::from_secs(10));
    for (label, threads) in [("sequential", 1usize), ("parallel_4", 4)] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        group.bench_function(label, |b| {
            b.iter(|| pool.install(|| m4_code_executability(&state, &exec).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_matrix, bench_m4);
criterion_main!(benches);
