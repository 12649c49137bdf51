//! M4 script execution. Each physics-model script runs as
//! `{interpreter} {file} --help` with an empty scratch directory as its
//! working directory and a hard wall-clock timeout, so a hostile or
//! runaway script can neither touch evaluator state nor hang the run.
//! Success is exit status 0, nothing else.

use std::process::{Command, Stdio};
use std::time::Duration;

use wait_timeout::ChildExt;

use crate::dsg::DesignState;

use super::MetricsError;

pub const DEFAULT_EXEC_TIMEOUT: Duration = Duration::from_secs(30);

/// How to invoke scripts. `interpreter` is split on whitespace, so flags
/// like `python3 -I` work.
#[derive(Debug, Clone)]
pub struct ExecConfig {
    pub interpreter: String,
    pub timeout: Duration,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            interpreter: "python3".to_string(),
            timeout: DEFAULT_EXEC_TIMEOUT,
        }
    }
}

/// Outcome tally. `fraction()` is 0 when there was nothing to run; the
/// caller distinguishes that case via `total`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScriptStats {
    pub total: usize,
    pub passed: usize,
}

impl ScriptStats {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.passed as f64 / self.total as f64
        }
    }
}

pub(super) fn run_scripts(
    state: &DesignState,
    config: &ExecConfig,
) -> Result<ScriptStats, MetricsError> {
    let scripts: Vec<&str> = state
        .nodes
        .values()
        .flat_map(|node| node.physics_models.iter())
        .filter(|model| !model.code.is_empty())
        .map(|model| model.code.as_str())
        .collect();
    if scripts.is_empty() {
        return Ok(ScriptStats {
            total: 0,
            passed: 0,
        });
    }
    probe_interpreter(config)?;

    #[cfg(feature = "parallel")]
    let results: Result<Vec<bool>, MetricsError> = {
        use rayon::prelude::*;
        scripts
            .par_iter()
            .map(|code| run_one(code, config))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Result<Vec<bool>, MetricsError> =
        scripts.iter().map(|code| run_one(code, config)).collect();

    let results = results?;
    Ok(ScriptStats {
        total: results.len(),
        passed: results.iter().filter(|&&ok| ok).count(),
    })
}

/// Fails fast when the interpreter itself cannot start, so a missing
/// binary reads as a configuration error rather than N failed scripts.
fn probe_interpreter(config: &ExecConfig) -> Result<(), MetricsError> {
    let (program, args) = split_command(&config.interpreter)?;
    let spawned = Command::new(program)
        .args(args)
        .arg("--version")
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn();
    match spawned {
        Ok(mut child) => {
            child
                .wait()
                .map_err(|e| MetricsError::Exec(e.to_string()))?;
            Ok(())
        }
        Err(e) => Err(MetricsError::InterpreterMissing {
            command: config.interpreter.clone(),
            message: e.to_string(),
        }),
    }
}

fn split_command(command: &str) -> Result<(&str, Vec<&str>), MetricsError> {
    let mut parts = command.split_whitespace();
    let program = parts
        .next()
        .ok_or_else(|| MetricsError::InterpreterMissing {
            command: command.to_string(),
            message: "empty command".to_string(),
        })?;
    Ok((program, parts.collect()))
}

fn run_one(code: &str, config: &ExecConfig) -> Result<bool, MetricsError> {
    let exec_err = |e: std::io::Error| MetricsError::Exec(e.to_string());
    let script_dir = tempfile::tempdir().map_err(exec_err)?;
    let work_dir = tempfile::tempdir().map_err(exec_err)?;
    let script_path = script_dir.path().join("model_script.py");
    std::fs::write(&script_path, code).map_err(exec_err)?;

    let (program, args) = split_command(&config.interpreter)?;
    let mut child = Command::new(program)
        .args(args)
        .arg(&script_path)
        .arg("--help")
        .current_dir(work_dir.path())
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                MetricsError::InterpreterMissing {
                    command: config.interpreter.clone(),
                    message: e.to_string(),
                }
            } else {
                MetricsError::Exec(e.to_string())
            }
        })?;
    match child.wait_timeout(config.timeout).map_err(exec_err)? {
        Some(status) => Ok(status.success()),
        None => {
            child.kill().ok();
            child.wait().ok();
            Ok(false)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsg::{DesignNode, PhysicsModel};

    fn state_with_scripts(codes: &[&str]) -> DesignState {
        let mut state = DesignState::default();
        let mut node = DesignNode {
            node_id: "n".to_string(),
            node_kind: "component".to_string(),
            name: "scripted".to_string(),
            description: String::new(),
            embodiment: None,
            physics_models: Vec::new(),
            linked_reqs: Vec::new(),
            verification_plan: String::new(),
            maturity: String::new(),
            tags: Vec::new(),
        };
        for code in codes {
            node.physics_models.push(PhysicsModel {
                equation: String::new(),
                code: code.to_string(),
                assumptions: Vec::new(),
                status: Default::default(),
            });
        }
        state.nodes.insert(node.node_id.clone(), node);
        state
    }

    fn fast_config() -> ExecConfig {
        ExecConfig {
            interpreter: "python3".to_string(),
            timeout: Duration::from_millis(500),
        }
    }

    #[test]
    fn script_ignoring_arguments_passes() {
        let state = state_with_scripts(&["print('mass estimate')\n"]);
        let stats = run_scripts(&state, &fast_config()).unwrap();
        assert_eq!(
            stats,
            ScriptStats {
                total: 1,
                passed: 1
            }
        );
        assert_eq!(stats.fraction(), 1.0);
    }

    #[test]
    fn argparse_script_exits_zero_under_help() {
        let code = "import argparse\np = argparse.ArgumentParser()\np.parse_args()\n";
        let state = state_with_scripts(&[code]);
        let stats = run_scripts(&state, &fast_config()).unwrap();
        assert_eq!(stats.passed, 1);
    }

    #[test]
    fn syntax_error_fails_the_script() {
        let state = state_with_scripts(&["def broken(:\n"]);
        let stats = run_scripts(&state, &fast_config()).unwrap();
        assert_eq!(
            stats,
            ScriptStats {
                total: 1,
                passed: 0
            }
        );
    }

    #[test]
    fn runaway_script_is_killed_at_the_timeout() {
        let state = state_with_scripts(&["while True:\n    pass\n"]);
        let stats = run_scripts(&state, &fast_config()).unwrap();
        assert_eq!(
            stats,
            ScriptStats {
                total: 1,
                passed: 0
            }
        );
    }

    #[test]
    fn empty_code_fields_are_not_scripts() {
        let state = state_with_scripts(&[]);
        let stats = run_scripts(&state, &fast_config()).unwrap();
        assert_eq!(
            stats,
            ScriptStats {
                total: 0,
                passed: 0
            }
        );
        assert_eq!(stats.fraction(), 0.0);
    }

    #[test]
    fn missing_interpreter_is_a_configuration_error() {
        let state = state_with_scripts(&["print(1)\n"]);
        let config = ExecConfig {
            interpreter: "no-such-interpreter-anywhere".to_string(),
            timeout: Duration::from_millis(500),
        };
        assert!(matches!(
            run_scripts(&state, &config),
            Err(MetricsError::InterpreterMissing { .. })
        ));
    }
}
