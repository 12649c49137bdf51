//! Deterministic offline backend: canned replies keyed by
//! (role, step index, seed), with wildcard fallbacks.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use super::{
    count_completion_tokens, CompletionRequest, CompletionResult, FinishReason, GatewayError,
};

#[derive(Debug, Error)]
pub enum ScriptTableError {
    #[error("cannot read script directory {path}: {message}")]
    Unreadable { path: String, message: String },
    #[error("script file name {0:?} is not ROLE__STEP__SEED.txt (STEP/SEED digits or \"any\")")]
    BadFileName(String),
}

/// Canned-reply table. Lookup tries the most specific key first and
/// degrades through the wildcard combinations:
/// (role, step, seed) → (role, step, *) → (role, *, seed) → (role, *, *).
#[derive(Debug, Clone, Default)]
pub struct ScriptTable {
    entries: HashMap<(String, Option<u32>, Option<u64>), String>,
}

impl ScriptTable {
    pub fn new() -> Self {
        ScriptTable::default()
    }

    /// Registers a reply. `None` in `step` or `seed` makes the entry a
    /// wildcard on that axis. Later inserts with the same key win.
    pub fn insert(
        &mut self,
        role: &str,
        step: Option<u32>,
        seed: Option<u64>,
        text: impl Into<String>,
    ) {
        self.entries
            .insert((role.to_string(), step, seed), text.into());
    }

    /// Wildcard on both step and seed: the role's reply for every call.
    pub fn wildcard(&mut self, role: &str, text: impl Into<String>) {
        self.insert(role, None, None, text);
    }

    pub fn lookup(&self, role: &str, step: u32, seed: u64) -> Option<&str> {
        let probes = [
            (Some(step), Some(seed)),
            (Some(step), None),
            (None, Some(seed)),
            (None, None),
        ];
        probes.iter().find_map(|(s, d)| {
            self.entries
                .get(&(role.to_string(), *s, *d))
                .map(String::as_str)
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Loads every `*.txt` file in `dir`. File names encode the key as
    /// `ROLE__STEP__SEED.txt`, where STEP and SEED are decimal digits or
    /// the literal `any` (wildcard), e.g. `supervisor__0__any.txt`.
    pub fn from_dir(dir: &Path) -> Result<Self, ScriptTableError> {
        let unreadable = |message: String| ScriptTableError::Unreadable {
            path: dir.display().to_string(),
            message,
        };
        let mut table = ScriptTable::new();
        for entry in fs::read_dir(dir).map_err(|e| unreadable(e.to_string()))? {
            let path = entry.map_err(|e| unreadable(e.to_string()))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| ScriptTableError::BadFileName(path.display().to_string()))?;
            let bad = || ScriptTableError::BadFileName(stem.to_string());
            let mut parts = stem.rsplitn(3, "__");
            let seed_part = parts.next().ok_or_else(bad)?;
            let step_part = parts.next().ok_or_else(bad)?;
            let role = parts.next().ok_or_else(bad)?;
            let step = parse_axis::<u32>(step_part).map_err(|_| bad())?;
            let seed = parse_axis::<u64>(seed_part).map_err(|_| bad())?;
            let text = fs::read_to_string(&path).map_err(|e| unreadable(e.to_string()))?;
            table.insert(role, step, seed, text);
        }
        Ok(table)
    }
}

fn parse_axis<T: std::str::FromStr>(part: &str) -> Result<Option<T>, ()> {
    if part == "any" {
        Ok(None)
    } else {
        part.parse::<T>().map(Some).map_err(|_| ())
    }
}

pub(super) fn complete(
    table: &ScriptTable,
    request: &CompletionRequest,
    step: u32,
) -> Result<CompletionResult, GatewayError> {
    let text = table
        .lookup(&request.agent_tag, step, request.seed)
        .ok_or_else(|| GatewayError::ScriptMiss {
            role: request.agent_tag.clone(),
            step,
            seed: request.seed,
        })?;
    Ok(
        match truncation_point(text, request.max_completion_tokens) {
            Some(cut) => {
                let truncated = text[..cut].to_string();
                let completion_tokens = count_completion_tokens(None, &truncated);
                CompletionResult {
                    text: truncated,
                    completion_tokens,
                    finish_reason: FinishReason::Length,
                    latency_seconds: 0.0,
                }
            }
            None => CompletionResult {
                text: text.to_string(),
                completion_tokens: count_completion_tokens(None, text),
                finish_reason: FinishReason::Stop,
                latency_seconds: 0.0,
            },
        },
    )
}

/// Byte offset at which to cut `text` so exactly `max_tokens`
/// whitespace-delimited tokens remain, or `None` when the text already
/// fits the budget. The cut preserves original bytes, including any
/// whitespace run inside the kept prefix.
fn truncation_point(text: &str, max_tokens: u32) -> Option<usize> {
    let total = text.split_whitespace().count() as u64;
    if total <= u64::from(max_tokens) {
        return None;
    }
    let mut seen = 0u32;
    let mut in_token = false;
    for (offset, c) in text.char_indices() {
        if c.is_whitespace() {
            if in_token {
                in_token = false;
                seen += 1;
                if seen == max_tokens {
                    return Some(offset);
                }
            }
        } else {
            in_token = true;
        }
    }
    // total > max_tokens guarantees the cut is found mid-scan.
    unreachable!("token budget exceeded but no cut point found")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_keeps_exact_token_budget() {
        assert_eq!(truncation_point("a b c", 5), None);
        assert_eq!(truncation_point("a b c", 3), None);
        assert_eq!(truncation_point("a b c ", 3), None);
        let cut = truncation_point("aa bb cc dd", 2).unwrap();
        assert_eq!(&"aa bb cc dd"[..cut], "aa bb");
        assert_eq!(truncation_point("  x  y z", 1), Some(3));
    }

    #[test]
    fn wildcard_lookup_order_is_most_specific_first() {
        let mut table = ScriptTable::new();
        table.insert("r", None, None, "any/any");
        table.insert("r", Some(1), None, "step1/any");
        table.insert("r", None, Some(9), "any/seed9");
        table.insert("r", Some(1), Some(9), "exact");
        assert_eq!(table.lookup("r", 1, 9), Some("exact"));
        assert_eq!(table.lookup("r", 1, 3), Some("step1/any"));
        assert_eq!(table.lookup("r", 0, 9), Some("any/seed9"));
        assert_eq!(table.lookup("r", 4, 4), Some("any/any"));
        assert_eq!(table.lookup("other", 0, 0), None);
    }

    #[test]
    fn from_dir_parses_key_encodings() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("supervisor__0__any.txt"), "go").unwrap();
        std::fs::write(dir.path().join("generator_2as__any__3.txt"), "designs").unwrap();
        std::fs::write(dir.path().join("notes.md"), "ignored").unwrap();
        let table = ScriptTable::from_dir(dir.path()).unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(table.lookup("supervisor", 0, 99), Some("go"));
        assert_eq!(table.lookup("generator_2as", 7, 3), Some("designs"));
    }

    #[test]
    fn from_dir_rejects_malformed_names() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("supervisor.txt"), "x").unwrap();
        assert!(matches!(
            ScriptTable::from_dir(dir.path()),
            Err(ScriptTableError::BadFileName(_))
        ));
    }
}
