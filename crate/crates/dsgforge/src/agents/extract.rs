//! Helpers for fishing structured payloads out of free-form model replies:
//! fenced code blocks and brace-balanced JSON object candidates.

use std::ops::Range;

/// Fenced blocks with byte spans for their content. A fence is a line
/// whose trimmed form starts with three backticks; an unclosed fence runs
/// to the end of the text.
fn fenced_spans(text: &str) -> Vec<(String, Range<usize>)> {
    let mut spans = Vec::new();
    let mut language = String::new();
    let mut content_start: Option<usize> = None;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let line_start = offset;
        offset += line.len();
        let trimmed = line.trim_start();
        if let Some(rest) = trimmed.strip_prefix("```") {
            match content_start.take() {
                Some(start) => spans.push((language.clone(), start..line_start)),
                None => {
                    language = rest.trim().to_lowercase();
                    content_start = Some(offset);
                }
            }
        }
    }
    if let Some(start) = content_start {
        spans.push((language, start..text.len()));
    }
    spans
}

/// Fenced blocks in `text`, as (language tag, content) pairs.
pub fn fenced_blocks(text: &str) -> Vec<(String, String)> {
    fenced_spans(text)
        .into_iter()
        .map(|(lang, span)| (lang, text[span].to_string()))
        .collect()
}

/// Candidate JSON objects in reply text: every top-level brace-balanced
/// `{…}` run inside fenced blocks, plus every one in the unfenced
/// remainder. String literals and escapes are honored, so braces inside
/// strings do not confuse the scan.
pub fn json_candidates(text: &str) -> Vec<String> {
    let mut candidates = Vec::new();
    let mut remainder = text.as_bytes().to_vec();
    for (_, span) in fenced_spans(text) {
        scan_objects(&text[span.clone()], &mut candidates);
        remainder[span].fill(b' ');
    }
    let remainder = String::from_utf8(remainder).expect("blanking preserves UTF-8");
    scan_objects(&remainder, &mut candidates);
    candidates
}

fn scan_objects(text: &str, out: &mut Vec<String>) {
    let mut depth = 0usize;
    let mut start = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (offset, c) in text.char_indices() {
        if in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        match c {
            '"' if depth > 0 => in_string = true,
            '{' => {
                if depth == 0 {
                    start = offset;
                }
                depth += 1;
            }
            '}' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    out.push(text[start..offset + c.len_utf8()].to_string());
                }
            }
            _ => {}
        }
    }
}

/// The Python script in a coder reply: the longest `python`-tagged fenced
/// block (ties keep the first). The newline before the closing fence is a
/// separator, not script text, so one trailing newline is dropped. Returns
/// an error message suitable for a re-prompt when no such block exists.
pub fn python_block(text: &str) -> Result<String, String> {
    fenced_blocks(text)
        .into_iter()
        .filter(|(lang, _)| lang == "python" || lang == "py" || lang == "python3")
        .max_by_key(|(_, content)| content.len())
        .map(|(_, content)| {
            content
                .strip_suffix('\n')
                .map(str::to_string)
                .unwrap_or(content)
        })
        .ok_or_else(|| "reply contains no ```python fenced code block".to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_objects_in_prose_and_fences() {
        let text = r#"Here is design A:
```json
{"nodes": {}, "edges": []}
```
And inline: {"a": 1} trailing."#;
        let found = json_candidates(text);
        assert_eq!(found.len(), 2);
        assert!(found[0].contains("nodes"));
        assert_eq!(found[1], r#"{"a": 1}"#);
    }

    #[test]
    fn braces_inside_strings_do_not_split_objects() {
        let text = r#"{"text": "a } b { c", "n": 1}"#;
        let found = json_candidates(text);
        assert_eq!(found, vec![text.to_string()]);
    }

    #[test]
    fn multiple_objects_in_one_fence_are_separated() {
        let text = "```json\n{\"a\": 1}\n{\"b\": 2}\n```";
        assert_eq!(json_candidates(text).len(), 2);
    }

    #[test]
    fn fenced_content_is_not_scanned_twice() {
        let text = "{\"x\": 1}\n```json\n{\"x\": 1}\n```";
        assert_eq!(json_candidates(text).len(), 2);
    }

    #[test]
    fn nested_objects_count_once() {
        let found = json_candidates(r#"{"outer": {"inner": {}}}"#);
        assert_eq!(found.len(), 1);
    }

    #[test]
    fn python_block_takes_the_longest() {
        let text = "```python\nx = 1\n```\nthen\n```python\nimport argparse\nprint('hello')\n```";
        let code = python_block(text).unwrap();
        assert!(code.contains("argparse"));
    }

    #[test]
    fn missing_python_block_is_an_error() {
        assert!(python_block("no code here").is_err());
        assert!(python_block("```json\n{}\n```").is_err());
    }

    #[test]
    fn unclosed_fence_runs_to_the_end() {
        let blocks = fenced_blocks("```python\nprint(1)");
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].1, "print(1)");
    }
}
