//! ArXiv search tool for the worker agent: Atom feed parsing plus the
//! scripted/live/disabled tool switch. Live requests go through the
//! gateway's HTTP helper; this module never opens sockets itself.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::llm::{http, GatewayError};

/// Public query endpoint; override the base for tests and mirrors.
pub const ARXIV_API_BASE: &str = "http://export.arxiv.org/api/query";

const MAX_RESULTS: usize = 3;
const LIVE_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArxivEntry {
    pub title: String,
    pub summary: String,
    pub link: String,
}

/// How the worker's literature search behaves in this run.
#[derive(Debug, Clone, Default)]
pub enum ArxivTool {
    /// Query the Atom API at `base_url`.
    Live { base_url: String },
    /// Return these entries for every query; keeps runs offline and
    /// deterministic.
    Scripted(Vec<ArxivEntry>),
    #[default]
    Disabled,
}

/// Tool switchboard handed to the workflow. Web search has no backend in
/// this build; enabling it only changes the insufficiency note the worker
/// sees.
#[derive(Debug, Clone, Default)]
pub struct ToolsConfig {
    pub arxiv: ArxivTool,
    pub web_search_enabled: bool,
}

impl ToolsConfig {
    pub fn live() -> Self {
        ToolsConfig {
            arxiv: ArxivTool::Live {
                base_url: ARXIV_API_BASE.to_string(),
            },
            web_search_enabled: false,
        }
    }

    pub fn scripted(entries: Vec<ArxivEntry>) -> Self {
        ToolsConfig {
            arxiv: ArxivTool::Scripted(entries),
            web_search_enabled: false,
        }
    }
}

/// Runs one search. Errors come back as plain strings because a tool
/// failure never aborts a run; the caller folds the message into the
/// worker's prompt as a limitation note.
pub(crate) fn search(tools: &ToolsConfig, query: &str) -> Result<Vec<ArxivEntry>, String> {
    match &tools.arxiv {
        ArxivTool::Disabled => Err("arxiv search is disabled in this run".to_string()),
        ArxivTool::Scripted(entries) => Ok(entries.iter().take(MAX_RESULTS).cloned().collect()),
        ArxivTool::Live { base_url } => {
            let url = query_url(base_url, query);
            let body = http::get_text(&url, LIVE_TIMEOUT).map_err(|e| match e {
                GatewayError::Transport { message, .. } => {
                    format!("arxiv request failed: {message}")
                }
                other => format!("arxiv request failed: {other}"),
            })?;
            parse_feed(&body)
        }
    }
}

pub(crate) fn query_url(base_url: &str, query: &str) -> String {
    format!(
        "{}?search_query=all:{}&start=0&max_results={MAX_RESULTS}",
        base_url.trim_end_matches('/'),
        percent_encode(query)
    )
}

/// Numbered digest of search hits for the worker prompt.
pub(crate) fn render_entries(entries: &[ArxivEntry]) -> String {
    let mut out = String::new();
    for (position, entry) in entries.iter().enumerate() {
        if position > 0 {
            out.push('\n');
        }
        out.push_str(&format!(
            "{}. {}\n   {}\n   {}\n",
            position + 1,
            entry.title,
            entry.link,
            entry.summary
        ));
    }
    out
}

/// RFC 3986 unreserved characters pass through; everything else becomes
/// %XX. The query API treats %20 as the phrase separator.
fn percent_encode(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for byte in raw.bytes() {
        match byte {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'.' | b'_' | b'~' => {
                out.push(byte as char)
            }
            _ => out.push_str(&format!("%{byte:02X}")),
        }
    }
    out
}

#[derive(Debug, Deserialize)]
struct Feed {
    #[serde(default)]
    entry: Vec<FeedEntry>,
}

#[derive(Debug, Deserialize)]
struct FeedEntry {
    #[serde(default)]
    title: String,
    #[serde(default)]
    summary: String,
    #[serde(default)]
    id: String,
    #[serde(default)]
    link: Vec<FeedLink>,
}

#[derive(Debug, Deserialize)]
struct FeedLink {
    #[serde(rename = "@href")]
    href: String,
    #[serde(rename = "@rel")]
    rel: Option<String>,
}

pub(crate) fn parse_feed(xml: &str) -> Result<Vec<ArxivEntry>, String> {
    let feed: Feed =
        quick_xml::de::from_str(xml).map_err(|e| format!("unparseable arxiv feed: {e}"))?;
    Ok(feed
        .entry
        .into_iter()
        .take(MAX_RESULTS)
        .map(|entry| {
            let link = entry
                .link
                .iter()
                .find(|l| l.rel.as_deref() == Some("alternate"))
                .or_else(|| entry.link.first())
                .map(|l| l.href.clone())
                .unwrap_or(entry.id);
            ArxivEntry {
                title: squish(&entry.title),
                summary: squish(&entry.summary),
                link,
            }
        })
        .collect())
}

/// Feed text arrives wrapped and indented; collapse whitespace runs.
fn squish(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    const FEED: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<feed xmlns="http://www.w3.org/2005/Atom">
  <title>ArXiv Query: search_query=all:membrane</title>
  <entry>
    <id>http://arxiv.org/abs/2101.00001v1</id>
    <title>Nanofiltration membranes
      for water treatment</title>
    <summary>
      A survey of membrane materials.
    </summary>
    <link href="http://arxiv.org/abs/2101.00001v1" rel="alternate" type="text/html"/>
    <link href="http://arxiv.org/pdf/2101.00001v1" rel="related" type="application/pdf"/>
  </entry>
  <entry>
    <id>http://arxiv.org/abs/2102.00002v2</id>
    <title>Solar-driven purification</title>
    <summary>Energy budgets.</summary>
  </entry>
</feed>"#;

    #[test]
    fn feed_entries_are_normalized_and_linked() {
        let entries = parse_feed(FEED).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(
            entries[0].title,
            "Nanofiltration membranes for water treatment"
        );
        assert_eq!(entries[0].summary, "A survey of membrane materials.");
        assert_eq!(entries[0].link, "http://arxiv.org/abs/2101.00001v1");
        // No alternate link on the second entry: the id stands in.
        assert_eq!(entries[1].link, "http://arxiv.org/abs/2102.00002v2");
    }

    #[test]
    fn query_url_percent_encodes_the_query() {
        let url = query_url("http://example.test/api/query/", "solar UV-C dose");
        assert_eq!(
            url,
            "http://example.test/api/query?search_query=all:solar%20UV-C%20dose&start=0&max_results=3"
        );
    }

    #[test]
    fn scripted_tool_caps_results_at_three() {
        let entry = ArxivEntry {
            title: "t".into(),
            summary: "s".into(),
            link: "l".into(),
        };
        let tools = ToolsConfig::scripted(vec![entry.clone(); 5]);
        assert_eq!(search(&tools, "anything").unwrap().len(), 3);
        assert!(search(&ToolsConfig::default(), "anything").is_err());
    }

    #[test]
    fn rendering_numbers_the_hits() {
        let entries = parse_feed(FEED).unwrap();
        let rendered = render_entries(&entries);
        assert!(rendered.starts_with("1. Nanofiltration"));
        assert!(rendered.contains("\n2. Solar-driven purification"));
    }
}
