//! Warning normalization and likelihood-ordered reports.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt::Write;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::likelihood::{Engine, EngineError};
use crate::sdg::VertexId;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WarningRecord {
    pub file: String,
    pub line: u32,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WarningFormat {
    Gcc,
    Json,
}

impl WarningFormat {
    /// A JSON array if the text starts with `[`, gcc lines otherwise.
    pub fn detect(text: &str) -> Self {
        if text.trim_start().starts_with('[') {
            WarningFormat::Json
        } else {
            WarningFormat::Gcc
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Normalized {
    pub records: Vec<WarningRecord>,
    pub duplicates: usize,
    pub malformed: usize,
}

fn gcc_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^(.+?):(\d+):(?:\d+:)?\s*(?:(warning|error|note|info):\s*)?(.*?)\s*$").expect("valid regex")
    })
}

/// Parses a warning stream. Malformed entries are counted and skipped;
/// repeated (file, line, message) triples keep their first occurrence.
pub fn normalize_warnings(input: &str, format: WarningFormat) -> Normalized {
    let mut out = Normalized::default();
    let raw: Vec<Option<WarningRecord>> = match format {
        WarningFormat::Gcc => input
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let c = gcc_line().captures(l.trim_end())?;
                let line: u32 = c[2].parse().ok()?;
                Some(WarningRecord {
                    file: c[1].to_string(),
                    line,
                    message: c[4].to_string(),
                    severity: c.get(3).map(|m| m.as_str().to_string()),
                })
            })
            .collect(),
        WarningFormat::Json => {
            if input.trim().is_empty() {
                Vec::new()
            } else {
                match serde_json::from_str::<Vec<serde_json::Value>>(input) {
                    Ok(items) => items.into_iter().map(|v| serde_json::from_value::<WarningRecord>(v).ok()).collect(),
                    Err(_) => vec![None],
                }
            }
        }
    };
    let mut seen = HashSet::new();
    for r in raw {
        match r {
            Some(r) if r.line >= 1 && !r.message.is_empty() => {
                if seen.insert((r.file.clone(), r.line, r.message.clone())) {
                    out.records.push(r);
                } else {
                    out.duplicates += 1;
                }
            }
            _ => out.malformed += 1,
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedWarning {
    pub rank: usize,
    #[serde(flatten)]
    pub warning: WarningRecord,
    pub vertex_id: Option<VertexId>,
    /// `None` when no vertex covers the warning's line.
    pub likelihood: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    #[default]
    Location,
    /// Compare severity strings before the location.
    Severity,
}

/// Annotates every warning with its likelihood and orders the report.
/// With `parallel`, annotation runs on the current rayon pool; the output is
/// the same either way.
pub fn rank(
    engine: &Engine<'_>,
    warnings: &[WarningRecord],
    start: Option<VertexId>,
    tie: TieBreak,
    parallel: bool,
) -> Result<Vec<RankedWarning>, EngineError> {
    let g = engine.sdg();
    let vertices: Vec<Option<VertexId>> = warnings.iter().map(|w| g.vertex_at(&w.file, w.line).ok()).collect();
    let mapped: Vec<VertexId> = vertices.iter().flatten().copied().collect();
    let values = if parallel {
        engine.par_batch_likelihood(&mapped, start)?
    } else {
        engine.batch_likelihood(&mapped, start)?
    };
    let mut values = values.into_iter();

    let mut ranked: Vec<RankedWarning> = Vec::with_capacity(warnings.len());
    let mut unmapped = Vec::new();
    for (w, v) in warnings.iter().zip(vertices) {
        let r = RankedWarning {
            rank: 0,
            warning: w.clone(),
            vertex_id: v,
            likelihood: v.map(|_| values.next().expect("one result per mapped warning").likelihood),
        };
        if v.is_some() {
            ranked.push(r);
        } else {
            unmapped.push(r);
        }
    }
    ranked.sort_by(|a, b| {
        let la = a.likelihood.unwrap_or(0.0);
        let lb = b.likelihood.unwrap_or(0.0);
        lb.total_cmp(&la)
            .then_with(|| match tie {
                TieBreak::Severity => a.warning.severity.cmp(&b.warning.severity),
                TieBreak::Location => Ordering::Equal,
            })
            .then_with(|| a.warning.file.cmp(&b.warning.file))
            .then_with(|| a.warning.line.cmp(&b.warning.line))
            .then_with(|| a.warning.message.cmp(&b.warning.message))
    });
    ranked.extend(unmapped);
    for (i, r) in ranked.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(ranked)
}

pub fn to_tsv(ranked: &[RankedWarning]) -> String {
    let mut out = String::from("rank\tlikelihood\tfile\tline\tmessage\n");
    for r in ranked {
        let l = match r.likelihood {
            Some(p) => format!("{p:.6}"),
            None => "unmapped".to_string(),
        };
        let _ = writeln!(out, "{}\t{l}\t{}\t{}\t{}", r.rank, r.warning.file, r.warning.line, r.warning.message);
    }
    out
}

pub fn to_json(ranked: &[RankedWarning]) -> serde_json::Value {
    serde_json::Value::Array(
        ranked
            .iter()
            .map(|r| {
                serde_json::json!({
                    "rank": r.rank,
                    "likelihood": match r.likelihood {
                        Some(p) => serde_json::json!(p),
                        None => serde_json::json!("unmapped"),
                    },
                    "vertex_id": r.vertex_id.map(|v| v.0),
                    "file": r.warning.file,
                    "line": r.warning.line,
                    "message": r.warning.message,
                    "severity": r.warning.severity,
                })
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gcc_lines() {
        let n = normalize_warnings(
            "a.mc:12: possible null deref\nsrc/b.mc:3:7: warning: unused value\ngarbage\n",
            WarningFormat::Gcc,
        );
        assert_eq!(n.malformed, 1);
        assert_eq!(
            n.records[0],
            WarningRecord { file: "a.mc".into(), line: 12, message: "possible null deref".into(), severity: None }
        );
        assert_eq!(n.records[1].file, "src/b.mc");
        assert_eq!(n.records[1].line, 3);
        assert_eq!(n.records[1].severity.as_deref(), Some("warning"));
        assert_eq!(n.records[1].message, "unused value");
    }

    #[test]
    fn duplicates_collapse() {
        let n = normalize_warnings("a.mc:1: x\na.mc:1: x\n", WarningFormat::Gcc);
        assert_eq!(n.records.len(), 1);
        assert_eq!(n.duplicates, 1);
        assert_eq!(normalize_warnings("", WarningFormat::Gcc), Normalized::default());
    }

    #[test]
    fn json_input() {
        let n = normalize_warnings(
            r#"[{"file":"a.mc","line":2,"message":"m","severity":"high"},{"file":"a.mc","line":0,"message":"m"},{"nope":1}]"#,
            WarningFormat::Json,
        );
        assert_eq!(n.records.len(), 1);
        assert_eq!(n.records[0].severity.as_deref(), Some("high"));
        assert_eq!(n.malformed, 2);
        assert_eq!(normalize_warnings("{", WarningFormat::Json).malformed, 1);
    }

    fn warning(file: &str, line: u32, message: &str) -> WarningRecord {
        WarningRecord { file: file.into(), line, message: message.into(), severity: None }
    }

    const SRC: &str = "int main(int a, int b) {\n    if (a) {\n        if (b) {\n            x = 1;\n        }\n    }\n    if (b) {\n        y = 1;\n    }\n    return 0;\n    z = 2;\n}\n";

    fn ranked(ws: &[WarningRecord]) -> Vec<RankedWarning> {
        let g = crate::build_sdg(&crate::parse_program(SRC, "a.mc").unwrap());
        let e = Engine::new(&g, crate::BranchModel::simple());
        let out = rank(&e, ws, None, TieBreak::Location, false).unwrap();
        assert_eq!(out, rank(&e, ws, None, TieBreak::Location, true).unwrap());
        out
    }

    #[test]
    fn strict_order() {
        let r = ranked(&[warning("a.mc", 4, "inner"), warning("a.mc", 10, "ret")]);
        assert_eq!((r[0].rank, r[0].likelihood, r[0].warning.line), (1, Some(1.0), 10));
        assert_eq!((r[1].rank, r[1].likelihood, r[1].warning.line), (2, Some(0.25), 4));
    }

    #[test]
    fn equal_likelihood_ties_by_location() {
        let r = ranked(&[warning("src/a.mc", 8, "y"), warning("a.mc", 8, "y"), warning("a.mc", 2, "cond")]);
        let order: Vec<(&str, u32)> = r.iter().map(|x| (x.warning.file.as_str(), x.warning.line)).collect();
        assert_eq!(order, [("a.mc", 2), ("a.mc", 8), ("src/a.mc", 8)]);
        assert_eq!(r[1].likelihood, Some(0.5));
    }

    #[test]
    fn dead_code_is_last_among_mapped() {
        let r = ranked(&[warning("b.mc", 1, "elsewhere"), warning("a.mc", 11, "dead"), warning("a.mc", 4, "inner")]);
        assert_eq!(r[1].warning.message, "dead");
        assert_eq!(r[1].likelihood, Some(0.0));
        assert_eq!((r[2].rank, r[2].likelihood), (3, None));
    }
}
