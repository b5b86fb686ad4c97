use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use std::sync::Arc;

use super::engine::{instantiate, Derivation};
use super::matcher::BindingSet;
use super::rule::Rule;
use crate::rdf::{parse_n3, Graph, Term, Triple};

#[derive(Serialize)]
struct TraceLine<'a> {
    rule: &'a str,
    bindings: HashMap<&'a str, String>,
    produced: Vec<String>,
    iteration: usize,
}

#[derive(Deserialize)]
struct OwnedTraceLine {
    rule: String,
    bindings: HashMap<String, String>,
    produced: Vec<String>,
    iteration: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace line {line}: {source}")]
    Io { line: usize, source: io::Error },
    #[error("trace line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("trace line {line}: cannot parse `{text}`: {message}")]
    Term { line: usize, text: String, message: String },
}

/// Writes one JSON object per derivation. Terms and triples use N3 syntax
/// with full IRIs.
pub fn write_trace(out: &mut impl Write, derivations: &[Derivation]) -> io::Result<()> {
    for d in derivations {
        let line = TraceLine {
            rule: &d.rule,
            bindings: d.bindings.iter().map(|(k, v)| (k.as_ref(), v.to_string())).collect(),
            produced: d.produced.iter().map(|t| t.to_string()).collect(),
            iteration: d.iteration,
        };
        serde_json::to_writer(&mut *out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads back what [`write_trace`] wrote.
pub fn read_trace(input: impl BufRead) -> Result<Vec<Derivation>, TraceError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| TraceError::Io { line: line_no, source })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: OwnedTraceLine =
            serde_json::from_str(&line).map_err(|source| TraceError::Json { line: line_no, source })?;
        let parse = |text: &str| -> Result<Vec<Triple>, TraceError> {
            parse_n3(text, None)
                .map(|d| d.graph.into_triples().into_iter().collect())
                .map_err(|e| TraceError::Term {
                    line: line_no,
                    text: text.to_string(),
                    message: e.to_string(),
                })
        };
        let mut bindings = BindingSet::new();
        for (var, text) in &raw.bindings {
            let triples = parse(&format!("<urn:trace:s> <urn:trace:p> {text}."))?;
            let term = triples.into_iter().next().map(|t| t.object().clone());
            let term = term.ok_or_else(|| TraceError::Term {
                line: line_no,
                text: text.clone(),
                message: "no term".into(),
            })?;
            bindings.insert(Arc::from(var.as_str()), term);
        }
        let mut produced = Vec::new();
        for text in &raw.produced {
            produced.extend(parse(text)?);
        }
        out.push(Derivation {
            rule: Arc::from(raw.rule.as_str()),
            bindings,
            produced,
            iteration: raw.iteration,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplayError {
    #[error("derivation refers to unknown rule {0}")]
    UnknownRule(String),
    #[error("rule {rule}: {message}")]
    Instantiation { rule: String, message: String },
}

/// Re-instantiates every derivation's consequent: the union of all
/// conclusions, whether or not they were new when first derived.
pub fn replay(rules: &[Rule], derivations: &[Derivation]) -> Result<Graph, ReplayError> {
    let by_id: HashMap<&str, &Rule> = rules.iter().map(|r| (r.id(), r)).collect();
    let mut out = Graph::new();
    let mut skolems: HashMap<Arc<str>, Term> = HashMap::new();
    for d in derivations {
        let rule = by_id
            .get(d.rule.as_ref())
            .ok_or_else(|| ReplayError::UnknownRule(d.rule.to_string()))?;
        skolems.clear();
        for t in rule.consequent().triples() {
            let triple =
                instantiate(rule, t, &d.bindings, &mut skolems).map_err(|message| ReplayError::Instantiation {
                    rule: d.rule.to_string(),
                    message,
                })?;
            out.insert(triple);
        }
    }
    Ok(out)
}
