use std::collections::BTreeMap;
use std::fmt::Write;

use super::term::{escape_string, Term, Triple};
use super::vocab::{rdf, xsd};
use super::Graph;
use crate::rules::Rule;

/// Renders `graph` as N3. Subjects are grouped with `;` and `,`, prefixes
/// are emitted sorted, and the output is a pure function of the triple set
/// and the prefix map.
pub fn serialize_n3(graph: &Graph) -> String {
    let w = TermWriter::new(graph.prefixes());
    let mut out = w.header();
    let mut current: Option<(&Term, &str)> = None;
    for t in graph {
        let (s, p) = (t.subject(), t.predicate_iri());
        match current {
            Some((cs, cp)) if cs == s && cp == p => {
                let _ = write!(out, ", {}", w.term(t.object()));
            }
            Some((cs, _)) if cs == s => {
                let _ = write!(out, ";\n    {} {}", w.predicate(p), w.term(t.object()));
            }
            prev => {
                if prev.is_some() {
                    out.push_str(".\n");
                }
                let _ = write!(out, "{} {} {}", w.term(s), w.predicate(p), w.term(t.object()));
            }
        }
        current = Some((s, p));
    }
    if current.is_some() {
        out.push_str(".\n");
    }
    out
}

/// Renders rules, one per line, abbreviated with `prefixes`.
pub fn serialize_rules(rules: &[Rule], prefixes: &BTreeMap<String, String>) -> String {
    let w = TermWriter::new(prefixes);
    let mut out = w.header();
    for rule in rules {
        let _ = writeln!(
            out,
            "{} => {}.",
            w.formula(rule.antecedent().triples()),
            w.formula(rule.consequent().triples())
        );
    }
    out
}

struct TermWriter<'a> {
    prefixes: &'a BTreeMap<String, String>,
    // Longest namespace first, so the most specific prefix wins.
    by_length: Vec<(&'a str, &'a str)>,
}

fn valid_local(local: &str) -> bool {
    if local.is_empty() {
        return true;
    }
    let mut chars = local.chars();
    let first = chars.next().unwrap();
    (first.is_ascii_alphanumeric() || first == '_')
        && local.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl<'a> TermWriter<'a> {
    fn new(prefixes: &'a BTreeMap<String, String>) -> Self {
        let mut by_length: Vec<_> = prefixes.iter().map(|(p, ns)| (p.as_str(), ns.as_str())).collect();
        by_length.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(b.0)));
        Self { prefixes, by_length }
    }

    fn header(&self) -> String {
        let mut out = String::new();
        for (p, ns) in self.prefixes {
            let _ = writeln!(out, "@prefix {p}: <{ns}>.");
        }
        if !self.prefixes.is_empty() {
            out.push('\n');
        }
        out
    }

    fn iri(&self, iri: &str) -> String {
        for (p, ns) in &self.by_length {
            if let Some(local) = iri.strip_prefix(ns) {
                if valid_local(local) {
                    return format!("{p}:{local}");
                }
            }
        }
        format!("<{iri}>")
    }

    fn predicate(&self, iri: &str) -> String {
        if iri == rdf::TYPE {
            "a".to_string()
        } else {
            self.iri(iri)
        }
    }

    fn term(&self, term: &Term) -> String {
        match term {
            Term::Iri(iri) => self.iri(iri),
            Term::Literal(lit) => {
                let quoted = format!("\"{}\"", escape_string(lit.lexical()));
                if lit.datatype() == xsd::STRING {
                    quoted
                } else {
                    format!("{quoted}^^{}", self.iri(lit.datatype()))
                }
            }
            Term::BlankNode(b) => format!("_:{b}"),
            Term::Variable(v) => format!("?{v}"),
            Term::List(items) => {
                let inner: Vec<String> = items.iter().map(|i| self.term(i)).collect();
                format!("({})", inner.join(" "))
            }
            Term::Graph(formula) => self.formula(formula.triples()),
        }
    }

    fn formula(&self, triples: &[Triple]) -> String {
        let inner: Vec<String> = triples
            .iter()
            .map(|t| {
                format!(
                    "{} {} {}",
                    self.term(t.subject()),
                    self.predicate(t.predicate_iri()),
                    self.term(t.object())
                )
            })
            .collect();
        format!("{{{}}}", inner.join(". "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::parse_n3;

    #[test]
    fn round_trip_preserves_triples_and_rules() {
        let text = "@prefix ex: <http://ex.org/v#>.\n\
            ex:a a ex:C; ex:p 1, \"two\", \"x\\\"y\"^^ex:dt; ex:q _:n, (ex:b 2.5).\n\
            _:n ex:r <http://other.org/x.y>.\n\
            {?x ex:p ?y. (?y 2) <http://www.w3.org/2000/10/swap/math#product> ?z} => {?x ex:q ?z}.\n";
        let doc = parse_n3(text, None).unwrap();
        let mut out = serialize_n3(&doc.graph);
        out.push_str(&serialize_rules(&doc.rules, &BTreeMap::new()));
        let again = parse_n3(&out, None).unwrap();
        assert_eq!(again.graph.into_triples(), doc.graph.into_triples());
        assert_eq!(again.rules.len(), 1);
        assert_eq!(again.rules[0].antecedent(), doc.rules[0].antecedent());
        assert_eq!(again.rules[0].consequent(), doc.rules[0].consequent());
    }

    #[test]
    fn uses_prefixes_and_type_shorthand() {
        let doc = parse_n3("@prefix ex: <http://ex.org/v#>.\nex:a a ex:C.", None).unwrap();
        assert_eq!(
            serialize_n3(&doc.graph),
            "@prefix ex: <http://ex.org/v#>.\n\nex:a a ex:C.\n"
        );
    }
}
