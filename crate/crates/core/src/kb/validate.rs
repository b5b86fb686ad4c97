//! Closed-vocabulary checks over the shipped assets.

use std::collections::BTreeSet;
use std::fmt;

use crate::ddo::{generate_ddo, parse_manifest, SchemaManifest};
use crate::query::{compile_to_sql, parse_query};
use crate::rdf::vocab::{rdf, rdfs};
use crate::rdf::{N3Parser, Term};
use crate::rules::BuiltinTable;

#[derive(Debug, Clone, Copy)]
pub struct AssetText<'a> {
    pub name: &'a str,
    pub text: &'a str,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    Parse { line: usize, col: usize, message: String },
    UndeclaredPredicate(String),
    UndeclaredClass(String),
    MissingType(String),
    MissingLabel(String),
    Template(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub asset: String,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = &self.asset;
        match &self.kind {
            ViolationKind::Parse { line, col, message } => write!(f, "{a}:{line}:{col}: {message}"),
            ViolationKind::UndeclaredPredicate(p) => write!(f, "{a}: undeclared predicate <{p}>"),
            ViolationKind::UndeclaredClass(c) => write!(f, "{a}: undeclared class <{c}>"),
            ViolationKind::MissingType(t) => write!(f, "{a}: <{t}> has no rdf:type"),
            ViolationKind::MissingLabel(t) => write!(f, "{a}: <{t}> has no rdfs:label"),
            ViolationKind::Template(m) => write!(f, "{a}: {m}"),
        }
    }
}

/// Checks the vocabulary itself, then that every rule predicate and class is
/// declared by it, by one of the DDOs or is a builtin, then that every
/// query template compiles against its manifest.
pub fn validate_asset_set(
    vocab: AssetText,
    rules: &[AssetText],
    templates: &[(AssetText, &SchemaManifest)],
    manifests: &[&SchemaManifest],
) -> Vec<Violation> {
    let mut out = Vec::new();
    let violation = |asset: &str, kind| Violation {
        asset: asset.to_string(),
        kind,
    };
    let parse_violation = |asset: &str, e: crate::rdf::N3Error| {
        let pos = e.pos();
        violation(
            asset,
            ViolationKind::Parse {
                line: pos.line,
                col: pos.col,
                message: e.to_string(),
            },
        )
    };

    let mut known: BTreeSet<String> = [rdf::TYPE, rdfs::LABEL, rdfs::CLASS, rdf::PROPERTY]
        .into_iter()
        .map(String::from)
        .collect();
    known.extend(BuiltinTable::standard().iris().map(String::from));

    match N3Parser::new().source(vocab.name).parse(vocab.text) {
        Ok(doc) => {
            let index = doc.graph.subject_index();
            for (s, props) in &index {
                let Some(iri) = s.as_iri() else { continue };
                if !props.contains_key(rdf::TYPE) {
                    out.push(violation(vocab.name, ViolationKind::MissingType(iri.to_string())));
                }
                if !props.contains_key(rdfs::LABEL) {
                    out.push(violation(vocab.name, ViolationKind::MissingLabel(iri.to_string())));
                }
                known.insert(iri.to_string());
            }
        }
        Err(e) => out.push(parse_violation(vocab.name, e)),
    }
    for m in manifests {
        for t in generate_ddo(m).iter() {
            if let Some(iri) = t.subject().as_iri() {
                known.insert(iri.to_string());
            }
        }
    }

    for asset in rules {
        let doc = match N3Parser::new().source(asset.name).parse(asset.text) {
            Ok(doc) => doc,
            Err(e) => {
                out.push(parse_violation(asset.name, e));
                continue;
            }
        };
        let mut seen = BTreeSet::new();
        let triples = doc.graph.iter().cloned().chain(doc.rules.iter().flat_map(|r| {
            r.antecedent()
                .triples()
                .iter()
                .chain(r.consequent().triples())
                .cloned()
                .collect::<Vec<_>>()
        }));
        for t in triples {
            let p = t.predicate_iri();
            if !known.contains(p) && seen.insert(p.to_string()) {
                out.push(violation(asset.name, ViolationKind::UndeclaredPredicate(p.to_string())));
            }
            if p == rdf::TYPE {
                if let Term::Iri(c) = t.object() {
                    if !known.contains(&**c) && seen.insert(c.to_string()) {
                        out.push(violation(asset.name, ViolationKind::UndeclaredClass(c.to_string())));
                    }
                }
            }
        }
    }

    for (asset, manifest) in templates {
        let text = asset.text.replace("$patientId", "0");
        let result = parse_query(&text)
            .map_err(|e| e.to_string())
            .and_then(|q| compile_to_sql(&q, &generate_ddo(manifest), manifest).map_err(|e| e.to_string()));
        if let Err(message) = result {
            out.push(violation(asset.name, ViolationKind::Template(message)));
        }
    }
    out
}

/// Validates everything shipped in the knowledge base. Empty on success.
pub fn validate_assets() -> Vec<Violation> {
    let load =
        |name: &str| parse_manifest(super::file(name).expect("shipped manifest")).expect("valid shipped manifest");
    let clinic = load("manifests/clinic.json");
    let cis = load("manifests/cis.json");
    let ctms = load("manifests/ctms.json");
    let rules: Vec<AssetText> = super::RULE_ASSETS
        .iter()
        .map(|a| AssetText {
            name: a.name,
            text: a.text,
        })
        .collect();
    let mut templates = Vec::new();
    for (dir, manifest) in [("templates/cis", &cis), ("templates/ctms", &ctms)] {
        for (name, text) in super::files_in(dir) {
            templates.push((AssetText { name, text }, manifest));
        }
    }
    templates.push((
        AssetText {
            name: "queries/form_weight.rq",
            text: super::file("queries/form_weight.rq").expect("shipped query"),
        },
        &clinic,
    ));
    validate_asset_set(
        AssetText {
            name: "vocab.n3",
            text: super::VOCAB,
        },
        &rules,
        &templates,
        &[&cis, &ctms],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> AssetText<'static> {
        AssetText {
            name: "vocab.n3",
            text: super::super::VOCAB,
        }
    }

    #[test]
    fn shipped_assets_are_clean() {
        let v = validate_assets();
        assert!(
            v.is_empty(),
            "{}",
            v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("\n")
        );
    }

    #[test]
    fn undeclared_predicate_is_named() {
        let bad = AssetText {
            name: "bad.n3",
            text: "@prefix foo: <http://example.org/foo#>.\n@prefix human: <http://example.org/do/human#>.\n{?x a human:Person} => {?x foo:bar 1}.",
        };
        let v = validate_asset_set(vocab(), &[bad], &[], &[]);
        assert_eq!(v.len(), 1);
        assert_eq!(
            v[0].kind,
            ViolationKind::UndeclaredPredicate("http://example.org/foo#bar".into())
        );
        assert!(v[0].to_string().contains("foo#bar"));
    }

    #[test]
    fn syntax_error_has_location() {
        let bad = AssetText {
            name: "broken.n3",
            text: "@prefix h: <http://example.org/do/human#>.\n{?x a h:Person} => {?x a }.",
        };
        let v = validate_asset_set(vocab(), &[bad], &[], &[]);
        assert_eq!(v.len(), 1);
        match &v[0].kind {
            ViolationKind::Parse { line, .. } => assert_eq!(*line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unlabelled_vocabulary_term() {
        let v = AssetText {
            name: "v.n3",
            text: "@prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#>.\n<http://example.org/x> a rdfs:Class.",
        };
        let out = validate_asset_set(v, &[], &[], &[]);
        assert_eq!(
            out,
            vec![Violation {
                asset: "v.n3".into(),
                kind: ViolationKind::MissingLabel("http://example.org/x".into())
            }]
        );
    }
}
