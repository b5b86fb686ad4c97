use std::sync::Arc;

use super::convert::cell_to_term;
use super::db::{Database, DbError};
use super::plan::{OutputKind, SqlPlan};
use super::sparql::BgpConstructQuery;
use crate::ddo::{mint_instance_iri, SchemaManifest, SqlValue};
use crate::rdf::vocab::rdf;
use crate::rdf::{Formula, Graph, Term, Triple};
use crate::rules::{match_formula_with, BindingSet, BuiltinTable, TripleStore};

/// A row or cell that could not be turned into RDF.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub table: String,
    /// Zero-based position in the result set.
    pub row: usize,
    pub message: String,
}

impl std::fmt::Display for RowError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} row {}: {}", self.table, self.row, self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ConstructResult {
    pub graph: Graph,
    pub errors: Vec<RowError>,
}

#[derive(Debug, Clone, Default)]
pub struct SelectResult {
    pub variables: Vec<Arc<str>>,
    pub rows: Vec<BindingSet>,
    pub errors: Vec<RowError>,
}

fn bind_row(plan: &SqlPlan, manifest: &SchemaManifest, row: &[SqlValue]) -> Result<BindingSet, String> {
    let mut b = BindingSet::new();
    for (o, v) in plan.outputs.iter().zip(row) {
        let term = match &o.kind {
            OutputKind::Node { table } => Term::iri(mint_instance_iri(manifest, table, v).map_err(|e| e.to_string())?),
            OutputKind::Value { sql_type, .. } => match cell_to_term(*sql_type, v) {
                Ok(Some(t)) => t,
                Ok(None) => return Err(format!("?{} is NULL", o.var)),
                Err(e) => return Err(format!("?{}: {e}", o.var)),
            },
        };
        b.insert(o.var.clone(), term);
    }
    Ok(b)
}

/// Runs the plan and converts each row into bindings; bad rows are skipped
/// and reported.
pub fn execute_select(plan: &SqlPlan, manifest: &SchemaManifest, db: &Database) -> Result<SelectResult, DbError> {
    let rows = db.query(&plan.sql())?;
    let mut out = SelectResult {
        variables: plan.outputs.iter().map(|o| o.var.clone()).collect(),
        ..Default::default()
    };
    let table = plan.aliases.first().map(|a| a.table.clone()).unwrap_or_default();
    for (i, row) in rows.iter().enumerate() {
        match bind_row(plan, manifest, row) {
            Ok(b) => out.rows.push(b),
            Err(message) => out.errors.push(RowError {
                table: table.clone(),
                row: i,
                message,
            }),
        }
    }
    Ok(out)
}

fn instantiate(template: &Formula, b: &BindingSet, g: &mut Graph) {
    for t in template.triples() {
        let s = t.subject().map_vars(&mut |v| b.get(v).cloned());
        let o = t.object().map_vars(&mut |v| b.get(v).cloned());
        if let Ok(triple) = Triple::new(s, t.predicate().clone(), o) {
            if triple.is_ground() {
                g.insert(triple);
            }
        }
    }
}

pub fn execute_construct(
    plan: &SqlPlan,
    template: &Formula,
    manifest: &SchemaManifest,
    db: &Database,
) -> Result<ConstructResult, DbError> {
    let selected = execute_select(plan, manifest, db)?;
    let mut graph = Graph::new();
    for b in &selected.rows {
        instantiate(template, b, &mut graph);
    }
    Ok(ConstructResult {
        graph,
        errors: selected.errors,
    })
}

/// Every row of every table: one `rdf:type` triple plus one triple per
/// non-null data column. Bad cells are skipped and reported.
pub fn dump_rdb_to_rdf(db: &Database, m: &SchemaManifest) -> Result<ConstructResult, DbError> {
    let mut out = ConstructResult {
        graph: Graph::with_prefixes(m.prefixes()),
        errors: Vec::new(),
    };
    for t in &m.tables {
        let columns: Vec<_> = t.data_columns().collect();
        let select: Vec<String> = std::iter::once(&t.primary_key)
            .chain(columns.iter().map(|c| &c.name))
            .map(|c| format!("\"{}\"", c.replace('"', "\"\"")))
            .collect();
        let source = match &t.backing_view {
            Some(view) => format!("({view})"),
            None => format!("\"{}\"", t.name.replace('"', "\"\"")),
        };
        let rows = db.query(&format!("SELECT {} FROM {source} AS t", select.join(", ")))?;
        let class = Term::iri(m.class_iri(t));
        for (i, row) in rows.iter().enumerate() {
            let mut report = |message: String| {
                out.errors.push(RowError {
                    table: t.name.clone(),
                    row: i,
                    message,
                })
            };
            let subject = match mint_instance_iri(m, &t.name, &row[0]) {
                Ok(iri) => Term::iri(iri),
                Err(e) => {
                    report(e.to_string());
                    continue;
                }
            };
            out.graph
                .insert(Triple::with_iri(subject.clone(), rdf::TYPE, class.clone()).expect("valid triple"));
            for (c, v) in columns.iter().zip(&row[1..]) {
                let object = match &c.foreign_key {
                    Some(_) if v.is_null() => continue,
                    Some(target) => match mint_instance_iri(m, target, v) {
                        Ok(iri) => Term::iri(iri),
                        Err(e) => {
                            report(e.to_string());
                            continue;
                        }
                    },
                    None => match cell_to_term(c.sql_type, v) {
                        Ok(Some(term)) => term,
                        Ok(None) => continue,
                        Err(e) => {
                            report(format!("{}: {e}", c.name));
                            continue;
                        }
                    },
                };
                let p = m.property_iri(t, c);
                out.graph
                    .insert(Triple::with_iri(subject.clone(), &p, object).expect("valid triple"));
            }
        }
    }
    Ok(out)
}

/// Backtracking BGP match over `g` followed by template instantiation.
/// The reference semantics for the SQL path.
pub fn naive_match(q: &BgpConstructQuery, g: &Graph) -> Graph {
    let store = TripleStore::from_graph(g);
    let solutions = match_formula_with(&q.bgp, &store, &BindingSet::new(), &BuiltinTable::empty())
        .expect("no builtins, so matching cannot fail");
    let mut out = Graph::new();
    for b in &solutions {
        instantiate(&q.template, b, &mut out);
    }
    out
}
