//! DDO queries: a BGP-only SPARQL subset compiled to SQL.

mod convert;
mod db;
mod exec;
mod plan;
mod sparql;

pub use convert::{cell_to_term, CellError};
pub use db::{Database, DbError};
pub use exec::{
    dump_rdb_to_rdf, execute_construct, execute_select, naive_match, ConstructResult, RowError, SelectResult,
};
pub use plan::{compile_to_sql, Alias, ColumnRef, CompileError, Condition, Output, OutputKind, SqlConst, SqlPlan};
pub use sparql::{parse_query, BgpConstructQuery, QueryParseError};

use crate::ddo::SchemaManifest;
use crate::rdf::Graph;

#[derive(Debug, thiserror::Error)]
pub enum QueryError {
    #[error(transparent)]
    Parse(#[from] QueryParseError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Db(#[from] DbError),
}

/// Parse, compile and execute a CONSTRUCT query in one step.
pub fn run_construct(
    text: &str,
    ddo: &Graph,
    m: &SchemaManifest,
    db: &Database,
) -> Result<ConstructResult, QueryError> {
    let q = parse_query(text)?;
    let plan = compile_to_sql(&q, ddo, m)?;
    let mut result = execute_construct(&plan, &q.template, m, db)?;
    for (p, ns) in &q.prefixes {
        result.graph.set_prefix(p.clone(), ns.clone());
    }
    Ok(result)
}
