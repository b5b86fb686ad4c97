//! Per-patient EHR graphs: DDO queries per source, conversion per source,
//! integration by shared IRIs, then analysis on the merged graph.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::Serialize;

use super::config::{check_value, SourceRegistry, TemplateError};
use crate::par::{self, Execution};
use crate::query::{run_construct, Database, DbError, QueryError};
use crate::rdf::{merge_graphs, Graph};
use crate::rules::{Derivation, ReasonError};

pub const PATIENT_PARAMETER: &str = "patientId";

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error("patient {0} is not present in any source")]
    NotFound(String),
    #[error(transparent)]
    InvalidPatientId(TemplateError),
    #[error("source {source_name}: {error}")]
    Db { source_name: String, error: DbError },
    #[error("source {source_name}, template {template}: {error}")]
    Query {
        source_name: String,
        template: String,
        error: Box<QueryError>,
    },
    #[error("source {source_name}, template {template}: {error}")]
    Template {
        source_name: String,
        template: String,
        error: TemplateError,
    },
    #[error("{stage}: {error}")]
    Reason { stage: String, error: ReasonError },
}

/// A data problem that was skipped rather than aborting the build.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EhrDiagnostic {
    pub patient: String,
    /// `source/template` for row errors, `source/conversion` or `analysis`
    /// for rule diagnostics.
    pub context: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    pub retrieve: Duration,
    pub conversion: Duration,
    pub integration: Duration,
    pub analysis: Duration,
}

#[derive(Debug, Clone)]
pub struct EhrGraph {
    pub patient_id: String,
    pub patient_iri: String,
    /// Retrieved DDO triples, converted DO triples and analysis results.
    pub graph: Graph,
    /// The retrieved DDO triples alone.
    pub ddo: Graph,
    pub derivations: Vec<Derivation>,
    pub diagnostics: Vec<EhrDiagnostic>,
    pub timings: PhaseTimings,
}

pub fn build_patient_ehr(reg: &SourceRegistry, patient_id: &str) -> Result<EhrGraph, BuildError> {
    check_value(PATIENT_PARAMETER, patient_id).map_err(BuildError::InvalidPatientId)?;
    let params = BTreeMap::from([(PATIENT_PARAMETER, patient_id)]);
    let mut timings = PhaseTimings::default();
    let mut diagnostics = Vec::new();
    let mut derivations = Vec::new();
    let mut ddo_parts = Vec::new();
    let mut converted = Vec::new();

    for src in &reg.sources {
        let started = Instant::now();
        let db = Database::open(&src.db_path).map_err(|error| BuildError::Db {
            source_name: src.name.clone(),
            error,
        })?;
        let mut ddo = Graph::with_prefixes(src.manifest.prefixes());
        for t in &src.templates {
            let text = t.instantiate(&params).map_err(|error| BuildError::Template {
                source_name: src.name.clone(),
                template: t.name.clone(),
                error,
            })?;
            let result = run_construct(&text, &src.ddo, &src.manifest, &db).map_err(|error| BuildError::Query {
                source_name: src.name.clone(),
                template: t.name.clone(),
                error: Box::new(error),
            })?;
            diagnostics.extend(result.errors.iter().map(|e| EhrDiagnostic {
                patient: patient_id.to_string(),
                context: format!("{}/{}", src.name, t.name),
                message: e.to_string(),
            }));
            for triple in result.graph.into_triples() {
                ddo.insert(triple);
            }
        }
        timings.retrieve += started.elapsed();

        let started = Instant::now();
        let reasoning = src.conversion.run(&ddo).map_err(|error| BuildError::Reason {
            stage: format!("{} conversion", src.name),
            error,
        })?;
        timings.conversion += started.elapsed();
        diagnostics.extend(reasoning.diagnostics.into_iter().map(|d| EhrDiagnostic {
            patient: patient_id.to_string(),
            context: format!("{}/conversion", src.name),
            message: format!("{}: {}", d.rule, d.message),
        }));
        derivations.extend(reasoning.derivations);
        let mut graph = reasoning.graph;
        graph.extend_prefixes(ddo.prefixes());
        converted.push(graph);
        ddo_parts.push(ddo);
    }

    if ddo_parts.iter().all(Graph::is_empty) {
        return Err(BuildError::NotFound(patient_id.to_string()));
    }

    let started = Instant::now();
    let mut merged = merge_graphs(&converted);
    for (p, ns) in crate::kb::vocab::prefixes() {
        merged.set_prefix(p, ns);
    }
    timings.integration = started.elapsed();

    let started = Instant::now();
    let reasoning = reg.analysis.run(&merged).map_err(|error| BuildError::Reason {
        stage: "analysis".into(),
        error,
    })?;
    timings.analysis = started.elapsed();
    diagnostics.extend(reasoning.diagnostics.into_iter().map(|d| EhrDiagnostic {
        patient: patient_id.to_string(),
        context: "analysis".into(),
        message: format!("{}: {}", d.rule, d.message),
    }));
    derivations.extend(reasoning.derivations);
    let mut graph = reasoning.graph;
    graph.extend_prefixes(merged.prefixes());

    Ok(EhrGraph {
        patient_id: patient_id.to_string(),
        patient_iri: reg.patient_iri(patient_id),
        graph,
        ddo: merge_graphs(&ddo_parts),
        derivations,
        diagnostics,
        timings,
    })
}

/// Builds many patients independently; results keep the order of `ids`.
pub fn build_population(
    reg: &SourceRegistry,
    ids: &[String],
    execution: Execution,
) -> Vec<Result<EhrGraph, BuildError>> {
    par::map(execution, ids, |id| build_patient_ehr(reg, id))
}

/// Patient ids across all sources that declare a patient listing, in
/// first-seen order.
pub fn list_patients(reg: &SourceRegistry) -> Result<Vec<String>, BuildError> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for src in &reg.sources {
        let Some(sql) = &src.patients_sql else { continue };
        let db_err = |error| BuildError::Db {
            source_name: src.name.clone(),
            error,
        };
        let db = Database::open(&src.db_path).map_err(db_err)?;
        for row in db.query(sql).map_err(db_err)? {
            if let Some(id) = row.first().and_then(|v| v.key_text()) {
                if seen.insert(id.clone()) {
                    out.push(id);
                }
            }
        }
    }
    Ok(out)
}

/// Merge of patient graphs with blank nodes kept apart per patient.
pub fn aggregate_population(graphs: &[Graph]) -> Graph {
    merge_graphs(graphs)
}
