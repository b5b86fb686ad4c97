//! Data Definition Ontology: a 1:1 RDF view of a relational schema.

mod iri;
mod manifest;

pub use iri::{decode_instance_iri, mint_instance_iri, MintError, SqlValue};
pub use manifest::{
    load_manifest, map_column_datatype, map_sql_type_name, parse_manifest, ColumnDef, ManifestError, SchemaManifest,
    SqlType, TableDef,
};

use crate::rdf::vocab::{rdf, rdfs};
use crate::rdf::{Graph, Term, Triple};

/// One class triple per table and property, domain and range triples per
/// non-key column. Foreign-key columns range over the target class.
pub fn generate_ddo(m: &SchemaManifest) -> Graph {
    let mut g = Graph::with_prefixes(m.prefixes());
    let mut add = |s: String, p: &str, o: Term| {
        g.insert(Triple::with_iri(Term::iri(s), p, o).expect("IRI subject and predicate"));
    };
    for t in &m.tables {
        let class = m.class_iri(t);
        add(class.clone(), rdf::TYPE, Term::iri(rdfs::CLASS));
        for c in t.data_columns() {
            let prop = m.property_iri(t, c);
            let range = match &c.foreign_key {
                Some(target) => m.class_iri(m.table(target).expect("validated foreign key")),
                None => map_column_datatype(c.sql_type).to_string(),
            };
            add(prop.clone(), rdf::TYPE, Term::iri(rdf::PROPERTY));
            add(prop.clone(), rdfs::DOMAIN, Term::iri(class.clone()));
            add(prop, rdfs::RANGE, Term::iri(range));
        }
    }
    g
}
