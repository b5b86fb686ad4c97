//! RDF terms, graphs and the N3 subset used throughout the pipeline.

mod graph;
mod iso;
pub(crate) mod lexer;
mod n3;
mod serialize;
mod term;
pub mod vocab;

pub use graph::{merge_graphs, Graph, SKOLEM_PREFIX};
pub use iso::isomorphic;
pub use lexer::Pos;
pub use n3::{parse_n3, Document, N3Error, N3Parser};
pub use serialize::{serialize_n3, serialize_rules};
pub use term::{Formula, Literal, Term, Triple, TripleError};
