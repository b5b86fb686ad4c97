pub mod ddo;
pub mod kb;
pub mod par;
pub mod pipeline;
pub mod query;
pub mod rdf;
pub mod rules;
