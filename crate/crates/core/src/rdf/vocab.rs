//! Namespace constants for the standard vocabularies the toolkit touches.

pub mod rdf {
    pub const NS: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
    pub const TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
    pub const PROPERTY: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#Property";
}

pub mod rdfs {
    pub const NS: &str = "http://www.w3.org/2000/01/rdf-schema#";
    pub const CLASS: &str = "http://www.w3.org/2000/01/rdf-schema#Class";
    pub const DOMAIN: &str = "http://www.w3.org/2000/01/rdf-schema#domain";
    pub const RANGE: &str = "http://www.w3.org/2000/01/rdf-schema#range";
    pub const LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";
}

pub mod xsd {
    pub const NS: &str = "http://www.w3.org/2001/XMLSchema#";
    pub const STRING: &str = "http://www.w3.org/2001/XMLSchema#string";
    pub const BOOLEAN: &str = "http://www.w3.org/2001/XMLSchema#boolean";
    pub const INTEGER: &str = "http://www.w3.org/2001/XMLSchema#integer";
    pub const LONG: &str = "http://www.w3.org/2001/XMLSchema#long";
    pub const INT: &str = "http://www.w3.org/2001/XMLSchema#int";
    pub const DECIMAL: &str = "http://www.w3.org/2001/XMLSchema#decimal";
    pub const DOUBLE: &str = "http://www.w3.org/2001/XMLSchema#double";
    pub const FLOAT: &str = "http://www.w3.org/2001/XMLSchema#float";
    pub const DATE: &str = "http://www.w3.org/2001/XMLSchema#date";
    pub const DATE_TIME: &str = "http://www.w3.org/2001/XMLSchema#dateTime";
    pub const DURATION: &str = "http://www.w3.org/2001/XMLSchema#duration";
}

pub mod log {
    pub const NS: &str = "http://www.w3.org/2000/10/swap/log#";
    pub const IMPLIES: &str = "http://www.w3.org/2000/10/swap/log#implies";
    pub const DTLIT: &str = "http://www.w3.org/2000/10/swap/log#dtlit";
}

pub mod math {
    pub const NS: &str = "http://www.w3.org/2000/10/swap/math#";
    pub const DIFFERENCE: &str = "http://www.w3.org/2000/10/swap/math#difference";
    pub const PRODUCT: &str = "http://www.w3.org/2000/10/swap/math#product";
    pub const QUOTIENT: &str = "http://www.w3.org/2000/10/swap/math#quotient";
    pub const EXPONENTIATION: &str = "http://www.w3.org/2000/10/swap/math#exponentiation";
    pub const NOT_GREATER_THAN: &str = "http://www.w3.org/2000/10/swap/math#notGreaterThan";
    pub const NOT_LESS_THAN: &str = "http://www.w3.org/2000/10/swap/math#notLessThan";
}

/// Euler rule builtins.
pub mod e {
    pub const NS: &str = "http://eulersharp.sourceforge.net/2003/03swap/log-rules#";
    pub const MAX: &str = "http://eulersharp.sourceforge.net/2003/03swap/log-rules#max";
}

pub mod time {
    pub const NS: &str = "http://www.w3.org/2000/10/swap/time#";
    pub const YEARS_BETWEEN: &str = "http://www.w3.org/2000/10/swap/time#yearsBetween";
}

/// Prefixes the serializer may abbreviate with. Parsers still require an
/// explicit declaration.
pub fn standard_prefixes() -> [(&'static str, &'static str); 4] {
    [("rdf", rdf::NS), ("rdfs", rdfs::NS), ("xsd", xsd::NS), ("log", log::NS)]
}
