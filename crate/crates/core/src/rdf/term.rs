use std::fmt;
use std::sync::Arc;

use super::vocab::xsd;

/// An RDF term, extended with the N3 constructs used by rules and queries.
///
/// The derived ordering compares the variant first (IRI < literal < blank
/// node < list < graph < variable) and then the components lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Iri(Arc<str>),
    Literal(Literal),
    BlankNode(Arc<str>),
    List(Vec<Term>),
    Graph(Formula),
    Variable(Arc<str>),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    lexical: Arc<str>,
    datatype: Arc<str>,
}

impl Literal {
    pub fn new(lexical: impl Into<Arc<str>>, datatype: impl Into<Arc<str>>) -> Self {
        Self {
            lexical: lexical.into(),
            datatype: datatype.into(),
        }
    }

    pub fn lexical(&self) -> &str {
        &self.lexical
    }

    pub fn datatype(&self) -> &str {
        &self.datatype
    }
}

impl Term {
    pub fn iri(iri: impl Into<Arc<str>>) -> Self {
        Term::Iri(iri.into())
    }

    pub fn literal(lexical: impl Into<Arc<str>>, datatype: impl Into<Arc<str>>) -> Self {
        Term::Literal(Literal::new(lexical, datatype))
    }

    pub fn string(value: impl Into<Arc<str>>) -> Self {
        Term::literal(value, xsd::STRING)
    }

    pub fn integer(value: i64) -> Self {
        Term::literal(value.to_string(), xsd::INTEGER)
    }

    pub fn blank(label: impl Into<Arc<str>>) -> Self {
        Term::BlankNode(label.into())
    }

    pub fn var(name: impl Into<Arc<str>>) -> Self {
        Term::Variable(name.into())
    }

    pub fn as_iri(&self) -> Option<&str> {
        match self {
            Term::Iri(iri) => Some(iri),
            _ => None,
        }
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match self {
            Term::Literal(lit) => Some(lit),
            _ => None,
        }
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Term::Literal(_))
    }

    pub fn is_variable(&self) -> bool {
        matches!(self, Term::Variable(_))
    }

    /// True when the term contains no variables at any depth.
    pub fn is_ground(&self) -> bool {
        match self {
            Term::Variable(_) => false,
            Term::List(items) => items.iter().all(Term::is_ground),
            Term::Graph(f) => f.is_ground(),
            _ => true,
        }
    }

    pub fn has_blank(&self) -> bool {
        match self {
            Term::BlankNode(_) => true,
            Term::List(items) => items.iter().any(Term::has_blank),
            Term::Graph(f) => f.triples().iter().any(Triple::has_blank),
            _ => false,
        }
    }

    /// Visits every variable name, depth first.
    pub fn for_each_var(&self, f: &mut impl FnMut(&Arc<str>)) {
        match self {
            Term::Variable(v) => f(v),
            Term::List(items) => items.iter().for_each(|t| t.for_each_var(f)),
            Term::Graph(formula) => formula.for_each_var(f),
            _ => {}
        }
    }

    pub fn for_each_blank(&self, f: &mut impl FnMut(&Arc<str>)) {
        match self {
            Term::BlankNode(b) => f(b),
            Term::List(items) => items.iter().for_each(|t| t.for_each_blank(f)),
            Term::Graph(formula) => {
                for t in formula.triples() {
                    t.subject.for_each_blank(f);
                    t.predicate.for_each_blank(f);
                    t.object.for_each_blank(f);
                }
            }
            _ => {}
        }
    }

    /// Rebuilds the term, replacing variables through `map`; `None` keeps
    /// the variable.
    pub fn map_vars(&self, map: &mut impl FnMut(&Arc<str>) -> Option<Term>) -> Term {
        match self {
            Term::Variable(v) => map(v).unwrap_or_else(|| self.clone()),
            Term::List(items) => Term::List(items.iter().map(|t| t.map_vars(map)).collect()),
            Term::Graph(formula) => Term::Graph(Formula::new(
                formula
                    .triples()
                    .iter()
                    .map(|t| Triple {
                        subject: t.subject.map_vars(map),
                        predicate: t.predicate.clone(),
                        object: t.object.map_vars(map),
                    })
                    .collect(),
            )),
            other => other.clone(),
        }
    }

    /// Rebuilds the term, replacing every blank node through `map`.
    pub fn map_blanks(&self, map: &mut impl FnMut(&Arc<str>) -> Term) -> Term {
        match self {
            Term::BlankNode(b) => map(b),
            Term::List(items) => Term::List(items.iter().map(|t| t.map_blanks(map)).collect()),
            Term::Graph(formula) => Term::Graph(Formula::new(
                formula
                    .triples()
                    .iter()
                    .map(|t| Triple {
                        subject: t.subject.map_blanks(map),
                        predicate: t.predicate.map_blanks(map),
                        object: t.object.map_blanks(map),
                    })
                    .collect(),
            )),
            other => other.clone(),
        }
    }
}

impl fmt::Display for Term {
    /// Writes the term in N3 syntax with full IRIs.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(iri) => write!(f, "<{iri}>"),
            Term::Literal(lit) => {
                write!(f, "\"{}\"", escape_string(lit.lexical()))?;
                if lit.datatype() != xsd::STRING {
                    write!(f, "^^<{}>", lit.datatype())?;
                }
                Ok(())
            }
            Term::BlankNode(b) => write!(f, "_:{b}"),
            Term::List(items) => {
                f.write_str("(")?;
                for item in items {
                    write!(f, " {item}")?;
                }
                f.write_str(" )")
            }
            Term::Graph(formula) => {
                f.write_str("{")?;
                for t in formula.triples() {
                    write!(f, " {} {} {}.", t.subject, t.predicate, t.object)?;
                }
                f.write_str(" }")
            }
            Term::Variable(v) => write!(f, "?{v}"),
        }
    }
}

pub(crate) fn escape_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TripleError {
    #[error("predicate must be an IRI, found {0}")]
    PredicateNotIri(String),
    #[error("subject must not be a literal, found {0}")]
    LiteralSubject(String),
}

/// A subject/predicate/object statement. Inside formulas the terms may be
/// variables or blank-node templates; the predicate is always an IRI and the
/// subject is never a literal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    subject: Term,
    predicate: Term,
    object: Term,
}

impl Triple {
    pub fn new(subject: Term, predicate: Term, object: Term) -> Result<Self, TripleError> {
        if !matches!(predicate, Term::Iri(_)) {
            return Err(TripleError::PredicateNotIri(predicate.to_string()));
        }
        if subject.is_literal() {
            return Err(TripleError::LiteralSubject(subject.to_string()));
        }
        Ok(Self {
            subject,
            predicate,
            object,
        })
    }

    /// Shorthand for IRI predicates, which always satisfy the predicate invariant.
    pub fn with_iri(subject: Term, predicate: &str, object: Term) -> Result<Self, TripleError> {
        Self::new(subject, Term::iri(predicate), object)
    }

    pub fn subject(&self) -> &Term {
        &self.subject
    }

    pub fn predicate(&self) -> &Term {
        &self.predicate
    }

    pub fn predicate_iri(&self) -> &str {
        match &self.predicate {
            Term::Iri(iri) => iri,
            _ => unreachable!("predicate invariant"),
        }
    }

    pub fn object(&self) -> &Term {
        &self.object
    }

    pub fn terms(&self) -> [&Term; 3] {
        [&self.subject, &self.predicate, &self.object]
    }

    pub fn is_ground(&self) -> bool {
        self.subject.is_ground() && self.object.is_ground()
    }

    pub fn has_blank(&self) -> bool {
        self.subject.has_blank() || self.object.has_blank()
    }

    pub fn map_blanks(&self, map: &mut impl FnMut(&Arc<str>) -> Term) -> Triple {
        Triple {
            subject: self.subject.map_blanks(map),
            predicate: self.predicate.clone(),
            object: self.object.map_blanks(map),
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}.", self.subject, self.predicate, self.object)
    }
}

/// An ordered list of triple patterns: a rule side, a query pattern or a
/// quoted graph.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Formula(Vec<Triple>);

impl Formula {
    pub fn new(triples: Vec<Triple>) -> Self {
        Self(triples)
    }

    pub fn triples(&self) -> &[Triple] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_ground(&self) -> bool {
        self.0.iter().all(Triple::is_ground)
    }

    pub fn for_each_var(&self, f: &mut impl FnMut(&Arc<str>)) {
        for t in &self.0 {
            t.subject.for_each_var(f);
            t.predicate.for_each_var(f);
            t.object.for_each_var(f);
        }
    }

    /// Distinct variable names in first-occurrence order.
    pub fn variables(&self) -> Vec<Arc<str>> {
        let mut out: Vec<Arc<str>> = Vec::new();
        self.for_each_var(&mut |v| {
            if !out.contains(v) {
                out.push(v.clone());
            }
        });
        out
    }

    pub fn into_triples(self) -> Vec<Triple> {
        self.0
    }
}

impl FromIterator<Triple> for Formula {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_is_kind_first() {
        let mut terms = [
            Term::var("x"),
            Term::blank("b"),
            Term::string("z"),
            Term::iri("http://z"),
            Term::List(vec![]),
        ];
        terms.sort();
        assert!(matches!(terms[0], Term::Iri(_)));
        assert!(matches!(terms[1], Term::Literal(_)));
        assert!(matches!(terms[2], Term::BlankNode(_)));
        assert!(matches!(terms[3], Term::List(_)));
        assert!(matches!(terms[4], Term::Variable(_)));
    }

    #[test]
    fn triple_invariants() {
        assert!(Triple::new(Term::string("x"), Term::iri("http://p"), Term::integer(1)).is_err());
        assert!(Triple::new(Term::iri("http://s"), Term::var("p"), Term::integer(1)).is_err());
        assert!(Triple::new(Term::List(vec![]), Term::iri("http://p"), Term::integer(1)).is_ok());
    }

    #[test]
    fn literal_equality_is_syntactic() {
        assert_ne!(Term::literal("1", xsd::INTEGER), Term::literal("01", xsd::INTEGER));
        assert_ne!(Term::literal("1", xsd::INTEGER), Term::literal("1", xsd::LONG));
        assert_eq!(Term::string("a"), Term::literal("a", xsd::STRING));
    }
}
