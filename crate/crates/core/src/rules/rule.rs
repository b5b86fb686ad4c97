use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::rdf::{Formula, Term, Triple};

/// Variable-name prefix given to antecedent blank nodes, which act as
/// rule-local existentials when matching.
pub const ANTECEDENT_BLANK_PREFIX: &str = "_b";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuleError {
    #[error("rule {rule}: consequent variable ?{var} does not occur in the antecedent")]
    UnboundConsequentVariable { rule: String, var: String },
    #[error("rule {rule}: unbound builtin arguments in `{pattern}`")]
    UnboundBuiltinArguments { rule: String, pattern: String },
}

/// `antecedent => consequent`, identified by a stable `source#ordinal` id.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    id: Arc<str>,
    antecedent: Formula,
    consequent: Formula,
}

impl Rule {
    /// Builds a rule, turning antecedent blank nodes into rule-local
    /// variables. Consequent blank nodes stay as templates.
    pub fn new(id: impl Into<Arc<str>>, antecedent: Formula, consequent: Formula) -> Result<Self, RuleError> {
        let id = id.into();
        let antecedent: Formula = antecedent
            .triples()
            .iter()
            .map(|t| t.map_blanks(&mut |b| Term::var(format!("{ANTECEDENT_BLANK_PREFIX}{b}"))))
            .collect();
        let mut bound = BTreeSet::new();
        antecedent.for_each_var(&mut |v| {
            bound.insert(v.clone());
        });
        let mut missing = None;
        consequent.for_each_var(&mut |v| {
            if missing.is_none() && !bound.contains(v) {
                missing = Some(v.to_string());
            }
        });
        if let Some(var) = missing {
            return Err(RuleError::UnboundConsequentVariable {
                rule: id.to_string(),
                var,
            });
        }
        Ok(Self {
            id,
            antecedent,
            consequent,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub(crate) fn id_arc(&self) -> &Arc<str> {
        &self.id
    }

    pub fn antecedent(&self) -> &Formula {
        &self.antecedent
    }

    pub fn consequent(&self) -> &Formula {
        &self.consequent
    }

    pub fn with_id(mut self, id: impl Into<Arc<str>>) -> Self {
        self.id = id.into();
        self
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = |formula: &Formula| {
            formula
                .triples()
                .iter()
                .map(Triple::to_string)
                .collect::<Vec<_>>()
                .join(" ")
        };
        write!(f, "{{{}}} => {{{}}}.", side(&self.antecedent), side(&self.consequent))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn consequent_variables_must_be_bound() {
        let ante = Formula::new(vec![
            Triple::with_iri(Term::var("x"), "http://p", Term::var("y")).unwrap()
        ]);
        let cons = Formula::new(vec![
            Triple::with_iri(Term::var("z"), "http://q", Term::var("y")).unwrap()
        ]);
        assert!(matches!(
            Rule::new("r#1", ante, cons),
            Err(RuleError::UnboundConsequentVariable { .. })
        ));
    }

    #[test]
    fn antecedent_blanks_become_variables() {
        let ante = Formula::new(vec![
            Triple::with_iri(Term::var("x"), "http://p", Term::blank("m")).unwrap()
        ]);
        let cons = Formula::new(vec![
            Triple::with_iri(Term::var("x"), "http://q", Term::blank("n")).unwrap()
        ]);
        let rule = Rule::new("r#1", ante, cons).unwrap();
        assert_eq!(rule.antecedent().triples()[0].object(), &Term::var("_bm"));
        assert_eq!(rule.consequent().triples()[0].object(), &Term::blank("n"));
    }
}
