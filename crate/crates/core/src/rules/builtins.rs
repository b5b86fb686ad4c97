use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use super::matcher::{resolve, unify, BindingSet};
use super::values::{years_between, DurationValue, Value};
use crate::rdf::vocab::{e, log, math, time, xsd};
use crate::rdf::Term;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{builtin}: {message}")]
pub struct BuiltinError {
    pub builtin: String,
    pub message: String,
}

/// Which argument positions must be ground before a builtin may run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Requirement {
    Subject,
    Both,
    /// Either side ground (bidirectional builtins).
    Either,
}

pub type EvalFn = fn(&Term, &Term, &BindingSet) -> Result<Vec<BindingSet>, String>;

#[derive(Clone, Copy)]
pub struct Builtin {
    pub requirement: Requirement,
    pub eval: EvalFn,
}

impl fmt::Debug for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Builtin")
            .field("requirement", &self.requirement)
            .finish()
    }
}

/// Predicate IRI -> evaluation function. Builtins never assert triples;
/// they only filter or extend bindings.
#[derive(Debug, Clone, Default)]
pub struct BuiltinTable {
    map: HashMap<String, Builtin>,
}

impl BuiltinTable {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn standard() -> Self {
        let mut t = Self::empty();
        t.insert(math::DIFFERENCE, Requirement::Subject, difference);
        t.insert(math::PRODUCT, Requirement::Subject, product);
        t.insert(math::QUOTIENT, Requirement::Subject, quotient);
        t.insert(math::EXPONENTIATION, Requirement::Subject, exponentiation);
        t.insert(math::NOT_GREATER_THAN, Requirement::Both, not_greater_than);
        t.insert(math::NOT_LESS_THAN, Requirement::Both, not_less_than);
        t.insert(e::MAX, Requirement::Subject, max);
        t.insert(log::DTLIT, Requirement::Either, dtlit);
        t.insert(time::YEARS_BETWEEN, Requirement::Subject, years);
        t
    }

    pub fn insert(&mut self, iri: &str, requirement: Requirement, eval: EvalFn) {
        self.map.insert(iri.to_string(), Builtin { requirement, eval });
    }

    pub fn get(&self, iri: &str) -> Option<&Builtin> {
        self.map.get(iri)
    }

    pub fn contains(&self, iri: &str) -> bool {
        self.map.contains_key(iri)
    }

    pub fn iris(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }
}

/// Evaluates builtin `pred` on `subject`/`object` under `b`.
pub fn eval_builtin(
    table: &BuiltinTable,
    pred: &str,
    subject: &Term,
    object: &Term,
    b: &BindingSet,
) -> Result<Vec<BindingSet>, BuiltinError> {
    let err = |message: String| BuiltinError {
        builtin: pred.to_string(),
        message,
    };
    let builtin = table.get(pred).ok_or_else(|| err("not a builtin".into()))?;
    let (s, o) = (resolve(subject, b), resolve(object, b));
    let ready = match builtin.requirement {
        Requirement::Subject => s.is_ground(),
        Requirement::Both => s.is_ground() && o.is_ground(),
        Requirement::Either => s.is_ground() || o.is_ground(),
    };
    if !ready {
        return Err(err("arguments not bound".into()));
    }
    (builtin.eval)(&s, &o, b).map_err(err)
}

fn pair(s: &Term) -> Result<(&Term, &Term), String> {
    match s {
        Term::List(items) if items.len() == 2 => Ok((&items[0], &items[1])),
        Term::List(items) => Err(format!("expected a 2-element list, got {} elements", items.len())),
        other => Err(format!("expected a list subject, got {other}")),
    }
}

fn value(t: &Term) -> Result<Value, String> {
    Value::from_term(t).ok_or_else(|| format!("{t} has no supported value"))
}

fn numeric(t: &Term) -> Result<Value, String> {
    let v = value(t)?;
    if v.is_numeric() {
        Ok(v)
    } else {
        Err(format!("{t} is not numeric"))
    }
}

/// Binds or checks the object against a computed result.
fn emit(object: &Term, result: Term, b: &BindingSet) -> Vec<BindingSet> {
    if object.is_ground() {
        let equal = match (Value::from_term(object), Value::from_term(&result)) {
            (Some(x), Some(y)) => x.compare(y) == Some(Ordering::Equal),
            _ => *object == result,
        };
        return if equal { vec![b.clone()] } else { Vec::new() };
    }
    let mut out = b.clone();
    if unify(object, &result, &mut out) {
        vec![out]
    } else {
        Vec::new()
    }
}

fn difference(s: &Term, o: &Term, b: &BindingSet) -> Result<Vec<BindingSet>, String> {
    let (x, y) = pair(s)?;
    let (x, y) = (value(x)?, value(y)?);
    let result = match (x, y) {
        (Value::Integer(a), Value::Integer(b)) => Value::Integer(a.checked_sub(b).ok_or("integer overflow")?),
        (a, b) if a.is_numeric() && b.is_numeric() => Value::Double(a.as_f64().unwrap() - b.as_f64().unwrap()),
        (a, b) => match (a.as_instant(), b.as_instant()) {
            (Some(a), Some(b)) => Value::Duration(DurationValue::from_seconds((a - b).num_seconds())),
            _ => return Err(format!("cannot subtract {} from {}", b.kind(), a.kind())),
        },
    };
    Ok(emit(o, result.to_term(), b))
}

fn product(s: &Term, o: &Term, b: &BindingSet) -> Result<Vec<BindingSet>, String> {
    let (x, y) = pair(s)?;
    let result = match (numeric(x)?, numeric(y)?) {
        (Value::Integer(a), Value::Integer(b)) => Value::Integer(a.checked_mul(b).ok_or("integer overflow")?),
        (a, c) => Value::Double(a.as_f64().unwrap() * c.as_f64().unwrap()),
    };
    Ok(emit(o, result.to_term(), b))
}

fn quotient(s: &Term, o: &Term, b: &BindingSet) -> Result<Vec<BindingSet>, String> {
    let (x, y) = pair(s)?;
    let (x, y) = (numeric(x)?.as_f64().unwrap(), numeric(y)?.as_f64().unwrap());
    if y == 0.0 {
        return Err("division by zero".into());
    }
    Ok(emit(o, Value::Double(x / y).to_term(), b))
}

fn exponentiation(s: &Term, o: &Term, b: &BindingSet) -> Result<Vec<BindingSet>, String> {
    let (x, y) = pair(s)?;
    let (base, exp) = (numeric(x)?, numeric(y)?);
    let result = match exp {
        Value::Integer(n) if i32::try_from(n).is_ok() => base.as_f64().unwrap().powi(n as i32),
        _ => base.as_f64().unwrap().powf(exp.as_f64().unwrap()),
    };
    Ok(emit(o, Value::Double(result).to_term(), b))
}

fn compare(s: &Term, o: &Term) -> Result<Ordering, String> {
    let (x, y) = (value(s)?, value(o)?);
    x.compare(y)
        .ok_or_else(|| format!("cannot compare {} with {}", x.kind(), y.kind()))
}

fn not_greater_than(s: &Term, o: &Term, b: &BindingSet) -> Result<Vec<BindingSet>, String> {
    Ok(if compare(s, o)? != Ordering::Greater {
        vec![b.clone()]
    } else {
        Vec::new()
    })
}

fn not_less_than(s: &Term, o: &Term, b: &BindingSet) -> Result<Vec<BindingSet>, String> {
    Ok(if compare(s, o)? != Ordering::Less {
        vec![b.clone()]
    } else {
        Vec::new()
    })
}

/// Maximum in value space. Date operands are promoted to midnight
/// `xsd:dateTime`, so the result of a temporal max is always a date-time.
fn max(s: &Term, o: &Term, b: &BindingSet) -> Result<Vec<BindingSet>, String> {
    let Term::List(items) = s else {
        return Err(format!("expected a list subject, got {s}"));
    };
    if items.is_empty() {
        return Err("empty list".into());
    }
    let mut best: Option<(Value, &Term)> = None;
    for item in items {
        let v = value(item)?;
        if let Some((current, _)) = best {
            match v.compare(current) {
                Some(Ordering::Greater) => best = Some((v, item)),
                Some(_) => {}
                None => return Err(format!("cannot compare {} with {}", v.kind(), current.kind())),
            }
        } else {
            best = Some((v, item));
        }
    }
    let (v, term) = best.unwrap();
    let result = match v.as_instant() {
        Some(instant) => Value::DateTime(instant).to_term(),
        None => term.clone(),
    };
    Ok(emit(o, result, b))
}

/// `(lexical datatype) log:dtlit literal`, in either direction. The
/// datatype must match exactly.
fn dtlit(s: &Term, o: &Term, b: &BindingSet) -> Result<Vec<BindingSet>, String> {
    let Term::List(items) = s else {
        return Err(format!("expected a list subject, got {s}"));
    };
    if items.len() != 2 {
        return Err(format!("expected a 2-element list, got {} elements", items.len()));
    }
    if let Term::Literal(lit) = o {
        let parts = Term::List(vec![Term::string(lit.lexical()), Term::iri(lit.datatype())]);
        let mut out = b.clone();
        return Ok(if unify(s, &parts, &mut out) {
            vec![out]
        } else {
            Vec::new()
        });
    }
    if o.is_ground() {
        return Err(format!("object must be a literal, got {o}"));
    }
    let lexical = match &items[0] {
        Term::Literal(l) if l.datatype() == xsd::STRING => l.lexical(),
        other => return Err(format!("lexical form must be a string, got {other}")),
    };
    let Term::Iri(datatype) = &items[1] else {
        return Err(format!("datatype must be an IRI, got {}", items[1]));
    };
    Ok(emit(o, Term::literal(lexical, datatype.clone()), b))
}

fn years(s: &Term, o: &Term, b: &BindingSet) -> Result<Vec<BindingSet>, String> {
    let (x, y) = pair(s)?;
    let date = |t: &Term| -> Result<_, String> {
        value(t)?
            .as_instant()
            .map(|i| i.date())
            .ok_or_else(|| format!("{t} is not a date"))
    };
    let (birth, reference) = (date(x)?, date(y)?);
    let age = years_between(birth, reference).ok_or("reference date precedes birth date")?;
    Ok(emit(o, Value::Integer(age).to_term(), b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lit(lex: &str, dt: &str) -> Term {
        Term::literal(lex, dt)
    }

    fn run(pred: &str, s: Term, o: Term) -> Result<Vec<BindingSet>, BuiltinError> {
        eval_builtin(&BuiltinTable::standard(), pred, &s, &o, &BindingSet::new())
    }

    fn one(pred: &str, s: Term) -> Term {
        let out = run(pred, s, Term::var("r")).unwrap();
        assert_eq!(out.len(), 1);
        out[0]["r"].clone()
    }

    #[test]
    fn date_difference_is_a_duration() {
        let d = one(
            math::DIFFERENCE,
            Term::List(vec![lit("2012-01-01", xsd::DATE), lit("2011-12-25", xsd::DATE)]),
        );
        assert_eq!(d, lit("P7D", xsd::DURATION));
        let ok = |pred, bound| !run(pred, d.clone(), lit(bound, xsd::DURATION)).unwrap().is_empty();
        assert!(ok(math::NOT_GREATER_THAN, "P2Y"));
        assert!(ok(math::NOT_LESS_THAN, "-P7D"));
        let same = one(
            math::DIFFERENCE,
            Term::List(vec![lit("2012-01-01", xsd::DATE), lit("2012-01-01", xsd::DATE)]),
        );
        assert_eq!(same, lit("PT0S", xsd::DURATION));
    }

    #[test]
    fn quotient_promotes_to_double() {
        let q = one(
            math::QUOTIENT,
            Term::List(vec![Term::integer(72), lit("2.89", xsd::DECIMAL)]),
        );
        let v = Value::from_term(&q).unwrap().as_f64().unwrap();
        assert!((v - 72.0 / 2.89).abs() < 1e-12);
        assert!(run(
            math::QUOTIENT,
            Term::List(vec![Term::integer(1), Term::integer(0)]),
            Term::var("r")
        )
        .is_err());
        assert!(run(
            math::QUOTIENT,
            Term::List(vec![Term::string("x"), Term::integer(1)]),
            Term::var("r")
        )
        .is_err());
    }

    #[test]
    fn product_keeps_integers_exact() {
        assert_eq!(
            one(math::PRODUCT, Term::List(vec![Term::integer(6), Term::integer(7)])),
            lit("42", xsd::INTEGER)
        );
        assert!(run(
            math::PRODUCT,
            Term::List(vec![Term::integer(i64::MAX), Term::integer(2)]),
            Term::var("r")
        )
        .is_err());
    }

    #[test]
    fn max_of_dates_is_a_midnight_datetime() {
        let m = one(
            e::MAX,
            Term::List(vec![lit("2011-12-25", xsd::DATE), lit("2012-01-01", xsd::DATE)]),
        );
        assert_eq!(m, lit("2012-01-01T00:00:00", xsd::DATE_TIME));
        assert_eq!(
            one(e::MAX, Term::List(vec![Term::integer(3), Term::integer(5)])),
            Term::integer(5)
        );
    }

    #[test]
    fn dtlit_both_directions() {
        let built = one(
            log::DTLIT,
            Term::List(vec![Term::string("2012-01-01T00:00:00"), Term::iri(xsd::DATE_TIME)]),
        );
        assert_eq!(built, lit("2012-01-01T00:00:00", xsd::DATE_TIME));
        let out = run(
            log::DTLIT,
            Term::List(vec![Term::var("lex"), Term::iri(xsd::DATE_TIME)]),
            built.clone(),
        )
        .unwrap();
        assert_eq!(out[0]["lex"], Term::string("2012-01-01T00:00:00"));
        let mismatch = run(
            log::DTLIT,
            Term::List(vec![Term::var("lex"), Term::iri(xsd::DATE_TIME)]),
            lit("2012-01-01", xsd::DATE),
        );
        assert!(mismatch.unwrap().is_empty());
    }

    #[test]
    fn years_between_calendar_rule() {
        let y = one(
            time::YEARS_BETWEEN,
            Term::List(vec![
                lit("1980-06-15", xsd::DATE),
                lit("2012-01-01T00:00:00", xsd::DATE_TIME),
            ]),
        );
        assert_eq!(y, lit("31", xsd::INTEGER));
        assert!(run(
            time::YEARS_BETWEEN,
            Term::List(vec![lit("2012-06-15", xsd::DATE), lit("2012-01-01", xsd::DATE)]),
            Term::var("r")
        )
        .is_err());
    }

    #[test]
    fn unbound_arguments_are_rejected() {
        assert!(run(
            math::QUOTIENT,
            Term::List(vec![Term::var("a"), Term::integer(1)]),
            Term::var("r")
        )
        .is_err());
    }
}
