//! Value-space views of literals used by the builtins.

use std::cmp::Ordering;
use std::fmt;

use chrono::{Datelike, NaiveDate, NaiveDateTime, NaiveTime};

use crate::rdf::vocab::xsd;
use crate::rdf::{Literal, Term};

const DAY: i64 = 86_400;
const MONTH: i64 = 30 * DAY;
const YEAR: i64 = 365 * DAY;

/// A duration as signed seconds, normalized with 1Y = 365 days and
/// 1M = 30 days so that comparison is total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DurationValue {
    pub seconds: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid xsd:duration '{0}'")]
pub struct DurationError(pub String);

impl DurationValue {
    pub fn from_seconds(seconds: i64) -> Self {
        Self { seconds }
    }

    pub fn days(days: i64) -> Self {
        Self { seconds: days * DAY }
    }

    /// Parses `-?PnYnMnDTnHnMnS` with integral components.
    pub fn parse(lexical: &str) -> Result<Self, DurationError> {
        let err = || DurationError(lexical.to_string());
        let (negative, rest) = match lexical.strip_prefix('-') {
            Some(r) => (true, r),
            None => (false, lexical),
        };
        let rest = rest.strip_prefix('P').ok_or_else(err)?;
        let (date_part, time_part) = match rest.split_once('T') {
            Some((d, t)) => {
                if t.is_empty() {
                    return Err(err());
                }
                (d, Some(t))
            }
            None => (rest, None),
        };
        if date_part.is_empty() && time_part.is_none() {
            return Err(err());
        }
        let mut total: i64 = 0;
        let mut scan = |part: &str, units: &[(char, i64)]| -> Result<(), DurationError> {
            let mut digits = String::new();
            let mut next_unit = 0;
            for c in part.chars() {
                if c.is_ascii_digit() {
                    digits.push(c);
                    continue;
                }
                let idx = units[next_unit..].iter().position(|(u, _)| *u == c).ok_or_else(err)? + next_unit;
                if digits.is_empty() {
                    return Err(err());
                }
                let n: i64 = digits.parse().map_err(|_| err())?;
                total = n
                    .checked_mul(units[idx].1)
                    .and_then(|v| total.checked_add(v))
                    .ok_or_else(err)?;
                digits.clear();
                next_unit = idx + 1;
            }
            if digits.is_empty() {
                Ok(())
            } else {
                Err(err())
            }
        };
        scan(date_part, &[('Y', YEAR), ('M', MONTH), ('D', DAY)])?;
        if let Some(t) = time_part {
            scan(t, &[('H', 3600), ('M', 60), ('S', 1)])?;
        }
        Ok(Self {
            seconds: if negative { -total } else { total },
        })
    }

    pub fn to_term(self) -> Term {
        Term::literal(self.to_string(), xsd::DURATION)
    }
}

impl std::ops::Neg for DurationValue {
    type Output = Self;
    fn neg(self) -> Self {
        Self { seconds: -self.seconds }
    }
}

impl fmt::Display for DurationValue {
    /// Canonical form in days and time units: `P7D`, `-PT1H30M`, `PT0S`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.seconds == 0 {
            return f.write_str("PT0S");
        }
        if self.seconds < 0 {
            f.write_str("-")?;
        }
        let mut s = self.seconds.unsigned_abs();
        let days = s / DAY as u64;
        s %= DAY as u64;
        let (h, m, sec) = (s / 3600, (s % 3600) / 60, s % 60);
        f.write_str("P")?;
        if days > 0 {
            write!(f, "{days}D")?;
        }
        if h + m + sec > 0 {
            f.write_str("T")?;
            if h > 0 {
                write!(f, "{h}H")?;
            }
            if m > 0 {
                write!(f, "{m}M")?;
            }
            if sec > 0 {
                write!(f, "{sec}S")?;
            }
        }
        Ok(())
    }
}

/// A literal interpreted in value space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Integer(i64),
    Double(f64),
    Duration(DurationValue),
    Date(NaiveDate),
    DateTime(NaiveDateTime),
}

fn is_integer_type(dt: &str) -> bool {
    let Some(local) = dt.strip_prefix(xsd::NS) else {
        return false;
    };
    matches!(
        local,
        "integer"
            | "long"
            | "int"
            | "short"
            | "byte"
            | "nonNegativeInteger"
            | "positiveInteger"
            | "nonPositiveInteger"
            | "negativeInteger"
            | "unsignedLong"
            | "unsignedInt"
            | "unsignedShort"
            | "unsignedByte"
    )
}

pub fn parse_double(lexical: &str) -> Option<f64> {
    match lexical {
        "INF" | "+INF" => Some(f64::INFINITY),
        "-INF" => Some(f64::NEG_INFINITY),
        "NaN" => Some(f64::NAN),
        _ => {
            // Rust also accepts "inf" and "nan"; xsd does not.
            if lexical.chars().any(|c| c.is_ascii_alphabetic() && c != 'e' && c != 'E') {
                None
            } else {
                lexical.parse().ok()
            }
        }
    }
}

/// Lexical form for an `xsd:double`.
pub fn format_double(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v == f64::INFINITY {
        "INF".into()
    } else if v == f64::NEG_INFINITY {
        "-INF".into()
    } else {
        format!("{v:?}")
    }
}

pub fn parse_date(lexical: &str) -> Option<NaiveDate> {
    if lexical.len() != 10 {
        return None;
    }
    NaiveDate::parse_from_str(lexical, "%Y-%m-%d").ok()
}

/// `YYYY-MM-DDThh:mm:ss[.fff][Z|(+|-)hh:mm]`; offsets are folded into UTC.
pub fn parse_date_time(lexical: &str) -> Option<NaiveDateTime> {
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(lexical) {
        return Some(dt.naive_utc());
    }
    let (date, time) = lexical.split_once('T')?;
    let date = parse_date(date)?;
    if time.len() < 8 {
        return None;
    }
    let time = NaiveTime::parse_from_str(time, "%H:%M:%S%.f").ok()?;
    Some(date.and_time(time))
}

pub fn format_date_time(v: &NaiveDateTime) -> String {
    v.format("%Y-%m-%dT%H:%M:%S%.f").to_string()
}

impl Value {
    pub fn from_literal(lit: &Literal) -> Option<Value> {
        let (lex, dt) = (lit.lexical(), lit.datatype());
        if is_integer_type(dt) {
            return lex.trim_start_matches('+').parse().ok().map(Value::Integer);
        }
        match dt {
            xsd::DECIMAL | xsd::DOUBLE | xsd::FLOAT => parse_double(lex).map(Value::Double),
            xsd::DURATION => DurationValue::parse(lex).ok().map(Value::Duration),
            xsd::DATE => parse_date(lex).map(Value::Date),
            xsd::DATE_TIME => parse_date_time(lex).map(Value::DateTime),
            _ => None,
        }
    }

    pub fn from_term(term: &Term) -> Option<Value> {
        term.as_literal().and_then(Value::from_literal)
    }

    pub fn to_term(self) -> Term {
        match self {
            Value::Integer(i) => Term::literal(i.to_string(), xsd::INTEGER),
            Value::Double(d) => Term::literal(format_double(d), xsd::DOUBLE),
            Value::Duration(d) => d.to_term(),
            Value::Date(d) => Term::literal(d.format("%Y-%m-%d").to_string(), xsd::DATE),
            Value::DateTime(d) => Term::literal(format_date_time(&d), xsd::DATE_TIME),
        }
    }

    pub fn as_f64(self) -> Option<f64> {
        match self {
            Value::Integer(i) => Some(i as f64),
            Value::Double(d) => Some(d),
            _ => None,
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, Value::Integer(_) | Value::Double(_))
    }

    /// Dates become midnight date-times; other values are unchanged.
    pub fn as_instant(self) -> Option<NaiveDateTime> {
        match self {
            Value::Date(d) => Some(d.and_time(NaiveTime::MIN)),
            Value::DateTime(d) => Some(d),
            _ => None,
        }
    }

    pub fn kind(self) -> &'static str {
        match self {
            Value::Integer(_) | Value::Double(_) => "numeric",
            Value::Duration(_) => "duration",
            Value::Date(_) | Value::DateTime(_) => "temporal",
        }
    }

    /// Value-space ordering; `None` when the operands are incomparable.
    pub fn compare(self, other: Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Integer(a), Value::Integer(b)) => Some(a.cmp(&b)),
            (Value::Duration(a), Value::Duration(b)) => Some(a.cmp(&b)),
            (a, b) if a.is_numeric() && b.is_numeric() => a.as_f64()?.partial_cmp(&b.as_f64()?),
            (a, b) => Some(a.as_instant()?.cmp(&b.as_instant()?)),
        }
    }
}

/// Full calendar years from `birth` to `reference`.
pub fn years_between(birth: NaiveDate, reference: NaiveDate) -> Option<i64> {
    if reference < birth {
        return None;
    }
    let mut years = (reference.year() - birth.year()) as i64;
    if (reference.month(), reference.day()) < (birth.month(), birth.day()) {
        years -= 1;
    }
    Some(years)
}
