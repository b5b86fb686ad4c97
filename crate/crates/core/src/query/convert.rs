use crate::ddo::{map_column_datatype, SqlType, SqlValue};
use crate::rdf::Term;
use crate::rules::values::{format_double, parse_date, parse_date_time};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{sql_type} value '{value}' has no {} mapping", map_column_datatype(*sql_type))]
pub struct CellError {
    pub sql_type: SqlType,
    pub value: String,
}

/// Typed literal for a non-null cell per the column's DDO range.
/// Date and timestamp cells must be ISO-8601 (`YYYY-MM-DD`,
/// `YYYY-MM-DDThh:mm:ss`).
pub fn cell_to_term(sql_type: SqlType, v: &SqlValue) -> Result<Option<Term>, CellError> {
    let fail = || CellError {
        sql_type,
        value: v.to_string(),
    };
    let dt = map_column_datatype(sql_type);
    let lexical = match (sql_type, v) {
        (_, SqlValue::Null) => return Ok(None),
        (SqlType::Integer | SqlType::BigInt, SqlValue::Integer(i)) => i.to_string(),
        (SqlType::Integer | SqlType::BigInt, _) => return Err(fail()),
        (SqlType::Real, SqlValue::Real(r)) => format_double(*r),
        (SqlType::Real, SqlValue::Integer(i)) => format_double(*i as f64),
        (SqlType::Real, SqlValue::Text(_)) => return Err(fail()),
        (SqlType::Text, v) => v.to_string(),
        (SqlType::Date, SqlValue::Text(s)) if parse_date(s).is_some() => s.clone(),
        (SqlType::Timestamp, SqlValue::Text(s))
            if s.len() == 19 && s.as_bytes()[10] == b'T' && parse_date_time(s).is_some() =>
        {
            s.clone()
        }
        (SqlType::Date | SqlType::Timestamp, _) => return Err(fail()),
        (SqlType::Boolean, SqlValue::Integer(0)) => "false".into(),
        (SqlType::Boolean, SqlValue::Integer(1)) => "true".into(),
        (SqlType::Boolean, SqlValue::Text(s)) => match s.as_str() {
            "true" | "1" => "true".into(),
            "false" | "0" => "false".into(),
            _ => return Err(fail()),
        },
        (SqlType::Boolean, _) => return Err(fail()),
    };
    Ok(Some(Term::literal(lexical, dt)))
}
