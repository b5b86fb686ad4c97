use std::fmt;

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};

use super::manifest::{SchemaManifest, TableDef};

/// Characters left literal in key segments: RFC 3986 unreserved.
const KEY_SEGMENT: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'.').remove(b'_').remove(b'~');

/// A cell value as read from the database.
#[derive(Debug, Clone, PartialEq)]
pub enum SqlValue {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
}

impl SqlValue {
    pub fn is_null(&self) -> bool {
        matches!(self, SqlValue::Null)
    }

    /// Text used for the key segment of an instance IRI.
    pub fn key_text(&self) -> Option<String> {
        match self {
            SqlValue::Null => None,
            SqlValue::Integer(i) => Some(i.to_string()),
            SqlValue::Real(r) => Some(format!("{r:?}")),
            SqlValue::Text(s) => Some(s.clone()),
        }
    }
}

impl fmt::Display for SqlValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SqlValue::Null => f.write_str("NULL"),
            SqlValue::Integer(i) => write!(f, "{i}"),
            SqlValue::Real(r) => write!(f, "{r:?}"),
            SqlValue::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MintError {
    #[error("unknown table '{0}'")]
    UnknownTable(String),
    #[error("table {0}: primary key is NULL")]
    NullKey(String),
}

pub(crate) fn mint_for(table: &TableDef, key: &str) -> String {
    format!("{}{}#this", table.instance_base, utf8_percent_encode(key, KEY_SEGMENT))
}

/// `{instanceBase}{percent-encoded pk}#this`, where the instance base
/// defaults to `{base}{Table}/`.
pub fn mint_instance_iri(m: &SchemaManifest, table: &str, pk: &SqlValue) -> Result<String, MintError> {
    let t = m
        .table(table)
        .ok_or_else(|| MintError::UnknownTable(table.to_string()))?;
    let key = pk.key_text().ok_or_else(|| MintError::NullKey(table.to_string()))?;
    Ok(mint_for(t, &key))
}

/// Inverse of minting: the table and the decoded key text. Returns `None`
/// for IRIs that minting cannot produce.
pub fn decode_instance_iri<'m>(m: &'m SchemaManifest, iri: &str) -> Option<(&'m TableDef, String)> {
    let body = iri.strip_suffix("#this")?;
    for t in &m.tables {
        let Some(segment) = body.strip_prefix(t.instance_base.as_str()) else {
            continue;
        };
        if segment.is_empty() || segment.contains('/') {
            continue;
        }
        let Ok(key) = percent_decode_str(segment).decode_utf8() else {
            continue;
        };
        let key = key.into_owned();
        if mint_for(t, &key) == iri {
            return Some((t, key));
        }
    }
    None
}
