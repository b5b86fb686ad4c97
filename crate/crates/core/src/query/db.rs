use std::path::Path;

use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};

use crate::ddo::SqlValue;

#[derive(Debug, thiserror::Error)]
#[error("SQL error: {source}{}", sql.as_ref().map(|s| format!("\n  in: {s}")).unwrap_or_default())]
pub struct DbError {
    #[source]
    pub source: rusqlite::Error,
    pub sql: Option<String>,
}

impl From<rusqlite::Error> for DbError {
    fn from(source: rusqlite::Error) -> Self {
        Self { source, sql: None }
    }
}

/// A connection to the embedded source database.
pub struct Database {
    conn: Connection,
}

impl Database {
    /// Opens an existing database file read-only.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, DbError> {
        let conn =
            Connection::open_with_flags(path, OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX)?;
        Ok(Self { conn })
    }

    /// Opens (creating if needed) a writable database file.
    pub fn create(path: impl AsRef<Path>) -> Result<Self, DbError> {
        Ok(Self {
            conn: Connection::open(path)?,
        })
    }

    pub fn in_memory() -> Result<Self, DbError> {
        Ok(Self {
            conn: Connection::open_in_memory()?,
        })
    }

    /// In-memory database initialised from a DDL + INSERT script.
    pub fn from_script(sql: &str) -> Result<Self, DbError> {
        let db = Self::in_memory()?;
        db.execute_script(sql)?;
        Ok(db)
    }

    pub fn execute_script(&self, sql: &str) -> Result<(), DbError> {
        self.conn.execute_batch(sql).map_err(|source| DbError {
            source,
            sql: Some(sql.chars().take(200).collect()),
        })
    }

    /// Runs a query and returns every row as `width` values.
    pub fn query(&self, sql: &str) -> Result<Vec<Vec<SqlValue>>, DbError> {
        let attach = |source| DbError {
            source,
            sql: Some(sql.to_string()),
        };
        let mut stmt = self.conn.prepare(sql).map_err(attach)?;
        let width = stmt.column_count();
        let rows = stmt
            .query_map([], |row| {
                (0..width)
                    .map(|i| {
                        Ok(match row.get_ref(i)? {
                            ValueRef::Null => SqlValue::Null,
                            ValueRef::Integer(v) => SqlValue::Integer(v),
                            ValueRef::Real(v) => SqlValue::Real(v),
                            ValueRef::Text(t) | ValueRef::Blob(t) => {
                                SqlValue::Text(String::from_utf8_lossy(t).into_owned())
                            }
                        })
                    })
                    .collect::<Result<Vec<_>, rusqlite::Error>>()
            })
            .map_err(attach)?;
        rows.collect::<Result<Vec<_>, _>>().map_err(attach)
    }

    pub fn connection(&self) -> &Connection {
        &self.conn
    }
}
