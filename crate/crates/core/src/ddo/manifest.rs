use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::Deserialize;

use crate::rdf::vocab::xsd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SqlType {
    Integer,
    BigInt,
    Real,
    Text,
    Date,
    Timestamp,
    Boolean,
}

impl SqlType {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_uppercase().as_str() {
            "INTEGER" => SqlType::Integer,
            "BIGINT" => SqlType::BigInt,
            "REAL" => SqlType::Real,
            "TEXT" => SqlType::Text,
            "DATE" => SqlType::Date,
            "TIMESTAMP" => SqlType::Timestamp,
            "BOOLEAN" => SqlType::Boolean,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SqlType::Integer => "INTEGER",
            SqlType::BigInt => "BIGINT",
            SqlType::Real => "REAL",
            SqlType::Text => "TEXT",
            SqlType::Date => "DATE",
            SqlType::Timestamp => "TIMESTAMP",
            SqlType::Boolean => "BOOLEAN",
        }
    }

    pub fn is_integral(self) -> bool {
        matches!(self, SqlType::Integer | SqlType::BigInt)
    }
}

impl fmt::Display for SqlType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// XSD datatype for a column type.
pub fn map_column_datatype(sql_type: SqlType) -> &'static str {
    match sql_type {
        SqlType::Integer | SqlType::BigInt => xsd::LONG,
        SqlType::Real => xsd::DOUBLE,
        SqlType::Text => xsd::STRING,
        SqlType::Date => xsd::DATE,
        SqlType::Timestamp => xsd::DATE_TIME,
        SqlType::Boolean => xsd::BOOLEAN,
    }
}

/// String form of [`map_column_datatype`] for callers holding raw type names.
pub fn map_sql_type_name(sql_type: &str) -> Result<&'static str, ManifestError> {
    SqlType::parse(sql_type)
        .map(map_column_datatype)
        .ok_or_else(|| ManifestError::UnknownSqlType {
            table: String::new(),
            column: String::new(),
            sql_type: sql_type.to_string(),
        })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnDef {
    pub name: String,
    pub sql_type: SqlType,
    pub foreign_key: Option<String>,
    pub nullable: bool,
    /// Local name of the DDO property; defaults to the column name.
    pub property: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableDef {
    pub name: String,
    pub primary_key: String,
    pub columns: Vec<ColumnDef>,
    pub backing_view: Option<String>,
    /// Serialization prefix for the table namespace.
    pub prefix: String,
    pub class_name: String,
    /// Namespace instance IRIs are minted under.
    pub instance_base: String,
}

impl TableDef {
    pub fn column(&self, name: &str) -> Option<&ColumnDef> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn primary_key_column(&self) -> &ColumnDef {
        self.column(&self.primary_key).expect("validated primary key")
    }

    /// Columns mapped to DDO properties: everything but the key, which is
    /// carried by the instance IRI.
    pub fn data_columns(&self) -> impl Iterator<Item = &ColumnDef> {
        self.columns.iter().filter(move |c| c.name != self.primary_key)
    }

    pub fn is_virtual(&self) -> bool {
        self.backing_view.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaManifest {
    pub base_iri: String,
    pub tables: Vec<TableDef>,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("cannot read manifest: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{context}: missing field '{field}'")]
    MissingField { context: String, field: &'static str },
    #[error("baseIri '{0}' must be absolute and end with '/'")]
    InvalidBaseIri(String),
    #[error("duplicate table '{0}'")]
    DuplicateTable(String),
    #[error("table {table}: duplicate column '{column}'")]
    DuplicateColumn { table: String, column: String },
    #[error("table {table}: column {column} has unknown sqlType '{sql_type}'")]
    UnknownSqlType {
        table: String,
        column: String,
        sql_type: String,
    },
    #[error("table {0}: composite primary keys are not supported")]
    CompositePrimaryKey(String),
    #[error("table {table}: primary key '{column}' is not a column")]
    PrimaryKeyNotAColumn { table: String, column: String },
    #[error("table {table}: column {column} references missing table '{target}'")]
    DanglingForeignKey {
        table: String,
        column: String,
        target: String,
    },
    #[error("table {table}: column {column} is {found} but {target}'s key is {expected}")]
    ForeignKeyTypeMismatch {
        table: String,
        column: String,
        target: String,
        found: SqlType,
        expected: SqlType,
    },
    #[error("tables {0} and {1} share the instance base '{2}'")]
    DuplicateInstanceBase(String, String, String),
}

impl ManifestError {
    /// Stable machine-readable code per error kind.
    pub fn code(&self) -> &'static str {
        match self {
            ManifestError::Io(_) => "io",
            ManifestError::Json(_) => "invalid-json",
            ManifestError::MissingField { .. } => "missing-field",
            ManifestError::InvalidBaseIri(_) => "invalid-base-iri",
            ManifestError::DuplicateTable(_) => "duplicate-table",
            ManifestError::DuplicateColumn { .. } => "duplicate-column",
            ManifestError::UnknownSqlType { .. } => "unknown-sql-type",
            ManifestError::CompositePrimaryKey(_) => "composite-primary-key",
            ManifestError::PrimaryKeyNotAColumn { .. } => "primary-key-not-a-column",
            ManifestError::DanglingForeignKey { .. } => "dangling-foreign-key",
            ManifestError::ForeignKeyTypeMismatch { .. } => "foreign-key-type-mismatch",
            ManifestError::DuplicateInstanceBase(..) => "duplicate-instance-base",
        }
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RawManifest {
    base_iri: Option<String>,
    tables: Option<Vec<RawTable>>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RawTable {
    name: Option<String>,
    primary_key: Option<serde_json::Value>,
    columns: Option<Vec<RawColumn>>,
    backing_view: Option<String>,
    prefix: Option<String>,
    class_name: Option<String>,
    instance_base: Option<String>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RawColumn {
    name: Option<String>,
    sql_type: Option<String>,
    foreign_key: Option<String>,
    nullable: Option<bool>,
    property: Option<String>,
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn is_absolute_iri(s: &str) -> bool {
    url::Url::parse(s).is_ok()
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<SchemaManifest, ManifestError> {
    parse_manifest(&std::fs::read_to_string(path)?)
}

pub fn parse_manifest(json: &str) -> Result<SchemaManifest, ManifestError> {
    let raw: RawManifest = serde_json::from_str(json)?;
    let missing = |context: &str, field| ManifestError::MissingField {
        context: context.to_string(),
        field,
    };
    let base_iri = raw.base_iri.ok_or_else(|| missing("manifest", "baseIri"))?;
    if !base_iri.ends_with('/') || !is_absolute_iri(&base_iri) {
        return Err(ManifestError::InvalidBaseIri(base_iri));
    }
    let raw_tables = raw.tables.ok_or_else(|| missing("manifest", "tables"))?;

    let mut tables = Vec::with_capacity(raw_tables.len());
    let mut names = HashSet::new();
    for (i, rt) in raw_tables.into_iter().enumerate() {
        let name = rt.name.ok_or_else(|| missing(&format!("tables[{i}]"), "name"))?;
        let ctx = format!("table {name}");
        if !names.insert(name.clone()) {
            return Err(ManifestError::DuplicateTable(name));
        }
        let primary_key = match rt.primary_key {
            None | Some(serde_json::Value::Null) => return Err(missing(&ctx, "primaryKey")),
            Some(serde_json::Value::String(s)) => s,
            Some(serde_json::Value::Array(items)) if items.len() > 1 => {
                return Err(ManifestError::CompositePrimaryKey(name))
            }
            Some(serde_json::Value::Array(items)) => match items.into_iter().next() {
                Some(serde_json::Value::String(s)) => s,
                _ => return Err(missing(&ctx, "primaryKey")),
            },
            Some(_) => return Err(missing(&ctx, "primaryKey")),
        };
        let raw_columns = rt.columns.ok_or_else(|| missing(&ctx, "columns"))?;
        let mut columns = Vec::with_capacity(raw_columns.len());
        let mut col_names = HashSet::new();
        for (j, rc) in raw_columns.into_iter().enumerate() {
            let col = rc.name.ok_or_else(|| missing(&format!("{ctx} column {j}"), "name"))?;
            if !col_names.insert(col.clone()) {
                return Err(ManifestError::DuplicateColumn {
                    table: name,
                    column: col,
                });
            }
            let type_name = rc
                .sql_type
                .ok_or_else(|| missing(&format!("{ctx} column {col}"), "sqlType"))?;
            let sql_type = SqlType::parse(&type_name).ok_or_else(|| ManifestError::UnknownSqlType {
                table: name.clone(),
                column: col.clone(),
                sql_type: type_name,
            })?;
            columns.push(ColumnDef {
                property: rc.property.unwrap_or_else(|| col.clone()),
                name: col,
                sql_type,
                foreign_key: rc.foreign_key,
                nullable: rc.nullable.unwrap_or(true),
            });
        }
        if !columns.iter().any(|c| c.name == primary_key) {
            return Err(ManifestError::PrimaryKeyNotAColumn {
                table: name,
                column: primary_key,
            });
        }
        tables.push(TableDef {
            prefix: rt.prefix.unwrap_or_else(|| name.to_lowercase()),
            class_name: rt.class_name.unwrap_or_else(|| capitalize(&name)),
            instance_base: rt.instance_base.unwrap_or_else(|| format!("{base_iri}{name}/")),
            name,
            primary_key,
            columns,
            backing_view: rt.backing_view,
        });
    }

    let key_types: HashMap<&str, SqlType> = tables
        .iter()
        .map(|t| (t.name.as_str(), t.primary_key_column().sql_type))
        .collect();
    for t in &tables {
        for c in &t.columns {
            let Some(target) = &c.foreign_key else { continue };
            let Some(&expected) = key_types.get(target.as_str()) else {
                return Err(ManifestError::DanglingForeignKey {
                    table: t.name.clone(),
                    column: c.name.clone(),
                    target: target.clone(),
                });
            };
            let compatible = c.sql_type == expected || (c.sql_type.is_integral() && expected.is_integral());
            if !compatible {
                return Err(ManifestError::ForeignKeyTypeMismatch {
                    table: t.name.clone(),
                    column: c.name.clone(),
                    target: target.clone(),
                    found: c.sql_type,
                    expected,
                });
            }
        }
    }
    let mut bases: HashMap<&str, &str> = HashMap::new();
    for t in &tables {
        if let Some(other) = bases.insert(&t.instance_base, &t.name) {
            return Err(ManifestError::DuplicateInstanceBase(
                other.to_string(),
                t.name.clone(),
                t.instance_base.clone(),
            ));
        }
    }
    Ok(SchemaManifest { base_iri, tables })
}

impl SchemaManifest {
    pub fn table(&self, name: &str) -> Option<&TableDef> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn namespace(&self, table: &TableDef) -> String {
        format!("{}{}#", self.base_iri, table.name)
    }

    pub fn class_iri(&self, table: &TableDef) -> String {
        format!("{}{}", self.namespace(table), table.class_name)
    }

    pub fn property_iri(&self, table: &TableDef, column: &ColumnDef) -> String {
        format!("{}{}", self.namespace(table), column.property)
    }

    /// Table prefixes plus rdf, rdfs and xsd, for serializing DDO-termed graphs.
    pub fn prefixes(&self) -> BTreeMap<String, String> {
        let mut out: BTreeMap<String, String> = crate::rdf::vocab::standard_prefixes()
            .iter()
            .filter(|(p, _)| *p != "log")
            .map(|(p, ns)| (p.to_string(), ns.to_string()))
            .collect();
        for t in &self.tables {
            out.entry(t.prefix.clone()).or_insert_with(|| self.namespace(t));
        }
        out
    }
}
