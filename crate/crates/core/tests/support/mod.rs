//! Shared helpers for integration tests: the shipped fixture, and a random
//! (schema, data, query) generator for compiler-oracle checks.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twostep::ddo::{parse_manifest, SchemaManifest};
use twostep::kb;
use twostep::pipeline::{PipelineConfig, SourceConfig};
use twostep::query::Database;

pub const FIXTURE_PATIENT: &str = "644007";
pub const FIXTURE_PERSON: &str = "http://example.org/cis/Natperson/644007#this";

pub fn clinic_manifest() -> SchemaManifest {
    parse_manifest(kb::file("manifests/clinic.json").unwrap()).unwrap()
}

pub fn fixture_db() -> Database {
    Database::from_script(kb::file("fixtures/clinic.sql").unwrap()).unwrap()
}

pub fn write_db(path: &Path, sql: &str) {
    let _ = std::fs::remove_file(path);
    Database::create(path).unwrap().execute_script(sql).unwrap();
}

/// Single-source pipeline over the clinic fixture database in `dir`.
pub fn fixture_config(dir: &Path) -> PipelineConfig {
    write_db(&dir.join("clinic.db"), kb::file("fixtures/clinic.sql").unwrap());
    let kb = |s: &str| format!("kb:{s}");
    let mut cfg = PipelineConfig::shipped(dir);
    cfg.sources = vec![SourceConfig {
        name: "cis".into(),
        db: "clinic.db".into(),
        manifest: kb("manifests/clinic.json"),
        templates: ["person", "name", "birthdate", "cll_weight", "cll_height"]
            .iter()
            .map(|t| kb(&format!("templates/cis/{t}.rq")))
            .collect(),
        rules: vec![kb("convert_demographics.n3"), kb("convert_clinical.n3")],
        patients: Some("SELECT persnr FROM Natperson ORDER BY persnr".into()),
    }];
    cfg
}

/// `dir` gets synthetic `cis.db` / `ctms.db`, and the shipped two-source
/// configuration pointing at them.
pub fn synthetic_config(dir: &Path, synth: &twostep::pipeline::SynthConfig) -> PipelineConfig {
    twostep::pipeline::write_synthetic(synth, dir).unwrap();
    PipelineConfig::shipped(dir)
}

pub fn tempdir() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

pub fn path(dir: &tempfile::TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

// ---------------------------------------------------------------------------
// Random compiler instances

pub struct Instance {
    pub manifest: SchemaManifest,
    pub sql: String,
    pub query: String,
}

#[derive(Clone)]
struct Col {
    name: String,
    ty: &'static str,
    fk: Option<usize>,
}

struct Table {
    pk_text: bool,
    cols: Vec<Col>,
    virtual_: bool,
    rows: Vec<(String, Vec<String>)>, // SQL literals: key, cells
}

const TEXTS: [&str; 5] = ["a", "b", "x y", "O''Brien", "é/ü"];
const TEXT_KEYS: [&str; 4] = ["k1", "k 2", "k/3", "ä4"];
const DATES: [&str; 3] = ["2012-01-01", "2012-01-02", "1999-12-31"];

fn sql_value(rng: &mut ChaCha8Rng, ty: &str) -> String {
    if rng.gen_bool(0.2) {
        return "NULL".into();
    }
    match ty {
        "BIGINT" => rng.gen_range(0..4).to_string(),
        "REAL" => ["0.5", "1", "1.0", "2.25"][rng.gen_range(0..4)].to_string(),
        "TEXT" => format!("'{}'", TEXTS[rng.gen_range(0..TEXTS.len())]),
        "DATE" => format!("'{}'", DATES[rng.gen_range(0..DATES.len())]),
        "BOOLEAN" => rng.gen_range(0..2).to_string(),
        _ => unreachable!(),
    }
}

fn key_value(rng: &mut ChaCha8Rng, text: bool) -> String {
    if text {
        format!("'{}'", TEXT_KEYS[rng.gen_range(0..TEXT_KEYS.len())])
    } else {
        rng.gen_range(0..6).to_string()
    }
}

/// Deterministic instance for `seed`: at most 5 tables, 50 rows and 6
/// triple patterns.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_tables = rng.gen_range(1..=5);
    let mut tables: Vec<Table> = (0..n_tables)
        .map(|_| Table {
            pk_text: rng.gen_bool(0.25),
            cols: Vec::new(),
            virtual_: rng.gen_bool(0.25),
            rows: Vec::new(),
        })
        .collect();
    for i in 0..n_tables {
        let n_cols = rng.gen_range(1..=4);
        for c in 0..n_cols {
            let fk = if rng.gen_bool(0.4) {
                Some(rng.gen_range(0..n_tables))
            } else {
                None
            };
            let ty = match fk {
                Some(t) if tables[t].pk_text => "TEXT",
                Some(_) => "BIGINT",
                None => ["BIGINT", "REAL", "TEXT", "DATE", "BOOLEAN"][rng.gen_range(0..5)],
            };
            tables[i].cols.push(Col {
                name: format!("c{c}"),
                ty,
                fk,
            });
        }
    }
    let mut budget = 50usize;
    for i in 0..n_tables {
        let n_rows = rng.gen_range(0..=10).min(budget);
        budget -= n_rows;
        let mut keys = std::collections::BTreeSet::new();
        for _ in 0..n_rows {
            let key = key_value(&mut rng, tables[i].pk_text);
            if !keys.insert(key.clone()) {
                continue;
            }
            let cells = tables[i]
                .cols
                .clone()
                .iter()
                .map(|c| match c.fk {
                    Some(t) if !rng.gen_bool(0.15) => key_value(&mut rng, tables[t].pk_text),
                    Some(_) => "NULL".into(),
                    None => sql_value(&mut rng, c.ty),
                })
                .collect();
            tables[i].rows.push((key, cells));
        }
    }

    // Manifest and SQL.
    let base = "http://example.org/rand/";
    let mut json_tables = Vec::new();
    let mut sql = String::new();
    for (i, t) in tables.iter().enumerate() {
        let pk_ty = if t.pk_text { "TEXT" } else { "BIGINT" };
        let mut cols = vec![serde_json::json!({"name": "id", "sqlType": pk_ty, "nullable": false})];
        for c in &t.cols {
            let mut col = serde_json::json!({"name": c.name, "sqlType": c.ty});
            if let Some(fk) = c.fk {
                col["foreignKey"] = format!("T{fk}").into();
            }
            cols.push(col);
        }
        let stored = if t.virtual_ {
            format!("T{i}_base")
        } else {
            format!("T{i}")
        };
        let col_list: Vec<String> = std::iter::once("id".to_string())
            .chain(t.cols.iter().map(|c| c.name.clone()))
            .collect();
        let mut table = serde_json::json!({"name": format!("T{i}"), "primaryKey": "id", "columns": cols});
        if t.virtual_ {
            table["backingView"] = format!("SELECT {} FROM {stored}", col_list.join(", ")).into();
        }
        json_tables.push(table);
        let decls: Vec<String> = std::iter::once(format!("id {pk_ty} PRIMARY KEY NOT NULL"))
            .chain(t.cols.iter().map(|c| format!("{} {}", c.name, c.ty)))
            .collect();
        sql.push_str(&format!("CREATE TABLE {stored} ({});\n", decls.join(", ")));
        for (key, cells) in &t.rows {
            sql.push_str(&format!("INSERT INTO {stored} VALUES ({key}, {});\n", cells.join(", ")));
        }
    }
    let manifest_json = serde_json::json!({"baseIri": base, "tables": json_tables}).to_string();
    let manifest = parse_manifest(&manifest_json).unwrap();

    // Query: grow a connected BGP from one subject node.
    struct Node {
        name: String,
        table: usize,
    }
    let mut nodes = vec![Node {
        name: "n0".into(),
        table: rng.gen_range(0..n_tables),
    }];
    let mut values: Vec<(String, &'static str)> = Vec::new();
    let mut patterns: Vec<String> = Vec::new();
    let n_patterns = rng.gen_range(1..=6);
    let prop = |t: usize, c: &str| format!("<{base}T{t}#{c}>");
    let iri = |t: usize, key: &str| {
        let k = key.trim_matches('\'').replace("''", "'");
        twostep::ddo::mint_instance_iri(
            &manifest,
            &format!("T{t}"),
            &if tables[t].pk_text {
                twostep::ddo::SqlValue::Text(k)
            } else {
                twostep::ddo::SqlValue::Integer(k.parse().unwrap())
            },
        )
        .unwrap()
    };
    while patterns.len() < n_patterns {
        let s = rng.gen_range(0..nodes.len());
        let (s_name, st) = (nodes[s].name.clone(), nodes[s].table);
        let subject = format!("?{s_name}");
        let table = &tables[st];
        if rng.gen_bool(0.2) || table.cols.is_empty() {
            patterns.push(format!("{subject} a <{base}T{st}#T{st}>"));
            continue;
        }
        let col = table.cols.choose(&mut rng).unwrap().clone();
        let p = prop(st, &col.name);
        let object = match col.fk {
            Some(target) => {
                let same: Vec<&Node> = nodes.iter().filter(|n| n.table == target).collect();
                let r: f64 = rng.gen();
                if r < 0.3 && !same.is_empty() {
                    format!("?{}", same.choose(&mut rng).unwrap().name)
                } else if r < 0.45 && !tables[target].rows.is_empty() {
                    let key = &tables[target].rows.choose(&mut rng).unwrap().0;
                    format!("<{}>", iri(target, key))
                } else {
                    let name = format!("n{}", nodes.len());
                    nodes.push(Node {
                        name: name.clone(),
                        table: target,
                    });
                    format!("?{name}")
                }
            }
            None => {
                let dt = twostep::ddo::map_column_datatype(twostep::ddo::SqlType::parse(col.ty).unwrap());
                let same: Vec<&(String, &str)> = values.iter().filter(|(_, d)| *d == dt).collect();
                let r: f64 = rng.gen();
                if r < 0.25 && !same.is_empty() {
                    format!("?{}", same.choose(&mut rng).unwrap().0)
                } else if r < 0.35 && !values.is_empty() {
                    // Possibly a datatype mismatch: the plan must then be empty.
                    format!("?{}", values.choose(&mut rng).unwrap().0)
                } else if r < 0.5 {
                    let raw = sql_value(&mut rng, col.ty);
                    if raw == "NULL" {
                        "\"never\"".to_string()
                    } else {
                        let cell = match col.ty {
                            "BIGINT" | "BOOLEAN" => twostep::ddo::SqlValue::Integer(raw.parse().unwrap()),
                            "REAL" => twostep::ddo::SqlValue::Real(raw.parse().unwrap()),
                            _ => twostep::ddo::SqlValue::Text(raw.trim_matches('\'').replace("''", "'")),
                        };
                        let sql_type = twostep::ddo::SqlType::parse(col.ty).unwrap();
                        twostep::query::cell_to_term(sql_type, &cell)
                            .unwrap()
                            .unwrap()
                            .to_string()
                    }
                } else {
                    let name = format!("v{}", values.len());
                    values.push((name.clone(), dt));
                    format!("?{name}")
                }
            }
        };
        patterns.push(format!("{subject} {p} {object}"));
    }
    let bgp = patterns.join(" .\n  ");
    let query = format!("CONSTRUCT {{\n  {bgp} .\n}}\nWHERE {{\n  {bgp} .\n}}\n");
    Instance { manifest, sql, query }
}

/// A DO-level patient `<http://x/p>` with one weight (kg) and one length
/// (cm) reading, as the conversion rules would produce it.
pub fn do_patient(
    weight: f64,
    weight_date: chrono::NaiveDate,
    length_cm: f64,
    length_date: chrono::NaiveDate,
    birth: chrono::NaiveDate,
) -> twostep::rdf::Graph {
    let text = format!(
        "@prefix xsd: <http://www.w3.org/2001/XMLSchema#>.
@prefix human: <http://example.org/do/human#>.
@prefix organism: <http://example.org/do/organism#>.
@prefix quant: <http://example.org/do/quantities#>.
@prefix event: <http://example.org/do/event#>.
@prefix units: <http://example.org/do/units#>.
<http://x/p> a human:Person; organism:hasBirthDateTime \"{birth}\"^^xsd:date;
  human:weighs [quant:hasValue {weight:?}; event:hasDateTime \"{weight_date}\"^^xsd:date; quant:hasUnit units:kilogram];
  human:hasLength [quant:hasValue {length_cm:?}; event:hasDateTime \"{length_date}\"^^xsd:date; quant:hasUnit units:centimeter]."
    );
    twostep::rdf::parse_n3(&text, None).unwrap().graph
}

/// The unit normalization, age and BMI assets, in that order.
pub fn analysis_rules() -> Vec<twostep::rules::Rule> {
    ["normalize_units.n3", "derive_age.n3", "analyze_bmi.n3"]
        .iter()
        .flat_map(|n| kb::rule_asset(n).unwrap().rules().unwrap())
        .collect()
}
