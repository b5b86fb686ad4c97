//! Deterministic synthetic CIS and CTMS populations as SQL fixtures.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{Datelike, Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::query::{Database, DbError};

/// Probability that each field is NULL.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Missingness {
    pub weight: f64,
    pub height: f64,
    pub birthdate: f64,
    pub name: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub patients: usize,
    pub seed: u64,
    pub missing: Missingness,
    /// Probability that a patient is enrolled in one of the trials.
    pub trial_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            patients: 100,
            seed: 42,
            missing: Missingness::default(),
            trial_rate: 0.3,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SynthSummary {
    pub patients: usize,
    pub with_weight: usize,
    pub with_height: usize,
    pub with_birthdate: usize,
    pub enrolled: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFixtures {
    pub cis_sql: String,
    pub ctms_sql: String,
    pub summary: SynthSummary,
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Db(#[from] DbError),
    #[error("rate {name}={value} is outside [0, 1]")]
    Rate { name: &'static str, value: f64 },
}

pub const CIS_DDL: &str = "\
CREATE TABLE Natperson (persnr BIGINT PRIMARY KEY NOT NULL, name TEXT, birthdate DATE);
CREATE TABLE Patient (patnr BIGINT PRIMARY KEY NOT NULL, persnr BIGINT REFERENCES Natperson(persnr));
CREATE TABLE CLLFormEntry (formnr BIGINT PRIMARY KEY NOT NULL, weight BIGINT, height BIGINT, date DATE);
CREATE TABLE HospitalStay (hosstaynr BIGINT PRIMARY KEY NOT NULL, persnr BIGINT REFERENCES Patient(patnr), hasCLLForm BIGINT REFERENCES CLLFormEntry(formnr));
CREATE TABLE StudyRegistry (trialid TEXT PRIMARY KEY NOT NULL, acronym TEXT);
CREATE TABLE TrialInclusion (inclnr BIGINT PRIMARY KEY NOT NULL, persnr BIGINT REFERENCES Natperson(persnr), trial TEXT REFERENCES StudyRegistry(trialid), since DATE);
CREATE INDEX idx_patient_persnr ON Patient(persnr);
CREATE INDEX idx_hosstay_persnr ON HospitalStay(persnr);
CREATE INDEX idx_inclusion_persnr ON TrialInclusion(persnr);
";

pub const CTMS_DDL: &str = "\
CREATE TABLE Trial (trialid TEXT PRIMARY KEY NOT NULL, title TEXT, phase TEXT);
CREATE TABLE Enrollment (enrnr BIGINT PRIMARY KEY NOT NULL, trial TEXT REFERENCES Trial(trialid), cisPersnr BIGINT, status TEXT);
CREATE INDEX idx_enrollment_person ON Enrollment(cisPersnr);
";

const TRIALS: [(&str, &str, &str, &str); 4] = [
    ("CLL-T1", "CLLT1", "Synthetic first-line CLL study", "III"),
    ("CLL-T2", "CLLT2", "Synthetic relapsed CLL study", "II"),
    ("CLL-T3", "CLLT3", "Synthetic maintenance study", "III"),
    ("CLL-T4", "CLLT4", "Synthetic observational cohort", "IV"),
];

const NAMES: [&str; 12] = [
    "Jansen", "Peeters", "Maes", "Claes", "Wouters", "Mertens", "Willems", "Goossens", "Dubois", "Lambert", "Martin",
    "Smet",
];

pub const FIRST_PERSNR: u64 = 100_001;

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid constant date")
}

fn eighteenth_birthday(birth: NaiveDate) -> NaiveDate {
    NaiveDate::from_ymd_opt(birth.year() + 18, birth.month(), birth.day())
        .unwrap_or_else(|| date(birth.year() + 18, 3, 1))
}

fn sql_opt<T: std::fmt::Display>(keep: bool, v: T, quote: bool) -> String {
    match (keep, quote) {
        (false, _) => "NULL".into(),
        (true, true) => format!("'{v}'"),
        (true, false) => v.to_string(),
    }
}

/// Renders both fixtures. Every patient consumes the same number of random
/// draws whatever the rates, so changing one rate leaves all other fields
/// of the population unchanged.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SyntheticFixtures, SynthError> {
    let m = cfg.missing;
    for (name, value) in [
        ("weight", m.weight),
        ("height", m.height),
        ("birthdate", m.birthdate),
        ("name", m.name),
        ("trial", cfg.trial_rate),
    ] {
        if !(0.0..=1.0).contains(&value) {
            return Err(SynthError::Rate { name, value });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let first_birth = date(1920, 1, 1);
    let birth_span = (date(2008, 12, 31) - first_birth).num_days();
    let last_measurement = date(2026, 6, 30);

    let mut cis = String::from(CIS_DDL);
    let mut ctms = String::from(CTMS_DDL);
    cis.push_str("BEGIN;\n");
    ctms.push_str("BEGIN;\n");
    for (id, acronym, title, phase) in TRIALS {
        writeln!(cis, "INSERT INTO StudyRegistry VALUES ('{id}', '{acronym}');").expect("write");
        writeln!(ctms, "INSERT INTO Trial VALUES ('{id}', '{title}', '{phase}');").expect("write");
    }
    let mut summary = SynthSummary {
        patients: cfg.patients,
        ..SynthSummary::default()
    };
    for i in 0..cfg.patients as u64 {
        let persnr = FIRST_PERSNR + i;
        let birth = first_birth + Duration::days(rng.gen_range(0..=birth_span));
        let adult = eighteenth_birthday(birth);
        let span = (last_measurement - adult).num_days().clamp(1, 40 * 365);
        let measured = adult + Duration::days(rng.gen_range(1..=span));
        let weight: u32 = rng.gen_range(40..=150);
        let height: u32 = rng.gen_range(140..=210);
        let name = NAMES[rng.gen_range(0..NAMES.len())];
        let mut null = |p: f64| rng.gen::<f64>() < p;
        let keep_weight = !null(m.weight);
        let keep_height = !null(m.height);
        let keep_birth = !null(m.birthdate);
        let keep_name = !null(m.name);
        let enrolled = null(cfg.trial_rate);
        let trial = TRIALS[rng.gen_range(0..TRIALS.len())].0;
        let status = if rng.gen::<f64>() < 0.5 { "active" } else { "completed" };

        summary.with_weight += keep_weight as usize;
        summary.with_height += keep_height as usize;
        summary.with_birthdate += keep_birth as usize;
        summary.enrolled += enrolled as usize;

        writeln!(
            cis,
            "INSERT INTO Natperson VALUES ({persnr}, {}, {});",
            sql_opt(keep_name, name, true),
            sql_opt(keep_birth, birth, true)
        )
        .expect("write");
        writeln!(cis, "INSERT INTO Patient VALUES ({persnr}, {persnr});").expect("write");
        writeln!(
            cis,
            "INSERT INTO CLLFormEntry VALUES ({}, {}, {}, '{measured}');",
            3_000_001 + i,
            sql_opt(keep_weight, weight, false),
            sql_opt(keep_height, height, false)
        )
        .expect("write");
        writeln!(
            cis,
            "INSERT INTO HospitalStay VALUES ({}, {persnr}, {});",
            2_000_001 + i,
            3_000_001 + i
        )
        .expect("write");
        if enrolled {
            writeln!(
                cis,
                "INSERT INTO TrialInclusion VALUES ({}, {persnr}, '{trial}', '{measured}');",
                4_000_001 + i
            )
            .expect("write");
            writeln!(
                ctms,
                "INSERT INTO Enrollment VALUES ({}, '{trial}', {persnr}, '{status}');",
                5_000_001 + i
            )
            .expect("write");
        }
    }
    cis.push_str("COMMIT;\n");
    ctms.push_str("COMMIT;\n");
    Ok(SyntheticFixtures {
        cis_sql: cis,
        ctms_sql: ctms,
        summary,
    })
}

/// Writes `cis.sql`, `ctms.sql` and the matching `cis.db` / `ctms.db`
/// into `dir`, replacing existing databases.
pub fn write_synthetic(cfg: &SynthConfig, dir: impl AsRef<Path>) -> Result<SynthSummary, SynthError> {
    let dir = dir.as_ref();
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SynthError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let fx = generate_synthetic(cfg)?;
    for (name, sql) in [("cis", &fx.cis_sql), ("ctms", &fx.ctms_sql)] {
        let script = dir.join(format!("{name}.sql"));
        std::fs::write(&script, sql).map_err(io(&script))?;
        let db = dir.join(format!("{name}.db"));
        if db.exists() {
            std::fs::remove_file(&db).map_err(io(&db))?;
        }
        Database::create(&db)?.execute_script(sql)?;
    }
    Ok(fx.summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_rate_isolated() {
        let a = generate_synthetic(&SynthConfig::default()).unwrap();
        let b = generate_synthetic(&SynthConfig::default()).unwrap();
        assert_eq!(a, b);
        let other = generate_synthetic(&SynthConfig {
            seed: 7,
            ..SynthConfig::default()
        })
        .unwrap();
        assert_ne!(a.cis_sql, other.cis_sql);

        let missing = generate_synthetic(&SynthConfig {
            missing: Missingness {
                height: 1.0,
                ..Missingness::default()
            },
            ..SynthConfig::default()
        })
        .unwrap();
        assert_eq!(missing.summary.with_height, 0);
        assert_eq!(missing.summary.with_weight, a.summary.with_weight);
        assert_eq!(missing.ctms_sql, a.ctms_sql);
    }

    #[test]
    fn empty_population_is_valid() {
        let fx = generate_synthetic(&SynthConfig {
            patients: 0,
            ..SynthConfig::default()
        })
        .unwrap();
        let db = Database::from_script(&fx.cis_sql).unwrap();
        assert_eq!(
            db.query("SELECT COUNT(*) FROM Natperson").unwrap()[0][0],
            crate::ddo::SqlValue::Integer(0)
        );
    }

    #[test]
    fn bad_rate() {
        let cfg = SynthConfig {
            trial_rate: 1.5,
            ..SynthConfig::default()
        };
        assert!(matches!(
            generate_synthetic(&cfg),
            Err(SynthError::Rate { name: "trial", .. })
        ));
    }
}
