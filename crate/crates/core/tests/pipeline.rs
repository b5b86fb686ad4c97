mod support;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use twostep::kb::{self, bmi_reference, vocab};
use twostep::par::Execution;
use twostep::pipeline::*;
use twostep::rdf::{isomorphic, Graph, Term};
use twostep::rules::values::Value;

fn bmi_values(g: &Graph, person: &str) -> Vec<(f64, Term)> {
    let person = Term::iri(person);
    g.objects(&person, vocab::HAS_BODY_MASS_INDEX)
        .map(|node| {
            let v = g.objects(node, vocab::HAS_VALUE).next().unwrap();
            let dt = g.objects(node, vocab::HAS_DATE_TIME).next().unwrap().clone();
            (Value::from_term(v).unwrap().as_f64().unwrap(), dt)
        })
        .collect()
}

#[test]
fn fixture_patient_gets_bmi() {
    let dir = support::tempdir();
    let reg = SourceRegistry::from_config(&support::fixture_config(dir.path())).unwrap();
    let ehr = build_patient_ehr(&reg, support::FIXTURE_PATIENT).unwrap();
    assert_eq!(ehr.patient_iri, support::FIXTURE_PERSON);
    let bmi = bmi_values(&ehr.graph, support::FIXTURE_PERSON);
    assert_eq!(bmi.len(), 1);
    let expected = bmi_reference(72.0, 1.70).unwrap();
    assert!(((bmi[0].0 - expected) / expected).abs() < 1e-9);
    assert!(ehr.graph.is_superset(&ehr.ddo));
    assert!(ehr.diagnostics.is_empty(), "{:?}", ehr.diagnostics);
}

#[test]
fn weight_without_height_has_no_bmi() {
    let dir = support::tempdir();
    let reg = SourceRegistry::from_config(&support::fixture_config(dir.path())).unwrap();
    let ehr = build_patient_ehr(&reg, "644008").unwrap();
    let person = Term::iri("http://example.org/cis/Natperson/644008#this");
    assert_eq!(ehr.graph.objects(&person, vocab::WEIGHS).count(), 1);
    assert_eq!(ehr.graph.objects(&person, vocab::HAS_LENGTH).count(), 0);
    assert!(bmi_values(&ehr.graph, "http://example.org/cis/Natperson/644008#this").is_empty());
}

#[test]
fn unknown_and_malformed_patients() {
    let dir = support::tempdir();
    let reg = SourceRegistry::from_config(&support::fixture_config(dir.path())).unwrap();
    assert!(matches!(build_patient_ehr(&reg, "1"), Err(BuildError::NotFound(id)) if id == "1"));
    assert!(matches!(
        build_patient_ehr(&reg, "1> ?x"),
        Err(BuildError::InvalidPatientId(_))
    ));
    assert_eq!(list_patients(&reg).unwrap(), ["644007", "644008"]);
}

fn synthetic(n: usize, dir: &std::path::Path) -> SourceRegistry {
    let cfg = support::synthetic_config(
        dir,
        &SynthConfig {
            patients: n,
            ..SynthConfig::default()
        },
    );
    SourceRegistry::from_config(&cfg).unwrap()
}

/// Undirected reachability over IRI and blank-node terms.
fn connected(g: &Graph) -> bool {
    let mut adj: HashMap<&Term, Vec<&Term>> = HashMap::new();
    for t in g.iter() {
        if let Term::List(items) = t.subject() {
            for m in items.iter().filter(|m| !m.is_literal()) {
                adj.entry(t.subject()).or_default().push(m);
                adj.entry(m).or_default().push(t.subject());
            }
        }
        if !t.object().is_literal() {
            adj.entry(t.subject()).or_default().push(t.object());
            adj.entry(t.object()).or_default().push(t.subject());
        } else {
            adj.entry(t.subject()).or_default();
        }
    }
    let Some(start) = adj.keys().next().copied() else {
        return true;
    };
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(n) = stack.pop() {
        for m in &adj[n] {
            if seen.insert(*m) {
                stack.push(m);
            }
        }
    }
    seen.len() == adj.len()
}

#[test]
fn cis_and_ctms_integrate_through_trial_iris() {
    let dir = support::tempdir();
    let reg = synthetic(30, dir.path());
    let ids = list_patients(&reg).unwrap();
    let mut checked = 0;
    for id in &ids {
        let ehr = build_patient_ehr(&reg, id).unwrap();
        let person = Term::iri(ehr.patient_iri.as_str());
        let trials: Vec<&Term> = ehr.graph.objects(&person, vocab::ENROLLED_IN).collect();
        if trials.is_empty() {
            continue;
        }
        checked += 1;
        let title = "http://example.org/do/trial#title";
        assert!(trials.iter().all(|t| ehr.graph.objects(t, title).count() == 1), "{id}");
        assert!(connected(&ehr.graph), "{id}");
    }
    assert!(checked > 0);
}

#[test]
fn parallel_builds_equal_sequential_and_are_isolated() {
    let dir = support::tempdir();
    let reg = synthetic(40, dir.path());
    let ids = list_patients(&reg).unwrap();
    let seq: Vec<Graph> = build_population(&reg, &ids, Execution::Sequential)
        .into_iter()
        .map(|r| r.unwrap().graph)
        .collect();
    let par: Vec<Graph> = twostep::par::with_workers(Some(4), || build_population(&reg, &ids, Execution::Parallel))
        .into_iter()
        .map(|r| r.unwrap().graph)
        .collect();
    assert_eq!(seq, par);
    // Determinism across runs.
    let again = build_patient_ehr(&reg, &ids[3]).unwrap().graph;
    assert_eq!(again, seq[3]);

    // The same patient against a database holding only their rows.
    let only = support::tempdir();
    let full_cis = twostep::pipeline::generate_synthetic(&SynthConfig {
        patients: 40,
        ..SynthConfig::default()
    })
    .unwrap();
    let id = &ids[5];
    let form = (3_000_001 + id.parse::<u64>().unwrap() - FIRST_PERSNR).to_string();
    let keep = |sql: &str, id: &str| -> String {
        sql.lines()
            .filter(|l| {
                !l.starts_with("INSERT INTO")
                    || l.contains(id)
                    || l.contains(&format!("({form},"))
                    || l.contains("StudyRegistry")
                    || l.contains("INTO Trial ")
            })
            .map(|l| format!("{l}\n"))
            .collect()
    };
    support::write_db(&only.path().join("cis.db"), &keep(&full_cis.cis_sql, id));
    support::write_db(&only.path().join("ctms.db"), &keep(&full_cis.ctms_sql, id));
    let solo = SourceRegistry::from_config(&PipelineConfig::shipped(only.path())).unwrap();
    assert_eq!(list_patients(&solo).unwrap(), [id.as_str()]);
    assert_eq!(build_patient_ehr(&solo, id).unwrap().graph, seq[5]);
}

#[test]
fn aggregation_counts_and_idempotence() {
    let dir = support::tempdir();
    let reg = synthetic(5, dir.path());
    let ids = list_patients(&reg).unwrap();
    let a = build_patient_ehr(&reg, &ids[0]).unwrap().graph;
    let b = build_patient_ehr(&reg, &ids[1]).unwrap().graph;
    let shared_ground = a.iter().filter(|t| b.contains(t)).count();
    let both = aggregate_population(&[a.clone(), b.clone()]);
    assert_eq!(both.len(), a.len() + b.len() - shared_ground);
    assert!(isomorphic(&aggregate_population(&[a.clone(), a.clone()]), &a));
}

/// Mean BMI by age bracket equals a recomputation from the raw DDO query
/// results, with no rule engine involved.
#[test]
fn view_mean_matches_independent_pass() {
    let dir = support::tempdir();
    let reg = synthetic(60, dir.path());
    let ids = list_patients(&reg).unwrap();
    let ehrs: Vec<EhrGraph> = build_population(&reg, &ids, Execution::default())
        .into_iter()
        .map(Result::unwrap)
        .collect();
    let agg = aggregate_population(&ehrs.iter().map(|e| e.graph.clone()).collect::<Vec<_>>());
    let spec = ViewSpec::shipped()
        .into_iter()
        .find(|s| s.metric == Metric::Mean)
        .unwrap();
    let table = compute_views(&agg, &[spec]).pop().unwrap().unwrap();

    // Independent pass over the query results (the DDO part of each EHR).
    let cll = "http://example.org/cis/CLLForm#";
    let nat = "http://example.org/cis/Natperson#";
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for e in &ehrs {
        let g = &e.ddo;
        let person = Term::iri(e.patient_iri.as_str());
        let forms: Vec<&Term> = g
            .iter()
            .filter(|t| t.predicate_iri() == format!("{cll}weight"))
            .map(|t| t.subject())
            .collect();
        let birth_p = format!("{nat}birthdate");
        let Some(birth) = g.objects(&person, &birth_p).next() else {
            continue;
        };
        let birth = chrono::NaiveDate::parse_from_str(birth.as_literal().unwrap().lexical(), "%Y-%m-%d").unwrap();
        for f in forms {
            let get = |p: &str| {
                g.objects(f, &format!("{cll}{p}"))
                    .next()
                    .map(|t| t.as_literal().unwrap().lexical().to_string())
            };
            let (Some(w), Some(h), Some(d)) = (get("weight"), get("height"), get("date")) else {
                continue;
            };
            let date = chrono::NaiveDate::parse_from_str(&d, "%Y-%m-%d").unwrap();
            if !kb::gate_reference(date, date, birth) {
                continue;
            }
            let age = kb::age_reference(birth, date).unwrap();
            let label = match age {
                a if a < 40 => "18-39",
                a if a < 65 => "40-64",
                _ => "65+",
            };
            let bmi = bmi_reference(w.parse().unwrap(), h.parse::<f64>().unwrap() / 100.0).unwrap();
            groups.entry(label.into()).or_default().push(bmi);
        }
    }
    let expected: Vec<(String, f64, usize)> = groups
        .into_iter()
        .map(|(k, v)| (k, v.iter().sum::<f64>() / v.len() as f64, v.len()))
        .collect();
    assert_eq!(table.rows.len(), expected.len());
    for (row, (label, mean, n)) in table.rows.iter().zip(&expected) {
        assert_eq!(&row.group, label);
        assert_eq!(row.n, *n);
        assert!(((row.value - mean) / mean).abs() < 1e-9, "{} vs {mean}", row.value);
    }
}

#[test]
fn cache_round_trip() {
    let dir = support::tempdir();
    let reg = synthetic(3, dir.path());
    let cache = EhrCache::open(dir.path().join("cache"), &reg.asset_hash).unwrap();
    let ehr = build_patient_ehr(&reg, "100001").unwrap();
    let entry = cache.put(&ehr.patient_id, &ehr.patient_iri, &ehr.graph).unwrap();
    cache.record([(ehr.patient_iri.clone(), entry.clone())]).unwrap();
    let back = cache.load(&entry).unwrap();
    assert_eq!(back.into_triples(), ehr.graph.clone().into_triples());
}

/// Checks every synthetic patient against the oracles, reading the raw
/// measurements straight from the database.
#[test]
fn synthetic_patients_agree_with_oracles() {
    let dir = support::tempdir();
    let synth = SynthConfig {
        patients: 150,
        seed: 9,
        missing: Missingness {
            weight: 0.1,
            height: 0.1,
            birthdate: 0.1,
            name: 0.1,
        },
        ..SynthConfig::default()
    };
    let reg = SourceRegistry::from_config(&support::synthetic_config(dir.path(), &synth)).unwrap();
    let db = twostep::query::Database::open(dir.path().join("cis.db")).unwrap();
    let rows = db
        .query(
            "SELECT n.persnr, n.birthdate, f.weight, f.height, f.date FROM Natperson n \
             JOIN HospitalStay s ON s.persnr = n.persnr JOIN CLLFormEntry f ON f.formnr = s.hasCLLForm",
        )
        .unwrap();
    assert_eq!(rows.len(), 150);
    let date = |v: &twostep::ddo::SqlValue| {
        v.key_text()
            .map(|s| chrono::NaiveDate::parse_from_str(&s, "%Y-%m-%d").unwrap())
    };
    let number = |v: &twostep::ddo::SqlValue| match v {
        twostep::ddo::SqlValue::Integer(i) => Some(*i as f64),
        _ => None,
    };
    let person_predicates = [vocab::WEIGHS, vocab::HAS_LENGTH, vocab::HAS_BODY_MASS_INDEX];
    let mut with_bmi = 0;
    for row in rows {
        let id = row[0].key_text().unwrap();
        let ehr = build_patient_ehr(&reg, &id).unwrap();
        assert!(ehr.graph.is_superset(&ehr.ddo));
        for t in ehr
            .graph
            .iter()
            .filter(|t| person_predicates.contains(&t.predicate_iri()))
        {
            assert_eq!(*t.subject(), Term::iri(ehr.patient_iri.clone()), "{t:?}");
        }
        let expected = match (date(&row[1]), number(&row[2]), number(&row[3]), date(&row[4])) {
            (Some(birth), Some(w), Some(h), Some(d)) if kb::gate_reference(d, d, birth) => {
                Some(bmi_reference(w, h / 100.0).unwrap())
            }
            _ => None,
        };
        let got = bmi_values(&ehr.graph, &ehr.patient_iri);
        match expected {
            Some(v) => {
                assert_eq!(got.len(), 1, "patient {id}");
                assert!(((got[0].0 - v) / v).abs() <= 1e-9, "patient {id}: {} vs {v}", got[0].0);
                with_bmi += 1;
            }
            None => assert!(got.is_empty(), "patient {id} should have no BMI"),
        }
    }
    // Roughly 0.9^3 of the population keeps all three inputs.
    assert!((80..=135).contains(&with_bmi), "{with_bmi}");
}
