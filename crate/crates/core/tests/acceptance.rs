//! Acceptance suite: one line per criterion, then a single verdict.
//!
//! Run with `cargo test --release --test acceptance -- --nocapture`.

mod support;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use chrono::NaiveDate;

use twostep::ddo::generate_ddo;
use twostep::kb::{self, bmi_reference, gate_reference, normalize_fixture_datatypes, vocab};
use twostep::par::Execution;
use twostep::pipeline::*;
use twostep::query::{
    compile_to_sql, dump_rdb_to_rdf, execute_construct, naive_match, parse_query, run_construct, Database,
};
use twostep::rdf::vocab::{rdf, xsd};
use twostep::rdf::{isomorphic, parse_n3, Graph, Term, Triple};
use twostep::rules::values::Value;
use twostep::rules::{read_trace, replay, write_trace, Reasoner, ReasonerOptions, Rule, Strategy};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn fixture(name: &str) -> Graph {
    normalize_fixture_datatypes(&parse_n3(kb::file(name).unwrap(), None).unwrap().graph)
}

fn within(limit: Duration, started: Instant) -> Result<Duration, String> {
    let took = started.elapsed();
    if took <= limit {
        Ok(took)
    } else {
        Err(format!("took {took:.2?}, limit {limit:?}"))
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c1_ddo_golden() -> Outcome {
    let t = Instant::now();
    let ddo = generate_ddo(&support::clinic_manifest());
    let expected = fixture("fixtures/clinic_ddo.n3");
    check(isomorphic(&ddo, &expected), || {
        format!("generated {} triples, fixture {}", ddo.len(), expected.len())
    })?;
    let took = within(Duration::from_secs(1), t)?;
    Ok(format!("{} triples, isomorphic, {took:.2?}", ddo.len()))
}

fn c2_query_golden() -> Outcome {
    let t = Instant::now();
    let m = support::clinic_manifest();
    let result = run_construct(
        kb::file("queries/form_weight.rq").unwrap(),
        &generate_ddo(&m),
        &m,
        &support::fixture_db(),
    )
    .map_err(|e| e.to_string())?;
    let expected = fixture("fixtures/form_weight_results.n3");
    check(
        result.graph.clone().into_triples() == expected.clone().into_triples(),
        || format!("got\n{}", twostep::rdf::serialize_n3(&result.graph)),
    )?;
    let took = within(Duration::from_secs(1), t)?;
    Ok(format!("{} triples, exact, {took:.2?}", result.graph.len()))
}

fn conversion_rules() -> Vec<Rule> {
    kb::rule_asset("convert_demographics.n3").unwrap().rules().unwrap()
}

fn c3_conversion_golden() -> Outcome {
    let t = Instant::now();
    let mut input = fixture("fixtures/form_weight_results.n3");
    input.insert(
        Triple::with_iri(
            Term::iri(support::FIXTURE_PERSON),
            rdf::TYPE,
            Term::iri("http://example.org/cis/Natperson#Natperson"),
        )
        .unwrap(),
    );
    let reasoning = Reasoner::new(conversion_rules(), ReasonerOptions::default())
        .unwrap()
        .run(&input)
        .map_err(|e| e.to_string())?;
    let out = reasoning.inferred(&input);
    let expected = fixture("fixtures/converted_person.n3");
    check(isomorphic(&out, &expected), || {
        format!("got\n{}", twostep::rdf::serialize_n3(&out))
    })?;
    check(out.blank_nodes().len() == 1, || {
        format!("{} blank nodes", out.blank_nodes().len())
    })?;
    let took = within(Duration::from_secs(1), t)?;
    Ok(format!("{} triples, 1 blank node, isomorphic, {took:.2?}", out.len()))
}

/// (value, unit, dateTime) of every BMI node of `person`.
fn bmi_nodes(g: &Graph, person: &str) -> Vec<(f64, Term, Term)> {
    let person = Term::iri(person);
    g.objects(&person, vocab::HAS_BODY_MASS_INDEX)
        .map(|n| {
            let one = |p| {
                g.objects(n, p)
                    .next()
                    .cloned()
                    .unwrap_or_else(|| Term::string("missing"))
            };
            let v = Value::from_term(&one(vocab::HAS_VALUE))
                .and_then(Value::as_f64)
                .unwrap_or(f64::NAN);
            (v, one(vocab::HAS_UNIT), one(vocab::HAS_DATE_TIME))
        })
        .collect()
}

fn fixture_ehr() -> Result<(SourceRegistry, EhrGraph, tempfile::TempDir), String> {
    let dir = support::tempdir();
    let reg = SourceRegistry::from_config(&support::fixture_config(dir.path())).map_err(|e| e.to_string())?;
    let ehr = build_patient_ehr(&reg, support::FIXTURE_PATIENT).map_err(|e| e.to_string())?;
    Ok((reg, ehr, dir))
}

fn c4_bmi_end_to_end() -> Outcome {
    const EXPECTED: f64 = 24.913494809688583;
    let t = Instant::now();
    let (_, ehr, _dir) = fixture_ehr()?;
    let nodes = bmi_nodes(&ehr.graph, support::FIXTURE_PERSON);
    check(nodes.len() == 1, || format!("{} BMI nodes", nodes.len()))?;
    let (value, unit, date_time) = &nodes[0];
    let oracle = bmi_reference(72.0, 1.70).map_err(|e| e.to_string())?;
    check(((oracle - EXPECTED) / EXPECTED).abs() < 1e-12, || {
        format!("oracle gives {oracle}")
    })?;
    check(((value - EXPECTED) / EXPECTED).abs() <= 1e-9, || {
        format!("value {value}")
    })?;
    check(*unit == Term::iri(vocab::KILOGRAM_PER_METER_SQUARE), || {
        format!("unit {unit}")
    })?;
    let later = Term::literal("2012-01-01T00:00:00", xsd::DATE_TIME);
    check(*date_time == later, || format!("dateTime {date_time}"))?;
    let took = within(Duration::from_secs(2), t)?;
    Ok(format!("BMI {value} at {date_time}, {took:.2?}"))
}

fn d(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
}

fn years_before(date: NaiveDate, years: i32) -> NaiveDate {
    NaiveDate::from_ymd_opt(
        chrono::Datelike::year(&date) - years,
        chrono::Datelike::month(&date),
        chrono::Datelike::day(&date),
    )
    .unwrap()
}

fn c5_gate_boundaries() -> Outcome {
    let reasoner = Reasoner::new(support::analysis_rules(), ReasonerOptions::default()).unwrap();
    let length_date = d("2012-01-01");
    let mut cases: Vec<(String, NaiveDate, NaiveDate)> = Vec::new();
    for (label, days) in [("-8d", -8), ("-7d", -7), ("0", 0), ("+2y", 730), ("+2y+1d", 731)] {
        let weight_date = length_date + chrono::Duration::days(days);
        cases.push((
            format!("delta {label}"),
            weight_date,
            years_before(weight_date.max(length_date), 40),
        ));
    }
    for age in [17, 18, 19] {
        let birth = years_before(length_date, 18) + chrono::Duration::days(if age == 17 { 1 } else { 0 });
        let birth = if age == 19 {
            years_before(length_date, 19)
        } else {
            birth
        };
        cases.push((format!("age {age}"), length_date, birth));
    }
    let mut summary = Vec::new();
    for (label, weight_date, birth) in &cases {
        let g = support::do_patient(72.0, *weight_date, 170.0, length_date, *birth);
        let out = reasoner.run(&g).map_err(|e| e.to_string())?.graph;
        let present = !bmi_nodes(&out, "http://x/p").is_empty();
        let expected = gate_reference(*weight_date, length_date, *birth);
        check(present == expected, || {
            format!("{label}: BMI present={present}, oracle={expected}")
        })?;
        summary.push(format!("{label}={}", if present { "bmi" } else { "none" }));
    }
    Ok(format!("{} cases agree: {}", cases.len(), summary.join(" ")))
}

fn c6_compiler_oracle() -> Outcome {
    let t = Instant::now();
    let seeds: Vec<u64> = (0..1000).collect();
    let failures: Vec<String> = twostep::par::map(Execution::default(), &seeds, |&seed| {
        let inst = support::random_instance(seed);
        let db = Database::from_script(&inst.sql).map_err(|e| format!("seed {seed}: {e}"))?;
        let q = parse_query(&inst.query).map_err(|e| format!("seed {seed}: {e}"))?;
        let plan = compile_to_sql(&q, &generate_ddo(&inst.manifest), &inst.manifest)
            .map_err(|e| format!("seed {seed}: {e}"))?;
        let compiled =
            execute_construct(&plan, &q.template, &inst.manifest, &db).map_err(|e| format!("seed {seed}: {e}"))?;
        let dump = dump_rdb_to_rdf(&db, &inst.manifest).map_err(|e| format!("seed {seed}: {e}"))?;
        if isomorphic(&compiled.graph, &naive_match(&q, &dump.graph)) {
            Ok(())
        } else {
            Err(format!("seed {seed}: results differ"))
        }
    })
    .into_iter()
    .filter_map(Result::err)
    .collect();
    check(failures.is_empty(), || {
        format!("{} failures, first: {}", failures.len(), failures[0])
    })?;
    let took = within(Duration::from_secs(60), t)?;
    Ok(format!("1000 instances isomorphic, {took:.2?}"))
}

fn all_kb_rules(reversed: bool) -> Vec<Rule> {
    let mut rules = kb::all_rules();
    if reversed {
        rules.reverse();
    }
    rules
}

fn c7_fixpoint_properties() -> Outcome {
    let t = Instant::now();
    let dir = support::tempdir();
    let cfg = support::synthetic_config(
        dir.path(),
        &SynthConfig {
            patients: 100,
            ..SynthConfig::default()
        },
    );
    let reg = SourceRegistry::from_config(&cfg).map_err(|e| e.to_string())?;
    let ids = list_patients(&reg).map_err(|e| e.to_string())?;
    let ddos: Vec<Graph> = build_population(&reg, &ids, Execution::default())
        .into_iter()
        .map(|r| r.map(|e| e.ddo).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let input = aggregate_population(&ddos);
    let run = |rules: Vec<Rule>, strategy: Strategy, g: &Graph| {
        let options = ReasonerOptions {
            strategy,
            ..ReasonerOptions::default()
        };
        Reasoner::new(rules, options)
            .unwrap()
            .run(g)
            .map(|r| r.graph)
            .map_err(|e| e.to_string())
    };
    let semi = run(all_kb_rules(false), Strategy::SemiNaive, &input)?;
    let again = run(all_kb_rules(false), Strategy::SemiNaive, &semi)?;
    check(again.len() == semi.len(), || {
        format!("re-reasoning added {} triples", again.len() - semi.len())
    })?;
    let reversed = run(all_kb_rules(true), Strategy::SemiNaive, &input)?;
    check(reversed.clone().into_triples() == semi.clone().into_triples(), || {
        "rule order changes the result".into()
    })?;
    let naive = run(all_kb_rules(false), Strategy::Naive, &input)?;
    check(naive.clone().into_triples() == semi.clone().into_triples(), || {
        "naive and semi-naive differ".into()
    })?;
    let took = within(Duration::from_secs(60), t)?;
    Ok(format!(
        "{} input / {} output triples; idempotent, order-independent, naive = semi-naive; {took:.2?}",
        input.len(),
        semi.len()
    ))
}

fn c8_scaling_shape() -> Outcome {
    let dir = support::tempdir();
    let cfg = support::synthetic_config(
        dir.path(),
        &SynthConfig {
            patients: 1280,
            ..SynthConfig::default()
        },
    );
    let reg = SourceRegistry::from_config(&cfg).map_err(|e| e.to_string())?;
    let ids = list_patients(&reg).map_err(|e| e.to_string())?;
    let t = Instant::now();
    let cache = EhrCache::open(cfg.cache_path(), &reg.asset_hash).map_err(|e| e.to_string())?;
    let entries = build_population(&reg, &ids, Execution::default())
        .into_iter()
        .map(|r| {
            let e = r.map_err(|e| e.to_string())?;
            let entry = cache
                .put(&e.patient_id, &e.patient_iri, &e.graph)
                .map_err(|e| e.to_string())?;
            Ok((e.patient_iri, entry))
        })
        .collect::<Result<Vec<_>, String>>()?;
    cache.record(entries).map_err(|e| e.to_string())?;
    let build_time = t.elapsed();

    let sizes: Vec<usize> = (0..8).map(|i| 10 << i).collect();
    let report = run_benchmark(&cache, &sizes, &cfg.views, 3).map_err(|e| e.to_string())?;
    let agg = report.series(Phase::Aggregation);
    let monotone = agg.windows(2).all(|w| w[1].1 >= w[0].1);
    let r2 = linear_fit_r2(&agg);
    let last: f64 = report
        .rows
        .iter()
        .filter(|r| r.population_size == 1280)
        .map(BenchRow::total)
        .sum();
    let series: Vec<String> = agg.iter().map(|(n, s)| format!("{n}:{s:.3}s")).collect();
    check(monotone, || format!("aggregation not monotone: {}", series.join(" ")))?;
    check(r2 >= 0.9, || {
        format!("aggregation R^2 {r2:.4} < 0.9: {}", series.join(" "))
    })?;
    check(last <= 360.0, || format!("1280-patient views took {last:.1}s"))?;
    Ok(format!(
        "aggregation {}; R^2 {r2:.4}; views for 1280 patients {last:.2}s (EHR builds {build_time:.1?})",
        series.join(" ")
    ))
}

fn c9_missingness() -> Outcome {
    const N: usize = 500;
    const P: f64 = 0.2;
    let dir = support::tempdir();
    let synth = SynthConfig {
        patients: N,
        missing: Missingness {
            height: P,
            ..Missingness::default()
        },
        ..SynthConfig::default()
    };
    let cfg = support::synthetic_config(dir.path(), &synth);
    let reg = SourceRegistry::from_config(&cfg).map_err(|e| e.to_string())?;
    let ids = list_patients(&reg).map_err(|e| e.to_string())?;
    let mut without = 0;
    for r in build_population(&reg, &ids, Execution::default()) {
        let e = r.map_err(|e| e.to_string())?;
        if bmi_nodes(&e.graph, &e.patient_iri).is_empty() {
            without += 1;
        }
    }
    let frac = without as f64 / N as f64;
    let sigma = (P * (1.0 - P) / N as f64).sqrt();
    let z = (frac - P) / sigma;
    check(z.abs() <= 3.0, || format!("{without}/{N} without BMI, z = {z:.2}"))?;
    Ok(format!("{without}/{N} without BMI ({frac:.3}), z = {z:.2}"))
}

fn c10_trace_soundness() -> Outcome {
    let (reg, ehr, _dir) = fixture_ehr()?;
    let mut buf = Vec::new();
    write_trace(&mut buf, &ehr.derivations).map_err(|e| e.to_string())?;
    let derivations = read_trace(&buf[..]).map_err(|e| e.to_string())?;
    let rules: Vec<Rule> = reg
        .sources
        .iter()
        .flat_map(|s| s.conversion.rules().cloned().collect::<Vec<_>>())
        .chain(reg.analysis.rules().cloned())
        .collect();
    let replayed = replay(&rules, &derivations).map_err(|e| e.to_string())?;
    let expected = ehr.graph.difference(&ehr.ddo);
    let (a, b): (BTreeSet<Triple>, BTreeSet<Triple>) = (replayed.into_triples(), expected.into_triples());
    check(a == b, || {
        format!("replay {} triples, output minus input {}", a.len(), b.len())
    })?;
    Ok(format!(
        "{} derivations replay to {} triples",
        derivations.len(),
        a.len()
    ))
}

// Plain binary rather than libtest so the per-criterion lines are never captured.
fn main() -> std::process::ExitCode {
    let criteria: [Criterion; 10] = [
        ("1 DDO golden", c1_ddo_golden),
        ("2 query golden", c2_query_golden),
        ("3 conversion golden", c3_conversion_golden),
        ("4 BMI end-to-end", c4_bmi_end_to_end),
        ("5 gate boundaries", c5_gate_boundaries),
        ("6 compiler oracle", c6_compiler_oracle),
        ("7 fixpoint properties", c7_fixpoint_properties),
        ("8 scaling shape", c8_scaling_shape),
        ("9 synthetic missingness", c9_missingness),
        ("10 trace soundness", c10_trace_soundness),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(detail) => {
                println!("criterion {name}: FAIL ({detail})");
                failed.push(name);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", criteria.len());
        std::process::ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria: {failed:?}");
        std::process::ExitCode::FAILURE
    }
}
