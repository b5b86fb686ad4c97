use std::path::Path;
use std::process::{Command, Output};

fn twostep(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twostep"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn seed_build_aggregate_views_bench() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let seed = twostep(d, &["seed", "--out", "s", "--patients", "12", "--seed", "7"]);
    assert!(seed.status.success(), "{seed:?}");
    assert!(stdout(&seed).contains("\"patients\":12"));
    assert!(d.join("s/pipeline.json").is_file());

    let cfg = "s/pipeline.json";
    assert_eq!(
        twostep(d, &["build", "--config", cfg, "--all", "--jobs", "2"])
            .status
            .code(),
        Some(0)
    );
    assert!(d.join("s/cache/index.json").is_file());

    let agg = twostep(d, &["aggregate", "--config", cfg, "-o", "agg.n3"]);
    assert!(agg.status.success(), "{agg:?}");
    let text = std::fs::read_to_string(d.join("agg.n3")).unwrap();
    assert!(text.contains("hasBodyMassIndex"));

    let views = twostep(d, &["views", "--config", cfg, "--aggregate", "agg.n3"]);
    assert!(views.status.success(), "{views:?}");
    let csv = stdout(&views);
    assert!(csv.contains("# bmi_mean_by_age") && csv.contains("group,mean,n"));
    // Views from the cache and from the written aggregate agree.
    assert_eq!(stdout(&twostep(d, &["views", "--config", cfg])), csv);

    let bench = twostep(d, &["bench", "--config", cfg, "--sizes", "3,6,12", "--runs", "1"]);
    assert!(bench.status.success(), "{bench:?}");
    assert_eq!(stdout(&bench).lines().count(), 1 + 3 * 2);
}

#[test]
fn sequential_and_parallel_builds_cache_the_same_graphs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(twostep(d, &["seed", "--out", "s", "--patients", "8"]).status.success());
    let cfg = "s/pipeline.json";
    assert!(twostep(d, &["build", "--config", cfg, "--all", "--sequential"])
        .status
        .success());
    let a = stdout(&twostep(d, &["aggregate", "--config", cfg]));
    assert!(twostep(d, &["build", "--config", cfg, "--all", "--jobs", "3"])
        .status
        .success());
    assert_eq!(stdout(&twostep(d, &["aggregate", "--config", cfg])), a);
}

#[test]
fn query_and_reason_with_trace() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(twostep(d, &["seed", "--out", "s", "--patients", "2"]).status.success());
    let q = twostep(
        d,
        &[
            "query",
            "--manifest",
            "kb:manifests/cis.json",
            "--db",
            "s/cis.db",
            "--query",
            "kb:templates/cis/cll_weight.rq",
            "--param",
            "patientId=100001",
            "-o",
            "w.n3",
        ],
    );
    assert!(q.status.success(), "{q:?}");
    let r = twostep(
        d,
        &[
            "reason",
            "--rules",
            "kb:convert_demographics.n3",
            "--input",
            "w.n3",
            "--trace",
            "t.jsonl",
            "--inferred-only",
        ],
    );
    assert!(r.status.success(), "{r:?}");
    assert!(stdout(&r).contains("human#weighs"));
    let trace = std::fs::read_to_string(d.join("t.jsonl")).unwrap();
    assert!(trace.lines().count() >= 1 && trace.contains("\"produced\""));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(twostep(d, &["no-such-verb"]).status.code(), Some(1));
    assert_eq!(
        twostep(d, &["build", "--config", "missing.json", "--all"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        twostep(d, &["ddo-gen", "--manifest", "kb:nothing.json"]).status.code(),
        Some(2)
    );

    std::fs::write(
        d.join("div.n3"),
        "@prefix math: <http://www.w3.org/2000/10/swap/math#>.\n\
         {?x <http://e/p> ?y. (?y 0) math:quotient ?z} => {?x <http://e/q> ?z}.\n\
         <http://e/a> <http://e/p> 1.\n",
    )
    .unwrap();
    let lenient = twostep(d, &["reason", "--rules", "div.n3", "--input", "div.n3"]);
    assert_eq!(lenient.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&lenient.stderr).contains("division by zero"));
    assert_eq!(
        twostep(d, &["reason", "--rules", "div.n3", "--input", "div.n3", "--strict"])
            .status
            .code(),
        Some(2)
    );

    let ok = twostep(d, &["validate-kb"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("knowledge base ok"));
}

#[test]
fn views_without_cache_explain_what_to_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(twostep(d, &["seed", "--out", "s", "--patients", "2"]).status.success());
    let v = twostep(d, &["views", "--config", "s/pipeline.json"]);
    assert_eq!(v.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&v.stderr).contains("twostep build"));
}
