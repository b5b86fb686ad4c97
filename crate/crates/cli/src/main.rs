//! `twostep`: command-line front end for the two-step formalization pipeline.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use twostep::ddo::{generate_ddo, parse_manifest, SchemaManifest};
use twostep::kb;
use twostep::par::{self, Execution};
use twostep::pipeline::*;
use twostep::query::{run_construct, Database};
use twostep::rdf::{parse_n3, serialize_n3, Graph, N3Parser};
use twostep::rules::{write_trace, Reasoner, ReasonerOptions, Rule, Strategy};

#[derive(Parser)]
#[command(
    name = "twostep",
    version,
    about = "Relational data to RDF, queries and N3 rules, per patient and per population"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the data definition ontology of a schema manifest.
    DdoGen {
        /// Manifest JSON file, or `kb:manifests/...`.
        #[arg(long)]
        manifest: String,
        #[command(flatten)]
        out: Output,
    },
    /// Run a CONSTRUCT query against a database through its manifest.
    Query {
        #[arg(long)]
        manifest: String,
        #[arg(long)]
        db: PathBuf,
        /// Query file, or `kb:...`.
        #[arg(long)]
        query: String,
        /// Template parameter, e.g. `patientId=644007`.
        #[arg(long = "param", value_name = "NAME=VALUE")]
        params: Vec<String>,
        #[command(flatten)]
        out: Output,
    },
    /// Forward-chain rules over a graph to fixpoint.
    Reason {
        /// Rule files (`kb:` names allowed). Rules inside the input are used too.
        #[arg(long = "rules", num_args = 1.., required = true)]
        rules: Vec<String>,
        #[arg(long)]
        input: PathBuf,
        /// Write the derivation trace as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Abort on the first builtin error.
        #[arg(long)]
        strict: bool,
        /// Use naive evaluation instead of semi-naive.
        #[arg(long)]
        naive: bool,
        /// Print only the inferred triples.
        #[arg(long)]
        inferred_only: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Generate synthetic CIS and CTMS databases and a pipeline config.
    Seed {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        patients: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        missing_weight: f64,
        #[arg(long, default_value_t = 0.0)]
        missing_height: f64,
        #[arg(long, default_value_t = 0.0)]
        missing_birthdate: f64,
        #[arg(long, default_value_t = 0.0)]
        missing_name: f64,
        /// Probability that a patient is enrolled in a trial.
        #[arg(long, default_value_t = 0.3)]
        trial_rate: f64,
    },
    /// Build per-patient EHR graphs into the cache.
    Build {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, conflicts_with = "patients", required_unless_present = "patients")]
        all: bool,
        /// Comma-separated patient ids.
        #[arg(long, value_delimiter = ',')]
        patients: Vec<String>,
        #[command(flatten)]
        workers: Workers,
        /// Write diagnostics here as JSON lines instead of stderr.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
    },
    /// Merge cached EHR graphs into one population graph.
    Aggregate {
        #[command(flatten)]
        config: ConfigArg,
        /// Use only the first N cached patients.
        #[arg(long)]
        limit: Option<usize>,
        #[command(flatten)]
        out: Output,
    },
    /// Compute the configured population views as CSV.
    Views {
        #[command(flatten)]
        config: ConfigArg,
        /// Aggregate graph to read instead of merging the cache.
        #[arg(long)]
        aggregate: Option<PathBuf>,
        /// Write one `<view>.csv` per view here instead of stdout.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Time aggregation and view calculation over growing populations.
    Bench {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, value_delimiter = ',', default_value = "10,20,40,80,160,320,640,1280")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        runs: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Check the shipped vocabulary, rules and templates for consistency.
    ValidateKb,
}

#[derive(Args)]
struct Output {
    /// Output file; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ConfigArg {
    #[arg(long, default_value = "pipeline.json")]
    config: PathBuf,
}

#[derive(Args)]
struct Workers {
    /// Worker threads for patient builds.
    #[arg(long)]
    jobs: Option<usize>,
    /// Build patients one after another.
    #[arg(long)]
    sequential: bool,
}

/// Failure with the exit code it maps to.
enum Failure {
    /// Bad input: unreadable or invalid files, rule or query errors.
    Data(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Data(_) => 2,
            Failure::Internal(_) => 3,
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

trait OrData<T> {
    fn data(self) -> CliResult<T>;
    fn internal(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> OrData<T> for Result<T, E> {
    fn data(self) -> CliResult<T> {
        self.map_err(|e| Failure::Data(e.into()))
    }
    fn internal(self) -> CliResult<T> {
        self.map_err(|e| Failure::Internal(e.into()))
    }
}

/// Successful run; `data_errors` counts diagnostics that were reported.
struct Done {
    data_errors: usize,
}

impl Done {
    fn clean() -> Self {
        Done { data_errors: 0 }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run(cli.command)))
        .unwrap_or_else(|_| Err(Failure::Internal(anyhow!("internal error (panic)"))));
    match outcome {
        Ok(Done { data_errors: 0 }) => ExitCode::SUCCESS,
        Ok(Done { data_errors }) => {
            eprintln!("{data_errors} data error(s) reported");
            ExitCode::from(2)
        }
        Err(f) => {
            let (Failure::Data(e) | Failure::Internal(e)) = &f;
            // `twostep views | head` closing early is not a failure.
            if e.chain().any(|c| {
                c.downcast_ref::<std::io::Error>()
                    .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
            }) {
                return ExitCode::SUCCESS;
            }
            eprintln!("error: {}", describe(e));
            ExitCode::from(f.code())
        }
    }
}

/// The error chain, skipping causes their parent message already includes.
fn describe(e: &anyhow::Error) -> String {
    let mut out = e.to_string();
    let mut last = out.clone();
    for cause in e.chain().skip(1) {
        let text = cause.to_string();
        if !last.contains(&text) {
            out.push_str(": ");
            out.push_str(&text);
        }
        last = text;
    }
    out
}

fn run(command: Command) -> CliResult<Done> {
    match command {
        Command::DdoGen { manifest, out } => {
            let m = load_manifest(&manifest)?;
            emit(&out, &serialize_n3(&generate_ddo(&m)))?;
            Ok(Done::clean())
        }
        Command::Query {
            manifest,
            db,
            query,
            params,
            out,
        } => query_cmd(&manifest, &db, &query, &params, &out),
        Command::Reason {
            rules,
            input,
            trace,
            strict,
            naive,
            inferred_only,
            out,
        } => reason_cmd(&rules, &input, trace.as_deref(), strict, naive, inferred_only, &out),
        Command::Seed {
            out,
            patients,
            seed,
            missing_weight,
            missing_height,
            missing_birthdate,
            missing_name,
            trial_rate,
        } => {
            let cfg = SynthConfig {
                patients,
                seed,
                missing: Missingness {
                    weight: missing_weight,
                    height: missing_height,
                    birthdate: missing_birthdate,
                    name: missing_name,
                },
                trial_rate,
            };
            seed_cmd(&cfg, &out)
        }
        Command::Build {
            config,
            all,
            patients,
            workers,
            diagnostics,
        } => build_cmd(&config.config, all, patients, &workers, diagnostics.as_deref()),
        Command::Aggregate { config, limit, out } => {
            let (_, cache) = open_cache(&config.config)?;
            let graphs = match limit {
                Some(n) => cache.load_first(n),
                None => cache
                    .entries()
                    .and_then(|es| es.iter().map(|(_, e)| cache.load(e)).collect()),
            }
            .data()?;
            let started = Instant::now();
            let agg = aggregate_population(&graphs);
            log::info!("aggregated {} patients in {:.3?}", graphs.len(), started.elapsed());
            emit(&out, &serialize_n3(&agg))?;
            Ok(Done::clean())
        }
        Command::Views {
            config,
            aggregate,
            out_dir,
        } => views_cmd(&config.config, aggregate.as_deref(), out_dir.as_deref()),
        Command::Bench {
            config,
            sizes,
            runs,
            out,
        } => {
            let (cfg, cache) = open_cache(&config.config)?;
            let report = run_benchmark(&cache, &sizes, &cfg.views, runs).data()?;
            let fit = linear_fit_r2(&report.series(Phase::Aggregation));
            log::info!("aggregation linear fit R^2 = {fit:.4}");
            emit(&out, &report.to_csv())?;
            Ok(Done::clean())
        }
        Command::ValidateKb => {
            let violations = kb::validate_assets();
            for v in &violations {
                println!("{v}");
            }
            if violations.is_empty() {
                println!("knowledge base ok: {} files", kb::file_names().count());
            }
            Ok(Done {
                data_errors: violations.len(),
            })
        }
    }
}

fn emit(out: &Output, text: &str) -> CliResult {
    match &out.output {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .internal(),
        None => io::stdout().lock().write_all(text.as_bytes()).internal(),
    }
}

/// Contents of a file path or a shipped `kb:` asset.
fn read_input(r: &str) -> CliResult<(String, String)> {
    match r.strip_prefix(kb::SCHEME) {
        Some(name) => kb::file(name)
            .map(|t| (name.to_string(), t.to_string()))
            .ok_or_else(|| Failure::Data(anyhow!("`{r}` does not name a shipped asset"))),
        None => fs::read_to_string(r)
            .map(|t| (r.to_string(), t))
            .with_context(|| format!("reading {r}"))
            .data(),
    }
}

fn load_manifest(r: &str) -> CliResult<SchemaManifest> {
    let (name, text) = read_input(r)?;
    parse_manifest(&text).with_context(|| name).data()
}

fn read_graph(path: &Path) -> CliResult<(Graph, Vec<Rule>)> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .data()?;
    let doc = N3Parser::new().source(path.display().to_string()).parse(&text).data()?;
    let mut graph = doc.graph;
    graph.extend_prefixes(doc.prefixes.iter());
    Ok((graph, doc.rules))
}

fn print_jsonl(sink: &mut dyn Write, values: impl IntoIterator<Item = serde_json::Value>) -> CliResult<usize> {
    let mut n = 0;
    for v in values {
        writeln!(sink, "{v}").internal()?;
        n += 1;
    }
    Ok(n)
}

fn query_cmd(manifest: &str, db: &Path, query: &str, params: &[String], out: &Output) -> CliResult<Done> {
    let m = load_manifest(manifest)?;
    let (_, text) = read_input(query)?;
    let mut values = BTreeMap::new();
    for p in params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| Failure::Data(anyhow!("parameter `{p}` is not NAME=VALUE")))?;
        values.insert(k, v);
    }
    let text = QueryTemplate::new(query, text).instantiate(&values).data()?;
    let db = Database::open(db).data()?;
    let result = run_construct(&text, &generate_ddo(&m), &m, &db).data()?;
    emit(out, &serialize_n3(&result.graph))?;
    let errors = print_jsonl(
        &mut io::stderr().lock(),
        result
            .errors
            .iter()
            .map(|e| serde_json::json!({"table": e.table, "row": e.row, "message": e.message})),
    )?;
    Ok(Done { data_errors: errors })
}

fn reason_cmd(
    rule_refs: &[String],
    input: &Path,
    trace: Option<&Path>,
    strict: bool,
    naive: bool,
    inferred_only: bool,
    out: &Output,
) -> CliResult<Done> {
    let (graph, mut rules) = read_graph(input)?;
    for r in rule_refs {
        let (name, text) = read_input(r)?;
        rules.extend(N3Parser::new().source(name).parse(&text).data()?.rules);
    }
    let options = ReasonerOptions {
        strict,
        strategy: if naive { Strategy::Naive } else { Strategy::SemiNaive },
        execution: Execution::default(),
        ..ReasonerOptions::default()
    };
    let reasoning = Reasoner::new(rules, options).data()?.run(&graph).data()?;
    let mut result = if inferred_only {
        reasoning.inferred(&graph)
    } else {
        reasoning.graph.clone()
    };
    result.extend_prefixes(graph.prefixes());
    emit(out, &serialize_n3(&result))?;
    if let Some(path) = trace {
        let mut file = io::BufWriter::new(
            fs::File::create(path)
                .with_context(|| format!("creating {}", path.display()))
                .internal()?,
        );
        write_trace(&mut file, &reasoning.derivations).internal()?;
        file.flush().internal()?;
    }
    let errors = print_jsonl(
        &mut io::stderr().lock(),
        reasoning
            .diagnostics
            .iter()
            .map(|d| serde_json::json!({"rule": d.rule, "message": d.message})),
    )?;
    log::info!("fixpoint after {} iterations", reasoning.iterations);
    Ok(Done { data_errors: errors })
}

fn seed_cmd(cfg: &SynthConfig, out: &Path) -> CliResult<Done> {
    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .internal()?;
    let summary = write_synthetic(cfg, out).data()?;
    let pipeline = PipelineConfig::shipped(out);
    let json = serde_json::to_string_pretty(&pipeline).internal()?;
    let path = out.join("pipeline.json");
    fs::write(&path, json + "\n")
        .with_context(|| format!("writing {}", path.display()))
        .internal()?;
    println!("{}", serde_json::to_string(&summary).internal()?);
    Ok(Done::clean())
}

fn load_config(path: &Path) -> CliResult<(PipelineConfig, SourceRegistry)> {
    let cfg = PipelineConfig::load(path).data()?;
    let reg = SourceRegistry::from_config(&cfg).data()?;
    Ok((cfg, reg))
}

fn open_cache(path: &Path) -> CliResult<(PipelineConfig, EhrCache)> {
    let (cfg, reg) = load_config(path)?;
    let cache = EhrCache::open(cfg.cache_path(), &reg.asset_hash).data()?;
    Ok((cfg, cache))
}

fn build_cmd(
    config: &Path,
    all: bool,
    patients: Vec<String>,
    workers: &Workers,
    diagnostics: Option<&Path>,
) -> CliResult<Done> {
    let (cfg, reg) = load_config(config)?;
    let ids = if all { list_patients(&reg).data()? } else { patients };
    let cache = EhrCache::open(cfg.cache_path(), &reg.asset_hash).data()?;
    let execution = if workers.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let started = Instant::now();
    let built = par::with_workers(workers.jobs, || build_population(&reg, &ids, execution));
    log::info!("built {} patients in {:.3?}", ids.len(), started.elapsed());

    let mut sink: Box<dyn Write> = match diagnostics {
        Some(path) => Box::new(io::BufWriter::new(
            fs::File::create(path)
                .with_context(|| format!("creating {}", path.display()))
                .internal()?,
        )),
        None => Box::new(io::stderr()),
    };
    let mut entries = Vec::new();
    let mut reported = 0;
    let mut failed = Vec::new();
    for (id, result) in ids.iter().zip(built) {
        match result {
            Ok(ehr) => {
                reported += print_jsonl(
                    &mut sink,
                    ehr.diagnostics
                        .iter()
                        .map(|d| serde_json::to_value(d).expect("plain struct")),
                )?;
                let entry = cache.put(&ehr.patient_id, &ehr.patient_iri, &ehr.graph).internal()?;
                entries.push((ehr.patient_iri, entry));
            }
            Err(e) => {
                reported += print_jsonl(
                    &mut sink,
                    [serde_json::json!({"patient": id, "context": "build", "message": e.to_string()})],
                )?;
                failed.push(id.clone());
            }
        }
    }
    sink.flush().internal()?;
    let written = entries.len();
    cache.record(entries).internal()?;
    eprintln!(
        "cached {written} EHR graph(s) in {}{}",
        cache.dir().display(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; {} failed", failed.len())
        }
    );
    Ok(Done { data_errors: reported })
}

fn views_cmd(config: &Path, aggregate: Option<&Path>, out_dir: Option<&Path>) -> CliResult<Done> {
    let (cfg, agg) = match aggregate {
        Some(path) => {
            let cfg = PipelineConfig::load(config).data()?;
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .data()?;
            (cfg, parse_n3(&text, None).data()?.graph)
        }
        None => {
            let (cfg, cache) = open_cache(config)?;
            let graphs: Vec<Graph> = cache
                .entries()
                .and_then(|es| es.iter().map(|(_, e)| cache.load(e)).collect())
                .data()?;
            if graphs.is_empty() {
                return Err(Failure::Data(anyhow!(
                    "cache {} is empty; run `twostep build` first",
                    cache.dir().display()
                )));
            }
            (cfg, aggregate_population(&graphs))
        }
    };
    let mut errors = 0;
    let mut stdout = io::stdout().lock();
    for result in compute_views(&agg, &cfg.views) {
        match result {
            Ok(table) => match out_dir {
                Some(dir) => {
                    fs::create_dir_all(dir).internal()?;
                    let path = dir.join(format!("{}.csv", table.name));
                    fs::write(&path, table.to_csv())
                        .with_context(|| format!("writing {}", path.display()))
                        .internal()?;
                }
                None => {
                    writeln!(stdout, "# {}", table.name).internal()?;
                    stdout.write_all(table.to_csv().as_bytes()).internal()?;
                }
            },
            Err(e) => {
                eprintln!("{e}");
                errors += 1;
            }
        }
    }
    Ok(Done { data_errors: errors })
}
