//! Pipeline configuration file and the source registry loaded from it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::views::ViewSpec;
use crate::ddo::{generate_ddo, parse_manifest, ManifestError, SchemaManifest};
use crate::kb;
use crate::query::{compile_to_sql, parse_query};
use crate::rdf::{Graph, N3Error, N3Parser};
use crate::rules::{Limits, Reasoner, ReasonerOptions, Rule, RuleError};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: invalid configuration: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("`{0}` does not name a shipped asset")]
    UnknownAsset(String),
    #[error("`{0}` matched no files")]
    EmptyRef(String),
    #[error("source {source_name}: manifest: {error}")]
    Manifest { source_name: String, error: ManifestError },
    #[error("source {source_name}, template {template}: {message}")]
    Template {
        source_name: String,
        template: String,
        message: String,
    },
    #[error("{asset}: {error}")]
    Rules { asset: String, error: N3Error },
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("at least one source is required")]
    NoSources,
    #[error("source name `{0}` is used twice")]
    DuplicateSource(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SourceConfig {
    pub name: String,
    pub db: PathBuf,
    pub manifest: String,
    /// Files or directories of `.rq` templates; `kb:` names shipped ones.
    pub templates: Vec<String>,
    /// Conversion rule files or directories.
    #[serde(default)]
    pub rules: Vec<String>,
    /// SQL listing the patient ids this source knows about.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patients: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LimitsConfig {
    pub max_iterations: usize,
    pub max_triples: usize,
}

impl Default for LimitsConfig {
    fn default() -> Self {
        let l = Limits::default();
        Self {
            max_iterations: l.max_iterations,
            max_triples: l.max_triples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PipelineConfig {
    /// IRI of a patient, with `$patientId` as placeholder.
    pub patient_iri: String,
    pub sources: Vec<SourceConfig>,
    /// Normalization and analysis rules run on the integrated graph.
    #[serde(default)]
    pub analysis_rules: Vec<String>,
    #[serde(default)]
    pub views: Vec<ViewSpec>,
    #[serde(default)]
    pub limits: LimitsConfig,
    /// Builtin errors abort a build instead of becoming diagnostics.
    #[serde(default)]
    pub strict: bool,
    pub cache_dir: PathBuf,
    /// Directory relative paths resolve against; the config file's own.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = read(path)?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text).map_err(|source| ConfigError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// The shipped two-source setup (CIS and CTMS databases next to the
    /// config file) with the shipped rules and views.
    pub fn shipped(base_dir: impl Into<PathBuf>) -> Self {
        let kb = |s: &str| format!("{}{s}", kb::SCHEME);
        Self {
            patient_iri: "http://example.org/cis/Natperson/$patientId#this".into(),
            sources: vec![
                SourceConfig {
                    name: "cis".into(),
                    db: "cis.db".into(),
                    manifest: kb("manifests/cis.json"),
                    templates: vec![kb("templates/cis")],
                    rules: vec![kb("convert_demographics.n3"), kb("convert_clinical.n3")],
                    patients: Some("SELECT persnr FROM Natperson ORDER BY persnr".into()),
                },
                SourceConfig {
                    name: "ctms".into(),
                    db: "ctms.db".into(),
                    manifest: kb("manifests/ctms.json"),
                    templates: vec![kb("templates/ctms")],
                    rules: vec![kb("convert_ctms.n3")],
                    patients: None,
                },
            ],
            analysis_rules: vec![kb("normalize_units.n3"), kb("derive_age.n3"), kb("analyze_bmi.n3")],
            views: ViewSpec::shipped(),
            limits: LimitsConfig::default(),
            strict: false,
            cache_dir: "cache".into(),
            base_dir: base_dir.into(),
        }
    }

    pub fn resolve(&self, p: impl AsRef<Path>) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn cache_path(&self) -> PathBuf {
        self.resolve(&self.cache_dir)
    }

    pub fn reasoner_options(&self) -> ReasonerOptions {
        ReasonerOptions {
            limits: Limits {
                max_iterations: self.limits.max_iterations,
                max_triples: self.limits.max_triples,
            },
            strict: self.strict,
            ..ReasonerOptions::default()
        }
    }

    /// Text of one file reference (`kb:` or a path).
    pub fn read_ref(&self, r: &str) -> Result<String, ConfigError> {
        match r.strip_prefix(kb::SCHEME) {
            Some(name) => kb::file(name)
                .map(String::from)
                .ok_or_else(|| ConfigError::UnknownAsset(r.to_string())),
            None => read(&self.resolve(r)),
        }
    }

    /// All files behind a list of references; directories expand to their
    /// files with extension `ext`, sorted by name.
    pub fn read_refs(&self, refs: &[String], ext: &str) -> Result<Vec<NamedText>, ConfigError> {
        let mut out = Vec::new();
        for r in refs {
            if let Some(name) = r.strip_prefix(kb::SCHEME) {
                if let Some(text) = kb::file(name) {
                    out.push(NamedText::new(name, text));
                } else {
                    let found = kb::files_in(name);
                    if found.is_empty() {
                        return Err(ConfigError::UnknownAsset(r.clone()));
                    }
                    out.extend(found.into_iter().map(|(n, t)| NamedText::new(n, t)));
                }
                continue;
            }
            let path = self.resolve(r);
            if path.is_dir() {
                let entries = std::fs::read_dir(&path).map_err(|source| ConfigError::Io {
                    path: path.clone(),
                    source,
                })?;
                let mut files: Vec<PathBuf> = entries
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == ext))
                    .collect();
                files.sort();
                if files.is_empty() {
                    return Err(ConfigError::EmptyRef(r.clone()));
                }
                for f in files {
                    out.push(NamedText::new(f.display().to_string(), read(&f)?));
                }
            } else {
                out.push(NamedText::new(r.clone(), read(&path)?));
            }
        }
        Ok(out)
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedText {
    pub name: String,
    pub text: String,
}

impl NamedText {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("missing value for ${0}")]
    MissingParameter(String),
    #[error("value `{value}` for ${name} may only contain letters, digits, `-`, `_` and `.`")]
    InvalidValue { name: String, value: String },
}

/// A DDO query with `$name` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryTemplate {
    pub name: String,
    pub text: String,
    pub parameters: BTreeSet<String>,
}

impl QueryTemplate {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let mut parameters = BTreeSet::new();
        for (i, _) in text.match_indices('$') {
            let name: String = text[i + 1..]
                .chars()
                .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
                .collect();
            if !name.is_empty() {
                parameters.insert(name);
            }
        }
        Self {
            name: name.into(),
            text,
            parameters,
        }
    }

    /// Substitutes every declared parameter. Values are restricted to a
    /// safe character set so they cannot change the query's structure.
    pub fn instantiate(&self, values: &BTreeMap<&str, &str>) -> Result<String, TemplateError> {
        let mut text = self.text.clone();
        // Longest names first so `$id` never clobbers `$idx`.
        let mut names: Vec<&String> = self.parameters.iter().collect();
        names.sort_by_key(|n| std::cmp::Reverse(n.len()));
        for name in names {
            let value = *values
                .get(name.as_str())
                .ok_or_else(|| TemplateError::MissingParameter(name.clone()))?;
            check_value(name, value)?;
            text = text.replace(&format!("${name}"), value);
        }
        Ok(text)
    }
}

pub(crate) fn check_value(name: &str, value: &str) -> Result<(), TemplateError> {
    let ok = !value.is_empty()
        && value
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(TemplateError::InvalidValue {
            name: name.to_string(),
            value: value.to_string(),
        })
    }
}

pub struct Source {
    pub name: String,
    pub db_path: PathBuf,
    pub manifest: SchemaManifest,
    pub ddo: Graph,
    pub templates: Vec<QueryTemplate>,
    pub conversion: Reasoner,
    pub patients_sql: Option<String>,
}

impl Source {
    /// Checks that every template compiles against this source's DDO.
    pub fn new(
        name: impl Into<String>,
        db_path: impl Into<PathBuf>,
        manifest: SchemaManifest,
        templates: Vec<QueryTemplate>,
        rules: Vec<Rule>,
        options: ReasonerOptions,
    ) -> Result<Self, ConfigError> {
        let name = name.into();
        let ddo = generate_ddo(&manifest);
        for t in &templates {
            let dummy: BTreeMap<&str, &str> = t.parameters.iter().map(|p| (p.as_str(), "0")).collect();
            let text = t.instantiate(&dummy).expect("dummy values are valid");
            let result = parse_query(&text)
                .map_err(|e| e.to_string())
                .and_then(|q| compile_to_sql(&q, &ddo, &manifest).map_err(|e| e.to_string()));
            if let Err(message) = result {
                return Err(ConfigError::Template {
                    source_name: name,
                    template: t.name.clone(),
                    message,
                });
            }
        }
        Ok(Self {
            name,
            db_path: db_path.into(),
            manifest,
            ddo,
            templates,
            conversion: Reasoner::new(rules, options)?,
            patients_sql: None,
        })
    }
}

pub struct SourceRegistry {
    pub sources: Vec<Source>,
    pub analysis: Reasoner,
    pub patient_iri: String,
    /// Content hash over every asset that shapes an EHR graph.
    pub asset_hash: String,
}

impl SourceRegistry {
    pub fn new(
        sources: Vec<Source>,
        analysis: Vec<Rule>,
        patient_iri: impl Into<String>,
        options: ReasonerOptions,
    ) -> Result<Self, ConfigError> {
        if sources.is_empty() {
            return Err(ConfigError::NoSources);
        }
        let mut names = BTreeSet::new();
        for s in &sources {
            if !names.insert(s.name.as_str()) {
                return Err(ConfigError::DuplicateSource(s.name.clone()));
            }
        }
        let patient_iri = patient_iri.into();
        let mut h = Sha256::new();
        h.update(patient_iri.as_bytes());
        for s in &sources {
            h.update(s.name.as_bytes());
            h.update(crate::rdf::serialize_n3(&s.ddo).as_bytes());
            for t in &s.templates {
                h.update(t.name.as_bytes());
                h.update(t.text.as_bytes());
            }
            for r in s.conversion.rules() {
                h.update(r.to_string().as_bytes());
            }
        }
        for r in &analysis {
            h.update(r.to_string().as_bytes());
        }
        let mut asset_hash = String::new();
        for b in h.finalize().iter().take(16) {
            write!(asset_hash, "{b:02x}").expect("write to string");
        }
        Ok(Self {
            sources,
            analysis: Reasoner::new(analysis, options)?,
            patient_iri,
            asset_hash,
        })
    }

    pub fn from_config(cfg: &PipelineConfig) -> Result<Self, ConfigError> {
        let options = cfg.reasoner_options();
        let parse_rules = |refs: &[String]| -> Result<Vec<Rule>, ConfigError> {
            let mut rules = Vec::new();
            for f in cfg.read_refs(refs, "n3")? {
                let doc =
                    N3Parser::new()
                        .source(f.name.clone())
                        .parse(&f.text)
                        .map_err(|error| ConfigError::Rules {
                            asset: f.name.clone(),
                            error,
                        })?;
                rules.extend(doc.rules);
            }
            Ok(rules)
        };
        let mut sources = Vec::new();
        for sc in &cfg.sources {
            let manifest = parse_manifest(&cfg.read_ref(&sc.manifest)?).map_err(|error| ConfigError::Manifest {
                source_name: sc.name.clone(),
                error,
            })?;
            let templates = cfg
                .read_refs(&sc.templates, "rq")?
                .into_iter()
                .map(|f| QueryTemplate::new(f.name, f.text))
                .collect();
            let mut source = Source::new(
                &sc.name,
                cfg.resolve(&sc.db),
                manifest,
                templates,
                parse_rules(&sc.rules)?,
                options,
            )?;
            source.patients_sql = sc.patients.clone();
            sources.push(source);
        }
        Self::new(sources, parse_rules(&cfg.analysis_rules)?, &cfg.patient_iri, options)
    }

    pub fn patient_iri(&self, patient_id: &str) -> String {
        self.patient_iri.replace("$patientId", patient_id)
    }
}
