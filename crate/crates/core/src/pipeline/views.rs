//! Population views: host-side aggregates over an aggregated EHR graph.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::kb;
use crate::rdf::vocab::{rdf, rdfs};
use crate::rdf::{Graph, Term};
use crate::rules::values::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Count,
    Mean,
    Min,
    Max,
    /// Bins are consecutive boundaries; intervals are half-open except the
    /// last, which includes its upper bound.
    Histogram {
        bins: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Grouping {
    pub path: Vec<String>,
    /// Ascending numeric boundaries; without them the key's own value is the
    /// group label.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub brackets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ViewSpec {
    pub name: String,
    /// Class whose instances start every walk.
    #[serde(default = "default_subject")]
    pub subject_class: String,
    /// Path from a subject to the measured items; empty means the subject.
    #[serde(default)]
    pub items: Vec<String>,
    /// Path from an item to its numeric value.
    pub value: Vec<String>,
    /// Path from an item to its group key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<Grouping>,
    pub metric: Metric,
}

fn default_subject() -> String {
    "human:Person".into()
}

impl ViewSpec {
    /// BMI distribution views by age at measurement.
    pub fn shipped() -> Vec<ViewSpec> {
        let by_age = Some(Grouping {
            path: vec!["human:hasAgeInYears".into()],
            brackets: vec![18.0, 40.0, 65.0],
        });
        let bmi = |name: &str, metric| ViewSpec {
            name: name.into(),
            subject_class: default_subject(),
            items: vec!["human:hasBodyMassIndex".into()],
            value: vec!["quant:hasValue".into()],
            group: by_age.clone(),
            metric,
        };
        vec![
            bmi("bmi_mean_by_age", Metric::Mean),
            bmi("bmi_count_by_age", Metric::Count),
            bmi("bmi_min_by_age", Metric::Min),
            bmi("bmi_max_by_age", Metric::Max),
            bmi(
                "bmi_histogram_by_age",
                Metric::Histogram {
                    bins: vec![0.0, 18.5, 25.0, 30.0, 100.0],
                },
            ),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ViewError {
    #[error("view {view}: `{term}` does not resolve within the domain vocabulary")]
    UnresolvablePath { view: String, term: String },
    #[error("view {view}: {message}")]
    Invalid { view: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewRow {
    pub group: String,
    /// Histogram bin label; `None` for scalar metrics.
    pub bin: Option<String>,
    /// Metric value; the bin's count for histograms.
    pub value: f64,
    /// Number of values in the group.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewTable {
    pub name: String,
    pub metric: Metric,
    pub rows: Vec<ViewRow>,
}

impl ViewTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let histogram = matches!(self.metric, Metric::Histogram { .. });
        let metric = match self.metric {
            Metric::Count => "count",
            Metric::Mean => "mean",
            Metric::Min => "min",
            Metric::Max => "max",
            Metric::Histogram { .. } => "count",
        };
        let result = (|| -> csv::Result<()> {
            if histogram {
                w.write_record(["group", "bin", metric, "n"])?;
            } else {
                w.write_record(["group", metric, "n"])?;
            }
            for r in &self.rows {
                let value = r.value.to_string();
                let n = r.n.to_string();
                match &r.bin {
                    Some(bin) => w.write_record([r.group.as_str(), bin, &value, &n])?,
                    None => w.write_record([r.group.as_str(), &value, &n])?,
                }
            }
            Ok(())
        })();
        result.expect("writing to memory");
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
    }
}

fn vocabulary() -> &'static HashSet<String> {
    static TERMS: OnceLock<HashSet<String>> = OnceLock::new();
    TERMS.get_or_init(|| {
        let doc = crate::rdf::parse_n3(kb::VOCAB, None).expect("shipped vocabulary parses");
        doc.graph
            .iter()
            .filter_map(|t| t.subject().as_iri().map(String::from))
            .chain([rdf::TYPE.to_string(), rdfs::LABEL.to_string()])
            .collect()
    })
}

/// Expands `prefix:local` or `<iri>` and checks it against the vocabulary.
fn resolve(view: &str, term: &str) -> Result<String, ViewError> {
    let unresolvable = || ViewError::UnresolvablePath {
        view: view.to_string(),
        term: term.to_string(),
    };
    let iri = if let Some(inner) = term.strip_prefix('<').and_then(|t| t.strip_suffix('>')) {
        inner.to_string()
    } else {
        let (prefix, local) = term.split_once(':').ok_or_else(unresolvable)?;
        let ns = kb::vocab::prefixes()
            .into_iter()
            .chain([
                ("rdf", rdf::NS),
                ("rdfs", rdfs::NS),
                ("time", crate::rdf::vocab::time::NS),
            ])
            .find(|(p, _)| *p == prefix)
            .map(|(_, ns)| ns)
            .ok_or_else(unresolvable)?;
        format!("{ns}{local}")
    };
    if vocabulary().contains(&iri) {
        Ok(iri)
    } else {
        Err(unresolvable())
    }
}

struct ResolvedSpec {
    class: String,
    items: Vec<String>,
    value: Vec<String>,
    group: Option<(Vec<String>, Vec<f64>)>,
}

fn resolve_spec(s: &ViewSpec) -> Result<ResolvedSpec, ViewError> {
    let path = |p: &[String]| p.iter().map(|t| resolve(&s.name, t)).collect::<Result<Vec<_>, _>>();
    let invalid = |message: &str| ViewError::Invalid {
        view: s.name.clone(),
        message: message.to_string(),
    };
    if s.value.is_empty() {
        return Err(invalid("value path is empty"));
    }
    let ascending = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]) && v.iter().all(|x| x.is_finite());
    if let Metric::Histogram { bins } = &s.metric {
        if bins.len() < 2 || !ascending(bins) {
            return Err(invalid("histogram needs at least two ascending finite bin boundaries"));
        }
    }
    let group = match &s.group {
        Some(g) => {
            if !ascending(&g.brackets) {
                return Err(invalid("brackets must be ascending and finite"));
            }
            if g.path.is_empty() {
                return Err(invalid("group path is empty"));
            }
            Some((path(&g.path)?, g.brackets.clone()))
        }
        None => None,
    };
    Ok(ResolvedSpec {
        class: resolve(&s.name, &s.subject_class)?,
        items: path(&s.items)?,
        value: path(&s.value)?,
        group,
    })
}

fn walk<'g>(g: &'g Graph, start: BTreeSet<&'g Term>, path: &'g [String]) -> BTreeSet<&'g Term> {
    let mut current = start;
    for p in path {
        current = current.into_iter().flat_map(|s| g.objects(s, p)).collect();
    }
    current
}

fn numeric(t: &Term) -> Option<f64> {
    Value::from_term(t).filter(|v| v.is_numeric()).and_then(Value::as_f64)
}

fn fmt_bound(x: f64) -> String {
    x.to_string()
}

/// Sort key plus label of the bracket holding `key`.
fn bracket(brackets: &[f64], key: f64) -> (usize, String) {
    let integral = brackets.iter().all(|b| b.fract() == 0.0);
    let i = brackets.partition_point(|b| *b <= key);
    let label = if i == 0 {
        format!("<{}", fmt_bound(brackets[0]))
    } else if i == brackets.len() {
        format!("{}+", fmt_bound(brackets[i - 1]))
    } else if integral {
        format!("{}-{}", fmt_bound(brackets[i - 1]), fmt_bound(brackets[i] - 1.0))
    } else {
        format!("[{},{})", fmt_bound(brackets[i - 1]), fmt_bound(brackets[i]))
    };
    (i, label)
}

fn label(t: &Term) -> String {
    match t {
        Term::Literal(l) => l.lexical().to_string(),
        Term::Iri(i) => i.to_string(),
        other => other.to_string(),
    }
}

fn compute_one(g: &Graph, s: &ViewSpec) -> Result<ViewTable, ViewError> {
    let r = resolve_spec(s)?;
    let class = Term::iri(r.class.as_str());
    let subjects: BTreeSet<&Term> = g
        .iter()
        .filter(|t| t.predicate_iri() == rdf::TYPE && *t.object() == class)
        .map(|t| t.subject())
        .collect();
    let items = walk(g, subjects, &r.items);

    // (sort key, label) -> values
    let mut groups: BTreeMap<(usize, String), Vec<f64>> = BTreeMap::new();
    for item in items {
        let values: Vec<f64> = walk(g, BTreeSet::from([item]), &r.value)
            .into_iter()
            .filter_map(numeric)
            .collect();
        if values.is_empty() {
            continue;
        }
        let keys: BTreeSet<(usize, String)> = match &r.group {
            None => BTreeSet::from([(0, "all".to_string())]),
            Some((path, brackets)) => walk(g, BTreeSet::from([item]), path)
                .into_iter()
                .filter_map(|k| {
                    if brackets.is_empty() {
                        Some((0, label(k)))
                    } else {
                        numeric(k).map(|x| bracket(brackets, x))
                    }
                })
                .collect(),
        };
        for k in keys {
            groups.entry(k).or_default().extend(&values);
        }
    }

    let mut rows = Vec::new();
    for ((_, group), values) in groups {
        let n = values.len();
        let scalar = |value| ViewRow {
            group: group.clone(),
            bin: None,
            value,
            n,
        };
        match &s.metric {
            Metric::Count => rows.push(scalar(n as f64)),
            Metric::Mean => rows.push(scalar(values.iter().sum::<f64>() / n as f64)),
            Metric::Min => rows.push(scalar(values.iter().copied().fold(f64::INFINITY, f64::min))),
            Metric::Max => rows.push(scalar(values.iter().copied().fold(f64::NEG_INFINITY, f64::max))),
            Metric::Histogram { bins } => {
                let last = bins.len() - 2;
                for (i, w) in bins.windows(2).enumerate() {
                    let inside = |v: &&f64| **v >= w[0] && (**v < w[1] || (i == last && **v == w[1]));
                    let count = values.iter().filter(inside).count();
                    let close = if i == last { ']' } else { ')' };
                    rows.push(ViewRow {
                        group: group.clone(),
                        bin: Some(format!("[{},{}{close}", fmt_bound(w[0]), fmt_bound(w[1]))),
                        value: count as f64,
                        n,
                    });
                }
            }
        }
    }
    Ok(ViewTable {
        name: s.name.clone(),
        metric: s.metric.clone(),
        rows,
    })
}

/// One table per spec; a bad spec yields an error without affecting others.
pub fn compute_views(agg: &Graph, specs: &[ViewSpec]) -> Vec<Result<ViewTable, ViewError>> {
    specs.iter().map(|s| compute_one(agg, s)).collect()
}
