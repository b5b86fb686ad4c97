//! Population-view scaling benchmark over cached EHR graphs.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::cache::{CacheError, EhrCache};
use super::views::{compute_views, ViewSpec};
use crate::rdf::{merge_graphs, parse_n3, serialize_n3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Phase {
    Aggregation,
    Calculation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchRow {
    pub population_size: usize,
    pub phase: Phase,
    pub retrieve_data_seconds: f64,
    pub reasoning_seconds: f64,
}

impl BenchRow {
    pub fn total(&self) -> f64 {
        self.retrieve_data_seconds + self.reasoning_seconds
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn series(&self, phase: Phase) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.phase == phase)
            .map(|r| (r.population_size as f64, r.total()))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("population sizes must be non-empty, positive and strictly increasing")]
    Sizes,
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

/// Coefficient of determination of the least-squares line through `points`.
pub fn linear_fit_r2(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let syy: f64 = points.iter().map(|(_, y)| (y - my).powi(2)).sum();
    if syy == 0.0 {
        return 1.0;
    }
    if sxx == 0.0 {
        return 0.0;
    }
    (sxy * sxy) / (sxx * syy)
}

/// Times each phase `runs` times per size and keeps the medians.
///
/// Aggregation: read and parse the first `n` cached graphs, then merge.
/// Calculation: read and parse the aggregated graph, then compute views.
pub fn run_benchmark(
    cache: &EhrCache,
    sizes: &[usize],
    specs: &[ViewSpec],
    runs: usize,
) -> Result<BenchReport, BenchError> {
    if sizes.is_empty() || sizes[0] == 0 || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BenchError::Sizes);
    }
    let runs = runs.max(1);
    let needed = *sizes.last().expect("non-empty");
    let entries = cache.entries()?;
    if entries.len() < needed {
        return Err(CacheError::Missing {
            dir: cache.dir().to_path_buf(),
            available: entries.len(),
            needed,
        }
        .into());
    }
    let scratch = cache.dir().join("bench");
    std::fs::create_dir_all(&scratch).map_err(|source| BenchError::Io {
        path: scratch.clone(),
        source,
    })?;

    let mut report = BenchReport::default();
    for &n in sizes {
        let mut agg_retrieve = Vec::new();
        let mut agg_reason = Vec::new();
        let mut calc_retrieve = Vec::new();
        let mut calc_reason = Vec::new();
        let agg_path = scratch.join(format!("aggregate_{n}.n3"));
        for _ in 0..runs {
            let t = Instant::now();
            let graphs = entries[..n]
                .iter()
                .map(|(_, e)| cache.load(e))
                .collect::<Result<Vec<_>, _>>()?;
            agg_retrieve.push(t.elapsed().as_secs_f64());
            let t = Instant::now();
            let agg = merge_graphs(&graphs);
            agg_reason.push(t.elapsed().as_secs_f64());
            write(&agg_path, &serialize_n3(&agg))?;

            let t = Instant::now();
            let agg = read_graph(&agg_path)?;
            calc_retrieve.push(t.elapsed().as_secs_f64());
            let t = Instant::now();
            let tables = compute_views(&agg, specs);
            calc_reason.push(t.elapsed().as_secs_f64());
            drop(tables);
        }
        report.rows.push(BenchRow {
            population_size: n,
            phase: Phase::Aggregation,
            retrieve_data_seconds: median(agg_retrieve),
            reasoning_seconds: median(agg_reason),
        });
        report.rows.push(BenchRow {
            population_size: n,
            phase: Phase::Calculation,
            retrieve_data_seconds: median(calc_retrieve),
            reasoning_seconds: median(calc_reason),
        });
    }
    Ok(report)
}

fn write(path: &Path, text: &str) -> Result<(), BenchError> {
    std::fs::write(path, text).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_graph(path: &Path) -> Result<crate::rdf::Graph, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_n3(&text, None).map(|d| d.graph).map_err(|source| {
        CacheError::Parse {
            path: path.to_path_buf(),
            source,
        }
        .into()
    })
}
