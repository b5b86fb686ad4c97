//! End-to-end orchestration: per-patient EHR builds across sources, the
//! graph cache, population aggregation, views, synthetic data and the
//! scaling benchmark.

mod bench;
mod build;
mod cache;
mod config;
mod synth;
mod views;

pub use bench::{linear_fit_r2, run_benchmark, BenchError, BenchReport, BenchRow, Phase};
pub use build::{
    aggregate_population, build_patient_ehr, build_population, list_patients, BuildError, EhrDiagnostic, EhrGraph,
    PhaseTimings, PATIENT_PARAMETER,
};
pub use cache::{CacheEntry, CacheError, EhrCache};
pub use config::{
    ConfigError, LimitsConfig, NamedText, PipelineConfig, QueryTemplate, Source, SourceConfig, SourceRegistry,
    TemplateError,
};
pub use synth::{
    generate_synthetic, write_synthetic, Missingness, SynthConfig, SynthError, SynthSummary, SyntheticFixtures,
    CIS_DDL, CTMS_DDL, FIRST_PERSNR,
};
pub use views::{compute_views, Grouping, Metric, ViewError, ViewRow, ViewSpec, ViewTable};
