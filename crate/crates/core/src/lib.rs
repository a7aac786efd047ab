//! Batch evaluation of 1-to-many face identification accuracy from precomputed
//! embeddings.
//!
//! The pipeline is: [`ingest`] a manifest and an embedding file, check them with
//! [`data_model::validate_dataset`], [`partition`] the images into probes and an
//! enrolled gallery, compute rank-one mated / non-mated scores with
//! [`matching`], and summarize each demographic group with [`metrics`]. The
//! [`degrade`] module produces blurred and reduced-resolution probe ladders,
//! and [`synth`] builds seeded synthetic datasets for desk-scale runs.

pub mod cli;
pub mod data_model;
pub mod degrade;
pub mod error;
pub mod ingest;
pub mod matching;
pub mod metrics;
pub mod partition;
pub mod synth;

pub use data_model::{
    validate_dataset, DemographicGroup, DistributionStats, EmbeddingStore, ImageRecord, ScoreSample, ValidationReport,
};
pub use error::{Error, Result};
pub use matching::{cosine, gallery_size_sweep, one_to_one_distributions, rank_one_scores, RankOneResult};
pub use metrics::{build_report, MetricParams, MetricReport};
pub use partition::{build_balanced_split, build_split, BalanceSpec, ProbeGallerySplit};

/// Schema tag written into every report.
pub const REPORT_SCHEMA: &str = "identik-report/1";
