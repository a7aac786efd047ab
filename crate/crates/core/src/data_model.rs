//! Domain vocabulary shared by every stage of the pipeline.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on cosine scores before clamping to [-1, 1].
pub const SCORE_SLACK: f64 = 1e-6;

/// A demographic cohort, e.g. race "AA" and gender "F".
///
/// Labels are opaque tags. The derived ordering exists only so that reports
/// come out in a stable order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DemographicGroup {
    pub race: String,
    pub gender: String,
}

impl DemographicGroup {
    pub fn new(race: impl Into<String>, gender: impl Into<String>) -> Self {
        Self {
            race: race.into(),
            gender: gender.into(),
        }
    }

    /// Rendered key, `"<race> <gender>"`.
    pub fn key(&self) -> String {
        format!("{} {}", self.race, self.gender)
    }

    /// Filesystem-safe form of the key, used in output file names.
    pub fn slug(&self) -> String {
        self.key()
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
            .collect()
    }
}

impl fmt::Display for DemographicGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.race, self.gender)
    }
}

/// One image of one subject.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub subject_id: String,
    pub group: DemographicGroup,
    pub capture_date: NaiveDate,
    pub embedding_index: usize,
}

pub fn earliest_capture_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(1900, 1, 1).expect("valid date")
}

/// Dense row-major store of fixed-dimension `f32` embeddings.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingStore {
    dimension: usize,
    data: Vec<f32>,
}

impl EmbeddingStore {
    /// Builds a store from a flat row-major buffer.
    ///
    /// Rejects a zero dimension, a buffer that is not a whole number of rows,
    /// and any non-finite entry.
    pub fn new(dimension: usize, data: Vec<f32>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
        }
        if !data.len().is_multiple_of(dimension) {
            return Err(Error::DimensionMismatch {
                left: data.len(),
                right: dimension,
            });
        }
        if let Some(index) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteValue { index });
        }
        Ok(Self { dimension, data })
    }

    pub fn empty(dimension: usize) -> Result<Self> {
        Self::new(dimension, Vec::new())
    }

    pub fn from_rows<R: AsRef<[f32]>>(dimension: usize, rows: &[R]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dimension);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dimension {
                return Err(Error::DimensionMismatch {
                    left: row.len(),
                    right: dimension,
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(dimension, data)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn count(&self) -> usize {
        self.data.len() / self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn vector(&self, index: usize) -> Option<&[f32]> {
        let start = index.checked_mul(self.dimension)?;
        self.data.get(start..start + self.dimension)
    }

    pub fn as_flat(&self) -> &[f32] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dimension)
    }
}

/// A single pairwise similarity score between two images.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSample {
    pub probe_image_id: String,
    pub other_image_id: String,
    pub score: f64,
}

impl ScoreSample {
    /// Stores `score` clamped to [-1, 1]. Scores outside the cosine slack are
    /// rejected.
    pub fn new(probe_image_id: impl Into<String>, other_image_id: impl Into<String>, score: f64) -> Result<Self> {
        if !score.is_finite() || score.abs() > 1.0 + SCORE_SLACK {
            return Err(Error::InvalidArgument(format!("score {score} outside [-1, 1]")));
        }
        Ok(Self {
            probe_image_id: probe_image_id.into(),
            other_image_id: other_image_id.into(),
            score: score.clamp(-1.0, 1.0),
        })
    }
}

/// Summary statistics of a score (or day-gap) sample. `std_dev` is the
/// population standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionStats {
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
}

impl DistributionStats {
    /// Returns `None` for an empty sample.
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let n = samples.len();
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for &x in samples {
            sum += x;
            min = min.min(x);
            max = max.max(x);
        }
        // Rounding in the sum can push the mean a hair outside [min, max].
        let mean = (sum / n as f64).clamp(min, max);
        let var = samples.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        Some(Self {
            n,
            mean,
            std_dev: var.sqrt(),
            min,
            max,
        })
    }
}

/// Diagnostics produced by [`validate_dataset`]. Each list is sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub duplicates: Vec<String>,
    pub inconsistent_subjects: Vec<String>,
    /// `(image_id, embedding_index)` pairs that point past the end of the store.
    pub out_of_range: Vec<(String, usize)>,
    /// Store rows whose Euclidean norm is zero.
    pub zero_norm: Vec<usize>,
    /// Images captured before 1900-01-01.
    pub early_dates: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.duplicates.is_empty()
            && self.inconsistent_subjects.is_empty()
            && self.out_of_range.is_empty()
            && self.zero_norm.is_empty()
            && self.early_dates.is_empty()
    }

    /// One-line summary of what failed.
    pub fn summary(&self) -> String {
        format!(
            "duplicates={} inconsistent_subjects={} out_of_range={} zero_norm={} early_dates={}",
            self.duplicates.len(),
            self.inconsistent_subjects.len(),
            self.out_of_range.len(),
            self.zero_norm.len(),
            self.early_dates.len()
        )
    }
}

pub fn validate_dataset(records: &[ImageRecord], store: &EmbeddingStore) -> ValidationReport {
    let mut seen = BTreeSet::new();
    let mut duplicates = BTreeSet::new();
    let mut subject_groups: BTreeMap<&str, &DemographicGroup> = BTreeMap::new();
    let mut inconsistent = BTreeSet::new();
    let mut out_of_range = Vec::new();
    let mut early_dates = Vec::new();
    let earliest = earliest_capture_date();

    for record in records {
        if !seen.insert(record.image_id.as_str()) {
            duplicates.insert(record.image_id.clone());
        }
        match subject_groups.get(record.subject_id.as_str()) {
            Some(group) if **group != record.group => {
                inconsistent.insert(record.subject_id.clone());
            }
            Some(_) => {}
            None => {
                subject_groups.insert(&record.subject_id, &record.group);
            }
        }
        if record.embedding_index >= store.count() {
            out_of_range.push((record.image_id.clone(), record.embedding_index));
        }
        if record.capture_date < earliest {
            early_dates.push(record.image_id.clone());
        }
    }

    let zero_norm = store
        .rows()
        .enumerate()
        .filter(|(_, row)| row.iter().all(|&x| x == 0.0))
        .map(|(i, _)| i)
        .collect();

    out_of_range.sort();
    early_dates.sort();
    ValidationReport {
        duplicates: duplicates.into_iter().collect(),
        inconsistent_subjects: inconsistent.into_iter().collect(),
        out_of_range,
        zero_norm,
        early_dates,
    }
}

/// Looks up records by image id.
pub(crate) fn index_by_image(records: &[ImageRecord]) -> BTreeMap<&str, &ImageRecord> {
    records.iter().map(|r| (r.image_id.as_str(), r)).collect()
}
