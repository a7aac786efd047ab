//! Seeded synthetic datasets with tunable score geometry.
//!
//! Generation model, all in `f64` before the final cast to `f32`:
//!
//! 1. a shared unit direction `c` is drawn first;
//! 2. each subject's identity direction is `normalize(κb·c + g/√d)`;
//! 3. each image is `normalize(u + g/(κw·√d))`;
//!
//! where `g` is a fresh standard normal vector each time, `κb` the between-
//! and `κw` the within-subject concentration. Two images of one subject then
//! have expected cosine near `κw²/(1+κw²)`; two subjects near `κb²/(1+κb²)`.
//!
//! Subjects are numbered globally (`S000000`, ...) across groups in spec order.
//! Image `k` of a subject is captured `k` days after 2000-01-01, so the last
//! image is always the probe.

use std::collections::BTreeSet;

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data_model::{DemographicGroup, EmbeddingStore, ImageRecord};
use crate::error::{Error, Result};
use crate::matching::RankOneResult;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthGroup {
    pub race: String,
    pub gender: String,
    pub n_subjects: usize,
    pub images_per_subject: usize,
    /// Overrides the spec-wide within-subject concentration for this group.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub within_subject_concentration: Option<f64>,
}

impl SynthGroup {
    pub fn new(race: &str, gender: &str, n_subjects: usize, images_per_subject: usize) -> Self {
        Self {
            race: race.into(),
            gender: gender.into(),
            n_subjects,
            images_per_subject,
            within_subject_concentration: None,
        }
    }

    pub fn group(&self) -> DemographicGroup {
        DemographicGroup::new(&self.race, &self.gender)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub groups: Vec<SynthGroup>,
    pub dimension: usize,
    pub within_subject_concentration: f64,
    #[serde(default)]
    pub between_subject_concentration: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.groups.is_empty() {
            return bad("at least one group is required".into());
        }
        if self.dimension == 0 {
            return bad("dimension must be positive".into());
        }
        let kb = self.between_subject_concentration;
        if !(kb >= 0.0 && kb.is_finite()) {
            return bad(format!("between_subject_concentration {kb} must be finite and >= 0"));
        }
        let mut seen = BTreeSet::new();
        for g in &self.groups {
            if g.race.is_empty() || g.gender.is_empty() || g.race.contains(',') || g.gender.contains(',') {
                return bad(format!(
                    "group labels `{}`/`{}` must be non-empty without commas",
                    g.race, g.gender
                ));
            }
            if !seen.insert(g.group()) {
                return bad(format!("group `{}` listed twice", g.group()));
            }
            if g.n_subjects == 0 || g.images_per_subject == 0 {
                return bad(format!(
                    "group `{}` needs at least one subject and one image",
                    g.group()
                ));
            }
            let kw = g
                .within_subject_concentration
                .unwrap_or(self.within_subject_concentration);
            if !(kw > 0.0 && kw.is_finite()) || kw <= kb {
                return bad(format!(
                    "within-subject concentration {kw} must be finite, positive and exceed the between-subject {kb}"
                ));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))
    }
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

pub fn synthetic_epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date")
}

pub fn generate(spec: &SynthSpec) -> Result<(Vec<ImageRecord>, EmbeddingStore)> {
    spec.validate()?;
    let d = spec.dimension;
    let scale = 1.0 / (d as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut center = gaussian(&mut rng, d);
    normalize(&mut center);

    let total: usize = spec.groups.iter().map(|g| g.n_subjects * g.images_per_subject).sum();
    let mut data: Vec<f32> = Vec::with_capacity(total * d);
    let mut records = Vec::with_capacity(total);
    let epoch = synthetic_epoch();
    let mut subject_no = 0usize;
    for g in &spec.groups {
        let group = g.group();
        let noise = scale
            / g.within_subject_concentration
                .unwrap_or(spec.within_subject_concentration);
        let width = (g.images_per_subject - 1).to_string().len().max(2);
        for _ in 0..g.n_subjects {
            let subject_id = format!("S{subject_no:06}");
            subject_no += 1;
            let mut identity = gaussian(&mut rng, d);
            for (u, c) in identity.iter_mut().zip(&center) {
                *u = *u * scale + spec.between_subject_concentration * c;
            }
            normalize(&mut identity);
            for k in 0..g.images_per_subject {
                let mut v = gaussian(&mut rng, d);
                for (x, u) in v.iter_mut().zip(&identity) {
                    *x = u + *x * noise;
                }
                normalize(&mut v);
                let embedding_index = records.len();
                data.extend(v.iter().map(|&x| x as f32));
                records.push(ImageRecord {
                    image_id: format!("{subject_id}_{k:0width$}"),
                    subject_id: subject_id.clone(),
                    group: group.clone(),
                    capture_date: epoch + Days::new(k as u64),
                    embedding_index,
                });
            }
        }
    }
    Ok((records, EmbeddingStore::new(d, data)?))
}

/// Lowers every mated rank-one score by `delta` (floored at -1), the
/// score-level effect of a degraded probe.
pub fn shift_mated(results: &[RankOneResult], delta: f64) -> Result<Vec<RankOneResult>> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("shift {delta} must be finite and >= 0")));
    }
    Ok(results
        .iter()
        .map(|r| RankOneResult {
            mated_score: r.mated_score.map(|m| (m - delta).max(-1.0)),
            ..r.clone()
        })
        .collect())
}
