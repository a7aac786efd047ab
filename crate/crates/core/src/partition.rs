//! Probe / gallery construction.
//!
//! Each subject's most recent image is its probe and the remaining images are
//! enrolled in the gallery. Capture-date ties are broken by image id: the
//! lexicographically greatest id becomes the probe, and gallery lists are
//! ordered by date descending, then id ascending.
//!
//! Balanced sampling draws identities with a ChaCha8 generator seeded through
//! `SeedableRng::seed_from_u64`, visiting groups in sorted order and sampling
//! indices into each group's sorted list of eligible subjects.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data_model::{index_by_image, DemographicGroup, DistributionStats, ImageRecord};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeGallerySplit {
    /// subject id -> probe image id
    pub probes: BTreeMap<String, String>,
    /// subject id -> enrolled image ids, most recent first
    pub gallery: BTreeMap<String, Vec<String>>,
    /// subjects with a probe but no enrolled images
    #[serde(rename = "singletons")]
    pub singleton_subjects: BTreeSet<String>,
}

impl ProbeGallerySplit {
    pub fn probe_count(&self) -> usize {
        self.probes.len()
    }

    pub fn gallery_image_count(&self) -> usize {
        self.gallery.values().map(Vec::len).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceSpec {
    pub identities_per_group: usize,
    pub enrolled_per_identity: usize,
    pub rng_seed: u64,
}

/// Images of each subject, most recent first (date desc, id desc).
fn images_by_subject(records: &[ImageRecord]) -> BTreeMap<&str, Vec<&ImageRecord>> {
    let mut by_subject: BTreeMap<&str, Vec<&ImageRecord>> = BTreeMap::new();
    for r in records {
        by_subject.entry(r.subject_id.as_str()).or_default().push(r);
    }
    for images in by_subject.values_mut() {
        images.sort_by(|a, b| {
            b.capture_date
                .cmp(&a.capture_date)
                .then_with(|| b.image_id.cmp(&a.image_id))
        });
    }
    by_subject
}

/// Splits a subject's recency-sorted images into the probe and the ordered
/// enrolled list (date desc, id asc).
fn probe_and_enrolled<'a>(images: &[&'a ImageRecord]) -> (&'a ImageRecord, Vec<&'a ImageRecord>) {
    let probe = images[0];
    let mut enrolled = images[1..].to_vec();
    enrolled.sort_by(|a, b| {
        b.capture_date
            .cmp(&a.capture_date)
            .then_with(|| a.image_id.cmp(&b.image_id))
    });
    (probe, enrolled)
}

fn ids(images: &[&ImageRecord]) -> Vec<String> {
    images.iter().map(|r| r.image_id.clone()).collect()
}

pub fn build_split(records: &[ImageRecord]) -> ProbeGallerySplit {
    let mut split = ProbeGallerySplit::default();
    for (subject, images) in images_by_subject(records) {
        let (probe, enrolled) = probe_and_enrolled(&images);
        if enrolled.is_empty() {
            split.singleton_subjects.insert(subject.to_string());
        }
        split.probes.insert(subject.to_string(), probe.image_id.clone());
        split.gallery.insert(subject.to_string(), ids(&enrolled));
    }
    split
}

/// Equal numbers of identities and enrolled images per group.
///
/// Only subjects with at least `1 + enrolled_per_identity` images are eligible;
/// ineligible subjects are dropped before sampling.
pub fn build_balanced_split(records: &[ImageRecord], spec: &BalanceSpec) -> Result<ProbeGallerySplit> {
    if spec.identities_per_group == 0 || spec.enrolled_per_identity == 0 {
        return Err(Error::InvalidArgument(
            "identities_per_group and enrolled_per_identity must be positive".into(),
        ));
    }
    let by_subject = images_by_subject(records);
    let mut eligible: BTreeMap<&DemographicGroup, Vec<&str>> = BTreeMap::new();
    for (subject, images) in &by_subject {
        let group = &images[0].group;
        let list = eligible.entry(group).or_default();
        if images.len() > spec.enrolled_per_identity {
            list.push(subject);
        }
    }

    for (group, subjects) in &eligible {
        if subjects.len() < spec.identities_per_group {
            return Err(Error::InsufficientIdentities {
                group: group.key(),
                have: subjects.len(),
                need: spec.identities_per_group,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut split = ProbeGallerySplit::default();
    for subjects in eligible.values() {
        let picked = rand::seq::index::sample(&mut rng, subjects.len(), spec.identities_per_group);
        for i in picked {
            let subject = subjects[i];
            let (probe, enrolled) = probe_and_enrolled(&by_subject[subject]);
            split.probes.insert(subject.to_string(), probe.image_id.clone());
            split
                .gallery
                .insert(subject.to_string(), ids(&enrolled[..spec.enrolled_per_identity]));
        }
    }
    Ok(split)
}

/// Days between each subject's probe and its most recent enrolled image, grouped
/// by demographic. Singleton subjects contribute nothing.
pub fn time_between_mated(
    split: &ProbeGallerySplit,
    records: &[ImageRecord],
) -> Result<BTreeMap<DemographicGroup, DistributionStats>> {
    let index = index_by_image(records);
    let lookup = |id: &str| index.get(id).copied().ok_or_else(|| Error::UnknownImage(id.into()));
    let mut gaps: BTreeMap<DemographicGroup, Vec<f64>> = BTreeMap::new();
    for (subject, probe_id) in &split.probes {
        let Some(latest) = split.gallery.get(subject).and_then(|g| g.first()) else {
            continue;
        };
        let probe = lookup(probe_id)?;
        let enrolled = lookup(latest)?;
        let days = (probe.capture_date - enrolled.capture_date).num_days();
        gaps.entry(probe.group.clone()).or_default().push(days as f64);
    }
    Ok(gaps
        .into_iter()
        .filter_map(|(g, v)| DistributionStats::from_samples(&v).map(|s| (g, s)))
        .collect())
}
