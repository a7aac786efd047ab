//! Cosine scoring and the four score populations: 1-to-1 genuine / impostor
//! pairs and 1-to-many rank-one mated / non-mated scores.
//!
//! Vectors are L2-normalized once (in `f64`) before search, so each comparison
//! is a dot product. The dot product accumulates in `f64` over four fixed
//! lanes; the reduction order depends only on the dimension, which makes
//! `cosine(u, v)` and `cosine(v, u)` bit-identical and keeps results
//! independent of the worker count.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_model::{
    index_by_image, DemographicGroup, DistributionStats, EmbeddingStore, ImageRecord, ScoreSample,
};
use crate::error::{Error, Result};
use crate::partition::ProbeGallerySplit;

const PROBE_CHUNK: usize = 16;

/// Dot product with a fixed reduction order.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        lanes[0] += x[0] * y[0];
        lanes[1] += x[1] * y[1];
        lanes[2] += x[2] * y[2];
        lanes[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + tail
}

fn widen(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

/// `v / |v|` in `f64`.
pub fn unit_vector(v: &[f32]) -> Result<Vec<f64>> {
    let mut w = widen(v);
    let norm = dot(&w, &w).sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    w.iter_mut().for_each(|x| *x /= norm);
    Ok(w)
}

/// Cosine similarity clamped to [-1, 1].
pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let (u, v) = (widen(u), widen(v));
    let nu = dot(&u, &u).sqrt();
    let nv = dot(&v, &v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((dot(&u, &v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Runs `f` on a pool of `workers` threads; 0 means the rayon default.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Rank-one outcome for one probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankOneResult {
    pub probe_image_id: String,
    pub subject_id: String,
    pub group: DemographicGroup,
    /// Absent for singleton subjects.
    pub mated_score: Option<f64>,
    pub mated_argmax_image: Option<String>,
    /// Absent only when the gallery holds no other subject.
    pub nonmated_score: Option<f64>,
    pub nonmated_argmax_image: Option<String>,
}

impl RankOneResult {
    /// `(mated, nonmated)` when both are present.
    pub fn pair(&self) -> Option<(f64, f64)> {
        Some((self.mated_score?, self.nonmated_score?))
    }
}

/// Probes whose non-mated search set was empty. They are excluded from
/// non-mated statistics.
pub fn degenerate_probes(results: &[RankOneResult]) -> Vec<&str> {
    results
        .iter()
        .filter(|r| r.nonmated_score.is_none())
        .map(|r| r.probe_image_id.as_str())
        .collect()
}

fn record_vector<'a>(record: &ImageRecord, store: &'a EmbeddingStore) -> Result<&'a [f32]> {
    store.vector(record.embedding_index).ok_or(Error::IndexOutOfRange {
        index: record.embedding_index,
        count: store.count(),
    })
}

/// Enrolled images packed as contiguous unit vectors.
struct PackedGallery<'a> {
    dim: usize,
    rows: Vec<f64>,
    row_subject: Vec<usize>,
    row_image: Vec<&'a str>,
    /// subject id -> dense index, in sorted subject order
    subjects: BTreeMap<&'a str, usize>,
}

impl<'a> PackedGallery<'a> {
    fn build(
        split: &'a ProbeGallerySplit,
        by_image: &BTreeMap<&str, &ImageRecord>,
        store: &EmbeddingStore,
    ) -> Result<Self> {
        let dim = store.dimension();
        let mut g = PackedGallery {
            dim,
            rows: Vec::new(),
            row_subject: Vec::new(),
            row_image: Vec::new(),
            subjects: BTreeMap::new(),
        };
        for (subject, images) in &split.gallery {
            if images.is_empty() {
                continue;
            }
            let idx = g.subjects.len();
            g.subjects.insert(subject.as_str(), idx);
            for image in images {
                let record = by_image
                    .get(image.as_str())
                    .ok_or_else(|| Error::UnknownImage(image.clone()))?;
                g.rows.extend(unit_vector(record_vector(record, store)?)?);
                g.row_subject.push(idx);
                g.row_image.push(image.as_str());
            }
        }
        Ok(g)
    }

    fn len(&self) -> usize {
        self.row_subject.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }
}

struct Probe<'a> {
    record: &'a ImageRecord,
    subject: Option<usize>,
    unit: Vec<f64>,
}

fn collect_probes<'a>(
    split: &ProbeGallerySplit,
    by_image: &BTreeMap<&str, &'a ImageRecord>,
    store: &EmbeddingStore,
    gallery: &PackedGallery<'_>,
) -> Result<Vec<Probe<'a>>> {
    let mut probes = split
        .probes
        .values()
        .map(|id| {
            let record = *by_image
                .get(id.as_str())
                .ok_or_else(|| Error::UnknownImage(id.clone()))?;
            Ok(Probe {
                record,
                subject: gallery.subjects.get(record.subject_id.as_str()).copied(),
                unit: unit_vector(record_vector(record, store)?)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    probes.sort_by(|a, b| a.record.image_id.cmp(&b.record.image_id));
    Ok(probes)
}

#[derive(Clone, Copy)]
struct Best<'a> {
    score: f64,
    image: &'a str,
}

impl<'a> Best<'a> {
    /// Higher score wins; equal scores go to the smaller image id.
    #[inline]
    fn offer(slot: &mut Option<Best<'a>>, score: f64, image: &'a str) {
        match slot {
            Some(b) if score < b.score || (score == b.score && image >= b.image) => {}
            _ => *slot = Some(Best { score, image }),
        }
    }
}

fn search_one(probe: &Probe<'_>, gallery: &PackedGallery<'_>) -> RankOneResult {
    let mut mated: Option<Best> = None;
    let mut nonmated: Option<Best> = None;
    for i in 0..gallery.len() {
        let score = dot(&probe.unit, gallery.row(i)).clamp(-1.0, 1.0);
        let slot = if Some(gallery.row_subject[i]) == probe.subject {
            &mut mated
        } else {
            &mut nonmated
        };
        Best::offer(slot, score, gallery.row_image[i]);
    }
    let r = probe.record;
    RankOneResult {
        probe_image_id: r.image_id.clone(),
        subject_id: r.subject_id.clone(),
        group: r.group.clone(),
        mated_score: mated.map(|b| b.score),
        mated_argmax_image: mated.map(|b| b.image.to_string()),
        nonmated_score: nonmated.map(|b| b.score),
        nonmated_argmax_image: nonmated.map(|b| b.image.to_string()),
    }
}

/// Exact rank-one mated and non-mated scores for every probe in `split`,
/// sorted by probe image id. `workers` = 0 uses the rayon default pool size.
pub fn rank_one_scores(
    split: &ProbeGallerySplit,
    records: &[ImageRecord],
    store: &EmbeddingStore,
    workers: usize,
) -> Result<Vec<RankOneResult>> {
    let by_image = index_by_image(records);
    let gallery = PackedGallery::build(split, &by_image, store)?;
    let probes = collect_probes(split, &by_image, store, &gallery)?;
    with_workers(workers, || {
        probes
            .par_chunks(PROBE_CHUNK)
            .flat_map_iter(|chunk| chunk.iter().map(|p| search_one(p, &gallery)))
            .collect()
    })
}

/// Non-mated rank-one scores at one gallery size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub size: usize,
    pub stats: Option<DistributionStats>,
    /// Per probe, aligned with [`GallerySweep::probe_image_ids`].
    pub nonmated: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GallerySweep {
    pub probe_image_ids: Vec<String>,
    pub points: Vec<SweepPoint>,
}

/// Recomputes non-mated rank-one scores on nested random subsets of the
/// enrolled subjects. Subjects are shuffled once with `rng_seed`; size `s`
/// keeps the first `s`, so every smaller gallery is a subset of every larger.
pub fn gallery_size_sweep(
    split: &ProbeGallerySplit,
    records: &[ImageRecord],
    store: &EmbeddingStore,
    sizes: &[usize],
    rng_seed: u64,
    workers: usize,
) -> Result<GallerySweep> {
    let by_image = index_by_image(records);
    let gallery = PackedGallery::build(split, &by_image, store)?;
    let probes = collect_probes(split, &by_image, store, &gallery)?;
    let n_subjects = gallery.subjects.len();
    if let Some(&bad) = sizes.iter().find(|&&s| s == 0 || s > n_subjects) {
        return Err(Error::InsufficientIdentities {
            group: "gallery".into(),
            have: n_subjects,
            need: bad,
        });
    }

    let mut order: Vec<usize> = (0..n_subjects).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);

    // per_probe[p][k] = non-mated max over the first sizes[k] shuffled subjects
    let per_probe: Vec<Vec<Option<f64>>> = with_workers(workers, || {
        probes
            .par_iter()
            .map(|probe| {
                let mut subject_max = vec![f64::NEG_INFINITY; n_subjects];
                for i in 0..gallery.len() {
                    let s = gallery.row_subject[i];
                    let score = dot(&probe.unit, gallery.row(i)).clamp(-1.0, 1.0);
                    if score > subject_max[s] {
                        subject_max[s] = score;
                    }
                }
                let mut prefix = Vec::with_capacity(n_subjects + 1);
                let mut running: Option<f64> = None;
                prefix.push(running);
                for &s in &order {
                    if Some(s) != probe.subject {
                        running = Some(running.map_or(subject_max[s], |r| r.max(subject_max[s])));
                    }
                    prefix.push(running);
                }
                sizes.iter().map(|&size| prefix[size]).collect()
            })
            .collect()
    })?;

    let points = sizes
        .iter()
        .enumerate()
        .map(|(k, &size)| {
            let nonmated: Vec<Option<f64>> = per_probe.iter().map(|row| row[k]).collect();
            let present: Vec<f64> = nonmated.iter().flatten().copied().collect();
            SweepPoint {
                size,
                stats: DistributionStats::from_samples(&present),
                nonmated,
            }
        })
        .collect();
    Ok(GallerySweep {
        probe_image_ids: probes.iter().map(|p| p.record.image_id.clone()).collect(),
        points,
    })
}

/// Options for 1-to-1 pair enumeration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairOptions {
    /// Keep each impostor pair with this probability; `None` keeps all.
    pub impostor_rate: Option<f64>,
    pub rng_seed: u64,
    /// With a group filter, also pair group members with images outside it.
    pub cross_cohort: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OneToOneScores {
    pub genuine: Vec<ScoreSample>,
    pub impostor: Vec<ScoreSample>,
}

impl OneToOneScores {
    pub fn genuine_scores(&self) -> Vec<f64> {
        self.genuine.iter().map(|s| s.score).collect()
    }

    pub fn impostor_scores(&self) -> Vec<f64> {
        self.impostor.iter().map(|s| s.score).collect()
    }
}

/// All unordered same-subject (genuine) and different-subject (impostor)
/// image pairs, each scored once.
///
/// Images are enumerated in image-id order and pairs `(i, j)` with `i < j`
/// are visited row by row. When subsampling, one uniform draw is taken per
/// impostor pair in that order.
pub fn one_to_one_distributions(
    records: &[ImageRecord],
    store: &EmbeddingStore,
    group_filter: Option<&DemographicGroup>,
    options: &PairOptions,
) -> Result<OneToOneScores> {
    if let Some(rate) = options.impostor_rate {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::InvalidArgument(format!("impostor rate {rate} not in (0, 1]")));
        }
    }
    let in_group = |r: &ImageRecord| group_filter.is_none_or(|g| r.group == *g);
    let mut pool: Vec<&ImageRecord> = records.iter().filter(|r| options.cross_cohort || in_group(r)).collect();
    pool.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    let units = pool
        .iter()
        .map(|r| unit_vector(record_vector(r, store)?))
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(options.rng_seed);
    let mut out = OneToOneScores::default();
    for i in 0..pool.len() {
        for j in (i + 1)..pool.len() {
            let (a, b) = (pool[i], pool[j]);
            if !in_group(a) && !in_group(b) {
                continue;
            }
            let genuine = a.subject_id == b.subject_id;
            if !genuine {
                if let Some(rate) = options.impostor_rate {
                    if rng.random::<f64>() >= rate {
                        continue;
                    }
                }
            }
            let score = dot(&units[i], &units[j]).clamp(-1.0, 1.0);
            let sample = ScoreSample::new(a.image_id.as_str(), b.image_id.as_str(), score)?;
            if genuine {
                out.genuine.push(sample);
            } else {
                out.impostor.push(sample);
            }
        }
    }
    Ok(out)
}

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const RANK_ONE_CSV_HEADER: &str =
    "probe_image_id,subject_id,race,gender,mated_score,mated_argmax,nonmated_score,nonmated_argmax";

/// Writes rank-one results as CSV; absent fields are left empty.
pub fn write_rank_one_csv<W: Write>(results: &[RankOneResult], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{RANK_ONE_CSV_HEADER}")?;
    for r in results {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.probe_image_id,
            r.subject_id,
            r.group.race,
            r.group.gender,
            opt_num(r.mated_score),
            r.mated_argmax_image.as_deref().unwrap_or(""),
            opt_num(r.nonmated_score),
            r.nonmated_argmax_image.as_deref().unwrap_or(""),
        )?;
    }
    w.flush()
}
