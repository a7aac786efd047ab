#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use identik::degrade::RasterImage;
use identik::{DemographicGroup, EmbeddingStore, ImageRecord, ProbeGallerySplit};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn naive_cosine(u: &[f32], v: &[f32]) -> f64 {
    let (mut uv, mut uu, mut vv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a as f64, b as f64);
        uv += a * b;
        uu += a * a;
        vv += b * b;
    }
    (uv / (uu.sqrt() * vv.sqrt())).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleHit {
    pub score: f64,
    pub image: String,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub probe: String,
    pub mated: Option<OracleHit>,
    pub nonmated: Option<OracleHit>,
}

fn better(best: &Option<OracleHit>, score: f64, image: &str) -> bool {
    match best {
        None => true,
        Some(b) => score > b.score || (score == b.score && image < b.image.as_str()),
    }
}

/// Plain double loop over every probe and every enrolled image.
pub fn brute_force_rank_one(
    split: &ProbeGallerySplit,
    records: &[ImageRecord],
    store: &EmbeddingStore,
) -> Vec<OracleResult> {
    let by_id: BTreeMap<&str, &ImageRecord> = records.iter().map(|r| (r.image_id.as_str(), r)).collect();
    let vec_of = |id: &str| store.vector(by_id[id].embedding_index).unwrap();
    let mut out = Vec::new();
    for (subject, probe_id) in &split.probes {
        let probe = vec_of(probe_id);
        let mut mated: Option<OracleHit> = None;
        let mut nonmated: Option<OracleHit> = None;
        for (owner, images) in &split.gallery {
            for image in images {
                let s = naive_cosine(probe, vec_of(image));
                let slot = if owner == subject { &mut mated } else { &mut nonmated };
                if better(slot, s, image) {
                    *slot = Some(OracleHit {
                        score: s,
                        image: image.clone(),
                    });
                }
            }
        }
        out.push(OracleResult {
            probe: probe_id.clone(),
            mated,
            nonmated,
        });
    }
    out.sort_by(|a, b| a.probe.cmp(&b.probe));
    out
}

const RACES: [&str; 2] = ["A", "B"];
const GENDERS: [&str; 2] = ["F", "M"];

/// Random dataset with 1..=max_images images per subject (so some singletons),
/// random dates and Gaussian embeddings with a per-subject mean.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    max_subjects: usize,
    max_images: usize,
    max_dim: usize,
) -> (Vec<ImageRecord>, EmbeddingStore) {
    let dim = rng.random_range(2..=max_dim);
    let n_subjects = rng.random_range(2..=max_subjects);
    let per_subject_cap = (max_images / n_subjects).clamp(1, 8);
    let mut records = Vec::new();
    let mut data = Vec::new();
    let base = NaiveDate::from_ymd_opt(1990, 1, 1).unwrap();
    for s in 0..n_subjects {
        let subject = format!("p{s:04}");
        let group = DemographicGroup::new(RACES[rng.random_range(0..2)], GENDERS[rng.random_range(0..2)]);
        let center: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let k = rng.random_range(1..=per_subject_cap);
        for i in 0..k {
            let noise: f64 = rng.random_range(0.1..1.5);
            records.push(ImageRecord {
                image_id: format!("{subject}-{i}"),
                subject_id: subject.clone(),
                group: group.clone(),
                capture_date: base + chrono::Days::new(rng.random_range(0..5000)),
                embedding_index: records.len(),
            });
            for c in &center {
                let g: f64 = rng.sample(StandardNormal);
                data.push((c + noise * g) as f32);
            }
        }
    }
    (records, EmbeddingStore::new(dim, data).unwrap())
}

pub fn write_dataset(dir: &Path, records: &[ImageRecord], store: &EmbeddingStore) {
    identik::ingest::write_manifest(records, dir.join("manifest.csv")).unwrap();
    identik::ingest::write_embeddings(store, dir.join("embeddings.emb")).unwrap();
}

/// Sampled Gaussian taps, computed independently of the library.
pub fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let raw: Vec<f64> = (-r..=r)
        .map(|x| (-((x * x) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Direct 2-d convolution with the outer-product kernel and clamped indices.
pub fn blur_oracle(img: &RasterImage, sigma: f64) -> Vec<u8> {
    let taps = gaussian_taps(sigma);
    let r = (taps.len() / 2) as i64;
    let (w, h, ch) = (img.width() as i64, img.height() as i64, img.channels());
    let mut out = Vec::with_capacity(img.pixels().len());
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let sx = (x + dx).clamp(0, w - 1) as u32;
                        let sy = (y + dy).clamp(0, h - 1) as u32;
                        acc += taps[(dx + r) as usize] * taps[(dy + r) as usize] * img.get(sx, sy, c) as f64;
                    }
                }
                out.push(to_u8(acc));
            }
        }
    }
    out
}

fn catmull_rom(t: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 {
        1.5 * t * t * t - 2.5 * t * t + 1.0
    } else if t < 2.0 {
        -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0
    } else {
        0.0
    }
}

/// Per-output-pixel 4x4 Catmull-Rom evaluation with half-pixel centres.
pub fn bicubic_oracle(img: &RasterImage, out_w: u32, out_h: u32) -> Vec<u8> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut out = Vec::new();
    for oy in 0..out_h {
        let sy = (oy as f64 + 0.5) * h as f64 / out_h as f64 - 0.5;
        let y0 = sy.floor() as i64;
        for ox in 0..out_w {
            let sx = (ox as f64 + 0.5) * w as f64 / out_w as f64 - 0.5;
            let x0 = sx.floor() as i64;
            for c in 0..img.channels() {
                let mut acc = 0.0;
                for j in -1..=2 {
                    for i in -1..=2 {
                        let wx = catmull_rom(sx - (x0 + i) as f64);
                        let wy = catmull_rom(sy - (y0 + j) as f64);
                        let px = (x0 + i).clamp(0, w - 1) as u32;
                        let py = (y0 + j).clamp(0, h - 1) as u32;
                        acc += wx * wy * img.get(px, py, c) as f64;
                    }
                }
                out.push(to_u8(acc));
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &[u8], b: &[u8]) -> u8 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x.abs_diff(y)).max().unwrap_or(0)
}

/// Mixed test pictures: noise, gradients, blocks and impulses, gray or RGB.
pub fn image_corpus(rng: &mut ChaCha8Rng, count: usize, min_side: u32, max_side: u32) -> Vec<RasterImage> {
    (0..count)
        .map(|k| {
            let w = rng.random_range(min_side..=max_side);
            let h = rng.random_range(min_side..=max_side);
            let ch = if k % 2 == 0 { 1 } else { 3 };
            let mut px = Vec::with_capacity((w * h) as usize * ch as usize);
            for y in 0..h {
                for x in 0..w {
                    for c in 0..ch {
                        let v = match k % 4 {
                            0 => rng.random::<u8>(),
                            1 => ((x * 255) / w.max(1)) as u8 ^ (c * 40),
                            2 => {
                                if (x / 7 + y / 5) % 2 == 0 {
                                    230
                                } else {
                                    20
                                }
                            }
                            _ => {
                                if rng.random_range(0..50) == 0 {
                                    255
                                } else {
                                    0
                                }
                            }
                        };
                        px.push(v);
                    }
                }
            }
            RasterImage::new(w, h, ch, px).unwrap()
        })
        .collect()
}

/// Largest per-sample difference over pixels at least `margin` away from every
/// border. Replicated borders make composed blurs differ near the edges.
pub fn interior_max_abs_diff(a: &RasterImage, b: &RasterImage, margin: u32) -> u8 {
    let mut m = 0;
    for y in margin..a.height().saturating_sub(margin) {
        for x in margin..a.width().saturating_sub(margin) {
            for c in 0..a.channels() {
                m = m.max(a.get(x, y, c).abs_diff(b.get(x, y, c)));
            }
        }
    }
    m
}
