//! Probe-image degradation: Gaussian blur and bicubic resolution ladders.
//!
//! Both filters are separable (horizontal pass into an `f64` buffer, then
//! vertical), replicate edge pixels at the borders, and round half away from
//! zero into `[0, 255]` once at the end. Output bytes depend only on input
//! bytes and parameters.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ImageEntry;
use crate::matching::with_workers;

/// Blur levels of the blur ladder.
pub const BLUR_SIGMAS: [u32; 5] = [1, 2, 3, 4, 5];
/// Side lengths of the resolution ladder.
pub const RESOLUTION_SIDES: [u32; 4] = [84, 56, 42, 28];
/// Side length the resolution ladder expects as input.
pub const RESOLUTION_SOURCE_SIDE: u32 = 224;
/// Matcher input side; reduced images are resized back to this.
pub const MATCHER_INPUT_SIDE: u32 = 112;

/// Catmull-Rom coefficient.
const BICUBIC_A: f64 = -0.5;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RasterImage {
    width: u32,
    height: u32,
    channels: u8,
    pixels: Vec<u8>,
}

impl RasterImage {
    /// Row-major, interleaved; 1 (gray) or 3 (RGB) channels.
    pub fn new(width: u32, height: u32, channels: u8, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage("width and height must be positive".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!("{channels} channels; expected 1 or 3")));
        }
        let expected = width as usize * height as usize * channels as usize;
        if pixels.len() != expected {
            return Err(Error::InvalidImage(format!(
                "pixel buffer is {} bytes, expected {expected}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, channels: u8, value: u8) -> Result<Self> {
        let len = width as usize * height as usize * channels as usize;
        Self::new(width, height, channels, vec![value; len])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32, c: u8) -> u8 {
        self.pixels[((y as usize * self.width as usize + x as usize) * self.channels as usize) + c as usize]
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().map(|&p| p as f64).sum::<f64>() / self.pixels.len() as f64
    }
}

#[inline]
pub fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlurSpec {
    pub sigma: f64,
    pub kernel_radius: usize,
}

impl BlurSpec {
    /// Radius `ceil(3σ)`.
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("blur sigma {sigma} must be positive")));
        }
        Ok(Self {
            sigma,
            kernel_radius: (3.0 * sigma).ceil() as usize,
        })
    }

    pub fn with_radius(sigma: f64, kernel_radius: usize) -> Result<Self> {
        let mut spec = Self::new(sigma)?;
        if kernel_radius == 0 {
            return Err(Error::InvalidArgument("kernel radius must be positive".into()));
        }
        spec.kernel_radius = kernel_radius;
        Ok(spec)
    }

    /// Sampled Gaussian `exp(-x²/2σ²)` for `x` in `-r..=r`, normalized to unit sum.
    pub fn kernel(&self) -> Vec<f64> {
        let r = self.kernel_radius as i64;
        let two_var = 2.0 * self.sigma * self.sigma;
        let raw: Vec<f64> = (-r..=r).map(|x| (-((x * x) as f64) / two_var).exp()).collect();
        let sum: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / sum).collect()
    }
}

#[inline]
fn clamp_index(i: i64, len: u32) -> usize {
    i.clamp(0, len as i64 - 1) as usize
}

/// One filter tap list per output coordinate: `(source index, weight)` pairs.
type Taps = Vec<Vec<(usize, f64)>>;

fn blur_taps(len: u32, kernel: &[f64]) -> Taps {
    let r = (kernel.len() / 2) as i64;
    (0..len as i64)
        .map(|o| {
            kernel
                .iter()
                .enumerate()
                .map(|(k, &w)| (clamp_index(o + k as i64 - r, len), w))
                .collect()
        })
        .collect()
}

/// Applies `x_taps` along rows and then `y_taps` along columns.
fn separable(img: &RasterImage, out_w: u32, out_h: u32, x_taps: &Taps, y_taps: &Taps) -> RasterImage {
    let c = img.channels as usize;
    let (in_w, out_w_us, out_h_us) = (img.width as usize, out_w as usize, out_h as usize);
    let mut tmp = vec![0.0f64; img.height as usize * out_w_us * c];
    for y in 0..img.height as usize {
        let src = &img.pixels[y * in_w * c..(y + 1) * in_w * c];
        let dst = &mut tmp[y * out_w_us * c..(y + 1) * out_w_us * c];
        for (x, taps) in x_taps.iter().enumerate() {
            for ch in 0..c {
                let mut acc = 0.0;
                for &(sx, w) in taps {
                    acc += w * src[sx * c + ch] as f64;
                }
                dst[x * c + ch] = acc;
            }
        }
    }
    let row = out_w_us * c;
    let mut out = vec![0u8; out_h_us * row];
    let mut acc = vec![0.0f64; row];
    for (y, taps) in y_taps.iter().enumerate() {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for &(sy, w) in taps {
            let src = &tmp[sy * row..(sy + 1) * row];
            for (a, &s) in acc.iter_mut().zip(src) {
                *a += w * s;
            }
        }
        for (o, &a) in out[y * row..(y + 1) * row].iter_mut().zip(&acc) {
            *o = quantize(a);
        }
    }
    RasterImage {
        width: out_w,
        height: out_h,
        channels: img.channels,
        pixels: out,
    }
}

pub fn gaussian_blur(img: &RasterImage, spec: &BlurSpec) -> RasterImage {
    let kernel = spec.kernel();
    let xt = blur_taps(img.width, &kernel);
    let yt = blur_taps(img.height, &kernel);
    separable(img, img.width, img.height, &xt, &yt)
}

/// Catmull-Rom cubic convolution weight.
pub fn cubic_weight(x: f64) -> f64 {
    let a = BICUBIC_A;
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Source coordinate of output pixel `o` under half-pixel-center mapping.
#[inline]
pub fn source_coordinate(o: u32, in_len: u32, out_len: u32) -> f64 {
    (o as f64 + 0.5) * (in_len as f64 / out_len as f64) - 0.5
}

fn bicubic_taps(in_len: u32, out_len: u32) -> Taps {
    (0..out_len)
        .map(|o| {
            let src = source_coordinate(o, in_len, out_len);
            let base = src.floor() as i64;
            (-1..=2)
                .map(|k| {
                    let i = base + k;
                    (clamp_index(i, in_len), cubic_weight(src - i as f64))
                })
                .collect()
        })
        .collect()
}

/// Catmull-Rom bicubic interpolation (no antialiasing prefilter).
pub fn bicubic_resize(img: &RasterImage, out_w: u32, out_h: u32) -> Result<RasterImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidArgument("output dimensions must be positive".into()));
    }
    let xt = bicubic_taps(img.width, out_w);
    let yt = bicubic_taps(img.height, out_h);
    Ok(separable(img, out_w, out_h, &xt, &yt))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LadderKind {
    Blur,
    Resolution,
}

impl LadderKind {
    pub fn tags(self) -> Vec<String> {
        match self {
            LadderKind::Blur => BLUR_SIGMAS.iter().map(|s| format!("sigma{s}")).collect(),
            LadderKind::Resolution => RESOLUTION_SIDES.iter().map(|s| format!("res{s}")).collect(),
        }
    }
}

impl std::str::FromStr for LadderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blur" => Ok(LadderKind::Blur),
            "resolution" => Ok(LadderKind::Resolution),
            other => Err(Error::InvalidArgument(format!("unknown ladder `{other}`"))),
        }
    }
}

/// Blur: σ = 1..5 applied to the original. Resolution: 224² reduced to 84²,
/// 56², 42² and 28², each resized back to 112² for the matcher.
pub fn degradation_ladder(img: &RasterImage, kind: LadderKind) -> Result<Vec<(String, RasterImage)>> {
    match kind {
        LadderKind::Blur => BLUR_SIGMAS
            .iter()
            .map(|&s| Ok((format!("sigma{s}"), gaussian_blur(img, &BlurSpec::new(s as f64)?))))
            .collect(),
        LadderKind::Resolution => {
            if img.width != RESOLUTION_SOURCE_SIDE || img.height != RESOLUTION_SOURCE_SIDE {
                return Err(Error::BadDimensions {
                    expected: RESOLUTION_SOURCE_SIDE,
                    width: img.width,
                    height: img.height,
                });
            }
            RESOLUTION_SIDES
                .iter()
                .map(|&side| {
                    let small = bicubic_resize(img, side, side)?;
                    let input = bicubic_resize(&small, MATCHER_INPUT_SIDE, MATCHER_INPUT_SIDE)?;
                    Ok((format!("res{side}"), input))
                })
                .collect()
        }
    }
}

/// Loads a PNG as gray (for gray sources) or RGB; alpha is dropped.
pub fn load_png(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let reader = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    if reader.format() != Some(image::ImageFormat::Png) {
        return Err(Error::InvalidImage(format!("{} is not a PNG", path.display())));
    }
    let decoded = reader.decode()?;
    if decoded.color().has_color() {
        let rgb = decoded.to_rgb8();
        RasterImage::new(rgb.width(), rgb.height(), 3, rgb.into_raw())
    } else {
        let gray = decoded.to_luma8();
        RasterImage::new(gray.width(), gray.height(), 1, gray.into_raw())
    }
}

pub fn save_png(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let color = if img.channels == 1 {
        image::ExtendedColorType::L8
    } else {
        image::ExtendedColorType::Rgb8
    };
    image::save_buffer_with_format(path, &img.pixels, img.width, img.height, color, image::ImageFormat::Png)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchFailure {
    pub image_id: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BatchOutcome {
    /// Per level tag, the written images in input order.
    pub levels: Vec<(String, Vec<ImageEntry>)>,
    pub failures: Vec<BatchFailure>,
}

fn process_one(entry: &ImageEntry, base: &Path, kind: LadderKind, out_dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let src = base.join(&entry.path);
    let img = load_png(&src)?;
    let ladder = degradation_ladder(&img, kind)?;
    let mut written = Vec::with_capacity(ladder.len());
    for (tag, level) in ladder {
        let dir = out_dir.join(&tag);
        let path = dir.join(format!("{}.png", entry.image_id));
        save_png(&level, &path)?;
        written.push((tag, path));
    }
    Ok(written)
}

/// Degrades every image in `entries` (paths relative to `base`) and writes
/// `<out_dir>/<tag>/<image_id>.png`. A failure on one image does not stop the
/// others. Level manifests list paths relative to their level directory.
pub fn run_ladder_batch(
    entries: &[ImageEntry],
    base: &Path,
    kind: LadderKind,
    out_dir: &Path,
    workers: usize,
) -> Result<BatchOutcome> {
    let tags = kind.tags();
    for tag in &tags {
        let dir = out_dir.join(tag);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let results: Vec<Result<Vec<(String, PathBuf)>>> = with_workers(workers, || {
        entries
            .par_iter()
            .map(|e| process_one(e, base, kind, out_dir))
            .collect()
    })?;

    let mut outcome = BatchOutcome {
        levels: tags.iter().map(|t| (t.clone(), Vec::new())).collect(),
        failures: Vec::new(),
    };
    for (entry, result) in entries.iter().zip(results) {
        match result {
            Ok(written) => {
                for ((_, level), (_, path)) in outcome.levels.iter_mut().zip(written) {
                    let name = path.file_name().expect("file name").to_string_lossy().into_owned();
                    level.push(ImageEntry {
                        image_id: entry.image_id.clone(),
                        path: name,
                    });
                }
            }
            Err(e) => outcome.failures.push(BatchFailure {
                image_id: entry.image_id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: u32, h: u32) -> RasterImage {
        let pixels = (0..h)
            .flat_map(|y| (0..w).map(move |x| ((x * 7 + y * 3) % 256) as u8))
            .collect();
        RasterImage::new(w, h, 1, pixels).unwrap()
    }

    #[test]
    fn raster_validation() {
        assert!(RasterImage::new(2, 2, 1, vec![0; 4]).is_ok());
        assert!(RasterImage::new(2, 2, 3, vec![0; 4]).is_err());
        assert!(RasterImage::new(2, 2, 2, vec![0; 8]).is_err());
        assert!(RasterImage::new(0, 2, 1, vec![]).is_err());
    }

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        for sigma in [0.5, 1.0, 2.5, 5.0] {
            let spec = BlurSpec::new(sigma).unwrap();
            let k = spec.kernel();
            assert_eq!(k.len(), 2 * (3.0 * sigma).ceil() as usize + 1);
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for i in 0..k.len() {
                assert_eq!(k[i], k[k.len() - 1 - i]);
            }
        }
        assert_eq!(BlurSpec::new(1.0).unwrap().kernel_radius, 3);
        assert!(BlurSpec::new(0.0).is_err());
    }

    #[test]
    fn blur_keeps_constants_exactly() {
        for c in [0u8, 1, 77, 254, 255] {
            let img = RasterImage::filled(17, 9, 3, c).unwrap();
            for sigma in [1.0, 3.0, 5.0] {
                assert_eq!(gaussian_blur(&img, &BlurSpec::new(sigma).unwrap()), img);
            }
        }
    }

    #[test]
    fn bicubic_keeps_constants_exactly() {
        let img = RasterImage::filled(224, 224, 1, 131).unwrap();
        for side in [84, 56, 42, 28, 112, 300] {
            let out = bicubic_resize(&img, side, side).unwrap();
            assert!(out.pixels().iter().all(|&p| p == 131));
            let back = bicubic_resize(&out, 224, 224).unwrap();
            assert_eq!(back, img);
        }
    }

    #[test]
    fn same_size_resize_is_identity() {
        let img = gradient(224, 224);
        assert_eq!(bicubic_resize(&img, 224, 224).unwrap(), img);
    }

    #[test]
    fn cubic_weight_partition_of_unity() {
        for t in [0.0, 0.1, 0.25, 0.5, 0.9] {
            let sum: f64 = (-1..=2).map(|k| cubic_weight(t - k as f64)).sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
        assert_eq!(cubic_weight(0.0), 1.0);
        assert_eq!(cubic_weight(1.0), 0.0);
        assert_eq!(cubic_weight(2.0), 0.0);
    }

    #[test]
    fn ladders() {
        let img = gradient(40, 30);
        let blur = degradation_ladder(&img, LadderKind::Blur).unwrap();
        let tags: Vec<&str> = blur.iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(tags, ["sigma1", "sigma2", "sigma3", "sigma4", "sigma5"]);
        assert!(blur.iter().all(|(_, i)| i.width() == 40 && i.height() == 30));

        let res = degradation_ladder(&gradient(224, 224), LadderKind::Resolution).unwrap();
        let tags: Vec<&str> = res.iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(tags, ["res84", "res56", "res42", "res28"]);
        assert!(res.iter().all(|(_, i)| i.width() == 112 && i.height() == 112));

        let err = degradation_ladder(&gradient(200, 200), LadderKind::Resolution).unwrap_err();
        assert!(matches!(err, Error::BadDimensions { width: 200, .. }));
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for channels in [1u8, 3] {
            let pixels = (0..5 * 4 * channels as usize).map(|i| (i * 11 % 256) as u8).collect();
            let img = RasterImage::new(5, 4, channels, pixels).unwrap();
            let path = dir.path().join(format!("x{channels}.png"));
            save_png(&img, &path).unwrap();
            assert_eq!(load_png(&path).unwrap(), img);
        }
    }
}
