//! Procedural desk-scale dataset: colour gratings degraded by Gaussian blur and
//! additive noise. Quality falls linearly with both degradation strengths.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{imageops, ImageBuffer, Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::manifest::{DatasetManifest, ManifestEntry};
use crate::error::{Error, Result};
use crate::rating_stats::{gaussian_dos, mos_of, LabelCategory, QualityScale};

/// Side of the generated square images; equal to the reference resize so
/// preprocessing only crops.
pub const SYNTH_IMAGE_SIZE: u32 = 86;
pub const MAX_BLUR_SIGMA: f64 = 3.0;
pub const MAX_NOISE_STD: f64 = 0.25;
/// Relative half-width of the uniform multiplicative SOS jitter.
pub const SOS_JITTER: f64 = 0.05;

/// Every label of a generated sample, whatever the manifest exposes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleLabels {
    pub image_path: String,
    pub blur_sigma: f64,
    pub noise_std: f64,
    /// Quality implied by the degradation before discretisation.
    pub latent_mos: f64,
    pub mos: f64,
    pub sos: f64,
    pub dos: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub manifest: DatasetManifest,
    pub images: Vec<RgbImage>,
    pub oracle: Vec<OracleLabels>,
}

/// Position of the latent quality within the rating range, in `[0.15, 0.85]`.
pub fn quality_fraction(blur_sigma: f64, noise_std: f64) -> f64 {
    let degradation = 0.6 * blur_sigma / MAX_BLUR_SIGMA + 0.4 * noise_std / MAX_NOISE_STD;
    0.15 + 0.7 * (1.0 - degradation)
}

pub fn latent_mos(blur_sigma: f64, noise_std: f64, scale: &QualityScale) -> f64 {
    let (s, e) = (scale.range_start(), scale.range_end());
    s + (e - s) * quality_fraction(blur_sigma, noise_std)
}

fn render(rng: &mut ChaCha8Rng, blur_sigma: f64, noise_std: f64) -> RgbImage {
    let size = SYNTH_IMAGE_SIZE;
    let freq = rng.random_range(2.0..6.0);
    let theta = rng.random_range(0.0..std::f64::consts::PI);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let c0: [f64; 3] = [rng.random(), rng.random(), rng.random()];
    let c1: [f64; 3] = [rng.random(), rng.random(), rng.random()];
    let (ct, st) = (theta.cos(), theta.sin());
    let clean: ImageBuffer<Rgb<f32>, Vec<f32>> = ImageBuffer::from_fn(size, size, |x, y| {
        let u = (x as f64 * ct + y as f64 * st) / size as f64;
        // Square-ish wave: sharp edges make blur visible.
        let v = (0.5 + 0.5 * (8.0 * (std::f64::consts::TAU * freq * u + phase).sin()).tanh()) as f32;
        Rgb(std::array::from_fn(|c| (c0[c] as f32) * (1.0 - v) + (c1[c] as f32) * v))
    });
    let blurred = if blur_sigma > 1e-3 {
        imageops::blur(&clean, blur_sigma as f32)
    } else {
        clean
    };
    let noise = Normal::new(0.0, noise_std.max(0.0)).expect("finite noise std");
    RgbImage::from_fn(size, size, |x, y| {
        let p = blurred.get_pixel(x, y);
        Rgb(std::array::from_fn(|c| {
            let v = p.0[c] as f64 + noise.sample(rng);
            (v.clamp(0.0, 1.0) * 255.0).round() as u8
        }))
    })
}

/// Deterministic for a fixed `seed`. `a_true` drives the SOS law; the
/// category decides which labels appear in the manifest.
pub fn generate_synthetic_dataset(
    n: usize,
    scale: &QualityScale,
    category: LabelCategory,
    seed: u64,
    a_true: f64,
) -> Result<SyntheticDataset> {
    if n == 0 {
        return Err(Error::Config("synthetic dataset needs n >= 1".into()));
    }
    if !(a_true.is_finite() && a_true > 0.0) {
        return Err(Error::Config(format!("a_true must be positive, got {a_true}")));
    }
    scale.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::with_capacity(n);
    let mut oracle = Vec::with_capacity(n);
    let mut entries = Vec::with_capacity(n);
    for i in 0..n {
        let blur_sigma = rng.random_range(0.0..MAX_BLUR_SIGMA);
        let noise_std = rng.random_range(0.0..MAX_NOISE_STD);
        let latent = latent_mos(blur_sigma, noise_std, scale);
        let jitter = 1.0 + rng.random_range(-SOS_JITTER..SOS_JITTER);
        let sos = (a_true * scale.sos_quadratic(latent)).sqrt() * jitter;
        let dos = gaussian_dos(latent, sos, scale)?;
        // With a DOS exposed, the MOS must be its mean; otherwise the latent
        // value is reported directly.
        let mos = match category {
            LabelCategory::DosAvailable => mos_of(&dos),
            _ => latent,
        };
        let image_path = format!("images/{i:05}.png");
        images.push(render(&mut rng, blur_sigma, noise_std));
        entries.push(ManifestEntry {
            image_path: image_path.clone(),
            mos,
            sos: (category == LabelCategory::MosSosAvailable).then_some(sos),
            dos: (category == LabelCategory::DosAvailable).then(|| dos.probs().to_vec()),
            raw_ratings: None,
        });
        oracle.push(OracleLabels {
            image_path,
            blur_sigma,
            noise_std,
            latent_mos: latent,
            mos,
            sos,
            dos: dos.into_probs(),
        });
    }
    let name = format!("synthetic-{}-{seed}", category.as_str().to_lowercase());
    let manifest = DatasetManifest::new(name, scale.clone(), Some(category), entries)?;
    Ok(SyntheticDataset {
        manifest,
        images,
        oracle,
    })
}

impl SyntheticDataset {
    /// Writes `manifest.jsonl`, `oracle.jsonl` and `images/*.png` under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let images_dir = dir.join("images");
        fs::create_dir_all(&images_dir).map_err(|e| Error::io(&images_dir, e))?;
        for (entry, img) in self.manifest.entries.iter().zip(&self.images) {
            let path = dir.join(&entry.image_path);
            img.save_with_format(&path, image::ImageFormat::Png)
                .map_err(|e| Error::Decode {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
        }
        self.manifest.save(&dir.join("manifest.jsonl"))?;
        let oracle_path = dir.join("oracle.jsonl");
        let mut f = fs::File::create(&oracle_path).map_err(|e| Error::io(&oracle_path, e))?;
        for o in &self.oracle {
            let line = serde_json::to_string(o).expect("oracle serialises");
            writeln!(f, "{line}").map_err(|e| Error::io(&oracle_path, e))?;
        }
        Ok(())
    }
}

pub fn load_oracle(path: &Path) -> Result<Vec<OracleLabels>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::manifest::load_manifest;
    use crate::rating_stats::fit_a;

    #[test]
    fn byte_identical_across_runs() {
        let scale = QualityScale::five_point();
        let a = generate_synthetic_dataset(32, &scale, LabelCategory::DosAvailable, 9, 0.1477).unwrap();
        let b = generate_synthetic_dataset(32, &scale, LabelCategory::DosAvailable, 9, 0.1477).unwrap();
        assert_eq!(a.manifest.to_jsonl(), b.manifest.to_jsonl());
        assert_eq!(a.images, b.images);
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        a.write_to(d1.path()).unwrap();
        b.write_to(d2.path()).unwrap();
        for f in ["manifest.jsonl", "oracle.jsonl", "images/00007.png"] {
            assert_eq!(fs::read(d1.path().join(f)).unwrap(), fs::read(d2.path().join(f)).unwrap(), "{f}");
        }
    }

    #[test]
    fn exposed_labels_match_oracle() {
        let scale = QualityScale::five_point();
        for cat in LabelCategory::ALL {
            let ds = generate_synthetic_dataset(8, &scale, cat, 1, 0.15).unwrap();
            for (e, o) in ds.manifest.entries.iter().zip(&ds.oracle) {
                assert_eq!(e.mos, o.mos);
                assert_eq!(e.sos.is_some(), cat == LabelCategory::MosSosAvailable);
                assert_eq!(e.dos.is_some(), cat == LabelCategory::DosAvailable);
            }
        }
    }

    #[test]
    fn round_trip_through_loader() {
        let scale = QualityScale::five_point();
        let dir = tempfile::tempdir().unwrap();
        let ds = generate_synthetic_dataset(6, &scale, LabelCategory::DosAvailable, 3, 0.1477).unwrap();
        ds.write_to(dir.path()).unwrap();
        let m = load_manifest(&dir.path().join("manifest.jsonl")).unwrap();
        assert_eq!(m.entries, ds.manifest.entries);
        assert_eq!(m.header(), ds.manifest.header());
        assert_eq!(load_oracle(&dir.path().join("oracle.jsonl")).unwrap(), ds.oracle);
    }

    #[test]
    fn fit_recovers_generating_a() {
        let scale = QualityScale::five_point();
        let ds = generate_synthetic_dataset(256, &scale, LabelCategory::MosSosAvailable, 11, 0.15).unwrap();
        let pairs: Vec<_> = ds.manifest.labels().iter().map(|l| (l.mos(), l.sos().unwrap())).collect();
        let a = fit_a(&pairs, &scale).unwrap();
        assert!((a - 0.15).abs() / 0.15 < 0.05, "fitted {a}");
    }
}
