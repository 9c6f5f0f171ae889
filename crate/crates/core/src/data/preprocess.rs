use std::path::Path;

use image::imageops::{self, FilterType};
use image::{ColorType, DynamicImage, Rgb32FImage};
use ndarray::Array3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Image;

/// Square resize followed by a square crop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessSpec {
    pub resize: u32,
    pub crop: u32,
}

impl PreprocessSpec {
    /// 512 → 384, for backbones on the full-size contract.
    pub fn full() -> Self {
        PreprocessSpec { resize: 512, crop: 384 }
    }

    /// 86 → 64 for the reference tiny backbone (same 4:3 ratio).
    pub fn reference() -> Self {
        PreprocessSpec { resize: 86, crop: 64 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.crop == 0 || self.crop > self.resize {
            return Err(Error::Config(format!(
                "crop {} must be positive and at most resize {}",
                self.crop, self.resize
            )));
        }
        Ok(())
    }
}

pub fn load_image(path: &Path) -> Result<DynamicImage> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "image file not found"),
        ));
    }
    image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Decode {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })
}

/// Bilinear resize, then a random (training) or centred (evaluation) crop,
/// with values in `[0, 1]`. Alpha is dropped; non-colour images are rejected.
pub fn preprocess<R: Rng + ?Sized>(
    image: &DynamicImage,
    spec: PreprocessSpec,
    train_mode: bool,
    rng: &mut R,
) -> Result<Image> {
    spec.validate()?;
    match image.color() {
        ColorType::Rgb8
        | ColorType::Rgba8
        | ColorType::Rgb16
        | ColorType::Rgba16
        | ColorType::Rgb32F
        | ColorType::Rgba32F => {}
        other => {
            return Err(Error::Decode {
                path: Default::default(),
                message: format!("expected an RGB image, got {other:?}"),
            })
        }
    }
    let rgb: Rgb32FImage = image.to_rgb32f();
    let resized = if rgb.dimensions() == (spec.resize, spec.resize) {
        rgb
    } else {
        imageops::resize(&rgb, spec.resize, spec.resize, FilterType::Triangle)
    };
    let span = spec.resize - spec.crop;
    let (x0, y0) = if train_mode {
        (rng.random_range(0..=span), rng.random_range(0..=span))
    } else {
        (span / 2, span / 2)
    };
    let c = spec.crop as usize;
    Ok(Array3::from_shape_fn((c, c, 3), |(y, x, ch)| {
        let p = resized.get_pixel(x0 + x as u32, y0 + y as u32);
        (p.0[ch] as f64).clamp(0.0, 1.0)
    }))
}
