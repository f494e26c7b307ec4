//! Lot patches for classifier pipelines: extraction from full frames and the
//! seeded augmentation/normalization chain.

use thiserror::Error;

use crate::annotation::{LotAnnotation, LotGeometry, BOUNDS_TOLERANCE};
use crate::geometry::{solve_homography, AxisAlignedBox, GeometryError, Point2D};
use crate::raster::{ImageBuffer, RasterError};
use crate::seed::DetRng;

pub const DEFAULT_PATCH_SIZE: (u32, u32) = (224, 224);
pub const IMAGENET_MEAN: [f32; 3] = [0.485, 0.456, 0.406];
pub const IMAGENET_STD: [f32; 3] = [0.229, 0.224, 0.225];

#[derive(Debug, Error)]
pub enum PatchError {
    #[error("lot {lot_id:?} spans {min}..{max}, outside the {width}x{height} image")]
    OutOfBounds {
        lot_id: String,
        min: Point2D,
        max: Point2D,
        width: u32,
        height: u32,
    },
    #[error("crop of {crop_w}x{crop_h} does not fit a {width}x{height} patch")]
    CropTooLarge {
        crop_w: u32,
        crop_h: u32,
        width: u32,
        height: u32,
    },
    #[error("invalid augmentation config: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Integer pixel window `[x0, x1) × [y0, y1)` covering `b`, rounded outward
/// and clamped to the image.
fn pixel_window(b: &AxisAlignedBox, width: u32, height: u32) -> (u32, u32, u32, u32) {
    let x0 = b.min().x.floor().max(0.0) as u32;
    let y0 = b.min().y.floor().max(0.0) as u32;
    let x1 = (b.max().x.ceil() as u32).min(width);
    let y1 = (b.max().y.ceil() as u32).min(height);
    (x0, y0, x1, y1)
}

/// Cuts one lot out of a frame.
///
/// Rect lots give the axis-aligned crop of the rect, rounded outward to
/// whole pixels. Quad lots are rectified onto a `target` patch through the
/// homography taking the patch corners to the quad corners (top-left-most
/// corner first, clockwise), sampling bilinearly inside the quad's
/// circumscribing pixel window.
pub fn extract_patch(img: &ImageBuffer, lot: &LotAnnotation, target: (u32, u32)) -> Result<ImageBuffer, PatchError> {
    let b = lot.geometry.bounding_box();
    let (w, h) = (img.width() as f64, img.height() as f64);
    let t = BOUNDS_TOLERANCE;
    if b.min().x < -t || b.min().y < -t || b.max().x > w + t || b.max().y > h + t {
        return Err(PatchError::OutOfBounds {
            lot_id: lot.id.clone(),
            min: b.min(),
            max: b.max(),
            width: img.width(),
            height: img.height(),
        });
    }
    let (x0, y0, x1, y1) = pixel_window(&b, img.width(), img.height());
    let window = img.crop(x0, y0, x1.saturating_sub(x0), y1.saturating_sub(y0))?;
    match &lot.geometry {
        LotGeometry::Rect(_) => Ok(window),
        LotGeometry::Quad(q) => {
            let (tw, th) = (target.0 as f64, target.1 as f64);
            let corners = [
                Point2D::new(0.0, 0.0),
                Point2D::new(tw, 0.0),
                Point2D::new(tw, th),
                Point2D::new(0.0, th),
            ];
            let local = q
                .top_left_first()
                .map(|p| Point2D::new(p.x - x0 as f64, p.y - y0 as f64));
            let h = solve_homography(&corners, &local)?;
            Ok(ImageBuffer::from_fn(target.0, target.1, |u, v| {
                let s = h.apply(Point2D::new(u as f64 + 0.5, v as f64 + 0.5));
                window.sample_clamped(s.x, s.y)
            }))
        }
    }
}

/// Fill used for pixels uncovered by translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fill {
    Constant(f32),
    /// Gaussian noise around `mean`, clamped to `[0, 1]`.
    Noise {
        mean: f32,
        sigma: f32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Translation {
    pub max_shift: u32,
    pub fill: Fill,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationConfig {
    pub target_size: (u32, u32),
    /// Rotation angles are drawn from `[-range, +range)` degrees.
    pub rotation_range_deg: f64,
    pub hflip_prob: f64,
    pub normalize_mean: [f32; 3],
    pub normalize_std: [f32; 3],
    pub translation: Option<Translation>,
    /// Random crop size; the crop is resized back to `target_size`.
    pub random_crop: Option<(u32, u32)>,
    pub noise_sigma: Option<f32>,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self {
            target_size: DEFAULT_PATCH_SIZE,
            rotation_range_deg: 15.0,
            hflip_prob: 0.5,
            normalize_mean: IMAGENET_MEAN,
            normalize_std: IMAGENET_STD,
            translation: None,
            random_crop: None,
            noise_sigma: None,
        }
    }
}

impl AugmentationConfig {
    /// Resize and normalize only.
    pub fn deterministic() -> Self {
        Self {
            rotation_range_deg: 0.0,
            hflip_prob: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), PatchError> {
        let bad = |m: &str| Err(PatchError::Config(m.to_owned()));
        if self.target_size.0 == 0 || self.target_size.1 == 0 {
            return bad("target size must be positive");
        }
        if !(self.rotation_range_deg >= 0.0 && self.rotation_range_deg.is_finite()) {
            return bad("rotation range must be a finite value >= 0");
        }
        if !(0.0..=1.0).contains(&self.hflip_prob) {
            return bad("hflip probability must lie in [0, 1]");
        }
        if !self.normalize_std.iter().all(|s| *s > 0.0 && s.is_finite()) {
            return bad("normalization std components must be > 0");
        }
        if !self.normalize_mean.iter().all(|m| m.is_finite()) {
            return bad("normalization mean must be finite");
        }
        if let Some(Translation {
            fill: Fill::Noise { sigma, .. },
            ..
        }) = self.translation
        {
            if sigma.is_nan() || sigma < 0.0 {
                return bad("fill noise sigma must be >= 0");
            }
        }
        if let Some(s) = self.noise_sigma {
            if s.is_nan() || s < 0.0 {
                return bad("noise sigma must be >= 0");
            }
        }
        if let Some((cw, ch)) = self.random_crop {
            if cw == 0 || ch == 0 {
                return bad("crop size must be positive");
            }
            if cw > self.target_size.0 || ch > self.target_size.1 {
                return Err(PatchError::CropTooLarge {
                    crop_w: cw,
                    crop_h: ch,
                    width: self.target_size.0,
                    height: self.target_size.1,
                });
            }
        }
        Ok(())
    }
}

/// Identifies the random stream of one patch in one epoch.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub global_seed: u64,
    pub image: String,
    pub lot_id: String,
    pub epoch: u64,
}

impl SeedSpec {
    pub fn new(global_seed: u64, image: impl Into<String>, lot_id: impl Into<String>, epoch: u64) -> Self {
        Self {
            global_seed,
            image: image.into(),
            lot_id: lot_id.into(),
            epoch,
        }
    }

    /// Stream `DetRng::derive("augment", global_seed, [image, lot_id, epoch as u64 LE])`.
    pub fn rng(&self) -> DetRng {
        DetRng::derive(
            "augment",
            self.global_seed,
            &[self.image.as_bytes(), self.lot_id.as_bytes(), &self.epoch.to_le_bytes()],
        )
    }
}

/// The random decisions taken for one patch.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationTrace {
    pub shift: Option<(i64, i64)>,
    pub crop_origin: Option<(u32, u32)>,
    pub flipped: bool,
    pub angle_deg: f64,
}

pub fn hflip(patch: &ImageBuffer) -> ImageBuffer {
    patch.hflip()
}

/// `out_c = (in_c − mean_c) / std_c`.
pub fn normalize(patch: &ImageBuffer, mean: [f32; 3], std: [f32; 3]) -> ImageBuffer {
    let data = patch
        .data()
        .chunks_exact(3)
        .flat_map(|p| [0, 1, 2].map(|c| (p[c] - mean[c]) / std[c]))
        .collect();
    ImageBuffer::new(patch.width(), patch.height(), data).expect("same shape")
}

pub fn denormalize(patch: &ImageBuffer, mean: [f32; 3], std: [f32; 3]) -> ImageBuffer {
    let data = patch
        .data()
        .chunks_exact(3)
        .flat_map(|p| [0, 1, 2].map(|c| p[c] * std[c] + mean[c]))
        .collect();
    ImageBuffer::new(patch.width(), patch.height(), data).expect("same shape")
}

fn translate(img: &ImageBuffer, dx: i64, dy: i64, fill: Fill, rng: &mut DetRng) -> ImageBuffer {
    let (w, h) = (img.width() as i64, img.height() as i64);
    ImageBuffer::from_fn(img.width(), img.height(), |x, y| {
        let sx = x as i64 - dx;
        let sy = y as i64 - dy;
        if (0..w).contains(&sx) && (0..h).contains(&sy) {
            img.pixel(sx as u32, sy as u32)
        } else {
            match fill {
                Fill::Constant(v) => [v; 3],
                Fill::Noise { mean, sigma } => {
                    std::array::from_fn(|_| (mean + sigma * rng.normal() as f32).clamp(0.0, 1.0))
                }
            }
        }
    })
}

/// Adds N(0, σ²) per sample and clamps to `[0, 1]`. σ = 0 is the identity.
pub fn add_noise(img: &ImageBuffer, sigma: f32, rng: &mut DetRng) -> ImageBuffer {
    if sigma == 0.0 {
        return img.clone();
    }
    let data = img
        .data()
        .iter()
        .map(|v| (v + sigma * rng.normal() as f32).clamp(0.0, 1.0))
        .collect();
    ImageBuffer::new(img.width(), img.height(), data).expect("same shape")
}

pub fn apply_augmentations(
    patch: &ImageBuffer,
    cfg: &AugmentationConfig,
    seed: &SeedSpec,
) -> Result<ImageBuffer, PatchError> {
    apply_augmentations_traced(patch, cfg, seed).map(|(img, _)| img)
}

/// Runs the chain in fixed order:
///
/// 1. bilinear resize to `target_size`;
/// 2. translation by integer `(dx, dy)`, each `below(2·max + 1) − max`
///    (only when configured);
/// 3. random crop at `(below(w − cw + 1), below(h − ch + 1))`, resized back
///    to `target_size` (only when configured);
/// 4. horizontal flip when `uniform() < hflip_prob` (always drawn);
/// 5. rotation by `uniform_range(−range, +range)` degrees about the centre,
///    constant 0 fill (always drawn);
/// 6. Gaussian noise, clamped to `[0, 1]` (only when configured);
/// 7. channel-wise normalization.
///
/// Draws are taken from `seed.rng()` in exactly this order.
pub fn apply_augmentations_traced(
    patch: &ImageBuffer,
    cfg: &AugmentationConfig,
    seed: &SeedSpec,
) -> Result<(ImageBuffer, AugmentationTrace), PatchError> {
    cfg.validate()?;
    let mut rng = seed.rng();
    let (tw, th) = cfg.target_size;
    let mut img = patch.resize(tw, th);

    let mut shift = None;
    if let Some(t) = cfg.translation {
        let span = 2 * t.max_shift as u64 + 1;
        let dx = rng.below(span) as i64 - t.max_shift as i64;
        let dy = rng.below(span) as i64 - t.max_shift as i64;
        img = translate(&img, dx, dy, t.fill, &mut rng);
        shift = Some((dx, dy));
    }

    let mut crop_origin = None;
    if let Some((cw, ch)) = cfg.random_crop {
        let x0 = rng.below((tw - cw + 1) as u64) as u32;
        let y0 = rng.below((th - ch + 1) as u64) as u32;
        img = img.crop(x0, y0, cw, ch)?.resize(tw, th);
        crop_origin = Some((x0, y0));
    }

    let flipped = rng.bernoulli(cfg.hflip_prob);
    if flipped {
        img = img.hflip();
    }

    let range = cfg.rotation_range_deg;
    let angle_deg = rng.uniform_range(-range, range);
    img = img.rotate(angle_deg, [0.0; 3]);

    if let Some(sigma) = cfg.noise_sigma {
        img = add_noise(&img, sigma, &mut rng);
    }

    let out = normalize(&img, cfg.normalize_mean, cfg.normalize_std);
    Ok((
        out,
        AugmentationTrace {
            shift,
            crop_origin,
            flipped,
            angle_deg,
        },
    ))
}
