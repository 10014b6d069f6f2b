//! Synthetic multimodal pair generation with exactly known ground truth:
//! a base scene, a nonlinear radiometric map emulating cross-modal
//! intensity relations, a planted geometric transform, and Gaussian noise.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{CfogError, Result};
use crate::image::{gaussian_convolve, Image};

/// Canvas margin around the output frame so warped samples stay on real
/// scene content for moderate displacements.
const CANVAS_MARGIN: usize = 32;

/// Base scene generators.
#[derive(Debug, Clone, PartialEq)]
pub enum Scene {
    Checkerboard { cell: usize },
    Blobs { count: usize },
    FilteredNoise { sigma: f64 },
    /// A caller-supplied raster (cropped or tiled to size).
    Loaded(std::path::PathBuf),
}

impl Scene {
    pub fn name(&self) -> &'static str {
        match self {
            Scene::Checkerboard { .. } => "checkerboard",
            Scene::Blobs { .. } => "blobs",
            Scene::FilteredNoise { .. } => "filtered-noise",
            Scene::Loaded(_) => "loaded",
        }
    }

    fn generate(&self, w: usize, h: usize, rng: &mut ChaCha8Rng) -> Result<Image> {
        match self {
            Scene::Checkerboard { cell } => {
                let cell = (*cell).max(2);
                Ok(Image::from_fn(w, h, |x, y| {
                    if ((x / cell) + (y / cell)) % 2 == 0 {
                        0.15
                    } else {
                        0.85
                    }
                }))
            }
            Scene::Blobs { count } => {
                let mut img = Image::filled(w, h, 0.5);
                for _ in 0..*count {
                    let cx: f64 = rng.random_range(0.0..w as f64);
                    let cy: f64 = rng.random_range(0.0..h as f64);
                    let sigma: f64 = rng.random_range(4.0..16.0);
                    let amp: f64 = rng.random_range(-0.5..0.5);
                    let r = (3.0 * sigma).ceil() as isize;
                    let inv = 1.0 / (2.0 * sigma * sigma);
                    let x0 = ((cx as isize) - r).max(0);
                    let x1 = ((cx as isize) + r).min(w as isize - 1);
                    let y0 = ((cy as isize) - r).max(0);
                    let y1 = ((cy as isize) + r).min(h as isize - 1);
                    for y in y0..=y1 {
                        for x in x0..=x1 {
                            let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                            let v = img.get(x as usize, y as usize) + amp * (-d2 * inv).exp();
                            img.set(x as usize, y as usize, v);
                        }
                    }
                }
                Ok(img.stretched())
            }
            Scene::FilteredNoise { sigma } => {
                let noise = Image::from_fn(w, h, |_, _| rng.random::<f64>());
                Ok(gaussian_convolve(&noise, sigma.max(0.5))?.stretched())
            }
            Scene::Loaded(path) => {
                let (img, _) = crate::io::load_image(path)?;
                if img.width() < w || img.height() < h {
                    return Err(CfogError::Param(format!(
                        "loaded scene {}x{} smaller than requested canvas {w}x{h}",
                        img.width(),
                        img.height()
                    )));
                }
                img.crop(0, 0, w, h)
            }
        }
    }
}

/// Pointwise intensity maps emulating nonlinear cross-modal relations.
#[derive(Debug, Clone, PartialEq)]
pub enum RadiometricMap {
    Identity,
    Inversion,
    Gamma(f64),
    /// Quantization to `L` evenly spaced levels.
    Quantize(usize),
    /// Independent random monotone/inverted remap per grid region.
    RegionRemap { grid: usize },
}

impl RadiometricMap {
    pub fn name(&self) -> &'static str {
        match self {
            RadiometricMap::Identity => "identity",
            RadiometricMap::Inversion => "inversion",
            RadiometricMap::Gamma(_) => "gamma",
            RadiometricMap::Quantize(_) => "quantize",
            RadiometricMap::RegionRemap { .. } => "region-remap",
        }
    }

    fn apply(&self, img: &Image, rng: &mut ChaCha8Rng) -> Image {
        match self {
            RadiometricMap::Identity => img.clone(),
            RadiometricMap::Inversion => {
                Image::from_fn(img.width(), img.height(), |x, y| 1.0 - img.get(x, y))
            }
            RadiometricMap::Gamma(g) => {
                let g = g.max(0.05);
                Image::from_fn(img.width(), img.height(), |x, y| {
                    img.get(x, y).clamp(0.0, 1.0).powf(g)
                })
            }
            RadiometricMap::Quantize(levels) => {
                let l = (*levels).max(2) as f64;
                Image::from_fn(img.width(), img.height(), |x, y| {
                    let q = (img.get(x, y).clamp(0.0, 1.0) * l).floor().min(l - 1.0);
                    q / (l - 1.0)
                })
            }
            RadiometricMap::RegionRemap { grid } => {
                let grid = (*grid).max(1);
                // Per region: gamma in [0.35, 2.8], half of them inverted.
                let mut gammas = Vec::with_capacity(grid * grid);
                let mut inverts = Vec::with_capacity(grid * grid);
                for _ in 0..grid * grid {
                    gammas.push(rng.random_range(0.35..2.8));
                    inverts.push(rng.random::<f64>() < 0.5);
                }
                let (w, h) = (img.width(), img.height());
                Image::from_fn(w, h, |x, y| {
                    let gx = (x * grid / w).min(grid - 1);
                    let gy = (y * grid / h).min(grid - 1);
                    let i = gy * grid + gx;
                    let v = img.get(x, y).clamp(0.0, 1.0).powf(gammas[i]);
                    if inverts[i] {
                        1.0 - v
                    } else {
                        v
                    }
                })
            }
        }
    }
}

/// Planted geometric transform, reference frame to sensed frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlantedTransform {
    Translation { dx: f64, dy: f64 },
    /// `x' = m[0] x + m[1] y + m[2]`, `y' = m[3] x + m[4] y + m[5]`.
    Affine([f64; 6]),
    /// Different affine on each side of a vertical split (local
    /// distortion stand-in).
    PiecewiseHalves {
        split_x: f64,
        left: [f64; 6],
        right: [f64; 6],
    },
}

fn apply_affine(m: &[f64; 6], x: f64, y: f64) -> (f64, f64) {
    (m[0] * x + m[1] * y + m[2], m[3] * x + m[4] * y + m[5])
}

fn invert_affine(m: &[f64; 6]) -> Result<[f64; 6]> {
    let det = m[0] * m[4] - m[1] * m[3];
    if det.abs() < 1e-12 {
        return Err(CfogError::Param("planted affine is singular".into()));
    }
    let ia = m[4] / det;
    let ib = -m[1] / det;
    let id = -m[3] / det;
    let ie = m[0] / det;
    Ok([
        ia,
        ib,
        -(ia * m[2] + ib * m[5]),
        id,
        ie,
        -(id * m[2] + ie * m[5]),
    ])
}

impl PlantedTransform {
    pub fn identity() -> PlantedTransform {
        PlantedTransform::Translation { dx: 0.0, dy: 0.0 }
    }

    /// Ground-truth mapping of a reference point into the sensed frame.
    pub fn map_ref_to_sen(&self, x: f64, y: f64) -> (f64, f64) {
        match self {
            PlantedTransform::Translation { dx, dy } => (x + dx, y + dy),
            PlantedTransform::Affine(m) => apply_affine(m, x, y),
            PlantedTransform::PiecewiseHalves { split_x, left, right } => {
                if x < *split_x {
                    apply_affine(left, x, y)
                } else {
                    apply_affine(right, x, y)
                }
            }
        }
    }

    /// Inverse mapping used during generation.
    fn map_sen_to_ref(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        match self {
            PlantedTransform::Translation { dx, dy } => Ok((x - dx, y - dy)),
            PlantedTransform::Affine(m) => {
                let inv = invert_affine(m)?;
                Ok(apply_affine(&inv, x, y))
            }
            PlantedTransform::PiecewiseHalves { split_x, left, right } => {
                let li = invert_affine(left)?;
                let cand = apply_affine(&li, x, y);
                if cand.0 < *split_x {
                    Ok(cand)
                } else {
                    let ri = invert_affine(right)?;
                    Ok(apply_affine(&ri, x, y))
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PlantedTransform::Translation { .. } => "translation",
            PlantedTransform::Affine(_) => "affine",
            PlantedTransform::PiecewiseHalves { .. } => "piecewise",
        }
    }
}

/// Full recipe for one synthetic pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPairSpec {
    pub width: usize,
    pub height: usize,
    pub scene: Scene,
    pub radiometric: RadiometricMap,
    /// Gaussian noise variance, normalized intensity units, `[0, 0.01]`.
    pub noise_variance: f64,
    pub transform: PlantedTransform,
}

impl SyntheticPairSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width < 16 || self.height < 16 {
            return Err(CfogError::Param("synthetic frames must be >= 16 px".into()));
        }
        if !(0.0..=0.01).contains(&self.noise_variance) {
            return Err(CfogError::Param(format!(
                "noise variance must lie in [0, 0.01], got {}",
                self.noise_variance
            )));
        }
        Ok(())
    }

    /// Short label used in report rows.
    pub fn label(&self) -> String {
        format!(
            "{}+{}+{}",
            self.scene.name(),
            self.radiometric.name(),
            self.transform.name()
        )
    }
}

/// A generated pair with its exact ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticPair {
    pub reference: Image,
    pub sensed: Image,
    pub truth: PlantedTransform,
}

/// Generates a reference/sensed pair. Deterministic for a given
/// `(spec, seed)`: the scene, per-region remaps and the noise field all
/// draw from one seeded stream.
pub fn generate_pair(spec: &SyntheticPairSpec, seed: u64) -> Result<SyntheticPair> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = CANVAS_MARGIN;
    let (cw, ch) = (spec.width + 2 * m, spec.height + 2 * m);
    let base = spec.scene.generate(cw, ch, &mut rng)?;
    let mapped = spec.radiometric.apply(&base, &mut rng);

    let reference = base.crop(m, m, spec.width, spec.height)?;
    let mut sensed = Image::zeros(spec.width, spec.height);
    for y in 0..spec.height {
        for x in 0..spec.width {
            let (rx, ry) = spec.transform.map_sen_to_ref(x as f64, y as f64)?;
            let v = mapped.sample_bilinear_clamped(rx + m as f64, ry + m as f64);
            sensed.set(x, y, v);
        }
    }
    if spec.noise_variance > 0.0 {
        let std = spec.noise_variance.sqrt();
        for v in sensed.pixels_mut() {
            let n: f64 = rng.sample(StandardNormal);
            *v = (*v + std * n).clamp(0.0, 1.0);
        }
    }
    Ok(SyntheticPair {
        reference,
        sensed,
        truth: spec.transform,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_spec() -> SyntheticPairSpec {
        SyntheticPairSpec {
            width: 96,
            height: 96,
            scene: Scene::FilteredNoise { sigma: 2.0 },
            radiometric: RadiometricMap::Identity,
            noise_variance: 0.0,
            transform: PlantedTransform::identity(),
        }
    }

    #[test]
    fn identity_spec_reproduces_reference() {
        let pair = generate_pair(&base_spec(), 7).unwrap();
        assert_eq!(pair.reference.pixels(), pair.sensed.pixels());
    }

    #[test]
    fn inversion_map_flips_intensities() {
        let spec = SyntheticPairSpec {
            radiometric: RadiometricMap::Inversion,
            ..base_spec()
        };
        let pair = generate_pair(&spec, 7).unwrap();
        for i in 0..pair.reference.pixel_count() {
            let want = 1.0 - pair.reference.pixels()[i];
            assert!((pair.sensed.pixels()[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn integer_translation_shifts_content_exactly() {
        let spec = SyntheticPairSpec {
            transform: PlantedTransform::Translation { dx: 5.0, dy: -3.0 },
            ..base_spec()
        };
        let pair = generate_pair(&spec, 11).unwrap();
        for y in 10..86 {
            for x in 10..86 {
                let want = pair.reference.get(x - 5, y + 3);
                assert!((pair.sensed.get(x, y) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SyntheticPairSpec {
            scene: Scene::Blobs { count: 30 },
            radiometric: RadiometricMap::RegionRemap { grid: 3 },
            noise_variance: 0.005,
            transform: PlantedTransform::Translation { dx: 2.0, dy: 1.0 },
            ..base_spec()
        };
        let a = generate_pair(&spec, 42).unwrap();
        let b = generate_pair(&spec, 42).unwrap();
        assert_eq!(a.reference.pixels(), b.reference.pixels());
        assert_eq!(a.sensed.pixels(), b.sensed.pixels());
        let c = generate_pair(&spec, 43).unwrap();
        assert_ne!(a.sensed.pixels(), c.sensed.pixels());
    }

    #[test]
    fn affine_truth_roundtrips() {
        let t = PlantedTransform::Affine([1.01, 0.03, 4.0, -0.02, 0.99, -2.5]);
        let (sx, sy) = t.map_ref_to_sen(40.0, 60.0);
        let (rx, ry) = t.map_sen_to_ref(sx, sy).unwrap();
        assert!((rx - 40.0).abs() < 1e-9);
        assert!((ry - 60.0).abs() < 1e-9);
    }

    #[test]
    fn noise_variance_bounds_are_enforced() {
        let spec = SyntheticPairSpec {
            noise_variance: 0.02,
            ..base_spec()
        };
        assert!(generate_pair(&spec, 1).is_err());
    }

    #[test]
    fn quantize_produces_limited_levels() {
        let spec = SyntheticPairSpec {
            radiometric: RadiometricMap::Quantize(8),
            ..base_spec()
        };
        let pair = generate_pair(&spec, 3).unwrap();
        let mut levels: Vec<u64> = pair
            .sensed
            .pixels()
            .iter()
            .map(|v| (v * 7.0).round() as u64)
            .collect();
        levels.sort_unstable();
        levels.dedup();
        assert!(levels.len() <= 8);
    }
}
