//! Block-partitioned Harris detection: the reference image is divided
//! into a regular grid, one chip is read per grid cell, and the strongest
//! corner responses of each chip are kept. The grid keeps feature points
//! spread over the whole frame instead of clustering on the busiest area.

use crate::error::{CfogError, Result};
use crate::image::{compute_gradients, gaussian_convolve, Image};
use crate::parallel::ordered_map;

/// Harris detection parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarrisParams {
    /// Grid divisions per axis; one chip per grid cell.
    pub grid_n: usize,
    /// Points kept per chip.
    pub k_per_chip: usize,
    /// Chip side length in pixels.
    pub chip_size: usize,
    /// Harris response constant `k` in `det(M) - k*trace(M)^2`.
    pub harris_k: f64,
    /// Response floor below which candidates are discarded.
    pub min_response: f64,
    /// Minimum distance between points kept in one chip.
    pub min_separation: usize,
}

impl Default for HarrisParams {
    fn default() -> Self {
        HarrisParams {
            grid_n: 10,
            k_per_chip: 2,
            chip_size: 60,
            harris_k: 0.04,
            min_response: 1e-6,
            min_separation: 8,
        }
    }
}

impl HarrisParams {
    pub fn validate(&self) -> Result<()> {
        if self.grid_n < 1 {
            return Err(CfogError::Param("harris grid_n must be >= 1".into()));
        }
        if self.k_per_chip < 1 {
            return Err(CfogError::Param("harris k_per_chip must be >= 1".into()));
        }
        if self.chip_size < 16 {
            return Err(CfogError::Param(format!(
                "harris chip_size must be >= 16, got {}",
                self.chip_size
            )));
        }
        if self.min_response < 0.0 {
            return Err(CfogError::Param("harris min_response must be >= 0".into()));
        }
        Ok(())
    }
}

/// A detected corner in reference-image pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeaturePoint {
    pub x: usize,
    pub y: usize,
    pub response: f64,
}

/// Standard deviation of the structure-tensor window.
const TENSOR_SIGMA: f64 = 1.5;
/// Chip border skipped before non-max suppression; keeps convolution
/// edge effects out of the candidate set.
const CHIP_MARGIN: usize = 2;

/// Detects up to `grid_n^2 * k_per_chip` corners: a `chip_size` square
/// chip is read at the center of every grid cell, Harris responses are
/// non-max suppressed per chip, and the `k_per_chip` strongest survivors
/// at least `min_separation` apart are kept.
pub fn detect_harris(img: &Image, p: &HarrisParams) -> Result<Vec<FeaturePoint>> {
    p.validate()?;
    let (w, h) = (img.width(), img.height());
    if w <= p.chip_size || h <= p.chip_size {
        return Err(CfogError::Param(format!(
            "image {w}x{h} not larger than one {}px chip",
            p.chip_size
        )));
    }

    // Chip centers at grid cell centers; chips clamp to the image.
    let mut chip_rects = Vec::with_capacity(p.grid_n * p.grid_n);
    for gy in 0..p.grid_n {
        for gx in 0..p.grid_n {
            let cx = ((gx as f64 + 0.5) * w as f64 / p.grid_n as f64).round() as usize;
            let cy = ((gy as f64 + 0.5) * h as f64 / p.grid_n as f64).round() as usize;
            let x0 = cx.saturating_sub(p.chip_size / 2).min(w - p.chip_size);
            let y0 = cy.saturating_sub(p.chip_size / 2).min(h - p.chip_size);
            chip_rects.push((x0, y0));
        }
    }

    let params = *p;
    let per_chip: Vec<Vec<FeaturePoint>> = ordered_map(chip_rects, |(x0, y0)| {
        let chip = img
            .crop(x0, y0, params.chip_size, params.chip_size)
            .expect("chip rect clamped into image");
        chip_points(&chip, &params)
            .into_iter()
            .map(|fp| FeaturePoint {
                x: fp.x + x0,
                y: fp.y + y0,
                response: fp.response,
            })
            .collect()
    });

    // Overlapping chips on small images can nominate the same pixel twice.
    let mut seen = std::collections::HashSet::new();
    let mut points = Vec::new();
    for chunk in per_chip {
        for fp in chunk {
            if seen.insert((fp.x, fp.y)) {
                points.push(fp);
            }
        }
    }
    Ok(points)
}

/// Corner response `det(M) - k*trace(M)^2` from the Gaussian-windowed
/// structure tensor of central-difference gradients.
pub fn harris_response(img: &Image, harris_k: f64) -> Image {
    let g = compute_gradients(img);
    let (w, h) = (img.width(), img.height());
    let mut xx = Image::zeros(w, h);
    let mut yy = Image::zeros(w, h);
    let mut xy = Image::zeros(w, h);
    for i in 0..w * h {
        let gx = g.gx.pixels()[i];
        let gy = g.gy.pixels()[i];
        xx.pixels_mut()[i] = gx * gx;
        yy.pixels_mut()[i] = gy * gy;
        xy.pixels_mut()[i] = gx * gy;
    }
    let sxx = gaussian_convolve(&xx, TENSOR_SIGMA).expect("fixed sigma");
    let syy = gaussian_convolve(&yy, TENSOR_SIGMA).expect("fixed sigma");
    let sxy = gaussian_convolve(&xy, TENSOR_SIGMA).expect("fixed sigma");
    let mut r = Image::zeros(w, h);
    for i in 0..w * h {
        let a = sxx.pixels()[i];
        let b = syy.pixels()[i];
        let c = sxy.pixels()[i];
        let det = a * b - c * c;
        let trace = a + b;
        r.pixels_mut()[i] = det - harris_k * trace * trace;
    }
    r
}

fn chip_points(chip: &Image, p: &HarrisParams) -> Vec<FeaturePoint> {
    let response = harris_response(chip, p.harris_k);
    let (w, h) = (chip.width(), chip.height());

    // 3x3 non-max suppression, strict, inside the chip margin.
    let mut candidates = Vec::new();
    for y in CHIP_MARGIN..h - CHIP_MARGIN {
        for x in CHIP_MARGIN..w - CHIP_MARGIN {
            let r = response.get(x, y);
            if r < p.min_response {
                continue;
            }
            // Non-strict suppression: symmetric structures (checkerboard
            // junctions) produce response plateaus, and a strict test
            // would discard every plateau member. Ties are thinned by the
            // ordering and min-separation below.
            let mut is_max = true;
            'nms: for dy in -1i32..=1 {
                for dx in -1i32..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let n = response.get((x as i32 + dx) as usize, (y as i32 + dy) as usize);
                    if n > r {
                        is_max = false;
                        break 'nms;
                    }
                }
            }
            if is_max {
                candidates.push(FeaturePoint { x, y, response: r });
            }
        }
    }

    // Strongest first; position breaks exact ties for determinism.
    candidates.sort_by(|a, b| {
        b.response
            .partial_cmp(&a.response)
            .unwrap()
            .then_with(|| (a.y, a.x).cmp(&(b.y, b.x)))
    });

    let min_sep2 = (p.min_separation * p.min_separation) as f64;
    let mut kept: Vec<FeaturePoint> = Vec::with_capacity(p.k_per_chip);
    for cand in candidates {
        if kept.len() == p.k_per_chip {
            break;
        }
        let far_enough = kept.iter().all(|k| {
            let dx = k.x as f64 - cand.x as f64;
            let dy = k.y as f64 - cand.y as f64;
            dx * dx + dy * dy >= min_sep2
        });
        if far_enough {
            kept.push(cand);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checkerboard(size: usize, cell: usize) -> Image {
        Image::from_fn(size, size, |x, y| {
            if ((x / cell) + (y / cell)) % 2 == 0 {
                0.1
            } else {
                0.9
            }
        })
    }

    #[test]
    fn constant_image_yields_no_points() {
        let img = Image::filled(200, 200, 0.5);
        let pts = detect_harris(&img, &HarrisParams::default()).unwrap();
        assert!(pts.is_empty());
    }

    #[test]
    fn checkerboard_corners_land_on_junctions() {
        let cell = 20;
        let img = checkerboard(200, cell);
        let p = HarrisParams {
            grid_n: 5,
            k_per_chip: 2,
            chip_size: 40,
            ..HarrisParams::default()
        };
        let pts = detect_harris(&img, &p).unwrap();
        assert!(!pts.is_empty());
        for fp in &pts {
            // Nearest cell junction.
            let jx = ((fp.x as f64 / cell as f64).round() * cell as f64) - 0.5;
            let jy = ((fp.y as f64 / cell as f64).round() * cell as f64) - 0.5;
            let d = ((fp.x as f64 - jx).powi(2) + (fp.y as f64 - jy).powi(2)).sqrt();
            assert!(
                d <= 1.0 + 1e-9,
                "corner ({},{}) is {d:.2}px from a junction",
                fp.x,
                fp.y
            );
        }
    }

    #[test]
    fn default_grid_caps_at_two_hundred_points() {
        let img = checkerboard(700, 10);
        let p = HarrisParams::default();
        let pts = detect_harris(&img, &p).unwrap();
        assert!(pts.len() <= p.grid_n * p.grid_n * p.k_per_chip);
        assert!(pts.len() <= 200);
        assert!(pts.len() >= 100, "textured image should fill most chips");
    }

    #[test]
    fn grid_spreads_points_across_rows_and_columns() {
        let img = checkerboard(400, 16);
        let p = HarrisParams {
            grid_n: 4,
            k_per_chip: 1,
            chip_size: 60,
            ..HarrisParams::default()
        };
        let pts = detect_harris(&img, &p).unwrap();
        for band in 0..4 {
            let lo = band * 100;
            let hi = lo + 100;
            assert!(
                pts.iter().any(|fp| fp.y >= lo && fp.y < hi),
                "no point in row band {band}"
            );
            assert!(
                pts.iter().any(|fp| fp.x >= lo && fp.x < hi),
                "no point in column band {band}"
            );
        }
    }

    #[test]
    fn min_separation_is_respected() {
        let img = checkerboard(200, 8);
        let p = HarrisParams {
            grid_n: 2,
            k_per_chip: 8,
            chip_size: 80,
            min_separation: 12,
            ..HarrisParams::default()
        };
        let pts = detect_harris(&img, &p).unwrap();
        // Only within-chip pairs are constrained; chips here do not overlap.
        for (i, a) in pts.iter().enumerate() {
            for b in pts.iter().skip(i + 1) {
                let same_chip = (a.x / 100 == b.x / 100) && (a.y / 100 == b.y / 100);
                if same_chip {
                    let d = ((a.x as f64 - b.x as f64).powi(2)
                        + (a.y as f64 - b.y as f64).powi(2))
                    .sqrt();
                    assert!(d >= 12.0);
                }
            }
        }
    }

    #[test]
    fn too_small_image_is_rejected() {
        let img = Image::filled(50, 50, 0.5);
        assert!(detect_harris(&img, &HarrisParams::default()).is_err());
    }
}
