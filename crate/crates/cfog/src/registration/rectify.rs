//! Inverse-mapping rectification: every output (reference-frame) pixel is
//! mapped into the sensed frame by its containing TIN triangle's affine
//! (or by the fallback polynomial outside the hull) and bilinearly
//! resampled.

use crate::error::Result;
use crate::image::Image;
use crate::parallel::ordered_map_indices;

use super::polynomial::PolynomialModel;
use super::tin::Tin;

/// How each output pixel was produced.
pub const MASK_UNMAPPED: u8 = 0;
pub const MASK_TIN: u8 = 1;
pub const MASK_FALLBACK: u8 = 2;

/// Rectified raster plus a per-pixel provenance mask.
#[derive(Debug, Clone)]
pub struct RectifyResult {
    pub image: Image,
    /// One entry per output pixel: unmapped (sensed sample out of
    /// bounds), TIN-mapped, or fallback-mapped.
    pub mask: Vec<u8>,
    /// Fraction of output pixels inside the TIN hull.
    pub tin_fraction: f64,
    /// Fraction of output pixels with a valid sensed sample.
    pub mapped_fraction: f64,
}

/// Tolerance on barycentric containment; a hair of overlap on shared
/// edges beats seams from floating-point gaps.
const BARY_EPS: f64 = 1e-9;

/// Sensed positions within this distance outside the raster are snapped
/// onto the border instead of being dropped, so identity-like mappings
/// do not lose edge pixels to rounding.
const BOUNDARY_EPS: f64 = 1e-6;

fn snap_to_raster(v: f64, len: usize) -> f64 {
    let hi = (len - 1) as f64;
    if v < 0.0 && v >= -BOUNDARY_EPS {
        0.0
    } else if v > hi && v <= hi + BOUNDARY_EPS {
        hi
    } else {
        v
    }
}

/// Uniform-grid spatial index over triangle bounding boxes. Buckets keep
/// ascending triangle ids, so shared-edge lookups resolve to the lower
/// index deterministically.
struct TriGrid {
    x0: f64,
    y0: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl TriGrid {
    fn build(tin: &Tin) -> TriGrid {
        let mut min_x = f64::INFINITY;
        let mut max_x = f64::NEG_INFINITY;
        let mut min_y = f64::INFINITY;
        let mut max_y = f64::NEG_INFINITY;
        for v in &tin.vertices {
            min_x = min_x.min(v.ref_xy.0);
            max_x = max_x.max(v.ref_xy.0);
            min_y = min_y.min(v.ref_xy.1);
            max_y = max_y.max(v.ref_xy.1);
        }
        let span_x = (max_x - min_x).max(1.0);
        let span_y = (max_y - min_y).max(1.0);
        let target = (tin.triangles.len() as f64).sqrt().ceil().max(1.0);
        let cell = (span_x.max(span_y) / target).max(1.0);
        let nx = (span_x / cell).ceil() as usize + 1;
        let ny = (span_y / cell).ceil() as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for (ti, tri) in tin.triangles.iter().enumerate() {
            let xs = tri.map(|v| tin.vertices[v].ref_xy.0);
            let ys = tri.map(|v| tin.vertices[v].ref_xy.1);
            let bx0 = (((xs.iter().cloned().fold(f64::INFINITY, f64::min) - min_x) / cell)
                .floor() as isize)
                .clamp(0, nx as isize - 1) as usize;
            let bx1 = (((xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - min_x) / cell)
                .floor() as isize)
                .clamp(0, nx as isize - 1) as usize;
            let by0 = (((ys.iter().cloned().fold(f64::INFINITY, f64::min) - min_y) / cell)
                .floor() as isize)
                .clamp(0, ny as isize - 1) as usize;
            let by1 = (((ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - min_y) / cell)
                .floor() as isize)
                .clamp(0, ny as isize - 1) as usize;
            for by in by0..=by1 {
                for bx in bx0..=bx1 {
                    buckets[by * nx + bx].push(ti as u32);
                }
            }
        }
        TriGrid {
            x0: min_x,
            y0: min_y,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    /// Lowest-index triangle containing the point, if any.
    fn locate(&self, tin: &Tin, x: f64, y: f64) -> Option<usize> {
        let bx = ((x - self.x0) / self.cell).floor();
        let by = ((y - self.y0) / self.cell).floor();
        if bx < 0.0 || by < 0.0 || bx >= self.nx as f64 || by >= self.ny as f64 {
            return None;
        }
        let bucket = &self.buckets[by as usize * self.nx + bx as usize];
        bucket
            .iter()
            .map(|&ti| ti as usize)
            .find(|&ti| point_in_triangle(tin, ti, x, y))
    }
}

fn point_in_triangle(tin: &Tin, ti: usize, x: f64, y: f64) -> bool {
    let [ia, ib, ic] = tin.triangles[ti];
    let a = tin.vertices[ia].ref_xy;
    let b = tin.vertices[ib].ref_xy;
    let c = tin.vertices[ic].ref_xy;
    let det = (b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1);
    if det.abs() < 1e-30 {
        return false;
    }
    let u = ((x - a.0) * (c.1 - a.1) - (c.0 - a.0) * (y - a.1)) / det;
    let v = ((b.0 - a.0) * (y - a.1) - (x - a.0) * (b.1 - a.1)) / det;
    u >= -BARY_EPS && v >= -BARY_EPS && u + v <= 1.0 + BARY_EPS
}

/// Rectifies the sensed image into a `out_width x out_height` reference
/// frame. Sensed samples falling outside the raster produce fill value 0
/// and an unmapped mask entry.
pub fn rectify(
    sensed: &Image,
    tin: &Tin,
    fallback: &PolynomialModel,
    out_width: usize,
    out_height: usize,
) -> Result<RectifyResult> {
    let grid = TriGrid::build(tin);

    // Rows are independent pure reads of the TIN and source image.
    let rows: Vec<(Vec<f64>, Vec<u8>)> = ordered_map_indices(out_height, |y| {
        let mut values = vec![0.0f64; out_width];
        let mut mask = vec![MASK_UNMAPPED; out_width];
        for x in 0..out_width {
            let (fx, fy) = (x as f64, y as f64);
            let (sx, sy, source) = match grid.locate(tin, fx, fy) {
                Some(ti) => {
                    let (sx, sy) = tin.apply(ti, fx, fy);
                    (sx, sy, MASK_TIN)
                }
                None => {
                    let (sx, sy) = fallback.predict(fx, fy);
                    (sx, sy, MASK_FALLBACK)
                }
            };
            let sx = snap_to_raster(sx, sensed.width());
            let sy = snap_to_raster(sy, sensed.height());
            match sensed.sample_bilinear(sx, sy) {
                Some(v) => {
                    values[x] = v;
                    mask[x] = source;
                }
                None => {
                    values[x] = 0.0;
                    mask[x] = MASK_UNMAPPED;
                }
            }
        }
        (values, mask)
    });

    let mut image = Image::zeros(out_width, out_height);
    let mut mask = Vec::with_capacity(out_width * out_height);
    for (y, (values, row_mask)) in rows.into_iter().enumerate() {
        for (x, v) in values.into_iter().enumerate() {
            image.set(x, y, v);
        }
        mask.extend(row_mask);
    }
    let total = (out_width * out_height) as f64;
    let tin_fraction = mask.iter().filter(|&&m| m == MASK_TIN).count() as f64 / total;
    let mapped_fraction = mask.iter().filter(|&&m| m != MASK_UNMAPPED).count() as f64 / total;
    Ok(RectifyResult {
        image,
        mask,
        tin_fraction,
        mapped_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control_point::ControlPoint;
    use crate::registration::polynomial::fit_polynomial;
    use crate::registration::tin::build_tin;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn textured(seed: u64, size: usize) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Image::from_fn(size, size, |_, _| rng.random::<f64>());
        crate::image::gaussian_convolve(&noise, 2.0).unwrap().stretched()
    }

    fn grid_cps(size: usize, step: usize, map: impl Fn(f64, f64) -> (f64, f64)) -> Vec<ControlPoint> {
        let mut cps = Vec::new();
        let mut y = 0;
        while y < size {
            let mut x = 0;
            while x < size {
                let (sx, sy) = map(x as f64, y as f64);
                cps.push(ControlPoint::new((x as f64, y as f64), (sx, sy), 1.0));
                x += step;
            }
            y += step;
        }
        cps
    }

    #[test]
    fn identity_cps_reproduce_the_sensed_image() {
        let img = textured(1, 96);
        let cps = grid_cps(96, 24, |x, y| (x, y));
        let tin = build_tin(&cps).unwrap();
        let fallback = fit_polynomial(&cps, 1).unwrap();
        let out = rectify(&img, &tin, &fallback, 96, 96).unwrap();
        for y in 0..96 {
            for x in 0..96 {
                assert!(
                    (out.image.get(x, y) - img.get(x, y)).abs() < 1e-9,
                    "pixel ({x},{y})"
                );
            }
        }
        assert!(out.mapped_fraction > 0.99);
    }

    #[test]
    fn tin_matches_direct_affine_warp_inside_hull() {
        let img = textured(2, 128);
        let affine = |x: f64, y: f64| (0.97 * x + 0.04 * y + 3.0, -0.03 * x + 1.02 * y + 1.5);
        let cps = grid_cps(128, 16, affine);
        let tin = build_tin(&cps).unwrap();
        let fallback = fit_polynomial(&cps, 1).unwrap();
        let out = rectify(&img, &tin, &fallback, 128, 128).unwrap();
        for y in 0..128usize {
            for x in 0..128usize {
                if out.mask[y * 128 + x] != MASK_TIN {
                    continue;
                }
                let (sx, sy) = affine(x as f64, y as f64);
                if let Some(direct) = img.sample_bilinear(sx, sy) {
                    assert!(
                        (out.image.get(x, y) - direct).abs() <= 1e-6,
                        "pixel ({x},{y}): {} vs {direct}",
                        out.image.get(x, y)
                    );
                }
            }
        }
    }

    #[test]
    fn transform_is_continuous_across_shared_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cps: Vec<ControlPoint> = (0..25)
            .map(|_| {
                let x = rng.random_range(0.0..100.0);
                let y = rng.random_range(0.0..100.0);
                ControlPoint::new(
                    (x, y),
                    (x + rng.random_range(-3.0..3.0), y + rng.random_range(-3.0..3.0)),
                    1.0,
                )
            })
            .collect();
        let tin = build_tin(&cps).unwrap();
        // Every shared edge: both adjacent affines agree along it.
        for (i, ta) in tin.triangles.iter().enumerate() {
            for (j, tb) in tin.triangles.iter().enumerate().skip(i + 1) {
                let shared: Vec<usize> =
                    ta.iter().filter(|v| tb.contains(v)).cloned().collect();
                if shared.len() != 2 {
                    continue;
                }
                let a = tin.vertices[shared[0]].ref_xy;
                let b = tin.vertices[shared[1]].ref_xy;
                for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
                    let x = a.0 + t * (b.0 - a.0);
                    let y = a.1 + t * (b.1 - a.1);
                    let pa = tin.apply(i, x, y);
                    let pb = tin.apply(j, x, y);
                    assert!((pa.0 - pb.0).abs() < 1e-9);
                    assert!((pa.1 - pb.1).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn out_of_bounds_samples_fill_zero_and_mask() {
        let img = textured(4, 64);
        // Shift far enough that part of the output reads outside.
        let cps = grid_cps(64, 16, |x, y| (x + 40.0, y));
        let tin = build_tin(&cps).unwrap();
        let fallback = fit_polynomial(&cps, 1).unwrap();
        let out = rectify(&img, &tin, &fallback, 64, 64).unwrap();
        assert!(out.mapped_fraction < 1.0);
        for y in 0..64usize {
            for x in 0..64usize {
                if out.mask[y * 64 + x] == MASK_UNMAPPED {
                    assert_eq!(out.image.get(x, y), 0.0);
                }
            }
        }
    }

    #[test]
    fn hull_exterior_uses_fallback() {
        let img = textured(5, 96);
        // CPs only in the central area; corners fall outside the hull.
        let mut cps = Vec::new();
        for y in [30.0f64, 50.0, 70.0] {
            for x in [30.0f64, 50.0, 70.0] {
                cps.push(ControlPoint::new((x, y), (x + 2.0, y - 1.0), 1.0));
            }
        }
        let tin = build_tin(&cps).unwrap();
        let fallback = fit_polynomial(&cps, 1).unwrap();
        let out = rectify(&img, &tin, &fallback, 96, 96).unwrap();
        // (0, 10) sits outside the hull and its fallback sample (2, 9) is
        // inside the sensed raster.
        assert_eq!(out.mask[10 * 96], MASK_FALLBACK);
        let (sx, sy) = fallback.predict(0.0, 10.0);
        let expect = img.sample_bilinear(sx, sy).unwrap();
        assert!((out.image.get(0, 10) - expect).abs() < 1e-12);
        assert!(out.tin_fraction > 0.0 && out.tin_fraction < 1.0);
    }
}
