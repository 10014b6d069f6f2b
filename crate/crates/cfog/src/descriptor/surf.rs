//! Simplified upright SURF: a 20x20 block around each pixel split into
//! 4x4 sub-regions of 5x5 sample points; each sub-region contributes
//! `(sum |dx|, sum |dy|)` of Haar wavelet responses read off an integral
//! image, for 32 dimensions total. Keeping only the absolute sums makes
//! the descriptor robust to intensity inversion.

use crate::error::{CfogError, Result};
use crate::image::{Image, IntegralImage};
use crate::parallel::for_each_row_chunk;
use crate::volume::FeatureVolume;

use super::NORM_FLOOR;

/// Sub-regions per block side (fixed).
pub const SUBREGION_GRID: usize = 4;
/// Sample points per sub-region side (fixed).
pub const SUBREGION_SIZE: usize = 5;
/// Block half-side: the block spans 20x20 pixels around the center.
pub const BLOCK_RADIUS: usize = SUBREGION_GRID * SUBREGION_SIZE / 2;
/// Descriptor length: 4 x 4 sub-regions x 2 absolute sums.
pub const DESCRIPTOR_DIMS: usize = SUBREGION_GRID * SUBREGION_GRID * 2;

/// Parameters of the simplified upright SURF descriptor. The block
/// geometry is fixed; only the Haar wavelet half-size varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SurfParams {
    /// Haar wavelet half-size in pixels; the box filters span
    /// `2*haar_scale` per side.
    pub haar_scale: usize,
}

impl Default for SurfParams {
    fn default() -> Self {
        SurfParams { haar_scale: 2 }
    }
}

impl SurfParams {
    pub fn validate(&self) -> Result<()> {
        if self.haar_scale == 0 {
            return Err(CfogError::Param("surf haar_scale must be >= 1".into()));
        }
        Ok(())
    }

    pub fn footprint(&self) -> usize {
        BLOCK_RADIUS + self.haar_scale
    }
}

/// Builds the simplified U-SURF volume. Pixels whose block footprint
/// leaves the image keep zero descriptors.
pub fn build_usurf(img: &Image, p: &SurfParams) -> Result<FeatureVolume> {
    p.validate()?;
    let (w, h) = (img.width(), img.height());
    let span = 2 * BLOCK_RADIUS;
    if w <= span || h <= span {
        return Err(CfogError::Param(format!(
            "image {w}x{h} too small for a {span}x{span} block"
        )));
    }

    let ii = IntegralImage::build(img);
    let s = p.haar_scale as isize;
    let fp = p.footprint();

    let mut vol = FeatureVolume::zeros(w, h, DESCRIPTOR_DIMS);
    let row_len = w * DESCRIPTOR_DIMS;
    for_each_row_chunk(vol.data_mut(), row_len, |y, row| {
        if y < fp || y >= h - fp {
            return;
        }
        for x in fp..w - fp {
            let desc = &mut row[x * DESCRIPTOR_DIMS..(x + 1) * DESCRIPTOR_DIMS];
            let bx0 = x as isize - BLOCK_RADIUS as isize;
            let by0 = y as isize - BLOCK_RADIUS as isize;
            for sy in 0..SUBREGION_GRID {
                for sx in 0..SUBREGION_GRID {
                    let mut sum_abs_dx = 0.0;
                    let mut sum_abs_dy = 0.0;
                    for py in 0..SUBREGION_SIZE {
                        for px in 0..SUBREGION_SIZE {
                            let cx = bx0 + (sx * SUBREGION_SIZE + px) as isize;
                            let cy = by0 + (sy * SUBREGION_SIZE + py) as isize;
                            let (dx, dy) = haar_responses(&ii, cx, cy, s);
                            sum_abs_dx += dx.abs();
                            sum_abs_dy += dy.abs();
                        }
                    }
                    let base = (sy * SUBREGION_GRID + sx) * 2;
                    desc[base] = sum_abs_dx;
                    desc[base + 1] = sum_abs_dy;
                }
            }
            let norm = desc.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > NORM_FLOOR {
                desc.iter_mut().for_each(|v| *v /= norm);
            } else {
                desc.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    });

    Ok(vol)
}

/// Haar wavelet responses at a sample point: right-minus-left and
/// bottom-minus-top box sums of half-size `s`.
#[inline]
fn haar_responses(ii: &IntegralImage, x: isize, y: isize, s: isize) -> (f64, f64) {
    let dx = ii.rect_sum_clamped(x, y - s, x + s, y + s) - ii.rect_sum_clamped(x - s, y - s, x, y + s);
    let dy = ii.rect_sum_clamped(x - s, y, x + s, y + s) - ii.rect_sum_clamped(x - s, y - s, x + s, y);
    (dx, dy)
}
