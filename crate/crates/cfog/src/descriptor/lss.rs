//! Local self-similarity: each pixel's patch is compared against every
//! patch in a surrounding region, the SSD surface is mapped through a
//! normalized exponential, and the surface is pooled into log-polar bins
//! by taking the per-bin maximum.

use std::f64::consts::TAU;

use crate::error::{CfogError, Result};
use crate::image::{Image, IntegralImage};
use crate::parallel::ordered_map;
use crate::volume::FeatureVolume;

/// Parameters of the local self-similarity descriptor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LssParams {
    /// Patch half-side; default 2 gives 5x5 patches.
    pub patch_radius: usize,
    /// Region half-side; default 20 gives a 41x41 comparison region.
    pub region_radius: usize,
    /// Radial log-polar bins.
    pub radial_bins: usize,
    /// Angular log-polar bins.
    pub angular_bins: usize,
    /// Photometric noise floor for the exponential normalization, in
    /// squared normalized-intensity units. The default corresponds to a
    /// variance of 25 gray levels on an 8-bit scale.
    pub var_noise: f64,
}

impl Default for LssParams {
    fn default() -> Self {
        LssParams {
            patch_radius: 2,
            region_radius: 20,
            radial_bins: 3,
            angular_bins: 8,
            var_noise: 25.0 / (255.0 * 255.0),
        }
    }
}

impl LssParams {
    pub fn validate(&self) -> Result<()> {
        if self.region_radius <= self.patch_radius {
            return Err(CfogError::Param(format!(
                "lss region_radius ({}) must exceed patch_radius ({})",
                self.region_radius, self.patch_radius
            )));
        }
        if self.radial_bins == 0 || self.angular_bins == 0 {
            return Err(CfogError::Param("lss bin counts must be >= 1".into()));
        }
        if self.var_noise < 0.0 {
            return Err(CfogError::Param("lss var_noise must be >= 0".into()));
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.radial_bins * self.angular_bins
    }

    /// Pixels of margin a pixel needs on every side for its descriptor.
    pub fn footprint(&self) -> usize {
        self.region_radius + self.patch_radius
    }

    /// Log-polar bin of a region offset, or `None` for the center and for
    /// offsets outside the inscribed disc.
    fn bin_of(&self, dx: isize, dy: isize) -> Option<usize> {
        let r = ((dx * dx + dy * dy) as f64).sqrt();
        if r == 0.0 || r > self.region_radius as f64 {
            return None;
        }
        let rmax = self.region_radius as f64;
        let rb = ((self.radial_bins as f64 * (1.0 + r).ln() / (1.0 + rmax).ln()) as usize)
            .min(self.radial_bins - 1);
        let theta = (dy as f64).atan2(dx as f64).rem_euclid(TAU);
        let ab = ((self.angular_bins as f64 * theta / TAU) as usize).min(self.angular_bins - 1);
        Some(rb * self.angular_bins + ab)
    }
}

/// Self-similarity value from a patch SSD: `exp(-ssd / denom)` with the
/// denominator floored by the noise variance. A vanishing denominator
/// (flat area, zero noise floor) degenerates to an indicator on ssd == 0.
#[inline]
fn similarity(ssd: f64, var_auto: f64, var_noise: f64) -> f64 {
    let denom = var_auto.max(var_noise);
    if denom < 1e-300 {
        return if ssd == 0.0 { 1.0 } else { 0.0 };
    }
    (-ssd / denom).exp()
}

/// Builds the LSS feature volume. Pixels whose region-plus-patch footprint
/// leaves the image keep zero descriptors.
pub fn build_lss(img: &Image, p: &LssParams) -> Result<FeatureVolume> {
    p.validate()?;
    let fp = p.footprint();
    let (w, h) = (img.width(), img.height());
    if w <= 2 * fp || h <= 2 * fp {
        return Err(CfogError::Param(format!(
            "image {w}x{h} too small for lss footprint {fp}"
        )));
    }

    // Patch contrast: max SSD over the 8-neighborhood patches.
    let neighbor_offsets: [(isize, isize); 8] = [
        (-1, -1),
        (0, -1),
        (1, -1),
        (-1, 0),
        (1, 0),
        (-1, 1),
        (0, 1),
        (1, 1),
    ];
    let mut var_auto = Image::zeros(w, h);
    for &(dx, dy) in &neighbor_offsets {
        let ssd = offset_ssd_plane(img, dx, dy, p.patch_radius, fp);
        for y in fp..h - fp {
            for x in fp..w - fp {
                let cur = var_auto.get(x, y);
                var_auto.set(x, y, cur.max(ssd.get(x, y)));
            }
        }
    }

    // Offsets grouped per log-polar bin; each bin pools its offsets' SSD
    // planes by maximum similarity, independently of the other bins.
    let mut groups: Vec<Vec<(isize, isize)>> = vec![Vec::new(); p.dims()];
    let rr = p.region_radius as isize;
    for dy in -rr..=rr {
        for dx in -rr..=rr {
            if let Some(b) = p.bin_of(dx, dy) {
                groups[b].push((dx, dy));
            }
        }
    }

    let params = *p;
    let planes: Vec<Image> = ordered_map(groups, |offsets| {
        let mut plane = Image::zeros(w, h);
        for (dx, dy) in offsets {
            let ssd = offset_ssd_plane(img, dx, dy, params.patch_radius, fp);
            for y in fp..h - fp {
                for x in fp..w - fp {
                    let s = similarity(ssd.get(x, y), var_auto.get(x, y), params.var_noise);
                    if s > plane.get(x, y) {
                        plane.set(x, y, s);
                    }
                }
            }
        }
        plane
    });

    let mut vol = FeatureVolume::from_channel_planes(w, h, &planes);
    stretch_pixels(&mut vol);
    Ok(vol)
}

/// SSD between the patch at every valid pixel and the patch displaced by
/// `(dx, dy)`, computed as a box sum over the squared difference image.
fn offset_ssd_plane(img: &Image, dx: isize, dy: isize, patch_radius: usize, fp: usize) -> Image {
    let (w, h) = (img.width(), img.height());
    let mut diff2 = Image::zeros(w, h);
    for y in 0..h as isize {
        let sy = y + dy;
        if sy < 0 || sy >= h as isize {
            continue;
        }
        for x in 0..w as isize {
            let sx = x + dx;
            if sx < 0 || sx >= w as isize {
                continue;
            }
            let d = img.get(x as usize, y as usize) - img.get(sx as usize, sy as usize);
            diff2.set(x as usize, y as usize, d * d);
        }
    }
    let ii = IntegralImage::build(&diff2);
    let pr = patch_radius;
    let mut out = Image::zeros(w, h);
    for y in fp..h - fp {
        for x in fp..w - fp {
            out.set(x, y, ii.rect_sum(x - pr, y - pr, x + pr + 1, y + pr + 1));
        }
    }
    out
}

/// Per-pixel linear stretch to [0, 1]; constant vectors become all zeros.
fn stretch_pixels(vol: &mut FeatureVolume) {
    let dims = vol.dims();
    for px in vol.data_mut().chunks_exact_mut(dims) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in px.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let span = hi - lo;
        if span <= 0.0 {
            px.iter_mut().for_each(|v| *v = 0.0);
        } else {
            px.iter_mut().for_each(|v| *v = (*v - lo) / span);
        }
    }
}

/// Correlation surface of one pixel over its full square region, computed
/// by direct patch comparison. Row-major, side `2*region_radius + 1`, the
/// center entry is the pixel against itself. Visualization and test aid;
/// [`build_lss`] does not call this.
pub fn lss_correlation_surface(img: &Image, p: &LssParams, q: (usize, usize)) -> Result<Vec<f64>> {
    p.validate()?;
    let fp = p.footprint() as isize;
    let (qx, qy) = (q.0 as isize, q.1 as isize);
    if qx < fp
        || qy < fp
        || qx >= img.width() as isize - fp
        || qy >= img.height() as isize - fp
    {
        return Err(CfogError::Param(format!(
            "pixel ({},{}) lacks the {}px lss footprint",
            q.0, q.1, fp
        )));
    }
    let rr = p.region_radius as isize;
    let pr = p.patch_radius as isize;
    let mut var_auto = 0.0f64;
    let patch_ssd = |dx: isize, dy: isize| -> f64 {
        let mut acc = 0.0;
        for ty in -pr..=pr {
            for tx in -pr..=pr {
                let a = img.get((qx + tx) as usize, (qy + ty) as usize);
                let b = img.get((qx + dx + tx) as usize, (qy + dy + ty) as usize);
                acc += (a - b) * (a - b);
            }
        }
        acc
    };
    for dy in -1..=1 {
        for dx in -1..=1 {
            if dx != 0 || dy != 0 {
                var_auto = var_auto.max(patch_ssd(dx, dy));
            }
        }
    }
    let side = (2 * rr + 1) as usize;
    let mut surface = vec![0.0; side * side];
    for dy in -rr..=rr {
        for dx in -rr..=rr {
            let s = similarity(patch_ssd(dx, dy), var_auto, p.var_noise);
            surface[((dy + rr) as usize) * side + (dx + rr) as usize] = s;
        }
    }
    Ok(surface)
}
