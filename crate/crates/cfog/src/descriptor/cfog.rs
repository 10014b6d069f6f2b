//! Channel features of oriented gradients: `m` oriented-gradient channels
//! per pixel, smoothed by a 2-D Gaussian in the image plane and by a
//! circular `(1,2,1)/4` kernel along the orientation axis.

use crate::error::{CfogError, Result};
use crate::image::{compute_gradients, gaussian_convolve, GradientPair, Image};
use crate::parallel::ordered_map_indices;
use crate::volume::FeatureVolume;

use super::NORM_FLOOR;

/// Parameters of the oriented-gradient channel descriptor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfogParams {
    /// Number of orientation channels over `[0, pi)`.
    pub m: usize,
    /// Standard deviation of the spatial Gaussian smoothing.
    pub sigma: f64,
    /// Per-pixel L2 normalization of the finished descriptor.
    pub normalize: bool,
}

impl Default for CfogParams {
    fn default() -> Self {
        CfogParams {
            m: 9,
            sigma: 0.8,
            normalize: true,
        }
    }
}

impl CfogParams {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(CfogError::Param(format!(
                "orientation channel count must be >= 2, got {}",
                self.m
            )));
        }
        if !(self.sigma > 0.0) {
            return Err(CfogError::Param(format!(
                "cfog sigma must be > 0, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Oriented-gradient channel at orientation `theta` (radians, `[0, pi)`):
/// per pixel `|cos(theta)*gx + sin(theta)*gy|`. The absolute value folds
/// opposite gradient directions together, which is what makes the channel
/// insensitive to intensity inversion.
pub fn oriented_gradient_channel(grads: &GradientPair, theta: f64) -> Image {
    let (w, h) = (grads.gx.width(), grads.gx.height());
    let (ct, st) = (theta.cos(), theta.sin());
    let gx = grads.gx.pixels();
    let gy = grads.gy.pixels();
    let mut out = Image::zeros(w, h);
    let dst = out.pixels_mut();
    for i in 0..w * h {
        dst[i] = (ct * gx[i] + st * gy[i]).abs();
    }
    out
}

/// Builds the oriented-gradient channel volume: `m` channels at
/// `theta_i = i*pi/m`, each smoothed spatially with `Gaussian(sigma)`,
/// then every pixel's channel vector convolved circularly with
/// `(1,2,1)/4`, then optionally L2-normalized per pixel.
pub fn build_cfog(img: &Image, p: &CfogParams) -> Result<FeatureVolume> {
    p.validate()?;
    if img.width() < 3 || img.height() < 3 {
        return Err(CfogError::Param(format!(
            "image {}x{} too small for gradient channels (need 3x3)",
            img.width(),
            img.height()
        )));
    }
    let grads = compute_gradients(img);
    let planes: Vec<Image> = ordered_map_indices(p.m, |i| {
        let theta = i as f64 * std::f64::consts::PI / p.m as f64;
        let channel = oriented_gradient_channel(&grads, theta);
        gaussian_convolve(&channel, p.sigma).expect("validated sigma")
    });
    let mut vol = FeatureVolume::from_channel_planes(img.width(), img.height(), &planes);
    smooth_orientation_axis(&mut vol);
    if p.normalize {
        vol.l2_normalize_pixels(NORM_FLOOR);
    }
    Ok(vol)
}

/// Circular `(1,2,1)/4` convolution along the channel axis. Orientation is
/// periodic with period pi, so channel 0 neighbors channel `m-1`. The /4
/// weight keeps constant vectors unchanged.
fn smooth_orientation_axis(vol: &mut FeatureVolume) {
    let m = vol.dims();
    let w = vol.width();
    let h = vol.height();
    let mut scratch = vec![0.0f64; m];
    for y in 0..h {
        for x in 0..w {
            let px = vol.pixel_mut(x, y);
            scratch.copy_from_slice(px);
            for c in 0..m {
                let prev = scratch[(c + m - 1) % m];
                let next = scratch[(c + 1) % m];
                px[c] = (prev + 2.0 * scratch[c] + next) / 4.0;
            }
        }
    }
}
