//! Pixel-wise structural descriptors. Each builder turns an image into a
//! [`FeatureVolume`] holding one descriptor vector per pixel, the
//! representation the similarity measures match on.
//!
//! Four descriptors are provided: oriented-gradient channel features
//! (the module's namesake), a dense per-pixel HOG, local self-similarity,
//! and a simplified upright SURF.

mod cfog;
mod hog;
mod lss;
mod surf;

pub use cfog::{build_cfog, oriented_gradient_channel, CfogParams};
pub use hog::{build_pixelwise_hog, HogParams};
pub use lss::{build_lss, lss_correlation_surface, LssParams};
pub use surf::{build_usurf, SurfParams};

use crate::error::Result;
use crate::image::Image;
use crate::volume::FeatureVolume;

/// Norm floor below which a pixel vector is treated as zero instead of
/// being normalized.
pub const NORM_FLOOR: f64 = 1e-10;

/// A descriptor choice with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Descriptor {
    Cfog(CfogParams),
    Hog(HogParams),
    Lss(LssParams),
    Surf(SurfParams),
}

impl Descriptor {
    /// Builds the pixel-wise feature volume for an image.
    pub fn build(&self, img: &Image) -> Result<FeatureVolume> {
        match self {
            Descriptor::Cfog(p) => build_cfog(img, p),
            Descriptor::Hog(p) => build_pixelwise_hog(img, p),
            Descriptor::Lss(p) => build_lss(img, p),
            Descriptor::Surf(p) => build_usurf(img, p),
        }
    }

    /// Channel count of the produced volume.
    pub fn dims(&self) -> usize {
        match self {
            Descriptor::Cfog(p) => p.m,
            Descriptor::Hog(_) => hog::DESCRIPTOR_DIMS,
            Descriptor::Lss(p) => p.radial_bins * p.angular_bins,
            Descriptor::Surf(_) => surf::DESCRIPTOR_DIMS,
        }
    }

    /// Radius (in pixels) within which an input pixel can influence the
    /// descriptor at a location. Chip-based matching pads crops by this
    /// amount so chip volumes agree with whole-image volumes.
    pub fn footprint_radius(&self) -> usize {
        match self {
            Descriptor::Cfog(p) => (3.0 * p.sigma).ceil() as usize + 1,
            Descriptor::Hog(p) => p.cell_size + 1,
            Descriptor::Lss(p) => p.region_radius + p.patch_radius,
            Descriptor::Surf(p) => surf::BLOCK_RADIUS + p.haar_scale,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Descriptor::Cfog(_) => "cfog",
            Descriptor::Hog(_) => "hog",
            Descriptor::Lss(_) => "lss",
            Descriptor::Surf(_) => "surf",
        }
    }
}
