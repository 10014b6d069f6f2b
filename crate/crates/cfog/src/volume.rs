//! Per-pixel feature volumes: an `H x W x m` stack holding one descriptor
//! vector per pixel, with the vector stored contiguously per pixel.

use std::path::Path;

use crate::error::{CfogError, Result};
use crate::image::Image;

/// Per-pixel descriptor stack. `data[(y*width + x)*dims + c]` is channel
/// `c` of pixel `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVolume {
    width: usize,
    height: usize,
    dims: usize,
    data: Vec<f64>,
}

impl FeatureVolume {
    pub fn zeros(width: usize, height: usize, dims: usize) -> FeatureVolume {
        assert!(width >= 1 && height >= 1 && dims >= 1);
        FeatureVolume {
            width,
            height,
            dims,
            data: vec![0.0; width * height * dims],
        }
    }

    /// Assembles a volume from per-channel planes (all sized `width*height`).
    pub fn from_channel_planes(width: usize, height: usize, planes: &[Image]) -> FeatureVolume {
        let dims = planes.len();
        assert!(dims >= 1);
        for p in planes {
            assert_eq!(p.width(), width);
            assert_eq!(p.height(), height);
        }
        let mut vol = FeatureVolume::zeros(width, height, dims);
        for (c, plane) in planes.iter().enumerate() {
            let src = plane.pixels();
            for i in 0..width * height {
                vol.data[i * dims + c] = src[i];
            }
        }
        vol
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, c: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height && c < self.dims);
        self.data[(y * self.width + x) * self.dims + c]
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let base = (y * self.width + x) * self.dims;
        &self.data[base..base + self.dims]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let base = (y * self.width + x) * self.dims;
        &mut self.data[base..base + self.dims]
    }

    /// Extracts channel `c` as a standalone image plane.
    pub fn channel_plane(&self, c: usize) -> Image {
        assert!(c < self.dims);
        let mut plane = Image::zeros(self.width, self.height);
        let dst = plane.pixels_mut();
        for i in 0..self.width * self.height {
            dst[i] = self.data[i * self.dims + c];
        }
        plane
    }

    /// L2-normalizes every pixel vector in place. Vectors with norm below
    /// `floor` are left as exact zeros so flat regions never divide by
    /// a vanishing norm.
    pub fn l2_normalize_pixels(&mut self, floor: f64) {
        for px in self.data.chunks_exact_mut(self.dims) {
            let norm = px.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > floor {
                px.iter_mut().for_each(|v| *v /= norm);
            } else {
                px.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }

    /// Writes each channel as an 8-bit PGM (values linearly rescaled),
    /// named `<prefix>_ch<NN>.pgm`. Debug aid for visual inspection.
    pub fn dump_channels(&self, prefix: &Path) -> Result<()> {
        let stem = prefix
            .file_name()
            .and_then(|s| s.to_str())
            .ok_or_else(|| CfogError::Param("dump prefix has no file name".into()))?
            .to_string();
        let dir = prefix.parent().unwrap_or_else(|| Path::new("."));
        for c in 0..self.dims {
            let path = dir.join(format!("{stem}_ch{c:02}.pgm"));
            crate::io::write_pgm_stretched(&self.channel_plane(c), &path)?;
        }
        Ok(())
    }
}
