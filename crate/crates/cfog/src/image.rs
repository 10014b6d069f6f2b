//! Grayscale raster container and the numeric primitives built on it:
//! gradients, separable Gaussian convolution and integral images.
//!
//! Intensities are stored as `f64` in row-major order. Raster loaders
//! normalize samples to `[0, 1]`, but nothing here assumes that range.

use crate::error::{CfogError, Result};
use crate::geo::GeoTransform;

/// A 2-D grayscale image with optional georeferencing.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
    geo: Option<GeoTransform>,
}

impl Image {
    /// Creates an image filled with a constant value.
    pub fn filled(width: usize, height: usize, value: f64) -> Image {
        assert!(width >= 1 && height >= 1, "image dimensions must be >= 1");
        Image {
            width,
            height,
            pixels: vec![value; width * height],
            geo: None,
        }
    }

    /// Creates an all-zero image.
    pub fn zeros(width: usize, height: usize) -> Image {
        Image::filled(width, height, 0.0)
    }

    /// Wraps a row-major pixel buffer, validating the container invariants.
    pub fn from_pixels(width: usize, height: usize, pixels: Vec<f64>) -> Result<Image> {
        if width < 1 || height < 1 {
            return Err(CfogError::Param(format!(
                "image dimensions must be >= 1, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(CfogError::Param(format!(
                "pixel buffer length {} does not match {width}x{height}",
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|v| !v.is_finite()) {
            return Err(CfogError::Param(format!(
                "image contains a non-finite sample: {bad}"
            )));
        }
        Ok(Image {
            width,
            height,
            pixels,
            geo: None,
        })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Image {
        let mut img = Image::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                img.set(x, y, f(x, y));
            }
        }
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.pixels.len()
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn geo(&self) -> Option<&GeoTransform> {
        self.geo.as_ref()
    }

    pub fn set_geo(&mut self, geo: Option<GeoTransform>) {
        self.geo = geo;
    }

    /// Returns a copy with the given geotransform attached.
    pub fn with_geo(mut self, geo: GeoTransform) -> Image {
        self.geo = Some(geo);
        self
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height);
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        debug_assert!(x < self.width && y < self.height);
        self.pixels[y * self.width + x] = v;
    }

    /// Reads `(x, y)` with replicate clamping outside the raster.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.get(cx, cy)
    }

    /// Bilinear sample at a real-valued position. Returns `None` when the
    /// position lies outside `[0, w-1] x [0, h-1]`.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Option<f64> {
        if !(x >= 0.0 && y >= 0.0 && x <= (self.width - 1) as f64 && y <= (self.height - 1) as f64)
        {
            return None;
        }
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bot = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        Some(top * (1.0 - fy) + bot * fy)
    }

    /// Bilinear sample with replicate clamping for out-of-range positions.
    pub fn sample_bilinear_clamped(&self, x: f64, y: f64) -> f64 {
        let cx = x.clamp(0.0, (self.width - 1) as f64);
        let cy = y.clamp(0.0, (self.height - 1) as f64);
        self.sample_bilinear(cx, cy).unwrap()
    }

    /// Copies the axis-aligned window with top-left `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Image> {
        if x0 + w > self.width || y0 + h > self.height || w == 0 || h == 0 {
            return Err(CfogError::Param(format!(
                "crop {w}x{h}+{x0}+{y0} exceeds image {}x{}",
                self.width, self.height
            )));
        }
        let mut out = Image::zeros(w, h);
        for y in 0..h {
            let src = (y0 + y) * self.width + x0;
            out.pixels[y * w..(y + 1) * w].copy_from_slice(&self.pixels[src..src + w]);
        }
        Ok(out)
    }

    /// Minimum and maximum sample values.
    pub fn min_max(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.pixels {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    /// Linearly rescales samples so the value range becomes `[0, 1]`.
    /// Constant images map to all zeros.
    pub fn stretched(&self) -> Image {
        let (lo, hi) = self.min_max();
        let span = hi - lo;
        let mut out = self.clone();
        if span <= 0.0 {
            out.pixels.iter_mut().for_each(|v| *v = 0.0);
        } else {
            out.pixels.iter_mut().for_each(|v| *v = (*v - lo) / span);
        }
        out
    }
}

/// Horizontal and vertical gradient rasters of a source image.
#[derive(Debug, Clone)]
pub struct GradientPair {
    pub gx: Image,
    pub gy: Image,
}

/// Gradient operator selection. Central differences are the default;
/// the Sobel variant is available through run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientOp {
    #[default]
    CentralDiff,
    Sobel,
}

/// Computes horizontal and vertical gradients by central differences,
/// falling back to one-sided differences on the borders.
pub fn compute_gradients(img: &Image) -> GradientPair {
    compute_gradients_with(img, GradientOp::CentralDiff)
}

/// Gradient computation with an explicit operator choice.
pub fn compute_gradients_with(img: &Image, op: GradientOp) -> GradientPair {
    match op {
        GradientOp::CentralDiff => central_gradients(img),
        GradientOp::Sobel => sobel_gradients(img),
    }
}

fn central_gradients(img: &Image) -> GradientPair {
    let (w, h) = (img.width(), img.height());
    let mut gx = Image::zeros(w, h);
    let mut gy = Image::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let dx = if w == 1 {
                0.0
            } else if x == 0 {
                img.get(1, y) - img.get(0, y)
            } else if x == w - 1 {
                img.get(w - 1, y) - img.get(w - 2, y)
            } else {
                (img.get(x + 1, y) - img.get(x - 1, y)) / 2.0
            };
            let dy = if h == 1 {
                0.0
            } else if y == 0 {
                img.get(x, 1) - img.get(x, 0)
            } else if y == h - 1 {
                img.get(x, h - 1) - img.get(x, h - 2)
            } else {
                (img.get(x, y + 1) - img.get(x, y - 1)) / 2.0
            };
            gx.set(x, y, dx);
            gy.set(x, y, dy);
        }
    }
    GradientPair { gx, gy }
}

fn sobel_gradients(img: &Image) -> GradientPair {
    let (w, h) = (img.width(), img.height());
    let mut gx = Image::zeros(w, h);
    let mut gy = Image::zeros(w, h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let p = |dx: isize, dy: isize| img.get_clamped(x + dx, y + dy);
            // Normalized so a unit ramp reports unit slope.
            let sx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1))
                - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let sy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1))
                - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            gx.set(x as usize, y as usize, sx / 8.0);
            gy.set(x as usize, y as usize, sy / 8.0);
        }
    }
    GradientPair { gx, gy }
}

/// Builds the discrete Gaussian kernel used by [`gaussian_convolve`]:
/// radius `ceil(3*sigma)`, normalized to sum 1.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(CfogError::Param(format!(
            "gaussian sigma must be > 0, got {sigma}"
        )));
    }
    let radius = (3.0 * sigma).ceil() as usize;
    let mut kernel = Vec::with_capacity(2 * radius + 1);
    let inv = 1.0 / (2.0 * sigma * sigma);
    for i in 0..=2 * radius {
        let d = i as f64 - radius as f64;
        kernel.push((-d * d * inv).exp());
    }
    let sum: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|v| *v /= sum);
    Ok(kernel)
}

/// Separable Gaussian smoothing with replicate-padded borders.
pub fn gaussian_convolve(img: &Image, sigma: f64) -> Result<Image> {
    let kernel = gaussian_kernel(sigma)?;
    Ok(convolve_separable(img, &kernel, &kernel))
}

/// Separable convolution with replicate padding. Kernels must have odd
/// length; the anchor is the middle element. Rows are processed in
/// parallel; per-row arithmetic is identical at any worker count.
pub fn convolve_separable(img: &Image, kx: &[f64], ky: &[f64]) -> Image {
    assert!(kx.len() % 2 == 1 && ky.len() % 2 == 1, "kernels must be odd");
    let (w, h) = (img.width(), img.height());
    let rx = (kx.len() / 2) as isize;
    let ry = (ky.len() / 2) as isize;

    let mut horiz = Image::zeros(w, h);
    crate::parallel::for_each_row_chunk(horiz.pixels_mut(), w, |y, row| {
        let src = &img.pixels()[y * w..(y + 1) * w];
        let interior_end = (w as isize - rx).max(rx);
        for x in 0..rx.min(w as isize) {
            let mut acc = 0.0;
            for (i, &k) in kx.iter().enumerate() {
                acc += k * src[(x + i as isize - rx).clamp(0, w as isize - 1) as usize];
            }
            row[x as usize] = acc;
        }
        // Interior: no clamping, contiguous reads.
        for x in rx..interior_end {
            let base = (x - rx) as usize;
            let mut acc = 0.0;
            for (i, &k) in kx.iter().enumerate() {
                acc += k * src[base + i];
            }
            row[x as usize] = acc;
        }
        for x in interior_end.max(0)..w as isize {
            let mut acc = 0.0;
            for (i, &k) in kx.iter().enumerate() {
                acc += k * src[(x + i as isize - rx).clamp(0, w as isize - 1) as usize];
            }
            row[x as usize] = acc;
        }
    });
    let mut out = Image::zeros(w, h);
    let hp = horiz.pixels();
    crate::parallel::for_each_row_chunk(out.pixels_mut(), w, |y, row| {
        row.iter_mut().for_each(|v| *v = 0.0);
        for (i, &k) in ky.iter().enumerate() {
            let sy = (y as isize + i as isize - ry).clamp(0, h as isize - 1) as usize;
            let src = &hp[sy * w..(sy + 1) * w];
            for x in 0..w {
                row[x] += k * src[x];
            }
        }
    });
    out
}

/// Summed-area table. Entry `(i, j)` holds the sum of all source pixels
/// with column `< i` and row `< j`, so any rectangle sum costs 4 lookups.
#[derive(Debug, Clone)]
pub struct IntegralImage {
    width: usize,  // source width
    height: usize, // source height
    sums: Vec<f64>, // (width + 1) * (height + 1)
}

impl IntegralImage {
    pub fn build(img: &Image) -> IntegralImage {
        let (w, h) = (img.width(), img.height());
        let stride = w + 1;
        let mut sums = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            let mut row_acc = 0.0;
            for x in 0..w {
                row_acc += img.get(x, y);
                sums[(y + 1) * stride + (x + 1)] = sums[y * stride + (x + 1)] + row_acc;
            }
        }
        IntegralImage {
            width: w,
            height: h,
            sums,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.sums[j * (self.width + 1) + i]
    }

    /// Sum over the half-open rectangle `[x0, x1) x [y0, y1)`.
    /// Degenerate (zero-area) rectangles yield 0.
    #[inline]
    pub fn rect_sum(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        debug_assert!(x1 <= self.width && y1 <= self.height);
        if x1 <= x0 || y1 <= y0 {
            return 0.0;
        }
        self.at(x1, y1) - self.at(x0, y1) - self.at(x1, y0) + self.at(x0, y0)
    }

    /// `rect_sum` with signed coordinates clamped to the raster.
    #[inline]
    pub fn rect_sum_clamped(&self, x0: isize, y0: isize, x1: isize, y1: isize) -> f64 {
        let cx0 = x0.clamp(0, self.width as isize) as usize;
        let cy0 = y0.clamp(0, self.height as isize) as usize;
        let cx1 = x1.clamp(0, self.width as isize) as usize;
        let cy1 = y1.clamp(0, self.height as isize) as usize;
        self.rect_sum(cx0, cy0, cx1, cy1)
    }
}

/// Convenience wrapper matching the operation vocabulary used elsewhere.
pub fn integral_image(img: &Image) -> IntegralImage {
    IntegralImage::build(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(w, h, |_, _| rng.random::<f64>())
    }

    #[test]
    fn gradients_of_constant_are_zero() {
        let img = Image::filled(8, 6, 3.25);
        let g = compute_gradients(&img);
        assert!(g.gx.pixels().iter().all(|&v| v == 0.0));
        assert!(g.gy.pixels().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradients_of_linear_ramp() {
        let img = Image::from_fn(10, 5, |x, _| 3.0 * x as f64);
        let g = compute_gradients(&img);
        for y in 0..5 {
            for x in 1..9 {
                assert_eq!(g.gx.get(x, y), 3.0);
            }
        }
        assert!(g.gy.pixels().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradients_match_loop_oracle() {
        let img = random_image(16, 16, 7);
        let g = compute_gradients(&img);
        for y in 0..16usize {
            for x in 0..16usize {
                let ex = if x == 0 {
                    img.get(1, y) - img.get(0, y)
                } else if x == 15 {
                    img.get(15, y) - img.get(14, y)
                } else {
                    (img.get(x + 1, y) - img.get(x - 1, y)) / 2.0
                };
                let ey = if y == 0 {
                    img.get(x, 1) - img.get(x, 0)
                } else if y == 15 {
                    img.get(x, 15) - img.get(x, 14)
                } else {
                    (img.get(x, y + 1) - img.get(x, y - 1)) / 2.0
                };
                assert_eq!(g.gx.get(x, y), ex);
                assert_eq!(g.gy.get(x, y), ey);
            }
        }
    }

    #[test]
    fn gradients_are_linear() {
        let a = random_image(12, 9, 1);
        let b = random_image(12, 9, 2);
        let combo = Image::from_fn(12, 9, |x, y| 2.5 * a.get(x, y) - 0.75 * b.get(x, y));
        let ga = compute_gradients(&a);
        let gb = compute_gradients(&b);
        let gc = compute_gradients(&combo);
        for i in 0..combo.pixel_count() {
            let want = 2.5 * ga.gx.pixels()[i] - 0.75 * gb.gx.pixels()[i];
            assert!((gc.gx.pixels()[i] - want).abs() < 1e-12);
            let want = 2.5 * ga.gy.pixels()[i] - 0.75 * gb.gy.pixels()[i];
            assert!((gc.gy.pixels()[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn sobel_ramp_slope() {
        let img = Image::from_fn(9, 9, |x, _| 2.0 * x as f64);
        let g = compute_gradients_with(&img, GradientOp::Sobel);
        for y in 1..8 {
            for x in 1..8 {
                assert!((g.gx.get(x, y) - 2.0).abs() < 1e-12);
                assert!(g.gy.get(x, y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_rejects_bad_sigma() {
        let img = Image::filled(4, 4, 1.0);
        assert!(gaussian_convolve(&img, 0.0).is_err());
        assert!(gaussian_convolve(&img, -1.0).is_err());
    }

    #[test]
    fn gaussian_preserves_constants() {
        for &sigma in &[0.4, 0.8, 2.0] {
            let img = Image::filled(17, 11, 0.37);
            let out = gaussian_convolve(&img, sigma).unwrap();
            for &v in out.pixels() {
                assert!((v - 0.37).abs() < 1e-9 * 0.37);
            }
        }
    }

    #[test]
    fn gaussian_impulse_center_weight() {
        let sigma = 0.8;
        let mut img = Image::zeros(15, 15);
        img.set(7, 7, 1.0);
        let out = gaussian_convolve(&img, sigma).unwrap();
        let k = gaussian_kernel(sigma).unwrap();
        let center = k[k.len() / 2];
        // Separable kernel: the impulse response center is kx[c] * ky[c].
        assert!((out.get(7, 7) - center * center).abs() < 1e-15);
    }

    #[test]
    fn gaussian_matches_direct_2d_convolution() {
        let sigma = 0.8;
        let img = random_image(32, 32, 99);
        let out = gaussian_convolve(&img, sigma).unwrap();
        let k = gaussian_kernel(sigma).unwrap();
        let r = (k.len() / 2) as isize;
        for y in 0..32isize {
            for x in 0..32isize {
                let mut acc = 0.0;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let w = k[(dx + r) as usize] * k[(dy + r) as usize];
                        acc += w * img.get_clamped(x + dx, y + dy);
                    }
                }
                let got = out.get(x as usize, y as usize);
                assert!(
                    (got - acc).abs() <= 1e-10 * acc.abs().max(1.0),
                    "mismatch at ({x},{y}): {got} vs {acc}"
                );
            }
        }
    }

    #[test]
    fn integral_counts_ones() {
        let img = Image::filled(4, 4, 1.0);
        let ii = integral_image(&img);
        assert_eq!(ii.rect_sum(0, 0, 4, 4), 16.0);
    }

    #[test]
    fn integral_degenerate_rect_is_zero() {
        let img = random_image(6, 6, 3);
        let ii = integral_image(&img);
        assert_eq!(ii.rect_sum(2, 3, 2, 5), 0.0);
        assert_eq!(ii.rect_sum(1, 4, 5, 4), 0.0);
    }

    #[test]
    fn integral_matches_brute_force_exactly() {
        // Integer-valued pixels keep every partial sum exactly representable.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let img = Image::from_fn(8, 8, |_, _| rng.random_range(0..256) as f64);
        let ii = integral_image(&img);
        for _ in 0..50 {
            let x0 = rng.random_range(0..=8);
            let x1 = rng.random_range(0..=8);
            let y0 = rng.random_range(0..=8);
            let y1 = rng.random_range(0..=8);
            let (x0, x1) = (x0.min(x1), x0.max(x1));
            let (y0, y1) = (y0.min(y1), y0.max(y1));
            let mut direct = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    direct += img.get(x, y);
                }
            }
            assert_eq!(ii.rect_sum(x0, y0, x1, y1), direct);
        }
    }

    #[test]
    fn crop_reads_expected_window() {
        let img = Image::from_fn(10, 10, |x, y| (10 * y + x) as f64);
        let c = img.crop(3, 2, 4, 5).unwrap();
        assert_eq!(c.get(0, 0), 23.0);
        assert_eq!(c.get(3, 4), 66.0);
        assert!(img.crop(8, 8, 4, 4).is_err());
    }

    #[test]
    fn bilinear_sampling_basics() {
        let img = Image::from_fn(3, 3, |x, y| (x + 3 * y) as f64);
        assert_eq!(img.sample_bilinear(1.0, 1.0), Some(4.0));
        assert_eq!(img.sample_bilinear(0.5, 0.0), Some(0.5));
        assert_eq!(img.sample_bilinear(-0.1, 0.0), None);
        assert_eq!(img.sample_bilinear(2.01, 0.0), None);
    }
}
