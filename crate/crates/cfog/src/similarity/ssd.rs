//! SSD template matching over feature volumes: a direct spatial
//! evaluation (the correctness oracle) and the FFT-accelerated path that
//! must reproduce it.
//!
//! The SSD at offset `v` expands into three terms: the template energy
//! (constant in `v`), the windowed sensed energy, and the cross term.
//! The FFT path evaluates the last two as correlations in the frequency
//! domain and adds the constant back, so its scores equal the spatial
//! oracle's, not just its argmin.

use rustfft::num_complex::Complex;

use crate::error::{CfogError, Result};
use crate::volume::FeatureVolume;

use super::{next_fast_len, Fft2, MatchConfig, SimilarityMap};

fn check_dims(d1: &FeatureVolume, d2: &FeatureVolume) -> Result<()> {
    if d1.dims() != d2.dims() {
        return Err(CfogError::Param(format!(
            "volume channel counts differ: {} vs {}",
            d1.dims(),
            d2.dims()
        )));
    }
    Ok(())
}

fn check_footprint(
    vol: &FeatureVolume,
    center: (usize, usize),
    margin: usize,
    what: &str,
) -> Result<()> {
    super::check_window(vol.width(), vol.height(), center, margin, what)
}

/// Spatial-domain SSD matching with the same center in both volumes.
pub fn ssd_match_spatial(
    d1: &FeatureVolume,
    d2: &FeatureVolume,
    center: (usize, usize),
    cfg: &MatchConfig,
) -> Result<SimilarityMap> {
    ssd_match_spatial_at(d1, center, d2, center, cfg)
}

/// Spatial-domain SSD matching with independent reference and sensed
/// centers (the sensed center normally comes from geo prediction).
pub fn ssd_match_spatial_at(
    d1: &FeatureVolume,
    ref_center: (usize, usize),
    d2: &FeatureVolume,
    sen_center: (usize, usize),
    cfg: &MatchConfig,
) -> Result<SimilarityMap> {
    cfg.validate()?;
    check_dims(d1, d2)?;
    let h = cfg.half();
    let r = cfg.search_radius;
    check_footprint(d1, ref_center, h, "template")?;
    check_footprint(d2, sen_center, h + r, "search")?;

    let dims = d1.dims();
    let side = 2 * r + 1;
    let mut scores = vec![0.0f64; side * side];
    let (cx, cy) = ref_center;
    let (sx, sy) = sen_center;
    for vy in 0..side {
        for vx in 0..side {
            let ox = sx + vx - r; // sensed template origin offset by v
            let oy = sy + vy - r;
            let mut acc = 0.0;
            for dy in 0..cfg.template_size {
                let ry = cy - h + dy;
                let ty = oy - h + dy;
                for dx in 0..cfg.template_size {
                    let a = d1.pixel(cx - h + dx, ry);
                    let b = d2.pixel(ox - h + dx, ty);
                    for c in 0..dims {
                        let d = a[c] - b[c];
                        acc += d * d;
                    }
                }
            }
            scores[vy * side + vx] = -acc;
        }
    }
    Ok(SimilarityMap::from_scores(scores, r, cfg.measure))
}

/// FFT-accelerated SSD matching with the same center in both volumes.
/// Scores and peak match [`ssd_match_spatial`] up to FFT round-off.
pub fn ssd_match_fft(
    d1: &FeatureVolume,
    d2: &FeatureVolume,
    center: (usize, usize),
    cfg: &MatchConfig,
) -> Result<SimilarityMap> {
    ssd_match_fft_at(d1, center, d2, center, cfg)
}

/// FFT-accelerated SSD matching with independent centers.
pub fn ssd_match_fft_at(
    d1: &FeatureVolume,
    ref_center: (usize, usize),
    d2: &FeatureVolume,
    sen_center: (usize, usize),
    cfg: &MatchConfig,
) -> Result<SimilarityMap> {
    cfg.validate()?;
    check_dims(d1, d2)?;
    let t = cfg.template_size;
    let h = cfg.half();
    let r = cfg.search_radius;
    check_footprint(d1, ref_center, h, "template")?;
    check_footprint(d2, sen_center, h + r, "search")?;

    let dims = d1.dims();
    let region = t + 2 * r; // sensed crop side
    let fsize = next_fast_len(region);
    let fft = Fft2::new(fsize);
    let n2 = fsize * fsize;

    let (cx, cy) = ref_center;
    let (sx, sy) = sen_center;
    let rx0 = sx - h - r;
    let ry0 = sy - h - r;

    // Cross term, all channels accumulated in the frequency domain so a
    // single inverse transform recovers the channel-summed correlation.
    let mut template_energy = 0.0f64;
    let mut cross_spec = vec![Complex::new(0.0, 0.0); n2];
    let mut tbuf = vec![Complex::new(0.0, 0.0); n2];
    let mut rbuf = vec![Complex::new(0.0, 0.0); n2];
    let mut sensed_sq = vec![0.0f64; region * region];

    for c in 0..dims {
        tbuf.iter_mut().for_each(|v| *v = Complex::new(0.0, 0.0));
        rbuf.iter_mut().for_each(|v| *v = Complex::new(0.0, 0.0));
        for dy in 0..t {
            for dx in 0..t {
                let v = d1.at(cx - h + dx, cy - h + dy, c);
                template_energy += v * v;
                tbuf[dy * fsize + dx] = Complex::new(v, 0.0);
            }
        }
        for dy in 0..region {
            for dx in 0..region {
                let v = d2.at(rx0 + dx, ry0 + dy, c);
                sensed_sq[dy * region + dx] += v * v;
                rbuf[dy * fsize + dx] = Complex::new(v, 0.0);
            }
        }
        fft.forward(&mut tbuf);
        fft.forward(&mut rbuf);
        for i in 0..n2 {
            cross_spec[i] += rbuf[i] * tbuf[i].conj();
        }
    }
    fft.inverse(&mut cross_spec);

    // Windowed sensed energy: correlation of the squared sensed crop with
    // an all-ones template mask.
    let mut ebuf = vec![Complex::new(0.0, 0.0); n2];
    for dy in 0..region {
        for dx in 0..region {
            ebuf[dy * fsize + dx] = Complex::new(sensed_sq[dy * region + dx], 0.0);
        }
    }
    let mut mask = vec![Complex::new(0.0, 0.0); n2];
    for dy in 0..t {
        for dx in 0..t {
            mask[dy * fsize + dx] = Complex::new(1.0, 0.0);
        }
    }
    fft.forward(&mut ebuf);
    fft.forward(&mut mask);
    for i in 0..n2 {
        ebuf[i] *= mask[i].conj();
    }
    fft.inverse(&mut ebuf);

    let scale = fft.norm();
    let side = 2 * r + 1;
    let mut scores = vec![0.0f64; side * side];
    for vy in 0..side {
        for vx in 0..side {
            let cross = cross_spec[vy * fsize + vx].re * scale;
            let energy = ebuf[vy * fsize + vx].re * scale;
            scores[vy * side + vx] = -(template_energy + energy - 2.0 * cross);
        }
    }
    Ok(SimilarityMap::from_scores(scores, r, cfg.measure))
}
