//! Zero-mean normalized cross-correlation on raw intensities. The
//! classic baseline: invariant to linear gain and offset, defeated by
//! nonlinear intensity relations.

use crate::error::Result;
use crate::image::Image;

use super::{MatchConfig, SimilarityMap};

const VAR_EPS: f64 = 1e-12;

/// NCC matching with the same center in both images.
pub fn ncc_match(
    reference: &Image,
    sensed: &Image,
    center: (usize, usize),
    cfg: &MatchConfig,
) -> Result<SimilarityMap> {
    ncc_match_at(reference, center, sensed, center, cfg)
}

/// NCC matching with independent centers. Scores lie in `[-1, 1]`.
/// A zero-variance template yields an all-zero map flagged degenerate.
pub fn ncc_match_at(
    reference: &Image,
    ref_center: (usize, usize),
    sensed: &Image,
    sen_center: (usize, usize),
    cfg: &MatchConfig,
) -> Result<SimilarityMap> {
    cfg.validate()?;
    let h = cfg.half();
    let r = cfg.search_radius;
    super::check_window(reference.width(), reference.height(), ref_center, h, "template")?;
    super::check_window(sensed.width(), sensed.height(), sen_center, h + r, "search")?;

    let t = cfg.template_size;
    let n = (t * t) as f64;
    let (cx, cy) = ref_center;
    let mut template = Vec::with_capacity(t * t);
    for dy in 0..t {
        for dx in 0..t {
            template.push(reference.get(cx - h + dx, cy - h + dy));
        }
    }
    let mean_a: f64 = template.iter().sum::<f64>() / n;
    template.iter_mut().for_each(|v| *v -= mean_a);
    let var_a: f64 = template.iter().map(|v| v * v).sum();
    if var_a <= VAR_EPS {
        return Ok(SimilarityMap::degenerate(r, cfg.measure));
    }

    let (sx, sy) = sen_center;
    let side = 2 * r + 1;
    let mut scores = vec![0.0f64; side * side];
    let mut window = vec![0.0f64; t * t];
    for vy in 0..side {
        for vx in 0..side {
            let ox = sx + vx - r;
            let oy = sy + vy - r;
            let mut sum = 0.0;
            for dy in 0..t {
                for dx in 0..t {
                    let v = sensed.get(ox - h + dx, oy - h + dy);
                    window[dy * t + dx] = v;
                    sum += v;
                }
            }
            let mean_b = sum / n;
            let mut cov = 0.0;
            let mut var_b = 0.0;
            for (a, b) in template.iter().zip(&window) {
                let bb = b - mean_b;
                cov += a * bb;
                var_b += bb * bb;
            }
            scores[vy * side + vx] = if var_b <= VAR_EPS {
                0.0
            } else {
                cov / (var_a * var_b).sqrt()
            };
        }
    }
    Ok(SimilarityMap::from_scores(scores, r, cfg.measure))
}
