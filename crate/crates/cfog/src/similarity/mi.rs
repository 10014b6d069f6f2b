//! Mutual information on raw intensities, from a joint histogram of the
//! paired template windows. Tolerates any intensity relation that keeps
//! a statistical dependency, at the cost of ignoring spatial structure.

use crate::error::Result;
use crate::image::Image;

use super::{MatchConfig, SimilarityMap};

/// MI matching with the same center in both images.
pub fn mi_match(
    reference: &Image,
    sensed: &Image,
    center: (usize, usize),
    cfg: &MatchConfig,
) -> Result<SimilarityMap> {
    mi_match_at(reference, center, sensed, center, cfg)
}

/// MI matching with independent centers. Intensities are binned over
/// `[0, 1]` into `cfg.mi_bins` levels; entropies use natural logarithms.
/// A constant template yields an all-zero map flagged degenerate.
pub fn mi_match_at(
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
    let bins = cfg.mi_bins;
    let (cx, cy) = ref_center;
    let quantize = |v: f64| -> usize { ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1) };

    let mut ref_bins = Vec::with_capacity(t * t);
    for dy in 0..t {
        for dx in 0..t {
            ref_bins.push(quantize(reference.get(cx - h + dx, cy - h + dy)));
        }
    }
    if ref_bins.iter().all(|&b| b == ref_bins[0]) {
        return Ok(SimilarityMap::degenerate(r, cfg.measure));
    }

    let (sx, sy) = sen_center;
    let side = 2 * r + 1;
    let n = (t * t) as f64;
    let mut scores = vec![0.0f64; side * side];
    let mut joint = vec![0u32; bins * bins];
    for vy in 0..side {
        for vx in 0..side {
            let ox = sx + vx - r;
            let oy = sy + vy - r;
            joint.iter_mut().for_each(|c| *c = 0);
            let mut idx = 0;
            for dy in 0..t {
                for dx in 0..t {
                    let b = quantize(sensed.get(ox - h + dx, oy - h + dy));
                    joint[ref_bins[idx] * bins + b] += 1;
                    idx += 1;
                }
            }
            scores[vy * side + vx] = mutual_information(&joint, bins, n);
        }
    }
    Ok(SimilarityMap::from_scores(scores, r, cfg.measure))
}

/// `MI = H(A) + H(B) - H(A,B)` from joint counts.
fn mutual_information(joint: &[u32], bins: usize, n: f64) -> f64 {
    let mut row = vec![0u32; bins];
    let mut col = vec![0u32; bins];
    for a in 0..bins {
        for b in 0..bins {
            let c = joint[a * bins + b];
            row[a] += c;
            col[b] += c;
        }
    }
    let entropy = |counts: &[u32]| -> f64 {
        counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    entropy(&row) + entropy(&col) - entropy(joint)
}
