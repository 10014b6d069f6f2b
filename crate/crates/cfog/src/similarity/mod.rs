//! Similarity measures for template matching. Descriptor measures score
//! the SSD between feature volumes (spatial oracle and FFT-accelerated
//! path); NCC and MI score raw intensities for baseline comparisons.
//!
//! Every map stores "higher is better" (SSD is negated) so one peak
//! picker and one sub-pixel refiner serve all measures. The returned
//! offset `v` means: the content under the reference template at `center`
//! sits at `center + v` in the sensed image.

mod fft;
mod mi;
mod ncc;
mod ssd;

pub use mi::{mi_match, mi_match_at};
pub use ncc::{ncc_match, ncc_match_at};
pub use ssd::{ssd_match_fft, ssd_match_fft_at, ssd_match_spatial, ssd_match_spatial_at};

use std::path::Path;
use std::str::FromStr;

use crate::error::{CfogError, Result};
use crate::image::Image;

/// Similarity measure selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    /// Oriented-gradient channel features matched by frequency-domain SSD.
    Cfog,
    /// Pixel-wise HOG matched by frequency-domain SSD.
    Fhog,
    /// Local self-similarity matched by frequency-domain SSD.
    Flss,
    /// Simplified upright SURF matched by frequency-domain SSD.
    Fsurf,
    /// Zero-mean normalized cross-correlation on intensities.
    Ncc,
    /// Mutual information on intensities.
    Mi,
}

impl Measure {
    pub const ALL: [Measure; 6] = [
        Measure::Cfog,
        Measure::Fhog,
        Measure::Flss,
        Measure::Fsurf,
        Measure::Ncc,
        Measure::Mi,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Measure::Cfog => "cfog",
            Measure::Fhog => "fhog",
            Measure::Flss => "flss",
            Measure::Fsurf => "fsurf",
            Measure::Ncc => "ncc",
            Measure::Mi => "mi",
        }
    }

    /// True for the measures that match descriptor volumes rather than
    /// raw intensities.
    pub fn uses_descriptor(&self) -> bool {
        !matches!(self, Measure::Ncc | Measure::Mi)
    }
}

impl FromStr for Measure {
    type Err = CfogError;
    fn from_str(s: &str) -> Result<Measure> {
        match s.to_ascii_lowercase().as_str() {
            "cfog" => Ok(Measure::Cfog),
            "fhog" | "hog" => Ok(Measure::Fhog),
            "flss" | "lss" => Ok(Measure::Flss),
            "fsurf" | "surf" => Ok(Measure::Fsurf),
            "ncc" => Ok(Measure::Ncc),
            "mi" => Ok(Measure::Mi),
            other => Err(CfogError::Param(format!("unknown measure {other:?}"))),
        }
    }
}

impl std::fmt::Display for Measure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Template-matching configuration shared by all measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    /// Template window side in pixels; must be odd so it centers on a pixel.
    pub template_size: usize,
    /// Peak-offset radius: offsets `|v| <= search_radius` are scored, a
    /// `(2r+1) x (2r+1)` search window.
    pub search_radius: usize,
    pub measure: Measure,
    /// Histogram bins per axis for the MI measure.
    pub mi_bins: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            template_size: 101,
            search_radius: 10,
            measure: Measure::Cfog,
            mi_bins: 32,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.template_size < 9 {
            return Err(CfogError::Param(format!(
                "template_size must be >= 9, got {}",
                self.template_size
            )));
        }
        if self.template_size % 2 == 0 {
            return Err(CfogError::Param(format!(
                "template_size must be odd, got {}",
                self.template_size
            )));
        }
        if self.search_radius < 1 {
            return Err(CfogError::Param("search_radius must be >= 1".into()));
        }
        if self.mi_bins < 4 {
            return Err(CfogError::Param(format!(
                "mi_bins must be >= 4, got {}",
                self.mi_bins
            )));
        }
        Ok(())
    }

    /// Template half-side.
    pub fn half(&self) -> usize {
        (self.template_size - 1) / 2
    }
}

/// Scores over a search window, with the integer peak and its sub-pixel
/// refinement. Row-major over `vy` then `vx`, offsets in
/// `[-search_radius, +search_radius]`.
#[derive(Debug, Clone)]
pub struct SimilarityMap {
    pub search_radius: usize,
    pub scores: Vec<f64>,
    /// Integer offset of the best score (ties: smaller offset magnitude,
    /// then row-major order).
    pub peak: (i32, i32),
    /// Peak plus the parabola-fitted fractional offset.
    pub subpixel: (f64, f64),
    /// False when the peak sat on the window border and could not be refined.
    pub refined: bool,
    /// Set when the measure could not discriminate (e.g. zero-variance
    /// template under NCC); scores are all zero in that case.
    pub degenerate: bool,
    pub measure: Measure,
}

impl SimilarityMap {
    /// Window side `2 * search_radius + 1`.
    pub fn side(&self) -> usize {
        2 * self.search_radius + 1
    }

    pub fn width(&self) -> usize {
        self.side()
    }

    pub fn height(&self) -> usize {
        self.side()
    }

    #[inline]
    pub fn score_at(&self, vx: i32, vy: i32) -> f64 {
        let r = self.search_radius as i32;
        debug_assert!(vx.abs() <= r && vy.abs() <= r);
        self.scores[((vy + r) as usize) * self.side() + (vx + r) as usize]
    }

    /// Assembles a map from raw scores: finds the peak and refines it.
    pub fn from_scores(scores: Vec<f64>, search_radius: usize, measure: Measure) -> SimilarityMap {
        let side = 2 * search_radius + 1;
        assert_eq!(scores.len(), side * side);
        let peak = pick_peak(&scores, search_radius);
        let mut map = SimilarityMap {
            search_radius,
            scores,
            peak,
            subpixel: (peak.0 as f64, peak.1 as f64),
            refined: false,
            degenerate: false,
            measure,
        };
        let (delta, refined) = refine_peak(&map);
        map.subpixel = (peak.0 as f64 + delta.0, peak.1 as f64 + delta.1);
        map.refined = refined;
        map
    }

    fn degenerate(search_radius: usize, measure: Measure) -> SimilarityMap {
        let side = 2 * search_radius + 1;
        SimilarityMap {
            search_radius,
            scores: vec![0.0; side * side],
            peak: (0, 0),
            subpixel: (0.0, 0.0),
            refined: false,
            degenerate: true,
            measure,
        }
    }

    /// Writes the map as an 8-bit heatmap (linear rescale).
    pub fn write_heatmap_pgm(&self, path: &Path) -> Result<()> {
        let side = self.side();
        let img = Image::from_pixels(side, side, self.scores.clone())
            .expect("similarity scores are finite");
        crate::io::write_pgm_stretched(&img, path)
    }

    /// Writes the map as a plain-text matrix, one row per line.
    pub fn write_text_matrix(&self, path: &Path) -> Result<()> {
        use std::fmt::Write as _;
        let side = self.side();
        let mut text = String::new();
        for y in 0..side {
            for x in 0..side {
                if x > 0 {
                    text.push(' ');
                }
                write!(text, "{}", self.scores[y * side + x]).unwrap();
            }
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|e| CfogError::io(path, e))
    }
}

/// Highest score wins; ties fall to the smaller offset magnitude, then to
/// row-major order, so matching is deterministic.
fn pick_peak(scores: &[f64], search_radius: usize) -> (i32, i32) {
    let r = search_radius as i32;
    let side = 2 * search_radius + 1;
    let mut best = (0i32, 0i32);
    let mut best_score = f64::NEG_INFINITY;
    let mut best_mag = i64::MAX;
    for iy in 0..side {
        for ix in 0..side {
            let s = scores[iy * side + ix];
            let (vx, vy) = (ix as i32 - r, iy as i32 - r);
            let mag = (vx as i64) * (vx as i64) + (vy as i64) * (vy as i64);
            if s > best_score || (s == best_score && mag < best_mag) {
                best_score = s;
                best_mag = mag;
                best = (vx, vy);
            }
        }
    }
    best
}

/// Sub-pixel refinement: a separable 1-D parabola per axis through the
/// three scores centered on the peak,
/// `delta = (s[-1] - s[+1]) / (2*(s[-1] - 2*s[0] + s[+1]))`,
/// clamped to [-0.5, 0.5]. Peaks on the window border are returned
/// unrefined.
pub fn refine_peak(map: &SimilarityMap) -> ((f64, f64), bool) {
    let r = map.search_radius as i32;
    let (px, py) = map.peak;
    if px.abs() >= r || py.abs() >= r {
        return ((0.0, 0.0), false);
    }
    let axis = |sm1: f64, s0: f64, sp1: f64| -> f64 {
        let denom = 2.0 * (sm1 - 2.0 * s0 + sp1);
        if denom.abs() < 1e-12 {
            0.0
        } else {
            ((sm1 - sp1) / denom).clamp(-0.5, 0.5)
        }
    };
    let dx = axis(
        map.score_at(px - 1, py),
        map.score_at(px, py),
        map.score_at(px + 1, py),
    );
    let dy = axis(
        map.score_at(px, py - 1),
        map.score_at(px, py),
        map.score_at(px, py + 1),
    );
    ((dx, dy), true)
}

/// Free-function form of the refinement returning the refined offset.
pub fn subpixel_refine(map: &SimilarityMap) -> (f64, f64) {
    let (delta, refined) = refine_peak(map);
    if refined {
        (map.peak.0 as f64 + delta.0, map.peak.1 as f64 + delta.1)
    } else {
        (map.peak.0 as f64, map.peak.1 as f64)
    }
}

pub(crate) use fft::{next_fast_len, Fft2};

/// Shared footprint check: `center` must keep `margin` pixels on every
/// side inside a `width x height` grid.
pub(crate) fn check_window(
    width: usize,
    height: usize,
    center: (usize, usize),
    margin: usize,
    what: &str,
) -> Result<()> {
    let (cx, cy) = center;
    if cx < margin || cy < margin || cx + margin >= width || cy + margin >= height {
        return Err(CfogError::MatchSkipped(format!(
            "{what} footprint needs {margin}px around ({cx},{cy}) in a {width}x{height} grid"
        )));
    }
    Ok(())
}
