//! Feature-point matching: turns detected reference points into control
//! points by scoring a search window around each geo-predicted sensed
//! location with the configured similarity measure.
//!
//! Large inputs are matched chip by chip so the peak resident footprint
//! depends on the chip geometry, not the frame size; small inputs build
//! the descriptor volumes once for the whole image. Chip crops are padded
//! by the descriptor footprint radius, so both modes score identical
//! windows.

use crate::control_point::ControlPoint;
use crate::descriptor::{CfogParams, Descriptor, HogParams, LssParams, SurfParams};
use crate::error::{CfogError, Result};
use crate::geo::geo_predict;
use crate::harris::FeaturePoint;
use crate::image::{gaussian_convolve, Image};
use crate::parallel::ordered_map;
use crate::similarity::{
    mi_match_at, ncc_match_at, ssd_match_fft_at, MatchConfig, Measure, SimilarityMap,
};

/// Descriptor parameters for every measure, so one bundle configures any
/// measure choice.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DescriptorBank {
    pub cfog: CfogParams,
    pub hog: HogParams,
    pub lss: LssParams,
    pub surf: SurfParams,
}

impl DescriptorBank {
    /// Descriptor backing a measure; `None` for the intensity measures.
    pub fn for_measure(&self, measure: Measure) -> Option<Descriptor> {
        match measure {
            Measure::Cfog => Some(Descriptor::Cfog(self.cfog)),
            Measure::Fhog => Some(Descriptor::Hog(self.hog)),
            Measure::Flss => Some(Descriptor::Lss(self.lss)),
            Measure::Fsurf => Some(Descriptor::Surf(self.surf)),
            Measure::Ncc | Measure::Mi => None,
        }
    }
}

/// Options of the system-level matcher beyond [`MatchConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct MatchOptions {
    pub bank: DescriptorBank,
    /// Optional Gaussian pre-smoothing of both inputs (0 disables it).
    pub pre_smooth_sigma: f64,
    /// Above this pixel count, descriptor volumes are built per chip
    /// instead of per image.
    pub chip_pixel_threshold: usize,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            bank: DescriptorBank::default(),
            pre_smooth_sigma: 0.0,
            chip_pixel_threshold: 4_000_000,
        }
    }
}

/// One skipped feature point and why.
#[derive(Debug, Clone)]
pub struct SkippedPoint {
    pub index: usize,
    pub point: FeaturePoint,
    pub reason: String,
}

/// Matching result: control points in input order plus skip bookkeeping.
#[derive(Debug, Clone)]
pub struct MatchOutcome {
    pub control_points: Vec<ControlPoint>,
    pub skipped: Vec<SkippedPoint>,
}

/// Minimum border distance a reference point needs before matching:
/// template half-side plus search radius.
pub fn border_margin(cfg: &MatchConfig) -> usize {
    cfg.half() + cfg.search_radius
}

/// Drops feature points that sit too close to the image border for the
/// given matching configuration.
pub fn filter_border_points(
    points: &[FeaturePoint],
    width: usize,
    height: usize,
    cfg: &MatchConfig,
) -> Vec<FeaturePoint> {
    let m = border_margin(cfg);
    points
        .iter()
        .filter(|fp| fp.x >= m && fp.y >= m && fp.x + m < width && fp.y + m < height)
        .copied()
        .collect()
}

/// Matches every feature point. Points whose footprints leave either
/// image are skipped and reported, never fatal.
pub fn match_points(
    reference: &Image,
    sensed: &Image,
    points: &[FeaturePoint],
    cfg: &MatchConfig,
    opts: &MatchOptions,
) -> Result<MatchOutcome> {
    cfg.validate()?;
    let (reference, sensed) = presmooth(reference, sensed, opts)?;
    let reference = reference.as_ref();
    let sensed = sensed.as_ref();

    let descriptor = opts.bank.for_measure(cfg.measure);
    let whole_image = reference.pixel_count().max(sensed.pixel_count())
        <= opts.chip_pixel_threshold;

    // Whole-image volumes are built once and shared by every match.
    let volumes = match (&descriptor, whole_image) {
        (Some(desc), true) => Some((desc.build(reference)?, desc.build(sensed)?)),
        _ => None,
    };

    let jobs: Vec<(usize, FeaturePoint)> =
        points.iter().copied().enumerate().collect();
    let results: Vec<std::result::Result<ControlPoint, SkippedPoint>> =
        ordered_map(jobs, |(index, point)| {
            match_one(reference, sensed, index, point, cfg, &descriptor, &volumes)
        });

    let mut control_points = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(cp) => control_points.push(cp),
            Err(s) => skipped.push(s),
        }
    }
    Ok(MatchOutcome {
        control_points,
        skipped,
    })
}

fn presmooth<'a>(
    reference: &'a Image,
    sensed: &'a Image,
    opts: &MatchOptions,
) -> Result<(std::borrow::Cow<'a, Image>, std::borrow::Cow<'a, Image>)> {
    use std::borrow::Cow;
    if opts.pre_smooth_sigma > 0.0 {
        Ok((
            Cow::Owned(gaussian_convolve(reference, opts.pre_smooth_sigma)?),
            Cow::Owned(gaussian_convolve(sensed, opts.pre_smooth_sigma)?),
        ))
    } else {
        Ok((Cow::Borrowed(reference), Cow::Borrowed(sensed)))
    }
}

#[allow(clippy::too_many_arguments)]
fn match_one(
    reference: &Image,
    sensed: &Image,
    index: usize,
    point: FeaturePoint,
    cfg: &MatchConfig,
    descriptor: &Option<Descriptor>,
    volumes: &Option<(crate::volume::FeatureVolume, crate::volume::FeatureVolume)>,
) -> std::result::Result<ControlPoint, SkippedPoint> {
    let skip = |reason: String| SkippedPoint {
        index,
        point,
        reason,
    };

    // Predicted sensed center: georeferencing when both frames carry it,
    // identity otherwise.
    let predicted = match (reference.geo(), sensed.geo()) {
        (Some(rg), Some(sg)) => geo_predict(rg, sg, (point.x as f64, point.y as f64))
            .map_err(|e| skip(e.to_string()))?,
        _ => (point.x as f64, point.y as f64),
    };
    let pred = (predicted.0.round(), predicted.1.round());
    let h = cfg.half();
    let r = cfg.search_radius;
    let sen_margin = (h + r) as f64;
    if pred.0 < sen_margin
        || pred.1 < sen_margin
        || pred.0 + sen_margin >= sensed.width() as f64
        || pred.1 + sen_margin >= sensed.height() as f64
    {
        return Err(skip(format!(
            "predicted center ({:.1},{:.1}) lacks the {}px search footprint",
            predicted.0,
            predicted.1,
            h + r
        )));
    }
    if point.x < h || point.y < h || point.x + h >= reference.width() || point.y + h >= reference.height() {
        return Err(skip(format!(
            "reference point ({},{}) lacks the {h}px template footprint",
            point.x, point.y
        )));
    }
    let pred = (pred.0 as usize, pred.1 as usize);

    let map = run_measure(reference, sensed, point, pred, cfg, descriptor, volumes)
        .map_err(|e| skip(e.to_string()))?;
    if map.degenerate {
        return Err(skip("degenerate similarity map (flat template)".into()));
    }
    Ok(ControlPoint::new(
        (point.x as f64, point.y as f64),
        (
            pred.0 as f64 + map.subpixel.0,
            pred.1 as f64 + map.subpixel.1,
        ),
        map.score_at(map.peak.0, map.peak.1),
    ))
}

#[allow(clippy::too_many_arguments)]
fn run_measure(
    reference: &Image,
    sensed: &Image,
    point: FeaturePoint,
    pred: (usize, usize),
    cfg: &MatchConfig,
    descriptor: &Option<Descriptor>,
    volumes: &Option<(crate::volume::FeatureVolume, crate::volume::FeatureVolume)>,
) -> Result<SimilarityMap> {
    let ref_center = (point.x, point.y);
    match descriptor {
        None => match cfg.measure {
            Measure::Ncc => ncc_match_at(reference, ref_center, sensed, pred, cfg),
            Measure::Mi => mi_match_at(reference, ref_center, sensed, pred, cfg),
            _ => unreachable!("descriptor measures carry a descriptor"),
        },
        Some(_) if volumes.is_some() => {
            let (d1, d2) = volumes.as_ref().unwrap();
            ssd_match_fft_at(d1, ref_center, d2, pred, cfg)
        }
        Some(desc) => {
            // Chip mode: crop template and search neighborhoods padded by
            // the descriptor footprint, build volumes on the chips only.
            let fpr = desc.footprint_radius();
            let h = cfg.half();
            let r = cfg.search_radius;
            let (ref_chip, ref_local) =
                crop_around(reference, ref_center, h + fpr)?;
            let (sen_chip, sen_local) = crop_around(sensed, pred, h + r + fpr)?;
            let d1 = desc.build(&ref_chip)?;
            let d2 = desc.build(&sen_chip)?;
            ssd_match_fft_at(&d1, ref_local, &d2, sen_local, cfg)
        }
    }
}

/// Crops a window of half-size `half` around `center`, clamped to the
/// image; returns the chip and the center's chip-local coordinates.
fn crop_around(
    img: &Image,
    center: (usize, usize),
    half: usize,
) -> Result<(Image, (usize, usize))> {
    let side = 2 * half + 1;
    if img.width() < side || img.height() < side {
        return Err(CfogError::MatchSkipped(format!(
            "image {}x{} smaller than required {side}px chip",
            img.width(),
            img.height()
        )));
    }
    let x0 = center.0.saturating_sub(half).min(img.width() - side);
    let y0 = center.1.saturating_sub(half).min(img.height() - side);
    let chip = img.crop(x0, y0, side, side)?;
    Ok((chip, (center.0 - x0, center.1 - y0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harris::{detect_harris, HarrisParams};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn textured(seed: u64, size: usize) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Image::from_fn(size, size, |_, _| rng.random::<f64>());
        gaussian_convolve(&noise, 1.5).unwrap().stretched()
    }

    fn shifted(img: &Image, dx: i32, dy: i32) -> Image {
        Image::from_fn(img.width(), img.height(), |x, y| {
            let sx = (x as i32 - dx).clamp(0, img.width() as i32 - 1) as usize;
            let sy = (y as i32 - dy).clamp(0, img.height() as i32 - 1) as usize;
            img.get(sx, sy)
        })
    }

    fn setup(size: usize) -> (Image, Vec<FeaturePoint>, MatchConfig) {
        let img = textured(3, size);
        let cfg = MatchConfig {
            template_size: 41,
            search_radius: 8,
            ..MatchConfig::default()
        };
        let hp = HarrisParams {
            grid_n: 4,
            k_per_chip: 1,
            chip_size: 40,
            ..HarrisParams::default()
        };
        let pts = detect_harris(&img, &hp).unwrap();
        let pts = filter_border_points(&pts, size, size, &cfg);
        assert!(pts.len() >= 4, "need detectable texture");
        (img, pts, cfg)
    }

    #[test]
    fn self_matching_returns_identity_points() {
        let (img, pts, cfg) = setup(160);
        let out = match_points(&img, &img, &pts, &cfg, &MatchOptions::default()).unwrap();
        assert_eq!(out.control_points.len(), pts.len());
        for cp in &out.control_points {
            assert!((cp.sen_xy.0 - cp.ref_xy.0).abs() < 0.01);
            assert!((cp.sen_xy.1 - cp.ref_xy.1).abs() < 0.01);
        }
    }

    #[test]
    fn integer_translation_is_recovered() {
        let (img, pts, cfg) = setup(160);
        let moved = shifted(&img, 5, -3);
        let out = match_points(&img, &moved, &pts, &cfg, &MatchOptions::default()).unwrap();
        assert!(!out.control_points.is_empty());
        for cp in &out.control_points {
            assert!((cp.sen_xy.0 - cp.ref_xy.0 - 5.0).abs() < 0.15);
            assert!((cp.sen_xy.1 - cp.ref_xy.1 + 3.0).abs() < 0.15);
        }
    }

    #[test]
    fn chip_mode_equals_whole_image_mode() {
        let (img, pts, cfg) = setup(160);
        let moved = shifted(&img, 2, 4);
        let whole = match_points(&img, &moved, &pts, &cfg, &MatchOptions::default()).unwrap();
        let chip_opts = MatchOptions {
            chip_pixel_threshold: 0, // force chip mode
            ..MatchOptions::default()
        };
        let chips = match_points(&img, &moved, &pts, &cfg, &chip_opts).unwrap();
        assert_eq!(whole.control_points.len(), chips.control_points.len());
        for (a, b) in whole.control_points.iter().zip(&chips.control_points) {
            assert!((a.sen_xy.0 - b.sen_xy.0).abs() < 1e-9);
            assert!((a.sen_xy.1 - b.sen_xy.1).abs() < 1e-9);
        }
    }

    #[test]
    fn geo_prediction_centers_the_search() {
        use crate::geo::GeoTransform;
        let (img, pts, cfg) = setup(192);
        // Plant a 20 px shift, far beyond the 8 px search radius, and let
        // georeferencing absorb it.
        let moved = shifted(&img, 20, 0);
        let mut r = img.clone();
        r.set_geo(Some(GeoTransform::north_up(1.0, 0.0, 0.0)));
        let mut s = moved.clone();
        s.set_geo(Some(GeoTransform::north_up(1.0, -20.0, 0.0)));
        let pts = filter_border_points(&pts, 192, 192, &cfg)
            .into_iter()
            .filter(|fp| fp.x + 20 + border_margin(&cfg) < 192)
            .collect::<Vec<_>>();
        assert!(!pts.is_empty());
        let out = match_points(&r, &s, &pts, &cfg, &MatchOptions::default()).unwrap();
        for cp in &out.control_points {
            assert!((cp.sen_xy.0 - cp.ref_xy.0 - 20.0).abs() < 0.15);
        }
    }

    #[test]
    fn out_of_footprint_points_are_skipped_with_reasons() {
        let img = textured(9, 160);
        let cfg = MatchConfig {
            template_size: 41,
            search_radius: 8,
            ..MatchConfig::default()
        };
        let pts = vec![
            FeaturePoint { x: 2, y: 2, response: 1.0 },
            FeaturePoint { x: 80, y: 80, response: 1.0 },
        ];
        let out = match_points(&img, &img, &pts, &cfg, &MatchOptions::default()).unwrap();
        assert_eq!(out.control_points.len(), 1);
        assert_eq!(out.skipped.len(), 1);
        assert_eq!(out.skipped[0].index, 0);
        assert!(out.skipped[0].reason.contains("footprint"));
    }

    #[test]
    fn intensity_measures_run_without_volumes() {
        let (img, pts, mut cfg) = setup(160);
        for measure in [Measure::Ncc, Measure::Mi] {
            cfg.measure = measure;
            let out = match_points(&img, &img, &pts, &cfg, &MatchOptions::default()).unwrap();
            for cp in &out.control_points {
                assert!((cp.sen_xy.0 - cp.ref_xy.0).abs() < 0.01);
            }
        }
    }
}
