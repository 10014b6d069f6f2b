//! Browser demo bindings. Three interactive operations, all returning
//! plain pixel buffers the page paints onto canvases:
//!
//! 1. synthetic-pair explorer with per-measure similarity maps,
//! 2. oriented-gradient channel montage with live sigma/m sliders,
//! 3. a miniature end-to-end registration run on a planted warp.
//!
//! Build with `wasm-pack build crates/cfog-web --target web` (or
//! `cargo build --target wasm32-unknown-unknown` plus `wasm-bindgen`);
//! the static page lives in `www/`.

use wasm_bindgen::prelude::*;

use cfog::config::RunConfig;
use cfog::descriptor::{build_cfog, CfogParams};
use cfog::image::Image;
use cfog::pipeline::register_images;
use cfog::similarity::{
    mi_match, ncc_match, ssd_match_fft, MatchConfig, Measure, SimilarityMap,
};
use cfog::synth::{
    generate_pair, PlantedTransform, RadiometricMap, Scene, SyntheticPairSpec,
};

fn parse_scene(name: &str) -> Result<Scene, JsError> {
    Ok(match name {
        "checkerboard" => Scene::Checkerboard { cell: 24 },
        "blobs" => Scene::Blobs { count: 60 },
        "filtered-noise" => Scene::FilteredNoise { sigma: 2.0 },
        other => return Err(JsError::new(&format!("unknown scene {other:?}"))),
    })
}

fn parse_radiometric(name: &str) -> Result<RadiometricMap, JsError> {
    Ok(match name {
        "identity" => RadiometricMap::Identity,
        "inversion" => RadiometricMap::Inversion,
        "gamma" => RadiometricMap::Gamma(0.4),
        "quantize" => RadiometricMap::Quantize(8),
        "region-remap" => RadiometricMap::RegionRemap { grid: 4 },
        other => return Err(JsError::new(&format!("unknown radiometric map {other:?}"))),
    })
}

fn gray_rgba(img: &Image) -> Vec<u8> {
    let mut out = Vec::with_capacity(img.pixel_count() * 4);
    for &v in img.pixels() {
        let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        out.extend_from_slice(&[g, g, g, 255]);
    }
    out
}

/// Small warm-to-bright color ramp for score maps.
fn heat_rgba(values: &[f64]) -> Vec<u8> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let anchors: [(f64, [f64; 3]); 5] = [
        (0.0, [10.0, 7.0, 40.0]),
        (0.35, [120.0, 28.0, 109.0]),
        (0.65, [227.0, 89.0, 51.0]),
        (0.9, [249.0, 188.0, 60.0]),
        (1.0, [252.0, 255.0, 164.0]),
    ];
    let mut out = Vec::with_capacity(values.len() * 4);
    for &v in values {
        let t = ((v - lo) / span).clamp(0.0, 1.0);
        let mut rgb = anchors[anchors.len() - 1].1;
        for w in anchors.windows(2) {
            let (t0, c0) = w[0];
            let (t1, c1) = w[1];
            if t >= t0 && t <= t1 {
                let f = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
                rgb = [
                    c0[0] + f * (c1[0] - c0[0]),
                    c0[1] + f * (c1[1] - c0[1]),
                    c0[2] + f * (c1[2] - c0[2]),
                ];
                break;
            }
        }
        out.extend_from_slice(&[rgb[0] as u8, rgb[1] as u8, rgb[2] as u8, 255]);
    }
    out
}

/// A generated reference/sensed pair with its planted shift.
#[wasm_bindgen]
pub struct DemoPair {
    reference: Image,
    sensed: Image,
    dx: f64,
    dy: f64,
}

#[wasm_bindgen]
impl DemoPair {
    /// Generates a pair: `noise_variance` in [0, 0.01], integer shift
    /// components within +-10.
    #[wasm_bindgen(constructor)]
    pub fn new(
        scene: &str,
        radiometric: &str,
        noise_variance: f64,
        dx: f64,
        dy: f64,
        seed: u32,
        size: usize,
    ) -> Result<DemoPair, JsError> {
        let spec = SyntheticPairSpec {
            width: size.clamp(96, 512),
            height: size.clamp(96, 512),
            scene: parse_scene(scene)?,
            radiometric: parse_radiometric(radiometric)?,
            noise_variance: noise_variance.clamp(0.0, 0.01),
            transform: PlantedTransform::Translation {
                dx: dx.clamp(-10.0, 10.0),
                dy: dy.clamp(-10.0, 10.0),
            },
        };
        let pair = generate_pair(&spec, seed as u64).map_err(|e| JsError::new(&e.to_string()))?;
        Ok(DemoPair {
            reference: pair.reference,
            sensed: pair.sensed,
            dx: dx.clamp(-10.0, 10.0),
            dy: dy.clamp(-10.0, 10.0),
        })
    }

    pub fn width(&self) -> usize {
        self.reference.width()
    }

    pub fn height(&self) -> usize {
        self.reference.height()
    }

    pub fn reference_rgba(&self) -> Vec<u8> {
        gray_rgba(&self.reference)
    }

    pub fn sensed_rgba(&self) -> Vec<u8> {
        gray_rgba(&self.sensed)
    }

    /// Similarity map of the frame center for one measure.
    pub fn similarity_map(
        &self,
        measure: &str,
        template_size: usize,
        search_radius: usize,
    ) -> Result<SimMapView, JsError> {
        let measure: Measure = measure
            .parse()
            .map_err(|e: cfog::CfogError| JsError::new(&e.to_string()))?;
        let mut template_size = template_size.clamp(9, 151) | 1; // odd
        let search_radius = search_radius.clamp(4, 16);
        // Keep the search footprint inside the frame.
        let max_t = self.reference.width().min(self.reference.height());
        while template_size + 2 * search_radius + 2 >= max_t {
            template_size -= 2;
        }
        let cfg = MatchConfig {
            template_size,
            search_radius,
            measure,
            mi_bins: 32,
        };
        let center = (self.reference.width() / 2, self.reference.height() / 2);
        let map = match measure {
            Measure::Ncc => ncc_match(&self.reference, &self.sensed, center, &cfg),
            Measure::Mi => mi_match(&self.reference, &self.sensed, center, &cfg),
            _ => {
                let bank = cfog::matching::DescriptorBank::default();
                let desc = bank.for_measure(measure).expect("descriptor measure");
                let d1 = desc.build(&self.reference).map_err(|e| JsError::new(&e.to_string()))?;
                let d2 = desc.build(&self.sensed).map_err(|e| JsError::new(&e.to_string()))?;
                ssd_match_fft(&d1, &d2, center, &cfg)
            }
        }
        .map_err(|e| JsError::new(&e.to_string()))?;
        Ok(SimMapView::from_map(&map, self.dx, self.dy))
    }
}

/// A similarity map rendered as a heatmap plus its peak bookkeeping.
#[wasm_bindgen]
pub struct SimMapView {
    rgba: Vec<u8>,
    side: usize,
    peak_x: i32,
    peak_y: i32,
    sub_x: f64,
    sub_y: f64,
    true_dx: f64,
    true_dy: f64,
    degenerate: bool,
}

impl SimMapView {
    fn from_map(map: &SimilarityMap, true_dx: f64, true_dy: f64) -> SimMapView {
        SimMapView {
            rgba: heat_rgba(&map.scores),
            side: map.side(),
            peak_x: map.peak.0,
            peak_y: map.peak.1,
            sub_x: map.subpixel.0,
            sub_y: map.subpixel.1,
            true_dx,
            true_dy,
            degenerate: map.degenerate,
        }
    }
}

#[wasm_bindgen]
impl SimMapView {
    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }
    pub fn side(&self) -> usize {
        self.side
    }
    pub fn peak_x(&self) -> i32 {
        self.peak_x
    }
    pub fn peak_y(&self) -> i32 {
        self.peak_y
    }
    pub fn sub_x(&self) -> f64 {
        self.sub_x
    }
    pub fn sub_y(&self) -> f64 {
        self.sub_y
    }
    pub fn true_dx(&self) -> f64 {
        self.true_dx
    }
    pub fn true_dy(&self) -> f64 {
        self.true_dy
    }
    pub fn degenerate(&self) -> bool {
        self.degenerate
    }
    /// Location error of the sub-pixel peak against the planted shift.
    pub fn error_px(&self) -> f64 {
        ((self.sub_x - self.true_dx).powi(2) + (self.sub_y - self.true_dy).powi(2)).sqrt()
    }
    /// The 1.5-pixel correctness rule.
    pub fn correct(&self) -> bool {
        !self.degenerate && self.error_px() < 1.5
    }
}

/// Oriented-gradient channel montage: the input scene plus its `m`
/// channels tiled into one image.
#[wasm_bindgen]
pub struct ChannelMontage {
    rgba: Vec<u8>,
    width: usize,
    height: usize,
    tiles: usize,
}

#[wasm_bindgen]
impl ChannelMontage {
    #[wasm_bindgen(constructor)]
    pub fn new(scene: &str, sigma: f64, m: usize, seed: u32, size: usize) -> Result<ChannelMontage, JsError> {
        let size = size.clamp(64, 256);
        let spec = SyntheticPairSpec {
            width: size,
            height: size,
            scene: parse_scene(scene)?,
            radiometric: RadiometricMap::Identity,
            noise_variance: 0.0,
            transform: PlantedTransform::identity(),
        };
        let img = generate_pair(&spec, seed as u64)
            .map_err(|e| JsError::new(&e.to_string()))?
            .reference;
        let params = CfogParams {
            m: m.clamp(2, 24),
            sigma: sigma.clamp(0.2, 4.0),
            normalize: true,
        };
        let vol = build_cfog(&img, &params).map_err(|e| JsError::new(&e.to_string()))?;

        // Tile: input image first, then each channel stretched to [0,1].
        let tiles = params.m + 1;
        let cols = (tiles as f64).sqrt().ceil() as usize;
        let rows = tiles.div_ceil(cols);
        let (tw, th) = (size, size);
        let width = cols * tw;
        let height = rows * th;
        let mut canvas = vec![0u8; width * height * 4];
        let mut blit = |tile: usize, img: &Image| {
            let ox = (tile % cols) * tw;
            let oy = (tile / cols) * th;
            for y in 0..th {
                for x in 0..tw {
                    let g = (img.get(x, y).clamp(0.0, 1.0) * 255.0).round() as u8;
                    let i = ((oy + y) * width + ox + x) * 4;
                    canvas[i] = g;
                    canvas[i + 1] = g;
                    canvas[i + 2] = g;
                    canvas[i + 3] = 255;
                }
            }
        };
        blit(0, &img);
        for c in 0..params.m {
            blit(c + 1, &vol.channel_plane(c).stretched());
        }
        Ok(ChannelMontage {
            rgba: canvas,
            width,
            height,
            tiles,
        })
    }

    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn tiles(&self) -> usize {
        self.tiles
    }
}

/// Miniature end-to-end registration on a planted affine warp.
#[wasm_bindgen]
pub struct RegisterDemo {
    ref_rgba: Vec<u8>,
    sen_rgba: Vec<u8>,
    rect_rgba: Vec<u8>,
    size: usize,
    cps: Vec<f64>, // x0,y0 (ref), x1,y1 (sensed) per surviving point
    rmse: f64,
    converged: bool,
    matched: usize,
    removed: usize,
}

#[wasm_bindgen]
impl RegisterDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(scene: &str, radiometric: &str, seed: u32) -> Result<RegisterDemo, JsError> {
        let size = 192usize;
        let spec = SyntheticPairSpec {
            width: size,
            height: size,
            scene: parse_scene(scene)?,
            radiometric: parse_radiometric(radiometric)?,
            noise_variance: 0.001,
            transform: PlantedTransform::Affine([1.015, 0.02, -4.0, -0.015, 0.99, 3.0]),
        };
        let pair = generate_pair(&spec, seed as u64).map_err(|e| JsError::new(&e.to_string()))?;

        let mut cfg = RunConfig::default();
        for (k, v) in [
            ("match.template_size", "41"),
            ("match.search_radius", "10"),
            ("harris.grid_n", "5"),
            ("harris.chip_size", "36"),
            ("harris.min_response", "1e-9"),
            ("registration.rmse_threshold", "1.0"),
            ("registration.min_cps", "10"),
        ] {
            cfg.set(k, v).map_err(|e| JsError::new(&e))?;
        }
        let art = register_images(&pair.reference, &pair.sensed, &cfg)
            .map_err(|e| JsError::new(&e.to_string()))?;
        let rect = art
            .rectified
            .as_ref()
            .map(|r| gray_rgba(&r.image))
            .unwrap_or_else(|| vec![0; size * size * 4]);
        let mut cps = Vec::new();
        for cp in &art.rejection.survivors {
            cps.extend_from_slice(&[cp.ref_xy.0, cp.ref_xy.1, cp.sen_xy.0, cp.sen_xy.1]);
        }
        Ok(RegisterDemo {
            ref_rgba: gray_rgba(&pair.reference),
            sen_rgba: gray_rgba(&pair.sensed),
            rect_rgba: rect,
            size,
            cps,
            rmse: art.rejection.final_rmse,
            converged: art.rejection.converged,
            matched: art.matched.len(),
            removed: art.rejection.removed.len(),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }
    pub fn reference_rgba(&self) -> Vec<u8> {
        self.ref_rgba.clone()
    }
    pub fn sensed_rgba(&self) -> Vec<u8> {
        self.sen_rgba.clone()
    }
    pub fn rectified_rgba(&self) -> Vec<u8> {
        self.rect_rgba.clone()
    }
    /// Surviving control points, flattened `[ref_x, ref_y, sen_x, sen_y]*`.
    pub fn control_points(&self) -> Vec<f64> {
        self.cps.clone()
    }
    pub fn rmse(&self) -> f64 {
        self.rmse
    }
    pub fn converged(&self) -> bool {
        self.converged
    }
    pub fn matched(&self) -> usize {
        self.matched
    }
    pub fn removed(&self) -> usize {
        self.removed
    }
}
