//! Run configuration: a flat `key = value` text document with sections,
//! validated against every owning type's invariants before any
//! computation. Unknown sections or keys are rejected.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{CfogError, Result};
use crate::harris::HarrisParams;
use crate::image::GradientOp;
use crate::matching::{DescriptorBank, MatchOptions};
use crate::registration::term_count;
use crate::similarity::{MatchConfig, Measure};

/// Commented sample shipped with the repository (`cfog.conf.sample`).
pub const SAMPLE_CONFIG: &str = r#"# cfog run configuration.
# Flat key = value entries grouped in [sections]; '#' starts a comment.
# Unknown sections or keys are rejected. Every value shown here is the
# built-in default, so an empty file is also a valid configuration.

[descriptor]
cfog_m = 9              # oriented-gradient channels
cfog_sigma = 0.8        # spatial Gaussian std-dev
cfog_normalize = true   # per-pixel L2 normalization
hog_cell_size = 4       # pixels per HOG cell (block = 2x2 cells)
lss_patch_radius = 2    # 5x5 patches
lss_region_radius = 20  # 41x41 region
lss_radial_bins = 3
lss_angular_bins = 8
lss_var_noise = 0.000384467512495194  # 25 gray levels^2 on an 8-bit scale
surf_haar_scale = 2     # Haar wavelet half-size
pre_smooth_sigma = 0    # optional input smoothing; 0 = off
gradient_op = central   # central | sobel

[match]
measure = cfog          # cfog | fhog | flss | fsurf | ncc | mi
template_size = 81      # odd template side
# search_radius is the move range of the template's CENTER pixel, so the
# scanned window spans (template_size + 2*search_radius) pixels. Systems
# that define "search window" as that full span would quote
# template_size + 2*search_radius instead.
search_radius = 40
mi_bins = 32
chip_pixel_threshold = 4000000  # above this, match chip-by-chip

[harris]
grid_n = 10             # grid cells per axis; one chip per cell
k_per_chip = 2
chip_size = 60
harris_k = 0.04
min_response = 1e-6
min_separation = 8

[registration]
model_order = 3         # 1 | 2 | 3 (cubic)
rmse_threshold = 3.5    # pixels; rejection stops below this
min_cps = 12            # rejection never drops below this many points

[run]
jobs = 0                # worker threads, 0 = all cores
seed = 42               # synthetic-suite seed (bench)
output_dir = cfog-out
"#;

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub bank: DescriptorBank,
    pub pre_smooth_sigma: f64,
    pub gradient_op: GradientOp,
    pub match_cfg: MatchConfig,
    pub chip_pixel_threshold: usize,
    pub harris: HarrisParams,
    pub model_order: usize,
    pub rmse_threshold: f64,
    pub min_cps: usize,
    pub jobs: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            bank: DescriptorBank::default(),
            pre_smooth_sigma: 0.0,
            gradient_op: GradientOp::CentralDiff,
            // System defaults: 81-px template, +-40 px center move range.
            match_cfg: MatchConfig {
                template_size: 81,
                search_radius: 40,
                ..MatchConfig::default()
            },
            chip_pixel_threshold: 4_000_000,
            harris: HarrisParams::default(),
            model_order: 3,
            rmse_threshold: 3.5,
            min_cps: 12,
            jobs: 0,
            seed: 42,
            output_dir: PathBuf::from("cfog-out"),
        }
    }
}

impl RunConfig {
    /// Parses a config document on top of the defaults.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| CfogError::Config(format!("line {}: bad section header {raw:?}", lineno + 1)))?;
                section = name.trim().to_string();
                if !matches!(
                    section.as_str(),
                    "descriptor" | "match" | "harris" | "registration" | "run"
                ) {
                    return Err(CfogError::Config(format!(
                        "line {}: unknown section [{section}]",
                        lineno + 1
                    )));
                }
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CfogError::Config(format!("line {}: expected key = value, found {raw:?}", lineno + 1))
            })?;
            cfg.set(&format!("{section}.{}", key.trim()), value.trim())
                .map_err(|e| CfogError::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one `section.key` entry; CLI flag overrides use this too.
    pub fn set(&mut self, dotted_key: &str, value: &str) -> std::result::Result<(), String> {
        let parse_usize = |v: &str| v.parse::<usize>().map_err(|_| format!("bad integer {v:?}"));
        let parse_f64 = |v: &str| v.parse::<f64>().map_err(|_| format!("bad number {v:?}"));
        let parse_u64 = |v: &str| v.parse::<u64>().map_err(|_| format!("bad integer {v:?}"));
        let parse_bool = |v: &str| match v.to_ascii_lowercase().as_str() {
            "true" | "on" | "1" | "yes" => Ok(true),
            "false" | "off" | "0" | "no" => Ok(false),
            other => Err(format!("bad boolean {other:?}")),
        };
        match dotted_key {
            "descriptor.cfog_m" => self.bank.cfog.m = parse_usize(value)?,
            "descriptor.cfog_sigma" => self.bank.cfog.sigma = parse_f64(value)?,
            "descriptor.cfog_normalize" => self.bank.cfog.normalize = parse_bool(value)?,
            "descriptor.hog_cell_size" => self.bank.hog.cell_size = parse_usize(value)?,
            "descriptor.lss_patch_radius" => self.bank.lss.patch_radius = parse_usize(value)?,
            "descriptor.lss_region_radius" => self.bank.lss.region_radius = parse_usize(value)?,
            "descriptor.lss_radial_bins" => self.bank.lss.radial_bins = parse_usize(value)?,
            "descriptor.lss_angular_bins" => self.bank.lss.angular_bins = parse_usize(value)?,
            "descriptor.lss_var_noise" => self.bank.lss.var_noise = parse_f64(value)?,
            "descriptor.surf_haar_scale" => self.bank.surf.haar_scale = parse_usize(value)?,
            "descriptor.pre_smooth_sigma" => self.pre_smooth_sigma = parse_f64(value)?,
            "descriptor.gradient_op" => {
                self.gradient_op = match value.to_ascii_lowercase().as_str() {
                    "central" => GradientOp::CentralDiff,
                    "sobel" => GradientOp::Sobel,
                    other => return Err(format!("bad gradient_op {other:?} (central|sobel)")),
                }
            }
            "match.measure" => {
                self.match_cfg.measure = value.parse::<Measure>().map_err(|e| e.to_string())?
            }
            "match.template_size" => self.match_cfg.template_size = parse_usize(value)?,
            "match.search_radius" => self.match_cfg.search_radius = parse_usize(value)?,
            "match.mi_bins" => self.match_cfg.mi_bins = parse_usize(value)?,
            "match.chip_pixel_threshold" => self.chip_pixel_threshold = parse_usize(value)?,
            "harris.grid_n" => self.harris.grid_n = parse_usize(value)?,
            "harris.k_per_chip" => self.harris.k_per_chip = parse_usize(value)?,
            "harris.chip_size" => self.harris.chip_size = parse_usize(value)?,
            "harris.harris_k" => self.harris.harris_k = parse_f64(value)?,
            "harris.min_response" => self.harris.min_response = parse_f64(value)?,
            "harris.min_separation" => self.harris.min_separation = parse_usize(value)?,
            "registration.model_order" => self.model_order = parse_usize(value)?,
            "registration.rmse_threshold" => self.rmse_threshold = parse_f64(value)?,
            "registration.min_cps" => self.min_cps = parse_usize(value)?,
            "run.jobs" => self.jobs = parse_usize(value)?,
            "run.seed" => self.seed = parse_u64(value)?,
            "run.output_dir" => self.output_dir = PathBuf::from(value),
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Validates every parameter against its owning type's invariants.
    pub fn validate(&self) -> Result<()> {
        self.bank.cfog.validate()?;
        self.bank.hog.validate()?;
        self.bank.lss.validate()?;
        self.bank.surf.validate()?;
        self.match_cfg.validate()?;
        self.harris.validate()?;
        if self.pre_smooth_sigma < 0.0 {
            return Err(CfogError::Config("pre_smooth_sigma must be >= 0".into()));
        }
        if !(1..=3).contains(&self.model_order) {
            return Err(CfogError::Config(format!(
                "model_order must be 1..=3, got {}",
                self.model_order
            )));
        }
        if !(self.rmse_threshold > 0.0) {
            return Err(CfogError::Config("rmse_threshold must be > 0".into()));
        }
        if self.min_cps < term_count(self.model_order) {
            return Err(CfogError::Config(format!(
                "min_cps {} below the {} terms of an order-{} model",
                self.min_cps,
                term_count(self.model_order),
                self.model_order
            )));
        }
        Ok(())
    }

    /// Matching options derived from this configuration.
    pub fn match_options(&self) -> MatchOptions {
        MatchOptions {
            bank: self.bank.clone(),
            pre_smooth_sigma: self.pre_smooth_sigma,
            chip_pixel_threshold: self.chip_pixel_threshold,
        }
    }

    /// Deterministic listing of the resolved parameters (`--dry-run`).
    pub fn resolved_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "[descriptor]").unwrap();
        writeln!(s, "cfog_m = {}", self.bank.cfog.m).unwrap();
        writeln!(s, "cfog_sigma = {}", self.bank.cfog.sigma).unwrap();
        writeln!(s, "cfog_normalize = {}", self.bank.cfog.normalize).unwrap();
        writeln!(s, "hog_cell_size = {}", self.bank.hog.cell_size).unwrap();
        writeln!(s, "lss_patch_radius = {}", self.bank.lss.patch_radius).unwrap();
        writeln!(s, "lss_region_radius = {}", self.bank.lss.region_radius).unwrap();
        writeln!(s, "lss_radial_bins = {}", self.bank.lss.radial_bins).unwrap();
        writeln!(s, "lss_angular_bins = {}", self.bank.lss.angular_bins).unwrap();
        writeln!(s, "lss_var_noise = {}", self.bank.lss.var_noise).unwrap();
        writeln!(s, "surf_haar_scale = {}", self.bank.surf.haar_scale).unwrap();
        writeln!(s, "pre_smooth_sigma = {}", self.pre_smooth_sigma).unwrap();
        let gop = match self.gradient_op {
            GradientOp::CentralDiff => "central",
            GradientOp::Sobel => "sobel",
        };
        writeln!(s, "gradient_op = {gop}").unwrap();
        writeln!(s, "[match]").unwrap();
        writeln!(s, "measure = {}", self.match_cfg.measure).unwrap();
        writeln!(s, "template_size = {}", self.match_cfg.template_size).unwrap();
        writeln!(s, "search_radius = {}", self.match_cfg.search_radius).unwrap();
        writeln!(s, "mi_bins = {}", self.match_cfg.mi_bins).unwrap();
        writeln!(s, "chip_pixel_threshold = {}", self.chip_pixel_threshold).unwrap();
        writeln!(s, "[harris]").unwrap();
        writeln!(s, "grid_n = {}", self.harris.grid_n).unwrap();
        writeln!(s, "k_per_chip = {}", self.harris.k_per_chip).unwrap();
        writeln!(s, "chip_size = {}", self.harris.chip_size).unwrap();
        writeln!(s, "harris_k = {}", self.harris.harris_k).unwrap();
        writeln!(s, "min_response = {}", self.harris.min_response).unwrap();
        writeln!(s, "min_separation = {}", self.harris.min_separation).unwrap();
        writeln!(s, "[registration]").unwrap();
        writeln!(s, "model_order = {}", self.model_order).unwrap();
        writeln!(s, "rmse_threshold = {}", self.rmse_threshold).unwrap();
        writeln!(s, "min_cps = {}", self.min_cps).unwrap();
        writeln!(s, "[run]").unwrap();
        writeln!(s, "jobs = {}", self.jobs).unwrap();
        writeln!(s, "seed = {}", self.seed).unwrap();
        writeln!(s, "output_dir = {}", self.output_dir.display()).unwrap();
        s
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}
