//! Multimodal remote-sensing image registration built on pixel-wise
//! structural feature volumes and FFT-accelerated template matching.
//!
//! Nonlinear intensity differences between modalities (optical, SAR,
//! LiDAR, map) defeat intensity measures like NCC; structure survives.
//! This crate builds a per-pixel descriptor volume for each image (CFOG
//! oriented-gradient channels, dense HOG, local self-similarity or
//! simplified upright SURF), scores candidate alignments by the SSD
//! between volumes — evaluated in the frequency domain — and turns the
//! matches into a full registration: block Harris detection, geo-guided
//! search, iterative outlier rejection against a cubic polynomial, and
//! piecewise-linear (TIN) rectification.
//!
//! # Pipeline sketch
//!
//! ```no_run
//! use cfog::prelude::*;
//!
//! # fn main() -> cfog::Result<()> {
//! let (reference, _) = cfog::io::load_image("ref.pgm".as_ref())?;
//! let (sensed, _) = cfog::io::load_image("sen.pgm".as_ref())?;
//!
//! let points = detect_harris(&reference, &HarrisParams::default())?;
//! let cfg = MatchConfig::default();
//! let points = filter_border_points(&points, reference.width(), reference.height(), &cfg);
//! let matched = match_points(&reference, &sensed, &points, &cfg, &MatchOptions::default())?;
//!
//! let report = reject_outliers(&matched.control_points, 3, 1.0, 12)?;
//! let tin = build_tin(&report.survivors)?;
//! let out = rectify(&sensed, &tin, &report.model, reference.width(), reference.height())?;
//! # let _ = out;
//! # Ok(())
//! # }
//! ```
//!
//! The `cfog-cli` crate wraps this pipeline in `register`, `match`,
//! `rectify`, `simmap` and `bench` subcommands; `cfog-web` exposes an
//! interactive browser demo of the similarity maps and descriptors.

pub mod config;
pub mod control_point;
pub mod descriptor;
pub mod error;
pub mod evaluation;
pub mod geo;
pub mod harris;
pub mod image;
pub mod io;
pub mod matching;
mod parallel;
pub mod pipeline;
pub mod registration;
pub mod similarity;
pub mod synth;
pub mod volume;

pub use error::{CfogError, Result};

/// Common imports for pipeline users.
pub mod prelude {
    pub use crate::control_point::{read_cp_csv, write_cp_csv, ControlPoint};
    pub use crate::descriptor::{
        build_cfog, build_lss, build_pixelwise_hog, build_usurf, CfogParams, Descriptor,
        HogParams, LssParams, SurfParams,
    };
    pub use crate::geo::{geo_predict, GeoTransform};
    pub use crate::harris::{detect_harris, FeaturePoint, HarrisParams};
    pub use crate::image::{
        compute_gradients, gaussian_convolve, integral_image, Image, IntegralImage,
    };
    pub use crate::matching::{
        filter_border_points, match_points, DescriptorBank, MatchOptions, MatchOutcome,
    };
    pub use crate::registration::{
        build_tin, fit_polynomial, rectify, reject_outliers, PolynomialModel, RejectionReport,
        Tin,
    };
    pub use crate::similarity::{
        mi_match, ncc_match, ssd_match_fft, ssd_match_spatial, subpixel_refine, MatchConfig,
        Measure, SimilarityMap,
    };
    pub use crate::synth::{
        generate_pair, PlantedTransform, RadiometricMap, Scene, SyntheticPair, SyntheticPairSpec,
    };
    pub use crate::volume::FeatureVolume;
}
