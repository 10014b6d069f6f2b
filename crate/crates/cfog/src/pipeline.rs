//! End-to-end registration pipeline: detection, matching, outlier
//! rejection, TIN construction and rectification, with deterministic
//! report rendering. The CLI and browser demo both drive this module.

use std::fmt::Write as _;
use std::time::Instant;

use crate::config::RunConfig;
use crate::control_point::ControlPoint;
use crate::error::Result;
use crate::harris::detect_harris;
use crate::image::Image;
use crate::matching::{filter_border_points, match_points, MatchOutcome};
use crate::registration::{
    build_tin, rectify, reject_outliers, RectifyResult, RejectionReport, Tin,
};

/// Everything a `register` run produces.
#[derive(Debug)]
pub struct RegisterArtifacts {
    /// Raw matched control points (before rejection).
    pub matched: Vec<ControlPoint>,
    /// Count of feature points skipped during matching.
    pub skipped: usize,
    pub rejection: RejectionReport,
    /// Absent when too few survivors remained for a triangulation.
    pub tin: Option<Tin>,
    pub rectified: Option<RectifyResult>,
    /// Deterministic run summary (no wall-clock content).
    pub summary: String,
    /// Per-stage timings; log output only.
    pub timing_log: String,
}

/// Detection plus matching, the first half of `register` (the `match`
/// subcommand stops here).
pub fn detect_and_match(
    reference: &Image,
    sensed: &Image,
    cfg: &RunConfig,
) -> Result<MatchOutcome> {
    let points = detect_harris(reference, &cfg.harris)?;
    let points = filter_border_points(
        &points,
        reference.width(),
        reference.height(),
        &cfg.match_cfg,
    );
    match_points(reference, sensed, &points, &cfg.match_cfg, &cfg.match_options())
}

/// Fits, rejects outliers, triangulates and rectifies from existing
/// control points (the `rectify` subcommand enters here).
pub fn model_and_rectify(
    sensed: &Image,
    cps: &[ControlPoint],
    out_width: usize,
    out_height: usize,
    cfg: &RunConfig,
) -> Result<(RejectionReport, Option<Tin>, Option<RectifyResult>)> {
    let rejection = reject_outliers(cps, cfg.model_order, cfg.rmse_threshold, cfg.min_cps)?;
    let (tin, rectified) = match build_tin(&rejection.survivors) {
        Ok(tin) => {
            let r = rectify(sensed, &tin, &rejection.model, out_width, out_height)?;
            (Some(tin), Some(r))
        }
        Err(_) => (None, None),
    };
    Ok((rejection, tin, rectified))
}

/// Full registration run.
pub fn register_images(
    reference: &Image,
    sensed: &Image,
    cfg: &RunConfig,
) -> Result<RegisterArtifacts> {
    cfg.validate()?;
    let mut timing = String::new();

    let t0 = Instant::now();
    let points = detect_harris(reference, &cfg.harris)?;
    let points = filter_border_points(
        &points,
        reference.width(),
        reference.height(),
        &cfg.match_cfg,
    );
    writeln!(timing, "detect: {:.3}s ({} points)", t0.elapsed().as_secs_f64(), points.len())
        .unwrap();

    let t1 = Instant::now();
    let outcome = match_points(reference, sensed, &points, &cfg.match_cfg, &cfg.match_options())?;
    writeln!(
        timing,
        "match: {:.3}s ({} cps, {} skipped)",
        t1.elapsed().as_secs_f64(),
        outcome.control_points.len(),
        outcome.skipped.len()
    )
    .unwrap();

    let t2 = Instant::now();
    let (rejection, tin, rectified) = model_and_rectify(
        sensed,
        &outcome.control_points,
        reference.width(),
        reference.height(),
        cfg,
    )?;
    writeln!(timing, "model+rectify: {:.3}s", t2.elapsed().as_secs_f64()).unwrap();

    let summary = render_summary(reference, sensed, cfg, &outcome, &rejection, &tin, &rectified);
    Ok(RegisterArtifacts {
        matched: outcome.control_points,
        skipped: outcome.skipped.len(),
        rejection,
        tin,
        rectified,
        summary,
        timing_log: timing,
    })
}

fn render_summary(
    reference: &Image,
    sensed: &Image,
    cfg: &RunConfig,
    outcome: &MatchOutcome,
    rejection: &RejectionReport,
    tin: &Option<Tin>,
    rectified: &Option<RectifyResult>,
) -> String {
    let mut s = String::new();
    writeln!(s, "run summary").unwrap();
    writeln!(s, "reference {}x{}", reference.width(), reference.height()).unwrap();
    writeln!(s, "sensed {}x{}", sensed.width(), sensed.height()).unwrap();
    writeln!(
        s,
        "measure {} template {} search_radius {}",
        cfg.match_cfg.measure, cfg.match_cfg.template_size, cfg.match_cfg.search_radius
    )
    .unwrap();
    writeln!(
        s,
        "matched {} skipped {}",
        outcome.control_points.len(),
        outcome.skipped.len()
    )
    .unwrap();
    writeln!(
        s,
        "rejection converged {} survivors {} removed {} final_rmse {:.6} iterations {}",
        rejection.converged,
        rejection.survivors.len(),
        rejection.removed.len(),
        rejection.final_rmse,
        rejection.iterations
    )
    .unwrap();
    match tin {
        Some(t) => writeln!(
            s,
            "tin vertices {} triangles {} dropped {}",
            t.vertices.len(),
            t.triangles.len(),
            t.dropped.len()
        )
        .unwrap(),
        None => writeln!(s, "tin unavailable (too few survivors)").unwrap(),
    }
    match rectified {
        Some(r) => writeln!(
            s,
            "rectified tin_fraction {:.4} mapped_fraction {:.4}",
            r.tin_fraction, r.mapped_fraction
        )
        .unwrap(),
        None => writeln!(s, "rectified skipped").unwrap(),
    }
    s
}

/// Deterministic rejection-report text.
pub fn rejection_report_text(report: &RejectionReport) -> String {
    let mut s = String::new();
    writeln!(s, "rejection report").unwrap();
    writeln!(s, "converged {}", report.converged).unwrap();
    writeln!(s, "final_rmse {:.6}", report.final_rmse).unwrap();
    writeln!(s, "iterations {}", report.iterations).unwrap();
    writeln!(s, "survivors {}", report.survivors.len()).unwrap();
    writeln!(s, "removed {}", report.removed.len()).unwrap();
    for rm in &report.removed {
        writeln!(
            s,
            "removed iteration {} ref ({:.3},{:.3}) residual {:.6}",
            rm.iteration, rm.cp.ref_xy.0, rm.cp.ref_xy.1, rm.residual
        )
        .unwrap();
    }
    write!(s, "rmse_history").unwrap();
    for r in &report.rmse_history {
        write!(s, " {:.6}", r).unwrap();
    }
    s.push('\n');
    s
}
