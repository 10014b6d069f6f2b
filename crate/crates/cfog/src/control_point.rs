//! Control points and their CSV serialization.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CfogError, Result};

/// A matched coordinate pair: reference pixel, sub-pixel sensed location,
/// the peak similarity score, and (once fitted) the model residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlPoint {
    pub ref_xy: (f64, f64),
    pub sen_xy: (f64, f64),
    pub score: f64,
    /// Distance between the model-mapped reference point and the measured
    /// sensed point; unset until a model has been fitted.
    pub residual: Option<f64>,
}

impl ControlPoint {
    pub fn new(ref_xy: (f64, f64), sen_xy: (f64, f64), score: f64) -> ControlPoint {
        ControlPoint {
            ref_xy,
            sen_xy,
            score,
            residual: None,
        }
    }
}

const CSV_HEADER: &str = "ref_x,ref_y,sen_x,sen_y,score,residual";

/// Renders control points as CSV text (one header line, `%.6f` fields,
/// unset residuals written as `nan`).
pub fn cps_to_csv(cps: &[ControlPoint]) -> String {
    let mut out = String::with_capacity(32 * (cps.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for cp in cps {
        let residual = cp.residual.unwrap_or(f64::NAN);
        writeln!(
            out,
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            cp.ref_xy.0, cp.ref_xy.1, cp.sen_xy.0, cp.sen_xy.1, cp.score, residual
        )
        .unwrap();
    }
    out
}

pub fn write_cp_csv(path: &Path, cps: &[ControlPoint]) -> Result<()> {
    std::fs::write(path, cps_to_csv(cps)).map_err(|e| CfogError::io(path, e))
}

/// Parses control points written by [`write_cp_csv`].
pub fn read_cp_csv(path: &Path) -> Result<Vec<ControlPoint>> {
    let text = std::fs::read_to_string(path).map_err(|e| CfogError::io(path, e))?;
    parse_cp_csv(&text).map_err(|msg| CfogError::format(path, msg))
}

pub fn parse_cp_csv(text: &str) -> std::result::Result<Vec<ControlPoint>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => return Err(format!("bad CSV header: {other:?}")),
    }
    let mut cps = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(format!("line {}: expected 6 fields, got {}", i + 2, fields.len()));
        }
        let parse = |s: &str| -> std::result::Result<f64, String> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| format!("line {}: bad number {s:?}", i + 2))
        };
        let residual = parse(fields[5])?;
        cps.push(ControlPoint {
            ref_xy: (parse(fields[0])?, parse(fields[1])?),
            sen_xy: (parse(fields[2])?, parse(fields[3])?),
            score: parse(fields[4])?,
            residual: if residual.is_nan() { None } else { Some(residual) },
        });
    }
    Ok(cps)
}
