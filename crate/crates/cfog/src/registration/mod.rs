//! From raw control points to a rectified image: least-squares polynomial
//! models, iterative largest-residual outlier rejection, a Delaunay TIN
//! with per-triangle affines, and inverse-mapping rectification.

mod polynomial;
mod rectify;
mod tin;

pub use polynomial::{
    fit_polynomial, reject_outliers, term_count, CoordNorm, PolynomialModel, RejectionReport,
    RemovedCp,
};
pub use rectify::{rectify, RectifyResult, MASK_FALLBACK, MASK_TIN, MASK_UNMAPPED};
pub use tin::{build_tin, delaunay, tin_from_parts, Tin};

use std::fmt::Write as _;
use std::path::Path;

use crate::control_point::ControlPoint;
use crate::error::{CfogError, Result};

/// Renders the `.model` sidecar: the polynomial block and, when present,
/// the TIN block (vertices plus triangle indices; per-triangle affines
/// are recomputed on read).
pub fn model_to_text(model: &PolynomialModel, tin: Option<&Tin>) -> String {
    let mut out = String::new();
    out.push_str("mapping-model 1\n");
    out.push_str("polynomial\n");
    writeln!(out, "order {}", model.order).unwrap();
    writeln!(
        out,
        "norm {} {} {} {}",
        model.norm.cx, model.norm.cy, model.norm.sx, model.norm.sy
    )
    .unwrap();
    let join = |v: &[f64]| {
        v.iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    writeln!(out, "coeffs_x {}", join(&model.coeffs_x)).unwrap();
    writeln!(out, "coeffs_y {}", join(&model.coeffs_y)).unwrap();
    if let Some(tin) = tin {
        out.push_str("tin\n");
        writeln!(out, "vertices {}", tin.vertices.len()).unwrap();
        for v in &tin.vertices {
            writeln!(
                out,
                "v {} {} {} {}",
                v.ref_xy.0, v.ref_xy.1, v.sen_xy.0, v.sen_xy.1
            )
            .unwrap();
        }
        writeln!(out, "triangles {}", tin.triangles.len()).unwrap();
        for t in &tin.triangles {
            writeln!(out, "t {} {} {}", t[0], t[1], t[2]).unwrap();
        }
    }
    out.push_str("end\n");
    out
}

pub fn write_model_file(path: &Path, model: &PolynomialModel, tin: Option<&Tin>) -> Result<()> {
    std::fs::write(path, model_to_text(model, tin)).map_err(|e| CfogError::io(path, e))
}

/// Parses a `.model` sidecar back into the polynomial and optional TIN.
pub fn read_model_file(path: &Path) -> Result<(PolynomialModel, Option<Tin>)> {
    let text = std::fs::read_to_string(path).map_err(|e| CfogError::io(path, e))?;
    parse_model_text(&text).map_err(|msg| CfogError::format(path, msg))
}

fn parse_model_text(text: &str) -> std::result::Result<(PolynomialModel, Option<Tin>), String> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let expect = |got: Option<&str>, want: &str| -> std::result::Result<(), String> {
        match got {
            Some(l) if l == want => Ok(()),
            other => Err(format!("expected {want:?}, found {other:?}")),
        }
    };
    expect(lines.next(), "mapping-model 1")?;
    expect(lines.next(), "polynomial")?;

    let mut take_fields = |prefix: &str| -> std::result::Result<Vec<f64>, String> {
        let line = lines
            .next()
            .ok_or_else(|| format!("missing {prefix} line"))?;
        let rest = line
            .strip_prefix(prefix)
            .ok_or_else(|| format!("expected {prefix:?}, found {line:?}"))?;
        rest.split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| format!("bad number {t:?}")))
            .collect()
    };

    let order_fields = take_fields("order")?;
    let order = order_fields
        .first()
        .copied()
        .ok_or("empty order line")? as usize;
    let norm = take_fields("norm")?;
    if norm.len() != 4 {
        return Err("norm line needs 4 values".into());
    }
    let coeffs_x = take_fields("coeffs_x")?;
    let coeffs_y = take_fields("coeffs_y")?;
    let terms = term_count(order);
    if coeffs_x.len() != terms || coeffs_y.len() != terms {
        return Err(format!(
            "order {order} expects {terms} coefficients per axis, got {}/{}",
            coeffs_x.len(),
            coeffs_y.len()
        ));
    }
    let model = PolynomialModel {
        order,
        coeffs_x,
        coeffs_y,
        norm: CoordNorm {
            cx: norm[0],
            cy: norm[1],
            sx: norm[2],
            sy: norm[3],
        },
    };

    let mut tin = None;
    match lines.next() {
        Some("end") | None => {}
        Some("tin") => {
            let count_line = lines.next().ok_or("missing vertices line")?;
            let n: usize = count_line
                .strip_prefix("vertices ")
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| format!("bad vertices line {count_line:?}"))?;
            let mut vertices = Vec::with_capacity(n);
            for _ in 0..n {
                let line = lines.next().ok_or("truncated vertex list")?;
                let vals: Vec<f64> = line
                    .strip_prefix("v ")
                    .ok_or_else(|| format!("bad vertex line {line:?}"))?
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|_| format!("bad number {t:?}")))
                    .collect::<std::result::Result<_, _>>()?;
                if vals.len() != 4 {
                    return Err(format!("vertex line needs 4 values: {line:?}"));
                }
                vertices.push(ControlPoint::new((vals[0], vals[1]), (vals[2], vals[3]), 0.0));
            }
            let count_line = lines.next().ok_or("missing triangles line")?;
            let m: usize = count_line
                .strip_prefix("triangles ")
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| format!("bad triangles line {count_line:?}"))?;
            let mut triangles = Vec::with_capacity(m);
            for _ in 0..m {
                let line = lines.next().ok_or("truncated triangle list")?;
                let vals: Vec<usize> = line
                    .strip_prefix("t ")
                    .ok_or_else(|| format!("bad triangle line {line:?}"))?
                    .split_whitespace()
                    .map(|t| t.parse::<usize>().map_err(|_| format!("bad index {t:?}")))
                    .collect::<std::result::Result<_, _>>()?;
                if vals.len() != 3 {
                    return Err(format!("triangle line needs 3 indices: {line:?}"));
                }
                triangles.push([vals[0], vals[1], vals[2]]);
            }
            expect(lines.next(), "end")?;
            tin = Some(tin_from_parts(vertices, triangles).map_err(|e| e.to_string())?);
        }
        Some(other) => return Err(format!("unexpected section {other:?}")),
    }
    Ok((model, tin))
}
