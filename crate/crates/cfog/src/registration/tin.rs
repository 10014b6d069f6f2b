//! Triangulated irregular network: Bowyer-Watson Delaunay triangulation
//! of the surviving control points' reference coordinates, with one exact
//! affine transform per triangle.

use crate::control_point::ControlPoint;
use crate::error::{CfogError, Result};

/// Points closer than this are treated as duplicates and dropped.
const DUP_EPS: f64 = 1e-6;
/// Triangles with smaller area are discarded as degenerate.
const MIN_AREA: f64 = 1e-9;

/// Piecewise-linear mapping: Delaunay triangles over the reference frame,
/// each carrying the affine that maps its three vertices exactly.
#[derive(Debug, Clone)]
pub struct Tin {
    /// Vertices in input order (minus dropped duplicates).
    pub vertices: Vec<ControlPoint>,
    /// Vertex-index triples.
    pub triangles: Vec<[usize; 3]>,
    /// Per-triangle affines `[a, b, c, d, e, f]`:
    /// `x' = a x + b y + c`, `y' = d x + e y + f`.
    pub affines: Vec<[f64; 6]>,
    /// Indices (into the input slice) of dropped duplicate points.
    pub dropped: Vec<usize>,
}

impl Tin {
    /// Applies triangle `t`'s affine to a reference-frame point.
    #[inline]
    pub fn apply(&self, t: usize, x: f64, y: f64) -> (f64, f64) {
        let m = &self.affines[t];
        (m[0] * x + m[1] * y + m[2], m[3] * x + m[4] * y + m[5])
    }
}

/// Builds the TIN from surviving control points. Duplicate reference
/// coordinates (within 1e-6 px) are dropped and reported; fewer than
/// three usable non-collinear points is an error.
pub fn build_tin(cps: &[ControlPoint]) -> Result<Tin> {
    let mut vertices: Vec<ControlPoint> = Vec::with_capacity(cps.len());
    let mut dropped = Vec::new();
    for (i, cp) in cps.iter().enumerate() {
        let dup = vertices.iter().any(|v: &ControlPoint| {
            (v.ref_xy.0 - cp.ref_xy.0).abs() <= DUP_EPS
                && (v.ref_xy.1 - cp.ref_xy.1).abs() <= DUP_EPS
        });
        if dup {
            dropped.push(i);
        } else {
            vertices.push(*cp);
        }
    }
    if vertices.len() < 3 {
        return Err(CfogError::Tin(format!(
            "need at least 3 distinct control points, got {}",
            vertices.len()
        )));
    }
    let points: Vec<(f64, f64)> = vertices.iter().map(|cp| cp.ref_xy).collect();
    let triangles = delaunay(&points);
    if triangles.is_empty() {
        return Err(CfogError::Tin(
            "triangulation is empty (control points are collinear)".into(),
        ));
    }
    let affines = triangles
        .iter()
        .map(|tri| triangle_affine(&vertices[tri[0]], &vertices[tri[1]], &vertices[tri[2]]))
        .collect::<Result<Vec<_>>>()?;
    Ok(Tin {
        vertices,
        triangles,
        affines,
        dropped,
    })
}

/// Rebuilds a TIN from stored vertices and triangle indices (the sidecar
/// file keeps only those); affines are recomputed.
pub fn tin_from_parts(vertices: Vec<ControlPoint>, triangles: Vec<[usize; 3]>) -> Result<Tin> {
    for tri in &triangles {
        if tri.iter().any(|&v| v >= vertices.len()) {
            return Err(CfogError::Tin(format!(
                "triangle {tri:?} references a missing vertex"
            )));
        }
    }
    let affines = triangles
        .iter()
        .map(|tri| triangle_affine(&vertices[tri[0]], &vertices[tri[1]], &vertices[tri[2]]))
        .collect::<Result<Vec<_>>>()?;
    Ok(Tin {
        vertices,
        triangles,
        affines,
        dropped: Vec::new(),
    })
}

/// Signed twice-area of a triangle.
fn signed_area2(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// Strict in-circumcircle predicate for a counterclockwise triangle.
fn in_circumcircle(a: (f64, f64), b: (f64, f64), c: (f64, f64), p: (f64, f64)) -> bool {
    let (ax, ay) = (a.0 - p.0, a.1 - p.1);
    let (bx, by) = (b.0 - p.0, b.1 - p.1);
    let (cx, cy) = (c.0 - p.0, c.1 - p.1);
    let det = (ax * ax + ay * ay) * (bx * cy - cx * by)
        - (bx * bx + by * by) * (ax * cy - cx * ay)
        + (cx * cx + cy * cy) * (ax * by - bx * ay);
    det > 0.0
}

/// Bowyer-Watson incremental Delaunay triangulation. Returns CCW
/// vertex-index triples; degenerate slivers are filtered out.
pub fn delaunay(points: &[(f64, f64)]) -> Vec<[usize; 3]> {
    if points.len() < 3 {
        return Vec::new();
    }

    // Super-triangle comfortably containing every point.
    let mut min_x = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for &(x, y) in points {
        min_x = min_x.min(x);
        max_x = max_x.max(x);
        min_y = min_y.min(y);
        max_y = max_y.max(y);
    }
    let span = (max_x - min_x).max(max_y - min_y).max(1.0);
    let cx = (min_x + max_x) / 2.0;
    let cy = (min_y + max_y) / 2.0;
    let big = 64.0 * span;
    let n = points.len();
    let mut verts: Vec<(f64, f64)> = points.to_vec();
    verts.push((cx - big, cy - big / 2.0)); // n
    verts.push((cx + big, cy - big / 2.0)); // n + 1
    verts.push((cx, cy + big)); // n + 2

    let mut tris: Vec<[usize; 3]> = vec![[n, n + 1, n + 2]];
    let ccw = |t: &[usize; 3]| signed_area2(verts[t[0]], verts[t[1]], verts[t[2]]) > 0.0;
    debug_assert!(ccw(&tris[0]));

    for p in 0..n {
        let pt = verts[p];
        // Triangles whose circumcircle contains the new point.
        let mut bad = Vec::new();
        for (i, t) in tris.iter().enumerate() {
            if in_circumcircle(verts[t[0]], verts[t[1]], verts[t[2]], pt) {
                bad.push(i);
            }
        }
        // Cavity boundary: edges of bad triangles not shared by two of them.
        let mut boundary: Vec<(usize, usize)> = Vec::new();
        for &bi in &bad {
            let t = tris[bi];
            for e in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let shared = bad.iter().any(|&oi| {
                    if oi == bi {
                        return false;
                    }
                    let o = tris[oi];
                    let edges = [(o[0], o[1]), (o[1], o[2]), (o[2], o[0])];
                    edges.contains(&(e.1, e.0)) || edges.contains(&e)
                });
                if !shared {
                    boundary.push(e);
                }
            }
        }
        // Remove the cavity and fan the boundary to the new point.
        for &bi in bad.iter().rev() {
            tris.swap_remove(bi);
        }
        for (u, v) in boundary {
            let mut t = [u, v, p];
            if signed_area2(verts[t[0]], verts[t[1]], verts[t[2]]) < 0.0 {
                t.swap(0, 1);
            }
            tris.push(t);
        }
    }

    let mut out: Vec<[usize; 3]> = tris
        .into_iter()
        .filter(|t| t.iter().all(|&v| v < n))
        .filter(|t| signed_area2(verts[t[0]], verts[t[1]], verts[t[2]]).abs() > 2.0 * MIN_AREA)
        .collect();
    // Canonical vertex rotation and triangle order keep output
    // independent of internal processing order.
    for t in out.iter_mut() {
        let k = (0..3).min_by_key(|&i| t[i]).unwrap();
        t.rotate_left(k);
    }
    out.sort();
    out
}

/// Exact affine from three vertex correspondences. The system is solved
/// around the centroid to keep it well-conditioned on large frames.
fn triangle_affine(a: &ControlPoint, b: &ControlPoint, c: &ControlPoint) -> Result<[f64; 6]> {
    let area2 = signed_area2(a.ref_xy, b.ref_xy, c.ref_xy);
    if area2.abs() <= 2.0 * MIN_AREA {
        return Err(CfogError::Tin(format!(
            "degenerate triangle (area {:.3e})",
            area2 / 2.0
        )));
    }
    let gx = (a.ref_xy.0 + b.ref_xy.0 + c.ref_xy.0) / 3.0;
    let gy = (a.ref_xy.1 + b.ref_xy.1 + c.ref_xy.1) / 3.0;

    // Cramer's rule on centroid-shifted coordinates for each output axis.
    let solve = |s0: f64, s1: f64, s2: f64| -> (f64, f64, f64) {
        let (x0, y0) = (a.ref_xy.0 - gx, a.ref_xy.1 - gy);
        let (x1, y1) = (b.ref_xy.0 - gx, b.ref_xy.1 - gy);
        let (x2, y2) = (c.ref_xy.0 - gx, c.ref_xy.1 - gy);
        let det = x0 * (y1 - y2) - y0 * (x1 - x2) + (x1 * y2 - x2 * y1);
        let da = s0 * (y1 - y2) - y0 * (s1 - s2) + (s1 * y2 - s2 * y1);
        let db = x0 * (s1 - s2) - s0 * (x1 - x2) + (x1 * s2 - x2 * s1);
        let dc = x0 * (y1 * s2 - y2 * s1) - y0 * (x1 * s2 - x2 * s1) + s0 * (x1 * y2 - x2 * y1);
        (da / det, db / det, dc / det)
    };
    let (pa, pb, pc) = solve(a.sen_xy.0, b.sen_xy.0, c.sen_xy.0);
    let (pd, pe, pf) = solve(a.sen_xy.1, b.sen_xy.1, c.sen_xy.1);
    // Undo the centroid shift: f(x, y) = A (x - g) + c  =>  c' = c - A g.
    Ok([
        pa,
        pb,
        pc - pa * gx - pb * gy,
        pd,
        pe,
        pf - pd * gx - pe * gy,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn cp(x: f64, y: f64, sx: f64, sy: f64) -> ControlPoint {
        ControlPoint::new((x, y), (sx, sy), 1.0)
    }

    #[test]
    fn unit_square_splits_into_two_triangles() {
        let cps = vec![
            cp(0.0, 0.0, 0.0, 0.0),
            cp(1.0, 0.0, 1.0, 0.0),
            cp(1.0, 1.0, 1.0, 1.0),
            cp(0.0, 1.0, 0.0, 1.0),
        ];
        let tin = build_tin(&cps).unwrap();
        assert_eq!(tin.triangles.len(), 2);
        assert!(tin.dropped.is_empty());
    }

    #[test]
    fn three_points_interpolate_exactly() {
        let cps = vec![
            cp(0.0, 0.0, 10.0, 5.0),
            cp(40.0, 10.0, 52.0, 13.0),
            cp(5.0, 30.0, 14.0, 37.5),
        ];
        let tin = build_tin(&cps).unwrap();
        assert_eq!(tin.triangles.len(), 1);
        for (i, v) in tin.vertices.iter().enumerate() {
            let tri = tin.triangles[0];
            assert!(tri.contains(&i));
            let (px, py) = tin.apply(0, v.ref_xy.0, v.ref_xy.1);
            assert!((px - v.sen_xy.0).abs() < 1e-9);
            assert!((py - v.sen_xy.1).abs() < 1e-9);
        }
    }

    #[test]
    fn vertices_reproduce_exactly_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let cps: Vec<ControlPoint> = (0..40)
            .map(|_| {
                cp(
                    rng.random_range(0.0..2000.0),
                    rng.random_range(0.0..1500.0),
                    rng.random_range(0.0..2000.0),
                    rng.random_range(0.0..1500.0),
                )
            })
            .collect();
        let tin = build_tin(&cps).unwrap();
        for (ti, tri) in tin.triangles.iter().enumerate() {
            for &vi in tri {
                let v = &tin.vertices[vi];
                let (px, py) = tin.apply(ti, v.ref_xy.0, v.ref_xy.1);
                assert!((px - v.sen_xy.0).abs() < 1e-9);
                assert!((py - v.sen_xy.1).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn empty_circumcircle_against_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..10 {
            let points: Vec<(f64, f64)> = (0..50)
                .map(|_| (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)))
                .collect();
            let tris = delaunay(&points);
            assert!(!tris.is_empty());
            for t in &tris {
                let (a, b, c) = (points[t[0]], points[t[1]], points[t[2]]);
                for (i, &p) in points.iter().enumerate() {
                    if t.contains(&i) {
                        continue;
                    }
                    // Strictly-inside violations only; cocircular points are
                    // legitimate ties.
                    let (ax, ay) = (a.0 - p.0, a.1 - p.1);
                    let (bx, by) = (b.0 - p.0, b.1 - p.1);
                    let (cx, cy) = (c.0 - p.0, c.1 - p.1);
                    let det = (ax * ax + ay * ay) * (bx * cy - cx * by)
                        - (bx * bx + by * by) * (ax * cy - cx * ay)
                        + (cx * cx + cy * cy) * (ax * by - bx * ay);
                    let scale = span_scale(a, b, c, p);
                    assert!(
                        det <= 1e-7 * scale,
                        "point {i} strictly inside circumcircle of {t:?} (det {det:.3e})"
                    );
                }
            }
        }
    }

    fn span_scale(a: (f64, f64), b: (f64, f64), c: (f64, f64), p: (f64, f64)) -> f64 {
        let m = [a, b, c, p]
            .iter()
            .map(|q| (q.0 - p.0).abs().max((q.1 - p.1).abs()))
            .fold(0.0f64, f64::max)
            .max(1.0);
        m * m * m * m
    }

    #[test]
    fn duplicates_are_dropped_and_reported() {
        let cps = vec![
            cp(0.0, 0.0, 0.0, 0.0),
            cp(10.0, 0.0, 10.0, 0.0),
            cp(10.0 + 1e-8, 1e-8, 99.0, 99.0),
            cp(0.0, 10.0, 0.0, 10.0),
        ];
        let tin = build_tin(&cps).unwrap();
        assert_eq!(tin.dropped, vec![2]);
        assert_eq!(tin.vertices.len(), 3);
    }

    #[test]
    fn collinear_points_fail() {
        let cps: Vec<ControlPoint> = (0..5)
            .map(|i| cp(i as f64, i as f64 * 2.0, 0.0, 0.0))
            .collect();
        assert!(build_tin(&cps).is_err());
        assert!(build_tin(&cps[..2]).is_err());
    }

    #[test]
    fn triangulation_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let points: Vec<(f64, f64)> = (0..30)
            .map(|_| (rng.random_range(0.0..50.0), rng.random_range(0.0..50.0)))
            .collect();
        assert_eq!(delaunay(&points), delaunay(&points));
    }
}
