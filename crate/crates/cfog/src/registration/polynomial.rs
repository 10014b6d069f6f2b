//! Polynomial mapping models (orders 1-3) fitted by least squares, and
//! the iterative largest-residual outlier rejection built on them.
//!
//! Reference coordinates are centered and scaled to [-1, 1] before the
//! monomial basis is evaluated; the normalization is stored with the
//! model so predictions stay in frame coordinates.

use crate::control_point::ControlPoint;
use crate::error::{CfogError, Result};

/// Coordinate normalization applied before basis evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordNorm {
    pub cx: f64,
    pub cy: f64,
    pub sx: f64,
    pub sy: f64,
}

impl CoordNorm {
    fn from_points(points: impl Iterator<Item = (f64, f64)> + Clone) -> CoordNorm {
        let mut min_x = f64::INFINITY;
        let mut max_x = f64::NEG_INFINITY;
        let mut min_y = f64::INFINITY;
        let mut max_y = f64::NEG_INFINITY;
        for (x, y) in points {
            min_x = min_x.min(x);
            max_x = max_x.max(x);
            min_y = min_y.min(y);
            max_y = max_y.max(y);
        }
        let half = |lo: f64, hi: f64| {
            let s = (hi - lo) / 2.0;
            if s > 0.0 {
                s
            } else {
                1.0
            }
        };
        CoordNorm {
            cx: (min_x + max_x) / 2.0,
            cy: (min_y + max_y) / 2.0,
            sx: half(min_x, max_x),
            sy: half(min_y, max_y),
        }
    }

    #[inline]
    fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.cx) / self.sx, (y - self.cy) / self.sy)
    }
}

/// Polynomial transform between image frames. `coeffs_x` and `coeffs_y`
/// hold one coefficient per monomial of the normalized reference
/// coordinates, in graded lexicographic order:
/// `1, u, v, u^2, uv, v^2, u^3, u^2 v, u v^2, v^3`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialModel {
    pub order: usize,
    pub coeffs_x: Vec<f64>,
    pub coeffs_y: Vec<f64>,
    pub norm: CoordNorm,
}

/// Monomial count for a total-degree bound: 3, 6 or 10.
pub fn term_count(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

fn basis(order: usize, u: f64, v: f64, out: &mut Vec<f64>) {
    out.clear();
    for total in 0..=order {
        for j in 0..=total {
            let i = total - j;
            out.push(u.powi(i as i32) * v.powi(j as i32));
        }
    }
}

impl PolynomialModel {
    /// Maps a reference-frame point into the sensed frame.
    pub fn predict(&self, x: f64, y: f64) -> (f64, f64) {
        let (u, v) = self.norm.apply(x, y);
        let mut b = Vec::with_capacity(term_count(self.order));
        basis(self.order, u, v, &mut b);
        let px = b.iter().zip(&self.coeffs_x).map(|(t, c)| t * c).sum();
        let py = b.iter().zip(&self.coeffs_y).map(|(t, c)| t * c).sum();
        (px, py)
    }

    /// Euclidean residual of one control point under this model.
    pub fn residual(&self, cp: &ControlPoint) -> f64 {
        let (px, py) = self.predict(cp.ref_xy.0, cp.ref_xy.1);
        ((px - cp.sen_xy.0).powi(2) + (py - cp.sen_xy.1).powi(2)).sqrt()
    }

    /// Root-mean-square residual over a control-point set.
    pub fn rmse(&self, cps: &[ControlPoint]) -> f64 {
        if cps.is_empty() {
            return 0.0;
        }
        let ss: f64 = cps.iter().map(|cp| self.residual(cp).powi(2)).sum();
        (ss / cps.len() as f64).sqrt()
    }
}

/// Least-squares polynomial fit of reference -> sensed coordinates.
pub fn fit_polynomial(cps: &[ControlPoint], order: usize) -> Result<PolynomialModel> {
    if !(1..=3).contains(&order) {
        return Err(CfogError::Fit(format!("order must be 1..=3, got {order}")));
    }
    let terms = term_count(order);
    if cps.len() < terms {
        return Err(CfogError::Fit(format!(
            "order {order} needs at least {terms} control points, got {}",
            cps.len()
        )));
    }
    let norm = CoordNorm::from_points(cps.iter().map(|cp| cp.ref_xy));

    // Normal equations G w = A^T y, solved once per output coordinate.
    let mut gram = vec![0.0f64; terms * terms];
    let mut rhs_x = vec![0.0f64; terms];
    let mut rhs_y = vec![0.0f64; terms];
    let mut b = Vec::with_capacity(terms);
    for cp in cps {
        let (u, v) = norm.apply(cp.ref_xy.0, cp.ref_xy.1);
        basis(order, u, v, &mut b);
        for i in 0..terms {
            for j in 0..terms {
                gram[i * terms + j] += b[i] * b[j];
            }
            rhs_x[i] += b[i] * cp.sen_xy.0;
            rhs_y[i] += b[i] * cp.sen_xy.1;
        }
    }
    let coeffs_x = solve_spd(&gram, &rhs_x, terms)?;
    let coeffs_y = solve_spd(&gram, &rhs_y, terms)?;
    Ok(PolynomialModel {
        order,
        coeffs_x,
        coeffs_y,
        norm,
    })
}

/// Gaussian elimination with partial pivoting; pivots below threshold
/// flag a rank-deficient design (collinear or duplicated points).
fn solve_spd(matrix: &[f64], rhs: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut a = matrix.to_vec();
    let mut b = rhs.to_vec();
    let scale = a
        .iter()
        .map(|v| v.abs())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    for col in 0..n {
        let (pivot_row, pivot) = (col..n)
            .map(|r| (r, a[r * n + col]))
            .max_by(|x, y| x.1.abs().partial_cmp(&y.1.abs()).unwrap())
            .unwrap();
        if pivot.abs() < 1e-10 * scale {
            return Err(CfogError::Fit(format!(
                "rank-deficient design matrix (pivot {pivot:.3e} at column {col}); \
                 reference points are collinear or nearly duplicated"
            )));
        }
        if pivot_row != col {
            for k in 0..n {
                a.swap(col * n + k, pivot_row * n + k);
            }
            b.swap(col, pivot_row);
        }
        for row in (col + 1)..n {
            let f = a[row * n + col] / a[col * n + col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0f64; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in (row + 1)..n {
            acc -= a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
    }
    Ok(x)
}

/// One removed control point with its residual at removal time.
#[derive(Debug, Clone)]
pub struct RemovedCp {
    pub cp: ControlPoint,
    pub residual: f64,
    pub iteration: usize,
}

/// Outcome of the iterative rejection loop.
#[derive(Debug, Clone)]
pub struct RejectionReport {
    /// Surviving control points, residuals filled from the final model.
    pub survivors: Vec<ControlPoint>,
    /// Removed points in removal order.
    pub removed: Vec<RemovedCp>,
    pub final_rmse: f64,
    pub iterations: usize,
    /// False when the loop stopped because the survivor count would have
    /// dropped below `min_cps`.
    pub converged: bool,
    pub model: PolynomialModel,
    /// RMSE after each fit, first entry is the all-points fit.
    pub rmse_history: Vec<f64>,
}

/// Iterative outlier rejection: fit, and while the RMSE is at or above
/// the threshold remove the single largest-residual point (ties fall to
/// the lower index) and refit.
pub fn reject_outliers(
    cps: &[ControlPoint],
    order: usize,
    rmse_threshold: f64,
    min_cps: usize,
) -> Result<RejectionReport> {
    let terms = term_count(order);
    if min_cps < terms {
        return Err(CfogError::Fit(format!(
            "min_cps {min_cps} below the {terms} terms of an order-{order} fit"
        )));
    }
    if cps.len() <= min_cps {
        return Err(CfogError::Fit(format!(
            "need more than min_cps = {min_cps} control points, got {}",
            cps.len()
        )));
    }
    if !(rmse_threshold > 0.0) {
        return Err(CfogError::Fit("rmse_threshold must be > 0".into()));
    }

    let mut current = cps.to_vec();
    let mut removed = Vec::new();
    let mut rmse_history = Vec::new();
    let mut iterations = 0usize;
    let cap = cps.len();
    loop {
        let model = fit_polynomial(&current, order)?;
        let residuals: Vec<f64> = current.iter().map(|cp| model.residual(cp)).collect();
        for (cp, &r) in current.iter_mut().zip(&residuals) {
            cp.residual = Some(r);
        }
        let rmse = model.rmse(&current);
        rmse_history.push(rmse);

        if rmse < rmse_threshold {
            return Ok(RejectionReport {
                survivors: current,
                removed,
                final_rmse: rmse,
                iterations,
                converged: true,
                model,
                rmse_history,
            });
        }
        if current.len() <= min_cps || iterations >= cap {
            return Ok(RejectionReport {
                survivors: current,
                removed,
                final_rmse: rmse,
                iterations,
                converged: false,
                model,
                rmse_history,
            });
        }
        let worst = residuals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap();
        iterations += 1;
        let cp = current.remove(worst);
        removed.push(RemovedCp {
            cp,
            residual: residuals[worst],
            iteration: iterations,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn affine_cps(n: usize, seed: u64) -> Vec<ControlPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let x = rng.random_range(0.0..500.0);
                let y = rng.random_range(0.0..400.0);
                let sx = 1.02 * x - 0.05 * y + 12.5;
                let sy = 0.03 * x + 0.97 * y - 8.0;
                ControlPoint::new((x, y), (sx, sy), 1.0)
            })
            .collect()
    }

    #[test]
    fn exact_affine_recovery_order1() {
        let cps = affine_cps(20, 1);
        let model = fit_polynomial(&cps, 1).unwrap();
        for cp in &cps {
            assert!(model.residual(cp) < 1e-9);
        }
        // Affine coefficients recoverable through predictions.
        let (x0, y0) = model.predict(0.0, 0.0);
        assert!((x0 - 12.5).abs() < 1e-9);
        assert!((y0 + 8.0).abs() < 1e-9);
        let (x1, _) = model.predict(1.0, 0.0);
        assert!((x1 - x0 - 1.02).abs() < 1e-9);
    }

    #[test]
    fn planted_cubic_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cubic = |x: f64, y: f64| -> (f64, f64) {
            let (u, v) = (x / 100.0, y / 100.0);
            (
                5.0 + 0.9 * x + 0.1 * y + 2.0 * u * u + 0.5 * u * v - u * u * v,
                -3.0 + 1.1 * y - 0.2 * x + v * v + 0.25 * u * v * v,
            )
        };
        let cps: Vec<ControlPoint> = (0..40)
            .map(|_| {
                let x = rng.random_range(0.0..200.0);
                let y = rng.random_range(0.0..200.0);
                ControlPoint::new((x, y), cubic(x, y), 1.0)
            })
            .collect();
        let model = fit_polynomial(&cps, 3).unwrap();
        assert!(model.rmse(&cps) < 1e-6);
    }

    #[test]
    fn too_few_points_for_cubic() {
        let cps = affine_cps(9, 3);
        let err = fit_polynomial(&cps, 3).unwrap_err();
        assert!(err.to_string().contains("10"));
    }

    #[test]
    fn collinear_points_name_the_deficiency() {
        let cps: Vec<ControlPoint> = (0..12)
            .map(|i| {
                let x = i as f64 * 10.0;
                ControlPoint::new((x, 2.0 * x), (x + 1.0, 2.0 * x - 1.0), 1.0)
            })
            .collect();
        let err = fit_polynomial(&cps, 2).unwrap_err();
        assert!(err.to_string().contains("rank-deficient"));
    }

    #[test]
    fn translation_equivariance() {
        let cps = affine_cps(30, 4);
        let model = fit_polynomial(&cps, 2).unwrap();
        let shifted: Vec<ControlPoint> = cps
            .iter()
            .map(|cp| ControlPoint {
                ref_xy: (cp.ref_xy.0 + 37.0, cp.ref_xy.1 - 19.0),
                ..*cp
            })
            .collect();
        let model2 = fit_polynomial(&shifted, 2).unwrap();
        for cp in &cps {
            let a = model.predict(cp.ref_xy.0, cp.ref_xy.1);
            let b = model2.predict(cp.ref_xy.0 + 37.0, cp.ref_xy.1 - 19.0);
            assert!((a.0 - b.0).abs() < 1e-6);
            assert!((a.1 - b.1).abs() < 1e-6);
        }
    }

    #[test]
    fn rejection_removes_exactly_the_planted_outliers() {
        let mut cps = affine_cps(50, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut outlier_refs = Vec::new();
        for i in [4usize, 21, 40] {
            let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            cps[i].sen_xy.0 += 20.0 * angle.cos();
            cps[i].sen_xy.1 += 20.0 * angle.sin();
            outlier_refs.push(cps[i].ref_xy);
        }
        let report = reject_outliers(&cps, 3, 1.0, 12).unwrap();
        assert!(report.converged);
        assert_eq!(report.removed.len(), 3);
        for rm in &report.removed {
            assert!(outlier_refs.contains(&rm.cp.ref_xy));
        }
        assert!(report.final_rmse < 1.0);
    }

    #[test]
    fn clean_set_converges_without_removals() {
        let cps = affine_cps(30, 7);
        let report = reject_outliers(&cps, 3, 1.0, 12).unwrap();
        assert!(report.converged);
        assert!(report.removed.is_empty());
        assert_eq!(report.iterations, 0);
        assert!(report.survivors.iter().all(|cp| cp.residual.is_some()));
    }

    #[test]
    fn nonconvergence_is_reported_with_partial_survivors() {
        // Pure noise correspondences cannot reach a 0.01 px RMSE.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cps: Vec<ControlPoint> = (0..20)
            .map(|_| {
                ControlPoint::new(
                    (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)),
                    (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)),
                    1.0,
                )
            })
            .collect();
        let report = reject_outliers(&cps, 1, 0.01, 12).unwrap();
        assert!(!report.converged);
        assert_eq!(report.survivors.len(), 12);
    }

    #[test]
    fn rmse_history_non_increasing_when_removed_exceeds_rmse() {
        let mut cps = affine_cps(40, 9);
        for i in 0..5 {
            cps[i * 7].sen_xy.0 += 15.0;
        }
        let report = reject_outliers(&cps, 3, 0.5, 12).unwrap();
        for (i, rm) in report.removed.iter().enumerate() {
            let before = report.rmse_history[i];
            let after = report.rmse_history[i + 1];
            if rm.residual > before {
                assert!(
                    after <= before + 1e-12,
                    "rmse rose after removing a worse-than-rmse point"
                );
            }
        }
    }
}
