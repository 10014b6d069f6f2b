//! Six-parameter affine geotransforms tying pixel coordinates to planar
//! map coordinates, and the search-center prediction built on them.

use crate::error::{CfogError, Result};

const MIN_DET: f64 = 1e-12;

/// Affine mapping `(col, row) -> (map_x, map_y)`:
///
/// ```text
/// map_x = a*col + b*row + c
/// map_y = d*col + e*row + f
/// ```
///
/// The 2x2 linear part must be invertible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoTransform {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl GeoTransform {
    pub fn new(a: f64, b: f64, c: f64, d: f64, e: f64, f: f64) -> Result<GeoTransform> {
        let gt = GeoTransform { a, b, c, d, e, f };
        gt.validate()?;
        Ok(gt)
    }

    /// Identity transform: pixel coordinates are map coordinates.
    pub fn identity() -> GeoTransform {
        GeoTransform {
            a: 1.0,
            b: 0.0,
            c: 0.0,
            d: 0.0,
            e: 1.0,
            f: 0.0,
        }
    }

    /// North-up raster with square ground sample distance `gsd` and
    /// top-left map origin `(ox, oy)`; rows grow southward.
    pub fn north_up(gsd: f64, ox: f64, oy: f64) -> GeoTransform {
        GeoTransform {
            a: gsd,
            b: 0.0,
            c: ox,
            d: 0.0,
            e: -gsd,
            f: oy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let det = self.det();
        if !det.is_finite() || det.abs() <= MIN_DET {
            return Err(CfogError::Param(format!(
                "geotransform linear part is singular (det = {det})"
            )));
        }
        Ok(())
    }

    fn det(&self) -> f64 {
        self.a * self.e - self.b * self.d
    }

    /// Pixel `(col, row)` to map coordinates.
    pub fn pixel_to_map(&self, col: f64, row: f64) -> (f64, f64) {
        (
            self.a * col + self.b * row + self.c,
            self.d * col + self.e * row + self.f,
        )
    }

    /// Map coordinates to pixel `(col, row)`.
    pub fn map_to_pixel(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let det = self.det();
        if det.abs() <= MIN_DET {
            return Err(CfogError::Param(
                "geotransform is not invertible".to_string(),
            ));
        }
        let rx = x - self.c;
        let ry = y - self.f;
        Ok((
            (self.e * rx - self.b * ry) / det,
            (self.a * ry - self.d * rx) / det,
        ))
    }
}

/// Predicts where a reference pixel lands in the sensed image: reference
/// pixel to map coordinates, then map coordinates through the inverse
/// sensed geotransform.
pub fn geo_predict(
    ref_geo: &GeoTransform,
    sen_geo: &GeoTransform,
    ref_pt: (f64, f64),
) -> Result<(f64, f64)> {
    let (mx, my) = ref_geo.pixel_to_map(ref_pt.0, ref_pt.1);
    sen_geo.map_to_pixel(mx, my)
}
