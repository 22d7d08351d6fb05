//! Bending energy `∫ f_xx² + 2 f_xy² + f_yy²` of a 2D interpolant.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Aabb;
use crate::model::RbfModel;
use crate::scalar::Real;

pub const MIN_ENERGY_GRID: usize = 8;

/// Midpoint-rule quadrature of the thin-plate energy over `bounds`, with
/// second derivatives taken by central differences of the analytic
/// interpolant.
pub fn thin_plate_energy<T: Real>(model: &RbfModel<T>, bounds: &Aabb<T>, grid_res: usize) -> Result<T> {
    if model.dim() != 2 {
        return Err(Error::UnsupportedDimension(model.dim()));
    }
    if bounds.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: bounds.dim(),
        });
    }
    if grid_res < MIN_ENERGY_GRID {
        return Err(Error::InvalidParameter(format!(
            "energy grid resolution {grid_res} below {MIN_ENERGY_GRID}"
        )));
    }
    let n = T::from_usize_lossy(grid_res);
    let dx = bounds.extent(0) / n;
    let dy = bounds.extent(1) / n;
    let h = bounds.diagonal() * T::lit(1e-4);
    let two = T::lit(2.0);
    let f = |x: T, y: T| model.value(&[x, y]);

    let rows: Vec<T> = (0..grid_res)
        .into_par_iter()
        .map(|j| {
            let y = bounds.min[1] + (T::from_usize_lossy(j) + T::lit(0.5)) * dy;
            (0..grid_res)
                .map(|i| {
                    let x = bounds.min[0] + (T::from_usize_lossy(i) + T::lit(0.5)) * dx;
                    let c = f(x, y);
                    let fxx = (f(x + h, y) - two * c + f(x - h, y)) / (h * h);
                    let fyy = (f(x, y + h) - two * c + f(x, y - h)) / (h * h);
                    let fxy = (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h)
                        + f(x - h, y - h))
                        / (T::lit(4.0) * h * h);
                    fxx * fxx + two * fxy * fxy + fyy * fyy
                })
                .sum::<T>()
        })
        .collect();
    Ok(rows.into_iter().sum::<T>() * dx * dy)
}
