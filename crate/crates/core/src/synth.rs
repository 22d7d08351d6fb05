//! Synthetic shapes with known geometry, used by tests, examples and the
//! acceptance suite.

use std::f64::consts::{PI, TAU};

use crate::constraints::{ConstraintSet, GrayImage, PointNormalCloud};
use crate::geometry::Constraint;
use crate::scalar::Real;

/// Rasterizes a signed distance (pixels, positive inside) into an 8-bit
/// image with a linear ramp of one pixel either side of the boundary.
pub fn image_from_sdf<T: Real>(
    width: usize,
    height: usize,
    sdf: impl Fn(f64, f64) -> f64,
) -> GrayImage<T> {
    GrayImage::from_fn(width, height, |x, y| {
        let v = (127.5 + 127.5 * sdf(x as f64, y as f64)).clamp(0.0, 255.0);
        T::lit(v.round())
    })
    .expect("valid synthetic image")
}

pub fn disk_sdf(cx: f64, cy: f64, r: f64) -> impl Fn(f64, f64) -> f64 {
    move |x, y| r - ((x - cx).powi(2) + (y - cy).powi(2)).sqrt()
}

/// Annulus between `r_in` and `r_out`.
pub fn ring_sdf(cx: f64, cy: f64, r_in: f64, r_out: f64) -> impl Fn(f64, f64) -> f64 {
    move |x, y| {
        let r = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
        (r - r_in).min(r_out - r)
    }
}

/// Signed distance (positive inside) of a box with half sizes `(hx, hy)`
/// in its local frame.
fn box_sdf(px: f64, py: f64, hx: f64, hy: f64) -> f64 {
    let qx = px.abs() - hx;
    let qy = py.abs() - hy;
    let outside = (qx.max(0.0).powi(2) + qy.max(0.0).powi(2)).sqrt();
    let inside = qx.max(qy).min(0.0);
    -(outside + inside)
}

/// Two bars crossing at `(cx, cy)` along the diagonals.
pub fn x_sdf(cx: f64, cy: f64, half_len: f64, half_width: f64) -> impl Fn(f64, f64) -> f64 {
    move |x, y| {
        let (dx, dy) = (x - cx, y - cy);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (u, v) = (s * (dx + dy), s * (dy - dx));
        box_sdf(u, v, half_len, half_width).max(box_sdf(v, u, half_len, half_width))
    }
}

/// 64×64 filled disk of radius 20 centered in the image.
pub fn disk_image<T: Real>() -> GrayImage<T> {
    image_from_sdf(64, 64, disk_sdf(31.5, 31.5, 20.0))
}

/// 64×64 "X".
pub fn x_image<T: Real>() -> GrayImage<T> {
    image_from_sdf(64, 64, x_sdf(31.5, 31.5, 22.0, 5.0))
}

/// 64×64 "O".
pub fn o_image<T: Real>() -> GrayImage<T> {
    image_from_sdf(64, 64, ring_sdf(31.5, 31.5, 14.0, 24.0))
}

/// `n` points on an ellipse with outward normals, as boundary constraints
/// plus normal constraints `offset` inward.
pub fn ellipse_constraints<T: Real>(
    center: [f64; 2],
    radii: [f64; 2],
    n: usize,
    phase: f64,
    offset: f64,
) -> ConstraintSet<T> {
    let pairs = (0..n)
        .map(|i| {
            let a = phase + TAU * i as f64 / n as f64;
            let p = [center[0] + radii[0] * a.cos(), center[1] + radii[1] * a.sin()];
            let g = [a.cos() / radii[0], a.sin() / radii[1]];
            let len = (g[0] * g[0] + g[1] * g[1]).sqrt();
            let q = [p[0] - offset * g[0] / len, p[1] - offset * g[1] / len];
            (Constraint::at(&p, 0.0), Constraint::at(&q, 1.0))
        })
        .collect();
    ConstraintSet::from_pairs(2, pairs)
}

/// Fibonacci-lattice directions on the unit sphere.
pub fn fibonacci_directions(n: usize) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5.0_f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden * i as f64;
            [r * a.cos(), r * a.sin(), z]
        })
        .collect()
}

/// Points on an axis-aligned ellipsoid with outward unit normals.
pub fn ellipsoid_cloud<T: Real>(center: [f64; 3], radii: [f64; 3], n: usize) -> PointNormalCloud<T> {
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for d in fibonacci_directions(n) {
        let p: [f64; 3] = std::array::from_fn(|a| center[a] + radii[a] * d[a]);
        let g: [f64; 3] = std::array::from_fn(|a| d[a] / radii[a]);
        let len = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        points.push(p.map(T::lit));
        normals.push(g.map(|v| T::lit(v / len)));
    }
    PointNormalCloud::new(points, normals).expect("matching lengths")
}

pub fn sphere_cloud<T: Real>(center: [f64; 3], radius: f64, n: usize) -> PointNormalCloud<T> {
    ellipsoid_cloud(center, [radius; 3], n)
}

/// Points on the superquadric `|x/a|^4 + |y/b|^4 + |z/c|^4 = 1` (a rounded
/// box) with outward unit normals.
pub fn rounded_box_cloud<T: Real>(center: [f64; 3], half: [f64; 3], n: usize) -> PointNormalCloud<T> {
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for d in fibonacci_directions(n) {
        // Radial projection of the direction onto the surface.
        let s: f64 = (0..3).map(|a| (d[a] / half[a]).powi(4)).sum::<f64>().powf(-0.25);
        let q: [f64; 3] = std::array::from_fn(|a| d[a] * s);
        let g: [f64; 3] = std::array::from_fn(|a| 4.0 * q[a].powi(3) / half[a].powi(4));
        let len = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        points.push(std::array::from_fn(|a| T::lit(center[a] + q[a])));
        normals.push(g.map(|v| T::lit(v / len)));
    }
    PointNormalCloud::new(points, normals).expect("matching lengths")
}

/// Signed distance to a sphere, negative inside.
pub fn sphere_field(center: [f64; 3], radius: f64) -> impl Fn(&[f64]) -> f64 + Sync {
    move |x: &[f64]| {
        ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2) + (x[2] - center[2]).powi(2))
            .sqrt()
            - radius
    }
}

/// Torus around the z axis, negative inside.
pub fn torus_field(major: f64, minor: f64) -> impl Fn(&[f64]) -> f64 + Sync {
    move |x: &[f64]| {
        let q = (x[0] * x[0] + x[1] * x[1]).sqrt() - major;
        (q * q + x[2] * x[2]).sqrt() - minor
    }
}
