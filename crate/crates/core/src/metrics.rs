//! Shape comparison measures: Hausdorff distances, discrete curvature,
//! raster topology.

use rayon::prelude::*;

use crate::error::Result;
use crate::extract::{sample_grid, Polyline2D};
use crate::geometry::Aabb;
use crate::implicit::ImplicitFn;
use crate::scalar::Real;

fn point_segment_distance<T: Real>(p: &[T; 2], a: &[T; 2], b: &[T; 2]) -> T {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > T::zero() {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    let dx = ap[0] - t * ab[0];
    let dy = ap[1] - t * ab[1];
    (dx * dx + dy * dy).sqrt()
}

/// Distance from `p` to the nearest segment of `poly` (infinite when empty).
pub fn distance_to_polyline<T: Real>(p: &[T; 2], poly: &Polyline2D<T>) -> T {
    let mut best = T::infinity();
    for (pts, &closed) in poly.loops.iter().zip(&poly.closed) {
        if pts.len() == 1 {
            let d = ((p[0] - pts[0][0]).powi(2) + (p[1] - pts[0][1]).powi(2)).sqrt();
            best = best.min(d);
        }
        for w in pts.windows(2) {
            best = best.min(point_segment_distance(p, &w[0], &w[1]));
        }
        if closed && pts.len() > 2 {
            best = best.min(point_segment_distance(p, &pts[pts.len() - 1], &pts[0]));
        }
    }
    best
}

/// Largest distance from a vertex of `a` to the curve `b`.
pub fn directed_hausdorff_2d<T: Real>(a: &Polyline2D<T>, b: &Polyline2D<T>) -> T {
    let pts: Vec<[T; 2]> = a.points().copied().collect();
    pts.par_iter()
        .map(|p| distance_to_polyline(p, b))
        .reduce(T::zero, T::max)
}

/// Symmetric Hausdorff distance between two contour sets, vertices against
/// segments.
pub fn hausdorff_2d<T: Real>(a: &Polyline2D<T>, b: &Polyline2D<T>) -> T {
    directed_hausdorff_2d(a, b).max(directed_hausdorff_2d(b, a))
}

/// Symmetric Hausdorff distance between two finite point sets.
pub fn hausdorff_points<T: Real, const D: usize>(a: &[[T; D]], b: &[[T; D]]) -> T {
    let directed = |from: &[[T; D]], to: &[[T; D]]| {
        from.par_iter()
            .map(|p| {
                to.iter()
                    .map(|q| crate::scalar::squared_distance(p, q))
                    .fold(T::infinity(), T::min)
            })
            .reduce(T::zero, T::max)
            .sqrt()
    };
    directed(a, b).max(directed(b, a))
}

/// Resamples one contour at (approximately) uniform arc length `spacing`.
pub fn resample_loop<T: Real>(pts: &[[T; 2]], closed: bool, spacing: T) -> Vec<[T; 2]> {
    let mut chain: Vec<[T; 2]> = pts.to_vec();
    if closed && !pts.is_empty() {
        chain.push(pts[0]);
    }
    let seg_len = |a: &[T; 2], b: &[T; 2]| ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    let total: T = chain.windows(2).map(|w| seg_len(&w[0], &w[1])).sum();
    if !(total > T::zero()) {
        return pts.to_vec();
    }
    let count = (total / spacing).round().to_usize().unwrap_or(0).max(if closed { 3 } else { 2 });
    let step = total / T::from_usize_lossy(count);
    let samples = if closed { count } else { count + 1 };
    let mut out = Vec::with_capacity(samples);
    let mut seg = 0;
    let mut walked = T::zero();
    for s in 0..samples {
        let target = step * T::from_usize_lossy(s);
        while seg + 1 < chain.len() - 1 && walked + seg_len(&chain[seg], &chain[seg + 1]) < target {
            walked = walked + seg_len(&chain[seg], &chain[seg + 1]);
            seg += 1;
        }
        let l = seg_len(&chain[seg], &chain[seg + 1]);
        let t = if l > T::zero() {
            ((target - walked) / l).max(T::zero()).min(T::one())
        } else {
            T::zero()
        };
        let (a, b) = (chain[seg], chain[seg + 1]);
        out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
    }
    out
}

/// Maximum discrete curvature over all contours: each loop is resampled
/// at arc length `spacing`, and the curvature at a sample is the circle
/// through it and its neighbors `stride` samples away on either side.
/// Loops shorter than `2 * stride + 1` samples are ignored.
pub fn max_discrete_curvature<T: Real>(poly: &Polyline2D<T>, spacing: T, stride: usize) -> T {
    let mut best = T::zero();
    for (pts, &closed) in poly.loops.iter().zip(&poly.closed) {
        let s = resample_loop(pts, closed, spacing);
        let n = s.len();
        if n < 2 * stride + 1 {
            continue;
        }
        let range: Box<dyn Iterator<Item = usize>> = if closed {
            Box::new(0..n)
        } else {
            Box::new(stride..n - stride)
        };
        for i in range {
            let a = s[(i + n - stride) % n];
            let b = s[i];
            let c = s[(i + stride) % n];
            best = best.max(circumcurvature(&a, &b, &c));
        }
    }
    best
}

/// `1 / R` of the circle through three points (zero when collinear).
pub fn circumcurvature<T: Real>(a: &[T; 2], b: &[T; 2], c: &[T; 2]) -> T {
    let ab = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    let bc = ((c[0] - b[0]).powi(2) + (c[1] - b[1]).powi(2)).sqrt();
    let ca = ((a[0] - c[0]).powi(2) + (a[1] - c[1]).powi(2)).sqrt();
    let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let denom = ab * bc * ca;
    if denom > T::zero() {
        T::lit(2.0) * cross.abs() / denom
    } else {
        T::zero()
    }
}

/// Enclosed area of a closed loop (absolute shoelace).
pub fn loop_area<T: Real>(pts: &[[T; 2]]) -> T {
    let n = pts.len();
    let twice: T = (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum();
    (twice * T::lit(0.5)).abs()
}

/// Binary raster of `{x : f(x) > 0}` on a `res × res` lattice, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<bool>,
}

impl Raster {
    pub fn of<T: Real, F: ImplicitFn<T> + ?Sized>(f: &F, bounds: &Aabb<T>, res: usize) -> Result<Self> {
        let grid = sample_grid(f, bounds, &[res, res])?;
        Ok(Raster {
            width: res,
            height: res,
            cells: grid.values.iter().map(|&v| v > T::zero()).collect(),
        })
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Mean `(x, y)` lattice index of set cells.
    pub fn centroid(&self) -> Option<[f64; 2]> {
        let n = self.count();
        if n == 0 {
            return None;
        }
        let (mut sx, mut sy) = (0.0, 0.0);
        for (i, _) in self.cells.iter().enumerate().filter(|(_, &c)| c) {
            sx += (i % self.width) as f64;
            sy += (i / self.width) as f64;
        }
        Some([sx / n as f64, sy / n as f64])
    }

    /// Counts connected components of cells equal to `value`, using 4- or
    /// 8-connectivity. With `pad`, the raster is surrounded by one ring of
    /// `value` cells first (so everything touching the border merges).
    fn components(&self, value: bool, eight: bool, pad: bool) -> usize {
        let off = usize::from(pad);
        let (w, h) = (self.width + 2 * off, self.height + 2 * off);
        let get = |x: usize, y: usize| -> bool {
            if pad && (x == 0 || y == 0 || x == w - 1 || y == h - 1) {
                value
            } else {
                self.cells[(y - off) * self.width + (x - off)] == value
            }
        };
        let mut seen = vec![false; w * h];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..w * h {
            if seen[start] || !get(start % w, start / w) {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let (x, y) = ((i % w) as isize, (i / w) as isize);
                for dy in -1..=1isize {
                    for dx in -1..=1isize {
                        if (dx == 0 && dy == 0) || (!eight && dx != 0 && dy != 0) {
                            continue;
                        }
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                            continue;
                        }
                        let j = ny as usize * w + nx as usize;
                        if !seen[j] && get(nx as usize, ny as usize) {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        count
    }

    /// Foreground components (4-connected).
    pub fn foreground_components(&self) -> usize {
        self.components(true, false, false)
    }

    /// Background regions (8-connected) not connected to the outside.
    pub fn holes(&self) -> usize {
        self.components(false, true, true) - 1
    }

    /// Components minus holes.
    pub fn euler_characteristic(&self) -> i64 {
        self.foreground_components() as i64 - self.holes() as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::implicit::FnField;

    fn square_loop(s: f64) -> Polyline2D<f64> {
        Polyline2D {
            loops: vec![vec![[0.0, 0.0], [s, 0.0], [s, s], [0.0, s]]],
            closed: vec![true],
        }
    }

    #[test]
    fn hausdorff_of_nested_squares() {
        let a = square_loop(1.0);
        let b = square_loop(2.0);
        assert!((hausdorff_2d(&a, &b) - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(hausdorff_2d(&a, &a), 0.0);
    }

    #[test]
    fn curvature_of_sampled_circle() {
        let r = 10.0;
        let pts: Vec<[f64; 2]> = (0..400)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / 400.0;
                [r * a.cos(), r * a.sin()]
            })
            .collect();
        let p = Polyline2D {
            loops: vec![pts],
            closed: vec![true],
        };
        let k = max_discrete_curvature(&p, 1.0, 2);
        assert!((k - 0.1).abs() < 1e-3, "{k}");
    }

    #[test]
    fn raster_topology() {
        let b = Aabb::from_f64(&[-1.0, -1.0], &[1.0, 1.0]);
        let disk = FnField::new(2, |x: &[f64]| 0.5 - (x[0] * x[0] + x[1] * x[1]).sqrt());
        let ring = FnField::new(2, |x: &[f64]| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            (r - 0.3).min(0.7 - r)
        });
        let two = FnField::new(2, |x: &[f64]| {
            0.2 - ((x[0] - 0.5).abs().min((x[0] + 0.5).abs()).powi(2) + x[1] * x[1]).sqrt()
        });
        assert_eq!(Raster::of(&disk, &b, 64).unwrap().euler_characteristic(), 1);
        assert_eq!(Raster::of(&ring, &b, 64).unwrap().euler_characteristic(), 0);
        assert_eq!(Raster::of(&two, &b, 64).unwrap().euler_characteristic(), 2);
    }

    #[test]
    fn shoelace_area() {
        assert!((loop_area(&square_loop(3.0).loops[0]) - 9.0).abs() < 1e-12);
    }
}
