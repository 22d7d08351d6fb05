//! Test-only oracles written independently of the library internals.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use varimorph::{Constraint, KernelKind, Polyline2D};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Kernel formulas, restated.
pub fn phi(kind: KernelKind, r: f64) -> f64 {
    match kind {
        KernelKind::ThinPlate => {
            if r == 0.0 {
                0.0
            } else {
                r * r * r.ln()
            }
        }
        KernelKind::Linear => r,
        KernelKind::Cubic => r * r * r,
    }
}

/// Dense Gaussian elimination with partial pivoting, in place.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        assert!(a[col][col].abs() > 1e-14, "oracle: singular system");
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            let (upper, lower) = a.split_at_mut(row);
            for (x, &y) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *x -= f * y;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Assembles the raw (unscaled) interpolation system and solves it by
/// elimination. Returns `(weights, poly)`.
pub fn oracle_model(constraints: &[Constraint<f64>], kind: KernelKind) -> (Vec<f64>, Vec<f64>) {
    let k = constraints.len();
    let d = constraints[0].position.dim();
    let n = k + d + 1;
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for i in 0..k {
        let ci = constraints[i].position.coords();
        for j in 0..k {
            let cj = constraints[j].position.coords();
            let r = ci.iter().zip(cj).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            a[i][j] = phi(kind, r);
        }
        a[i][k] = 1.0;
        a[k][i] = 1.0;
        for ax in 0..d {
            a[i][k + 1 + ax] = ci[ax];
            a[k + 1 + ax][i] = ci[ax];
        }
        b[i] = constraints[i].value;
    }
    let x = gauss_solve(a, b);
    (x[..k].to_vec(), x[k..].to_vec())
}

pub fn random_constraints(rng: &mut ChaCha8Rng, k: usize, dim: usize) -> Vec<Constraint<f64>> {
    (0..k)
        .map(|_| {
            let p: Vec<f64> = (0..dim).map(|_| rng.gen()).collect();
            Constraint::at(&p, rng.gen())
        })
        .collect()
}

/// Random points in the unit box with a minimum pairwise separation.
pub fn separated_points(rng: &mut ChaCha8Rng, k: usize, dim: usize, min_sep: f64) -> Vec<Vec<f64>> {
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(k);
    while pts.len() < k {
        let p: Vec<f64> = (0..dim).map(|_| rng.gen()).collect();
        if pts.iter().all(|q| dist(&p, q) > min_sep) {
            pts.push(p);
        }
    }
    pts
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

/// Central-difference gradient.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|a| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[a] += h;
            m[a] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

/// First sign change of `f` along the ray `t · dir` for `t ∈ (0, t_max]`,
/// refined by bisection.
pub fn ray_root(f: impl Fn(&[f64]) -> f64, origin: &[f64], dir: &[f64], t_max: f64) -> Option<f64> {
    let at = |t: f64| -> Vec<f64> { origin.iter().zip(dir).map(|(o, d)| o + t * d).collect() };
    let steps = 400;
    let mut prev = f(&at(0.0));
    for i in 1..=steps {
        let t = t_max * i as f64 / steps as f64;
        let v = f(&at(t));
        if (prev > 0.0) != (v > 0.0) {
            let (mut lo, mut hi) = (t_max * (i - 1) as f64 / steps as f64, t);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if (f(&at(mid)) > 0.0) == (prev > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        prev = v;
    }
    None
}

/// Even-odd point-in-polygon over every loop of the contour.
pub fn inside_contour(p: [f64; 2], poly: &Polyline2D<f64>) -> bool {
    let mut inside = false;
    for (a, b) in poly.segments() {
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Centroid of the pixel centers enclosed by the contour.
pub fn raster_centroid(poly: &Polyline2D<f64>, width: usize, height: usize) -> Option<[f64; 2]> {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for y in 0..height {
        for x in 0..width {
            if inside_contour([x as f64, y as f64], poly) {
                sx += x as f64;
                sy += y as f64;
                n += 1;
            }
        }
    }
    (n > 0).then(|| [sx / n as f64, sy / n as f64])
}

/// Enclosed area in square pixels, sampling each pixel on a `sub × sub`
/// lattice.
pub fn raster_area(poly: &Polyline2D<f64>, width: usize, height: usize, sub: usize) -> f64 {
    let step = 1.0 / sub as f64;
    let mut count = 0usize;
    for y in 0..height * sub {
        for x in 0..width * sub {
            let p = [(x as f64 + 0.5) * step - 0.5, (y as f64 + 0.5) * step - 0.5];
            if inside_contour(p, poly) {
                count += 1;
            }
        }
    }
    count as f64 * step * step
}

/// Hausdorff distance between a contour and the circle of radius `r`
/// about `c`, with both curves densely sampled.
pub fn circle_hausdorff(poly: &Polyline2D<f64>, c: [f64; 2], r: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, b) in poly.segments() {
        for s in 0..=8 {
            let t = s as f64 / 8.0;
            let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            worst = worst.max((dist(&p, &c) - r).abs());
        }
    }
    for i in 0..2000 {
        let ang = std::f64::consts::TAU * i as f64 / 2000.0;
        let q = [c[0] + r * ang.cos(), c[1] + r * ang.sin()];
        worst = worst.max(varimorph::metrics::distance_to_polyline(&q, poly));
    }
    worst
}
