//! Half-way displacement warps and the per-frame unwarp.
//!
//! Given corresponding points `a_i` on shape A and `b_i` on shape B, `w_A`
//! interpolates `(b_i - a_i) / 2` at `a_i` and `w_B` interpolates
//! `(a_i - b_i) / 2` at `b_i`, one scalar solve per coordinate. Both shapes
//! are displaced half-way toward each other before morphing; every frame
//! is then mapped back with [`unwarp`].

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::geometry::{Constraint, Point};
use crate::kernel::KernelKind;
use crate::model::{solve_model, RbfModel};
use crate::morph::{build_morph, morph_sequence, Frame, Geometry, GridSpec};
use crate::scalar::{distance, Real};

/// Paired landmarks on two shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet<T> {
    pub a_points: Vec<Point<T>>,
    pub b_points: Vec<Point<T>>,
}

impl<T: Real> CorrespondenceSet<T> {
    pub fn new(a_points: Vec<Point<T>>, b_points: Vec<Point<T>>) -> Result<Self> {
        if a_points.len() != b_points.len() {
            return Err(Error::SizeMismatch(format!(
                "{} points on A but {} on B",
                a_points.len(),
                b_points.len()
            )));
        }
        let dim = a_points.first().map(Point::dim).unwrap_or(0);
        for p in a_points.iter().chain(&b_points) {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.dim(),
                });
            }
        }
        if a_points.len() < dim + 1 {
            return Err(Error::InsufficientConstraints {
                needed: dim + 1,
                found: a_points.len(),
            });
        }
        Ok(CorrespondenceSet { a_points, b_points })
    }

    pub fn dim(&self) -> usize {
        self.a_points.first().map(Point::dim).unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.a_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a_points.is_empty()
    }
}

/// Vector field with one interpolant per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementWarp<T> {
    pub components: Vec<RbfModel<T>>,
}

impl<T: Real> DisplacementWarp<T> {
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    /// `w(x)` without dimension checks.
    pub fn displacement(&self, x: &[T]) -> Vec<T> {
        self.components.iter().map(|m| m.value(x)).collect()
    }

    /// `x + w(x)`.
    pub fn apply_to(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .zip(self.displacement(x))
            .map(|(&a, d)| a + d)
            .collect()
    }
}

fn component_warp<T: Real>(
    sites: &[Point<T>],
    targets: &[Point<T>],
    kernel: KernelKind,
) -> Result<DisplacementWarp<T>> {
    let dim = sites[0].dim();
    let half = T::lit(0.5);
    let components = (0..dim)
        .map(|axis| {
            let constraints: Vec<Constraint<T>> = sites
                .iter()
                .zip(targets)
                .map(|(s, t)| Constraint::new(s.clone(), (t[axis] - s[axis]) * half))
                .collect::<Result<_>>()?;
            solve_model(&constraints, kernel)
        })
        .collect::<Result<_>>()?;
    Ok(DisplacementWarp { components })
}

/// Builds `(w_A, w_B)`.
pub fn build_halfway_warps<T: Real>(
    corr: &CorrespondenceSet<T>,
    kernel: KernelKind,
) -> Result<(DisplacementWarp<T>, DisplacementWarp<T>)> {
    if corr.is_empty() {
        return Err(Error::InsufficientConstraints {
            needed: 3,
            found: 0,
        });
    }
    Ok((
        component_warp(&corr.a_points, &corr.b_points, kernel)?,
        component_warp(&corr.b_points, &corr.a_points, kernel)?,
    ))
}

/// `p + w(p)` for each point.
pub fn apply_warp<T: Real>(w: &DisplacementWarp<T>, pts: &[Point<T>]) -> Result<Vec<Point<T>>> {
    pts.iter()
        .map(|p| {
            if p.dim() != w.dim() {
                return Err(Error::DimensionMismatch {
                    expected: w.dim(),
                    found: p.dim(),
                });
            }
            Point::new(w.apply_to(p.coords()))
        })
        .collect()
}

/// Maps a point of a warped frame back toward the original shapes.
///
/// `p` holds the spatial coordinates followed by `t`. With
/// `τ = 2 t / t_max`, the spatial part is moved by `-(1 - τ) w_A(x)` for
/// `τ ≤ 1` and by `-(τ - 1) w_B(x)` otherwise: the full half-way warp is
/// undone at either end and nothing moves at the middle frame.
pub fn unwarp<T: Real>(
    p: &[T],
    w_a: &DisplacementWarp<T>,
    w_b: &DisplacementWarp<T>,
    t_max: T,
) -> Vec<T> {
    let d = p.len() - 1;
    debug_assert_eq!(d, w_a.dim());
    let (x, t) = (&p[..d], p[d]);
    let tau = T::lit(2.0) * t / t_max;
    let (warp, amount) = if tau <= T::one() {
        (w_a, T::one() - tau)
    } else {
        (w_b, tau - T::one())
    };
    let mut out: Vec<T> = if amount == T::zero() {
        x.to_vec()
    } else {
        x.iter()
            .zip(warp.displacement(x))
            .map(|(&c, w)| c - amount * w)
            .collect()
    };
    out.push(t);
    out
}

/// Displaces boundary constraints by `w`; each paired normal constraint is
/// displaced too and then pulled back to its original distance from the
/// displaced boundary constraint along the displaced direction.
pub fn warp_constraint_set<T: Real>(set: &ConstraintSet<T>, w: &DisplacementWarp<T>) -> Result<ConstraintSet<T>> {
    if set.dim != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            found: set.dim,
        });
    }
    let mut out = set.map_positions(set.dim, |p| w.apply_to(p));
    for (i, pair) in set.pairing.iter().enumerate() {
        let Some(n) = *pair else { continue };
        let offset = distance(set.boundary[i].position.coords(), set.normal[n].position.coords());
        let b = out.boundary[i].position.coords().to_vec();
        let raw = out.normal[n].position.coords().to_vec();
        let dir: Vec<T> = raw.iter().zip(&b).map(|(&r, &c)| r - c).collect();
        let len = crate::scalar::norm(&dir);
        if len > T::zero() {
            let fixed: Vec<T> = b
                .iter()
                .zip(&dir)
                .map(|(&c, &d)| c + offset * d / len)
                .collect();
            out.normal[n].position = Point::new(fixed)?;
        }
    }
    Ok(out)
}

fn unwarp_geometry<T: Real>(
    geometry: &Geometry<T>,
    t: T,
    w_a: &DisplacementWarp<T>,
    w_b: &DisplacementWarp<T>,
    t_max: T,
) -> Geometry<T> {
    match geometry {
        Geometry::Contour(poly) => Geometry::Contour(poly.map_points(|p| {
            let q = unwarp(&[p[0], p[1], t], w_a, w_b, t_max);
            [q[0], q[1]]
        })),
        Geometry::Surface(mesh) => Geometry::Surface(mesh.map_vertices(|v| {
            let q = unwarp(&[v[0], v[1], v[2], t], w_a, w_b, t_max);
            [q[0], q[1], q[2]]
        })),
    }
}

/// Warp both shapes half-way, morph, extract each frame, and unwarp every
/// extracted vertex at its frame's `t`.
#[allow(clippy::too_many_arguments)]
pub fn warped_morph<T: Real>(
    a: &ConstraintSet<T>,
    b: &ConstraintSet<T>,
    corr: &CorrespondenceSet<T>,
    t_max: T,
    kernel: KernelKind,
    warp_kernel: KernelKind,
    n_frames: usize,
    grid: &GridSpec<T>,
) -> Result<Vec<Frame<T>>> {
    let (w_a, w_b) = build_halfway_warps(corr, warp_kernel)?;
    let warped_a = warp_constraint_set(a, &w_a)?;
    let warped_b = warp_constraint_set(b, &w_b)?;
    let morph = build_morph(&warped_a, &warped_b, t_max, kernel)?;
    let frames = morph_sequence(&morph, n_frames, grid)?;
    Ok(frames
        .into_iter()
        .map(|f| Frame {
            geometry: unwarp_geometry(&f.geometry, f.coords[0], &w_a, &w_b, t_max),
            coords: f.coords,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_corr(rotate: bool) -> CorrespondenceSet<f64> {
        let a: Vec<[f64; 2]> = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let b: Vec<[f64; 2]> = if rotate {
            // 90° about the center (0.5, 0.5).
            a.iter().map(|p| [1.0 - p[1], p[0]]).collect()
        } else {
            a.clone()
        };
        CorrespondenceSet::new(
            a.iter().map(|p| Point::from_f64(p)).collect(),
            b.iter().map(|p| Point::from_f64(p)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn identical_landmarks_give_zero_warps() {
        let (wa, wb) = build_halfway_warps(&square_corr(false), KernelKind::ThinPlate).unwrap();
        for w in [&wa, &wb] {
            for m in &w.components {
                assert!(m.weights().iter().all(|&d| d == 0.0));
                assert!(m.poly().iter().all(|&p| p == 0.0));
            }
        }
        let pts = vec![Point::from_f64(&[0.3, 0.9])];
        assert_eq!(apply_warp(&wa, &pts).unwrap(), pts);
    }

    #[test]
    fn rotated_square_halfway() {
        let corr = square_corr(true);
        let (wa, wb) = build_halfway_warps(&corr, KernelKind::ThinPlate).unwrap();
        for (a, b) in corr.a_points.iter().zip(&corr.b_points) {
            let d = wa.displacement(a.coords());
            for axis in 0..2 {
                assert!((d[axis] - (b[axis] - a[axis]) / 2.0).abs() < 1e-9);
            }
            let e = wb.displacement(b.coords());
            for axis in 0..2 {
                assert!((e[axis] - (a[axis] - b[axis]) / 2.0).abs() < 1e-9);
            }
            let moved = apply_warp(&wa, std::slice::from_ref(a)).unwrap();
            for axis in 0..2 {
                assert!((moved[0][axis] - (a[axis] + b[axis]) / 2.0).abs() < 1e-9);
            }
        }
        // The center is the fixed point of the rotation.
        let c = wa.apply_to(&[0.5, 0.5]);
        assert!((c[0] - 0.5).abs() < 1e-9 && (c[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn unwarp_endpoints_and_middle() {
        let a: Vec<Point<f64>> = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
            .iter()
            .map(|p| Point::from_f64(p))
            .collect();
        let b: Vec<Point<f64>> = a.iter().map(|p| p.translated(&[2.0, -4.0])).collect();
        let (wa, wb) =
            build_halfway_warps(&CorrespondenceSet::new(a, b).unwrap(), KernelKind::ThinPlate)
                .unwrap();
        let t_max = 3.0;
        let mid = unwarp(&[0.25, 0.75, 1.5], &wa, &wb, t_max);
        assert_eq!(mid, vec![0.25, 0.75, 1.5]);
        let start = unwarp(&[1.0, 1.0, 0.0], &wa, &wb, t_max);
        assert!((start[0] - 0.0).abs() < 1e-9 && (start[1] - 3.0).abs() < 1e-9);
        let end = unwarp(&[1.0, 1.0, 3.0], &wa, &wb, t_max);
        assert!((end[0] - 2.0).abs() < 1e-9 && (end[1] + 1.0).abs() < 1e-9);
        assert_eq!(start[2], 0.0);
    }

    #[test]
    fn correspondences_validated() {
        let a = vec![Point::<f64>::from_f64(&[0.0, 0.0])];
        assert!(CorrespondenceSet::new(a.clone(), vec![]).is_err());
        assert!(CorrespondenceSet::new(a.clone(), a).is_err());
    }
}
