//! Surface reconstruction from planar contour slices, parallel or
//! arbitrarily oriented, with one simultaneous solve.

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::extract::{marching_cubes, sample_grid, TriMesh};
use crate::geometry::{Aabb, Constraint, Point};
use crate::kernel::KernelKind;
use crate::model::{solve_model, RbfModel};
use crate::scalar::{dot, norm, Real};

/// Constraints closer than this after placement are merged.
pub const MERGE_TOLERANCE: f64 = 1e-6;

/// Rigid placement of a slice plane: `p = origin + x u + y v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceFrame<T> {
    pub origin: [T; 3],
    pub u: [T; 3],
    pub v: [T; 3],
}

impl<T: Real> SliceFrame<T> {
    pub fn new(origin: [T; 3], u: [T; 3], v: [T; 3]) -> Result<Self> {
        let tol = T::lit(1e-9);
        let bad = (norm(&u) - T::one()).abs() > tol
            || (norm(&v) - T::one()).abs() > tol
            || dot(&u, &v).abs() > tol;
        if bad {
            return Err(Error::InvalidFrame("slice axes are not orthonormal".into()));
        }
        Ok(SliceFrame { origin, u, v })
    }

    /// The plane `z = height`.
    pub fn horizontal(height: T) -> Self {
        let (o, l) = (T::zero(), T::one());
        SliceFrame {
            origin: [o, o, height],
            u: [l, o, o],
            v: [o, l, o],
        }
    }

    /// From a row-major 3×4 matrix `[R | t]`; the first two columns of `R`
    /// are the in-plane axes and `t` is the origin. `R` must be a rotation.
    pub fn from_rigid(m: &[T; 12]) -> Result<Self> {
        let col = |c: usize| [m[c], m[4 + c], m[8 + c]];
        let (u, v, w) = (col(0), col(1), col(2));
        let frame = SliceFrame::new([m[3], m[7], m[11]], u, v)?;
        let cross = [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ];
        let tol = T::lit(1e-9);
        if (0..3).any(|a| (cross[a] - w[a]).abs() > tol) {
            return Err(Error::InvalidFrame(
                "third column is not the cross product of the first two".into(),
            ));
        }
        Ok(frame)
    }

    pub fn map(&self, p: &[T]) -> [T; 3] {
        std::array::from_fn(|a| self.origin[a] + p[0] * self.u[a] + p[1] * self.v[a])
    }

    pub fn normal(&self) -> [T; 3] {
        let (u, v) = (self.u, self.v);
        [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ]
    }
}

/// 2D constraints plus the frame that places them in R³.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientedSlice<T> {
    pub constraints: ConstraintSet<T>,
    pub frame: SliceFrame<T>,
}

/// Cumulative plane positions `0, s_0, s_0 + s_1, ...`.
pub fn slice_positions<T: Real>(spacings: &[T]) -> Result<Vec<T>> {
    if let Some(s) = spacings.iter().find(|&&s| !(s > T::zero())) {
        return Err(Error::InvalidParameter(format!("slice spacing {s} must be positive")));
    }
    let mut out = vec![T::zero()];
    for &s in spacings {
        out.push(*out.last().unwrap() + s);
    }
    Ok(out)
}

/// Places slice `i` in the plane `z = Σ_{j<i} spacings[j]`.
pub fn stack_parallel<T: Real>(slices: &[ConstraintSet<T>], spacings: &[T]) -> Result<ConstraintSet<T>> {
    if slices.is_empty() {
        return Err(Error::InvalidParameter("no slices given".into()));
    }
    if spacings.len() + 1 != slices.len() {
        return Err(Error::SizeMismatch(format!(
            "{} spacings for {} slices",
            spacings.len(),
            slices.len()
        )));
    }
    let z = slice_positions(spacings)?;
    let mut out = ConstraintSet::empty(3);
    for (set, &h) in slices.iter().zip(&z) {
        if set.dim != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: set.dim,
            });
        }
        let lifted = set.map_positions(3, |p| vec![p[0], p[1], h]);
        let offset = out.normal.len();
        out.boundary.extend(lifted.boundary);
        out.normal.extend(lifted.normal);
        out.pairing.extend(lifted.pairing.iter().map(|p| p.map(|i| i + offset)));
    }
    Ok(out)
}

/// Result of [`place_oriented`].
#[derive(Debug, Clone, PartialEq)]
pub struct OrientedPlacement<T> {
    pub constraints: ConstraintSet<T>,
    /// Constraints dropped because another slice already had one within
    /// [`MERGE_TOLERANCE`].
    pub merged: usize,
}

/// Maps every slice's constraints through its frame. Exactly coincident
/// positions from different slices are an error; positions closer than
/// [`MERGE_TOLERANCE`] are merged, keeping the earlier slice's constraint.
pub fn place_oriented<T: Real>(slices: &[OrientedSlice<T>]) -> Result<OrientedPlacement<T>> {
    struct Placed<T> {
        slice: usize,
        normal: bool,
        index: usize,
        pos: [T; 3],
    }
    let mut placed = Vec::new();
    for (s, sl) in slices.iter().enumerate() {
        if sl.constraints.dim != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: sl.constraints.dim,
            });
        }
        SliceFrame::new(sl.frame.origin, sl.frame.u, sl.frame.v)?;
        for (normal, list) in [(false, &sl.constraints.boundary), (true, &sl.constraints.normal)] {
            for (index, c) in list.iter().enumerate() {
                placed.push(Placed {
                    slice: s,
                    normal,
                    index,
                    pos: sl.frame.map(c.position.coords()),
                });
            }
        }
    }

    let tol = T::lit(MERGE_TOLERANCE);
    let mut order: Vec<usize> = (0..placed.len()).collect();
    order.sort_by(|&a, &b| {
        placed[a].pos[0]
            .partial_cmp(&placed[b].pos[0])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut dropped = vec![false; placed.len()];
    for (n, &i) in order.iter().enumerate() {
        for &j in &order[n + 1..] {
            if placed[j].pos[0] - placed[i].pos[0] > tol {
                break;
            }
            let d = crate::scalar::distance(&placed[i].pos, &placed[j].pos);
            if d == T::zero() && placed[i].slice != placed[j].slice {
                let (a, b) = (placed[i].slice, placed[j].slice);
                return Err(Error::DuplicateSlicePositions {
                    first_slice: a.min(b),
                    second_slice: a.max(b),
                });
            }
            if d <= tol && placed[i].slice != placed[j].slice {
                // `placed` is in slice order, so the larger index is later.
                dropped[i.max(j)] = true;
            }
        }
    }

    let mut out = ConstraintSet::empty(3);
    let mut normal_index = vec![Vec::new(); slices.len()];
    for (k, p) in placed.iter().enumerate() {
        if !p.normal {
            continue;
        }
        let idx = if dropped[k] {
            None
        } else {
            let c = &slices[p.slice].constraints.normal[p.index];
            out.normal.push(Constraint::new(Point::new(p.pos.to_vec())?, c.value)?);
            Some(out.normal.len() - 1)
        };
        normal_index[p.slice].push(idx);
    }
    for (k, p) in placed.iter().enumerate() {
        if p.normal || dropped[k] {
            continue;
        }
        let set = &slices[p.slice].constraints;
        let c = &set.boundary[p.index];
        out.boundary.push(Constraint::new(Point::new(p.pos.to_vec())?, c.value)?);
        out.pairing
            .push(set.pairing[p.index].and_then(|n| normal_index[p.slice][n]));
    }
    Ok(OrientedPlacement {
        constraints: out,
        merged: dropped.iter().filter(|&&d| d).count(),
    })
}

/// Extraction settings for [`reconstruct`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructOptions<T> {
    /// Lattice points along the longest axis of the extraction box.
    pub res: usize,
    /// Largest gap between neighboring slices (zero when not applicable).
    pub max_spacing: T,
}

#[derive(Debug, Clone)]
pub struct Reconstruction<T> {
    pub model: RbfModel<T>,
    pub mesh: TriMesh<T>,
    /// Box the mesh was extracted from.
    pub bounds: Aabb<T>,
}

/// Extraction box: the constraint bounds padded by
/// `max(2 · max_spacing, 0.2 · diagonal)`.
pub fn extraction_bounds<T: Real>(constraints: &ConstraintSet<T>, max_spacing: T) -> Result<Aabb<T>> {
    let all = constraints.all();
    let tight = Aabb::around(all.iter().map(|c| c.position.coords()))
        .ok_or_else(|| Error::EmptyShape("no constraints to reconstruct".into()))?;
    let pad = (T::lit(2.0) * max_spacing).max(T::lit(0.2) * tight.diagonal());
    Ok(tight.padded(pad))
}

/// Solves once for all slice constraints and extracts the zero surface.
pub fn reconstruct<T: Real>(
    constraints: &ConstraintSet<T>,
    kernel: KernelKind,
    options: &ReconstructOptions<T>,
) -> Result<Reconstruction<T>> {
    if constraints.dim != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: constraints.dim,
        });
    }
    if options.res < 2 {
        return Err(Error::InvalidParameter("resolution must be at least 2".into()));
    }
    let model = solve_model(&constraints.all(), kernel)?;
    let bounds = extraction_bounds(constraints, options.max_spacing)?;
    let longest = (0..3).map(|a| bounds.extent(a)).fold(T::zero(), T::max);
    let res: Vec<usize> = (0..3)
        .map(|a| {
            let r = (bounds.extent(a) / longest * T::from_usize_lossy(options.res - 1))
                .ceil()
                .to_usize()
                .unwrap_or(1);
            r.max(1) + 1
        })
        .collect();
    let grid = sample_grid(&model, &bounds, &res)?;
    let mesh = marching_cubes(&grid, T::zero())?;
    Ok(Reconstruction {
        model,
        mesh,
        bounds,
    })
}
