//! Shape transformation by lifting constraint sets into one extra
//! dimension (two shapes) or two extra dimensions (with an influence
//! shape), solving once, and slicing.

use rayon::prelude::*;

use crate::constraints::{ConstraintSet, SdfGrid};
use crate::error::{Error, Result};
use crate::extract::{
    marching_cubes, marching_squares_with_center, sample_grid, Polyline2D, TriMesh,
};
use crate::geometry::Aabb;
use crate::implicit::{ImplicitFn, Restriction};
use crate::kernel::KernelKind;
use crate::model::{solve_model, RbfModel};
use crate::scalar::Real;

/// A solved lifted interpolant.
#[derive(Debug, Clone)]
pub struct MorphModel<T> {
    pub model: RbfModel<T>,
    pub t_max: T,
    /// Dimension of the input shapes.
    pub source_dims: usize,
    /// Extra coordinates given to each input shape, in input order.
    pub placement: Vec<Vec<T>>,
}

/// Lattice used to extract a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec<T> {
    pub bounds: Aabb<T>,
    pub res: Vec<usize>,
}

impl<T: Real> GridSpec<T> {
    pub fn new(bounds: Aabb<T>, res: Vec<usize>) -> Self {
        GridSpec { bounds, res }
    }

    /// Same resolution `n` along every axis of `bounds`.
    pub fn uniform(bounds: Aabb<T>, n: usize) -> Self {
        let d = bounds.dim();
        GridSpec {
            bounds,
            res: vec![n; d],
        }
    }
}

/// Extracted zero set of one frame.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry<T> {
    Contour(Polyline2D<T>),
    Surface(TriMesh<T>),
}

impl<T: Real> Geometry<T> {
    pub fn contour(&self) -> Option<&Polyline2D<T>> {
        match self {
            Geometry::Contour(p) => Some(p),
            Geometry::Surface(_) => None,
        }
    }

    pub fn surface(&self) -> Option<&TriMesh<T>> {
        match self {
            Geometry::Surface(m) => Some(m),
            Geometry::Contour(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame<T> {
    /// Slice coordinates of the frame (`[t]`, or `[s, t]` for influence paths).
    pub coords: Vec<T>,
    pub geometry: Geometry<T>,
}

fn lift_set<T: Real>(set: &ConstraintSet<T>, extra: &[T]) -> ConstraintSet<T> {
    set.map_positions(set.dim + extra.len(), |p| {
        let mut q = p.to_vec();
        q.extend_from_slice(extra);
        q
    })
}

fn concat_sets<T: Real>(dim: usize, sets: &[ConstraintSet<T>]) -> ConstraintSet<T> {
    let mut out = ConstraintSet::empty(dim);
    for s in sets {
        let offset = out.normal.len();
        out.boundary.extend(s.boundary.iter().cloned());
        out.normal.extend(s.normal.iter().cloned());
        out.pairing
            .extend(s.pairing.iter().map(|p| p.map(|i| i + offset)));
    }
    out
}

/// Gives every constraint of `a` the extra coordinate `0` and every
/// constraint of `b` the extra coordinate `t_max`. Values are unchanged.
pub fn embed_pair<T: Real>(
    a: &ConstraintSet<T>,
    b: &ConstraintSet<T>,
    t_max: T,
) -> Result<ConstraintSet<T>> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            found: b.dim,
        });
    }
    if !(t_max > T::zero()) || !t_max.is_finite() {
        return Err(Error::InvalidParameter(format!("t_max {t_max} must be positive")));
    }
    Ok(concat_sets(
        a.dim + 1,
        &[lift_set(a, &[T::zero()]), lift_set(b, &[t_max])],
    ))
}

/// Embeds both shapes and solves one interpolation problem in `d + 1`
/// dimensions.
pub fn build_morph<T: Real>(
    a: &ConstraintSet<T>,
    b: &ConstraintSet<T>,
    t_max: T,
    kernel: KernelKind,
) -> Result<MorphModel<T>> {
    for (name, s) in [("A", a), ("B", b)] {
        if s.is_empty() {
            return Err(Error::EmptyShape(format!("shape {name} has no constraints")));
        }
    }
    let lifted = embed_pair(a, b, t_max)?;
    let model = solve_model(&lifted.all(), kernel)?;
    Ok(MorphModel {
        model,
        t_max,
        source_dims: a.dim,
        placement: vec![vec![T::zero()], vec![t_max]],
    })
}

/// The intermediate-shape function `g(x) = f(x, t)`.
pub fn slice<T: Real>(morph: &MorphModel<T>, t: T) -> Restriction<'_, T> {
    let mut fixed = vec![t];
    // Influence models have two lifted coordinates; slicing along `t`
    // alone keeps the second one at zero.
    fixed.resize(morph.model.dim() - morph.source_dims, T::zero());
    Restriction::new(&morph.model, fixed)
}

/// Extracts the zero set of `f` on `grid` (contour in 2D, surface in 3D).
pub fn extract_zero_set<T: Real, F: ImplicitFn<T>>(f: &F, grid: &GridSpec<T>) -> Result<Geometry<T>> {
    let sampled = sample_grid(f, &grid.bounds, &grid.res)?;
    match f.dim() {
        2 => Ok(Geometry::Contour(marching_squares_with_center(
            &sampled,
            T::zero(),
            &|x| f.value(x),
        )?)),
        3 => Ok(Geometry::Surface(marching_cubes(&sampled, T::zero())?)),
        d => Err(Error::UnsupportedDimension(d)),
    }
}

/// Frame parameters `t_i = i · t_max / (n - 1)`.
pub fn frame_times<T: Real>(t_max: T, n_frames: usize) -> Vec<T> {
    let last = T::from_usize_lossy(n_frames.max(2) - 1);
    (0..n_frames)
        .map(|i| {
            if i + 1 == n_frames {
                t_max
            } else {
                t_max * T::from_usize_lossy(i) / last
            }
        })
        .collect()
}

/// `n_frames` evenly spaced slices from `t = 0` to `t = t_max`, extracted
/// concurrently.
pub fn morph_sequence<T: Real>(
    morph: &MorphModel<T>,
    n_frames: usize,
    grid: &GridSpec<T>,
) -> Result<Vec<Frame<T>>> {
    if n_frames < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 frames, got {n_frames}"
        )));
    }
    frame_times(morph.t_max, n_frames)
        .into_par_iter()
        .map(|t| {
            Ok(Frame {
                coords: vec![t],
                geometry: extract_zero_set(&slice(morph, t), grid)?,
            })
        })
        .collect()
}

/// Per-pixel linear blend `(1 - alpha) A + alpha B` of two distance fields.
pub fn sdf_morph_baseline<T: Real>(a: &SdfGrid<T>, b: &SdfGrid<T>, alpha: T) -> Result<SdfGrid<T>> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::SizeMismatch(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    if !(alpha >= T::zero() && alpha <= T::one()) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} outside [0, 1]")));
    }
    let values = if alpha == T::zero() {
        a.values.clone()
    } else if alpha == T::one() {
        b.values.clone()
    } else {
        a.values
            .iter()
            .zip(&b.values)
            .map(|(&x, &y)| (T::one() - alpha) * x + alpha * y)
            .collect()
    };
    Ok(SdfGrid {
        width: a.width,
        height: a.height,
        values,
    })
}

/// Positions of three shapes in the two lifted coordinates `(s, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfluencePlacement<T> {
    pub a: [T; 2],
    pub b: [T; 2],
    pub c: [T; 2],
}

impl<T: Real> Default for InfluencePlacement<T> {
    fn default() -> Self {
        InfluencePlacement {
            a: [T::zero(), T::zero()],
            b: [T::one(), T::zero()],
            c: [T::lit(0.5), T::lit(0.5)],
        }
    }
}

impl<T: Real> InfluencePlacement<T> {
    fn check(&self) -> Result<()> {
        let [a, b, c] = [self.a, self.b, self.c];
        let twice_area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        let scale = [b, c]
            .iter()
            .map(|p| ((p[0] - a[0]).powi(2) + (p[1] - a[1]).powi(2)).sqrt())
            .fold(T::zero(), T::max);
        if !(twice_area.abs() > T::lit(1e-9) * scale * scale) {
            return Err(Error::DegeneratePlacement(
                "influence placements are collinear".into(),
            ));
        }
        Ok(())
    }
}

/// Lifts three shapes into `d + 2` dimensions at their placements.
pub fn embed_influence<T: Real>(
    a: &ConstraintSet<T>,
    b: &ConstraintSet<T>,
    c: &ConstraintSet<T>,
    placement: &InfluencePlacement<T>,
) -> Result<ConstraintSet<T>> {
    for s in [b, c] {
        if s.dim != a.dim {
            return Err(Error::DimensionMismatch {
                expected: a.dim,
                found: s.dim,
            });
        }
    }
    placement.check()?;
    Ok(concat_sets(
        a.dim + 2,
        &[
            lift_set(a, &placement.a),
            lift_set(b, &placement.b),
            lift_set(c, &placement.c),
        ],
    ))
}

/// Solves the `d + 2` dimensional problem for shapes A, B and influence
/// shape C.
pub fn build_influence<T: Real>(
    a: &ConstraintSet<T>,
    b: &ConstraintSet<T>,
    c: &ConstraintSet<T>,
    placement: &InfluencePlacement<T>,
    kernel: KernelKind,
) -> Result<MorphModel<T>> {
    for (name, s) in [("A", a), ("B", b)] {
        if s.is_empty() {
            return Err(Error::EmptyShape(format!("shape {name} has no constraints")));
        }
    }
    let lifted = embed_influence(a, b, c, placement)?;
    let model = solve_model(&lifted.all(), kernel)?;
    Ok(MorphModel {
        model,
        t_max: (placement.b[0] - placement.a[0]).abs(),
        source_dims: a.dim,
        placement: vec![placement.a.to_vec(), placement.b.to_vec(), placement.c.to_vec()],
    })
}

/// The shape function `g(x) = f(x, s, t)` of a `d + 2` dimensional model.
pub fn influence_slice<T: Real>(model: &RbfModel<T>, s: T, t: T) -> Result<Restriction<'_, T>> {
    if model.dim() < 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: model.dim(),
        });
    }
    Ok(Restriction::new(model, vec![s, t]))
}

/// `n` points evenly spaced by arc length along the polyline `path` in the
/// `(s, t)` plane.
pub fn path_points<T: Real>(path: &[[T; 2]], n: usize) -> Result<Vec<[T; 2]>> {
    if path.len() < 2 || n < 2 {
        return Err(Error::InvalidParameter(
            "a path needs at least two waypoints and two frames".into(),
        ));
    }
    let lens: Vec<T> = path
        .windows(2)
        .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
        .collect();
    let total: T = lens.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(Error::InvalidParameter("path has zero length".into()));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let target = total * T::from_usize_lossy(i) / T::from_usize_lossy(n - 1);
        let mut walked = T::zero();
        let mut seg = 0;
        while seg + 1 < lens.len() && walked + lens[seg] < target {
            walked = walked + lens[seg];
            seg += 1;
        }
        let u = if lens[seg] > T::zero() {
            ((target - walked) / lens[seg]).min(T::one()).max(T::zero())
        } else {
            T::zero()
        };
        let (p, q) = (path[seg], path[seg + 1]);
        out.push([p[0] + u * (q[0] - p[0]), p[1] + u * (q[1] - p[1])]);
    }
    Ok(out)
}

/// Frames along a path through the `(s, t)` plane of an influence model.
pub fn influence_sequence<T: Real>(
    morph: &MorphModel<T>,
    path: &[[T; 2]],
    n_frames: usize,
    grid: &GridSpec<T>,
) -> Result<Vec<Frame<T>>> {
    path_points(path, n_frames)?
        .into_par_iter()
        .map(|[s, t]| {
            let f = influence_slice(&morph.model, s, t)?;
            Ok(Frame {
                coords: vec![s, t],
                geometry: extract_zero_set(&f, grid)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Constraint;

    fn tiny_set(offset: f64) -> ConstraintSet<f64> {
        crate::synth::ellipse_constraints([offset, 0.0], [1.0, 1.0], 8, 0.0, 0.1)
    }

    #[test]
    fn embedding_rule() {
        let a = ConstraintSet::from_pairs(
            2,
            vec![(Constraint::at(&[1.0, 2.0], 0.0), Constraint::at(&[1.0, 1.5], 1.0))],
        );
        let e = embed_pair(&a, &a, 2.5).unwrap();
        assert_eq!(e.dim, 3);
        assert_eq!(e.boundary[0].position.coords(), &[1.0, 2.0, 0.0]);
        assert_eq!(e.boundary[0].value, 0.0);
        assert_eq!(e.normal[1].position.coords(), &[1.0, 1.5, 2.5]);
        assert_eq!(e.normal[1].value, 1.0);
        assert_eq!(e.pairing, vec![Some(0), Some(1)]);
        assert!(embed_pair(&a, &a, 0.0).is_err());
        let three = ConstraintSet::<f64>::empty(3);
        assert!(matches!(
            embed_pair(&a, &three, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn empty_shape_rejected() {
        let a = tiny_set(0.0);
        let empty = ConstraintSet::empty(2);
        assert!(build_morph(&a, &empty, 1.0, KernelKind::Cubic).is_err());
    }

    #[test]
    fn endpoint_slices_interpolate() {
        let a = tiny_set(0.0);
        let b = tiny_set(0.5);
        let m = build_morph(&a, &b, 1.0, KernelKind::Cubic).unwrap();
        let g0 = slice(&m, 0.0);
        let g1 = slice(&m, 1.0);
        for c in &a.boundary {
            assert!(g0.value(c.position.coords()).abs() < 1e-5);
        }
        for c in &a.normal {
            assert!((g0.value(c.position.coords()) - 1.0).abs() < 1e-5);
        }
        for c in &b.boundary {
            assert!(g1.value(c.position.coords()).abs() < 1e-5);
        }
    }

    #[test]
    fn baseline_blend_endpoints() {
        let a = SdfGrid {
            width: 2,
            height: 1,
            values: vec![1.0, -2.0],
        };
        let b = SdfGrid {
            width: 2,
            height: 1,
            values: vec![3.0, 0.5],
        };
        assert_eq!(sdf_morph_baseline(&a, &b, 0.0).unwrap(), a);
        assert_eq!(sdf_morph_baseline(&a, &b, 1.0).unwrap(), b);
        assert_eq!(sdf_morph_baseline(&a, &a, 0.5).unwrap(), a);
        let c = SdfGrid {
            width: 1,
            height: 2,
            values: vec![0.0, 0.0],
        };
        assert!(matches!(
            sdf_morph_baseline(&a, &c, 0.5),
            Err(Error::SizeMismatch(_))
        ));
    }

    #[test]
    fn influence_embedding() {
        let a = tiny_set(0.0);
        let e = embed_influence(&a, &a, &a, &InfluencePlacement::default()).unwrap();
        assert_eq!(e.dim, 4);
        assert_eq!(&e.boundary[0].position.coords()[2..], &[0.0, 0.0]);
        assert_eq!(&e.boundary[8].position.coords()[2..], &[1.0, 0.0]);
        assert_eq!(&e.boundary[16].position.coords()[2..], &[0.5, 0.5]);
        let collinear = InfluencePlacement {
            a: [0.0, 0.0],
            b: [1.0, 0.0],
            c: [2.0, 0.0],
        };
        assert!(matches!(
            embed_influence(&a, &a, &a, &collinear),
            Err(Error::DegeneratePlacement(_))
        ));
    }

    #[test]
    fn path_sampling() {
        let pts = path_points::<f64>(&[[0.0, 0.0], [0.5, 0.5], [1.0, 0.0]], 5).unwrap();
        assert_eq!(pts[0], [0.0, 0.0]);
        assert!((pts[2][0] - 0.5).abs() < 1e-12 && (pts[2][1] - 0.5).abs() < 1e-12);
        assert_eq!(pts[4], [1.0, 0.0]);
        assert_eq!(frame_times(1.0, 2), vec![0.0, 1.0]);
    }
}
