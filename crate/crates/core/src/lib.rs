//! Variational implicit functions.
//!
//! Scattered constraints in 2 to 5 dimensions are interpolated by the
//! function of least bending energy, a weighted sum of radial basis
//! functions plus a degree-one polynomial. On top of that solver the crate
//! builds implicit curves and surfaces from images and oriented points,
//! transformations between shapes obtained by lifting them one or two
//! dimensions higher, surface reconstruction from planar contours, and
//! half-way warps that pre-align shapes before a transformation.
//!
//! All numeric types are generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod constraints;
pub mod energy;
pub mod error;
pub mod extract;
pub mod geometry;
pub mod implicit;
pub mod io;
pub mod kernel;
pub mod linalg;
mod mc_tables;
pub mod metrics;
pub mod model;
pub mod morph;
pub mod scalar;
pub mod slices;
pub mod synth;
pub mod warp;

pub use constraints::{
    image_gradient, image_to_constraints, points_normals_to_constraints, signed_distance_field,
    ConstraintSet, GrayImage, PointNormalCloud, SdfGrid,
};
pub use energy::thin_plate_energy;
pub use error::{Error, Result};
pub use extract::{marching_cubes, marching_squares, sample_grid, Polyline2D, SampledGrid, TriMesh};
pub use geometry::{Aabb, Constraint, Point};
pub use implicit::ImplicitFn;
pub use kernel::{kernel_eval, KernelKind};
pub use model::{assemble_system, solve_model, solve_model_with, LinearSystem, RbfModel, SolveOptions};
pub use morph::{
    build_influence, build_morph, embed_influence, embed_pair, influence_slice, morph_sequence,
    sdf_morph_baseline, slice, InfluencePlacement, MorphModel,
};
pub use scalar::Real;
pub use slices::{place_oriented, reconstruct, stack_parallel, OrientedSlice, SliceFrame};
pub use warp::{apply_warp, build_halfway_warps, unwarp, warped_morph, CorrespondenceSet, DisplacementWarp};

/// Double-precision interpolant.
pub type Model = RbfModel<f64>;
/// Single-precision interpolant.
pub type Model32 = RbfModel<f32>;
pub type Constraint64 = Constraint<f64>;
pub type Point64 = Point<f64>;
pub type ConstraintSet64 = ConstraintSet<f64>;
pub type MorphModel64 = MorphModel<f64>;
pub type Polyline = Polyline2D<f64>;
pub type Mesh = TriMesh<f64>;
pub type Grid = SampledGrid<f64>;
