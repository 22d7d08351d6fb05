//! Assembly and solution of the variational interpolation system.
//!
//! The interpolant is
//!
//! ```text
//! f(x) = Σ_j d_j φ(|x - c_j|) + p_0 + Σ_α p_α x_α
//! ```
//!
//! with the side conditions `Σ_j d_j = 0` and `Σ_j d_j c_j^α = 0`, which
//! together with `f(c_i) = h_i` give a symmetric saddle-point system.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{common_dim, Constraint, Point, MAX_DIM, MIN_DIM};
use crate::kernel::KernelKind;
use crate::linalg::{symmetric_eigen, DenseMatrix, LuFactors};
use crate::scalar::{distance, Real};

/// Dense solver cap on the number of constraints.
pub const MAX_CONSTRAINTS: usize = 3000;

/// Centers closer than this are treated as coincident.
pub const DUPLICATE_TOLERANCE: f64 = 1e-12;

/// Relative spread below which a direction of the constraint cloud is
/// considered flat and dropped from the polynomial part.
const FLAT_DIRECTION_TOLERANCE: f64 = 1e-9;

/// The bordered interpolation matrix and its right-hand side.
#[derive(Debug, Clone)]
pub struct LinearSystem<T> {
    pub matrix: DenseMatrix<T>,
    pub rhs: Vec<T>,
    pub dim: usize,
    /// Number of constraints (size of the kernel block).
    pub k: usize,
}

/// Knobs for [`solve_model_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Rescale positions into a unit box centered at the origin before
    /// factoring.
    pub normalize: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { normalize: true }
    }
}

/// Per-solve diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    /// Smallest pivot magnitude seen by the factorization.
    pub min_pivot: f64,
    /// Number of independent directions spanned by the constraints.
    pub affine_rank: usize,
}

/// A solved interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfModel<T> {
    dim: usize,
    kernel: KernelKind,
    /// Flattened `k × dim` center coordinates.
    centers: Vec<T>,
    weights: Vec<T>,
    /// `p_0` followed by one coefficient per axis.
    poly: Vec<T>,
    report: Option<SolveReport>,
}

fn check_dim(dim: usize) -> Result<()> {
    if (MIN_DIM..=MAX_DIM).contains(&dim) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(dim))
    }
}

/// Finds a pair of centers closer than [`DUPLICATE_TOLERANCE`].
pub fn find_duplicate<T: Real>(constraints: &[Constraint<T>]) -> Option<(usize, usize)> {
    let tol = T::lit(DUPLICATE_TOLERANCE);
    let mut order: Vec<usize> = (0..constraints.len()).collect();
    let key = |i: usize| constraints[i].position[0];
    order.sort_by(|&a, &b| key(a).partial_cmp(&key(b)).unwrap().then(a.cmp(&b)));
    let mut found: Option<(usize, usize)> = None;
    for (n, &i) in order.iter().enumerate() {
        for &j in &order[n + 1..] {
            if key(j) - key(i) >= tol {
                break;
            }
            let d = distance(
                constraints[i].position.coords(),
                constraints[j].position.coords(),
            );
            if d < tol {
                let pair = (i.min(j), i.max(j));
                found = Some(found.map_or(pair, |f| f.min(pair)));
            }
        }
    }
    found
}

fn validate<T: Real>(constraints: &[Constraint<T>]) -> Result<usize> {
    if constraints.is_empty() {
        return Err(Error::InsufficientConstraints {
            needed: MIN_DIM + 1,
            found: 0,
        });
    }
    let dim = common_dim(constraints)?;
    check_dim(dim)?;
    if let Some((first, second)) = find_duplicate(constraints) {
        return Err(Error::DuplicateCenter { first, second });
    }
    if constraints.len() < dim + 1 {
        return Err(Error::InsufficientConstraints {
            needed: dim + 1,
            found: constraints.len(),
        });
    }
    if constraints.len() > MAX_CONSTRAINTS {
        return Err(Error::TooManyConstraints {
            found: constraints.len(),
            cap: MAX_CONSTRAINTS,
        });
    }
    Ok(dim)
}

/// Builds the bordered system with an explicit polynomial basis: each
/// entry of `basis` is a direction `u`, contributing the column `u · c_i`.
fn assemble_with_basis<T: Real>(
    positions: &[Vec<T>],
    values: &[T],
    basis: &[Vec<T>],
    kind: KernelKind,
) -> DenseMatrix<T> {
    let k = positions.len();
    let n = k + 1 + basis.len();
    let mut matrix = DenseMatrix::zeros(n);
    matrix
        .rows_mut()
        .enumerate()
        .collect::<Vec<_>>()
        .into_par_iter()
        .for_each(|(i, row)| {
            if i < k {
                for (j, cj) in positions.iter().enumerate() {
                    row[j] = if i == j {
                        kind.eval(T::zero())
                    } else {
                        kind.eval(distance(&positions[i], cj))
                    };
                }
                row[k] = T::one();
                for (l, u) in basis.iter().enumerate() {
                    row[k + 1 + l] = crate::scalar::dot(u, &positions[i]);
                }
            } else if i == k {
                row[..k].iter_mut().for_each(|v| *v = T::one());
            } else {
                let u = &basis[i - k - 1];
                for (j, cj) in positions.iter().enumerate() {
                    row[j] = crate::scalar::dot(u, cj);
                }
            }
        });
    debug_assert_eq!(values.len(), k);
    matrix
}

fn axis_basis<T: Real>(dim: usize) -> Vec<Vec<T>> {
    (0..dim)
        .map(|a| (0..dim).map(|b| if a == b { T::one() } else { T::zero() }).collect())
        .collect()
}

/// Assembles the system exactly as written: kernel block, a column of ones
/// and one column per coordinate axis, in the caller's coordinates.
pub fn assemble_system<T: Real>(
    constraints: &[Constraint<T>],
    kind: KernelKind,
) -> Result<LinearSystem<T>> {
    let dim = validate(constraints)?;
    let positions: Vec<Vec<T>> = constraints
        .iter()
        .map(|c| c.position.coords().to_vec())
        .collect();
    let values: Vec<T> = constraints.iter().map(|c| c.value).collect();
    let matrix = assemble_with_basis(&positions, &values, &axis_basis(dim), kind);
    let mut rhs = values;
    rhs.resize(constraints.len() + dim + 1, T::zero());
    Ok(LinearSystem {
        matrix,
        rhs,
        dim,
        k: constraints.len(),
    })
}

/// Solves with default options (normalization on).
pub fn solve_model<T: Real>(constraints: &[Constraint<T>], kind: KernelKind) -> Result<RbfModel<T>> {
    solve_model_with(constraints, kind, SolveOptions::default())
}

/// Solves the interpolation problem.
///
/// Positions are optionally mapped into a unit box centered at the origin.
/// When the constraints lie in a lower-dimensional affine subspace (for
/// example every constraint has `z = 0`), the polynomial part is restricted
/// to that subspace so the system stays nonsingular; the resulting
/// function is then symmetric about the subspace.
pub fn solve_model_with<T: Real>(
    constraints: &[Constraint<T>],
    kind: KernelKind,
    options: SolveOptions,
) -> Result<RbfModel<T>> {
    let dim = validate(constraints)?;
    let k = constraints.len();

    let raw: Vec<&[T]> = constraints.iter().map(|c| c.position.coords()).collect();
    let bounds = crate::geometry::Aabb::around(raw.iter().copied()).expect("non-empty");
    let (shift, scale) = if options.normalize {
        let extent = (0..dim).map(|a| bounds.extent(a)).fold(T::zero(), T::max);
        (bounds.center(), extent.recip())
    } else {
        (vec![T::zero(); dim], T::one())
    };
    let positions: Vec<Vec<T>> = raw
        .iter()
        .map(|p| p.iter().zip(&shift).map(|(&x, &m)| (x - m) * scale).collect())
        .collect();

    let basis = polynomial_basis(&positions, dim);
    let values: Vec<T> = constraints.iter().map(|c| c.value).collect();
    let matrix = assemble_with_basis(&positions, &values, &basis, kind);
    let mut rhs = values;
    rhs.resize(k + 1 + basis.len(), T::zero());

    let lu = LuFactors::factor(matrix)?;
    let solution = lu.solve(&rhs)?;
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("solution of the interpolation system".into()));
    }

    // Undo the normalization: φ(s r) = g(s) φ(r) (+ a quadratic for r² log r
    // that the side conditions reduce to an affine term).
    let scaled_weights = &solution[..k];
    let kernel_scale = match kind {
        KernelKind::ThinPlate => scale * scale,
        KernelKind::Linear => scale,
        KernelKind::Cubic => scale * scale * scale,
    };
    let weights: Vec<T> = scaled_weights.iter().map(|&w| w * kernel_scale).collect();

    let mut axis = vec![T::zero(); dim];
    for (l, u) in basis.iter().enumerate() {
        let q = solution[k + 1 + l];
        for a in 0..dim {
            axis[a] = axis[a] + scale * q * u[a];
        }
    }
    let mut constant = solution[k] - crate::scalar::dot(&axis, &shift);

    if kind == KernelKind::ThinPlate && scale != T::one() {
        // Σ d̃_j s² log s |x - c_j|² = s² log s (|x|² Σd̃ - 2 x·Σd̃ c + Σd̃ |c|²);
        // Σd̃ vanishes, the other two terms are kept.
        let factor = scale * scale * scale.ln();
        let mut moment = vec![T::zero(); dim];
        let mut second = T::zero();
        for (w, p) in scaled_weights.iter().zip(&raw) {
            for a in 0..dim {
                moment[a] = moment[a] + *w * p[a];
            }
            second = second + *w * crate::scalar::dot(p, p);
        }
        constant = constant + factor * second;
        for a in 0..dim {
            axis[a] = axis[a] - T::lit(2.0) * factor * moment[a];
        }
    }

    let mut poly = Vec::with_capacity(dim + 1);
    poly.push(constant);
    poly.extend(axis);

    Ok(RbfModel {
        dim,
        kernel: kind,
        centers: raw.iter().flat_map(|p| p.iter().copied()).collect(),
        weights,
        poly,
        report: Some(SolveReport {
            min_pivot: lu.min_pivot().as_f64(),
            affine_rank: basis.len(),
        }),
    })
}

/// Orthonormal directions spanned by the (normalized) positions. The
/// coordinate axes are used whenever the cloud is full-dimensional.
fn polynomial_basis<T: Real>(positions: &[Vec<T>], dim: usize) -> Vec<Vec<T>> {
    let k = T::from_usize_lossy(positions.len());
    let mean: Vec<T> = (0..dim)
        .map(|a| positions.iter().map(|p| p[a]).sum::<T>() / k)
        .collect();
    let mut cov = vec![vec![T::zero(); dim]; dim];
    for p in positions {
        for a in 0..dim {
            for b in 0..dim {
                cov[a][b] = cov[a][b] + (p[a] - mean[a]) * (p[b] - mean[b]);
            }
        }
    }
    for row in cov.iter_mut() {
        for v in row.iter_mut() {
            *v = *v / k;
        }
    }
    let (values, vectors) = symmetric_eigen(cov);
    let largest = values.iter().fold(T::zero(), |m, &v| m.max(v));
    let tol = T::lit(FLAT_DIRECTION_TOLERANCE);
    let flat = |v: T| v.max(T::zero()).sqrt() <= tol * largest.sqrt();
    if !values.iter().any(|&v| flat(v)) {
        return axis_basis(dim);
    }
    values
        .iter()
        .zip(vectors)
        .filter(|(&v, _)| !flat(v))
        .map(|(_, u)| u)
        .collect()
}

impl<T: Real> RbfModel<T> {
    /// Assembles a model from explicit parts (used by deserialization and
    /// by tests that construct competitors).
    pub fn from_parts(
        centers: Vec<Point<T>>,
        weights: Vec<T>,
        poly: Vec<T>,
        kernel: KernelKind,
    ) -> Result<Self> {
        let dim = centers.first().map(Point::dim).unwrap_or(poly.len().saturating_sub(1));
        check_dim(dim)?;
        if weights.len() != centers.len() {
            return Err(Error::SizeMismatch(format!(
                "{} weights for {} centers",
                weights.len(),
                centers.len()
            )));
        }
        if poly.len() != dim + 1 {
            return Err(Error::SizeMismatch(format!(
                "{} polynomial coefficients for dimension {dim}",
                poly.len()
            )));
        }
        let mut flat = Vec::with_capacity(centers.len() * dim);
        for c in &centers {
            if c.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: c.dim(),
                });
            }
            flat.extend_from_slice(c.coords());
        }
        Ok(RbfModel {
            dim,
            kernel,
            centers: flat,
            weights,
            poly,
            report: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kernel(&self) -> KernelKind {
        self.kernel
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn center(&self, i: usize) -> &[T] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    pub fn centers(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.centers.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `p_0, p_1, ..., p_dim`.
    pub fn poly(&self) -> &[T] {
        &self.poly
    }

    pub fn report(&self) -> Option<SolveReport> {
        self.report
    }

    /// Replaces one weight, keeping everything else.
    pub fn with_weight(mut self, i: usize, value: T) -> Self {
        self.weights[i] = value;
        self.report = None;
        self
    }

    /// `f(x)` without dimension checks; `x.len()` must equal `dim`.
    #[inline]
    pub fn value(&self, x: &[T]) -> T {
        debug_assert_eq!(x.len(), self.dim);
        let mut sum = T::zero();
        for (c, &w) in self.centers.chunks_exact(self.dim).zip(&self.weights) {
            sum = sum + w * self.kernel.eval(distance(x, c));
        }
        sum + self.poly_value(x)
    }

    #[inline]
    fn poly_value(&self, x: &[T]) -> T {
        self.poly[1..]
            .iter()
            .zip(x)
            .fold(self.poly[0], |acc, (&p, &c)| acc + p * c)
    }

    /// `∇f(x)` without dimension checks.
    pub fn gradient_unchecked(&self, x: &[T]) -> Vec<T> {
        let mut g: Vec<T> = self.poly[1..].to_vec();
        for (c, &w) in self.centers.chunks_exact(self.dim).zip(&self.weights) {
            let factor = w * self.kernel.gradient_factor(distance(x, c));
            if factor != T::zero() {
                for a in 0..self.dim {
                    g[a] = g[a] + factor * (x[a] - c[a]);
                }
            }
        }
        g
    }

    fn check_point(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Evaluates the interpolant at `x`.
    pub fn evaluate(&self, x: &Point<T>) -> Result<T> {
        self.check_point(x.coords())?;
        Ok(self.value(x.coords()))
    }

    /// Analytic gradient at `x`.
    pub fn evaluate_gradient(&self, x: &Point<T>) -> Result<Vec<T>> {
        self.check_point(x.coords())?;
        Ok(self.gradient_unchecked(x.coords()))
    }

    /// `max_i |f(c_i) - h_i|` over a constraint list.
    pub fn max_residual(&self, constraints: &[Constraint<T>]) -> T {
        constraints
            .iter()
            .map(|c| (self.value(c.position.coords()) - c.value).abs())
            .fold(T::zero(), T::max)
    }

    /// `|Σ d_j|` followed by `|Σ d_j c_j^α|` per axis.
    pub fn side_condition_residuals(&self) -> Vec<T> {
        let mut out = vec![self.weights.iter().copied().sum::<T>().abs()];
        for a in 0..self.dim {
            out.push(
                self.centers()
                    .zip(&self.weights)
                    .map(|(c, &w)| w * c[a])
                    .sum::<T>()
                    .abs(),
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(coords: &[f64], v: f64) -> Constraint<f64> {
        Constraint::at(coords, v)
    }

    #[test]
    fn duplicate_pair_rejected_before_count_check() {
        let cs = vec![c(&[0.5, 0.5], 0.0), c(&[0.5, 0.5], 0.0)];
        assert!(matches!(
            assemble_system(&cs, KernelKind::ThinPlate),
            Err(Error::DuplicateCenter { first: 0, second: 1 })
        ));
        assert!(matches!(
            solve_model(&cs, KernelKind::ThinPlate),
            Err(Error::DuplicateCenter { .. })
        ));
    }

    #[test]
    fn three_constraints_give_six_by_six() {
        let cs = vec![c(&[0.0, 0.0], 1.0), c(&[1.0, 0.0], 2.0), c(&[0.0, 1.0], 3.0)];
        let sys = assemble_system(&cs, KernelKind::ThinPlate).unwrap();
        assert_eq!(sys.matrix.size(), 6);
        for i in 3..6 {
            for j in 3..6 {
                assert_eq!(sys.matrix.get(i, j), 0.0);
            }
        }
        for i in 0..3 {
            assert_eq!(sys.matrix.get(i, i), 0.0);
            assert_eq!(sys.matrix.get(i, 3), 1.0);
            assert_eq!(sys.matrix.get(3, i), 1.0);
            assert_eq!(sys.matrix.get(i, 4), cs[i].position[0]);
            assert_eq!(sys.matrix.get(5, i), cs[i].position[1]);
        }
        assert_eq!(sys.matrix.asymmetry(), 0.0);
        assert_eq!(sys.rhs, vec![1.0, 2.0, 3.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn mixed_dimensions_and_small_sets_rejected() {
        let mixed = vec![c(&[0.0, 0.0], 0.0), c(&[1.0, 0.0, 0.0], 0.0), c(&[0.0, 1.0], 0.0)];
        assert!(matches!(
            assemble_system(&mixed, KernelKind::Cubic),
            Err(Error::DimensionMismatch { .. })
        ));
        let two = vec![c(&[0.0, 0.0], 0.0), c(&[1.0, 0.0], 0.0)];
        assert!(matches!(
            solve_model(&two, KernelKind::Cubic),
            Err(Error::InsufficientConstraints { needed: 3, found: 2 })
        ));
        let one_d = vec![c(&[0.0], 0.0), c(&[1.0], 0.0)];
        assert!(matches!(
            solve_model(&one_d, KernelKind::Cubic),
            Err(Error::UnsupportedDimension(1))
        ));
    }

    #[test]
    fn cap_enforced() {
        let cs: Vec<_> = (0..MAX_CONSTRAINTS + 1)
            .map(|i| c(&[i as f64, (i * i % 17) as f64], 0.0))
            .collect();
        assert!(matches!(
            solve_model(&cs, KernelKind::ThinPlate),
            Err(Error::TooManyConstraints { .. })
        ));
    }

    #[test]
    fn linear_data_reproduced_exactly() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let cs: Vec<_> = pts
            .iter()
            .map(|p| c(p, 2.0 * p[0] + 3.0 * p[1] + 1.0))
            .collect();
        let m = solve_model(&cs, KernelKind::ThinPlate).unwrap();
        for w in m.weights() {
            assert!(w.abs() < 1e-12);
        }
        for (got, want) in m.poly().iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        let x = Point::from_f64(&[10.0, 10.0]);
        assert!((m.evaluate(&x).unwrap() - 51.0).abs() < 1e-6);
        let g = m.evaluate_gradient(&Point::from_f64(&[0.3, -4.0])).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-6 && (g[1] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn zero_data_gives_zero_model() {
        let cs: Vec<_> = [[0.0, 0.0], [1.0, 0.2], [0.3, 1.0], [0.7, 0.6]]
            .iter()
            .map(|p| c(p, 0.0))
            .collect();
        let m = solve_model(&cs, KernelKind::ThinPlate).unwrap();
        for x in [[0.1, 0.1], [5.0, -2.0], [0.5, 0.5]] {
            assert_eq!(m.evaluate(&Point::from_f64(&x)).unwrap(), 0.0);
            assert!(m
                .evaluate_gradient(&Point::from_f64(&x))
                .unwrap()
                .iter()
                .all(|g| *g == 0.0));
        }
    }

    #[test]
    fn evaluation_dimension_checked() {
        let cs: Vec<_> = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
            .iter()
            .map(|p| c(p, 1.0))
            .collect();
        let m = solve_model(&cs, KernelKind::ThinPlate).unwrap();
        assert!(m.evaluate(&Point::from_f64(&[0.0, 0.0, 0.0])).is_err());
        assert!(m.evaluate_gradient(&Point::from_f64(&[0.0])).is_err());
    }

    #[test]
    fn flat_constraint_cloud_is_solvable() {
        // Every constraint on the plane z = 0.
        let mut cs = Vec::new();
        for i in 0..12 {
            let a = i as f64 * std::f64::consts::TAU / 12.0;
            cs.push(c(&[a.cos(), a.sin(), 0.0], 0.0));
            cs.push(c(&[0.9 * a.cos(), 0.9 * a.sin(), 0.0], 1.0));
        }
        let m = solve_model(&cs, KernelKind::Cubic).unwrap();
        assert_eq!(m.report().unwrap().affine_rank, 2);
        assert!(m.max_residual(&cs) < 1e-9);
        let up = m.value(&[0.2, 0.1, 0.3]);
        let down = m.value(&[0.2, 0.1, -0.3]);
        assert!((up - down).abs() < 1e-9);
    }

    #[test]
    fn collinear_points_reduce_polynomial() {
        let cs = vec![c(&[0.0, 0.0], 0.0), c(&[1.0, 1.0], 1.0), c(&[2.0, 2.0], 0.5)];
        let m = solve_model(&cs, KernelKind::ThinPlate).unwrap();
        assert_eq!(m.report().unwrap().affine_rank, 1);
        assert!(m.max_residual(&cs) < 1e-9);
    }

    #[test]
    fn f32_models_work() {
        let cs: Vec<Constraint<f32>> = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.4, 0.6]]
            .iter()
            .enumerate()
            .map(|(i, p)| Constraint::at(p, (i % 2) as f64))
            .collect();
        let m = solve_model(&cs, KernelKind::ThinPlate).unwrap();
        assert!(m.max_residual(&cs) < 1e-4);
    }
}
