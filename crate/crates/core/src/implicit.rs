//! Scalar fields that extraction can sample.

use crate::model::RbfModel;
use crate::scalar::Real;

/// A scalar function over R^d. Implementations must be pure: the same
/// input always yields the same output.
pub trait ImplicitFn<T: Real>: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[T]) -> T;
}

impl<T: Real> ImplicitFn<T> for RbfModel<T> {
    fn dim(&self) -> usize {
        RbfModel::dim(self)
    }

    fn value(&self, x: &[T]) -> T {
        RbfModel::value(self, x)
    }
}

impl<T: Real, F: ImplicitFn<T> + ?Sized> ImplicitFn<T> for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn value(&self, x: &[T]) -> T {
        (**self).value(x)
    }
}

/// Wraps a closure as an implicit function of fixed dimension.
#[derive(Clone)]
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnField { dim, f }
    }
}

impl<T: Real, F: Fn(&[T]) -> T + Sync> ImplicitFn<T> for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[T]) -> T {
        (self.f)(x)
    }
}

/// `g(x) = f(x, fixed...)`: the restriction of a model to the affine
/// subspace where its trailing coordinates are held constant.
#[derive(Debug, Clone)]
pub struct Restriction<'a, T> {
    model: &'a RbfModel<T>,
    fixed: Vec<T>,
}

impl<'a, T: Real> Restriction<'a, T> {
    pub fn new(model: &'a RbfModel<T>, fixed: Vec<T>) -> Self {
        assert!(fixed.len() < model.dim(), "restriction must leave free coordinates");
        Restriction { model, fixed }
    }

    pub fn fixed(&self) -> &[T] {
        &self.fixed
    }

    pub fn model(&self) -> &RbfModel<T> {
        self.model
    }

    /// Gradient with respect to the free coordinates.
    pub fn gradient(&self, x: &[T]) -> Vec<T> {
        let full = self.lift(x);
        let mut g = self.model.gradient_unchecked(&full);
        g.truncate(self.dim());
        g
    }

    fn lift(&self, x: &[T]) -> Vec<T> {
        let mut full = Vec::with_capacity(self.model.dim());
        full.extend_from_slice(x);
        full.extend_from_slice(&self.fixed);
        full
    }
}

impl<T: Real> ImplicitFn<T> for Restriction<'_, T> {
    fn dim(&self) -> usize {
        self.model.dim() - self.fixed.len()
    }

    fn value(&self, x: &[T]) -> T {
        debug_assert_eq!(x.len(), self.dim());
        // Stack buffer: dimensions never exceed MAX_DIM.
        let mut full = [T::zero(); crate::geometry::MAX_DIM];
        let d = x.len();
        full[..d].copy_from_slice(x);
        full[d..d + self.fixed.len()].copy_from_slice(&self.fixed);
        self.model.value(&full[..self.model.dim()])
    }
}
