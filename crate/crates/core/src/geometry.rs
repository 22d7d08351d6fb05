//! Points, constraints and axis-aligned boxes.

use std::ops::Index;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Smallest supported interpolation dimension.
pub const MIN_DIM: usize = 2;
/// Largest supported interpolation dimension.
pub const MAX_DIM: usize = 5;

/// A position in R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct Point<T> {
    coords: Vec<T>,
}

impl<T: Real> Point<T> {
    pub fn new(coords: Vec<T>) -> Result<Self> {
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("coordinate {i} of point")));
        }
        Ok(Point { coords })
    }

    /// Builds a point from `f64` coordinates; panics on non-finite input.
    pub fn from_f64(coords: &[f64]) -> Self {
        Point::new(coords.iter().map(|&c| T::lit(c)).collect()).expect("finite coordinates")
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<T> {
        self.coords
    }

    /// Appends extra trailing coordinates, used when lifting to a higher dimension.
    pub fn lifted(&self, extra: &[T]) -> Self {
        let mut coords = self.coords.clone();
        coords.extend_from_slice(extra);
        Point { coords }
    }

    pub fn translated(&self, v: &[T]) -> Self {
        Point {
            coords: self.coords.iter().zip(v).map(|(&a, &b)| a + b).collect(),
        }
    }
}

impl<T> Index<usize> for Point<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.coords[i]
    }
}

/// A position paired with the value the interpolant must take there.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T> {
    pub position: Point<T>,
    pub value: T,
}

impl<T: Real> Constraint<T> {
    pub fn new(position: Point<T>, value: T) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFinite("constraint value".into()));
        }
        Ok(Constraint { position, value })
    }

    /// Convenience for tests and fixtures.
    pub fn at(coords: &[f64], value: f64) -> Self {
        Constraint {
            position: Point::from_f64(coords),
            value: T::lit(value),
        }
    }

    pub fn dim(&self) -> usize {
        self.position.dim()
    }
}

/// Axis-aligned box in R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct Aabb<T> {
    pub min: Vec<T>,
    pub max: Vec<T>,
}

impl<T: Real> Aabb<T> {
    pub fn new(min: Vec<T>, max: Vec<T>) -> Result<Self> {
        if min.len() != max.len() {
            return Err(Error::DimensionMismatch {
                expected: min.len(),
                found: max.len(),
            });
        }
        if min.iter().zip(&max).any(|(a, b)| !(a <= b)) {
            return Err(Error::InvalidParameter("box min exceeds max".into()));
        }
        Ok(Aabb { min, max })
    }

    pub fn from_f64(min: &[f64], max: &[f64]) -> Self {
        Aabb::new(
            min.iter().map(|&v| T::lit(v)).collect(),
            max.iter().map(|&v| T::lit(v)).collect(),
        )
        .expect("valid box")
    }

    /// Tight bounds of a non-empty point set.
    pub fn around<'a, I>(points: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a [T]>,
    {
        let mut iter = points.into_iter();
        let first = iter.next()?;
        let mut min = first.to_vec();
        let mut max = first.to_vec();
        for p in iter {
            for (i, &c) in p.iter().enumerate() {
                min[i] = min[i].min(c);
                max[i] = max[i].max(c);
            }
        }
        Some(Aabb { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn extent(&self, axis: usize) -> T {
        self.max[axis] - self.min[axis]
    }

    pub fn diagonal(&self) -> T {
        (0..self.dim())
            .map(|a| self.extent(a) * self.extent(a))
            .sum::<T>()
            .sqrt()
    }

    pub fn center(&self) -> Vec<T> {
        self.min
            .iter()
            .zip(&self.max)
            .map(|(&a, &b)| (a + b) * T::lit(0.5))
            .collect()
    }

    /// Grows every side by `pad`.
    pub fn padded(&self, pad: T) -> Self {
        Aabb {
            min: self.min.iter().map(|&v| v - pad).collect(),
            max: self.max.iter().map(|&v| v + pad).collect(),
        }
    }

    pub fn contains(&self, p: &[T]) -> bool {
        p.iter()
            .zip(self.min.iter().zip(&self.max))
            .all(|(&c, (&lo, &hi))| c >= lo && c <= hi)
    }
}

/// Checks that every constraint shares one dimension and returns it.
pub fn common_dim<T: Real>(constraints: &[Constraint<T>]) -> Result<usize> {
    let dim = constraints
        .first()
        .map(Constraint::dim)
        .ok_or(Error::InsufficientConstraints {
            needed: 1,
            found: 0,
        })?;
    for c in constraints {
        if c.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: c.dim(),
            });
        }
    }
    Ok(dim)
}
