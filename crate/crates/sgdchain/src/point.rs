//! Parameter vectors in `R^d`.

use std::ops::{Deref, Index};

use crate::error::CoreError;
use crate::scalar::Scalar;

/// A point `θ ∈ R^d`. Coordinates are guaranteed finite at construction;
/// the SGD driver re-checks after every accepted step.
#[derive(Clone, Debug, PartialEq)]
pub struct Point<T> {
    coords: Vec<T>,
}

impl<T: Scalar> Point<T> {
    pub fn new(coords: Vec<T>) -> Result<Self, CoreError> {
        if coords.is_empty() {
            return Err(CoreError::EmptyPoint);
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(CoreError::NonFiniteCoordinate { index: i });
        }
        Ok(Self { coords })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            coords: vec![T::zero(); dim],
        }
    }

    /// Constant vector `(v, ..., v)` of the given dimension.
    pub fn filled(dim: usize, v: T) -> Result<Self, CoreError> {
        Self::new(vec![v; dim])
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.coords
    }

    pub fn into_vec(self) -> Vec<T> {
        self.coords
    }

    pub fn norm_sq(&self) -> T {
        self.coords.iter().map(|&c| c * c).sum()
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.coords.iter().map(|c| c.as_f64()).collect()
    }
}

/// Euclidean norm of a raw coordinate slice.
pub fn slice_norm<T: Scalar>(x: &[T]) -> T {
    slice_norm_sq(x).sqrt()
}

/// Squared Euclidean norm of a raw coordinate slice.
pub fn slice_norm_sq<T: Scalar>(x: &[T]) -> T {
    x.iter().map(|&c| c * c).sum()
}

/// `Σ a_i b_i` over two equal-length slices.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

impl<T> Deref for Point<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.coords
    }
}

impl<T> Index<usize> for Point<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.coords[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(Point::new(vec![1.0, f64::NAN]).is_err());
        assert!(Point::new(vec![f64::INFINITY]).is_err());
        assert!(Point::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn norm_matches_hand_value() {
        let p = Point::new(vec![3.0f64, 4.0]).unwrap();
        assert_eq!(p.norm(), 5.0);
        let q = Point::new(vec![3.0f32, 4.0]).unwrap();
        assert_eq!(q.norm(), 5.0f32);
    }
}
