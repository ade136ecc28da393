//! Finite-dimensional weighted Hilbert spaces.
//!
//! Every space in the laboratory is `R^dim` with a diagonal (lumped) inner
//! product `(u, v) = sum_i w_i u_i v_i`. Graph spaces carry the cell volume
//! `eps^n`, interval spaces the lumped P1 mass, boundary-layer spaces the
//! mass of `b_eps`, and dynamic boundary spaces append `tau`-weighted
//! boundary coordinates via [`WeightedSpace::direct_sum`].

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::numerics::{weighted_dot, weighted_norm};

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSpace {
    weights: Vec<f64>,
    label: String,
}

impl WeightedSpace {
    pub fn new(label: impl Into<String>, weights: Vec<f64>) -> Result<Self> {
        let label = label.into();
        if weights.is_empty() {
            return Err(invalid(format!("space `{label}` must have dim >= 1")));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(invalid(format!(
                "space `{label}`: weight {i} is {w}, weights must be positive"
            )));
        }
        Ok(Self { weights, label })
    }

    /// Space with every weight equal to `weight`.
    pub fn uniform(label: impl Into<String>, dim: usize, weight: f64) -> Result<Self> {
        Self::new(label, vec![weight; dim])
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `A ⊕ B`: concatenated weights, inner product is the sum of the block products.
    pub fn direct_sum(a: &WeightedSpace, b: &WeightedSpace) -> WeightedSpace {
        let mut weights = a.weights.clone();
        weights.extend_from_slice(&b.weights);
        WeightedSpace {
            weights,
            label: format!("{}+{}", a.label, b.label),
        }
    }

    /// Sum of all weights (the measure of the underlying domain).
    pub fn total_mass(&self) -> f64 {
        crate::numerics::compensated_sum(self.weights.iter().copied())
    }

    pub fn zeros(self: &Arc<Self>) -> StateVector {
        StateVector {
            values: vec![0.0; self.dim()],
            space: Arc::clone(self),
        }
    }

    pub fn constant(self: &Arc<Self>, c: f64) -> StateVector {
        StateVector {
            values: vec![c; self.dim()],
            space: Arc::clone(self),
        }
    }

    pub fn vector(self: &Arc<Self>, values: Vec<f64>) -> Result<StateVector> {
        StateVector::new(Arc::clone(self), values)
    }

    pub(crate) fn same_as(&self, other: &WeightedSpace) -> bool {
        self.label == other.label && self.dim() == other.dim()
    }
}

impl fmt::Display for WeightedSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (dim {})", self.label, self.dim())
    }
}

/// A point of a [`WeightedSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    values: Vec<f64>,
    space: Arc<WeightedSpace>,
}

impl StateVector {
    pub fn new(space: Arc<WeightedSpace>, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("state entry {i} is not finite")));
        }
        Ok(Self { values, space })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn space(&self) -> &Arc<WeightedSpace> {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub(crate) fn check_same_space(&self, other: &StateVector) -> Result<()> {
        check_space(&self.space, &other.space)
    }

    pub fn inner(&self, other: &StateVector) -> Result<f64> {
        inner(self, other)
    }

    pub fn norm(&self) -> f64 {
        weighted_norm(self.space.weights(), &self.values)
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &StateVector, b: f64) -> Result<StateVector> {
        self.check_same_space(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(StateVector {
            values,
            space: Arc::clone(&self.space),
        })
    }

    pub fn sub(&self, other: &StateVector) -> Result<StateVector> {
        self.combine(1.0, other, -1.0)
    }

    pub fn scale(&self, a: f64) -> StateVector {
        StateVector {
            values: self.values.iter().map(|x| a * x).collect(),
            space: Arc::clone(&self.space),
        }
    }

    /// Distance `‖self - other‖` in the common space.
    pub fn distance(&self, other: &StateVector) -> Result<f64> {
        Ok(self.sub(other)?.norm())
    }

    /// Weighted mean `(u, 1) / (1, 1)`.
    pub fn weighted_mean(&self) -> f64 {
        let w = self.space.weights();
        let ones = vec![1.0; w.len()];
        weighted_dot(w, &self.values, &ones) / self.space.total_mass()
    }
}

pub(crate) fn check_space(a: &WeightedSpace, b: &WeightedSpace) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(Error::SpaceMismatch {
            expected: a.to_string(),
            found: b.to_string(),
        })
    }
}

/// `sum_i w_i u_i v_i`, accumulated with compensated summation.
pub fn inner(u: &StateVector, v: &StateVector) -> Result<f64> {
    u.check_same_space(v)?;
    Ok(weighted_dot(u.space.weights(), &u.values, &v.values))
}

pub fn norm(u: &StateVector) -> f64 {
    u.norm()
}
