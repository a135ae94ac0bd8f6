//! The change of variables `phi_i = arcsin(sqrt(lambda_i))` between the
//! ordered simplex of eigenvalues and the alcove, and the complement map.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::AlcovePoint;

/// Eigenvalue configuration `1 >= lambda_1 >= ... >= lambda_m >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPoint {
    lambda: Vec<f64>,
}

impl LambdaPoint {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::InvalidParameter("empty eigenvalue vector".into()));
        }
        let ok = lambda.iter().all(|x| x.is_finite() && (0.0..=1.0).contains(x))
            && lambda.windows(2).all(|w| w[0] >= w[1]);
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "{lambda:?} is not a decreasing vector in [0, 1]"
            )));
        }
        Ok(Self { lambda })
    }

    /// Sorts into decreasing order before validating.
    pub fn from_unsorted(mut lambda: Vec<f64>) -> Result<Self> {
        lambda.sort_by(|a, b| b.total_cmp(a));
        Self::new(lambda)
    }

    pub(crate) fn from_vec_unchecked(lambda: Vec<f64>) -> Self {
        Self { lambda }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.lambda
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }
}

pub fn lambda_to_phi(x: &LambdaPoint) -> AlcovePoint {
    AlcovePoint::from_vec_unchecked(x.as_slice().iter().map(|&l| l.sqrt().asin()).collect())
}

pub fn phi_to_lambda(phi: &AlcovePoint) -> LambdaPoint {
    LambdaPoint::from_vec_unchecked(
        phi.as_slice()
            .iter()
            .map(|&f| {
                let s = f.sin();
                (s * s).min(1.0)
            })
            .collect(),
    )
}

/// `(pi/2 - phi_m, ..., pi/2 - phi_1)`.
pub fn complement(phi: &AlcovePoint) -> AlcovePoint {
    AlcovePoint::from_vec_unchecked(complement_slice(phi.as_slice()))
}

pub(crate) fn complement_slice(phi: &[f64]) -> Vec<f64> {
    phi.iter().rev().map(|&f| FRAC_PI_2 - f).collect()
}
