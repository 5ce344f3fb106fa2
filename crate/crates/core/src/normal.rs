//! Normal distribution CDF used for every tail probability in the solver.
//!
//! Ruin probabilities early in retirement are deep left-tail masses, so the
//! CDF is evaluated through `erfc` on the tail side instead of `1 - erf`,
//! which keeps relative accuracy down to the subnormal range.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};

/// Standard normal CDF, `P(Z <= z)`.
#[inline]
pub fn std_normal_cdf(z: f64) -> f64 {
    if z < 0.0 {
        0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
    } else {
        1.0 - 0.5 * libm::erfc(z * FRAC_1_SQRT_2)
    }
}

/// Standard normal density.
#[inline]
pub fn std_normal_pdf(z: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Mean and standard deviation of a normal law.
///
/// A zero standard deviation is allowed and denotes a point mass; its CDF is
/// the right-continuous step at `mean`, so `cdf(mean) == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalParams {
    pub mean: f64,
    pub std: f64,
}

impl NormalParams {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        if !mean.is_finite() || !std.is_finite() || std < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "normal law needs finite mean and std >= 0, got N({mean}, {std})"
            )));
        }
        Ok(Self { mean, std })
    }

    #[inline]
    pub fn cdf(&self, x: f64) -> f64 {
        if self.std == 0.0 {
            if x < self.mean {
                0.0
            } else {
                1.0
            }
        } else {
            std_normal_cdf((x - self.mean) / self.std)
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        std_normal_pdf((x - self.mean) / self.std) / self.std
    }
}
