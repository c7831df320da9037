//! Values with a one-sigma uncertainty and first-order error propagation.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub error: f64,
}

impl Measured {
    pub const fn new(value: f64, error: f64) -> Self {
        Measured { value, error }
    }

    pub const fn exact(value: f64) -> Self {
        Measured { value, error: 0.0 }
    }

    /// Poisson counting estimate. Zero counts carry an error of one count.
    pub fn counts(n: u64) -> Self {
        Measured {
            value: n as f64,
            error: (n.max(1) as f64).sqrt(),
        }
    }

    pub fn relative_error(&self) -> f64 {
        if self.value == 0.0 {
            f64::INFINITY
        } else {
            (self.error / self.value).abs()
        }
    }

    /// Number of combined standard deviations separating `self` from `other`.
    pub fn sigma_distance(&self, other: &Measured) -> f64 {
        let s = self.error.hypot(other.error);
        if s == 0.0 {
            if self.value == other.value {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.value - other.value).abs() / s
        }
    }

    /// Ratio of two independent quantities.
    pub fn ratio(num: Measured, den: Measured) -> Measured {
        let r = num.value / den.value;
        let err = if num.value == 0.0 {
            (num.error / den.value).abs()
        } else {
            r.abs() * num.relative_error().hypot(den.relative_error())
        };
        Measured::new(r, err)
    }
}

impl fmt::Display for Measured {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.value, self.error)
    }
}
