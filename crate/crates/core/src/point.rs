use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FinslerError, Result};

/// A base point `z` together with a nonzero fiber vector `v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub z: Vec<Complex64>,
    pub v: Vec<Complex64>,
}

impl Point {
    pub fn new(z: Vec<Complex64>, v: Vec<Complex64>) -> Result<Point> {
        if z.len() != v.len() || z.is_empty() {
            return Err(FinslerError::DimensionMismatch(format!(
                "z has {} coordinates, v has {}",
                z.len(),
                v.len()
            )));
        }
        if v.iter().all(|c| c.norm() == 0.0) {
            return Err(FinslerError::ZeroVector("fiber vector v = 0".into()));
        }
        Ok(Point { z, v })
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    /// Values of the polarized variables `(z, zbar, v, vbar)` at this point.
    pub fn polarized(&self) -> Polarized {
        Polarized {
            z: self.z.clone(),
            zbar: self.z.iter().map(|c| c.conj()).collect(),
            v: self.v.clone(),
            vbar: self.v.iter().map(|c| c.conj()).collect(),
        }
    }

    /// `[Re z^1, Im z^1, ..., Re v^n, Im v^n]`, length `4n`.
    pub fn real_coords(&self) -> Vec<f64> {
        self.z
            .iter()
            .chain(&self.v)
            .flat_map(|c| [c.re, c.im])
            .collect()
    }

    pub fn from_real_coords(x: &[f64]) -> Point {
        let n = x.len() / 4;
        let c = |k: usize| Complex64::new(x[2 * k], x[2 * k + 1]);
        Point {
            z: (0..n).map(c).collect(),
            v: (n..2 * n).map(c).collect(),
        }
    }

    /// Same base point with fiber vector `lambda * v`.
    pub fn scale_fiber(&self, lambda: Complex64) -> Point {
        Point {
            z: self.z.clone(),
            v: self.v.iter().map(|&c| c * lambda).collect(),
        }
    }

    pub fn fiber_norm(&self) -> f64 {
        self.v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Independent values of the four variable families. At a consistent point
/// `zbar = conj(z)` and `vbar = conj(v)`, but evaluation does not require it.
#[derive(Clone, Debug, PartialEq)]
pub struct Polarized {
    pub z: Vec<Complex64>,
    pub zbar: Vec<Complex64>,
    pub v: Vec<Complex64>,
    pub vbar: Vec<Complex64>,
}

impl Polarized {
    pub fn n(&self) -> usize {
        self.z.len()
    }
}
