//! Dense complex tensors with variance labels.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FinslerError, Result};
use crate::point::Point;

/// Index position and type: holomorphic or antiholomorphic, lower or upper.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexSlot {
    Lower,
    LowerBar,
    Upper,
    UpperBar,
}

/// A tensor at a point of the slit tangent bundle, every index of range `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    labels: Vec<IndexSlot>,
    n: usize,
    data: Vec<Complex64>,
    point: Arc<Point>,
}

/// Wire format: row-major real and imaginary parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorJson {
    pub labels: Vec<IndexSlot>,
    pub dims: Vec<usize>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl Tensor {
    pub fn new(labels: Vec<IndexSlot>, n: usize, data: Vec<Complex64>, point: Arc<Point>) -> Result<Self> {
        let len = n.pow(labels.len() as u32);
        if data.len() != len || point.n() != n {
            return Err(FinslerError::DimensionMismatch(format!(
                "rank {} tensor over n = {n} needs {len} entries, got {} (point n = {})",
                labels.len(),
                data.len(),
                point.n()
            )));
        }
        Ok(Tensor {
            labels,
            n,
            data,
            point,
        })
    }

    /// Builds a tensor by evaluating `f` on every multi-index in row-major order.
    pub fn from_fn(
        labels: Vec<IndexSlot>,
        point: Arc<Point>,
        mut f: impl FnMut(&[usize]) -> Complex64,
    ) -> Self {
        let n = point.n();
        let rank = labels.len();
        let len = n.pow(rank as u32);
        let mut idx = vec![0usize; rank];
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f(&idx));
            for k in (0..rank).rev() {
                idx[k] += 1;
                if idx[k] < n {
                    break;
                }
                idx[k] = 0;
            }
        }
        Tensor {
            labels,
            n,
            data,
            point,
        }
    }

    pub fn labels(&self) -> &[IndexSlot] {
        &self.labels
    }

    pub fn rank(&self) -> usize {
        self.labels.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn point(&self) -> &Arc<Point> {
        &self.point
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn get(&self, idx: &[usize]) -> Complex64 {
        self.data[self.offset(idx)]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `1 + max |entry|`, the reference magnitude for relative tolerances.
    pub fn scale(&self) -> f64 {
        1.0 + self.max_abs()
    }

    fn check_compatible(&self, other: &Tensor) -> Result<()> {
        if self.point != other.point && *self.point != *other.point {
            return Err(FinslerError::DimensionMismatch(
                "tensors live at different points".into(),
            ));
        }
        if self.labels != other.labels || self.n != other.n {
            return Err(FinslerError::DimensionMismatch(format!(
                "index pictures differ: {:?} vs {:?}",
                self.labels, other.labels
            )));
        }
        Ok(())
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.check_compatible(other)?;
        Ok(Tensor {
            labels: self.labels.clone(),
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
            point: self.point.clone(),
        })
    }

    /// `max |self - other|` over all entries.
    pub fn max_diff(&self, other: &Tensor) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }

    pub fn to_json(&self) -> TensorJson {
        TensorJson {
            labels: self.labels.clone(),
            dims: vec![self.n; self.rank()],
            re: self.data.iter().map(|c| c.re).collect(),
            im: self.data.iter().map(|c| c.im).collect(),
        }
    }
}
