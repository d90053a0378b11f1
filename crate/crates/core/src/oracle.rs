//! Finite-difference reference values for Wirtinger partials.
//!
//! Everything here works on the `4n` real coordinates of consistent points
//! only, so it never touches the polarized machinery it is meant to check.
//! Each Wirtinger factor is the central-difference combination
//! `d/dw = (d/dx - i d/dy) / 2`, `d/dwbar = (d/dx + i d/dy) / 2`, nested
//! once per derivative, followed by a single Richardson step
//! `(4 D(h/2) - D(h)) / 3`.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::error::{FinslerError, Result};
use crate::expr::MetricExpr;
use crate::jets::JetIndex;
use crate::point::Point;
use crate::series::Family;

/// Step sizes indexed by total derivative order.
///
/// The order-four step balances truncation on the Szabo and Randers
/// families against round-off on smooth metrics; `1e-2` leaves the former
/// just above `1e-4` relative error.
#[derive(Clone, Debug, PartialEq)]
pub struct FdSteps {
    pub by_order: Vec<f64>,
}

impl Default for FdSteps {
    fn default() -> Self {
        FdSteps {
            by_order: vec![0.0, 1e-3, 3e-3, 6e-3, 5e-3, 2e-2, 3e-2],
        }
    }
}

impl FdSteps {
    pub fn step(&self, order: usize) -> Result<f64> {
        let h = *self.by_order.get(order).ok_or_else(|| {
            FinslerError::InvalidParameter(format!("no finite-difference step for order {order}"))
        })?;
        if order > 0 && h < 1e-8 {
            return Err(FinslerError::StepUnderflow(format!(
                "step {h:.1e} for order {order}"
            )));
        }
        Ok(h)
    }
}

/// Minimum ratio of singular-locus clearance to finite-difference step.
pub const CLEARANCE_RATIO: f64 = 20.0;

type Op = (usize, bool);

type PointFn<'a> = dyn Fn(&Point) -> Result<Complex64> + Sync + 'a;

/// Memoizing finite-difference evaluator of one function at one point.
///
/// Function values are cached by integer offset (in units of half the
/// step) and inner derivatives by `(remaining operators, offset)`, so a full
/// table of partials shares most of its work.
pub struct FdOracle<'a> {
    f: Box<PointFn<'a>>,
    base: Vec<f64>,
    steps: FdSteps,
    values: HashMap<(u64, Vec<i8>), Complex64>,
    inner: HashMap<(u64, Vec<Op>, Vec<i8>), Complex64>,
}

impl<'a> FdOracle<'a> {
    pub fn new(f: impl Fn(&Point) -> Result<Complex64> + Sync + 'a, p: &Point) -> Self {
        FdOracle {
            f: Box::new(f),
            base: p.real_coords(),
            steps: FdSteps::default(),
            values: HashMap::new(),
            inner: HashMap::new(),
        }
    }

    /// Oracle for `G` itself. Steps shrink uniformly so the one used at
    /// `max_order` stays below `1/CLEARANCE_RATIO` of the distance to the
    /// singular locus, where derivatives blow up.
    pub fn for_metric(metric: &'a MetricExpr, p: &Point, max_order: usize) -> Result<Self> {
        metric.check_point(p)?;
        let defaults = FdSteps::default();
        let top = max_order.min(defaults.by_order.len() - 1);
        let h = defaults.step(top)?;
        let clearance = metric.singular_clearance(p)?;
        if clearance < 2.0 * h {
            return Err(FinslerError::SingularLocus(format!(
                "clearance {clearance:.3e} below twice the step {h:.1e}"
            )));
        }
        let shrink = (clearance / (CLEARANCE_RATIO * h)).min(1.0);
        let steps = FdSteps {
            by_order: defaults.by_order.iter().map(|s| s * shrink).collect(),
        };
        steps.step(top)?;
        Ok(FdOracle::new(move |q: &Point| metric.eval(q), p).with_steps(steps))
    }

    pub fn with_steps(mut self, steps: FdSteps) -> Self {
        self.steps = steps;
        self
    }

    fn value_at(&mut self, h_key: u64, unit: f64, offset: &[i8]) -> Result<Complex64> {
        let key = (h_key, offset.to_vec());
        if let Some(&v) = self.values.get(&key) {
            return Ok(v);
        }
        let x: Vec<f64> = self
            .base
            .iter()
            .zip(offset)
            .map(|(&b, &k)| b + unit * k as f64)
            .collect();
        let v = (self.f)(&Point::from_real_coords(&x))?;
        self.values.insert(key, v);
        Ok(v)
    }

    /// Nested central difference with spacing `stride * unit`.
    fn nested(&mut self, h_key: u64, unit: f64, stride: i8, ops: &[Op], offset: &mut Vec<i8>) -> Result<Complex64> {
        let Some((&(k, barred), rest)) = ops.split_first() else {
            return self.value_at(h_key, unit, offset);
        };
        let key = (h_key ^ (stride as u64) << 56, ops.to_vec(), offset.clone());
        if let Some(&v) = self.inner.get(&key) {
            return Ok(v);
        }
        let h = unit * stride as f64;
        let mut diff = |axis: usize, this: &mut Self| -> Result<Complex64> {
            offset[axis] += stride;
            let plus = this.nested(h_key, unit, stride, rest, offset)?;
            offset[axis] -= 2 * stride;
            let minus = this.nested(h_key, unit, stride, rest, offset)?;
            offset[axis] += stride;
            Ok((plus - minus) / (2.0 * h))
        };
        let dx = diff(2 * k, self)?;
        let dy = diff(2 * k + 1, self)?;
        let i = Complex64::new(0.0, 1.0);
        let v = if barred { (dx + i * dy) * 0.5 } else { (dx - i * dy) * 0.5 };
        self.inner.insert(key, v);
        Ok(v)
    }

    /// Partial for an explicit operator list. Each operator is
    /// `(complex coordinate, conjugated)`, coordinates `0..n` being `z` and
    /// `n..2n` being `v`.
    pub fn partial_ops(&mut self, ops: &[Op]) -> Result<Complex64> {
        let order = ops.len();
        let mut offset = vec![0i8; self.base.len()];
        if order == 0 {
            return self.value_at(0, 0.0, &offset);
        }
        let h = self.steps.step(order)?;
        let unit = h / 2.0;
        let h_key = unit.to_bits();
        let coarse = self.nested(h_key, unit, 2, ops, &mut offset)?;
        let fine = self.nested(h_key, unit, 1, ops, &mut offset)?;
        Ok((4.0 * fine - coarse) / 3.0)
    }

    pub fn partial(&mut self, idx: &JetIndex) -> Result<Complex64> {
        let n = self.base.len() / 4;
        let ops: Vec<Op> = idx
            .operators()
            .into_iter()
            .map(|(f, j)| match f {
                Family::Z => (j, false),
                Family::Zbar => (j, true),
                Family::V => (n + j, false),
                Family::Vbar => (n + j, true),
            })
            .collect();
        self.partial_ops(&ops)
    }
}

/// Single finite-difference partial of `G` at `p`.
pub fn fd_oracle(metric: &MetricExpr, p: &Point, idx: &JetIndex) -> Result<Complex64> {
    let mut oracle = FdOracle::for_metric(metric, p, idx.order() as usize)?;
    oracle.partial(idx)
}

/// First Wirtinger derivatives of a vector-valued field at `p`, by central
/// differences with one Richardson step.
///
/// Returns `[d/dz^mu, d/dzbar^mu, d/dv^mu, d/dvbar^mu]`, each `n` blocks of
/// the field's length.
pub fn field_gradient(
    field: impl Fn(&Point) -> Result<Vec<Complex64>>,
    p: &Point,
    h: f64,
) -> Result<[Vec<Vec<Complex64>>; 4]> {
    if h < 1e-10 {
        return Err(FinslerError::StepUnderflow(format!("field step {h:.1e}")));
    }
    let n = p.n();
    let base = p.real_coords();
    let eval = |axis: usize, delta: f64| -> Result<Vec<Complex64>> {
        let mut x = base.clone();
        x[axis] += delta;
        field(&Point::from_real_coords(&x))
    };
    let central = |axis: usize, step: f64| -> Result<Vec<Complex64>> {
        let plus = eval(axis, step)?;
        let minus = eval(axis, -step)?;
        Ok(plus
            .iter()
            .zip(&minus)
            .map(|(a, b)| (a - b) / (2.0 * step))
            .collect())
    };
    let richardson = |axis: usize| -> Result<Vec<Complex64>> {
        let coarse = central(axis, h)?;
        let fine = central(axis, h / 2.0)?;
        Ok(fine
            .iter()
            .zip(&coarse)
            .map(|(f, c)| (4.0 * f - c) / 3.0)
            .collect())
    };
    let i = Complex64::new(0.0, 1.0);
    let mut out: [Vec<Vec<Complex64>>; 4] = Default::default();
    for k in 0..2 * n {
        let dx = richardson(2 * k)?;
        let dy = richardson(2 * k + 1)?;
        let holo: Vec<Complex64> = dx.iter().zip(&dy).map(|(a, b)| (a - i * b) * 0.5).collect();
        let anti: Vec<Complex64> = dx.iter().zip(&dy).map(|(a, b)| (a + i * b) * 0.5).collect();
        let (h_slot, a_slot) = if k < n { (0, 1) } else { (2, 3) };
        out[h_slot].push(holo);
        out[a_slot].push(anti);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Expr, Slot};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn bilinear_mixed_partial() {
        let m = MetricExpr::new("vv", 1, Expr::v(1) * Expr::vbar(1), vec![]).unwrap();
        let p = Point::new(vec![c(0.1, 0.2)], vec![c(0.6, -0.3)]).unwrap();
        let idx = JetIndex::zero(1).with(Slot::V, 1).with(Slot::Vbar, 1);
        let d = fd_oracle(&m, &p, &idx).unwrap();
        assert!((d - c(1.0, 0.0)).norm() < 1e-10);
        let vv = JetIndex::zero(1).with(Slot::V, 1).with(Slot::V, 1);
        assert!(fd_oracle(&m, &p, &vv).unwrap().norm() < 1e-10);
    }

    #[test]
    fn holomorphic_first_derivative() {
        // d/dz of z^3 is 3 z^2; d/dzbar vanishes.
        let g = Expr::z(1).pow(3.0) * Expr::v(1) * Expr::vbar(1);
        let m = MetricExpr::new("z3", 1, g, vec![]).unwrap();
        let z = c(0.4, -0.3);
        let p = Point::new(vec![z], vec![c(1.0, 0.0)]).unwrap();
        let dz = fd_oracle(&m, &p, &JetIndex::single(1, Slot::Z, 1)).unwrap();
        let dzb = fd_oracle(&m, &p, &JetIndex::single(1, Slot::Zbar, 1)).unwrap();
        assert!((dz - 3.0 * z * z).norm() < 1e-10);
        assert!(dzb.norm() < 1e-10);
    }

    #[test]
    fn order_four_exp_metric() {
        let g = (Expr::z(1) * Expr::zbar(1)).exp() * Expr::v(1) * Expr::vbar(1);
        let m = MetricExpr::new("e", 1, g, vec![]).unwrap();
        let p = Point::new(vec![c(1.0, 0.0)], vec![c(1.0, 0.0)]).unwrap();
        let idx = JetIndex::zero(1)
            .with(Slot::Z, 1)
            .with(Slot::Zbar, 1)
            .with(Slot::V, 1)
            .with(Slot::Vbar, 1);
        let d = fd_oracle(&m, &p, &idx).unwrap();
        assert!((d - c(2.0 * std::f64::consts::E, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn field_gradient_of_linear_field() {
        let p = Point::new(vec![c(0.2, 0.1)], vec![c(1.0, 0.5)]).unwrap();
        let g = field_gradient(|q| Ok(vec![q.z[0] * 2.0 + q.v[0].conj()]), &p, 1e-3).unwrap();
        assert!((g[0][0][0] - c(2.0, 0.0)).norm() < 1e-10);
        assert!(g[1][0][0].norm() < 1e-10);
        assert!((g[3][0][0] - c(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn underflow_reported() {
        let steps = FdSteps {
            by_order: vec![0.0, 1e-12],
        };
        assert!(matches!(steps.step(1), Err(FinslerError::StepUnderflow(_))));
    }
}
