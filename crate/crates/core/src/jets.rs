//! Mixed Wirtinger partials of a metric at a point.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FinslerError, Result};
use crate::expr::{MetricExpr, ScalarExpr, Slot};
use crate::point::Point;
use crate::series::{Bound, Family, JetSpace, Series};

/// Predicate magnitude below which `eval_jet` refuses a point outright.
/// The sampler applies a much larger clearance on top of this.
pub const LOCUS_GUARD: f64 = 1e-8;

/// Per-family total-order bounds for the jet of `G`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderBound {
    pub z: u8,
    pub zbar: u8,
    pub v: u8,
    pub vbar: u8,
}

impl Default for OrderBound {
    fn default() -> Self {
        OrderBound {
            z: 1,
            zbar: 1,
            v: 2,
            vbar: 2,
        }
    }
}

impl OrderBound {
    pub fn new(z: u8, zbar: u8, v: u8, vbar: u8) -> Self {
        OrderBound { z, zbar, v, vbar }
    }

    /// Default bound with one extra `v` order, enough for the mixed
    /// horizontal-vertical Rund curvature block.
    pub fn extended() -> Self {
        OrderBound::new(1, 1, 3, 2)
    }

    pub fn as_array(self) -> Bound {
        [self.z, self.zbar, self.v, self.vbar]
    }

    pub fn max_family(self) -> u8 {
        self.as_array().into_iter().max().unwrap_or(0)
    }

    pub fn total(self) -> u32 {
        self.as_array().iter().map(|&b| b as u32).sum()
    }

    /// Componentwise comparison.
    pub fn covers(self, other: OrderBound) -> bool {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .all(|(&a, b)| a >= b)
    }

    /// Fails unless the bound reaches the default closure.
    pub fn require_curvature(self) -> Result<()> {
        if self.covers(OrderBound::default()) {
            Ok(())
        } else {
            Err(FinslerError::OrderExhausted(format!(
                "bound {:?} is below the curvature closure {:?}",
                self.as_array(),
                OrderBound::default().as_array()
            )))
        }
    }
}

/// Exponent vectors of a mixed partial, one per variable family.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JetIndex {
    pub z: Vec<u8>,
    pub zbar: Vec<u8>,
    pub v: Vec<u8>,
    pub vbar: Vec<u8>,
}

impl JetIndex {
    pub fn zero(n: usize) -> Self {
        JetIndex {
            z: vec![0; n],
            zbar: vec![0; n],
            v: vec![0; n],
            vbar: vec![0; n],
        }
    }

    /// Index of `d/dslot^index` applied once (1-based `index`).
    pub fn single(n: usize, slot: Slot, index: usize) -> Self {
        JetIndex::zero(n).with(slot, index)
    }

    /// Adds one more derivative in `slot`, variable `index` (1-based).
    pub fn with(mut self, slot: Slot, index: usize) -> Self {
        self.family_mut(slot.family())[index - 1] += 1;
        self
    }

    pub fn family(&self, f: Family) -> &[u8] {
        match f {
            Family::Z => &self.z,
            Family::Zbar => &self.zbar,
            Family::V => &self.v,
            Family::Vbar => &self.vbar,
        }
    }

    fn family_mut(&mut self, f: Family) -> &mut Vec<u8> {
        match f {
            Family::Z => &mut self.z,
            Family::Zbar => &mut self.zbar,
            Family::V => &mut self.v,
            Family::Vbar => &mut self.vbar,
        }
    }

    pub fn order(&self) -> u32 {
        Family::ALL
            .iter()
            .flat_map(|&f| self.family(f).iter())
            .map(|&e| e as u32)
            .sum()
    }

    /// Index of the conjugate partial: swaps `z <-> zbar` and `v <-> vbar`.
    pub fn conj(&self) -> JetIndex {
        JetIndex {
            z: self.zbar.clone(),
            zbar: self.z.clone(),
            v: self.vbar.clone(),
            vbar: self.v.clone(),
        }
    }

    /// Flattened derivative sequence `(slot, 0-based index)`, canonical order.
    pub fn operators(&self) -> Vec<(Family, usize)> {
        let mut ops = Vec::with_capacity(self.order() as usize);
        for f in Family::ALL {
            for (j, &e) in self.family(f).iter().enumerate() {
                ops.extend(std::iter::repeat_n((f, j), e as usize));
            }
        }
        ops
    }
}

/// All mixed partials of `G` at a point up to an [`OrderBound`].
#[derive(Clone, Debug)]
pub struct JetTable {
    point: Point,
    bound: OrderBound,
    series: Series,
}

impl JetTable {
    pub fn point(&self) -> &Point {
        &self.point
    }

    pub fn bound(&self) -> OrderBound {
        self.bound
    }

    /// The underlying truncated Taylor series of `G` around the point.
    pub fn series(&self) -> &Series {
        &self.series
    }

    pub fn n(&self) -> usize {
        self.point.n()
    }

    pub fn value(&self) -> Complex64 {
        self.series.value()
    }

    /// The mixed partial for `idx`, or `None` outside the bound.
    pub fn entry(&self, idx: &JetIndex) -> Option<Complex64> {
        let space = self.series.space();
        let mut pos = [0usize; 4];
        for f in Family::ALL {
            pos[f as usize] = space.index_of(idx.family(f))?;
        }
        self.series.partial(pos)
    }

    /// Every in-bound entry in storage order.
    pub fn entries(&self) -> Vec<(JetIndex, Complex64)> {
        let space = self.series.space();
        let b = self.bound.as_array();
        let counts: Vec<usize> = b.iter().map(|&d| space.count(d)).collect();
        let mut out = Vec::with_capacity(counts.iter().product());
        for i0 in 0..counts[0] {
            for i1 in 0..counts[1] {
                for i2 in 0..counts[2] {
                    for i3 in 0..counts[3] {
                        let idx = JetIndex {
                            z: space.monomial(i0).to_vec(),
                            zbar: space.monomial(i1).to_vec(),
                            v: space.monomial(i2).to_vec(),
                            vbar: space.monomial(i3).to_vec(),
                        };
                        let value = self.series.partial([i0, i1, i2, i3]).unwrap_or_default();
                        out.push((idx, value));
                    }
                }
            }
        }
        out
    }
}

fn series_of(
    expr: &crate::expr::Expr,
    p: &Point,
    bound: OrderBound,
) -> Result<Series> {
    let space: Arc<JetSpace> = JetSpace::shared(p.n(), bound.max_family());
    expr.eval_series(&p.polarized(), &space, bound.as_array())
}

/// Propagates a truncated Taylor jet of `G` through its expression tree.
pub fn eval_jet(metric: &MetricExpr, p: &Point, bound: OrderBound) -> Result<JetTable> {
    metric.check_point(p)?;
    let clearance = metric.singular_clearance(p)?;
    if clearance < LOCUS_GUARD {
        return Err(FinslerError::SingularLocus(format!(
            "singular predicate magnitude {clearance:.3e}"
        )));
    }
    let series = series_of(&metric.expr, p, bound)?;
    Ok(JetTable {
        point: p.clone(),
        bound,
        series,
    })
}

/// Partials of a scalar function of `(z, zbar)` up to order one in each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarJet {
    pub value: Complex64,
    /// `f_{;a}`
    pub dz: Vec<Complex64>,
    /// `f_{;a-bar}`
    pub dzbar: Vec<Complex64>,
    /// `f_{;a b-bar}`, row-major `[a][b]`.
    pub dz_dzbar: Vec<Complex64>,
}

impl ScalarJet {
    pub fn mixed(&self, a: usize, b: usize) -> Complex64 {
        self.dz_dzbar[a * self.dz.len() + b]
    }
}

pub fn eval_scalar_jet(f: &ScalarExpr, p: &Point) -> Result<ScalarJet> {
    if f.expr.uses_slot(Slot::V) || f.expr.uses_slot(Slot::Vbar) {
        return Err(FinslerError::InvalidExpression(format!(
            "scalar `{}` references fiber slots",
            f.name
        )));
    }
    let n = p.n();
    let s = series_of(&f.expr, p, OrderBound::new(1, 1, 0, 0))?;
    let dz = (0..n).map(|a| s.partial([1 + a, 0, 0, 0]).unwrap()).collect();
    let dzbar = (0..n).map(|b| s.partial([0, 1 + b, 0, 0]).unwrap()).collect();
    let mut mixed = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            mixed.push(s.partial([1 + a, 1 + b, 0, 0]).unwrap());
        }
    }
    Ok(ScalarJet {
        value: s.value(),
        dz,
        dzbar,
        dz_dzbar: mixed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn bilinear_monomial() {
        let m = MetricExpr::new("vv", 1, Expr::v(1) * Expr::vbar(1), vec![]).unwrap();
        let p = Point::new(vec![c(0.2, 0.1)], vec![c(0.7, -0.4)]).unwrap();
        let j = eval_jet(&m, &p, OrderBound::default()).unwrap();
        let vvb = JetIndex::zero(1).with(Slot::V, 1).with(Slot::Vbar, 1);
        let vv = JetIndex::zero(1).with(Slot::V, 1).with(Slot::V, 1);
        assert!((j.entry(&vvb).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        assert!(j.entry(&vv).unwrap().norm() < 1e-15);
    }

    #[test]
    fn exp_weighted_mixed_partial() {
        // G = e^{z zbar} v vbar at z = v = 1: d_z d_zbar d_v d_vbar G = 2e.
        let g = (Expr::z(1) * Expr::zbar(1)).exp() * Expr::v(1) * Expr::vbar(1);
        let m = MetricExpr::new("e", 1, g, vec![]).unwrap();
        let p = Point::new(vec![c(1.0, 0.0)], vec![c(1.0, 0.0)]).unwrap();
        let j = eval_jet(&m, &p, OrderBound::default()).unwrap();
        let idx = JetIndex::zero(1)
            .with(Slot::Z, 1)
            .with(Slot::Zbar, 1)
            .with(Slot::V, 1)
            .with(Slot::Vbar, 1);
        let want = 2.0 * std::f64::consts::E;
        assert!((j.entry(&idx).unwrap() - c(want, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn entries_cover_the_bound() {
        let m = MetricExpr::new("vv", 2, Expr::v(1) * Expr::vbar(1), vec![]).unwrap();
        let p = Point::new(vec![c(0.0, 0.0); 2], vec![c(1.0, 0.0); 2]).unwrap();
        let j = eval_jet(&m, &p, OrderBound::default()).unwrap();
        // 3 * 3 * 6 * 6 monomial combinations for n = 2
        assert_eq!(j.entries().len(), 324);
        assert!(j.entries().iter().all(|(i, _)| i.order() <= 6));
    }

    #[test]
    fn scalar_jet_quadratic() {
        let f = ScalarExpr::new("r", Expr::z(1) * Expr::zbar(1)).unwrap();
        let p = Point::new(vec![c(0.3, 0.4), c(0.0, 1.0)], vec![c(1.0, 0.0); 2]).unwrap();
        let s = eval_scalar_jet(&f, &p).unwrap();
        assert!((s.dz[0] - c(0.3, -0.4)).norm() < 1e-15);
        assert!((s.mixed(0, 0) - c(1.0, 0.0)).norm() < 1e-15);
        assert!(s.mixed(1, 0).norm() < 1e-15);
    }

    #[test]
    fn singular_point_rejected() {
        let m = MetricExpr::new("s", 1, Expr::v(1) * Expr::vbar(1), vec![Expr::z(1)]).unwrap();
        let p = Point::new(vec![c(0.0, 0.0)], vec![c(1.0, 0.0)]).unwrap();
        assert!(matches!(
            eval_jet(&m, &p, OrderBound::default()),
            Err(FinslerError::SingularLocus(_))
        ));
    }
}
