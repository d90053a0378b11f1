//! Deterministic point sampling on the slit tangent bundle.
//!
//! The generator is ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`). Each
//! uniform draw is `(next_u64 >> 11) * 2^-53` in `[0, 1)`, mapped affinely to
//! the box. A candidate consumes `2n` draws for `z` (real then imaginary part
//! of each coordinate) followed by `2n` for `v`, whether or not it is
//! accepted.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FinslerError, Result};
use crate::expr::MetricExpr;
use crate::geometry::fundamental_tensor;
use crate::jets::{eval_jet, OrderBound};
use crate::point::Point;

/// Name of the generator and draw mapping, echoed into reports.
pub const GENERATOR_ID: &str = "chacha8-seed_from_u64-u53";

/// Smallest Levi eigenvalue relative to the largest for an admissible point.
pub const LEVI_RELATIVE_FLOOR: f64 = 1e-10;

/// Uniform stream over `[0, 1)`.
pub struct UnitStream(ChaCha8Rng);

impl UnitStream {
    pub fn new(seed: u64) -> Self {
        UnitStream(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn next_unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_unit()
    }

    /// Complex vector with real and imaginary parts uniform in `[lo, hi)`.
    pub fn complex_vec(&mut self, n: usize, lo: f64, hi: f64) -> Vec<Complex64> {
        (0..n)
            .map(|_| {
                let re = self.uniform(lo, hi);
                Complex64::new(re, self.uniform(lo, hi))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RejectionLimits {
    /// Smallest admissible modulus of every singular-locus expression.
    pub min_clearance: f64,
    /// Smallest admissible Levi eigenvalue.
    pub min_eigenvalue: f64,
    /// Largest admissible relative homogeneity residual.
    pub euler_tol: f64,
    /// Acceptance ratio below which sampling starves.
    pub min_acceptance: f64,
}

impl Default for RejectionLimits {
    fn default() -> Self {
        RejectionLimits {
            min_clearance: 0.05,
            min_eigenvalue: 1e-6,
            euler_tol: 1e-10,
            min_acceptance: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSpec {
    pub count: usize,
    pub seed: u64,
    /// Range of every real coordinate of `z`.
    pub z_box: [f64; 2],
    /// Range of every real coordinate of `v`.
    pub v_box: [f64; 2],
    /// Rescale `v` so that `G(z, v) = 1`.
    pub normalize_v: bool,
    pub limits: RejectionLimits,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            count: 50,
            seed: 1,
            z_box: [-0.5, 0.5],
            v_box: [-1.0, 1.0],
            normalize_v: false,
            limits: RejectionLimits::default(),
        }
    }
}

impl SampleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(FinslerError::InvalidParameter("sample count must be at least 1".into()));
        }
        for (name, b) in [("z_box", self.z_box), ("v_box", self.v_box)] {
            if !(b[0] < b[1]) || !b[0].is_finite() || !b[1].is_finite() {
                return Err(FinslerError::InvalidParameter(format!("{name} [{}, {}] is degenerate", b[0], b[1])));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Sample {
    pub points: Vec<Point>,
    pub attempted: usize,
    /// Rejection counts by reason.
    pub rejections: BTreeMap<String, usize>,
}

/// Fixed multipliers probing `G(z, t v) = |t|^2 G(z, v)`.
const EULER_PROBES: [(f64, f64); 2] = [(0.6, 0.3), (-1.4, 0.9)];

/// Why a candidate point is unusable, or `None` if it is accepted.
pub fn rejection_reason(metric: &MetricExpr, p: &Point, limits: &RejectionLimits) -> Option<&'static str> {
    match metric.singular_clearance(p) {
        Ok(c) if c >= limits.min_clearance => {}
        _ => return Some("singular_clearance"),
    }
    let Ok(g) = metric.eval(p) else {
        return Some("evaluation");
    };
    if !(g.re > 0.0) || g.im.abs() > limits.euler_tol * g.re {
        return Some("nonpositive_metric");
    }
    for (re, im) in EULER_PROBES {
        let t = Complex64::new(re, im);
        match metric.eval(&p.scale_fiber(t)) {
            Ok(gt) if (gt - g * t.norm_sqr()).norm() <= limits.euler_tol * g.re * t.norm_sqr() => {}
            _ => return Some("euler_residual"),
        }
    }
    let frame = eval_jet(metric, p, OrderBound::new(0, 0, 1, 1)).and_then(|j| fundamental_tensor(&j));
    match frame {
        Ok(f) => {
            let largest = f.eigenvalues.last().copied().unwrap_or(0.0);
            if f.eigenvalues[0] >= limits.min_eigenvalue.max(LEVI_RELATIVE_FLOOR * largest) {
                None
            } else {
                Some("levi_not_positive")
            }
        }
        Err(FinslerError::IllConditioned(_)) => Some("ill_conditioned"),
        Err(_) => Some("levi_not_positive"),
    }
}

/// Draw accepted points until `count` are found, or starve.
pub fn sample_points(metric: &MetricExpr, spec: &SampleSpec) -> Result<Sample> {
    spec.validate()?;
    let n = metric.n;
    let mut stream = UnitStream::new(spec.seed);
    let max_attempts = ((spec.count as f64) / spec.limits.min_acceptance).ceil() as usize;
    let mut points = Vec::with_capacity(spec.count);
    let mut rejections: BTreeMap<String, usize> = BTreeMap::new();
    let mut attempted = 0;
    while points.len() < spec.count {
        if attempted >= max_attempts {
            return Err(FinslerError::Starvation {
                accepted: points.len(),
                attempted,
                rejections: rejections.iter().map(|(k, v)| (k.clone(), *v)).collect(),
            });
        }
        attempted += 1;
        let z = stream.complex_vec(n, spec.z_box[0], spec.z_box[1]);
        let v = stream.complex_vec(n, spec.v_box[0], spec.v_box[1]);
        let Ok(mut p) = Point::new(z, v) else {
            *rejections.entry("zero_fiber".to_string()).or_insert(0) += 1;
            continue;
        };
        if spec.normalize_v {
            match metric.eval(&p) {
                Ok(g) if g.re > 0.0 => p = p.scale_fiber(Complex64::new(g.re.sqrt().recip(), 0.0)),
                _ => {
                    *rejections.entry("nonpositive_metric".to_string()).or_insert(0) += 1;
                    continue;
                }
            }
        }
        match rejection_reason(metric, &p, &spec.limits) {
            None => points.push(p),
            Some(r) => *rejections.entry(r.to_string()).or_insert(0) += 1,
        }
    }
    Ok(Sample {
        points,
        attempted,
        rejections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build_hermitian, HermitianData};

    #[test]
    fn unit_draws_in_range_and_reproducible() {
        let mut a = UnitStream::new(7);
        let mut b = UnitStream::new(7);
        for _ in 0..1000 {
            let x = a.next_unit();
            assert!((0.0..1.0).contains(&x));
            assert_eq!(x.to_bits(), b.next_unit().to_bits());
        }
    }

    #[test]
    fn flat_accepts_everything() {
        let m = build_hermitian(&HermitianData::flat(2)).unwrap();
        let s = sample_points(&m, &SampleSpec { count: 40, ..Default::default() }).unwrap();
        assert_eq!(s.attempted, 40);
        assert!(s.rejections.is_empty());
    }

    #[test]
    fn normalization_gives_unit_metric() {
        let m = build_hermitian(&HermitianData::fubini_study(2)).unwrap();
        let spec = SampleSpec { count: 10, normalize_v: true, ..Default::default() };
        for p in sample_points(&m, &spec).unwrap().points {
            assert!((m.eval(&p).unwrap().re - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn impossible_clearance_starves() {
        let m = build_hermitian(&HermitianData::flat(2)).unwrap();
        let mut spec = SampleSpec { count: 5, ..Default::default() };
        spec.limits.min_eigenvalue = 2.0;
        assert!(matches!(sample_points(&m, &spec), Err(FinslerError::Starvation { .. })));
    }

    #[test]
    fn degenerate_box_rejected() {
        let spec = SampleSpec { z_box: [1.0, 1.0], ..Default::default() };
        assert!(spec.validate().is_err());
    }
}
