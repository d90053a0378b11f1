use std::sync::OnceLock;

use finsler_core::analysis::{classify, PointEval};
use finsler_core::catalog::standard_catalog;
use finsler_core::curvature::{conjugate_symmetry_defect, flag_curvature};
use finsler_core::exec::ExecMode;
use finsler_core::sampling::{sample_points, SampleSpec};
use finsler_core::{MetricExpr, Point, Tensor};
use num_complex::Complex64;
use proptest::prelude::*;

fn catalog() -> &'static [(String, MetricExpr)] {
    static CELL: OnceLock<Vec<(String, MetricExpr)>> = OnceLock::new();
    CELL.get_or_init(|| {
        standard_catalog()
            .into_iter()
            .map(|(name, entry)| (name, entry.build().unwrap()))
            .collect()
    })
}

fn one_point(metric: &MetricExpr, seed: u64) -> Point {
    let spec = SampleSpec { count: 1, seed, ..Default::default() };
    sample_points(metric, &spec).unwrap().points.remove(0)
}

fn complex() -> impl Strategy<Value = Complex64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| Complex64::new(re, im))
}

fn vector(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec(complex(), n).prop_filter("non-zero", |v| v.iter().map(|c| c.norm_sqr()).sum::<f64>() > 1e-2)
}

/// `T_{a b-bar mu nu-bar} H^a Hbar^b X^mu Xbar^nu`
fn bilinear(t: &Tensor, h: &[Complex64], x: &[Complex64]) -> Complex64 {
    let n = h.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for a in 0..n {
        for b in 0..n {
            for m in 0..n {
                for nu in 0..n {
                    acc += t.get(&[a, b, m, nu]) * h[a] * h[b].conj() * x[m] * x[nu].conj();
                }
            }
        }
    }
    acc
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fiber_homogeneity(idx in 0usize..10, seed in 0u64..1_000_000, lambda in complex()) {
        prop_assume!(lambda.norm() > 0.1);
        let (name, metric) = &catalog()[idx % catalog().len()];
        let p = one_point(metric, seed);
        let g = metric.eval(&p).unwrap();
        let scaled = metric.eval(&p.scale_fiber(lambda)).unwrap();
        prop_assert!((scaled - lambda.norm_sqr() * g).norm() <= 1e-10 * scaled.norm().max(1.0), "{name}");
    }

    /// Every curvature tensor with all indices down has fiber degree zero.
    #[test]
    fn curvature_is_fiber_invariant(idx in 0usize..10, seed in 0u64..1_000_000, lambda in complex()) {
        prop_assume!(lambda.norm() > 0.2);
        let (name, metric) = &catalog()[idx % catalog().len()];
        let p = one_point(metric, seed);
        let q = p.scale_fiber(lambda);
        prop_assume!(metric.singular_clearance(&q).unwrap() > 1e-3);
        let a = PointEval::new(metric, &p).unwrap();
        let b = PointEval::new(metric, &q).map_err(|e| TestCaseError::fail(format!("{name}: {e}")))?;
        let scale = a.bundle.chern.horizontal.scale();
        for (x, y) in [(&a.bundle.chern.horizontal, &b.bundle.chern.horizontal), (&a.bundle.canonical, &b.bundle.canonical)] {
            let gap = x.data().iter().zip(y.data()).map(|(u, w)| (u - w).norm()).fold(0.0, f64::max);
            prop_assert!(gap <= 1e-8 * scale, "{name}: {gap:.2e}");
        }
    }

    #[test]
    fn conjugate_symmetry(idx in 0usize..10, seed in 0u64..1_000_000) {
        let (name, metric) = &catalog()[idx % catalog().len()];
        let e = PointEval::new(metric, &one_point(metric, seed)).unwrap();
        for t in [&e.bundle.chern.horizontal, &e.bundle.canonical, &e.bundle.complexified] {
            prop_assert!(conjugate_symmetry_defect(t) <= 1e-9 * t.scale(), "{name}");
        }
    }

    #[test]
    fn flag_curvature_ignores_scale(idx in 0usize..10, seed in 0u64..1_000_000, lambda in complex(), h in vector(2)) {
        prop_assume!(lambda.norm() > 0.1);
        let (name, metric) = &catalog()[idx % catalog().len()];
        let e = PointEval::new(metric, &one_point(metric, seed)).unwrap();
        let h2: Vec<Complex64> = h.iter().map(|c| c * lambda).collect();
        for t in [&e.bundle.chern.horizontal, &e.bundle.canonical] {
            let k1 = flag_curvature(&e.geometry, t, &h).unwrap();
            let k2 = flag_curvature(&e.geometry, t, &h2).unwrap();
            prop_assert!((k1 - k2).abs() <= 1e-9 * k1.abs().max(1.0), "{name}: {k1} vs {k2}");
        }
    }

    /// The complexified curvature never exceeds the canonical one on
    /// `(H, Hbar, X, Xbar)`.
    #[test]
    fn complexified_minus_canonical_is_nonpositive(idx in 0usize..10, seed in 0u64..1_000_000, h in vector(2), x in vector(2)) {
        let (name, metric) = &catalog()[idx % catalog().len()];
        let e = PointEval::new(metric, &one_point(metric, seed)).unwrap();
        let d = bilinear(&e.bundle.complexified, &h, &x) - bilinear(&e.bundle.canonical, &h, &x);
        prop_assert!(d.re <= 1e-10 * e.bundle.canonical.scale(), "{name}: {d}");
    }

    #[test]
    fn sampling_is_deterministic(idx in 0usize..10, seed in any::<u64>()) {
        let (_, metric) = &catalog()[idx % catalog().len()];
        let spec = SampleSpec { count: 3, seed, ..Default::default() };
        let a = sample_points(metric, &spec).unwrap();
        let b = sample_points(metric, &spec).unwrap();
        prop_assert_eq!(a.points, b.points);
        prop_assert_eq!(a.rejections, b.rejections);
    }
}

#[test]
fn parallel_and_sequential_agree_bitwise() {
    for (name, metric) in catalog() {
        let pts = sample_points(metric, &SampleSpec { count: 6, seed: 17, ..Default::default() }).unwrap().points;
        let par = classify(metric, &pts, 1e-8, ExecMode::Parallel).unwrap();
        let seq = classify(metric, &pts, 1e-8, ExecMode::Sequential).unwrap();
        assert_eq!(serde_json::to_string(&par).unwrap(), serde_json::to_string(&seq).unwrap(), "{name}");
    }
}
