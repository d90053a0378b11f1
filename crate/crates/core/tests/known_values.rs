#![allow(clippy::needless_range_loop)]

//! Hand-derived values and classical formulas checked against the full
//! pipeline.

use finsler_core::analysis::{classify, flag_difference_terms, PointEval, FLAG_DIFFERENCE_COEFF};
use finsler_core::catalog::{build_hermitian, build_randers, build_szabo, conformal_scale, HermitianData, NamedRho};
use finsler_core::exec::ExecMode;
use finsler_core::sampling::{sample_points, SampleSpec};
use finsler_core::{eval_jet, eval_scalar_jet, Expr, FdOracle, Geometry, MetricExpr, OrderBound, Point};
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn eval_at(metric: &MetricExpr, p: &Point) -> PointEval {
    PointEval::new(metric, p).unwrap()
}

fn sample(metric: &MetricExpr, count: usize, seed: u64) -> Vec<Point> {
    sample_points(metric, &SampleSpec { count, seed, ..Default::default() })
        .unwrap()
        .points
}

fn inverse2(m: [[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]
}

#[test]
fn fubini_study_levi_matrix_is_identity_at_origin() {
    let fs = build_hermitian(&HermitianData::fubini_study(2)).unwrap();
    let p = Point::new(vec![c(0.0, 0.0); 2], vec![c(0.3, -0.7), c(1.1, 0.2)]).unwrap();
    let geo = Geometry::new(&eval_jet(&fs, &p, OrderBound::default()).unwrap()).unwrap();
    for a in 0..2 {
        for b in 0..2 {
            let want = if a == b { 1.0 } else { 0.0 };
            assert!((geo.levi_value(a, b) - c(want, 0.0)).norm() < 1e-14);
        }
    }
}

#[test]
fn szabo_flat_factors_value() {
    let flat = HermitianData::flat(1);
    let g = build_szabo(&flat, &flat, 1.0, 2.0).unwrap();
    let p = Point::new(vec![c(0.2, 0.1), c(-0.3, 0.4)], vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
    let want = 2.0 + 2f64.sqrt();
    assert!((g.eval(&p).unwrap() - c(want, 0.0)).norm() < 1e-14);
}

#[test]
fn randers_constant_form_value() {
    let cst = 0.4;
    let g = build_randers(&HermitianData::flat(2), &[Expr::real(cst), Expr::real(0.0)]).unwrap();
    let p = Point::new(vec![c(0.3, -0.2), c(0.1, 0.1)], vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
    assert!((g.eval(&p).unwrap() - c((1.0 + cst) * (1.0 + cst), 0.0)).norm() < 1e-14);
}

#[test]
fn randers_constant_form_on_flat_has_no_horizontal_coefficients() {
    let g = build_randers(&HermitianData::flat(2), &[Expr::real(0.3), Expr::real(0.2)]).unwrap();
    for p in sample(&g, 5, 3) {
        let geo = eval_at(&g, &p).geometry;
        assert!(geo.chern_finsler_coeffs().horizontal.max_abs() < 1e-12);
    }
}

#[test]
fn szabo_cross_block_coefficients_vanish() {
    let g = build_szabo(&HermitianData::fubini_study(1), &HermitianData::conformal_flat(1, &NamedRho::AbsZ1Squared.scalar()).unwrap(), 0.7, 2.0).unwrap();
    for p in sample(&g, 6, 5) {
        let h = eval_at(&g, &p).geometry.chern_finsler_coeffs().horizontal;
        for (a, b, mu) in [(0, 1, 0), (0, 0, 1), (1, 0, 1), (1, 1, 0), (0, 1, 1), (1, 0, 0)] {
            assert!(h.get(&[a, b, mu]).norm() < 1e-9, "Gamma^{a}_({b};{mu})");
        }
    }
}

#[test]
fn harmonic_exponent_has_no_mixed_second_derivatives() {
    let rho = NamedRho::ReZ1Z2.scalar();
    let p = Point::new(vec![c(0.3, -0.4), c(-0.2, 0.6)], vec![c(1.0, 0.0), c(0.5, 0.5)]).unwrap();
    let j = eval_scalar_jet(&rho, &p).unwrap();
    assert!(j.dz_dzbar.iter().all(|x| x.norm() < 1e-15));
}

/// Hermitian metrics against the classical formulas, with every derivative
/// of `h` taken by finite differences.
#[test]
fn hermitian_matches_classical_chern_formulas() {
    let h = HermitianData::conformal_flat(2, &NamedRho::AbsZ1Squared.scalar()).unwrap();
    let fs = HermitianData::fubini_study(2);
    for data in [h, fs] {
        let g = build_hermitian(&data).unwrap();
        for p in sample(&g, 4, 9) {
            let e = eval_at(&g, &p);
            let fd = |a: usize, b: usize, ops: &[(usize, bool)]| {
                let entry = data.entry(a, b).clone();
                FdOracle::new(move |q: &Point| entry.eval(&q.polarized()), &p)
                    .partial_ops(ops)
                    .unwrap()
            };
            let hm = [[fd(0, 0, &[]), fd(0, 1, &[])], [fd(1, 0, &[]), fd(1, 1, &[])]];
            let inv = inverse2(hm);
            let mut dh = [[[c(0.0, 0.0); 2]; 2]; 2];
            let mut dhb = [[[c(0.0, 0.0); 2]; 2]; 2];
            let mut ddh = [[[[c(0.0, 0.0); 2]; 2]; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    for m in 0..2 {
                        dh[m][a][b] = fd(a, b, &[(m, false)]);
                        dhb[m][a][b] = fd(a, b, &[(m, true)]);
                        for nu in 0..2 {
                            ddh[nu][m][a][b] = fd(a, b, &[(nu, true), (m, false)]);
                        }
                    }
                }
            }
            let v = &p.v;
            let nl = &e.geometry.frame().nonlinear;
            let chern = &e.geometry.chern_finsler_coeffs().horizontal;
            let omega = &e.bundle.chern.horizontal;
            for a in 0..2 {
                for m in 0..2 {
                    // Gamma^a_{b;mu} = h^{l-bar a} d_mu h_{b l-bar}
                    let mut want_nl = c(0.0, 0.0);
                    for b in 0..2 {
                        let mut gamma = c(0.0, 0.0);
                        for l in 0..2 {
                            gamma += inv[l][a] * dh[m][b][l];
                        }
                        assert!((chern.get(&[a, b, m]) - gamma).norm() < 1e-7);
                        want_nl += gamma * v[b];
                    }
                    assert!((nl.get(&[a, m]) - want_nl).norm() < 1e-7);
                }
            }
            for (a, b, m, nu) in (0..16).map(|i| (i >> 3 & 1, i >> 2 & 1, i >> 1 & 1, i & 1)) {
                let mut want = -ddh[nu][m][a][b];
                for l in 0..2 {
                    for k in 0..2 {
                        want += dh[m][a][l] * inv[l][k] * dhb[nu][k][b];
                    }
                }
                assert!((omega.get(&[a, b, m, nu]) - want).norm() < 1e-6, "{}: Omega", data.name);
            }
            // the Rund horizontal block coincides with the Chern one
            assert!(e.bundle.rund.horizontal.max_diff(&e.bundle.chern.mixed).unwrap() < 1e-12);
        }
    }
}

#[test]
fn horizontal_derivative_of_metric_vanishes() {
    for (_, entry) in finsler_core::catalog::standard_catalog() {
        let g = entry.build().unwrap();
        for p in sample(&g, 3, 21) {
            let geo = eval_at(&g, &p).geometry;
            for mu in 0..geo.n() {
                let d = geo.delta(mu, geo.metric_series()).unwrap().value();
                assert!(d.norm() < 1e-12 * (1.0 + geo.metric_series().value().norm()));
            }
        }
    }
}

#[test]
fn kahler_metric_has_symmetric_canonical_connection() {
    let g = build_hermitian(&HermitianData::fubini_study(2)).unwrap();
    for p in sample(&g, 4, 4) {
        let e = eval_at(&g, &p);
        let canon = e.geometry.canonical_coeffs();
        let chern = e.geometry.chern_finsler_coeffs().horizontal;
        assert!(canon.holomorphic.max_diff(&chern).unwrap() < 1e-12);
        assert!(canon.antiholomorphic.max_abs() < 1e-12);
        assert!(e.torsions.trace.max_abs() < 1e-12);
        assert!(e.bundle.canonical.max_diff(&e.bundle.chern.horizontal).unwrap() < 1e-10);
    }
}

#[test]
fn conformal_flat_re_z1_balanced_defect_is_a_quarter() {
    let g = build_hermitian(&HermitianData::conformal_flat(2, &NamedRho::ReZ1.scalar()).unwrap()).unwrap();
    let pts = sample(&g, 8, 2);
    let cls = classify(&g, &pts, 1e-8, ExecMode::Sequential).unwrap();
    for d in &cls.per_point {
        assert!((d.balanced - 0.25).abs() < 1e-12);
    }
}

#[test]
fn conformal_flat_abs_z1_ricci_entry() {
    let flat = build_hermitian(&HermitianData::flat(2)).unwrap();
    let g = conformal_scale(&flat, &NamedRho::AbsZ1Squared.scalar()).unwrap();
    for p in sample(&g, 5, 8) {
        let e = eval_at(&g, &p);
        let r = e.bundle.ricci_chern.get(&[0, 0]);
        assert!((r - c(-2.0, 0.0)).norm() < 1e-10, "{r}");
        // S~_a = -rho_{;a} / 2 = -zbar^1 / 2 in the first slot
        let s = e.torsions.trace.get(&[0]);
        assert!((s + 0.5 * p.z[0].conj()).norm() < 1e-12);
        assert!(e.bundle.torsion_square.scalar.re > 0.0);
    }
}

/// The bracket form in the flag difference carries a coefficient of -1/4;
/// -1/2 misses by exactly a factor of two wherever the metric is not Kahler.
#[test]
fn flag_difference_coefficient_is_minus_a_quarter() {
    let g = build_hermitian(&HermitianData::conformal_flat(2, &NamedRho::AbsZ1Squared.scalar()).unwrap()).unwrap();
    assert_eq!(FLAG_DIFFERENCE_COEFF, -0.25);
    for (i, p) in sample(&g, 5, 12).iter().enumerate() {
        let e = eval_at(&g, p);
        let terms: Vec<_> = flag_difference_terms(&e, i).into_iter().filter(|(_, f)| f.norm() > 1e-4).collect();
        assert!(!terms.is_empty());
        for (diff, form) in terms {
            assert!((diff / form - c(-0.25, 0.0)).norm() < 1e-10);
            assert!((diff + 0.5 * form).norm() > 0.2 * form.norm());
        }
    }
}

#[test]
fn szabo_with_kahler_factors_is_kahler() {
    let fs = HermitianData::fubini_study(2);
    let g = build_szabo(&fs, &fs, 1.0, 2.0).unwrap();
    let pts = sample(&g, 5, 6);
    let cls = classify(&g, &pts, 1e-8, ExecMode::Sequential).unwrap();
    assert!(cls.aggregate.kahler <= 1e-9);
}
