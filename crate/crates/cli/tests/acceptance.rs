//! Acceptance criteria, one line per criterion.
//!
//! Runs as a plain binary so the summary lines are never swallowed by output
//! capture. Exits non-zero if any criterion fails.

use std::process::Command;

use finsler_core::analysis::{
    oracle_residual, theorem_41_witness, verify_conformal, verify_identity, Identity, PointEval, Verdict,
    ORACLE_MAX_ORDER,
};
use finsler_core::catalog::{build_hermitian, build_szabo, standard_catalog, HermitianData, NamedRho};
use finsler_core::curvature::sectional_curvature;
use finsler_core::exec::ExecMode;
use finsler_core::sampling::{sample_points, SampleSpec, UnitStream};
use finsler_core::{MetricExpr, Point, Tensor};
use num_complex::Complex64;

const POINTS: usize = 50;
const MODE: ExecMode = ExecMode::Parallel;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn catalog() -> Vec<(String, MetricExpr)> {
    standard_catalog()
        .into_iter()
        .map(|(name, m)| (name, m.build().expect("catalog metrics build")))
        .collect()
}

fn named(name: &str) -> MetricExpr {
    catalog()
        .into_iter()
        .find(|(n, _)| n == name)
        .map(|(_, m)| m)
        .expect("known catalog label")
}

fn sample(metric: &MetricExpr, count: usize, seed: u64) -> Result<Vec<Point>, String> {
    sample_points(metric, &SampleSpec { count, seed, ..Default::default() })
        .map(|s| s.points)
        .map_err(|e| format!("{}: {e}", metric.name))
}

fn evals(metric: &MetricExpr, pts: &[Point]) -> Result<Vec<PointEval>, String> {
    MODE.map(pts, |p| PointEval::new(metric, p))
        .into_iter()
        .collect::<Result<_, _>>()
        .map_err(|e| format!("{}: {e}", metric.name))
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn identity_on_catalog(identity: Identity, tol: f64) -> Outcome {
    let mut worst = (0.0f64, String::new());
    let mut failed = Vec::new();
    for (name, metric) in catalog() {
        let pts = sample(&metric, POINTS, 101)?;
        let r = verify_identity(identity, &metric, &pts, Some(tol), MODE).map_err(|e| format!("{name}: {e}"))?;
        if r.max_rel >= worst.0 {
            worst = (r.max_rel, name.clone());
        }
        if r.verdict != Verdict::Pass {
            failed.push(format!("{name} ({:.2e}, {:?})", r.max_rel, r.verdict));
        }
    }
    check(
        failed.is_empty(),
        format!("worst rel {:.2e} on {} (tol {tol:.0e}){}", worst.0, worst.1, fail_list(&failed)),
    )
}

fn fail_list(failed: &[String]) -> String {
    if failed.is_empty() {
        String::new()
    } else {
        format!("; failing: {}", failed.join(", "))
    }
}

/// Every jet entry inside the oracle's order range matches finite differences.
fn oracle_agreement() -> Outcome {
    let labels = [
        "flat",
        "fubini_study",
        "conformal_re_z1",
        "conformal_abs_z1",
        "szabo_k1",
        "szabo_k2",
        "randers_const",
        "randers_variable",
    ];
    let tol = 1e-4;
    let mut failed = Vec::new();
    let mut worst = (0.0f64, "");
    for label in labels {
        let metric = named(label);
        let pts = sample(&metric, POINTS, 7)?;
        let rel = MODE
            .map(&pts, |p| oracle_residual(&metric, p, Default::default(), ORACLE_MAX_ORDER).map(|(r, _)| r.max_rel))
            .into_iter()
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| format!("{label}: {e}"))?
            .into_iter()
            .fold(0.0, f64::max);
        if rel >= worst.0 {
            worst = (rel, label);
        }
        if rel > tol {
            failed.push(format!("{label} ({rel:.2e})"));
        }
    }
    check(
        failed.is_empty(),
        format!(
            "{} metrics x {POINTS} points, orders <= {ORACLE_MAX_ORDER}, worst rel {:.2e} on {}{}",
            labels.len(),
            worst.0,
            worst.1,
            fail_list(&failed)
        ),
    )
}

fn flat_vanishing() -> Outcome {
    let mut worst = 0.0f64;
    for n in [2, 3] {
        let metric = build_hermitian(&HermitianData::flat(n)).map_err(|e| e.to_string())?;
        for e in evals(&metric, &sample(&metric, POINTS, 3)?)? {
            let g = &e.geometry;
            let chern = g.chern_finsler_coeffs();
            let canon = g.canonical_coeffs();
            let t = &e.torsions;
            let b = &e.bundle;
            let tensors: Vec<&Tensor> = vec![
                &g.frame().nonlinear,
                &chern.horizontal,
                &chern.vertical,
                &canon.holomorphic,
                &canon.antiholomorphic,
                &canon.vertical,
                &t.horizontal,
                &t.trace,
                &t.canonical_bar,
                &t.three_form,
                &t.weak_kahler,
                &b.chern.horizontal,
                &b.chern.mixed,
                &b.chern.vertical_mixed,
                &b.chern.mixed_vertical,
                &b.chern.vertical,
                &b.rund.horizontal,
                &b.rund.mixed_vertical,
                &b.canonical,
                &b.complexified,
            ];
            worst = tensors.iter().map(|t| t.max_abs()).fold(worst, f64::max);
            worst = worst.max(g.rund_coeffs().max_abs());
        }
    }
    check(worst <= 1e-12, format!("n = 2, 3: largest entry {worst:.2e} (tol 1e-12)"))
}

fn theorem_41() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    let fs = named("fubini_study");
    let fs_pts = sample(&fs, POINTS, 5)?;
    let (mut gap, mut sec) = (0.0f64, 0.0f64);
    for e in evals(&fs, &fs_pts)? {
        let om = &e.bundle.chern.horizontal;
        gap = gap.max(e.bundle.canonical.max_diff(om).map_err(|x| x.to_string())? / om.scale());
        let kn = sectional_curvature(&e.geometry, &e.bundle.canonical);
        let kd = sectional_curvature(&e.geometry, om);
        sec = sec.max((kn - kd).abs());
    }
    ok &= gap <= 1e-8 && sec <= 1e-8;
    notes.push(format!("FS |R-Omega|/scale {gap:.1e}, |K_can(v)-K_ch(v)| {sec:.1e}"));

    let conf = named("conformal_re_z1");
    let pts = sample(&conf, POINTS, 5)?;
    let (mut min_defect, mut min_gap, mut max_sign) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for e in evals(&conf, &pts)? {
        let om = &e.bundle.chern.horizontal;
        min_defect = min_defect.min(e.defects().kahler);
        min_gap = min_gap.min(e.bundle.canonical.max_diff(om).map_err(|x| x.to_string())?);
        let kn = sectional_curvature(&e.geometry, &e.bundle.canonical);
        let kd = sectional_curvature(&e.geometry, om);
        max_sign = max_sign.max((kn - kd) / (1.0 + kd.abs()));
    }
    ok &= min_defect > 1e-3 && min_gap > 1e-3 && max_sign <= 1e-12;
    notes.push(format!(
        "e^Re(z1) flat: min Kahler defect {min_defect:.2e}, min |R-Omega| {min_gap:.2e}, max (K_can-K_ch)(v)/scale {max_sign:.1e}"
    ));

    for (name, metric, p) in [("FS", &fs, &fs_pts), ("e^Re(z1) flat", &conf, &pts)] {
        let w = theorem_41_witness(metric, p, 1e-8, MODE).map_err(|e| e.to_string())?;
        ok &= w.consistent;
        notes.push(format!("{name} witness: {}", w.verdict));
    }
    check(ok, notes.join("; "))
}

/// `Re (K - R)[H, Hbar, X, Xbar]` never exceeds zero.
fn negativity() -> Outcome {
    let pairs_per_point = 4;
    let mut worst = (f64::NEG_INFINITY, String::new());
    for (name, metric) in catalog() {
        let pts = sample(&metric, POINTS, 13)?;
        let n = metric.n;
        let mut rng = UnitStream::new(0xfeed);
        for e in evals(&metric, &pts)? {
            let scale = e.bundle.canonical.scale();
            for _ in 0..pairs_per_point {
                let h = rng.complex_vec(n, -1.0, 1.0);
                let x = rng.complex_vec(n, -1.0, 1.0);
                let d = (bilinear(&e.bundle.complexified, &h, &x) - bilinear(&e.bundle.canonical, &h, &x)).re / scale;
                if d > worst.0 {
                    worst = (d, name.clone());
                }
            }
        }
    }
    check(
        worst.0 <= 1e-10,
        format!(
            "{} pairs per metric, largest Re(K - R)/scale {:.2e} on {} (tol 1e-10)",
            POINTS * pairs_per_point,
            worst.0,
            worst.1
        ),
    )
}

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

fn szabo_structure() -> Outcome {
    let fs1 = HermitianData::fubini_study(1);
    let kahler = build_szabo(&HermitianData::fubini_study(2), &fs1, 1.0, 2.0).map_err(|e| e.to_string())?;
    let rho = NamedRho::ReZ1.scalar();
    let mixed = build_szabo(
        &HermitianData::conformal_flat(2, &rho).map_err(|e| e.to_string())?,
        &fs1,
        1.0,
        2.0,
    )
    .map_err(|e| e.to_string())?;
    let block = |i: usize| usize::from(i >= 2);
    let mut cross = 0.0f64;
    let mut kahler_defect = 0.0f64;
    let mut min_mixed = f64::INFINITY;
    for (metric, is_kahler) in [(&kahler, true), (&mixed, false)] {
        for e in evals(metric, &sample(metric, POINTS, 17)?)? {
            let h = e.geometry.chern_finsler_coeffs().horizontal;
            for a in 0..3 {
                for b in 0..3 {
                    for m in 0..3 {
                        if block(a) != block(b) || block(b) != block(m) {
                            cross = cross.max(h.get(&[a, b, m]).norm());
                        }
                    }
                }
            }
            let d = e.defects().kahler;
            if is_kahler {
                kahler_defect = kahler_defect.max(d);
            } else {
                min_mixed = min_mixed.min(d);
            }
        }
    }
    check(
        cross <= 1e-9 && kahler_defect <= 1e-8 && min_mixed > 1e-3,
        format!(
            "n = 3: cross-factor coefficients {cross:.1e}; FS(2)xFS(1) Kahler defect {kahler_defect:.1e}; \
             e^Re(z1)flat(2)xFS(1) min Kahler defect {min_mixed:.2e}"
        ),
    )
}

fn conformal_laws() -> Outcome {
    let mut failed = Vec::new();
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut rund_shift = 0.0f64;
    for base in [HermitianData::flat(2), HermitianData::fubini_study(2)] {
        let metric = build_hermitian(&base).map_err(|e| e.to_string())?;
        let pts = sample(&metric, POINTS, 23)?;
        for named_rho in [NamedRho::Constant(0.7), NamedRho::AbsZ1Squared, NamedRho::ReZ1Z2] {
            let rho = named_rho.scalar();
            for r in verify_conformal(&metric, &rho, &pts, Some(1e-7), MODE).map_err(|e| e.to_string())? {
                match r.verdict {
                    Verdict::Pass => {
                        checked += 1;
                        worst = worst.max(r.max_rel);
                    }
                    Verdict::Skipped => {}
                    Verdict::Fail => failed.push(format!("{} {} {} ({:.2e})", base.name, rho.name, r.name, r.max_rel)),
                }
            }
            if named_rho == NamedRho::ReZ1Z2 {
                let tilde = finsler_core::catalog::conformal_scale(&metric, &rho).map_err(|e| e.to_string())?;
                for (a, b) in evals(&metric, &pts)?.iter().zip(evals(&tilde, &pts)?) {
                    let ta = a.rund_like_tensor();
                    let tb = b.rund_like_tensor();
                    let shift = ta.iter().zip(&tb).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
                    rund_shift = rund_shift.max(shift);
                }
            }
        }
    }
    check(
        failed.is_empty() && rund_shift <= 1e-12,
        format!(
            "{checked} law checks, worst rel {worst:.2e} (tol 1e-7); Re(z1 z2) Rund-like tensor shift {rund_shift:.1e}{}",
            fail_list(&failed)
        ),
    )
}

fn balanced_implies_kahler() -> Outcome {
    let mut balanced = 0;
    let mut total = 0;
    let mut violations = Vec::new();
    for (name, metric) in catalog().into_iter().filter(|(_, m)| m.n == 2) {
        for e in evals(&metric, &sample(&metric, POINTS, 29)?)? {
            let d = e.defects();
            total += 1;
            if d.balanced <= 1e-8 {
                balanced += 1;
                if d.kahler > 1e-7 {
                    violations.push(format!("{name} (kahler {:.2e})", d.kahler));
                }
            }
        }
    }
    check(
        violations.is_empty() && balanced > 0,
        format!("{balanced} balanced of {total} points, all Kahler{}", fail_list(&violations)),
    )
}

fn torsion_square() -> Outcome {
    let inner = identity_on_catalog(Identity::TorsionSquare, 1e-8);
    let mut min_scalar = f64::INFINITY;
    for (_, metric) in catalog() {
        for e in evals(&metric, &sample(&metric, POINTS, 101)?)? {
            min_scalar = min_scalar.min(e.bundle.torsion_square.scalar.re);
        }
    }
    let tail = format!("min <S,S> {min_scalar:.2e} (floor -1e-12)");
    match inner {
        Ok(d) if min_scalar >= -1e-12 => Ok(format!("{d}; {tail}")),
        Ok(d) | Err(d) => Err(format!("{d}; {tail}")),
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("config.json");
    std::fs::write(
        &cfg,
        r#"{
  "metric": {"named": "conformal_randers"},
  "sample": {"count": 12, "seed": 2024},
  "tasks": ["eval", "classify", "verify", "theorem41"]
}"#,
    )
    .map_err(|e| e.to_string())?;
    // identical configs, so the same output path too; each report is read
    // back before the next run overwrites it
    let out = dir.path().join("report.json");
    let mut reports = Vec::new();
    for i in 0..2 {
        let status = Command::new(env!("CARGO_BIN_EXE_finsler-lab"))
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .map_err(|e| e.to_string())?;
        if status.code() != Some(0) {
            return Err(format!("run {i} exited with {status}"));
        }
        let text = std::fs::read_to_string(&out).map_err(|e| e.to_string())?;
        let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        value.as_object_mut().map(|o| o.remove("timing"));
        reports.push(serde_json::to_vec_pretty(&value).map_err(|e| e.to_string())?);
    }
    check(
        reports[0] == reports[1],
        format!("two CLI runs, {} bytes each without timing, identical: {}", reports[0].len(), reports[0] == reports[1]),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("oracle agreement", oracle_agreement),
        ("homogeneity", || identity_on_catalog(Identity::Homogeneity, 1e-10)),
        ("flat vanishing", flat_vanishing),
        ("Ricci identity", || identity_on_catalog(Identity::RicciIdentity, 1e-7)),
        ("Kahler and weak Kahler witness", theorem_41),
        ("negativity of the difference form", negativity),
        ("Szabo block structure", szabo_structure),
        ("conformal laws", conformal_laws),
        ("balanced implies Kahler for n = 2", balanced_implies_kahler),
        ("torsion square contractions", torsion_square),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (title, f)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {title}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {:>2} FAIL {title}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
