//! Classification predicates, the identity harness and the conformal law
//! checks. Everything is pointwise over an accepted sample; nothing here
//! certifies a global property of a metric.

mod conformal;
mod identities;

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::curvature::{Assembly, CurvatureBundle};
use crate::error::{FinslerError, Result};
use crate::exec::ExecMode;
use crate::expr::MetricExpr;
use crate::geometry::{Geometry, Torsions};
use crate::jets::{eval_jet, JetIndex, OrderBound};
use crate::oracle::FdOracle;
use crate::point::Point;
use crate::sampling::UnitStream;

pub use conformal::{verify_conformal, ConformalLaw};
pub use identities::{flag_difference_terms, verify_all, verify_identity, Identity, FLAG_DIFFERENCE_COEFF};

/// Default tolerance on classification defects.
pub const CLASSIFY_TOL: f64 = 1e-8;

/// Everything the harness needs at one point.
pub struct PointEval {
    pub geometry: Geometry,
    pub bundle: CurvatureBundle,
    pub torsions: Torsions,
}

impl PointEval {
    pub fn new(metric: &MetricExpr, p: &Point) -> Result<Self> {
        let geometry = Geometry::new(&eval_jet(metric, p, OrderBound::default())?)?;
        let bundle = CurvatureBundle::compute(&geometry)?;
        let torsions = geometry.torsions();
        Ok(PointEval {
            geometry,
            bundle,
            torsions,
        })
    }

    pub fn assembly(&self) -> Result<Assembly<'_>> {
        Assembly::new(&self.geometry)
    }

    pub fn point(&self) -> &Arc<Point> {
        self.geometry.point()
    }

    /// `delta_nubar(S^a_{b mu})` read off the Rund curvature, `[a][b][mu][nu]`.
    pub fn rund_like_tensor(&self) -> Vec<Complex64> {
        let h = &self.bundle.rund.horizontal;
        let n = self.geometry.n();
        let mut out = Vec::with_capacity(n.pow(4));
        for a in 0..n {
            for b in 0..n {
                for mu in 0..n {
                    for nu in 0..n {
                        out.push(0.5 * (h.get(&[a, mu, b, nu]) - h.get(&[a, b, mu, nu])));
                    }
                }
            }
        }
        out
    }

    pub fn defects(&self) -> DefectVector {
        let max = |it: &mut dyn Iterator<Item = Complex64>| it.map(|c| c.norm()).fold(0.0, f64::max);
        let t = &self.torsions;
        DefectVector {
            kahler: 2.0 * t.horizontal.max_abs(),
            weakly_kahler: t.weak_kahler.max_abs(),
            balanced: t.trace.max_abs(),
            rund_like: max(&mut self.rund_like_tensor().into_iter()),
            min_eigenvalue: self.geometry.frame().eigenvalues[0],
        }
    }
}

/// Pointwise torsion defects and the smallest Levi eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectVector {
    /// `max |Gamma^a_{b;mu} - Gamma^a_{mu;b}|`
    pub kahler: f64,
    /// `max |G_a (Gamma^a_{b;mu} - Gamma^a_{mu;b}) v^b|`
    pub weakly_kahler: f64,
    /// `max |S_a|`
    pub balanced: f64,
    /// `max |delta_nubar(S^a_{b mu})|`
    pub rund_like: f64,
    pub min_eigenvalue: f64,
}

impl DefectVector {
    fn worst(self, o: DefectVector) -> DefectVector {
        DefectVector {
            kahler: self.kahler.max(o.kahler),
            weakly_kahler: self.weakly_kahler.max(o.weakly_kahler),
            balanced: self.balanced.max(o.balanced),
            rund_like: self.rund_like.max(o.rund_like),
            min_eigenvalue: self.min_eigenvalue.min(o.min_eigenvalue),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Classification {
    pub points: usize,
    pub tol: f64,
    pub per_point: Vec<DefectVector>,
    pub aggregate: DefectVector,
    pub kahler_at_all_points: bool,
    pub weakly_kahler_at_all_points: bool,
    pub balanced_at_all_points: bool,
    pub rund_like_at_all_points: bool,
    pub strongly_pseudoconvex_at_all_points: bool,
    pub summary: String,
}

pub fn defects_over(metric: &MetricExpr, sample: &[Point], mode: ExecMode) -> Result<Vec<DefectVector>> {
    mode.map(sample, |p| PointEval::new(metric, p).map(|e| e.defects()))
        .into_iter()
        .collect()
}

pub fn classify(metric: &MetricExpr, sample: &[Point], tol: f64, mode: ExecMode) -> Result<Classification> {
    if sample.is_empty() {
        return Err(FinslerError::InvalidParameter("classification needs at least one accepted point".into()));
    }
    let per_point = defects_over(metric, sample, mode)?;
    let aggregate = per_point[1..].iter().fold(per_point[0], |a, &d| a.worst(d));
    let holds = [
        ("Kahler-Finsler", aggregate.kahler <= tol),
        ("weakly Kahler-Finsler", aggregate.weakly_kahler <= tol),
        ("balanced", aggregate.balanced <= tol),
        ("Rund Kahler-Finsler-like", aggregate.rund_like <= tol),
        ("strongly pseudoconvex", aggregate.min_eigenvalue > 0.0),
    ];
    let names: Vec<&str> = holds.iter().filter(|(_, ok)| *ok).map(|(s, _)| *s).collect();
    let summary = if names.is_empty() {
        format!("no property holds pointwise at all {} sampled points", sample.len())
    } else {
        format!("pointwise {} at all {} sampled points", names.join(", "), sample.len())
    };
    Ok(Classification {
        points: sample.len(),
        tol,
        kahler_at_all_points: holds[0].1,
        weakly_kahler_at_all_points: holds[1].1,
        balanced_at_all_points: holds[2].1,
        rund_like_at_all_points: holds[3].1,
        strongly_pseudoconvex_at_all_points: holds[4].1,
        per_point,
        aggregate,
        summary,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub name: String,
    /// The relation checked, written out.
    pub anchor: String,
    pub points: usize,
    pub max_abs: f64,
    pub max_rel: f64,
    pub tol: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped_reason: Option<String>,
}

impl IdentityReport {
    fn from_residual(name: &str, anchor: &str, points: usize, r: Residual, tol: f64) -> Self {
        IdentityReport {
            name: name.to_string(),
            anchor: anchor.to_string(),
            points,
            max_abs: r.max_abs,
            max_rel: r.max_rel,
            tol,
            verdict: if r.max_rel <= tol { Verdict::Pass } else { Verdict::Fail },
            skipped_reason: None,
        }
    }

    fn skipped(name: &str, anchor: &str, points: usize, tol: f64, reason: String) -> Self {
        IdentityReport {
            name: name.to_string(),
            anchor: anchor.to_string(),
            points,
            max_abs: 0.0,
            max_rel: 0.0,
            tol,
            verdict: Verdict::Skipped,
            skipped_reason: Some(reason),
        }
    }

    /// Re-judges the stored residual against a different tolerance.
    pub fn retolerate(&mut self, tol: f64) {
        self.tol = tol;
        if self.verdict != Verdict::Skipped {
            self.verdict = if self.max_rel <= tol { Verdict::Pass } else { Verdict::Fail };
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }
}

/// Running maximum of absolute and scale-relative residuals.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Residual {
    pub max_abs: f64,
    pub max_rel: f64,
}

impl Residual {
    /// Record `|lhs - rhs|` against `scale`; NaN counts as infinite.
    pub fn push(&mut self, abs: f64, scale: f64) {
        let abs = if abs.is_nan() { f64::INFINITY } else { abs };
        self.max_abs = self.max_abs.max(abs);
        self.max_rel = self.max_rel.max(abs / scale.max(1.0));
    }

    /// Compare two equally indexed arrays with scale `1 + max |entry|`.
    pub fn push_arrays(&mut self, lhs: &[Complex64], rhs: &[Complex64]) {
        let scale = 1.0 + lhs.iter().chain(rhs).map(|c| c.norm()).fold(0.0, f64::max);
        for (a, b) in lhs.iter().zip(rhs) {
            self.push((a - b).norm(), scale);
        }
    }

    pub fn merge(self, o: Residual) -> Residual {
        Residual {
            max_abs: self.max_abs.max(o.max_abs),
            max_rel: self.max_rel.max(o.max_rel),
        }
    }
}

/// Deterministic complex test vectors for the point at `index`.
/// Highest total order the finite-difference oracle is trusted at. Nested
/// central differences of order five and up hit a round-off floor near
/// `1e-4` before their truncation error is small.
pub const ORACLE_MAX_ORDER: u32 = 4;

/// Jet entries at `p` up to `max_order` against the finite-difference
/// oracle, relative to `max(1, |entry|)`. Also returns the worst entry.
pub fn oracle_residual(
    metric: &MetricExpr,
    p: &Point,
    bound: OrderBound,
    max_order: u32,
) -> Result<(Residual, Option<JetIndex>)> {
    let table = eval_jet(metric, p, bound)?;
    let top = max_order.min(bound.total());
    let mut oracle = FdOracle::for_metric(metric, p, top as usize)?;
    let mut r = Residual::default();
    let mut worst = None;
    for (idx, value) in table.entries().into_iter().filter(|(i, _)| i.order() <= top) {
        let fd = oracle.partial(&idx)?;
        let before = r.max_rel;
        r.push((value - fd).norm(), value.norm());
        if r.max_rel > before {
            worst = Some(idx);
        }
    }
    Ok((r, worst))
}

pub(crate) fn test_vectors(index: usize, n: usize, count: usize) -> Vec<Vec<Complex64>> {
    let mut s = UnitStream::new(0x5eed_0000_0000_0000 ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    (0..count).map(|_| s.complex_vec(n, -1.0, 1.0)).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WitnessRow {
    pub index: usize,
    pub kahler_defect: f64,
    /// `max |R - Omega| / (1 + max |Omega|)`
    pub curvature_gap: f64,
    pub kahler_consistent: bool,
    pub weakly_kahler_defect: f64,
    /// `K_canonical(v) - K_chern(v)`
    pub sectional_gap: f64,
    pub weakly_kahler_consistent: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Theorem41Witness {
    pub tol: f64,
    pub rows: Vec<WitnessRow>,
    pub consistent: bool,
    pub verdict: String,
    pub counterexamples: Vec<(Point, WitnessRow)>,
}

/// Checks pointwise that a vanishing Kahler defect coincides with `R = Omega`
/// and a vanishing weak Kahler defect with equal sectional curvatures.
///
/// The sectional gap is quadratic in the weak defect, so it is compared
/// against `tol` while the defect is compared against `sqrt(tol)`.
pub fn theorem_41_witness(metric: &MetricExpr, sample: &[Point], tol: f64, mode: ExecMode) -> Result<Theorem41Witness> {
    let rows: Vec<WitnessRow> = mode
        .map_indexed(sample, |index, p| -> Result<WitnessRow> {
            let e = PointEval::new(metric, p)?;
            let d = e.defects();
            let om = &e.bundle.chern.horizontal;
            let curvature_gap = e.bundle.canonical.max_diff(om)? / om.scale();
            let sectional_gap = crate::curvature::sectional_curvature(&e.geometry, &e.bundle.canonical)
                - crate::curvature::sectional_curvature(&e.geometry, om);
            Ok(WitnessRow {
                index,
                kahler_defect: d.kahler,
                curvature_gap,
                kahler_consistent: (d.kahler <= tol) == (curvature_gap <= tol),
                weakly_kahler_defect: d.weakly_kahler,
                sectional_gap,
                weakly_kahler_consistent: (d.weakly_kahler <= tol.sqrt()) == (sectional_gap.abs() <= tol),
            })
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let counterexamples: Vec<(Point, WitnessRow)> = rows
        .iter()
        .filter(|r| !(r.kahler_consistent && r.weakly_kahler_consistent))
        .map(|r| (sample[r.index].clone(), r.clone()))
        .collect();
    let consistent = counterexamples.is_empty();
    Ok(Theorem41Witness {
        tol,
        verdict: if consistent {
            format!("consistent at all {} points", rows.len())
        } else {
            format!("{} counterexample points", counterexamples.len())
        },
        rows,
        consistent,
        counterexamples,
    })
}
