//! Constructors for the built-in metric families.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FinslerError, Result};
use crate::expr::{Expr, MetricExpr, ScalarExpr, Slot};
use crate::point::Point;

/// Hermitian matrix `h_{a b-bar}(z, zbar)` given entrywise, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianData {
    pub name: String,
    pub n: usize,
    pub entries: Vec<Expr>,
}

impl HermitianData {
    pub fn new(name: impl Into<String>, n: usize, entries: Vec<Expr>) -> Result<Self> {
        if entries.len() != n * n || n == 0 {
            return Err(FinslerError::DimensionMismatch(format!(
                "{} entries for an {n} x {n} matrix",
                entries.len()
            )));
        }
        for e in &entries {
            e.validate(n)?;
            if e.uses_slot(Slot::V) || e.uses_slot(Slot::Vbar) {
                return Err(FinslerError::InvalidExpression(
                    "Hermitian data must depend on z only".into(),
                ));
            }
        }
        Ok(HermitianData {
            name: name.into(),
            n,
            entries,
        })
    }

    pub fn entry(&self, a: usize, b: usize) -> &Expr {
        &self.entries[a * self.n + b]
    }

    pub fn flat(n: usize) -> Self {
        let entries = (0..n * n)
            .map(|k| Expr::real(if k / n == k % n { 1.0 } else { 0.0 }))
            .collect();
        HermitianData::new(format!("flat({n})"), n, entries).expect("valid by construction")
    }

    /// `e^rho` times the identity.
    pub fn conformal_flat(n: usize, rho: &ScalarExpr) -> Result<Self> {
        let factor = rho.expr.clone().exp();
        let entries = (0..n * n)
            .map(|k| {
                if k / n == k % n {
                    factor.clone()
                } else {
                    Expr::real(0.0)
                }
            })
            .collect();
        HermitianData::new(format!("exp({})*flat({n})", rho.name), n, entries)
    }

    /// Fubini-Study metric in an affine chart.
    pub fn fubini_study(n: usize) -> Self {
        let s = Expr::real(1.0)
            + Expr::sum((1..=n).map(|a| Expr::z(a) * Expr::zbar(a)).collect());
        let mut entries = Vec::with_capacity(n * n);
        for a in 1..=n {
            for b in 1..=n {
                let num = if a == b {
                    s.clone() - Expr::zbar(a) * Expr::z(b)
                } else {
                    -(Expr::zbar(a) * Expr::z(b))
                };
                entries.push(num / s.clone().pow(2.0));
            }
        }
        HermitianData::new(format!("fubini_study({n})"), n, entries).expect("valid by construction")
    }

    /// Numeric Hermitian residual `max |h_ab - conj(h_ba)|` at `z`.
    pub fn hermitian_residual(&self, z: &[Complex64]) -> Result<f64> {
        let p = Point::new(z.to_vec(), vec![Complex64::new(1.0, 0.0); self.n])?;
        let x = p.polarized();
        let mut worst: f64 = 0.0;
        for a in 0..self.n {
            for b in 0..self.n {
                let ab = self.entry(a, b).eval(&x)?;
                let ba = self.entry(b, a).eval(&x)?;
                worst = worst.max((ab - ba.conj()).norm());
            }
        }
        Ok(worst)
    }

    /// `sum h_ab v^a vbar^b` with variables shifted by `offset`.
    fn quadratic_form(&self, offset: usize) -> Expr {
        let mut terms = Vec::new();
        for a in 0..self.n {
            for b in 0..self.n {
                let h = self.entry(a, b);
                if matches!(h, Expr::Const { re, im } if *re == 0.0 && *im == 0.0) {
                    continue;
                }
                let h = h.shift_indices(offset);
                let term = Expr::v(a + 1 + offset) * Expr::vbar(b + 1 + offset);
                terms.push(match h {
                    Expr::Const { re, im } if re == 1.0 && im == 0.0 => term,
                    h => h * term,
                });
            }
        }
        Expr::sum(terms)
    }
}

/// `G = sum h_ab(z) v^a vbar^b`.
pub fn build_hermitian(h: &HermitianData) -> Result<MetricExpr> {
    MetricExpr::new(h.name.clone(), h.n, h.quadratic_form(0), vec![])
}

fn fiber_norm(offset: usize, n: usize) -> Expr {
    Expr::sum(
        (1..=n)
            .map(|a| Expr::v(a + offset) * Expr::vbar(a + offset))
            .collect(),
    )
    .sqrt()
}

/// Product metric `H1 + H2 + eps (H1^k + H2^k)^(1/k)` on the product of
/// the two factors, `H_i` being the Hermitian quadratic forms.
pub fn build_szabo(h1: &HermitianData, h2: &HermitianData, eps: f64, k: f64) -> Result<MetricExpr> {
    if !(eps > 0.0) || !(k > 0.0) {
        return Err(FinslerError::InvalidParameter(format!(
            "Szabo metric needs eps > 0 and k > 0, got eps = {eps}, k = {k}"
        )));
    }
    let n = h1.n + h2.n;
    let q1 = h1.quadratic_form(0);
    let q2 = h2.quadratic_form(h1.n);
    let root = (q1.clone().pow(k) + q2.clone().pow(k)).pow(1.0 / k);
    let g = q1 + q2 + Expr::real(eps) * root;
    let singular = if k.fract() == 0.0 {
        vec![]
    } else {
        vec![fiber_norm(0, h1.n), fiber_norm(h1.n, h2.n)]
    };
    MetricExpr::new(
        format!("szabo({}, {}, eps={eps}, k={k})", h1.name, h2.name),
        n,
        g,
        singular,
    )
}

/// `G = (alpha + |beta|)^2` with `alpha^2 = h(v, v)` and `beta = b_a v^a`.
pub fn build_randers(h: &HermitianData, b: &[Expr]) -> Result<MetricExpr> {
    if b.len() != h.n {
        return Err(FinslerError::DimensionMismatch(format!(
            "one-form has {} components for n = {}",
            b.len(),
            h.n
        )));
    }
    for c in b {
        c.validate(h.n)?;
        if c.uses_slot(Slot::V) || c.uses_slot(Slot::Vbar) {
            return Err(FinslerError::InvalidExpression(
                "one-form coefficients must depend on z only".into(),
            ));
        }
    }
    // A vanishing one-form leaves the Hermitian metric, whose square root
    // would otherwise sit on the singular locus everywhere.
    if b.iter().all(|c| matches!(c, Expr::Const { re, im } if *re == 0.0 && *im == 0.0)) {
        return build_hermitian(h);
    }
    let alpha = h.quadratic_form(0).sqrt();
    let beta = Expr::sum(
        b.iter()
            .enumerate()
            .map(|(a, c)| c.clone() * Expr::v(a + 1))
            .collect(),
    );
    let abs_beta = (beta.clone() * beta.conj()).sqrt();
    let g = (alpha + abs_beta).pow(2.0);
    MetricExpr::new(format!("randers({})", h.name), h.n, g, vec![beta])
}

/// Fixed consistent points used to reject non-real conformal exponents.
fn probe_points(n: usize) -> Vec<Point> {
    [(0.0, 0.0), (0.31, -0.17), (-0.43, 0.29)]
        .iter()
        .map(|&(re, im)| {
            let z = (0..n)
                .map(|a| Complex64::new(re * (a + 1) as f64, im - 0.05 * a as f64))
                .collect();
            Point::new(z, vec![Complex64::new(1.0, 0.0); n]).expect("probe point")
        })
        .collect()
}

/// `e^rho G`.
pub fn conformal_scale(g: &MetricExpr, rho: &ScalarExpr) -> Result<MetricExpr> {
    rho.expr.validate(g.n)?;
    for p in probe_points(g.n) {
        let r = rho.expr.eval(&p.polarized())?;
        if r.im.abs() > 1e-12 * (1.0 + r.re.abs()) {
            return Err(FinslerError::InvalidParameter(format!(
                "conformal exponent `{}` is not real: {r}",
                rho.name
            )));
        }
    }
    MetricExpr::new(
        format!("exp({})*{}", rho.name, g.name),
        g.n,
        rho.expr.clone().exp() * g.expr.clone(),
        g.singular.clone(),
    )
}

/// Named real scalar functions of `z` used as conformal exponents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedRho {
    Constant(f64),
    /// `|z^1|^2`
    AbsZ1Squared,
    /// `Re z^1`
    ReZ1,
    /// `Re(z^1 z^2)`
    ReZ1Z2,
    /// `Im(z^1 z^2)`
    ImZ1Z2,
}

impl NamedRho {
    pub fn scalar(&self) -> ScalarExpr {
        let (name, expr) = match self {
            NamedRho::Constant(c) => (format!("{c}"), Expr::real(*c)),
            NamedRho::AbsZ1Squared => ("|z1|^2".into(), Expr::z(1) * Expr::zbar(1)),
            NamedRho::ReZ1 => ("Re(z1)".into(), Expr::real(0.5) * (Expr::z(1) + Expr::zbar(1))),
            NamedRho::ReZ1Z2 => (
                "Re(z1*z2)".into(),
                Expr::real(0.5) * (Expr::z(1) * Expr::z(2) + Expr::zbar(1) * Expr::zbar(2)),
            ),
            NamedRho::ImZ1Z2 => (
                "Im(z1*z2)".into(),
                Expr::complex(Complex64::new(0.0, -0.5))
                    * (Expr::z(1) * Expr::z(2) - Expr::zbar(1) * Expr::zbar(2)),
            ),
        };
        ScalarExpr::new(name, expr).expect("named exponents are z-only")
    }

    /// Smallest dimension the exponent makes sense in.
    pub fn min_dim(&self) -> usize {
        match self {
            NamedRho::ReZ1Z2 | NamedRho::ImZ1Z2 => 2,
            _ => 1,
        }
    }
}

/// A conformal exponent: either a named one or an inline expression.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RhoSpec {
    Named(NamedRho),
    Inline(Expr),
}

impl RhoSpec {
    pub fn scalar(&self) -> Result<ScalarExpr> {
        match self {
            RhoSpec::Named(r) => Ok(r.scalar()),
            RhoSpec::Inline(e) => ScalarExpr::new("rho", e.clone()),
        }
    }
}

/// Hermitian building blocks available by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HermitianSpec {
    Flat { n: usize },
    FubiniStudy { n: usize },
    ConformalFlat { n: usize, rho: RhoSpec },
}

impl HermitianSpec {
    pub fn build(&self) -> Result<HermitianData> {
        match self {
            HermitianSpec::Flat { n } => Ok(HermitianData::flat(*n)),
            HermitianSpec::FubiniStudy { n } => Ok(HermitianData::fubini_study(*n)),
            HermitianSpec::ConformalFlat { n, rho } => HermitianData::conformal_flat(*n, &rho.scalar()?),
        }
    }
}

/// Catalog metrics addressable from configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CatalogMetric {
    Hermitian {
        h: HermitianSpec,
    },
    Szabo {
        h1: HermitianSpec,
        h2: HermitianSpec,
        epsilon: f64,
        k: f64,
    },
    Randers {
        h: HermitianSpec,
        b: Vec<Expr>,
    },
    Conformal {
        base: Box<CatalogMetric>,
        rho: RhoSpec,
    },
}

impl CatalogMetric {
    pub fn build(&self) -> Result<MetricExpr> {
        match self {
            CatalogMetric::Hermitian { h } => build_hermitian(&h.build()?),
            CatalogMetric::Szabo { h1, h2, epsilon, k } => {
                build_szabo(&h1.build()?, &h2.build()?, *epsilon, *k)
            }
            CatalogMetric::Randers { h, b } => build_randers(&h.build()?, b),
            CatalogMetric::Conformal { base, rho } => conformal_scale(&base.build()?, &rho.scalar()?),
        }
    }

    /// One-line parameter documentation per family.
    pub fn families() -> Vec<(&'static str, &'static str)> {
        vec![
            (
                "hermitian",
                "h: {kind: flat|fubini_study|conformal_flat, n, rho?}; G = h(z)(v, v)",
            ),
            (
                "szabo",
                "h1, h2: Hermitian factors; epsilon > 0; k > 0; G = H1 + H2 + epsilon (H1^k + H2^k)^(1/k)",
            ),
            (
                "randers",
                "h: Hermitian factor; b: one-form components as expressions in z; G = (alpha + |beta|)^2",
            ),
            (
                "conformal",
                "base: catalog metric; rho: constant | abs_z1_squared | re_z1 | re_z1_z2 | im_z1_z2 | expression; G = e^rho G_base",
            ),
        ]
    }
}

/// The labelled metrics exercised by the test suites and the `catalog`
/// subcommand.
pub fn standard_catalog() -> Vec<(String, CatalogMetric)> {
    use CatalogMetric as C;
    use HermitianSpec as H;
    let re_z1 = RhoSpec::Named(NamedRho::ReZ1);
    let abs_z1 = RhoSpec::Named(NamedRho::AbsZ1Squared);
    vec![
        ("flat".into(), C::Hermitian { h: H::Flat { n: 2 } }),
        ("fubini_study".into(), C::Hermitian { h: H::FubiniStudy { n: 2 } }),
        (
            "conformal_re_z1".into(),
            C::Hermitian {
                h: H::ConformalFlat { n: 2, rho: re_z1.clone() },
            },
        ),
        (
            "conformal_abs_z1".into(),
            C::Hermitian {
                h: H::ConformalFlat { n: 2, rho: abs_z1 },
            },
        ),
        (
            "szabo_k1".into(),
            C::Szabo {
                h1: H::FubiniStudy { n: 1 },
                h2: H::Flat { n: 1 },
                epsilon: 0.5,
                k: 1.0,
            },
        ),
        (
            "szabo_k2".into(),
            C::Szabo {
                h1: H::FubiniStudy { n: 1 },
                h2: H::Flat { n: 1 },
                epsilon: 1.0,
                k: 2.0,
            },
        ),
        (
            "randers_const".into(),
            C::Randers {
                h: H::Flat { n: 2 },
                b: vec![Expr::real(0.3), Expr::real(0.2)],
            },
        ),
        (
            "randers_variable".into(),
            C::Randers {
                h: H::Flat { n: 2 },
                b: vec![Expr::real(0.3), Expr::real(0.2) * Expr::z(1)],
            },
        ),
        (
            "conformal_randers".into(),
            C::Conformal {
                base: Box::new(C::Randers {
                    h: H::Flat { n: 2 },
                    b: vec![Expr::real(0.25), Expr::real(0.0)],
                }),
                rho: re_z1,
            },
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn flat_metric_is_sum_of_squares() {
        let g = build_hermitian(&HermitianData::flat(2)).unwrap();
        let p = Point::new(vec![c(0.5, 0.5); 2], vec![c(1.0, 1.0), c(0.0, 2.0)]).unwrap();
        assert!((g.eval(&p).unwrap() - c(6.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn szabo_k2_value() {
        let g = build_szabo(&HermitianData::flat(1), &HermitianData::flat(1), 1.0, 2.0).unwrap();
        let p = Point::new(vec![c(0.2, 0.0); 2], vec![c(1.0, 0.0); 2]).unwrap();
        let want = 2.0 + 2f64.sqrt();
        assert!((g.eval(&p).unwrap() - c(want, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn szabo_k1_collapses() {
        let h1 = HermitianData::fubini_study(1);
        let h2 = HermitianData::flat(1);
        let g = build_szabo(&h1, &h2, 0.5, 1.0).unwrap();
        let p = Point::new(vec![c(0.3, -0.1), c(0.2, 0.0)], vec![c(0.4, 0.9), c(-1.0, 0.3)]).unwrap();
        let h = build_hermitian(&h1).unwrap();
        let p1 = Point::new(vec![p.z[0]], vec![p.v[0]]).unwrap();
        let want = 1.5 * (h.eval(&p1).unwrap() + p.v[1].norm_sqr());
        assert!((g.eval(&p).unwrap() - want).norm() < 1e-14);
        assert!(g.singular.is_empty());
        assert!(build_szabo(&h1, &h2, 0.0, 1.0).is_err());
        assert_eq!(build_szabo(&h1, &h2, 1.0, 1.5).unwrap().singular.len(), 2);
    }

    #[test]
    fn randers_value_and_reduction() {
        let h = HermitianData::flat(2);
        let g = build_randers(&h, &[Expr::real(0.4), Expr::real(0.0)]).unwrap();
        let p = Point::new(vec![c(0.7, 0.2); 2], vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!((g.eval(&p).unwrap() - c(1.96, 0.0)).norm() < 1e-14);
        let g0 = build_randers(&h, &[Expr::real(0.0), Expr::real(0.0)]).unwrap();
        let q = Point::new(vec![c(0.7, 0.2); 2], vec![c(1.0, 0.5), c(0.3, 0.0)]).unwrap();
        assert!((g0.eval(&q).unwrap() - c(1.34, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn fubini_study_at_origin_is_identity() {
        let h = HermitianData::fubini_study(2);
        let x = Point::new(vec![c(0.0, 0.0); 2], vec![c(1.0, 0.0); 2]).unwrap().polarized();
        for a in 0..2 {
            for b in 0..2 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((h.entry(a, b).eval(&x).unwrap() - c(want, 0.0)).norm() < 1e-15);
            }
        }
        assert!(h.hermitian_residual(&[c(0.3, 0.1), c(-0.2, 0.5)]).unwrap() < 1e-15);
    }

    #[test]
    fn conformal_rejects_complex_exponent() {
        let g = build_hermitian(&HermitianData::flat(2)).unwrap();
        let bad = ScalarExpr::new("z1", Expr::z(1)).unwrap();
        assert!(conformal_scale(&g, &bad).is_err());
        let ok = conformal_scale(&g, &NamedRho::ImZ1Z2.scalar()).unwrap();
        assert_eq!(ok.n, 2);
    }

    #[test]
    fn catalog_round_trips_and_builds() {
        for (label, m) in standard_catalog() {
            let text = serde_json::to_string(&m).unwrap();
            let back: CatalogMetric = serde_json::from_str(&text).unwrap();
            assert_eq!(back, m, "{label}");
            back.build().unwrap();
        }
    }
}
