//! The registered pointwise identities.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{defects_over, test_vectors, IdentityReport, PointEval, Residual, CLASSIFY_TOL};
use crate::curvature::{canonical_curvature_fd, conjugate_symmetry_defect, quartic, sectional_curvature};
use crate::error::{FinslerError, Result};
use crate::exec::ExecMode;
use crate::expr::MetricExpr;
use crate::geometry::Geometry;
use crate::jets::{eval_jet, OrderBound};
use crate::oracle::field_gradient;
use crate::point::Point;
use crate::series::Family;

type DefectField = fn(&super::DefectVector) -> f64;

/// Step of the finite-difference gradients of derived fields.
pub const FIELD_STEP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Identity {
    Homogeneity,
    ConjugateSymmetry,
    FlagDifference,
    SectionalDifference,
    RicciIdentity,
    TorsionSquare,
    Negativity,
    TorsionTrace,
    DdbarFundamentalForm,
    RundLikeTorsionSquare,
    Codifferential,
    BalancedContractions,
    CanonicalCoefficientForm,
    ComplexifiedAsymmetry,
}

impl Identity {
    pub const ALL: [Identity; 14] = [
        Identity::Homogeneity,
        Identity::ConjugateSymmetry,
        Identity::FlagDifference,
        Identity::SectionalDifference,
        Identity::RicciIdentity,
        Identity::TorsionSquare,
        Identity::Negativity,
        Identity::TorsionTrace,
        Identity::DdbarFundamentalForm,
        Identity::RundLikeTorsionSquare,
        Identity::Codifferential,
        Identity::BalancedContractions,
        Identity::CanonicalCoefficientForm,
        Identity::ComplexifiedAsymmetry,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Identity::Homogeneity => "homogeneity",
            Identity::ConjugateSymmetry => "conjugate_symmetry",
            Identity::FlagDifference => "flag_difference",
            Identity::SectionalDifference => "sectional_difference",
            Identity::RicciIdentity => "ricci_identity",
            Identity::TorsionSquare => "torsion_square",
            Identity::Negativity => "negativity",
            Identity::TorsionTrace => "torsion_trace",
            Identity::DdbarFundamentalForm => "ddbar_fundamental_form",
            Identity::RundLikeTorsionSquare => "rund_like_torsion_square",
            Identity::Codifferential => "codifferential",
            Identity::BalancedContractions => "balanced_contractions",
            Identity::CanonicalCoefficientForm => "canonical_coefficient_form",
            Identity::ComplexifiedAsymmetry => "complexified_asymmetry",
        }
    }

    /// Short letter alias accepted on the command line.
    pub fn letter(self) -> char {
        (b'a' + Identity::ALL.iter().position(|&i| i == self).unwrap() as u8) as char
    }

    pub fn parse(s: &str) -> Result<Identity> {
        Identity::ALL
            .into_iter()
            .find(|i| i.name() == s || (s.len() == 1 && s.starts_with(i.letter())))
            .ok_or_else(|| FinslerError::Unknown(format!("identity `{s}`")))
    }

    pub fn anchor(self) -> &'static str {
        match self {
            Identity::Homogeneity => "G(z, t v) = |t|^2 G(z, v); G_a v^a = G; G_{a b-bar} v^a vbar^b = G; G_{ab} v^b = 0",
            Identity::ConjugateSymmetry => "conj(T_{a b-bar mu nu-bar}) = T_{b a-bar nu mu-bar} for Omega, R, K",
            Identity::FlagDifference => "(R - Omega)[H,H,H,H] = -1/4 H^a Hbar^nu [delta_nubar G_{a l-bar} - delta_lbar G_{a nu-bar}] G^{l-bar g} [delta_mu G_{g b-bar} - delta_g G_{mu b-bar}] Hbar^b H^mu",
            Identity::SectionalDifference => "(R - Omega)[v,v,v,v] = -1/4 conj(X_l) G^{l-bar g} X_g, X_g = chi(G_g) - G_{;g} = -G_a (Gamma^a_{b;g} - Gamma^a_{g;b}) v^b",
            Identity::RicciIdentity => "Omega_{mu nu-bar} = R_{mu nu-bar} + delta_nubar(S_mu) + delta_mu(S_nubar)",
            Identity::TorsionSquare => "K_{mu nu-bar} = R_{mu nu-bar} - (S o Sbar)_{mu nu-bar}; s_K = s_R - <S, S> >= 0",
            Identity::Negativity => "Re (K - R)[H, Hbar, X, Xbar] <= 0",
            Identity::TorsionTrace => "G^{b-bar a} L^g_{a b-bar} G_{g l-bar} = S_lbar = -L^g_{g l-bar}",
            Identity::DdbarFundamentalForm => "1/4 [delta_mu delta_bbar G_{a nu-bar} + delta_a delta_nubar G_{mu b-bar} - delta_a delta_bbar G_{mu nu-bar} - delta_mu delta_nubar G_{a b-bar}], series vs finite differences",
            Identity::RundLikeTorsionSquare => "[delta_mu delta_bbar G_{a nu-bar} - delta_mu delta_nubar G_{a b-bar}] + [delta_a delta_nubar G_{mu b-bar} - delta_a delta_bbar G_{mu nu-bar}] = -4 G_{g l-bar} S^g_{a mu} conj(S^l_{b nu})",
            Identity::Codifferential => "2i delta_nubar(S_mu) and 2i delta_mu(S_nubar), series vs finite differences",
            Identity::BalancedContractions => "G^{b-bar a} [delta_mu delta_bbar G_{a nu-bar} - delta_mu delta_nubar G_{a b-bar}] = 2 G^{b-bar a} G^{l-bar g} delta_mu(G_{a l-bar}) conj(S_{nu b g-bar}), its mirror, and the full trace = -4 <S, S>",
            Identity::CanonicalCoefficientForm => "R from the expanded Levi-matrix formula = [delta_mu L^g_{a nu-bar} - delta_nubar L^g_{a mu} + L L - L L] G_{g b-bar} - G_{a b-bar s} delta_nubar(Gamma^s_{;mu}) with finite-difference outer derivatives",
            Identity::ComplexifiedAsymmetry => "K_{a b-bar mu nu-bar} - K_{mu nu-bar a b-bar} = 1/2 [[delta_a, delta_bbar] G_{mu nu-bar} - [delta_mu, delta_nubar] G_{a b-bar} + [delta_a, delta_nubar] G_{mu b-bar} - [delta_mu, delta_bbar] G_{a nu-bar}] + delta_a(Gamma^tbar_{;bbar}) G_{mu nu-bar t-bar} - delta_mu(Gamma^tbar_{;nubar}) G_{a b-bar t-bar}",
        }
    }

    pub fn default_tol(self) -> f64 {
        match self {
            Identity::Homogeneity => 1e-10,
            Identity::ConjugateSymmetry => 1e-9,
            Identity::FlagDifference => 1e-8,
            Identity::SectionalDifference => 1e-8,
            Identity::RicciIdentity => 1e-7,
            Identity::TorsionSquare => 1e-8,
            Identity::Negativity => 1e-10,
            Identity::TorsionTrace => 1e-9,
            Identity::DdbarFundamentalForm => 1e-4,
            Identity::RundLikeTorsionSquare => 1e-8,
            Identity::Codifferential => 1e-4,
            Identity::BalancedContractions => 1e-7,
            Identity::CanonicalCoefficientForm => 1e-4,
            Identity::ComplexifiedAsymmetry => 1e-8,
        }
    }

    /// Hypothesis a conditional identity needs at every sampled point.
    fn hypothesis(self) -> Option<(&'static str, DefectField)> {
        match self {
            Identity::RundLikeTorsionSquare => Some(("Rund Kahler-Finsler-like", |d| d.rund_like)),
            Identity::BalancedContractions => Some(("balanced", |d| d.balanced)),
            _ => None,
        }
    }

    fn at_point(self, metric: &MetricExpr, p: &Point, index: usize) -> Result<Residual> {
        let e = PointEval::new(metric, p)?;
        match self {
            Identity::Homogeneity => homogeneity(metric, &e),
            Identity::ConjugateSymmetry => Ok(conjugate_symmetry(&e)),
            Identity::FlagDifference => flag_difference(&e, index),
            Identity::SectionalDifference => sectional_difference(&e),
            Identity::RicciIdentity => ricci_identity(&e),
            Identity::TorsionSquare => Ok(torsion_square(&e)),
            Identity::Negativity => Ok(negativity(&e, index)),
            Identity::TorsionTrace => Ok(torsion_trace(&e)),
            Identity::DdbarFundamentalForm => ddbar_fundamental_form(metric, &e),
            Identity::RundLikeTorsionSquare => rund_like_torsion_square(&e),
            Identity::Codifferential => codifferential(metric, &e),
            Identity::BalancedContractions => balanced_contractions(&e),
            Identity::CanonicalCoefficientForm => {
                let fd = canonical_curvature_fd(metric, p, FIELD_STEP)?;
                let mut r = Residual::default();
                r.push_arrays(e.bundle.canonical.data(), fd.data());
                Ok(r)
            }
            Identity::ComplexifiedAsymmetry => complexified_asymmetry(&e),
        }
    }
}

pub fn verify_identity(
    identity: Identity,
    metric: &MetricExpr,
    sample: &[Point],
    tol: Option<f64>,
    mode: ExecMode,
) -> Result<IdentityReport> {
    if sample.is_empty() {
        return Err(FinslerError::InvalidParameter("identity check needs at least one accepted point".into()));
    }
    let tol = tol.unwrap_or(identity.default_tol());
    let (name, anchor) = (identity.name(), identity.anchor());
    if let Some((property, defect)) = identity.hypothesis() {
        let worst = defects_over(metric, sample, mode)?.iter().map(defect).fold(0.0, f64::max);
        if worst > CLASSIFY_TOL {
            let reason = format!("not pointwise {property}: defect {worst:.3e} above {CLASSIFY_TOL:.0e}");
            return Ok(IdentityReport::skipped(name, anchor, sample.len(), tol, reason));
        }
    }
    let residual = mode
        .map_indexed(sample, |i, p| identity.at_point(metric, p, i))
        .into_iter()
        .try_fold(Residual::default(), |acc, r| r.map(|r| acc.merge(r)))?;
    Ok(IdentityReport::from_residual(name, anchor, sample.len(), residual, tol))
}

/// Every registered identity with its default tolerance unless overridden.
pub fn verify_all(
    metric: &MetricExpr,
    sample: &[Point],
    tol: impl Fn(Identity) -> Option<f64>,
    mode: ExecMode,
) -> Result<Vec<IdentityReport>> {
    Identity::ALL
        .into_iter()
        .map(|i| verify_identity(i, metric, sample, tol(i), mode))
        .collect()
}

fn c0() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn homogeneity(metric: &MetricExpr, e: &PointEval) -> Result<Residual> {
    let p = e.point();
    let geo = &e.geometry;
    let n = geo.n();
    let g = geo.metric_series().value();
    let scale = 1.0 + g.norm();
    let mut r = Residual::default();
    for (re, im) in [(0.5, 0.0), (1.7, -0.6), (-0.3, 1.1), (0.0, 2.0)] {
        let t = Complex64::new(re, im);
        let gt = metric.eval(&p.scale_fiber(t))?;
        r.push((gt - g * t.norm_sqr()).norm() / t.norm_sqr(), scale);
    }
    r.push(g.im.abs(), scale);
    let v = &p.v;
    let euler: Complex64 = (0..n).map(|a| geo.metric_v(a) * v[a]).sum();
    r.push((euler - g).norm(), scale);
    let mut levi = c0();
    for a in 0..n {
        for b in 0..n {
            levi += geo.levi_value(a, b) * v[a] * v[b].conj();
        }
    }
    r.push((levi - g).norm(), scale);
    for a in 0..n {
        let gv = geo.metric_series().deriv(Family::V, a)?;
        let kill: Complex64 = (0..n).map(|b| gv.partial(unit(Family::V, b)).unwrap_or_default() * v[b]).sum();
        r.push(kill.norm(), scale);
    }
    Ok(r)
}

fn unit(f: Family, j: usize) -> [usize; 4] {
    let mut idx = [0usize; 4];
    idx[f as usize] = 1 + j;
    idx
}

fn conjugate_symmetry(e: &PointEval) -> Residual {
    let mut r = Residual::default();
    for t in [&e.bundle.chern.horizontal, &e.bundle.canonical, &e.bundle.complexified] {
        r.push(conjugate_symmetry_defect(t), t.scale());
    }
    r
}

/// Coefficient of the bracket quadratic form in the flag difference.
///
/// Each bracket is twice a torsion 3-form entry, so consistency with the
/// torsion-square contraction fixes it at -1/4. A coefficient of -1/2 is
/// off by exactly a factor of two on every non-Kahler sample.
pub const FLAG_DIFFERENCE_COEFF: f64 = -0.25;

/// `(R - Omega)[H]` and the bracket form (without coefficient) for each
/// test vector.
pub fn flag_difference_terms(e: &PointEval, index: usize) -> Vec<(Complex64, Complex64)> {
    let geo = &e.geometry;
    let n = geo.n();
    test_vectors(index, n, 4)
        .into_iter()
        .map(|h| {
            let diff = quartic(&e.bundle.canonical, &h) - quartic(&e.bundle.chern.horizontal, &h);
            (diff, bracket_form(geo, &h))
        })
        .collect()
}

fn bracket_form(geo: &Geometry, h: &[Complex64]) -> Complex64 {
    let n = geo.n();
    // Y_l = H^a Hbar^nu [delta_nubar G_{a l-bar} - delta_lbar G_{a nu-bar}]
    // Z_g = [delta_mu G_{g b-bar} - delta_g G_{mu b-bar}] Hbar^b H^mu
    let mut y = vec![c0(); n];
    let mut z = vec![c0(); n];
    for l in 0..n {
        for a in 0..n {
            for m in 0..n {
                y[l] += h[a] * h[m].conj()
                    * (geo.delta_bar_levi(m, a, l).value() - geo.delta_bar_levi(l, a, m).value());
                z[l] += (geo.delta_levi(m, l, a).value() - geo.delta_levi(l, m, a).value()) * h[a].conj() * h[m];
            }
        }
    }
    let mut form = c0();
    for l in 0..n {
        for g in 0..n {
            form += y[l] * geo.levi_inverse_value(l, g) * z[g];
        }
    }
    form
}

fn flag_difference(e: &PointEval, index: usize) -> Result<Residual> {
    let mut r = Residual::default();
    for (diff, form) in flag_difference_terms(e, index) {
        r.push((diff - FLAG_DIFFERENCE_COEFF * form).norm(), 1.0 + diff.norm().max(form.norm()));
    }
    Ok(r)
}

fn sectional_difference(e: &PointEval) -> Result<Residual> {
    let geo = &e.geometry;
    let n = geo.n();
    let v = &e.point().v;
    let rq = quartic(&e.bundle.canonical, v);
    let oq = quartic(&e.bundle.chern.horizontal, v);
    let scale = 1.0 + rq.norm().max(oq.norm());
    let mut x = vec![c0(); n];
    for g in 0..n {
        let gv = geo.metric_series().deriv(Family::V, g)?;
        let chi: Complex64 = (0..n)
            .map(|b| geo.delta(b, &gv).map(|s| v[b] * s.value()))
            .sum::<Result<Complex64>>()?;
        x[g] = chi - geo.metric_z(g);
    }
    let mut rhs = c0();
    for l in 0..n {
        for g in 0..n {
            rhs += x[l].conj() * geo.levi_inverse_value(l, g) * x[g];
        }
    }
    rhs *= FLAG_DIFFERENCE_COEFF;
    let mut r = Residual::default();
    r.push((rq - oq - rhs).norm(), scale);
    // inner step: G_{;g} - chi(G_g) is the weak Kahler torsion vector
    let w = &e.torsions.weak_kahler;
    let minus_x: Vec<Complex64> = x.iter().map(|c| -c).collect();
    r.push_arrays(&minus_x, w.data());
    // sign: the canonical sectional curvature never exceeds the Chern one
    let gap = sectional_curvature(geo, &e.bundle.canonical) - sectional_curvature(geo, &e.bundle.chern.horizontal);
    r.push(gap.max(0.0), scale);
    Ok(r)
}

/// `delta_nubar(S_mu)` and `delta_mu(S_nubar)`, each `[mu][nu]`.
fn trace_derivatives(geo: &Geometry) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let n = geo.n();
    let s: Vec<_> = (0..n).map(|a| geo.torsion_trace_series(a)).collect();
    let mut dbar = Vec::with_capacity(n * n);
    let mut d = Vec::with_capacity(n * n);
    for mu in 0..n {
        for nu in 0..n {
            dbar.push(geo.delta_bar(nu, &s[mu])?.value());
            d.push(geo.delta(mu, &s[nu].conj())?.value());
        }
    }
    Ok((dbar, d))
}

fn ricci_identity(e: &PointEval) -> Result<Residual> {
    let (dbar, d) = trace_derivatives(&e.geometry)?;
    let rc = e.bundle.ricci_canonical.data();
    let rhs: Vec<Complex64> = (0..rc.len()).map(|k| rc[k] + dbar[k] + d[k]).collect();
    let mut r = Residual::default();
    r.push_arrays(e.bundle.ricci_chern.data(), &rhs);
    Ok(r)
}

fn torsion_square(e: &PointEval) -> Residual {
    let b = &e.bundle;
    let form = b.torsion_square.form.data();
    let rhs: Vec<Complex64> = b.ricci_canonical.data().iter().zip(form).map(|(r, s)| r - s).collect();
    let mut r = Residual::default();
    r.push_arrays(b.ricci_complexified.data(), &rhs);
    let s = b.torsion_square.scalar;
    let scale = 1.0 + b.scalar_complexified.norm().max(b.scalar_canonical.norm());
    r.push((b.scalar_complexified - (b.scalar_canonical - s)).norm(), scale);
    r.push(s.im.abs() + (-s.re).max(0.0), 1.0 + s.norm());
    r
}

fn negativity(e: &PointEval, index: usize) -> Residual {
    let b = &e.bundle;
    let n = e.geometry.n();
    let scale = b.complexified.scale().max(b.canonical.scale());
    let mut r = Residual::default();
    let vecs = test_vectors(index, n, 8);
    for pair in vecs.chunks(2) {
        let (h, k) = (&pair[0], &pair[1]);
        let mut acc = c0();
        for a in 0..n {
            for bb in 0..n {
                for mu in 0..n {
                    for nu in 0..n {
                        let i = [a, bb, mu, nu];
                        acc += (b.complexified.get(&i) - b.canonical.get(&i)) * h[a] * h[bb].conj() * k[mu] * k[nu].conj();
                    }
                }
            }
        }
        r.push(acc.re.max(0.0), scale);
    }
    r
}

fn torsion_trace(e: &PointEval) -> Residual {
    let geo = &e.geometry;
    let n = geo.n();
    let l = &e.torsions.canonical_bar;
    let mut contracted = vec![c0(); n];
    let mut trace = vec![c0(); n];
    let s_bar: Vec<Complex64> = e.torsions.trace.data().iter().map(|c| c.conj()).collect();
    for lam in 0..n {
        for a in 0..n {
            for b in 0..n {
                for g in 0..n {
                    contracted[lam] += geo.levi_inverse_value(b, a) * l.get(&[g, a, b]) * geo.levi_value(g, lam);
                }
            }
        }
        trace[lam] = -(0..n).map(|g| l.get(&[g, g, lam])).sum::<Complex64>();
    }
    let mut r = Residual::default();
    r.push_arrays(&contracted, &s_bar);
    r.push_arrays(&trace, &s_bar);
    r
}

/// `delta_x delta_ybar G_{a b-bar}`, `[x][y][a][b]`, exact on series.
fn delta_delta_bar(geo: &Geometry) -> Result<Vec<Complex64>> {
    let n = geo.n();
    let mut out = Vec::with_capacity(n.pow(4));
    for x in 0..n {
        for y in 0..n {
            for a in 0..n {
                for b in 0..n {
                    out.push(geo.delta(x, geo.delta_bar_levi(y, a, b))?.value());
                }
            }
        }
    }
    Ok(out)
}

fn geometry_at(metric: &MetricExpr, q: &Point) -> Result<Geometry> {
    Geometry::new(&eval_jet(metric, q, OrderBound::default())?)
}

/// `delta_x delta_ybar G_{a b-bar}` with the outer derivative by finite differences.
fn delta_delta_bar_fd(metric: &MetricExpr, geo: &Geometry) -> Result<Vec<Complex64>> {
    let n = geo.n();
    let field = |q: &Point| -> Result<Vec<Complex64>> {
        let gq = geometry_at(metric, q)?;
        let mut out = Vec::with_capacity(n.pow(3));
        for y in 0..n {
            for a in 0..n {
                for b in 0..n {
                    out.push(gq.delta_bar_levi(y, a, b).value());
                }
            }
        }
        Ok(out)
    };
    let [dz, _, dv, _] = field_gradient(field, geo.point(), FIELD_STEP)?;
    let mut out = Vec::with_capacity(n.pow(4));
    for x in 0..n {
        for k in 0..n.pow(3) {
            let fiber: Vec<Complex64> = (0..n).map(|s| dv[s][k]).collect();
            out.push(geo.frame().horizontal(x, dz[x][k], &fiber));
        }
    }
    Ok(out)
}

fn ddbar_coefficient(e4: &[Complex64], n: usize) -> Vec<Complex64> {
    let at = |x: usize, y: usize, a: usize, b: usize| e4[((x * n + y) * n + a) * n + b];
    let mut out = Vec::with_capacity(n.pow(4));
    for a in 0..n {
        for mu in 0..n {
            for b in 0..n {
                for nu in 0..n {
                    out.push(0.25 * (at(mu, b, a, nu) + at(a, nu, mu, b) - at(a, b, mu, nu) - at(mu, nu, a, b)));
                }
            }
        }
    }
    out
}

fn ddbar_fundamental_form(metric: &MetricExpr, e: &PointEval) -> Result<Residual> {
    let n = e.geometry.n();
    let exact = ddbar_coefficient(&delta_delta_bar(&e.geometry)?, n);
    let fd = ddbar_coefficient(&delta_delta_bar_fd(metric, &e.geometry)?, n);
    let mut r = Residual::default();
    r.push_arrays(&exact, &fd);
    Ok(r)
}

fn rund_like_torsion_square(e: &PointEval) -> Result<Residual> {
    let geo = &e.geometry;
    let n = geo.n();
    let e4 = delta_delta_bar(geo)?;
    let at = |x: usize, y: usize, a: usize, b: usize| e4[((x * n + y) * n + a) * n + b];
    let s = &e.torsions.horizontal;
    let mut lhs = Vec::with_capacity(n.pow(4));
    let mut rhs = Vec::with_capacity(n.pow(4));
    for a in 0..n {
        for mu in 0..n {
            for b in 0..n {
                for nu in 0..n {
                    lhs.push(at(mu, b, a, nu) - at(mu, nu, a, b) + at(a, nu, mu, b) - at(a, b, mu, nu));
                    let mut acc = c0();
                    for g in 0..n {
                        for l in 0..n {
                            acc += geo.levi_value(g, l) * s.get(&[g, a, mu]) * s.get(&[l, b, nu]).conj();
                        }
                    }
                    rhs.push(-4.0 * acc);
                }
            }
        }
    }
    let mut r = Residual::default();
    r.push_arrays(&lhs, &rhs);
    Ok(r)
}

fn codifferential(metric: &MetricExpr, e: &PointEval) -> Result<Residual> {
    let geo = &e.geometry;
    let n = geo.n();
    let (dbar, d) = trace_derivatives(geo)?;
    let field = |q: &Point| -> Result<Vec<Complex64>> {
        let t = geometry_at(metric, q)?.torsions().trace;
        Ok(t.data().iter().copied().chain(t.data().iter().map(|c| c.conj())).collect())
    };
    let [dz, dzbar, dv, dvbar] = field_gradient(field, geo.point(), FIELD_STEP)?;
    let two_i = Complex64::new(0.0, 2.0);
    let (mut exact, mut fd) = (Vec::new(), Vec::new());
    for mu in 0..n {
        for nu in 0..n {
            let fiber_bar: Vec<Complex64> = (0..n).map(|t| dvbar[t][mu]).collect();
            let fiber: Vec<Complex64> = (0..n).map(|s| dv[s][n + nu]).collect();
            exact.push(two_i * dbar[mu * n + nu]);
            fd.push(two_i * geo.frame().horizontal_bar(nu, dzbar[nu][mu], &fiber_bar));
            exact.push(two_i * d[mu * n + nu]);
            fd.push(two_i * geo.frame().horizontal(mu, dz[mu][n + nu], &fiber));
        }
    }
    let mut r = Residual::default();
    r.push_arrays(&exact, &fd);
    Ok(r)
}

fn balanced_contractions(e: &PointEval) -> Result<Residual> {
    let geo = &e.geometry;
    let n = geo.n();
    let e4 = delta_delta_bar(geo)?;
    let at = |x: usize, y: usize, a: usize, b: usize| e4[((x * n + y) * n + a) * n + b];
    let inv = |b: usize, a: usize| geo.levi_inverse_value(b, a);
    let dh = |m: usize, a: usize, l: usize| geo.delta_levi(m, a, l).value();
    let s3 = &e.torsions.three_form;
    let mut r = Residual::default();
    let (mut lhs9, mut rhs9, mut lhs10, mut rhs10) = (vec![], vec![], vec![], vec![]);
    for mu in 0..n {
        for nu in 0..n {
            let (mut l9, mut r9) = (c0(), c0());
            for a in 0..n {
                for b in 0..n {
                    l9 += inv(b, a) * (at(mu, b, a, nu) - at(mu, nu, a, b));
                    for g in 0..n {
                        for l in 0..n {
                            r9 += 2.0 * inv(b, a) * inv(l, g) * dh(mu, a, l) * s3.get(&[nu, b, g]).conj();
                        }
                    }
                }
            }
            lhs9.push(l9);
            rhs9.push(r9);
        }
    }
    // mirror: indices (a, b-bar) exchanged with (mu, nu-bar)
    for a in 0..n {
        for b in 0..n {
            let (mut l10, mut r10) = (c0(), c0());
            for mu in 0..n {
                for nu in 0..n {
                    l10 += inv(nu, mu) * (at(a, nu, mu, b) - at(a, b, mu, nu));
                    for g in 0..n {
                        for l in 0..n {
                            r10 += 2.0 * inv(nu, mu) * dh(a, mu, l) * inv(l, g) * s3.get(&[b, nu, g]).conj();
                        }
                    }
                }
            }
            lhs10.push(l10);
            rhs10.push(r10);
        }
    }
    r.push_arrays(&lhs9, &rhs9);
    r.push_arrays(&lhs10, &rhs10);
    let mut full = c0();
    for a in 0..n {
        for b in 0..n {
            for mu in 0..n {
                for nu in 0..n {
                    full += inv(b, a) * inv(nu, mu) * (at(mu, b, a, nu) + at(a, nu, mu, b) - at(a, b, mu, nu) - at(mu, nu, a, b));
                }
            }
        }
    }
    let s = e.bundle.torsion_square.scalar;
    r.push((full + 4.0 * s).norm(), 1.0 + full.norm().max(4.0 * s.norm()));
    Ok(r)
}

fn complexified_asymmetry(e: &PointEval) -> Result<Residual> {
    let geo = &e.geometry;
    let n = geo.n();
    let asm = e.assembly()?;
    let e4 = delta_delta_bar(geo)?;
    let dd_ = |x: usize, y: usize, a: usize, b: usize| e4[((x * n + y) * n + a) * n + b];
    // [delta_x, delta_ybar] G_{a b-bar}
    let comm = |x: usize, y: usize, a: usize, b: usize| dd_(x, y, a, b) - asm.delta_bar_delta_levi(y, x, a, b);
    let k = &e.bundle.complexified;
    let (mut lhs, mut rhs) = (vec![], vec![]);
    for a in 0..n {
        for b in 0..n {
            for mu in 0..n {
                for nu in 0..n {
                    lhs.push(k.get(&[a, b, mu, nu]) - k.get(&[mu, nu, a, b]));
                    let mut v = 0.5 * (comm(a, b, mu, nu) - comm(mu, nu, a, b) + comm(a, nu, mu, b) - comm(mu, b, a, nu));
                    for t in 0..n {
                        v += asm.delta_nonlinear_bar(a, t, b) * geo.levi_vbar(mu, nu, t)
                            - asm.delta_nonlinear_bar(mu, t, nu) * geo.levi_vbar(a, b, t);
                    }
                    rhs.push(v);
                }
            }
        }
    }
    let mut r = Residual::default();
    r.push_arrays(&lhs, &rhs);
    Ok(r)
}
