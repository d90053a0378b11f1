//! Laws relating a metric `G` and its conformal change `e^rho G`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{IdentityReport, PointEval, Residual, CLASSIFY_TOL};
use crate::catalog::conformal_scale;
use crate::error::{FinslerError, Result};
use crate::exec::ExecMode;
use crate::expr::{MetricExpr, ScalarExpr};
use crate::jets::{eval_scalar_jet, ScalarJet};
use crate::point::Point;
use crate::series::{Family, Series};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConformalLaw {
    NonlinearConnection,
    HorizontalFrame,
    HorizontalFrameBar,
    HorizontalCoefficients,
    VerticalCoefficients,
    TorsionTrace,
    RundDefect,
    Ricci,
    Scalar,
    BalancedRicciDifference,
}

impl ConformalLaw {
    pub const ALL: [ConformalLaw; 10] = [
        ConformalLaw::NonlinearConnection,
        ConformalLaw::HorizontalFrame,
        ConformalLaw::HorizontalFrameBar,
        ConformalLaw::HorizontalCoefficients,
        ConformalLaw::VerticalCoefficients,
        ConformalLaw::TorsionTrace,
        ConformalLaw::RundDefect,
        ConformalLaw::Ricci,
        ConformalLaw::Scalar,
        ConformalLaw::BalancedRicciDifference,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConformalLaw::NonlinearConnection => "conformal_nonlinear_connection",
            ConformalLaw::HorizontalFrame => "conformal_horizontal_frame",
            ConformalLaw::HorizontalFrameBar => "conformal_horizontal_frame_bar",
            ConformalLaw::HorizontalCoefficients => "conformal_horizontal_coefficients",
            ConformalLaw::VerticalCoefficients => "conformal_vertical_coefficients",
            ConformalLaw::TorsionTrace => "conformal_torsion_trace",
            ConformalLaw::RundDefect => "conformal_rund_defect",
            ConformalLaw::Ricci => "conformal_ricci",
            ConformalLaw::Scalar => "conformal_scalar",
            ConformalLaw::BalancedRicciDifference => "conformal_balanced_ricci_difference",
        }
    }

    pub fn anchor(self) -> &'static str {
        match self {
            ConformalLaw::NonlinearConnection => "Gamma~^a_{;b} = Gamma^a_{;b} + rho_{;b} v^a",
            ConformalLaw::HorizontalFrame => "delta~_b = delta_b - rho_{;b} iota, iota = v^s dv_s, on G~, its first fiber derivatives and G~_{a l-bar}",
            ConformalLaw::HorizontalFrameBar => "delta~_bbar = delta_bbar - rho_{;bbar} conj(iota), on G~, its first fiber derivatives and G~_{a l-bar}",
            ConformalLaw::HorizontalCoefficients => "Gamma~^a_{b;g} = Gamma^a_{b;g} + delta^a_b rho_{;g}",
            ConformalLaw::VerticalCoefficients => "Gamma~^a_{b g} = Gamma^a_{b g}",
            ConformalLaw::TorsionTrace => "S~_a = S_a + (1 - n) rho_{;a} / 2",
            ConformalLaw::RundDefect => "delta~_nubar(S~^a_{b g}) = delta_nubar(S^a_{b g}) + (delta^a_b rho_{;g nu-bar} - delta^a_g rho_{;b nu-bar}) / 2",
            ConformalLaw::Ricci => "Omega~_{mu nu-bar} = Omega_{mu nu-bar} - n rho_{;mu nu-bar}",
            ConformalLaw::Scalar => "s~ = e^{-rho} (s - n G^{b-bar a} rho_{;a b-bar})",
            ConformalLaw::BalancedRicciDifference => "Omega_{mu nu-bar} - R_{mu nu-bar} = (n - 1) rho_{;mu nu-bar} when e^rho G is balanced",
        }
    }
}

/// Default tolerance for every conformal law.
pub const CONFORMAL_TOL: f64 = 1e-7;

struct Pair {
    base: PointEval,
    tilde: PointEval,
    rho: ScalarJet,
}

fn kron(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// `sum_s w^s d_{family, s} X` at the point.
fn radial(x: &Series, family: Family, w: &[Complex64]) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for (s, ws) in w.iter().enumerate() {
        acc += ws * x.deriv(family, s)?.value();
    }
    Ok(acc)
}

impl Pair {
    fn law(&self, law: ConformalLaw) -> Result<Residual> {
        let (g, t) = (&self.base.geometry, &self.tilde.geometry);
        let n = g.n();
        let v = &g.point().v;
        let rho = &self.rho;
        let mut r = Residual::default();
        let mut lhs = Vec::new();
        let mut rhs = Vec::new();
        match law {
            ConformalLaw::NonlinearConnection => {
                for a in 0..n {
                    for b in 0..n {
                        lhs.push(t.nonlinear_series(a, b).value());
                        rhs.push(g.nonlinear_series(a, b).value() + rho.dz[b] * v[a]);
                    }
                }
            }
            ConformalLaw::HorizontalFrame | ConformalLaw::HorizontalFrameBar => {
                let barred = law == ConformalLaw::HorizontalFrameBar;
                let vb: Vec<Complex64> = v.iter().map(|c| c.conj()).collect();
                // the Levi entries have radial degree zero, so G~ and its
                // first fiber derivatives are included to give iota something to see
                let gt = t.metric_series();
                let mut fields = vec![gt.clone()];
                for a in 0..n {
                    fields.push(gt.deriv(Family::V, a)?);
                    fields.push(gt.deriv(Family::Vbar, a)?);
                    for l in 0..n {
                        fields.push(t.levi_series(a, l).clone());
                    }
                }
                for x in &fields {
                    for b in 0..n {
                        if barred {
                            lhs.push(t.delta_bar(b, x)?.value());
                            rhs.push(g.delta_bar(b, x)?.value() - rho.dzbar[b] * radial(x, Family::Vbar, &vb)?);
                        } else {
                            lhs.push(t.delta(b, x)?.value());
                            rhs.push(g.delta(b, x)?.value() - rho.dz[b] * radial(x, Family::V, v)?);
                        }
                    }
                }
            }
            ConformalLaw::HorizontalCoefficients => {
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            lhs.push(t.chern_horizontal_series(a, b, c).value());
                            rhs.push(g.chern_horizontal_series(a, b, c).value() + kron(a, b) * rho.dz[c]);
                        }
                    }
                }
            }
            ConformalLaw::VerticalCoefficients => {
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            lhs.push(t.chern_vertical_series(a, b, c).value());
                            rhs.push(g.chern_vertical_series(a, b, c).value());
                        }
                    }
                }
            }
            ConformalLaw::TorsionTrace => {
                let shift = 0.5 * (1.0 - n as f64);
                for a in 0..n {
                    lhs.push(self.tilde.torsions.trace.get(&[a]));
                    rhs.push(self.base.torsions.trace.get(&[a]) + shift * rho.dz[a]);
                }
            }
            ConformalLaw::RundDefect => {
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            let st = t.torsion_series(a, b, c);
                            let sb = g.torsion_series(a, b, c);
                            for nu in 0..n {
                                lhs.push(t.delta_bar(nu, &st)?.value());
                                let corr = 0.5 * (kron(a, b) * rho.mixed(c, nu) - kron(a, c) * rho.mixed(b, nu));
                                rhs.push(g.delta_bar(nu, &sb)?.value() + corr);
                            }
                        }
                    }
                }
            }
            ConformalLaw::Ricci => {
                for mu in 0..n {
                    for nu in 0..n {
                        lhs.push(self.tilde.bundle.ricci_chern.get(&[mu, nu]));
                        rhs.push(self.base.bundle.ricci_chern.get(&[mu, nu]) - n as f64 * rho.mixed(mu, nu));
                    }
                }
            }
            ConformalLaw::Scalar => {
                let mut trace = Complex64::new(0.0, 0.0);
                for a in 0..n {
                    for b in 0..n {
                        trace += g.levi_inverse_value(b, a) * rho.mixed(a, b);
                    }
                }
                lhs.push(self.tilde.bundle.scalar_chern);
                rhs.push((-rho.value).exp() * (self.base.bundle.scalar_chern - n as f64 * trace));
            }
            ConformalLaw::BalancedRicciDifference => {
                let b = &self.base.bundle;
                for mu in 0..n {
                    for nu in 0..n {
                        lhs.push(b.ricci_chern.get(&[mu, nu]) - b.ricci_canonical.get(&[mu, nu]));
                        rhs.push((n as f64 - 1.0) * rho.mixed(mu, nu));
                    }
                }
            }
        }
        r.push_arrays(&lhs, &rhs);
        Ok(r)
    }
}

/// Every conformal law over the sample. The balanced Ricci difference is
/// skipped unless `e^rho G` is balanced at every point.
pub fn verify_conformal(
    base: &MetricExpr,
    rho: &ScalarExpr,
    sample: &[Point],
    tol: Option<f64>,
    mode: ExecMode,
) -> Result<Vec<IdentityReport>> {
    if sample.is_empty() {
        return Err(FinslerError::InvalidParameter("conformal check needs at least one accepted point".into()));
    }
    let tol = tol.unwrap_or(CONFORMAL_TOL);
    let tilde = conformal_scale(base, rho)?;
    let per_point: Vec<Result<(Vec<Residual>, f64)>> = mode.map(sample, |p| {
        let pair = Pair {
            base: PointEval::new(base, p)?,
            tilde: PointEval::new(&tilde, p)?,
            rho: eval_scalar_jet(rho, p)?,
        };
        let residuals = ConformalLaw::ALL.iter().map(|&l| pair.law(l)).collect::<Result<Vec<_>>>()?;
        Ok((residuals, pair.tilde.defects().balanced))
    });
    let per_point: Vec<(Vec<Residual>, f64)> = per_point.into_iter().collect::<Result<_>>()?;
    let tilde_balanced = per_point.iter().map(|(_, b)| *b).fold(0.0, f64::max);
    Ok(ConformalLaw::ALL
        .iter()
        .enumerate()
        .map(|(k, &law)| {
            if law == ConformalLaw::BalancedRicciDifference && tilde_balanced > CLASSIFY_TOL {
                let reason = format!("conformal metric not pointwise balanced: defect {tilde_balanced:.3e}");
                return IdentityReport::skipped(law.name(), law.anchor(), sample.len(), tol, reason);
            }
            let r = per_point.iter().fold(Residual::default(), |acc, (rs, _)| acc.merge(rs[k]));
            IdentityReport::from_residual(law.name(), law.anchor(), sample.len(), r, tol)
        })
        .collect())
}
