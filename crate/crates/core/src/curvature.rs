//! Curvature tensors of the Chern-Finsler, Rund, canonical and complexified
//! connections, their Ricci contractions, and flag curvatures.
//!
//! Rank-four tensors with all indices down are stored `[a][b][mu][nu]` for
//! `T_{a b-bar mu nu-bar}`. Blocks with one upper index are stored
//! `[a][b][..]` for `T^a_{b ..}` in the order their lower indices are written.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{FinslerError, Result};
use crate::expr::MetricExpr;
use crate::geometry::Geometry;
use crate::jets::{eval_jet, OrderBound};
use crate::oracle::field_gradient;
use crate::point::Point;
use crate::series::{Family, Series};
use crate::tensor::{IndexSlot, Tensor};

use IndexSlot::{Lower, LowerBar, Upper};

const ALL_DOWN: [IndexSlot; 4] = [Lower, LowerBar, Lower, LowerBar];

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Second horizontal derivatives and connection derivatives shared by the
/// curvature assemblies.
pub struct Assembly<'g> {
    geo: &'g Geometry,
    n: usize,
    /// `delta_nubar delta_mu G_{a b-bar}`, `[nu][mu][a][b]`.
    dd: Vec<Complex64>,
    /// `delta_nubar(Gamma^s_{;mu})`, `[nu][s][mu]`.
    dbar_nl: Vec<Complex64>,
    /// `dvbar_nu(Gamma^s_{;mu})`, `[nu][s][mu]`.
    vbar_nl: Vec<Complex64>,
}

impl<'g> Assembly<'g> {
    pub fn new(geo: &'g Geometry) -> Result<Self> {
        let n = geo.n();
        let mut dd = Vec::with_capacity(n.pow(4));
        for nu in 0..n {
            for mu in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        dd.push(geo.delta_bar(nu, geo.delta_levi(mu, a, b))?.value());
                    }
                }
            }
        }
        let mut dbar_nl = Vec::with_capacity(n.pow(3));
        let mut vbar_nl = Vec::with_capacity(n.pow(3));
        for nu in 0..n {
            for s in 0..n {
                for mu in 0..n {
                    let nl = geo.nonlinear_series(s, mu);
                    dbar_nl.push(geo.delta_bar(nu, nl)?.value());
                    vbar_nl.push(nl.deriv(Family::Vbar, nu)?.value());
                }
            }
        }
        Ok(Assembly {
            geo,
            n,
            dd,
            dbar_nl,
            vbar_nl,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        self.geo
    }

    /// `delta_nubar delta_mu G_{a b-bar}`.
    pub fn delta_bar_delta_levi(&self, nu: usize, mu: usize, a: usize, b: usize) -> Complex64 {
        let n = self.n;
        self.dd[((nu * n + mu) * n + a) * n + b]
    }

    /// `delta_nubar(Gamma^s_{;mu})`.
    pub fn delta_bar_nonlinear(&self, nu: usize, s: usize, mu: usize) -> Complex64 {
        self.dbar_nl[(nu * self.n + s) * self.n + mu]
    }

    /// `delta_mu(conj Gamma^t_{;b})`, the conjugate of `delta_mubar(Gamma^t_{;b})`.
    pub fn delta_nonlinear_bar(&self, mu: usize, t: usize, b: usize) -> Complex64 {
        self.delta_bar_nonlinear(mu, t, b).conj()
    }

    fn dh(&self, mu: usize, a: usize, b: usize) -> Complex64 {
        self.geo.delta_levi(mu, a, b).value()
    }

    fn dhb(&self, nu: usize, a: usize, b: usize) -> Complex64 {
        self.geo.delta_bar_levi(nu, a, b).value()
    }

    fn inv(&self, b: usize, a: usize) -> Complex64 {
        self.geo.levi_inverse_value(b, a)
    }

    fn all_down(&self, f: impl FnMut(&[usize]) -> Complex64) -> Tensor {
        Tensor::from_fn(ALL_DOWN.to_vec(), self.geo.point().clone(), f)
    }

    fn tensor(&self, labels: [IndexSlot; 4], f: impl FnMut(&[usize]) -> Complex64) -> Tensor {
        Tensor::from_fn(labels.to_vec(), self.geo.point().clone(), f)
    }

    /// `sum_{l,k} X(l) G^{l-bar k} Y(k)`.
    fn through_inverse(&self, x: impl Fn(usize) -> Complex64, y: impl Fn(usize) -> Complex64) -> Complex64 {
        let n = self.n;
        let mut acc = zero();
        for l in 0..n {
            let xl = x(l);
            for k in 0..n {
                acc += xl * self.inv(l, k) * y(k);
            }
        }
        acc
    }

    /// `Omega_{a b-bar; mu nu-bar}` from horizontal derivatives of the Levi matrix.
    pub fn chern_horizontal(&self) -> Tensor {
        let geo = self.geo;
        let n = self.n;
        self.all_down(|i| {
            let (a, b, mu, nu) = (i[0], i[1], i[2], i[3]);
            let quad = self.through_inverse(|l| self.dh(mu, a, l), |k| self.dhb(nu, k, b));
            let tail: Complex64 = (0..n)
                .map(|s| geo.levi_v(a, b, s) * self.delta_bar_nonlinear(nu, s, mu))
                .sum();
            -self.delta_bar_delta_levi(nu, mu, a, b) + quad - tail
        })
    }

    pub fn chern(&self) -> Result<ChernCurvature> {
        let geo = self.geo;
        let n = self.n;
        let mixed = self.tensor([Upper, Lower, Lower, LowerBar], |i| {
            let (a, b, mu, nu) = (i[0], i[1], i[2], i[3]);
            let tail: Complex64 = (0..n)
                .map(|g| geo.chern_vertical_series(a, b, g).value() * self.delta_bar_nonlinear(nu, g, mu))
                .sum();
            -self.delta_bar_chern(nu, a, b, mu) - tail
        });
        let vertical_mixed = self.series_block([Upper, Lower, Lower, LowerBar], |a, b, mu, nu| {
            Ok(-geo.delta_bar(nu, geo.chern_vertical_series(a, b, mu))?.value())
        })?;
        let mixed_vertical = self.series_block([Upper, Lower, LowerBar, Lower], |a, b, nu, mu| {
            let head = geo.chern_horizontal_series(a, b, mu).deriv(Family::Vbar, nu)?.value();
            let tail: Complex64 = (0..n)
                .map(|g| geo.chern_vertical_series(a, b, g).value() * self.vbar_nl[(nu * n + g) * n + mu])
                .sum();
            Ok(-head - tail)
        })?;
        let vertical = self.series_block([Upper, Lower, Lower, LowerBar], |a, b, mu, nu| {
            Ok(-geo.chern_vertical_series(a, b, mu).deriv(Family::Vbar, nu)?.value())
        })?;
        Ok(ChernCurvature {
            horizontal: self.chern_horizontal(),
            mixed,
            vertical_mixed,
            mixed_vertical,
            vertical,
        })
    }

    fn delta_bar_chern(&self, nu: usize, a: usize, b: usize, mu: usize) -> Complex64 {
        self.geo
            .delta_bar(nu, self.geo.chern_horizontal_series(a, b, mu))
            .map(|s| s.value())
            .unwrap_or_default()
    }

    fn series_block(
        &self,
        labels: [IndexSlot; 4],
        f: impl Fn(usize, usize, usize, usize) -> Result<Complex64>,
    ) -> Result<Tensor> {
        let n = self.n;
        let mut data = Vec::with_capacity(n.pow(4));
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        data.push(f(a, b, c, d)?);
                    }
                }
            }
        }
        Tensor::new(labels.to_vec(), n, data, self.geo.point().clone())
    }

    pub fn rund(&self) -> Result<RundCurvature> {
        let geo = self.geo;
        let n = self.n;
        let horizontal = self.tensor([Upper, Lower, Lower, LowerBar], |i| {
            -self.delta_bar_chern(i[3], i[0], i[1], i[2])
        });
        let mixed_vertical = self.series_block([Upper, Lower, LowerBar, Lower], |a, b, nu, mu| {
            Ok(-geo.chern_horizontal_series(a, b, mu).deriv(Family::Vbar, nu)?.value())
        })?;
        let holomorphic_vertical = if geo.metric_series().bound()[Family::V as usize] >= 3 {
            Some(self.series_block([Upper, Lower, Lower, Lower], |a, b, nu, mu| {
                Ok(-geo.chern_horizontal_series(a, b, mu).deriv(Family::V, nu)?.value())
            })?)
        } else {
            None
        };
        // Omega^a_{b;mu nu-bar} = Omega-hat^a_{b;mu nu-bar} - Gamma^a_{b g} delta_nubar(Gamma^g_{;mu})
        let chern_mixed = self.chern()?.mixed;
        let rebuilt = self.tensor([Upper, Lower, Lower, LowerBar], |i| {
            let (a, b, mu, nu) = (i[0], i[1], i[2], i[3]);
            let tail: Complex64 = (0..n)
                .map(|g| geo.chern_vertical_series(a, b, g).value() * self.delta_bar_nonlinear(nu, g, mu))
                .sum();
            horizontal.get(i) - tail
        });
        let decomposition_residual = rebuilt.max_diff(&chern_mixed)? / chern_mixed.scale();
        Ok(RundCurvature {
            horizontal,
            mixed_vertical,
            holomorphic_vertical,
            decomposition_residual,
        })
    }

    /// `R_{a b-bar mu nu-bar}` from the expanded Levi-matrix formula.
    pub fn canonical(&self) -> Tensor {
        let geo = self.geo;
        let n = self.n;
        self.all_down(|i| {
            let (a, b, mu, nu) = (i[0], i[1], i[2], i[3]);
            let second = self.delta_bar_delta_levi(nu, a, mu, b)
                + self.delta_bar_delta_levi(b, mu, a, nu)
                + (0..n)
                    .map(|s| {
                        self.delta_bar_nonlinear(nu, s, mu) * geo.levi_v(a, b, s)
                            + self.delta_bar_nonlinear(b, s, mu) * geo.levi_v(a, nu, s)
                    })
                    .sum::<Complex64>();
            let sym = self.through_inverse(
                |l| self.dh(mu, a, l) + self.dh(a, mu, l),
                |g| self.dhb(nu, g, b) + self.dhb(b, g, nu),
            );
            let skew = self.through_inverse(
                |l| self.dhb(nu, a, l) - self.dhb(l, a, nu),
                |g| self.dh(mu, g, b) - self.dh(g, mu, b),
            );
            let last: Complex64 = (0..n)
                .map(|t| {
                    self.delta_nonlinear_bar(mu, t, b) * geo.levi_vbar(a, nu, t)
                        - self.delta_nonlinear_bar(mu, t, nu) * geo.levi_vbar(a, b, t)
                })
                .sum();
            -0.5 * second + 0.25 * sym - 0.25 * skew + 0.5 * last
        })
    }

    /// `R_{a b-bar mu nu-bar}` from the connection-coefficient form, with the
    /// outer horizontal derivatives taken exactly on series.
    pub fn canonical_from_coefficients(&self) -> Result<Tensor> {
        let geo = self.geo;
        let n = self.n;
        let hol: Vec<Series> = triples(n).map(|(g, a, m)| geo.canonical_series(g, a, m)).collect();
        let anti: Vec<Series> = triples(n).map(|(g, a, m)| geo.canonical_bar_series(g, a, m)).collect();
        let at = |g: usize, a: usize, m: usize| (g * n + a) * n + m;
        let mut d_anti = vec![zero(); n.pow(4)];
        let mut dbar_hol = vec![zero(); n.pow(4)];
        for d in 0..n {
            for (k, (h, an)) in hol.iter().zip(&anti).enumerate() {
                d_anti[d * n.pow(3) + k] = geo.delta(d, an)?.value();
                dbar_hol[d * n.pow(3) + k] = geo.delta_bar(d, h)?.value();
            }
        }
        let hv: Vec<Complex64> = hol.iter().map(Series::value).collect();
        let av: Vec<Complex64> = anti.iter().map(Series::value).collect();
        Ok(self.all_down(|i| {
            let (a, b, mu, nu) = (i[0], i[1], i[2], i[3]);
            let mut acc = zero();
            for g in 0..n {
                let mut inner = d_anti[mu * n.pow(3) + at(g, a, nu)] - dbar_hol[nu * n.pow(3) + at(g, a, mu)];
                for s in 0..n {
                    inner += av[at(s, a, nu)] * hv[at(g, s, mu)] - hv[at(s, a, mu)] * av[at(g, s, nu)];
                }
                acc += inner * geo.levi_value(g, b);
            }
            let tail: Complex64 = (0..n)
                .map(|s| geo.levi_v(a, b, s) * self.delta_bar_nonlinear(nu, s, mu))
                .sum();
            acc - tail
        }))
    }

    /// `K = R - [delta_bbar(G_{mu l-bar}) - delta_lbar(G_{mu b-bar})] G^{l-bar g} [delta_a(G_{g nu-bar}) - delta_g(G_{a nu-bar})] / 4`.
    pub fn complexified(&self, canonical: &Tensor) -> Tensor {
        self.all_down(|i| {
            let (a, b, mu, nu) = (i[0], i[1], i[2], i[3]);
            let corr = self.through_inverse(
                |l| self.dhb(b, mu, l) - self.dhb(l, mu, b),
                |g| self.dh(a, g, nu) - self.dh(g, a, nu),
            );
            canonical.get(i) - 0.25 * corr
        })
    }

    pub fn torsion_square(&self) -> TorsionSquare {
        let n = self.n;
        // S_{a g l-bar} = (delta_g G_{a l-bar} - delta_a G_{g l-bar}) / 2
        let s = |a: usize, g: usize, l: usize| 0.5 * (self.dh(g, a, l) - self.dh(a, g, l));
        let form = Tensor::from_fn(vec![Lower, LowerBar], self.geo.point().clone(), |i| {
            let (mu, nu) = (i[0], i[1]);
            let mut acc = zero();
            for a in 0..n {
                for b in 0..n {
                    for g in 0..n {
                        for l in 0..n {
                            acc += self.inv(b, a) * self.inv(l, g) * s(a, g, nu) * s(b, l, mu).conj();
                        }
                    }
                }
            }
            acc
        });
        let scalar = self.trace(&form);
        TorsionSquare { form, scalar }
    }

    /// `G^{nu-bar mu} T_{mu nu-bar}`.
    pub fn trace(&self, t: &Tensor) -> Complex64 {
        let n = self.n;
        let mut acc = zero();
        for mu in 0..n {
            for nu in 0..n {
                acc += self.inv(nu, mu) * t.get(&[mu, nu]);
            }
        }
        acc
    }

    /// `G^{b-bar a} T_{a b-bar mu nu-bar}`.
    pub fn ricci(&self, t: &Tensor) -> Tensor {
        let n = self.n;
        Tensor::from_fn(vec![Lower, LowerBar], self.geo.point().clone(), |i| {
            let mut acc = zero();
            for a in 0..n {
                for b in 0..n {
                    acc += self.inv(b, a) * t.get(&[a, b, i[0], i[1]]);
                }
            }
            acc
        })
    }

    pub fn bundle(&self) -> Result<CurvatureBundle> {
        let chern = self.chern()?;
        let rund = self.rund()?;
        let canonical = self.canonical();
        let complexified = self.complexified(&canonical);
        let ricci_chern = self.ricci(&chern.horizontal);
        let ricci_canonical = self.ricci(&canonical);
        let ricci_complexified = self.ricci(&complexified);
        let torsion_square = self.torsion_square();
        Ok(CurvatureBundle {
            scalar_chern: self.trace(&ricci_chern),
            scalar_canonical: self.trace(&ricci_canonical),
            scalar_complexified: self.trace(&ricci_complexified),
            chern,
            rund,
            canonical,
            complexified,
            ricci_chern,
            ricci_canonical,
            ricci_complexified,
            torsion_square,
        })
    }
}

fn triples(n: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    (0..n).flat_map(move |a| (0..n).flat_map(move |b| (0..n).map(move |c| (a, b, c))))
}

/// Chern-Finsler curvature: the horizontal tensor with all indices down and
/// the coefficient blocks of the curvature form.
#[derive(Clone, Debug)]
pub struct ChernCurvature {
    /// `Omega_{a b-bar; mu nu-bar}`.
    pub horizontal: Tensor,
    /// `Omega^a_{b; mu nu-bar}`.
    pub mixed: Tensor,
    /// `Omega^a_{b mu; nu-bar}`.
    pub vertical_mixed: Tensor,
    /// `Omega^a_{b nu-bar; mu}`, stored `[a][b][nu][mu]`.
    pub mixed_vertical: Tensor,
    /// `Omega^a_{b mu nu-bar}`.
    pub vertical: Tensor,
}

#[derive(Clone, Debug)]
pub struct RundCurvature {
    /// `Omega-hat^a_{b; mu nu-bar}`.
    pub horizontal: Tensor,
    /// `Omega-hat^a_{b nu-bar; mu}`, stored `[a][b][nu][mu]`.
    pub mixed_vertical: Tensor,
    /// `Omega-hat^a_{b nu; mu}`, present only when the jet carries a third
    /// `v` order.
    pub holomorphic_vertical: Option<Tensor>,
    /// Relative mismatch of the Chern block rebuilt from the Rund one.
    pub decomposition_residual: f64,
}

#[derive(Clone, Debug)]
pub struct TorsionSquare {
    /// `G^{b-bar a} G^{l-bar g} S_{a g nu-bar} conj(S_{b l mu-bar})`, `[mu][nu]`.
    pub form: Tensor,
    pub scalar: Complex64,
}

#[derive(Clone, Debug)]
pub struct CurvatureBundle {
    pub chern: ChernCurvature,
    pub rund: RundCurvature,
    pub canonical: Tensor,
    pub complexified: Tensor,
    pub ricci_chern: Tensor,
    pub ricci_canonical: Tensor,
    pub ricci_complexified: Tensor,
    pub scalar_chern: Complex64,
    pub scalar_canonical: Complex64,
    pub scalar_complexified: Complex64,
    pub torsion_square: TorsionSquare,
}

impl CurvatureBundle {
    pub fn compute(geo: &Geometry) -> Result<CurvatureBundle> {
        Assembly::new(geo)?.bundle()
    }
}

/// Canonical curvature from the coefficient form, with the outer horizontal
/// derivatives of the coefficient fields taken by finite differences.
pub fn canonical_curvature_fd(metric: &MetricExpr, p: &Point, h: f64) -> Result<Tensor> {
    let n = p.n();
    let n3 = n.pow(3);
    let coefficients = |q: &Point| -> Result<Vec<Complex64>> {
        let geo = Geometry::new(&eval_jet(metric, q, OrderBound::default())?)?;
        let mut out = Vec::with_capacity(2 * n3);
        out.extend(triples(n).map(|(g, a, m)| geo.canonical_series(g, a, m).value()));
        out.extend(triples(n).map(|(g, a, m)| geo.canonical_bar_series(g, a, m).value()));
        Ok(out)
    };
    let geo = Geometry::new(&eval_jet(metric, p, OrderBound::default())?)?;
    let asm = Assembly::new(&geo)?;
    let base = coefficients(p)?;
    let grad = field_gradient(coefficients, p, h)?;
    let [dz, dzbar, dv, dvbar] = &grad;
    let frame = geo.frame();
    let at = |g: usize, a: usize, m: usize| (g * n + a) * n + m;
    let hol = |k: usize| base[k];
    let anti = |k: usize| base[n3 + k];
    Ok(asm.all_down(|i| {
        let (a, b, mu, nu) = (i[0], i[1], i[2], i[3]);
        let mut acc = zero();
        for g in 0..n {
            let ka = n3 + at(g, a, nu);
            let kh = at(g, a, mu);
            let fiber: Vec<Complex64> = (0..n).map(|s| dv[s][ka]).collect();
            let fiber_bar: Vec<Complex64> = (0..n).map(|s| dvbar[s][kh]).collect();
            let mut inner = frame.horizontal(mu, dz[mu][ka], &fiber)
                - frame.horizontal_bar(nu, dzbar[nu][kh], &fiber_bar);
            for s in 0..n {
                inner += anti(at(s, a, nu)) * hol(at(g, s, mu)) - hol(at(s, a, mu)) * anti(at(g, s, nu));
            }
            acc += inner * geo.levi_value(g, b);
        }
        let tail: Complex64 = (0..n)
            .map(|s| geo.levi_v(a, b, s) * asm.delta_bar_nonlinear(nu, s, mu))
            .sum();
        acc - tail
    }))
}

/// Quartic contraction `T_{a b-bar mu nu-bar} H^a conj(H^b) H^mu conj(H^nu)`.
pub fn quartic(t: &Tensor, h: &[Complex64]) -> Complex64 {
    let n = t.n();
    let mut acc = zero();
    for a in 0..n {
        for b in 0..n {
            let ab = h[a] * h[b].conj();
            for mu in 0..n {
                for nu in 0..n {
                    acc += t.get(&[a, b, mu, nu]) * ab * h[mu] * h[nu].conj();
                }
            }
        }
    }
    acc
}

/// `G_{a b-bar} H^a conj(H^b)`.
pub fn horizontal_norm(geo: &Geometry, h: &[Complex64]) -> f64 {
    let n = geo.n();
    let mut acc = zero();
    for a in 0..n {
        for b in 0..n {
            acc += geo.levi_value(a, b) * h[a] * h[b].conj();
        }
    }
    acc.re
}

/// Flag curvature along `H` with the squared normalization.
pub fn flag_curvature(geo: &Geometry, t: &Tensor, h: &[Complex64]) -> Result<f64> {
    let norm = flag_norm(geo, h)?;
    Ok(quartic(t, h).re / (norm * norm))
}

/// Flag curvature along `H` with the unsquared normalization.
pub fn flag_curvature_unsquared(geo: &Geometry, t: &Tensor, h: &[Complex64]) -> Result<f64> {
    Ok(quartic(t, h).re / flag_norm(geo, h)?)
}

fn flag_norm(geo: &Geometry, h: &[Complex64]) -> Result<f64> {
    if h.len() != geo.n() {
        return Err(FinslerError::DimensionMismatch(format!(
            "flag vector has {} components for n = {}",
            h.len(),
            geo.n()
        )));
    }
    if h.iter().all(|c| c.norm() == 0.0) {
        return Err(FinslerError::ZeroVector("flag vector".into()));
    }
    Ok(horizontal_norm(geo, h))
}

/// Holomorphic sectional curvature: the flag curvature along `v`,
/// normalized by `G(z, v)^2`.
pub fn sectional_curvature(geo: &Geometry, t: &Tensor) -> f64 {
    let g = geo.metric_series().value().re;
    quartic(t, &geo.point().v).re / (g * g)
}

/// Flag and sectional curvatures of the Chern-Finsler and canonical
/// connections.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlagCurvatures {
    pub chern: f64,
    pub canonical: f64,
    pub chern_sectional: f64,
    pub canonical_sectional: f64,
    pub chern_unsquared: f64,
    pub canonical_unsquared: f64,
}

pub fn flag_and_sectional(geo: &Geometry, bundle: &CurvatureBundle, h: &[Complex64]) -> Result<FlagCurvatures> {
    Ok(FlagCurvatures {
        chern: flag_curvature(geo, &bundle.chern.horizontal, h)?,
        canonical: flag_curvature(geo, &bundle.canonical, h)?,
        chern_sectional: sectional_curvature(geo, &bundle.chern.horizontal),
        canonical_sectional: sectional_curvature(geo, &bundle.canonical),
        chern_unsquared: flag_curvature_unsquared(geo, &bundle.chern.horizontal, h)?,
        canonical_unsquared: flag_curvature_unsquared(geo, &bundle.canonical, h)?,
    })
}

/// `max |conj(T_{a b-bar mu nu-bar}) - T_{b a-bar nu mu-bar}|`.
pub fn conjugate_symmetry_defect(t: &Tensor) -> f64 {
    let n = t.n();
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            for mu in 0..n {
                for nu in 0..n {
                    let d = t.get(&[a, b, mu, nu]).conj() - t.get(&[b, a, nu, mu]);
                    worst = worst.max(d.norm());
                }
            }
        }
    }
    worst
}
