//! Fundamental tensor, nonlinear connection, horizontal derivatives and
//! connection coefficients at a point.
//!
//! Every field is carried as a truncated Taylor series around the point, so
//! horizontal derivatives are exact series operations:
//! `delta_mu X = d_mu X - N^s_mu dv_s X` and
//! `delta_nubar X = d_nubar X - conj(N^t_nu) dvbar_t X`.
//! Each application lowers the available orders, and the default bound
//! `(1, 1, 2, 2)` leaves exactly enough for every second horizontal
//! derivative the curvature formulas use.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{FinslerError, Result};
use crate::jets::{JetIndex, JetTable};
use crate::expr::Slot;
use crate::linalg;
use crate::point::Point;
use crate::series::{invert_matrix, Family, Series};
use crate::tensor::{IndexSlot, Tensor};

/// Hermitian residual tolerance of the Levi matrix, relative to its size.
pub const HERMITIAN_TOL: f64 = 1e-9;
/// Largest admissible condition number of the Levi matrix.
pub const MAX_CONDITION: f64 = 1e12;

use IndexSlot::{Lower, LowerBar, Upper, UpperBar};

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Levi matrix, its inverse and the nonlinear connection as plain values.
#[derive(Clone, Debug)]
pub struct FrameData {
    /// `G_{a b-bar}`, indexed `[a][b]`.
    pub levi: Tensor,
    /// `G^{b-bar a}`, indexed `[b][a]`.
    pub levi_inverse: Tensor,
    /// `Gamma^a_{;mu}`, indexed `[a][mu]`.
    pub nonlinear: Tensor,
    pub condition: f64,
    /// Levi eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
}

impl FrameData {
    /// `max |G^{b-bar a} G_{a l-bar} - delta|`.
    pub fn inverse_residual(&self) -> f64 {
        let n = self.levi.n();
        let prod = linalg::mat_mul(self.levi_inverse.data(), self.levi.data(), n);
        prod.iter()
            .enumerate()
            .map(|(k, v)| (v - Complex64::new(if k / n == k % n { 1.0 } else { 0.0 }, 0.0)).norm())
            .fold(0.0, f64::max)
    }

    /// `delta_mu T` from `d_mu T` and the fiber partials `dv_s T`.
    pub fn horizontal(&self, mu: usize, d_base: Complex64, d_fiber: &[Complex64]) -> Complex64 {
        d_base
            - d_fiber
                .iter()
                .enumerate()
                .map(|(s, &d)| self.nonlinear.get(&[s, mu]) * d)
                .sum::<Complex64>()
    }

    /// `delta_nubar T` from `d_nubar T` and the fiber partials `dvbar_t T`.
    pub fn horizontal_bar(&self, nu: usize, d_base: Complex64, d_fiber_bar: &[Complex64]) -> Complex64 {
        d_base
            - d_fiber_bar
                .iter()
                .enumerate()
                .map(|(t, &d)| self.nonlinear.get(&[t, nu]).conj() * d)
                .sum::<Complex64>()
    }
}

fn frame_from_values(p: &Arc<Point>, levi: Vec<Complex64>, z_vbar: &dyn Fn(usize, usize) -> Complex64) -> Result<(FrameData, Vec<Complex64>)> {
    let n = p.n();
    let size = levi.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let herm = linalg::hermitian_residual(&levi, n);
    if herm > HERMITIAN_TOL * (1.0 + size) {
        return Err(FinslerError::NotHermitian(herm));
    }
    let inv = linalg::invert(&levi, n)?;
    let condition = linalg::condition_number(&levi, &inv, n);
    if !(condition <= MAX_CONDITION) {
        return Err(FinslerError::IllConditioned(condition));
    }
    let eigenvalues = linalg::hermitian_eigenvalues(&levi, n);
    // inv is (G_{a b-bar})^{-1}; as a matrix indexed [b][a] it is G^{b-bar a}.
    let nonlinear = Tensor::from_fn(vec![Upper, Lower], p.clone(), |i| {
        (0..n).map(|l| inv[l * n + i[0]] * z_vbar(i[1], l)).sum()
    });
    let frame = FrameData {
        levi: Tensor::new(vec![Lower, LowerBar], n, levi, p.clone())?,
        levi_inverse: Tensor::new(vec![UpperBar, Upper], n, inv.clone(), p.clone())?,
        nonlinear,
        condition,
        eigenvalues,
    };
    Ok((frame, inv))
}

/// Levi matrix and inverse from jet values.
pub fn fundamental_tensor(jet: &JetTable) -> Result<FrameData> {
    let n = jet.n();
    let p = Arc::new(jet.point().clone());
    let entry = |idx: JetIndex| {
        jet.entry(&idx)
            .ok_or_else(|| FinslerError::OrderExhausted(format!("jet bound {:?}", jet.bound())))
    };
    let mut levi = Vec::with_capacity(n * n);
    for a in 1..=n {
        for b in 1..=n {
            levi.push(entry(JetIndex::zero(n).with(Slot::V, a).with(Slot::Vbar, b))?);
        }
    }
    let mut mixed = vec![zero(); n * n];
    let has_z = jet.bound().z >= 1;
    for mu in 0..n {
        for l in 0..n {
            if has_z {
                mixed[mu * n + l] = entry(JetIndex::zero(n).with(Slot::Z, mu + 1).with(Slot::Vbar, l + 1))?;
            }
        }
    }
    let (frame, _) = frame_from_values(&p, levi, &|mu, l| mixed[mu * n + l])?;
    Ok(frame)
}

/// `Gamma^a_{;mu} = G^{l-bar a} G_{l-bar;mu}` from jet values.
pub fn nonlinear_connection(jet: &JetTable, frame: &FrameData) -> Result<Tensor> {
    if jet.bound().z < 1 || jet.bound().vbar < 1 {
        return Err(FinslerError::OrderExhausted("nonlinear connection needs (1, 0, 0, 1)".into()));
    }
    let n = jet.n();
    Ok(Tensor::from_fn(vec![Upper, Lower], frame.levi.point().clone(), |i| {
        (0..n)
            .map(|l| {
                let d = jet
                    .entry(&JetIndex::zero(n).with(Slot::Z, i[1] + 1).with(Slot::Vbar, l + 1))
                    .unwrap_or_default();
                frame.levi_inverse.get(&[l, i[0]]) * d
            })
            .sum()
    }))
}

/// Series-level geometric fields at one point.
pub struct Geometry {
    n: usize,
    point: Arc<Point>,
    g: Series,
    frame: FrameData,
    /// `G_{a b-bar}` as series, `[a][b]`.
    levi: Vec<Series>,
    /// `G^{b-bar a}` as series, `[b][a]`.
    levi_inv: Vec<Series>,
    /// `Gamma^a_{;mu}`, `[a][mu]`.
    nl: Vec<Series>,
    /// `conj(Gamma^a_{;mu})`, `[a][mu]`.
    nl_bar: Vec<Series>,
    /// `delta_mu(G_{b l-bar})`, `[mu][b][l]`.
    dh: Vec<Series>,
    /// `delta_nubar(G_{b l-bar})`, `[nu][b][l]`.
    dhb: Vec<Series>,
    /// `Gamma^a_{b;mu}`, `[a][b][mu]`.
    chern_h: Vec<Series>,
    /// `Gamma^a_{b g}`, `[a][b][g]`.
    chern_v: Vec<Series>,
}

impl Geometry {
    pub fn new(jet: &JetTable) -> Result<Geometry> {
        jet.bound().require_curvature()?;
        let n = jet.n();
        let point = Arc::new(jet.point().clone());
        let g = jet.series().clone();
        let g_vbar: Vec<Series> = (0..n).map(|l| g.deriv(Family::Vbar, l)).collect::<Result<_>>()?;
        let mut levi = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                levi.push(g_vbar[b].deriv(Family::V, a)?);
            }
        }
        let levi_values: Vec<Complex64> = levi.iter().map(Series::value).collect();
        // G_{l-bar;mu}, [mu][l]
        let mut z_vbar = Vec::with_capacity(n * n);
        for mu in 0..n {
            for l in 0..n {
                z_vbar.push(g_vbar[l].deriv(Family::Z, mu)?);
            }
        }
        let (frame, inv_values) = frame_from_values(&point, levi_values, &|mu, l| z_vbar[mu * n + l].value())?;
        // invert_matrix returns (A)^{-1} indexed like inv_values, i.e. [b][a].
        let levi_inv = invert_matrix(&levi, n, &inv_values);
        let mut nl = Vec::with_capacity(n * n);
        for a in 0..n {
            for mu in 0..n {
                let mut acc = levi_inv[a].mul(&z_vbar[mu * n]);
                for l in 1..n {
                    acc = acc.add(&levi_inv[l * n + a].mul(&z_vbar[mu * n + l]));
                }
                nl.push(acc);
            }
        }
        let nl_bar = nl.iter().map(Series::conj).collect();
        let mut geo = Geometry {
            n,
            point,
            g,
            frame,
            levi,
            levi_inv,
            nl,
            nl_bar,
            dh: vec![],
            dhb: vec![],
            chern_h: vec![],
            chern_v: vec![],
        };
        let mut dh = Vec::with_capacity(n * n * n);
        let mut dhb = Vec::with_capacity(n * n * n);
        for mu in 0..n {
            for b in 0..n {
                for l in 0..n {
                    dh.push(geo.delta(mu, &geo.levi[b * n + l])?);
                    dhb.push(geo.delta_bar(mu, &geo.levi[b * n + l])?);
                }
            }
        }
        geo.dh = dh;
        geo.dhb = dhb;
        let mut chern_h = Vec::with_capacity(n * n * n);
        let mut chern_v = Vec::with_capacity(n * n * n);
        for a in 0..n {
            for b in 0..n {
                for mu in 0..n {
                    let h = geo.raise_with(a, |l| geo.dh[(mu * n + b) * n + l].clone());
                    chern_h.push(h);
                    let v = geo.raise_with(a, |l| geo.levi[b * n + l].deriv(Family::V, mu).expect("v order"));
                    chern_v.push(v);
                }
            }
        }
        geo.chern_h = chern_h;
        geo.chern_v = chern_v;
        Ok(geo)
    }

    /// `sum_l G^{l-bar a} X_l` as a series.
    fn raise_with(&self, a: usize, x: impl Fn(usize) -> Series) -> Series {
        let n = self.n;
        let mut acc = self.levi_inv[a].mul(&x(0));
        for l in 1..n {
            acc = acc.add(&self.levi_inv[l * n + a].mul(&x(l)));
        }
        acc
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn point(&self) -> &Arc<Point> {
        &self.point
    }

    pub fn frame(&self) -> &FrameData {
        &self.frame
    }

    /// The series of `G` itself.
    pub fn metric_series(&self) -> &Series {
        &self.g
    }

    pub fn levi_series(&self, a: usize, b: usize) -> &Series {
        &self.levi[a * self.n + b]
    }

    pub fn levi_inverse_series(&self, b: usize, a: usize) -> &Series {
        &self.levi_inv[b * self.n + a]
    }

    pub fn nonlinear_series(&self, a: usize, mu: usize) -> &Series {
        &self.nl[a * self.n + mu]
    }

    /// `delta_mu(G_{b l-bar})`.
    pub fn delta_levi(&self, mu: usize, b: usize, l: usize) -> &Series {
        &self.dh[(mu * self.n + b) * self.n + l]
    }

    /// `delta_nubar(G_{b l-bar})`.
    pub fn delta_bar_levi(&self, nu: usize, b: usize, l: usize) -> &Series {
        &self.dhb[(nu * self.n + b) * self.n + l]
    }

    /// `Gamma^a_{b;mu}` as a series.
    pub fn chern_horizontal_series(&self, a: usize, b: usize, mu: usize) -> &Series {
        &self.chern_h[(a * self.n + b) * self.n + mu]
    }

    /// `Gamma^a_{b g}` as a series.
    pub fn chern_vertical_series(&self, a: usize, b: usize, g: usize) -> &Series {
        &self.chern_v[(a * self.n + b) * self.n + g]
    }

    /// `delta_mu X = d_mu X - Gamma^s_{;mu} dv_s X`.
    pub fn delta(&self, mu: usize, x: &Series) -> Result<Series> {
        let mut out = x.deriv(Family::Z, mu)?;
        for s in 0..self.n {
            out = out.sub(&self.nl[s * self.n + mu].mul(&x.deriv(Family::V, s)?));
        }
        Ok(out)
    }

    /// `delta_nubar X = d_nubar X - conj(Gamma^t_{;nu}) dvbar_t X`.
    pub fn delta_bar(&self, nu: usize, x: &Series) -> Result<Series> {
        let mut out = x.deriv(Family::Zbar, nu)?;
        for t in 0..self.n {
            out = out.sub(&self.nl_bar[t * self.n + nu].mul(&x.deriv(Family::Vbar, t)?));
        }
        Ok(out)
    }

    /// `G_a = dG/dv^a` at the point.
    pub fn metric_v(&self, a: usize) -> Complex64 {
        self.g.partial(unit(Family::V, a)).unwrap_or_default()
    }

    /// `G_{;a} = dG/dz^a` at the point.
    pub fn metric_z(&self, a: usize) -> Complex64 {
        self.g.partial(unit(Family::Z, a)).unwrap_or_default()
    }

    /// `G_{a b-bar s} = dv_s G_{a b-bar}` at the point.
    pub fn levi_v(&self, a: usize, b: usize, s: usize) -> Complex64 {
        self.levi[a * self.n + b].partial(unit(Family::V, s)).unwrap_or_default()
    }

    /// `G_{a b-bar t-bar} = dvbar_t G_{a b-bar}` at the point.
    pub fn levi_vbar(&self, a: usize, b: usize, t: usize) -> Complex64 {
        self.levi[a * self.n + b].partial(unit(Family::Vbar, t)).unwrap_or_default()
    }

    pub fn levi_value(&self, a: usize, b: usize) -> Complex64 {
        self.frame.levi.get(&[a, b])
    }

    pub fn levi_inverse_value(&self, b: usize, a: usize) -> Complex64 {
        self.frame.levi_inverse.get(&[b, a])
    }

    fn tensor(&self, labels: Vec<IndexSlot>, f: impl FnMut(&[usize]) -> Complex64) -> Tensor {
        Tensor::from_fn(labels, self.point.clone(), f)
    }

    pub fn nonlinear_connection(&self) -> Tensor {
        self.frame.nonlinear.clone()
    }

    pub fn chern_finsler_coeffs(&self) -> ChernCoefficients {
        ChernCoefficients {
            horizontal: self.tensor(vec![Upper, Lower, Lower], |i| {
                self.chern_horizontal_series(i[0], i[1], i[2]).value()
            }),
            vertical: self.tensor(vec![Upper, Lower, Lower], |i| {
                self.chern_vertical_series(i[0], i[1], i[2]).value()
            }),
        }
    }

    /// Horizontal coefficients of the complex Rund connection.
    pub fn rund_coeffs(&self) -> Tensor {
        self.chern_finsler_coeffs().horizontal
    }

    /// `L^a_{b mu}` as a series.
    pub fn canonical_series(&self, a: usize, b: usize, mu: usize) -> Series {
        let n = self.n;
        self.raise_with(a, |l| {
            self.dh[(mu * n + b) * n + l]
                .add(&self.dh[(b * n + mu) * n + l])
                .scale(Complex64::new(0.5, 0.0))
        })
    }

    /// `L^a_{b mu-bar}` as a series.
    pub fn canonical_bar_series(&self, a: usize, b: usize, mu: usize) -> Series {
        let n = self.n;
        self.raise_with(a, |l| {
            self.dhb[(mu * n + b) * n + l]
                .sub(&self.dhb[(l * n + b) * n + mu])
                .scale(Complex64::new(0.5, 0.0))
        })
    }

    pub fn canonical_coeffs(&self) -> CanonicalCoefficients {
        CanonicalCoefficients {
            holomorphic: self.tensor(vec![Upper, Lower, Lower], |i| {
                self.canonical_series(i[0], i[1], i[2]).value()
            }),
            antiholomorphic: self.tensor(vec![Upper, Lower, LowerBar], |i| {
                self.canonical_bar_series(i[0], i[1], i[2]).value()
            }),
            vertical: self.chern_finsler_coeffs().vertical,
        }
    }

    /// `S^g_{a b} = (Gamma^g_{a;b} - Gamma^g_{b;a}) / 2` as a series.
    pub fn torsion_series(&self, g: usize, a: usize, b: usize) -> Series {
        self.chern_horizontal_series(g, a, b)
            .sub(self.chern_horizontal_series(g, b, a))
            .scale(Complex64::new(0.5, 0.0))
    }

    /// `S_a = sum_g S^g_{a g}` as a series.
    pub fn torsion_trace_series(&self, a: usize) -> Series {
        let mut acc = self.torsion_series(0, a, 0);
        for g in 1..self.n {
            acc = acc.add(&self.torsion_series(g, a, g));
        }
        acc
    }

    pub fn torsions(&self) -> Torsions {
        let n = self.n;
        let horizontal = self.tensor(vec![Upper, Lower, Lower], |i| {
            let d = self.chern_horizontal_series(i[0], i[1], i[2]).value()
                - self.chern_horizontal_series(i[0], i[2], i[1]).value();
            d * 0.5
        });
        let trace = self.tensor(vec![Lower], |i| (0..n).map(|g| horizontal.get(&[g, i[0], g])).sum());
        let three_form = self.tensor(vec![Lower, Lower, LowerBar], |i| {
            (self.delta_levi(i[1], i[0], i[2]).value() - self.delta_levi(i[0], i[1], i[2]).value()) * 0.5
        });
        let canonical_bar = self.tensor(vec![Upper, Lower, LowerBar], |i| {
            self.canonical_bar_series(i[0], i[1], i[2]).value()
        });
        let v = &self.point.v;
        let weak_kahler = self.tensor(vec![Lower], |i| {
            let mu = i[0];
            let mut acc = zero();
            for a in 0..n {
                for b in 0..n {
                    let d = self.chern_horizontal_series(a, b, mu).value()
                        - self.chern_horizontal_series(a, mu, b).value();
                    acc += self.metric_v(a) * d * v[b];
                }
            }
            acc
        });
        Torsions {
            horizontal,
            trace,
            canonical_bar,
            three_form,
            weak_kahler,
        }
    }

    /// Coefficient blocks of the (2,0) and (1,1) torsion forms.
    pub fn torsion_form_coeffs(&self) -> Result<TorsionForms> {
        let n = self.n;
        let mut delta_bar_nl = Vec::with_capacity(n * n * n);
        let mut vbar_nl = Vec::with_capacity(n * n * n);
        for a in 0..n {
            for mu in 0..n {
                for nu in 0..n {
                    delta_bar_nl.push(self.delta_bar(nu, &self.nl[a * n + mu])?.value());
                    vbar_nl.push(self.nl[a * n + mu].deriv(Family::Vbar, nu)?.value());
                }
            }
        }
        Ok(TorsionForms {
            horizontal: self.torsions().horizontal,
            vertical: self.chern_finsler_coeffs().vertical,
            delta_bar_nonlinear: Tensor::new(vec![Upper, Lower, LowerBar], n, delta_bar_nl, self.point.clone())?,
            vbar_nonlinear: Tensor::new(vec![Upper, Lower, LowerBar], n, vbar_nl, self.point.clone())?,
        })
    }
}

fn unit(f: Family, j: usize) -> [usize; 4] {
    let mut idx = [0usize; 4];
    idx[f as usize] = 1 + j;
    idx
}

/// Chern-Finsler coefficients `Gamma^a_{b;mu}` and `Gamma^a_{b g}`.
#[derive(Clone, Debug)]
pub struct ChernCoefficients {
    pub horizontal: Tensor,
    pub vertical: Tensor,
}

/// Canonical connection coefficients `L^a_{b mu}`, `L^a_{b mu-bar}`, `C^a_{b mu}`.
#[derive(Clone, Debug)]
pub struct CanonicalCoefficients {
    pub holomorphic: Tensor,
    pub antiholomorphic: Tensor,
    pub vertical: Tensor,
}

#[derive(Clone, Debug)]
pub struct Torsions {
    /// `S^g_{a b}`, `[g][a][b]`.
    pub horizontal: Tensor,
    /// `S_a`.
    pub trace: Tensor,
    /// `L^g_{a b-bar}`, `[g][a][b]`.
    pub canonical_bar: Tensor,
    /// `S_{a g l-bar}`, `[a][g][l]`.
    pub three_form: Tensor,
    /// `G_a (Gamma^a_{b;mu} - Gamma^a_{mu;b}) v^b`, `[mu]`.
    pub weak_kahler: Tensor,
}

#[derive(Clone, Debug)]
pub struct TorsionForms {
    /// `(Gamma^m_{n;s} - Gamma^m_{s;n}) / 2`, `[m][n][s]`.
    pub horizontal: Tensor,
    /// `Gamma^m_{n g}`.
    pub vertical: Tensor,
    /// `delta_nubar(Gamma^a_{;mu})`, `[a][mu][nu]`.
    pub delta_bar_nonlinear: Tensor,
    /// `dvbar_b(Gamma^a_{;mu})`, `[a][mu][b]`.
    pub vbar_nonlinear: Tensor,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build_hermitian, HermitianData};
    use crate::jets::{eval_jet, OrderBound};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn geo_of(h: &HermitianData, p: &Point) -> Geometry {
        let m = build_hermitian(h).unwrap();
        Geometry::new(&eval_jet(&m, p, OrderBound::default()).unwrap()).unwrap()
    }

    fn p2() -> Point {
        Point::new(vec![c(0.3, -0.2), c(-0.1, 0.4)], vec![c(0.8, 0.1), c(-0.3, 0.6)]).unwrap()
    }

    #[test]
    fn flat_frame_is_identity() {
        let g = geo_of(&HermitianData::flat(2), &p2());
        assert!(g.frame().inverse_residual() < 1e-15);
        assert!(g.frame().nonlinear.max_abs() < 1e-15);
        assert!((g.frame().eigenvalues[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fubini_study_frame_at_origin() {
        let p = Point::new(vec![c(0.0, 0.0); 2], vec![c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let g = geo_of(&HermitianData::fubini_study(2), &p);
        for a in 0..2 {
            for b in 0..2 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((g.levi_value(a, b) - c(want, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn value_level_frame_matches_series_frame() {
        let m = build_hermitian(&HermitianData::fubini_study(2)).unwrap();
        let jet = eval_jet(&m, &p2(), OrderBound::default()).unwrap();
        let f = fundamental_tensor(&jet).unwrap();
        let nl = nonlinear_connection(&jet, &f).unwrap();
        let g = Geometry::new(&jet).unwrap();
        assert!(nl.max_diff(&g.nonlinear_connection()).unwrap() < 1e-14);
        assert!(f.nonlinear.max_diff(&nl).unwrap() < 1e-14);
    }

    #[test]
    fn horizontal_derivative_of_metric_vanishes() {
        let rho = crate::catalog::NamedRho::ReZ1.scalar();
        let g = geo_of(&HermitianData::conformal_flat(2, &rho).unwrap(), &p2());
        for mu in 0..2 {
            assert!(g.delta(mu, g.metric_series()).unwrap().value().norm() < 1e-14);
            assert!(g.delta_bar(mu, g.metric_series()).unwrap().value().norm() < 1e-14);
        }
    }

    #[test]
    fn conformal_torsion_trace() {
        // e^{Re z1} flat, n = 2: S_a = (1 - n)/2 * rho_{;a} = -1/4 delta_a1
        let rho = crate::catalog::NamedRho::ReZ1.scalar();
        let g = geo_of(&HermitianData::conformal_flat(2, &rho).unwrap(), &p2());
        let t = g.torsions();
        assert!((t.trace.get(&[0]) - c(-0.25, 0.0)).norm() < 1e-14);
        assert!(t.trace.get(&[1]).norm() < 1e-14);
    }
}
