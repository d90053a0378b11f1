//! Truncated multivariate Taylor series over the polarized coordinates.
//!
//! A [`Series`] stores the Taylor coefficients of a function of the `4n`
//! independent variables `(z, zbar, v, vbar)` around a base point. Each of
//! the four variable families carries its own total-degree bound, so a
//! series with bound `[1, 1, 2, 2]` holds every coefficient whose degree is
//! at most one in `z`, one in `zbar`, two in `v` and two in `vbar`.
//!
//! Products truncate to the componentwise minimum of the operand bounds and
//! differentiation lowers the bound of the differentiated family by one, so
//! every coefficient a series reports is exact up to floating round-off.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use crate::error::{FinslerError, Result};

/// One of the four variable families of the polarized coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Z = 0,
    Zbar = 1,
    V = 2,
    Vbar = 3,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Z, Family::Zbar, Family::V, Family::Vbar];

    /// The family holding the complex conjugate variables.
    pub fn conj(self) -> Family {
        match self {
            Family::Z => Family::Zbar,
            Family::Zbar => Family::Z,
            Family::V => Family::Vbar,
            Family::Vbar => Family::V,
        }
    }
}

/// Per-family degree bounds, ordered `[z, zbar, v, vbar]`.
pub type Bound = [u8; 4];

/// Monomial tables for `n` variables up to a maximum degree.
///
/// Monomials are enumerated in graded order, so the monomials of degree at
/// most `d` are always a prefix of the enumeration. Indices are therefore
/// shared by every bound below the table's maximum.
#[derive(Debug)]
pub struct JetSpace {
    n: usize,
    max_degree: u8,
    monomials: Vec<Vec<u8>>,
    degree: Vec<u8>,
    /// `upto[d]` = number of monomials of degree `<= d`.
    upto: Vec<usize>,
    /// `raise[i * n + j]` = index of `monomials[i] + e_j`, or `usize::MAX`.
    raise: Vec<usize>,
    /// Product triples `(i, j, k)` with `m_i + m_j = m_k`, sorted by `deg(m_k)`.
    triples: Vec<(u32, u32, u32)>,
    /// `triples_upto[d]` = number of triples whose result has degree `<= d`.
    triples_upto: Vec<usize>,
    /// `prod_j m_j!` for every monomial.
    factorial: Vec<f64>,
    index: HashMap<Vec<u8>, usize>,
}

type SpaceCache = Mutex<HashMap<(usize, u8), Arc<JetSpace>>>;

fn space_cache() -> &'static SpaceCache {
    static CACHE: OnceLock<SpaceCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl JetSpace {
    /// Shared tables for `n` variables per family up to `max_degree`.
    pub fn shared(n: usize, max_degree: u8) -> Arc<JetSpace> {
        let mut cache = space_cache().lock().expect("jet space cache poisoned");
        cache
            .entry((n, max_degree))
            .or_insert_with(|| Arc::new(JetSpace::build(n, max_degree)))
            .clone()
    }

    fn build(n: usize, max_degree: u8) -> JetSpace {
        let mut monomials: Vec<Vec<u8>> = vec![vec![0; n]];
        let mut upto = vec![1usize];
        let mut frontier: Vec<Vec<u8>> = vec![vec![0; n]];
        for _ in 1..=max_degree {
            // Degree d monomials generated from degree d-1 by raising the
            // first variable at or after the last nonzero position.
            let mut next = Vec::new();
            for m in &frontier {
                let start = m.iter().rposition(|&e| e > 0).unwrap_or(0);
                for j in start..n {
                    let mut r = m.clone();
                    r[j] += 1;
                    next.push(r);
                }
            }
            monomials.extend(next.iter().cloned());
            upto.push(monomials.len());
            frontier = next;
        }
        let index: HashMap<Vec<u8>, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let degree: Vec<u8> = monomials.iter().map(|m| m.iter().sum()).collect();
        let mut raise = vec![usize::MAX; monomials.len() * n];
        for (i, m) in monomials.iter().enumerate() {
            for j in 0..n {
                let mut r = m.clone();
                r[j] += 1;
                if let Some(&k) = index.get(&r) {
                    raise[i * n + j] = k;
                }
            }
        }
        let mut triples = Vec::new();
        for (i, mi) in monomials.iter().enumerate() {
            for (j, mj) in monomials.iter().enumerate() {
                if degree[i] + degree[j] > max_degree {
                    continue;
                }
                let sum: Vec<u8> = mi.iter().zip(mj).map(|(a, b)| a + b).collect();
                let k = index[&sum];
                triples.push((i as u32, j as u32, k as u32));
            }
        }
        triples.sort_by_key(|&(_, _, k)| (degree[k as usize], k));
        let triples_upto = (0..=max_degree)
            .map(|d| triples.iter().filter(|t| degree[t.2 as usize] <= d).count())
            .collect();
        let factorial = monomials
            .iter()
            .map(|m| m.iter().map(|&e| (1..=e as u32).product::<u32>() as f64).product())
            .collect();
        JetSpace {
            n,
            max_degree,
            monomials,
            degree,
            upto,
            raise,
            triples,
            triples_upto,
            factorial,
            index,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_degree(&self) -> u8 {
        self.max_degree
    }

    /// Number of monomials of degree at most `d`.
    pub fn count(&self, d: u8) -> usize {
        self.upto[d as usize]
    }

    pub fn monomial(&self, i: usize) -> &[u8] {
        &self.monomials[i]
    }

    pub fn degree_of(&self, i: usize) -> u8 {
        self.degree[i]
    }

    /// Index of an exponent vector, if it lies within the table.
    pub fn index_of(&self, m: &[u8]) -> Option<usize> {
        self.index.get(m).copied()
    }

    fn triples(&self, d: u8) -> &[(u32, u32, u32)] {
        &self.triples[..self.triples_upto[d as usize]]
    }
}

/// Truncated Taylor series in the polarized variables.
#[derive(Clone, Debug)]
pub struct Series {
    space: Arc<JetSpace>,
    bound: Bound,
    coef: Vec<Complex64>,
}

fn strides(space: &JetSpace, bound: &Bound) -> ([usize; 4], usize) {
    let c: Vec<usize> = bound.iter().map(|&b| space.count(b)).collect();
    let s3 = 1;
    let s2 = c[3];
    let s1 = c[2] * s2;
    let s0 = c[1] * s1;
    ([s0, s1, s2, s3], c[0] * s0)
}

fn min_bound(a: &Bound, b: &Bound) -> Bound {
    [a[0].min(b[0]), a[1].min(b[1]), a[2].min(b[2]), a[3].min(b[3])]
}

impl Series {
    pub fn constant(space: &Arc<JetSpace>, bound: Bound, value: Complex64) -> Series {
        debug_assert!(bound.iter().all(|&b| b <= space.max_degree));
        let (_, len) = strides(space, &bound);
        let mut coef = vec![Complex64::new(0.0, 0.0); len];
        coef[0] = value;
        Series {
            space: space.clone(),
            bound,
            coef,
        }
    }

    /// The coordinate function `x_j` of `family`, expanded around `value`.
    pub fn variable(
        space: &Arc<JetSpace>,
        bound: Bound,
        family: Family,
        j: usize,
        value: Complex64,
    ) -> Series {
        let mut s = Series::constant(space, bound, value);
        let f = family as usize;
        if bound[f] >= 1 {
            let (st, _) = strides(space, &bound);
            // Degree-one monomials occupy indices 1..=n in graded order.
            s.coef[(1 + j) * st[f]] = Complex64::new(1.0, 0.0);
        }
        s
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn bound(&self) -> Bound {
        self.bound
    }

    pub fn n(&self) -> usize {
        self.space.n
    }

    /// Constant term, i.e. the function value at the base point.
    pub fn value(&self) -> Complex64 {
        self.coef[0]
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coef
    }

    /// Sum of the family bounds: the highest total degree carried.
    pub fn total_degree(&self) -> u32 {
        self.bound.iter().map(|&b| b as u32).sum()
    }

    /// Taylor coefficient for per-family monomial indices.
    pub fn coefficient(&self, idx: [usize; 4]) -> Option<Complex64> {
        for f in 0..4 {
            if idx[f] >= self.space.count(self.bound[f]) {
                return None;
            }
        }
        let (st, _) = strides(&self.space, &self.bound);
        Some(self.coef[idx[0] * st[0] + idx[1] * st[1] + idx[2] * st[2] + idx[3]])
    }

    /// Mixed partial derivative for per-family monomial indices.
    pub fn partial(&self, idx: [usize; 4]) -> Option<Complex64> {
        let c = self.coefficient(idx)?;
        let w: f64 = idx.iter().map(|&i| self.space.factorial[i]).product();
        Some(c * w)
    }

    /// Copy of this series truncated to a smaller bound.
    pub fn restrict(&self, bound: Bound) -> Series {
        let target = min_bound(&self.bound, &bound);
        if target == self.bound {
            return self.clone();
        }
        let (ss, _) = strides(&self.space, &self.bound);
        let (ts, len) = strides(&self.space, &target);
        let c: Vec<usize> = target.iter().map(|&b| self.space.count(b)).collect();
        let mut coef = vec![Complex64::new(0.0, 0.0); len];
        for i0 in 0..c[0] {
            for i1 in 0..c[1] {
                for i2 in 0..c[2] {
                    let src = i0 * ss[0] + i1 * ss[1] + i2 * ss[2];
                    let dst = i0 * ts[0] + i1 * ts[1] + i2 * ts[2];
                    coef[dst..dst + c[3]].copy_from_slice(&self.coef[src..src + c[3]]);
                }
            }
        }
        Series {
            space: self.space.clone(),
            bound: target,
            coef,
        }
    }

    fn zip_with(&self, other: &Series, f: impl Fn(Complex64, Complex64) -> Complex64) -> Series {
        debug_assert!(Arc::ptr_eq(&self.space, &other.space));
        if self.bound == other.bound {
            let coef = self
                .coef
                .iter()
                .zip(&other.coef)
                .map(|(&a, &b)| f(a, b))
                .collect();
            return Series {
                space: self.space.clone(),
                bound: self.bound,
                coef,
            };
        }
        let target = min_bound(&self.bound, &other.bound);
        let a = self.restrict(target);
        let b = other.restrict(target);
        a.zip_with(&b, f)
    }

    pub fn add(&self, other: &Series) -> Series {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Series) -> Series {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn neg(&self) -> Series {
        self.scale(Complex64::new(-1.0, 0.0))
    }

    pub fn scale(&self, k: Complex64) -> Series {
        Series {
            space: self.space.clone(),
            bound: self.bound,
            coef: self.coef.iter().map(|&c| c * k).collect(),
        }
    }

    pub fn add_constant(&self, k: Complex64) -> Series {
        let mut s = self.clone();
        s.coef[0] += k;
        s
    }

    /// Accumulate `k * other` into `self` (bounds truncate to the minimum).
    pub fn add_scaled(&self, other: &Series, k: Complex64) -> Series {
        self.zip_with(other, |a, b| a + k * b)
    }

    /// Truncated product.
    pub fn mul(&self, other: &Series) -> Series {
        debug_assert!(Arc::ptr_eq(&self.space, &other.space));
        let space = &self.space;
        let target = min_bound(&self.bound, &other.bound);
        let (sa, _) = strides(space, &self.bound);
        let (sb, _) = strides(space, &other.bound);
        let (sr, len) = strides(space, &target);
        let mut out = vec![Complex64::new(0.0, 0.0); len];
        let t0 = space.triples(target[0]);
        let t1 = space.triples(target[1]);
        let t2 = space.triples(target[2]);
        let t3 = space.triples(target[3]);
        let a = &self.coef;
        let b = &other.coef;
        for &(a0, b0, k0) in t0 {
            let (pa0, pb0, pr0) = (a0 as usize * sa[0], b0 as usize * sb[0], k0 as usize * sr[0]);
            for &(a1, b1, k1) in t1 {
                let pa1 = pa0 + a1 as usize * sa[1];
                let pb1 = pb0 + b1 as usize * sb[1];
                let pr1 = pr0 + k1 as usize * sr[1];
                for &(a2, b2, k2) in t2 {
                    let pa2 = pa1 + a2 as usize * sa[2];
                    let pb2 = pb1 + b2 as usize * sb[2];
                    let pr2 = pr1 + k2 as usize * sr[2];
                    for &(a3, b3, k3) in t3 {
                        out[pr2 + k3 as usize] += a[pa2 + a3 as usize] * b[pb2 + b3 as usize];
                    }
                }
            }
        }
        Series {
            space: space.clone(),
            bound: target,
            coef: out,
        }
    }

    /// Partial derivative with respect to variable `j` of `family`.
    ///
    /// Fails when the family bound is already zero.
    pub fn deriv(&self, family: Family, j: usize) -> Result<Series> {
        let f = family as usize;
        if self.bound[f] == 0 {
            return Err(FinslerError::OrderExhausted(format!(
                "{family:?} derivative of a series with bound {:?}",
                self.bound
            )));
        }
        let space = &self.space;
        let n = space.n;
        let mut target = self.bound;
        target[f] -= 1;
        let (ss, _) = strides(space, &self.bound);
        let (ts, len) = strides(space, &target);
        let c: Vec<usize> = target.iter().map(|&b| space.count(b)).collect();
        let mut coef = vec![Complex64::new(0.0, 0.0); len];
        for i0 in 0..c[0] {
            for i1 in 0..c[1] {
                for i2 in 0..c[2] {
                    for i3 in 0..c[3] {
                        let idx = [i0, i1, i2, i3];
                        let m = idx[f];
                        let raised = space.raise[m * n + j];
                        let factor = space.monomials[m][j] as f64 + 1.0;
                        let mut src = idx;
                        src[f] = raised;
                        let s = src[0] * ss[0] + src[1] * ss[1] + src[2] * ss[2] + src[3];
                        coef[i0 * ts[0] + i1 * ts[1] + i2 * ts[2] + i3] = self.coef[s] * factor;
                    }
                }
            }
        }
        Ok(Series {
            space: space.clone(),
            bound: target,
            coef,
        })
    }

    /// Polarized conjugate: swaps `z <-> zbar`, `v <-> vbar` and conjugates
    /// coefficients, so that at consistent points the value is `conj(f)`.
    pub fn conj(&self) -> Series {
        let space = &self.space;
        let target = [self.bound[1], self.bound[0], self.bound[3], self.bound[2]];
        let (ss, _) = strides(space, &self.bound);
        let (ts, len) = strides(space, &target);
        let c: Vec<usize> = self.bound.iter().map(|&b| space.count(b)).collect();
        let mut coef = vec![Complex64::new(0.0, 0.0); len];
        for i0 in 0..c[0] {
            for i1 in 0..c[1] {
                for i2 in 0..c[2] {
                    for i3 in 0..c[3] {
                        let s = i0 * ss[0] + i1 * ss[1] + i2 * ss[2] + i3;
                        let t = i1 * ts[0] + i0 * ts[1] + i3 * ts[2] + i2;
                        coef[t] = self.coef[s].conj();
                    }
                }
            }
        }
        Series {
            space: space.clone(),
            bound: target,
            coef,
        }
    }

    /// `sum_k taylor[k] * (self - value)^k`, with `taylor[k] = f^(k)(value) / k!`.
    fn compose(&self, taylor: &[Complex64]) -> Series {
        let mut nil = self.clone();
        nil.coef[0] = Complex64::new(0.0, 0.0);
        let k_max = taylor.len() - 1;
        let mut acc = Series::constant(&self.space, self.bound, taylor[k_max]);
        for k in (0..k_max).rev() {
            acc = acc.mul(&nil).add_constant(taylor[k]);
        }
        acc
    }

    fn order_count(&self) -> usize {
        self.total_degree() as usize + 1
    }

    pub fn exp(&self) -> Series {
        let e = self.value().exp();
        let mut taylor = Vec::with_capacity(self.order_count());
        let mut fact = 1.0;
        for k in 0..self.order_count() {
            if k > 0 {
                fact *= k as f64;
            }
            taylor.push(e / fact);
        }
        self.compose(&taylor)
    }

    pub fn ln(&self, guard: f64) -> Result<Series> {
        let x0 = self.value();
        if x0.norm() < guard {
            return Err(FinslerError::NearSingular(format!("log of {x0}")));
        }
        let mut taylor = vec![x0.ln()];
        for k in 1..self.order_count() {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            taylor.push(sign / (k as f64 * x0.powi(k as i32)));
        }
        Ok(self.compose(&taylor))
    }

    /// Real power with the principal branch; integer exponents are exact
    /// repeated products and allow a vanishing base.
    pub fn powf(&self, p: f64, guard: f64) -> Result<Series> {
        if p.fract() == 0.0 && (0.0..=64.0).contains(&p) {
            return Ok(self.powi(p as u32));
        }
        let x0 = self.value();
        if x0.norm() < guard {
            return Err(FinslerError::NearSingular(format!("power {p} of {x0}")));
        }
        let mut taylor = Vec::with_capacity(self.order_count());
        let mut binom = 1.0;
        for k in 0..self.order_count() {
            if k > 0 {
                binom *= (p - (k as f64 - 1.0)) / k as f64;
            }
            taylor.push(binom * x0.powc(Complex64::new(p - k as f64, 0.0)));
        }
        Ok(self.compose(&taylor))
    }

    pub fn powi(&self, e: u32) -> Series {
        let mut result = Series::constant(&self.space, self.bound, Complex64::new(1.0, 0.0));
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    pub fn sqrt(&self, guard: f64) -> Result<Series> {
        self.powf(0.5, guard)
    }

    pub fn recip(&self, guard: f64) -> Result<Series> {
        let x0 = self.value();
        if x0.norm() < guard {
            return Err(FinslerError::NearSingular(format!("division by {x0}")));
        }
        let inv = x0.inv();
        let mut taylor = Vec::with_capacity(self.order_count());
        let mut term = inv;
        for _ in 0..self.order_count() {
            taylor.push(term);
            term *= -inv;
        }
        Ok(self.compose(&taylor))
    }

    pub fn div(&self, other: &Series, guard: f64) -> Result<Series> {
        Ok(self.mul(&other.recip(guard)?))
    }
}

/// Inverse of a square matrix of series (row-major, `dim x dim`).
///
/// Uses the constant-term inverse and a Neumann expansion in the nilpotent
/// remainder, which terminates after `total_degree` steps.
pub fn invert_matrix(m: &[Series], dim: usize, inverse_of_values: &[Complex64]) -> Vec<Series> {
    let space = m[0].space().clone();
    let bound = m.iter().fold(m[0].bound(), |b, s| min_bound(&b, &s.bound()));
    let zero = Series::constant(&space, bound, Complex64::new(0.0, 0.0));
    // X0 = inverse of values as constant series; N = M - M0.
    let x0: Vec<Series> = inverse_of_values
        .iter()
        .map(|&c| Series::constant(&space, bound, c))
        .collect();
    let nil: Vec<Series> = m
        .iter()
        .map(|s| {
            let mut t = s.restrict(bound);
            t.coef[0] = Complex64::new(0.0, 0.0);
            t
        })
        .collect();
    // T = X0 * N (nilpotent); inverse = sum_k (-T)^k X0.
    let t = mat_mul(&x0, &nil, dim, &zero);
    let mut term = x0.clone();
    let mut acc = x0;
    let steps = bound.iter().map(|&b| b as usize).sum::<usize>();
    for _ in 0..steps {
        term = mat_mul(&t, &term, dim, &zero);
        for s in term.iter_mut() {
            *s = s.neg();
        }
        acc = acc.iter().zip(&term).map(|(a, b)| a.add(b)).collect();
    }
    acc
}

fn mat_mul(a: &[Series], b: &[Series], dim: usize, zero: &Series) -> Vec<Series> {
    let mut out = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = zero.clone();
            for k in 0..dim {
                acc = acc.add(&a[i * dim + k].mul(&b[k * dim + j]));
            }
            out.push(acc);
        }
    }
    out
}
