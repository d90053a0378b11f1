//! Small dense complex matrices (row-major).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{FinslerError, Result};

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(m: &[Complex64], n: usize) -> Result<Vec<Complex64>> {
    let mut a = m.to_vec();
    let mut inv: Vec<Complex64> = (0..n * n)
        .map(|k| Complex64::new(if k / n == k % n { 1.0 } else { 0.0 }, 0.0))
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].norm().total_cmp(&a[j * n + col].norm()))
            .expect("nonempty range");
        if a[pivot * n + col].norm() == 0.0 {
            return Err(FinslerError::IllConditioned(f64::INFINITY));
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
                inv.swap(pivot * n + k, col * n + k);
            }
        }
        let d = a[col * n + col].inv();
        for k in 0..n {
            a[col * n + k] *= d;
            inv[col * n + k] *= d;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row * n + col];
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..n {
                let (ak, ik) = (a[col * n + k], inv[col * n + k]);
                a[row * n + k] -= f * ak;
                inv[row * n + k] -= f * ik;
            }
        }
    }
    Ok(inv)
}

fn norm_one(m: &[Complex64], n: usize) -> f64 {
    (0..n)
        .map(|j| (0..n).map(|i| m[i * n + j].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// One-norm condition number given a matrix and its inverse.
pub fn condition_number(m: &[Complex64], inv: &[Complex64], n: usize) -> f64 {
    norm_one(m, n) * norm_one(inv, n)
}

/// `max |m_ab - conj(m_ba)|`.
pub fn hermitian_residual(m: &[Complex64], n: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            worst = worst.max((m[a * n + b] - m[b * n + a].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &[Complex64], n: usize) -> Vec<f64> {
    let mat = DMatrix::from_fn(n, n, |i, j| (m[i * n + j] + m[j * n + i].conj()) * 0.5);
    let mut ev: Vec<f64> = mat.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn mat_mul(a: &[Complex64], b: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn inverse_round_trip() {
        let m = vec![c(2.0, 0.0), c(0.5, 0.3), c(0.5, -0.3), c(1.0, 0.0)];
        let inv = invert(&m, 2).unwrap();
        let id = mat_mul(&m, &inv, 2);
        for (k, v) in id.iter().enumerate() {
            let want = if k % 3 == 0 { 1.0 } else { 0.0 };
            assert!((v - c(want, 0.0)).norm() < 1e-15);
        }
        assert!(condition_number(&m, &inv, 2) > 1.0);
    }

    #[test]
    fn singular_matrix_fails() {
        let m = vec![c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)];
        assert!(invert(&m, 2).is_err() || condition_number(&m, &invert(&m, 2).unwrap(), 2) > 1e15);
    }

    #[test]
    fn eigenvalues_of_hermitian() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3
        let m = vec![c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)];
        let ev = hermitian_eigenvalues(&m, 2);
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
        assert_eq!(hermitian_residual(&m, 2), 0.0);
    }
}
