//! Small dense linear-algebra helpers shared across the engine.
//!
//! Everything here operates on `ndarray::Array2<C64>` at desk scale
//! (dimensions well below a few thousand), so the implementations favour
//! clarity and determinism over asymptotic cleverness. LAPACK is used for
//! factorizations (via `ndarray-linalg`); the matrix exponential is a
//! self-contained Padé-13 scaling-and-squaring implementation so that the
//! closed-form dynamics oracle does not depend on eigendecompositions of
//! possibly defective generators.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Inverse, Solve, SVD};
use thiserror::Error;

use crate::C64;

/// Errors from dense helper routines.
#[derive(Debug, Error)]
pub enum LinalgError {
    /// A LAPACK-backed factorization failed (singular or invalid input).
    #[error("dense factorization failed: {0}")]
    Factorization(String),
    /// A routine that requires a square matrix received a rectangular one.
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
}

/// Largest entry modulus, `max_ij |A_ij|`. Zero for empty input.
pub fn max_abs(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Frobenius norm, `sqrt(Σ |A_ij|²)`.
pub fn fro_norm(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Maximum column sum of entry moduli (the induced 1-norm).
fn one_norm(a: &Array2<C64>) -> f64 {
    let mut best = 0.0_f64;
    for col in a.columns() {
        best = best.max(col.iter().map(|z| z.norm()).sum());
    }
    best
}

/// Largest entry modulus of `A - A†`; zero iff `A` is exactly Hermitian.
pub fn hermiticity_residual(a: &Array2<C64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Complex conjugate transpose.
pub fn adjoint(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

/// `n × n` complex identity.
pub fn identity(n: usize) -> Array2<C64> {
    Array2::from_diag_elem(n, C64::new(1.0, 0.0))
}

/// Kronecker product with row-major block layout: the left factor indexes
/// blocks, the right factor indexes within a block.
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Matrix inverse through LAPACK LU.
pub fn inverse(a: &Array2<C64>) -> Result<Array2<C64>, LinalgError> {
    square(a)?;
    a.inv().map_err(|e| LinalgError::Factorization(e.to_string()))
}

/// Two-norm condition number `σ_max / σ_min` through the SVD.
/// Returns `f64::INFINITY` when the smallest singular value underflows.
pub fn condition_number(a: &Array2<C64>) -> Result<f64, LinalgError> {
    square(a)?;
    let (_, sv, _) = a
        .svd(false, false)
        .map_err(|e| LinalgError::Factorization(e.to_string()))?;
    let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin <= 0.0 || !smin.is_finite() {
        return Ok(f64::INFINITY);
    }
    Ok(smax / smin)
}

/// Eigenvalues and right eigenvectors of a general complex matrix
/// (LAPACK `zgeev` order, not sorted).
pub fn eig(a: &Array2<C64>) -> Result<(Array1<C64>, Array2<C64>), LinalgError> {
    square(a)?;
    a.eig().map_err(|e| LinalgError::Factorization(e.to_string()))
}

/// Eigenvalues only, sorted lexicographically by `(re, im)`.
pub fn eigenvalues_sorted(a: &Array2<C64>) -> Result<Vec<C64>, LinalgError> {
    let (vals, _) = eig(a)?;
    let mut v: Vec<C64> = vals.to_vec();
    v.sort_by(|x, y| {
        x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im))
    });
    Ok(v)
}

/// Matrix exponential `exp(A)` by Padé-13 approximation with scaling and
/// squaring. Accurate to roundoff for the desk-scale generators used here.
pub fn expm(a: &Array2<C64>) -> Result<Array2<C64>, LinalgError> {
    square(a)?;
    let n = a.nrows();
    // Padé-13 numerator coefficients (Higham 2005).
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA_13: f64 = 5.371920351148152;

    let norm = one_norm(a);
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as u32
    } else {
        0
    };
    let scale = C64::new((0.5_f64).powi(s as i32), 0.0);
    let a_s = a.mapv(|z| z * scale);

    let id = identity(n);
    let a2 = a_s.dot(&a_s);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);

    let c = |k: usize| C64::new(B[k], 0.0);
    let u_inner = a6.mapv(|z| z * c(13)) + &a4.mapv(|z| z * c(11)) + &a2.mapv(|z| z * c(9));
    let u_poly = a6.dot(&u_inner)
        + &a6.mapv(|z| z * c(7))
        + &a4.mapv(|z| z * c(5))
        + &a2.mapv(|z| z * c(3))
        + &id.mapv(|z| z * c(1));
    let u = a_s.dot(&u_poly);
    let v_inner = a6.mapv(|z| z * c(12)) + &a4.mapv(|z| z * c(10)) + &a2.mapv(|z| z * c(8));
    let v = a6.dot(&v_inner)
        + &a6.mapv(|z| z * c(6))
        + &a4.mapv(|z| z * c(4))
        + &a2.mapv(|z| z * c(2))
        + &id.mapv(|z| z * c(0));

    // (V - U) X = (V + U), solved column by column.
    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut x = Array2::<C64>::zeros((n, n));
    for j in 0..n {
        let col = rhs.column(j).to_owned();
        let sol = lhs
            .solve(&col)
            .map_err(|e| LinalgError::Factorization(e.to_string()))?;
        x.column_mut(j).assign(&sol);
    }
    for _ in 0..s {
        x = x.dot(&x);
    }
    Ok(x)
}

fn square(a: &Array2<C64>) -> Result<(), LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let z = Array2::<C64>::zeros((3, 3));
        let e = expm(&z).unwrap();
        assert!(max_abs(&(&e - &identity(3))) < 1e-15);
    }

    #[test]
    fn expm_matches_diagonal_closed_form() {
        let a = Array2::from_diag(&ndarray::arr1(&[c(0.3, 0.0), c(-1.2, 0.7), c(0.0, 2.0)]));
        let e = expm(&a).unwrap();
        for k in 0..3 {
            let want = a[(k, k)].exp();
            assert!((e[(k, k)] - want).norm() < 1e-13);
        }
    }

    #[test]
    fn expm_antihermitian_is_unitary() {
        let a = array![
            [c(0.0, 0.4), c(0.3, -0.2), c(-0.1, 0.8)],
            [c(-0.3, -0.2), c(0.0, -1.1), c(0.5, 0.0)],
            [c(0.1, 0.8), c(-0.5, 0.0), c(0.0, 0.6)],
        ];
        // a is anti-Hermitian: a† = -a, so exp(a) must be unitary.
        let e = expm(&a).unwrap();
        let prod = adjoint(&e).dot(&e);
        assert!(max_abs(&(&prod - &identity(3))) < 1e-13);
    }

    #[test]
    fn expm_handles_large_norm_by_scaling() {
        let a = array![[c(40.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-40.0, 0.0)]];
        let e = expm(&a).unwrap();
        assert!((e[(0, 0)].re - 40.0_f64.exp()).abs() / 40.0_f64.exp() < 1e-12);
        assert!((e[(1, 1)].re - (-40.0_f64).exp()).abs() / (-40.0_f64).exp() < 1e-12);
    }

    #[test]
    fn condition_number_of_signature_is_one() {
        let a = Array2::from_diag(&ndarray::arr1(&[c(1.0, 0.0), c(-1.0, 0.0)]));
        assert!((condition_number(&a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kron_block_layout() {
        let a = array![[c(1.0, 0.0), c(2.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
        let b = array![[c(0.0, 1.0), c(0.0, 0.0)], [c(0.0, 0.0), c(3.0, 0.0)]];
        let k = kron(&a, &b);
        assert_eq!(k.dim(), (4, 4));
        assert_eq!(k[(0, 2)], c(0.0, 2.0)); // a[0,1] * b[0,0]
        assert_eq!(k[(1, 3)], c(6.0, 0.0)); // a[0,1] * b[1,1]
    }
}
