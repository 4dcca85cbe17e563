//! Small dense linear-algebra kernels for Gaussian-process conditioning.
//!
//! Everything here is textbook dense math on `ndarray` types. Problem sizes
//! are modest (≤ a few hundred anchors; grids factor through Kronecker
//! structure) so plain O(n³) routines are both fast enough and easy to trust
//! as oracles.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
///
/// Fails with `Error::LinAlg` when a pivot is non-positive, which in this
/// crate almost always means a covariance matrix needed more jitter.
pub fn cholesky(a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Shape { expected: format!("square matrix, {n}x{n}"), actual: format!("{}x{}", a.nrows(), a.ncols()) });
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(Error::LinAlg(format!(
                        "Cholesky pivot {i} is {sum:.3e}; matrix is not positive definite"
                    )));
                }
                l[(i, j)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn solve_lower(l: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut x = b.to_owned();
    for i in 0..n {
        for k in 0..i {
            let scale = x[k];
            x[i] -= l[(i, k)] * scale;
        }
        x[i] /= l[(i, i)];
    }
    x
}

/// Solves `Lᵀ x = b` for lower-triangular `L`.
pub fn solve_lower_transpose(l: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut x = b.to_owned();
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let scale = x[k];
            x[i] -= l[(k, i)] * scale;
        }
        x[i] /= l[(i, i)];
    }
    x
}

/// Solves `A x = b` given the Cholesky factor `L` of `A`.
pub fn cholesky_solve(l: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>) -> Array1<f64> {
    solve_lower_transpose(l, solve_lower(l, b).view())
}

/// Solves `A X = B` column-by-column given the Cholesky factor `L` of `A`.
pub fn cholesky_solve_matrix(l: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros(b.raw_dim());
    for (j, col) in b.columns().into_iter().enumerate() {
        out.column_mut(j).assign(&cholesky_solve(l, col));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn spd(n: usize, seed: u64) -> Array2<f64> {
        use rand::Rng as _;
        let mut rng = crate::rng::rng_from_seed(seed);
        let mut m = Array2::<f64>::zeros((n, n));
        for v in m.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let mut a = m.dot(&m.t());
        for i in 0..n {
            a[(i, i)] += n as f64; // diagonally dominant → safely PD
        }
        a
    }

    #[test]
    fn factor_reconstructs_matrix() {
        for seed in 0..5 {
            let a = spd(12, seed);
            let l = cholesky(a.view()).unwrap();
            let rebuilt = l.dot(&l.t());
            for (x, y) in a.iter().zip(rebuilt.iter()) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let a = array![[1.0, 2.0], [2.0, 1.0]]; // eigenvalues 3, -1
        assert!(cholesky(a.view()).is_err());
    }

    #[test]
    fn solve_matches_direct_multiplication() {
        let a = spd(9, 42);
        let l = cholesky(a.view()).unwrap();
        let b = Array1::from_iter((0..9).map(|i| (i as f64).sin()));
        let x = cholesky_solve(l.view(), b.view());
        let back = a.dot(&x);
        for (u, v) in back.iter().zip(b.iter()) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-9);
        }
    }

    proptest! {
        #[test]
        fn triangular_solves_invert_each_other(seed in 0u64..200) {
            let a = spd(6, seed);
            let l = cholesky(a.view()).unwrap();
            let b = Array1::from_iter((0..6).map(|i| ((seed + i as u64) as f64).cos()));
            let y = solve_lower(l.view(), b.view());
            let back = l.dot(&y);
            for (u, v) in back.iter().zip(b.iter()) {
                prop_assert!((u - v).abs() < 1e-9);
            }
            let z = solve_lower_transpose(l.view(), b.view());
            let back_t = l.t().dot(&z);
            for (u, v) in back_t.iter().zip(b.iter()) {
                prop_assert!((u - v).abs() < 1e-9);
            }
        }
    }
}
