//! Direct sparse solve and a dense inf-sup probe. f64 only: the sparse
//! factorization is delegated to faer, whose complex scalar is the same
//! type as `num_complex::Complex<f64>`.

use faer::sparse::{SparseColMat, Triplet};
use num_complex::Complex64;

use crate::assembly::SystemMatrix;
use crate::error::{Error, Result};

/// Solve A x = rhs by sparse LU and verify the relative residual bound.
///
/// The contract is the residual bound, not the algorithm: a factorization
/// that fails is a singularity error, a residual above `tol` is a
/// non-convergence error carrying the achieved value.
pub fn solve_linear(
    a: &SystemMatrix<f64>,
    rhs: &[Complex64],
    tol: f64,
) -> Result<Vec<Complex64>> {
    let n = a.dim();
    if a.matrix.ncols != n {
        return Err(Error::invalid("system matrix must be square"));
    }
    if rhs.len() != n {
        return Err(Error::invalid(format!(
            "rhs length {} does not match system dimension {n}",
            rhs.len()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("solver tolerance must be positive"));
    }
    let rhs_norm = rhs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if rhs_norm == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); n]);
    }

    let mut trips = Vec::with_capacity(a.matrix.nnz());
    for r in 0..n {
        for k in a.matrix.row_ptr[r]..a.matrix.row_ptr[r + 1] {
            trips.push(Triplet::new(r, a.matrix.col_idx[k], a.matrix.values[k]));
        }
    }
    let sparse = SparseColMat::<usize, Complex64>::try_new_from_triplets(n, n, &trips)
        .map_err(|e| Error::invalid(format!("bad sparse structure: {e:?}")))?;
    let lu = sparse
        .sp_lu()
        .map_err(|e| Error::Singular(format!("sparse LU factorization failed: {e:?}")))?;

    let mut b = faer::Mat::<Complex64>::zeros(n, 1);
    for (i, v) in rhs.iter().enumerate() {
        b[(i, 0)] = *v;
    }
    let x_mat = faer::linalg::solvers::Solve::solve(&lu, &b);
    let x: Vec<Complex64> = (0..n).map(|i| x_mat[(i, 0)]).collect();
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Singular(
            "factorization produced non-finite entries".into(),
        ));
    }

    let ax = a.matrix.matvec(&x);
    let resid = ax
        .iter()
        .zip(rhs.iter())
        .map(|(p, q)| (p - q).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let rel = resid / rhs_norm;
    if rel > tol {
        return Err(Error::NonConvergence { achieved: rel, required: tol });
    }
    Ok(x)
}

/// Smallest singular value of G^-1/2 A G^-1/2: the discrete inf-sup constant
/// of A measured in the norm induced by the SPD Gram matrix G.
pub fn infsup_sigma_min(
    a: &SystemMatrix<f64>,
    g: &SystemMatrix<f64>,
    cap: usize,
) -> Result<f64> {
    infsup_sigma_extremes(a, g, cap).map(|(lo, _)| lo)
}

/// Smallest and largest singular values of G^-1/2 A G^-1/2, via a dense
/// Cholesky factorization of G and a dense SVD. Deliberately capped: this is
/// a coarse-mesh diagnostic, not a production path.
pub fn infsup_sigma_extremes(
    a: &SystemMatrix<f64>,
    g: &SystemMatrix<f64>,
    cap: usize,
) -> Result<(f64, f64)> {
    let n = a.dim();
    if g.dim() != n || a.matrix.ncols != n || g.matrix.ncols != n {
        return Err(Error::invalid("system and Gram matrices must be square with equal size"));
    }
    if n > cap {
        return Err(Error::Capability {
            what: format!("inf-sup probe on dimension {n}"),
            max: cap,
        });
    }

    // dense Hermitian Cholesky factor of G (real positive diagonal)
    let g_dense = g.matrix.to_dense();
    let l = hermitian_cholesky(&g_dense, n)
        .ok_or_else(|| Error::Singular("Gram matrix is not Hermitian positive definite".into()))?;

    // M = L^-1 A L^-H
    let a_dense = a.matrix.to_dense();
    // Y = L^-1 A: forward substitution on each column
    let mut y = a_dense;
    for c in 0..n {
        for i in 0..n {
            let mut s = y[i * n + c];
            for k in 0..i {
                s -= l[i * n + k] * y[k * n + c];
            }
            y[i * n + c] = s / l[i * n + i];
        }
    }
    // M = Y L^-H: conjugated forward substitution along each row
    let mut m = faer::Mat::<Complex64>::zeros(n, n);
    for r in 0..n {
        // solve z L^H = y_row  <=>  conj(L) z^T = y_row^T
        let mut z = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let mut s = y[r * n + i];
            for k in 0..i {
                s -= l[i * n + k].conj() * z[k];
            }
            z[i] = s / l[i * n + i].conj();
        }
        for c in 0..n {
            m[(r, c)] = z[c];
        }
    }

    let svd = m
        .svd()
        .map_err(|e| Error::Singular(format!("dense SVD failed: {e:?}")))?;
    // singular values come back on the diagonal, largest first
    let s = svd.S();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for i in 0..n {
        let v = s[i].re;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

/// Lower Cholesky factor of a dense Hermitian positive definite matrix,
/// row-major; `None` on a nonpositive pivot.
fn hermitian_cholesky(g: &[Complex64], n: usize) -> Option<Vec<Complex64>> {
    let mut l = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = g[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            if i == j {
                if s.re <= 0.0 || s.im.abs() > 1e-10 * (1.0 + s.re.abs()) {
                    return None;
                }
                l[i * n + j] = Complex64::new(s.re.sqrt(), 0.0);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}
