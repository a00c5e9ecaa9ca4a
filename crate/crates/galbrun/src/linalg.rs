//! Small dense linear algebra used by the element-level kernels.
//!
//! Everything here operates on tiny matrices (3x3 geometry, element DOF
//! blocks up to ~60x60, local lifting mass blocks), so plain `Vec`-backed
//! row-major storage with textbook factorizations is sufficient.

use crate::{from_f64, Real};

pub type Vec3<R> = [R; 3];
pub type Mat3<R> = [[R; 3]; 3];

pub fn dot<R: Real>(a: Vec3<R>, b: Vec3<R>) -> R {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross<R: Real>(a: Vec3<R>, b: Vec3<R>) -> Vec3<R> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn sub<R: Real>(a: Vec3<R>, b: Vec3<R>) -> Vec3<R> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add<R: Real>(a: Vec3<R>, b: Vec3<R>) -> Vec3<R> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale<R: Real>(s: R, a: Vec3<R>) -> Vec3<R> {
    [s * a[0], s * a[1], s * a[2]]
}

pub fn norm<R: Real>(a: Vec3<R>) -> R {
    dot(a, a).sqrt()
}

pub fn distance<R: Real>(a: Vec3<R>, b: Vec3<R>) -> R {
    norm(sub(a, b))
}

pub fn mat_vec<R: Real>(m: &Mat3<R>, v: Vec3<R>) -> Vec3<R> {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

pub fn det3<R: Real>(m: &Mat3<R>) -> R {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Inverse of a 3x3 matrix via the adjugate.
pub fn inv3<R: Real>(m: &Mat3<R>) -> Mat3<R> {
    let d = det3(m);
    let inv_d = R::one() / d;
    let mut out = [[R::zero(); 3]; 3];
    out[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv_d;
    out[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_d;
    out[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_d;
    out[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv_d;
    out[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_d;
    out[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_d;
    out[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv_d;
    out[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_d;
    out[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_d;
    out
}

pub fn transpose3<R: Real>(m: &Mat3<R>) -> Mat3<R> {
    let mut t = [[R::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = m[j][i];
        }
    }
    t
}

/// Eigenvalues of a symmetric 3x3 matrix, ascending, by the trigonometric
/// closed form (Smith's method).
pub fn sym3_eigenvalues<R: Real>(m: &Mat3<R>) -> [R; 3] {
    let one = R::one();
    let two = from_f64::<R>(2.0);
    let three = from_f64::<R>(3.0);
    let six = from_f64::<R>(6.0);

    let p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    let q = (m[0][0] + m[1][1] + m[2][2]) / three;
    if p1 == R::zero() {
        let mut e = [m[0][0], m[1][1], m[2][2]];
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        return e;
    }
    let d0 = m[0][0] - q;
    let d1 = m[1][1] - q;
    let d2 = m[2][2] - q;
    let p2 = d0 * d0 + d1 * d1 + d2 * d2 + two * p1;
    let p = (p2 / six).sqrt();
    let inv_p = one / p;
    // B = (1/p)(M - qI); r = det(B)/2 in [-1, 1] up to roundoff.
    let mut b = *m;
    for i in 0..3 {
        b[i][i] = b[i][i] - q;
        for j in 0..3 {
            b[i][j] = b[i][j] * inv_p;
        }
    }
    let r = det3(&b) / two;
    let r = r.max(-one).min(one);
    let phi = r.acos() / three;
    let e_big = q + two * p * phi.cos();
    let e_small = q + two * p * (phi + two * R::PI() / three).cos();
    let e_mid = three * q - e_big - e_small;
    [e_small, e_mid, e_big]
}

/// Row-major dense matrix for element-level work.
#[derive(Debug, Clone)]
pub struct DMat<R> {
    pub nrows: usize,
    pub ncols: usize,
    pub data: Vec<R>,
}

impl<R: Real> DMat<R> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        DMat { nrows, ncols, data: vec![R::zero(); nrows * ncols] }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> R {
        self.data[i * self.ncols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut R {
        &mut self.data[i * self.ncols + j]
    }

    pub fn row(&self, i: usize) -> &[R] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    /// Solve `self * X = B` in place of `B` by LU with partial pivoting.
    /// `B` is row-major with `ncols_b` columns. Returns `false` when a pivot
    /// below `tiny` is met.
    pub fn lu_solve_in_place(&self, b: &mut [R], ncols_b: usize) -> bool {
        let n = self.nrows;
        assert_eq!(n, self.ncols, "lu_solve requires a square matrix");
        assert_eq!(b.len(), n * ncols_b);
        let mut a = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let tiny = R::epsilon() * from_f64::<R>(1e-3);

        for col in 0..n {
            let mut piv = col;
            let mut piv_val = a[perm[col] * n + col].abs();
            for r in (col + 1)..n {
                let v = a[perm[r] * n + col].abs();
                if v > piv_val {
                    piv = r;
                    piv_val = v;
                }
            }
            if piv_val <= tiny {
                return false;
            }
            perm.swap(col, piv);
            let prow = perm[col];
            let inv_p = R::one() / a[prow * n + col];
            for r in (col + 1)..n {
                let row = perm[r];
                let f = a[row * n + col] * inv_p;
                a[row * n + col] = f;
                for c in (col + 1)..n {
                    let upd = a[prow * n + c];
                    a[row * n + c] = a[row * n + c] - f * upd;
                }
            }
        }

        // Forward/backward substitution per column of B.
        let mut x = vec![R::zero(); n];
        for jcol in 0..ncols_b {
            for i in 0..n {
                let mut s = b[perm[i] * ncols_b + jcol];
                for c in 0..i {
                    s = s - a[perm[i] * n + c] * x[c];
                }
                x[i] = s;
            }
            for i in (0..n).rev() {
                let mut s = x[i];
                for c in (i + 1)..n {
                    s = s - a[perm[i] * n + c] * x[c];
                }
                x[i] = s / a[perm[i] * n + i];
            }
            for i in 0..n {
                b[i * ncols_b + jcol] = x[i];
            }
        }
        true
    }

    /// Inverse via LU; panics on singular input (element matrices are
    /// unisolvent by construction).
    pub fn inverse(&self) -> DMat<R> {
        let n = self.nrows;
        let mut id = vec![R::zero(); n * n];
        for i in 0..n {
            id[i * n + i] = R::one();
        }
        let ok = self.lu_solve_in_place(&mut id, n);
        assert!(ok, "singular element matrix");
        DMat { nrows: n, ncols: n, data: id }
    }

    /// Cholesky factor L (lower) of an SPD matrix; `None` if a nonpositive
    /// pivot shows up.
    pub fn cholesky(&self) -> Option<DMat<R>> {
        let n = self.nrows;
        assert_eq!(n, self.ncols);
        let mut l = DMat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.at(i, j);
                for k in 0..j {
                    s = s - l.at(i, k) * l.at(j, k);
                }
                if i == j {
                    if s <= R::zero() {
                        return None;
                    }
                    *l.at_mut(i, j) = s.sqrt();
                } else {
                    *l.at_mut(i, j) = s / l.at(j, j);
                }
            }
        }
        Some(l)
    }

    /// Solve `L L^T x = b` given the Cholesky factor `L`.
    pub fn cholesky_solve(l: &DMat<R>, b: &mut [R]) {
        let n = l.nrows;
        assert_eq!(b.len(), n);
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s = s - l.at(i, k) * b[k];
            }
            b[i] = s / l.at(i, i);
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s = s - l.at(k, i) * b[k];
            }
            b[i] = s / l.at(i, i);
        }
    }
}

/// Deterministic 64-bit generator (splitmix64). Used wherever reproducible
/// pseudo-random samples are needed so reports stay bit-stable.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform sample in [0, 1).
    pub fn next_unit<R: Real>(&mut self) -> R {
        let v = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        from_f64(v)
    }

    /// Uniform sample in [-1, 1).
    pub fn next_symmetric<R: Real>(&mut self) -> R {
        let two = from_f64::<R>(2.0);
        two * self.next_unit::<R>() - R::one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_small_system() {
        let a: DMat<f64> = DMat {
            nrows: 3,
            ncols: 3,
            data: vec![4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0],
        };
        let mut b = vec![1.0, 2.0, 3.0];
        assert!(a.lu_solve_in_place(&mut b, 1));
        // residual check
        let r0 = 4.0 * b[0] + b[1] - 1.0;
        let r1 = b[0] + 3.0 * b[1] + b[2] - 2.0;
        let r2 = b[1] + 2.0 * b[2] - 3.0;
        assert!(r0.abs() + r1.abs() + r2.abs() < 1e-12);
    }

    #[test]
    fn cholesky_round_trip() {
        let a: DMat<f64> = DMat {
            nrows: 2,
            ncols: 2,
            data: vec![4.0, 1.0, 1.0, 3.0],
        };
        let l = a.cholesky().unwrap();
        let mut b = vec![5.0, 4.0];
        DMat::cholesky_solve(&l, &mut b);
        assert!((4.0 * b[0] + b[1] - 5.0).abs() < 1e-12);
        assert!((b[0] + 3.0 * b[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn sym3_eigenvalues_diagonal() {
        let m: Mat3<f64> = [[-2.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        let e = sym3_eigenvalues(&m);
        assert!((e[0] + 2.0).abs() < 1e-14);
        assert!(e[1].abs() < 1e-14);
        assert!((e[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sym3_eigenvalues_match_characteristic_polynomial() {
        // vs direct evaluation of det(M - eI) at the computed eigenvalues
        let m: Mat3<f64> = [[2.0, -1.0, 0.3], [-1.0, 1.5, 0.2], [0.3, 0.2, -0.7]];
        for e in sym3_eigenvalues(&m) {
            let shifted = [
                [m[0][0] - e, m[0][1], m[0][2]],
                [m[1][0], m[1][1] - e, m[1][2]],
                [m[2][0], m[2][1], m[2][2] - e],
            ];
            assert!(det3(&shifted).abs() < 1e-12);
        }
    }
}
