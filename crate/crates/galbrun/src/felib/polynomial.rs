//! Monomial and orthonormalized polynomial bases on the reference simplexes.
//!
//! Orthonormalization is a Cholesky factorization of the exact monomial Gram
//! matrix (closed-form simplex moments), equivalent to Gram–Schmidt against
//! the reference mass matrix. Conditioning is unproblematic for the degrees
//! supported here.

use crate::linalg::DMat;
use crate::{from_f64, Real};

/// dim P_k on the triangle.
pub fn dim_p2(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// dim P_k on the tetrahedron.
pub fn dim_p3(k: usize) -> usize {
    (k + 1) * (k + 2) * (k + 3) / 6
}

/// Graded-lexicographic exponent list for 3D monomials of total degree <= k.
pub fn exponents_3d(k: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(dim_p3(k));
    for d in 0..=k {
        for a in (0..=d).rev() {
            for b in (0..=(d - a)).rev() {
                out.push([a, b, d - a - b]);
            }
        }
    }
    out
}

pub fn exponents_2d(k: usize) -> Vec<[usize; 2]> {
    let mut out = Vec::with_capacity(dim_p2(k));
    for d in 0..=k {
        for a in (0..=d).rev() {
            out.push([a, d - a]);
        }
    }
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product::<f64>().max(1.0)
}

/// Exact moment int_Tref x^a y^b z^c = a! b! c! / (a+b+c+3)!.
pub fn tet_monomial_moment<R: Real>(a: usize, b: usize, c: usize) -> R {
    from_f64(factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3))
}

/// Exact moment int_Tref x^a y^b = a! b! / (a+b+2)!.
pub fn tri_monomial_moment<R: Real>(a: usize, b: usize) -> R {
    from_f64(factorial(a) * factorial(b) / factorial(a + b + 2))
}

/// Orthonormal scalar basis of P_k on the reference simplex (dim 2 or 3),
/// expressed as combinations of monomials.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis<R> {
    pub dim: usize,
    pub degree: usize,
    exps3: Vec<[usize; 3]>,
    exps2: Vec<[usize; 2]>,
    /// coeffs.row(i) holds the monomial coefficients of basis function i.
    coeffs: DMat<R>,
}

impl<R: Real> OrthonormalBasis<R> {
    pub fn new(dim: usize, degree: usize) -> Self {
        assert!(dim == 2 || dim == 3);
        let n = if dim == 3 { dim_p3(degree) } else { dim_p2(degree) };
        let exps3 = if dim == 3 { exponents_3d(degree) } else { Vec::new() };
        let exps2 = if dim == 2 { exponents_2d(degree) } else { Vec::new() };

        // Monomial Gram matrix from exact moments.
        let mut gram = DMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let g = if dim == 3 {
                    let (e, f) = (exps3[i], exps3[j]);
                    tet_monomial_moment::<R>(e[0] + f[0], e[1] + f[1], e[2] + f[2])
                } else {
                    let (e, f) = (exps2[i], exps2[j]);
                    tri_monomial_moment::<R>(e[0] + f[0], e[1] + f[1])
                };
                *gram.at_mut(i, j) = g;
            }
        }
        let l = gram.cholesky().expect("monomial Gram matrix must be SPD");

        // Rows of L^-1 give the orthonormal combinations: row i solves
        // L^T y = e_i by backward substitution.
        let mut coeffs = DMat::zeros(n, n);
        for i in 0..n {
            let mut y = vec![R::zero(); n];
            for m in (0..n).rev() {
                let mut s = if m == i { R::one() } else { R::zero() };
                for t in (m + 1)..n {
                    s = s - l.at(t, m) * y[t];
                }
                y[m] = s / l.at(m, m);
            }
            for (j, &yj) in y.iter().enumerate() {
                *coeffs.at_mut(i, j) = yj;
            }
        }
        OrthonormalBasis { dim, degree, exps3, exps2, coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.nrows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values of all basis functions at a reference point.
    pub fn values(&self, p: [R; 3]) -> Vec<R> {
        let monos = self.monomial_values(p);
        (0..self.len())
            .map(|i| {
                let row = self.coeffs.row(i);
                row.iter()
                    .zip(monos.iter())
                    .fold(R::zero(), |acc, (&c, &m)| acc + c * m)
            })
            .collect()
    }

    /// Values and reference gradients of all basis functions (3D only).
    pub fn values_and_gradients(&self, p: [R; 3]) -> (Vec<R>, Vec<[R; 3]>) {
        assert_eq!(self.dim, 3);
        let monos = self.monomial_values(p);
        let gmonos = self.monomial_gradients(p);
        let mut vals = Vec::with_capacity(self.len());
        let mut grads = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let row = self.coeffs.row(i);
            let mut v = R::zero();
            let mut g = [R::zero(); 3];
            for (j, &c) in row.iter().enumerate() {
                v += c * monos[j];
                for d in 0..3 {
                    g[d] += c * gmonos[j][d];
                }
            }
            vals.push(v);
            grads.push(g);
        }
        (vals, grads)
    }

    fn monomial_values(&self, p: [R; 3]) -> Vec<R> {
        if self.dim == 3 {
            self.exps3.iter().map(|e| powi(p[0], e[0]) * powi(p[1], e[1]) * powi(p[2], e[2])).collect()
        } else {
            self.exps2.iter().map(|e| powi(p[0], e[0]) * powi(p[1], e[1])).collect()
        }
    }

    fn monomial_gradients(&self, p: [R; 3]) -> Vec<[R; 3]> {
        self.exps3
            .iter()
            .map(|e| {
                let mut g = [R::zero(); 3];
                for d in 0..3 {
                    if e[d] > 0 {
                        let mut f = [e[0], e[1], e[2]];
                        f[d] -= 1;
                        g[d] = from_f64::<R>(e[d] as f64)
                            * powi(p[0], f[0])
                            * powi(p[1], f[1])
                            * powi(p[2], f[2]);
                    }
                }
                g
            })
            .collect()
    }
}

#[inline]
fn powi<R: Real>(x: R, n: usize) -> R {
    let mut acc = R::one();
    for _ in 0..n {
        acc *= x;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::felib::quadrature::simplex_quadrature;

    #[test]
    fn basis_is_orthonormal_under_quadrature() {
        for (dim, deg) in [(3usize, 1usize), (3, 2), (3, 3), (2, 2), (2, 3)] {
            let basis = OrthonormalBasis::<f64>::new(dim, deg);
            let rule = simplex_quadrature::<f64>(dim, 2 * deg).unwrap();
            let n = basis.len();
            let mut gram = vec![0.0; n * n];
            for (p, w) in rule.points.iter().zip(rule.weights.iter()) {
                let vals = basis.values([p[1], p[2], p[3]]);
                for i in 0..n {
                    for j in 0..n {
                        gram[i * n + j] += w * vals[i] * vals[j];
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (gram[i * n + j] - want).abs() < 1e-12,
                        "dim {dim} deg {deg} gram[{i},{j}] = {}",
                        gram[i * n + j]
                    );
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let basis = OrthonormalBasis::<f64>::new(3, 3);
        let p = [0.21, 0.33, 0.17];
        let h = 1e-6;
        let (_, grads) = basis.values_and_gradients(p);
        for d in 0..3 {
            let mut pp = p;
            let mut pm = p;
            pp[d] += h;
            pm[d] -= h;
            let vp = basis.values(pp);
            let vm = basis.values(pm);
            for i in 0..basis.len() {
                let fd = (vp[i] - vm[i]) / (2.0 * h);
                assert!(
                    (grads[i][d] - fd).abs() < 1e-6 * (1.0 + grads[i][d].abs()),
                    "basis {i} direction {d}: analytic {} vs fd {fd}",
                    grads[i][d]
                );
            }
        }
    }

    #[test]
    fn dimension_formulas() {
        assert_eq!(dim_p3(1), 4);
        assert_eq!(dim_p3(2), 10);
        assert_eq!(dim_p3(3), 20);
        assert_eq!(dim_p2(1), 3);
        assert_eq!(dim_p2(2), 6);
        assert_eq!(exponents_3d(3).len(), 20);
    }
}
