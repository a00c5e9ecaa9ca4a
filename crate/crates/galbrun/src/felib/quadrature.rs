//! Quadrature rules on the reference triangle and tetrahedron.
//!
//! Rules are conical (Duffy) products of one-dimensional Gauss–Jacobi rules,
//! so any requested exactness degree up to [`MAX_DEGREE`] is available. An
//! m-point rule per direction integrates total degree 2m-1 exactly; the
//! Jacobi weights absorb the (1-u) factors of the collapsed coordinates.

use crate::error::{Error, Result};
use crate::{from_f64, Real};

/// Largest supported exactness degree of the generator.
pub const MAX_DEGREE: usize = 20;

/// Quadrature rule on the reference simplex.
///
/// Points are stored in barycentric coordinates; for `dim == 2` the fourth
/// coordinate is zero. Weights sum to the reference measure (1/2 for the
/// triangle, 1/6 for the tetrahedron).
#[derive(Debug, Clone)]
pub struct QuadRule<R> {
    pub dim: usize,
    pub points: Vec<[R; 4]>,
    pub weights: Vec<R>,
    pub exactness_degree: usize,
}

impl<R: Real> QuadRule<R> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Reference Cartesian coordinates of point `q`: (λ1, λ2) for the
    /// triangle, (λ1, λ2, λ3) for the tetrahedron.
    pub fn point_ref(&self, q: usize) -> [R; 3] {
        let p = self.points[q];
        [p[1], p[2], p[3]]
    }
}

/// Gauss rule exact to `degree` on the reference simplex of dimension 2 or 3.
pub fn simplex_quadrature<R: Real>(dim: usize, degree: usize) -> Result<QuadRule<R>> {
    if dim != 2 && dim != 3 {
        return Err(Error::invalid(format!("simplex dimension must be 2 or 3, got {dim}")));
    }
    if degree > MAX_DEGREE {
        return Err(Error::Capability {
            what: format!("quadrature exactness degree {degree}"),
            max: MAX_DEGREE,
        });
    }
    let m = degree / 2 + 1; // 2m-1 >= degree
    let leg = gauss_jacobi_01::<R>(m, 0);
    let jac1 = gauss_jacobi_01::<R>(m, 1);

    let mut points = Vec::new();
    let mut weights = Vec::new();
    if dim == 2 {
        // x = u, y = v(1-u); the (1-u) area factor sits in the Jacobi rule.
        for (&u, &wu) in jac1.0.iter().zip(jac1.1.iter()) {
            for (&v, &wv) in leg.0.iter().zip(leg.1.iter()) {
                let x = u;
                let y = v * (R::one() - u);
                points.push([R::one() - x - y, x, y, R::zero()]);
                weights.push(wu * wv);
            }
        }
    } else {
        let jac2 = gauss_jacobi_01::<R>(m, 2);
        for (&u, &wu) in jac2.0.iter().zip(jac2.1.iter()) {
            for (&v, &wv) in jac1.0.iter().zip(jac1.1.iter()) {
                for (&w, &ww) in leg.0.iter().zip(leg.1.iter()) {
                    let x = u;
                    let y = v * (R::one() - u);
                    let z = w * (R::one() - u) * (R::one() - v);
                    points.push([R::one() - x - y - z, x, y, z]);
                    weights.push(wu * wv * ww);
                }
            }
        }
    }
    Ok(QuadRule { dim, points, weights, exactness_degree: degree })
}

/// m-point Gauss–Jacobi rule on [0, 1] for the weight (1-u)^alpha,
/// alpha in {0, 1, 2}. Returns (nodes, weights) with the weight folded in:
/// sum_i w_i f(u_i) ~ int_0^1 (1-u)^alpha f(u) du.
fn gauss_jacobi_01<R: Real>(m: usize, alpha: usize) -> (Vec<R>, Vec<R>) {
    let (x, w) = gauss_jacobi_sym(m, alpha);
    let half = from_f64::<R>(0.5);
    // u = (1+x)/2 maps [-1,1] -> [0,1]; the measure picks up 2^-(alpha+1).
    let scale = half.powi(alpha as i32 + 1);
    let nodes = x.iter().map(|&xi| half * (R::one() + xi)).collect();
    let weights = w.iter().map(|&wi| wi * scale).collect();
    (nodes, weights)
}

/// m-point Gauss–Jacobi rule on [-1, 1] for the weight (1-x)^alpha.
///
/// Nodes are the roots of the degree-m orthonormal polynomial, isolated by
/// sign changes on a fine grid and polished with bisection; weights come
/// from the Christoffel function, w_i = 1 / sum_k p_k(x_i)^2.
fn gauss_jacobi_sym<R: Real>(m: usize, alpha: usize) -> (Vec<R>, Vec<R>) {
    assert!(m >= 1);
    let rec = JacobiRecurrence::<R>::new(m, alpha);

    // Bracket the m roots of p_m. Exact zeros on the scan grid become point
    // brackets; a sign flag of 0 marks "root just recorded" so the adjacent
    // sign change is not counted twice.
    let grid = 80 * m;
    let sign_of = |f: R| -> i8 {
        if f == R::zero() {
            0
        } else if f > R::zero() {
            1
        } else {
            -1
        }
    };
    let mut brackets = Vec::with_capacity(m);
    let mut prev_x = from_f64::<R>(-1.0);
    let mut prev_sign = sign_of(rec.eval_last(prev_x));
    for g in 1..=grid {
        let x = from_f64::<R>(-1.0 + 2.0 * g as f64 / grid as f64);
        let s = sign_of(rec.eval_last(x));
        if s == 0 {
            brackets.push((x, x));
        } else if prev_sign != 0 && s != prev_sign {
            brackets.push((prev_x, x));
        }
        prev_x = x;
        prev_sign = s;
    }
    assert_eq!(brackets.len(), m, "failed to isolate all Gauss-Jacobi nodes");

    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    let two = from_f64::<R>(2.0);
    for (mut lo, mut hi) in brackets {
        // Bisection to machine precision; ~60 iterations for f64.
        let mut flo = rec.eval_last(lo);
        for _ in 0..(8 * std::mem::size_of::<R>() * 8) {
            let mid = (lo + hi) / two;
            if mid <= lo || mid >= hi {
                break;
            }
            let fm = rec.eval_last(mid);
            if fm == R::zero() {
                lo = mid;
                hi = mid;
                break;
            }
            if fm.signum() == flo.signum() {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        let x = (lo + hi) / two;
        let all = rec.eval_all(x);
        let mut k_sum = R::zero();
        for pk in all.iter().take(m) {
            k_sum += *pk * *pk;
        }
        nodes.push(x);
        weights.push(R::one() / k_sum);
    }
    (nodes, weights)
}

/// Three-term recurrence for polynomials orthonormal with respect to
/// (1-x)^alpha on [-1, 1] (Jacobi with beta = 0).
struct JacobiRecurrence<R> {
    m: usize,
    a: Vec<R>,       // diagonal coefficients a_0..a_{m-1}
    sqrt_b: Vec<R>,  // sqrt(b_1)..sqrt(b_m)
    inv_sqrt_mu0: R, // p_0 = 1/sqrt(mu_0)
}

impl<R: Real> JacobiRecurrence<R> {
    fn new(m: usize, alpha: usize) -> Self {
        let al = alpha as f64;
        // mu0 = int_-1^1 (1-x)^alpha dx
        let mu0 = 2f64.powf(al + 1.0) / (al + 1.0);
        let mut a = Vec::with_capacity(m);
        let mut sqrt_b = Vec::with_capacity(m);
        for n in 0..m {
            let nf = n as f64;
            let denom = (2.0 * nf + al) * (2.0 * nf + al + 2.0);
            let an = if denom == 0.0 { -al / (al + 2.0) } else { -(al * al) / denom };
            a.push(from_f64::<R>(an));
        }
        for n in 1..=m {
            let nf = n as f64;
            let num = 4.0 * nf * (nf + al) * nf * (nf + al);
            let den = (2.0 * nf + al) * (2.0 * nf + al) * (2.0 * nf + al + 1.0) * (2.0 * nf + al - 1.0);
            // b_n = 4n(n+alpha)(n)(n+alpha) / ... with beta = 0 reduces to
            // 4 n^2 (n+alpha)^2 / ((2n+alpha)^2 ((2n+alpha)^2 - 1))
            let bn = num / den;
            sqrt_b.push(from_f64::<R>(bn.sqrt()));
        }
        JacobiRecurrence { m, a, sqrt_b, inv_sqrt_mu0: from_f64::<R>(1.0 / mu0.sqrt()) }
    }

    /// Orthonormal values p_0(x)..p_m(x).
    fn eval_all(&self, x: R) -> Vec<R> {
        let mut out = Vec::with_capacity(self.m + 1);
        let mut p_prev = R::zero();
        let mut p = self.inv_sqrt_mu0;
        out.push(p);
        for n in 0..self.m {
            let p_next =
                ((x - self.a[n]) * p - if n == 0 { R::zero() } else { self.sqrt_b[n - 1] * p_prev })
                    / self.sqrt_b[n];
            out.push(p_next);
            p_prev = p;
            p = p_next;
        }
        out
    }

    fn eval_last(&self, x: R) -> R {
        *self.eval_all(x).last().unwrap()
    }
}
