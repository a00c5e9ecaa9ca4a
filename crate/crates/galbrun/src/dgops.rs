//! DG face operators for the convection term.
//!
//! The b-weighted jump of a broken field across an interior face is lifted
//! into the broken vector space by per-face L2 problems; summing the per-face
//! liftings and adding the elementwise convection gives the reconstructed
//! derivative that replaces b.grad on fields with discontinuous tangential
//! traces. No penalty term is involved anywhere.
//!
//! Sign convention: the lifting of u against a broken test field psi
//! satisfies  `<R_F u, psi> = -<[[u]]_b, {psi}>_F`  with
//! `[[u]]_b = (b.nu_1) u_1 + (b.nu_2) u_2` and `{psi}` the two-sided average.

use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::felib::quadrature::{simplex_quadrature, QuadRule};
use crate::felib::space::{BdmSpace, BrokenVectorSpace};
use crate::linalg::{dot, DMat, Vec3};
use crate::{from_f64, Cplx, Real};

/// Closed-form coefficient field used for the convection velocity.
pub type VelocityField<R> = Arc<dyn Fn(Vec3<R>) -> Vec3<R> + Send + Sync>;

/// Pointwise b-weighted jump formula: (b.nu1) u1 + (b.nu2) u2 with
/// nu2 = -nu1.
pub fn b_weighted_jump<R: Real>(u1: Vec3<R>, u2: Vec3<R>, normal1: Vec3<R>, b: Vec3<R>) -> Vec3<R> {
    let bn = dot(b, normal1);
    [
        bn * (u1[0] - u2[0]),
        bn * (u1[1] - u2[1]),
        bn * (u1[2] - u2[2]),
    ]
}

/// b-weighted jump of a DOF field at a point of an interior face, given in
/// the face's canonical barycentric coordinates.
pub fn b_jump_at<R: Real>(
    space: &BdmSpace<R>,
    dofs: &[R],
    face: usize,
    b: &VelocityField<R>,
    face_lambda: [R; 3],
) -> Result<Vec3<R>> {
    let f = &space.mesh.faces[face];
    let Some(t2) = f.tet_second else {
        return Err(Error::invalid(format!(
            "face {face} is a boundary face; jumps are defined on interior faces only"
        )));
    };
    let t1 = f.tet_first;
    let l1 = space.mesh.face_point_in_tet(face, t1, face_lambda);
    let l2 = space.mesh.face_point_in_tet(face, t2, face_lambda);
    let (u1, _) = space.evaluate(dofs, t1, l1)?;
    let (u2, _) = space.evaluate(dofs, t2, l2)?;
    let x = space.mesh.point_from_barycentric(t1, l1);
    Ok(b_weighted_jump(u1, u2, f.normal, b(x)))
}

/// Dense lifting block of one interior face: maps the DOFs of the two
/// incident tets to broken vector coefficients on those tets.
#[derive(Debug, Clone)]
pub struct FaceBlock<R> {
    pub face: usize,
    pub tets: (usize, usize),
    /// Global dof ids feeding this block (dofs of both tets, deduplicated).
    pub cols: Vec<usize>,
    /// Rows: broken coefficients, first tet's block then second tet's.
    pub mat: DMat<R>,
}

/// Sparse lifting operator R = sum over interior faces of the per-face
/// liftings, stored as per-face dense blocks.
pub struct LiftingOperator<R> {
    pub degree: usize,
    pub broken: BrokenVectorSpace<R>,
    pub velocity: VelocityField<R>,
    pub face_quad_degree: usize,
    pub blocks: Vec<Option<FaceBlock<R>>>,
    /// For each tet, the interior faces whose lifting touches it.
    pub tet_active_faces: Vec<Vec<usize>>,
}

impl<R: Real> std::fmt::Debug for LiftingOperator<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LiftingOperator")
            .field("degree", &self.degree)
            .field("active_faces", &self.blocks.iter().filter(|b| b.is_some()).count())
            .finish()
    }
}

/// Assemble the lifting operator for velocity `b` and broken degree `l`.
///
/// Faces where b.nu vanishes at every quadrature point produce no block;
/// with a compactly supported velocity most faces drop out.
pub fn assemble_lifting<R: Real>(
    space: &BdmSpace<R>,
    b: VelocityField<R>,
    l: usize,
    face_quad_degree: usize,
) -> Result<LiftingOperator<R>> {
    if l == 0 {
        return Err(Error::invalid(
            "lifting degree l = 0 is excluded (l >= 1 is required for the reconstruction)",
        ));
    }
    let mesh = space.mesh.clone();
    let broken = BrokenVectorSpace::new(mesh.clone(), l)?;
    let nct = broken.ncoef_per_tet;
    let nsc = broken.nscalar();
    let face_rule: QuadRule<R> = simplex_quadrature(2, face_quad_degree)?;
    let vol_rule: QuadRule<R> = simplex_quadrature(3, 2 * l)?;
    let half = from_f64::<R>(0.5);

    let mut blocks: Vec<Option<FaceBlock<R>>> = vec![None; mesh.faces.len()];
    let mut tet_active_faces: Vec<Vec<usize>> = vec![Vec::new(); mesh.tets.len()];

    for (fid, face) in mesh.faces.iter().enumerate() {
        let Some(t2) = face.tet_second else { continue };
        let t1 = face.tet_first;

        // b.nu at the face quadrature points
        let nq = face_rule.len();
        let mut bn = vec![R::zero(); nq];
        let mut all_zero = true;
        let mut lambdas1 = Vec::with_capacity(nq);
        let mut lambdas2 = Vec::with_capacity(nq);
        for p in face_rule.points.iter() {
            let fl = [p[0], p[1], p[2]];
            let l1 = mesh.face_point_in_tet(fid, t1, fl);
            let l2 = mesh.face_point_in_tet(fid, t2, fl);
            let x = mesh.point_from_barycentric(t1, l1);
            let q = lambdas1.len();
            bn[q] = dot(b(x), face.normal);
            if bn[q] != R::zero() {
                all_zero = false;
            }
            lambdas1.push(l1);
            lambdas2.push(l2);
        }
        if all_zero {
            continue;
        }

        // columns: dofs of both tets, deduplicated (shared face dofs)
        let e1 = space.element(t1);
        let e2 = space.element(t2);
        let mut cols: Vec<usize> = e1.dofs.iter().chain(e2.dofs.iter()).copied().collect();
        cols.sort_unstable();
        cols.dedup();
        let col_of = |dof: usize| cols.binary_search(&dof).unwrap();

        // trace tables of both tets at the face points
        let pts1: Vec<[R; 3]> = lambdas1.iter().map(|l| [l[1], l[2], l[3]]).collect();
        let pts2: Vec<[R; 3]> = lambdas2.iter().map(|l| [l[1], l[2], l[3]]).collect();
        let tab1 = space.tabulate(t1, &pts1);
        let tab2 = space.tabulate(t2, &pts2);

        // broken scalar basis traces on both sides
        let eta1: Vec<Vec<R>> = pts1.iter().map(|xi| broken.basis_values(*xi)).collect();
        let eta2: Vec<Vec<R>> = pts2.iter().map(|xi| broken.basis_values(*xi)).collect();

        // right-hand sides: rhs[row][col], rows = 2 * nct
        let mut rhs = DMat::<R>::zeros(2 * nct, cols.len());
        let area2 = face.area + face.area;
        for q in 0..nq {
            let jw = face_rule.weights[q] * area2;
            // jump of every column basis function at this point
            let mut jumps = vec![[R::zero(); 3]; cols.len()];
            for (j, &dof) in e1.dofs.iter().enumerate() {
                let c = col_of(dof);
                let v = tab1.value[q * tab1.ndof + j];
                for d in 0..3 {
                    jumps[c][d] += bn[q] * v[d];
                }
            }
            for (j, &dof) in e2.dofs.iter().enumerate() {
                let c = col_of(dof);
                let v = tab2.value[q * tab2.ndof + j];
                for d in 0..3 {
                    jumps[c][d] -= bn[q] * v[d];
                }
            }
            // <R u, eta e_d> = -<jump, {eta e_d}>_F; the average halves
            // each one-sided trace
            for (c, jump) in jumps.iter().enumerate() {
                for a in 0..nsc {
                    let w1 = jw * half * eta1[q][a];
                    let w2 = jw * half * eta2[q][a];
                    for d in 0..3 {
                        *rhs.at_mut(3 * a + d, c) -= w1 * jump[d];
                        *rhs.at_mut(nct + 3 * a + d, c) -= w2 * jump[d];
                    }
                }
            }
        }

        // two-tet broken mass matrix (block diagonal) and its Cholesky solve
        let mut mass = DMat::<R>::zeros(2 * nct, 2 * nct);
        for (side, t) in [(0usize, t1), (1usize, t2)] {
            let det = space.element(t).det;
            for (p, w) in vol_rule.points.iter().zip(vol_rule.weights.iter()) {
                let sv = broken.basis_values([p[1], p[2], p[3]]);
                let jw = *w * det;
                for a in 0..nsc {
                    for bix in 0..nsc {
                        let v = jw * sv[a] * sv[bix];
                        for d in 0..3 {
                            let r = side * nct + 3 * a + d;
                            let cix = side * nct + 3 * bix + d;
                            *mass.at_mut(r, cix) += v;
                        }
                    }
                }
            }
        }
        let chol = mass.cholesky().expect("broken mass matrix must be SPD");
        let mut mat = DMat::<R>::zeros(2 * nct, cols.len());
        let mut col_buf = vec![R::zero(); 2 * nct];
        for c in 0..cols.len() {
            for r in 0..2 * nct {
                col_buf[r] = rhs.at(r, c);
            }
            DMat::cholesky_solve(&chol, &mut col_buf);
            for r in 0..2 * nct {
                *mat.at_mut(r, c) = col_buf[r];
            }
        }

        tet_active_faces[t1].push(fid);
        tet_active_faces[t2].push(fid);
        blocks[fid] = Some(FaceBlock { face: fid, tets: (t1, t2), cols, mat });
    }

    Ok(LiftingOperator {
        degree: l,
        broken,
        velocity: b,
        face_quad_degree,
        blocks,
        tet_active_faces,
    })
}

impl<R: Real> LiftingOperator<R> {
    /// Apply the summed lifting to a real dof vector, producing broken
    /// vector coefficients.
    pub fn apply(&self, dofs: &[R]) -> Vec<R> {
        let mut out = vec![R::zero(); self.broken.ncoef()];
        self.accumulate(dofs, &mut out);
        out
    }

    /// Apply to a complex dof vector (the lifting itself is real).
    pub fn apply_complex(&self, dofs: &[Cplx<R>]) -> Vec<Cplx<R>> {
        let re: Vec<R> = dofs.iter().map(|z| z.re).collect();
        let im: Vec<R> = dofs.iter().map(|z| z.im).collect();
        let lre = self.apply(&re);
        let lim = self.apply(&im);
        lre.into_iter().zip(lim).map(|(a, b)| Complex::new(a, b)).collect()
    }

    fn accumulate(&self, dofs: &[R], out: &mut [R]) {
        let nct = self.broken.ncoef_per_tet;
        for block in self.blocks.iter().flatten() {
            let (t1, t2) = block.tets;
            for (c, &dof) in block.cols.iter().enumerate() {
                let v = dofs[dof];
                if v == R::zero() {
                    continue;
                }
                for r in 0..nct {
                    out[t1 * nct + r] += block.mat.at(r, c) * v;
                    out[t2 * nct + r] += block.mat.at(nct + r, c) * v;
                }
            }
        }
    }
}

/// Reconstructed convection derivative of a dof field: elementwise b.grad u
/// plus the lifted jumps, evaluable pointwise.
pub struct ReconstructedDerivative<'a, R: Real> {
    pub space: &'a BdmSpace<R>,
    pub lifting: &'a LiftingOperator<R>,
    pub dofs: Vec<Cplx<R>>,
    pub lifted: Vec<Cplx<R>>,
}

/// D u = b.grad(u|_tau) + (R u)|_tau per tet.
pub fn reconstructed_derivative<'a, R: Real>(
    lifting: &'a LiftingOperator<R>,
    space: &'a BdmSpace<R>,
    dofs: &[Cplx<R>],
) -> ReconstructedDerivative<'a, R> {
    let lifted = lifting.apply_complex(dofs);
    ReconstructedDerivative { space, lifting, dofs: dofs.to_vec(), lifted }
}

impl<R: Real> ReconstructedDerivative<'_, R> {
    /// Value at a barycentric point of tet `t`.
    pub fn eval(&self, t: usize, lambda: [R; 4]) -> Result<[Cplx<R>; 3]> {
        if t >= self.space.mesh.tets.len() {
            return Err(Error::invalid(format!("tet index {t} out of range")));
        }
        let xi = [lambda[1], lambda[2], lambda[3]];
        let table = self.space.tabulate(t, &[xi]);
        let elem = self.space.element(t);
        let x = self.space.mesh.point_from_barycentric(t, lambda);
        let bv = (self.lifting.velocity)(x);
        let mut out = [Cplx::<R>::new(R::zero(), R::zero()); 3];
        for (j, &dof) in elem.dofs.iter().enumerate() {
            let c = self.dofs[dof];
            if c == Cplx::new(R::zero(), R::zero()) {
                continue;
            }
            let jac = table.jac[j];
            for d in 0..3 {
                let conv = jac[d][0] * bv[0] + jac[d][1] * bv[1] + jac[d][2] * bv[2];
                out[d] += c * conv;
            }
        }
        // lifted part: broken evaluation with complex coefficients
        let sv = self.lifting.broken.basis_values(xi);
        let base = t * self.lifting.broken.ncoef_per_tet;
        for (a, &s) in sv.iter().enumerate() {
            for d in 0..3 {
                out[d] += self.lifted[base + 3 * a + d] * s;
            }
        }
        Ok(out)
    }
}

/// Inner product combining L2, divergence and reconstructed-convection
/// terms: <div u, div v> + <u, v> + <D u, D v>, conjugating the second slot.
pub fn graph_inner<R: Real>(
    space: &BdmSpace<R>,
    lifting: &LiftingOperator<R>,
    u: &[Cplx<R>],
    v: &[Cplx<R>],
) -> Cplx<R> {
    let quad_degree = 2 * space.k + 2;
    let rule: QuadRule<R> = simplex_quadrature(3, quad_degree).unwrap();
    let ref_pts: Vec<[R; 3]> = rule.points.iter().map(|p| [p[1], p[2], p[3]]).collect();
    let lift_u = lifting.apply_complex(u);
    let lift_v = lifting.apply_complex(v);
    let mut acc = Cplx::<R>::new(R::zero(), R::zero());
    let zero = Cplx::<R>::new(R::zero(), R::zero());
    let nct = lifting.broken.ncoef_per_tet;

    for t in 0..space.mesh.tets.len() {
        let table = space.tabulate(t, &ref_pts);
        let elem = space.element(t);
        for (q, w) in rule.weights.iter().enumerate() {
            let x = space.mesh.point_from_barycentric(t, rule.points[q]);
            let bv = (lifting.velocity)(x);
            let mut uval = [zero; 3];
            let mut vval = [zero; 3];
            let mut udiv = zero;
            let mut vdiv = zero;
            let mut udd = [zero; 3];
            let mut vdd = [zero; 3];
            for (j, &dof) in elem.dofs.iter().enumerate() {
                let idx = q * table.ndof + j;
                let cu = u[dof];
                let cv = v[dof];
                let val = table.value[idx];
                let jac = table.jac[idx];
                for d in 0..3 {
                    let conv = jac[d][0] * bv[0] + jac[d][1] * bv[1] + jac[d][2] * bv[2];
                    uval[d] += cu * val[d];
                    vval[d] += cv * val[d];
                    udd[d] += cu * conv;
                    vdd[d] += cv * conv;
                }
                udiv += cu * table.div[idx];
                vdiv += cv * table.div[idx];
            }
            let sv = lifting.broken.basis_values(ref_pts[q]);
            let base = t * nct;
            for (a, &s) in sv.iter().enumerate() {
                for d in 0..3 {
                    udd[d] += lift_u[base + 3 * a + d] * s;
                    vdd[d] += lift_v[base + 3 * a + d] * s;
                }
            }
            let jw = *w * elem.det;
            let mut point = udiv * vdiv.conj();
            for d in 0..3 {
                point += uval[d] * vval[d].conj() + udd[d] * vdd[d].conj();
            }
            acc += point * jw;
        }
    }
    acc
}

/// Distance between an exact solution triple (u, div u, b.grad u) and a
/// discrete field: the square root of the summed squared L2 errors of the
/// value, the divergence and the (reconstructed) convective derivative.
pub fn graph_distance<R: Real>(
    space: &BdmSpace<R>,
    lifting: &LiftingOperator<R>,
    u_exact: impl Fn(Vec3<R>) -> Vec3<R>,
    div_exact: impl Fn(Vec3<R>) -> R,
    conv_exact: impl Fn(Vec3<R>) -> Vec3<R>,
    dofs: &[Cplx<R>],
) -> R {
    graph_distance_deg(space, lifting, u_exact, div_exact, conv_exact, dofs, 2 * space.k + 6)
}

/// [`graph_distance`] with an explicit error-quadrature degree.
pub fn graph_distance_deg<R: Real>(
    space: &BdmSpace<R>,
    lifting: &LiftingOperator<R>,
    u_exact: impl Fn(Vec3<R>) -> Vec3<R>,
    div_exact: impl Fn(Vec3<R>) -> R,
    conv_exact: impl Fn(Vec3<R>) -> Vec3<R>,
    dofs: &[Cplx<R>],
    quad_degree: usize,
) -> R {
    let rule: QuadRule<R> = simplex_quadrature(3, quad_degree).unwrap();
    let ref_pts: Vec<[R; 3]> = rule.points.iter().map(|p| [p[1], p[2], p[3]]).collect();
    let lifted = lifting.apply_complex(dofs);
    let zero = Cplx::<R>::new(R::zero(), R::zero());
    let nct = lifting.broken.ncoef_per_tet;
    let mut err2 = R::zero();

    for t in 0..space.mesh.tets.len() {
        let table = space.tabulate(t, &ref_pts);
        let elem = space.element(t);
        for (q, w) in rule.weights.iter().enumerate() {
            let x = space.mesh.point_from_barycentric(t, rule.points[q]);
            let bv = (lifting.velocity)(x);
            let mut uval = [zero; 3];
            let mut udiv = zero;
            let mut udd = [zero; 3];
            for (j, &dof) in elem.dofs.iter().enumerate() {
                let idx = q * table.ndof + j;
                let c = dofs[dof];
                let val = table.value[idx];
                let jac = table.jac[idx];
                for d in 0..3 {
                    let conv = jac[d][0] * bv[0] + jac[d][1] * bv[1] + jac[d][2] * bv[2];
                    uval[d] += c * val[d];
                    udd[d] += c * conv;
                }
                udiv += c * table.div[idx];
            }
            let sv = lifting.broken.basis_values(ref_pts[q]);
            let base = t * nct;
            for (a, &s) in sv.iter().enumerate() {
                for d in 0..3 {
                    udd[d] += lifted[base + 3 * a + d] * s;
                }
            }
            let ex_u = u_exact(x);
            let ex_div = div_exact(x);
            let ex_conv = conv_exact(x);
            let mut point = (udiv.re - ex_div) * (udiv.re - ex_div) + udiv.im * udiv.im;
            for d in 0..3 {
                point += (uval[d].re - ex_u[d]) * (uval[d].re - ex_u[d]) + uval[d].im * uval[d].im;
                point += (udd[d].re - ex_conv[d]) * (udd[d].re - ex_conv[d]) + udd[d].im * udd[d].im;
            }
            err2 += *w * elem.det * point;
        }
    }
    err2.sqrt()
}

/// Convenience: promote a real dof vector to complex.
pub fn to_complex<R: Real>(dofs: &[R]) -> Vec<Cplx<R>> {
    dofs.iter().map(|&v| Complex::new(v, R::zero())).collect()
}
