//! BDM finite element spaces and broken polynomial spaces.
//!
//! The degree-k BDM space uses the full vector polynomial space per tet.
//! Degrees of freedom are face moments of the normal trace against an
//! orthonormal basis of P_k on each face, plus (for k >= 2) interior moments
//! against a covariantly mapped Nedelec complement. DOFs are defined against
//! global face data (canonical vertex order, stored normal), so matching DOF
//! values across a shared face force equal normal traces without any
//! orientation bookkeeping, and the local dual bases come out of one dense
//! inverse per tet.
//!
//! All fields are evaluated through the contravariant Piola map, which
//! preserves normal traces and scales the divergence by 1/det J.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::felib::polynomial::{dim_p2, dim_p3, exponents_3d, OrthonormalBasis};
use crate::felib::quadrature::{simplex_quadrature, QuadRule};
use crate::linalg::{det3, dot, inv3, mat_vec, scale, transpose3, DMat, Mat3, Vec3};
use crate::mesh::Mesh;
use crate::{from_f64, Real};

/// Largest supported BDM polynomial degree.
pub const MAX_BDM_DEGREE: usize = 3;

/// Per-tet geometry and the local dual-basis coefficients.
#[derive(Debug, Clone)]
pub struct TetElement<R> {
    pub origin: Vec3<R>,
    pub jac: Mat3<R>,
    pub inv_jac: Mat3<R>,
    pub det: R,
    /// Global DOF ids: 4 * nfd face dofs (faces in tet-local order), then
    /// interior dofs.
    pub dofs: Vec<usize>,
    /// Column j holds the prime-basis coefficients of the dual basis
    /// function of local dof j.
    pub coef: DMat<R>,
}

/// Degree-k H(div) BDM space with the essential condition nu.u = 0 handled
/// by DOF elimination.
#[derive(Debug, Clone)]
pub struct BdmSpace<R> {
    pub k: usize,
    pub mesh: Arc<Mesh<R>>,
    pub ndof: usize,
    pub ndof_per_face: usize,
    pub ndof_interior: usize,
    /// Sorted global ids of the normal DOFs on boundary faces.
    pub boundary_dofs: Vec<usize>,
    /// `free_index[dof] = Some(compressed index)` for unconstrained dofs.
    pub free_index: Vec<Option<usize>>,
    pub nfree: usize,
    elements: Vec<TetElement<R>>,
    scalar_basis: OrthonormalBasis<R>,
    face_basis: OrthonormalBasis<R>,
    /// Interior moment weights (Nedelec complement), as monomial
    /// coefficients per component over exponents of degree <= k-1.
    interior_weights: Vec<[Vec<R>; 3]>,
    interior_exps: Vec<[usize; 3]>,
}

/// Values, divergences and Jacobians of all local basis functions of one tet
/// at a set of reference points. Layout: entry `q * ndof + j`.
#[derive(Debug, Clone)]
pub struct TetBasisTable<R> {
    pub ndof: usize,
    pub nq: usize,
    pub value: Vec<[R; 3]>,
    pub div: Vec<R>,
    pub jac: Vec<Mat3<R>>,
}

impl<R: Real> BdmSpace<R> {
    pub fn new(mesh: Arc<Mesh<R>>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("BDM degree k must be at least 1"));
        }
        if k > MAX_BDM_DEGREE {
            return Err(Error::Capability {
                what: format!("BDM degree k = {k}"),
                max: MAX_BDM_DEGREE,
            });
        }
        let nfd = dim_p2(k);
        let nprime = 3 * dim_p3(k);
        let nid = nprime - 4 * nfd;
        let ndof = mesh.faces.len() * nfd + mesh.tets.len() * nid;

        let scalar_basis = OrthonormalBasis::new(3, k);
        let face_basis = OrthonormalBasis::new(2, k);
        let (interior_weights, interior_exps) = nedelec_complement::<R>(k);
        debug_assert_eq!(interior_weights.len(), nid);

        let face_rule: QuadRule<R> = simplex_quadrature(2, 2 * k)?;
        let tet_rule: QuadRule<R> = simplex_quadrature(3, 2 * k)?;

        let mut elements = Vec::with_capacity(mesh.tets.len());
        for t in 0..mesh.tets.len() {
            let (origin, jac) = mesh.tet_jacobian(t);
            let det = det3(&jac);
            let inv_jac = inv3(&jac);

            let mut dofs = Vec::with_capacity(4 * nfd + nid);
            for &f in &mesh.tet_faces[t] {
                for m in 0..nfd {
                    dofs.push(f * nfd + m);
                }
            }
            let interior_offset = mesh.faces.len() * nfd + t * nid;
            for j in 0..nid {
                dofs.push(interior_offset + j);
            }

            // element matrix M[j][i] = L_j(P_i) with Piola-mapped prime fields
            let nloc = 4 * nfd + nid;
            let mut m_mat = DMat::<R>::zeros(nloc, nloc);

            // face moment rows
            for (fi, &f) in mesh.tet_faces[t].iter().enumerate() {
                let face = &mesh.faces[f];
                let face_scale = (from_f64::<R>(0.5) / face.area).sqrt();
                let jt_n = mat_vec(&transpose3(&jac), face.normal);
                for (q, w) in face_rule.points.iter().zip(face_rule.weights.iter()) {
                    let face_lambda = [q[0], q[1], q[2]];
                    let lambda = mesh.face_point_in_tet(f, t, face_lambda);
                    let xi = [lambda[1], lambda[2], lambda[3]];
                    let sv = scalar_basis.values(xi);
                    let qv = face_basis.values([q[1], q[2], R::zero()]);
                    // ref weights sum to 1/2; physical measure is 2*area
                    let jw = *w * (face.area + face.area);
                    for (a, &sva) in sv.iter().enumerate() {
                        for d in 0..3 {
                            let i = 3 * a + d;
                            // nu . P_i = (J^T nu)_d phi_a / det
                            let nv = jt_n[d] * sva / det;
                            for (m, &qm) in qv.iter().enumerate() {
                                let row = fi * nfd + m;
                                *m_mat.at_mut(row, i) += jw * nv * qm * face_scale;
                            }
                        }
                    }
                }
            }

            // Interior moment rows. The contravariant/covariant pairing
            // cancels the geometry: int_tet P_i . (J^-T w_j o inv map) dx
            // equals the reference integral of (phi_a e_d) . w_j.
            if nid > 0 {
                for (q, w) in tet_rule.points.iter().zip(tet_rule.weights.iter()) {
                    let xi = [q[1], q[2], q[3]];
                    let sv = scalar_basis.values(xi);
                    let wv: Vec<Vec3<R>> = interior_weights
                        .iter()
                        .map(|wj| eval_mono_vector(wj, &interior_exps, xi))
                        .collect();
                    for (a, &sva) in sv.iter().enumerate() {
                        for d in 0..3 {
                            let i = 3 * a + d;
                            for (j, wj) in wv.iter().enumerate() {
                                let row = 4 * nfd + j;
                                *m_mat.at_mut(row, i) += *w * sva * wj[d];
                            }
                        }
                    }
                }
            }

            let coef = m_mat.inverse();
            elements.push(TetElement { origin, jac, inv_jac, det, dofs, coef });
        }

        let mut boundary_dofs = Vec::new();
        for (f, face) in mesh.faces.iter().enumerate() {
            if face.is_boundary() {
                for m in 0..nfd {
                    boundary_dofs.push(f * nfd + m);
                }
            }
        }
        boundary_dofs.sort_unstable();
        let mut free_index = vec![None; ndof];
        let mut nfree = 0;
        let mut b_iter = boundary_dofs.iter().peekable();
        for dof in 0..ndof {
            if b_iter.peek() == Some(&&dof) {
                b_iter.next();
            } else {
                free_index[dof] = Some(nfree);
                nfree += 1;
            }
        }

        Ok(BdmSpace {
            k,
            mesh,
            ndof,
            ndof_per_face: nfd,
            ndof_interior: nid,
            boundary_dofs,
            free_index,
            nfree,
            elements,
            scalar_basis,
            face_basis,
            interior_weights,
            interior_exps,
        })
    }

    pub fn element(&self, t: usize) -> &TetElement<R> {
        &self.elements[t]
    }

    pub fn ndof_local(&self) -> usize {
        4 * self.ndof_per_face + self.ndof_interior
    }

    /// Face-basis values at a face reference point, normalized to be
    /// orthonormal on the physical face `f`.
    pub fn face_basis_values(&self, f: usize, face_lambda: [R; 3]) -> Vec<R> {
        let face_scale = (from_f64::<R>(0.5) / self.mesh.faces[f].area).sqrt();
        self.face_basis
            .values([face_lambda[1], face_lambda[2], R::zero()])
            .iter()
            .map(|&v| v * face_scale)
            .collect()
    }

    /// Interpolation via the DOF functionals: face moments of nu.v plus
    /// interior moments. Reproduces polynomial fields of degree <= k; if
    /// nu.v = 0 on the boundary, all constrained DOFs vanish.
    pub fn interpolate(&self, v: impl Fn(Vec3<R>) -> Vec3<R>) -> Vec<R> {
        // Polynomial exactness only needs degree 2k; the generous default
        // keeps the moments of smooth non-polynomial fields consistent with
        // broken projections down to ~1e-12 even on coarse cells.
        let quad_deg = (2 * self.k + 6).max(14);
        let face_rule: QuadRule<R> = simplex_quadrature(2, quad_deg).unwrap();
        let tet_rule: QuadRule<R> = simplex_quadrature(3, quad_deg).unwrap();
        let nfd = self.ndof_per_face;
        let mut dofs = vec![R::zero(); self.ndof];

        for (f, face) in self.mesh.faces.iter().enumerate() {
            let t = face.tet_first;
            let face_scale = (from_f64::<R>(0.5) / face.area).sqrt();
            for (q, w) in face_rule.points.iter().zip(face_rule.weights.iter()) {
                let face_lambda = [q[0], q[1], q[2]];
                let lambda = self.mesh.face_point_in_tet(f, t, face_lambda);
                let x = self.mesh.point_from_barycentric(t, lambda);
                let val = v(x);
                let nv = dot(face.normal, val);
                let qv = self.face_basis.values([q[1], q[2], R::zero()]);
                let jw = *w * (face.area + face.area);
                for (m, &qm) in qv.iter().enumerate() {
                    dofs[f * nfd + m] += jw * nv * qm * face_scale;
                }
            }
        }

        if self.ndof_interior > 0 {
            for (t, elem) in self.elements.iter().enumerate() {
                let base = self.mesh.faces.len() * nfd + t * self.ndof_interior;
                let jmt = transpose3(&elem.inv_jac);
                for (q, w) in tet_rule.points.iter().zip(tet_rule.weights.iter()) {
                    let xi = [q[1], q[2], q[3]];
                    let x = self.mesh.point_from_barycentric(t, *q);
                    let val = v(x);
                    let jw = *w * elem.det;
                    for (j, wj) in self.interior_weights.iter().enumerate() {
                        let w_ref = eval_mono_vector(wj, &self.interior_exps, xi);
                        let w_phys = mat_vec(&jmt, w_ref);
                        dofs[base + j] += jw * dot(val, w_phys);
                    }
                }
            }
        }
        dofs
    }

    /// Evaluate the field and its divergence at a barycentric point of a tet.
    pub fn evaluate(&self, dofs: &[R], t: usize, lambda: [R; 4]) -> Result<(Vec3<R>, R)> {
        if t >= self.elements.len() {
            return Err(Error::invalid(format!(
                "tet index {t} out of range ({} tets)",
                self.elements.len()
            )));
        }
        if dofs.len() != self.ndof {
            return Err(Error::invalid(format!(
                "dof vector length {} does not match space dimension {}",
                dofs.len(),
                self.ndof
            )));
        }
        let table = self.tabulate(t, &[[lambda[1], lambda[2], lambda[3]]]);
        let elem = &self.elements[t];
        let mut value = [R::zero(); 3];
        let mut div = R::zero();
        for (j, &dof) in elem.dofs.iter().enumerate() {
            let c = dofs[dof];
            for d in 0..3 {
                value[d] += c * table.value[j][d];
            }
            div += c * table.div[j];
        }
        Ok((value, div))
    }

    /// Tabulate all local basis functions of tet `t` at reference points.
    pub fn tabulate(&self, t: usize, ref_pts: &[[R; 3]]) -> TetBasisTable<R> {
        let elem = &self.elements[t];
        let nloc = self.ndof_local();
        let inv_det = R::one() / elem.det;
        let mut out = TetBasisTable {
            ndof: nloc,
            nq: ref_pts.len(),
            value: vec![[R::zero(); 3]; nloc * ref_pts.len()],
            div: vec![R::zero(); nloc * ref_pts.len()],
            jac: vec![[[R::zero(); 3]; 3]; nloc * ref_pts.len()],
        };
        for (q, xi) in ref_pts.iter().enumerate() {
            let (sv, sg) = self.scalar_basis.values_and_gradients(*xi);
            for j in 0..nloc {
                // reference field and gradient of dual basis j
                let mut u_ref = [R::zero(); 3];
                let mut g_ref = [[R::zero(); 3]; 3]; // g_ref[d][m] = d_m u_d
                for a in 0..sv.len() {
                    for d in 0..3 {
                        let c = elem.coef.at(3 * a + d, j);
                        if c != R::zero() {
                            u_ref[d] += c * sv[a];
                            for m in 0..3 {
                                g_ref[d][m] += c * sg[a][m];
                            }
                        }
                    }
                }
                let idx = q * nloc + j;
                out.value[idx] = scale(inv_det, mat_vec(&elem.jac, u_ref));
                out.div[idx] = (g_ref[0][0] + g_ref[1][1] + g_ref[2][2]) * inv_det;
                // physical Jacobian: (1/det) J G J^-1
                let mut jg = [[R::zero(); 3]; 3];
                for r in 0..3 {
                    for c in 0..3 {
                        let mut s = R::zero();
                        for m in 0..3 {
                            s += elem.jac[r][m] * g_ref[m][c];
                        }
                        jg[r][c] = s;
                    }
                }
                let mut phys = [[R::zero(); 3]; 3];
                for r in 0..3 {
                    for c in 0..3 {
                        let mut s = R::zero();
                        for m in 0..3 {
                            s += jg[r][m] * elem.inv_jac[m][c];
                        }
                        phys[r][c] = s * inv_det;
                    }
                }
                out.jac[idx] = phys;
            }
        }
        out
    }

    /// Zero out all boundary-constrained dofs in place.
    pub fn apply_essential_bc(&self, dofs: &mut [R]) {
        for &b in &self.boundary_dofs {
            dofs[b] = R::zero();
        }
    }
}

/// Scalar broken space of per-tet polynomials (degree k-1 for the divergence
/// image), with coefficients against the orthonormal reference basis
/// composed with the inverse affine map.
#[derive(Debug, Clone)]
pub struct BrokenScalarSpace<R> {
    pub degree: usize,
    pub mesh: Arc<Mesh<R>>,
    pub ncoef_per_tet: usize,
    basis: OrthonormalBasis<R>,
}

impl<R: Real> BrokenScalarSpace<R> {
    pub fn new(mesh: Arc<Mesh<R>>, degree: usize) -> Self {
        let basis = OrthonormalBasis::new(3, degree);
        let ncoef_per_tet = basis.len();
        BrokenScalarSpace { degree, mesh, ncoef_per_tet, basis }
    }

    pub fn ncoef(&self) -> usize {
        self.ncoef_per_tet * self.mesh.tets.len()
    }

    /// Elementwise L2 projection. The reference basis is orthonormal, so the
    /// per-tet mass matrix is det J times the identity and the det cancels
    /// against the integration measure.
    pub fn project(&self, v: impl Fn(Vec3<R>) -> R, quad_degree: usize) -> Vec<R> {
        let rule: QuadRule<R> = simplex_quadrature(3, quad_degree).unwrap();
        let mut coef = vec![R::zero(); self.ncoef()];
        for t in 0..self.mesh.tets.len() {
            let base = t * self.ncoef_per_tet;
            for (q, w) in rule.points.iter().zip(rule.weights.iter()) {
                let x = self.mesh.point_from_barycentric(t, *q);
                let val = v(x);
                let sv = self.basis.values([q[1], q[2], q[3]]);
                for (a, &s) in sv.iter().enumerate() {
                    coef[base + a] += *w * val * s;
                }
            }
        }
        coef
    }

    pub fn evaluate(&self, coef: &[R], t: usize, lambda: [R; 4]) -> R {
        let sv = self.basis.values([lambda[1], lambda[2], lambda[3]]);
        let base = t * self.ncoef_per_tet;
        sv.iter()
            .enumerate()
            .fold(R::zero(), |acc, (a, &s)| acc + coef[base + a] * s)
    }

    pub fn basis_values(&self, xi: [R; 3]) -> Vec<R> {
        self.basis.values(xi)
    }
}

/// Vector broken space (degree l) hosting the lifted jumps. Plain composition
/// with the affine map, not Piola; coefficients are tet-major with the
/// component index fastest: coef[tet * 3*dim + 3*a + d].
#[derive(Debug, Clone)]
pub struct BrokenVectorSpace<R> {
    pub degree: usize,
    pub mesh: Arc<Mesh<R>>,
    pub ncoef_per_tet: usize,
    basis: OrthonormalBasis<R>,
}

impl<R: Real> BrokenVectorSpace<R> {
    pub fn new(mesh: Arc<Mesh<R>>, degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::invalid(
                "broken vector degree l = 0 is excluded; the lifting needs l >= 1",
            ));
        }
        let basis = OrthonormalBasis::new(3, degree);
        let ncoef_per_tet = 3 * basis.len();
        Ok(BrokenVectorSpace { degree, mesh, ncoef_per_tet, basis })
    }

    pub fn ncoef(&self) -> usize {
        self.ncoef_per_tet * self.mesh.tets.len()
    }

    pub fn nscalar(&self) -> usize {
        self.basis.len()
    }

    pub fn basis_values(&self, xi: [R; 3]) -> Vec<R> {
        self.basis.values(xi)
    }

    pub fn evaluate(&self, coef: &[R], t: usize, lambda: [R; 4]) -> Vec3<R> {
        let sv = self.basis.values([lambda[1], lambda[2], lambda[3]]);
        let base = t * self.ncoef_per_tet;
        let mut out = [R::zero(); 3];
        for (a, &s) in sv.iter().enumerate() {
            for d in 0..3 {
                out[d] += coef[base + 3 * a + d] * s;
            }
        }
        out
    }
}

/// Divergence of a BDM dof vector as coefficients of a broken scalar space
/// of degree k-1 (exact: the divergence lies in that space).
pub fn divergence_coefficients<R: Real>(
    space: &BdmSpace<R>,
    dofs: &[R],
    broken: &BrokenScalarSpace<R>,
) -> Vec<R> {
    assert_eq!(broken.degree + 1, space.k, "divergence space must have degree k-1");
    let rule: QuadRule<R> = simplex_quadrature(3, 2 * space.k).unwrap();
    let ref_pts: Vec<[R; 3]> = rule.points.iter().map(|p| [p[1], p[2], p[3]]).collect();
    let mut coef = vec![R::zero(); broken.ncoef()];
    for t in 0..space.mesh.tets.len() {
        let table = space.tabulate(t, &ref_pts);
        let elem = space.element(t);
        let base = t * broken.ncoef_per_tet;
        for (q, w) in rule.weights.iter().enumerate() {
            let mut div = R::zero();
            for (j, &dof) in elem.dofs.iter().enumerate() {
                div += dofs[dof] * table.div[q * table.ndof + j];
            }
            let sv = broken.basis_values(ref_pts[q]);
            for (a, &s) in sv.iter().enumerate() {
                coef[base + a] += *w * div * s;
            }
        }
    }
    coef
}

/// Basis of the interior-moment complement: P_{k-2}^3 plus the homogeneous
/// degree-(k-1) fields orthogonal to the position vector. Contains the
/// gradients of P_{k-1}, which is what makes the commutation with the broken
/// divergence projection exact. Returned as monomial coefficients per
/// component over the exponents of degree <= k-1.
fn nedelec_complement<R: Real>(k: usize) -> (Vec<[Vec<R>; 3]>, Vec<[usize; 3]>) {
    let exps = exponents_3d(k.saturating_sub(1));
    let n = exps.len();
    let mut weights: Vec<[Vec<R>; 3]> = Vec::new();
    if k < 2 {
        return (weights, exps);
    }
    let mono_index = |e: [usize; 3]| exps.iter().position(|&x| x == e).unwrap();

    // P_{k-2}^3
    for e in exponents_3d(k - 2) {
        for d in 0..3 {
            let mut w = [vec![R::zero(); n], vec![R::zero(); n], vec![R::zero(); n]];
            w[d][mono_index(e)] = R::one();
            weights.push(w);
        }
    }
    // Rotational part: products q * s of homogeneous monomials q of degree
    // k-2 with s in {(y,-x,0), (z,0,-x), (0,z,-y)}. For k = 3 the nine
    // products satisfy one linear relation z*s0 - y*s1 + x*s2 = 0, so the
    // combination x*(0,z,-y) is dropped.
    let rot: [[(usize, [usize; 3], bool); 2]; 3] = [
        [(0, [0, 1, 0], false), (1, [1, 0, 0], true)],
        [(0, [0, 0, 1], false), (2, [1, 0, 0], true)],
        [(1, [0, 0, 1], false), (2, [0, 1, 0], true)],
    ];
    let homogeneous: Vec<[usize; 3]> = exponents_3d(k - 2)
        .into_iter()
        .filter(|e| e[0] + e[1] + e[2] == k - 2)
        .collect();
    for qe in &homogeneous {
        for (si, s) in rot.iter().enumerate() {
            if si == 2 && *qe == [k - 2, 0, 0] && k >= 3 {
                continue;
            }
            let mut w = [vec![R::zero(); n], vec![R::zero(); n], vec![R::zero(); n]];
            for &(comp, me, negate) in s {
                let e = [qe[0] + me[0], qe[1] + me[1], qe[2] + me[2]];
                w[comp][mono_index(e)] = if negate { -R::one() } else { R::one() };
            }
            weights.push(w);
        }
    }
    let expected = 3 * dim_p3(k) - 4 * dim_p2(k);
    assert_eq!(weights.len(), expected, "interior complement dimension mismatch for k = {k}");
    (weights, exps)
}

fn eval_mono_vector<R: Real>(w: &[Vec<R>; 3], exps: &[[usize; 3]], xi: [R; 3]) -> Vec3<R> {
    let mut out = [R::zero(); 3];
    for (i, e) in exps.iter().enumerate() {
        let mut m = R::one();
        for _ in 0..e[0] {
            m *= xi[0];
        }
        for _ in 0..e[1] {
            m *= xi[1];
        }
        for _ in 0..e[2] {
            m *= xi[2];
        }
        for d in 0..3 {
            if w[d][i] != R::zero() {
                out[d] += w[d][i] * m;
            }
        }
    }
    out
}
