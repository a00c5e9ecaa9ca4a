//! Sparse complex assembly of the discrete operator, load vector and Gram
//! matrix over the free (non-boundary) BDM DOFs.
//!
//! The element loop works on an extended local DOF set: the tet's own DOFs
//! plus every DOF feeding the liftings of its faces. This covers all
//! couplings the reconstructed derivative generates (up to distance-2 face
//! adjacency) without assembling anything global-dense. Where the velocity
//! vanishes the extended set collapses to the element's own DOFs.

use std::io::Write;


use crate::dgops::LiftingOperator;
use crate::error::{Error, Result};
use crate::felib::quadrature::{simplex_quadrature, QuadRule};
use crate::felib::space::BdmSpace;
use crate::linalg::{cross, dot, mat_vec, Vec3};
use crate::physics::{MachReport, ParameterSet};
use crate::{Cplx, DofVector, Real};

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct CsrMatrix<T> {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<T>,
}

impl<R: Real> CsrMatrix<Cplx<R>> {
    pub fn from_triplets(nrows: usize, ncols: usize, mut trips: Vec<(usize, usize, Cplx<R>)>) -> Self {
        trips.sort_unstable_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::new();
        let mut values: Vec<Cplx<R>> = Vec::new();
        for (r, c, v) in trips {
            if let (Some(&lc), Some(lv)) = (col_idx.last(), values.last_mut()) {
                if row_ptr[r + 1] > 0 && lc == c && col_idx.len() == row_ptr[r + 1] {
                    *lv += v;
                    continue;
                }
            }
            // new entry; rows are visited in order
            col_idx.push(c);
            values.push(v);
            row_ptr[r + 1] = col_idx.len();
        }
        // forward-fill empty rows
        for r in 1..=nrows {
            if row_ptr[r] < row_ptr[r - 1] {
                row_ptr[r] = row_ptr[r - 1];
            }
        }
        CsrMatrix { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn matvec(&self, x: &[Cplx<R>]) -> Vec<Cplx<R>> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![Cplx::new(R::zero(), R::zero()); self.nrows];
        for r in 0..self.nrows {
            let mut acc = Cplx::new(R::zero(), R::zero());
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
        y
    }

    pub fn to_dense(&self) -> Vec<Cplx<R>> {
        let mut d = vec![Cplx::new(R::zero(), R::zero()); self.nrows * self.ncols];
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                d[r * self.ncols + self.col_idx[k]] += self.values[k];
            }
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    None,
    Hermitian,
    ComplexSymmetric,
}

/// Sparse discrete operator over the free DOFs.
#[derive(Debug, Clone)]
pub struct SystemMatrix<R> {
    pub matrix: CsrMatrix<Cplx<R>>,
    pub symmetry: Symmetry,
    /// Map from compressed (free) index to global DOF id.
    pub free_to_global: Vec<usize>,
}

impl<R: Real> SystemMatrix<R> {
    pub fn dim(&self) -> usize {
        self.matrix.nrows
    }

    /// Coordinate text export: `row col re im` per line.
    pub fn export_coo(&self, path: &str) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for r in 0..self.matrix.nrows {
            for k in self.matrix.row_ptr[r]..self.matrix.row_ptr[r + 1] {
                let v = self.matrix.values[k];
                writeln!(w, "{} {} {} {}", r, self.matrix.col_idx[k], v.re, v.im)
                    .map_err(|e| Error::io(path, e))?;
            }
        }
        Ok(())
    }
}

/// Scatter a free-DOF vector into a full DOF vector with zero boundary dofs.
pub fn scatter_free<R: Real>(space: &BdmSpace<R>, free: &[Cplx<R>]) -> DofVector<R> {
    let mut full = vec![Cplx::new(R::zero(), R::zero()); space.ndof];
    for (dof, slot) in space.free_index.iter().enumerate() {
        if let Some(i) = slot {
            full[dof] = free[*i];
        }
    }
    full
}

/// Extended local structure of one tet: its own DOFs plus the DOFs feeding
/// the liftings of its faces, with per-DOF lifted coefficients on this tet.
struct ExtendedLocal<R> {
    dofs: Vec<usize>,
    /// index of each of the tet's own local dofs inside `dofs`
    own: Vec<usize>,
    /// lifted broken coefficients on this tet per extended dof:
    /// lift[e * nct + c]
    lift: Vec<R>,
    nct: usize,
}

fn extended_local<R: Real>(
    space: &BdmSpace<R>,
    lifting: &LiftingOperator<R>,
    t: usize,
) -> ExtendedLocal<R> {
    let elem = space.element(t);
    let mut dofs: Vec<usize> = elem.dofs.clone();
    for &f in &lifting.tet_active_faces[t] {
        let block = lifting.blocks[f].as_ref().unwrap();
        dofs.extend_from_slice(&block.cols);
    }
    dofs.sort_unstable();
    dofs.dedup();
    let own = elem
        .dofs
        .iter()
        .map(|d| dofs.binary_search(d).unwrap())
        .collect();
    let nct = lifting.broken.ncoef_per_tet;
    let mut lift = vec![R::zero(); dofs.len() * nct];
    for &f in &lifting.tet_active_faces[t] {
        let block = lifting.blocks[f].as_ref().unwrap();
        let row_base = if block.tets.0 == t { 0 } else { nct };
        for (c, &dof) in block.cols.iter().enumerate() {
            let e = dofs.binary_search(&dof).unwrap();
            for r in 0..nct {
                lift[e * nct + r] += block.mat.at(row_base + r, c);
            }
        }
    }
    ExtendedLocal { dofs, own, lift, nct }
}

fn check_compatible<R: Real>(space: &BdmSpace<R>, lifting: &LiftingOperator<R>) -> Result<()> {
    if !std::sync::Arc::ptr_eq(&space.mesh, &lifting.broken.mesh) {
        return Err(Error::invalid(
            "space and lifting operator were built on different meshes",
        ));
    }
    Ok(())
}

/// Assemble the discrete sesquilinear form as a sparse matrix over the free
/// DOFs. Under `strict_mach` a violated Mach condition is a refusal.
pub fn assemble_system<R: Real>(
    space: &BdmSpace<R>,
    lifting: &LiftingOperator<R>,
    params: &ParameterSet<R>,
    mach: &MachReport<R>,
    strict_mach: bool,
    quad_degree: usize,
) -> Result<SystemMatrix<R>> {
    check_compatible(space, lifting)?;
    if strict_mach && !mach.satisfied {
        return Err(Error::MachRefusal(mach.summary()));
    }
    let rule: QuadRule<R> = simplex_quadrature(3, quad_degree)?;
    let ref_pts: Vec<[R; 3]> = rule.points.iter().map(|p| [p[1], p[2], p[3]]).collect();
    let omega = params.omega;
    let rot = params.rotation;
    let zero = Cplx::new(R::zero(), R::zero());

    let mut trips: Vec<(usize, usize, Cplx<R>)> = Vec::new();
    for t in 0..space.mesh.tets.len() {
        let ext = extended_local(space, lifting, t);
        let table = space.tabulate(t, &ref_pts);
        let elem = space.element(t);
        let ne = ext.dofs.len();
        let mut local = vec![zero; ne * ne];
        let sv_cache: Vec<Vec<R>> = ref_pts.iter().map(|xi| lifting.broken.basis_values(*xi)).collect();

        // per-dof fields at one quadrature point
        let mut val = vec![[R::zero(); 3]; ne];
        let mut div = vec![R::zero(); ne];
        let mut tvec = vec![[R::zero(); 3]; ne]; // Omega x u + b.grad u + R u
        let mut dvec = vec![[R::zero(); 3]; ne]; // b.grad u + R u (for the Gram)

        for (q, w) in rule.weights.iter().enumerate() {
            let x = space.mesh.point_from_barycentric(t, rule.points[q]);
            let rho = params.rho.value(x);
            let cs = params.sound_speed.value(x);
            let gamma = params.gamma.value(x);
            let grad_p = params.pressure.gradient(x);
            let hess_p = params.pressure.hessian(x);
            let hess_phi = params.potential.hessian(x);
            let bv = params.velocity.value(x);

            for e in 0..ne {
                val[e] = [R::zero(); 3];
                div[e] = R::zero();
                dvec[e] = [R::zero(); 3];
                // lifted contribution
                let sv = &sv_cache[q];
                for (a, &s) in sv.iter().enumerate() {
                    for d in 0..3 {
                        dvec[e][d] += ext.lift[e * ext.nct + 3 * a + d] * s;
                    }
                }
            }
            for (j, &e) in ext.own.iter().enumerate() {
                let idx = q * table.ndof + j;
                val[e] = table.value[idx];
                div[e] = table.div[idx];
                let jac = table.jac[idx];
                for d in 0..3 {
                    dvec[e][d] += jac[d][0] * bv[0] + jac[d][1] * bv[1] + jac[d][2] * bv[2];
                }
            }
            for e in 0..ne {
                let rxu = cross(rot, val[e]);
                for d in 0..3 {
                    tvec[e][d] = dvec[e][d] + rxu[d];
                }
            }

            let jw = *w * elem.det;
            let c2rho = cs * cs * rho;
            for i in 0..ne {
                // test function i
                let hp_vi = mat_vec(&hess_p, val[i]);
                let hphi_vi = mat_vec(&hess_phi, val[i]);
                let gp_vi = dot(grad_p, val[i]);
                for j in 0..ne {
                    let re = c2rho * div[j] * div[i]
                        - rho * (omega * omega * dot(val[j], val[i]) + dot(tvec[j], tvec[i]))
                        + div[j] * gp_vi
                        + dot(grad_p, val[j]) * div[i]
                        + dot(val[j], hp_vi)
                        - rho * dot(val[j], hphi_vi);
                    let im = -rho * omega * (dot(tvec[j], val[i]) - dot(val[j], tvec[i]))
                        - omega * gamma * rho * dot(val[j], val[i]);
                    local[i * ne + j] += Cplx::new(jw * re, jw * im);
                }
            }
        }

        for (i, &gi) in ext.dofs.iter().enumerate() {
            let Some(fi) = space.free_index[gi] else { continue };
            for (j, &gj) in ext.dofs.iter().enumerate() {
                let Some(fj) = space.free_index[gj] else { continue };
                let v = local[i * ne + j];
                if v != zero {
                    trips.push((fi, fj, v));
                }
            }
        }
    }

    let n = space.nfree;
    let matrix = CsrMatrix::from_triplets(n, n, trips);
    let real_coeffs = true; // coefficient fields are real-valued by type
    let damped = params.bounds.gamma.1 > R::zero();
    let symmetry = if real_coeffs && !damped {
        Symmetry::Hermitian
    } else {
        Symmetry::None
    };
    let free_to_global: Vec<usize> = (0..space.ndof).filter(|&d| space.free_index[d].is_some()).collect();
    Ok(SystemMatrix { matrix, symmetry, free_to_global })
}

/// Load vector <f, test> over the free DOFs.
pub fn assemble_rhs<R: Real>(
    space: &BdmSpace<R>,
    f: impl Fn(Vec3<R>) -> [Cplx<R>; 3],
    quad_degree: usize,
) -> Result<DofVector<R>> {
    let rule: QuadRule<R> = simplex_quadrature(3, quad_degree)?;
    let ref_pts: Vec<[R; 3]> = rule.points.iter().map(|p| [p[1], p[2], p[3]]).collect();
    let mut rhs = vec![Cplx::new(R::zero(), R::zero()); space.nfree];
    for t in 0..space.mesh.tets.len() {
        let table = space.tabulate(t, &ref_pts);
        let elem = space.element(t);
        for (q, w) in rule.weights.iter().enumerate() {
            let x = space.mesh.point_from_barycentric(t, rule.points[q]);
            let fv = f(x);
            let jw = *w * elem.det;
            for (j, &dof) in elem.dofs.iter().enumerate() {
                let Some(fi) = space.free_index[dof] else { continue };
                let val = table.value[q * table.ndof + j];
                let mut acc = Cplx::new(R::zero(), R::zero());
                for d in 0..3 {
                    acc += fv[d] * val[d];
                }
                rhs[fi] += acc * jw;
            }
        }
    }
    Ok(rhs)
}

/// Gram matrix of the graph inner product (real SPD, stored complex).
pub fn assemble_gram<R: Real>(
    space: &BdmSpace<R>,
    lifting: &LiftingOperator<R>,
    quad_degree: usize,
) -> Result<SystemMatrix<R>> {
    check_compatible(space, lifting)?;
    let rule: QuadRule<R> = simplex_quadrature(3, quad_degree)?;
    let ref_pts: Vec<[R; 3]> = rule.points.iter().map(|p| [p[1], p[2], p[3]]).collect();

    let mut trips: Vec<(usize, usize, Cplx<R>)> = Vec::new();
    for t in 0..space.mesh.tets.len() {
        let ext = extended_local(space, lifting, t);
        let table = space.tabulate(t, &ref_pts);
        let elem = space.element(t);
        let ne = ext.dofs.len();
        let mut local = vec![R::zero(); ne * ne];
        let mut val = vec![[R::zero(); 3]; ne];
        let mut div = vec![R::zero(); ne];
        let mut dvec = vec![[R::zero(); 3]; ne];

        for (q, w) in rule.weights.iter().enumerate() {
            let x = space.mesh.point_from_barycentric(t, rule.points[q]);
            let bv = (lifting.velocity)(x);
            let sv = lifting.broken.basis_values(ref_pts[q]);
            for e in 0..ne {
                val[e] = [R::zero(); 3];
                div[e] = R::zero();
                dvec[e] = [R::zero(); 3];
                for (a, &s) in sv.iter().enumerate() {
                    for d in 0..3 {
                        dvec[e][d] += ext.lift[e * ext.nct + 3 * a + d] * s;
                    }
                }
            }
            for (j, &e) in ext.own.iter().enumerate() {
                let idx = q * table.ndof + j;
                val[e] = table.value[idx];
                div[e] = table.div[idx];
                let jac = table.jac[idx];
                for d in 0..3 {
                    dvec[e][d] += jac[d][0] * bv[0] + jac[d][1] * bv[1] + jac[d][2] * bv[2];
                }
            }
            let jw = *w * elem.det;
            for i in 0..ne {
                for j in 0..ne {
                    local[i * ne + j] +=
                        jw * (div[j] * div[i] + dot(val[j], val[i]) + dot(dvec[j], dvec[i]));
                }
            }
        }

        for (i, &gi) in ext.dofs.iter().enumerate() {
            let Some(fi) = space.free_index[gi] else { continue };
            for (j, &gj) in ext.dofs.iter().enumerate() {
                let Some(fj) = space.free_index[gj] else { continue };
                let v = local[i * ne + j];
                if v != R::zero() {
                    trips.push((fi, fj, Cplx::new(v, R::zero())));
                }
            }
        }
    }

    let n = space.nfree;
    let matrix = CsrMatrix::from_triplets(n, n, trips);
    let free_to_global: Vec<usize> = (0..space.ndof).filter(|&d| space.free_index[d].is_some()).collect();
    Ok(SystemMatrix { matrix, symmetry: Symmetry::Hermitian, free_to_global })
}
