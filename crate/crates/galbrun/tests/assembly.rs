mod common;

use std::sync::Arc;

use galbrun::assembly::{assemble_gram, assemble_rhs, assemble_system, scatter_free, Symmetry};
use galbrun::dgops::{assemble_lifting, reconstructed_derivative, LiftingOperator};
use galbrun::error::Error;
use galbrun::felib::quadrature::simplex_quadrature;
use galbrun::felib::BdmSpace;
use galbrun::linalg::SplitMix64;
use galbrun::mesh::{AxisBox, Mesh};
use galbrun::physics::{mach_report, parameter_preset, ParameterSet, ScalarCoefficient, VectorCoefficient};
use galbrun::Cplx;

fn space(n: usize, k: usize) -> BdmSpace<f64> {
    let mesh = Arc::new(Mesh::build_structured_cube(n, AxisBox::unit()).unwrap());
    BdmSpace::new(mesh, k).unwrap()
}

/// constant preset with gamma forced to zero (Hermitian regime)
fn undamped() -> ParameterSet<f64> {
    let mut p = parameter_preset::<f64>("constant").unwrap();
    p.gamma = ScalarCoefficient::constant(0.0);
    p.bounds.gamma = (0.0, 0.0);
    p
}

/// parameter set with a polynomial velocity active on the whole cube
fn poly_velocity_params() -> ParameterSet<f64> {
    let mut p = parameter_preset::<f64>("constant").unwrap();
    p.velocity = VectorCoefficient::new(
        Arc::new(|x: [f64; 3]| [x[0] * (1.0 - x[0]), 0.0, 0.0]),
        Arc::new(|x: [f64; 3]| {
            let mut j = [[0.0; 3]; 3];
            j[0][0] = 1.0 - 2.0 * x[0];
            j
        }),
        None,
        0.0,
    );
    p.rotation = [0.2, -0.1, 0.4];
    p
}

fn build_lifting(space: &BdmSpace<f64>, params: &ParameterSet<f64>, l: usize) -> LiftingOperator<f64> {
    assemble_lifting(space, params.velocity.as_velocity_field(), l, 2 * space.k + 2).unwrap()
}

/// Independent sesquilinear form evaluation bypassing the sparse assembly:
/// tet-by-tet quadrature on fields reconstructed from full dof vectors.
fn eval_form(
    sp: &BdmSpace<f64>,
    lift: &LiftingOperator<f64>,
    params: &ParameterSet<f64>,
    u: &[Cplx<f64>],
    v: &[Cplx<f64>],
) -> Cplx<f64> {
    let rule = simplex_quadrature::<f64>(3, 2 * sp.k + 2).unwrap();
    let du = reconstructed_derivative(lift, sp, u);
    let dv = reconstructed_derivative(lift, sp, v);
    let i = Cplx::<f64>::new(0.0, 1.0);
    let omega = params.omega;
    let rot = params.rotation;
    let mut acc = Cplx::<f64>::new(0.0, 0.0);
    for t in 0..sp.mesh.tets.len() {
        let det = sp.element(t).det;
        for (p, w) in rule.points.iter().zip(rule.weights.iter()) {
            let x = sp.mesh.point_from_barycentric(t, *p);
            let rho = params.rho.value(x);
            let cs = params.sound_speed.value(x);
            let gamma = params.gamma.value(x);
            let grad_p = params.pressure.gradient(x);
            let hess_p = params.pressure.hessian(x);
            let hess_phi = params.potential.hessian(x);

            // complex field values via re/im evaluation
            let eval_c = |dofs: &[Cplx<f64>]| -> ([Cplx<f64>; 3], Cplx<f64>) {
                let re: Vec<f64> = dofs.iter().map(|z| z.re).collect();
                let im: Vec<f64> = dofs.iter().map(|z| z.im).collect();
                let (vr, dr) = sp.evaluate(&re, t, *p).unwrap();
                let (vi, di) = sp.evaluate(&im, t, *p).unwrap();
                (
                    [
                        Cplx::new(vr[0], vi[0]),
                        Cplx::new(vr[1], vi[1]),
                        Cplx::new(vr[2], vi[2]),
                    ],
                    Cplx::new(dr, di),
                )
            };
            let (uv, udiv) = eval_c(u);
            let (vv, vdiv) = eval_c(v);
            let du_v = du.eval(t, *p).unwrap();
            let dv_v = dv.eval(t, *p).unwrap();

            let lu = |val: &[Cplx<f64>; 3], d: &[Cplx<f64>; 3]| -> [Cplx<f64>; 3] {
                let rx = [
                    rot[1] * val[2] - rot[2] * val[1],
                    rot[2] * val[0] - rot[0] * val[2],
                    rot[0] * val[1] - rot[1] * val[0],
                ];
                [
                    omega * val[0] + i * (d[0] + rx[0]),
                    omega * val[1] + i * (d[1] + rx[1]),
                    omega * val[2] + i * (d[2] + rx[2]),
                ]
            };
            let lu_u = lu(&uv, &du_v);
            let lu_v = lu(&vv, &dv_v);

            let mut term = cs * cs * rho * udiv * vdiv.conj();
            for d in 0..3 {
                term -= rho * lu_u[d] * lu_v[d].conj();
            }
            let gp_v: Cplx<f64> = (0..3).map(|d| grad_p[d] * vv[d]).sum();
            let gp_u: Cplx<f64> = (0..3).map(|d| grad_p[d] * uv[d]).sum();
            term += udiv * gp_v.conj() + gp_u * vdiv.conj();
            for d in 0..3 {
                let mut hu = Cplx::new(0.0, 0.0);
                for n in 0..3 {
                    hu += (hess_p[d][n] - rho * hess_phi[d][n]) * uv[n];
                }
                term += hu * vv[d].conj();
            }
            let uvdot: Cplx<f64> = (0..3).map(|d| uv[d] * vv[d].conj()).sum();
            term -= i * omega * gamma * rho * uvdot;
            acc += term * (*w * det);
        }
    }
    acc
}

fn hermitian_defect(dense: &[Cplx<f64>], n: usize) -> (f64, f64) {
    let mut defect: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = dense[i * n + j] - dense[j * n + i].conj();
            defect += d.norm_sqr();
            scale += dense[i * n + j].norm_sqr();
        }
    }
    (defect.sqrt(), scale.sqrt())
}

#[test]
fn undamped_constant_coefficients_give_hermitian_divdiv_minus_mass() {
    let sp = space(1, 1);
    let params = undamped();
    let lift = build_lifting(&sp, &params, 1);
    let mach = mach_report(&params, 2.0, 8).unwrap();
    let sys = assemble_system(&sp, &lift, &params, &mach, false, 2 * sp.k + 2).unwrap();
    assert_eq!(sys.symmetry, Symmetry::Hermitian);
    let n = sys.dim();
    let dense = sys.matrix.to_dense();
    let (defect, scale) = hermitian_defect(&dense, n);
    assert!(defect <= 1e-12 * scale, "hermitian defect {defect:e} vs {scale:e}");

    // dense oracle: direct quadrature of c^2 rho div div - rho omega^2 mass
    // via per-dof evaluation (independent of the assembly loop)
    let rule = simplex_quadrature::<f64>(3, 2 * sp.k + 2).unwrap();
    let omega = params.omega;
    let free: Vec<usize> = sys.free_to_global.clone();
    for (fi, &gi) in free.iter().enumerate() {
        for (fj, &gj) in free.iter().enumerate() {
            let mut want = 0.0;
            let mut ei = vec![0.0; sp.ndof];
            let mut ej = vec![0.0; sp.ndof];
            ei[gi] = 1.0;
            ej[gj] = 1.0;
            for t in 0..sp.mesh.tets.len() {
                let det = sp.element(t).det;
                for (p, w) in rule.points.iter().zip(rule.weights.iter()) {
                    let (vi, di) = sp.evaluate(&ei, t, *p).unwrap();
                    let (vj, dj) = sp.evaluate(&ej, t, *p).unwrap();
                    let dotv = vi[0] * vj[0] + vi[1] * vj[1] + vi[2] * vj[2];
                    want += w * det * (dj * di - omega * omega * dotv);
                }
            }
            let got = dense[fi * n + fj];
            assert!(
                (got.re - want).abs() < 1e-11 * (1.0 + want.abs()) && got.im.abs() < 1e-13,
                "entry ({fi},{fj}): {got} vs {want}"
            );
        }
    }
}

#[test]
fn damping_contributes_exactly_the_skew_part() {
    let sp = space(1, 1);
    let params = parameter_preset::<f64>("constant").unwrap(); // gamma = 0.5
    let lift = build_lifting(&sp, &params, 1);
    let mach = mach_report(&params, 2.0, 8).unwrap();
    let sys = assemble_system(&sp, &lift, &params, &mach, false, 4).unwrap();
    let n = sys.dim();
    let dense = sys.matrix.to_dense();

    // gamma-weighted mass over free dofs by direct quadrature
    let rule = simplex_quadrature::<f64>(3, 4).unwrap();
    for (fi, &gi) in sys.free_to_global.iter().enumerate() {
        for (fj, &gj) in sys.free_to_global.iter().enumerate() {
            let mut mass = 0.0;
            let mut ei = vec![0.0; sp.ndof];
            let mut ej = vec![0.0; sp.ndof];
            ei[gi] = 1.0;
            ej[gj] = 1.0;
            for t in 0..sp.mesh.tets.len() {
                let det = sp.element(t).det;
                for (p, w) in rule.points.iter().zip(rule.weights.iter()) {
                    let x = sp.mesh.point_from_barycentric(t, *p);
                    let g = params.gamma.value(x) * params.rho.value(x);
                    let (vi, _) = sp.evaluate(&ei, t, *p).unwrap();
                    let (vj, _) = sp.evaluate(&ej, t, *p).unwrap();
                    mass += w * det * g * (vi[0] * vj[0] + vi[1] * vj[1] + vi[2] * vj[2]);
                }
            }
            let skew = (dense[fi * n + fj] - dense[fj * n + fi].conj()) * 0.5;
            let want = Cplx::new(0.0, -params.omega * mass);
            assert!(
                (skew - want).norm() < 1e-12 * (1.0 + want.norm()),
                "skew part ({fi},{fj}): {skew} vs {want}"
            );
        }
    }
}

#[test]
fn matvec_matches_form_evaluation_oracle() {
    let sp = space(1, 1);
    let params = poly_velocity_params();
    let lift = build_lifting(&sp, &params, 1);
    let mach = mach_report(&params, 2.0, 8).unwrap();
    let sys = assemble_system(&sp, &lift, &params, &mach, false, 4).unwrap();
    let n = sys.dim();
    let mut rng = SplitMix64::new(91);
    for trial in 0..10 {
        let u_free: Vec<Cplx<f64>> = (0..n)
            .map(|_| Cplx::new(rng.next_symmetric(), rng.next_symmetric()))
            .collect();
        let au = sys.matrix.matvec(&u_free);
        let u_full = scatter_free(&sp, &u_free);
        for (fj, &gj) in sys.free_to_global.iter().enumerate() {
            let mut ej = vec![Cplx::new(0.0, 0.0); sp.ndof];
            ej[gj] = Cplx::new(1.0, 0.0);
            let want = eval_form(&sp, &lift, &params, &u_full, &ej);
            // row fj of A u equals a_n(u, e_j)
            assert!(
                (au[fj] - want).norm() < 1e-10 * (1.0 + want.norm()),
                "trial {trial} row {fj}: {} vs {want}",
                au[fj]
            );
        }
    }
}

#[test]
fn hermitian_for_real_coefficients_with_velocity_and_rotation() {
    // gamma = 0 keeps every term Hermitian even with b and Omega active
    let sp = space(1, 1);
    let mut params = poly_velocity_params();
    params.gamma = ScalarCoefficient::constant(0.0);
    params.bounds.gamma = (0.0, 0.0);
    let lift = build_lifting(&sp, &params, 1);
    let mach = mach_report(&params, 2.0, 8).unwrap();
    let sys = assemble_system(&sp, &lift, &params, &mach, false, 4).unwrap();
    assert_eq!(sys.symmetry, Symmetry::Hermitian);
    let dense = sys.matrix.to_dense();
    let (defect, scale) = hermitian_defect(&dense, sys.dim());
    assert!(defect <= 1e-12 * scale, "defect {defect:e} vs {scale:e}");
}

#[test]
fn rhs_assembly_properties() {
    let sp = space(1, 2);
    // zero load
    let z = assemble_rhs(&sp, |_| [Cplx::new(0.0, 0.0); 3], 6).unwrap();
    assert!(z.iter().all(|v| *v == Cplx::new(0.0, 0.0)));

    // per-entry quadrature oracle for a generic smooth load
    let f = |x: [f64; 3]| -> [Cplx<f64>; 3] {
        [
            Cplx::new(x[0] * x[1], -x[2]),
            Cplx::new(1.0, 0.5 * x[0]),
            Cplx::new(-x[1], x[2] * x[2]),
        ]
    };
    let rhs = assemble_rhs(&sp, f, 2 * sp.k + 2).unwrap();
    let rule = simplex_quadrature::<f64>(3, 2 * sp.k + 2).unwrap();
    for (fj, gj) in (0..sp.ndof)
        .filter(|&d| sp.free_index[d].is_some())
        .enumerate()
        .take(20)
    {
        let mut ej = vec![0.0; sp.ndof];
        ej[gj] = 1.0;
        let mut want = Cplx::new(0.0, 0.0);
        for t in 0..sp.mesh.tets.len() {
            let det = sp.element(t).det;
            for (p, w) in rule.points.iter().zip(rule.weights.iter()) {
                let x = sp.mesh.point_from_barycentric(t, *p);
                let (v, _) = sp.evaluate(&ej, t, *p).unwrap();
                let fv = f(x);
                for d in 0..3 {
                    want += fv[d] * v[d] * (*w * det);
                }
            }
        }
        assert!((rhs[fj] - want).norm() < 1e-12 * (1.0 + want.norm()));
    }

    // linearity in f
    let f2 = |x: [f64; 3]| -> [Cplx<f64>; 3] {
        [Cplx::new(x[2], 1.0), Cplx::new(-x[0], 0.0), Cplx::new(0.3, x[1])]
    };
    let alpha = Cplx::new(0.7, -1.2);
    let combo =
        |x: [f64; 3]| -> [Cplx<f64>; 3] { std::array::from_fn(|d| f(x)[d] + alpha * f2(x)[d]) };
    let r1 = assemble_rhs(&sp, f, 6).unwrap();
    let r2 = assemble_rhs(&sp, f2, 6).unwrap();
    let rc = assemble_rhs(&sp, combo, 6).unwrap();
    for i in 0..r1.len() {
        let want = r1[i] + alpha * r2[i];
        assert!((rc[i] - want).norm() < 1e-13 * (1.0 + want.norm()));
    }
}

#[test]
fn gram_matrix_is_spd_and_matches_graph_inner() {
    let sp = space(1, 1);
    let params = poly_velocity_params();
    let lift = build_lifting(&sp, &params, 1);
    let gram = assemble_gram(&sp, &lift, 2 * sp.k + 2).unwrap();
    let n = gram.dim();
    let dense = gram.matrix.to_dense();

    // real symmetric
    for i in 0..n {
        for j in 0..n {
            assert!(dense[i * n + j].im.abs() < 1e-13);
            assert!((dense[i * n + j].re - dense[j * n + i].re).abs() < 1e-12);
        }
    }
    // SPD: dense Cholesky succeeds and the smallest eigenvalue from inverse
    // power iteration is positive
    let mut g = galbrun::linalg::DMat::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            *g.at_mut(i, j) = dense[i * n + j].re;
        }
    }
    let chol = g.cholesky().expect("gram must be SPD");
    let mut x = vec![1.0f64; n];
    let mut lam_min = 0.0;
    for _ in 0..200 {
        galbrun::linalg::DMat::cholesky_solve(&chol, &mut x);
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in x.iter_mut() {
            *v /= norm;
        }
        // Rayleigh quotient of G at the current iterate
        let gx: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| g.at(i, j) * x[j]).sum())
            .collect();
        lam_min = x.iter().zip(gx.iter()).map(|(a, b)| a * b).sum();
    }
    assert!(lam_min > 0.0, "smallest Gram eigenvalue {lam_min}");

    // quadratic form round trip against the dgops inner product
    let mut rng = SplitMix64::new(92);
    for _ in 0..10 {
        let u_free: Vec<Cplx<f64>> = (0..n)
            .map(|_| Cplx::new(rng.next_symmetric(), rng.next_symmetric()))
            .collect();
        let gu = gram.matrix.matvec(&u_free);
        let quad: Cplx<f64> = u_free
            .iter()
            .zip(gu.iter())
            .map(|(ui, gi)| gi * ui.conj())
            .sum();
        let u_full = scatter_free(&sp, &u_free);
        let want = galbrun::dgops::graph_inner(&sp, &lift, &u_full, &u_full);
        assert!(
            (quad - want).norm() < 1e-12 * (1.0 + want.norm()),
            "{quad} vs {want}"
        );
    }
}

#[test]
fn sparsity_respects_distance_two_face_adjacency() {
    let sp = space(2, 1);
    let params = poly_velocity_params();
    let lift = build_lifting(&sp, &params, 1);
    let mach = mach_report(&params, 2.0, 8).unwrap();
    let sys = assemble_system(&sp, &lift, &params, &mach, false, 4).unwrap();

    // dof -> owning face
    let nfd = sp.ndof_per_face;
    let owner = |dof: usize| dof / nfd; // k = 1: all dofs are face dofs
    // tets of each face, then allowed pairs: faces sharing a tet at
    // distance <= 2 through element adjacency
    let mesh = &sp.mesh;
    let mut allowed = std::collections::BTreeSet::new();
    let tets_of = |f: usize| {
        let face = &mesh.faces[f];
        let mut v = vec![face.tet_first];
        if let Some(t2) = face.tet_second {
            v.push(t2);
        }
        v
    };
    let neighbors = |t: usize| -> Vec<usize> {
        let mut out = vec![t];
        for &f in &mesh.tet_faces[t] {
            for &tt in &tets_of(f) {
                out.push(tt);
            }
        }
        out
    };
    for fa in 0..mesh.faces.len() {
        for &ta in &tets_of(fa) {
            for &tm in &neighbors(ta) {
                for &fb in &mesh.tet_faces[tm] {
                    allowed.insert((fa, fb));
                }
                for &tb in &neighbors(tm) {
                    for &fb in &mesh.tet_faces[tb] {
                        allowed.insert((fa, fb));
                    }
                }
            }
        }
    }
    for r in 0..sys.dim() {
        let gr = sys.free_to_global[r];
        for k in sys.matrix.row_ptr[r]..sys.matrix.row_ptr[r + 1] {
            let gc = sys.free_to_global[sys.matrix.col_idx[k]];
            assert!(
                allowed.contains(&(owner(gr), owner(gc))),
                "coupling outside distance-2 adjacency: faces {} and {}",
                owner(gr),
                owner(gc)
            );
        }
    }
}

#[test]
fn strict_mach_gate_refuses_and_warning_path_proceeds() {
    let sp = space(1, 1);
    let params = parameter_preset::<f64>("convective-fast").unwrap();
    let lift = build_lifting(&sp, &params, 1);
    let mach = mach_report(&params, 2.0, 16).unwrap();
    assert!(!mach.satisfied);
    match assemble_system(&sp, &lift, &params, &mach, true, 4) {
        Err(Error::MachRefusal(summary)) => {
            assert!(summary.mach_norm * summary.mach_norm >= summary.threshold);
        }
        other => panic!("expected Mach refusal, got {other:?}"),
    }
    assert!(assemble_system(&sp, &lift, &params, &mach, false, 4).is_ok());
}

#[test]
fn mismatched_space_and_lifting_are_rejected() {
    let sp1 = space(1, 1);
    let sp2 = space(2, 1);
    let params = parameter_preset::<f64>("constant").unwrap();
    let lift2 = build_lifting(&sp2, &params, 1);
    let mach = mach_report(&params, 2.0, 8).unwrap();
    assert!(matches!(
        assemble_system(&sp1, &lift2, &params, &mach, false, 4),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn coo_export_round_trips() {
    let sp = space(1, 1);
    let params = parameter_preset::<f64>("constant").unwrap();
    let lift = build_lifting(&sp, &params, 1);
    let mach = mach_report(&params, 2.0, 8).unwrap();
    let sys = assemble_system(&sp, &lift, &params, &mach, false, 4).unwrap();
    let path = std::env::temp_dir().join("galbrun_test_matrix.coo");
    let path_str = path.to_str().unwrap();
    sys.export_coo(path_str).unwrap();
    let text = std::fs::read_to_string(path_str).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), sys.matrix.nnz());
    let first: Vec<&str> = lines[0].split_whitespace().collect();
    assert_eq!(first.len(), 4);
    let r: usize = first[0].parse().unwrap();
    let c: usize = first[1].parse().unwrap();
    let re: f64 = first[2].parse().unwrap();
    assert_eq!(r, 0);
    assert_eq!(c, sys.matrix.col_idx[0]);
    assert!((re - sys.matrix.values[0].re).abs() < 1e-15);
    std::fs::remove_file(path).ok();
}
