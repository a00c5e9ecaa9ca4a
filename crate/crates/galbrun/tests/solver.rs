use galbrun::assembly::{CsrMatrix, SystemMatrix, Symmetry};
use galbrun::error::Error;
use galbrun::linalg::SplitMix64;
use galbrun::solver::{infsup_sigma_extremes, infsup_sigma_min, solve_linear};
use galbrun::Cplx;

type C = Cplx<f64>;

fn system_from_dense(dense: &[C], n: usize) -> SystemMatrix<f64> {
    let mut trips = Vec::new();
    for r in 0..n {
        for c in 0..n {
            let v = dense[r * n + c];
            if v != C::new(0.0, 0.0) {
                trips.push((r, c, v));
            }
        }
    }
    SystemMatrix {
        matrix: CsrMatrix::from_triplets(n, n, trips),
        symmetry: Symmetry::None,
        free_to_global: (0..n).collect(),
    }
}

fn identity(n: usize, scale: f64) -> SystemMatrix<f64> {
    let mut dense = vec![C::new(0.0, 0.0); n * n];
    for i in 0..n {
        dense[i * n + i] = C::new(scale, 0.0);
    }
    system_from_dense(&dense, n)
}

/// Dense complex LU with partial pivoting, used as the independent oracle.
fn dense_lu_solve(a: &[C], b: &[C], n: usize) -> Vec<C> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let (piv, _) = (col..n)
            .map(|r| (r, m[perm[r] * n + col].norm()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        perm.swap(col, piv);
        let inv = C::new(1.0, 0.0) / m[perm[col] * n + col];
        for r in (col + 1)..n {
            let f = m[perm[r] * n + col] * inv;
            m[perm[r] * n + col] = f;
            for c in (col + 1)..n {
                let upd = m[perm[col] * n + c];
                m[perm[r] * n + c] -= f * upd;
            }
        }
    }
    let mut y = vec![C::new(0.0, 0.0); n];
    for i in 0..n {
        let mut s = x[perm[i]];
        for c in 0..i {
            s -= m[perm[i] * n + c] * y[c];
        }
        y[i] = s;
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for c in (i + 1)..n {
            s -= m[perm[i] * n + c] * x[c];
        }
        x[i] = s / m[perm[i] * n + i];
    }
    x
}

#[test]
fn identity_and_scaled_identity() {
    let a = identity(4, 1.0);
    let mut e1 = vec![C::new(0.0, 0.0); 4];
    e1[0] = C::new(1.0, 0.0);
    let x = solve_linear(&a, &e1, 1e-10).unwrap();
    assert_eq!(x, e1);

    let a2 = identity(5, 2.0);
    let ones = vec![C::new(1.0, 0.0); 5];
    let x = solve_linear(&a2, &ones, 1e-10).unwrap();
    for v in x {
        assert!((v - C::new(0.5, 0.0)).norm() < 1e-14);
    }
}

#[test]
fn random_complex_system_matches_dense_oracle() {
    let n = 50;
    let mut rng = SplitMix64::new(101);
    let mut dense = vec![C::new(0.0, 0.0); n * n];
    for r in 0..n {
        for c in 0..n {
            dense[r * n + c] = C::new(rng.next_symmetric(), rng.next_symmetric());
        }
        // diagonal dominance keeps it well conditioned
        dense[r * n + r] += C::new(2.0 * n as f64, n as f64);
    }
    let b: Vec<C> = (0..n).map(|_| C::new(rng.next_symmetric(), rng.next_symmetric())).collect();
    let a = system_from_dense(&dense, n);
    let x = solve_linear(&a, &b, 1e-10).unwrap();
    let oracle = dense_lu_solve(&dense, &b, n);
    for i in 0..n {
        assert!((x[i] - oracle[i]).norm() < 1e-9, "entry {i}: {} vs {}", x[i], oracle[i]);
    }
}

#[test]
fn argument_validation_and_singularity() {
    let a = identity(3, 1.0);
    let b = vec![C::new(1.0, 0.0); 2];
    assert!(matches!(solve_linear(&a, &b, 1e-10), Err(Error::InvalidArgument(_))));
    let b3 = vec![C::new(1.0, 0.0); 3];
    assert!(matches!(solve_linear(&a, &b3, 0.0), Err(Error::InvalidArgument(_))));

    // zero rhs short circuits
    let z = vec![C::new(0.0, 0.0); 3];
    assert!(solve_linear(&a, &z, 1e-10).unwrap().iter().all(|v| v.norm() == 0.0));

    // structurally singular: an empty row
    let mut dense = vec![C::new(0.0, 0.0); 9];
    dense[0] = C::new(1.0, 0.0);
    dense[4] = C::new(1.0, 0.0);
    let a_sing = system_from_dense(&dense, 3);
    match solve_linear(&a_sing, &b3, 1e-10) {
        Err(Error::Singular(_)) | Err(Error::NonConvergence { .. }) => {}
        other => panic!("expected failure on singular system, got {other:?}"),
    }
}

fn random_hpd(n: usize, rng: &mut SplitMix64, shift: f64) -> Vec<C> {
    // B^H B + shift I
    let mut b = vec![C::new(0.0, 0.0); n * n];
    for v in b.iter_mut() {
        *v = C::new(rng.next_symmetric(), rng.next_symmetric());
    }
    let mut h = vec![C::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            let mut s = C::new(0.0, 0.0);
            for k in 0..n {
                s += b[k * n + i].conj() * b[k * n + j];
            }
            h[i * n + j] = s;
        }
        h[i * n + i] += C::new(shift, 0.0);
    }
    h
}

#[test]
fn infsup_identity_cases() {
    let n = 12;
    let mut rng = SplitMix64::new(102);
    let g = random_hpd(n, &mut rng, 1.0);
    let gm = system_from_dense(&g, n);
    let sigma = infsup_sigma_min(&gm, &gm, 4000).unwrap();
    assert!((sigma - 1.0).abs() < 1e-10, "A = G gives sigma {sigma}");

    let a2: Vec<C> = g.iter().map(|v| v * 2.0).collect();
    let am = system_from_dense(&a2, n);
    let sigma = infsup_sigma_min(&am, &gm, 4000).unwrap();
    assert!((sigma - 2.0).abs() < 1e-10, "A = 2G gives sigma {sigma}");
}

#[test]
fn infsup_cap_is_enforced() {
    let a = identity(10, 1.0);
    match infsup_sigma_min(&a, &a, 5) {
        Err(Error::Capability { max, .. }) => assert_eq!(max, 5),
        other => panic!("expected capability error, got {other:?}"),
    }
}

/// Randomized brute-force oracle: minimize the quotient
/// sqrt((Au)^H G^-1 (Au) / u^H G u) over 1e5 random directions, then refine
/// with inverse iteration on the pencil (A^H G^-1 A, G). Every quotient is
/// an upper bound for sigma_min; the refinement brings it within 5%.
#[test]
fn infsup_matches_randomized_oracle() {
    let n = 30;
    let mut rng = SplitMix64::new(103);
    let a = random_hpd(n, &mut rng, 0.3);
    let g = random_hpd(n, &mut rng, 1.0);
    let am = system_from_dense(&a, n);
    let gm = system_from_dense(&g, n);
    let sigma = infsup_sigma_min(&am, &gm, 4000).unwrap();

    let matvec = |m: &[C], x: &[C]| -> Vec<C> {
        (0..n)
            .map(|i| (0..n).map(|j| m[i * n + j] * x[j]).sum())
            .collect()
    };
    let quotient = |u: &[C]| -> f64 {
        let au = matvec(&a, u);
        let ginv_au = dense_lu_solve(&g, &au, n);
        let num: C = au.iter().zip(ginv_au.iter()).map(|(p, q)| p.conj() * q).sum();
        let gu = matvec(&g, u);
        let den: C = u.iter().zip(gu.iter()).map(|(p, q)| p.conj() * q).sum();
        (num.re / den.re).sqrt()
    };

    let mut best = f64::INFINITY;
    let mut best_u = vec![C::new(1.0, 0.0); n];
    for _ in 0..100_000 {
        let u: Vec<C> = (0..n).map(|_| C::new(rng.next_symmetric(), rng.next_symmetric())).collect();
        let q = quotient(&u);
        assert!(q >= sigma - 1e-9 * sigma.max(1.0), "quotient below sigma_min");
        if q < best {
            best = q;
            best_u = u;
        }
    }
    // inverse iteration: solve (A^H G^-1 A) y = G u
    let mut u = best_u;
    for _ in 0..60 {
        let gu = matvec(&g, &u);
        // w = A^-H G A^-1 (G u): solve A x1 = G u is wrong way; instead
        // y solves (A^H G^-1 A) y = gu  <=>  y = A^-1 G A^-H gu
        let ah: Vec<C> = {
            let mut t = vec![C::new(0.0, 0.0); n * n];
            for i in 0..n {
                for j in 0..n {
                    t[i * n + j] = a[j * n + i].conj();
                }
            }
            t
        };
        let x1 = dense_lu_solve(&ah, &gu, n);
        let gx1 = matvec(&g, &x1);
        let y = dense_lu_solve(&a, &gx1, n);
        let norm = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        u = y.iter().map(|v| v / norm).collect();
    }
    let refined = quotient(&u);
    assert!(refined >= sigma - 1e-8, "oracle must stay an upper bound");
    assert!(
        refined <= 1.05 * sigma,
        "refined oracle {refined} should be within 5% of sigma {sigma}"
    );
    // the raw random minimum is a much looser upper bound but must bracket
    assert!(best >= refined);
}

/// Invariance under congruence with a G-unitary transformation.
#[test]
fn infsup_invariant_under_g_unitary_congruence() {
    let n = 10;
    let mut rng = SplitMix64::new(104);
    let a = random_hpd(n, &mut rng, 0.5);
    let g = random_hpd(n, &mut rng, 1.0);

    // build a G-unitary T: Gram-Schmidt of a random basis in the G product
    let matvec = |m: &[C], x: &[C]| -> Vec<C> {
        (0..n)
            .map(|i| (0..n).map(|j| m[i * n + j] * x[j]).sum())
            .collect()
    };
    let gdot = |x: &[C], y: &[C]| -> C {
        let gy = matvec(&g, y);
        x.iter().zip(gy.iter()).map(|(p, q)| p.conj() * q).sum()
    };
    let mut cols: Vec<Vec<C>> = Vec::new();
    while cols.len() < n {
        let mut v: Vec<C> = (0..n).map(|_| C::new(rng.next_symmetric(), rng.next_symmetric())).collect();
        for c in &cols {
            let proj = gdot(c, &v);
            for i in 0..n {
                v[i] -= proj * c[i];
            }
        }
        let norm = gdot(&v, &v).re.sqrt();
        if norm > 1e-6 {
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            cols.push(v);
        }
    }
    // T columns are cols; A' = T^H A T, G' = T^H G T
    let mut t = vec![C::new(0.0, 0.0); n * n];
    for (c, col) in cols.iter().enumerate() {
        for r in 0..n {
            t[r * n + c] = col[r];
        }
    }
    let congruence = |m: &[C]| -> Vec<C> {
        let mut mt = vec![C::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = C::new(0.0, 0.0);
                for k in 0..n {
                    s += m[i * n + k] * t[k * n + j];
                }
                mt[i * n + j] = s;
            }
        }
        let mut out = vec![C::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = C::new(0.0, 0.0);
                for k in 0..n {
                    s += t[k * n + i].conj() * mt[k * n + j];
                }
                out[i * n + j] = s;
            }
        }
        out
    };
    let a2 = congruence(&a);
    let g2 = congruence(&g);
    let s1 = infsup_sigma_min(&system_from_dense(&a, n), &system_from_dense(&g, n), 4000).unwrap();
    let s2 = infsup_sigma_min(&system_from_dense(&a2, n), &system_from_dense(&g2, n), 4000).unwrap();
    assert!((s1 - s2).abs() < 1e-10, "{s1} vs {s2}");

    let (lo, hi) = infsup_sigma_extremes(
        &system_from_dense(&a, n),
        &system_from_dense(&g, n),
        4000,
    )
    .unwrap();
    assert!(lo <= hi && lo == s1);
}
