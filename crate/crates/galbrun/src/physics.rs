//! Coefficient fields, manufactured solutions, the strong-form residual and
//! the Mach-number diagnostics.
//!
//! The residual generator realizes
//!
//!   f = -grad(rho c^2 div u) + (div u) grad p - grad(grad p . u)
//!       - rho (omega + i b.grad + i Omega x)^2 u
//!       + (Hess p - rho Hess phi) u - i omega gamma rho u
//!
//! for a real analytic u, with the operator square expanded using a constant
//! frame rotation Omega. Coefficients are closed-form fields carrying their
//! own derivatives, so manufactured right-hand sides are exact up to
//! quadrature.

use std::sync::Arc;

use num_complex::Complex;

use crate::dgops::VelocityField;
use crate::error::{Error, MachSummary, Result};
use crate::felib::space::BdmSpace;
use crate::linalg::{cross, dot, mat_vec, norm, sym3_eigenvalues, Mat3, SplitMix64, Vec3};
use crate::mesh::AxisBox;
use crate::{from_f64, Cplx, Real};

type ScalarFn<R> = Arc<dyn Fn(Vec3<R>) -> R + Send + Sync>;
type VectorFn<R> = Arc<dyn Fn(Vec3<R>) -> Vec3<R> + Send + Sync>;
type MatrixFn<R> = Arc<dyn Fn(Vec3<R>) -> Mat3<R> + Send + Sync>;
type HessiansFn<R> = Arc<dyn Fn(Vec3<R>) -> [Mat3<R>; 3] + Send + Sync>;

/// Closed-form scalar coefficient with gradient and optional Hessian.
#[derive(Clone)]
pub struct ScalarCoefficient<R> {
    value: ScalarFn<R>,
    gradient: VectorFn<R>,
    hessian: Option<MatrixFn<R>>,
}

impl<R: Real> ScalarCoefficient<R> {
    pub fn new(value: ScalarFn<R>, gradient: VectorFn<R>) -> Self {
        ScalarCoefficient { value, gradient, hessian: None }
    }

    pub fn with_hessian(value: ScalarFn<R>, gradient: VectorFn<R>, hessian: MatrixFn<R>) -> Self {
        ScalarCoefficient { value, gradient, hessian: Some(hessian) }
    }

    pub fn constant(c: R) -> Self {
        ScalarCoefficient {
            value: Arc::new(move |_| c),
            gradient: Arc::new(|_| [R::zero(); 3]),
            hessian: Some(Arc::new(|_| [[R::zero(); 3]; 3])),
        }
    }

    pub fn value(&self, x: Vec3<R>) -> R {
        (self.value)(x)
    }

    pub fn gradient(&self, x: Vec3<R>) -> Vec3<R> {
        (self.gradient)(x)
    }

    pub fn hessian(&self, x: Vec3<R>) -> Mat3<R> {
        match &self.hessian {
            Some(h) => h(x),
            None => panic!("scalar coefficient has no Hessian"),
        }
    }

    pub fn has_hessian(&self) -> bool {
        self.hessian.is_some()
    }
}

/// Closed-form vector coefficient (the background velocity b) with Jacobian
/// and a declared compact support.
#[derive(Clone)]
pub struct VectorCoefficient<R> {
    value: VectorFn<R>,
    jacobian: MatrixFn<R>,
    /// Axis box containing the support; fields must be exactly zero outside.
    pub support: Option<AxisBox<R>>,
    /// Distance from the support to the domain boundary.
    pub support_margin: R,
}

impl<R: Real> VectorCoefficient<R> {
    pub fn new(value: VectorFn<R>, jacobian: MatrixFn<R>, support: Option<AxisBox<R>>, margin: R) -> Self {
        VectorCoefficient { value, jacobian, support, support_margin: margin }
    }

    pub fn zero(domain_extent: R) -> Self {
        VectorCoefficient {
            value: Arc::new(|_| [R::zero(); 3]),
            jacobian: Arc::new(|_| [[R::zero(); 3]; 3]),
            support: None,
            support_margin: domain_extent,
        }
    }

    pub fn value(&self, x: Vec3<R>) -> Vec3<R> {
        (self.value)(x)
    }

    /// `jac[n][m] = d_m b_n`
    pub fn jacobian(&self, x: Vec3<R>) -> Mat3<R> {
        (self.jacobian)(x)
    }

    pub fn divergence(&self, x: Vec3<R>) -> R {
        let j = self.jacobian(x);
        j[0][0] + j[1][1] + j[2][2]
    }

    pub fn as_velocity_field(&self) -> VelocityField<R> {
        let v = self.value.clone();
        Arc::new(move |x| v(x))
    }
}

/// Declared coefficient bounds (all positive).
#[derive(Debug, Clone, Copy)]
pub struct Bounds<R> {
    pub rho: (R, R),
    pub sound_speed: (R, R),
    pub gamma: (R, R),
}

/// Full coefficient set of the equation.
#[derive(Clone)]
pub struct ParameterSet<R> {
    pub name: String,
    pub domain: AxisBox<R>,
    pub rho: ScalarCoefficient<R>,
    pub sound_speed: ScalarCoefficient<R>,
    pub gamma: ScalarCoefficient<R>,
    pub pressure: ScalarCoefficient<R>,
    pub potential: ScalarCoefficient<R>,
    pub velocity: VectorCoefficient<R>,
    pub omega: R,
    pub rotation: Vec3<R>,
    pub bounds: Bounds<R>,
}

impl<R: Real> ParameterSet<R> {
    /// Validate the structural invariants: omega nonzero, pressure and
    /// potential carry Hessians, declared bounds hold on a dense grid and
    /// the velocity vanishes exactly outside its declared support.
    pub fn validate(&self, grid: usize) -> Result<()> {
        if self.omega == R::zero() {
            return Err(Error::invalid("omega must be nonzero"));
        }
        if !self.pressure.has_hessian() || !self.potential.has_hessian() {
            return Err(Error::invalid("pressure and potential require Hessians"));
        }
        for (lo, hi, name) in [
            (self.bounds.rho.0, self.bounds.rho.1, "rho"),
            (self.bounds.sound_speed.0, self.bounds.sound_speed.1, "sound speed"),
            (self.bounds.gamma.0, self.bounds.gamma.1, "gamma"),
        ] {
            if !(lo <= hi) || lo < R::zero() {
                return Err(Error::invalid(format!("bad declared bounds for {name}")));
            }
        }
        for x in sample_grid(&self.domain, grid) {
            let checks = [
                (self.rho.value(x), self.bounds.rho, "rho"),
                (self.sound_speed.value(x), self.bounds.sound_speed, "sound speed"),
                (self.gamma.value(x), self.bounds.gamma, "gamma"),
            ];
            for (v, (lo, hi), name) in checks {
                if v < lo || v > hi {
                    return Err(Error::invalid(format!(
                        "{name} = {v} violates declared bounds [{lo}, {hi}] at {x:?}"
                    )));
                }
            }
            if let Some(support) = &self.velocity.support {
                let inside = (0..3).all(|d| x[d] >= support.lo[d] && x[d] <= support.hi[d]);
                if !inside {
                    let bv = self.velocity.value(x);
                    if bv != [R::zero(); 3] {
                        return Err(Error::invalid(format!(
                            "velocity is nonzero outside its declared support at {x:?}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn sample_grid<R: Real>(domain: &AxisBox<R>, grid: usize) -> Vec<Vec3<R>> {
    let mut pts = Vec::with_capacity(grid * grid * grid);
    for i in 0..grid {
        for j in 0..grid {
            for k in 0..grid {
                let frac = |m: usize| from_f64::<R>((m as f64 + 0.5) / grid as f64);
                pts.push([
                    domain.lo[0] + (domain.hi[0] - domain.lo[0]) * frac(i),
                    domain.lo[1] + (domain.hi[1] - domain.lo[1]) * frac(j),
                    domain.lo[2] + (domain.hi[2] - domain.lo[2]) * frac(k),
                ]);
            }
        }
    }
    pts
}

/// Analytic vector field with derivatives to second order. Used both for
/// manufactured solutions and for curl potentials.
#[derive(Clone)]
pub struct AnalyticVectorField<R> {
    pub name: String,
    value: VectorFn<R>,
    jacobian: MatrixFn<R>,
    hessians: HessiansFn<R>,
}

impl<R: Real> AnalyticVectorField<R> {
    pub fn new(name: &str, value: VectorFn<R>, jacobian: MatrixFn<R>, hessians: HessiansFn<R>) -> Self {
        AnalyticVectorField { name: name.to_string(), value, jacobian, hessians }
    }

    pub fn value(&self, x: Vec3<R>) -> Vec3<R> {
        (self.value)(x)
    }

    /// `jac[n][m] = d_m u_n`
    pub fn jacobian(&self, x: Vec3<R>) -> Mat3<R> {
        (self.jacobian)(x)
    }

    /// `hessians[n][i][j] = d_i d_j u_n`
    pub fn hessians(&self, x: Vec3<R>) -> [Mat3<R>; 3] {
        (self.hessians)(x)
    }

    pub fn divergence(&self, x: Vec3<R>) -> R {
        let j = self.jacobian(x);
        j[0][0] + j[1][1] + j[2][2]
    }

    /// gradient of the divergence, from the component Hessians
    pub fn grad_divergence(&self, x: Vec3<R>) -> Vec3<R> {
        let h = self.hessians(x);
        let mut g = [R::zero(); 3];
        for m in 0..3 {
            for n in 0..3 {
                g[m] += h[n][n][m];
            }
        }
        g
    }

    /// directional derivative along a frozen vector: (J_u b)_n
    pub fn convective(&self, x: Vec3<R>, b: Vec3<R>) -> Vec3<R> {
        mat_vec(&self.jacobian(x), b)
    }
}

/// Strong-form residual f of the equation for a real manufactured solution,
/// as a complex-valued closure.
pub fn strong_residual<R: Real>(
    u: &AnalyticVectorField<R>,
    params: &ParameterSet<R>,
) -> impl Fn(Vec3<R>) -> [Cplx<R>; 3] {
    let u = u.clone();
    let p = params.clone();
    move |x: Vec3<R>| {
        let two = from_f64::<R>(2.0);
        let rho = p.rho.value(x);
        let grad_rho = p.rho.gradient(x);
        let cs = p.sound_speed.value(x);
        let grad_cs = p.sound_speed.gradient(x);
        let gamma = p.gamma.value(x);
        let grad_p = p.pressure.gradient(x);
        let hess_p = p.pressure.hessian(x);
        let hess_phi = p.potential.hessian(x);
        let bv = p.velocity.value(x);
        let jb = p.velocity.jacobian(x);
        let omega = p.omega;
        let rot = p.rotation;

        let uval = u.value(x);
        let ju = u.jacobian(x);
        let hu = u.hessians(x);
        let div_u = ju[0][0] + ju[1][1] + ju[2][2];
        let grad_div_u = u.grad_divergence(x);

        // -grad(rho c^2 div u)
        let mut f_re = [R::zero(); 3];
        let rho_c2 = rho * cs * cs;
        for m in 0..3 {
            let grad_coeff = grad_rho[m] * cs * cs + rho * two * cs * grad_cs[m];
            f_re[m] -= grad_coeff * div_u + rho_c2 * grad_div_u[m];
        }
        // + (div u) grad p
        for m in 0..3 {
            f_re[m] += div_u * grad_p[m];
        }
        // - grad(grad p . u) = -(Hess p u + (grad u)^T grad p)
        let hp_u = mat_vec(&hess_p, uval);
        for m in 0..3 {
            let mut jt = R::zero();
            for n in 0..3 {
                jt += ju[n][m] * grad_p[n];
            }
            f_re[m] -= hp_u[m] + jt;
        }
        // - rho (omega + i b.grad + i Omega x)^2 u, expanded:
        //   omega^2 u + 2 i omega (b.grad u + Omega x u)
        //   - b.grad(b.grad u) - 2 Omega x (b.grad u) - Omega x (Omega x u)
        let db_u = mat_vec(&ju, bv);
        let db_b = mat_vec(&jb, bv);
        // b.grad(b.grad u) = J_u (J_b b) + (b^T H_n b)_n
        let mut dbdb_u = mat_vec(&ju, db_b);
        for n in 0..3 {
            let hb = mat_vec(&hu[n], bv);
            dbdb_u[n] += dot(bv, hb);
        }
        let rot_db_u = cross(rot, db_u);
        let rot_u = cross(rot, uval);
        let rot_rot_u = cross(rot, rot_u);
        for m in 0..3 {
            f_re[m] -= rho * (omega * omega * uval[m] - dbdb_u[m] - two * rot_db_u[m] - rot_rot_u[m]);
        }
        // + (Hess p - rho Hess phi) u
        let hphi_u = mat_vec(&hess_phi, uval);
        for m in 0..3 {
            f_re[m] += hp_u[m] - rho * hphi_u[m];
        }

        // imaginary part: -2 omega rho (b.grad u + Omega x u) - omega gamma rho u
        let mut f_im = [R::zero(); 3];
        for m in 0..3 {
            f_im[m] -= two * omega * rho * (db_u[m] + rot_u[m]);
            f_im[m] -= omega * gamma * rho * uval[m];
        }

        [
            Complex::new(f_re[0], f_im[0]),
            Complex::new(f_re[1], f_im[1]),
            Complex::new(f_re[2], f_im[2]),
        ]
    }
}

/// Mach-number smallness diagnostic.
#[derive(Debug, Clone)]
pub struct MachReport<R> {
    /// Sampled sup of |b| / c_s.
    pub mach_norm: R,
    /// Sampled sup of max(0, -lambda_min(m) / gamma) with
    /// m = -Hess(p)/rho + Hess(phi). Infinite when gamma vanishes where
    /// lambda_min is negative.
    pub c_m: R,
    /// arctan(c_m / |omega|).
    pub theta: R,
    pub cpi_sharp: R,
    /// Heuristic interpolation-stability estimate, when requested.
    pub cpi_heuristic: Option<R>,
    /// (1 / cpi_sharp^2) / (1 + c_m^2 / omega^2).
    pub threshold: R,
    /// mach_norm^2 < threshold.
    pub satisfied: bool,
    pub sample_grid: usize,
}

impl<R: Real> MachReport<R> {
    pub fn summary(&self) -> MachSummary {
        let f = |v: R| v.to_f64().unwrap_or(f64::NAN);
        MachSummary {
            mach_norm: f(self.mach_norm),
            c_m: f(self.c_m),
            theta: f(self.theta),
            cpi_sharp: f(self.cpi_sharp),
            threshold: f(self.threshold),
        }
    }
}

/// Evaluate the Mach smallness condition by dense grid sampling.
pub fn mach_report<R: Real>(
    params: &ParameterSet<R>,
    cpi_sharp: R,
    sample_grid: usize,
) -> Result<MachReport<R>> {
    if cpi_sharp <= R::zero() {
        return Err(Error::invalid("cpi_sharp must be positive"));
    }
    if sample_grid < 8 {
        return Err(Error::invalid("sample grid must be at least 8 per axis"));
    }
    let mut mach: R = R::zero();
    let mut c_m: R = R::zero();
    for x in sample_grid_points(params, sample_grid) {
        let bv = params.velocity.value(x);
        let cs = params.sound_speed.value(x);
        mach = mach.max(norm(bv) / cs);

        let rho = params.rho.value(x);
        let hess_p = params.pressure.hessian(x);
        let hess_phi = params.potential.hessian(x);
        let mut m = [[R::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = -hess_p[i][j] / rho + hess_phi[i][j];
            }
        }
        let lam = sym3_eigenvalues(&m)[0];
        if lam < R::zero() {
            let g = params.gamma.value(x);
            if g == R::zero() {
                c_m = R::infinity();
            } else {
                c_m = c_m.max(-lam / g);
            }
        }
    }
    let theta = (c_m / params.omega.abs()).atan();
    let one = R::one();
    let threshold = if c_m.is_infinite() {
        R::zero()
    } else {
        (one / (cpi_sharp * cpi_sharp)) * (one / (one + c_m * c_m / (params.omega * params.omega)))
    };
    let satisfied = mach * mach < threshold;
    Ok(MachReport {
        mach_norm: mach,
        c_m,
        theta,
        cpi_sharp,
        cpi_heuristic: None,
        threshold,
        satisfied,
        sample_grid,
    })
}

fn sample_grid_points<R: Real>(params: &ParameterSet<R>, grid: usize) -> Vec<Vec3<R>> {
    sample_grid(&params.domain, grid)
}

/// Max of |div(rho b)| = |grad rho . b + rho div b| over a dense grid.
pub fn mass_conservation_check<R: Real>(params: &ParameterSet<R>, sample_grid: usize) -> R {
    let mut worst = R::zero();
    for x in sample_grid_points(params, sample_grid) {
        let bv = params.velocity.value(x);
        let grad_rho = params.rho.gradient(x);
        let rho = params.rho.value(x);
        let div_b = params.velocity.divergence(x);
        worst = worst.max((dot(grad_rho, bv) + rho * div_b).abs());
    }
    worst
}

/// Build b = rho^-1 curl A from a potential with compact support, so that
/// div(rho b) = 0 holds identically and supp b stays inside supp A.
pub fn make_solenoidal_field<R: Real>(
    potential: &AnalyticVectorField<R>,
    rho: &ScalarCoefficient<R>,
    rho_lo: R,
    support: Option<AxisBox<R>>,
    margin: R,
) -> Result<VectorCoefficient<R>> {
    if rho_lo <= R::zero() {
        return Err(Error::invalid("rho lower bound must be positive to divide by rho"));
    }
    let a_val = potential.clone();
    let a_jac = potential.clone();
    let rho_v = rho.clone();
    let rho_j = rho.clone();
    let value: VectorFn<R> = Arc::new(move |x| {
        let j = a_val.jacobian(x);
        let curl = [j[2][1] - j[1][2], j[0][2] - j[2][0], j[1][0] - j[0][1]];
        let r = rho_v.value(x);
        [curl[0] / r, curl[1] / r, curl[2] / r]
    });
    let jacobian: MatrixFn<R> = Arc::new(move |x| {
        let j = a_jac.jacobian(x);
        let h = a_jac.hessians(x);
        let curl = [j[2][1] - j[1][2], j[0][2] - j[2][0], j[1][0] - j[0][1]];
        // d_m curl_n from the potential Hessians
        let dcurl = |n: usize, m: usize| -> R {
            match n {
                0 => h[2][1][m] - h[1][2][m],
                1 => h[0][2][m] - h[2][0][m],
                _ => h[1][0][m] - h[0][1][m],
            }
        };
        let r = rho_j.value(x);
        let gr = rho_j.gradient(x);
        let mut out = [[R::zero(); 3]; 3];
        for n in 0..3 {
            for m in 0..3 {
                out[n][m] = dcurl(n, m) / r - curl[n] * gr[m] / (r * r);
            }
        }
        out
    });
    Ok(VectorCoefficient::new(value, jacobian, support, margin))
}

/// Heuristic estimate of the interpolation H1-stability constant: maximize
/// |pi_tau v|_{H1(tau)} / |v|_{H1(tau)} over random polynomial fields of
/// degree k+3. Advisory only; reported as "heuristic".
pub fn estimate_cpi_sharp<R: Real>(space: &BdmSpace<R>, samples: usize, seed: u64) -> R {
    use crate::felib::polynomial::exponents_3d;
    use crate::felib::quadrature::simplex_quadrature;

    let deg = space.k + 3;
    let exps = exponents_3d(deg);
    let mut rng = SplitMix64::new(seed);
    let rule = simplex_quadrature::<R>(3, 2 * deg).unwrap();
    let mut worst = R::zero();

    for _ in 0..samples {
        let coef: Vec<[R; 3]> = (0..exps.len())
            .map(|_| [rng.next_symmetric(), rng.next_symmetric(), rng.next_symmetric()])
            .collect();
        let exps_v = exps.clone();
        let coef_v = coef.clone();
        let field = move |x: Vec3<R>| -> Vec3<R> {
            let mut out = [R::zero(); 3];
            for (e, c) in exps_v.iter().zip(coef_v.iter()) {
                let m = powi(x[0], e[0]) * powi(x[1], e[1]) * powi(x[2], e[2]);
                for d in 0..3 {
                    out[d] += c[d] * m;
                }
            }
            out
        };
        let grad = |x: Vec3<R>| -> Mat3<R> {
            let mut out = [[R::zero(); 3]; 3];
            for (e, c) in exps.iter().zip(coef.iter()) {
                for m in 0..3 {
                    if e[m] == 0 {
                        continue;
                    }
                    let mut f = *e;
                    f[m] -= 1;
                    let dm = from_f64::<R>(e[m] as f64)
                        * powi(x[0], f[0])
                        * powi(x[1], f[1])
                        * powi(x[2], f[2]);
                    for n in 0..3 {
                        out[n][m] += c[n] * dm;
                    }
                }
            }
            out
        };
        let dofs = space.interpolate(&field);
        let ref_pts: Vec<[R; 3]> = rule.points.iter().map(|p| [p[1], p[2], p[3]]).collect();
        for t in 0..space.mesh.tets.len() {
            let table = space.tabulate(t, &ref_pts);
            let elem = space.element(t);
            let mut num = R::zero();
            let mut den = R::zero();
            for (q, w) in rule.weights.iter().enumerate() {
                let x = space.mesh.point_from_barycentric(t, rule.points[q]);
                let g_exact = grad(x);
                let mut g_interp = [[R::zero(); 3]; 3];
                for (j, &dof) in elem.dofs.iter().enumerate() {
                    let jac = table.jac[q * table.ndof + j];
                    for a in 0..3 {
                        for b in 0..3 {
                            g_interp[a][b] += dofs[dof] * jac[a][b];
                        }
                    }
                }
                let frob = |m: &Mat3<R>| -> R {
                    let mut s = R::zero();
                    for row in m {
                        for v in row {
                            s += *v * *v;
                        }
                    }
                    s
                };
                num += *w * elem.det * frob(&g_interp);
                den += *w * elem.det * frob(&g_exact);
            }
            if den > R::epsilon() {
                worst = worst.max((num / den).sqrt());
            }
        }
    }
    worst
}

fn powi<R: Real>(x: R, n: usize) -> R {
    let mut acc = R::one();
    for _ in 0..n {
        acc *= x;
    }
    acc
}

// ---------------------------------------------------------------------------
// presets

/// Smooth bump: exp(1 - 1/(1 - t^2)) inside |t| < 1, exactly zero outside.
fn bump<R: Real>(t: R) -> R {
    let one = R::one();
    if t.abs() >= one {
        R::zero()
    } else {
        (one - one / (one - t * t)).exp()
    }
}

/// d/dt of the bump.
fn bump_d1<R: Real>(t: R) -> R {
    let one = R::one();
    if t.abs() >= one {
        R::zero()
    } else {
        let s = one - t * t;
        bump(t) * (-from_f64::<R>(2.0) * t / (s * s))
    }
}

/// d2/dt2 of the bump.
fn bump_d2<R: Real>(t: R) -> R {
    let one = R::one();
    if t.abs() >= one {
        R::zero()
    } else {
        let two = from_f64::<R>(2.0);
        let six = from_f64::<R>(6.0);
        let s = one - t * t;
        let g = -two * t / (s * s);
        let gp = (-two - six * t * t) / (s * s * s);
        bump(t) * (g * g + gp)
    }
}

/// Coefficient presets addressable by name.
pub fn parameter_preset<R: Real>(name: &str) -> Result<ParameterSet<R>> {
    let domain = AxisBox::unit();
    let one = R::one();
    match name {
        "constant" => Ok(ParameterSet {
            name: name.into(),
            domain,
            rho: ScalarCoefficient::constant(one),
            sound_speed: ScalarCoefficient::constant(one),
            gamma: ScalarCoefficient::constant(from_f64(0.5)),
            pressure: ScalarCoefficient::constant(one),
            potential: ScalarCoefficient::constant(from_f64(0.5)),
            velocity: VectorCoefficient::zero(one),
            omega: from_f64(1.3),
            rotation: [R::zero(); 3],
            bounds: Bounds {
                rho: (one, one),
                sound_speed: (one, one),
                gamma: (from_f64(0.5), from_f64(0.5)),
            },
        }),
        "rotating" => {
            let mut p = parameter_preset::<R>("constant")?;
            p.name = name.into();
            p.rotation = [R::zero(), R::zero(), from_f64(0.7)];
            Ok(p)
        }
        "stellar-toy" => {
            // Density falls and sound speed rises by a factor 1000 across
            // the diagonal through smooth exponentials. The opposite
            // directions keep the div-div weight c^2 rho within three
            // orders of magnitude while each coefficient spans the full
            // contrast the robustness claim is about.
            let ln1000 = from_f64::<R>(1000f64.ln());
            let third = one / from_f64::<R>(3.0);
            let ramp = move |x: Vec3<R>| (x[0] + x[1] + x[2]) * third;
            let rho_val: ScalarFn<R> = Arc::new(move |x| (-ln1000 * ramp(x)).exp());
            let rho_grad: VectorFn<R> = Arc::new(move |x| {
                let v = (-ln1000 * ramp(x)).exp();
                let g = -ln1000 * third * v;
                [g, g, g]
            });
            let cs_val: ScalarFn<R> = Arc::new(move |x| (ln1000 * ramp(x)).exp());
            let cs_grad: VectorFn<R> = Arc::new(move |x| {
                let v = (ln1000 * ramp(x)).exp();
                let g = ln1000 * third * v;
                [g, g, g]
            });
            let lo = from_f64::<R>(1e-3) * from_f64::<R>(0.999); // sampled min with margin
            let hi = from_f64::<R>(1e3) * from_f64::<R>(1.001);
            Ok(ParameterSet {
                name: name.into(),
                domain,
                rho: ScalarCoefficient::new(rho_val, rho_grad),
                sound_speed: ScalarCoefficient::new(cs_val, cs_grad),
                gamma: ScalarCoefficient::constant(one),
                pressure: ScalarCoefficient::constant(from_f64(1.5)),
                potential: ScalarCoefficient::constant(from_f64(0.25)),
                velocity: VectorCoefficient::zero(one),
                omega: from_f64(1.3),
                rotation: [R::zero(); 3],
                bounds: Bounds {
                    rho: (lo, one),
                    sound_speed: (one, hi),
                    gamma: (one, one),
                },
            })
        }
        "convective" => convective_preset(from_f64(0.07), from_f64(0.35), name),
        "convective-fast" => convective_preset(from_f64(0.15), from_f64(0.35), name),
        "convective-strong" => convective_preset(from_f64(0.22), from_f64(0.45), name),
        other => Err(Error::invalid(format!(
            "unknown parameter preset '{other}' (available: constant, rotating, stellar-toy, convective, convective-fast, convective-strong)"
        ))),
    }
}

/// Solenoidal bump velocity: b = curl(0, 0, beta B(u)B(v)B(w)) with
/// B the standard bump and (u,v,w) the coordinates scaled to the support
/// box [0.5 - w, 0.5 + w]^3.
fn convective_preset<R: Real>(beta: R, width: R, name: &str) -> Result<ParameterSet<R>> {
    let one = R::one();
    let half = from_f64::<R>(0.5);
    let support = AxisBox {
        lo: [half - width, half - width, half - width],
        hi: [half + width, half + width, half + width],
    };
    let margin = half - width;

    let potential = bump_potential(beta, half, width);
    let rho = ScalarCoefficient::constant(one);
    let velocity = make_solenoidal_field(&potential, &rho, one, Some(support), margin)?;

    Ok(ParameterSet {
        name: name.into(),
        domain: AxisBox::unit(),
        rho,
        sound_speed: ScalarCoefficient::constant(one),
        gamma: ScalarCoefficient::constant(one),
        pressure: ScalarCoefficient::constant(one),
        potential: ScalarCoefficient::constant(half),
        velocity,
        omega: from_f64(1.3),
        rotation: [R::zero(); 3],
        bounds: Bounds {
            rho: (one, one),
            sound_speed: (one, one),
            gamma: (one, one),
        },
    })
}

/// A = (0, 0, beta B((x-c)/w) B((y-c)/w) B((z-c)/w)).
pub fn bump_potential<R: Real>(beta: R, center: R, width: R) -> AnalyticVectorField<R> {
    let zero_m = [[R::zero(); 3]; 3];
    let s = move |x: R| (x - center) / width;
    let value: VectorFn<R> = Arc::new(move |x| {
        [R::zero(), R::zero(), beta * bump(s(x[0])) * bump(s(x[1])) * bump(s(x[2]))]
    });
    let jacobian: MatrixFn<R> = Arc::new(move |x| {
        let t = [s(x[0]), s(x[1]), s(x[2])];
        let b = [bump(t[0]), bump(t[1]), bump(t[2])];
        let d = [bump_d1(t[0]) / width, bump_d1(t[1]) / width, bump_d1(t[2]) / width];
        let mut j = zero_m;
        j[2][0] = beta * d[0] * b[1] * b[2];
        j[2][1] = beta * b[0] * d[1] * b[2];
        j[2][2] = beta * b[0] * b[1] * d[2];
        j
    });
    let hessians: HessiansFn<R> = Arc::new(move |x| {
        let t = [s(x[0]), s(x[1]), s(x[2])];
        let b = [bump(t[0]), bump(t[1]), bump(t[2])];
        let d = [bump_d1(t[0]) / width, bump_d1(t[1]) / width, bump_d1(t[2]) / width];
        let dd = [
            bump_d2(t[0]) / (width * width),
            bump_d2(t[1]) / (width * width),
            bump_d2(t[2]) / (width * width),
        ];
        let mut h2 = zero_m;
        h2[0][0] = beta * dd[0] * b[1] * b[2];
        h2[1][1] = beta * b[0] * dd[1] * b[2];
        h2[2][2] = beta * b[0] * b[1] * dd[2];
        h2[0][1] = beta * d[0] * d[1] * b[2];
        h2[1][0] = h2[0][1];
        h2[0][2] = beta * d[0] * b[1] * d[2];
        h2[2][0] = h2[0][2];
        h2[1][2] = beta * b[0] * d[1] * d[2];
        h2[2][1] = h2[1][2];
        [zero_m, zero_m, h2]
    });
    AnalyticVectorField::new("bump-potential", value, jacobian, hessians)
}

/// Manufactured solutions addressable by name. All satisfy nu.u = 0 on the
/// boundary of the unit cube.
pub fn manufactured_preset<R: Real>(name: &str) -> Result<AnalyticVectorField<R>> {
    match name {
        "sine" => Ok(sine_solution()),
        "poly" => Ok(poly2_solution()),
        "poly3" => Ok(poly3_solution()),
        other => Err(Error::invalid(format!(
            "unknown manufactured solution '{other}' (available: sine, poly, poly3)"
        ))),
    }
}

/// u = (sin(pi x) cos(pi y), sin(pi y) cos(pi z), sin(pi z) cos(pi x)).
fn sine_solution<R: Real>() -> AnalyticVectorField<R> {
    let pi = R::PI();
    let value: VectorFn<R> = Arc::new(move |x| {
        [
            (pi * x[0]).sin() * (pi * x[1]).cos(),
            (pi * x[1]).sin() * (pi * x[2]).cos(),
            (pi * x[2]).sin() * (pi * x[0]).cos(),
        ]
    });
    let jacobian: MatrixFn<R> = Arc::new(move |x| {
        let (sx, cx) = (pi * x[0]).sin_cos();
        let (sy, cy) = (pi * x[1]).sin_cos();
        let (sz, cz) = (pi * x[2]).sin_cos();
        [
            [pi * cx * cy, -pi * sx * sy, R::zero()],
            [R::zero(), pi * cy * cz, -pi * sy * sz],
            [-pi * sz * sx, R::zero(), pi * cz * cx],
        ]
    });
    let hessians: HessiansFn<R> = Arc::new(move |x| {
        let p2 = pi * pi;
        let (sx, cx) = (pi * x[0]).sin_cos();
        let (sy, cy) = (pi * x[1]).sin_cos();
        let (sz, cz) = (pi * x[2]).sin_cos();
        let z = R::zero();
        let h0 = [
            [-p2 * sx * cy, -p2 * cx * sy, z],
            [-p2 * cx * sy, -p2 * sx * cy, z],
            [z, z, z],
        ];
        let h1 = [
            [z, z, z],
            [z, -p2 * sy * cz, -p2 * cy * sz],
            [z, -p2 * cy * sz, -p2 * sy * cz],
        ];
        let h2 = [
            [-p2 * sz * cx, z, -p2 * cz * sx],
            [z, z, z],
            [-p2 * cz * sx, z, -p2 * sz * cx],
        ];
        [h0, h1, h2]
    });
    AnalyticVectorField::new("sine", value, jacobian, hessians)
}

/// u = (x(1-x), y(1-y)/2, -z(1-z)/4): degree 2, normal component vanishing
/// on the unit cube boundary.
fn poly2_solution<R: Real>() -> AnalyticVectorField<R> {
    let one = R::one();
    let half = from_f64::<R>(0.5);
    let quarter = from_f64::<R>(0.25);
    let two = from_f64::<R>(2.0);
    let value: VectorFn<R> = Arc::new(move |x| {
        [
            x[0] * (one - x[0]),
            half * x[1] * (one - x[1]),
            -quarter * x[2] * (one - x[2]),
        ]
    });
    let jacobian: MatrixFn<R> = Arc::new(move |x| {
        let z = R::zero();
        [
            [one - two * x[0], z, z],
            [z, half * (one - two * x[1]), z],
            [z, z, -quarter * (one - two * x[2])],
        ]
    });
    let hessians: HessiansFn<R> = Arc::new(move |_| {
        let z = R::zero();
        let mut h0 = [[z; 3]; 3];
        let mut h1 = [[z; 3]; 3];
        let mut h2 = [[z; 3]; 3];
        h0[0][0] = -two;
        h1[1][1] = -two * half;
        h2[2][2] = two * quarter;
        [h0, h1, h2]
    });
    AnalyticVectorField::new("poly", value, jacobian, hessians)
}

/// Degree-3 variant: u_i = x_i (1 - x_i) (c_i + x_i).
fn poly3_solution<R: Real>() -> AnalyticVectorField<R> {
    let one = R::one();
    let c = [from_f64::<R>(0.2), from_f64::<R>(-0.4), from_f64::<R>(0.7)];
    let scale = [one, from_f64::<R>(0.5), from_f64::<R>(-0.75)];
    let comp = move |xi: R, i: usize| scale[i] * xi * (one - xi) * (c[i] + xi);
    let dcomp = move |xi: R, i: usize| {
        // d/dx of s x(1-x)(c+x) = s ((1-2x)(c+x) + x(1-x))
        let two = from_f64::<R>(2.0);
        scale[i] * ((one - two * xi) * (c[i] + xi) + xi * (one - xi))
    };
    let ddcomp = move |xi: R, i: usize| {
        // second derivative: s (-2(c+x) + 2(1-2x)) = s (2 - 2c - 6x)
        let two = from_f64::<R>(2.0);
        let six = from_f64::<R>(6.0);
        scale[i] * (two - two * c[i] - six * xi)
    };
    let value: VectorFn<R> = Arc::new(move |x| [comp(x[0], 0), comp(x[1], 1), comp(x[2], 2)]);
    let jacobian: MatrixFn<R> = Arc::new(move |x| {
        let z = R::zero();
        [
            [dcomp(x[0], 0), z, z],
            [z, dcomp(x[1], 1), z],
            [z, z, dcomp(x[2], 2)],
        ]
    });
    let hessians: HessiansFn<R> = Arc::new(move |x| {
        let z = R::zero();
        let mut h0 = [[z; 3]; 3];
        let mut h1 = [[z; 3]; 3];
        let mut h2 = [[z; 3]; 3];
        h0[0][0] = ddcomp(x[0], 0);
        h1[1][1] = ddcomp(x[1], 1);
        h2[2][2] = ddcomp(x[2], 2);
        [h0, h1, h2]
    });
    AnalyticVectorField::new("poly3", value, jacobian, hessians)
}
