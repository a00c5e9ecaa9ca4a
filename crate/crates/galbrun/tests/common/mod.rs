//! Shared helpers for the integration tests.
#![allow(dead_code)]

use galbrun::linalg::SplitMix64;

/// Smooth vector field as a short sum of plane-wave terms with analytic
/// derivatives: u(x) = sum_j c_j sin(k_j . x + p_j).
#[derive(Debug, Clone)]
pub struct SmoothField {
    pub terms: Vec<([f64; 3], [f64; 3], f64)>, // (amplitude vector, wave vector, phase)
}

impl SmoothField {
    pub fn random(rng: &mut SplitMix64, nterms: usize, wave_scale: f64) -> Self {
        let mut terms = Vec::with_capacity(nterms);
        for _ in 0..nterms {
            let c = [
                rng.next_symmetric::<f64>(),
                rng.next_symmetric::<f64>(),
                rng.next_symmetric::<f64>(),
            ];
            let k = [
                wave_scale * rng.next_symmetric::<f64>(),
                wave_scale * rng.next_symmetric::<f64>(),
                wave_scale * rng.next_symmetric::<f64>(),
            ];
            let p = std::f64::consts::PI * rng.next_symmetric::<f64>();
            terms.push((c, k, p));
        }
        SmoothField { terms }
    }

    pub fn value(&self, x: [f64; 3]) -> [f64; 3] {
        let mut v = [0.0; 3];
        for (c, k, p) in &self.terms {
            let s = (k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + p).sin();
            for d in 0..3 {
                v[d] += c[d] * s;
            }
        }
        v
    }

    /// jac[n][m] = d_m u_n
    pub fn jacobian(&self, x: [f64; 3]) -> [[f64; 3]; 3] {
        let mut j = [[0.0; 3]; 3];
        for (c, k, p) in &self.terms {
            let co = (k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + p).cos();
            for n in 0..3 {
                for m in 0..3 {
                    j[n][m] += c[n] * k[m] * co;
                }
            }
        }
        j
    }

    pub fn divergence(&self, x: [f64; 3]) -> f64 {
        let j = self.jacobian(x);
        j[0][0] + j[1][1] + j[2][2]
    }

    /// hessians[n][i][j] = d_i d_j u_n
    pub fn hessians(&self, x: [f64; 3]) -> [[[f64; 3]; 3]; 3] {
        let mut h = [[[0.0; 3]; 3]; 3];
        for (c, k, p) in &self.terms {
            let s = (k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + p).sin();
            for n in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        h[n][i][j] -= c[n] * k[i] * k[j] * s;
                    }
                }
            }
        }
        h
    }

    pub fn convective(&self, x: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        let j = self.jacobian(x);
        [
            j[0][0] * b[0] + j[0][1] * b[1] + j[0][2] * b[2],
            j[1][0] * b[0] + j[1][1] * b[1] + j[1][2] * b[2],
            j[2][0] * b[0] + j[2][1] * b[1] + j[2][2] * b[2],
        ]
    }
}

/// Least-squares slope of log(err) against log(h).
pub fn fitted_rate(hs: &[f64], errs: &[f64]) -> f64 {
    let n = hs.len() as f64;
    let lx: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ly: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..hs.len() {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    num / den
}
