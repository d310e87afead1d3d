use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::solver::KineticSolver;
use super::KineticState;
use crate::error::{Error, Result};
use crate::velocity::HermiteBasis;

/// Coefficient rows that turn a Hermite vector into a velocity moment.
#[derive(Debug, Clone)]
pub(crate) struct MomentRows {
    pub one: Vec<f64>,
    pub v: [Vec<f64>; 3],
    /// `|v|^2/3 - 1`
    pub temp: Vec<f64>,
    /// `v_i v_j`
    pub vv: [[Vec<f64>; 3]; 3],
    /// `v_i (|v|^2/3 - 1)`
    pub vtemp: [Vec<f64>; 3],
}

impl MomentRows {
    pub fn new(basis: &HermiteBasis) -> Self {
        let sq = |x: &[f64; 3]| x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        Self {
            one: basis.project(|_| 1.0),
            v: std::array::from_fn(|i| basis.project(|x| x[i])),
            temp: basis.project(|x| sq(x) / 3.0 - 1.0),
            vv: std::array::from_fn(|i| std::array::from_fn(|j| basis.project(|x| x[i] * x[j]))),
            vtemp: std::array::from_fn(|i| basis.project(|x| x[i] * (sq(x) / 3.0 - 1.0))),
        }
    }
}

fn moment(coeffs: &[Complex64], dim: usize, row: &[f64]) -> Vec<Complex64> {
    coeffs
        .chunks(dim)
        .map(|c| c.iter().zip(row).map(|(z, r)| z * *r).sum())
        .collect()
}

/// Fluid variables carried by a kinetic state, as Fourier coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub rho: Vec<Complex64>,
    pub u: [Vec<Complex64>; 3],
    pub theta: Vec<Complex64>,
    pub n: Vec<Complex64>,
    pub j: [Vec<Complex64>; 3],
    pub w: Vec<Complex64>,
    pub grad_phi: [Vec<Complex64>; 3],
}

/// `H^0_x` norms of the four local-law residuals over one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
    pub momentum: f64,
    pub energy: f64,
    pub charge: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyFunctionals {
    pub t: f64,
    pub energy: f64,
    pub dissipation: f64,
    /// `energy` with the electric term counted twice; this is the quantity
    /// conserved by the collisionless linear dynamics.
    pub lyapunov: f64,
}

fn multi_indices(dims: usize, max: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for a in 0..=max {
        for b in 0..=max - a {
            for c in 0..=max - a - b {
                let m = [a, b, c];
                if m[dims..].iter().all(|&x| x == 0) {
                    out.push(m);
                }
            }
        }
    }
    out
}

impl KineticSolver {
    pub fn extract_moments(&self, s: &KineticState) -> Moments {
        let dim = s.dim;
        let r = &self.rows;
        let half = |v: Vec<Complex64>| v.into_iter().map(|z| z * 0.5).collect::<Vec<_>>();
        let inv_eps = 1.0 / s.epsilon;
        let scaled = |v: Vec<Complex64>| v.into_iter().map(|z| z * inv_eps).collect::<Vec<_>>();
        let torus = &s.torus;
        Moments {
            rho: half(moment(&s.f, dim, &r.one)),
            u: std::array::from_fn(|i| half(moment(&s.f, dim, &r.v[i]))),
            theta: half(moment(&s.f, dim, &r.temp)),
            n: moment(&s.g, dim, &r.one),
            j: std::array::from_fn(|i| scaled(moment(&s.g, dim, &r.v[i]))),
            w: scaled(moment(&s.g, dim, &r.temp)),
            grad_phi: std::array::from_fn(|i| {
                if i < torus.dims {
                    torus.derivative(&s.phi, i)
                } else {
                    vec![Complex64::new(0.0, 0.0); torus.len()]
                }
            }),
        }
    }

    /// Residuals of the local conservation laws between two consecutive
    /// states, with fluxes and sources taken at the later time.
    pub fn residual_between(&self, prev: &KineticState, next: &KineticState) -> ResidualRecord {
        let dt = next.t - prev.t;
        let torus = &next.torus;
        let dims = torus.dims;
        let dim = next.dim;
        let eps = next.epsilon;
        let a = self.extract_moments(prev);
        let b = self.extract_moments(next);
        let rate = |x: &[Complex64], y: &[Complex64]| -> Vec<Complex64> {
            x.iter().zip(y).map(|(p, q)| (q - p) / dt).collect()
        };
        let add = |acc: &mut Vec<Complex64>, v: &[Complex64], s: f64| {
            acc.iter_mut().zip(v).for_each(|(x, y)| *x += y * s);
        };

        let mut mass = rate(&a.rho, &b.rho);
        for i in 0..dims {
            add(&mut mass, &torus.derivative(&b.u[i], i), 1.0 / eps);
        }

        let mut mom_sq = 0.0;
        for i in 0..3 {
            let mut r = rate(&a.u[i], &b.u[i]);
            for jx in 0..dims {
                let flux = moment(&next.f, dim, &self.rows.vv[i][jx]);
                add(&mut r, &torus.derivative(&flux, jx), 0.5 / eps);
            }
            if i < dims {
                let src = self.transform.product(&b.n, &b.grad_phi[i]);
                add(&mut r, &src, -0.5);
            }
            mom_sq += torus.l2_norm(&r).powi(2);
        }

        let mut energy = rate(&a.theta, &b.theta);
        for jx in 0..dims {
            let flux = moment(&next.f, dim, &self.rows.vtemp[jx]);
            add(&mut energy, &torus.derivative(&flux, jx), 0.5 / eps);
            let src = self.transform.product(&b.j[jx], &b.grad_phi[jx]);
            add(&mut energy, &src, -eps / 3.0);
        }

        let mut charge = rate(&a.n, &b.n);
        for i in 0..dims {
            add(&mut charge, &torus.derivative(&b.j[i], i), 1.0);
        }

        ResidualRecord {
            t: next.t,
            dt,
            mass: torus.l2_norm(&mass),
            momentum: mom_sq.sqrt(),
            energy: torus.l2_norm(&energy),
            charge: torus.l2_norm(&charge),
        }
    }

    /// Residual series over consecutive pairs of a stored history.
    pub fn conservation_residuals(&self, history: &[KineticState]) -> Result<Vec<ResidualRecord>> {
        if history.len() < 2 {
            return Err(Error::InvalidParameter(
                "conservation residuals need at least two snapshots".into(),
            ));
        }
        Ok(history
            .windows(2)
            .map(|w| self.residual_between(&w[0], &w[1]))
            .collect())
    }

    /// `E_N` and `D_{N,eps}` with `x`-derivatives as Fourier multipliers and
    /// `v`-derivatives as powers of the ladder matrices.
    pub fn energy_functionals(&self, s: &KineticState, n_diag: usize) -> Result<EnergyFunctionals> {
        let k_cut = self.basis.degree_cutoff;
        if n_diag == 0 || n_diag > k_cut {
            return Err(Error::InvalidParameter(format!(
                "N_diag must lie in 1..={k_cut} for degree cutoff {k_cut}, got {n_diag}"
            )));
        }
        let dim = s.dim;
        let torus = &s.torus;
        let x_idx = multi_indices(torus.dims, n_diag);
        let v_idx: Vec<[usize; 3]> = multi_indices(3, n_diag)
            .into_iter()
            .filter(|b| b.iter().sum::<usize>() > 0)
            .collect();
        // D^beta as dense matrices.
        let d_pow: Vec<(usize, DMatrix<f64>)> = v_idx
            .iter()
            .map(|b| {
                let mut m = DMatrix::identity(dim, dim);
                for (axis, &p) in b.iter().enumerate() {
                    for _ in 0..p {
                        m = &self.basis.deriv[axis] * m;
                    }
                }
                (b.iter().sum(), m)
            })
            .collect();
        let nu = &self.basis.nu_gram;
        let q1 = DMatrix::identity(dim, dim) - &self.proj.p1;
        let q2 = DMatrix::identity(dim, dim) - &self.proj.p2;

        // Per-mode x multipliers: sum of k^(2 alpha) over |alpha| <= r.
        let weight = |k: &[f64; 3], r: usize, min: usize| -> f64 {
            x_idx
                .iter()
                .filter(|a| {
                    let t: usize = a.iter().sum();
                    t <= r && t >= min
                })
                .map(|a| (0..3).map(|i| k[i].powi(2 * a[i] as i32)).product::<f64>())
                .sum()
        };

        let vol = torus.volume();
        let eps2 = s.epsilon * s.epsilon;
        let (mut g_x, mut phi_x, mut micro_mixed, mut micro_nu, mut macro_grad) =
            (0.0, 0.0, 0.0, 0.0, 0.0);
        let sq = |v: &DVector<Complex64>| v.iter().map(|c| c.norm_sqr()).sum::<f64>();
        let nu_sq = |v: &DVector<Complex64>| {
            let re = DVector::from_iterator(dim, v.iter().map(|c| c.re));
            let im = DVector::from_iterator(dim, v.iter().map(|c| c.im));
            re.dot(&(nu * &re)) + im.dot(&(nu * &im))
        };
        let to_c = |m: &DMatrix<f64>| m.map(|x| Complex64::new(x, 0.0));
        let q1c = to_c(&q1);
        let q2c = to_c(&q2);
        let p1c = to_c(&self.proj.p1);
        let p2c = to_c(&self.proj.p2);
        let d_powc: Vec<(usize, DMatrix<Complex64>)> =
            d_pow.iter().map(|(o, m)| (*o, to_c(m))).collect();

        for m in 0..torus.len() {
            let fm = DVector::from_column_slice(s.f_mode(m));
            let gm = DVector::from_column_slice(s.g_mode(m));
            if fm.iter().chain(gm.iter()).all(|c| c.norm_sqr() == 0.0) && s.phi[m].norm_sqr() == 0.0
            {
                continue;
            }
            let k = torus.wavevector(m);
            let wn = weight(&k, n_diag, 0);
            g_x += wn * (sq(&fm) + sq(&gm));
            phi_x += wn * torus.k2(m) * s.phi[m].norm_sqr();

            let mf = &q1c * &fm;
            let mg = &q2c * &gm;
            micro_nu += wn * (nu_sq(&mf) + nu_sq(&mg));
            for (order, d) in &d_powc {
                let w = weight(&k, n_diag - order, 0);
                if w == 0.0 {
                    continue;
                }
                let df = d * &mf;
                let dg = d * &mg;
                micro_mixed += w * (sq(&df) + sq(&dg));
                micro_nu += w * (nu_sq(&df) + nu_sq(&dg));
            }
            // ||grad P G||_{H^{N-1}}^2 = sum over 1 <= |alpha| <= N.
            let wg = weight(&k, n_diag, 1);
            if wg > 0.0 {
                macro_grad += wg * (sq(&(&p1c * &fm)) + sq(&(&p2c * &gm)));
            }
        }
        let energy = vol * (g_x + phi_x + micro_mixed);
        Ok(EnergyFunctionals {
            t: s.t,
            energy,
            dissipation: vol * (micro_nu / eps2 + macro_grad),
            lyapunov: energy + vol * phi_x,
        })
    }
}
