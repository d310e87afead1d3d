use std::collections::HashMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector, Dyn, LU};
use num_complex::Complex64;
use rayon::prelude::*;

use super::diagnostics::{EnergyFunctionals, MomentRows, ResidualRecord};
use super::{KineticConfig, KineticState, NonlinearForm, Scheme};
use crate::collision::{CollisionOperators, Projections};
use crate::error::{Error, Result};
use crate::spectral::{Torus, Transform};
use crate::velocity::HermiteBasis;

type ComplexLu = LU<Complex64, Dyn, Dyn>;

struct ModeFactor {
    mode: usize,
    f: ComplexLu,
    g: ComplexLu,
}

/// Output of [`KineticSolver::run`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub final_state: KineticState,
    pub snapshots: Vec<KineticState>,
    /// Monitor values at every snapshot.
    pub energy: Vec<EnergyFunctionals>,
    /// Conservation residuals after every step.
    pub residuals: Vec<ResidualRecord>,
    pub steps: usize,
}

/// IMEX integrator for one value of `epsilon` on one torus.
pub struct KineticSolver {
    pub cfg: KineticConfig,
    pub basis: Arc<HermiteBasis>,
    pub ops: Arc<CollisionOperators>,
    pub proj: Projections,
    pub transform: Transform,
    pub(super) rows: MomentRows,
    dim: usize,
    l1: DMatrix<f64>,
    l2: DMatrix<f64>,
    /// `D_j^T = V_j - D_j`, the coefficient form of `v_j - d/dv_j`.
    force: [DMatrix<f64>; 3],
    bilinear_f: Option<DMatrix<f64>>,
    bilinear_g: Option<DMatrix<f64>>,
    canonical: Vec<usize>,
    factors: Mutex<HashMap<u64, Arc<Vec<ModeFactor>>>>,
}

impl std::fmt::Debug for KineticSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KineticSolver")
            .field("cfg", &self.cfg)
            .field("torus", &self.transform.torus)
            .field("dim", &self.dim)
            .finish()
    }
}

/// Columns `a_p (x) b_p` of two `dim x n` matrices.
fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let dim = a.nrows();
    let n = a.ncols();
    let mut out = DMatrix::<f64>::zeros(dim * dim, n);
    for p in 0..n {
        let (ca, cb) = (a.column(p), b.column(p));
        let mut col = out.column_mut(p);
        for i in 0..dim {
            let ai = ca[i];
            for j in 0..dim {
                col[i * dim + j] = ai * cb[j];
            }
        }
    }
    out
}

fn project_out(p: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = p.nrows();
    let q = DMatrix::identity(n, n) - p;
    &q * m * &q
}

impl KineticSolver {
    pub fn new(
        cfg: KineticConfig,
        torus: Torus,
        basis: Arc<HermiteBasis>,
        ops: Arc<CollisionOperators>,
    ) -> Result<Self> {
        if !(cfg.epsilon > 0.0 && cfg.epsilon <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1], got {}",
                cfg.epsilon
            )));
        }
        if !(cfg.dt > 0.0) {
            return Err(Error::NonPositive {
                what: "time step",
                value: cfg.dt,
            });
        }
        if basis.degree_cutoff < 3 {
            return Err(Error::InvalidParameter(
                "the kinetic solver needs a degree cutoff of at least 3".into(),
            ));
        }
        let dim = basis.dim();
        if ops.dim != dim {
            return Err(Error::InvalidParameter(format!(
                "operator dimension {} does not match basis dimension {dim}",
                ops.dim
            )));
        }
        let use_tensor = cfg.collisions && cfg.nonlinear;
        if use_tensor && !ops.has_tensor() {
            return Err(Error::InvalidParameter(
                "nonlinear collisions need the bilinear tensor; assemble it or disable `nonlinear`"
                    .into(),
            ));
        }
        let proj = Projections::new(&basis);
        // The continuum operators annihilate the collision invariants exactly;
        // remove the rounding-level residue so the discrete laws are exact.
        let l1 = project_out(&proj.p1, &ops.l1);
        let l2 = project_out(&proj.p2, &ops.l2);
        let force = std::array::from_fn(|j| basis.deriv[j].transpose());

        let (bilinear_f, bilinear_g) = if use_tensor {
            let t = match cfg.nonlinear_form {
                NonlinearForm::Species => ops.b_tensor.as_ref(),
                NonlinearForm::Symmetric => ops.q_tensor.as_ref(),
            }
            .expect("checked above");
            let t = DMatrix::from_row_slice(dim, dim * dim, t);
            let q1 = DMatrix::identity(dim, dim) - &proj.p1;
            let bf = &q1 * &t;
            let mut bg = t;
            bg.row_mut(0).fill(0.0);
            (Some(bf), Some(bg))
        } else {
            (None, None)
        };
        let canonical = (0..torus.len())
            .filter(|&m| torus.is_canonical(m))
            .collect();
        let rows = MomentRows::new(&basis);
        Ok(Self {
            cfg,
            proj,
            transform: Transform::new(torus),
            rows,
            dim,
            l1,
            l2,
            force,
            bilinear_f,
            bilinear_g,
            canonical,
            factors: Mutex::new(HashMap::new()),
            basis,
            ops,
        })
    }

    pub fn torus(&self) -> &Torus {
        &self.transform.torus
    }

    pub fn epsilon(&self) -> f64 {
        self.cfg.epsilon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `I + h A_k` for the `f` and `g` blocks of mode `m`.
    fn implicit_matrices(&self, m: usize, h: f64) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
        let dim = self.dim;
        let eps = self.cfg.epsilon;
        let torus = self.torus();
        let k = torus.wavevector(m);
        let mut kv = DMatrix::<f64>::zeros(dim, dim);
        for j in 0..torus.dims {
            if k[j] != 0.0 {
                kv += &self.basis.mult[j] * k[j];
            }
        }
        let build = |coll: &DMatrix<f64>, poisson: bool| {
            let mut a = DMatrix::<Complex64>::from_fn(dim, dim, |r, c| {
                let mut z = Complex64::new(0.0, h * kv[(r, c)] / eps);
                if self.cfg.collisions {
                    z.re += h * coll[(r, c)] / (eps * eps);
                }
                if r == c {
                    z.re += 1.0;
                }
                z
            });
            if poisson {
                // (2/eps) v.grad(phi) with phi_k = -g_k0 / |k|^2.
                let k2 = torus.k2(m);
                if k2 > 0.0 {
                    for r in 0..dim {
                        a[(r, 0)] += Complex64::new(0.0, 2.0 * h * kv[(r, 0)] / (eps * k2));
                    }
                }
            }
            a
        };
        (build(&self.l1, false), build(&self.l2, self.cfg.fields))
    }

    fn factors_for(&self, h: f64) -> Result<Arc<Vec<ModeFactor>>> {
        let key = h.to_bits();
        if let Some(f) = self
            .factors
            .lock()
            .expect("factor cache poisoned")
            .get(&key)
        {
            return Ok(Arc::clone(f));
        }
        let built: Vec<ModeFactor> = self
            .canonical
            .par_iter()
            .map(|&m| {
                let (af, ag) = self.implicit_matrices(m, h);
                let f = af.lu();
                let g = ag.lu();
                if !f.is_invertible() || !g.is_invertible() {
                    return Err(Error::FactorizationFailed { mode: m });
                }
                Ok(ModeFactor { mode: m, f, g })
            })
            .collect::<Result<_>>()?;
        let built = Arc::new(built);
        self.factors
            .lock()
            .expect("factor cache poisoned")
            .insert(key, Arc::clone(&built));
        Ok(built)
    }

    /// Number of distinct step sizes with cached factorizations.
    pub fn cached_factorizations(&self) -> usize {
        self.factors.lock().expect("factor cache poisoned").len()
    }

    /// Solve `(I + h A_k) y_k = rhs_k` for every mode.
    fn solve_implicit(
        &self,
        h: f64,
        rhs_f: &[Complex64],
        rhs_g: &[Complex64],
    ) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let dim = self.dim;
        let factors = self.factors_for(h)?;
        let solved: Vec<(usize, DVector<Complex64>, DVector<Complex64>)> = factors
            .par_iter()
            .map(|mf| {
                let m = mf.mode;
                let bf = DVector::from_column_slice(&rhs_f[m * dim..(m + 1) * dim]);
                let bg = DVector::from_column_slice(&rhs_g[m * dim..(m + 1) * dim]);
                let xf =
                    mf.f.solve(&bf)
                        .ok_or(Error::FactorizationFailed { mode: m })?;
                let xg =
                    mf.g.solve(&bg)
                        .ok_or(Error::FactorizationFailed { mode: m })?;
                Ok((m, xf, xg))
            })
            .collect::<Result<_>>()?;
        let n = self.torus().len();
        let z = Complex64::new(0.0, 0.0);
        let mut f = vec![z; n * dim];
        let mut g = vec![z; n * dim];
        for (m, xf, xg) in solved {
            f[m * dim..(m + 1) * dim].copy_from_slice(xf.as_slice());
            g[m * dim..(m + 1) * dim].copy_from_slice(xg.as_slice());
        }
        self.clean(&mut f);
        self.clean(&mut g);
        Ok((f, g))
    }

    /// Mirror conjugate modes and drop the Nyquist modes.
    fn clean(&self, y: &mut [Complex64]) {
        let torus = self.torus();
        torus.mirror(y, self.dim);
        for m in 0..torus.len() {
            if torus.is_nyquist(m) {
                y[m * self.dim..(m + 1) * self.dim].fill(Complex64::new(0.0, 0.0));
            }
        }
    }

    fn potential(&self, g: &[Complex64]) -> Vec<Complex64> {
        let torus = self.torus();
        (0..torus.len())
            .map(|m| {
                let k2 = torus.k2(m);
                if k2 == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    -g[m * self.dim] / k2
                }
            })
            .collect()
    }

    /// Explicit terms: force terms `grad(phi) . D^T` and the quadratic
    /// collision terms divided by `epsilon`.
    pub fn explicit_terms(
        &self,
        f: &[Complex64],
        g: &[Complex64],
    ) -> (Vec<Complex64>, Vec<Complex64>) {
        let dim = self.dim;
        let torus = self.torus();
        let n = torus.len();
        let z = Complex64::new(0.0, 0.0);
        let want_force = self.cfg.fields;
        let want_coll = self.bilinear_f.is_some();
        if !want_force && !want_coll {
            return (vec![z; n * dim], vec![z; n * dim]);
        }
        let fp = DMatrix::from_vec(dim, n, self.transform.inverse_batch(f, dim));
        let gp = DMatrix::from_vec(dim, n, self.transform.inverse_batch(g, dim));
        let mut nf = DMatrix::<f64>::zeros(dim, n);
        let mut ng = DMatrix::<f64>::zeros(dim, n);

        if want_force {
            let phi = self.potential(g);
            for j in 0..torus.dims {
                let dphi = self.transform.inverse(&torus.derivative(&phi, j));
                if dphi.iter().all(|x| *x == 0.0) {
                    continue;
                }
                let mut tg = &self.force[j] * &gp;
                let mut tf = &self.force[j] * &fp;
                for p in 0..n {
                    tg.column_mut(p).scale_mut(dphi[p]);
                    tf.column_mut(p).scale_mut(dphi[p]);
                }
                nf += tg;
                ng += tf;
            }
        }
        if let (Some(bf), Some(bg)) = (&self.bilinear_f, &self.bilinear_g) {
            let inv_eps = 1.0 / self.cfg.epsilon;
            nf += bf * kron(&fp, &fp) * inv_eps;
            ng += bg * kron(&gp, &fp) * inv_eps;
        }
        let mut sf = self.transform.forward_batch(nf.as_slice(), dim);
        let mut sg = self.transform.forward_batch(ng.as_slice(), dim);
        self.truncate_modes(&mut sf);
        self.truncate_modes(&mut sg);
        (sf, sg)
    }

    /// `(I - P1) B(f, f)` in Fourier space, without the `1/eps` factor; zero
    /// when the bilinear tensor is not in use.
    pub fn quadratic_f(&self, f: &[Complex64]) -> Vec<Complex64> {
        let dim = self.dim;
        let n = self.torus().len();
        let Some(bf) = &self.bilinear_f else {
            return vec![Complex64::new(0.0, 0.0); n * dim];
        };
        let fp = DMatrix::from_vec(dim, n, self.transform.inverse_batch(f, dim));
        let out = bf * kron(&fp, &fp);
        let mut s = self.transform.forward_batch(out.as_slice(), dim);
        self.truncate_modes(&mut s);
        s
    }

    fn truncate_modes(&self, y: &mut [Complex64]) {
        let torus = self.torus();
        let dim = self.dim;
        if self.cfg.dealias {
            for m in 0..torus.len() {
                if !torus.is_retained(m) {
                    y[m * dim..(m + 1) * dim].fill(Complex64::new(0.0, 0.0));
                }
            }
        }
        self.clean(y);
    }

    fn finish(
        &self,
        state: &KineticState,
        f: Vec<Complex64>,
        g: Vec<Complex64>,
        dt: f64,
    ) -> Result<KineticState> {
        let mut next = KineticState {
            t: state.t + dt,
            epsilon: state.epsilon,
            torus: state.torus,
            dim: state.dim,
            f,
            g,
            phi: Vec::new(),
        };
        next.phi = self.potential(&next.g);
        let before = state.l2_norm();
        let after = next.l2_norm();
        if !after.is_finite() || (before > 0.0 && after > self.cfg.blowup_factor * before) {
            return Err(Error::BlowUp {
                time: next.t,
                factor: if before > 0.0 {
                    after / before
                } else {
                    f64::INFINITY
                },
            });
        }
        Ok(next)
    }

    fn axpy(a: &[Complex64], s: f64, b: &[Complex64]) -> Vec<Complex64> {
        a.iter().zip(b).map(|(x, y)| x + y * s).collect()
    }

    /// One IMEX step of size `dt` with the configured scheme.
    pub fn step(&self, state: &KineticState, dt: f64) -> Result<KineticState> {
        if !(dt > 0.0) {
            return Err(Error::NonPositive {
                what: "time step",
                value: dt,
            });
        }
        match self.cfg.scheme {
            Scheme::ImexEuler => {
                let (nf, ng) = self.explicit_terms(&state.f, &state.g);
                let rf = Self::axpy(&state.f, dt, &nf);
                let rg = Self::axpy(&state.g, dt, &ng);
                let (f, g) = self.solve_implicit(dt, &rf, &rg)?;
                self.finish(state, f, g, dt)
            }
            Scheme::Ars222 => {
                let gamma = 1.0 - FRAC_1_SQRT_2;
                let delta = 1.0 - 1.0 / (2.0 * gamma);
                let h = gamma * dt;
                let (n1f, n1g) = self.explicit_terms(&state.f, &state.g);
                let r2f = Self::axpy(&state.f, h, &n1f);
                let r2g = Self::axpy(&state.g, h, &n1g);
                let (y2f, y2g) = self.solve_implicit(h, &r2f, &r2g)?;
                let (n2f, n2g) = self.explicit_terms(&y2f, &y2g);
                // dt A Y2 = (r2 - Y2) / gamma from the second stage.
                let c = (1.0 - gamma) / gamma;
                let stage3 = |y: &[Complex64],
                              n1: &[Complex64],
                              n2: &[Complex64],
                              r2: &[Complex64],
                              y2: &[Complex64]| {
                    (0..y.len())
                        .map(|i| {
                            y[i] + dt * (delta * n1[i] + (1.0 - delta) * n2[i])
                                - c * (r2[i] - y2[i])
                        })
                        .collect::<Vec<_>>()
                };
                let r3f = stage3(&state.f, &n1f, &n2f, &r2f, &y2f);
                let r3g = stage3(&state.g, &n1g, &n2g, &r2g, &y2g);
                let (f, g) = self.solve_implicit(h, &r3f, &r3g)?;
                self.finish(state, f, g, dt)
            }
        }
    }

    /// Fixed point of the linearized iteration
    /// `(I + dt A) y^{m+1} = y^n + dt N(y^m)`, started from `y^n`.
    ///
    /// The first iterate is the IMEX Euler step and the limit is the fully
    /// implicit Euler step. Returns the state and the iteration count.
    pub fn picard_step(
        &self,
        state: &KineticState,
        dt: f64,
        max_iters: usize,
        tol: f64,
    ) -> Result<(KineticState, usize)> {
        let mut cur_f = state.f.clone();
        let mut cur_g = state.g.clone();
        let mut increment = f64::INFINITY;
        for it in 1..=max_iters {
            let (nf, ng) = self.explicit_terms(&cur_f, &cur_g);
            let rf = Self::axpy(&state.f, dt, &nf);
            let rg = Self::axpy(&state.g, dt, &ng);
            let (f, g) = self.solve_implicit(dt, &rf, &rg)?;
            let diff: f64 = f
                .iter()
                .zip(&cur_f)
                .chain(g.iter().zip(&cur_g))
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let size: f64 = f.iter().chain(&g).map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            increment = if size > 0.0 { diff / size } else { diff };
            cur_f = f;
            cur_g = g;
            if increment <= tol {
                return Ok((self.finish(state, cur_f, cur_g, dt)?, it));
            }
        }
        Err(Error::PicardNotConverged {
            iterations: max_iters,
            increment,
        })
    }

    fn advance(&self, state: &KineticState, dt: f64) -> Result<KineticState> {
        if self.cfg.picard {
            Ok(self
                .picard_step(state, dt, self.cfg.picard_max_iters, self.cfg.picard_tol)?
                .0)
        } else {
            self.step(state, dt)
        }
    }

    /// Integrate to `t_final`, recording snapshots and monitors every
    /// `snapshot_every` steps and residuals after every step.
    pub fn run(&self, init: &KineticState, t_final: f64) -> Result<RunOutput> {
        let dt = self.cfg.dt;
        let span = t_final - init.t;
        let steps = if span <= 0.0 {
            0
        } else {
            (span / dt - 1e-9).ceil() as usize
        };
        let every = self.cfg.snapshot_every.max(1);
        let mut state = init.clone();
        let mut snapshots = vec![state.clone()];
        let mut energy = vec![self.energy_functionals(&state, self.cfg.n_diag)?];
        let mut residuals = Vec::with_capacity(steps);
        for s in 0..steps {
            let h = if s + 1 == steps {
                t_final - state.t
            } else {
                dt
            };
            let next = self.advance(&state, h)?;
            residuals.push(self.residual_between(&state, &next));
            state = next;
            if (s + 1) % every == 0 || s + 1 == steps {
                energy.push(self.energy_functionals(&state, self.cfg.n_diag)?);
                snapshots.push(state.clone());
            }
        }
        Ok(RunOutput {
            final_state: state,
            snapshots,
            energy,
            residuals,
            steps,
        })
    }
}
