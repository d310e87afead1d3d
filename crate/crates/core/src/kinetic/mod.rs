//! Scaled two-species Vlasov–Poisson–Boltzmann system in `(f, g)` form on a
//! periodic torus, discretized by Fourier modes in `x` and the Hermite basis
//! in `v`.

mod diagnostics;
mod init;
mod solver;

pub use diagnostics::{EnergyFunctionals, Moments, ResidualRecord};
pub use init::{init_well_prepared, FluidProfile};
pub use solver::{KineticSolver, RunOutput};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::spectral::Torus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// First-order IMEX Euler.
    #[default]
    ImexEuler,
    /// Second-order stiffly accurate IMEX Runge–Kutta ARS(2,2,2).
    Ars222,
}

/// Form of the quadratic collision terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearForm {
    /// `B(Mf, Mf)/M` for `f` and `B(Mg, Mf)/M` for `g`, as obtained by
    /// summing and subtracting the two species' collision operators.
    #[default]
    Species,
    /// `Q(f, f)` and `Q(g, f)` with the symmetrized `Q`.
    Symmetric,
}

/// Choice of the micro part of the initial data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MicroInit {
    /// Only the moments named by the limit theorem; micro part zero for `f`
    /// and the current carried by `v` for `g`.
    #[default]
    Minimal,
    /// First-order Chapman–Enskog micro parts.
    ChapmanEnskog,
    /// Chapman–Enskog micro parts plus the order-`eps` macroscopic
    /// corrections (pressure in `rho + theta`, compressive part of `u`) that
    /// keep the initial acoustic layer out of the solution.
    Compatible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KineticConfig {
    pub epsilon: f64,
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    pub collisions: bool,
    pub fields: bool,
    /// Quadratic collision terms; needs the bilinear tensor.
    pub nonlinear: bool,
    pub nonlinear_form: NonlinearForm,
    pub micro_init: MicroInit,
    pub dealias: bool,
    /// Use the Picard fixed-point step instead of IMEX.
    pub picard: bool,
    pub picard_max_iters: usize,
    pub picard_tol: f64,
    /// Abort when the `L^2` norm grows by more than this in one step.
    pub blowup_factor: f64,
    pub snapshot_every: usize,
    pub n_diag: usize,
}

impl Default for KineticConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            dt: 1e-3,
            t_final: 0.1,
            scheme: Scheme::ImexEuler,
            collisions: true,
            fields: true,
            nonlinear: true,
            nonlinear_form: NonlinearForm::Species,
            micro_init: MicroInit::Minimal,
            dealias: true,
            picard: false,
            picard_max_iters: 50,
            picard_tol: 1e-12,
            blowup_factor: 10.0,
            snapshot_every: 10,
            n_diag: 2,
        }
    }
}

/// Fourier–Hermite coefficients of `(f, g)` and the potential.
///
/// `f[m * dim + a]` is the coefficient of `e_a` in Fourier mode `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticState {
    pub t: f64,
    pub epsilon: f64,
    pub torus: Torus,
    pub dim: usize,
    pub f: Vec<Complex64>,
    pub g: Vec<Complex64>,
    pub phi: Vec<Complex64>,
}

impl KineticState {
    pub fn zeros(torus: Torus, dim: usize, epsilon: f64) -> Self {
        let n = torus.len();
        let z = Complex64::new(0.0, 0.0);
        Self {
            t: 0.0,
            epsilon,
            torus,
            dim,
            f: vec![z; n * dim],
            g: vec![z; n * dim],
            phi: vec![z; n],
        }
    }

    pub fn f_mode(&self, m: usize) -> &[Complex64] {
        &self.f[m * self.dim..(m + 1) * self.dim]
    }

    pub fn g_mode(&self, m: usize) -> &[Complex64] {
        &self.g[m * self.dim..(m + 1) * self.dim]
    }

    /// `phi_k = -<g_k, 1>/|k|^2`, zero mean.
    pub fn solve_poisson(&mut self) {
        for m in 0..self.torus.len() {
            let k2 = self.torus.k2(m);
            self.phi[m] = if k2 == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                -self.g[m * self.dim] / k2
            };
        }
    }

    /// Largest violation of `-|k|^2 phi_k = <g_k, 1>`, plus the neutrality
    /// defect of mode zero.
    pub fn gauss_law_defect(&self) -> f64 {
        (0..self.torus.len())
            .map(|m| (self.g[m * self.dim] + self.torus.k2(m) * self.phi[m]).norm())
            .fold(0.0, f64::max)
    }

    /// `||(f, g)||` in `L^2_{x,v}`.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.f.iter().chain(&self.g).map(|c| c.norm_sqr()).sum();
        (self.torus.volume() * s).sqrt()
    }

    /// Largest imbalance between a mode and the conjugate of its partner.
    pub fn reality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for m in 0..self.torus.len() {
            let c = self.torus.conj_index(m);
            for a in 0..self.dim {
                worst = worst
                    .max((self.f[m * self.dim + a] - self.f[c * self.dim + a].conj()).norm())
                    .max((self.g[m * self.dim + a] - self.g[c * self.dim + a].conj()).norm());
            }
        }
        worst
    }
}
