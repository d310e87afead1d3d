//! Reference pseudo-spectral solver for the incompressible
//! Navier–Stokes–Fourier–Poisson system with Ohm's law.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{Torus, Transform};

type Field = Vec<Complex64>;

fn zero_field(n: usize) -> Field {
    vec![Complex64::new(0.0, 0.0); n]
}

/// Remove the gradient part of a vector field mode by mode.
pub fn leray_project(torus: &Torus, u: &[Field; 3]) -> [Field; 3] {
    let mut out = u.clone();
    for m in 0..torus.len() {
        let k2 = torus.k2(m);
        if k2 == 0.0 {
            continue;
        }
        let k = torus.wavevector(m);
        let dot = k[0] * u[0][m] + k[1] * u[1][m] + k[2] * u[2][m];
        for i in 0..3 {
            out[i][m] -= dot * (k[i] / k2);
        }
    }
    out
}

/// Largest `|k . u_k|` over all modes.
pub fn max_divergence(torus: &Torus, u: &[Field; 3]) -> f64 {
    (0..torus.len())
        .map(|m| {
            let k = torus.wavevector(m);
            (k[0] * u[0][m] + k[1] * u[1][m] + k[2] * u[2][m]).norm()
        })
        .fold(0.0, f64::max)
}

/// `phi_k = -n_k / |k|^2`, zero mean.
pub fn solve_poisson(torus: &Torus, n: &[Complex64]) -> Field {
    (0..torus.len())
        .map(|m| {
            let k2 = torus.k2(m);
            if k2 == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                -n[m] / k2
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FluidConfig {
    pub mu: f64,
    pub kappa: f64,
    pub sigma: f64,
    pub dt: f64,
    pub nonlinear: bool,
    pub dealias: bool,
    pub blowup_factor: f64,
}

impl Default for FluidConfig {
    fn default() -> Self {
        Self {
            mu: 1.0,
            kappa: 1.0,
            sigma: 1.0,
            dt: 1e-3,
            nonlinear: true,
            dealias: true,
            blowup_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluidState {
    pub t: f64,
    pub torus: Torus,
    pub rho: Field,
    pub u: [Field; 3],
    pub theta: Field,
    pub n: Field,
    pub phi: Field,
    pub j: [Field; 3],
    pub w: Field,
}

impl FluidState {
    pub fn l2_norm(&self) -> f64 {
        let t = &self.torus;
        let s: f64 = self.u.iter().map(|c| t.l2_norm(c).powi(2)).sum::<f64>()
            + t.l2_norm(&self.theta).powi(2)
            + t.l2_norm(&self.n).powi(2);
        s.sqrt()
    }
}

/// Euler-exponential weight `(1 - exp(-a h)) / a`.
fn phi1(a: f64, h: f64) -> f64 {
    let z = a * h;
    if z.abs() < 1e-8 {
        h * (1.0 - z / 2.0)
    } else {
        -(-z).exp_m1() / a
    }
}

#[derive(Debug)]
pub struct FluidSolver {
    pub cfg: FluidConfig,
    pub transform: Transform,
}

impl FluidSolver {
    pub fn new(cfg: FluidConfig, torus: Torus) -> Result<Self> {
        for (what, v) in [
            ("viscosity", cfg.mu),
            ("heat conductivity", cfg.kappa),
            ("electrical conductivity", cfg.sigma),
            ("time step", cfg.dt),
        ] {
            if !(v > 0.0) {
                return Err(Error::NonPositive { what, value: v });
            }
        }
        Ok(Self {
            cfg,
            transform: Transform::new(torus),
        })
    }

    pub fn torus(&self) -> &Torus {
        &self.transform.torus
    }

    fn clean(&self, f: &mut Field) {
        self.torus().mirror(f, 1);
        self.torus().truncate(f, self.cfg.dealias);
    }

    /// Build a consistent state from `u`, `theta` and `n`: `u` is
    /// Leray-projected, `rho = -theta`, and `phi`, `j`, `w` are derived.
    pub fn state(&self, t: f64, u: [Field; 3], theta: Field, n: Field) -> Result<FluidState> {
        let torus = *self.torus();
        if n[0].norm() > 1e-12 * (1.0 + torus.l2_norm(&n)) {
            return Err(Error::NotWellPrepared(format!(
                "charge density has nonzero mean {}",
                n[0].re
            )));
        }
        let mut u = leray_project(&torus, &u);
        let mut theta = theta;
        let mut n = n;
        for c in u.iter_mut() {
            self.clean(c);
        }
        self.clean(&mut theta);
        self.clean(&mut n);
        n[0] = Complex64::new(0.0, 0.0);
        let mut s = FluidState {
            t,
            torus,
            rho: theta.iter().map(|c| -c).collect(),
            u,
            theta,
            phi: solve_poisson(&torus, &n),
            n,
            j: [
                zero_field(torus.len()),
                zero_field(torus.len()),
                zero_field(torus.len()),
            ],
            w: zero_field(torus.len()),
        };
        s.j = self.ohms_law(&s);
        s.w = self.transform.product(&s.n, &s.theta);
        Ok(s)
    }

    /// `j = n u + sigma (grad phi - grad n / 2)`.
    pub fn ohms_law(&self, s: &FluidState) -> [Field; 3] {
        let torus = self.torus();
        std::array::from_fn(|i| {
            let mut j = self.transform.product(&s.n, &s.u[i]);
            if i < torus.dims {
                let dphi = torus.derivative(&s.phi, i);
                let dn = torus.derivative(&s.n, i);
                for m in 0..torus.len() {
                    j[m] += self.cfg.sigma * (dphi[m] - 0.5 * dn[m]);
                }
            }
            j
        })
    }

    /// `-(u . grad) q`, dealiased.
    fn advection(&self, u: &[Field; 3], q: &[Complex64]) -> Field {
        let torus = self.torus();
        let mut out = zero_field(torus.len());
        for i in 0..torus.dims {
            let dq = torus.derivative(q, i);
            let p = self.transform.product(&u[i], &dq);
            out.iter_mut().zip(&p).for_each(|(o, x)| *o -= x);
        }
        out
    }

    /// Pressure from `-Delta p = div((u . grad) u) - div(n grad(phi) / 2)`.
    pub fn pressure(&self, s: &FluidState) -> Field {
        let torus = self.torus();
        let force = self.explicit_velocity(s);
        // div(force) = -Delta p, so p_k = div_k / |k|^2 with the sign of -Delta.
        let div = torus.divergence(&force);
        (0..torus.len())
            .map(|m| {
                let k2 = torus.k2(m);
                if k2 == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    div[m] / k2
                }
            })
            .collect()
    }

    /// `-(u . grad) u + n grad(phi) / 2` before projection.
    fn explicit_velocity(&self, s: &FluidState) -> [Field; 3] {
        let torus = self.torus();
        std::array::from_fn(|i| {
            let mut r = if self.cfg.nonlinear {
                self.advection(&s.u, &s.u[i])
            } else {
                zero_field(torus.len())
            };
            if self.cfg.nonlinear && i < torus.dims {
                let dphi = torus.derivative(&s.phi, i);
                let f = self.transform.product(&s.n, &dphi);
                r.iter_mut().zip(&f).for_each(|(o, x)| *o += 0.5 * x);
            }
            r
        })
    }

    /// One exponential-Euler step: diffusion and damping exactly, advection
    /// and the electric force explicitly.
    pub fn step(&self, s: &FluidState, dt: f64) -> Result<FluidState> {
        if !(dt > 0.0) {
            return Err(Error::NonPositive {
                what: "time step",
                value: dt,
            });
        }
        let torus = *self.torus();
        let c = &self.cfg;
        let nu_force = leray_project(&torus, &self.explicit_velocity(s));
        let (adv_theta, adv_n) = if c.nonlinear {
            (self.advection(&s.u, &s.theta), self.advection(&s.u, &s.n))
        } else {
            (zero_field(torus.len()), zero_field(torus.len()))
        };
        let mut u: [Field; 3] = std::array::from_fn(|_| zero_field(torus.len()));
        let mut theta = zero_field(torus.len());
        let mut n = zero_field(torus.len());
        for m in 0..torus.len() {
            let k2 = torus.k2(m);
            let a_u = c.mu * k2;
            let a_t = c.kappa * k2;
            let a_n = c.sigma * (1.0 + 0.5 * k2);
            for i in 0..3 {
                u[i][m] = (-a_u * dt).exp() * s.u[i][m] + phi1(a_u, dt) * nu_force[i][m];
            }
            theta[m] = (-a_t * dt).exp() * s.theta[m] + phi1(a_t, dt) * adv_theta[m];
            n[m] = (-a_n * dt).exp() * s.n[m] + phi1(a_n, dt) * adv_n[m];
        }
        let next = self.state(s.t + dt, u, theta, n)?;
        let before = s.l2_norm();
        let after = next.l2_norm();
        if !after.is_finite() || (before > 0.0 && after > c.blowup_factor * before) {
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

    /// Integrate to `t_final`, returning the states at `t0 + i * every * dt`
    /// and at `t_final`.
    pub fn run(&self, init: &FluidState, t_final: f64, every: usize) -> Result<Vec<FluidState>> {
        let dt = self.cfg.dt;
        let span = t_final - init.t;
        let steps = if span <= 0.0 {
            0
        } else {
            (span / dt - 1e-9).ceil() as usize
        };
        let every = every.max(1);
        let mut s = init.clone();
        let mut out = vec![s.clone()];
        for k in 0..steps {
            let h = if k + 1 == steps { t_final - s.t } else { dt };
            s = self.step(&s, h)?;
            if (k + 1) % every == 0 || k + 1 == steps {
                out.push(s.clone());
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn torus1() -> Torus {
        Torus::new(1, 16, 2.0 * std::f64::consts::PI).unwrap()
    }

    fn torus2() -> Torus {
        Torus::new(2, 16, 2.0 * std::f64::consts::PI).unwrap()
    }

    fn single_mode(torus: &Torus, k: [i64; 2], amp: f64) -> Field {
        let mut f = zero_field(torus.len());
        f[torus.mode_of(k)] = Complex64::new(amp, 0.0);
        f[torus.mode_of([-k[0], -k[1]])] = Complex64::new(amp, 0.0);
        f
    }

    fn solver(torus: Torus) -> FluidSolver {
        FluidSolver::new(
            FluidConfig {
                mu: 0.3,
                kappa: 0.7,
                sigma: 0.9,
                ..Default::default()
            },
            torus,
        )
        .unwrap()
    }

    #[test]
    fn gradient_fields_are_removed() {
        let torus = torus2();
        let psi = single_mode(&torus, [1, 2], 0.5);
        let u = [
            torus.derivative(&psi, 0),
            torus.derivative(&psi, 1),
            zero_field(torus.len()),
        ];
        let p = leray_project(&torus, &u);
        for c in &p {
            assert!(c.iter().all(|z| z.norm() < 1e-15));
        }
    }

    #[test]
    fn solenoidal_fields_are_kept() {
        let torus = torus2();
        let psi = single_mode(&torus, [2, 1], 0.5);
        // u = (d2 psi, -d1 psi) is divergence free.
        let d1 = torus.derivative(&psi, 0);
        let u = [
            torus.derivative(&psi, 1),
            d1.iter().map(|c| -c).collect(),
            zero_field(torus.len()),
        ];
        let p = leray_project(&torus, &u);
        for i in 0..3 {
            for m in 0..torus.len() {
                assert!((p[i][m] - u[i][m]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn charge_decays_at_the_exact_rate() {
        let torus = torus1();
        let s = solver(torus);
        let z = || zero_field(torus.len());
        let init = s
            .state(0.0, [z(), z(), z()], z(), single_mode(&torus, [2, 0], 0.1))
            .unwrap();
        let out = s.run(&init, 0.5, 1000).unwrap();
        let end = out.last().unwrap();
        let m = torus.mode_of([2, 0]);
        let exact = 0.1 * (-0.9 * (1.0 + 2.0) * 0.5f64).exp();
        assert!((end.n[m].re - exact).abs() < 1e-12 * exact.abs().max(1e-3));
    }

    #[test]
    fn heat_decays_at_the_exact_rate() {
        let torus = torus1();
        let s = solver(torus);
        let z = || zero_field(torus.len());
        let init = s
            .state(0.0, [z(), z(), z()], single_mode(&torus, [3, 0], 0.2), z())
            .unwrap();
        let end = s.run(&init, 0.3, 1000).unwrap().pop().unwrap();
        let m = torus.mode_of([3, 0]);
        let exact = 0.2 * (-0.7 * 9.0 * 0.3f64).exp();
        assert!((end.theta[m].re - exact).abs() < 1e-12);
        assert!(end
            .rho
            .iter()
            .zip(&end.theta)
            .all(|(r, t)| (r + t).norm() == 0.0));
    }

    #[test]
    fn ohms_law_matches_hand_evaluation() {
        // n = cos x, phi = -cos x, j = sigma (sin x - sin x / 2 * (-1)) = 3 sigma sin x / 2.
        let torus = torus1();
        let s = solver(torus);
        let z = || zero_field(torus.len());
        let st = s
            .state(0.0, [z(), z(), z()], z(), single_mode(&torus, [1, 0], 0.5))
            .unwrap();
        let pts = torus.points();
        let j = s.transform.inverse(&st.j[0]);
        for (p, x) in pts.iter().enumerate() {
            assert!((j[p] - 1.5 * 0.9 * x[0].sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn charge_law_two_ways() {
        let torus = torus2();
        let s = solver(torus);
        let z = || zero_field(torus.len());
        let psi = single_mode(&torus, [1, 1], 0.3);
        let d1 = torus.derivative(&psi, 0);
        let u = [
            torus.derivative(&psi, 1),
            d1.iter().map(|c| -c).collect(),
            z(),
        ];
        let mut n = single_mode(&torus, [1, 0], 0.2);
        let n2 = single_mode(&torus, [0, 2], -0.1);
        n.iter_mut().zip(&n2).for_each(|(a, b)| *a += b);
        let st = s.state(0.0, u, z(), n).unwrap();
        // From the PDE: dn/dt = -u.grad n - sigma n + sigma/2 Delta n.
        let adv = s.advection(&st.u, &st.n);
        let div_j = torus.divergence(&st.j);
        for m in 0..torus.len() {
            let from_pde = adv[m] - 0.9 * (1.0 + 0.5 * torus.k2(m)) * st.n[m];
            assert!((from_pde + div_j[m]).norm() < 1e-9);
        }
    }

    #[test]
    fn kinetic_energy_decreases_without_charge() {
        let torus = torus2();
        let s = solver(torus);
        let z = || zero_field(torus.len());
        let psi = single_mode(&torus, [1, 1], 0.5);
        let d1 = torus.derivative(&psi, 0);
        let u = [
            torus.derivative(&psi, 1),
            d1.iter().map(|c| -c).collect(),
            z(),
        ];
        let init = s.state(0.0, u, z(), z()).unwrap();
        let out = s.run(&init, 0.2, 1).unwrap();
        let e = |st: &FluidState| st.u.iter().map(|c| torus.l2_norm(c).powi(2)).sum::<f64>();
        for w in out.windows(2) {
            assert!(e(&w[1]) <= e(&w[0]) * (1.0 + 1e-12));
            assert!(max_divergence(&torus, &w[1].u) < 1e-12);
        }
    }

    #[test]
    fn rejects_charged_data() {
        let torus = torus1();
        let s = solver(torus);
        let z = || zero_field(torus.len());
        let mut n = z();
        n[0] = Complex64::new(0.1, 0.0);
        assert!(matches!(
            s.state(0.0, [z(), z(), z()], z(), n),
            Err(Error::NotWellPrepared(_))
        ));
    }

    proptest! {
        #[test]
        fn projection_is_divergence_free(seed in proptest::collection::vec(-1.0f64..1.0, 6 * 16 * 16)) {
            let torus = torus2();
            let u: [Field; 3] = std::array::from_fn(|i| {
                (0..torus.len())
                    .map(|m| Complex64::new(seed[2 * (i * 256 + m)], seed[2 * (i * 256 + m) + 1]))
                    .collect()
            });
            let p = leray_project(&torus, &u);
            prop_assert!(max_divergence(&torus, &p) < 1e-12);
            let pp = leray_project(&torus, &p);
            for i in 0..3 {
                for m in 0..torus.len() {
                    prop_assert!((pp[i][m] - p[i][m]).norm() < 1e-14);
                }
            }
        }
    }
}
