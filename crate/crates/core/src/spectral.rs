//! Periodic torus in one or two dimensions with Fourier transforms.
//!
//! Spectral coefficients follow `f(x) = sum_k f_k exp(i k.x)`, so the
//! forward transform carries the `1/N` factor. Mode index `m` is row-major
//! over the FFT ordering of each axis.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Torus {
    pub dims: usize,
    /// Grid points per axis; the second entry is 1 in one dimension.
    pub modes: [usize; 2],
    pub length: [f64; 2],
}

impl Torus {
    pub fn new(dims: usize, modes: usize, length: f64) -> Result<Self> {
        if !(dims == 1 || dims == 2) {
            return Err(Error::InvalidParameter(format!(
                "spatial dimension must be 1 or 2, got {dims}"
            )));
        }
        if modes < 4 || !modes.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "mode count must be even and at least 4, got {modes}"
            )));
        }
        if !(length > 0.0) {
            return Err(Error::NonPositive {
                what: "domain length",
                value: length,
            });
        }
        let m2 = if dims == 2 { modes } else { 1 };
        Ok(Self {
            dims,
            modes: [modes, m2],
            length: [length, if dims == 2 { length } else { 1.0 }],
        })
    }

    pub fn len(&self) -> usize {
        self.modes[0] * self.modes[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn volume(&self) -> f64 {
        self.length[0] * self.length[1]
    }

    fn signed(i: usize, n: usize) -> i64 {
        if i < n.div_ceil(2) {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// Integer wavenumbers of mode `m`.
    pub fn int_index(&self, m: usize) -> [i64; 2] {
        let (i0, i1) = (m / self.modes[1], m % self.modes[1]);
        [
            Self::signed(i0, self.modes[0]),
            Self::signed(i1, self.modes[1]),
        ]
    }

    pub fn mode_of(&self, k: [i64; 2]) -> usize {
        let wrap = |k: i64, n: usize| k.rem_euclid(n as i64) as usize;
        wrap(k[0], self.modes[0]) * self.modes[1] + wrap(k[1], self.modes[1])
    }

    /// Physical wave vector padded to three components.
    pub fn wavevector(&self, m: usize) -> [f64; 3] {
        let k = self.int_index(m);
        let tau = 2.0 * std::f64::consts::PI;
        [
            tau * k[0] as f64 / self.length[0],
            tau * k[1] as f64 / self.length[1],
            0.0,
        ]
    }

    pub fn k2(&self, m: usize) -> f64 {
        let k = self.wavevector(m);
        k[0] * k[0] + k[1] * k[1]
    }

    pub fn conj_index(&self, m: usize) -> usize {
        let k = self.int_index(m);
        self.mode_of([-k[0], -k[1]])
    }

    /// Modes whose conjugate partner has a larger index; the solver
    /// updates these and mirrors the rest.
    pub fn is_canonical(&self, m: usize) -> bool {
        m <= self.conj_index(m)
    }

    pub fn is_nyquist(&self, m: usize) -> bool {
        let k = self.int_index(m);
        (0..2).any(|a| self.modes[a] > 1 && k[a].unsigned_abs() as usize * 2 == self.modes[a])
    }

    /// Two-thirds rule: modes kept after a quadratic product.
    pub fn is_retained(&self, m: usize) -> bool {
        let k = self.int_index(m);
        (0..2).all(|a| 3 * (k[a].unsigned_abs() as usize) < self.modes[a])
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.len());
        for i0 in 0..self.modes[0] {
            for i1 in 0..self.modes[1] {
                out.push([
                    self.length[0] * i0 as f64 / self.modes[0] as f64,
                    self.length[1] * i1 as f64 / self.modes[1] as f64,
                ]);
            }
        }
        out
    }

    /// Discrete `H^s` norm `sqrt(|Omega| sum (1 + |k|^2)^s |f_k|^2)`.
    pub fn hs_norm(&self, field: &[Complex64], s: f64) -> f64 {
        let sum: f64 = field
            .iter()
            .enumerate()
            .map(|(m, c)| (1.0 + self.k2(m)).powf(s) * c.norm_sqr())
            .sum();
        (self.volume() * sum).sqrt()
    }

    pub fn l2_norm(&self, field: &[Complex64]) -> f64 {
        self.hs_norm(field, 0.0)
    }

    /// `i k_axis f_k`.
    pub fn derivative(&self, field: &[Complex64], axis: usize) -> Vec<Complex64> {
        field
            .iter()
            .enumerate()
            .map(|(m, c)| Complex64::new(0.0, self.wavevector(m)[axis]) * c)
            .collect()
    }

    pub fn divergence(&self, u: &[Vec<Complex64>; 3]) -> Vec<Complex64> {
        (0..self.len())
            .map(|m| {
                let k = self.wavevector(m);
                Complex64::new(0.0, 1.0) * (k[0] * u[0][m] + k[1] * u[1][m] + k[2] * u[2][m])
            })
            .collect()
    }

    /// Zero Nyquist and (optionally) the modes removed by the 2/3 rule.
    pub fn truncate(&self, field: &mut [Complex64], dealias: bool) {
        for (m, c) in field.iter_mut().enumerate() {
            if self.is_nyquist(m) || (dealias && !self.is_retained(m)) {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Enforce `f_{-k} = conj(f_k)` from the canonical half.
    pub fn mirror(&self, field: &mut [Complex64], stride: usize) {
        for m in 0..self.len() {
            let c = self.conj_index(m);
            if c == m {
                for a in 0..stride {
                    field[m * stride + a].im = 0.0;
                }
            } else if c < m {
                for a in 0..stride {
                    field[m * stride + a] = field[c * stride + a].conj();
                }
            }
        }
    }
}

/// Cached FFT plans for a torus.
#[derive(Clone)]
pub struct Transform {
    pub torus: Torus,
    fwd: [Arc<dyn Fft<f64>>; 2],
    inv: [Arc<dyn Fft<f64>>; 2],
}

impl std::fmt::Debug for Transform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transform")
            .field("torus", &self.torus)
            .finish()
    }
}

impl Transform {
    pub fn new(torus: Torus) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = [
            planner.plan_fft_forward(torus.modes[0]),
            planner.plan_fft_forward(torus.modes[1]),
        ];
        let inv = [
            planner.plan_fft_inverse(torus.modes[0]),
            planner.plan_fft_inverse(torus.modes[1]),
        ];
        Self { torus, fwd, inv }
    }

    fn apply(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>; 2]) {
        let [n0, n1] = self.torus.modes;
        if n1 > 1 {
            for row in data.chunks_mut(n1) {
                plans[1].process(row);
            }
        }
        let mut col = vec![Complex64::new(0.0, 0.0); n0];
        for j in 0..n1 {
            for i in 0..n0 {
                col[i] = data[i * n1 + j];
            }
            plans[0].process(&mut col);
            for i in 0..n0 {
                data[i * n1 + j] = col[i];
            }
        }
    }

    pub fn forward(&self, phys: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = phys.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.apply(&mut data, &self.fwd);
        let scale = 1.0 / self.torus.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
        data
    }

    pub fn inverse(&self, spec: &[Complex64]) -> Vec<f64> {
        let mut data = spec.to_vec();
        self.apply(&mut data, &self.inv);
        data.iter().map(|c| c.re).collect()
    }

    /// Inverse transform of `stride` interleaved components; output is
    /// point-major with the same stride.
    pub fn inverse_batch(&self, spec: &[Complex64], stride: usize) -> Vec<f64> {
        let n = self.torus.len();
        let mut out = vec![0.0; n * stride];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for a in 0..stride {
            for m in 0..n {
                buf[m] = spec[m * stride + a];
            }
            if buf.iter().all(|c| c.re == 0.0 && c.im == 0.0) {
                continue;
            }
            self.apply(&mut buf, &self.inv);
            for p in 0..n {
                out[p * stride + a] = buf[p].re;
            }
        }
        out
    }

    pub fn forward_batch(&self, phys: &[f64], stride: usize) -> Vec<Complex64> {
        let n = self.torus.len();
        let mut out = vec![Complex64::new(0.0, 0.0); n * stride];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let scale = 1.0 / n as f64;
        for a in 0..stride {
            for p in 0..n {
                buf[p] = Complex64::new(phys[p * stride + a], 0.0);
            }
            self.apply(&mut buf, &self.fwd);
            for m in 0..n {
                out[m * stride + a] = buf[m] * scale;
            }
        }
        out
    }

    /// Dealiased pointwise product of two spectral fields.
    pub fn product(&self, a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
        let pa = self.inverse(a);
        let pb = self.inverse(b);
        let prod: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
        let mut out = self.forward(&prod);
        self.torus.truncate(&mut out, true);
        out
    }
}
