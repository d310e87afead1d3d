//! Epsilon sweeps comparing kinetic moments against the fluid limit.

mod report;
mod runs;
mod selftest;

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::load_or_assemble;
use crate::collision::{CollisionOperators, Projections};
use crate::config::{hash_json, RunConfig};
use crate::error::{Error, Result};
use crate::fluid::{leray_project, FluidSolver, FluidState};
use crate::kinetic::{init_well_prepared, FluidProfile, KineticSolver, KineticState};
use crate::spectral::{Torus, Transform};
use crate::transport::{compute_transport, TransportCoefficients, TransportSummary};
use crate::velocity::{thirteen_moments, HermiteBasis};

pub use report::{emit_report, read_report, ReportPaths};
pub use runs::{emit_fluid_run, emit_kinetic_run, FluidRunSummary, KineticRunSummary};
pub use selftest::{selftest, Check};

/// Column names of the tracked norms, in storage order.
pub const TRACKED: [&str; 9] = [
    "rho",
    "u",
    "theta",
    "n",
    "j",
    "w",
    "div_u",
    "boussinesq",
    "ohm",
];
/// The first six entries of [`TRACKED`] compare against the fluid run.
pub const MOMENT_ERRORS: usize = 6;

/// Everything shared by the runs of one configuration.
pub struct Lab {
    pub cfg: RunConfig,
    pub torus: Torus,
    pub basis: Arc<HermiteBasis>,
    pub ops: Arc<CollisionOperators>,
    pub proj: Projections,
    pub transport: TransportCoefficients,
}

impl Lab {
    /// Build the basis, the collision operators (through the cache when
    /// configured) and the transport coefficients.
    pub fn new(cfg: RunConfig) -> Result<Self> {
        let torus = cfg.torus()?;
        let basis = HermiteBasis::new(cfg.degree_cutoff, cfg.quad_order)?;
        let ops = load_or_assemble(
            cfg.cache_dir.as_deref(),
            &basis,
            &cfg.collision_config(),
            cfg.needs_tensor(),
        )?;
        let proj = Projections::new(&basis);
        let transport = compute_transport(&ops, &proj, &thirteen_moments(&basis)?)?;
        Ok(Self {
            cfg,
            torus,
            basis: Arc::new(basis),
            ops: Arc::new(ops),
            proj,
            transport,
        })
    }

    pub fn kinetic_solver(&self, epsilon: f64) -> Result<KineticSolver> {
        KineticSolver::new(
            self.cfg.kinetic_config(epsilon),
            self.torus,
            self.basis.clone(),
            self.ops.clone(),
        )
    }

    pub fn fluid_solver(&self) -> Result<FluidSolver> {
        FluidSolver::new(self.cfg.fluid_config(&self.transport), self.torus)
    }

    pub fn summary(&self) -> Result<TransportSummary> {
        TransportSummary::new(&self.ops, &self.proj, &self.transport)
    }

    pub fn fluid_initial(
        &self,
        solver: &FluidSolver,
        profile: &FluidProfile,
    ) -> Result<FluidState> {
        let p = profile.truncated(self.cfg.dealias);
        solver.state(0.0, p.u, p.theta, p.n)
    }

    pub fn kinetic_initial(
        &self,
        solver: &KineticSolver,
        profile: &FluidProfile,
    ) -> Result<KineticState> {
        init_well_prepared(
            solver,
            &profile.truncated(self.cfg.dealias),
            &self.transport,
        )
    }
}

/// Per-epsilon outcome of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub epsilon: f64,
    pub kinetic_config_hash: String,
    /// `series[t][c]` is column `TRACKED[c]` at `times[t]`; empty on failure.
    pub series: Vec<Vec<f64>>,
    pub failure: Option<String>,
}

impl SweepCell {
    pub fn final_norms(&self) -> Option<&[f64]> {
        self.series.last().map(|v| v.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub epsilons: Vec<f64>,
    pub times: Vec<f64>,
    pub sobolev_index: f64,
    pub norms: Vec<String>,
    pub cells: Vec<SweepCell>,
    /// Least-squares log-log slope of each final-time norm against epsilon,
    /// excluding the largest epsilon.
    pub slopes: Vec<Option<f64>>,
    /// Whether each final-time norm strictly decreases along the list.
    pub monotone: Vec<bool>,
    pub transport: TransportSummary,
    pub run_config_hash: String,
    pub fluid_config_hash: String,
}

impl SweepReport {
    /// Final-time value of column `c` for every successful cell.
    pub fn final_column(&self, c: usize) -> Vec<(f64, f64)> {
        self.cells
            .iter()
            .filter_map(|cell| cell.final_norms().map(|v| (cell.epsilon, v[c])))
            .collect()
    }

    pub fn failed(&self) -> usize {
        self.cells.iter().filter(|c| c.failure.is_some()).count()
    }
}

fn check_epsilons(epsilons: &[f64]) -> Result<()> {
    if let Some(&e) = epsilons.iter().find(|&&e| !(e > 0.0 && e <= 1.0)) {
        return Err(Error::InvalidParameter(format!(
            "sweep epsilons must lie in (0, 1], got {e}"
        )));
    }
    if epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter(
            "sweep epsilons must be strictly decreasing".into(),
        ));
    }
    Ok(())
}

fn diff_norm(torus: &Torus, s: f64, a: &[Complex64], b: &[Complex64]) -> f64 {
    let d: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    torus.hs_norm(&d, s)
}

fn vector_norm(parts: [f64; 3]) -> f64 {
    parts.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// The nine tracked norms of one kinetic state against the fluid state at
/// the same time.
pub fn limit_norms(
    solver: &KineticSolver,
    transform: &Transform,
    sigma: f64,
    s: f64,
    kin: &KineticState,
    fluid: &FluidState,
) -> Vec<f64> {
    let torus = &kin.torus;
    let m = solver.extract_moments(kin);
    let pu = leray_project(torus, &m.u);
    let dn: [Vec<Complex64>; 3] = std::array::from_fn(|i| torus.derivative(&m.n, i));
    let ohm = std::array::from_fn(|i| {
        let npu = transform.product(&m.n, &pu[i]);
        let r: Vec<Complex64> = (0..torus.len())
            .map(|k| m.j[i][k] - npu[k] - sigma * (m.grad_phi[i][k] - 0.5 * dn[i][k]))
            .collect();
        torus.hs_norm(&r, s)
    });
    let bq: Vec<Complex64> = m.rho.iter().zip(&m.theta).map(|(a, b)| a + b).collect();
    vec![
        diff_norm(torus, s, &m.rho, &fluid.rho),
        vector_norm(std::array::from_fn(|i| {
            diff_norm(torus, s, &pu[i], &fluid.u[i])
        })),
        diff_norm(torus, s, &m.theta, &fluid.theta),
        diff_norm(torus, s, &m.n, &fluid.n),
        vector_norm(std::array::from_fn(|i| {
            diff_norm(torus, s, &m.j[i], &fluid.j[i])
        })),
        diff_norm(torus, s, &m.w, &fluid.w),
        torus.hs_norm(&torus.divergence(&m.u), s),
        torus.hs_norm(&bq, s),
        vector_norm(ohm),
    ]
}

/// Least-squares slope of `log y` against `log x`; `None` with fewer than
/// two points or any nonpositive value.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return None;
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

fn run_cell(
    lab: &Lab,
    profile: &FluidProfile,
    epsilon: f64,
    t_final: f64,
    fluid: &[FluidState],
) -> Result<Vec<Vec<f64>>> {
    let solver = lab.kinetic_solver(epsilon)?;
    let init = lab.kinetic_initial(&solver, profile)?;
    let out = solver.run(&init, t_final)?;
    if out.snapshots.len() != fluid.len() {
        return Err(Error::InvalidParameter(format!(
            "kinetic run has {} snapshots, fluid run {}",
            out.snapshots.len(),
            fluid.len()
        )));
    }
    let transform = Transform::new(lab.torus);
    out.snapshots
        .iter()
        .zip(fluid)
        .map(|(k, f)| {
            if (k.t - f.t).abs() > 1e-12 * f.t.abs().max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "snapshot times differ: kinetic {} fluid {}",
                    k.t, f.t
                )));
            }
            Ok(limit_norms(
                &solver,
                &transform,
                lab.transport.sigma,
                lab.cfg.sobolev_index,
                k,
                f,
            ))
        })
        .collect()
}

/// Run the fluid limit once and the kinetic system for every epsilon.
///
/// Kinetic failures are recorded in their cell; a fluid failure aborts the
/// sweep since nothing can be compared.
pub fn run_sweep(
    lab: &Lab,
    profile: &FluidProfile,
    epsilons: &[f64],
    t_final: f64,
) -> Result<SweepReport> {
    check_epsilons(epsilons)?;
    let fs = lab.fluid_solver()?;
    let fluid = fs.run(
        &lab.fluid_initial(&fs, profile)?,
        t_final,
        lab.cfg.snapshot_every,
    )?;
    let times: Vec<f64> = fluid.iter().map(|s| s.t).collect();

    let cells: Vec<SweepCell> = epsilons
        .par_iter()
        .map(|&eps| {
            let hash = hash_json(&lab.cfg.kinetic_config(eps));
            match run_cell(lab, profile, eps, t_final, &fluid) {
                Ok(series) => SweepCell {
                    epsilon: eps,
                    kinetic_config_hash: hash,
                    series,
                    failure: None,
                },
                Err(e) => SweepCell {
                    epsilon: eps,
                    kinetic_config_hash: hash,
                    series: Vec::new(),
                    failure: Some(e.to_string()),
                },
            }
        })
        .collect();

    let mut report = SweepReport {
        epsilons: epsilons.to_vec(),
        times,
        sobolev_index: lab.cfg.sobolev_index,
        norms: TRACKED.iter().map(|s| s.to_string()).collect(),
        cells,
        slopes: Vec::new(),
        monotone: Vec::new(),
        transport: lab.summary()?,
        run_config_hash: lab.cfg.hash(),
        fluid_config_hash: hash_json(&fs.cfg),
    };
    for c in 0..TRACKED.len() {
        let col = report.final_column(c);
        let fit: Vec<(f64, f64)> = col
            .iter()
            .copied()
            .filter(|&(e, _)| Some(e) != epsilons.first().copied())
            .collect();
        report.slopes.push(loglog_slope(&fit));
        let complete = col.len() == epsilons.len();
        report
            .monotone
            .push(complete && col.windows(2).all(|w| w[1].1 < w[0].1));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [0.25, 0.125, 0.0625]
            .iter()
            .map(|&e| (e, 3.0 * e * e))
            .collect();
        assert!((loglog_slope(&pts).unwrap() - 2.0).abs() < 1e-12);
        assert!(loglog_slope(&pts[..1]).is_none());
        assert!(loglog_slope(&[(0.5, 0.0), (0.25, 1.0)]).is_none());
    }

    #[test]
    fn epsilon_list_is_validated() {
        assert!(check_epsilons(&[]).is_ok());
        assert!(check_epsilons(&[1.0, 0.5]).is_ok());
        assert!(check_epsilons(&[0.5, 0.5]).is_err());
        assert!(check_epsilons(&[0.25, 0.5]).is_err());
        assert!(check_epsilons(&[1.5]).is_err());
        assert!(check_epsilons(&[0.0]).is_err());
    }
}
