use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::report::write_text;
use super::Lab;
use crate::cache::{read_kinetic_checkpoint, write_fluid_snapshot, write_kinetic_checkpoint};
use crate::config::{hash_json, RunConfig};
use crate::error::{Error, Result};
use crate::fluid::{max_divergence, FluidState};
use crate::kinetic::{
    EnergyFunctionals, FluidProfile, KineticSolver, KineticState, ResidualRecord,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KineticRunSummary {
    pub config: RunConfig,
    pub config_hash: String,
    pub epsilon: f64,
    pub start_time: f64,
    pub final_time: f64,
    pub steps: usize,
    /// `L^2_x` norms of `rho, u, theta, n, j, w` at the final time.
    pub final_moment_norms: Vec<f64>,
    pub final_energy: EnergyFunctionals,
    pub max_residuals: ResidualRecord,
    pub gauss_law_defect: f64,
    pub wall_seconds: f64,
    pub checkpoint: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidRunSummary {
    pub config: RunConfig,
    pub config_hash: String,
    pub mu: f64,
    pub kappa: f64,
    pub sigma: f64,
    pub final_time: f64,
    /// `L^2_x` norms of `rho, u, theta, n, phi, j, w` at the final time.
    pub final_norms: Vec<f64>,
    pub max_divergence: f64,
    pub wall_seconds: f64,
    pub snapshot: PathBuf,
}

fn vec_l2(torus: &crate::spectral::Torus, v: &[Vec<Complex64>; 3]) -> f64 {
    v.iter()
        .map(|c| torus.l2_norm(c).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn moment_norms(solver: &KineticSolver, s: &KineticState) -> Vec<f64> {
    let m = solver.extract_moments(s);
    let t = &s.torus;
    vec![
        t.l2_norm(&m.rho),
        vec_l2(t, &m.u),
        t.l2_norm(&m.theta),
        t.l2_norm(&m.n),
        vec_l2(t, &m.j),
        t.l2_norm(&m.w),
    ]
}

fn fluid_norms(s: &FluidState) -> Vec<f64> {
    let t = &s.torus;
    vec![
        t.l2_norm(&s.rho),
        vec_l2(t, &s.u),
        t.l2_norm(&s.theta),
        t.l2_norm(&s.n),
        t.l2_norm(&s.phi),
        vec_l2(t, &s.j),
        t.l2_norm(&s.w),
    ]
}

fn max_record(records: &[ResidualRecord]) -> ResidualRecord {
    let mut m = ResidualRecord {
        t: records.last().map_or(0.0, |r| r.t),
        dt: 0.0,
        mass: 0.0,
        momentum: 0.0,
        energy: 0.0,
        charge: 0.0,
    };
    for r in records {
        m.dt = m.dt.max(r.dt);
        m.mass = m.mass.max(r.mass);
        m.momentum = m.momentum.max(r.momentum);
        m.energy = m.energy.max(r.energy);
        m.charge = m.charge.max(r.charge);
    }
    m
}

/// One kinetic run at `lab.cfg.epsilon`, from the configured profile or a
/// checkpoint. Writes `kinetic.csv`, `residuals.csv`, `kinetic.json` and
/// `state.bin` into `dir`.
pub fn emit_kinetic_run(
    lab: &Lab,
    profile: &FluidProfile,
    restart: Option<&Path>,
    dir: &Path,
) -> Result<KineticRunSummary> {
    let start = Instant::now();
    let solver = lab.kinetic_solver(lab.cfg.epsilon)?;
    let init = match restart {
        Some(path) => {
            let s = read_kinetic_checkpoint(path)?;
            if s.torus != lab.torus || s.dim != solver.dim() || s.epsilon != lab.cfg.epsilon {
                return Err(Error::InvalidParameter(format!(
                    "checkpoint {} does not match the configured torus, basis or epsilon",
                    path.display()
                )));
            }
            s
        }
        None => lab.kinetic_initial(&solver, profile)?,
    };
    let out = solver.run(&init, lab.cfg.t_final)?;

    let mut csv = String::from("t,rho,u,theta,n,j,w,energy,dissipation,lyapunov\n");
    for (s, e) in out.snapshots.iter().zip(&out.energy) {
        write!(csv, "{:e}", s.t).unwrap();
        for v in moment_norms(&solver, s) {
            write!(csv, ",{v:e}").unwrap();
        }
        writeln!(csv, ",{:e},{:e},{:e}", e.energy, e.dissipation, e.lyapunov).unwrap();
    }
    let mut res = String::from("t,dt,mass,momentum,energy,charge\n");
    for r in &out.residuals {
        writeln!(
            res,
            "{:e},{:e},{:e},{:e},{:e},{:e}",
            r.t, r.dt, r.mass, r.momentum, r.energy, r.charge
        )
        .unwrap();
    }
    write_text(&dir.join("kinetic.csv"), &csv)?;
    write_text(&dir.join("residuals.csv"), &res)?;
    let checkpoint = dir.join("state.bin");
    write_kinetic_checkpoint(&checkpoint, &out.final_state)?;

    let summary = KineticRunSummary {
        config: lab.cfg.clone(),
        config_hash: hash_json(&solver.cfg),
        epsilon: lab.cfg.epsilon,
        start_time: init.t,
        final_time: out.final_state.t,
        steps: out.steps,
        final_moment_norms: moment_norms(&solver, &out.final_state),
        final_energy: *out
            .energy
            .last()
            .expect("initial monitor is always recorded"),
        max_residuals: max_record(&out.residuals),
        gauss_law_defect: out.final_state.gauss_law_defect(),
        wall_seconds: start.elapsed().as_secs_f64(),
        checkpoint,
    };
    write_text(
        &dir.join("kinetic.json"),
        &serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    Ok(summary)
}

/// One fluid run. Writes `fluid.csv`, `fluid.json` and `fluid.bin`.
pub fn emit_fluid_run(lab: &Lab, profile: &FluidProfile, dir: &Path) -> Result<FluidRunSummary> {
    let start = Instant::now();
    let fs = lab.fluid_solver()?;
    let init = lab.fluid_initial(&fs, profile)?;
    let states = fs.run(&init, lab.cfg.t_final, lab.cfg.snapshot_every)?;
    let mut csv = String::from("t,rho,u,theta,n,phi,j,w,div_u\n");
    let mut div = 0.0f64;
    for s in &states {
        write!(csv, "{:e}", s.t).unwrap();
        for v in fluid_norms(s) {
            write!(csv, ",{v:e}").unwrap();
        }
        let d = max_divergence(&s.torus, &s.u);
        div = div.max(d);
        writeln!(csv, ",{d:e}").unwrap();
    }
    write_text(&dir.join("fluid.csv"), &csv)?;
    let last = states.last().expect("run returns the initial state");
    let snapshot = dir.join("fluid.bin");
    write_fluid_snapshot(&snapshot, last)?;
    let summary = FluidRunSummary {
        config: lab.cfg.clone(),
        config_hash: hash_json(&fs.cfg),
        mu: fs.cfg.mu,
        kappa: fs.cfg.kappa,
        sigma: fs.cfg.sigma,
        final_time: last.t,
        final_norms: fluid_norms(last),
        max_divergence: div,
        wall_seconds: start.elapsed().as_secs_f64(),
        snapshot,
    };
    write_text(
        &dir.join("fluid.json"),
        &serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    Ok(summary)
}
