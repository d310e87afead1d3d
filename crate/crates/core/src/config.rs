//! Flat key-value run configuration shared by every subcommand.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::collision::CollisionConfig;
use crate::error::{Error, Result};
use crate::fluid::FluidConfig;
use crate::kinetic::{FluidProfile, KineticConfig, MicroInit, NonlinearForm, Scheme};
use crate::spectral::Torus;
use crate::transport::TransportCoefficients;
use crate::velocity::quadrature::SphereRule;

/// Built-in initial profiles, all neutral, divergence-free and satisfying
/// `rho + theta = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Zero,
    /// Shear flow along the first axis with temperature and charge waves.
    #[default]
    Shear,
    /// Cellular flow in the plane; needs a 2D torus.
    Cellular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dims: usize,
    pub modes: usize,
    pub length: f64,
    pub degree_cutoff: usize,
    pub quad_order: usize,
    pub epsilon: f64,
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    pub collisions: bool,
    pub fields: bool,
    pub nonlinear: bool,
    pub nonlinear_form: NonlinearForm,
    pub picard: bool,
    pub picard_max_iters: usize,
    pub picard_tol: f64,
    pub micro_init: MicroInit,
    pub dealias: bool,
    pub snapshot_every: usize,
    pub n_diag: usize,
    pub blowup_factor: f64,
    pub profile: ProfileKind,
    pub profile_amplitude: f64,
    pub sobolev_index: f64,
    pub epsilons: Vec<f64>,
    pub cross_section: f64,
    pub sphere_rule: Option<SphereRule>,
    pub kernel_threshold: f64,
    pub certify: bool,
    pub out_dir: PathBuf,
    pub cache_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let k = KineticConfig::default();
        let c = CollisionConfig::default();
        Self {
            dims: 1,
            modes: 64,
            length: 2.0 * PI,
            degree_cutoff: 4,
            quad_order: 16,
            epsilon: k.epsilon,
            dt: k.dt,
            t_final: k.t_final,
            scheme: k.scheme,
            collisions: k.collisions,
            fields: k.fields,
            nonlinear: k.nonlinear,
            nonlinear_form: k.nonlinear_form,
            picard: k.picard,
            picard_max_iters: k.picard_max_iters,
            picard_tol: k.picard_tol,
            micro_init: MicroInit::Compatible,
            dealias: k.dealias,
            snapshot_every: k.snapshot_every,
            n_diag: k.n_diag,
            blowup_factor: k.blowup_factor,
            profile: ProfileKind::Shear,
            profile_amplitude: 0.1,
            sobolev_index: 1.0,
            epsilons: vec![0.5, 0.25, 0.125, 0.0625],
            cross_section: c.cross_section,
            sphere_rule: c.sphere_rule,
            kernel_threshold: c.kernel_threshold,
            certify: c.certify,
            out_dir: PathBuf::from("out"),
            cache_dir: None,
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|message| Error::Format {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        hash_json(self)
    }

    pub fn torus(&self) -> Result<Torus> {
        Torus::new(self.dims, self.modes, self.length)
    }

    pub fn kinetic_config(&self, epsilon: f64) -> KineticConfig {
        KineticConfig {
            epsilon,
            dt: self.dt,
            t_final: self.t_final,
            scheme: self.scheme,
            collisions: self.collisions,
            fields: self.fields,
            nonlinear: self.nonlinear,
            nonlinear_form: self.nonlinear_form,
            micro_init: self.micro_init,
            dealias: self.dealias,
            picard: self.picard,
            picard_max_iters: self.picard_max_iters,
            picard_tol: self.picard_tol,
            blowup_factor: self.blowup_factor,
            snapshot_every: self.snapshot_every,
            n_diag: self.n_diag,
        }
    }

    pub fn fluid_config(&self, tc: &TransportCoefficients) -> FluidConfig {
        FluidConfig {
            mu: tc.mu,
            kappa: tc.kappa,
            sigma: tc.sigma,
            dt: self.dt,
            nonlinear: self.nonlinear,
            dealias: self.dealias,
            blowup_factor: self.blowup_factor,
        }
    }

    pub fn collision_config(&self) -> CollisionConfig {
        CollisionConfig {
            sphere_rule: self.sphere_rule,
            cross_section: self.cross_section,
            kernel_threshold: self.kernel_threshold,
            certify: self.certify,
            ..CollisionConfig::default()
        }
    }

    /// Whether the kinetic runs need the bilinear tensor.
    pub fn needs_tensor(&self) -> bool {
        self.nonlinear && self.collisions
    }

    pub fn profile(&self, torus: Torus) -> Result<FluidProfile> {
        build_profile(self.profile, self.profile_amplitude, torus)
    }
}

pub fn hash_json(value: &impl Serialize) -> String {
    let bytes = serde_json::to_vec(value).expect("value serializes");
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn build_profile(kind: ProfileKind, amp: f64, torus: Torus) -> Result<FluidProfile> {
    let s = [2.0 * PI / torus.length[0], 2.0 * PI / torus.length[1]];
    match kind {
        ProfileKind::Zero => Ok(FluidProfile::zeros(torus)),
        ProfileKind::Shear => Ok(FluidProfile::from_fn(torus, move |x| {
            let y = s[0] * x[0];
            let th = amp * y.cos();
            [
                -th,
                0.0,
                amp * y.sin(),
                amp * (2.0 * y).cos(),
                th,
                amp * ((2.0 * y).cos() + y.sin()),
            ]
        })),
        ProfileKind::Cellular => {
            if torus.dims != 2 {
                return Err(Error::InvalidParameter(
                    "the cellular profile needs a 2D torus".into(),
                ));
            }
            Ok(FluidProfile::from_fn(torus, move |x| {
                let (a, b) = (s[0] * x[0], s[1] * x[1]);
                let th = amp * (a + b).cos();
                [
                    -th,
                    amp * b.sin(),
                    amp * a.sin(),
                    amp * (a - b).cos(),
                    th,
                    amp * (a.cos() + (2.0 * b).sin()),
                ]
            }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        let c = RunConfig {
            epsilon: 0.3,
            sphere_rule: Some(SphereRule::Product {
                n_polar: 4,
                n_azimuth: 8,
            }),
            cache_dir: Some("cache".into()),
            scheme: Scheme::Ars222,
            ..RunConfig::default()
        };
        let back = RunConfig::from_toml_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml_str("epsilonn = 0.1").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let b = RunConfig {
            dt: 2e-3,
            ..a.clone()
        };
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn partial_file_overrides_only_named_keys() {
        let c =
            RunConfig::from_toml_str("modes = 32\nfields = false\nscheme = \"ars222\"").unwrap();
        assert_eq!(c.modes, 32);
        assert!(!c.fields);
        assert_eq!(c.scheme, Scheme::Ars222);
        assert_eq!(c.degree_cutoff, 4);
        let k = c.kinetic_config(0.25);
        assert_eq!(k.epsilon, 0.25);
        assert!(!k.fields);
    }

    #[test]
    fn profiles_are_well_prepared() {
        use crate::fluid::max_divergence;
        let cases = [
            (ProfileKind::Shear, Torus::new(1, 16, 2.0 * PI).unwrap()),
            (ProfileKind::Shear, Torus::new(1, 16, 3.0).unwrap()),
            (ProfileKind::Cellular, Torus::new(2, 16, 5.0).unwrap()),
        ];
        for (kind, torus) in cases {
            let p = build_profile(kind, 0.1, torus).unwrap();
            assert!(max_divergence(&torus, &p.u) < 1e-12);
            let bq = p
                .rho
                .iter()
                .zip(&p.theta)
                .map(|(a, b)| (a + b).norm())
                .fold(0.0, f64::max);
            assert!(bq < 1e-14);
            assert!(p.n[0].norm() < 1e-14);
            assert!(torus.l2_norm(&p.theta) > 0.0);
        }
        assert!(build_profile(ProfileKind::Cellular, 0.1, Torus::new(1, 8, 1.0).unwrap()).is_err());
    }
}
