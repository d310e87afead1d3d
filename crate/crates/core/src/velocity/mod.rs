//! Velocity-space discretization weighted by the global Maxwellian.

pub mod basis;
pub mod moments;
pub mod quadrature;

pub use basis::{
    basis_dim, collision_frequency, collision_frequency_quadrature, fit_frequency_bounds,
    maxwellian, HermiteBasis,
};
pub use moments::{thirteen_moments, MomentVectors};
pub use quadrature::{QuadratureGrid, SphereRule};

pub fn build_basis(degree_cutoff: usize, quad_order: usize) -> crate::Result<HermiteBasis> {
    HermiteBasis::new(degree_cutoff, quad_order)
}
