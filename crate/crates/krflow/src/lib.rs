//! Numerical laboratory for the modified Kahler-Ricci flow on
//! symmetry-reduced Fano model geometries.
//!
//! The flow, its energy functionals, eigenvalue monitors and convergence
//! criteria are all reduced to one momentum variable on a fixed background
//! grid; see the `geometry` module for the reduction and `flow` for the time
//! integrator.

pub mod analysis;
pub mod config;
pub mod flow;
pub mod functionals;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod potentials;
pub mod soliton;
pub mod spectral;

pub mod cli;

pub use flow::{FlowConfig, FlowTrace};
pub use geometry::{Background, BackgroundId, MetricState, VectorField};
pub use grid::{build_grid, MomentumGrid};
pub use potentials::PotentialBundle;
