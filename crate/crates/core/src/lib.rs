//! Inverse Helmholtz scattering from Husimi phase-space data, with its
//! Liouville ray limit and the linearized X-ray transform.

pub mod cli_io;
pub mod error;
pub mod forward_map;
pub mod grid;
pub mod helmholtz;
pub mod inversion;
pub mod liouville;
pub mod measurement;
pub mod medium;
pub mod parallel;
pub mod phase_space;
pub mod quadrature;
pub mod scalar;
pub mod xray;

pub use error::{Error, Result};
pub use scalar::{Real, Sym2, Vec2};

pub type Point = Vec2<f64>;
pub type Grid = grid::GridSpec<f64>;
pub type Medium = medium::MediumField<f64>;
