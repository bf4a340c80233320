//! Polyhedral approximation of Siegel-type domains through Heisenberg-group
//! geometry: Korányi balls, horizontal power diagrams, tiling
//! constructions, gap-volume functionals and the pseudoconvex machinery
//! around Fefferman's measure.

pub mod domain_maps;
pub mod error;
pub mod gallery;
pub mod heis;
pub mod numerics;
pub mod power_diagram;
pub mod siegel;
pub mod spatial;
pub mod tilings;

pub use error::{Error, Result};
