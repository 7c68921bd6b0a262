//! Continuous methane leak-source inversion and sensor placement under wind
//! uncertainty.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: polygon constraints, regions and the site specification.
//! - [`plume`]: the Gaussian plume forward model.
//! - [`records`]: windowed observation records and their quality weights.
//! - [`cones`]: angular receptivity cones and the linear cuts they imply.
//! - [`solvers`]: a mixed-integer genetic algorithm and a Metropolis sampler.
//! - [`inversion`]: objectives, problem classes A–D and moving-window monitoring.
//! - [`wind`]: synthetic and wind-rose-conditioned wind realizations.
//! - [`coverage`]: the coverage metric and coverage maps.
//! - [`placement`]: sensor placement with penalties and call-by-need evaluation.
//! - [`app`]: configuration, file formats and the command implementations
//!   behind the `leakinv` binary.
//!
//! Runnable walkthroughs of each capability live in `examples/`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod cones;
pub mod coverage;
pub mod error;
pub mod geometry;
pub mod inversion;
pub mod io;
pub mod placement;
pub mod plume;
pub mod records;
pub mod seeds;
pub mod solvers;
pub mod wind;

pub use error::{Error, Result};
