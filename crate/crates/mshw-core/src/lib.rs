//! Core engine of the `mshw` workbench: many-server queues with phase-type
//! service and customer abandonment, their fluid and diffusion limits, and the
//! statistics needed to compare the two.
//!
//! The crate is `no_std`-compatible (it requires `alloc`); everything here is
//! pure computation over seeded random streams. File formats, configuration
//! and the command-line interface live in the companion `mshw` crate.
//!
//! Layout:
//!
//! * [`phase_type`]: phase-type service-time laws `(p, ν, P)` and their
//!   static algebra (mean, load vector, routing covariances).
//! * [`grid`]: `(K+1)`-dimensional paths on a uniform time grid, the common
//!   currency of the map solver and the limit constructions.
//! * [`maps`]: the integral-equation maps taking driver paths `(u, v)` to
//!   state paths `(x, z)`, solved by Picard iteration.
//! * [`des`]: discrete-event simulation of the `n`-server queue under the
//!   original and the perturbed service disciplines, plus pathwise
//!   reconstruction of the driver processes.
//! * [`limits`]: fluid constants, Brownian driver sampling, diffusion paths
//!   through the maps, and the customer-count SDE.
//! * [`stats`]: empirical distribution comparison (two-sample
//!   Kolmogorov–Smirnov) and small reference computations.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod des;
pub mod grid;
pub mod limits;
pub mod linalg;
pub mod maps;
pub mod phase_type;
pub mod random;
pub mod stats;

pub use des::{Discipline, InitialCondition, RunConfig, Scenario, SimPath};
pub use grid::GridPath;
pub use limits::{DriverSet, FluidLimit, LimitPath};
pub use maps::{MapCoefficients, Quadrature, SolveOptions};
pub use phase_type::PhaseType;
