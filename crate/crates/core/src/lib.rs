//! Simulation and verification toolkit for the radial spanning tree (RST)
//! built on a homogeneous Poisson point process in `R^d`.
//!
//! The crate is organised bottom-up:
//!
//! * [`geom`]: dimension-generic vectors, lenses, cones, the in-ball
//!   reflection and the deterministic lemma checkers with their fuzz
//!   generators.
//! * [`rng`] and [`ppp`]: counter-based seeding, eager ball sampling,
//!   a lazily realized cell-hashed Poisson field and region resampling.
//! * [`index`]: uniform-grid spatial indexing and the constrained
//!   nearest-neighbour search that defines the parent map.
//! * [`tree`]: full RST construction, validation, straightness profiles,
//!   in-degree statistics and planarity scans.
//! * [`exploration`]: the instrumented forward exploration process with
//!   history lenses, good steps, terminal time, pseudo-renewals and the
//!   reflection coupling.
//! * [`experiments`] and [`stats`]: deterministic Monte Carlo estimators
//!   and the statistical tests they rely on.
//! * [`io`]: CSV import/export for every produced artifact.

// Range checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod exploration;
pub mod geom;
pub mod index;
pub mod io;
pub mod ppp;
pub mod rng;
pub mod stats;
pub mod tree;

pub use error::{Error, Result};
pub use geom::{Cone, Lens, Vector};
