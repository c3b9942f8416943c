//! Spectral toolkit for discrete Hodge Laplacians on metrized cell complexes.
//!
//! The crate is organized bottom-up:
//!
//! * [`complex`]: periodic cubical grids and loaded simplicial complexes with
//!   signed incidence matrices.
//! * [`metric`]: diagonal Hodge stars, the per-degree pencil `(K, M)` with its
//!   `K_up`/`K_down` splitting, and ε-closeness of two metrics.
//! * [`eigensolve`]: dense and shift-invert generalized eigensolvers,
//!   resolvents and Rayleigh quotients.
//! * [`weyl`]: certified spectrum localization from resolvent residuals.
//! * [`analytic`]: closed-form flat torus spectra, the flat product bottom
//!   `α(B, s, n, k)` and hyperbolic reference intervals.
//! * [`experiments`]: structural spectrum checks, deformation sweeps,
//!   partitions of unity, Dirichlet localization and the config-driven runner.

pub mod analytic;
pub mod complex;
pub mod eigensolve;
mod error;
pub mod experiments;
pub mod metric;
mod rank;
pub mod sparse;
pub mod weyl;

pub use complex::{CellComplex, ComplexKind, GridSpec};
pub use eigensolve::{SolverOptions, SpectrumSet};
pub use error::{Error, Result};
pub use metric::{DegreePencil, MassFamily, MetricMode, MetricSpec};
pub use weyl::{WeylCertificate, WeylConstants};
