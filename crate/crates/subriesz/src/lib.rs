//! Numerical toolkit for subelliptic potential theory on stratified groups.
//!
//! The crate models two concrete groups — Euclidean ℝᵈ and the first
//! Heisenberg group H¹ — and builds, on top of sampled grid functions:
//!
//! * the heat semigroup of the sub-Laplacian and its horizontal derivatives
//!   ([`heat`]),
//! * Riesz potentials through the heat-subordination integral ([`riesz`]),
//! * distribution functions, decreasing rearrangements and Lorentz
//!   norms/quasi-norms computed exactly over plateau profiles ([`lorentz`]),
//! * heat-kernel maximal functions and weak-type diagnostics ([`maximal`]),
//! * horizontal perimeter, coarea and isoperimetric functionals
//!   ([`geometry`]),
//! * an experiment harness that runs the full inequality suite and emits
//!   deterministic JSON/CSV reports ([`harness`]).
//!
//! See the `examples/` directory for one runnable walkthrough per subsystem,
//! and the `subriesz` binary for the experiment CLI.

pub mod error;
pub mod fft;
pub mod geometry;
pub mod grid;
pub mod group;
pub mod heat;
pub mod lorentz;
pub mod maximal;
pub mod numeric;
pub mod report;
pub mod riesz;

pub use error::{Error, Result};
pub use geometry::RegionSpec;
pub use grid::{GridFunction, GridSpec};
pub use group::{GroupDescriptor, LawTag, Point};
pub use heat::HeatSemigroup;
pub use lorentz::RearrangementProfile;
pub use maximal::TGrid;
pub use report::{ExperimentReport, Verdict};
pub use riesz::{RieszOperator, SubordinationRule};
