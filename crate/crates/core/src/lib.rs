//! Koch pre-fractal boundary domains and double-obstacle (p,q)-Laplacian solvers.
//!
//! The crate builds snowflake-type polygonal domains whose sides are Koch
//! pre-fractal curves, triangulates them, discretizes the energy
//!
//! ```text
//! J(v) = (1/p) ∫ (k² + |∇v|²)^(p/2) + (1/q) ∫ (k² + |∇v|²)^(q/2) − ∫ f v
//! ```
//!
//! with piecewise-linear elements, and minimizes it over nodal box constraints
//! `φ₁ ≤ v ≤ φ₂` with Dirichlet data `g`. On top of the plain solver sit the
//! two limit solvers (gradient-capped `q`-energy and approximate minimal
//! Lipschitz extension) and sweep harnesses that track solution families as
//! the exponent `p` or the pre-fractal level `n` grows.
//!
//! Element loops run on rayon when the `parallel` feature (default) is
//! enabled; reductions use a fixed-shape chunk tree so results are identical
//! to the sequential fallback bit for bit.

pub mod error;
pub mod expr;
pub mod fem;
pub mod fibers;
pub mod field;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod mesh;
pub mod par;
pub mod point;
pub mod solver;
pub mod svg;
pub mod sweeps;

pub use error::{FemError, FiberError, GeometryError, MeshError, SolverError};
pub use fem::{DiscreteField, ElementData, EnergyModel, ProblemInstance};
pub use fibers::{FiberArray, FiberParams};
pub use geometry::{IfsParams, PrefractalCurve, PrefractalDomain};
pub use mesh::Mesh;
pub use point::Point2;
pub use solver::{DiscreteSolution, LimitConstraint, SolverConfig};
pub use sweeps::{SweepAxis, SweepReport};
