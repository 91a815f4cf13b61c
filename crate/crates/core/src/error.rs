//! Error types, one enum per subsystem.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("contraction parameter alpha must lie strictly in (2, 4), got {0}")]
    AlphaOutOfRange(f64),
    #[error("degenerate segment: endpoints coincide at ({x}, {y})")]
    DegenerateSegment { x: f64, y: f64 },
    #[error("base polygon must have at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("base polygon is not convex and counterclockwise (problem near vertex {0})")]
    NotConvexCcw(usize),
    #[error("boundary self-intersection between segments {first} and {second}")]
    SelfIntersection { first: usize, second: usize },
}

#[derive(Debug, Error)]
pub enum FiberError {
    #[error("theta_minus = {got} outside admissible range (0, {max}]")]
    ThetaMinusOutOfRange { got: f64, max: f64 },
    #[error("inner fiber triangle {index} exits the domain; theta_minus too large for this base polygon")]
    InnerFiberOutside { index: usize },
    #[error("obstacles cross: phi1 > phi2 at node {node} ({phi1} > {phi2})")]
    ObstaclesCross { node: usize, phi1: f64, phi2: f64 },
    #[error("boundary datum incompatible at node {node}: g = {g} outside [{phi1}, {phi2}]")]
    BoundaryIncompatible {
        node: usize,
        g: f64,
        phi1: f64,
        phi2: f64,
    },
    #[error("point ({x}, {y}) could not be attributed to any mesh triangle")]
    PointOutsideMesh { x: f64, y: f64 },
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("h_max must be positive, got {0}")]
    BadHMax(f64),
    #[error("grading must be >= 1, got {0}")]
    BadGrading(f64),
    #[error("refinement did not reach min angle {target_deg} deg within {inserted} insertions (worst {got_deg} deg); relax h_max or the angle floor")]
    QualityUnreachable {
        target_deg: f64,
        got_deg: f64,
        inserted: usize,
    },
    #[error("mesh conformity violated: {0}")]
    Conformity(String),
    #[error("mesh file parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum FemError {
    #[error("exponents must satisfy p > q >= 2, got p = {p}, q = {q}")]
    BadExponents { p: f64, q: f64 },
    #[error("field length {got} does not match mesh vertex count {expect}")]
    FieldSizeMismatch { got: usize, expect: usize },
    #[error("energy out of f64 range: (k^2+|grad|^2) = {base} with exponent {exponent}")]
    EnergyOutOfRange { base: f64, exponent: f64 },
    #[error("field evaluation produced a non-finite value at node {node} ({x}, {y})")]
    NonFiniteField { node: usize, x: f64, y: f64 },
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("infeasible constraint set: {0}")]
    Infeasible(String),
    #[error("probe field is not admissible: {0}")]
    ProbeInfeasible(String),
    #[error("iteration limit {max_iters} exceeded (kkt residual {kkt:.3e})")]
    MaxIters { max_iters: usize, kkt: f64 },
    #[error("penalty stagnation: gradient-cap violation {viol:.3e} stopped decreasing (tolerance {tol:.1e})")]
    PenaltyStagnation { viol: f64, tol: f64 },
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error("solver configuration invalid: {0}")]
    BadConfig(String),
}
