//! Numeric tolerances shared by every solver and check in the crate.
//!
//! Tests pin their thresholds against these constants so that a change of
//! policy shows up as a single diff.

/// Newton residual target for `ψ'(τ) = target`, relative to `max(1, |target|)`.
pub const NEWTON_RESIDUAL: f64 = 1e-11;

/// Residual target for the bivariate gradient equation.
pub const NEWTON2_RESIDUAL: f64 = 1e-11;

/// Iteration cap for every Newton-type solve.
pub const MAX_ITERATIONS: usize = 200;

/// Sweep cap for the coordinate-wise fallback of the bivariate solve.
pub const MAX_COORDINATE_SWEEPS: usize = 20_000;

/// Base step of central finite differences.
pub const FD_STEP: f64 = 1e-5;

/// Default tail-mass bound used when a closed-form family is materialized.
pub const DEFAULT_TRUNCATION: f64 = 1e-300;

/// Probabilities under this floor are dropped and booked as truncation mass.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

/// Total mass tolerance of user-supplied finite tables.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Once `x·τ − ψ(τ)` exceeds this along an approach to the domain edge the
/// conjugate is declared infinite.
pub const CONJUGATE_CAP: f64 = 1e8;

/// Bracket growth stops once `|τ|` passes this bound.
pub const TAU_CAP: f64 = 4096.0;

/// Minimum trapezoid node count of the Fourier inversions.
pub const MIN_QUADRATURE_NODES: usize = 4096;

/// Successive node doublings must agree to this relative tolerance.
pub const QUADRATURE_AGREEMENT: f64 = 1e-12;

/// Largest node count tried before giving up.
pub const MAX_QUADRATURE_NODES: usize = 1 << 22;

/// Imaginary residue (relative to the real part) tolerated in a Fourier ratio.
pub const IMAGINARY_RESIDUE: f64 = 1e-9;

/// Residual variances at or below this value count as degenerate.
pub const DEGENERATE_RESIDUAL: f64 = 1e-14;

/// Default DP state budget, `(k + 1) · (mark states)`.
pub const DEFAULT_STATE_BUDGET: usize = 8_000_000;

/// Default number of points of a rate-curve grid.
pub const DEFAULT_GRID_POINTS: usize = 201;

/// Grid inset from the mark hull, as a fraction of the hull width.
pub const GRID_INSET: f64 = 1e-3;

/// Curvature stencil step, as a fraction of the hull width.
pub const CURVATURE_STEP: f64 = 1e-3;
