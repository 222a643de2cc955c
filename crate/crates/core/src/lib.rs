//! # cube-transport
//!
//! Transportation maps and entropy functionals for probability densities
//! supported on an axis-parallel cube, together with numerical checks of the
//! transport-cost, Poincaré, log-Sobolev and concentration inequalities that
//! such densities satisfy.
//!
//! Densities live on regular cell grids and are interpreted as piecewise
//! constant. Every integral is a cell sum, so one-dimensional CDFs are
//! piecewise linear and can be inverted exactly.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`density`] | grids, analytic families, the R / M / log-concavity estimators, marginals and fibers |
//! | [`transport1d`] | monotone rearrangement on an interval and the one-dimensional inequalities |
//! | [`knothe`] | recursive Knothe map, displacement cost, the S-integral and facet preservation |
//! | [`functionals`] | relative entropy, the Legendre upper bound, an exact small-instance W₂ solver |
//! | [`sampler`] | exact sampling from grid densities and the correlated-Gaussian counterexample |
//! | [`concentration`] | halfspace concentration profiles, Lipschitz tails, covariance, Poincaré/LSI |
//! | [`report`] | the pass/fail record shared by every check |
//! | [`suites`] | deterministic random families used by the verification suites |
//!
//! ## Quick start
//!
//! ```
//! use cube_transport::density::{build_density, DensitySpec, Grid};
//! use cube_transport::transport1d::{check_quadratic_transport, monotone_map};
//!
//! let grid = Grid::unit(1, 256).unwrap();
//! let f = build_density(&DensitySpec::Uniform, &grid).unwrap();
//! let g = build_density(
//!     &DensitySpec::ConvexPower { b: 0.0, v: vec![2.0], p: 1.0 },
//!     &grid,
//! )
//! .unwrap();
//!
//! let t = monotone_map(&f, &g).unwrap();
//! assert!((t.eval(0.25) - 0.5).abs() < 1e-3);
//!
//! let report = check_quadratic_transport(&f, &g, 1.0).unwrap();
//! assert!(report.pass);
//! ```

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use thiserror::Error;

pub mod concentration;
pub mod density;
pub mod functionals;
pub mod knothe;
pub mod report;
pub mod sampler;
pub mod suites;
pub mod transport1d;

mod numeric;

pub use report::{Tolerance, VerificationReport};

/// Errors raised by grid construction, transport and verification routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid density spec: {0}")]
    InvalidSpec(String),

    #[error("density has zero total mass")]
    DegenerateDensity,

    #[error("density must be positive: cell {index} has value {value}")]
    NonPositive { index: usize, value: f64 },

    #[error("negative or non-finite density value {value} at cell {index}")]
    InvalidValue { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operation requires {0}")]
    Dimension(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("densities live on different grids")]
    GridMismatch,

    #[error("interval must have length one, found {0}")]
    IntervalLength(f64),

    #[error("test function must vanish at both endpoints (found {left}, {right})")]
    NonzeroEndpoints { left: f64, right: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("problem size {size} exceeds the limit {limit}")]
    SizeLimit { size: usize, limit: usize },

    #[error("Legendre transform saturated (non-finite value)")]
    Saturated,

    #[error("rejection sampler acceptance rate {0:.4} is below 1%")]
    AcceptanceTooLow(f64),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("malformed data: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
