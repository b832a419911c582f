//! Mixed multiscale spectral generalized finite elements for Darcy flow.
//!
//! The crate solves `A^{-1} u - grad p = 0`, `div u = -f` with zero normal
//! flux on the unit square. A lowest-order Raviart–Thomas / piecewise-constant
//! discretization on a uniform grid is the fine scale; the multiscale method
//! builds local spectral velocity spaces on oversampled subdomains, derives
//! matching pressure and enrichment spaces, and glues everything with a
//! partition of unity into a small inf-sup stable coarse saddle-point system.
//!
//! Module map:
//!
//! * [`mesh`]: grid, cell regions, local numbering.
//! * [`fem`]: RT0/P0 forms, RT interpolation, discrete curl, loads.
//! * [`sparse`]: a compact CSR operator type.
//! * [`saddle`]: sparse saddle-point solves and dense generalized eigensolves.
//! * [`decomposition`]: overlapping subdomains and the partition of unity.
//! * [`local_basis`]: per-subdomain particular, spectral, pressure and
//!   enrichment functions.
//! * [`coarse`]: global multiscale spaces, coarse solve, errors, inf-sup.
//! * [`coefficient`]: permeability rasters, generators and source terms.
//! * [`pipeline`]: end-to-end runs and parameter sweeps.

pub mod coarse;
pub mod coefficient;
pub mod decomposition;
pub mod fem;
pub mod local_basis;
pub mod mesh;
pub mod pipeline;
pub mod saddle;
pub mod sparse;

pub use coarse::{CoarseSpaces, GfemSolution, RelativeErrors, SpaceFlags};
pub use coefficient::{RasterField, SourceField};
pub use decomposition::Decomposition;
pub use fem::{CoefficientField, PressureVector, StreamVector, VelocityVector};
pub use mesh::{CellRect, CellRegion, FineMesh, RegionDofs};
pub use pipeline::{ResultRow, RunConfig};
pub use saddle::PressureGauge;
pub use sparse::SparseOperator;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("incompatible data: compatibility defect {defect:e} exceeds tolerance {tolerance:e}")]
    Incompatible { defect: f64, tolerance: f64 },
    #[error("singular system: {0}")]
    Singular(String),
    #[error("eigensolver failure: {0}")]
    Eigen(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{phase}: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wraps the error with the name of the stage that produced it.
    pub fn in_phase(self, phase: &'static str) -> Error {
        Error::Phase { phase, source: Box::new(self) }
    }

    /// The error without phase labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Phase { source, .. } => source.root(),
            e => e,
        }
    }

    /// Bad configuration or input data, as opposed to a numerical failure.
    pub fn is_input_error(&self) -> bool {
        matches!(self.root(), Error::InvalidInput(_) | Error::Parse { .. } | Error::Io(_))
    }

    /// Outermost phase label, if any.
    pub fn phase(&self) -> Option<&'static str> {
        match self {
            Error::Phase { phase, .. } => Some(phase),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
