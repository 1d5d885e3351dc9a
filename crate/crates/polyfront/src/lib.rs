//! Front tracking for a 3x3 system of conservation laws modeling polymer
//! flooding in two-phase porous-media flow with piecewise-constant
//! permeability.
//!
//! The state is `(s, c, k)`: water saturation, polymer fraction and rock
//! permeability. The library builds piecewise-linear approximations of the
//! Buckley-Leverett flux on value grids derived from the level sets of
//! `g = f/s`, solves the three elementary Riemann problems (entropic scalar
//! fan, minimum-jump polymer wave, stationary permeability wave), and runs
//! an event-driven interaction loop producing exact weak solutions of the
//! approximate equations. Auditors measure per-front entropy production and
//! weak residuals so that the qualitative convergence behaviour can be
//! checked numerically.

pub mod entropy;
pub mod flux;
pub mod grid;
pub mod harness;
pub mod par;
pub mod riemann;
pub mod tracker;
mod util;

pub use flux::{BumpedCorey, Corey, Curve, FluxFamily, FluxModel, State};
pub use grid::{build_l, GridSystem, RegionFlux, ValueGrid};
pub use riemann::{Front, FrontKind, WaveFan};
pub use tracker::{discretize_initial, DiscretizedData, Simulation};

/// Library-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument fell outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Invalid run configuration.
    #[error("config error: {0}")]
    Config(String),
    /// A registered flux family violates the structural conditions.
    #[error("flux model violation: {0}")]
    ModelViolation(String),
    /// The event-count safeguard tripped before the time horizon.
    #[error("safeguard abort: event cap of {0} exceeded")]
    SafeguardAbort(u64),
    /// A runtime invariant of the algorithm failed.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    /// A query referred to a time or region outside the recorded history.
    #[error("history error: {0}")]
    History(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command line interface.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Config(_) => 2,
            Error::SafeguardAbort(_) => 3,
            Error::ModelViolation(_) | Error::InvariantViolation(_) | Error::History(_) => 4,
            Error::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
