//! Exact simulation and verification toolkit for a pair of run-and-tumble
//! particles with jamming interactions.
//!
//! The crate covers four process families over the inter-particle
//! separation:
//!
//! * `DITP` / `DFTP` — lattice Markov jump processes on `{1..L} x Sigma`
//!   with jamming at the ends ([`lattice`]),
//! * `CITP` / `CFTP` — their continuous-space limits, piecewise
//!   deterministic Markov processes on `[0, ell] x Sigma` ([`pdmp`]),
//!
//! plus the closed-form invariant measures and transport distances
//! ([`measures`], [`transport`]), the discrete-continuous,
//! discrete-discrete and continuous-continuous couplings with their
//! convergence and mixing harnesses ([`coupling`]), and closed-form
//! hitting-time oracles with Monte Carlo cross-validators ([`hitting`]).
//!
//! Everything is event-driven and exact: trajectories are piecewise
//! linear with closed-form clamp times, occupation statistics come from
//! holding times, and every stochastic object draws from an explicit
//! seeded stream ([`rng`]).

pub mod acceptance;
pub mod coupling;
pub mod hitting;
pub mod lattice;
pub mod measures;
pub mod pdmp;
pub mod rng;
pub mod transport;
pub mod velocity;

pub use pdmp::{ContParams, ContState, StateClass};
pub use velocity::{TumbleKind, VelocityPair, VelocityPath};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parameter out of range: {0}")]
    InvalidParameter(String),
    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },
    #[error("lattice site {k} outside 1..={l_sites}")]
    SiteOutOfRange { k: i64, l_sites: usize },
    #[error("stationary solve residual {residual:.3e} above tolerance {tol:.3e}")]
    SingularSolve { residual: f64, tol: f64 },
    #[error("measure is not normalized (total mass {0})")]
    Unnormalized(f64),
    #[error("measures carry different total mass: {0} vs {1}")]
    MassMismatch(f64, f64),
    #[error("discretizations do not match: {0}")]
    DiscretizationMismatch(String),
    #[error("MGF argument {lambda} at or beyond pole {pole}")]
    BeyondPole { lambda: f64, pole: f64 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
