//! Coarse-grained subsystem spectra and branch-history dynamics.
//!
//! The crate is organized around the pipeline
//!
//! * [`linalg`] - bipartite states, reduced density matrices, Hermitian
//!   eigendecomposition with a deterministic ordering/phase convention, and
//!   the Schmidt decomposition;
//! * [`lattice`] - particle states sampled on a spatial lattice, the Gaussian
//!   decoherence kernel and its localization transition, and a spin-bath
//!   environment model;
//! * [`pointer`] - measurement devices described purely by the Gram matrix of
//!   their pointer states, avoided-crossing spectra and block-split density
//!   matrices;
//! * [`engine`] - branch matching across coarse time steps, one-way transition
//!   kernels and reproducible Monte Carlo trajectory sampling;
//! * [`decay`] - the closed-form decay ladder and the Geiger-counter ensemble;
//! * [`oracles`] - exact spectra (square well, Gaussian packet) used as ground
//!   truth for the numerical pipeline.

pub mod decay;
pub mod engine;
pub mod lattice;
pub mod linalg;
pub mod oracles;
pub mod pointer;

use thiserror::Error;

/// Errors shared across the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("state is not normalized: |norm - 1| = {deviation:.3e} exceeds {tolerance:.1e}")]
    NotNormalized { deviation: f64, tolerance: f64 },

    #[error("matrix is not Hermitian: max |a_ij - conj(a_ji)| = {deviation:.3e}")]
    NotHermitian { deviation: f64 },

    #[error("trace deviates from 1 by {deviation:.3e}")]
    BadTrace { deviation: f64 },

    #[error("matrix is not unitary: max deviation {deviation:.3e}")]
    NotUnitary { deviation: f64 },

    #[error("Gram matrix is indefinite: residual pivot {value:.3e} at index {index}")]
    IndefiniteGram { index: usize, value: f64 },

    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("dimension mismatch: {message}")]
    DimensionMismatch { message: String },

    #[error(
        "Schmidt spectrum degenerate at t = {time}: gap {gap:.3e} below tolerance {tolerance:.1e}; \
         use the discrete-time engine across this region"
    )]
    DegenerateSpectrum { time: f64, gap: f64, tolerance: f64 },

    #[error("branch matching failed: {message}")]
    MatchingFailed { message: String },

    #[error(
        "infeasible step at index {step}: diagonal entry p_{branch}{branch} = {value:.3e} < 0; \
         halve the step size or enable the clamping repair"
    )]
    InfeasibleStep { step: usize, branch: usize, value: f64 },

    #[error("transition rate undefined: p_{index} = 0 with incoming flow {flow:.3e}")]
    UndefinedRate { index: usize, flow: f64 },

    #[error("oracle cutoff too small: tail mass {tail:.3e} above 1e-10; use n_max >= {suggested}")]
    OracleCutoff { tail: f64, suggested: usize },

    #[error("normalization deficit {deficit:.3e} outside the validity regime")]
    ValidityRegime { deficit: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
