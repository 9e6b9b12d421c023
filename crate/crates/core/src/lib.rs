//! # mdeflow
//!
//! Particle schemes and weak-form verification for measure-valued flow
//! equations on flat space `R^n`.
//!
//! A state here is a probability measure represented as a weighted particle
//! cloud ([`measure::EmpiricalMeasure`]). Its velocity is a weighted finite
//! ensemble of vector fields ([`ensemble::FieldEnsemble`]), assigned per state
//! by an [`ensemble::EnsembleMap`]. The induced dynamics are the degenerate
//! parabolic flow
//!
//! ```text
//! ∫ φ dμ(s) − ∫ φ dμ(0) = ∫₀ˢ ∫ G_{μ(t)} φ dμ(t) dt      for all φ ∈ C_c^∞,
//! ```
//!
//! where `G_μ φ = ∫ ½ L²_{X−m}(φ) dV[μ](X) + ∇φ·m` is the second-order
//! generator built from the ensemble `V[μ]` and its mean field `m`. The
//! [`scheme`] module approximates solution curves by an explicit splitting
//! scheme: each step applies a *dispersion* step (mixture of flows of the
//! centered fields over time `√τ`) followed by a *drift* step (flow of the
//! mean field over `τ`). The [`residual`] module certifies candidate curves
//! by evaluating the weak-form residual against a battery of compactly
//! supported test functions.
//!
//! ## Modules
//!
//! - [`measure`] — weighted particle clouds: moments, pushforward, mixtures,
//!   deterministic resampling, CSV/JSON file formats
//! - [`transport`] — p-Wasserstein distances (exact 1-D, optimal assignment,
//!   entropic/Sinkhorn with a certified gap bound), Kantorovich duality lower
//!   bounds, sup-distance between curves
//! - [`fields`] — vector fields with analytic derivatives, RK4 flows, Lie
//!   derivatives on test functions, `W^{2,∞}` norm estimation, and the
//!   standard compactly supported test battery
//! - [`ensemble`] — weighted ensembles of vector fields: mean field,
//!   centering, symmetrisation, generator coefficients, ellipticity,
//!   elliptic regularization
//! - [`scheme`] — partitions, drift/dispersion steps, the splitting scheme
//!   and its time-frozen (linear) variant, convergence studies
//! - [`residual`] — weak-form residual reports for candidate solution curves
//! - [`scenarios`] — canonical scenario constructors with closed-form
//!   reference curves (1-D random walk limit, drifted variant, isotropic 2-D
//!   diffusion, the classical central-limit construction, and a
//!   covariance-driven pair of distinct solutions from one initial value)
//! - [`cli`] — reproducible command implementations behind the `mdeflow`
//!   binary (`simulate`, `verify`, `converge`, `distance`)
//!
//! ## Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --release --example random_walk_limit     # scheme vs N(0,t), convergence across levels
//! cargo run --release --example isotropic_diffusion   # 2-D isotropic diffusion from three unit fields
//! cargo run --release --example classical_clt         # normalized iid sums as a single scheme run
//! cargo run --release --example transport_methods     # exact / assignment / Sinkhorn cross-checks
//! cargo run --release --example flow_operators        # drift & dispersion step estimates, generator identities
//! cargo run --release --example residual_check        # weak-form residual of an exact heat curve
//! cargo run --release --example nonuniqueness         # two verified distinct solutions, same initial value
//! ```
//!
//! The CLI mirrors the same functionality for file-based pipelines; see the
//! README for the config format.

pub mod cli;
pub mod ensemble;
pub mod fields;
pub mod measure;
pub mod residual;
pub mod scenarios;
pub mod scheme;
pub mod transport;

use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Vector or measure dimensions disagree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Weight vector violates nonnegativity or normalization.
    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    /// A coordinate or evaluation produced NaN/Inf.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Argument outside the documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Curve time grids differ where identical grids are required.
    #[error("time grid mismatch: {0}")]
    GridMismatch(String),

    /// Requested time is not a node of the curve.
    #[error("time {0} is not a node of the curve")]
    NotANode(f64),

    /// Assignment solver needs equal particle counts.
    #[error("assignment requires equal particle counts: {left} vs {right}")]
    UnequalCounts { left: usize, right: usize },

    /// Assignment solver needs equal-weight clouds.
    #[error("assignment requires equal-weight clouds")]
    UnequalWeights,

    /// Sinkhorn failed to reach the marginal tolerance.
    #[error("Sinkhorn did not converge in {iterations} iterations (L1 marginal violation {marginal_violation:.3e})")]
    SinkhornDiverged {
        iterations: usize,
        marginal_violation: f64,
    },

    /// An integrated trajectory left the overflow guard region.
    #[error("flow trajectory exceeded overflow guard (|y| > {0:.1e})")]
    FlowOverflow(f64),

    /// File I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// TOML parse failure.
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),

    /// Malformed cloud/curve file.
    #[error("file format error: {0}")]
    FileFormat(String),
}

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
