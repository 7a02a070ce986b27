//! Next-occupation recommendation by late fusion of three score branches.
//!
//! The crate covers the whole offline workflow:
//!
//! * [`benchmark`]: ingest career histories and occupation metadata, filter,
//!   draw chronological splits and freeze a digest-verified package.
//! * [`transitions`]: training-prefix statistics shared by every scorer.
//! * [`cf`], [`rl`], [`topsis`]: the collaborative, family-bandit and
//!   multi-criteria branches.
//! * [`fusion`]: convex score fusion and validation-driven weight selection.
//! * [`baselines`]: popularity, repeat-last, item Markov, NMF and SVD.
//! * [`metrics`], [`stats`], [`experiment`], [`report`]: ranking metrics,
//!   exact paired statistics and the repeated-split driver.
//! * [`synth`]: deterministic synthetic benchmark packages.
//!
//! The numerical modules are generic over [`Scalar`] (`f32` or `f64`). The
//! experiment driver runs in `f64`; the aliases below name the concrete types
//! it uses.

pub mod baselines;
pub mod benchmark;
pub mod cf;
pub mod config;
pub mod error;
pub mod experiment;
pub mod fusion;
pub mod metrics;
pub mod report;
pub mod rl;
pub mod scalar;
pub mod stats;
pub mod synth;
pub mod text;
pub mod topsis;
pub mod transitions;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Transition statistics in double precision.
pub type Transitions = transitions::TransitionModel<f64>;
/// Family value table in double precision.
pub type ValueTable = rl::FamilyValueTable<f64>;
/// Criterion matrix in double precision.
pub type Criteria = topsis::CriterionMatrix<f64>;
/// Fusion weights in double precision.
pub type Weights = fusion::FusionWeights<f64>;
/// Factor model in double precision.
pub type Factors = baselines::FactorModel<f64>;
/// Single-precision transition statistics.
pub type TransitionsF32 = transitions::TransitionModel<f32>;
/// Single-precision criterion matrix.
pub type CriteriaF32 = topsis::CriterionMatrix<f32>;
