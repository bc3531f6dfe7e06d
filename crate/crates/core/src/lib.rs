//! Stage-aware credit assignment for segmented reasoning trajectories.
//!
//! A trajectory is a token stream with per-token entropies and a binary
//! outcome. The pipeline turns it into token-level advantages in four steps:
//!
//! 1. [`segmentation`] cuts the stream at high-entropy tokens into K stages.
//! 2. [`potential`] estimates a solvability score for each stage boundary,
//!    either from forced-completion rollouts or from logged values.
//! 3. [`shaping`] converts adjacent potentials into per-stage advantages with
//!    a length-discounted shaping term, next to plain outcome-minus-potential
//!    and group-relative baselines for comparison.
//! 4. [`redistribution`] spreads each stage advantage over its tokens with
//!    entropy-proportional weights.
//!
//! [`theory`] holds numerical checks for the bounds the shaping construction
//! promises (outcome consistency, sign of the shaping term, closed-form
//! sensitivities). [`simulator`] is a small chain MDP with a tabular softmax
//! policy used to exercise the estimators end to end. [`report`] computes the
//! gain-regression and gain-distribution summaries used for analysis.
//!
//! The crate is data-parallel over trajectories, fuzz trials, and episodes
//! when the `parallel` feature (default) is enabled; disabling it yields a
//! dependency-free sequential build that produces identical results.

pub mod config;
pub mod error;
pub(crate) mod exec;
pub mod io;
pub mod potential;
pub mod redistribution;
pub mod report;
pub mod score;
pub mod segmentation;
pub mod shaping;
pub mod simulator;
pub mod theory;
pub mod trajectory;

pub use config::ShapingConfig;
pub use error::Error;
pub use score::{score_batch, score_record, ScoreOptions};
pub use trajectory::{
    AdvantageSheet, Estimator, PotentialProfile, PotentialSource, SegmentPlan, TokenInfo,
    TrajectoryRecord,
};

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
