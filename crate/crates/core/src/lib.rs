//! Walk-based multi-hop reasoning over incomplete knowledge graphs.
//!
//! A REINFORCE agent learns to answer `(source, relation, ?)` queries by
//! walking a sparse graph. Terminal rewards are either binary (did the walk
//! end on a known answer?) or shaped by an embedding model trained on a
//! richer graph, or by an externally computed score table.
//!
//! Trainable models are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the double-precision types used by the pipeline.

pub mod env;
pub mod error;
pub mod eval;
pub mod kg;
pub mod linalg;
pub mod policy;
pub mod rng;
pub mod scalar;
pub mod shaper;
pub mod split;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision embedding shaper.
pub type Shaper = shaper::ShaperModel<f64>;
/// Single-precision embedding shaper, for scoring only.
pub type ShaperF32 = shaper::ShaperModel<f32>;
/// Double-precision walk policy.
pub type Policy = policy::PolicyParams<f64>;
pub type PolicyF32 = policy::PolicyParams<f32>;
/// Double-precision REINFORCE training state.
pub type AgentState = policy::TrainState<f64>;
