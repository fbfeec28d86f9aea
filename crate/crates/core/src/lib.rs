//! Search session simulation: a cognitive user model driving a synthetic
//! search site through a declarative interface layer, with traditional
//! click and query simulators, orchestration policies, replayable traces
//! and evaluation against logged sessions.
//!
//! The numeric kernels are generic over [`num::Scalar`]; the aliases below
//! fix the two usual precisions.

pub mod agent;
pub mod env;
pub mod eval;
pub mod iface;
pub mod logs;
pub mod model;
pub mod num;
pub mod policy;
pub mod sim;
pub mod simulators;
pub mod text;

pub use num::Scalar;

pub type ClickParams = simulators::ClickModelParams<f64>;
pub type ClickParams32 = simulators::ClickModelParams<f32>;
pub type FittedModel = simulators::FittedClickModel<f64>;
pub type FittedModel32 = simulators::FittedClickModel<f32>;
pub type Bm25 = env::Bm25Params<f64>;
pub type Bm25F32 = env::Bm25Params<f32>;
