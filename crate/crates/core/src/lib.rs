//! Decomposition pooling: a four-kernel stride-2 analysis transform with a
//! minimum-norm synthesis inverse, infrared/visible fusion built on it, a
//! forward-only encoder/decoder network, and fusion quality metrics.

pub mod color;
pub mod corpus;
pub mod depool;
pub mod error;
pub mod exec;
pub mod fusion;
pub mod metrics;
pub mod network;
pub mod pnm;
pub mod tensor;

pub use error::{Error, Result};
pub use exec::Execution;
pub use tensor::{FeatureMap, Field, RgbImage};
