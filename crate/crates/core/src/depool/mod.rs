//! Four-kernel stride-2 decomposition pooling and its inverse.

mod banded;
pub mod bank;
pub mod dump;
pub mod maxpool;
pub mod operator;
pub mod pyramid;
pub mod synthesis;
pub mod transform;

pub use bank::{BankKind, KernelBank, Subband};
pub use maxpool::{maxpool_forward, maxpool_round_trip, nearest_upsample};
pub use operator::{build_operator_matrix, OPERATOR_MAX_SIDE};
pub use pyramid::{
    crop, pad_to_even, pyramid_decompose, pyramid_decompose_with, pyramid_reconstruct, pyramid_reconstruct_with, DetailStash,
    PyramidDecomposition, PyramidOptions,
};
pub use synthesis::{depool_inverse, depool_inverse_with, global_cache, SynthesisCache, SynthesisPlan};
pub use transform::{depool_adjoint, depool_forward, SubbandSet};
