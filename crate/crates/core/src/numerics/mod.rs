//! Minimal dense numerics shared by every other module.

mod adam;
mod linalg;
pub(crate) mod loss;
mod mlp;
mod rng;

pub use adam::{Adam, AdamConfig};
pub use linalg::Matrix;
pub(crate) use linalg::{dot, gemm_acc, gemm_at_b_acc};
pub use loss::{cross_entropy, log_softmax, softmax};
pub use mlp::{
    backward_batch, forward_batch, mlp_forward, mlp_grad, MlpParams, MlpShape, MlpTrace,
};
pub use rng::Rng;
