//! Minimal differentiable compute for small point-cloud models.
//!
//! There is no autograd graph. Every layer returns an explicit cache from its
//! forward pass and consumes it in `backward`, accumulating parameter
//! gradients into a structure of the same type as the model. Models expose
//! their tensors through [`Parameterized`], which is what [`Adam`],
//! [`grad_check`] and the checkpoint format operate on.

mod adam;
mod checkpoint;
mod error;
mod gradcheck;
mod mlp;
mod ops;
mod params;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use error::{NnError, Result};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport, TensorCheck};
pub use mlp::{Activation, Linear, MlpCache, MlpStack, LEAKY_SLOPE};
pub use ops::{max_pool_backward, max_pool_points, softmax_xent, PoolCache};
pub use params::{load_params, prefixed, prefixed_mut, Parameterized};
pub use tensor::Tensor;
