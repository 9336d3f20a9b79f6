//! Dense tensors, differentiable layers, AdamW and a finite-difference oracle.

mod gradcheck;
mod layers;
mod losses;
mod optim;
mod scalar;
mod tensor;

pub use gradcheck::{finite_diff_check, FdOptions, FdReport};
pub use layers::{
    glorot_bound, prelu, BatchNorm, BatchNormCache, LinearLayer, Mode, Module, ParamMut, PRelu,
};
pub(crate) use layers::join;
pub use losses::{cross_entropy, kl_distill, softmax_rows};
pub use optim::AdamW;
pub use scalar::Scalar;
pub use tensor::Tensor;
