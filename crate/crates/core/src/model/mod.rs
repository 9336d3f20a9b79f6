//! SimMLP architecture, the GCN baseline and checkpoints.

mod checkpoint;
mod gcn;
mod mlp;
mod simmlp;

pub use checkpoint::{Checkpoint, SavedModel, VERSION as CHECKPOINT_VERSION};
pub use gcn::{GcnBaseline, GcnCache};
pub use mlp::{Mlp, MlpCache};
pub use simmlp::{SimMlp, SimMlpDims, SimMlpOutputs};
