//! Complex-valued optical and quantum-optical network simulation.
//!
//! Networks act on row vectors of complex amplitudes (`y = x·M`). Images are
//! fold-encoded into 392 complex values, passed through complex linear
//! layers, structured "quantum convolution" matrices, split max pooling and
//! modulus-based nonlinearities, and read out as log-probabilities.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod io;
pub mod layers;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod resources;
pub mod svd;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use data::{fold_encode, Dataset, FoldedInput, RawImage, Split, FOLDED_LEN, NUM_CLASSES};
pub use error::{Error, Result};
pub use eval::{evaluate, EvalReport};
pub use gradcheck::{grad_check, GradcheckOptions, GradcheckReport};
pub use layers::{build_conv_plan, Activation, ConvPlan, Layer, LayerKind, LayerSpec};
pub use linalg::{ComplexMatrix, ComplexVector, RealMatrix};
pub use metrics::{ConfusionMatrix, RocCurve};
pub use model::{ArchConfig, Architecture, ModelGraph};
pub use resources::{estimate, ResourceReport, WorkloadSpec};
pub use svd::{amplification_normalize, svd, SvdFactors};
pub use train::{train, Gradients, OptimizerKind, TrainConfig, TrainHistory};
