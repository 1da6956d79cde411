//! Drug-drug interaction prediction from SMILES pairs.
//!
//! The pipeline: parse SMILES into molecular graphs, featurize atoms and
//! bonds into padded tensors, encode each drug with a shared
//! graph-convolutional stack, align the two encodings with per-layer
//! attentive pooling, and classify the pair with a small feed-forward head.
//! All numerics run on a reverse-mode tape in this crate; training,
//! evaluation metrics, and attention-based atom highlighting sit on top.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root pin the default 64-bit build used by the CLI.

pub mod attention;
pub mod data;
pub mod error;
pub mod explain;
pub mod featurize;
pub mod gcn;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod smiles;
pub mod tensor;
pub mod train;

pub use error::{
    DataError, Error, ExplainError, FeatureError, ModelError, ParseError, TensorError,
};
pub use scalar::Scalar;

/// Default-precision tensor.
pub type Tensor64 = tensor::Tensor<f64>;
/// Default-precision autodiff tape.
pub type Tape64<'p> = tensor::tape::Tape<'p, f64>;
/// Default-precision model weights.
pub type ModelParams64 = model::ModelParams<f64>;
/// Default-precision prediction.
pub type Prediction64 = model::Prediction<f64>;
/// Default-precision featurized drug.
pub type FeaturizedDrug64 = featurize::FeaturizedDrug<f64>;
