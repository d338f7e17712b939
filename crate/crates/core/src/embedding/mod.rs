//! Graph featurization and the message-passing encoder.

mod encoder;
mod features;
mod tensor;

pub use encoder::{
    aggregate_zones, encode, encode_backward, encode_with_cache, Embedding, EmbeddingError, EncoderCache, EncoderLayer, EncoderParams,
    GraphInput,
};
pub use features::{featurize_application, featurize_resources, FeatureScale, APP_FEATURES, RES_FEATURES};
pub use tensor::{Matrix, Parameters};

/// Hidden and output width of every encoder.
pub const EMBED_DIM: usize = 16;
/// Message-passing layers per encoder.
pub const ENCODER_LAYERS: usize = 2;
