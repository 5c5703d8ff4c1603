//! Document encoders (AWE, sentence-averaging BiLSTM, HAN) and task heads.

mod checkpoint;
mod config;
mod layers;
mod model;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CheckpointHeader, ParamEntry,
    FORMAT_VERSION,
};
pub use config::{HeadKind, ModelConfig, ModelKind};
pub use layers::{AttentionPool, BiLstmLayer, BiLstmStates, LstmCell, Linear};
pub use model::{AttentionMap, DocTokens, ForwardOutput, Model, Prediction};
