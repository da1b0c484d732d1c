pub mod cli;
pub mod dataio;
pub mod error;
pub mod graph;
pub mod model;
pub mod seq2seq;
pub mod stblock;
pub mod tensor;
pub mod train_eval;

pub use error::{Error, Result};
pub use model::{ModelConfig, StLstm};
pub use tensor::{Tape, Tensor, Var};
