//! Multi-scale temporal convolution network for classroom voice detection:
//! tensor math with reverse-mode differentiation, the network itself, a
//! room-acoustics scene simulator, training/evaluation and sliding-window
//! inference.

mod error;

pub mod io;
pub mod model;
pub mod sim;
pub mod stream;
pub mod tensorcore;
pub mod train;

pub use error::{Error, Result};
pub use model::{Category, Checkpoint, ModelConfig, Mstcn};
pub use tensorcore::Tensor;
