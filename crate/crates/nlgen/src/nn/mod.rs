//! Minimal dense numeric layer: tensors, LSTM cell, activations, losses,
//! reverse-mode gradients, and the Adam optimizer.
//!
//! All kernel operations are pure functions of their inputs; parameter
//! containers are plain data, safe to share across threads once training
//! releases them. Gradient correctness is verifiable against central finite
//! differences (see the tape tests and the acceptance suite).

pub mod adam;
pub mod lstm;
pub mod ops;
pub mod tape;
pub mod tensor;

pub use adam::AdamState;
pub use lstm::{lstm_step, LstmCellParams};
pub use ops::{cross_entropy, sigmoid, softmax, tanh};
pub use tape::{GradientTape, Gradients, TapedLstmCell, Var};
pub use tensor::Tensor;
