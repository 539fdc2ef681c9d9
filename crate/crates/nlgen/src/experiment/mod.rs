//! Experiment orchestration: corpus synthesis, cross-validation, training,
//! decoding setups, evaluation, and reports.

pub mod synth;

pub use synth::{synthesize_corpus, Grammar};
