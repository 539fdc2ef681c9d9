//! A trainable natural language generator for spoken dialogue systems.
//!
//! The generator converts dialogue acts (`inform(name=X-name, food=French, ...)`)
//! into natural language. It can run in two modes: direct generation into
//! sentence strings, or two-step generation into deep syntax dependency trees
//! which a small rule-based realizer then linearizes. Both modes share the same
//! machinery: an attention LSTM encoder-decoder trained with Adam, beam search
//! decoding, and an RNN classifier that reranks n-best lists by penalizing
//! content mismatch with the input dialogue act.
//!
//! The crate also ships the full evaluation harness needed to compare the two
//! modes: multi-reference BLEU and NIST, an automatic slot-error counter, and
//! paired bootstrap resampling for significance testing, plus a synthetic
//! restaurant-domain corpus generator and a cross-validation experiment runner.

pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod generator;
pub mod nn;
pub mod realizer;
pub mod reranker;
pub mod rng;

pub use error::{Error, Result};
