//! Evaluation harness: BLEU, NIST, automatic slot-error counting, and
//! paired bootstrap significance testing. All metrics are pure functions,
//! deterministic and permutation-invariant over corpus instance order.

pub mod bleu;
pub mod bootstrap;
pub mod nist;
pub mod slots;

pub use bleu::{bleu, bleu_detail, BleuDetail};
pub use bootstrap::{paired_bootstrap, Metric};
pub use nist::nist;
pub use slots::{slot_errors, GeneratedOutput, LexiconEntry, SlotErrors, SlotPatternLexicon};

use serde::{Deserialize, Serialize};

/// Aggregate scores for one decoding setup.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub setup: String,
    pub bleu: f64,
    pub nist: f64,
    pub slot_errors: SlotErrors,
    pub instances: usize,
}
