//! Corpus-level BLEU with multiple references.
//!
//! Modified n-gram precision up to 4-grams, clipped per hypothesis against
//! the maximum count in any single reference, geometric mean, and a
//! multiplicative brevity penalty using the closest-length reference (ties
//! going to the shorter one). No smoothing: a corpus with no matched 4-gram
//! scores 0, matching the original definition. Scores are scaled to [0, 100].

use crate::error::{Error, Result};
use std::collections::HashMap;

pub const MAX_ORDER: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct BleuDetail {
    pub precisions: [f64; MAX_ORDER],
    pub matched: [u64; MAX_ORDER],
    pub total: [u64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hypothesis_length: u64,
    pub reference_length: u64,
    pub score: f64,
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts: HashMap<&[String], u64> = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

fn validate(hypotheses: &[Vec<String>], references: &[Vec<Vec<String>>]) -> Result<()> {
    if hypotheses.is_empty() {
        return Err(Error::EmptyInput("bleu: hypothesis list"));
    }
    if hypotheses.len() != references.len() {
        return Err(Error::data(format!(
            "bleu: {} hypotheses vs {} reference sets",
            hypotheses.len(),
            references.len()
        )));
    }
    if references.iter().any(|r| r.is_empty()) {
        return Err(Error::data("bleu: empty reference set"));
    }
    Ok(())
}

/// Closest reference length to `hyp_len`; ties broken toward the shorter.
fn closest_ref_len(refs: &[Vec<String>], hyp_len: usize) -> usize {
    refs.iter()
        .map(|r| r.len())
        .min_by_key(|&len| {
            let diff = len.abs_diff(hyp_len);
            (diff, len)
        })
        .expect("non-empty reference set")
}

/// Corpus BLEU in [0, 100].
pub fn bleu(hypotheses: &[Vec<String>], references: &[Vec<Vec<String>>]) -> Result<f64> {
    Ok(bleu_detail(hypotheses, references)?.score)
}

/// Corpus BLEU with per-order precisions and the brevity penalty exposed.
pub fn bleu_detail(
    hypotheses: &[Vec<String>],
    references: &[Vec<Vec<String>>],
) -> Result<BleuDetail> {
    validate(hypotheses, references)?;

    let mut matched = [0u64; MAX_ORDER];
    let mut total = [0u64; MAX_ORDER];
    let mut hyp_len = 0u64;
    let mut ref_len = 0u64;

    for (hyp, refs) in hypotheses.iter().zip(references) {
        hyp_len += hyp.len() as u64;
        ref_len += closest_ref_len(refs, hyp.len()) as u64;
        for n in 1..=MAX_ORDER {
            let hyp_counts = ngram_counts(hyp, n);
            let ref_counts: Vec<HashMap<&[String], u64>> =
                refs.iter().map(|r| ngram_counts(r, n)).collect();
            for (ngram, &count) in &hyp_counts {
                let max_ref = ref_counts
                    .iter()
                    .map(|rc| rc.get(ngram).copied().unwrap_or(0))
                    .max()
                    .unwrap_or(0);
                matched[n - 1] += count.min(max_ref);
            }
            total[n - 1] += hyp.len().saturating_sub(n - 1) as u64;
        }
    }

    let mut precisions = [0.0; MAX_ORDER];
    for n in 0..MAX_ORDER {
        precisions[n] = if total[n] > 0 {
            matched[n] as f64 / total[n] as f64
        } else {
            0.0
        };
    }

    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };

    let score = if precisions.iter().any(|&p| p == 0.0) {
        0.0
    } else {
        let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64;
        brevity_penalty * log_mean.exp() * 100.0
    };

    Ok(BleuDetail {
        precisions,
        matched,
        total,
        brevity_penalty,
        hypothesis_length: hyp_len,
        reference_length: ref_len,
        score,
    })
}
