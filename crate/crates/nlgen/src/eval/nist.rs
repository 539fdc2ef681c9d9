//! Corpus-level NIST with multiple references.
//!
//! Information-weighted n-gram co-occurrence up to 5-grams. Each n-gram's
//! weight is derived from the pooled reference corpus,
//! `Info(w1..wn) = log2(count(w1..w_{n-1}) / count(w1..wn))`, with the total
//! reference word count as the unigram numerator. Matched hypothesis n-grams
//! (clipped per segment against the best single reference) contribute their
//! info; each order is normalized by the total hypothesis n-gram count and
//! the orders are summed arithmetically. The NIST brevity factor
//! `exp(beta * ln^2(min(L_sys/L_ref, 1)))` uses the average reference length
//! and is calibrated so the factor is 0.5 at a 2/3 length ratio.

use crate::error::{Error, Result};
use std::collections::HashMap;

pub const MAX_ORDER: usize = 5;

fn validate(hypotheses: &[Vec<String>], references: &[Vec<Vec<String>>]) -> Result<()> {
    if hypotheses.is_empty() {
        return Err(Error::EmptyInput("nist: hypothesis list"));
    }
    if hypotheses.len() != references.len() {
        return Err(Error::data(format!(
            "nist: {} hypotheses vs {} reference sets",
            hypotheses.len(),
            references.len()
        )));
    }
    if references.iter().any(|r| r.is_empty()) {
        return Err(Error::data("nist: empty reference set"));
    }
    Ok(())
}

fn counts_of(tokens: &[String], n: usize, into: &mut HashMap<Vec<String>, u64>) {
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *into.entry(window.to_vec()).or_insert(0) += 1;
        }
    }
}

pub fn nist(hypotheses: &[Vec<String>], references: &[Vec<Vec<String>>]) -> Result<f64> {
    validate(hypotheses, references)?;

    // pooled reference n-gram counts, orders 1..=5, for the info weights
    let mut pool: Vec<HashMap<Vec<String>, u64>> = vec![HashMap::new(); MAX_ORDER];
    let mut total_ref_words = 0u64;
    for refs in references {
        for r in refs {
            total_ref_words += r.len() as u64;
            for n in 1..=MAX_ORDER {
                counts_of(r, n, &mut pool[n - 1]);
            }
        }
    }
    if total_ref_words == 0 {
        return Err(Error::data("nist: references contain no tokens"));
    }

    let info = |ngram: &[String]| -> Option<f64> {
        let n = ngram.len();
        let denom = *pool[n - 1].get(ngram)?;
        let numer = if n == 1 {
            total_ref_words
        } else {
            pool[n - 2].get(&ngram[..n - 1]).copied().unwrap_or(0)
        };
        if numer == 0 || denom == 0 {
            return None;
        }
        Some((numer as f64 / denom as f64).log2())
    };

    let mut weighted = [0.0f64; MAX_ORDER];
    let mut totals = [0u64; MAX_ORDER];
    let mut sys_len = 0u64;
    let mut avg_ref_len = 0.0f64;

    for (hyp, refs) in hypotheses.iter().zip(references) {
        sys_len += hyp.len() as u64;
        avg_ref_len += refs.iter().map(|r| r.len() as f64).sum::<f64>() / refs.len() as f64;

        for n in 1..=MAX_ORDER {
            totals[n - 1] += hyp.len().saturating_sub(n - 1) as u64;
            let mut hyp_counts: HashMap<Vec<String>, u64> = HashMap::new();
            counts_of(hyp, n, &mut hyp_counts);
            let mut ref_counts: Vec<HashMap<Vec<String>, u64>> = Vec::with_capacity(refs.len());
            for r in refs {
                let mut c = HashMap::new();
                counts_of(r, n, &mut c);
                ref_counts.push(c);
            }
            for (ngram, &count) in &hyp_counts {
                let max_ref = ref_counts
                    .iter()
                    .map(|rc| rc.get(ngram).copied().unwrap_or(0))
                    .max()
                    .unwrap_or(0);
                let matched = count.min(max_ref);
                if matched > 0 {
                    if let Some(w) = info(ngram) {
                        weighted[n - 1] += matched as f64 * w;
                    }
                }
            }
        }
    }

    let mut score = 0.0;
    for n in 0..MAX_ORDER {
        if totals[n] > 0 {
            score += weighted[n] / totals[n] as f64;
        }
    }

    let brevity = if sys_len == 0 {
        0.0
    } else {
        let beta = 0.5f64.ln() / (2.0f64 / 3.0).ln().powi(2);
        let ratio = (sys_len as f64 / avg_ref_len).min(1.0);
        (beta * ratio.ln().powi(2)).exp()
    };

    Ok(score * brevity)
}
