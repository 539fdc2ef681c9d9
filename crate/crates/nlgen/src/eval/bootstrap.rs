//! Paired bootstrap resampling for metric significance.

use crate::error::{Error, Result};
use crate::eval::{bleu, nist};
use crate::rng::DetRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    Bleu,
    Nist,
}

impl Metric {
    pub fn score(&self, hyps: &[Vec<String>], refs: &[Vec<Vec<String>>]) -> Result<f64> {
        match self {
            Metric::Bleu => bleu(hyps, refs),
            Metric::Nist => nist(hyps, refs),
        }
    }
}

/// Paired bootstrap test of system B against system A.
///
/// Resamples instance indices with replacement (the same indices for both
/// systems), scores each resample with `metric`, and returns the fraction of
/// resamples where B does not beat A; ties contribute 0.5. Small p means B is
/// reliably better. Deterministic under `seed`: each iteration draws from its
/// own derived substream, so the result is independent of parallel scheduling.
pub fn paired_bootstrap(
    outputs_a: &[Vec<String>],
    outputs_b: &[Vec<String>],
    references: &[Vec<Vec<String>>],
    metric: Metric,
    iterations: usize,
    seed: u64,
) -> Result<f64> {
    let n = outputs_a.len();
    if n == 0 {
        return Err(Error::EmptyInput("paired_bootstrap"));
    }
    if outputs_b.len() != n || references.len() != n {
        return Err(Error::data(format!(
            "paired_bootstrap: misaligned lists ({} vs {} vs {})",
            n,
            outputs_b.len(),
            references.len()
        )));
    }
    if iterations < 1000 {
        return Err(Error::data(
            "paired_bootstrap: at least 1000 iterations required",
        ));
    }

    let b_wins: f64 = (0..iterations)
        .into_par_iter()
        .map(|iter| {
            let mut rng = DetRng::derived(seed, &format!("bootstrap/{iter}"));
            let mut sample_a = Vec::with_capacity(n);
            let mut sample_b = Vec::with_capacity(n);
            let mut sample_r = Vec::with_capacity(n);
            for _ in 0..n {
                let idx = rng.below(n);
                sample_a.push(outputs_a[idx].clone());
                sample_b.push(outputs_b[idx].clone());
                sample_r.push(references[idx].clone());
            }
            let score_a = metric.score(&sample_a, &sample_r).unwrap_or(f64::NAN);
            let score_b = metric.score(&sample_b, &sample_r).unwrap_or(f64::NAN);
            if score_b > score_a {
                1.0
            } else if score_b == score_a {
                0.5
            } else {
                0.0
            }
        })
        .sum();

    Ok(1.0 - b_wins / iterations as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn identical_systems_give_half() {
        let outputs: Vec<Vec<String>> = (0..10).map(|i| toks(&format!("sent {i} a b"))).collect();
        let refs: Vec<Vec<Vec<String>>> = (0..10)
            .map(|i| vec![toks(&format!("sent {i} a b c"))])
            .collect();
        let p =
            paired_bootstrap(&outputs, &outputs, &refs, Metric::Bleu, 1000, 99).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn strictly_better_system_gives_zero() {
        let refs: Vec<Vec<Vec<String>>> = (0..8)
            .map(|i| vec![toks(&format!("w{i} x{i} y{i} z{i} q{i}"))])
            .collect();
        let perfect: Vec<Vec<String>> = refs.iter().map(|r| r[0].clone()).collect();
        let hopeless: Vec<Vec<String>> = (0..8).map(|_| toks("no overlap at all here")).collect();
        let p =
            paired_bootstrap(&hopeless, &perfect, &refs, Metric::Bleu, 1000, 7).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn deterministic_under_seed() {
        let refs: Vec<Vec<Vec<String>>> = (0..6)
            .map(|i| vec![toks(&format!("a{i} b{i} c{i} d{i} e"))])
            .collect();
        let sys_a: Vec<Vec<String>> = (0..6)
            .map(|i| toks(&format!("a{i} b{i} c{i} wrong e")))
            .collect();
        let sys_b: Vec<Vec<String>> =
            (0..6).map(|i| toks(&format!("a{i} b{i} c{i} d{i} e"))).collect();
        let p1 = paired_bootstrap(&sys_a, &sys_b, &refs, Metric::Nist, 1000, 5).unwrap();
        let p2 = paired_bootstrap(&sys_a, &sys_b, &refs, Metric::Nist, 1000, 5).unwrap();
        assert_eq!(p1, p2);
        assert!(p1 < 0.05);
    }

    #[test]
    fn misaligned_or_tiny_inputs_rejected() {
        let a = vec![toks("a")];
        let refs = vec![vec![toks("a")]];
        assert!(paired_bootstrap(&a, &[], &refs, Metric::Bleu, 1000, 1).is_err());
        assert!(paired_bootstrap(&a, &a, &refs, Metric::Bleu, 10, 1).is_err());
    }
}
