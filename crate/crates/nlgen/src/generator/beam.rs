//! Beam search decoding.
//!
//! Left-to-right expansion keeping the global top-k partial sequences by
//! accumulated log probability. Finished hypotheses (those that chose STOP)
//! are frozen and retained in a pool capped at the beam size. Scores are raw
//! log probabilities without length normalization, so extending a hypothesis
//! never improves it; the search stops as soon as the best live hypothesis
//! can no longer beat the worst kept finished one, or at the length cap.
//! Ties break by token-id lexicographic order for reproducibility.

use super::{decode_step, encode, initial_decoder_state, GeneratorParams, Hypothesis};
use crate::data::vocab::{GO, PAD, STOP};
use crate::error::{Error, Result};

struct Candidate {
    hyp: Hypothesis,
    /// Parent tokens plus the chosen id (STOP included), for tie-breaking.
    sort_key: Vec<usize>,
}

fn rank(a: &Candidate, b: &Candidate) -> std::cmp::Ordering {
    b.hyp
        .log_prob
        .partial_cmp(&a.hyp.log_prob)
        .unwrap_or(std::cmp::Ordering::Equal)
        .then_with(|| a.sort_key.cmp(&b.sort_key))
}

/// N-best beam search over encoded input ids. Returns at most `beam_size`
/// hypotheses sorted by log probability descending.
pub fn beam_search(
    params: &GeneratorParams,
    input_ids: &[usize],
    beam_size: usize,
    max_len: usize,
) -> Result<Vec<Hypothesis>> {
    if beam_size == 0 {
        return Err(Error::data("beam_search: beam_size must be at least 1"));
    }
    let enc = encode(params, input_ids)?;
    let vocab_size = params.output_embedding.rows();

    let mut live: Vec<Candidate> = vec![Candidate {
        hyp: Hypothesis {
            tokens: Vec::new(),
            log_prob: 0.0,
            state: initial_decoder_state(params, &enc),
            finished: false,
            truncated: false,
        },
        sort_key: Vec::new(),
    }];
    let mut finished: Vec<Candidate> = Vec::new();

    for _ in 0..max_len {
        if live.is_empty() {
            break;
        }
        if finished.len() >= beam_size {
            let worst_finished = finished.last().expect("non-empty").hyp.log_prob;
            let best_live = live.first().expect("non-empty").hyp.log_prob;
            if best_live <= worst_finished {
                break;
            }
        }

        let mut candidates: Vec<Candidate> = Vec::with_capacity(live.len() * vocab_size);
        for parent in &live {
            let prev = parent.hyp.tokens.last().copied().unwrap_or(GO);
            let (dist, state) = decode_step(params, prev, &parent.hyp.state, &enc)?;
            for (tok, &p) in dist.values().iter().enumerate() {
                if tok == PAD || tok == GO {
                    continue;
                }
                let log_prob = parent.hyp.log_prob + p.ln();
                let mut sort_key = parent.hyp.tokens.clone();
                sort_key.push(tok);
                let mut tokens = parent.hyp.tokens.clone();
                let is_stop = tok == STOP;
                if !is_stop {
                    tokens.push(tok);
                }
                candidates.push(Candidate {
                    hyp: Hypothesis {
                        tokens,
                        log_prob,
                        state: state.clone(),
                        finished: is_stop,
                        truncated: false,
                    },
                    sort_key,
                });
            }
        }
        candidates.sort_by(rank);
        candidates.truncate(beam_size);

        live = Vec::new();
        for cand in candidates {
            if cand.hyp.finished {
                finished.push(cand);
            } else {
                live.push(cand);
            }
        }
        finished.sort_by(rank);
        finished.truncate(beam_size);
    }

    // anything still live hit the length cap
    let mut pool = finished;
    for mut cand in live {
        cand.hyp.truncated = true;
        pool.push(cand);
    }
    pool.sort_by(rank);
    pool.truncate(beam_size);
    Ok(pool.into_iter().map(|c| c.hyp).collect())
}

/// Teacher-forced log probability of a given output sequence (optionally
/// including the final STOP step). Independent route used to cross-check
/// hypothesis scores.
pub fn score_sequence(
    params: &GeneratorParams,
    input_ids: &[usize],
    tokens: &[usize],
    include_stop: bool,
) -> Result<f64> {
    let enc = encode(params, input_ids)?;
    let mut state = initial_decoder_state(params, &enc);
    let mut prev = GO;
    let mut log_prob = 0.0;
    for &tok in tokens {
        let (dist, next) = decode_step(params, prev, &state, &enc)?;
        log_prob += dist.values()[tok].ln();
        state = next;
        prev = tok;
    }
    if include_stop {
        let (dist, _) = decode_step(params, prev, &state, &enc)?;
        log_prob += dist.values()[STOP].ln();
    }
    Ok(log_prob)
}
