//! Generator training: teacher-forced cross-entropy minimized by Adam, with
//! per-pass greedy validation scored by BLEU, early stopping on a frozen
//! top-k of validation scores, and random restarts.
//!
//! Both paraphrases of a DA enter as separate training instances; validation
//! scores each DA against all its references at once. Validation decoding is
//! greedy only: neither beam search nor the reranker take part in model
//! selection. Validation BLEU is computed on delexicalized tokens, before
//! any realization or relexicalization.

use super::graph;
use super::{greedy_decode_ids, GeneratorModel, GeneratorParams, Mode, TrainConfig};
use crate::data::vocab::{Vocabulary, STOP};
use crate::error::{Error, Result};
use crate::eval::bleu;
use crate::nn::adam::AdamState;
use crate::nn::tape::GradientTape;
use crate::nn::tensor::Tensor;
use crate::rng::{derive_seed, DetRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One training pair: a linearized DA and its target token sequence
/// (sentence tokens in string mode, bracketed tree tokens in tree mode).
#[derive(Clone, Debug)]
pub struct TrainInstance {
    pub da_id: usize,
    pub input: Vec<String>,
    pub target: Vec<String>,
}

/// One validation DA: its input sequence and all reference token sequences.
#[derive(Clone, Debug)]
pub struct ValidationInstance {
    pub input: Vec<String>,
    pub refs: Vec<Vec<String>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RestartReport {
    pub restart: usize,
    pub seed: u64,
    pub passes: usize,
    pub best_pass: usize,
    pub best_validation_bleu: f64,
    pub diverged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainReport {
    pub restarts: Vec<RestartReport>,
    /// Index of the winning restart in `restarts`.
    pub selected: usize,
}

struct Prepared {
    input_ids: Vec<Vec<usize>>,
    target_ids: Vec<Vec<usize>>,
    val_ids: Vec<Vec<usize>>,
    val_refs: Vec<Vec<Vec<String>>>,
}

fn prepare(
    train_set: &[TrainInstance],
    validation: &[ValidationInstance],
    input_vocab: &Vocabulary,
    output_vocab: &Vocabulary,
) -> Prepared {
    let input_ids = train_set
        .iter()
        .map(|inst| input_vocab.to_ids(&inst.input).0)
        .collect();
    let target_ids = train_set
        .iter()
        .map(|inst| output_vocab.to_ids(&inst.target).0)
        .collect();
    let val_ids = validation
        .iter()
        .map(|inst| input_vocab.to_ids(&inst.input).0)
        .collect();
    let val_refs = validation.iter().map(|inst| inst.refs.clone()).collect();
    Prepared {
        input_ids,
        target_ids,
        val_ids,
        val_refs,
    }
}

/// Greedy-decode the validation set and score it with corpus BLEU.
fn validation_bleu(
    params: &GeneratorParams,
    prepared: &Prepared,
    output_vocab: &Vocabulary,
    max_len: usize,
) -> Result<f64> {
    let hyps: Vec<Vec<String>> = prepared
        .val_ids
        .par_iter()
        .map(|ids| {
            let (tokens, _) = greedy_decode_ids(params, ids, max_len)?;
            output_vocab.to_tokens(&tokens)
        })
        .collect::<Result<Vec<_>>>()?;
    bleu(&hyps, &prepared.val_refs)
}

/// Mean gradient over a batch of instances. Gradients are computed per
/// instance (in parallel) and reduced in index order, so the result is
/// bit-identical regardless of thread count. Returns (grads, mean loss).
fn batch_gradients(
    params: &GeneratorParams,
    prepared: &Prepared,
    batch: &[usize],
) -> Result<(Vec<Tensor>, f64)> {
    let per_instance: Vec<(Vec<Option<Tensor>>, f64)> = batch
        .par_iter()
        .map(|&idx| {
            let mut tape = GradientTape::new();
            let vars = graph::bind(&mut tape, params);
            let loss_var = graph::sequence_loss(
                &mut tape,
                &vars,
                params.cell_size,
                &prepared.input_ids[idx],
                &prepared.target_ids[idx],
                STOP,
            )?;
            let loss = tape.value(loss_var).item();
            let grads = tape.backward(loss_var)?;
            let n_slots = params.tensors().len();
            let collected: Vec<Option<Tensor>> = (0..n_slots)
                .map(|slot| grads.get(slot).ok().cloned())
                .collect();
            Ok((collected, loss))
        })
        .collect::<Result<Vec<_>>>()?;

    let n_slots = params.tensors().len();
    let shapes: Vec<Vec<usize>> = params
        .tensors()
        .iter()
        .map(|(_, t)| t.shape().to_vec())
        .collect();
    let mut total: Vec<Tensor> = shapes.iter().map(|s| Tensor::zeros(s)).collect();
    let mut loss_sum = 0.0;
    let scale = 1.0 / batch.len() as f64;
    for (grads, loss) in &per_instance {
        loss_sum += loss;
        for slot in 0..n_slots {
            if let Some(g) = &grads[slot] {
                for (t, &v) in total[slot].values_mut().iter_mut().zip(g.values()) {
                    *t += v;
                }
            }
        }
    }
    for t in &mut total {
        for v in t.values_mut() {
            *v *= scale;
        }
    }
    Ok((total, loss_sum * scale))
}

struct RestartOutcome {
    params: Option<GeneratorParams>,
    report: RestartReport,
}

fn run_restart(
    restart: usize,
    cfg: &TrainConfig,
    mode: Mode,
    input_vocab: &Vocabulary,
    output_vocab: &Vocabulary,
    prepared: &Prepared,
) -> Result<RestartOutcome> {
    let seed = derive_seed(cfg.seed, &format!("generator/restart{restart}"));
    let mut init_rng = DetRng::new(seed);
    let mut order_rng = DetRng::derived(seed, "order");
    let mut params = GeneratorParams::init(
        input_vocab.len(),
        output_vocab.len(),
        cfg.embedding_size,
        cfg.cell_size,
        &mut init_rng,
    );
    let mut adam = {
        let tensors = params.tensors();
        let refs: Vec<&Tensor> = tensors.iter().map(|(_, t)| *t).collect();
        AdamState::new(&refs, cfg.learning_rate)
    };

    let max_len = cfg.decode_length_for(mode);
    let mut best_bleu = f64::NEG_INFINITY;
    let mut best_pass = 0;
    let mut best_params: Option<GeneratorParams> = None;
    let mut top_scores: Vec<f64> = Vec::new();
    let mut unchanged_streak = 0usize;
    let mut order: Vec<usize> = (0..prepared.input_ids.len()).collect();
    let mut passes_run = 0;

    for pass in 1..=cfg.max_passes {
        passes_run = pass;
        order_rng.shuffle(&mut order);
        let mut diverged = false;
        for batch in order.chunks(cfg.batch_size) {
            let (grads, loss) = batch_gradients(&params, prepared, batch)?;
            if !loss.is_finite() {
                log::warn!("restart {restart}: non-finite loss at pass {pass}, aborting restart");
                diverged = true;
                break;
            }
            let grad_refs: Vec<Option<&Tensor>> = grads.iter().map(Some).collect();
            let mut tensors = params.tensors_mut();
            adam.update(&mut tensors, &grad_refs)?;
        }
        if diverged {
            return Ok(RestartOutcome {
                params: None,
                report: RestartReport {
                    restart,
                    seed,
                    passes: pass,
                    best_pass,
                    best_validation_bleu: if best_bleu.is_finite() { best_bleu } else { 0.0 },
                    diverged: true,
                },
            });
        }

        let score = validation_bleu(&params, prepared, output_vocab, max_len)?;
        if score > best_bleu {
            best_bleu = score;
            best_pass = pass;
            best_params = Some(params.clone());
        }

        // early stopping: the multiset of top-k validation scores achieved so
        // far must change within the patience window
        let previous = top_scores.clone();
        top_scores.push(score);
        top_scores.sort_by(|a, b| b.partial_cmp(a).unwrap());
        top_scores.truncate(cfg.top_k_tracked);
        if top_scores == previous {
            unchanged_streak += 1;
        } else {
            unchanged_streak = 0;
        }
        if unchanged_streak >= cfg.patience_passes {
            log::info!(
                "restart {restart}: early stop at pass {pass} (top-{} unchanged for {})",
                cfg.top_k_tracked,
                cfg.patience_passes
            );
            break;
        }
    }

    Ok(RestartOutcome {
        params: best_params,
        report: RestartReport {
            restart,
            seed,
            passes: passes_run,
            best_pass,
            best_validation_bleu: best_bleu,
            diverged: false,
        },
    })
}

/// Train a generator. `train_set` must contain every paraphrase as its own
/// instance; `validation` is scored by greedy BLEU after every pass. Across
/// restarts the highest-validation-BLEU snapshot wins (earliest restart on
/// ties).
pub fn train(
    train_set: &[TrainInstance],
    validation: &[ValidationInstance],
    cfg: &TrainConfig,
    mode: Mode,
) -> Result<(GeneratorModel, TrainReport)> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::training("empty training corpus"));
    }
    if validation.is_empty() {
        return Err(Error::training("empty validation set"));
    }

    let input_seqs: Vec<&[String]> = train_set.iter().map(|i| i.input.as_slice()).collect();
    let target_seqs: Vec<&[String]> = train_set.iter().map(|i| i.target.as_slice()).collect();
    let input_vocab = Vocabulary::build(input_seqs)?;
    let output_vocab = Vocabulary::build(target_seqs)?;
    let prepared = prepare(train_set, validation, &input_vocab, &output_vocab);

    let mut outcomes = Vec::with_capacity(cfg.restarts);
    for restart in 0..cfg.restarts {
        let outcome = run_restart(restart, cfg, mode, &input_vocab, &output_vocab, &prepared)?;
        log::info!(
            "restart {restart}: best validation BLEU {:.2} at pass {} ({} passes{})",
            outcome.report.best_validation_bleu,
            outcome.report.best_pass,
            outcome.report.passes,
            if outcome.report.diverged { ", diverged" } else { "" }
        );
        outcomes.push(outcome);
    }

    let selected = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| o.params.is_some())
        .max_by(|(ia, a), (ib, b)| {
            a.report
                .best_validation_bleu
                .partial_cmp(&b.report.best_validation_bleu)
                .unwrap()
                .then(ib.cmp(ia)) // earlier restart wins ties
        })
        .map(|(i, _)| i)
        .ok_or_else(|| Error::training("all restarts diverged"))?;

    let reports: Vec<RestartReport> = outcomes.iter().map(|o| o.report.clone()).collect();
    let best = outcomes
        .into_iter()
        .nth(selected)
        .and_then(|o| o.params)
        .expect("selected restart has parameters");

    let mut train_da_ids: Vec<usize> = train_set.iter().map(|i| i.da_id).collect();
    train_da_ids.sort_unstable();
    train_da_ids.dedup();

    let model = GeneratorModel {
        mode,
        config: cfg.clone(),
        input_vocab,
        output_vocab,
        params: best,
        train_da_ids,
        best_validation_bleu: reports[selected].best_validation_bleu,
    };
    Ok((
        model,
        TrainReport {
            restarts: reports,
            selected,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn toy_corpus() -> (Vec<TrainInstance>, Vec<ValidationInstance>) {
        let pairs = [
            ("act:inform slot:food val:French", "x serves french food ."),
            ("act:inform slot:food val:Italian", "x serves italian food ."),
            ("act:inform slot:area val:riverside", "x is on the riverside ."),
            ("act:inform slot:area val:citycentre", "x is in the city centre ."),
        ];
        let train: Vec<TrainInstance> = pairs
            .iter()
            .enumerate()
            .map(|(i, (da, s))| TrainInstance {
                da_id: i,
                input: toks(da),
                target: toks(s),
            })
            .collect();
        let val: Vec<ValidationInstance> = pairs
            .iter()
            .map(|(da, s)| ValidationInstance {
                input: toks(da),
                refs: vec![toks(s)],
            })
            .collect();
        (train, val)
    }

    fn quick_config() -> TrainConfig {
        TrainConfig {
            learning_rate: 0.01,
            embedding_size: 8,
            cell_size: 12,
            batch_size: 2,
            max_passes: 300,
            patience_passes: 60,
            top_k_tracked: 5,
            restarts: 1,
            max_decode_length: 10,
            seed: 7,
        }
    }

    #[test]
    fn learns_a_toy_corpus() {
        let (train_set, val) = toy_corpus();
        let (model, report) = train(&train_set, &val, &quick_config(), Mode::Strings).unwrap();
        assert!(
            model.best_validation_bleu > 80.0,
            "validation BLEU {}",
            model.best_validation_bleu
        );
        assert_eq!(report.restarts.len(), 1);
        assert!(!report.restarts[0].diverged);
        assert_eq!(model.train_da_ids, vec![0, 1, 2, 3]);
    }

    #[test]
    fn loss_decreases_over_first_adam_steps() {
        let (train_set, val) = toy_corpus();
        let cfg = quick_config();
        let input_seqs: Vec<&[String]> = train_set.iter().map(|i| i.input.as_slice()).collect();
        let target_seqs: Vec<&[String]> = train_set.iter().map(|i| i.target.as_slice()).collect();
        let input_vocab = Vocabulary::build(input_seqs).unwrap();
        let output_vocab = Vocabulary::build(target_seqs).unwrap();
        let prepared = prepare(&train_set, &val, &input_vocab, &output_vocab);

        let mut rng = DetRng::new(3);
        let mut params = GeneratorParams::init(
            input_vocab.len(),
            output_vocab.len(),
            cfg.embedding_size,
            cfg.cell_size,
            &mut rng,
        );
        let mut adam = {
            let tensors = params.tensors();
            let refs: Vec<&Tensor> = tensors.iter().map(|(_, t)| *t).collect();
            AdamState::new(&refs, cfg.learning_rate)
        };
        let batch: Vec<usize> = vec![0, 1, 2, 3];
        let (_, first_loss) = batch_gradients(&params, &prepared, &batch).unwrap();
        let mut last = first_loss;
        for _ in 0..10 {
            let (grads, loss) = batch_gradients(&params, &prepared, &batch).unwrap();
            last = loss;
            let grad_refs: Vec<Option<&Tensor>> = grads.iter().map(Some).collect();
            let mut tensors = params.tensors_mut();
            adam.update(&mut tensors, &grad_refs).unwrap();
        }
        assert!(
            last < first_loss,
            "loss did not decrease: {first_loss} -> {last}"
        );
    }

    #[test]
    fn fixed_seed_reproduces_parameters_exactly() {
        let (train_set, val) = toy_corpus();
        let mut cfg = quick_config();
        cfg.max_passes = 12;
        cfg.patience_passes = 50;
        let (m1, _) = train(&train_set, &val, &cfg, Mode::Strings).unwrap();
        let (m2, _) = train(&train_set, &val, &cfg, Mode::Strings).unwrap();
        assert_eq!(m1.params, m2.params);
        assert_eq!(m1.best_validation_bleu, m2.best_validation_bleu);
    }

    #[test]
    fn empty_inputs_rejected() {
        let (train_set, val) = toy_corpus();
        assert!(train(&[], &val, &quick_config(), Mode::Strings).is_err());
        assert!(train(&train_set, &[], &quick_config(), Mode::Strings).is_err());
    }
}
