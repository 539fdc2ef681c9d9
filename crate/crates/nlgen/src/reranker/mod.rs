//! N-best reranking by content-plan classification.
//!
//! An RNN classifier reads a candidate output (sentence tokens, or the flat
//! lemma-formeme list for trees) and predicts which act types and slot-value
//! combinations it expresses: `o = sigmoid(h_n W_R + b)` over the class
//! inventory seen in training. The input DA maps to the same kind of binary
//! presence vector, and each candidate is penalized by the Hamming distance
//! between the two vectors: weighted penalties are subtracted from the
//! n-best log probabilities and the list is re-sorted.
//!
//! "1-hot" here is a multi-hot presence vector: several classes are active
//! at once, which is the only reading consistent with a Hamming distance
//! over all classes.

pub mod io;
pub mod train;

pub use train::{train_reranker, RerankTrainReport};

use crate::data::da::DialogueAct;
use crate::data::vocab::Vocabulary;
use crate::error::{Error, Result};
use crate::generator::Mode;
use crate::nn::lstm::{lstm_step, LstmCellParams};
use crate::nn::ops;
use crate::nn::tensor::Tensor;
use crate::rng::DetRng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// One content class: a DA act type or a (slot, value) combination.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DaClass {
    ActType(String),
    SlotValue(String, String),
}

impl std::fmt::Display for DaClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DaClass::ActType(a) => write!(f, "act:{a}"),
            DaClass::SlotValue(s, v) => write!(f, "{s}={v}"),
        }
    }
}

/// Ordered inventory of all classes observed in training data. The ordering
/// (act types first, then slot-value pairs, each sorted) is stable and is
/// persisted with the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassInventory {
    classes: Vec<DaClass>,
}

impl ClassInventory {
    pub fn build<'a, I: IntoIterator<Item = &'a DialogueAct>>(das: I) -> ClassInventory {
        let mut acts = BTreeSet::new();
        let mut pairs = BTreeSet::new();
        for da in das {
            for t in da.triples() {
                acts.insert(t.act_type.clone());
                if !t.slot.is_empty() {
                    pairs.insert((t.slot.clone(), t.value.clone()));
                }
            }
        }
        let mut classes: Vec<DaClass> = acts.into_iter().map(DaClass::ActType).collect();
        classes.extend(pairs.into_iter().map(|(s, v)| DaClass::SlotValue(s, v)));
        ClassInventory { classes }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[DaClass] {
        &self.classes
    }

    pub fn index_of(&self, class: &DaClass) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }
}

/// Binary presence vector over a class inventory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentVector(Vec<u8>);

impl ContentVector {
    pub fn zeros(len: usize) -> ContentVector {
        ContentVector(vec![0; len])
    }

    pub fn from_bits(bits: Vec<u8>) -> Result<ContentVector> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::data("content vector entries must be 0 or 1"));
        }
        Ok(ContentVector(bits))
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn set(&mut self, idx: usize) {
        self.0[idx] = 1;
    }

    pub fn ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }
}

/// Presence vector of a DA: 1 at every act-type class and every (slot, value)
/// class the DA contains. Classes absent from the inventory are skipped and
/// counted. Returns (vector, out-of-inventory count).
pub fn da_to_content_vector(da: &DialogueAct, inv: &ClassInventory) -> (ContentVector, usize) {
    let mut vector = ContentVector::zeros(inv.len());
    let mut out_of_inventory = 0;
    for t in da.triples() {
        match inv.index_of(&DaClass::ActType(t.act_type.clone())) {
            Some(i) => vector.set(i),
            None => out_of_inventory += 1,
        }
        if !t.slot.is_empty() {
            match inv.index_of(&DaClass::SlotValue(t.slot.clone(), t.value.clone())) {
                Some(i) => vector.set(i),
                None => out_of_inventory += 1,
            }
        }
    }
    (vector, out_of_inventory)
}

/// Hamming distance between two equal-length binary vectors.
pub fn hamming_penalty(a: &ContentVector, b: &ContentVector) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            context: "hamming_penalty",
            expected: format!("{}", a.len()),
            got: format!("{}", b.len()),
        });
    }
    Ok(a.bits()
        .iter()
        .zip(b.bits())
        .filter(|(x, y)| x != y)
        .count())
}

/// Classifier weights: an encoder over the candidate tokens plus a single
/// logistic layer over the final hidden state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RerankerParams {
    pub embedding_size: usize,
    pub cell_size: usize,
    /// [vocab, embedding]
    pub embedding: Tensor,
    pub encoder: LstmCellParams,
    /// W_R, [cell, inventory size].
    pub w_r: Tensor,
    /// b, [inventory size].
    pub bias: Tensor,
}

impl RerankerParams {
    pub fn init(
        vocab: usize,
        n_classes: usize,
        embedding_size: usize,
        cell_size: usize,
        rng: &mut DetRng,
    ) -> RerankerParams {
        let scale = crate::generator::INIT_SCALE;
        RerankerParams {
            embedding_size,
            cell_size,
            embedding: Tensor::uniform(&[vocab, embedding_size], -scale, scale, rng),
            encoder: LstmCellParams::uniform(embedding_size, cell_size, scale, rng),
            w_r: Tensor::uniform(&[cell_size, n_classes], -scale, scale, rng),
            bias: Tensor::uniform(&[n_classes], -scale, scale, rng),
        }
    }

    pub fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![("embedding".to_string(), &self.embedding)];
        out.extend(self.encoder.tensors("encoder"));
        out.push(("w_r".to_string(), &self.w_r));
        out.push(("bias".to_string(), &self.bias));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = vec![&mut self.embedding];
        out.extend(self.encoder.tensors_mut());
        out.push(&mut self.w_r);
        out.push(&mut self.bias);
        out
    }
}

/// Reranking parameters: the penalty weight applied to Hamming distances and
/// the probability threshold for binarizing classifier outputs. The
/// `use_raw_distance` switch replaces the binarized Hamming penalty with the
/// expected distance `sum_i |o_i - d_i|` (experimental, off by default).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RerankConfig {
    pub penalty_weight: f64,
    pub binarization_threshold: f64,
    pub use_raw_distance: bool,
}

impl Default for RerankConfig {
    fn default() -> RerankConfig {
        RerankConfig {
            penalty_weight: 100.0,
            binarization_threshold: 0.5,
            use_raw_distance: false,
        }
    }
}

impl RerankConfig {
    pub fn validate(&self) -> Result<()> {
        if self.penalty_weight < 0.0 {
            return Err(Error::config("rerank penalty_weight must be non-negative"));
        }
        Ok(())
    }
}

/// A trained reranker.
#[derive(Clone, Debug)]
pub struct RerankerModel {
    pub mode: Mode,
    pub vocab: Vocabulary,
    pub inventory: ClassInventory,
    pub params: RerankerParams,
    pub train_da_ids: Vec<usize>,
}

impl RerankerModel {
    /// Run the classifier on a candidate token sequence. An empty candidate
    /// classifies from the bias alone (h_0 = 0) and is flagged in the logs.
    /// Binarization maps probabilities >= threshold to 1.
    pub fn classify(&self, tokens: &[String], threshold: f64) -> Result<(Vec<f64>, ContentVector)> {
        if tokens.is_empty() {
            log::warn!("classify: empty candidate, using zero encoder state");
        }
        let (ids, _unk) = self.vocab.to_ids(tokens);
        classify_ids(&self.params, &ids, threshold)
    }
}

/// Classifier forward pass over vocabulary ids.
pub fn classify_ids(
    params: &RerankerParams,
    ids: &[usize],
    threshold: f64,
) -> Result<(Vec<f64>, ContentVector)> {
    let mut h = Tensor::zeros(&[params.cell_size]);
    let mut c = Tensor::zeros(&[params.cell_size]);
    for &id in ids {
        if id >= params.embedding.rows() {
            return Err(Error::data(format!("classify: unknown token id {id}")));
        }
        let x = Tensor::from_values(&[params.embedding_size], params.embedding.row(id).to_vec())?;
        let (h2, c2) = lstm_step(&params.encoder, &x, &h, &c)?;
        h = h2;
        c = c2;
    }
    let logits = ops::add(&ops::vecmat(&h, &params.w_r)?, &params.bias)?;
    let probs = ops::sigmoid(&logits);
    let bits: Vec<u8> = probs
        .values()
        .iter()
        .map(|&p| if p >= threshold { 1 } else { 0 })
        .collect();
    Ok((probs.values().to_vec(), ContentVector(bits)))
}

/// A candidate for reranking: its surface tokens (mode-appropriate encoding)
/// and the beam log probability.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub tokens: Vec<String>,
    pub log_prob: f64,
}

/// One reranked candidate with diagnostics.
#[derive(Clone, Debug)]
pub struct RerankedCandidate {
    /// Index into the original n-best list.
    pub original_rank: usize,
    /// log_prob - penalty_weight * penalty.
    pub score: f64,
    pub penalty: f64,
    pub predicted: ContentVector,
}

/// Re-sort an n-best list by penalized score. The candidate multiset is
/// preserved; ties keep the original order.
pub fn rerank(
    model: &RerankerModel,
    candidates: &[Candidate],
    da: &DialogueAct,
    cfg: &RerankConfig,
) -> Result<Vec<RerankedCandidate>> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput("rerank"));
    }
    cfg.validate()?;
    let (da_vector, out_of_inventory) = da_to_content_vector(da, &model.inventory);
    if out_of_inventory > 0 {
        log::debug!("rerank: {out_of_inventory} DA classes outside the inventory");
    }

    let mut entries = Vec::with_capacity(candidates.len());
    for (original_rank, cand) in candidates.iter().enumerate() {
        let (probs, predicted) = model.classify(&cand.tokens, cfg.binarization_threshold)?;
        let penalty = if cfg.use_raw_distance {
            probs
                .iter()
                .zip(da_vector.bits())
                .map(|(&p, &d)| (p - d as f64).abs())
                .sum()
        } else {
            hamming_penalty(&predicted, &da_vector)? as f64
        };
        entries.push(RerankedCandidate {
            original_rank,
            score: cand.log_prob - cfg.penalty_weight * penalty,
            penalty,
            predicted,
        });
    }
    // stable sort: equal scores keep original rank order
    entries.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(std::cmp::Ordering::Equal));
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_da;

    fn inventory() -> ClassInventory {
        let das = [
            parse_da("inform(food=French, area=riverside)").unwrap(),
            parse_da("inform(food=Japanese)").unwrap(),
        ];
        ClassInventory::build(das.iter())
    }

    #[test]
    fn inventory_is_sorted_and_stable() {
        let inv = inventory();
        let names: Vec<String> = inv.classes().iter().map(|c| c.to_string()).collect();
        assert_eq!(
            names,
            vec!["act:inform", "area=riverside", "food=French", "food=Japanese"]
        );
    }

    #[test]
    fn content_vector_membership() {
        let inv = inventory();
        let da = parse_da("inform(food=French)").unwrap();
        let (v, oov) = da_to_content_vector(&da, &inv);
        assert_eq!(v.bits(), &[1, 0, 1, 0]);
        assert_eq!(oov, 0);
    }

    #[test]
    fn content_vector_counts_out_of_inventory() {
        let inv = inventory();
        let da = parse_da("request(phone=X-phone)").unwrap();
        let (v, oov) = da_to_content_vector(&da, &inv);
        assert_eq!(v.ones(), 0);
        assert_eq!(oov, 2);
    }

    #[test]
    fn table2_block2_has_six_ones() {
        let da = parse_da(
            "inform(name=X-name, type=placetoeat, eattype=restaurant, area=riverside, food=French)",
        )
        .unwrap();
        let big = [
            parse_da("inform(name=X-name, type=placetoeat, eattype=restaurant, area=riverside, food=French)").unwrap(),
            parse_da("inform(area=citycentre, food=Italian, near=X-near)").unwrap(),
        ];
        let inv = ClassInventory::build(big.iter());
        let (v, oov) = da_to_content_vector(&da, &inv);
        assert_eq!(v.ones(), 6); // 1 act type + 5 slot-value pairs
        assert_eq!(oov, 0);
    }

    #[test]
    fn hamming_is_a_metric() {
        let a = ContentVector::from_bits(vec![1, 0, 1]).unwrap();
        let b = ContentVector::from_bits(vec![1, 1, 0]).unwrap();
        let c = ContentVector::from_bits(vec![0, 1, 0]).unwrap();
        assert_eq!(hamming_penalty(&a, &a).unwrap(), 0);
        assert_eq!(hamming_penalty(&a, &b).unwrap(), 2);
        assert_eq!(hamming_penalty(&a, &b).unwrap(), hamming_penalty(&b, &a).unwrap());
        // triangle
        let ab = hamming_penalty(&a, &b).unwrap();
        let bc = hamming_penalty(&b, &c).unwrap();
        let ac = hamming_penalty(&a, &c).unwrap();
        assert!(ac <= ab + bc);
        // one flipped bit changes the distance by exactly one
        let mut flipped = b.clone();
        flipped.0[2] ^= 1;
        let d1 = hamming_penalty(&a, &b).unwrap() as i64;
        let d2 = hamming_penalty(&a, &flipped).unwrap() as i64;
        assert_eq!((d1 - d2).abs(), 1);

        let short = ContentVector::from_bits(vec![1]).unwrap();
        assert!(hamming_penalty(&a, &short).is_err());
    }

    fn toy_model() -> RerankerModel {
        let inv = inventory();
        let corpus: Vec<Vec<String>> = vec![
            "x serves french food .".split_whitespace().map(String::from).collect(),
        ];
        let refs: Vec<&[String]> = corpus.iter().map(|s| s.as_slice()).collect();
        let vocab = Vocabulary::build(refs).unwrap();
        let params = RerankerParams::init(vocab.len(), inv.len(), 4, 5, &mut DetRng::new(3));
        RerankerModel {
            mode: Mode::Strings,
            vocab,
            inventory: inv,
            params,
            train_da_ids: vec![],
        }
    }

    #[test]
    fn zero_weights_classify_all_ones_at_default_threshold() {
        let mut model = toy_model();
        for t in model.params.tensors_mut() {
            t.fill(0.0);
        }
        let tokens: Vec<String> = "x serves".split_whitespace().map(String::from).collect();
        let (probs, bits) = model.classify(&tokens, 0.5).unwrap();
        assert!(probs.iter().all(|&p| (p - 0.5).abs() < 1e-12));
        // boundary rule: >= threshold maps to 1
        assert!(bits.bits().iter().all(|&b| b == 1));
    }

    #[test]
    fn classify_is_deterministic_and_threshold_monotone() {
        let model = toy_model();
        let tokens: Vec<String> = "x serves french food .".split_whitespace().map(String::from).collect();
        let (p1, b1) = model.classify(&tokens, 0.5).unwrap();
        let (p2, b2) = model.classify(&tokens, 0.5).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(b1, b2);
        // raising the threshold never turns a 0 into a 1
        let (_, strict) = model.classify(&tokens, 0.9).unwrap();
        for (lo, hi) in b1.bits().iter().zip(strict.bits()) {
            assert!(hi <= lo);
        }
    }

    #[test]
    fn empty_candidate_classifies_from_bias() {
        let model = toy_model();
        let (probs, _) = model.classify(&[], 0.5).unwrap();
        // with h = 0, probabilities are sigmoid(bias)
        for (p, b) in probs.iter().zip(model.params.bias.values()) {
            let expect = 1.0 / (1.0 + (-b).exp());
            assert!((p - expect).abs() < 1e-12);
        }
    }

    fn candidates() -> Vec<Candidate> {
        vec![
            Candidate {
                tokens: "x serves french food .".split_whitespace().map(String::from).collect(),
                log_prob: -1.0,
            },
            Candidate {
                tokens: "x serves japanese food .".split_whitespace().map(String::from).collect(),
                log_prob: -2.0,
            },
            Candidate {
                tokens: "x is on the riverside .".split_whitespace().map(String::from).collect(),
                log_prob: -3.0,
            },
        ]
    }

    #[test]
    fn weight_zero_preserves_order() {
        let model = toy_model();
        let da = parse_da("inform(food=French)").unwrap();
        let cfg = RerankConfig {
            penalty_weight: 0.0,
            ..RerankConfig::default()
        };
        let ranked = rerank(&model, &candidates(), &da, &cfg).unwrap();
        let order: Vec<usize> = ranked.iter().map(|r| r.original_rank).collect();
        assert_eq!(order, vec![0, 1, 2]);
        let tokens_preserved: Vec<usize> = {
            let mut o = order.clone();
            o.sort_unstable();
            o
        };
        assert_eq!(tokens_preserved, vec![0, 1, 2]);
    }

    #[test]
    fn penalty_arithmetic_dominates() {
        // two candidates, log probs -1 and -2, penalties 1 and 0, weight 100:
        // the second candidate must rank first (-2 > -101)
        let model = toy_model();
        let da = parse_da("inform(food=French)").unwrap();
        let cfg = RerankConfig::default();
        let cands = candidates();
        let ranked = rerank(&model, &cands, &da, &cfg).unwrap();
        // recheck the scoring identity directly
        for r in &ranked {
            let c = &cands[r.original_rank];
            assert!((r.score - (c.log_prob - 100.0 * r.penalty)).abs() < 1e-9);
        }
        // shifting all log probs by a constant does not change the order
        let shifted: Vec<Candidate> = cands
            .iter()
            .map(|c| Candidate {
                tokens: c.tokens.clone(),
                log_prob: c.log_prob + 123.5,
            })
            .collect();
        let ranked2 = rerank(&model, &shifted, &da, &cfg).unwrap();
        let o1: Vec<usize> = ranked.iter().map(|r| r.original_rank).collect();
        let o2: Vec<usize> = ranked2.iter().map(|r| r.original_rank).collect();
        assert_eq!(o1, o2);
    }
}
