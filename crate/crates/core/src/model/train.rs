//! Training loop: batched loss, gradients and Adam updates.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forward::{argmax, cross_entropy, Model};
use super::optim::{Adam, AdamConfig};
use super::params::{ModelConfig, Params};
use super::tensor::Real;
use crate::error::{Error, Result};
use crate::masks::{AttentionMask, MaskSpec};
use crate::tokenizer::{Role, Vocabulary};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Predict token `t + 1` from tokens `0..=t`.
    #[default]
    Next,
    /// Reconstruct randomly hidden note tokens (hidden ids become BOS).
    Mlm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub seed: u64,
    pub mask: MaskSpec,
    pub adam: AdamConfig,
    pub objective: Objective,
    pub mlm_probability: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 8,
            seed: 0,
            mask: MaskSpec::default(),
            adam: AdamConfig::default(),
            objective: Objective::Next,
            mlm_probability: 0.15,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub step: u64,
    pub loss: f64,
    pub accuracy: f64,
    pub targets: usize,
    pub lr: f64,
}

/// One training example after PAD stripping: model input, the mask to use,
/// and `(position, expected id)` pairs.
#[derive(Clone, Debug)]
pub struct Example {
    pub input: Vec<u32>,
    pub mask: AttentionMask,
    pub targets: Vec<(usize, u32)>,
}

/// Summed loss, correct predictions and target count for one example.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossSum {
    pub loss: f64,
    pub correct: usize,
    pub count: usize,
}

/// Loss of one example; accumulates the unnormalized gradient into `grads`
/// when given.
pub fn example_loss<F: Real>(
    model: &Model<F>,
    example: &Example,
    grads: Option<&mut Params<F>>,
) -> Result<LossSum> {
    let vocab = model.config.vocab_size;
    let want_grad = grads.is_some();
    let (logits, cache) = if want_grad {
        let (l, c) = model.forward_with_cache(&example.input, &example.mask)?;
        (l, Some(c))
    } else {
        (model.forward(&example.input, &example.mask)?, None)
    };
    let mut d_logits = vec![F::zero(); logits.data.len()];
    let mut scratch = vec![F::zero(); vocab];
    let mut sum = LossSum::default();
    for &(pos, target) in &example.targets {
        let row = logits.row(pos);
        let loss = cross_entropy(row, target as usize, &mut scratch);
        sum.loss += loss.to_f64().unwrap_or(f64::NAN);
        sum.count += 1;
        if argmax(row) == target as usize {
            sum.correct += 1;
        }
        for (d, &g) in d_logits[pos * vocab..(pos + 1) * vocab].iter_mut().zip(&scratch) {
            *d += g;
        }
    }
    if let (Some(grads), Some(cache)) = (grads, cache) {
        model.backward(&cache, &d_logits, grads);
    }
    Ok(sum)
}

/// Ids up to the last non-PAD token.
pub fn strip_padding(row: &[u32], pad: u32) -> &[u32] {
    let end = row.iter().rposition(|&id| id != pad).map_or(0, |i| i + 1);
    &row[..end]
}

/// Right-pads rows with PAD to a common length.
pub fn pad_batch(rows: &[Vec<u32>], pad: u32) -> Vec<Vec<u32>> {
    let width = rows.iter().map(Vec::len).max().unwrap_or(0);
    rows.iter()
        .map(|r| {
            let mut r = r.clone();
            r.resize(width, pad);
            r
        })
        .collect()
}

fn roles_of(ids: &[u32], vocab: &Vocabulary) -> Result<Vec<Role>> {
    ids.iter()
        .map(|&id| {
            vocab.role(id).ok_or(Error::IdOutOfRange {
                id,
                vocab_size: vocab.size(),
            })
        })
        .collect()
}

/// Next-token example: input is all but the last token.
pub fn next_token_example(ids: &[u32], vocab: &Vocabulary, spec: &MaskSpec) -> Result<Option<Example>> {
    if ids.len() < 2 {
        return Ok(None);
    }
    let input = ids[..ids.len() - 1].to_vec();
    let roles = roles_of(&input, vocab)?;
    let mask = spec.build(&roles)?;
    let targets = (0..input.len()).map(|t| (t, ids[t + 1])).collect();
    Ok(Some(Example {
        input,
        mask,
        targets,
    }))
}

/// Masked-token example: each note token is hidden with probability `p`.
/// The attention mask follows the original roles.
pub fn mlm_example<R: Rng>(
    ids: &[u32],
    vocab: &Vocabulary,
    spec: &MaskSpec,
    p: f64,
    rng: &mut R,
) -> Result<Option<Example>> {
    let roles = roles_of(ids, vocab)?;
    let mask = spec.build(&roles)?;
    let mut input = ids.to_vec();
    let mut targets = Vec::new();
    for (t, role) in roles.iter().enumerate() {
        if role.is_note() && rng.random::<f64>() < p {
            targets.push((t, ids[t]));
            input[t] = vocab.bos();
        }
    }
    if targets.is_empty() {
        return Ok(None);
    }
    Ok(Some(Example {
        input,
        mask,
        targets,
    }))
}

/// Owns the model, optimizer and data RNG.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub model: Model<f32>,
    pub adam: Adam,
    pub rng: Xoshiro256PlusPlus,
    pub config: TrainConfig,
    pub vocab: Vocabulary,
}

impl Trainer {
    pub fn new(model_config: ModelConfig, config: TrainConfig, vocab: Vocabulary) -> Result<Self> {
        if model_config.vocab_size != vocab.size() {
            return Err(Error::InvalidConfig(format!(
                "model vocab_size {} does not match vocabulary size {}",
                model_config.vocab_size,
                vocab.size()
            )));
        }
        if config.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        config.mask.validate()?;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(config.seed);
        let model = Model::init(model_config.clone(), &mut rng)?;
        let adam = Adam::new(config.adam, &model_config);
        Ok(Trainer {
            model,
            adam,
            rng,
            config,
            vocab,
        })
    }

    pub fn step(&self) -> u64 {
        self.adam.step
    }

    /// Draws `batch_size` records uniformly with replacement.
    pub fn sample_batch(&mut self, records: &[Vec<u32>]) -> Result<Vec<Vec<u32>>> {
        if records.is_empty() {
            return Err(Error::EmptyBatch);
        }
        Ok((0..self.config.batch_size)
            .map(|_| records.choose(&mut self.rng).expect("non-empty").clone())
            .collect())
    }

    fn examples(&mut self, batch: &[Vec<u32>]) -> Result<Vec<Example>> {
        let pad = self.vocab.pad();
        let mut out = Vec::with_capacity(batch.len());
        for row in batch {
            let ids = strip_padding(row, pad);
            let ex = match self.config.objective {
                Objective::Next => next_token_example(ids, &self.vocab, &self.config.mask)?,
                Objective::Mlm => mlm_example(
                    ids,
                    &self.vocab,
                    &self.config.mask,
                    self.config.mlm_probability,
                    &mut self.rng,
                )?,
            };
            out.extend(ex);
        }
        Ok(out)
    }

    /// Mean loss and accuracy over `batch` without updating anything.
    pub fn evaluate_batch(&mut self, batch: &[Vec<u32>]) -> Result<LossSum> {
        let examples = self.examples(batch)?;
        let sums = examples
            .par_iter()
            .map(|ex| example_loss(&self.model, ex, None))
            .collect::<Result<Vec<_>>>()?;
        Ok(total(&sums))
    }

    /// One optimizer step on a padded batch. Loss is the mean cross-entropy
    /// over all non-PAD targets in the batch.
    pub fn train_step(&mut self, batch: &[Vec<u32>]) -> Result<StepStats> {
        let examples = self.examples(batch)?;
        if examples.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut grads = Params::zeros(&self.model.config);
        let mut sums = Vec::with_capacity(examples.len());
        // bounded memory: one gradient buffer per worker, summed in batch order
        let chunk = rayon::current_num_threads().max(1);
        for group in examples.chunks(chunk) {
            let results = group
                .par_iter()
                .map(|ex| {
                    let mut g = Params::zeros(&self.model.config);
                    let s = example_loss(&self.model, ex, Some(&mut g))?;
                    Ok((s, g))
                })
                .collect::<Result<Vec<_>>>()?;
            for (s, g) in results {
                grads.add_assign(&g);
                sums.push(s);
            }
        }
        let sum = total(&sums);
        grads.scale(1.0 / sum.count as f32);
        let lr = self.adam.update(&mut self.model.params, &grads);
        Ok(StepStats {
            step: self.adam.step,
            loss: sum.loss / sum.count as f64,
            accuracy: sum.correct as f64 / sum.count as f64,
            targets: sum.count,
            lr,
        })
    }
}

fn total(sums: &[LossSum]) -> LossSum {
    sums.iter().fold(LossSum::default(), |a, s| LossSum {
        loss: a.loss + s.loss,
        correct: a.correct + s.correct,
        count: a.count + s.count,
    })
}

impl LossSum {
    pub fn mean_loss(&self) -> f64 {
        self.loss / self.count.max(1) as f64
    }

    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.count.max(1) as f64
    }
}
