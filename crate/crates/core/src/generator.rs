//! Temperature sampling of token streams conditioned on meta information.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::masks::MaskSpec;
use crate::model::{Decoder, Model};
use crate::tokenizer::{MetaInfo, Role, TokenSequence, Vocabulary, META_LEN, NOTE_LEN};

/// Name of the generator behind [`sample_token`], recorded in manifests.
pub const SAMPLER_RNG: &str = "xoshiro256++/splitmix64-seed/inverse-cdf/v1";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub temperature: f64,
    pub max_tokens: usize,
    pub seed: u64,
    /// Restrict each step to the block of the role expected next.
    pub role_constrained: bool,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            temperature: 1.0,
            max_tokens: 2048,
            seed: 0,
            role_constrained: false,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidConfig("temperature must be positive".into()));
        }
        if self.max_tokens < META_LEN + NOTE_LEN {
            return Err(Error::InvalidConfig("max_tokens must be at least 9".into()));
        }
        Ok(())
    }
}

/// `exp(x_i / t) / sum_j exp(x_j / t)`, computed after subtracting the max.
pub fn temperature_distribution(logits: &[f64], t: f64) -> Result<Vec<f64>> {
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput("logits"));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidConfig("temperature must be positive".into()));
    }
    restricted_distribution(logits, None, t)
}

/// Same as [`temperature_distribution`] but entries with `allowed[i] ==
/// false` get probability zero.
fn restricted_distribution(logits: &[f64], allowed: Option<&[bool]>, t: f64) -> Result<Vec<f64>> {
    let ok = |i: usize| allowed.is_none_or(|a| a[i]);
    let max = logits
        .iter()
        .enumerate()
        .filter(|&(i, _)| ok(i))
        .map(|(_, &x)| x)
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateDistribution);
    }
    let mut probs: Vec<f64> = logits
        .iter()
        .enumerate()
        .map(|(i, &x)| if ok(i) { ((x - max) / t).exp() } else { 0.0 })
        .collect();
    let sum: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= sum);
    Ok(probs)
}

/// Inverse-CDF draw from `probs`.
pub fn sample_token<R: Rng>(probs: &[f64], rng: &mut R) -> Result<usize> {
    let total: f64 = probs.iter().sum();
    if !total.is_finite() || total <= 0.0 {
        return Err(Error::DegenerateDistribution);
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return Ok(i);
            }
        }
    }
    Ok(last)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// A BAR token at or past the requested bar count was sampled.
    BarLimit,
    Eos,
    MaxTokens,
}

/// Probabilities over the expected role's block at one generation step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDump {
    pub step: usize,
    pub role: Role,
    pub sampled: u32,
    pub probs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generation {
    pub tokens: TokenSequence,
    pub stop: StopReason,
    pub steps: Vec<StepDump>,
}

/// Role expected at position `pos` of a well-formed stream.
pub fn expected_role(pos: usize) -> Role {
    match Role::META.get(pos) {
        Some(&r) => r,
        None => Role::NOTE[(pos - META_LEN) % NOTE_LEN],
    }
}

/// Samples a piece: meta prefix first, then one token at a time until a
/// stop condition. A note cut off by the stop is removed.
pub fn generate(
    model: &Model<f32>,
    vocab: &Vocabulary,
    meta: &MetaInfo,
    cfg: &SamplingConfig,
    mask: &MaskSpec,
    dump_steps: bool,
) -> Result<Generation> {
    cfg.validate()?;
    if model.config.vocab_size != vocab.size() {
        return Err(Error::InvalidConfig(format!(
            "model vocab_size {} does not match vocabulary size {}",
            model.config.vocab_size,
            vocab.size()
        )));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(cfg.seed);
    let mut decoder = Decoder::new(model, *mask)?;
    let mut tokens = TokenSequence::default();
    let mut logits = Vec::new();
    for (&role, id) in Role::META.iter().zip(meta.tokens(vocab)) {
        tokens.push(id, role);
        logits = decoder.push(id, role)?;
    }
    let limit = cfg
        .max_tokens
        .min(model.config.max_len)
        .min(model.config.rel_window);
    let eos = vocab.eos();
    let mut steps = Vec::new();
    let mut stop = StopReason::MaxTokens;
    while tokens.len() < limit {
        let expected = expected_role(tokens.len());
        let block = vocab.block(expected);
        let logits64: Vec<f64> = logits.iter().map(|&x| x as f64).collect();
        if logits64.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteInput("logits"));
        }
        let allowed: Option<Vec<bool>> = cfg.role_constrained.then(|| {
            (0..vocab.size() as u32)
                .map(|id| {
                    (block.offset..block.offset + block.size).contains(&id)
                        || (id == eos && expected == Role::Instr)
                })
                .collect()
        });
        let probs = restricted_distribution(&logits64, allowed.as_deref(), cfg.temperature)?;
        let id = sample_token(&probs, &mut rng)? as u32;
        if dump_steps {
            let range = block.offset as usize..(block.offset + block.size) as usize;
            steps.push(StepDump {
                step: tokens.len(),
                role: expected,
                sampled: id,
                probs: probs[range].to_vec(),
            });
        }
        let (role, value) = vocab.decode(id).expect("sampled id is in range");
        if id == eos {
            stop = StopReason::Eos;
            break;
        }
        if role == Role::Bar && value >= meta.bar_count {
            stop = StopReason::BarLimit;
            break;
        }
        tokens.push(id, role);
        if tokens.len() < limit {
            logits = decoder.push(id, role)?;
        }
    }
    drop_cut_note(&mut tokens);
    Ok(Generation {
        tokens,
        stop,
        steps,
    })
}

/// Removes trailing tokens that start a note in the right role order but
/// never completed it.
fn drop_cut_note(tokens: &mut TokenSequence) {
    let roles = &tokens.roles;
    let mut i = tokens.meta_prefix_len();
    let mut end_of_last = i;
    while i < roles.len() {
        if roles.len() - i >= NOTE_LEN && roles[i..i + NOTE_LEN] == Role::NOTE {
            i += NOTE_LEN;
            end_of_last = i;
        } else {
            i += 1;
        }
    }
    let tail = &roles[end_of_last..];
    if !tail.is_empty() && tail.len() < NOTE_LEN && tail == &Role::NOTE[..tail.len()] {
        tokens.ids.truncate(end_of_last);
        tokens.roles.truncate(end_of_last);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        let p = temperature_distribution(&[1.0, 2.0, 3.0], 1.0).unwrap();
        let expected = [0.09003, 0.24473, 0.66524];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-5);
        }
        assert_eq!(temperature_distribution(&[0.0, 0.0], 0.3).unwrap(), vec![0.5, 0.5]);
        let sharp = temperature_distribution(&[1.0, 2.0, 3.0], 0.5).unwrap();
        assert!(sharp[2] > p[2]);
        let direct = temperature_distribution(&[2.0, 4.0, 6.0], 1.0).unwrap();
        for (a, b) in sharp.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            temperature_distribution(&[0.0, f64::NAN], 1.0),
            Err(Error::NonFiniteInput(_))
        ));
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(0);
        assert!(matches!(
            sample_token(&[0.0, 0.0], &mut rng),
            Err(Error::DegenerateDistribution)
        ));
    }

    #[test]
    fn one_hot_and_frequencies() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
        for _ in 0..100 {
            assert_eq!(sample_token(&[0.0, 0.0, 1.0, 0.0], &mut rng).unwrap(), 2);
        }
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| sample_token(&[0.2, 0.8], &mut rng).unwrap() == 1)
            .count();
        assert!((ones as f64 / n as f64 - 0.8).abs() < 0.01);
    }

    #[test]
    fn cut_note_is_dropped() {
        let vocab = Vocabulary::default();
        let mut seq = crate::tokenizer::encode_notes(&MetaInfo::new(2, 0, 100.0), &[], &vocab);
        seq.push(vocab.token(Role::Instr, 0), Role::Instr);
        seq.push(vocab.token(Role::Pitch, 40), Role::Pitch);
        drop_cut_note(&mut seq);
        assert_eq!(seq.len(), 3);
        // a misplaced token is a model error and stays
        seq.push(vocab.token(Role::Pitch, 40), Role::Pitch);
        drop_cut_note(&mut seq);
        assert_eq!(seq.len(), 4);
    }
}
