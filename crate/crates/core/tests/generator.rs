use musattn::generator::{generate, SamplingConfig};
use musattn::masks::MaskSpec;
use musattn::metrics::token_error;
use musattn::model::{Model, ModelConfig};
use musattn::tokenizer::{MetaInfo, Role, Vocabulary};
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

fn model(vocab: &Vocabulary) -> Model<f32> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
    Model::init(ModelConfig::tiny(vocab.size(), 96), &mut rng).unwrap()
}

#[test]
fn constrained_pieces_are_well_formed() {
    let vocab = Vocabulary::default();
    let model = model(&vocab);
    let meta = MetaInfo::new(16, 0, 80.0);
    for seed in 0..10 {
        let cfg = SamplingConfig {
            seed,
            role_constrained: true,
            max_tokens: 96,
            ..SamplingConfig::default()
        };
        let g = generate(&model, &vocab, &meta, &cfg, &MaskSpec::default(), false).unwrap();
        assert_eq!(token_error(&g.tokens, &vocab), 0);
        assert_eq!(g.tokens.meta(&vocab), Some(meta));
        assert_eq!(&g.tokens.roles[..3], &Role::META);
    }
}

#[test]
fn budget_of_nine_allows_one_note() {
    let vocab = Vocabulary::default();
    let model = model(&vocab);
    let meta = MetaInfo::new(4, 3, 120.0);
    for seed in 0..10 {
        let cfg = SamplingConfig {
            seed,
            max_tokens: 9,
            ..SamplingConfig::default()
        };
        let g = generate(&model, &vocab, &meta, &cfg, &MaskSpec::full(), false).unwrap();
        assert!(g.tokens.len() <= 9 && g.tokens.len() >= 3);
    }
}

#[test]
fn same_seed_same_piece() {
    let vocab = Vocabulary::default();
    let model = model(&vocab);
    let meta = MetaInfo::new(8, 12, 100.0);
    let cfg = SamplingConfig {
        seed: 42,
        temperature: 1.3,
        max_tokens: 80,
        ..SamplingConfig::default()
    };
    let a = generate(&model, &vocab, &meta, &cfg, &MaskSpec::default(), true).unwrap();
    let b = generate(&model, &vocab, &meta, &cfg, &MaskSpec::default(), true).unwrap();
    assert_eq!(a, b);
    assert!(!a.steps.is_empty());
    for s in &a.steps {
        assert_eq!(s.probs.len(), vocab.block(s.role).size as usize);
        assert_eq!(s.role, musattn::generator::expected_role(s.step));
    }
    let c = generate(&model, &vocab, &meta, &SamplingConfig { seed: 43, ..cfg }, &MaskSpec::default(), false).unwrap();
    assert_ne!(a.tokens, c.tokens);
}
