use asttrans_core::corpus::Split;
use asttrans_core::translator::{
    attention_weights, batch_loss, batch_loss_and_grads, load_checkpoint, save_checkpoint, train_translator, translate,
    DecodeMode, ParallelCorpus, ParallelPair, Params, Seq2SeqConfig, TranslationModel, Vocab,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

fn small_model(hidden: usize, layers: usize, pairs: &[(Vec<String>, Vec<String>)]) -> TranslationModel {
    let cfg = Seq2SeqConfig {
        encoder_layers: layers,
        decoder_layers: layers,
        hidden_units: hidden,
        embedding_dim: hidden + 1,
        train_steps: 10,
        validate_every: 10,
        checkpoint_every: 10,
        param_init: 0.3,
        ..Seq2SeqConfig::desk()
    };
    let src = Vocab::build(pairs.iter().map(|p| p.0.as_slice()), 100);
    let tgt = Vocab::build(pairs.iter().map(|p| p.1.as_slice()), 100);
    TranslationModel::initialize(cfg, src, tgt).unwrap()
}

fn toy_pairs() -> Vec<(Vec<String>, Vec<String>)> {
    vec![
        (words("get the user name"), words("method#L block#R return#R")),
        (words("sort list"), words("block#L if#R method#L")),
    ]
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let pairs = toy_pairs();
    let mut model = small_model(4, 2, &pairs);
    let (_, grads) = batch_loss_and_grads(&model, &pairs);
    let n = model.parameter_count();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = 1e-4;
    let mut checked = 0;
    let mut worst = 0.0f64;
    while checked < 20 {
        let i = rng.gen_range(0..n);
        let analytic = grads.get_flat(i).unwrap();
        let orig = model.params.get_flat(i).unwrap();
        model.params.set_flat(i, orig + h);
        let up = batch_loss(&model, &pairs);
        model.params.set_flat(i, orig - h);
        let down = batch_loss(&model, &pairs);
        model.params.set_flat(i, orig);
        let numeric = (up - down) / (2.0 * h);
        // Entries whose gradient is exactly zero (unused embedding rows) say
        // nothing about correctness; sample again.
        if analytic == 0.0 && numeric.abs() < 1e-12 {
            continue;
        }
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs());
        worst = worst.max(rel);
        assert!(
            rel < 1e-3,
            "param {i}: analytic {analytic:e}, numeric {numeric:e}, relative error {rel:e}"
        );
        checked += 1;
    }
    eprintln!("worst relative gradient error {worst:e}");
}

#[test]
fn parameter_count_matches_closed_form() {
    let pairs = toy_pairs();
    for (hidden, layers) in [(4, 1), (6, 2), (3, 3)] {
        let m = small_model(hidden, layers, &pairs);
        let (vs, vt, e, h) = (m.src_vocab.len(), m.tgt_vocab.len(), hidden + 1, hidden);
        let mut expected = vs * e + vt * e;
        for l in 0..layers {
            let input = if l == 0 { e } else { h };
            expected += 2 * 4 * h * (input + h + 1);
        }
        expected += h * h + 2 * h * h + vt * h + vt;
        assert_eq!(m.parameter_count(), expected);
        assert_eq!(Params::expected_count(&m.config, vs, vt), expected);
    }
}

#[test]
fn attention_rows_are_distributions() {
    let pairs = toy_pairs();
    let model = small_model(5, 2, &pairs);
    let a = attention_weights(&model, &words("get the user name"));
    assert_eq!(a.ncols(), 4);
    assert!(a.nrows() >= 1);
    for row in a.rows() {
        assert!((row.sum() - 1.0).abs() < 1e-6);
        assert!(row.iter().all(|&p| p >= 0.0));
    }
    let single = attention_weights(&model, &words("sort"));
    assert!(single.iter().all(|&p| (p - 1.0).abs() < 1e-12));
}

#[test]
fn loss_ignores_batch_order() {
    let mut pairs = toy_pairs();
    pairs.push((words("open file now please"), words("try#L block#R")));
    let model = small_model(4, 1, &pairs);
    let a = batch_loss(&model, &pairs);
    pairs.reverse();
    let b = batch_loss(&model, &pairs);
    assert!((a - b).abs() <= 1e-9 * a.abs());
}

#[test]
fn decoding_is_deterministic_and_clean() {
    let pairs = toy_pairs();
    let model = small_model(6, 1, &pairs);
    let q = words("get unknownword name");
    let a = translate(&model, &q);
    let b = translate(&model, &q);
    assert_eq!(a, b);
    for t in &a.tokens {
        assert!(!["<blank>", "<s>", "</s>", "<unk>"].contains(&t.as_str()));
    }
    assert!(a.tokens.len() <= model.config.max_target_len);
    assert!(translate(&model, &Vec::<String>::new()).tokens.is_empty());
}

fn corpus(pairs: &[(&str, &str)]) -> ParallelCorpus {
    ParallelCorpus::new(
        pairs
            .iter()
            .enumerate()
            .map(|(i, (s, t))| ParallelPair {
                id: format!("p{i}"),
                source: words(s),
                target: words(t),
                split: Split::Train,
            })
            .collect(),
    )
    .unwrap()
}

fn train_cfg() -> Seq2SeqConfig {
    Seq2SeqConfig {
        encoder_layers: 1,
        decoder_layers: 1,
        hidden_units: 16,
        embedding_dim: 16,
        train_steps: 300,
        validate_every: 100,
        checkpoint_every: 1000,
        batch_size: 4,
        start_decay_step: 1000,
        ..Seq2SeqConfig::desk()
    }
}

#[test]
fn beam_of_one_equals_greedy_and_wider_beam_is_valid() {
    let c = corpus(&[("a b", "x y"), ("b c", "y z z"), ("c a", "z x")]);
    let model = train_translator(&c, &train_cfg()).unwrap().model;
    for q in ["a b", "b c", "c a", "a a"] {
        let greedy = translate(&model, &words(q));
        let mut beam1 = model.clone();
        beam1.config.decode = DecodeMode::Beam(1);
        assert_eq!(translate(&beam1, &words(q)).tokens, greedy.tokens);
        let mut beam4 = model.clone();
        beam4.config.decode = DecodeMode::Beam(4);
        let out = translate(&beam4, &words(q));
        assert!(out.tokens.iter().all(|t| ["x", "y", "z"].contains(&t.as_str())));
    }
    assert_eq!(translate(&model, &words("b c")).tokens, words("y z z"));
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let c = corpus(&[("a b", "x y"), ("b c", "y z")]);
    let model = train_translator(
        &c,
        &Seq2SeqConfig {
            train_steps: 100,
            ..train_cfg()
        },
    )
    .unwrap()
    .model;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&model, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back, model);
    assert_eq!(translate(&back, &words("a b")), translate(&model, &words("a b")));

    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(load_checkpoint(&path).is_err());
    let mut wrong = bytes.clone();
    wrong[8] = 99;
    std::fs::write(&path, &wrong).unwrap();
    assert!(load_checkpoint(&path).is_err());
}

#[test]
fn training_is_reproducible() {
    let c = corpus(&[("a b", "x y"), ("b c", "y z"), ("c", "z")]);
    let cfg = Seq2SeqConfig {
        train_steps: 100,
        ..train_cfg()
    };
    let a = train_translator(&c, &cfg).unwrap();
    let b = train_translator(&c, &cfg).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.log.train_loss, b.log.train_loss);
}
