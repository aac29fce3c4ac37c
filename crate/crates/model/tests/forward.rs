use nvi_model::tape::Tape;
use nvi_model::{Checkpoint, Mode, Model, ModelConfig, TrainConfig};
use rand::{Rng, SeedableRng};

fn cfg() -> ModelConfig {
    ModelConfig {
        d_model: 16,
        heads: 4,
        layers: 2,
        ffn_dim: 32,
        seq_len: 6,
        patch: 5,
        ..Default::default()
    }
}

fn windows(cfg: &ModelConfig, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..cfg.in_channels * cfg.window_len()).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect()
}

#[test]
fn eval_is_deterministic_and_train_is_stochastic() {
    let c = cfg();
    let m = Model::new(c, 1).unwrap();
    let w = windows(&c, 3, 1);
    let refs: Vec<&[f64]> = w.iter().map(|v| v.as_slice()).collect();
    let a = m.forward(&refs, Mode::Eval, None).unwrap();
    let b = m.forward(&refs, Mode::Eval, None).unwrap();
    assert_eq!(a, b);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let t = m.forward(&refs, Mode::Train, Some(&mut rng)).unwrap();
    assert_ne!(a, t);
    for p in &a {
        assert!((0.0..=100.0).contains(&p.nvi_pred));
    }
}

#[test]
fn attention_rows_sum_to_one() {
    let c = cfg();
    let m = Model::new(c, 2).unwrap();
    let w = windows(&c, 2, 2);
    let refs: Vec<&[f64]> = w.iter().map(|v| v.as_slice()).collect();
    let mut tape = Tape::new();
    let g = m.build(&mut tape, m.batch_tokens(&refs).unwrap(), Mode::Eval, None).unwrap();
    assert_eq!(g.attention.len(), 2);
    for &a in &g.attention {
        let probs = tape.attention_probs(a).unwrap();
        assert_eq!(probs.len(), 2 * 4 * 6 * 6);
        for row in probs.chunks_exact(6) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }
}

#[test]
fn batch_permutation_permutes_outputs() {
    let c = cfg();
    let m = Model::new(c, 3).unwrap();
    let w = windows(&c, 5, 3);
    let refs: Vec<&[f64]> = w.iter().map(|v| v.as_slice()).collect();
    let out = m.forward(&refs, Mode::Eval, None).unwrap();
    let perm = [3, 0, 4, 1, 2];
    let permuted: Vec<&[f64]> = perm.iter().map(|&i| refs[i]).collect();
    let out2 = m.forward(&permuted, Mode::Eval, None).unwrap();
    for (k, &i) in perm.iter().enumerate() {
        assert!((out2[k].logit - out[i].logit).abs() < 1e-12);
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    use nvi_core::synth::{gen_dataset, TrajectoryConfig};
    use nvi_model::train::{train, SplitData};
    let tc = TrajectoryConfig {
        duration_s: 6.0,
        fs: 5.0,
        perturb_onset_s: 3.0,
        ..Default::default()
    };
    let ds = gen_dataset(30, 0.5, &tc, 4).unwrap();
    let mc = ModelConfig { seq_len: 6, patch: 5, ..cfg() };
    let tr = SplitData::from_indices(&ds, &ds.plan.split.train);
    let va = SplitData::from_indices(&ds, &ds.plan.split.val);
    let out = train(&tr, &va, mc, TrainConfig { max_epochs: 2, batch_size: 7, ..Default::default() }).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    out.checkpoint.save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    assert_eq!(loaded, out.checkpoint);
    let model = loaded.model().unwrap();
    let te: Vec<&[f64]> = ds.plan.split.test.iter().map(|&i| ds.windows[i].channels.as_slice()).collect();
    let a = out.model.forward(&te, Mode::Eval, None).unwrap();
    let b = model.forward(&te, Mode::Eval, None).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.logit.to_bits(), y.logit.to_bits());
    }
    assert!(Checkpoint::from_bytes(b"garbage").is_err());
}

#[test]
fn residual_stream_keeps_shape() {
    let c = cfg();
    let m = Model::new(c, 4).unwrap();
    let w = windows(&c, 3, 4);
    let refs: Vec<&[f64]> = w.iter().map(|v| v.as_slice()).collect();
    let mut tape = Tape::new();
    let g = m.build(&mut tape, m.batch_tokens(&refs).unwrap(), Mode::Eval, None).unwrap();
    for &a in &g.attention {
        assert_eq!(tape.value(a).shape(), (3 * 6, 16));
    }
    assert_eq!(tape.value(g.logits).shape(), (3, 1));
}
