use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srf::decision::train_logistic_raw;
use srf::deep::{expected_loss, inference_accuracy, infer_instance, DeciderDims, Vocabulary};
use srf::synthetic::{marker_task, MARKER};
use srf::{forward_infer, forward_train, train_decider, DeciderConfig, DeciderParams, LogisticConfig, TrainingInstance};
use srf_oracles::{decider_gradient_error, random_instance, word};

fn small_params(rng: &mut ChaCha8Rng, alphabet: usize, dims: DeciderDims) -> DeciderParams {
    let words: Vec<String> = (0..alphabet).map(word).collect();
    let vocab = Vocabulary::build(words.iter().map(String::as_str), alphabet + 2);
    DeciderParams::random(vocab, dims, 0.5, 0.5, rng)
}

#[test]
fn gradients_match_finite_differences_on_tiny_config() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dims = DeciderDims { vocab: 0, embed: 4, pair: 6, hidden: 5, k: 2 };
    let params = small_params(&mut rng, 18, dims);
    assert_eq!(params.vocab.len(), 20);
    let data: Vec<TrainingInstance> = (0..4).map(|_| random_instance(&mut rng, 20, 2)).collect();
    let err = decider_gradient_error(&params, &data, &[false, true, false, true], 1e-4);
    assert!(err < 1e-3, "max relative error {err}");
}

#[test]
fn gradients_match_finite_differences_on_random_configs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        let dims = DeciderDims {
            vocab: 0,
            embed: rng.gen_range(1..5),
            pair: rng.gen_range(1..6),
            hidden: rng.gen_range(1..5),
            k: rng.gen_range(1..4),
        };
        let params = small_params(&mut rng, 10, dims);
        let data: Vec<TrainingInstance> = (0..3).map(|_| random_instance(&mut rng, 12, dims.k)).collect();
        let masks: Vec<bool> = (0..3).map(|_| rng.gen_bool(0.5)).collect();
        let err = decider_gradient_error(&params, &data, &masks, 1e-4);
        assert!(err < 1e-3, "{dims:?}: {err}");
    }
}

fn marker_config() -> DeciderConfig {
    DeciderConfig { embed_dim: 8, pair_dim: 16, hidden_dim: 16, k: 3, seed: 7, ..DeciderConfig::default() }
}

#[test]
fn marker_task_is_attainable_by_a_linear_probe() {
    let data = marker_task(400, 3, 7);
    let probe: Vec<(Vec<f64>, u8)> = data
        .iter()
        .map(|i| (i.docs.iter().map(|d| f64::from(u8::from(d.iter().any(|w| w == MARKER)))).collect(), i.label))
        .collect();
    let fit = train_logistic_raw(&probe, &LogisticConfig::default()).unwrap();
    let acc = probe.iter().filter(|(x, y)| (fit.model.predict(x) > 0.5) == (*y == 1)).count() as f64 / 400.0;
    assert_eq!(acc, 1.0);
}

#[test]
fn marker_task_is_learned() {
    let data = marker_task(400, 3, 7);
    let config = marker_config();
    assert_eq!(config.epochs, 300);
    let fit = train_decider(&data, &config).unwrap();
    let acc = inference_accuracy(&fit.params, &data).unwrap();
    assert!(acc >= 0.95, "training accuracy {acc}");
    assert!(fit.final_loss < fit.initial_loss);
    let again = train_decider(&data, &config).unwrap();
    let bits = |c: &[f64]| c.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&fit.loss_curve), bits(&again.loss_curve));
    assert_eq!(fit.params, again.params);
}

#[test]
fn loss_decreases_on_random_labels() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let data: Vec<TrainingInstance> = (0..60).map(|_| random_instance(&mut rng, 15, 3)).collect();
    let config = DeciderConfig { embed_dim: 4, pair_dim: 6, hidden_dim: 5, k: 3, epochs: 40, ..DeciderConfig::default() };
    let fit = train_decider(&data, &config).unwrap();
    assert!(fit.final_loss < fit.initial_loss);
    assert_eq!(fit.loss_curve.len(), 40);
    assert_eq!(fit.loss_curve[0], expected_loss(&DeciderParams { ..fit_initial(&data, &config) }, &data).unwrap());
}

fn fit_initial(data: &[TrainingInstance], config: &DeciderConfig) -> DeciderParams {
    train_decider(data, &DeciderConfig { epochs: 0, ..*config }).unwrap().params
}

#[test]
fn inference_ignores_expanded_branch() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dims = DeciderDims { vocab: 0, embed: 6, pair: 8, hidden: 7, k: 3 };
    let params = small_params(&mut rng, 25, dims);
    for _ in 0..50 {
        let inst = random_instance(&mut rng, 25, 3);
        let mut garbage = random_instance(&mut rng, 40, 3);
        garbage.query = inst.query.clone();
        garbage.docs = inst.docs.clone();
        garbage.expanded_query.push("\u{fffd}junk".into());
        let a = infer_instance(&inst, &params).unwrap();
        let b = infer_instance(&garbage, &params).unwrap();
        assert_eq!(a.theta.to_bits(), b.theta.to_bits());
        let direct = forward_infer("q", &inst.query, &inst.docs, &params).unwrap();
        assert_eq!(direct.theta.to_bits(), a.theta.to_bits());
    }
}

#[test]
fn theta_stays_inside_unit_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let dims = DeciderDims { vocab: 0, embed: 4, pair: 6, hidden: 5, k: 2 };
    let params = small_params(&mut rng, 20, dims);
    for _ in 0..1000 {
        let inst = random_instance(&mut rng, 30, 2);
        let t = forward_train(&inst, &params).unwrap();
        assert!(t > 0.0 && t < 1.0);
    }
}

#[test]
fn branches_share_one_parameter_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dims = DeciderDims { vocab: 0, embed: 3, pair: 4, hidden: 2, k: 2 };
    let params = small_params(&mut rng, 5, dims);
    let (v, d, p, h) = (7, 3, 4, 2);
    assert_eq!(params.param_count(), v * d + p * (3 * d + 3) + p + 4 * h * p + 4 * h * h + 4 * h + 2 * h + 1);
}

#[test]
fn saved_model_predicts_identically() {
    let data = marker_task(40, 2, 3);
    let config = DeciderConfig { embed_dim: 4, pair_dim: 4, hidden_dim: 4, k: 2, epochs: 5, ..DeciderConfig::default() };
    let fit = train_decider(&data, &config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.srfd");
    srf::save_decider(&fit.params, &path).unwrap();
    let loaded = srf::load_decider(&path).unwrap();
    for inst in &data {
        assert_eq!(infer_instance(inst, &loaded).unwrap(), infer_instance(inst, &fit.params).unwrap());
    }
}
