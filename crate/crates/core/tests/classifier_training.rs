use rand::Rng;
use weakpu::classifier::{
    bce_loss, classify, forward, forward_eval, init_params, loss_and_gradients, mixup_batch,
    sample_dropout_mask, train, MlpConfig, Mode, Parameters,
};
use weakpu::data::FeatureMatrix;
use weakpu::seed;
use weakpu::synth::{gen_blobs, BlobSpec};

/// Random small net, batch and fixed dropout masks.
struct Case {
    params: Parameters,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    masks: Vec<Vec<f64>>,
}

fn random_case(s: u64) -> Case {
    let mut rng = seed::rng(s);
    let d = rng.random_range(1..=8);
    let h1 = rng.random_range(1..=8);
    let h2 = rng.random_range(1..=8);
    let cfg = MlpConfig { hidden_sizes: [h1, h2], ..MlpConfig::default() };
    let mut params = init_params(d, &cfg, s);
    for v in params.values_mut() {
        *v += rng.random_range(-0.1..0.1);
    }
    let b = rng.random_range(1..=6);
    Case {
        params,
        inputs: (0..b).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect(),
        targets: (0..b).map(|_| rng.random_range(0.0..=1.0)).collect(),
        masks: (0..b).map(|_| sample_dropout_mask(h1, 0.2, &mut rng)).collect(),
    }
}

/// Central differences of the mean loss, step `h`.
fn numeric_gradient(c: &Case, h: f64) -> Vec<f64> {
    let mut p = c.params.clone();
    (0..p.len())
        .map(|i| {
            let orig = p.values()[i];
            p.values_mut()[i] = orig + h;
            let up = loss_and_gradients(&p, &c.inputs, &c.targets, Some(&c.masks)).0;
            p.values_mut()[i] = orig - h;
            let down = loss_and_gradients(&p, &c.inputs, &c.targets, Some(&c.masks)).0;
            p.values_mut()[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

#[test]
fn gradients_match_finite_differences() {
    for s in 0..20 {
        let c = random_case(s);
        let (_, g) = loss_and_gradients(&c.params, &c.inputs, &c.targets, Some(&c.masks));
        let err = max_relative_error(g.values(), &numeric_gradient(&c, 1e-5));
        assert!(err < 1e-4, "case {s}: relative error {err}");
    }
}

#[test]
fn batch_gradient_is_mean_of_sample_gradients() {
    let c = random_case(99);
    let (_, batch) = loss_and_gradients(&c.params, &c.inputs, &c.targets, Some(&c.masks));
    let mut mean = vec![0.0; batch.len()];
    for i in 0..c.inputs.len() {
        let (_, g) = loss_and_gradients(
            &c.params,
            &c.inputs[i..=i],
            &c.targets[i..=i],
            Some(&c.masks[i..=i]),
        );
        for (m, v) in mean.iter_mut().zip(g.values()) {
            *m += v / c.inputs.len() as f64;
        }
    }
    for (a, b) in batch.values().iter().zip(&mean) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn inverted_dropout_preserves_expectation() {
    let cfg = MlpConfig { hidden_sizes: [32, 16], ..MlpConfig::default() };
    let params = init_params(6, &cfg, 5);
    let x = [0.3f32, -1.2, 0.8, 0.05, 1.5, -0.4];
    let eval = forward_eval(&params, &x).unwrap();
    let mut rng = seed::rng(17);
    let draws = 10_000;
    let mean = (0..draws)
        .map(|_| forward(&params, &x, Mode::Train { dropout_rate: 0.2 }, &mut rng).unwrap())
        .sum::<f64>()
        / draws as f64;
    assert!((mean - eval).abs() <= 0.02 * eval, "train mean {mean}, eval {eval}");
}

#[test]
fn mixup_is_convex_with_symmetric_lambdas() {
    let mut rng = seed::rng(3);
    let xs: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64, -(i as f64)]).collect();
    let ys: Vec<f64> = (0..100).map(|i| (i % 2) as f64).collect();
    let mut lambdas = Vec::new();
    while lambdas.len() < 10_000 {
        let m = mixup_batch(&xs, &ys, 0.2, &mut rng);
        for (i, (x, &lam)) in m.features.iter().zip(&m.lambdas).enumerate() {
            assert!((0.0..=1.0).contains(&lam));
            assert!((0.0..=1.0).contains(&m.targets[i]));
            // Some partner j satisfies x̃ = λ x_i + (1 − λ) x_j exactly.
            let j_val = (x[0] - lam * xs[i][0]) / (1.0 - lam);
            if lam < 0.999 {
                let j = j_val.round() as usize;
                let expect: Vec<f64> = xs[i].iter().zip(&xs[j]).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
                assert_eq!(x, &expect);
            }
        }
        lambdas.extend(m.lambdas);
    }
    let mean = lambdas.iter().sum::<f64>() / lambdas.len() as f64;
    assert!((mean - 0.5).abs() < 0.02, "lambda mean {mean}");
}

#[test]
fn separable_blobs_are_learned() {
    let data = gen_blobs(&BlobSpec { n_per_class: 100, d: 2, separation: 6.0, seed: 21 });
    let cfg = MlpConfig { epochs: 20, seed: 4, ..MlpConfig::default() };
    let model = train(&data, &cfg).unwrap();
    let pred = classify(&model.predict_batch(&data.features).unwrap(), 0.5);
    let correct = pred.iter().zip(&data.labels).filter(|(p, y)| p == y).count();
    assert!(correct as f64 / data.n() as f64 >= 0.99, "{correct}/200");
    assert_eq!(model.history.len(), 20);
    assert!(model.history.last().unwrap() < model.history.first().unwrap());
    assert!(model.history.iter().all(|l| l.is_finite() && *l >= 0.0 && *l <= bce_loss(0.0, 1.0)));

    let again = train(&data, &cfg).unwrap();
    let bits = |p: &Parameters| p.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&model.params), bits(&again.params));
}

#[test]
fn batch_prediction_equals_row_loop() {
    let data = gen_blobs(&BlobSpec { n_per_class: 20, d: 3, separation: 2.0, seed: 1 });
    let model = train(&data, &MlpConfig { epochs: 2, hidden_sizes: [8, 4], ..MlpConfig::default() }).unwrap();
    let batch = model.predict_batch(&data.features).unwrap();
    let looped: Vec<f64> = data.features.rows().map(|r| model.predict(r).unwrap()).collect();
    assert_eq!(batch, looped);
    assert!(model.predict_batch(&FeatureMatrix::empty(3).unwrap()).unwrap().is_empty());
    assert!(model.predict_batch(&FeatureMatrix::empty(2).unwrap()).is_err());
}
