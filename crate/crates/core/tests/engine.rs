use bif_core::engine::{fit_global, BifConfig, Estimator, FeatureMap, ImportanceNetwork};
use bif_core::eval::top_indices;
use bif_core::nn::{
    train_classifier, Activation, Architecture, DenseLayer, DenseNet, FrozenModel, TrainConfig,
};
use bif_core::synth::{generate, generate_split, label_probability, SynId, SynSpec};
use bif_core::Dataset;
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_arch() -> Architecture {
    Architecture {
        hidden: vec![32, 32],
        activation: Activation::Relu,
    }
}

fn quick_train(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 5,
        batch_size: 32,
        learning_rate: 3e-3,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn null_dataset_gives_near_uniform_importance() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = 2000;
    let d = 5;
    let x = Array2::from_shape_fn((n, d), |_| rng.sample::<f64, _>(rand_distr::StandardNormal));
    let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
    let ds = Dataset::new(x, y, 2).unwrap();
    let g = train_classifier(&ds, &small_arch(), &quick_train(3)).unwrap();
    let cfg = BifConfig {
        kl_weight: 1.0,
        epochs: 5,
        seed: 3,
        ..BifConfig::default()
    };
    let mean = fit_global(&g, &ds, &cfg)
        .unwrap()
        .params()
        .unwrap()
        .mean()
        .into_vec();
    for m in &mean {
        assert!((m - 1.0 / d as f64).abs() < 0.1, "{mean:?}");
    }
}

/// Same network with its input columns reordered so that it sees `x[order]`.
fn permute_inputs(g: &FrozenModel, order: &[usize]) -> FrozenModel {
    let layers = g
        .net()
        .layers()
        .iter()
        .enumerate()
        .map(|(l, layer)| {
            let w = if l == 0 {
                layer.weights().select(ndarray::Axis(1), order)
            } else {
                layer.weights().clone()
            };
            DenseLayer::new(w, layer.bias().clone(), layer.activation()).unwrap()
        })
        .collect();
    FrozenModel::new(DenseNet::new(layers).unwrap())
}

#[test]
fn global_importance_is_permutation_equivariant() {
    let split = generate_split(&SynSpec::new(SynId::Syn1, 1500, 8)).unwrap();
    let g = train_classifier(&split.train, &small_arch(), &quick_train(8)).unwrap();
    let order = [4, 9, 0, 7, 1, 3, 8, 2, 6, 5];
    let permuted = split.train.permute_features(&order).unwrap();
    let g_perm = permute_inputs(&g, &order);
    let cfg = BifConfig {
        kl_weight: 1.0 / 32.0,
        epochs: 4,
        seed: 8,
        ..BifConfig::default()
    };
    let base = fit_global(&g, &split.train, &cfg)
        .unwrap()
        .params()
        .unwrap()
        .mean()
        .into_vec();
    let moved = fit_global(&g_perm, &permuted, &cfg)
        .unwrap()
        .params()
        .unwrap()
        .mean()
        .into_vec();
    for (j, &src) in order.iter().enumerate() {
        assert!(
            (moved[j] - base[src]).abs() < 1e-8,
            "feature {src}: {} vs {}",
            moved[j],
            base[src]
        );
    }
}

#[test]
fn sampling_and_point_estimators_agree_on_ranking() {
    let split = generate_split(&SynSpec::new(SynId::Syn1, 2000, 4)).unwrap();
    let g = train_classifier(&split.train, &small_arch(), &quick_train(4)).unwrap();
    let point = BifConfig {
        kl_weight: 1.0 / 64.0,
        epochs: 5,
        seed: 4,
        ..BifConfig::default()
    };
    let sampling = BifConfig {
        estimator: Estimator::Sampling { samples: 64 },
        ..point.clone()
    };
    let a = fit_global(&g, &split.train, &point)
        .unwrap()
        .params()
        .unwrap()
        .mean()
        .into_vec();
    let b = fit_global(&g, &split.train, &sampling)
        .unwrap()
        .params()
        .unwrap()
        .mean()
        .into_vec();
    let mut ta = top_indices(&a, 2).unwrap();
    let mut tb = top_indices(&b, 2).unwrap();
    ta.sort_unstable();
    tb.sort_unstable();
    assert_eq!(ta, vec![0, 1], "point estimate {a:?}");
    assert_eq!(tb, vec![0, 1], "sampling {b:?}");
}

#[test]
fn syn1_labels_match_their_probabilities() {
    let ds = generate(&SynSpec::new(SynId::Syn1, 100_000, 17)).unwrap();
    let mut expected = 0.0;
    for i in 0..ds.len() {
        expected += label_probability(SynId::Syn1, ds.row(i).as_slice().unwrap()).unwrap();
    }
    let observed = ds.labels().iter().sum::<usize>() as f64 / ds.len() as f64;
    assert!((observed - expected / ds.len() as f64).abs() < 0.01);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn importance_network_always_yields_valid_dirichlet(
        seed in any::<u64>(),
        scale in 0.0f64..1e3,
        x in prop::collection::vec(-1.0f64..1.0, 6),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let arch = Architecture { hidden: vec![8], activation: Activation::Selu };
        let imp = ImportanceNetwork::random(&arch, FeatureMap::new(3, vec![0, 0, 1, 1, 2, 2]).unwrap(), &mut rng).unwrap();
        let input: Vec<f64> = x.iter().map(|v| v * scale).collect();
        let p = imp.explain(&input).unwrap();
        prop_assert_eq!(p.dim(), 3);
        prop_assert!(p.alpha().iter().all(|a| *a > 0.0 && a.is_finite()));
        let total: f64 = p.mean().as_slice().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }
}
