mod common;

use common::fixture::thirty_simplex_complex;
use common::grad::{layer_gradient_error, norm_rel, random_layer};
use common::small_complex;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use semcom_core::rng::rng_from_seed;
use semcom_core::sparse::CsrMatrix;
use semcom_core::scae::{
    loss_and_grads, make_masked_batch, masked_loss, recursive_predict, train, Activation, ConvLayer, ScaeConfig,
    ScaeModel, TrainBatch, TrainConfig,
};
use semcom_core::{LaplacianSet, SimplicialComplex};

fn trained_free_batch(s: &SimplicialComplex, seed: u64, remote: f64) -> TrainBatch {
    let mut b = make_masked_batch(std::slice::from_ref(s), 0.3, 2, 10.0, seed).unwrap();
    b.assign_remote(remote, seed).unwrap();
    b
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn layer_gradients_match_finite_differences(seed in any::<u64>(), degree in 0usize..=3, leaky in any::<bool>()) {
        let act = if leaky { Activation::leaky(0.01).unwrap() } else { Activation::Identity };
        let err = layer_gradient_error(seed, degree, act);
        prop_assert!(err < 1e-4, "relative error {err:e} at degree {degree}");
    }

    #[test]
    fn model_gradients_match_finite_differences(seed in any::<u64>(), degree in 0usize..=3) {
        let s = thirty_simplex_complex();
        let cfg = ScaeConfig { degree, hidden: 4, embedding: 3, ..ScaeConfig::default() };
        let mut model = ScaeModel::new(cfg, s.num_orders(), seed).unwrap();
        let batch = trained_free_batch(&s, seed, 0.5);
        let sample = &batch.samples[0];
        let (_, g) = loss_and_grads(&model, sample, None, 0).unwrap();
        let p = model.params();
        let eps = 1e-6;
        let base = masked_loss(&model, sample, None, 0).unwrap();
        let (mut analytic, mut numeric) = (Vec::new(), Vec::new());
        for i in 0..p.len() {
            let mut q = p.clone();
            q[i] = p[i] + eps;
            model.set_params(&q).unwrap();
            let up = masked_loss(&model, sample, None, 0).unwrap();
            q[i] = p[i] - eps;
            model.set_params(&q).unwrap();
            let down = masked_loss(&model, sample, None, 0).unwrap();
            // A leaky-ReLU or L1 kink inside the stencil makes the two
            // one-sided slopes disagree; such coordinates have no
            // derivative to compare against.
            let (fwd, bwd) = ((up - base) / eps, (base - down) / eps);
            if (fwd - bwd).abs() > 1e-3 * fwd.abs().max(bwd.abs()).max(1e-3) {
                continue;
            }
            analytic.push(g[i]);
            numeric.push((up - down) / (2.0 * eps));
        }
        model.set_params(&p).unwrap();
        prop_assert!(analytic.len() * 10 >= p.len() * 9, "too many kinks: {} of {}", p.len() - analytic.len(), p.len());
        let err = norm_rel(&analytic, &numeric);
        prop_assert!(err < 1e-4, "relative error {err:e}");
    }

    #[test]
    fn filter_response_stays_within_n_hops(seed in any::<u64>(), degree in 0usize..=3) {
        let (_, s) = small_complex(seed);
        let laps = LaplacianSet::from_complex(&s).unwrap();
        for k in 0..laps.num_orders() {
            let op = laps.operator(k);
            let n = op.n_rows();
            let layer = random_layer(seed, degree, Activation::leaky(0.01).unwrap(), 1, 2);
            let layer = ConvLayer { bias: vec![0.0; 2], ..layer };
            let src = (seed as usize) % n;
            let mut x = vec![vec![0.0; n]];
            x[0][src] = 1.0;
            let h = layer.forward(op, &x).unwrap();
            let dist = laps.hop_distances(k, src).unwrap();
            for (i, d) in dist.iter().enumerate() {
                let within = d.is_some_and(|d| d <= degree);
                if !within {
                    prop_assert!(h.iter().all(|c| c[i] == 0.0), "leak at hop {:?}", d);
                }
            }
        }
    }

    #[test]
    fn loss_ignores_unmasked_targets(seed in any::<u64>(), bump in 1.0f64..50.0) {
        let s = thirty_simplex_complex();
        let model = ScaeModel::new(ScaeConfig::default(), s.num_orders(), seed).unwrap();
        let batch = trained_free_batch(&s, seed, 0.0);
        let mut sample = batch.samples[0].clone();
        let before = masked_loss(&model, &sample, None, 0).unwrap();
        for k in 0..sample.truth.len() {
            for i in 0..sample.truth[k].len() {
                if !sample.masked.contains(&(k, i)) {
                    sample.truth[k][i] += bump;
                }
            }
        }
        prop_assert_eq!(masked_loss(&model, &sample, None, 0).unwrap(), before);
    }

    #[test]
    fn recursive_prediction_is_relabeling_equivariant(seed in any::<u64>(), drop in 0.2f64..0.8, p_step in 0.1f64..1.0) {
        let (_, s) = small_complex(seed);
        let laps = LaplacianSet::from_complex(&s).unwrap();
        let mut rng = rng_from_seed(seed);
        // perm[k][i] is the new index of simplex i of order k.
        let perm: Vec<Vec<usize>> = (0..laps.num_orders())
            .map(|k| {
                let mut p: Vec<usize> = (0..laps.size(k)).collect();
                p.shuffle(&mut rng);
                p
            })
            .collect();
        let relabeled = LaplacianSet::from_laplacians(
            (0..laps.num_orders())
                .map(|k| {
                    let l = laps.laplacian(k);
                    CsrMatrix::from_triplets(l.n_rows(), l.n_cols(), l.entries().map(|(i, j, v)| (perm[k][i], perm[k][j], v)))
                })
                .collect(),
        );
        let model = ScaeModel::new(ScaeConfig::default(), s.num_orders(), seed).unwrap();
        let known: Vec<Vec<Option<f64>>> = (0..s.num_orders())
            .map(|k| s.cochain(k).iter().map(|&c| (rng.random::<f64>() >= drop).then_some(c)).collect())
            .collect();
        if known.iter().flatten().all(Option::is_none) {
            return Ok(());
        }
        let mut known_p: Vec<Vec<Option<f64>>> = known.iter().map(|c| vec![None; c.len()]).collect();
        for k in 0..known.len() {
            for (i, v) in known[k].iter().enumerate() {
                known_p[k][perm[k][i]] = *v;
            }
        }
        let a = recursive_predict(&model, &laps, &known, p_step).unwrap();
        let b = recursive_predict(&model, &relabeled, &known_p, p_step).unwrap();
        prop_assert_eq!(a.iterations.len(), b.iterations.len());
        for k in 0..known.len() {
            for (i, &j) in perm[k].iter().enumerate() {
                let (x, y) = (a.cochains[k][i], b.cochains[k][j]);
                prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "order {k}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn recursive_iterations_are_bounded(seed in any::<u64>(), p_step in 0.05f64..1.0) {
        let s = thirty_simplex_complex();
        let model = ScaeModel::new(ScaeConfig::default(), s.num_orders(), seed).unwrap();
        let mut rng = rng_from_seed(seed);
        let mut known: Vec<Vec<Option<f64>>> =
            (0..s.num_orders()).map(|k| s.cochain(k).iter().map(|&c| Some(c)).collect()).collect();
        // Keep one known simplex per order so every connected order can
        // be reached.
        for k in 0..known.len() {
            let keep = rng.random_range(0..known[k].len());
            for (i, v) in known[k].iter_mut().enumerate() {
                if i != keep && rng.random::<f64>() < 0.7 {
                    *v = None;
                }
            }
        }
        let out = recursive_predict(&model, &LaplacianSet::from_complex(&s).unwrap(), &known, p_step).unwrap();
        let bound = (1.0 / p_step).ceil() as usize + 1;
        prop_assert!(out.iterations.len() <= bound, "{} iterations > {bound}", out.iterations.len());
        for k in 0..known.len() {
            for (i, v) in known[k].iter().enumerate() {
                if let Some(v) = v {
                    prop_assert_eq!(out.cochains[k][i], *v);
                }
            }
        }
    }
}

#[test]
fn checkpoints_reproduce_predictions_bit_exactly() {
    let s = thirty_simplex_complex();
    let laps = LaplacianSet::from_complex(&s).unwrap();
    let mut model = ScaeModel::new(ScaeConfig::default(), s.num_orders(), 4).unwrap();
    let batch = trained_free_batch(&s, 4, 0.5);
    let cfg = TrainConfig { epochs: 20, learning_rate: 0.01, ..TrainConfig::default() };
    train(&mut model, &[batch], &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.json");
    model.save_json(&p).unwrap();
    let back = ScaeModel::load_json(&p).unwrap();
    assert_eq!(back, model);
    let a = model.reconstruct(&laps, &s.cochains()).unwrap();
    let b = back.reconstruct(&laps, &s.cochains()).unwrap();
    assert_eq!(
        a.iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn zero_learning_rate_keeps_the_loss_constant() {
    let s = thirty_simplex_complex();
    let mut model = ScaeModel::new(ScaeConfig::default(), s.num_orders(), 2).unwrap();
    let before = model.clone();
    let cfg = TrainConfig { epochs: 15, learning_rate: 0.0, ..TrainConfig::default() };
    let rep = train(&mut model, &[trained_free_batch(&s, 2, 0.0)], &cfg).unwrap();
    assert_eq!(rep.loss_trace.len(), 15);
    assert!(rep.loss_trace.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(model, before);
}

#[test]
fn training_is_deterministic_per_seed() {
    let s = thirty_simplex_complex();
    let run = |seed| {
        let mut m = ScaeModel::new(ScaeConfig::default(), s.num_orders(), seed).unwrap();
        let cfg = TrainConfig { epochs: 10, learning_rate: 0.01, csi_train_snr_db: Some(0.0), seed, ..TrainConfig::default() };
        let r = train(&mut m, &[trained_free_batch(&s, seed, 0.5)], &cfg).unwrap();
        (m, r)
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5).1, run(6).1);
}
