use rand::Rng;
use semcom_core::rng::rng_from_seed;
use semcom_core::scae::{Activation, ConvLayer};
use semcom_core::LaplacianSet;

use super::small_complex;

pub fn random_layer(seed: u64, degree: usize, activation: Activation, fin: usize, fout: usize) -> ConvLayer {
    let mut rng = rng_from_seed(seed);
    let mut layer = ConvLayer::new(0, fin, fout, degree, activation);
    layer.weights.iter_mut().for_each(|w| *w = rng.random_range(-1.0..1.0));
    layer.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
    layer
}

pub fn random_features(seed: u64, f: usize, n: usize) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    (0..f).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

pub fn norm_rel(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 { 0.0 } else { diff / scale }
}

/// Analytic against central-difference gradients of `sum(u * layer(x))`.
pub fn layer_gradient_error(seed: u64, degree: usize, activation: Activation) -> f64 {
    let (_, s) = small_complex(seed);
    let laps = LaplacianSet::from_complex(&s).unwrap();
    let k = (0..laps.num_orders()).max_by_key(|&k| laps.size(k)).unwrap();
    let op = laps.operator(k);
    let n = op.n_rows();
    let mut layer = random_layer(seed, degree, activation, 2, 3);
    let x = random_features(seed ^ 1, 2, n);
    let u = random_features(seed ^ 2, 3, n);
    let objective = |l: &ConvLayer, x: &[Vec<f64>]| -> f64 {
        l.forward(op, x).unwrap().iter().zip(&u).map(|(h, u)| h.iter().zip(u).map(|(a, b)| a * b).sum::<f64>()).sum()
    };
    let (_, cache) = layer.forward_cached(op, &x).unwrap();
    let g = layer.backward(op, &cache, &u, true).unwrap();
    let eps = 1e-6;
    let mut analytic = g.weights.clone();
    analytic.extend(&g.bias);
    analytic.extend(g.input.unwrap().concat());
    let mut numeric = Vec::new();
    for i in 0..layer.weights.len() {
        let w = layer.weights[i];
        layer.weights[i] = w + eps;
        let up = objective(&layer, &x);
        layer.weights[i] = w - eps;
        let down = objective(&layer, &x);
        layer.weights[i] = w;
        numeric.push((up - down) / (2.0 * eps));
    }
    for i in 0..layer.bias.len() {
        let b = layer.bias[i];
        layer.bias[i] = b + eps;
        let up = objective(&layer, &x);
        layer.bias[i] = b - eps;
        let down = objective(&layer, &x);
        layer.bias[i] = b;
        numeric.push((up - down) / (2.0 * eps));
    }
    for f in 0..x.len() {
        for i in 0..n {
            let mut xp = x.clone();
            xp[f][i] += eps;
            let mut xm = x.clone();
            xm[f][i] -= eps;
            numeric.push((objective(&layer, &xp) - objective(&layer, &xm)) / (2.0 * eps));
        }
    }
    norm_rel(&analytic, &numeric)
}

