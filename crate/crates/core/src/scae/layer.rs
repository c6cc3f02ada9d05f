//! Polynomial simplicial convolution: `h = psi(sum_i W_i L^i x + b)`.
//!
//! Powers of the operator are applied iteratively to the input channels and
//! never materialized as matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Features are stored channel-major: `x[channel][simplex]`.
pub type Features = Vec<Vec<f64>>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Activation {
    Identity,
    LeakyRelu { slope: f64 },
}

impl Activation {
    pub fn leaky(slope: f64) -> Result<Self> {
        if !(slope > 0.0 && slope <= 1.0) {
            return Err(Error::Validation(format!(
                "leaky slope {slope} must lie in (0, 1]"
            )));
        }
        Ok(Activation::LeakyRelu { slope })
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::LeakyRelu { slope } => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::LeakyRelu { slope } => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
        }
    }
}

/// One degree-`N` convolution on simplices of a single order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub order: usize,
    pub in_features: usize,
    pub out_features: usize,
    pub degree: usize,
    /// Flattened `[power][in][out]`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

/// Values kept from the forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `powers[f][i] = L^i x_f`.
    powers: Vec<Vec<Vec<f64>>>,
    pre: Features,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    /// Gradient with respect to the layer input, when requested.
    pub input: Option<Features>,
}

impl ConvLayer {
    pub fn new(
        order: usize,
        in_features: usize,
        out_features: usize,
        degree: usize,
        activation: Activation,
    ) -> Self {
        ConvLayer {
            order,
            in_features,
            out_features,
            degree,
            weights: vec![0.0; (degree + 1) * in_features * out_features],
            bias: vec![0.0; out_features],
            activation,
        }
    }

    #[inline]
    fn widx(&self, power: usize, f: usize, j: usize) -> usize {
        (power * self.in_features + f) * self.out_features + j
    }

    pub fn weight(&self, power: usize, f: usize, j: usize) -> f64 {
        self.weights[self.widx(power, f, j)]
    }

    pub fn set_weight(&mut self, power: usize, f: usize, j: usize, v: f64) {
        let i = self.widx(power, f, j);
        self.weights[i] = v;
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn check_input(&self, op: &CsrMatrix, x: &[Vec<f64>]) -> Result<usize> {
        if x.len() != self.in_features {
            return Err(Error::Shape {
                expected: self.in_features,
                got: x.len(),
            });
        }
        let n = op.n_rows();
        if let Some(bad) = x.iter().find(|c| c.len() != n) {
            return Err(Error::Shape {
                expected: n,
                got: bad.len(),
            });
        }
        Ok(n)
    }

    pub fn forward(&self, op: &CsrMatrix, x: &[Vec<f64>]) -> Result<Features> {
        self.forward_cached(op, x).map(|(h, _)| h)
    }

    pub fn forward_cached(&self, op: &CsrMatrix, x: &[Vec<f64>]) -> Result<(Features, ForwardCache)> {
        let n = self.check_input(op, x)?;
        let powers: Vec<Vec<Vec<f64>>> = x
            .iter()
            .map(|xf| {
                let mut p = Vec::with_capacity(self.degree + 1);
                p.push(xf.clone());
                for i in 0..self.degree {
                    let next = op.matvec(&p[i]);
                    p.push(next);
                }
                p
            })
            .collect();
        let mut pre = vec![vec![0.0; n]; self.out_features];
        for (j, row) in pre.iter_mut().enumerate() {
            row.iter_mut().for_each(|v| *v = self.bias[j]);
            for (f, pf) in powers.iter().enumerate() {
                for (i, pi) in pf.iter().enumerate() {
                    let w = self.weight(i, f, j);
                    if w != 0.0 {
                        row.iter_mut().zip(pi).for_each(|(r, p)| *r += w * p);
                    }
                }
            }
        }
        let out = pre
            .iter()
            .map(|row| row.iter().map(|&v| self.activation.apply(v)).collect())
            .collect();
        Ok((out, ForwardCache { powers, pre }))
    }

    /// Analytic gradients given `upstream = dloss/dh`. The operator is
    /// symmetric, so the input gradient is `sum_i L^i u_i`, evaluated by
    /// Horner's rule.
    pub fn backward(
        &self,
        op: &CsrMatrix,
        cache: &ForwardCache,
        upstream: &[Vec<f64>],
        want_input: bool,
    ) -> Result<LayerGrads> {
        if cache.powers.len() != self.in_features
            || cache.pre.len() != self.out_features
            || cache.powers.iter().any(|p| p.len() != self.degree + 1)
        {
            return Err(Error::State(
                "forward cache was not produced by this layer".into(),
            ));
        }
        let n = cache.pre.first().map_or(0, Vec::len);
        if n != op.n_rows() {
            return Err(Error::State("forward cache was produced on another operator".into()));
        }
        if upstream.len() != self.out_features {
            return Err(Error::Shape {
                expected: self.out_features,
                got: upstream.len(),
            });
        }
        if let Some(bad) = upstream.iter().find(|u| u.len() != n) {
            return Err(Error::Shape {
                expected: n,
                got: bad.len(),
            });
        }

        let g_pre: Features = upstream
            .iter()
            .zip(&cache.pre)
            .map(|(u, p)| {
                u.iter()
                    .zip(p)
                    .map(|(&g, &z)| g * self.activation.derivative(z))
                    .collect()
            })
            .collect();

        let mut grads = LayerGrads {
            weights: vec![0.0; self.weights.len()],
            bias: g_pre.iter().map(|g| g.iter().sum()).collect(),
            input: None,
        };
        for (f, pf) in cache.powers.iter().enumerate() {
            for (i, pi) in pf.iter().enumerate() {
                for (j, gj) in g_pre.iter().enumerate() {
                    grads.weights[self.widx(i, f, j)] =
                        gj.iter().zip(pi).map(|(a, b)| a * b).sum();
                }
            }
        }

        if want_input {
            let mut input = Vec::with_capacity(self.in_features);
            for f in 0..self.in_features {
                let u = |i: usize| -> Vec<f64> {
                    let mut acc = vec![0.0; n];
                    for (j, gj) in g_pre.iter().enumerate() {
                        let w = self.weight(i, f, j);
                        if w != 0.0 {
                            acc.iter_mut().zip(gj).for_each(|(a, g)| *a += w * g);
                        }
                    }
                    acc
                };
                let mut acc = u(self.degree);
                for i in (0..self.degree).rev() {
                    let mut next = op.matvec(&acc);
                    next.iter_mut().zip(u(i)).for_each(|(a, b)| *a += b);
                    acc = next;
                }
                input.push(acc);
            }
            grads.input = Some(input);
        }
        Ok(grads)
    }
}

/// Convenience wrapper over [`ConvLayer::forward`].
pub fn conv_forward(layer: &ConvLayer, op: &CsrMatrix, x: &[Vec<f64>]) -> Result<Features> {
    layer.forward(op, x)
}

/// Convenience wrapper over [`ConvLayer::backward`].
pub fn conv_backward(
    layer: &ConvLayer,
    op: &CsrMatrix,
    cache: &ForwardCache,
    upstream: &[Vec<f64>],
) -> Result<LayerGrads> {
    layer.backward(op, cache, upstream, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge_l0() -> CsrMatrix {
        CsrMatrix::from_triplets(2, 2, [(0, 0, 1.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 1.0)])
    }

    #[test]
    fn degree_zero_identity_filter() {
        let mut layer = ConvLayer::new(0, 1, 1, 3, Activation::Identity);
        layer.set_weight(0, 0, 0, 1.0);
        let c = vec![vec![3.0, -2.0]];
        assert_eq!(layer.forward(&edge_l0(), &c).unwrap(), c);
    }

    #[test]
    fn first_power_is_one_matvec() {
        let mut layer = ConvLayer::new(0, 1, 1, 1, Activation::Identity);
        layer.set_weight(1, 0, 0, 1.0);
        let h = layer.forward(&edge_l0(), &[vec![1.0, 0.0]]).unwrap();
        assert_eq!(h, vec![vec![1.0, -1.0]]);
    }

    #[test]
    fn dimension_mismatch_is_a_shape_error() {
        let layer = ConvLayer::new(0, 1, 1, 1, Activation::Identity);
        assert!(matches!(
            layer.forward(&edge_l0(), &[vec![1.0; 3]]),
            Err(Error::Shape { expected: 2, got: 3 })
        ));
        assert!(layer.forward(&edge_l0(), &[vec![1.0; 2], vec![1.0; 2]]).is_err());
    }

    #[test]
    fn linear_degree_zero_gradient() {
        let mut layer = ConvLayer::new(0, 1, 1, 0, Activation::Identity);
        layer.set_weight(0, 0, 0, 0.7);
        let c = vec![vec![2.0, -1.5]];
        let (_, cache) = layer.forward_cached(&edge_l0(), &c).unwrap();
        let up = vec![vec![0.3, 4.0]];
        let g = conv_backward(&layer, &edge_l0(), &cache, &up).unwrap();
        assert_eq!(g.weights, vec![0.3 * 2.0 + 4.0 * -1.5]);
        assert_eq!(g.bias, vec![4.3]);
        assert_eq!(g.input.unwrap(), vec![vec![0.3 * 0.7, 4.0 * 0.7]]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut layer = ConvLayer::new(0, 2, 3, 2, Activation::leaky(0.01).unwrap());
        layer.weights.iter_mut().enumerate().for_each(|(i, w)| *w = (i as f64).sin());
        let x = vec![vec![1.0, 2.0], vec![-1.0, 0.5]];
        let (_, cache) = layer.forward_cached(&edge_l0(), &x).unwrap();
        let g = conv_backward(&layer, &edge_l0(), &cache, &vec![vec![0.0; 2]; 3]).unwrap();
        assert!(g.weights.iter().chain(&g.bias).all(|&v| v == 0.0));
    }

    #[test]
    fn mismatched_cache_is_a_state_error() {
        let a = ConvLayer::new(0, 1, 1, 1, Activation::Identity);
        let b = ConvLayer::new(0, 1, 1, 2, Activation::Identity);
        let (_, cache) = a.forward_cached(&edge_l0(), &[vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            b.backward(&edge_l0(), &cache, &[vec![1.0, 1.0]], true),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn leaky_slope_validated() {
        assert!(Activation::leaky(0.0).is_err());
        assert!(Activation::leaky(1.5).is_err());
        assert!(Activation::leaky(1.0).is_ok());
    }
}
