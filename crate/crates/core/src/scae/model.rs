use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layer::{Activation, ConvLayer, Features, ForwardCache};
use crate::complex::LaplacianSet;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};
use crate::sparse::CsrMatrix;

/// Architecture of the autoencoder. Every order gets its own encoder
/// (`1 -> hidden -> embedding`) and generator (`embedding -> hidden -> 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScaeConfig {
    pub hidden: usize,
    pub embedding: usize,
    pub degree: usize,
    pub leaky_slope: f64,
    /// Cochains are divided by this before entering the encoder.
    pub c_max: f64,
}

impl Default for ScaeConfig {
    fn default() -> Self {
        ScaeConfig {
            hidden: 8,
            embedding: 8,
            degree: 3,
            leaky_slope: 0.01,
            c_max: 10.0,
        }
    }
}

impl ScaeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.embedding == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if !(self.c_max.is_finite() && self.c_max > 0.0) {
            return Err(Error::Config(format!("c_max {} must be positive", self.c_max)));
        }
        Activation::leaky(self.leaky_slope).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderStack {
    pub encoder: Vec<ConvLayer>,
    pub generator: Vec<ConvLayer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaeModel {
    pub config: ScaeConfig,
    pub orders: Vec<OrderStack>,
}

/// Per-layer caches of one pass through a stack.
pub(crate) type StackCache = Vec<ForwardCache>;

fn init_layer(layer: &mut ConvLayer, seed: u64) {
    let bound = 1.0 / ((layer.in_features * (layer.degree + 1)) as f64).sqrt();
    let mut rng = rng_from_seed(seed);
    for w in &mut layer.weights {
        *w = rng.random_range(-bound..=bound);
    }
}

impl ScaeModel {
    pub fn new(config: ScaeConfig, num_orders: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let leaky = Activation::LeakyRelu {
            slope: config.leaky_slope,
        };
        let n = config.degree;
        let orders = (0..num_orders)
            .map(|k| {
                let mut encoder = vec![
                    ConvLayer::new(k, 1, config.hidden, n, leaky),
                    ConvLayer::new(k, config.hidden, config.embedding, n, leaky),
                ];
                let mut generator = vec![
                    ConvLayer::new(k, config.embedding, config.hidden, n, leaky),
                    ConvLayer::new(k, config.hidden, 1, n, Activation::Identity),
                ];
                for (l, layer) in encoder.iter_mut().chain(generator.iter_mut()).enumerate() {
                    init_layer(layer, derive_seed(seed, "scae-init", (k * 16 + l) as u64));
                }
                OrderStack { encoder, generator }
            })
            .collect();
        Ok(ScaeModel { config, orders })
    }

    pub fn num_orders(&self) -> usize {
        self.orders.len()
    }

    pub fn embedding_width(&self) -> usize {
        self.config.embedding
    }

    pub fn c_max(&self) -> f64 {
        self.config.c_max
    }

    fn stack(&self, k: usize) -> Result<&OrderStack> {
        self.orders.get(k).ok_or_else(|| {
            Error::Domain(format!(
                "model covers orders 0..{} but order {k} was requested",
                self.orders.len()
            ))
        })
    }

    pub(crate) fn run_stack(
        layers: &[ConvLayer],
        op: &CsrMatrix,
        x: Features,
    ) -> Result<(Features, StackCache)> {
        let mut caches = Vec::with_capacity(layers.len());
        let mut h = x;
        for layer in layers {
            let (next, cache) = layer.forward_cached(op, &h)?;
            caches.push(cache);
            h = next;
        }
        Ok((h, caches))
    }

    pub(crate) fn encode_cached(
        &self,
        op: &CsrMatrix,
        k: usize,
        values: &[f64],
    ) -> Result<(Features, StackCache)> {
        let scaled = values.iter().map(|v| v / self.config.c_max).collect();
        Self::run_stack(&self.stack(k)?.encoder, op, vec![scaled])
    }

    /// Generator output in the scaled domain, with caches.
    pub(crate) fn generate_cached(
        &self,
        op: &CsrMatrix,
        k: usize,
        hidden: Features,
    ) -> Result<(Vec<f64>, StackCache)> {
        let (mut y, caches) = Self::run_stack(&self.stack(k)?.generator, op, hidden)?;
        Ok((y.pop().expect("generator emits one channel"), caches))
    }

    /// Encoder embedding of an order-`k` cochain, `[channel][simplex]`.
    pub fn encode(&self, op: &CsrMatrix, k: usize, values: &[f64]) -> Result<Features> {
        self.encode_cached(op, k, values).map(|(h, _)| h)
    }

    /// Decodes an embedding back to cochain values.
    pub fn generate(&self, op: &CsrMatrix, k: usize, hidden: Features) -> Result<Vec<f64>> {
        let (y, _) = self.generate_cached(op, k, hidden)?;
        Ok(y.into_iter().map(|v| v * self.config.c_max).collect())
    }

    /// Encode then generate every order.
    pub fn reconstruct(&self, laps: &LaplacianSet, cochains: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if cochains.len() != laps.num_orders() {
            return Err(Error::Shape {
                expected: laps.num_orders(),
                got: cochains.len(),
            });
        }
        cochains
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let op = laps.operator(k);
                let h = self.encode(op, k, c)?;
                self.generate(op, k, h)
            })
            .collect()
    }

    fn layers(&self) -> impl Iterator<Item = &ConvLayer> {
        self.orders
            .iter()
            .flat_map(|o| o.encoder.iter().chain(o.generator.iter()))
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut ConvLayer> {
        self.orders
            .iter_mut()
            .flat_map(|o| o.encoder.iter_mut().chain(o.generator.iter_mut()))
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(ConvLayer::param_count).sum()
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in self.layers() {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Shape {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut rest = params;
        for l in self.layers_mut() {
            let (w, tail) = rest.split_at(l.weights.len());
            l.weights.copy_from_slice(w);
            let (b, tail) = tail.split_at(l.bias.len());
            l.bias.copy_from_slice(b);
            rest = tail;
        }
        Ok(())
    }

    /// Offset of the first parameter of the stack for order `k`, and the
    /// offset where its generator starts.
    pub(crate) fn offsets(&self, k: usize) -> (usize, usize) {
        let before: usize = self.orders[..k]
            .iter()
            .flat_map(|o| o.encoder.iter().chain(o.generator.iter()))
            .map(ConvLayer::param_count)
            .sum();
        let enc: usize = self.orders[k].encoder.iter().map(ConvLayer::param_count).sum();
        (before, before + enc)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: ScaeModel = serde_json::from_str(&text)?;
        model.config.validate()?;
        Ok(model)
    }
}

/// Embedding vector of simplex `i`.
pub fn embedding_at(h: &Features, i: usize) -> Vec<f64> {
    h.iter().map(|c| c[i]).collect()
}

pub fn set_embedding(h: &mut Features, i: usize, e: &[f64]) {
    for (c, &v) in h.iter_mut().zip(e) {
        c[i] = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_round_trip() {
        let m = ScaeModel::new(ScaeConfig::default(), 3, 9).unwrap();
        let p = m.params();
        assert_eq!(p.len(), m.param_count());
        let mut other = ScaeModel::new(ScaeConfig::default(), 3, 10).unwrap();
        assert_ne!(other, m);
        other.set_params(&p).unwrap();
        assert_eq!(other, m);
    }

    #[test]
    fn init_is_bounded_and_seeded() {
        let a = ScaeModel::new(ScaeConfig::default(), 2, 1).unwrap();
        assert_eq!(a, ScaeModel::new(ScaeConfig::default(), 2, 1).unwrap());
        let first = &a.orders[0].encoder[0];
        let bound = 1.0 / 4f64.sqrt();
        assert!(first.weights.iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn unknown_order_is_a_domain_error() {
        let m = ScaeModel::new(ScaeConfig::default(), 1, 1).unwrap();
        let op = CsrMatrix::identity(2);
        assert!(matches!(m.encode(&op, 1, &[1.0, 2.0]), Err(Error::Domain(_))));
    }
}
