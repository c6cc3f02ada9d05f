use serde::{Deserialize, Serialize};

use super::batch::{TrainBatch, TrainSample};
use super::layer::{ConvLayer, Features};
use super::model::{embedding_at, set_embedding, ScaeModel, StackCache};
use crate::channel::csi_noise_inject;
use crate::error::{Error, Result};
use rand::Rng;

use crate::rng::{derive_seed, rng_from_seed};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Global gradient norm ceiling; `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// SNR used to corrupt remote embeddings during training. `None` or
    /// `+inf` trains without channel noise.
    pub csi_train_snr_db: Option<f64>,
    /// Probability that a sample's remote payload is corrupted when CSI
    /// training is on. The rest stay clean.
    pub csi_fraction: f64,
    /// When false the encoder weights stay fixed and only the generators
    /// move.
    pub train_encoder: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            learning_rate: 1e-3,
            clip_norm: Some(5.0),
            csi_train_snr_db: None,
            csi_fraction: 1.0,
            train_encoder: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean masked L1 loss per epoch, in the scaled domain.
    pub loss_trace: Vec<f64>,
}

struct OrderPass {
    op_k: usize,
    masked: Vec<usize>,
    remote: Vec<usize>,
    student: StackCache,
    teacher: Option<StackCache>,
    generator: StackCache,
    output: Vec<f64>,
    target: Vec<f64>,
}

fn check_sample(model: &ScaeModel, sample: &TrainSample) -> Result<()> {
    let n = sample.laps.num_orders();
    if n > model.num_orders() {
        return Err(Error::Domain(format!(
            "sample has {n} orders but the model covers {}",
            model.num_orders()
        )));
    }
    if sample.truth.len() != n || sample.inputs.len() != n {
        return Err(Error::Shape {
            expected: n,
            got: sample.truth.len().min(sample.inputs.len()),
        });
    }
    Ok(())
}

fn forward_sample(
    model: &ScaeModel,
    sample: &TrainSample,
    csi_snr_db: Option<f64>,
    noise_seed: u64,
) -> Result<Vec<OrderPass>> {
    check_sample(model, sample)?;
    let c = model.c_max();
    let mut passes = Vec::new();
    for k in 0..sample.laps.num_orders() {
        let masked: Vec<usize> = sample.masked.iter().filter(|s| s.0 == k).map(|s| s.1).collect();
        if masked.is_empty() {
            continue;
        }
        let remote: Vec<usize> = sample.remote.iter().filter(|s| s.0 == k).map(|s| s.1).collect();
        let op = sample.laps.operator(k);
        let (mut z, student) = model.encode_cached(op, k, &sample.inputs[k])?;
        let teacher = if remote.is_empty() {
            None
        } else {
            let (h_t, cache) = model.encode_cached(op, k, &sample.truth[k])?;
            let payload: Vec<f64> = remote.iter().flat_map(|&i| embedding_at(&h_t, i)).collect();
            let received = match csi_snr_db {
                Some(snr) if snr.is_finite() => csi_noise_inject(&payload, snr, derive_seed(noise_seed, "csi", k as u64)),
                _ => payload,
            };
            let w = model.embedding_width();
            for (r, &i) in remote.iter().enumerate() {
                set_embedding(&mut z, i, &received[r * w..(r + 1) * w]);
            }
            Some(cache)
        };
        let (output, generator) = model.generate_cached(op, k, z)?;
        passes.push(OrderPass {
            op_k: k,
            target: sample.truth[k].iter().map(|v| v / c).collect(),
            masked,
            remote,
            student,
            teacher,
            generator,
            output,
        });
    }
    Ok(passes)
}

fn loss_of(passes: &[OrderPass]) -> f64 {
    let count: usize = passes.iter().map(|p| p.masked.len()).sum();
    let total: f64 = passes
        .iter()
        .flat_map(|p| p.masked.iter().map(move |&i| (p.output[i] - p.target[i]).abs()))
        .sum();
    total / count.max(1) as f64
}

/// Masked-slot mean absolute error in the scaled domain. Unmasked slots
/// carry no loss.
pub fn masked_loss(model: &ScaeModel, sample: &TrainSample, csi_snr_db: Option<f64>, noise_seed: u64) -> Result<f64> {
    Ok(loss_of(&forward_sample(model, sample, csi_snr_db, noise_seed)?))
}

fn backward_stack(
    layers: &[ConvLayer],
    op: &CsrMatrix,
    caches: &StackCache,
    upstream: Features,
    want_input: bool,
    grads: &mut [f64],
) -> Result<Option<Features>> {
    let mut up = upstream;
    let mut offset = layers.iter().map(ConvLayer::param_count).sum::<usize>();
    for (l, (layer, cache)) in layers.iter().zip(caches).enumerate().rev() {
        let g = layer.backward(op, cache, &up, l > 0 || want_input)?;
        offset -= layer.param_count();
        let dst = &mut grads[offset..offset + layer.param_count()];
        let (dw, db) = dst.split_at_mut(layer.weights.len());
        dw.iter_mut().zip(&g.weights).for_each(|(a, b)| *a += b);
        db.iter_mut().zip(&g.bias).for_each(|(a, b)| *a += b);
        match g.input {
            Some(input) => up = input,
            None => return Ok(None),
        }
    }
    Ok(Some(up))
}

/// Loss and its gradient with respect to [`ScaeModel::params`].
pub fn loss_and_grads(
    model: &ScaeModel,
    sample: &TrainSample,
    csi_snr_db: Option<f64>,
    noise_seed: u64,
) -> Result<(f64, Vec<f64>)> {
    let passes = forward_sample(model, sample, csi_snr_db, noise_seed)?;
    let loss = loss_of(&passes);
    let count: usize = passes.iter().map(|p| p.masked.len()).sum();
    let mut grads = vec![0.0; model.param_count()];
    for p in &passes {
        let k = p.op_k;
        let op = sample.laps.operator(k);
        let stack = &model.orders[k];
        let (enc_at, gen_at) = model.offsets(k);
        let gen_len: usize = stack.generator.iter().map(ConvLayer::param_count).sum();

        let mut dy = vec![0.0; p.output.len()];
        for &i in &p.masked {
            let diff = p.output[i] - p.target[i];
            dy[i] = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            } / count as f64;
        }
        let dz = backward_stack(
            &stack.generator,
            op,
            &p.generator,
            vec![dy],
            true,
            &mut grads[gen_at..gen_at + gen_len],
        )?
        .expect("generator input gradient requested");

        let mut dz_student = dz.clone();
        let mut dz_teacher: Features = dz.iter().map(|c| vec![0.0; c.len()]).collect();
        for &i in &p.remote {
            for (s, t) in dz_student.iter_mut().zip(dz_teacher.iter_mut()) {
                t[i] = s[i];
                s[i] = 0.0;
            }
        }
        let enc_grads = &mut grads[enc_at..gen_at];
        backward_stack(&stack.encoder, op, &p.student, dz_student, false, enc_grads)?;
        if let Some(cache) = &p.teacher {
            backward_stack(&stack.encoder, op, cache, dz_teacher, false, enc_grads)?;
        }
    }
    Ok((loss, grads))
}

fn freeze_encoders(model: &ScaeModel, grads: &mut [f64]) {
    for k in 0..model.num_orders() {
        let (enc, gen) = model.offsets(k);
        grads[enc..gen].iter_mut().for_each(|g| *g = 0.0);
    }
}

/// Per-sample SGD over `batches`, using batch `e % batches.len()` in epoch
/// `e`.
pub fn train(model: &mut ScaeModel, batches: &[TrainBatch], cfg: &TrainConfig) -> Result<TrainReport> {
    if batches.is_empty() || batches.iter().all(TrainBatch::is_empty) {
        return Err(Error::Batch("no training samples".into()));
    }
    if !(0.0..=1.0).contains(&cfg.csi_fraction) {
        return Err(Error::Config(format!("csi_fraction {} outside [0, 1]", cfg.csi_fraction)));
    }
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate >= 0.0) {
        return Err(Error::Config(format!("learning rate {} must be non-negative", cfg.learning_rate)));
    }
    let mut params = model.params();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let batch = &batches[epoch % batches.len()];
        let mut total = 0.0;
        for (s, sample) in batch.samples.iter().enumerate() {
            let seed = derive_seed(cfg.seed, "epoch-sample", ((epoch as u64) << 32) | s as u64);
            let noisy = cfg.csi_fraction >= 1.0 || rng_from_seed(derive_seed(seed, "csi-draw", 0)).random::<f64>() < cfg.csi_fraction;
            let csi = cfg.csi_train_snr_db.filter(|_| noisy);
            let (loss, mut grads) = loss_and_grads(model, sample, csi, seed)?;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch });
            }
            total += loss;
            if !cfg.train_encoder {
                freeze_encoders(model, &mut grads);
            }
            if let Some(limit) = cfg.clip_norm {
                let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > limit {
                    let scale = limit / norm;
                    grads.iter_mut().for_each(|g| *g *= scale);
                }
            }
            if cfg.learning_rate > 0.0 {
                params.iter_mut().zip(&grads).for_each(|(p, g)| *p -= cfg.learning_rate * g);
                model.set_params(&params)?;
            }
        }
        let mean = total / batch.len().max(1) as f64;
        if !mean.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        loss_trace.push(mean);
    }
    Ok(TrainReport { loss_trace })
}
