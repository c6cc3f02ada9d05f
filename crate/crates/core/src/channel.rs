//! Analog AWGN channel over real-valued embeddings.
//!
//! The noise variance is set from the measured mean-square power of each
//! transmitted vector: `sigma^2 = P / 10^(snr_db / 10)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// Signal-to-noise ratio in dB; `+inf` means noiseless.
    pub snr_db: f64,
    pub seed: u64,
    pub enabled: bool,
}

impl ChannelConfig {
    pub fn new(snr_db: f64, seed: u64) -> Self {
        ChannelConfig {
            snr_db,
            seed,
            enabled: snr_db.is_finite(),
        }
    }

    pub fn noiseless() -> Self {
        ChannelConfig {
            snr_db: f64::INFINITY,
            seed: 0,
            enabled: false,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        ChannelConfig { seed, ..self }
    }

    pub fn is_noiseless(&self) -> bool {
        !self.enabled || self.snr_db == f64::INFINITY
    }

    pub fn noise_variance(&self, signal_power: f64) -> f64 {
        if self.is_noiseless() {
            0.0
        } else {
            signal_power / 10f64.powf(self.snr_db / 10.0)
        }
    }
}

/// Payload accounting for one channel use.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub payload: Vec<f64>,
    pub signal_power: f64,
    pub symbols: usize,
}

pub fn signal_power(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
    }
}

/// Sends `x` through the channel and returns what the receiver sees.
pub fn transmit(x: &[f64], cfg: &ChannelConfig) -> Transmission {
    let power = signal_power(x);
    let var = cfg.noise_variance(power);
    let payload = if var == 0.0 {
        x.to_vec()
    } else {
        let sd = var.sqrt();
        let mut rng = rng_from_seed(cfg.seed);
        x.iter()
            .map(|v| v + sd * rng.sample::<f64, _>(StandardNormal))
            .collect()
    };
    Transmission {
        payload,
        signal_power: power,
        symbols: x.len(),
    }
}

/// Channel-state-aware training: corrupts encoder output as the channel
/// would at `train_snr_db`. In the backward pass the injected noise is a
/// constant, so the gradient passes through unchanged.
pub fn csi_noise_inject(hidden: &[f64], train_snr_db: f64, seed: u64) -> Vec<f64> {
    transmit(hidden, &ChannelConfig::new(train_snr_db, seed)).payload
}

/// Empirical SNR in dB of `received` against `sent`.
pub fn measured_snr_db(sent: &[f64], received: &[f64]) -> f64 {
    let noise: Vec<f64> = received.iter().zip(sent).map(|(r, s)| r - s).collect();
    10.0 * (signal_power(sent) / signal_power(&noise)).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> Vec<f64> {
        (0..n).map(|i| ((i % 17) as f64 - 8.0) * 0.25 + 0.1).collect()
    }

    #[test]
    fn noiseless_is_identity() {
        let x = ramp(100);
        assert_eq!(transmit(&x, &ChannelConfig::noiseless()).payload, x);
        assert_eq!(transmit(&x, &ChannelConfig::new(f64::INFINITY, 3)).payload, x);
        assert_eq!(csi_noise_inject(&x, f64::INFINITY, 3), x);
    }

    #[test]
    fn zero_db_noise_matches_signal_power() {
        let x = ramp(1_000_000);
        let t = transmit(&x, &ChannelConfig::new(0.0, 42));
        let noise: Vec<f64> = t.payload.iter().zip(&x).map(|(y, s)| y - s).collect();
        let ratio = signal_power(&noise) / t.signal_power;
        assert!((0.95..=1.05).contains(&ratio), "ratio {ratio}");
        assert_eq!(t.symbols, x.len());
    }

    #[test]
    fn noise_is_zero_mean() {
        let x = vec![1.0; 1_000_000];
        let t = transmit(&x, &ChannelConfig::new(0.0, 5));
        let mean = t.payload.iter().map(|y| y - 1.0).sum::<f64>() / x.len() as f64;
        // sigma = 1 here; bound is 4 sigma / 1000.
        assert!(mean.abs() < 4.0 / 1000.0, "mean {mean}");
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let x = ramp(64);
        let c = ChannelConfig::new(3.0, 11);
        assert_eq!(transmit(&x, &c), transmit(&x, &c));
        assert_ne!(transmit(&x, &c).payload, transmit(&x, &c.with_seed(12)).payload);
        assert_eq!(csi_noise_inject(&x, 3.0, 11), transmit(&x, &c).payload);
    }

    #[test]
    fn empty_payload() {
        let t = transmit(&[], &ChannelConfig::new(0.0, 1));
        assert!(t.payload.is_empty());
        assert_eq!(t.symbols, 0);
    }
}
