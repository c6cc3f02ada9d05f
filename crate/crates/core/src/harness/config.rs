use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::minimizer::Scheme;
use crate::protocol::ProtocolConfig;
use crate::scae::{ScaeConfig, TrainConfig};

/// An SNR in dB that may be infinite. JSON has no infinity literal, so
/// infinite values are written as the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Db(pub f64);

impl Db {
    pub const INF: Db = Db(f64::INFINITY);

    pub fn finite(self) -> Option<f64> {
        self.0.is_finite().then_some(self.0)
    }
}

impl fmt::Display for Db {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == f64::INFINITY {
            f.write_str("inf")
        } else if self.0 == f64::NEG_INFINITY {
            f.write_str("-inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl std::str::FromStr for Db {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "+inf" | "infinity" => Ok(Db::INF),
            "-inf" => Ok(Db(f64::NEG_INFINITY)),
            t => t
                .parse::<f64>()
                .map(Db)
                .map_err(|_| Error::Config(format!("bad SNR value {s:?}"))),
        }
    }
}

impl Serialize for Db {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str(&self.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for Db {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Db(v)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CorpusSource {
    File {
        path: PathBuf,
    },
    Synthetic {
        n_authors: usize,
        n_papers: usize,
        max_coauthors: usize,
        cite_max: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkConfig {
    pub enabled: bool,
    pub n_papers: usize,
    pub cite_min: u64,
    pub cite_max: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            enabled: true,
            n_papers: 80,
            cite_min: 1,
            cite_max: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    /// Train a fresh model per trial. When off, `model_path` is loaded.
    pub enabled: bool,
    pub model_path: Option<PathBuf>,
    pub subcomplexes: usize,
    pub subcomplex_size: usize,
    /// Independently drawn batches, cycled across epochs.
    pub batches: usize,
    /// Add the whole complex as one more sample of every batch, so the
    /// filters also see full-size neighbourhoods.
    pub include_full: bool,
    pub p_train: f64,
    pub n_hop: usize,
    /// Share of masked slots that see a teacher-side embedding.
    pub remote_fraction: f64,
    pub optimizer: TrainConfig,
    pub csi: CsiTuning,
}

/// Channel-aware fine tuning applied on top of the noiseless model when a
/// training SNR is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsiTuning {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Share of samples whose remote payload is corrupted.
    pub noisy_fraction: f64,
    pub train_encoder: bool,
}

impl Default for CsiTuning {
    fn default() -> Self {
        CsiTuning {
            epochs: 200,
            learning_rate: 1e-3,
            noisy_fraction: 0.5,
            train_encoder: false,
        }
    }
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            enabled: true,
            model_path: None,
            subcomplexes: 32,
            subcomplex_size: 40,
            batches: 4,
            include_full: true,
            p_train: 0.3,
            n_hop: 2,
            remote_fraction: 1.0,
            optimizer: TrainConfig {
                epochs: 1000,
                learning_rate: 0.01,
                ..TrainConfig::default()
            },
            csi: CsiTuning::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QueryConfig {
    /// Fraction of cochains the student starts with.
    pub student_knowledge: f64,
    pub queries: usize,
    /// `p_local` of the joint mode.
    pub joint_p_local: f64,
    pub protocol: ProtocolConfig,
}

impl Default for QueryConfig {
    fn default() -> Self {
        QueryConfig {
            student_knowledge: 0.5,
            queries: 300,
            joint_p_local: 0.5,
            protocol: ProtocolConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReductionConfig {
    pub schemes: Vec<Scheme>,
    pub fractions: Vec<f64>,
    pub p_local: f64,
    pub snr_db: Db,
    /// Train a separate model on each reduced structure instead of reusing
    /// the full-structure model.
    pub retrain: bool,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        ReductionConfig {
            schemes: Scheme::ALL.to_vec(),
            fractions: vec![0.0, 0.25, 0.5, 0.75, 0.9],
            p_local: 0.5,
            snr_db: Db::INF,
            retrain: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsiConfig {
    /// Training SNRs; the noiseless baseline is always added.
    pub train_snr_db: Vec<Db>,
    /// Evaluation SNRs; empty means the main SNR grid plus `inf`.
    pub eval_snr_db: Vec<Db>,
    pub p_local: f64,
}

impl Default for CsiConfig {
    fn default() -> Self {
        CsiConfig {
            train_snr_db: vec![Db(0.0), Db(10.0)],
            eval_snr_db: Vec::new(),
            p_local: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub corpus: CorpusSource,
    pub walk: WalkConfig,
    pub scae: ScaeConfig,
    pub training: TrainingConfig,
    pub query: QueryConfig,
    pub reduction: ReductionConfig,
    pub dims_thresholds: Vec<f64>,
    pub snr_grid: Vec<Db>,
    pub p_local_grid: Vec<f64>,
    pub csi: CsiConfig,
    pub trials: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub svg: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            corpus: CorpusSource::Synthetic {
                n_authors: 300,
                n_papers: 1500,
                max_coauthors: 5,
                cite_max: 20,
            },
            walk: WalkConfig::default(),
            scae: ScaeConfig {
                degree: 1,
                ..ScaeConfig::default()
            },
            training: TrainingConfig::default(),
            query: QueryConfig::default(),
            reduction: ReductionConfig::default(),
            dims_thresholds: (0..=10).map(|i| f64::from(i) / 10.0).collect(),
            snr_grid: [-10.0, -5.0, 0.0, 5.0, 10.0, 20.0].map(Db).to_vec(),
            p_local_grid: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            csi: CsiConfig::default(),
            trials: 3,
            seed: 1,
            output_dir: PathBuf::from("results"),
            svg: false,
        }
    }
}

fn in_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} = {v} outside [0, 1]")))
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        let grids = [
            ("snr_grid", self.snr_grid.is_empty()),
            ("p_local_grid", self.p_local_grid.is_empty()),
            ("reduction.fractions", self.reduction.fractions.is_empty()),
            ("reduction.schemes", self.reduction.schemes.is_empty()),
            ("dims_thresholds", self.dims_thresholds.is_empty()),
        ];
        if let Some((name, _)) = grids.iter().find(|g| g.1) {
            return Err(Error::Config(format!("{name} must not be empty")));
        }
        for &p in &self.p_local_grid {
            in_unit("p_local_grid entry", p)?;
        }
        for &f in &self.reduction.fractions {
            in_unit("reduction fraction", f)?;
        }
        in_unit("reduction.p_local", self.reduction.p_local)?;
        in_unit("csi.p_local", self.csi.p_local)?;
        in_unit("query.student_knowledge", self.query.student_knowledge)?;
        in_unit("query.joint_p_local", self.query.joint_p_local)?;
        in_unit("training.remote_fraction", self.training.remote_fraction)?;
        in_unit("training.csi.noisy_fraction", self.training.csi.noisy_fraction)?;
        if self.query.queries == 0 {
            return Err(Error::Config("query.queries must be at least 1".into()));
        }
        if !self.training.enabled && self.training.model_path.is_none() {
            return Err(Error::Config(
                "training is disabled and no model_path is given".into(),
            ));
        }
        self.scae.validate()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Applies `dotted.path=value` overrides. Values are parsed as JSON and
    /// fall back to plain strings.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut doc = serde_json::to_value(self)?;
        for o in overrides {
            let o = o.as_ref();
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?} lacks '='")))?;
            let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            let mut slot = &mut doc;
            for part in key.split('.') {
                slot = match slot {
                    Value::Object(map) => map.entry(part.to_string()).or_insert(Value::Null),
                    _ => return Err(Error::Config(format!("override path {key:?} is not an object path"))),
                };
            }
            *slot = value;
        }
        Ok(serde_json::from_value(doc)?)
    }
}
