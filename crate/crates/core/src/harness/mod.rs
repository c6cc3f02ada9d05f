//! Experiment sweeps over seeded trials.
//!
//! Every trial derives its own seed from the master seed, builds its corpus
//! sample and complex, trains (or loads) a model and evaluates a query
//! battery at each grid point. Trials run in parallel; rows are collected
//! in trial order so outputs are byte-stable.

pub mod config;
pub mod table;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

pub use config::{CorpusSource, CsiTuning, Db, ExperimentConfig};
pub use table::{Row, SummaryRow, Table};

use crate::channel::ChannelConfig;
use crate::complex::{LaplacianSet, SimplicialComplex};
use crate::dataset::{load_corpus, random_walk_sample, synth_corpus, BipartiteGraph};
use crate::error::{Error, Result};
use crate::minimizer::{minimize_edges, reduce_to_fraction};
use crate::protocol::{run_battery, sample_queries, BatteryOutcome, KnowledgeState, Session};
use crate::rng::derive_seed;
use crate::scae::{downsample_subcomplexes, make_masked_batch, train, transfer_mask, ScaeModel, TrainBatch, TrainConfig, TrainReport};
use crate::Simplex;

pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sweep {
    Reduction,
    Snr,
    Fraction,
    Csi,
    Dims,
}

impl Sweep {
    pub const ALL: [Sweep; 5] = [Sweep::Reduction, Sweep::Snr, Sweep::Fraction, Sweep::Csi, Sweep::Dims];

    pub fn name(self) -> &'static str {
        match self {
            Sweep::Reduction => "reduction",
            Sweep::Snr => "snr",
            Sweep::Fraction => "fraction",
            Sweep::Csi => "csi",
            Sweep::Dims => "dims",
        }
    }

    fn chart(self) -> (&'static str, &'static str, &'static str) {
        match self {
            Sweep::Reduction => ("fraction", "scheme", "accuracy"),
            Sweep::Snr => ("snr_db", "mode", "accuracy"),
            Sweep::Fraction => ("transmitted_fraction", "snr_db", "accuracy"),
            Sweep::Csi => ("eval_snr_db", "train_snr_db", "accuracy"),
            Sweep::Dims => ("threshold", "order", "retained_edges"),
        }
    }
}

impl std::str::FromStr for Sweep {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Sweep::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown sweep {s}")))
    }
}

/// The three query modes compared by the SNR sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Local,
    Remote,
    Joint(f64),
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Local => "local",
            Mode::Remote => "remote",
            Mode::Joint(_) => "joint",
        }
    }

    pub fn p_local(self) -> f64 {
        match self {
            Mode::Local => 1.0,
            Mode::Remote => 0.0,
            Mode::Joint(p) => p,
        }
    }
}

/// Corpus sample and structure of one trial.
pub struct Trial {
    pub index: usize,
    pub seed: u64,
    pub graph: BipartiteGraph,
    pub complex: SimplicialComplex,
    pub laps: LaplacianSet,
}

pub fn trial_seed(cfg: &ExperimentConfig, t: usize) -> u64 {
    derive_seed(cfg.seed, "trial", t as u64)
}

pub fn load_graph(cfg: &ExperimentConfig, seed: u64) -> Result<BipartiteGraph> {
    let base = match &cfg.corpus {
        CorpusSource::File { path } => load_corpus(path)?,
        CorpusSource::Synthetic {
            n_authors,
            n_papers,
            max_coauthors,
            cite_max,
        } => synth_corpus(*n_authors, *n_papers, *max_coauthors, *cite_max, derive_seed(seed, "corpus", 0))?,
    };
    if cfg.walk.enabled {
        random_walk_sample(
            &base,
            cfg.walk.n_papers,
            cfg.walk.cite_min,
            cfg.walk.cite_max,
            derive_seed(seed, "walk", 0),
        )
    } else {
        Ok(base)
    }
}

pub fn setup_trial(cfg: &ExperimentConfig, t: usize) -> Result<Trial> {
    let seed = trial_seed(cfg, t);
    let graph = load_graph(cfg, seed)?;
    let complex = SimplicialComplex::build(&graph);
    let laps = LaplacianSet::from_complex(&complex)?;
    Ok(Trial {
        index: t,
        seed,
        graph,
        complex,
        laps,
    })
}

/// Trains a model on sub-complexes of `complex`.
fn training_batches(
    cfg: &ExperimentConfig,
    complex: &SimplicialComplex,
    structure: Option<&LaplacianSet>,
    seed: u64,
) -> Result<Vec<TrainBatch>> {
    let t = &cfg.training;
    (0..t.batches.max(1))
        .map(|b| {
            let mut subs = downsample_subcomplexes(complex, t.subcomplexes, t.subcomplex_size, derive_seed(seed, "subs", b as u64))?;
            if t.include_full {
                subs.push(complex.clone());
            }
            let mut batch = make_masked_batch(&subs, t.p_train, t.n_hop, cfg.scae.c_max, derive_seed(seed, "mask", b as u64))?;
            batch.assign_remote(t.remote_fraction, derive_seed(seed, "remote", b as u64))?;
            if let Some(reduced) = structure {
                for (sample, sub) in batch.samples.iter_mut().zip(&subs) {
                    sample.laps = transfer_mask(complex, reduced, sub, &sample.laps)?;
                }
            }
            Ok(batch)
        })
        .collect()
}

/// Trains a noiseless model, then fine-tunes it at `csi_train_snr_db` when
/// that is finite.
pub fn train_model(
    cfg: &ExperimentConfig,
    complex: &SimplicialComplex,
    csi_train_snr_db: Option<f64>,
    seed: u64,
) -> Result<(ScaeModel, TrainReport)> {
    train_model_on(cfg, complex, None, csi_train_snr_db, seed)
}

/// As [`train_model`], with every training sample restricted to the
/// couplings `structure` retains.
pub fn train_model_on(
    cfg: &ExperimentConfig,
    complex: &SimplicialComplex,
    structure: Option<&LaplacianSet>,
    csi_train_snr_db: Option<f64>,
    seed: u64,
) -> Result<(ScaeModel, TrainReport)> {
    let mut model = ScaeModel::new(cfg.scae.clone(), complex.num_orders(), derive_seed(seed, "init", 0))?;
    let batches = training_batches(cfg, complex, structure, seed)?;
    let tc = TrainConfig {
        csi_train_snr_db: None,
        seed: derive_seed(seed, "sgd", 0),
        ..cfg.training.optimizer.clone()
    };
    let mut report = train(&mut model, &batches, &tc)?;
    if let Some(snr) = csi_train_snr_db.filter(|v| v.is_finite()) {
        let more = tune_batches(cfg, &mut model, &batches, snr, seed)?;
        report.loss_trace.extend(more.loss_trace);
    }
    Ok((model, report))
}

/// Channel-aware fine tuning of an already trained model. With the same
/// `seed`, `train_model(cfg, c, Some(snr), seed)` equals
/// `tune_for_channel` applied to `train_model(cfg, c, None, seed)`.
pub fn tune_for_channel(
    cfg: &ExperimentConfig,
    complex: &SimplicialComplex,
    base: &ScaeModel,
    snr_db: f64,
    seed: u64,
) -> Result<(ScaeModel, TrainReport)> {
    let mut model = base.clone();
    if !snr_db.is_finite() {
        return Ok((model, TrainReport { loss_trace: Vec::new() }));
    }
    let batches = training_batches(cfg, complex, None, seed)?;
    let report = tune_batches(cfg, &mut model, &batches, snr_db, seed)?;
    Ok((model, report))
}

fn tune_batches(cfg: &ExperimentConfig, model: &mut ScaeModel, batches: &[TrainBatch], snr: f64, seed: u64) -> Result<TrainReport> {
    let c = &cfg.training.csi;
    let tune = TrainConfig {
        epochs: c.epochs,
        learning_rate: c.learning_rate,
        csi_train_snr_db: Some(snr),
        csi_fraction: c.noisy_fraction,
        train_encoder: c.train_encoder,
        seed: derive_seed(seed, "csi-sgd", 0),
        ..cfg.training.optimizer.clone()
    };
    train(model, batches, &tune)
}

/// Trains per trial or loads the configured checkpoint.
pub fn obtain_model(cfg: &ExperimentConfig, trial: &Trial, csi_train_snr_db: Option<f64>) -> Result<ScaeModel> {
    if cfg.training.enabled {
        return train_model(cfg, &trial.complex, csi_train_snr_db, derive_seed(trial.seed, "train", 0)).map(|m| m.0);
    }
    let path = cfg
        .training
        .model_path
        .as_ref()
        .ok_or_else(|| Error::Config("training is disabled and no model_path is given".into()))?;
    let model = ScaeModel::load_json(path)?;
    if model.num_orders() < trial.complex.num_orders() {
        return Err(Error::Config(format!(
            "checkpoint covers {} orders but the corpus needs {}",
            model.num_orders(),
            trial.complex.num_orders()
        )));
    }
    Ok(model)
}

/// Everything a query battery needs apart from the mode.
pub struct Battery<'a> {
    pub cfg: &'a ExperimentConfig,
    pub trial: &'a Trial,
    pub model: &'a ScaeModel,
    pub knowledge: KnowledgeState,
    pub queries: Vec<Simplex>,
}

impl<'a> Battery<'a> {
    pub fn new(cfg: &'a ExperimentConfig, trial: &'a Trial, model: &'a ScaeModel) -> Result<Self> {
        let knowledge = KnowledgeState::partial(
            &trial.complex,
            cfg.query.student_knowledge,
            derive_seed(trial.seed, "knowledge", 0),
        )?;
        let queries = sample_queries(&trial.complex, cfg.query.queries, derive_seed(trial.seed, "queries", 0));
        Ok(Battery {
            cfg,
            trial,
            model,
            knowledge,
            queries,
        })
    }

    /// A fresh student runs every query at `p_local` over `laps`.
    pub fn run(&self, laps: &LaplacianSet, p_local: f64, snr: Db) -> Result<BatteryOutcome> {
        let mut session = Session::new(
            &self.trial.complex,
            laps,
            self.model,
            self.knowledge.clone(),
            self.cfg.query.protocol.clone(),
        )?;
        let channel = ChannelConfig::new(snr.0, 0);
        run_battery(&mut session, &self.queries, p_local, &channel, derive_seed(self.trial.seed, "battery", 0))
    }
}

fn run_trials<F>(cfg: &ExperimentConfig, f: F) -> Result<Vec<Row>>
where
    F: Fn(&Trial) -> Result<Vec<Row>> + Sync,
{
    cfg.validate()?;
    let per_trial: Vec<Result<Vec<Row>>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| setup_trial(cfg, t).and_then(|trial| f(&trial)))
        .collect();
    let mut rows = Vec::new();
    for r in per_trial {
        rows.extend(r?);
    }
    Ok(rows)
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

pub fn run_reduction_sweep(cfg: &ExperimentConfig) -> Result<Table> {
    let mut table = Table::new(
        "reduction",
        &["scheme", "fraction"],
        &["accuracy", "retained_fraction", "retained_edges", "original_edges"],
    );
    table.rows = run_trials(cfg, |trial| {
        let model = obtain_model(cfg, trial, None)?;
        let battery = Battery::new(cfg, trial, &model)?;
        let mut rows = Vec::new();
        for &scheme in &cfg.reduction.schemes {
            for &fraction in &cfg.reduction.fractions {
                let (laps, rep) = reduce_to_fraction(&trial.laps, scheme, fraction, derive_seed(trial.seed, "random-edge", 0))?;
                let out = if cfg.reduction.retrain && cfg.training.enabled && fraction > 0.0 {
                    let (reduced_model, _) =
                        train_model_on(cfg, &trial.complex, Some(&laps), None, derive_seed(trial.seed, "train", 0))?;
                    Battery::new(cfg, trial, &reduced_model)?.run(&laps, cfg.reduction.p_local, cfg.reduction.snr_db)?
                } else {
                    battery.run(&laps, cfg.reduction.p_local, cfg.reduction.snr_db)?
                };
                rows.push(Row {
                    keys: vec![scheme.to_string(), fmt_num(fraction)],
                    trial: trial.index,
                    metrics: vec![
                        out.accuracy,
                        rep.retained_fraction,
                        rep.retained_edges() as f64,
                        rep.original_edges() as f64,
                    ],
                });
            }
        }
        Ok(rows)
    })?;
    Ok(table)
}

pub fn snr_modes(cfg: &ExperimentConfig) -> [Mode; 3] {
    [Mode::Local, Mode::Remote, Mode::Joint(cfg.query.joint_p_local)]
}

pub fn run_snr_sweep(cfg: &ExperimentConfig) -> Result<Table> {
    let mut table = Table::new("snr", &["mode", "snr_db"], &["accuracy", "symbols"]);
    table.rows = run_trials(cfg, |trial| {
        let model = obtain_model(cfg, trial, None)?;
        let battery = Battery::new(cfg, trial, &model)?;
        let mut rows = Vec::new();
        for mode in snr_modes(cfg) {
            for &snr in &cfg.snr_grid {
                let out = battery.run(&trial.laps, mode.p_local(), snr)?;
                rows.push(Row {
                    keys: vec![mode.name().into(), snr.to_string()],
                    trial: trial.index,
                    metrics: vec![out.accuracy, out.symbols as f64],
                });
            }
        }
        Ok(rows)
    })?;
    Ok(table)
}

pub fn run_fraction_sweep(cfg: &ExperimentConfig) -> Result<Table> {
    let mut table = Table::new("fraction", &["snr_db", "transmitted_fraction"], &["accuracy", "symbols"]);
    table.rows = run_trials(cfg, |trial| {
        let model = obtain_model(cfg, trial, None)?;
        let battery = Battery::new(cfg, trial, &model)?;
        let mut rows = Vec::new();
        for &snr in &cfg.snr_grid {
            for &p_local in &cfg.p_local_grid {
                let out = battery.run(&trial.laps, p_local, snr)?;
                rows.push(Row {
                    keys: vec![snr.to_string(), fmt_num(1.0 - p_local)],
                    trial: trial.index,
                    metrics: vec![out.accuracy, out.symbols as f64],
                });
            }
        }
        Ok(rows)
    })?;
    Ok(table)
}

/// Training SNRs of the CSI sweep; the noiseless baseline comes first.
pub fn csi_train_grid(cfg: &ExperimentConfig) -> Vec<Db> {
    let mut grid = vec![Db::INF];
    grid.extend(cfg.csi.train_snr_db.iter().copied().filter(|d| d.0.is_finite()));
    grid
}

pub fn csi_eval_grid(cfg: &ExperimentConfig) -> Vec<Db> {
    if !cfg.csi.eval_snr_db.is_empty() {
        return cfg.csi.eval_snr_db.clone();
    }
    let mut grid = cfg.snr_grid.clone();
    if !grid.contains(&Db::INF) {
        grid.push(Db::INF);
    }
    grid
}

pub fn run_csi_sweep(cfg: &ExperimentConfig) -> Result<Table> {
    let mut table = Table::new("csi", &["train_snr_db", "eval_snr_db"], &["accuracy"]);
    table.rows = run_trials(cfg, |trial| {
        let mut rows = Vec::new();
        let base = obtain_model(cfg, trial, None)?;
        for train_snr in csi_train_grid(cfg) {
            let model = match train_snr.finite() {
                Some(snr) => tune_for_channel(cfg, &trial.complex, &base, snr, derive_seed(trial.seed, "train", 0))?.0,
                None => base.clone(),
            };
            let battery = Battery::new(cfg, trial, &model)?;
            for eval_snr in csi_eval_grid(cfg) {
                let out = battery.run(&trial.laps, cfg.csi.p_local, eval_snr)?;
                rows.push(Row {
                    keys: vec![train_snr.to_string(), eval_snr.to_string()],
                    trial: trial.index,
                    metrics: vec![out.accuracy],
                });
            }
        }
        Ok(rows)
    })?;
    Ok(table)
}

pub fn run_dimension_report(cfg: &ExperimentConfig) -> Result<Table> {
    let mut table = Table::new("dims", &["threshold", "order"], &["retained_edges", "original_edges"]);
    table.rows = run_trials(cfg, |trial| {
        let mut rows = Vec::new();
        for &l in &cfg.dims_thresholds {
            let (_, rep) = minimize_edges(&trial.laps, l)?;
            for c in &rep.per_order {
                rows.push(Row {
                    keys: vec![fmt_num(l), c.order.to_string()],
                    trial: trial.index,
                    metrics: vec![c.retained_edges as f64, c.original_edges as f64],
                });
            }
        }
        Ok(rows)
    })?;
    Ok(table)
}

pub fn run_sweep(cfg: &ExperimentConfig, sweep: Sweep) -> Result<Table> {
    match sweep {
        Sweep::Reduction => run_reduction_sweep(cfg),
        Sweep::Snr => run_snr_sweep(cfg),
        Sweep::Fraction => run_fraction_sweep(cfg),
        Sweep::Csi => run_csi_sweep(cfg),
        Sweep::Dims => run_dimension_report(cfg),
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    sweep: &'a str,
    version: &'a str,
    master_seed: u64,
    trial_seeds: Vec<u64>,
    config: &'a ExperimentConfig,
}

/// Files written for one sweep.
#[derive(Debug, Clone)]
pub struct SweepFiles {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub sidecar: PathBuf,
    pub svg: Option<PathBuf>,
}

pub fn write_sweep(cfg: &ExperimentConfig, sweep: Sweep, table: &Table, dir: &Path) -> Result<SweepFiles> {
    let name = sweep.name();
    let files = SweepFiles {
        csv: dir.join(format!("{name}.csv")),
        summary: dir.join(format!("{name}_summary.csv")),
        sidecar: dir.join(format!("{name}.json")),
        svg: cfg.svg.then(|| dir.join(format!("{name}.svg"))),
    };
    table::write_text(&files.csv, &table.to_csv())?;
    table::write_text(&files.summary, &table.summary_csv())?;
    let sidecar = Sidecar {
        sweep: name,
        version: VERSION,
        master_seed: cfg.seed,
        trial_seeds: (0..cfg.trials).map(|t| trial_seed(cfg, t)).collect(),
        config: cfg,
    };
    table::write_text(&files.sidecar, &serde_json::to_string_pretty(&sidecar)?)?;
    if let Some(svg) = &files.svg {
        let (x, s, m) = sweep.chart();
        table::write_text(svg, &table.to_svg(x, s, m)?)?;
    }
    Ok(files)
}
