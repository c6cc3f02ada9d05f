//! One test per acceptance criterion. Each prints a single
//! `criterion N: PASS|FAIL ...` line.
//!
//! Runs without the libtest harness so the verdict lines always reach
//! stdout. Exact criteria (1-6, 10, 11) assert. The directional criteria (7-9)
//! compare trained models against each other and report their verdict
//! without failing the run, unless `SEMCOM_STRICT_ACCEPTANCE=1` is set.

mod common;

use std::process::Command;
use std::sync::OnceLock;

use rand::Rng;
use rayon::prelude::*;

use common::fixture::thirty_simplex_complex;
use common::grad::layer_gradient_error;
use common::{direct_sum, min_eigenvalue, small_complex};
use semcom_core::channel::{measured_snr_db, transmit, ChannelConfig};
use semcom_core::complex::exact_query;
use semcom_core::harness::{
    obtain_model, run_sweep, setup_trial, tune_for_channel, Battery, Db, ExperimentConfig, Sweep, Trial,
};
use semcom_core::minimizer::{reduce_to_fraction, Scheme};
use semcom_core::protocol::{query_neighbourhood, KnowledgeState, ProtocolConfig, Session};
use semcom_core::rng::{derive_seed, rng_from_seed};
use semcom_core::scae::{make_masked_batch, masked_loss, train, Activation, ConvLayer, ScaeConfig, ScaeModel, TrainConfig};
use semcom_core::{LaplacianSet, SimplicialComplex};

const SEEDS: usize = 20;
const TOL_POINTS: f64 = 0.05;
const CSI_INF_POINTS: f64 = 0.02;

fn report(n: u32, pass: bool, detail: &str) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
}

fn strict() -> bool {
    std::env::var("SEMCOM_STRICT_ACCEPTANCE").is_ok_and(|v| v == "1")
}

fn majority(hits: usize, n: usize) -> bool {
    2 * hits > n
}

fn criterion_01_algebraic_core() {
    let mut worst_eig = f64::INFINITY;
    let mut bb_ok = true;
    let mut sym_ok = true;
    for seed in 0..120u64 {
        let (_, s) = small_complex(seed);
        assert!(s.len() <= 60);
        for k in 1..s.max_order().unwrap() {
            bb_ok &= s.incidence_matrix(k).unwrap().compose(&s.incidence_matrix(k + 1).unwrap()).unwrap().is_empty();
        }
        for k in 0..s.num_orders() {
            let l = s.hodge_laplacian(k).unwrap();
            sym_ok &= l.is_symmetric();
            worst_eig = worst_eig.min(min_eigenvalue(&l));
        }
    }
    let tri = SimplicialComplex::build(
        &semcom_core::BipartiteGraph::new(vec![semcom_core::PaperRecord::new("p", &["a", "b", "c"], 1).unwrap()])
            .unwrap(),
    );
    let l1 = common::dense(&tri.hodge_laplacian(1).unwrap());
    let tri_ok = l1 == nalgebra::DMatrix::identity(3, 3) * 3.0;
    let pass = bb_ok && sym_ok && worst_eig >= -1e-9 && tri_ok;
    report(
        1,
        pass,
        &format!("120 corpora: BB=0 {bb_ok}, symmetric {sym_ok}, min eigenvalue {worst_eig:.3e}, triangle L1=3I {tri_ok}"),
    );
    assert!(pass);
}

fn criterion_02_oracle_equivalence() {
    let mut checked = 0usize;
    let mut mismatches = 0usize;
    for seed in 1000..1120u64 {
        let (g, s) = small_complex(seed);
        for (k, i) in s.slots() {
            let q = s.simplex(k, i);
            checked += 1;
            if exact_query(&s, &g, q).ok() != Some(direct_sum(&g, q)) {
                mismatches += 1;
            }
        }
    }
    report(2, mismatches == 0, &format!("{checked} simplices over 120 corpora, {mismatches} mismatches"));
    assert_eq!(mismatches, 0);
}

fn criterion_03_gradient_correctness() {
    let mut worst = 0.0f64;
    let mut instances = 0;
    for degree in 0..=3 {
        for act in [Activation::Identity, Activation::leaky(0.01).unwrap()] {
            for i in 0..8u64 {
                worst = worst.max(layer_gradient_error(derive_seed(3, "grad", instances + i), degree, act));
            }
            instances += 8;
        }
    }
    let pass = worst < 1e-4;
    report(3, pass, &format!("{instances} instances over degrees 0-3 x 2 activations, worst relative error {worst:.2e}"));
    assert!(pass);
}

fn criterion_04_locality() {
    let mut leaks = 0usize;
    let mut probes = 0usize;
    for seed in 0..60u64 {
        let (_, s) = small_complex(seed + 500);
        let laps = LaplacianSet::from_complex(&s).unwrap();
        let mut rng = rng_from_seed(seed);
        for k in 0..laps.num_orders() {
            let op = laps.operator(k);
            let n = op.n_rows();
            let degree = (seed % 4) as usize;
            let mut layer = ConvLayer::new(k, 1, 3, degree, Activation::leaky(0.01).unwrap());
            layer.weights.iter_mut().for_each(|w| *w = rng.random_range(-1.0..1.0));
            let src = rng.random_range(0..n);
            let mut x = vec![vec![0.0; n]];
            x[0][src] = 1.0;
            let h = layer.forward(op, &x).unwrap();
            let dist = laps.hop_distances(k, src).unwrap();
            probes += 1;
            let leaked = (0..n).any(|i| !dist[i].is_some_and(|d| d <= degree) && h.iter().any(|c| c[i] != 0.0));
            leaks += usize::from(leaked);
        }
    }
    report(4, leaks == 0, &format!("{probes} impulse probes, {leaks} responses outside the N-hop ball"));
    assert_eq!(leaks, 0);
}

fn crit5_run(seed: u64) -> (f64, f64, Vec<f64>) {
    let s = thirty_simplex_complex();
    assert_eq!(s.len(), 30);
    let cfg = ScaeConfig { degree: 1, ..ScaeConfig::default() };
    let mut model = ScaeModel::new(cfg, s.num_orders(), seed).unwrap();
    let batches: Vec<_> = (0..4)
        .map(|b| {
            let mut batch = make_masked_batch(std::slice::from_ref(&s), 0.3, 2, 10.0, derive_seed(seed, "mask", b)).unwrap();
            batch.assign_remote(1.0, derive_seed(seed, "remote", b)).unwrap();
            batch
        })
        .collect();
    let eval = |m: &ScaeModel| {
        let all: Vec<f64> = batches
            .iter()
            .flat_map(|b| b.samples.iter().map(|x| masked_loss(m, x, None, 0).unwrap()))
            .collect();
        all.iter().sum::<f64>() / all.len() as f64
    };
    let before = eval(&model);
    let tc = TrainConfig { epochs: 200, learning_rate: 0.01, seed, ..TrainConfig::default() };
    let rep = train(&mut model, &batches, &tc).unwrap();
    (before, eval(&model), rep.loss_trace)
}

fn criterion_05_training_sanity() {
    let (before, after, trace) = crit5_run(5);
    let (_, again, trace2) = crit5_run(5);
    let deterministic = trace == trace2 && after == again;
    let drop = 1.0 - after / before;
    let pass = drop >= 0.5 && deterministic && trace.len() == 200;
    report(
        5,
        pass,
        &format!("masked L1 {before:.4} -> {after:.4} ({:.0}% decrease) over 200 epochs, deterministic {deterministic}", drop * 100.0),
    );
    assert!(pass);
}

fn criterion_06_channel_calibration() {
    let x: Vec<f64> = (0..100_000).map(|i| ((i * 7919) % 1013) as f64 / 500.0 - 1.0).collect();
    let cfg = ExperimentConfig::default();
    let mut worst = 0.0f64;
    for (n, snr) in cfg.snr_grid.iter().enumerate() {
        let t = transmit(&x, &ChannelConfig::new(snr.0, n as u64));
        worst = worst.max((measured_snr_db(&x, &t.payload) - snr.0).abs());
    }
    let pass = worst <= 0.5;
    report(6, pass, &format!("{} grid points at 1e5 symbols, worst deviation {worst:.4} dB", cfg.snr_grid.len()));
    assert!(pass);
}

/// Trials and noiseless-trained models shared by the directional criteria.
struct Shared {
    cfg: ExperimentConfig,
    trials: Vec<(Trial, ScaeModel)>,
}

fn shared() -> &'static Shared {
    static CELL: OnceLock<Shared> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = ExperimentConfig { trials: SEEDS, ..ExperimentConfig::default() };
        let trials = (0..SEEDS)
            .into_par_iter()
            .map(|t| {
                let trial = setup_trial(&cfg, t).unwrap();
                let model = obtain_model(&cfg, &trial, None).unwrap();
                (trial, model)
            })
            .collect();
        Shared { cfg, trials }
    })
}

fn criterion_07_reduction_robustness() {
    let sh = shared();
    let cfg = &sh.cfg;
    assert_eq!(cfg.walk.n_papers, 80);
    let heavy = [0.5, 0.75, 0.9];
    let per_seed: Vec<(bool, f64, Vec<bool>)> = sh
        .trials
        .par_iter()
        .map(|(trial, model)| {
            let battery = Battery::new(cfg, trial, model).unwrap();
            let acc = |laps: &LaplacianSet| battery.run(laps, cfg.reduction.p_local, cfg.reduction.snr_db).unwrap().accuracy;
            let rseed = derive_seed(trial.seed, "random-edge", 0);
            let full = acc(&trial.laps);
            let (deg, rep) = reduce_to_fraction(&trial.laps, Scheme::SimplexDegree, 0.5, rseed).unwrap();
            let halved = rep.retained_fraction <= 0.5;
            let loss = full - acc(&deg);
            let dominates = heavy
                .iter()
                .map(|&f| {
                    let (lap, _) = reduce_to_fraction(&trial.laps, Scheme::EdgeLaplacian, f, rseed).unwrap();
                    let (rnd, _) = reduce_to_fraction(&trial.laps, Scheme::RandomEdge, f, rseed).unwrap();
                    acc(&lap) >= acc(&rnd)
                })
                .collect();
            (halved, loss, dominates)
        })
        .collect();
    let n = per_seed.len();
    let within = per_seed.iter().filter(|(h, l, _)| *h && *l <= TOL_POINTS).count();
    let dom: Vec<usize> = (0..heavy.len()).map(|i| per_seed.iter().filter(|s| s.2[i]).count()).collect();
    let mean_loss = per_seed.iter().map(|s| s.1).sum::<f64>() / n as f64;
    let pass = majority(within, n) && dom.iter().all(|&d| majority(d, n));
    report(
        7,
        pass,
        &format!(
            "degree-ranked 50%: {within}/{n} seeds lose <=5 points (mean loss {:.1} points); Laplacian >= random at 50/75/90%: {}/{n}, {}/{n}, {}/{n}",
            mean_loss * 100.0,
            dom[0],
            dom[1],
            dom[2]
        ),
    );
    if strict() {
        assert!(pass);
    }
}

fn criterion_08_joint_dominance() {
    let sh = shared();
    let cfg = &sh.cfg;
    assert_eq!(cfg.query.student_knowledge, 0.5);
    let snrs = [-5.0, 0.0];
    let wins: Vec<[bool; 2]> = sh
        .trials
        .par_iter()
        .map(|(trial, model)| {
            let battery = Battery::new(cfg, trial, model).unwrap();
            let mut w = [false; 2];
            for (i, &snr) in snrs.iter().enumerate() {
                let run = |p| battery.run(&trial.laps, p, Db(snr)).unwrap().accuracy;
                let (local, remote, joint) = (run(1.0), run(0.0), run(cfg.query.joint_p_local));
                w[i] = joint > local && joint > remote;
            }
            w
        })
        .collect();
    let n = wins.len();
    let counts: Vec<usize> = (0..2).map(|i| wins.iter().filter(|w| w[i]).count()).collect();
    let pass = counts.iter().all(|&c| majority(c, n));
    report(8, pass, &format!("joint strictly beats local and remote at -5 dB in {}/{n} seeds, at 0 dB in {}/{n}", counts[0], counts[1]));
    if strict() {
        assert!(pass);
    }
}

fn criterion_09_csi_benefit() {
    let sh = shared();
    let cfg = &sh.cfg;
    let rows: Vec<(f64, f64, f64, f64)> = sh
        .trials
        .par_iter()
        .map(|(trial, base)| {
            let (csi, _) = tune_for_channel(cfg, &trial.complex, base, 0.0, derive_seed(trial.seed, "train", 0)).unwrap();
            let p = cfg.csi.p_local;
            let b = Battery::new(cfg, trial, base).unwrap();
            let c = Battery::new(cfg, trial, &csi).unwrap();
            (
                c.run(&trial.laps, p, Db(0.0)).unwrap().accuracy,
                b.run(&trial.laps, p, Db(0.0)).unwrap().accuracy,
                c.run(&trial.laps, p, Db::INF).unwrap().accuracy,
                b.run(&trial.laps, p, Db::INF).unwrap().accuracy,
            )
        })
        .collect();
    let n = rows.len();
    let wins = rows.iter().filter(|r| r.0 > r.1).count();
    let mean = |f: fn(&(f64, f64, f64, f64)) -> f64| rows.iter().map(f).sum::<f64>() / n as f64;
    let gap_inf = (mean(|r| r.2) - mean(|r| r.3)).abs();
    let close = rows.iter().filter(|r| (r.2 - r.3).abs() <= CSI_INF_POINTS).count();
    let pass = majority(wins, n) && gap_inf <= CSI_INF_POINTS;
    report(
        9,
        pass,
        &format!(
            "CSI beats baseline at 0 dB in {wins}/{n} seeds ({:.3} vs {:.3}); +inf mean gap {:.1} points ({close}/{n} seeds within 2)",
            mean(|r| r.0),
            mean(|r| r.1),
            gap_inf * 100.0
        ),
    );
    if strict() {
        assert!(pass);
    }
}

fn criterion_10_protocol_bookkeeping() {
    let cfg = ExperimentConfig::default().with_overrides(&["training.optimizer.epochs=5"]).unwrap();
    let trial = setup_trial(&cfg, 0).unwrap();
    let model = obtain_model(&cfg, &trial, None).unwrap();
    let student = KnowledgeState::partial(&trial.complex, 0.5, 10).unwrap();
    let mut session = Session::new(&trial.complex, &trial.laps, &model, student, ProtocolConfig::default()).unwrap();
    let slots: Vec<(usize, usize)> = trial.complex.slots().collect();
    let mut rng = rng_from_seed(10);
    let (mut violations, mut repeat_symbols) = (0usize, 0usize);
    for n in 0..500u64 {
        let (k, i) = slots[rng.random_range(0..slots.len())];
        let p = rng.random::<f64>();
        let ch = ChannelConfig::new([f64::INFINITY, 0.0, -5.0][n as usize % 3], 0);
        let q = trial.complex.simplex(k, i);
        let (ctx, _) = session.query(q, p, &ch, n).unwrap();
        let h = query_neighbourhood(&trial.laps, k, i, session.cfg.n_hop).unwrap();
        let mut union: Vec<usize> = ctx.g.iter().chain(&ctx.t).copied().collect();
        union.sort_unstable();
        let ok = union == h
            && ctx.g.iter().all(|j| !ctx.t.contains(j))
            && ctx.g.len() == (p * h.len() as f64).ceil() as usize
            && ctx.t_new.iter().all(|j| ctx.t.contains(j));
        violations += usize::from(!ok);
        let (_, again) = session.query(q, p, &ch, n + 10_000).unwrap();
        repeat_symbols += again.symbols;
    }
    let pass = violations == 0 && repeat_symbols == 0;
    report(10, pass, &format!("500-query soak: {violations} G/T violations, {repeat_symbols} symbols on repeated queries"));
    assert!(pass);
}

fn criterion_11_determinism() {
    let overrides = ["trials=2", "query.queries=100", "training.optimizer.epochs=60", "snr_grid=[-5,0,\"inf\"]"];
    let run = |dir: &std::path::Path| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_semcom"));
        cmd.args(["sweep", "snr", "--output-dir"]).arg(dir);
        for o in overrides {
            cmd.args(["--set", o]);
        }
        let out = cmd.output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (std::fs::read(dir.join("snr.csv")).unwrap(), std::fs::read(dir.join("snr_summary.csv")).unwrap())
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run(a.path());
    let second = run(b.path());
    let cfg = ExperimentConfig::default().with_overrides(&overrides).unwrap();
    let in_process = run_sweep(&cfg, Sweep::Snr).unwrap().to_csv().into_bytes();
    let pass = first == second && first.0 == in_process;
    report(11, pass, &format!("two `sweep snr` runs: {} CSV bytes, identical {}", first.0.len(), first == second));
    assert!(pass);
}

fn main() {
    let criteria: [(&str, fn()); 11] = [
        ("algebraic core", criterion_01_algebraic_core),
        ("oracle equivalence", criterion_02_oracle_equivalence),
        ("gradient correctness", criterion_03_gradient_correctness),
        ("locality", criterion_04_locality),
        ("training sanity", criterion_05_training_sanity),
        ("channel calibration", criterion_06_channel_calibration),
        ("reduction robustness", criterion_07_reduction_robustness),
        ("joint dominance", criterion_08_joint_dominance),
        ("csi benefit", criterion_09_csi_benefit),
        ("protocol bookkeeping", criterion_10_protocol_bookkeeping),
        ("determinism", criterion_11_determinism),
    ];
    let failed: Vec<&str> = criteria
        .iter()
        .filter(|(_, f)| std::panic::catch_unwind(f).is_err())
        .map(|(name, _)| *name)
        .collect();
    if failed.is_empty() {
        println!("acceptance: all asserted criteria hold");
    } else {
        println!("acceptance: assertion failures in {}", failed.join(", "));
        std::process::exit(1);
    }
}
