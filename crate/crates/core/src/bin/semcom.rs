use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use semcom_core::channel::ChannelConfig;
use semcom_core::dataset::save_corpus;
use semcom_core::harness::{self, Db, ExperimentConfig, Sweep};
use semcom_core::protocol::{write_traces, KnowledgeState, Session};
use semcom_core::rng::derive_seed;
use semcom_core::{LaplacianSet, Result, Simplex, SimplicialComplex};

#[derive(Parser)]
#[command(name = "semcom", version, about = "Semantic query experiments over simplicial complexes")]
struct Cli {
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override any config field, e.g. `--set training.optimizer.epochs=50`.
    #[arg(long = "set", global = true, value_name = "PATH=VALUE")]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Read papers from this JSON Lines file instead of synthesizing.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    Reduction,
    Snr,
    Fraction,
    Csi,
    Dims,
}

impl From<SweepArg> for Sweep {
    fn from(s: SweepArg) -> Self {
        match s {
            SweepArg::Reduction => Sweep::Reduction,
            SweepArg::Snr => Sweep::Snr,
            SweepArg::Fraction => Sweep::Fraction,
            SweepArg::Csi => Sweep::Csi,
            SweepArg::Dims => Sweep::Dims,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample the corpus, build the complex and write it as JSON.
    Build {
        #[arg(long)]
        out: PathBuf,
        /// Also write the sampled papers as JSON Lines.
        #[arg(long)]
        papers: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Train a model on one trial's complex and save the checkpoint.
    Train {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// Train with channel noise at this SNR.
        #[arg(long)]
        csi_snr: Option<Db>,
    },
    /// Run one experiment sweep and write CSV, summary and sidecar files.
    Sweep {
        #[arg(value_enum)]
        kind: SweepArg,
        #[arg(long)]
        svg: bool,
    },
    /// Run a single query through the protocol and print its trace.
    Query {
        /// Comma-separated author ids.
        #[arg(long)]
        simplex: String,
        #[arg(long, default_value_t = 0.5)]
        p_local: f64,
        #[arg(long, default_value = "inf")]
        snr: Db,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Print the resolved config as JSON.
    Config,
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    if let Some(d) = &cli.output_dir {
        cfg.output_dir = d.clone();
    }
    if let Some(c) = &cli.corpus {
        cfg.corpus = harness::CorpusSource::File { path: c.clone() };
    }
    cfg.with_overrides(&cli.overrides)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = resolve(&cli)?;
    match cli.command {
        Command::Build { out, papers, trial } => {
            let t = harness::setup_trial(&cfg, trial)?;
            t.complex.save_json(&out)?;
            if let Some(p) = papers {
                save_corpus(&t.graph, p)?;
            }
            let counts: Vec<String> = (0..t.complex.num_orders()).map(|k| t.complex.count(k).to_string()).collect();
            println!(
                "papers={} simplices={} per_order=[{}]",
                t.graph.papers().len(),
                t.complex.len(),
                counts.join(",")
            );
        }
        Command::Train { out, trial, csi_snr } => {
            cfg.validate()?;
            let t = harness::setup_trial(&cfg, trial)?;
            let (model, report) = harness::train_model(
                &cfg,
                &t.complex,
                csi_snr.and_then(Db::finite),
                derive_seed(t.seed, "train", 0),
            )?;
            model.save_json(&out)?;
            let first = report.loss_trace.first().copied().unwrap_or(f64::NAN);
            let last = report.loss_trace.last().copied().unwrap_or(f64::NAN);
            println!("epochs={} loss_first={first:.6} loss_last={last:.6}", report.loss_trace.len());
        }
        Command::Sweep { kind, svg } => {
            cfg.svg |= svg;
            let sweep = Sweep::from(kind);
            let table = harness::run_sweep(&cfg, sweep)?;
            let files = harness::write_sweep(&cfg, sweep, &table, &cfg.output_dir)?;
            print!("{}", table.summary_csv());
            eprintln!("wrote {}", files.csv.display());
        }
        Command::Query {
            simplex,
            p_local,
            snr,
            trial,
            trace,
        } => {
            cfg.validate()?;
            let t = harness::setup_trial(&cfg, trial)?;
            let model = harness::obtain_model(&cfg, &t, None)?;
            let student = KnowledgeState::partial(
                &t.complex,
                cfg.query.student_knowledge,
                derive_seed(t.seed, "knowledge", 0),
            )?;
            let laps: LaplacianSet = t.laps.clone();
            let complex: &SimplicialComplex = &t.complex;
            let mut session = Session::new(complex, &laps, &model, student, cfg.query.protocol.clone())?;
            let q = Simplex::new(simplex.split(',').map(str::trim))?;
            let (_, tr) = session.query(&q, p_local, &ChannelConfig::new(snr.0, 0), derive_seed(t.seed, "cli-query", 0))?;
            println!("{}", serde_json::to_string(&tr)?);
            if let Some(p) = trace {
                write_traces(p, &[tr])?;
            }
        }
        Command::Config => {
            println!("{}", serde_json::to_string_pretty(&cfg)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
