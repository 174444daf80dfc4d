use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bifid_harness::config::{ExperimentConfig, Method, Replication};
use bifid_harness::experiment::{generate_data, run_experiment, RunOptions};
use bifid_harness::methods::FittedModel;
use bifid_harness::output::{report, summarize, summary_csv, write_all};
use bifid_harness::{data_io, metrics, HarnessError, Result};

#[derive(Parser)]
#[command(name = "bifid", version, about = "Bi-fidelity neural-network surrogates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (JSON); defaults to the beam benchmark.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the master seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the method (for `compare`: a comma-separated list).
    #[arg(long)]
    method: Option<String>,
    /// Format of the summary printed to stdout.
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Record wall-clock time per run (makes results.csv non-reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Writes lf.csv, hf.csv and validation.csv for the configured benchmark.
    GenerateData(Common),
    /// Trains one model and saves it under <out>/models.
    Train(Common),
    /// Validation error of a saved model on a dataset CSV.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Repeats one method under the configured replication protocol.
    Replicate(Common),
    /// Error against the number of high-fidelity samples.
    SweepNh(Common),
    /// Runs several methods under the same protocol.
    Compare(Common),
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::beam_default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(m) = &c.method {
        let methods = m
            .split(',')
            .map(|s| s.parse::<Method>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|msg| HarnessError::Config { path: "--method".into(), msg })?;
        cfg.method = methods[0];
        cfg.methods = methods;
    }
    Ok(cfg)
}

fn run(c: &Common, cfg: &ExperimentConfig, methods: &[Method], compare: bool) -> Result<()> {
    cfg.validate()?;
    let opts = RunOptions {
        timing: c.timing,
        models_dir: Some(c.out.join("models")),
    };
    let records = run_experiment(cfg, methods, &opts)?;
    let summary = summarize(cfg, &records);
    write_all(&c.out, &summary, &records)?;
    if compare {
        let text = report(cfg, &summary);
        std::fs::write(c.out.join("report.txt"), &text).map_err(|source| HarnessError::Io {
            path: c.out.join("report.txt"),
            source,
        })?;
        eprint!("{text}");
    }
    match c.format {
        Format::Csv => print!("{}", summary_csv(&summary)),
        Format::Json => println!("{}", serde_json::to_string_pretty(&summary)?),
    }
    Ok(())
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenerateData(c) => {
            let cfg = load(&c)?;
            let s = generate_data(&cfg, &c.out)?;
            log::info!(
                "wrote {} LF, {} HF and {} validation samples to {}",
                s.lf.len(),
                s.hf.len(),
                s.validation.len(),
                c.out.display()
            );
            Ok(())
        }
        Command::Train(c) => {
            let mut cfg = load(&c)?;
            cfg.replication = Replication::Single;
            run(&c, &cfg, &[cfg.method], false)
        }
        Command::Evaluate { model, data, format } => {
            let m = FittedModel::load(&model)?;
            let d = data_io::read_dataset(&data)?;
            let pred = m.predict(d.inputs())?;
            let err = metrics::rmse(&pred, d.outputs()).map_err(|source| HarnessError::Core {
                context: "rmse".into(),
                source,
            })?;
            match format {
                Format::Csv => println!("n,rmse\n{},{}", d.len(), data_io::format_value(err)),
                Format::Json => println!("{}", serde_json::json!({ "n": d.len(), "rmse": err })),
            }
            Ok(())
        }
        Command::Replicate(c) => {
            let mut cfg = load(&c)?;
            if cfg.replication == Replication::Single {
                log::info!("no replication protocol configured; using 30 init replicates");
                cfg.replication = Replication::InitReplicates { n: 30 };
            }
            run(&c, &cfg, &[cfg.method], false)
        }
        Command::SweepNh(c) => {
            let mut cfg = load(&c)?;
            if !matches!(cfg.replication, Replication::NhSweep { .. }) {
                log::info!("no N_h sweep configured; using N_h in {{5, 10, 20, 40}} with 5 repeats");
                cfg.replication = Replication::NhSweep {
                    values: vec![5, 10, 20, 40],
                    repeats: 5,
                };
            }
            run(&c, &cfg, &[cfg.method], false)
        }
        Command::Compare(c) => {
            let cfg = load(&c)?;
            let methods = cfg.compare_methods();
            run(&c, &cfg, &methods, true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
