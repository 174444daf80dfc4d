//! Sample pools, disjoint splits and replication plans.

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use bifid_core::benchmarks::{evaluate_beam, sample_inputs, BeamModel, HighFidelityModel};
use bifid_core::{Dataset, Matrix};

use crate::config::{DataConfig, ExperimentConfig, Method, Replication};
use crate::data_io::read_dataset;
use crate::error::{config_err, Context, HarnessError, Result};
use crate::methods::{fit, FittedModel, Splits};
use crate::metrics::rmse;
use crate::seeds::{stream, Purpose, StreamIndices};

/// Every pool row labelled by both fidelities.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePool {
    pub inputs: Matrix,
    pub lowfi: Vec<f64>,
    pub highfi: Vec<f64>,
}

/// Row indices of one split; the three sets are disjoint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitIndices {
    pub lf: Vec<usize>,
    pub hf: Vec<usize>,
    pub validation: Vec<usize>,
}

pub enum DataSource {
    Pool {
        pool: SamplePool,
        n_l: usize,
        n_h: usize,
        n_v: usize,
        /// HF rows reserved per split, so smaller `N_h` sets are nested in larger ones.
        hf_reserve: usize,
    },
    Fixed(Splits),
}

impl SamplePool {
    pub fn len(&self) -> usize {
        self.lowfi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lowfi.is_empty()
    }
}

impl DataSource {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        match &cfg.data {
            DataConfig::Beam {
                n_l,
                n_h,
                n_v,
                pool,
                geometry,
                high_fidelity,
                distribution,
            } => {
                let hf_reserve = cfg.max_n_h();
                let size = pool.unwrap_or(n_l + hf_reserve + n_v);
                let model = HighFidelityModel::new(high_fidelity, *geometry, distribution).context(|| "high-fidelity model".into())?;
                let inputs = sample_inputs(distribution, size, &mut stream(cfg.seed, Purpose::Pool, 0));
                let lowfi = evaluate_beam(BeamModel::BeamLF, &model, &inputs).context(|| "labelling pool".into())?;
                let highfi = evaluate_beam(BeamModel::BeamHF, &model, &inputs).context(|| "labelling pool".into())?;
                Ok(DataSource::Pool {
                    pool: SamplePool { inputs, lowfi, highfi },
                    n_l: *n_l,
                    n_h: *n_h,
                    n_v: *n_v,
                    hf_reserve,
                })
            }
            DataConfig::Files { lf, hf, validation } => Ok(DataSource::Fixed(Splits {
                lf: read_dataset(lf)?,
                hf: read_dataset(hf)?,
                validation: read_dataset(validation)?,
            })),
        }
    }

    pub fn split_indices(&self, master: u64, data_index: u64, n_h: Option<usize>) -> Result<SplitIndices> {
        match self {
            DataSource::Pool {
                pool,
                n_l,
                n_h: base,
                n_v,
                hf_reserve,
            } => {
                let n_h = n_h.unwrap_or(*base);
                let reserve = (*hf_reserve).max(n_h);
                if n_l + reserve + n_v > pool.len() {
                    return Err(config_err(
                        "data.pool",
                        format!("{} rows cannot hold {n_l} + {reserve} + {n_v} disjoint samples", pool.len()),
                    ));
                }
                let mut perm: Vec<usize> = (0..pool.len()).collect();
                perm.shuffle(&mut stream(master, Purpose::Split, data_index));
                Ok(SplitIndices {
                    validation: perm[..*n_v].to_vec(),
                    hf: perm[*n_v..n_v + n_h].to_vec(),
                    lf: perm[n_v + reserve..n_v + reserve + n_l].to_vec(),
                })
            }
            DataSource::Fixed(_) => Err(config_err("data.source", "file datasets have no pool to split")),
        }
    }

    pub fn splits(&self, master: u64, data_index: u64, n_h: Option<usize>) -> Result<Splits> {
        match self {
            DataSource::Fixed(s) => {
                if n_h.is_some_and(|n| n != s.hf.len()) {
                    return Err(config_err("replication", "file datasets cannot change N_h"));
                }
                Ok(s.clone())
            }
            DataSource::Pool { pool, .. } => {
                let idx = self.split_indices(master, data_index, n_h)?;
                let take = |rows: &[usize], y: &[f64]| -> Result<Dataset> {
                    let x = pool.inputs.select_rows(rows);
                    Dataset::new(x, rows.iter().map(|&i| y[i]).collect()).context(|| "split".into())
                };
                Ok(Splits {
                    lf: take(&idx.lf, &pool.lowfi)?,
                    hf: take(&idx.hf, &pool.highfi)?,
                    validation: take(&idx.validation, &pool.highfi)?,
                })
            }
        }
    }
}

/// One scheduled training run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Task {
    pub method: Method,
    pub replicate: usize,
    pub indices: StreamIndices,
    /// Overrides the configured `N_h`.
    pub n_h: Option<usize>,
}

/// The runs a replication mode asks for, per method, in output order.
pub fn plan(replication: &Replication, methods: &[Method]) -> Vec<Task> {
    let mut tasks = Vec::new();
    for &method in methods {
        let mut push = |replicate: usize, indices: StreamIndices, n_h: Option<usize>| {
            tasks.push(Task {
                method,
                replicate,
                indices,
                n_h,
            })
        };
        match replication {
            Replication::Single => push(0, StreamIndices::base(), None),
            Replication::InitReplicates { n } => {
                for i in 0..*n {
                    push(i, StreamIndices { init: i as u64, ..StreamIndices::base() }, None);
                }
            }
            Replication::DatasetReplicates { n } => {
                for i in 0..*n {
                    push(i, StreamIndices { data: i as u64, ..StreamIndices::base() }, None);
                }
            }
            Replication::NhSweep { values, repeats } => {
                for &n_h in values {
                    for r in 0..*repeats {
                        let k = r as u64;
                        push(r, StreamIndices { data: k, init: k, sgd: k }, Some(n_h));
                    }
                }
            }
        }
    }
    tasks
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub seed: u64,
    pub replicate: usize,
    pub n_l: usize,
    pub n_h: usize,
    pub n_v: usize,
    pub rmse: f64,
    pub wall_time_s: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub timing: bool,
    /// Directory receiving the model of replicate 0 of each method and `N_h`.
    pub models_dir: Option<std::path::PathBuf>,
}

pub fn run_task(cfg: &ExperimentConfig, source: &DataSource, task: &Task, opts: &RunOptions) -> Result<(RunRecord, FittedModel)> {
    let splits = source.splits(cfg.seed, task.indices.data, task.n_h)?;
    let start = Instant::now();
    let model = fit(task.method, cfg, &splits, cfg.seed, task.indices)?;
    let pred = model.predict(splits.validation.inputs())?;
    let elapsed = start.elapsed().as_secs_f64();
    let err = rmse(&pred, splits.validation.outputs()).context(|| "validation rmse".into())?;
    if let (Some(dir), 0) = (&opts.models_dir, task.replicate) {
        let stem = match task.n_h {
            Some(n) => format!("{}_nh{n}", task.method),
            None => task.method.to_string(),
        };
        model.save(dir, &stem)?;
    }
    let record = RunRecord {
        method: task.method,
        seed: cfg.seed,
        replicate: task.replicate,
        n_l: splits.lf.len(),
        n_h: splits.hf.len(),
        n_v: splits.validation.len(),
        rmse: err,
        wall_time_s: opts.timing.then_some(elapsed),
    };
    log::info!(
        "{} replicate {} (N_h = {}): rmse {:.4e}",
        record.method,
        record.replicate,
        record.n_h,
        record.rmse
    );
    Ok((record, model))
}

/// Worker threads from `BIFID_THREADS`; unset or 0 means one per core.
pub fn thread_count() -> usize {
    std::env::var("BIFID_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0)
}

/// Runs `tasks` on a worker pool; records come back in task order.
pub fn run_tasks(cfg: &ExperimentConfig, source: &DataSource, tasks: &[Task], opts: &RunOptions) -> Result<Vec<RunRecord>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| config_err("BIFID_THREADS", e.to_string()))?;
    pool.install(|| {
        tasks
            .par_iter()
            .map(|t| {
                run_task(cfg, source, t, opts).map(|(r, _)| r).map_err(|e| HarnessError::Replicate {
                    index: t.replicate,
                    source: Box::new(e),
                })
            })
            .collect()
    })
}

/// Runs the configured replication plan for `methods`.
pub fn run_experiment(cfg: &ExperimentConfig, methods: &[Method], opts: &RunOptions) -> Result<Vec<RunRecord>> {
    let source = DataSource::from_config(cfg)?;
    run_tasks(cfg, &source, &plan(&cfg.replication, methods), opts)
}

/// Writes the LF, HF and validation sets of split 0.
pub fn generate_data(cfg: &ExperimentConfig, out: &Path) -> Result<Splits> {
    let splits = DataSource::from_config(cfg)?.splits(cfg.seed, 0, None)?;
    std::fs::create_dir_all(out).map_err(|source| HarnessError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    crate::data_io::write_dataset(&out.join("lf.csv"), &splits.lf)?;
    crate::data_io::write_dataset(&out.join("hf.csv"), &splits.hf)?;
    crate::data_io::write_dataset(&out.join("validation.csv"), &splits.validation)?;
    Ok(splits)
}
