//! Result files: `results.csv`, `summary.json`, `histogram*.csv` and the
//! comparison report.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{DataConfig, ExperimentConfig, Method, Replication};
use crate::data_io::format_value;
use crate::error::{HarnessError, Result};
use crate::experiment::RunRecord;
use crate::metrics::{HistogramBin, ReplicationSummary};

pub const RESULTS_HEADER: &str = "method,seed,N_l,N_h,N_v,rmse,wall_time_s,replicate";

pub fn write_results_to<W: Write>(mut w: W, records: &[RunRecord]) -> std::io::Result<()> {
    writeln!(w, "{RESULTS_HEADER}")?;
    for r in records {
        let time = r.wall_time_s.map(|t| format!("{t:.6}")).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.method,
            r.seed,
            r.n_l,
            r.n_h,
            r.n_v,
            format_value(r.rmse),
            time,
            r.replicate
        )?;
    }
    w.flush()
}

/// Errors of one method (at one `N_h`) over its replicates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub method: Method,
    pub n_l: usize,
    pub n_h: usize,
    pub n_v: usize,
    pub replicates: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub rmses: Vec<f64>,
    pub histogram: Vec<HistogramBin>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub replication: Replication,
    pub entries: Vec<SummaryEntry>,
}

/// Groups records by method and `N_h`, keeping first-seen order.
pub fn summarize(cfg: &ExperimentConfig, records: &[RunRecord]) -> Summary {
    let mut keys: Vec<(Method, usize)> = Vec::new();
    for r in records {
        if !keys.contains(&(r.method, r.n_h)) {
            keys.push((r.method, r.n_h));
        }
    }
    let entries = keys
        .into_iter()
        .map(|(method, n_h)| {
            let group: Vec<&RunRecord> = records.iter().filter(|r| r.method == method && r.n_h == n_h).collect();
            let rmses: Vec<f64> = group.iter().map(|r| r.rmse).collect();
            let s = ReplicationSummary::new(method.name(), rmses);
            SummaryEntry {
                method,
                n_l: group[0].n_l,
                n_h,
                n_v: group[0].n_v,
                replicates: group.len(),
                mean: s.mean,
                std: s.std,
                min: s.rmses.iter().copied().fold(f64::INFINITY, f64::min),
                max: s.rmses.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                rmses: s.rmses,
                histogram: s.histogram,
            }
        })
        .collect();
    Summary {
        seed: cfg.seed,
        replication: cfg.replication.clone(),
        entries,
    }
}

pub fn write_histogram_to<W: Write>(mut w: W, bins: &[HistogramBin]) -> std::io::Result<()> {
    writeln!(w, "bin_left,bin_right,count")?;
    for b in bins {
        writeln!(w, "{},{},{}", format_value(b.bin_left), format_value(b.bin_right), b.count)?;
    }
    w.flush()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `results.csv`, `summary.json` and the histograms into `out`.
/// A single group gets `histogram.csv`; several get one file per group.
pub fn write_all(out: &Path, summary: &Summary, records: &[RunRecord]) -> Result<()> {
    std::fs::create_dir_all(out).map_err(io(out))?;
    let p = out.join("results.csv");
    write_results_to(create(&p)?, records).map_err(io(&p))?;
    let p = out.join("summary.json");
    let mut w = create(&p)?;
    serde_json::to_writer_pretty(&mut w, summary)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(io(&p))?;
    let sweep = matches!(summary.replication, Replication::NhSweep { .. });
    for e in &summary.entries {
        let name = match (summary.entries.len(), sweep) {
            (1, _) => "histogram.csv".to_string(),
            (_, true) => format!("histogram_{}_nh{}.csv", e.method, e.n_h),
            _ => format!("histogram_{}.csv", e.method),
        };
        let p = out.join(name);
        write_histogram_to(create(&p)?, &e.histogram).map_err(io(&p))?;
    }
    Ok(())
}

/// Mean errors published for the four network methods (standard, BFTL-1,
/// BFTL-2, BFWL) on the beam benchmark at `N_l = 250`, `N_h = 20`.
const REFERENCE: [(&str, bool, [f64; 4]); 4] = [
    ("init replicates, FNN", false, [6.0055e-3, 4.0435e-3, 3.4245e-3, 4.5453e-4]),
    ("init replicates, ResNet", true, [2.1694e-3, 3.3929e-3, 1.9507e-3, 5.6579e-4]),
    ("dataset replicates, FNN", false, [5.4115e-3, 2.6621e-3, 4.5706e-3, 4.9860e-4]),
    ("dataset replicates, ResNet", true, [1.5013e-3, 3.3807e-3, 4.2873e-3, 7.3800e-4]),
];

/// Plain-text table of per-method means, with reference values for the
/// matching protocol as a footer.
pub fn report(cfg: &ExperimentConfig, summary: &Summary) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<12} {:>5} {:>5} {:>12} {:>12} {:>12} {:>12}", "method", "N_h", "reps", "mean", "std", "min", "max");
    for e in &summary.entries {
        let _ = writeln!(
            s,
            "{:<12} {:>5} {:>5} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}",
            e.method.name(),
            e.n_h,
            e.replicates,
            e.mean,
            e.std,
            e.min,
            e.max
        );
    }
    let resnet = !cfg.architecture.skips.is_empty();
    let protocol = match cfg.replication {
        Replication::InitReplicates { .. } => Some("init"),
        Replication::DatasetReplicates { .. } => Some("dataset"),
        _ => None,
    };
    let beam_sizes = matches!(cfg.data, DataConfig::Beam { n_l: 250, n_h: 20, .. });
    if let (Some(p), true) = (protocol, beam_sizes) {
        if let Some((label, _, vals)) = REFERENCE.iter().find(|(l, r, _)| l.starts_with(p) && *r == resnet) {
            let _ = writeln!(s, "\nreference values ({label}; not reproduced by this run):");
            for (m, v) in [Method::StandardHF, Method::BFTL1, Method::BFTL2, Method::BFWL].iter().zip(vals) {
                let _ = writeln!(s, "{:<12} {:>12.4e}", m.name(), v);
            }
        }
    }
    s
}

pub fn summary_csv(summary: &Summary) -> String {
    let mut s = String::from("method,N_l,N_h,N_v,replicates,mean,std,min,max\n");
    for e in &summary.entries {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            e.method,
            e.n_l,
            e.n_h,
            e.n_v,
            e.replicates,
            format_value(e.mean),
            format_value(e.std),
            format_value(e.min),
            format_value(e.max)
        );
    }
    s
}
