//! Fitting each surrogate on one bi-fidelity split and predicting in raw units.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use bifid_core::cokriging::ck_optimize;
use bifid_core::gp::gp_optimize;
use bifid_core::nn::store::{read_params, write_params};
use bifid_core::nn::{init_params, predict_batch};
use bifid_core::optim::{train, TrainMask};
use bifid_core::transfer::{bfwl, bftl1, bftl2, train_lowfi};
use bifid_core::{CoKrigingModel, Dataset, GPModel, Matrix, NetworkParams, NetworkSpec, StackedModel, TransferConfig};

use crate::config::{ExperimentConfig, Method};
use crate::error::{Context, HarnessError, Result};
use crate::normalize::Normalizer;
use crate::seeds::{stream, Purpose, StreamIndices};

/// LF training set, HF training set and held-out HF validation set.
#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    pub lf: Dataset,
    pub hf: Dataset,
    pub validation: Dataset,
}

/// A trained surrogate together with the standardization it was trained under.
#[derive(Clone, Debug, PartialEq)]
pub enum FittedModel {
    Network {
        spec: NetworkSpec,
        params: NetworkParams,
        norm: Normalizer,
    },
    Stacked {
        model: StackedModel,
        norm: Normalizer,
    },
    Gp {
        model: GPModel,
        norm: Normalizer,
    },
    /// `norm` maps inputs and HF outputs; LF outputs were scaled separately.
    CoKriging {
        model: CoKrigingModel,
        norm: Normalizer,
    },
}

impl FittedModel {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        let (z, norm) = match self {
            FittedModel::Network { norm, .. }
            | FittedModel::Stacked { norm, .. }
            | FittedModel::Gp { norm, .. }
            | FittedModel::CoKriging { norm, .. } => (norm.inputs(x), norm),
        };
        let raw = match self {
            FittedModel::Network { spec, params, .. } => predict_batch(spec, params, &z),
            FittedModel::Stacked { model, .. } => model.predict_batch(&z),
            FittedModel::Gp { model, .. } => model.predict_batch(&z).map(|(p, _)| p.iter().map(|p| p.mean).collect()),
            FittedModel::CoKriging { model, .. } => {
                model.predict_batch(&z).map(|(p, _)| p.iter().map(|p| p.mean).collect())
            }
        }
        .context(|| "prediction".into())?;
        Ok(raw.into_iter().map(|v| norm.inverse_output(v)).collect())
    }

    /// Writes the model under `dir` with file stem `stem`; returns the path
    /// that [`FittedModel::load`] accepts.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let net = |name: String, spec: &NetworkSpec, params: &NetworkParams, norm: &Normalizer| -> Result<PathBuf> {
            let path = dir.join(name);
            let f = create(&path)?;
            let meta = serde_json::json!({ "normalizer": norm });
            write_params(BufWriter::new(f), spec, params, meta).context(|| format!("writing {}", path.display()))?;
            Ok(path)
        };
        let manifest = |saved: &SavedModel| -> Result<PathBuf> {
            let path = dir.join(format!("{stem}.json"));
            serde_json::to_writer_pretty(BufWriter::new(create(&path)?), saved)?;
            Ok(path)
        };
        match self {
            FittedModel::Network { spec, params, norm } => net(format!("{stem}.bin"), spec, params, norm),
            FittedModel::Stacked { model, norm } => {
                net(format!("{stem}_base.bin"), &model.base_spec, &model.base, norm)?;
                net(format!("{stem}_head.bin"), &model.head_spec, &model.head, norm)?;
                manifest(&SavedModel::Stacked {
                    base: format!("{stem}_base.bin"),
                    head: format!("{stem}_head.bin"),
                    norm: norm.clone(),
                })
            }
            FittedModel::Gp { model, norm } => manifest(&SavedModel::Gp {
                model: model.clone(),
                norm: norm.clone(),
            }),
            FittedModel::CoKriging { model, norm } => manifest(&SavedModel::CoKriging {
                model: model.clone(),
                norm: norm.clone(),
            }),
        }
    }

    /// Reads a `.bin` network or a `.json` manifest written by [`FittedModel::save`].
    pub fn load(path: &Path) -> Result<Self> {
        let open = |p: &Path| {
            File::open(p).map(BufReader::new).map_err(|source| HarnessError::Io {
                path: p.to_path_buf(),
                source,
            })
        };
        let net = |p: &Path| -> Result<(NetworkSpec, NetworkParams, Normalizer)> {
            let (spec, params, header) = read_params(open(p)?).context(|| format!("reading {}", p.display()))?;
            let norm = header
                .meta
                .get("normalizer")
                .cloned()
                .map(serde_json::from_value)
                .transpose()?
                .unwrap_or_else(|| Normalizer::identity(spec.input_dim));
            Ok((spec, params, norm))
        };
        if path.extension().is_some_and(|e| e == "bin") {
            let (spec, params, norm) = net(path)?;
            return Ok(FittedModel::Network { spec, params, norm });
        }
        let saved: SavedModel = serde_json::from_reader(open(path)?)?;
        Ok(match saved {
            SavedModel::Gp { model, norm } => FittedModel::Gp { model, norm },
            SavedModel::CoKriging { model, norm } => FittedModel::CoKriging { model, norm },
            SavedModel::Stacked { base, head, norm } => {
                let dir = path.parent().unwrap_or(Path::new("."));
                let (base_spec, base, _) = net(&dir.join(base))?;
                let (head_spec, head, _) = net(&dir.join(head))?;
                FittedModel::Stacked {
                    model: StackedModel {
                        base_spec,
                        base,
                        head_spec,
                        head,
                    },
                    norm,
                }
            }
        })
    }
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum SavedModel {
    Stacked { base: String, head: String, norm: Normalizer },
    Gp { model: GPModel, norm: Normalizer },
    CoKriging { model: CoKrigingModel, norm: Normalizer },
}

/// Trains `method` on `splits`. Random streams come from `master` at the
/// indices in `idx`: initialization and GP restarts use `idx.init`, sample
/// draws use `idx.sgd`.
pub fn fit(method: Method, cfg: &ExperimentConfig, splits: &Splits, master: u64, idx: StreamIndices) -> Result<FittedModel> {
    let std = cfg.standardize;
    let mut init_rng = stream(master, Purpose::Init, idx.init);
    let mut lf_rng = stream(master, Purpose::SgdLf, idx.sgd);
    let mut hf_rng = stream(master, Purpose::SgdHf, idx.sgd);
    let mut gp_rng = stream(master, Purpose::GpSearch, idx.init);
    let ctx = |what: &'static str| move || format!("{method}: {what}");

    // Single-fidelity methods see only D_h; the others share the LF scaling.
    let norm = if matches!(method, Method::StandardHF | Method::GPOnly) {
        Normalizer::fit(&splits.hf, std.inputs, std.outputs)
    } else {
        Normalizer::fit(&splits.lf, std.inputs, std.outputs)
    };
    let d_l = norm.dataset(&splits.lf).context(ctx("scaling D_l"))?;
    let d_h = norm.dataset(&splits.hf).context(ctx("scaling D_h"))?;
    let spec = cfg.architecture.spec(splits.hf.dim()).context(ctx("architecture"))?;

    let lowfi = |init: &mut _, sgd: &mut _| {
        let out = train_lowfi(&spec, &d_l, &cfg.training.lf_stage(method), init, sgd).context(ctx("LF training"))?;
        log_final(method, "LF", &out.loss_history);
        Ok::<_, HarnessError>(out.params)
    };

    let model = match method {
        Method::StandardHF => {
            let p0 = init_params(&spec, &mut init_rng);
            let out = train(
                &spec,
                &p0,
                &d_h,
                &cfg.training.hf_stage(method),
                &TrainMask::all(&p0),
                None,
                &mut hf_rng,
            )
            .context(ctx("HF training"))?;
            log_final(method, "HF", &out.loss_history);
            FittedModel::Network {
                spec,
                params: out.params,
                norm,
            }
        }
        Method::BFTL1 => {
            let lf = lowfi(&mut init_rng, &mut lf_rng)?;
            let out = bftl1(
                &spec,
                &lf,
                &d_h,
                &cfg.training.hf_stage(method),
                cfg.transfer.n_adapt_layers,
                &mut hf_rng,
            )
            .context(ctx("fine-tuning"))?;
            log_final(method, "HF", &out.loss_history);
            FittedModel::Network {
                spec,
                params: out.params,
                norm,
            }
        }
        Method::BFTL2 => {
            let lf = lowfi(&mut init_rng, &mut lf_rng)?;
            let head_spec = cfg.head.spec(1).context(ctx("head architecture"))?;
            let (model, hist) = bftl2(
                &spec,
                &lf,
                &head_spec,
                &d_h,
                &cfg.training.hf_stage(method),
                &mut init_rng,
                &mut hf_rng,
            )
            .context(ctx("head training"))?;
            log_final(method, "HF", &hist);
            FittedModel::Stacked { model, norm }
        }
        Method::BFWL => {
            let lf = lowfi(&mut init_rng, &mut lf_rng)?;
            let tcfg = TransferConfig {
                lf_train: cfg.training.lf_stage(method),
                hf_train: cfg.training.hf_stage(method),
                n_adapt_layers: cfg.transfer.n_adapt_layers,
                beta: cfg.transfer.beta,
                teacher: cfg.transfer.teacher.clone(),
            };
            let out = bfwl(&spec, &lf, &d_l, &d_h, &tcfg, &mut gp_rng, &mut hf_rng).context(ctx("weighted training"))?;
            log_final(method, "soft", &out.loss_history);
            FittedModel::Network {
                spec,
                params: out.params,
                norm,
            }
        }
        Method::GPOnly => {
            let model = gp_optimize(d_h.inputs(), d_h.outputs(), &cfg.gp.kernel, &cfg.gp.noise, &cfg.gp.search, &mut gp_rng)
                .context(ctx("GP fit"))?;
            FittedModel::Gp { model, norm }
        }
        Method::CoKriging => {
            // Each fidelity's outputs get their own scaling; inputs share the LF one.
            let norm_l = norm;
            let norm_h = if std.outputs { norm_l.with_output_of(&splits.hf) } else { norm_l.clone() };
            let d_l = norm_l.dataset(&splits.lf).context(ctx("scaling D_l"))?;
            let d_h = norm_h.dataset(&splits.hf).context(ctx("scaling D_h"))?;
            let model = ck_optimize(
                d_l.inputs(),
                d_l.outputs(),
                d_h.inputs(),
                d_h.outputs(),
                &cfg.cokriging.template,
                &cfg.cokriging.search,
                &mut gp_rng,
            )
            .context(ctx("co-kriging fit"))?;
            FittedModel::CoKriging { model, norm: norm_h }
        }
    };
    Ok(model)
}

fn log_final(method: Method, stage: &str, hist: &[bifid_core::optim::LossRecord<f64>]) {
    if let Some(r) = hist.last() {
        log::debug!("{method} {stage} stage: loss {:.3e} after {} steps", r.loss, r.step);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    fn toy_splits() -> Splits {
        let f = |x: &[f64], hi: bool| 1.0 + x[0] + 0.5 * x[1] * x[1] + if hi { 0.1 * x[0] * x[1] } else { 0.0 };
        let grid = |n: usize, off: f64| -> Matrix {
            Matrix::from_fn(n, 2, |i, j| ((i as f64 * 0.37 + j as f64 * 0.61 + off) % 1.0) * 2.0 - 1.0)
        };
        let mk = |x: Matrix, hi: bool| {
            let y = x.rows().map(|r| f(r, hi)).collect();
            Dataset::new(x, y).unwrap()
        };
        Splits {
            lf: mk(grid(60, 0.0), false),
            hf: mk(grid(12, 0.13), true),
            validation: mk(grid(20, 0.29), true),
        }
    }

    fn small_cfg() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::beam_default();
        cfg.architecture.hidden_widths = vec![6, 6];
        cfg.head.hidden_widths = vec![4];
        cfg.training.max_steps = 300;
        cfg.gp.search.restarts = 1;
        cfg.cokriging.search.restarts = 1;
        cfg.transfer.teacher.search.restarts = 1;
        cfg
    }

    #[test]
    fn every_method_fits_saves_and_reloads() {
        let splits = toy_splits();
        let cfg = small_cfg();
        let dir = tempfile::tempdir().unwrap();
        for m in Method::ALL {
            let model = fit(m, &cfg, &splits, 3, StreamIndices::base()).unwrap();
            let pred = model.predict(splits.validation.inputs()).unwrap();
            assert!(pred.iter().all(|v| v.is_finite()), "{m}");
            let path = model.save(dir.path(), m.name()).unwrap();
            let back = FittedModel::load(&path).unwrap();
            assert_eq!(back.predict(splits.validation.inputs()).unwrap(), pred, "{m}");
        }
    }

    #[test]
    fn same_indices_give_identical_models() {
        let splits = toy_splits();
        let cfg = small_cfg();
        let a = fit(Method::BFWL, &cfg, &splits, 9, StreamIndices::base()).unwrap();
        let b = fit(Method::BFWL, &cfg, &splits, 9, StreamIndices::base()).unwrap();
        assert_eq!(a, b);
        let other = StreamIndices { init: 1, ..StreamIndices::base() };
        assert_ne!(a, fit(Method::BFWL, &cfg, &splits, 9, other).unwrap());
    }
}
