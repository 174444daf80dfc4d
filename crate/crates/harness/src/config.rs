//! Experiment configuration: one JSON document, unknown keys rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use bifid_core::benchmarks::{BeamGeometry, HighFidelityConfig, InputDistribution};
use bifid_core::cokriging::CoKrigingTemplate;
use bifid_core::gp::{Hyper, KernelSpec, SearchOptions};
use bifid_core::nn::{Activation, NetworkSpec, Skip, DEFAULT_WIDTH_CAP};
use bifid_core::optim::AdamConfig;
use bifid_core::transfer::TeacherConfig;

use crate::error::{config_err, HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "standard_hf")]
    StandardHF,
    #[serde(rename = "bftl1")]
    BFTL1,
    #[serde(rename = "bftl2")]
    BFTL2,
    #[serde(rename = "bfwl")]
    BFWL,
    #[serde(rename = "gp_only")]
    GPOnly,
    #[serde(rename = "cokriging")]
    CoKriging,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::StandardHF,
        Method::BFTL1,
        Method::BFTL2,
        Method::BFWL,
        Method::GPOnly,
        Method::CoKriging,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::StandardHF => "standard_hf",
            Method::BFTL1 => "bftl1",
            Method::BFTL2 => "bftl2",
            Method::BFWL => "bfwl",
            Method::GPOnly => "gp_only",
            Method::CoKriging => "cokriging",
        }
    }

    /// Whether the method trains a network on the low-fidelity data first.
    pub fn uses_lowfi_network(self) -> bool {
        matches!(self, Method::BFTL1 | Method::BFTL2 | Method::BFWL)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name().replace('_', "") == key || (key == "standard" && *m == Method::StandardHF) || (key == "gp" && *m == Method::GPOnly))
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                format!("unknown method `{s}`; expected one of {}", names.join(", "))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub hidden_widths: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation<f64>,
    #[serde(default)]
    pub skips: Vec<Skip>,
    #[serde(default = "default_width_cap")]
    pub width_cap: usize,
}

fn default_activation() -> Activation<f64> {
    Activation::elu(1.0)
}
fn default_width_cap() -> usize {
    DEFAULT_WIDTH_CAP
}

impl Architecture {
    fn with_widths(widths: Vec<usize>) -> Self {
        Self {
            hidden_widths: widths,
            activation: default_activation(),
            skips: Vec::new(),
            width_cap: default_width_cap(),
        }
    }

    pub fn spec(&self, input_dim: usize) -> bifid_core::Result<NetworkSpec<f64>> {
        let spec = NetworkSpec {
            input_dim,
            hidden_widths: self.hidden_widths.clone(),
            hidden_activations: vec![self.activation; self.hidden_widths.len()],
            skips: self.skips.clone(),
        };
        spec.validate_with_cap(self.width_cap)?;
        Ok(spec)
    }
}

impl Default for Architecture {
    /// Two hidden layers of 15 ELU units.
    fn default() -> Self {
        Self::with_widths(vec![15, 15])
    }
}

fn default_head() -> Architecture {
    Architecture::with_widths(vec![20])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    /// Cantilever benchmark: a pool of sampled inputs labelled by both
    /// models, split into disjoint LF / HF / validation rows.
    Beam {
        n_l: usize,
        n_h: usize,
        n_v: usize,
        /// Pool size; defaults to the smallest pool that fits every split.
        #[serde(default)]
        pool: Option<usize>,
        #[serde(default)]
        geometry: BeamGeometry,
        #[serde(default)]
        high_fidelity: HighFidelityConfig,
        #[serde(default = "InputDistribution::beam")]
        distribution: InputDistribution,
    },
    /// Pre-generated CSV files with header `x1,...,xd,y`.
    Files { lf: PathBuf, hf: PathBuf, validation: PathBuf },
}

/// Learning rates `(η on D_l, η on D_h)` of one method.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageRates {
    pub lf: f64,
    pub hf: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateTable {
    #[serde(default = "rates_standard")]
    pub standard_hf: StageRates,
    #[serde(default = "rates_bftl1")]
    pub bftl1: StageRates,
    #[serde(default = "rates_bftl2")]
    pub bftl2: StageRates,
    #[serde(default = "rates_bfwl")]
    pub bfwl: StageRates,
}

fn rates_standard() -> StageRates {
    StageRates { lf: 1e-4, hf: 1e-4 }
}
fn rates_bftl1() -> StageRates {
    StageRates { lf: 4e-4, hf: 1e-4 }
}
fn rates_bftl2() -> StageRates {
    StageRates { lf: 1e-3, hf: 1e-4 }
}
fn rates_bfwl() -> StageRates {
    StageRates { lf: 1e-3, hf: 2e-4 }
}

impl Default for RateTable {
    fn default() -> Self {
        Self {
            standard_hf: rates_standard(),
            bftl1: rates_bftl1(),
            bftl2: rates_bftl2(),
            bfwl: rates_bfwl(),
        }
    }
}

impl RateTable {
    pub fn for_method(&self, m: Method) -> StageRates {
        match m {
            Method::BFTL1 => self.bftl1,
            Method::BFTL2 => self.bftl2,
            Method::BFWL => self.bfwl,
            _ => self.standard_hf,
        }
    }
}

/// Adam settings shared by every network stage; the rate comes from `rates`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    /// Overrides `max_steps` for the low-fidelity stage.
    #[serde(default)]
    pub lf_max_steps: Option<usize>,
    #[serde(default = "default_loss_stride")]
    pub loss_stride: usize,
    #[serde(default)]
    pub early_stop: bool,
    #[serde(default = "default_b_m")]
    pub b_m: f64,
    #[serde(default = "default_b_v")]
    pub b_v: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub rates: RateTable,
}

fn default_max_steps() -> usize {
    50_000
}
fn default_loss_stride() -> usize {
    100
}
fn default_b_m() -> f64 {
    0.9
}
fn default_b_v() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            max_steps: default_max_steps(),
            lf_max_steps: None,
            loss_stride: default_loss_stride(),
            early_stop: false,
            b_m: default_b_m(),
            b_v: default_b_v(),
            eps: default_eps(),
            rates: RateTable::default(),
        }
    }
}

impl TrainingConfig {
    fn adam(&self, eta: f64, steps: usize) -> AdamConfig<f64> {
        AdamConfig {
            b_m: self.b_m,
            b_v: self.b_v,
            eps: self.eps,
            loss_stride: self.loss_stride,
            early_stop: self.early_stop,
            ..AdamConfig::new(eta, steps)
        }
    }

    pub fn lf_stage(&self, m: Method) -> AdamConfig<f64> {
        self.adam(self.rates.for_method(m).lf, self.lf_max_steps.unwrap_or(self.max_steps))
    }

    pub fn hf_stage(&self, m: Method) -> AdamConfig<f64> {
        self.adam(self.rates.for_method(m).hf, self.max_steps)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferParams {
    #[serde(default = "default_adapt")]
    pub n_adapt_layers: usize,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub teacher: TeacherConfig<f64>,
}

fn default_adapt() -> usize {
    1
}
fn default_beta() -> f64 {
    -0.25
}

impl Default for TransferParams {
    fn default() -> Self {
        Self {
            n_adapt_layers: default_adapt(),
            beta: default_beta(),
            teacher: TeacherConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpConfig {
    #[serde(default = "default_gp_kernel")]
    pub kernel: KernelSpec<f64>,
    #[serde(default = "default_gp_noise")]
    pub noise: Hyper<f64>,
    #[serde(default)]
    pub search: SearchOptions,
}

fn default_gp_kernel() -> KernelSpec<f64> {
    KernelSpec::Rbf {
        amplitude: Hyper::bounded(1.0, 1e-2, 1e2),
        length: Hyper::bounded(1.0, 1e-2, 1e2),
    }
}
fn default_gp_noise() -> Hyper<f64> {
    Hyper::bounded(1e-6, 1e-10, 1e-1)
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            kernel: default_gp_kernel(),
            noise: default_gp_noise(),
            search: SearchOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoKrigingConfig {
    #[serde(default = "default_ck_template")]
    pub template: CoKrigingTemplate<f64>,
    #[serde(default)]
    pub search: SearchOptions,
}

fn default_ck_template() -> CoKrigingTemplate<f64> {
    CoKrigingTemplate {
        kernel_l: default_gp_kernel(),
        kernel_corr: KernelSpec::Rbf {
            amplitude: Hyper::bounded(0.1, 1e-3, 1e1),
            length: Hyper::bounded(1.0, 1e-2, 1e2),
        },
        rho: Hyper::bounded(1.0, -5.0, 5.0),
        noise_l: default_gp_noise(),
        noise_h: default_gp_noise(),
    }
}

impl Default for CoKrigingConfig {
    fn default() -> Self {
        Self {
            template: default_ck_template(),
            search: SearchOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Standardize {
    #[serde(default = "yes")]
    pub inputs: bool,
    #[serde(default = "yes")]
    pub outputs: bool,
}

fn yes() -> bool {
    true
}

impl Default for Standardize {
    fn default() -> Self {
        Self {
            inputs: true,
            outputs: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Replication {
    Single,
    /// Fixed datasets, `n` network initializations.
    InitReplicates { n: usize },
    /// Fixed initialization, `n` fresh splits of the sample pool.
    DatasetReplicates { n: usize },
    /// One run per `N_h`, repeated over `repeats` data/init draws.
    NhSweep {
        values: Vec<usize>,
        #[serde(default = "one")]
        repeats: usize,
    },
}

fn one() -> usize {
    1
}

impl Default for Replication {
    fn default() -> Self {
        Replication::Single
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_method")]
    pub method: Method,
    /// Methods run by `compare`; empty means all of them.
    #[serde(default)]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub architecture: Architecture,
    /// Correction head used by BFTL-2 (input is the scalar LF prediction).
    #[serde(default = "default_head")]
    pub head: Architecture,
    pub data: DataConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub transfer: TransferParams,
    #[serde(default)]
    pub gp: GpConfig,
    #[serde(default)]
    pub cokriging: CoKrigingConfig,
    #[serde(default)]
    pub standardize: Standardize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub replication: Replication,
}

fn default_method() -> Method {
    Method::BFWL
}

impl ExperimentConfig {
    /// The beam benchmark at the sizes used throughout: 250 LF, 20 HF and
    /// 50 validation samples.
    pub fn beam_default() -> Self {
        Self {
            method: default_method(),
            methods: Vec::new(),
            architecture: Architecture::default(),
            head: default_head(),
            data: DataConfig::Beam {
                n_l: 250,
                n_h: 20,
                n_v: 50,
                pool: None,
                geometry: BeamGeometry::default(),
                high_fidelity: HighFidelityConfig::default(),
                distribution: InputDistribution::beam(),
            },
            training: TrainingConfig::default(),
            transfer: TransferParams::default(),
            gp: GpConfig::default(),
            cokriging: CoKrigingConfig::default(),
            standardize: Standardize::default(),
            seed: 0,
            replication: Replication::Single,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_err(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn compare_methods(&self) -> Vec<Method> {
        if self.methods.is_empty() {
            Method::ALL.to_vec()
        } else {
            self.methods.clone()
        }
    }

    /// Checks every field before any computation.
    pub fn validate(&self) -> Result<()> {
        let arch = |path: &str, a: &Architecture, input_dim: usize| {
            a.spec(input_dim).map(|_| ()).map_err(|e| config_err(path, e.to_string()))
        };
        let input_dim = match &self.data {
            DataConfig::Beam { distribution, .. } => distribution.dim(),
            DataConfig::Files { .. } => 1,
        };
        arch("architecture", &self.architecture, input_dim)?;
        arch("head", &self.head, 1)?;
        if self.transfer.n_adapt_layers > self.architecture.hidden_widths.len() {
            return Err(config_err(
                "transfer.n_adapt_layers",
                format!(
                    "{} exceeds the {} hidden layers",
                    self.transfer.n_adapt_layers,
                    self.architecture.hidden_widths.len()
                ),
            ));
        }
        if !self.transfer.beta.is_finite() {
            return Err(config_err("transfer.beta", "must be finite"));
        }
        self.transfer
            .teacher
            .kernel
            .validate()
            .map_err(|e| config_err("transfer.teacher.kernel", e.to_string()))?;
        self.gp.kernel.validate().map_err(|e| config_err("gp.kernel", e.to_string()))?;
        self.cokriging
            .template
            .kernel_l
            .validate()
            .map_err(|e| config_err("cokriging.template.kernel_l", e.to_string()))?;
        self.cokriging
            .template
            .kernel_corr
            .validate()
            .map_err(|e| config_err("cokriging.template.kernel_corr", e.to_string()))?;
        for (path, h) in [
            ("transfer.teacher.noise", &self.transfer.teacher.noise),
            ("gp.noise", &self.gp.noise),
            ("cokriging.template.noise_l", &self.cokriging.template.noise_l),
            ("cokriging.template.noise_h", &self.cokriging.template.noise_h),
        ] {
            check_noise(path, h)?;
        }
        if let Some((lo, hi)) = self.cokriging.template.rho.bounds {
            if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
                return Err(config_err("cokriging.template.rho.bounds", "need finite lower <= upper"));
            }
        }
        for (path, s) in [
            ("transfer.teacher.search", &self.transfer.teacher.search),
            ("gp.search", &self.gp.search),
            ("cokriging.search", &self.cokriging.search),
        ] {
            if !(s.diameter_tol > 0.0) || s.max_iters == 0 {
                return Err(config_err(path, "diameter_tol must be positive and max_iters at least 1"));
            }
        }
        self.validate_training()?;
        self.validate_data()?;
        self.validate_replication()
    }

    fn validate_training(&self) -> Result<()> {
        let t = &self.training;
        if t.loss_stride == 0 {
            return Err(config_err("training.loss_stride", "must be at least 1"));
        }
        for (path, v) in [("training.b_m", t.b_m), ("training.b_v", t.b_v)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(config_err(path, format!("must lie in (0, 1), got {v}")));
            }
        }
        if !(t.eps > 0.0) {
            return Err(config_err("training.eps", "must be positive"));
        }
        for (name, r) in [
            ("standard_hf", t.rates.standard_hf),
            ("bftl1", t.rates.bftl1),
            ("bftl2", t.rates.bftl2),
            ("bfwl", t.rates.bfwl),
        ] {
            for (stage, v) in [("lf", r.lf), ("hf", r.hf)] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(config_err(format!("training.rates.{name}.{stage}"), format!("must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }

    fn validate_data(&self) -> Result<()> {
        match &self.data {
            DataConfig::Beam {
                n_l,
                n_h,
                n_v,
                pool,
                geometry,
                distribution,
                high_fidelity,
            } => {
                for (name, v) in [("n_l", n_l), ("n_h", n_h), ("n_v", n_v)] {
                    if *v == 0 {
                        return Err(config_err(format!("data.{name}"), "must be at least 1"));
                    }
                }
                let need = n_l + self.max_n_h() + n_v;
                if let Some(p) = pool {
                    if *p < need {
                        return Err(config_err(
                            "data.pool",
                            format!("{p} rows cannot hold {need} disjoint LF, HF and validation samples"),
                        ));
                    }
                }
                geometry.validate().map_err(|e| config_err("data.geometry", e.to_string()))?;
                distribution
                    .validate()
                    .map_err(|e| config_err("data.distribution", e.to_string()))?;
                if distribution.dim() != 4 {
                    return Err(config_err("data.distribution.bounds", "the beam takes exactly 4 inputs"));
                }
                if !high_fidelity.c1.is_finite() || high_fidelity.c2.is_some_and(|c| !c.is_finite()) {
                    return Err(config_err("data.high_fidelity", "coefficients must be finite"));
                }
                Ok(())
            }
            DataConfig::Files { .. } => match self.replication {
                Replication::DatasetReplicates { .. } | Replication::NhSweep { .. } => Err(config_err(
                    "replication.mode",
                    "dataset replicates and N_h sweeps need the beam generator as data source",
                )),
                _ => Ok(()),
            },
        }
    }

    fn validate_replication(&self) -> Result<()> {
        match &self.replication {
            Replication::Single => Ok(()),
            Replication::InitReplicates { n } | Replication::DatasetReplicates { n } => {
                if *n == 0 {
                    Err(config_err("replication.n", "must be at least 1"))
                } else {
                    Ok(())
                }
            }
            Replication::NhSweep { values, repeats } => {
                if values.is_empty() || values.contains(&0) {
                    return Err(config_err("replication.values", "need a nonempty list of positive N_h values"));
                }
                if *repeats == 0 {
                    return Err(config_err("replication.repeats", "must be at least 1"));
                }
                Ok(())
            }
        }
    }

    /// Largest `N_h` any run of this config will use.
    pub fn max_n_h(&self) -> usize {
        let base = match &self.data {
            DataConfig::Beam { n_h, .. } => *n_h,
            DataConfig::Files { .. } => 0,
        };
        match &self.replication {
            Replication::NhSweep { values, .. } => values.iter().copied().max().unwrap_or(base).max(base),
            _ => base,
        }
    }
}

fn check_noise(path: &str, h: &Hyper<f64>) -> Result<()> {
    if !(h.value >= 0.0 && h.value.is_finite()) {
        return Err(config_err(format!("{path}.value"), "noise variance must be nonnegative"));
    }
    if let Some((lo, hi)) = h.bounds {
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(config_err(format!("{path}.bounds"), "need 0 < lower <= upper"));
        }
    }
    Ok(())
}
