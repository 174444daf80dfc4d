//! Stochastic gradient optimizers: plain SGD and Adam with per-sample
//! learning-rate weights and parameter freezing.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_len, config, Result};
use crate::nn::{backprop_into, forward_into, loss_mse, NetworkParams, NetworkSpec, Workspace};
use crate::Scalar;

/// Learning rate `η_k` as a constant or an explicit per-step list (`k` from 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LearningRate<T> {
    Constant(T),
    Schedule(Vec<T>),
}

impl<T: Scalar> LearningRate<T> {
    pub fn at(&self, k: usize) -> T {
        match self {
            Self::Constant(eta) => *eta,
            Self::Schedule(etas) => etas[k - 1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct AdamConfig<T> {
    pub eta: LearningRate<T>,
    #[serde(default = "default_b_m")]
    pub b_m: T,
    #[serde(default = "default_b_v")]
    pub b_v: T,
    #[serde(default = "default_eps")]
    pub eps: T,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    /// Steps between full-dataset loss evaluations.
    #[serde(default = "default_loss_stride")]
    pub loss_stride: usize,
    /// Stop once the strided training loss improves by less than 1e-10
    /// (relative) over 10 consecutive strides.
    #[serde(default)]
    pub early_stop: bool,
}

fn default_b_m<T: Scalar>() -> T {
    T::of(0.9)
}
fn default_b_v<T: Scalar>() -> T {
    T::of(0.999)
}
fn default_eps<T: Scalar>() -> T {
    T::of(1e-8)
}
fn default_max_steps() -> usize {
    50_000
}
fn default_loss_stride() -> usize {
    100
}

const EARLY_STOP_REL: f64 = 1e-10;
const EARLY_STOP_PATIENCE: usize = 10;

impl<T: Scalar> AdamConfig<T> {
    pub fn new(eta: T, max_steps: usize) -> Self {
        Self {
            eta: LearningRate::Constant(eta),
            b_m: default_b_m(),
            b_v: default_b_v(),
            eps: default_eps(),
            max_steps,
            loss_stride: default_loss_stride(),
            early_stop: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: T| v > T::zero() && v < T::one();
        if !unit(self.b_m) || !unit(self.b_v) {
            return Err(config("Adam b_m and b_v must lie in (0, 1)"));
        }
        if !(self.eps > T::zero()) {
            return Err(config("Adam eps must be positive"));
        }
        if self.loss_stride == 0 {
            return Err(config("loss_stride must be positive"));
        }
        match &self.eta {
            LearningRate::Constant(eta) if !(*eta > T::zero() && eta.is_finite()) => {
                Err(config(format!("learning rate must be positive, got {eta}")))
            }
            LearningRate::Schedule(etas) if etas.len() < self.max_steps => Err(config(format!(
                "learning-rate schedule has {} entries for {} steps",
                etas.len(),
                self.max_steps
            ))),
            LearningRate::Schedule(etas) if etas.iter().any(|e| !(*e > T::zero())) => {
                Err(config("every scheduled learning rate must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// Per-parameter trainable flags in the flat parameter layout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainMask {
    flags: Vec<bool>,
    all: bool,
}

impl TrainMask {
    pub fn all<T: Scalar>(params: &NetworkParams<T>) -> Self {
        Self {
            flags: vec![true; params.len()],
            all: true,
        }
    }

    pub fn from_flags(flags: Vec<bool>) -> Result<Self> {
        if !flags.iter().any(|&f| f) {
            return Err(config("train mask must leave at least one parameter trainable"));
        }
        let all = flags.iter().all(|&f| f);
        Ok(Self { flags, all })
    }

    /// Unfreezes the top `n` hidden layers and the output layer only.
    pub fn upper_layers<T: Scalar>(params: &NetworkParams<T>, n: usize) -> Result<Self> {
        let depth = params.depth();
        if n > depth {
            return Err(config(format!("cannot adapt {n} of {depth} hidden layers")));
        }
        let mut flags = vec![false; params.len()];
        for i in depth - n + 1..=depth {
            flags[params.hidden_block(i).all()].iter_mut().for_each(|f| *f = true);
        }
        flags[params.output_block().all()].iter_mut().for_each(|f| *f = true);
        let all = flags.iter().all(|&f| f);
        Ok(Self { flags, all })
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn is_all(&self) -> bool {
        self.all
    }
}

/// `params ← params − η·grad`.
pub fn sgd_step<T: Scalar>(params: &mut NetworkParams<T>, grad: &NetworkParams<T>, eta: T) -> Result<()> {
    check_len("gradient", params.len(), grad.len())?;
    if !(eta > T::zero()) {
        return Err(config("learning rate must be positive"));
    }
    for (p, &g) in params.values_mut().iter_mut().zip(grad.values()) {
        *p -= eta * g;
    }
    Ok(())
}

/// Moment accumulators `m`, `v` and the step counter `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub k: usize,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            k: 0,
        }
    }

    /// One Adam update with learning rate `eta · weight` on the unmasked components.
    ///
    /// Masked-out entries of the parameters and of `m`, `v` are left untouched.
    pub fn step(
        &mut self,
        cfg: &AdamConfig<T>,
        params: &mut [T],
        grad: &[T],
        eta: T,
        weight: T,
        mask: &TrainMask,
    ) -> Result<()> {
        check_len("gradient", params.len(), grad.len())?;
        check_len("adam state", params.len(), self.m.len())?;
        check_len("train mask", params.len(), mask.len())?;
        if !(eta > T::zero() && eta.is_finite()) {
            return Err(config(format!("learning rate must be positive, got {eta}")));
        }
        if !(weight > T::zero() && weight.is_finite()) {
            return Err(config(format!("learning-rate weight must be positive, got {weight}")));
        }
        self.apply(cfg, params, grad, eta * weight, mask);
        Ok(())
    }

    /// Unchecked update used by the training loop.
    fn apply(&mut self, cfg: &AdamConfig<T>, params: &mut [T], grad: &[T], rate: T, mask: &TrainMask) {
        self.k += 1;
        let one = T::one();
        let k = self.k as i32;
        let bias_m = one - cfg.b_m.powi(k);
        let bias_v = one - cfg.b_v.powi(k);
        let all = mask.is_all();
        for j in 0..params.len() {
            if !all && !mask.flags[j] {
                continue;
            }
            let g = grad[j];
            let m = cfg.b_m * self.m[j] + (one - cfg.b_m) * g;
            let v = cfg.b_v * self.v[j] + (one - cfg.b_v) * g * g;
            self.m[j] = m;
            self.v[j] = v;
            let m_hat = m / bias_m;
            let v_hat = v / bias_v;
            params[j] -= rate * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
}

/// Functional form of [`AdamState::step`].
#[allow(clippy::too_many_arguments)]
pub fn adam_step<T: Scalar>(
    state: &AdamState<T>,
    params: &NetworkParams<T>,
    grad: &NetworkParams<T>,
    cfg: &AdamConfig<T>,
    eta: T,
    weight: T,
    mask: &TrainMask,
) -> Result<(AdamState<T>, NetworkParams<T>)> {
    let mut s = state.clone();
    let mut p = params.clone();
    s.step(cfg, p.values_mut(), grad.values(), eta, weight, mask)?;
    Ok((s, p))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord<T> {
    pub step: usize,
    pub loss: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome<T> {
    pub params: NetworkParams<T>,
    pub loss_history: Vec<LossRecord<T>>,
    pub steps: usize,
}

/// Adam on single samples drawn uniformly with replacement.
///
/// At step `k` a row `i_k` is drawn from `rng`, the gradient of
/// `(y_{i_k} − ŷ(x_{i_k}))²` is taken, and the update uses `η_k·weights[i_k]`
/// (weight 1 when `weights` is `None`). The full-dataset loss is recorded at
/// step 0, every `loss_stride` steps and at the last step.
pub fn train<T: Scalar, R: Rng + ?Sized>(
    spec: &NetworkSpec<T>,
    params0: &NetworkParams<T>,
    data: &Dataset<T>,
    cfg: &AdamConfig<T>,
    mask: &TrainMask,
    weights: Option<&[T]>,
    rng: &mut R,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    params0.check_spec(spec)?;
    check_len("train mask", params0.len(), mask.len())?;
    check_len("dataset inputs", spec.input_dim, data.dim())?;
    if let Some(w) = weights {
        check_len("sample weights", data.len(), w.len())?;
        if w.iter().any(|&v| !(v > T::zero() && v.is_finite())) {
            return Err(config("sample weights must be positive and finite"));
        }
    }

    let mut params = params0.clone();
    let mut state = AdamState::new(params.len());
    let mut ws = Workspace::new(spec);
    let mut grad = vec![T::zero(); params.len()];
    let mut history = vec![LossRecord {
        step: 0,
        loss: loss_mse(spec, &params, data)?,
    }];
    let mut stalled = 0usize;
    let n = data.len();
    let two = T::of(2.0);
    let mut k = 0;

    while k < cfg.max_steps {
        k += 1;
        let i = rng.gen_range(0..n);
        let (x, y) = data.sample(i);
        forward_into(spec, &params, x, &mut ws.trace);
        let residual = ws.trace.output - y;
        grad.iter_mut().for_each(|g| *g = T::zero());
        backprop_into(spec, &params, &mut ws, two * residual, &mut grad);
        let weight = weights.map_or(T::one(), |w| w[i]);
        state.apply(cfg, params.values_mut(), &grad, cfg.eta.at(k) * weight, mask);

        if k % cfg.loss_stride == 0 || k == cfg.max_steps {
            let loss = loss_mse(spec, &params, data)?;
            let prev = history.last().map(|r| r.loss).unwrap_or(loss);
            history.push(LossRecord { step: k, loss });
            if cfg.early_stop {
                let improvement = (prev - loss) / prev.abs().max(T::min_positive_value());
                if improvement < T::of(EARLY_STOP_REL) {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
                if stalled >= EARLY_STOP_PATIENCE {
                    break;
                }
            }
        }
    }
    if !params.is_finite() {
        return Err(crate::Error::Domain(format!(
            "training diverged to non-finite parameters after {k} steps"
        )));
    }
    Ok(TrainOutcome {
        params,
        loss_history: history,
        steps: k,
    })
}
