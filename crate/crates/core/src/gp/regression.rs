use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, config, Error, Result};
use crate::gp::search::{minimize_multistart, Coord, SearchOptions};
use crate::gp::{Hyper, KernelSpec};
#[cfg(test)]
use crate::gp::MaternNu;
use crate::linalg::{dot, Cholesky, Matrix};
use crate::Scalar;

/// Posterior mean and variance at one query point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction<T> {
    pub mean: T,
    pub variance: T,
    /// The raw variance came out negative from round-off and was set to 0.
    pub clamped: bool,
}

/// Zero-mean GP conditioned on training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GPModel<T> {
    pub train_inputs: Matrix<T>,
    pub train_outputs: Vec<T>,
    pub kernel: KernelSpec<T>,
    pub noise_var: T,
    pub chol: Cholesky<T>,
    /// `(K + σ_n² I)⁻¹ y`
    pub dual: Vec<T>,
}

fn check_data<T: Scalar>(x: &Matrix<T>, y: &[T], noise_var: T) -> Result<()> {
    check_len("GP outputs", x.nrows(), y.len())?;
    if y.is_empty() {
        return Err(config("GP needs at least one training sample"));
    }
    if !(noise_var >= T::zero() && noise_var.is_finite()) {
        return Err(config(format!("noise variance must be nonnegative, got {noise_var}")));
    }
    Ok(())
}

fn factor<T: Scalar>(x: &Matrix<T>, kernel: &KernelSpec<T>, noise_var: T) -> Result<Cholesky<T>> {
    let mut k = kernel.gram(x);
    for i in 0..k.nrows() {
        k.set(i, i, k.get(i, i) + noise_var);
    }
    Cholesky::factor_with_jitter(&k)
}

/// Factorizes `K + σ_n² I` and stores the dual weights.
pub fn gp_fit<T: Scalar>(x: &Matrix<T>, y: &[T], kernel: &KernelSpec<T>, noise_var: T) -> Result<GPModel<T>> {
    check_data(x, y, noise_var)?;
    kernel.validate()?;
    let chol = factor(x, kernel, noise_var)?;
    let dual = chol.solve(y)?;
    Ok(GPModel {
        train_inputs: x.clone(),
        train_outputs: y.to_vec(),
        kernel: kernel.clone(),
        noise_var,
        chol,
        dual,
    })
}

impl<T: Scalar> GPModel<T> {
    pub fn predict(&self, xp: &[T]) -> Result<Prediction<T>> {
        check_len("GP query", self.train_inputs.ncols(), xp.len())?;
        let k = self.kernel.cross(&self.train_inputs, xp);
        let mean = dot(&k, &self.dual);
        let z = self.chol.solve_lower(&k)?;
        let raw = self.kernel.prior_variance(xp) - dot(&z, &z);
        let clamped = raw < T::zero();
        Ok(Prediction {
            mean,
            variance: if clamped { T::zero() } else { raw },
            clamped,
        })
    }

    /// Predictions at every row, with the number of clamped variances.
    pub fn predict_batch(&self, xs: &Matrix<T>) -> Result<(Vec<Prediction<T>>, usize)> {
        let preds: Vec<_> = xs.rows().map(|r| self.predict(r)).collect::<Result<_>>()?;
        let clamped = preds.iter().filter(|p| p.clamped).count();
        Ok((preds, clamped))
    }

    pub fn len(&self) -> usize {
        self.train_outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_outputs.is_empty()
    }

    /// Negative log marginal likelihood of the training data under this model.
    pub fn nll(&self) -> T {
        nll_from(&self.chol, &self.train_outputs, &self.dual)
    }
}

pub fn gp_predict<T: Scalar>(model: &GPModel<T>, xp: &[T]) -> Result<Prediction<T>> {
    model.predict(xp)
}

pub(crate) fn nll_from<T: Scalar>(chol: &Cholesky<T>, y: &[T], dual: &[T]) -> T {
    let half = T::of(0.5);
    let n = T::of(y.len() as f64);
    half * dot(y, dual) + half * chol.log_det() + half * n * T::of(std::f64::consts::TAU).ln()
}

/// `½ yᵀ(K+σ_n²I)⁻¹y + ½ log|K+σ_n²I| + (N/2) log 2π`.
pub fn gp_nll<T: Scalar>(x: &Matrix<T>, y: &[T], kernel: &KernelSpec<T>, noise_var: T) -> Result<T> {
    check_data(x, y, noise_var)?;
    kernel.validate()?;
    let chol = factor(x, kernel, noise_var)?;
    let dual = chol.solve(y)?;
    Ok(nll_from(&chol, y, &dual))
}

/// How a hyperparameter enters the search.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Slot {
    /// Not searched; keep the template value.
    Fixed,
    /// Bounds collapse to one value.
    Pinned(f64),
    /// Searched as `ln(value)` in `[ln lower, ln upper]`.
    Log(Coord),
    /// Searched on the natural scale.
    Linear(Coord),
}

impl Slot {
    pub(crate) fn log<T: Scalar>(h: &Hyper<T>) -> Result<Self> {
        Ok(match h.bounds {
            None => Slot::Fixed,
            Some((lo, hi)) => {
                let (lo, hi) = (lo.to_f64_lossy(), hi.to_f64_lossy());
                if !(lo > 0.0 && lo <= hi) {
                    return Err(config(format!("log-scale bounds ({lo}, {hi}) must satisfy 0 < lower <= upper")));
                }
                if lo == hi {
                    Slot::Pinned(lo)
                } else {
                    let v = h.value.to_f64_lossy();
                    let start = if v > 0.0 { v.ln() } else { lo.ln() };
                    Slot::Log(Coord {
                        start,
                        lower: lo.ln(),
                        upper: hi.ln(),
                    })
                }
            }
        })
    }

    pub(crate) fn linear<T: Scalar>(h: &Hyper<T>) -> Result<Self> {
        Ok(match h.bounds {
            None => Slot::Fixed,
            Some((lo, hi)) => {
                let (lo, hi) = (lo.to_f64_lossy(), hi.to_f64_lossy());
                if !(lo <= hi) {
                    return Err(config(format!("bounds ({lo}, {hi}) must satisfy lower <= upper")));
                }
                if lo == hi {
                    Slot::Pinned(lo)
                } else {
                    Slot::Linear(Coord {
                        start: h.value.to_f64_lossy(),
                        lower: lo,
                        upper: hi,
                    })
                }
            }
        })
    }

    pub(crate) fn coord(&self) -> Option<Coord> {
        match self {
            Slot::Log(c) | Slot::Linear(c) => Some(*c),
            _ => None,
        }
    }

    /// Value for this slot given the search point; `cursor` walks the free coordinates.
    pub(crate) fn resolve<T: Scalar>(&self, template: T, theta: &[f64], cursor: &mut usize) -> T {
        match self {
            Slot::Fixed => template,
            Slot::Pinned(v) => T::of(*v),
            Slot::Log(_) => {
                let v = theta[*cursor].exp();
                *cursor += 1;
                T::of(v)
            }
            Slot::Linear(_) => {
                let v = theta[*cursor];
                *cursor += 1;
                T::of(v)
            }
        }
    }
}

/// Kernel plus noise parameterization shared by the single- and bi-fidelity searches.
#[derive(Clone, Debug)]
pub(crate) struct KernelSlots<T> {
    template: KernelSpec<T>,
    slots: Vec<Slot>,
}

impl<T: Scalar> KernelSlots<T> {
    pub(crate) fn new(template: &KernelSpec<T>) -> Result<Self> {
        template.validate()?;
        let slots = template.hypers().into_iter().map(Slot::log).collect::<Result<_>>()?;
        Ok(Self {
            template: template.clone(),
            slots,
        })
    }

    pub(crate) fn coords(&self) -> impl Iterator<Item = Coord> + '_ {
        self.slots.iter().filter_map(Slot::coord)
    }

    pub(crate) fn build(&self, theta: &[f64], cursor: &mut usize) -> KernelSpec<T> {
        let mut k = self.template.clone();
        for (h, slot) in k.hypers_mut().into_iter().zip(&self.slots) {
            h.value = slot.resolve(h.value, theta, cursor);
        }
        k
    }
}

/// Minimizes [`gp_nll`] over the bounded kernel hyperparameters and the noise
/// variance (all in log space), then fits at the best point found.
///
/// The template values form the first start; `opts.restarts` uniform random
/// starts follow.
pub fn gp_optimize<T: Scalar, R: Rng + ?Sized>(
    x: &Matrix<T>,
    y: &[T],
    template: &KernelSpec<T>,
    noise: &Hyper<T>,
    opts: &SearchOptions,
    rng: &mut R,
) -> Result<GPModel<T>> {
    check_data(x, y, noise.value)?;
    let kslots = KernelSlots::new(template)?;
    let nslot = Slot::log(noise)?;
    let mut coords: Vec<Coord> = kslots.coords().collect();
    coords.extend(nslot.coord());

    let decode = |theta: &[f64]| {
        let mut cursor = 0;
        let k = kslots.build(theta, &mut cursor);
        let s = nslot.resolve(noise.value, theta, &mut cursor);
        (k, s)
    };
    let objective = |theta: &[f64]| {
        let (k, s) = decode(theta);
        match gp_nll(x, y, &k, s) {
            Ok(v) => v.to_f64_lossy(),
            Err(_) => f64::INFINITY,
        }
    };
    let best = minimize_multistart(objective, &coords, opts, rng);
    let (k, s) = decode(&best.x);
    match gp_fit(x, y, &k, s) {
        Ok(m) if best.value.is_finite() => Ok(m),
        Ok(_) => Err(Error::IllConditioned { jitter: f64::NAN }),
        Err(e) => Err(e),
    }
}
