//! Two-fidelity co-kriging: `f_h(x) = ρ f_l(x) + f_corr(x)` with independent
//! zero-mean GP priors on `f_l` and `f_corr`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, config, Error, Result};
use crate::gp::search::{minimize_multistart, Coord, SearchOptions};
use crate::gp::{nll_from, Hyper, KernelSlots, KernelSpec, Prediction, Slot};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::Scalar;

/// Point values of every co-kriging hyperparameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct CoKrigingHypers<T> {
    pub kernel_l: KernelSpec<T>,
    pub kernel_corr: KernelSpec<T>,
    pub rho: T,
    pub noise_l: T,
    pub noise_h: T,
}

impl<T: Scalar> CoKrigingHypers<T> {
    fn validate(&self) -> Result<()> {
        self.kernel_l.validate()?;
        self.kernel_corr.validate()?;
        if !self.rho.is_finite() {
            return Err(config(format!("rho must be finite, got {}", self.rho)));
        }
        for (name, v) in [("noise_l", self.noise_l), ("noise_h", self.noise_h)] {
            if !(v >= T::zero() && v.is_finite()) {
                return Err(config(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    /// Prior covariance of `f_h` between two HF samples.
    fn hh(&self, a: &[T], b: &[T], same: bool) -> T {
        self.rho * self.rho * self.kernel_l.eval_pair(a, b, same) + self.kernel_corr.eval_pair(a, b, same)
    }
}

/// Search template: kernels with bounded hyperparameters, `ρ` on the linear
/// scale, noise variances on the log scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct CoKrigingTemplate<T> {
    pub kernel_l: KernelSpec<T>,
    pub kernel_corr: KernelSpec<T>,
    #[serde(default = "default_rho")]
    pub rho: Hyper<T>,
    pub noise_l: Hyper<T>,
    pub noise_h: Hyper<T>,
}

fn default_rho<T: Scalar>() -> Hyper<T> {
    Hyper::bounded(T::one(), T::of(-5.0), T::of(5.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CoKrigingModel<T> {
    pub xl: Matrix<T>,
    pub yl: Vec<T>,
    pub xh: Matrix<T>,
    pub yh: Vec<T>,
    pub hypers: CoKrigingHypers<T>,
    pub joint_chol: Cholesky<T>,
    /// `K_joint⁻¹ [y_h; y_l]`
    pub dual: Vec<T>,
}

fn check_data<T: Scalar>(xl: &Matrix<T>, yl: &[T], xh: &Matrix<T>, yh: &[T]) -> Result<()> {
    check_len("low-fidelity outputs", xl.nrows(), yl.len())?;
    check_len("high-fidelity outputs", xh.nrows(), yh.len())?;
    check_len("input dimension", xl.ncols(), xh.ncols())?;
    if yl.is_empty() || yh.is_empty() {
        return Err(config("co-kriging needs at least one sample of each fidelity"));
    }
    Ok(())
}

/// Joint covariance of `[f_h(X_h) + ε_h; f_l(X_l) + ε_l]`, HF block first.
pub fn joint_covariance<T: Scalar>(xl: &Matrix<T>, xh: &Matrix<T>, h: &CoKrigingHypers<T>) -> Matrix<T> {
    let (nh, nl) = (xh.nrows(), xl.nrows());
    let mut k = Matrix::zeros(nh + nl, nh + nl);
    for i in 0..nh {
        for j in 0..=i {
            let mut v = h.hh(xh.row(i), xh.row(j), i == j);
            if i == j {
                v += h.noise_h;
            }
            k.set(i, j, v);
            k.set(j, i, v);
        }
    }
    for i in 0..nl {
        for j in 0..nh {
            let v = h.rho * h.kernel_l.eval(xh.row(j), xl.row(i));
            k.set(nh + i, j, v);
            k.set(j, nh + i, v);
        }
        for j in 0..=i {
            let mut v = h.kernel_l.eval_pair(xl.row(i), xl.row(j), i == j);
            if i == j {
                v += h.noise_l;
            }
            k.set(nh + i, nh + j, v);
            k.set(nh + j, nh + i, v);
        }
    }
    k
}

fn stacked<T: Scalar>(yl: &[T], yh: &[T]) -> Vec<T> {
    yh.iter().chain(yl).copied().collect()
}

pub fn ck_fit<T: Scalar>(
    xl: &Matrix<T>,
    yl: &[T],
    xh: &Matrix<T>,
    yh: &[T],
    hypers: &CoKrigingHypers<T>,
) -> Result<CoKrigingModel<T>> {
    check_data(xl, yl, xh, yh)?;
    hypers.validate()?;
    let joint_chol = Cholesky::factor_with_jitter(&joint_covariance(xl, xh, hypers))?;
    let dual = joint_chol.solve(&stacked(yl, yh))?;
    Ok(CoKrigingModel {
        xl: xl.clone(),
        yl: yl.to_vec(),
        xh: xh.clone(),
        yh: yh.to_vec(),
        hypers: hypers.clone(),
        joint_chol,
        dual,
    })
}

impl<T: Scalar> CoKrigingModel<T> {
    /// Predictive mean and variance of the latent high-fidelity function.
    pub fn predict(&self, xp: &[T]) -> Result<Prediction<T>> {
        check_len("co-kriging query", self.xh.ncols(), xp.len())?;
        let h = &self.hypers;
        let k: Vec<T> = self
            .xh
            .rows()
            .map(|r| h.hh(r, xp, false))
            .chain(self.xl.rows().map(|r| h.rho * h.kernel_l.eval(r, xp)))
            .collect();
        let mean = dot(&k, &self.dual);
        let z = self.joint_chol.solve_lower(&k)?;
        let raw = h.hh(xp, xp, false) - dot(&z, &z);
        let clamped = raw < T::zero();
        Ok(Prediction {
            mean,
            variance: if clamped { T::zero() } else { raw },
            clamped,
        })
    }

    pub fn predict_batch(&self, xs: &Matrix<T>) -> Result<(Vec<Prediction<T>>, usize)> {
        let preds: Vec<_> = xs.rows().map(|r| self.predict(r)).collect::<Result<_>>()?;
        let clamped = preds.iter().filter(|p| p.clamped).count();
        Ok((preds, clamped))
    }

    pub fn nll(&self) -> T {
        nll_from(&self.joint_chol, &stacked(&self.yl, &self.yh), &self.dual)
    }
}

pub fn ck_predict<T: Scalar>(model: &CoKrigingModel<T>, xp: &[T]) -> Result<Prediction<T>> {
    model.predict(xp)
}

/// `½ yᵀK⁻¹y + ½ log|K| + ((N_l+N_h)/2) log 2π` on the stacked `y = [y_h; y_l]`.
pub fn ck_nll<T: Scalar>(xl: &Matrix<T>, yl: &[T], xh: &Matrix<T>, yh: &[T], hypers: &CoKrigingHypers<T>) -> Result<T> {
    check_data(xl, yl, xh, yh)?;
    hypers.validate()?;
    let chol = Cholesky::factor_with_jitter(&joint_covariance(xl, xh, hypers))?;
    let y = stacked(yl, yh);
    let dual = chol.solve(&y)?;
    Ok(nll_from(&chol, &y, &dual))
}

/// Minimizes [`ck_nll`] over both kernels, `ρ` and the two noise variances,
/// then fits at the best point found. Starts as in [`crate::gp::gp_optimize`].
pub fn ck_optimize<T: Scalar, R: Rng + ?Sized>(
    xl: &Matrix<T>,
    yl: &[T],
    xh: &Matrix<T>,
    yh: &[T],
    template: &CoKrigingTemplate<T>,
    opts: &SearchOptions,
    rng: &mut R,
) -> Result<CoKrigingModel<T>> {
    check_data(xl, yl, xh, yh)?;
    let ks_l = KernelSlots::new(&template.kernel_l)?;
    let ks_c = KernelSlots::new(&template.kernel_corr)?;
    let rho = Slot::linear(&template.rho)?;
    let nl = Slot::log(&template.noise_l)?;
    let nh = Slot::log(&template.noise_h)?;
    let mut coords: Vec<Coord> = ks_l.coords().chain(ks_c.coords()).collect();
    coords.extend(rho.coord());
    coords.extend(nl.coord());
    coords.extend(nh.coord());

    let decode = |theta: &[f64]| {
        let mut c = 0;
        CoKrigingHypers {
            kernel_l: ks_l.build(theta, &mut c),
            kernel_corr: ks_c.build(theta, &mut c),
            rho: rho.resolve(template.rho.value, theta, &mut c),
            noise_l: nl.resolve(template.noise_l.value, theta, &mut c),
            noise_h: nh.resolve(template.noise_h.value, theta, &mut c),
        }
    };
    let objective = |theta: &[f64]| match ck_nll(xl, yl, xh, yh, &decode(theta)) {
        Ok(v) => v.to_f64_lossy(),
        Err(_) => f64::INFINITY,
    };
    let best = minimize_multistart(objective, &coords, opts, rng);
    match ck_fit(xl, yl, xh, yh, &decode(&best.x)) {
        Ok(m) if best.value.is_finite() => Ok(m),
        Ok(_) => Err(Error::IllConditioned { jitter: f64::NAN }),
        Err(e) => Err(e),
    }
}
