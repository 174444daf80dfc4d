use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::linalg::{squared_distance, Matrix};
use crate::Scalar;

/// A positive hyperparameter with optional search bounds.
///
/// Without bounds the value is held fixed during likelihood optimization;
/// with `lower == upper` it is pinned to that value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct Hyper<T> {
    pub value: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<(T, T)>,
}

impl<T: Scalar> Hyper<T> {
    pub fn fixed(value: T) -> Self {
        Self { value, bounds: None }
    }

    pub fn bounded(value: T, lower: T, upper: T) -> Self {
        Self {
            value,
            bounds: Some((lower, upper)),
        }
    }

    pub(crate) fn validate_positive(&self, name: &str) -> Result<()> {
        if !(self.value > T::zero() && self.value.is_finite()) {
            return Err(config(format!("{name} must be positive, got {}", self.value)));
        }
        if let Some((lo, hi)) = self.bounds {
            if !(lo > T::zero() && lo <= hi && hi.is_finite()) {
                return Err(config(format!("{name} bounds ({lo}, {hi}) must satisfy 0 < lower <= upper")));
            }
        }
        Ok(())
    }
}

/// Half-integer Matern smoothness; these have closed forms without Bessel functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub enum MaternNu {
    Half,
    ThreeHalves,
    FiveHalves,
}

impl TryFrom<f64> for MaternNu {
    type Error = crate::Error;

    fn try_from(nu: f64) -> Result<Self> {
        if nu == 0.5 {
            Ok(Self::Half)
        } else if nu == 1.5 {
            Ok(Self::ThreeHalves)
        } else if nu == 2.5 {
            Ok(Self::FiveHalves)
        } else {
            Err(config(format!("unsupported Matern smoothness {nu}; use 0.5, 1.5 or 2.5")))
        }
    }
}

impl From<MaternNu> for f64 {
    fn from(nu: MaternNu) -> f64 {
        match nu {
            MaternNu::Half => 0.5,
            MaternNu::ThreeHalves => 1.5,
            MaternNu::FiveHalves => 2.5,
        }
    }
}

/// Covariance function family with its hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields, bound = "T: Scalar")]
pub enum KernelSpec<T> {
    /// `α² exp(−‖x−x'‖² / (2σ²))`
    Rbf { amplitude: Hyper<T>, length: Hyper<T> },
    /// `α² (1 + ‖x−x'‖² / (2ρσ²))^(−ρ)`
    RationalQuadratic {
        amplitude: Hyper<T>,
        shape: Hyper<T>,
        length: Hyper<T>,
    },
    Matern {
        amplitude: Hyper<T>,
        length: Hyper<T>,
        nu: MaternNu,
    },
    /// `α² δ`, where δ is 1 only for a training sample paired with itself.
    WhiteNoise { amplitude: Hyper<T> },
    Sum { parts: Vec<KernelSpec<T>> },
}

impl<T: Scalar> KernelSpec<T> {
    pub fn rbf(amplitude: T, length: T) -> Self {
        Self::Rbf {
            amplitude: Hyper::fixed(amplitude),
            length: Hyper::fixed(length),
        }
    }

    pub fn rational_quadratic(amplitude: T, shape: T, length: T) -> Self {
        Self::RationalQuadratic {
            amplitude: Hyper::fixed(amplitude),
            shape: Hyper::fixed(shape),
            length: Hyper::fixed(length),
        }
    }

    pub fn matern(amplitude: T, length: T, nu: MaternNu) -> Self {
        Self::Matern {
            amplitude: Hyper::fixed(amplitude),
            length: Hyper::fixed(length),
            nu,
        }
    }

    pub fn white_noise(amplitude: T) -> Self {
        Self::WhiteNoise {
            amplitude: Hyper::fixed(amplitude),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Rbf { amplitude, length } => {
                amplitude.validate_positive("rbf amplitude")?;
                length.validate_positive("rbf length")
            }
            Self::RationalQuadratic {
                amplitude,
                shape,
                length,
            } => {
                amplitude.validate_positive("rational-quadratic amplitude")?;
                shape.validate_positive("rational-quadratic shape")?;
                length.validate_positive("rational-quadratic length")
            }
            Self::Matern { amplitude, length, .. } => {
                amplitude.validate_positive("matern amplitude")?;
                length.validate_positive("matern length")
            }
            Self::WhiteNoise { amplitude } => amplitude.validate_positive("white-noise amplitude"),
            Self::Sum { parts } => {
                if parts.is_empty() {
                    return Err(config("sum kernel needs at least one part"));
                }
                parts.iter().try_for_each(Self::validate)
            }
        }
    }

    /// Covariance between two inputs. `same_sample` marks a training sample
    /// paired with itself, the only case where white noise contributes.
    pub fn eval_pair(&self, x: &[T], xp: &[T], same_sample: bool) -> T {
        match self {
            Self::Sum { parts } => parts.iter().map(|k| k.eval_pair(x, xp, same_sample)).sum(),
            Self::WhiteNoise { amplitude } => {
                if same_sample {
                    amplitude.value * amplitude.value
                } else {
                    T::zero()
                }
            }
            _ => self.stationary(squared_distance(x, xp)),
        }
    }

    /// Covariance between two distinct samples (white noise contributes 0).
    pub fn eval(&self, x: &[T], xp: &[T]) -> T {
        self.eval_pair(x, xp, false)
    }

    fn stationary(&self, d2: T) -> T {
        match self {
            Self::Rbf { amplitude, length } => {
                let a = amplitude.value;
                let s = length.value;
                a * a * (-d2 / (T::of(2.0) * s * s)).exp()
            }
            Self::RationalQuadratic {
                amplitude,
                shape,
                length,
            } => {
                let a = amplitude.value;
                let (rho, s) = (shape.value, length.value);
                a * a * (T::one() + d2 / (T::of(2.0) * rho * s * s)).powf(-rho)
            }
            Self::Matern { amplitude, length, nu } => {
                let a2 = amplitude.value * amplitude.value;
                let r = d2.sqrt() / length.value;
                match nu {
                    MaternNu::Half => a2 * (-r).exp(),
                    MaternNu::ThreeHalves => {
                        let t = T::of(3.0).sqrt() * r;
                        a2 * (T::one() + t) * (-t).exp()
                    }
                    MaternNu::FiveHalves => {
                        let t = T::of(5.0).sqrt() * r;
                        a2 * (T::one() + t + t * t / T::of(3.0)) * (-t).exp()
                    }
                }
            }
            Self::WhiteNoise { .. } | Self::Sum { .. } => unreachable!("handled in eval_pair"),
        }
    }

    /// Prior variance `κ(x, x)` of the latent function at a query point.
    pub fn prior_variance(&self, x: &[T]) -> T {
        self.eval(x, x)
    }

    /// Gram matrix over the rows of `x`, white noise on the diagonal.
    pub fn gram(&self, x: &Matrix<T>) -> Matrix<T> {
        let n = x.nrows();
        let mut k = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.eval_pair(x.row(i), x.row(j), i == j);
                k.set(i, j, v);
                k.set(j, i, v);
            }
        }
        k
    }

    /// Covariances between every row of `x` and the query `xp`.
    pub fn cross(&self, x: &Matrix<T>, xp: &[T]) -> Vec<T> {
        x.rows().map(|r| self.eval(r, xp)).collect()
    }

    /// Flattened hyperparameters in declaration order.
    pub fn hypers(&self) -> Vec<&Hyper<T>> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a Hyper<T>>) {
        match self {
            Self::Rbf { amplitude, length } => out.extend([amplitude, length]),
            Self::RationalQuadratic {
                amplitude,
                shape,
                length,
            } => out.extend([amplitude, shape, length]),
            Self::Matern { amplitude, length, .. } => out.extend([amplitude, length]),
            Self::WhiteNoise { amplitude } => out.push(amplitude),
            Self::Sum { parts } => parts.iter().for_each(|p| p.collect(out)),
        }
    }

    pub fn hypers_mut(&mut self) -> Vec<&mut Hyper<T>> {
        let mut out = Vec::new();
        self.collect_mut(&mut out);
        out
    }

    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Hyper<T>>) {
        match self {
            Self::Rbf { amplitude, length } => out.extend([amplitude, length]),
            Self::RationalQuadratic {
                amplitude,
                shape,
                length,
            } => out.extend([amplitude, shape, length]),
            Self::Matern { amplitude, length, .. } => out.extend([amplitude, length]),
            Self::WhiteNoise { amplitude } => out.push(amplitude),
            Self::Sum { parts } => parts.iter_mut().for_each(|p| p.collect_mut(out)),
        }
    }
}

/// `κ(x, x')` for two distinct samples.
pub fn kernel_eval<T: Scalar>(k: &KernelSpec<T>, x: &[T], xp: &[T]) -> T {
    k.eval(x, xp)
}
