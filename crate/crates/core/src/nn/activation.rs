use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Relu,
    Elu,
    Identity,
}

/// Pointwise nonlinearity of a hidden layer. `alpha` is the ELU shape and is
/// ignored by the other kinds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct Activation<T> {
    pub kind: ActivationKind,
    #[serde(default = "one")]
    pub alpha: T,
}

fn one<T: Scalar>() -> T {
    T::one()
}

impl<T: Scalar> Activation<T> {
    pub fn relu() -> Self {
        Self {
            kind: ActivationKind::Relu,
            alpha: T::one(),
        }
    }

    pub fn elu(alpha: T) -> Self {
        Self {
            kind: ActivationKind::Elu,
            alpha,
        }
    }

    pub fn identity() -> Self {
        Self {
            kind: ActivationKind::Identity,
            alpha: T::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == ActivationKind::Elu && !(self.alpha > T::zero() && self.alpha.is_finite()) {
            return Err(config(format!("ELU alpha must be positive, got {}", self.alpha)));
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, z: T) -> T {
        match self.kind {
            ActivationKind::Relu => z.max(T::zero()),
            ActivationKind::Elu => {
                if z > T::zero() {
                    z
                } else {
                    self.alpha * z.exp_m1()
                }
            }
            ActivationKind::Identity => z,
        }
    }

    /// Derivative with respect to the pre-activation. ReLU uses 0 at the kink.
    #[inline]
    pub fn grad(&self, z: T) -> T {
        match self.kind {
            ActivationKind::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            ActivationKind::Elu => {
                if z > T::zero() {
                    T::one()
                } else {
                    self.alpha * z.exp()
                }
            }
            ActivationKind::Identity => T::one(),
        }
    }
}

pub fn activation_eval<T: Scalar>(act: &Activation<T>, z: T) -> T {
    act.eval(z)
}

pub fn activation_grad<T: Scalar>(act: &Activation<T>, z: T) -> T {
    act.grad(z)
}
