use serde::{Deserialize, Serialize};

use crate::error::{check_len, config, Result};
use crate::linalg::Matrix;
use crate::Scalar;

/// Labeled samples: row `i` of `inputs` pairs with `outputs[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset<T> {
    inputs: Matrix<T>,
    outputs: Vec<T>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(inputs: Matrix<T>, outputs: Vec<T>) -> Result<Self> {
        check_len("dataset outputs", inputs.nrows(), outputs.len())?;
        if outputs.is_empty() {
            return Err(config("dataset must hold at least one sample"));
        }
        if !inputs.is_finite() || outputs.iter().any(|v| !v.is_finite()) {
            return Err(config("dataset entries must be finite"));
        }
        Ok(Self { inputs, outputs })
    }

    pub fn inputs(&self) -> &Matrix<T> {
        &self.inputs
    }

    pub fn outputs(&self) -> &[T] {
        &self.outputs
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    /// Always false for a constructed dataset; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn sample(&self, i: usize) -> (&[T], T) {
        (self.inputs.row(i), self.outputs[i])
    }

    /// Subset by row index, preserving the given order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let outputs = idx.iter().map(|&i| self.outputs[i]).collect();
        Self::new(self.inputs.select_rows(idx), outputs)
    }

    pub fn into_parts(self) -> (Matrix<T>, Vec<T>) {
        (self.inputs, self.outputs)
    }
}
