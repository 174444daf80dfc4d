use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, config, Result};
use crate::nn::NetworkSpec;
use crate::Scalar;

/// Location of one affine layer inside the flat parameter buffer.
///
/// The weight matrix (`rows × cols`, row-major) starts at `offset` and is
/// followed by the `rows` biases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerBlock {
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl LayerBlock {
    pub fn weights(&self) -> Range<usize> {
        self.offset..self.offset + self.rows * self.cols
    }

    pub fn bias(&self) -> Range<usize> {
        let start = self.offset + self.rows * self.cols;
        start..start + self.rows
    }

    pub fn all(&self) -> Range<usize> {
        self.offset..self.offset + self.rows * (self.cols + 1)
    }
}

/// Weights and biases `{W_i, β_i}` of a network.
///
/// Stored as one flat buffer in declaration order: `W_1, β_1, …, W_H, β_H`,
/// then the output row `W_0` and scalar `β_0`. Gradients and optimizer
/// accumulators reuse the same layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams<T> {
    values: Vec<T>,
    blocks: Vec<LayerBlock>,
}

/// Borrowed view of one layer.
#[derive(Clone, Copy, Debug)]
pub struct LayerRef<'a, T> {
    pub rows: usize,
    pub cols: usize,
    pub weights: &'a [T],
    pub bias: &'a [T],
}

impl<T: Scalar> NetworkParams<T> {
    pub fn zeros(spec: &NetworkSpec<T>) -> Self {
        let mut blocks = Vec::with_capacity(spec.depth() + 1);
        let mut offset = 0;
        let mut fan_in = spec.input_dim;
        for &w in spec.hidden_widths.iter().chain(std::iter::once(&1)) {
            blocks.push(LayerBlock {
                rows: w,
                cols: fan_in,
                offset,
            });
            offset += w * (fan_in + 1);
            fan_in = w;
        }
        Self {
            values: vec![T::zero(); offset],
            blocks,
        }
    }

    /// Rebuilds parameters from a flat buffer laid out for `spec`.
    pub fn from_flat(spec: &NetworkSpec<T>, values: Vec<T>) -> Result<Self> {
        let mut p = Self::zeros(spec);
        check_len("flat parameter buffer", p.values.len(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(config("network parameters must be finite"));
        }
        p.values = values;
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            values: vec![T::zero(); self.values.len()],
            blocks: self.blocks.clone(),
        }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of hidden layers.
    pub fn depth(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn blocks(&self) -> &[LayerBlock] {
        &self.blocks
    }

    /// Block of hidden layer `i` (1-based).
    pub fn hidden_block(&self, i: usize) -> LayerBlock {
        assert!(i >= 1 && i <= self.depth(), "hidden layer {i} out of range");
        self.blocks[i - 1]
    }

    pub fn output_block(&self) -> LayerBlock {
        self.blocks[self.depth()]
    }

    pub fn hidden(&self, i: usize) -> LayerRef<'_, T> {
        self.view(self.hidden_block(i))
    }

    pub fn output(&self) -> LayerRef<'_, T> {
        self.view(self.output_block())
    }

    fn view(&self, b: LayerBlock) -> LayerRef<'_, T> {
        LayerRef {
            rows: b.rows,
            cols: b.cols,
            weights: &self.values[b.weights()],
            bias: &self.values[b.bias()],
        }
    }

    /// Checks that the layout matches `spec`.
    pub fn check_spec(&self, spec: &NetworkSpec<T>) -> Result<()> {
        let expected = Self::zeros(spec);
        if expected.blocks != self.blocks {
            return Err(config(format!(
                "parameter layout does not match network spec ({} vs {} parameters)",
                self.values.len(),
                expected.values.len()
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Draws weights uniformly on `±√(6/(fan_in + fan_out))` per layer, biases zero.
pub fn init_params<T: Scalar, R: Rng + ?Sized>(spec: &NetworkSpec<T>, rng: &mut R) -> NetworkParams<T> {
    let mut p = NetworkParams::zeros(spec);
    for b in p.blocks.clone() {
        let limit = (6.0 / (b.rows + b.cols) as f64).sqrt();
        for v in &mut p.values[b.weights()] {
            *v = T::of(rng.gen_range(-limit..=limit));
        }
    }
    p
}
