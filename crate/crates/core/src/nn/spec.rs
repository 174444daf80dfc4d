use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::nn::Activation;
use crate::Scalar;

/// Default upper bound on the width of any hidden layer.
pub const DEFAULT_WIDTH_CAP: usize = 50;

/// Additive skip: the output of layer `target` gets the output of layer
/// `source` added after its activation. Layer 0 is the input vector and
/// hidden layers are numbered from 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Skip {
    pub source: usize,
    pub target: usize,
}

impl Skip {
    pub fn new(source: usize, target: usize) -> Self {
        Self { source, target }
    }
}

/// Architecture of a scalar-output network: `input_dim → hidden_widths… → 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct NetworkSpec<T> {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub hidden_activations: Vec<Activation<T>>,
    #[serde(default)]
    pub skips: Vec<Skip>,
}

impl<T: Scalar> NetworkSpec<T> {
    pub fn new(
        input_dim: usize,
        hidden_widths: Vec<usize>,
        hidden_activations: Vec<Activation<T>>,
        skips: Vec<Skip>,
    ) -> Result<Self> {
        let spec = Self {
            input_dim,
            hidden_widths,
            hidden_activations,
            skips,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Plain feed-forward network with one activation for every hidden layer.
    pub fn dense(input_dim: usize, hidden_widths: Vec<usize>, act: Activation<T>) -> Result<Self> {
        let acts = vec![act; hidden_widths.len()];
        Self::new(input_dim, hidden_widths, acts, Vec::new())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with_cap(DEFAULT_WIDTH_CAP)
    }

    pub fn validate_with_cap(&self, width_cap: usize) -> Result<()> {
        if self.input_dim == 0 {
            return Err(config("input_dim must be positive"));
        }
        if self.hidden_widths.is_empty() {
            return Err(config("network needs at least one hidden layer"));
        }
        if self.hidden_activations.len() != self.hidden_widths.len() {
            return Err(config(format!(
                "{} hidden layers but {} activations",
                self.hidden_widths.len(),
                self.hidden_activations.len()
            )));
        }
        for (i, &w) in self.hidden_widths.iter().enumerate() {
            if w == 0 || w > width_cap {
                return Err(config(format!(
                    "hidden layer {} has width {w}, allowed 1..={width_cap}",
                    i + 1
                )));
            }
        }
        for a in &self.hidden_activations {
            a.validate()?;
        }
        let depth = self.depth();
        for s in &self.skips {
            if s.source >= s.target || s.target > depth || s.target == 0 {
                return Err(config(format!(
                    "skip ({}, {}) must satisfy source < target <= {depth}",
                    s.source, s.target
                )));
            }
            if self.layer_width(s.source) != self.layer_width(s.target) {
                return Err(config(format!(
                    "skip ({}, {}) joins widths {} and {}; only equal widths are supported",
                    s.source,
                    s.target,
                    self.layer_width(s.source),
                    self.layer_width(s.target)
                )));
            }
        }
        Ok(())
    }

    /// Number of hidden layers.
    pub fn depth(&self) -> usize {
        self.hidden_widths.len()
    }

    /// Width of layer `i`, with layer 0 the input.
    pub fn layer_width(&self, i: usize) -> usize {
        if i == 0 {
            self.input_dim
        } else {
            self.hidden_widths[i - 1]
        }
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        let mut fan_in = self.input_dim;
        for &w in &self.hidden_widths {
            n += w * fan_in + w;
            fan_in = w;
        }
        n + fan_in + 1
    }

    /// Sources of skips landing on hidden layer `target`.
    pub(crate) fn skip_sources(&self, target: usize) -> impl Iterator<Item = usize> + '_ {
        self.skips
            .iter()
            .filter(move |s| s.target == target)
            .map(|s| s.source)
    }
}
