use serde::{Deserialize, Serialize};

use bifid_core::{Dataset, Matrix};

/// Affine map `z = (v − shift) / scale` per input column and for the output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub input_shift: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub output_shift: f64,
    pub output_scale: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    // A constant column is only shifted.
    (mean, if std > 0.0 && std.is_finite() { std } else { 1.0 })
}

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            input_shift: vec![0.0; dim],
            input_scale: vec![1.0; dim],
            output_shift: 0.0,
            output_scale: 1.0,
        }
    }

    /// Zero mean and unit variance per input column and/or for the output,
    /// estimated on `data`.
    pub fn fit(data: &Dataset, inputs: bool, outputs: bool) -> Self {
        let mut n = Self::identity(data.dim());
        if inputs {
            for j in 0..data.dim() {
                let (m, s) = mean_std(&data.inputs().rows().map(|r| r[j]).collect::<Vec<_>>());
                n.input_shift[j] = m;
                n.input_scale[j] = s;
            }
        }
        if outputs {
            let (m, s) = mean_std(data.outputs());
            n.output_shift = m;
            n.output_scale = s;
        }
        n
    }

    pub fn with_output_of(&self, data: &Dataset) -> Self {
        let (m, s) = mean_std(data.outputs());
        Self {
            output_shift: m,
            output_scale: s,
            ..self.clone()
        }
    }

    pub fn inputs(&self, x: &Matrix) -> Matrix {
        Matrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (x.get(i, j) - self.input_shift[j]) / self.input_scale[j]
        })
    }

    pub fn output(&self, y: f64) -> f64 {
        (y - self.output_shift) / self.output_scale
    }

    pub fn inverse_output(&self, z: f64) -> f64 {
        z * self.output_scale + self.output_shift
    }

    pub fn dataset(&self, d: &Dataset) -> bifid_core::Result<Dataset> {
        Dataset::new(self.inputs(d.inputs()), d.outputs().iter().map(|&y| self.output(y)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardizes_and_inverts() {
        let x = Matrix::from_rows(&[vec![1.0, 5.0], vec![3.0, 5.0], vec![5.0, 5.0]]).unwrap();
        let d = Dataset::new(x, vec![10.0, 20.0, 30.0]).unwrap();
        let n = Normalizer::fit(&d, true, true);
        let z = n.dataset(&d).unwrap();
        let col0: Vec<f64> = z.inputs().rows().map(|r| r[0]).collect();
        assert!((col0.iter().sum::<f64>()).abs() < 1e-12);
        assert!(z.inputs().rows().all(|r| r[1] == 0.0));
        for (&y, &t) in d.outputs().iter().zip(z.outputs()) {
            assert!((n.inverse_output(t) - y).abs() < 1e-12);
        }
    }
}
