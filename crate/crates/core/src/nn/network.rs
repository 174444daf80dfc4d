use crate::data::Dataset;
use crate::error::{check_len, Result};
use crate::linalg::{dot, Matrix};
use crate::nn::{NetworkParams, NetworkSpec};
use crate::Scalar;

/// Intermediate values of one forward pass.
///
/// `pre[i - 1]` is `W_i y_{i-1} + β_i` for hidden layer `i`; `post[i]` is the
/// layer output `y_i` (activation plus any skip inputs), with `post[0] = x`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace<T> {
    pub pre: Vec<Vec<T>>,
    pub post: Vec<Vec<T>>,
    pub output: T,
}

impl<T: Scalar> Trace<T> {
    pub fn new(spec: &NetworkSpec<T>) -> Self {
        Self {
            pre: spec.hidden_widths.iter().map(|&w| vec![T::zero(); w]).collect(),
            post: (0..=spec.depth())
                .map(|i| vec![T::zero(); spec.layer_width(i)])
                .collect(),
            output: T::zero(),
        }
    }
}

/// Scratch space for repeated forward/backward passes without allocation.
#[derive(Clone, Debug)]
pub struct Workspace<T> {
    pub trace: Trace<T>,
    adj: Vec<Vec<T>>,
}

impl<T: Scalar> Workspace<T> {
    pub fn new(spec: &NetworkSpec<T>) -> Self {
        Self {
            trace: Trace::new(spec),
            adj: (0..=spec.depth())
                .map(|i| vec![T::zero(); spec.layer_width(i)])
                .collect(),
        }
    }
}

fn check_input<T: Scalar>(spec: &NetworkSpec<T>, params: &NetworkParams<T>, x: &[T]) -> Result<()> {
    params.check_spec(spec)?;
    check_len("network input", spec.input_dim, x.len())
}

/// Evaluates the network at `x`, keeping every layer's values.
pub fn forward<T: Scalar>(spec: &NetworkSpec<T>, params: &NetworkParams<T>, x: &[T]) -> Result<Trace<T>> {
    check_input(spec, params, x)?;
    let mut trace = Trace::new(spec);
    forward_into(spec, params, x, &mut trace);
    Ok(trace)
}

/// Network output at `x`.
pub fn predict<T: Scalar>(spec: &NetworkSpec<T>, params: &NetworkParams<T>, x: &[T]) -> Result<T> {
    Ok(forward(spec, params, x)?.output)
}

/// Forward pass into a preallocated trace. Shapes must already be checked.
pub(crate) fn forward_into<T: Scalar>(
    spec: &NetworkSpec<T>,
    params: &NetworkParams<T>,
    x: &[T],
    trace: &mut Trace<T>,
) {
    trace.post[0].copy_from_slice(x);
    for i in 1..=spec.depth() {
        let layer = params.hidden(i);
        let act = spec.hidden_activations[i - 1];
        let (done, rest) = trace.post.split_at_mut(i);
        let input = &done[i - 1];
        let out = &mut rest[0];
        let pre = &mut trace.pre[i - 1];
        for r in 0..layer.rows {
            let w = &layer.weights[r * layer.cols..(r + 1) * layer.cols];
            let z = dot(w, input) + layer.bias[r];
            pre[r] = z;
            out[r] = act.eval(z);
        }
        for s in spec.skip_sources(i) {
            for (o, &v) in out.iter_mut().zip(&done[s]) {
                *o += v;
            }
        }
    }
    let head = params.output();
    trace.output = dot(head.weights, &trace.post[spec.depth()]) + head.bias[0];
}

/// Adds `scale · ∂ŷ/∂p` to `grad` by reverse-mode differentiation of `trace`.
pub(crate) fn backprop_into<T: Scalar>(
    spec: &NetworkSpec<T>,
    params: &NetworkParams<T>,
    ws: &mut Workspace<T>,
    scale: T,
    grad: &mut [T],
) {
    let depth = spec.depth();
    let trace = &ws.trace;
    for a in &mut ws.adj {
        a.iter_mut().for_each(|v| *v = T::zero());
    }

    let out = params.output_block();
    let head = params.output();
    let top = &trace.post[depth];
    for (j, (&w, &a)) in head.weights.iter().zip(top).enumerate() {
        grad[out.offset + j] += scale * a;
        ws.adj[depth][j] = scale * w;
    }
    grad[out.bias().start] += scale;

    for i in (1..=depth).rev() {
        let blk = params.hidden_block(i);
        let layer = params.hidden(i);
        let act = spec.hidden_activations[i - 1];
        // Skip inputs receive the target layer's adjoint unchanged.
        for s in spec.skip_sources(i) {
            let (lo, hi) = ws.adj.split_at_mut(i);
            for (a, &g) in lo[s].iter_mut().zip(&hi[0]) {
                *a += g;
            }
        }
        let (lo, hi) = ws.adj.split_at_mut(i);
        let adj_out = &hi[0];
        let adj_in = &mut lo[i - 1];
        let input = &trace.post[i - 1];
        let bias0 = blk.bias().start;
        for r in 0..layer.rows {
            let dz = adj_out[r] * act.grad(trace.pre[i - 1][r]);
            if dz == T::zero() {
                continue;
            }
            grad[bias0 + r] += dz;
            let wrow = r * layer.cols;
            let g = &mut grad[blk.offset + wrow..blk.offset + wrow + layer.cols];
            for (gc, &a) in g.iter_mut().zip(input) {
                *gc += dz * a;
            }
            // The input adjoint is never needed.
            if i > 1 {
                let w = &layer.weights[wrow..wrow + layer.cols];
                for (ai, &wc) in adj_in.iter_mut().zip(w) {
                    *ai += dz * wc;
                }
            }
        }
    }
}

/// Gradient of the single-sample loss `(y − ŷ(x))²` with respect to every parameter.
pub fn grad_sample<T: Scalar>(
    spec: &NetworkSpec<T>,
    params: &NetworkParams<T>,
    x: &[T],
    y: T,
) -> Result<NetworkParams<T>> {
    check_input(spec, params, x)?;
    let mut ws = Workspace::new(spec);
    let mut grad = params.zeros_like();
    forward_into(spec, params, x, &mut ws.trace);
    let residual = ws.trace.output - y;
    backprop_into(spec, params, &mut ws, T::of(2.0) * residual, grad.values_mut());
    Ok(grad)
}

/// Mean squared error `(1/N) Σ (y_i − ŷ(x_i))²` over `data`.
pub fn loss_mse<T: Scalar>(spec: &NetworkSpec<T>, params: &NetworkParams<T>, data: &Dataset<T>) -> Result<T> {
    let pred = predict_batch(spec, params, data.inputs())?;
    let sse: T = pred
        .iter()
        .zip(data.outputs())
        .map(|(&p, &y)| (y - p) * (y - p))
        .sum();
    Ok(sse / T::of(data.len() as f64))
}

/// Row-wise network outputs.
pub fn predict_batch<T: Scalar>(
    spec: &NetworkSpec<T>,
    params: &NetworkParams<T>,
    inputs: &Matrix<T>,
) -> Result<Vec<T>> {
    params.check_spec(spec)?;
    if inputs.is_empty() {
        return Ok(Vec::new());
    }
    check_len("network input", spec.input_dim, inputs.ncols())?;
    let mut trace = Trace::new(spec);
    Ok(inputs
        .rows()
        .map(|x| {
            forward_into(spec, params, x, &mut trace);
            trace.output
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_params, Activation, Skip};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let spec = NetworkSpec::dense(3, vec![5, 4], Activation::elu(1.0f64)).unwrap();
        let p = NetworkParams::zeros(&spec);
        assert_eq!(predict(&spec, &p, &[1.0, -2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn hand_evaluated_composite() {
        let spec = NetworkSpec::dense(1, vec![1], Activation::<f64>::identity()).unwrap();
        // W1 = [2], b1 = [1], W0 = [3], b0 = -1
        let p = NetworkParams::from_flat(&spec, vec![2.0, 1.0, 3.0, -1.0]).unwrap();
        assert_eq!(predict(&spec, &p, &[1.0]).unwrap(), 8.0);
    }

    #[test]
    fn zero_residual_branch_passes_source_through() {
        for act in [Activation::relu(), Activation::elu(1.3f64)] {
            let spec = NetworkSpec::new(3, vec![4, 4], vec![act; 2], vec![Skip::new(1, 2)]).unwrap();
            let mut p = init_params(&spec, &mut ChaCha8Rng::seed_from_u64(1));
            let b2 = p.hidden_block(2);
            p.values_mut()[b2.all()].iter_mut().for_each(|v| *v = 0.0);
            let t = forward(&spec, &p, &[0.3, -1.2, 2.0]).unwrap();
            assert_eq!(t.post[2], t.post[1]);
        }
    }

    #[test]
    fn linear_model_gradient_by_hand() {
        let spec = NetworkSpec::dense(1, vec![1], Activation::<f64>::identity()).unwrap();
        // W1 = 1, b1 = 0 so ŷ = w x + b with w = W0, b = b0.
        let p = NetworkParams::from_flat(&spec, vec![1.0, 0.0, 0.7, 0.2]).unwrap();
        let (x, y) = (1.5, 2.0);
        let yhat = 0.7 * 1.5 + 0.2;
        let g = grad_sample(&spec, &p, &[x], y).unwrap();
        let out = p.output_block();
        assert!((g.values()[out.offset] - 2.0 * (yhat - y) * x).abs() < 1e-14);
        assert!((g.values()[out.bias().start] - 2.0 * (yhat - y)).abs() < 1e-14);
    }

    #[test]
    fn exact_fit_has_zero_gradient() {
        let spec = NetworkSpec::dense(2, vec![3], Activation::elu(1.0f64)).unwrap();
        let p = init_params(&spec, &mut ChaCha8Rng::seed_from_u64(9));
        let x = [0.4, -0.1];
        let y = predict(&spec, &p, &x).unwrap();
        let g = grad_sample(&spec, &p, &x, y).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mse_examples() {
        let spec = NetworkSpec::dense(1, vec![2], Activation::<f64>::relu()).unwrap();
        let p = NetworkParams::zeros(&spec);
        let data = Dataset::new(Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap(), vec![1.0, -1.0]).unwrap();
        assert_eq!(loss_mse(&spec, &p, &data).unwrap(), 1.0);
    }

    #[test]
    fn batch_matches_rows_and_handles_empty() {
        let spec = NetworkSpec::dense(2, vec![6, 6], Activation::elu(1.0f64)).unwrap();
        let p = init_params(&spec, &mut ChaCha8Rng::seed_from_u64(5));
        assert!(predict_batch(&spec, &p, &Matrix::zeros(0, 2)).unwrap().is_empty());
        let x = Matrix::from_rows(&[vec![0.1, 0.2], vec![0.1, 0.2], vec![-3.0, 1.0]]).unwrap();
        let out = predict_batch(&spec, &p, &x).unwrap();
        assert_eq!(out[0], out[1]);
        for (i, r) in x.rows().enumerate() {
            assert_eq!(out[i], predict(&spec, &p, r).unwrap());
        }
    }

    #[test]
    fn rejects_wrong_input_length() {
        let spec = NetworkSpec::dense(2, vec![3], Activation::elu(1.0f64)).unwrap();
        let p = NetworkParams::zeros(&spec);
        assert!(forward(&spec, &p, &[1.0]).is_err());
        let other = NetworkSpec::dense(2, vec![4], Activation::elu(1.0f64)).unwrap();
        assert!(forward(&other, &p, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let spec = NetworkSpec::dense(1, vec![1], Activation::<f32>::identity()).unwrap();
        let p = NetworkParams::from_flat(&spec, vec![2.0f32, 1.0, 3.0, -1.0]).unwrap();
        assert_eq!(predict(&spec, &p, &[1.0f32]).unwrap(), 8.0f32);
    }
}
