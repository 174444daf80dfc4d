//! Bi-fidelity transfer strategies built on a network pre-trained on
//! low-fidelity data: partial fine-tuning (BFTL-1), a stacked correction
//! head (BFTL-2), and teacher-weighted learning (BFWL).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_len, config, Result};
use crate::gp::{gp_optimize, GPModel, Hyper, KernelSpec, SearchOptions};
use crate::linalg::Matrix;
use crate::nn::{init_params, predict, NetworkParams, NetworkSpec};
use crate::optim::{train, AdamConfig, LossRecord, TrainMask, TrainOutcome};
use crate::Scalar;

/// Teacher GP settings for BFWL.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct TeacherConfig<T> {
    pub kernel: KernelSpec<T>,
    pub noise: Hyper<T>,
    #[serde(default)]
    pub search: SearchOptions,
}

impl<T: Scalar> Default for TeacherConfig<T> {
    /// RBF started from unit amplitude and length scale, plus a small
    /// learned noise variance.
    fn default() -> Self {
        Self {
            kernel: KernelSpec::Rbf {
                amplitude: Hyper::bounded(T::one(), T::of(1e-2), T::of(1e2)),
                length: Hyper::bounded(T::one(), T::of(1e-2), T::of(1e2)),
            },
            noise: Hyper::bounded(T::of(1e-4), T::of(1e-5), T::of(1e-3)),
            search: SearchOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct TransferConfig<T> {
    /// Training on `D_l`.
    pub lf_train: AdamConfig<T>,
    /// Training on `D_h`, or on the soft dataset for BFWL.
    pub hf_train: AdamConfig<T>,
    /// BFTL-1: number of uppermost hidden layers adapted along with the output layer.
    #[serde(default = "default_adapt")]
    pub n_adapt_layers: usize,
    /// BFWL trust parameter in `exp(−β Σ)`.
    #[serde(default)]
    pub beta: T,
    #[serde(default)]
    pub teacher: TeacherConfig<T>,
}

fn default_adapt() -> usize {
    1
}

/// Teacher predictions over `[X_l; X_h]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SoftDataset<T> {
    pub inputs: Matrix<T>,
    pub means: Vec<T>,
    pub variances: Vec<T>,
}

impl<T: Scalar> SoftDataset<T> {
    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// Inputs paired with the teacher means as regression targets.
    pub fn as_dataset(&self) -> Result<Dataset<T>> {
        Dataset::new(self.inputs.clone(), self.means.clone())
    }
}

/// Frozen low-fidelity network feeding a shallow head: `x ↦ head(base(x))`.
#[derive(Clone, Debug, PartialEq)]
pub struct StackedModel<T> {
    pub base_spec: NetworkSpec<T>,
    pub base: NetworkParams<T>,
    pub head_spec: NetworkSpec<T>,
    pub head: NetworkParams<T>,
}

impl<T: Scalar> StackedModel<T> {
    pub fn predict(&self, x: &[T]) -> Result<T> {
        let yl = predict(&self.base_spec, &self.base, x)?;
        predict(&self.head_spec, &self.head, &[yl])
    }

    pub fn predict_batch(&self, xs: &Matrix<T>) -> Result<Vec<T>> {
        xs.rows().map(|r| self.predict(r)).collect()
    }
}

/// Full-network training on `D_l` from a fresh initialization drawn from `init_rng`.
pub fn train_lowfi<T: Scalar, R1: Rng + ?Sized, R2: Rng + ?Sized>(
    spec: &NetworkSpec<T>,
    d_l: &Dataset<T>,
    cfg: &AdamConfig<T>,
    init_rng: &mut R1,
    sgd_rng: &mut R2,
) -> Result<TrainOutcome<T>> {
    spec.validate()?;
    let params0 = init_params(spec, init_rng);
    train(spec, &params0, d_l, cfg, &TrainMask::all(&params0), None, sgd_rng)
}

/// Fine-tunes the top `n_adapt_layers` hidden layers and the output layer on
/// `D_h`; everything else stays bit-identical to `lf_params`.
pub fn bftl1<T: Scalar, R: Rng + ?Sized>(
    spec: &NetworkSpec<T>,
    lf_params: &NetworkParams<T>,
    d_h: &Dataset<T>,
    cfg: &AdamConfig<T>,
    n_adapt_layers: usize,
    rng: &mut R,
) -> Result<TrainOutcome<T>> {
    let mask = TrainMask::upper_layers(lf_params, n_adapt_layers)?;
    train(spec, lf_params, d_h, cfg, &mask, None, rng)
}

/// Trains a head mapping `ŷ_l(x)` to `y_h` on the HF samples; the base is not touched.
pub fn bftl2<T: Scalar, R1: Rng + ?Sized, R2: Rng + ?Sized>(
    base_spec: &NetworkSpec<T>,
    lf_params: &NetworkParams<T>,
    head_spec: &NetworkSpec<T>,
    d_h: &Dataset<T>,
    cfg: &AdamConfig<T>,
    init_rng: &mut R1,
    sgd_rng: &mut R2,
) -> Result<(StackedModel<T>, Vec<LossRecord<T>>)> {
    head_spec.validate()?;
    if head_spec.input_dim != 1 {
        return Err(config(format!(
            "the correction head takes the scalar low-fidelity output, so input_dim must be 1 (got {})",
            head_spec.input_dim
        )));
    }
    let yl: Vec<T> = d_h
        .inputs()
        .rows()
        .map(|x| predict(base_spec, lf_params, x))
        .collect::<Result<_>>()?;
    let derived = Dataset::new(Matrix::from_vec(yl.len(), 1, yl)?, d_h.outputs().to_vec())?;
    let head0 = init_params(head_spec, init_rng);
    let out = train(head_spec, &head0, &derived, cfg, &TrainMask::all(&head0), None, sgd_rng)?;
    let model = StackedModel {
        base_spec: base_spec.clone(),
        base: lf_params.clone(),
        head_spec: head_spec.clone(),
        head: out.params,
    };
    Ok((model, out.loss_history))
}

/// GP teacher fitted to `D_h` by marginal likelihood.
pub fn make_teacher<T: Scalar, R: Rng + ?Sized>(d_h: &Dataset<T>, teacher: &TeacherConfig<T>, rng: &mut R) -> Result<GPModel<T>> {
    gp_optimize(d_h.inputs(), d_h.outputs(), &teacher.kernel, &teacher.noise, &teacher.search, rng)
}

/// Teacher mean and variance at every row of `X_l` followed by every row of `X_h`.
pub fn make_soft_dataset<T: Scalar>(teacher: &GPModel<T>, x_l: &Matrix<T>, x_h: &Matrix<T>) -> Result<SoftDataset<T>> {
    let inputs = x_l.vstack(x_h)?;
    let d = teacher.train_inputs.ncols();
    if !inputs.is_empty() {
        check_len("soft dataset inputs", d, inputs.ncols())?;
    }
    let (preds, clamped) = teacher.predict_batch(&inputs)?;
    if clamped > 0 {
        log::debug!("teacher variance clamped at {clamped} of {} rows", preds.len());
    }
    Ok(SoftDataset {
        inputs,
        means: preds.iter().map(|p| p.mean).collect(),
        variances: preds.iter().map(|p| p.variance).collect(),
    })
}

/// Per-sample learning-rate multipliers `exp(−β Σ_i)`.
pub fn fidelity_weights<T: Scalar>(variances: &[T], beta: T) -> Vec<T> {
    variances.iter().map(|&s| (-beta * s).exp()).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct BfwlOutcome<T> {
    pub params: NetworkParams<T>,
    pub loss_history: Vec<LossRecord<T>>,
    pub teacher: GPModel<T>,
    pub soft: SoftDataset<T>,
    pub weights: Vec<T>,
}

/// Fits a teacher on `D_h`, labels `[X_l; X_h]` with its posterior, and
/// continues training the student on those labels with per-sample rates
/// `η_k exp(−β Σ_i)`, using `cfg.hf_train`.
pub fn bfwl<T: Scalar, R1: Rng + ?Sized, R2: Rng + ?Sized>(
    spec: &NetworkSpec<T>,
    student: &NetworkParams<T>,
    d_l: &Dataset<T>,
    d_h: &Dataset<T>,
    cfg: &TransferConfig<T>,
    teacher_rng: &mut R1,
    sgd_rng: &mut R2,
) -> Result<BfwlOutcome<T>> {
    if cfg.beta < T::zero() {
        log::warn!(
            "beta = {} is negative: uncertain teacher labels get larger steps than confident ones",
            cfg.beta
        );
    }
    let teacher = make_teacher(d_h, &cfg.teacher, teacher_rng)?;
    let soft = make_soft_dataset(&teacher, d_l.inputs(), d_h.inputs())?;
    let weights = fidelity_weights(&soft.variances, cfg.beta);
    let out = train(
        spec,
        student,
        &soft.as_dataset()?,
        &cfg.hf_train,
        &TrainMask::all(student),
        Some(&weights),
        sgd_rng,
    )?;
    Ok(BfwlOutcome {
        params: out.params,
        loss_history: out.loss_history,
        teacher,
        soft,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::gp_fit;
    use crate::nn::Activation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn toy(n: usize, shift: f64, seed: u64) -> Dataset<f64> {
        let mut r = rng(seed);
        let x: Matrix<f64> = Matrix::from_fn(n, 2, |_, _| r.gen_range(-1.0..1.0));
        let y = x.rows().map(|v| (1.5 * v[0]).sin() + 0.5 * v[1] + shift * v[0] * v[1]).collect();
        Dataset::new(x, y).unwrap()
    }

    fn spec() -> NetworkSpec<f64> {
        NetworkSpec::dense(2, vec![8, 8], Activation::elu(1.0)).unwrap()
    }

    fn head_spec() -> NetworkSpec<f64> {
        NetworkSpec::dense(1, vec![6], Activation::elu(1.0)).unwrap()
    }

    fn cfg(steps: usize) -> TransferConfig<f64> {
        TransferConfig {
            lf_train: AdamConfig::new(1e-2, steps),
            hf_train: AdamConfig::new(1e-3, steps),
            n_adapt_layers: 1,
            beta: 0.25,
            teacher: TeacherConfig::default(),
        }
    }

    #[test]
    fn lowfi_training_is_deterministic_and_learns() {
        let d = toy(60, 0.0, 1);
        let a = train_lowfi(&spec(), &d, &AdamConfig::new(1e-2, 3000), &mut rng(2), &mut rng(3)).unwrap();
        let b = train_lowfi(&spec(), &d, &AdamConfig::new(1e-2, 3000), &mut rng(2), &mut rng(3)).unwrap();
        assert_eq!(a.params, b.params);
        let h = &a.loss_history;
        assert!(h.last().unwrap().loss < h[0].loss);
    }

    #[test]
    fn lowfi_with_zero_steps_returns_initialization() {
        let d = toy(10, 0.0, 1);
        let out = train_lowfi(&spec(), &d, &AdamConfig::new(1e-2, 0), &mut rng(2), &mut rng(3)).unwrap();
        assert_eq!(out.params, init_params(&spec(), &mut rng(2)));
    }

    #[test]
    fn bftl1_freezes_lower_layers() {
        let s = spec();
        let lf = train_lowfi(&s, &toy(40, 0.0, 1), &AdamConfig::new(1e-2, 500), &mut rng(2), &mut rng(3))
            .unwrap()
            .params;
        let out = bftl1(&s, &lf, &toy(10, 0.8, 4), &AdamConfig::new(1e-3, 300), 1, &mut rng(5)).unwrap();
        let b1 = lf.hidden_block(1).all();
        assert_eq!(out.params.values()[b1.clone()], lf.values()[b1]);
        let top = lf.hidden_block(2).all();
        assert_ne!(out.params.values()[top.clone()], lf.values()[top]);

        let zero = bftl1(&s, &lf, &toy(10, 0.8, 4), &AdamConfig::new(1e-3, 0), 1, &mut rng(5)).unwrap();
        assert_eq!(zero.params, lf);
        assert!(bftl1(&s, &lf, &toy(10, 0.8, 4), &AdamConfig::new(1e-3, 1), 3, &mut rng(5)).is_err());
    }

    #[test]
    fn bftl1_full_depth_matches_plain_fine_tuning() {
        let s = spec();
        let lf = init_params(&s, &mut rng(9));
        let d = toy(10, 0.8, 4);
        let a = bftl1(&s, &lf, &d, &AdamConfig::new(1e-3, 200), 2, &mut rng(5)).unwrap();
        let b = train(&s, &lf, &d, &AdamConfig::new(1e-3, 200), &TrainMask::all(&lf), None, &mut rng(5)).unwrap();
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn bftl2_keeps_base_and_composes() {
        let s = spec();
        let lf = train_lowfi(&s, &toy(40, 0.0, 1), &AdamConfig::new(1e-2, 500), &mut rng(2), &mut rng(3))
            .unwrap()
            .params;
        let before = lf.clone();
        let d_h = toy(12, 0.8, 4);
        let (m, _) = bftl2(&s, &lf, &head_spec(), &d_h, &AdamConfig::new(1e-3, 500), &mut rng(6), &mut rng(7)).unwrap();
        assert_eq!(m.base, before);
        let x = d_h.sample(3).0;
        let direct = predict(&m.head_spec, &m.head, &[predict(&s, &lf, x).unwrap()]).unwrap();
        assert_eq!(m.predict(x).unwrap(), direct);

        let bad = NetworkSpec::dense(2, vec![4], Activation::elu(1.0)).unwrap();
        assert!(bftl2(&s, &lf, &bad, &d_h, &AdamConfig::new(1e-3, 1), &mut rng(6), &mut rng(7)).is_err());
    }

    #[test]
    fn soft_dataset_rows_match_fresh_queries() {
        let d_l = toy(7, 0.0, 1);
        let d_h = toy(5, 0.8, 2);
        let teacher = gp_fit(d_h.inputs(), d_h.outputs(), &KernelSpec::rbf(1.0, 1.0), 1e-10).unwrap();
        let soft = make_soft_dataset(&teacher, d_l.inputs(), d_h.inputs()).unwrap();
        assert_eq!(soft.len(), 12);
        for (i, r) in soft.inputs.rows().enumerate() {
            let p = teacher.predict(r).unwrap();
            assert_eq!((soft.means[i], soft.variances[i]), (p.mean, p.variance));
        }
        for i in 0..5 {
            assert!((soft.means[7 + i] - d_h.outputs()[i]).abs() < 1e-6);
            assert!(soft.variances[7 + i] < 1e-6);
        }
        let only_hf = make_soft_dataset(&teacher, &Matrix::zeros(0, 2), d_h.inputs()).unwrap();
        assert_eq!(only_hf.len(), 5);
    }

    #[test]
    fn weights_follow_the_trust_rule() {
        let w = fidelity_weights(&[0.0f64, 2.0, 0.5], 0.25);
        assert_eq!(w[0], 1.0);
        assert!((w[1] - 0.6065306597126334).abs() < 1e-15);
        assert!(w[2] > w[1] && w[2] < 1.0);
        assert_eq!(fidelity_weights(&[0.0, 0.0], -3.0), vec![1.0, 1.0]);
        assert!(fidelity_weights(&[1.0], -0.25)[0] > 1.0);
    }

    #[test]
    fn bfwl_with_zero_beta_is_unweighted_training() {
        let s = spec();
        let student = init_params(&s, &mut rng(1));
        let (d_l, d_h) = (toy(20, 0.0, 1), toy(6, 0.8, 2));
        let mut c = cfg(200);
        c.beta = 0.0;
        let out = bfwl(&s, &student, &d_l, &d_h, &c, &mut rng(3), &mut rng(4)).unwrap();
        assert!(out.weights.iter().all(|&w| w == 1.0));
        let plain = train(&s, &student, &out.soft.as_dataset().unwrap(), &c.hf_train, &TrainMask::all(&student), None, &mut rng(4)).unwrap();
        assert_eq!(out.params, plain.params);
    }

    #[test]
    fn bfwl_with_zero_steps_keeps_student() {
        let s = spec();
        let student = init_params(&s, &mut rng(1));
        let out = bfwl(&s, &student, &toy(20, 0.0, 1), &toy(6, 0.8, 2), &cfg(0), &mut rng(3), &mut rng(4)).unwrap();
        assert_eq!(out.params, student);
        assert_eq!(out.soft.len(), 26);
    }

    #[test]
    fn pinned_teacher_uses_given_hypers() {
        let d_h = toy(6, 0.8, 2);
        let t = TeacherConfig {
            kernel: KernelSpec::Rbf {
                amplitude: Hyper::bounded(1.0, 0.7, 0.7),
                length: Hyper::fixed(1.0),
            },
            noise: Hyper::bounded(1e-4, 1e-4, 1e-4),
            search: SearchOptions::default(),
        };
        let m = make_teacher(&d_h, &t, &mut rng(0)).unwrap();
        let direct = gp_fit(d_h.inputs(), d_h.outputs(), &KernelSpec::rbf(0.7, 1.0), 1e-4).unwrap();
        assert_eq!(m.dual, direct.dual);
    }
}
