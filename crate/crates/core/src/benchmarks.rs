//! Composite cantilever beam benchmark: a closed-form Euler–Bernoulli
//! low-fidelity model and an analytic high-fidelity stand-in.
//!
//! Inputs are `x = (q, E1, E2, E3)` in SI units (N/m and Pa). The section
//! stacks, from the bottom, a flange of height `h2` (modulus `E2`), the web of
//! height `h3` (`E3`) and a flange of height `h1` (`E1`), all of width `w`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{config, Error, Result};
use crate::linalg::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamGeometry {
    pub length: f64,
    pub width: f64,
    pub hole_radius: f64,
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
}

impl Default for BeamGeometry {
    fn default() -> Self {
        Self {
            length: 50.0,
            width: 1.0,
            hole_radius: 1.5,
            h1: 0.1,
            h2: 0.1,
            h3: 5.0,
        }
    }
}

impl BeamGeometry {
    pub fn validate(&self) -> Result<()> {
        let all = [self.length, self.width, self.hole_radius, self.h1, self.h2, self.h3];
        if all.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(config(format!("beam dimensions must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Load and moduli in SI units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamInputs {
    /// Distributed load, N/m.
    pub q: f64,
    /// Top flange modulus, Pa.
    pub e1: f64,
    /// Bottom flange modulus, Pa.
    pub e2: f64,
    /// Web modulus, Pa.
    pub e3: f64,
}

impl BeamInputs {
    /// From the tabulated units: kN/m, MPa, MPa, kPa.
    pub fn from_table_units(q_kn_per_m: f64, e1_mpa: f64, e2_mpa: f64, e3_kpa: f64) -> Self {
        Self {
            q: q_kn_per_m * 1e3,
            e1: e1_mpa * 1e6,
            e2: e2_mpa * 1e6,
            e3: e3_kpa * 1e3,
        }
    }

    pub fn from_slice(x: &[f64]) -> Result<Self> {
        match *x {
            [q, e1, e2, e3] => Ok(Self { q, e1, e2, e3 }),
            _ => Err(Error::Shape {
                what: "beam inputs",
                expected: 4,
                found: x.len(),
            }),
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.q, self.e1, self.e2, self.e3]
    }

    fn check_moduli(&self) -> Result<()> {
        if [self.e1, self.e2, self.e3].iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::Domain(format!("elastic moduli must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Independent uniform marginals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDistribution {
    pub bounds: Vec<(f64, f64)>,
}

impl InputDistribution {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        let d = Self { bounds };
        d.validate()?;
        Ok(d)
    }

    /// q ∈ [9, 11] kN/m, E1, E2 ∈ [0.9, 1.1] MPa, E3 ∈ [9, 11] kPa, in SI.
    pub fn beam() -> Self {
        Self {
            bounds: vec![(9e3, 11e3), (0.9e6, 1.1e6), (0.9e6, 1.1e6), (9e3, 11e3)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds.is_empty() {
            return Err(config("input distribution needs at least one dimension"));
        }
        for (i, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return Err(config(format!("dimension {} has bounds ({lo}, {hi}); need lower < upper", i + 1)));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    /// Maps `x` to `[-1, 1]` per dimension.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.bounds)
            .map(|(v, (lo, hi))| (2.0 * v - lo - hi) / (hi - lo))
            .collect()
    }
}

/// I.i.d. uniform rows.
pub fn sample_inputs<R: Rng + ?Sized>(dist: &InputDistribution, n: usize, rng: &mut R) -> Matrix<f64> {
    let d = dist.dim();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        for &(lo, hi) in &dist.bounds {
            data.push(rng.gen_range(lo..hi));
        }
    }
    Matrix::from_vec(n, d, data).expect("row-major buffer sized n × d")
}

struct Layer {
    e: f64,
    area: f64,
    own_inertia: f64,
    centroid: f64,
}

fn layers(x: &BeamInputs, g: &BeamGeometry) -> [Layer; 3] {
    let w = g.width;
    let rect = |e: f64, h: f64, base: f64| Layer {
        e,
        area: w * h,
        own_inertia: w * h.powi(3) / 12.0,
        centroid: base + 0.5 * h,
    };
    [
        rect(x.e2, g.h2, 0.0),
        rect(x.e3, g.h3, g.h2),
        rect(x.e1, g.h1, g.h2 + g.h3),
    ]
}

/// Height of the modulus-weighted neutral axis above the bottom face.
pub fn neutral_axis(x: &BeamInputs, g: &BeamGeometry) -> f64 {
    let ls = layers(x, g);
    let num: f64 = ls.iter().map(|l| l.e * l.area * l.centroid).sum();
    let den: f64 = ls.iter().map(|l| l.e * l.area).sum();
    num / den
}

/// Bending stiffness of the transformed section, N·m². Holes are ignored.
pub fn homogenized_ei(x: &BeamInputs, g: &BeamGeometry) -> Result<f64> {
    x.check_moduli()?;
    Ok(stiffness_parts(x, g).iter().sum())
}

/// Per-layer contributions `E_i (I_i + A_i d_i²)`: bottom flange, web, top flange.
fn stiffness_parts(x: &BeamInputs, g: &BeamGeometry) -> [f64; 3] {
    let na = neutral_axis(x, g);
    layers(x, g).map(|l| l.e * (l.own_inertia + l.area * (l.centroid - na).powi(2)))
}

/// Deflection `u_l(s) = −q L⁴/(24 EI) [(s/L)⁴ − 4(s/L)³ + 6(s/L)²]` of the
/// cantilever clamped at `s = 0`.
pub fn beam_lowfi_deflection(x: &BeamInputs, g: &BeamGeometry, s: f64) -> Result<f64> {
    let l = g.length;
    if !(0.0..=l).contains(&s) {
        return Err(Error::Domain(format!("position {s} is outside [0, {l}]")));
    }
    let ei = homogenized_ei(x, g)?;
    let t = s / l;
    let shape = t * t * (t * t - 4.0 * t + 6.0);
    Ok(-x.q * l.powi(4) / (24.0 * ei) * shape)
}

/// Tip deflection `−q L⁴ / (8 EI)`.
pub fn beam_lowfi_tip(x: &BeamInputs, g: &BeamGeometry) -> Result<f64> {
    let ei = homogenized_ei(x, g)?;
    Ok(-x.q * g.length.powi(4) / (8.0 * ei))
}

/// Parameters of the high-fidelity stand-in
///
/// `y_h = y_l (1 + c1 (r/h3)² g(x)) − c2 a(x)`
///
/// where `g` is the web's share of the bending stiffness relative to its
/// share at the box midpoint (a proxy for the stiffness lost to the holes)
/// and `a = (q / q_mid)(E3_mid / E3)` is a shear-like extra deflection that
/// does not scale with `1/EI`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HighFidelityConfig {
    #[serde(default = "default_c1")]
    pub c1: f64,
    /// Additive amplitude in metres; `None` means 5% of the mean
    /// low-fidelity tip magnitude over the input box.
    #[serde(default)]
    pub c2: Option<f64>,
}

fn default_c1() -> f64 {
    0.3
}

impl Default for HighFidelityConfig {
    fn default() -> Self {
        Self {
            c1: default_c1(),
            c2: None,
        }
    }
}

/// The stand-in with every constant resolved for one geometry and box.
#[derive(Clone, Debug, PartialEq)]
pub struct HighFidelityModel {
    pub geometry: BeamGeometry,
    pub c1: f64,
    pub c2: f64,
    mid: BeamInputs,
    mid_web_share: f64,
}

impl HighFidelityModel {
    pub fn new(cfg: &HighFidelityConfig, geometry: BeamGeometry, dist: &InputDistribution) -> Result<Self> {
        geometry.validate()?;
        if dist.dim() != 4 {
            return Err(config(format!("the beam takes 4 inputs, distribution has {}", dist.dim())));
        }
        let mid = BeamInputs::from_slice(&dist.midpoint())?;
        let c2 = match cfg.c2 {
            Some(c) => c,
            None => 0.05 * mean_lowfi_tip(&geometry, dist)?.abs(),
        };
        Ok(Self {
            geometry,
            c1: cfg.c1,
            c2,
            mid,
            mid_web_share: web_share(&mid, &geometry),
        })
    }

    pub fn eval(&self, x: &BeamInputs) -> Result<f64> {
        let g = &self.geometry;
        let yl = beam_lowfi_tip(x, g)?;
        let ratio = (g.hole_radius / g.h3).powi(2);
        let g_term = web_share(x, g) / self.mid_web_share;
        let a_term = (x.q / self.mid.q) * (self.mid.e3 / x.e3);
        Ok(yl * (1.0 + self.c1 * ratio * g_term) - self.c2 * a_term)
    }
}

fn web_share(x: &BeamInputs, g: &BeamGeometry) -> f64 {
    let parts = stiffness_parts(x, g);
    parts[1] / parts.iter().sum::<f64>()
}

const GAUSS_NODES: [f64; 5] = [
    -0.906179845938664,
    -0.5384693101056831,
    0.0,
    0.5384693101056831,
    0.906179845938664,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.23692688505618942,
    0.4786286704993662,
    0.568888888888889,
    0.4786286704993662,
    0.23692688505618942,
];

/// Mean of the low-fidelity tip under the uniform box, by tensor Gauss–Legendre.
/// The tip is linear in `q`, so only the three moduli need quadrature.
pub fn mean_lowfi_tip(g: &BeamGeometry, dist: &InputDistribution) -> Result<f64> {
    let b = &dist.bounds;
    let at = |k: usize, t: f64| 0.5 * (b[k].0 + b[k].1) + 0.5 * (b[k].1 - b[k].0) * t;
    let mut mean = 0.0;
    for (&t1, &w1) in GAUSS_NODES.iter().zip(&GAUSS_WEIGHTS) {
        for (&t2, &w2) in GAUSS_NODES.iter().zip(&GAUSS_WEIGHTS) {
            for (&t3, &w3) in GAUSS_NODES.iter().zip(&GAUSS_WEIGHTS) {
                let x = BeamInputs {
                    q: at(0, 0.0),
                    e1: at(1, t1),
                    e2: at(2, t2),
                    e3: at(3, t3),
                };
                mean += w1 * w2 * w3 / 8.0 * beam_lowfi_tip(&x, g)?;
            }
        }
    }
    Ok(mean)
}

/// Which beam model labels a generated dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BeamModel {
    #[serde(rename = "beam_lf")]
    BeamLF,
    #[serde(rename = "beam_hf")]
    BeamHF,
}

/// Evaluates `model` at every row of `inputs`.
pub fn evaluate_beam(model: BeamModel, hf: &HighFidelityModel, inputs: &Matrix<f64>) -> Result<Vec<f64>> {
    inputs
        .rows()
        .map(|r| {
            let x = BeamInputs::from_slice(r)?;
            match model {
                BeamModel::BeamLF => beam_lowfi_tip(&x, &hf.geometry),
                BeamModel::BeamHF => hf.eval(&x),
            }
        })
        .collect()
}

/// Samples `n` inputs and labels them with `model`.
pub fn generate_dataset<R: Rng + ?Sized>(
    model: BeamModel,
    hf: &HighFidelityModel,
    dist: &InputDistribution,
    n: usize,
    rng: &mut R,
) -> Result<Dataset<f64>> {
    if n == 0 {
        return Err(config("dataset size must be at least 1"));
    }
    let inputs = sample_inputs(dist, n, rng);
    let outputs = evaluate_beam(model, hf, &inputs)?;
    Dataset::new(inputs, outputs)
}
