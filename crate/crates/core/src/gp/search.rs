//! Multi-start Nelder–Mead over a box, used for marginal-likelihood fits.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchOptions {
    /// Random starts in addition to the template start.
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Converged once every vertex is within this (∞-norm) of the best one.
    #[serde(default = "default_tolerance")]
    pub diameter_tol: f64,
    /// Iteration cap per start.
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

fn default_restarts() -> usize {
    8
}
fn default_tolerance() -> f64 {
    1e-6
}
fn default_max_iters() -> usize {
    2000
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            restarts: default_restarts(),
            diameter_tol: default_tolerance(),
            max_iters: default_max_iters(),
        }
    }
}

/// One search coordinate (already in the transformed space, e.g. log scale).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coord {
    pub start: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Minimizes `f` inside the box from the template start plus
/// `opts.restarts` uniform random starts; returns the best point seen.
/// Non-finite objective values count as `+∞`.
pub fn minimize_multistart<F, R>(mut f: F, coords: &[Coord], opts: &SearchOptions, rng: &mut R) -> SearchResult
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let template: Vec<f64> = coords.iter().map(|c| c.start.clamp(c.lower, c.upper)).collect();
    if coords.is_empty() {
        let value = eval(&template);
        return SearchResult {
            x: template,
            value,
            evaluations: 1,
        };
    }
    let mut best = nelder_mead(&mut eval, template, coords, opts);
    for _ in 0..opts.restarts {
        let start: Vec<f64> = coords.iter().map(|c| rng.gen_range(c.lower..=c.upper)).collect();
        let run = nelder_mead(&mut eval, start, coords, opts);
        let evaluations = best.evaluations + run.evaluations;
        if run.value < best.value {
            best = run;
        }
        best.evaluations = evaluations;
    }
    best
}

fn project(x: &mut [f64], coords: &[Coord]) {
    for (v, c) in x.iter_mut().zip(coords) {
        *v = v.clamp(c.lower, c.upper);
    }
}

fn nelder_mead<F: FnMut(&[f64]) -> f64>(f: &mut F, x0: Vec<f64>, coords: &[Coord], opts: &SearchOptions) -> SearchResult {
    const REFLECT: f64 = 1.0;
    const EXPAND: f64 = 2.0;
    const CONTRACT: f64 = 0.5;
    const SHRINK: f64 = 0.5;

    let n = x0.len();
    let mut evaluations = 0;
    let mut call = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        f(x)
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = call(&x0, &mut evaluations);
    simplex.push((x0.clone(), f0));
    for (i, c) in coords.iter().enumerate() {
        let step = 0.1 * (c.upper - c.lower);
        let mut v = x0.clone();
        v[i] = if v[i] + step <= c.upper { v[i] + step } else { v[i] - step };
        let fv = call(&v, &mut evaluations);
        simplex.push((v, fv));
    }

    let mut iters = 0;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let diameter = simplex[1..]
            .iter()
            .map(|(v, _)| {
                v.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if diameter < opts.diameter_tol || iters >= opts.max_iters {
            break;
        }
        iters += 1;

        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let towards = |from: &[f64], coef: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid.iter().zip(from).map(|(c, w)| c + coef * (c - w)).collect();
            project(&mut p, coords);
            p
        };
        let worst = simplex[n].clone();
        let xr = towards(&worst.0, REFLECT);
        let fr = call(&xr, &mut evaluations);

        if fr < simplex[0].1 {
            let xe = towards(&worst.0, EXPAND);
            let fe = call(&xe, &mut evaluations);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let xc = towards(&worst.0, CONTRACT);
                let fc = call(&xc, &mut evaluations);
                (xc, fc)
            } else {
                let xc = towards(&worst.0, -CONTRACT);
                let fc = call(&xc, &mut evaluations);
                (xc, fc)
            };
            if fc < fr.min(worst.1) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for (v, fv) in simplex.iter_mut().skip(1) {
                    for (x, b) in v.iter_mut().zip(&best) {
                        *x = b + SHRINK * (*x - b);
                    }
                    *fv = call(v, &mut evaluations);
                }
            }
        }
    }
    let (x, value) = simplex.swap_remove(0);
    SearchResult { x, value, evaluations }
}
