//! Unconstrained minimization: Polak–Ribière conjugate gradient, BFGS and
//! steepest descent, all sharing a strong-Wolfe line search.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    ConjugateGradient,
    Bfgs,
    GradientDescent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub method: Method,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            method: Method::ConjugateGradient,
            max_iterations: 1000,
            gradient_tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    /// The per-iteration callback asked to stop.
    Callback,
    /// No step along the search direction decreased the objective.
    LineSearch,
    /// The objective was non-finite at every trial point.
    NonFinite,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimizeResult {
    pub w: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub stop: StopReason,
    /// Objective value at `w0` and after every accepted step.
    pub values: Vec<f64>,
}

const C1: f64 = 1e-4;
const C2: f64 = 0.1;
const MAX_BRACKET: usize = 40;
const MAX_ZOOM: usize = 40;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(w: &[f64], alpha: f64, d: &[f64]) -> Vec<f64> {
    w.iter().zip(d).map(|(wi, di)| wi + alpha * di).collect()
}

/// Minimizer of the cubic matching values and slopes at `a` and `b`.
fn cubic_min(a: f64, fa: f64, ga: f64, b: f64, fb: f64, gb: f64) -> Option<f64> {
    let d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - ga * gb;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let denom = gb - ga + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let x = b - (b - a) * (gb + d2 - d1) / denom;
    x.is_finite().then_some(x)
}

#[derive(Clone)]
struct Point {
    alpha: f64,
    value: f64,
    slope: f64,
    w: Vec<f64>,
    grad: Vec<f64>,
}

enum Search {
    Found(Point),
    /// Best point satisfying sufficient decrease, if any.
    Failed { fallback: Option<Point>, non_finite: bool },
}

struct LineSearch<'a, F> {
    f: &'a mut F,
    w: &'a [f64],
    d: &'a [f64],
    f0: f64,
    g0: f64,
    non_finite: usize,
}

impl<F> LineSearch<'_, F>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    fn eval(&mut self, alpha: f64) -> Result<Option<Point>> {
        let w = axpy(self.w, alpha, self.d);
        let (value, grad) = (self.f)(&w)?;
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            self.non_finite += 1;
            return Ok(None);
        }
        let slope = dot(&grad, self.d);
        Ok(Some(Point {
            alpha,
            value,
            slope,
            w,
            grad,
        }))
    }

    fn armijo(&self, p: &Point) -> bool {
        p.value <= self.f0 + C1 * p.alpha * self.g0
    }

    fn curvature(&self, p: &Point) -> bool {
        p.slope.abs() <= -C2 * self.g0
    }

    fn run(&mut self, alpha0: f64) -> Result<Search> {
        let origin = Point {
            alpha: 0.0,
            value: self.f0,
            slope: self.g0,
            w: self.w.to_vec(),
            grad: Vec::new(),
        };
        let mut prev = origin.clone();
        let mut alpha = alpha0;
        for i in 0..MAX_BRACKET {
            let Some(p) = self.eval(alpha)? else {
                // Backtrack towards the last finite point.
                alpha = prev.alpha + 0.5 * (alpha - prev.alpha);
                continue;
            };
            if !self.armijo(&p) || (i > 0 && p.value >= prev.value) {
                return self.zoom(prev, p);
            }
            if self.curvature(&p) {
                return Ok(Search::Found(p));
            }
            if p.slope >= 0.0 {
                return self.zoom(p, prev);
            }
            let next = cubic_min(prev.alpha, prev.value, prev.slope, p.alpha, p.value, p.slope)
                .filter(|&x| x > p.alpha)
                .unwrap_or(2.0 * p.alpha);
            alpha = next.clamp(1.1 * p.alpha, 10.0 * p.alpha);
            prev = p;
        }
        let fallback = (prev.alpha > 0.0).then_some(prev);
        Ok(Search::Failed {
            fallback,
            non_finite: self.non_finite > 0,
        })
    }

    /// `lo` satisfies sufficient decrease and has the lower value; the
    /// minimizer lies between `lo` and `hi`.
    fn zoom(&mut self, mut lo: Point, mut hi: Point) -> Result<Search> {
        for _ in 0..MAX_ZOOM {
            let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
            let width = b - a;
            if width <= f64::EPSILON * b.max(1e-300) {
                break;
            }
            let alpha = cubic_min(lo.alpha, lo.value, lo.slope, hi.alpha, hi.value, hi.slope)
                .filter(|&x| x > a + 0.1 * width && x < b - 0.1 * width)
                .unwrap_or(0.5 * (a + b));
            let Some(p) = self.eval(alpha)? else {
                // An infinite endpoint gives no cubic, so the next trial bisects.
                hi = Point {
                    alpha,
                    value: f64::INFINITY,
                    slope: f64::NAN,
                    w: Vec::new(),
                    grad: Vec::new(),
                };
                continue;
            };
            if !self.armijo(&p) || p.value >= lo.value {
                hi = p;
                continue;
            }
            if self.curvature(&p) {
                return Ok(Search::Found(p));
            }
            if p.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = p;
        }
        let fallback = (lo.alpha > 0.0).then_some(lo);
        Ok(Search::Failed {
            fallback,
            non_finite: self.non_finite > 0,
        })
    }
}

/// Minimizes `f`, which returns `(value, gradient)`.
///
/// `callback(iteration, w, value)` runs at `w0` (iteration 0) and after every
/// accepted step; returning `Break` stops the run. Convergence is
/// `‖∇f‖ ≤ gradient_tolerance`, tested before each iteration.
pub fn minimize<F, C>(mut f: F, w0: &[f64], options: &MinimizeOptions, mut callback: C) -> Result<MinimizeResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    C: FnMut(usize, &[f64], f64) -> ControlFlow<()>,
{
    if !(options.gradient_tolerance > 0.0) {
        return Err(Error::Config("gradient tolerance must be positive".into()));
    }
    let dim = w0.len();
    let (mut value, mut grad) = f(w0)?;
    crate::error::check_len(dim, grad.len(), "objective gradient")?;
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Optimization("objective is not finite at the starting point".into()));
    }
    let mut w = w0.to_vec();
    let mut values = vec![value];
    let finish = |w: Vec<f64>, value, grad: &[f64], iterations, stop, values| MinimizeResult {
        w,
        value,
        gradient_norm: norm(grad),
        iterations,
        stop,
        values,
    };
    if callback(0, &w, value).is_break() {
        return Ok(finish(w, value, &grad, 0, StopReason::Callback, values));
    }

    let mut d: Vec<f64> = grad.iter().map(|g| -g).collect();
    let mut prev_step: Option<(f64, f64)> = None; // (alpha, slope) of the last line search
    let mut since_restart = 0usize;
    let mut inv_hessian: Option<Vec<f64>> = None;

    for iter in 0..options.max_iterations {
        let gnorm = norm(&grad);
        if gnorm <= options.gradient_tolerance {
            return Ok(finish(w, value, &grad, iter, StopReason::GradientTolerance, values));
        }
        let mut slope = dot(&grad, &d);
        if !(slope < 0.0) {
            d = grad.iter().map(|g| -g).collect();
            slope = -gnorm * gnorm;
            since_restart = 0;
            inv_hessian = None;
        }
        let alpha0 = match (options.method, prev_step) {
            (Method::Bfgs, Some(_)) => 1.0,
            (_, Some((a, s))) => (a * s / slope).clamp(1e-10, 1e10),
            (_, None) => (1.0 / norm(&d)).min(1.0),
        };
        let mut ls = LineSearch {
            f: &mut f,
            w: &w,
            d: &d,
            f0: value,
            g0: slope,
            non_finite: 0,
        };
        let point = match ls.run(alpha0)? {
            Search::Found(p) => p,
            Search::Failed { fallback: Some(p), .. } => p,
            Search::Failed { fallback: None, non_finite } => {
                let stop = if non_finite {
                    log::warn!("line search met only non-finite objective values");
                    StopReason::NonFinite
                } else {
                    StopReason::LineSearch
                };
                return Ok(finish(w, value, &grad, iter, stop, values));
            }
        };
        prev_step = Some((point.alpha, slope));

        let s: Vec<f64> = point.w.iter().zip(&w).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = point.grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let old_grad = std::mem::replace(&mut grad, point.grad);
        w = point.w;
        value = point.value;
        values.push(value);
        since_restart += 1;

        d = match options.method {
            Method::GradientDescent => grad.iter().map(|g| -g).collect(),
            Method::ConjugateGradient => {
                let denom = dot(&old_grad, &old_grad);
                let beta = if since_restart >= dim.max(1) || denom == 0.0 {
                    since_restart = 0;
                    0.0
                } else {
                    (dot(&grad, &y) / denom).max(0.0)
                };
                grad.iter().zip(&d).map(|(g, di)| -g + beta * di).collect()
            }
            Method::Bfgs => {
                let sy = dot(&s, &y);
                let h = inv_hessian.get_or_insert_with(|| {
                    let yy = dot(&y, &y);
                    let scale = if sy > 0.0 && yy > 0.0 { sy / yy } else { 1.0 };
                    let mut h = vec![0.0; dim * dim];
                    (0..dim).for_each(|i| h[i * dim + i] = scale);
                    h
                });
                if sy > 1e-12 * norm(&s) * norm(&y) {
                    bfgs_update(h, dim, &s, &y, sy);
                }
                let mut dir = vec![0.0; dim];
                for (i, di) in dir.iter_mut().enumerate() {
                    *di = -dot(&h[i * dim..(i + 1) * dim], &grad);
                }
                dir
            }
        };

        if callback(iter + 1, &w, value).is_break() {
            return Ok(finish(w, value, &grad, iter + 1, StopReason::Callback, values));
        }
    }
    let stop = if norm(&grad) <= options.gradient_tolerance {
        StopReason::GradientTolerance
    } else {
        StopReason::MaxIterations
    };
    Ok(finish(w, value, &grad, options.max_iterations, stop, values))
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`.
fn bfgs_update(h: &mut [f64], dim: usize, s: &[f64], y: &[f64], sy: f64) {
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..dim).map(|i| dot(&h[i * dim..(i + 1) * dim], y)).collect();
    let yhy = dot(y, &hy);
    let coef = (1.0 + rho * yhy) * rho;
    for i in 0..dim {
        for j in 0..dim {
            h[i * dim + j] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}
