//! Limited-memory BFGS with a strong Wolfe line search.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsParams {
    pub history: usize,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_iter: usize,
    pub max_line_search: usize,
}

impl Default for LbfgsParams {
    fn default() -> Self {
        LbfgsParams { history: 7, c1: 1e-4, c2: 0.9, max_iter: 1000, max_line_search: 30 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbfgsStatus {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: LbfgsStatus,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(x: &[f64], alpha: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + alpha * b).collect()
}

struct Point {
    alpha: f64,
    value: f64,
    slope: f64,
    gradient: Vec<f64>,
}

/// Minimizes `eval` from `x0`. `eval` returns the value and gradient;
/// `done(gradient)` is the stopping test and is checked before every step.
pub fn minimize<F, D>(x0: Vec<f64>, params: &LbfgsParams, mut eval: F, done: D) -> Result<LbfgsOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    D: Fn(&[f64]) -> bool,
{
    let mut evaluations = 0;
    let mut call = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        evaluations += 1;
        eval(x)
    };
    let mut x = x0;
    let (mut value, mut gradient) = call(&x)?;
    if !value.is_finite() || gradient.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numeric("objective is not finite at the starting point".into()));
    }
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(params.history);
    let mut iterations = 0;
    let status = loop {
        if done(&gradient) {
            break LbfgsStatus::Converged;
        }
        if iterations >= params.max_iter {
            break LbfgsStatus::MaxIterations;
        }
        let mut direction = two_loop(&gradient, &history);
        if dot(&direction, &gradient) >= 0.0 {
            history.clear();
            direction = gradient.iter().map(|g| -g).collect();
        }
        let first_step = if history.is_empty() { 1.0 / dot(&gradient, &gradient).sqrt() } else { 1.0 };
        let mut step = line_search(&x, value, &gradient, &direction, first_step, params, &mut call)?;
        if step.is_none() && !history.is_empty() {
            history.clear();
            direction = gradient.iter().map(|g| -g).collect();
            let alpha = 1.0 / dot(&gradient, &gradient).sqrt();
            step = line_search(&x, value, &gradient, &direction, alpha, params, &mut call)?;
        }
        let Some(p) = step else {
            break LbfgsStatus::LineSearchFailed;
        };
        let s: Vec<f64> = direction.iter().map(|d| p.alpha * d).collect();
        let y: Vec<f64> = p.gradient.iter().zip(&gradient).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        x = axpy(&x, p.alpha, &direction);
        value = p.value;
        gradient = p.gradient;
        iterations += 1;
        if sy > f64::EPSILON * dot(&y, &y) {
            if history.len() == params.history {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
    };
    Ok(LbfgsOutcome { x, value, gradient, iterations, evaluations, status })
}

fn two_loop(gradient: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = gradient.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Strong Wolfe search along `d`, bracketing then zooming with safeguarded
/// cubic interpolation. Falls back to the best sufficient-decrease point found
/// when the curvature condition cannot be met.
fn line_search<F>(
    x: &[f64],
    f0: f64,
    g0: &[f64],
    d: &[f64],
    alpha0: f64,
    params: &LbfgsParams,
    eval: &mut F,
) -> Result<Option<Point>>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let slope0 = dot(g0, d);
    let mut probe = |alpha: f64| -> Result<Point> {
        let (value, gradient) = eval(&axpy(x, alpha, d))?;
        let value = if value.is_finite() { value } else { f64::INFINITY };
        Ok(Point { alpha, value, slope: dot(&gradient, d), gradient })
    };
    let armijo = |p: &Point| p.value <= f0 + params.c1 * p.alpha * slope0;
    let curvature = |p: &Point| p.slope.abs() <= -params.c2 * slope0;

    let origin = Point { alpha: 0.0, value: f0, slope: slope0, gradient: g0.to_vec() };
    let mut prev = origin;
    let mut alpha = alpha0;
    let mut budget = params.max_line_search;
    let (mut lo, mut hi) = loop {
        if budget == 0 {
            return Ok(None);
        }
        budget -= 1;
        let p = probe(alpha)?;
        if !armijo(&p) || (prev.alpha > 0.0 && p.value >= prev.value) {
            break (prev, p);
        }
        if curvature(&p) {
            return Ok(Some(p));
        }
        if p.slope >= 0.0 {
            break (p, prev);
        }
        alpha *= 2.0;
        prev = p;
    };

    while budget > 0 {
        budget -= 1;
        let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
        let width = b - a;
        let mut alpha = cubic_minimizer(&lo, &hi);
        if !(alpha > a + 0.1 * width && alpha < b - 0.1 * width) {
            alpha = 0.5 * (a + b);
        }
        if width <= f64::EPSILON * b {
            break;
        }
        let p = probe(alpha)?;
        if !armijo(&p) || p.value >= lo.value {
            hi = p;
        } else {
            if curvature(&p) {
                return Ok(Some(p));
            }
            if p.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = p;
        }
    }
    Ok((lo.alpha > 0.0 && lo.value < f0).then_some(lo))
}

fn cubic_minimizer(p: &Point, q: &Point) -> f64 {
    let d1 = p.slope + q.slope - 3.0 * (p.value - q.value) / (p.alpha - q.alpha);
    let disc = d1 * d1 - p.slope * q.slope;
    if disc < 0.0 {
        return f64::NAN;
    }
    let d2 = (q.alpha - p.alpha).signum() * disc.sqrt();
    q.alpha - (q.alpha - p.alpha) * (q.slope + d2 - d1) / (q.slope - p.slope + 2.0 * d2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Ok((f, g))
    }

    #[test]
    fn solves_rosenbrock() {
        let out = minimize(vec![-1.2, 1.0], &LbfgsParams::default(), rosenbrock, |g| dot(g, g).sqrt() < 1e-8).unwrap();
        assert_eq!(out.status, LbfgsStatus::Converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn quadratic_converges_quickly_and_monotonically() {
        let diag = [1.0, 10.0, 100.0, 0.5, 3.0];
        let mut values = Vec::new();
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            let v = x.iter().zip(&diag).map(|(a, d)| 0.5 * d * a * a).sum();
            Ok((v, x.iter().zip(&diag).map(|(a, d)| d * a).collect()))
        };
        let out = minimize(vec![1.0; 5], &LbfgsParams::default(), |x| {
            let r = f(x)?;
            values.push(r.0);
            Ok(r)
        }, |g| dot(g, g).sqrt() < 1e-10)
        .unwrap();
        assert_eq!(out.status, LbfgsStatus::Converged);
        assert!(out.iterations < 30, "{}", out.iterations);
        assert!(out.value < 1e-18);
    }

    #[test]
    fn already_optimal_takes_no_step() {
        let out = minimize(vec![1.0, 1.0], &LbfgsParams::default(), rosenbrock, |g| dot(g, g).sqrt() < 1e-8).unwrap();
        assert_eq!((out.iterations, out.evaluations), (0, 1));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let params = LbfgsParams { max_iter: 2, ..LbfgsParams::default() };
        let out = minimize(vec![-1.2, 1.0], &params, rosenbrock, |g| dot(g, g).sqrt() < 1e-12).unwrap();
        assert_eq!(out.status, LbfgsStatus::MaxIterations);
        assert_eq!(out.iterations, 2);
    }
}
