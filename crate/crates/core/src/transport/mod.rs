//! Semi-discrete transport: the concave objective over weights and its
//! single-level and multilevel maximization.

mod io;
pub mod lbfgs;
mod multilevel;

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::mesh::TetMesh;
use crate::restricted::{evaluate_weights, CellAccumulators, EvalOptions};

pub use io::{load_weights, parse_weights, save_weights, write_weights};
pub use multilevel::{build_level_plan, regress_weights, solve_multilevel, LevelPlan};

use lbfgs::{minimize, LbfgsParams, LbfgsStatus};

/// `g(W)` and its gradient at one weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub value: f64,
    /// `ν_i - m_i`.
    pub gradient: Vec<f64>,
    pub gradient_norm: f64,
    pub cells: CellAccumulators,
}

/// Relative tolerance on `Σν = μ(M)`.
pub const MASS_BALANCE_TOLERANCE: f64 = 1e-9;

/// A transport instance: mesh, target points and their prescribed masses.
#[derive(Debug, Clone, Copy)]
pub struct TransportProblem<'a> {
    pub mesh: &'a TetMesh,
    pub points: &'a [Point3],
    pub masses: &'a [f64],
    pub options: EvalOptions,
    measure: f64,
}

impl<'a> TransportProblem<'a> {
    pub fn new(mesh: &'a TetMesh, points: &'a [Point3], masses: &'a [f64], options: EvalOptions) -> Result<Self> {
        if points.is_empty() || points.len() != masses.len() {
            return Err(Error::Invalid(format!("{} points with {} masses", points.len(), masses.len())));
        }
        let measure = mesh.measure().total;
        let total: f64 = masses.iter().sum();
        if (total - measure).abs() > MASS_BALANCE_TOLERANCE * measure {
            return Err(Error::Invalid(format!("prescribed masses sum to {total}, mesh measure is {measure}")));
        }
        Ok(TransportProblem { mesh, points, masses, options, measure })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.measure
    }

    /// Stopping threshold `factor · μ(M) / √k` on `‖∇g‖`.
    pub fn epsilon(&self, factor: f64) -> f64 {
        factor * self.measure / (self.len() as f64).sqrt()
    }

    pub fn objective(&self, weights: &[f64]) -> Result<Objective> {
        let cells = evaluate_weights(self.mesh, self.points, weights, &self.options)?;
        // centred weights keep g(W + c) from absorbing c times the roundoff in Σm
        let w_mean = weights.iter().sum::<f64>() / self.len() as f64;
        let mut value = w_mean * (self.masses.iter().sum::<f64>() - self.measure);
        for i in 0..self.len() {
            value += cells.cost[i] + (weights[i] - w_mean) * (self.masses[i] - cells.mass[i]);
        }
        let gradient: Vec<f64> = self.masses.iter().zip(&cells.mass).map(|(nu, m)| nu - m).collect();
        let gradient_norm = gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !value.is_finite() {
            return Err(Error::Numeric("objective evaluated to a non-finite value".into()));
        }
        Ok(Objective { value, gradient, gradient_norm, cells })
    }
}

/// Solver settings shared by the single-level and multilevel drivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub eps_factor: f64,
    pub max_iter: usize,
    /// Regression degree used to initialize new levels (0, 1 or 2).
    pub degree: usize,
    pub ratio: f64,
    pub min_coarsest: usize,
    pub seed: u64,
    pub eval: EvalOptions,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps_factor: 0.01,
            max_iter: 1000,
            degree: 2,
            ratio: 0.125,
            min_coarsest: 100,
            seed: 0,
            eval: EvalOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelReport {
    pub size: usize,
    pub iterations: usize,
    pub evaluations: usize,
    pub gradient_norm: f64,
    pub epsilon: f64,
    pub converged: bool,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub gradient_norm: f64,
    pub epsilon: f64,
    pub converged: bool,
    pub levels: Vec<LevelReport>,
}

/// Maximizes `g` from `w0` with L-BFGS until `‖∇g‖ ≤ eps_factor · μ(M) / √k`.
pub fn solve_single_level(problem: &TransportProblem, w0: Vec<f64>, eps_factor: f64, max_iter: usize) -> Result<SolveReport> {
    if w0.len() != problem.len() {
        return Err(Error::Invalid(format!("{} initial weights for {} sites", w0.len(), problem.len())));
    }
    let start = Instant::now();
    let epsilon = problem.epsilon(eps_factor);
    let params = LbfgsParams { max_iter, ..LbfgsParams::default() };
    let outcome = minimize(
        w0,
        &params,
        |w| {
            let obj = problem.objective(w)?;
            Ok((-obj.value, obj.gradient.iter().map(|g| -g).collect()))
        },
        |g| g.iter().map(|v| v * v).sum::<f64>().sqrt() <= epsilon,
    )?;
    let gradient_norm = outcome.gradient.iter().map(|v| v * v).sum::<f64>().sqrt();
    let converged = outcome.status == LbfgsStatus::Converged;
    let level = LevelReport {
        size: problem.len(),
        iterations: outcome.iterations,
        evaluations: outcome.evaluations,
        gradient_norm,
        epsilon,
        converged,
        elapsed: start.elapsed(),
    };
    Ok(SolveReport {
        weights: outcome.x,
        iterations: outcome.iterations,
        evaluations: outcome.evaluations,
        gradient_norm,
        epsilon,
        converged,
        levels: vec![level],
    })
}
