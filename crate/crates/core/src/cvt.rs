//! Quantization energy and Lloyd relaxation on a tetrahedral mesh.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::mesh::TetMesh;
use crate::restricted::{evaluate_weights, EvalOptions};

/// Restricted Voronoi statistics of a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct CvtState {
    pub points: Vec<Point3>,
    /// `Q(Y) = ∫ min_i |x - y_i|^2 dμ`.
    pub energy: f64,
    pub masses: Vec<f64>,
    /// Cell centroids; `None` for empty cells.
    pub centroids: Vec<Option<Point3>>,
    /// `∇_{y_i} Q = 2 m_i (y_i - g_i)`.
    pub gradient: Vec<Point3>,
}

pub fn quantization_energy(mesh: &TetMesh, points: &[Point3], options: &EvalOptions) -> Result<CvtState> {
    let weights = vec![0.0; points.len()];
    let cells = evaluate_weights(mesh, points, &weights, options)?;
    let centroids: Vec<Option<Point3>> = (0..points.len()).map(|i| cells.centroid(i)).collect();
    let gradient = points
        .iter()
        .zip(&cells.mass)
        .zip(&cells.moment)
        .map(|((&y, &m), &moment)| (y * m - moment) * 2.0)
        .collect();
    Ok(CvtState { points: points.to_vec(), energy: cells.cost.iter().sum(), masses: cells.mass, centroids, gradient })
}

/// `k` points distributed according to the mesh measure: a tet drawn by mass,
/// then a uniform point inside it.
pub fn sample_measure(mesh: &TetMesh, k: usize, rng: &mut impl Rng) -> Result<Vec<Point3>> {
    let masses: Vec<f64> = (0..mesh.num_tets()).map(|t| mesh.tet_mass(t)).collect();
    let pick = WeightedIndex::new(&masses).map_err(|e| Error::Invalid(format!("mesh has no mass to sample: {e}")))?;
    Ok((0..k).map(|_| sample_tet(mesh, pick.sample(rng), rng)).collect())
}

fn sample_tet(mesh: &TetMesh, t: usize, rng: &mut impl Rng) -> Point3 {
    // normalized exponentials are uniform on the simplex
    let e: [f64; 4] = std::array::from_fn(|_| -(1.0 - rng.gen::<f64>()).ln());
    let total: f64 = e.iter().sum();
    let c = mesh.tet_corners(t);
    (0..4).fold(Point3::ZERO, |acc, v| acc + c[v] * (e[v] / total))
}

/// Result of a Lloyd run: final points and `Q` before each iteration and at the end.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydRun {
    pub points: Vec<Point3>,
    pub energies: Vec<f64>,
}

/// Samples `k` points from the mesh measure and runs `iters` Lloyd steps.
pub fn lloyd(mesh: &TetMesh, k: usize, iters: usize, seed: u64, options: &EvalOptions) -> Result<Vec<Point3>> {
    Ok(lloyd_run(mesh, k, iters, seed, options)?.points)
}

pub fn lloyd_run(mesh: &TetMesh, k: usize, iters: usize, seed: u64, options: &EvalOptions) -> Result<LloydRun> {
    if k == 0 {
        return Err(Error::Invalid("need at least one sample point".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = sample_measure(mesh, k, &mut rng)?;
    relax(mesh, start, iters, &mut rng, options)
}

/// Runs `iters` Lloyd steps from `points`. Points whose cell is empty are
/// re-drawn from the mesh measure.
pub fn relax(mesh: &TetMesh, mut points: Vec<Point3>, iters: usize, rng: &mut impl Rng, options: &EvalOptions) -> Result<LloydRun> {
    let mut energies = Vec::with_capacity(iters + 1);
    for _ in 0..iters {
        let state = quantization_energy(mesh, &points, options)?;
        energies.push(state.energy);
        for (p, c) in points.iter_mut().zip(&state.centroids) {
            *p = match c {
                Some(g) => *g,
                None => sample_measure(mesh, 1, rng)?[0],
            };
        }
    }
    if iters > 0 {
        energies.push(quantization_energy(mesh, &points, options)?.energy);
    }
    Ok(LloydRun { points, energies })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generators::unit_cube;

    #[test]
    fn single_point_at_center() {
        let s = quantization_energy(&unit_cube(), &[Point3::new(0.5, 0.5, 0.5)], &EvalOptions::default()).unwrap();
        assert!((s.energy - 0.25).abs() < 1e-14);
        assert!(s.gradient[0].norm() < 1e-14);
    }

    #[test]
    fn single_point_at_corner() {
        let s = quantization_energy(&unit_cube(), &[Point3::ZERO], &EvalOptions::default()).unwrap();
        assert!((s.gradient[0] - Point3::new(-1., -1., -1.)).norm() < 1e-14);
    }

    #[test]
    fn one_iteration_moves_single_point_to_center() {
        let run = lloyd_run(&unit_cube(), 1, 1, 3, &EvalOptions::default()).unwrap();
        assert!((run.points[0] - Point3::new(0.5, 0.5, 0.5)).norm() < 1e-14);
    }

    #[test]
    fn zero_iterations_return_the_sampling() {
        let m = unit_cube();
        let a = lloyd(&m, 20, 0, 9, &EvalOptions::default()).unwrap();
        let b = sample_measure(&m, 20, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|p| m.bbox().contains(*p, 0.0)));
    }

    #[test]
    fn energy_decreases() {
        let run = lloyd_run(&unit_cube(), 12, 10, 1, &EvalOptions::default()).unwrap();
        for w in run.energies.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn empty_cells_are_reseeded() {
        let m = unit_cube();
        let pts = vec![Point3::new(0.5, 0.5, 0.5), Point3::new(50.0, 0.0, 0.0)];
        let run = relax(&m, pts, 1, &mut ChaCha8Rng::seed_from_u64(0), &EvalOptions::default()).unwrap();
        assert!(m.bbox().contains(run.points[1], 0.0));
    }
}
