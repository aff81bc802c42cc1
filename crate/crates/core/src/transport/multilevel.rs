//! Coarse-to-fine solve over nested prefixes of a randomly permuted,
//! spatially sorted site order.

use std::num::NonZero;
use std::time::Instant;

use kiddo::{ImmutableKdTree, SquaredEuclidean};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{solve_single_level, SolveReport, SolverConfig, TransportProblem};
use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::hilbert::hilbert_sort;
use crate::mesh::TetMesh;
use crate::power::SiteSet;

/// Site order and the end of each level's prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelPlan {
    /// `order[p]` is the original index of the site at position `p`.
    pub order: Vec<usize>,
    /// Exclusive prefix ends, strictly increasing, last equal to `k`.
    pub ends: Vec<usize>,
}

impl LevelPlan {
    pub fn levels(&self) -> usize {
        self.ends.len()
    }

    /// Position range `[b_l, e_l)` of level `l`.
    pub fn range(&self, l: usize) -> std::ops::Range<usize> {
        let b = if l == 0 { 0 } else { self.ends[l - 1] };
        b..self.ends[l]
    }
}

/// Shuffles the sites with `seed`, shrinks the prefix by `ratio` until it would
/// fall below `min_coarsest`, then sorts each level along a Hilbert curve.
pub fn build_level_plan(points: &[Point3], ratio: f64, min_coarsest: usize, seed: u64) -> LevelPlan {
    assert!(ratio > 0.0 && ratio < 1.0);
    let k = points.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut ends = vec![k];
    loop {
        let next = (*ends.last().expect("non-empty") as f64 * ratio).round() as usize;
        if next < min_coarsest || next == 0 {
            break;
        }
        ends.push(next);
    }
    ends.reverse();
    let mut b = 0;
    for &e in &ends {
        hilbert_sort(points, &mut order[b..e]);
        b = e;
    }
    LevelPlan { order, ends }
}

const NEIGHBORS_BY_DEGREE: [usize; 3] = [1, 10, 20];

/// Predicts weights at `new_points` from nearby `old_points`: nearest
/// neighbor (degree 0), linear fit on 10 neighbors (1) or quadratic fit on 20
/// neighbors (2). Degrees fall back downward when there are too few old
/// points or the fit is rank deficient.
pub fn regress_weights(old_points: &[Point3], old_weights: &[f64], new_points: &[Point3], degree: usize) -> Vec<f64> {
    assert!(!old_points.is_empty());
    let coords: Vec<[f64; 3]> = old_points.iter().map(|p| p.to_array()).collect();
    let tree: ImmutableKdTree<f64, 3> = ImmutableKdTree::new_from_slice(&coords).expect("site count fits the index");
    let mut degree = degree.min(2);
    while NEIGHBORS_BY_DEGREE[degree] > old_points.len() {
        degree -= 1;
    }
    new_points
        .iter()
        .map(|&y| {
            let n = NonZero::new(NEIGHBORS_BY_DEGREE[degree]).expect("positive");
            let near: Vec<usize> = tree
                .query(&y.to_array())
                .nearest_n::<SquaredEuclidean<f64>>(n)
                .execute()
                .into_iter()
                .map(|nb| nb.item as usize)
                .collect();
            (1..=degree)
                .rev()
                .find_map(|d| fit(old_points, old_weights, &near[..NEIGHBORS_BY_DEGREE[d]], y, d))
                .unwrap_or(old_weights[near[0]])
        })
        .collect()
}

/// Least-squares polynomial fit of degree 1 or 2 centered at `y`, evaluated at `y`.
fn fit(points: &[Point3], weights: &[f64], near: &[usize], y: Point3, degree: usize) -> Option<f64> {
    let scale = near.iter().map(|&j| points[j].dist2(y)).fold(0.0, f64::max).sqrt();
    if scale == 0.0 {
        return Some(weights[near[0]]);
    }
    let columns = if degree == 1 { 4 } else { 10 };
    let mut a = DMatrix::<f64>::zeros(near.len(), columns);
    let b = DVector::from_iterator(near.len(), near.iter().map(|&j| weights[j]));
    for (r, &j) in near.iter().enumerate() {
        let d = (points[j] - y) / scale;
        let mut row = vec![1.0, d.x, d.y, d.z];
        if degree == 2 {
            row.extend([d.x * d.x, d.y * d.y, d.z * d.z, d.x * d.y, d.x * d.z, d.y * d.z]);
        }
        for (c, v) in row.into_iter().enumerate() {
            a[(r, c)] = v;
        }
    }
    let svd = a.svd(true, true);
    let max = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-8 * max {
        return None;
    }
    let coef = svd.solve(&b, 0.0).ok()?;
    coef[0].is_finite().then_some(coef[0])
}

/// Multilevel solve. A plan with a single level reduces to
/// [`solve_single_level`] on the sites in their original order.
pub fn solve_multilevel(mesh: &TetMesh, sites: &SiteSet, config: &SolverConfig) -> Result<SolveReport> {
    sites.validate()?;
    let measure = mesh.measure().total;
    let masses = sites.masses_or_uniform(measure);
    let plan = build_level_plan(&sites.points, config.ratio, config.min_coarsest, config.seed);
    if plan.levels() == 1 {
        let problem = TransportProblem::new(mesh, &sites.points, &masses, config.eval)?;
        return solve_single_level(&problem, sites.weights.clone(), config.eps_factor, config.max_iter);
    }
    // validates the mass balance before any work
    TransportProblem::new(mesh, &sites.points, &masses, config.eval)?;

    let points: Vec<Point3> = plan.order.iter().map(|&i| sites.points[i]).collect();
    let all_masses: Vec<f64> = plan.order.iter().map(|&i| masses[i]).collect();
    let mut weights: Vec<f64> = plan.order.iter().map(|&i| sites.weights[i]).collect();
    let mut levels = Vec::with_capacity(plan.levels());
    for l in 0..plan.levels() {
        let start = Instant::now();
        let range = plan.range(l);
        let e = range.end;
        if l > 0 {
            let fresh = regress_weights(&points[..range.start], &weights[..range.start], &points[range.clone()], config.degree);
            weights[range.clone()].copy_from_slice(&fresh);
        }
        let level_masses = if e == points.len() {
            all_masses.clone()
        } else {
            let prefix_total: f64 = all_masses[..e].iter().sum();
            all_masses[..e].iter().map(|m| m * measure / prefix_total).collect()
        };
        let problem = TransportProblem::new(mesh, &points[..e], &level_masses, config.eval)?;
        let report = solve_single_level(&problem, weights[..e].to_vec(), config.eps_factor, config.max_iter)?;
        weights[..e].copy_from_slice(&report.weights);
        let mut level = report.levels.into_iter().next().ok_or_else(|| Error::Internal("missing level report".into()))?;
        level.elapsed = start.elapsed();
        levels.push(level);
    }
    let mut original = vec![0.0; points.len()];
    for (p, &i) in plan.order.iter().enumerate() {
        original[i] = weights[p];
    }
    let last = levels.last().expect("at least one level").clone();
    Ok(SolveReport {
        weights: original,
        iterations: levels.iter().map(|l| l.iterations).sum(),
        evaluations: levels.iter().map(|l| l.evaluations).sum(),
        gradient_norm: last.gradient_norm,
        epsilon: last.epsilon,
        converged: last.converged,
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Point3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Point3::new(rng.gen(), rng.gen(), rng.gen())).collect()
    }

    #[test]
    fn level_sizes() {
        let ends = |k| build_level_plan(&random_points(k, 1), 0.125, 100, 0).ends;
        assert_eq!(ends(1000), vec![125, 1000]);
        assert_eq!(ends(80), vec![80]);
        assert_eq!(ends(64000), vec![125, 1000, 8000, 64000]);
    }

    #[test]
    fn plan_is_a_permutation_sorted_per_level() {
        let pts = random_points(900, 2);
        let plan = build_level_plan(&pts, 0.125, 100, 5);
        let mut o = plan.order.clone();
        o.sort();
        assert_eq!(o, (0..900).collect::<Vec<_>>());
        assert_eq!(plan, build_level_plan(&pts, 0.125, 100, 5));
        assert_ne!(plan.order, build_level_plan(&pts, 0.125, 100, 6).order);
    }

    #[test]
    fn degree_zero_copies_coincident_point() {
        let old = random_points(30, 3);
        let w: Vec<f64> = (0..30).map(|i| i as f64).collect();
        assert_eq!(regress_weights(&old, &w, &[old[17]], 0), vec![17.0]);
    }

    #[test]
    fn linear_field_is_reproduced() {
        let v = Point3::new(0.3, -1.2, 2.0);
        let old = random_points(200, 4);
        let w: Vec<f64> = old.iter().map(|y| 2.0 * v.dot(*y)).collect();
        let new = random_points(50, 5);
        for (y, got) in new.iter().zip(regress_weights(&old, &w, &new, 1)) {
            assert!((got - 2.0 * v.dot(*y)).abs() < 1e-9);
        }
    }

    #[test]
    fn quadratic_field_is_reproduced() {
        let f = |y: &Point3| 0.5 + y.x - 2.0 * y.y * y.z + 3.0 * y.x * y.x - y.z * y.z;
        let old = random_points(300, 6);
        let w: Vec<f64> = old.iter().map(f).collect();
        let new = random_points(50, 7);
        for (y, got) in new.iter().zip(regress_weights(&old, &w, &new, 2)) {
            assert!((got - f(y)).abs() < 1e-8);
        }
    }

    #[test]
    fn degenerate_neighborhoods_fall_back() {
        // collinear old points cannot support a 3D linear fit
        let old: Vec<Point3> = (0..40).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let w: Vec<f64> = (0..40).map(|i| i as f64 * 0.5).collect();
        let got = regress_weights(&old, &w, &[Point3::new(10.2, 0.0, 0.0)], 2);
        assert_eq!(got, vec![5.0]);
        let few = regress_weights(&old[..3], &w[..3], &[Point3::new(0.9, 0.0, 0.0)], 2);
        assert_eq!(few, vec![0.5]);
    }
}
