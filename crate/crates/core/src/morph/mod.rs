//! Morphing between two tetrahedral meshes: a point sampling of the target,
//! transported back onto the source, connected by the tetrahedra shared by the
//! Delaunay dual on the target and the regular dual on the source.

mod io;

use std::collections::{BTreeSet, HashSet};

use crate::cvt::lloyd;
use crate::error::Result;
use crate::geom::predicates::{orient3d_exact, perturbed_lifted_side, power_sphere_side};
use crate::geom::{Point3, WeightedSite};
use crate::mesh::TetMesh;
use crate::power::SiteSet;
use crate::restricted::{evaluate_weights, visit_cells, EvalOptions};
use crate::transport::{solve_multilevel, SolverConfig};

pub use io::{load_morph, parse_morph, save_morph, write_frame, write_morph};

/// Site 4-tuples, each sorted ascending.
pub type DualTetSet = BTreeSet<[usize; 4]>;

/// Tetrahedra dual to the vertices of the power diagram of `points` restricted
/// to `mesh`: one tuple per point of the mesh where four cells meet. Points
/// where five or more cells meet are split by a triangulation of the tied
/// sites perturbed by site index. Zero weights give the Delaunay dual.
pub fn extract_dual(mesh: &TetMesh, points: &[Point3], weights: &[f64], options: &EvalOptions) -> Result<DualTetSet> {
    let diagram = options.diagram(points, weights);
    let found = visit_cells(mesh, &diagram, options.n_workers, BTreeSet::new, |set: &mut DualTetSet, _, i, cell| {
        for v in 0..cell.vertices().len() {
            if let [Some(a), Some(b), Some(c)] = cell.vertex_support(v).map(|p| p.bisector_site()) {
                let mut q = [i, a, b, c];
                q.sort_unstable();
                set.insert(q);
            }
        }
    })?;
    let raw: DualTetSet = found.into_iter().flatten().collect();
    Ok(resolve_ties(points, weights, raw))
}

fn resolve_ties(points: &[Point3], weights: &[f64], raw: DualTetSet) -> DualTetSet {
    let site = |i: usize| WeightedSite::new(points[i], weights[i], i);
    let tuples: Vec<[usize; 4]> =
        raw.into_iter().filter(|q| orient3d_exact(points[q[0]], points[q[1]], points[q[2]], points[q[3]]) != 0).collect();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); points.len()];
    for (u, q) in tuples.iter().enumerate() {
        for &s in q {
            incident[s].push(u);
        }
    }
    let mut out = DualTetSet::new();
    let mut clusters: Vec<HashSet<usize>> = Vec::new();
    for q in &tuples {
        if clusters.iter().any(|c| q.iter().all(|s| c.contains(s))) {
            continue;
        }
        let base = q.map(site);
        let tied = |m: usize| power_sphere_side([&base[0], &base[1], &base[2], &base[3], &site(m)]) == 0;
        let mut cluster: HashSet<usize> = q.iter().copied().collect();
        let mut frontier: Vec<usize> = q.to_vec();
        let mut tested: HashSet<usize> = cluster.clone();
        while let Some(s) = frontier.pop() {
            for &u in &incident[s] {
                for m in tuples[u] {
                    if tested.insert(m) && tied(m) {
                        cluster.insert(m);
                        frontier.push(m);
                    }
                }
            }
        }
        if cluster.len() == 4 {
            out.insert(*q);
        } else {
            let mut members: Vec<usize> = cluster.iter().copied().collect();
            members.sort_unstable();
            out.extend(triangulate_tied(points, &members));
            clusters.push(cluster);
        }
    }
    out
}

/// Triangulation of sites sharing one power sphere: the lower hull of the
/// sites lifted to infinitesimal heights ordered by index. Brute force over 4-subsets.
fn triangulate_tied(points: &[Point3], members: &[usize]) -> Vec<[usize; 4]> {
    let n = members.len();
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                for d in c + 1..n {
                    let q = [members[a], members[b], members[c], members[d]];
                    let o = orient3d_exact(points[q[0]], points[q[1]], points[q[2]], points[q[3]]);
                    if o == 0 {
                        continue;
                    }
                    let lower = members.iter().filter(|m| !q.contains(m)).all(|&m| {
                        let p = [points[q[0]], points[q[1]], points[q[2]], points[q[3]], points[m]];
                        perturbed_lifted_side(p, [q[0], q[1], q[2], q[3], m]) * o > 0
                    });
                    if lower {
                        out.push(q);
                    }
                }
            }
        }
    }
    out
}

/// A tetrahedral mesh whose vertices move linearly from `start` (`t = 0`) to
/// `end` (`t = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct MorphMesh {
    pub start: Vec<Point3>,
    pub end: Vec<Point3>,
    pub tets: Vec<[usize; 4]>,
}

impl MorphMesh {
    pub fn len(&self) -> usize {
        self.start.len()
    }

    pub fn is_empty(&self) -> bool {
        self.start.is_empty()
    }

    pub fn positions(&self, t: f64) -> Vec<Point3> {
        self.start.iter().zip(&self.end).map(|(a, b)| *a * (1.0 - t) + *b * t).collect()
    }

    pub fn mean_displacement(&self) -> Point3 {
        let sum = self.start.iter().zip(&self.end).fold(Point3::ZERO, |acc, (a, b)| acc + (*b - *a));
        sum / self.len().max(1) as f64
    }

    pub fn mean_displacement_length(&self) -> f64 {
        self.start.iter().zip(&self.end).map(|(a, b)| (*b - *a).norm()).sum::<f64>() / self.len().max(1) as f64
    }
}

/// One time sample of a morph. Tetrahedra are copied verbatim, so some may be
/// flat or inverted.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub vertices: Vec<Point3>,
    pub tets: Vec<[usize; 4]>,
}

/// `n_frames` evenly spaced frames from `t = 0` to `t = 1`.
pub fn emit_frames(morph: &MorphMesh, n_frames: usize) -> Vec<Frame> {
    assert!(n_frames >= 2, "need at least the two end frames");
    (0..n_frames)
        .map(|j| {
            let t = j as f64 / (n_frames - 1) as f64;
            let vertices = match j {
                0 => morph.start.clone(),
                _ if j == n_frames - 1 => morph.end.clone(),
                _ => morph.positions(t),
            };
            Frame { t, vertices, tets: morph.tets.clone() }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorphConfig {
    pub k: usize,
    pub lloyd_iters: usize,
    pub solver: SolverConfig,
}

impl Default for MorphConfig {
    fn default() -> Self {
        MorphConfig { k: 1000, lloyd_iters: 30, solver: SolverConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorphReport {
    pub morph: MorphMesh,
    pub converged: bool,
    pub delaunay_tets: usize,
    pub regular_tets: usize,
}

/// Morph from `source` to `target`: samples `target` with Lloyd, transports
/// `source` onto the samples with each receiving `μ(source) / k`, and keeps
/// the tetrahedra present in both duals. Vertices start at their power cell
/// centroid in `source` (or at the sample when the cell is empty) and end at
/// the sample. Tetrahedra are oriented positively at `t = 1`.
pub fn build_morph(source: &TetMesh, target: &TetMesh, config: &MorphConfig) -> Result<MorphReport> {
    let eval = config.solver.eval;
    let samples = lloyd(target, config.k, config.lloyd_iters, config.solver.seed, &eval)?;
    let masses = vec![source.measure().total / config.k as f64; config.k];
    let sites = SiteSet::new(samples.clone()).with_masses(masses);
    let solve = solve_multilevel(source, &sites, &config.solver)?;
    let zero = vec![0.0; config.k];
    let delaunay = extract_dual(target, &samples, &zero, &eval)?;
    let regular = extract_dual(source, &samples, &solve.weights, &eval)?;
    let tets = delaunay
        .intersection(&regular)
        .map(|&q| {
            let mut q = q;
            if orient3d_exact(samples[q[0]], samples[q[1]], samples[q[2]], samples[q[3]]) < 0 {
                q.swap(2, 3);
            }
            q
        })
        .collect();
    let cells = evaluate_weights(source, &samples, &solve.weights, &eval)?;
    let start = (0..config.k).map(|i| cells.centroid(i).unwrap_or(samples[i])).collect();
    Ok(MorphReport {
        morph: MorphMesh { start, end: samples, tets },
        converged: solve.converged,
        delaunay_tets: delaunay.len(),
        regular_tets: regular.len(),
    })
}
