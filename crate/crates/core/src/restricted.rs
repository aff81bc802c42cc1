//! The power diagram restricted to a tetrahedral mesh, computed by propagating
//! over (tet, site) couples.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::geom::{integrate, ConvexCell, MomentSet, Point3, PredicateMode, Provenance};
use crate::mesh::TetMesh;
use crate::power::{PowerDiagram, Provider};

/// Per-site integrals over `Pow_W(y_i) ∩ M`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellAccumulators {
    /// `∫ rho` over each cell.
    pub mass: Vec<f64>,
    /// `∫ rho x` over each cell.
    pub moment: Vec<Point3>,
    /// `∫ rho |x - y_i|^2` over each cell.
    pub cost: Vec<f64>,
    /// Number of (tet, site) couples with a non-empty cell.
    pub visited: usize,
}

impl CellAccumulators {
    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Centroid of cell `i`, if it has mass.
    pub fn centroid(&self, i: usize) -> Option<Point3> {
        (self.mass[i] > 0.0).then(|| self.moment[i] / self.mass[i])
    }

    /// Sums per-couple contributions in canonical (site, tet) order so that the
    /// result does not depend on how the couples were produced.
    fn from_contributions(k: usize, mut parts: Vec<(u32, u32, MomentSet)>) -> Self {
        parts.sort_unstable_by_key(|&(i, t, _)| (i, t));
        let mut mass = vec![Neumaier::default(); k];
        let mut moment = vec![[Neumaier::default(); 3]; k];
        let mut cost = vec![Neumaier::default(); k];
        for &(i, _, m) in &parts {
            let i = i as usize;
            mass[i].add(m.mass);
            cost[i].add(m.cost);
            for (axis, acc) in moment[i].iter_mut().enumerate() {
                acc.add(m.moment.coord(axis));
            }
        }
        CellAccumulators {
            mass: mass.iter().map(Neumaier::total).collect(),
            moment: moment.iter().map(|m| Point3::new(m[0].total(), m[1].total(), m[2].total())).collect(),
            cost: cost.iter().map(Neumaier::total).collect(),
            visited: parts.len(),
        }
    }
}

/// Compensated summation that also survives terms larger than the running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    carry: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Calls `visit(state, t, i, cell)` for every non-empty restricted cell, with
/// the mesh split across `n_workers` threads. Returns one state per worker, in
/// partition order.
pub fn visit_cells<R, M, V>(mesh: &TetMesh, diagram: &PowerDiagram, n_workers: usize, make: M, visit: V) -> Result<Vec<R>>
where
    R: Send,
    M: Fn() -> R + Sync,
    V: Fn(&mut R, usize, usize, &ConvexCell) + Sync,
{
    let partition = mesh.partition(n_workers.max(1));
    let owners = partition.owners(mesh.num_tets());
    let run = |p: usize| -> Result<R> {
        let mut state = make();
        propagate(mesh, diagram, partition.part(p), &owners, p as u32, |t, i, cell| visit(&mut state, t, i, cell))?;
        Ok(state)
    };
    if partition.len() == 1 {
        return Ok(vec![run(0)?]);
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = (1..partition.len()).map(|p| scope.spawn(move || run(p))).collect();
        let mut out = vec![run(0)];
        out.extend(handles.into_iter().map(|h| h.join().expect("worker panicked")));
        out.into_iter().collect()
    })
}

fn propagate(
    mesh: &TetMesh,
    diagram: &PowerDiagram,
    tets: &[usize],
    owners: &[u32],
    me: u32,
    mut visit: impl FnMut(usize, usize, &ConvexCell),
) -> Result<()> {
    let mut marked: HashSet<(u32, u32)> = HashSet::new();
    let mut tet_reached = vec![false; mesh.num_tets()];
    let mut stack: Vec<(u32, u32)> = Vec::new();
    for &start in tets {
        if tet_reached[start] {
            continue;
        }
        let (seed, cell) = seed_cell(mesh, diagram, start, &marked)
            .ok_or_else(|| Error::Internal(format!("no site has a non-empty cell in tet {start}")))?;
        marked.insert((start as u32, seed as u32));
        let mut current = Some((start, seed, cell));
        while let Some((t, i, cell)) = current.take() {
            tet_reached[t] = true;
            for face in cell.faces() {
                let next = match cell.face_provenance(face) {
                    Provenance::Bisector { site } => Some((t, site)),
                    Provenance::MeshFacet { tet, facet } => {
                        mesh.neighbor(tet, facet as usize).filter(|&n| owners[n] == me).map(|n| (n, i))
                    }
                };
                if let Some((nt, ns)) = next {
                    let key = (nt as u32, ns as u32);
                    if marked.insert(key) {
                        stack.push(key);
                    }
                }
            }
            visit(t, i, &cell);
            while let Some((ct, ci)) = stack.pop() {
                let cell = diagram.cell_in_tet(mesh, ct as usize, ci as usize);
                if !cell.is_empty() {
                    current = Some((ct as usize, ci as usize, cell));
                    break;
                }
            }
        }
    }
    Ok(())
}

/// A site with a non-empty cell in tet `t`: the power-nearest site to a tet
/// vertex, then to the centroid, then any site at all.
fn seed_cell(mesh: &TetMesh, diagram: &PowerDiagram, t: usize, marked: &HashSet<(u32, u32)>) -> Option<(usize, ConvexCell)> {
    let corners = mesh.tet_corners(t);
    let guesses = [diagram.nearest(corners[0]), diagram.nearest(mesh.tet_centroid(t))];
    let try_site = |i: usize| {
        if marked.contains(&(t as u32, i as u32)) {
            return None;
        }
        let cell = diagram.cell_in_tet(mesh, t, i);
        (!cell.is_empty()).then_some((i, cell))
    };
    guesses
        .into_iter()
        .find_map(try_site)
        .or_else(|| (0..diagram.len()).find_map(try_site))
}

/// How a restricted diagram is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub mode: PredicateMode,
    pub provider: Provider,
    pub n_workers: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { mode: PredicateMode::Exact, provider: Provider::Knn, n_workers: 1 }
    }
}

impl EvalOptions {
    pub fn diagram<'a>(&self, points: &'a [Point3], weights: &'a [f64]) -> PowerDiagram<'a> {
        PowerDiagram::new(points, weights, self.mode, self.provider)
    }
}

/// [`evaluate`] for sites `points` with `weights`.
pub fn evaluate_weights(mesh: &TetMesh, points: &[Point3], weights: &[f64], options: &EvalOptions) -> Result<CellAccumulators> {
    evaluate(mesh, &options.diagram(points, weights), options.n_workers)
}

/// Masses, moments and costs of every restricted cell, by propagation.
/// Results are bit-identical for any worker count.
pub fn evaluate(mesh: &TetMesh, diagram: &PowerDiagram, n_workers: usize) -> Result<CellAccumulators> {
    let points = diagram.points();
    let parts = visit_cells(mesh, diagram, n_workers, Vec::new, |out: &mut Vec<(u32, u32, MomentSet)>, t, i, cell| {
        out.push((i as u32, t as u32, integrate(cell, &mesh.tet_density(t), points[i])));
    })?;
    Ok(CellAccumulators::from_contributions(diagram.len(), parts.into_iter().flatten().collect()))
}

/// Largest instance [`brute_force_evaluate`] accepts.
pub const BRUTE_FORCE_MAX_SITES: usize = 256;
pub const BRUTE_FORCE_MAX_TETS: usize = 4096;

/// Clips every tet by every bisector of every site. Test oracle for [`evaluate`].
pub fn brute_force_evaluate(mesh: &TetMesh, points: &[Point3], weights: &[f64], mode: PredicateMode) -> Result<CellAccumulators> {
    if points.len() > BRUTE_FORCE_MAX_SITES || mesh.num_tets() > BRUTE_FORCE_MAX_TETS {
        return Err(Error::TooLarge(format!(
            "{} sites and {} tets (limits {BRUTE_FORCE_MAX_SITES} and {BRUTE_FORCE_MAX_TETS})",
            points.len(),
            mesh.num_tets()
        )));
    }
    let diagram = PowerDiagram::new(points, weights, mode, Provider::Exhaustive);
    let mut parts = Vec::new();
    for t in 0..mesh.num_tets() {
        let density = mesh.tet_density(t);
        for (i, &y) in points.iter().enumerate() {
            let cell = diagram.cell_in_tet(mesh, t, i);
            if !cell.is_empty() {
                parts.push((i as u32, t as u32, integrate(&cell, &density, y)));
            }
        }
    }
    Ok(CellAccumulators::from_contributions(points.len(), parts))
}
