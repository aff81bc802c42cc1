//! Weighted sites, neighbor providers and power cells clipped to tetrahedra.

mod io;

use std::collections::HashSet;
use std::num::NonZero;
use std::sync::OnceLock;

use kiddo::{ImmutableKdTree, SquaredEuclidean};
use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geom::{bisector, side_of_bisector, Aabb, ConvexCell, Point3, PredicateMode, Side, WeightedSite};
use crate::mesh::TetMesh;

pub use io::{load_sites, parse_sites, save_sites, write_sites};

/// Target points with weights and (optionally) prescribed masses.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteSet {
    pub points: Vec<Point3>,
    pub weights: Vec<f64>,
    pub masses: Option<Vec<f64>>,
}

impl SiteSet {
    /// Sites with zero weights and no prescribed masses.
    pub fn new(points: Vec<Point3>) -> Self {
        let weights = vec![0.0; points.len()];
        SiteSet { points, weights, masses: None }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = weights;
        self
    }

    pub fn with_masses(mut self, masses: Vec<f64>) -> Self {
        self.masses = Some(masses);
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Prescribed masses, or `total / k` for every site when none are attached.
    pub fn masses_or_uniform(&self, total: f64) -> Vec<f64> {
        match &self.masses {
            Some(m) => m.clone(),
            None => vec![total / self.len() as f64; self.len()],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::Invalid("site set is empty".into()));
        }
        if self.weights.len() != self.len() {
            return Err(Error::Invalid(format!("{} weights for {} sites", self.weights.len(), self.len())));
        }
        if let Some(i) = self.points.iter().position(|p| !p.is_finite()) {
            return Err(Error::Invalid(format!("site {i} has a non-finite coordinate")));
        }
        if let Some(i) = self.weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::Invalid(format!("site {i} has a non-finite weight")));
        }
        if let Some(m) = &self.masses {
            if m.len() != self.len() {
                return Err(Error::Invalid(format!("{} masses for {} sites", m.len(), self.len())));
            }
            if let Some(i) = m.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::Invalid(format!("site {i} has a non-positive mass")));
            }
        }
        Ok(())
    }
}

/// A site raised into 4D so that power distance becomes Euclidean distance
/// on the `h = 0` slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftedSite {
    pub base: Point3,
    pub height: f64,
}

impl LiftedSite {
    pub fn to_array(&self) -> [f64; 4] {
        [self.base.x, self.base.y, self.base.z, self.height]
    }

    /// Squared 4D distance from `(x, 0)`.
    pub fn dist2(&self, x: Point3) -> f64 {
        x.dist2(self.base) + self.height * self.height
    }
}

/// Heights `sqrt(w_max - w_i)`.
pub fn lift(points: &[Point3], weights: &[f64]) -> Vec<LiftedSite> {
    let w_max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    points
        .iter()
        .zip(weights)
        .map(|(&base, &w)| LiftedSite { base, height: (w_max - w).max(0.0).sqrt() })
        .collect()
}

/// How clipping candidates for a power cell are found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Provider {
    /// Every other site, by increasing power distance.
    Exhaustive,
    /// A 4D kd-tree over lifted sites with per-vertex certification.
    #[default]
    Knn,
}

impl std::str::FromStr for Provider {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exhaustive" => Ok(Provider::Exhaustive),
            "knn" => Ok(Provider::Knn),
            other => Err(format!("unknown provider `{other}` (expected exhaustive|knn)")),
        }
    }
}

/// Lifted nearest neighbors of a site clipped in before vertex certification.
pub const KNN_BATCH: usize = 16;

/// Relative slack on kd-tree radii; candidates are then decided exactly.
const RADIUS_SLACK: f64 = 1e-9;

/// Lifted sites in a 4D kd-tree. The best affine fit `2 b . y` of the weights
/// is removed first: with `r_j = w_j - 2 b . y_j`,
/// `pow_j(x) = |x + b - y_j|^2 - r_j - (2 b . x + |b|^2)`, so comparing power
/// distances at `x` is comparing lifted distances at `x + b`, and the
/// residual heights stay small when the weights are close to affine.
struct LiftedIndex {
    tree: ImmutableKdTree<f64, 4>,
    lifted: Vec<LiftedSite>,
    shift: Point3,
    slack: f64,
}

impl LiftedIndex {
    fn new(points: &[Point3], weights: &[f64]) -> Self {
        let shift = affine_trend(points, weights);
        let residual: Vec<f64> = points.iter().zip(weights).map(|(y, w)| w - 2.0 * shift.dot(*y)).collect();
        let lifted = lift(points, &residual);
        let coords: Vec<[f64; 4]> = lifted.iter().map(LiftedSite::to_array).collect();
        let tree = ImmutableKdTree::new_from_slice(&coords).expect("site count fits the index");
        let scale = points
            .iter()
            .zip(weights)
            .zip(&residual)
            .fold(0.0f64, |acc, ((y, w), r)| acc.max(w.abs() + r.abs() + 2.0 * shift.norm() * y.norm()));
        LiftedIndex { tree, lifted, shift, slack: RADIUS_SLACK * scale }
    }

    /// Lifted distance of site `i` from query point `x`.
    fn dist2(&self, i: usize, x: Point3) -> f64 {
        self.lifted[i].dist2(x + self.shift)
    }

    /// Calls `f` for every site whose lifted distance from `(x, 0)` may be at most `r2`.
    fn for_each_within(&self, x: Point3, r2: f64, mut f: impl FnMut(usize)) {
        let radius = r2 + RADIUS_SLACK * r2 + self.slack + f64::MIN_POSITIVE;
        let q = x + self.shift;
        self.tree
            .query(&[q.x, q.y, q.z, 0.0])
            .within::<SquaredEuclidean<f64>>(radius)
            .unsorted()
            .visit(|n| f(n.item as usize));
    }

    fn nearest_n(&self, q: [f64; 4], n: usize) -> Vec<usize> {
        let n = NonZero::new(n.min(self.lifted.len())).expect("non-empty index");
        self.tree
            .query(&q)
            .nearest_n::<SquaredEuclidean<f64>>(n)
            .execute()
            .into_iter()
            .map(|n| n.item as usize)
            .collect()
    }
}

/// A power diagram over borrowed sites and weights, ready to produce cells.
pub struct PowerDiagram<'a> {
    points: &'a [Point3],
    weights: &'a [f64],
    mode: PredicateMode,
    provider: Provider,
    index: Option<LiftedIndex>,
    /// Box around the first mesh queried, and per site the bisectors bounding
    /// the power cell inside it (`None` for an empty cell).
    region: OnceLock<Aabb>,
    facets: Vec<OnceLock<Option<Vec<usize>>>>,
}

impl<'a> PowerDiagram<'a> {
    pub fn new(points: &'a [Point3], weights: &'a [f64], mode: PredicateMode, provider: Provider) -> Self {
        assert_eq!(points.len(), weights.len());
        assert!(!points.is_empty());
        let index = (provider == Provider::Knn).then(|| LiftedIndex::new(points, weights));
        let facets = if index.is_some() { (0..points.len()).map(|_| OnceLock::new()).collect() } else { Vec::new() };
        PowerDiagram { points, weights, mode, provider, index, region: OnceLock::new(), facets }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &'a [Point3] {
        self.points
    }

    pub fn weights(&self) -> &'a [f64] {
        self.weights
    }

    pub fn mode(&self) -> PredicateMode {
        self.mode
    }

    pub fn provider(&self) -> Provider {
        self.provider
    }

    pub fn site(&self, i: usize) -> WeightedSite {
        WeightedSite::new(self.points[i], self.weights[i], i)
    }

    /// The site whose power cell contains `x` (ties to the smaller index).
    pub fn nearest(&self, x: Point3) -> usize {
        let winner = |candidates: &mut dyn Iterator<Item = usize>| {
            let mut best = candidates.next().expect("at least one candidate");
            for c in candidates {
                let beats = side_of_bisector(x, &self.site(best), &self.site(c), self.mode) == Side::J;
                if c != best && beats {
                    best = c;
                }
            }
            best
        };
        match &self.index {
            Some(index) => {
                let q = x + index.shift;
                let first = index.nearest_n([q.x, q.y, q.z, 0.0], 1)[0];
                let r2 = index.dist2(first, x);
                let mut candidates = vec![first];
                index.for_each_within(x, r2, |j| candidates.push(j));
                winner(&mut candidates.into_iter())
            }
            None => winner(&mut (0..self.len())),
        }
    }

    /// Other sites in the order the provider offers them: by power distance to
    /// `y_i` (exhaustive) or by lifted distance to the lifted `y_i` (knn, fully
    /// consumed).
    pub fn neighbor_candidates(&self, i: usize) -> Vec<usize> {
        match &self.index {
            None => {
                let yi = self.points[i];
                let mut keyed: Vec<(f64, usize)> = (0..self.len())
                    .filter(|&j| j != i)
                    .map(|j| (yi.dist2(self.points[j]) - self.weights[j], j))
                    .collect();
                keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                keyed.into_iter().map(|(_, j)| j).collect()
            }
            Some(index) => index
                .nearest_n(index.lifted[i].to_array(), self.len())
                .into_iter()
                .filter(|&j| j != i)
                .collect(),
        }
    }

    /// Clips `cell` by the bisector of sites `i` and `j`, keeping the side of `i`.
    /// Returns whether the cell changed.
    pub fn clip_by_bisector(&self, cell: &mut ConvexCell, i: usize, j: usize) -> bool {
        let (si, sj) = (self.site(i), self.site(j));
        cell.clip_in_place(&bisector(&si, &sj), |x| side_of_bisector(x, &si, &sj, self.mode) == Side::I)
    }

    /// `Pow_W(y_i) ∩ t`.
    pub fn cell_in_tet(&self, mesh: &TetMesh, t: usize, i: usize) -> ConvexCell {
        let cell = mesh.tet_cell(t, i);
        let Some(index) = &self.index else {
            return self.clip_by_all(cell, i);
        };
        let region = self.region.get_or_init(|| {
            let b = mesh.bbox();
            let pad = Point3::new(1.0, 1.0, 1.0) * (0.01 * (b.max - b.min).norm() + f64::MIN_POSITIVE);
            Aabb { min: b.min - pad, max: b.max + pad }
        });
        if !mesh.tet_corners(t).iter().all(|&c| region.contains(c, 0.0)) {
            return self.clip_certified(cell, i, index);
        }
        let facets = self.facets[i].get_or_init(|| {
            let full = self.clip_certified(ConvexCell::from_box(region.min, region.max, usize::MAX), i, index);
            (!full.is_empty()).then(|| {
                let mut sites: Vec<usize> =
                    full.faces().iter().filter_map(|f| full.face_provenance(f).bisector_site()).collect();
                sites.sort_unstable();
                sites
            })
        });
        match facets {
            None => ConvexCell::empty(i, t),
            Some(sites) => {
                let mut cell = cell;
                for &j in sites {
                    if cell.is_empty() {
                        break;
                    }
                    self.clip_by_bisector(&mut cell, i, j);
                }
                cell
            }
        }
    }

    fn clip_by_all(&self, mut cell: ConvexCell, i: usize) -> ConvexCell {
        for j in self.neighbor_candidates(i) {
            if cell.is_empty() {
                break;
            }
            self.clip_by_bisector(&mut cell, i, j);
        }
        cell
    }

    fn clip_certified(&self, mut cell: ConvexCell, i: usize, index: &LiftedIndex) -> ConvexCell {
        let si = self.site(i);
        let mut applied: HashSet<usize> = HashSet::new();
        for j in index.nearest_n(index.lifted[i].to_array(), KNN_BATCH + 1) {
            if j != i && !cell.is_empty() {
                self.clip_by_bisector(&mut cell, i, j);
                applied.insert(j);
            }
        }
        // A vertex is certified once no site beats `i` there; certification
        // depends only on the point, so it survives further clipping.
        let mut certified: HashSet<[u64; 3]> = HashSet::new();
        loop {
            if cell.is_empty() {
                return cell;
            }
            let mut violators: Vec<usize> = Vec::new();
            for &v in cell.vertices() {
                let key = [v.x.to_bits(), v.y.to_bits(), v.z.to_bits()];
                if certified.contains(&key) {
                    continue;
                }
                let before = violators.len();
                let r2 = index.dist2(i, v);
                index.for_each_within(v, r2, |j| {
                    if j != i && !applied.contains(&j) && side_of_bisector(v, &si, &self.site(j), self.mode) == Side::J {
                        violators.push(j);
                    }
                });
                if violators.len() == before {
                    certified.insert(key);
                }
            }
            if violators.is_empty() {
                return cell;
            }
            violators.sort_unstable();
            violators.dedup();
            for j in violators {
                if !cell.is_empty() {
                    self.clip_by_bisector(&mut cell, i, j);
                }
                applied.insert(j);
            }
        }
    }
}

/// `b` minimizing `Σ (w_j - a - 2 b . y_j)^2`; zero when the sites do not
/// span 3D.
fn affine_trend(points: &[Point3], weights: &[f64]) -> Point3 {
    let k = points.len() as f64;
    if points.len() < 4 {
        return Point3::ZERO;
    }
    let mean = points.iter().fold(Point3::ZERO, |a, &p| a + p) / k;
    let w_mean = weights.iter().sum::<f64>() / k;
    let mut cov = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for (&p, &w) in points.iter().zip(weights) {
        let d = p - mean;
        let d = Vector3::new(d.x, d.y, d.z);
        cov += d * d.transpose();
        rhs += d * (w - w_mean);
    }
    let svd = cov.svd(true, true);
    let tol = 1e-10 * svd.singular_values.max();
    if svd.singular_values.min() <= tol {
        return Point3::ZERO;
    }
    match svd.solve(&rhs, tol) {
        Ok(g) if g.iter().all(|v| v.is_finite()) => Point3::new(g[0], g[1], g[2]) * 0.5,
        _ => Point3::ZERO,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::integrate;
    use crate::geom::LinearField;
    use crate::mesh::generators::{cube_grid, unit_cube};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn corners() -> Vec<Point3> {
        (0..8).map(|i| Point3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64)).collect()
    }

    #[test]
    fn two_sites_single_candidate() {
        let pts = [Point3::ZERO, Point3::new(1., 0., 0.)];
        for provider in [Provider::Exhaustive, Provider::Knn] {
            let d = PowerDiagram::new(&pts, &[0.0, 0.0], PredicateMode::Exact, provider);
            assert_eq!(d.neighbor_candidates(0), vec![1]);
            assert_eq!(d.neighbor_candidates(1), vec![0]);
        }
    }

    #[test]
    fn cube_corner_candidates_start_with_edge_neighbors() {
        let pts = corners();
        let w = vec![0.0; 8];
        let d = PowerDiagram::new(&pts, &w, PredicateMode::Exact, Provider::Exhaustive);
        let mut first: Vec<usize> = d.neighbor_candidates(0)[..3].to_vec();
        first.sort();
        assert_eq!(first, vec![1, 2, 4]);
        let k = PowerDiagram::new(&pts, &w, PredicateMode::Exact, Provider::Knn);
        let mut a = d.neighbor_candidates(0);
        let mut b = k.neighbor_candidates(0);
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn lift_heights() {
        let pts = [Point3::ZERO, Point3::new(1., 0., 0.)];
        let h: Vec<f64> = lift(&pts, &[0.1, 0.0]).iter().map(|l| l.height).collect();
        assert_eq!(h, vec![0.0, 0.1f64.sqrt()]);
        let shifted: Vec<f64> = lift(&pts, &[5.1, 5.0]).iter().map(|l| l.height).collect();
        assert!((shifted[1] - h[1]).abs() < 1e-14 && shifted[0] == 0.0);
        assert!(lift(&pts, &[2.0, 2.0]).iter().all(|l| l.height == 0.0));
    }

    #[test]
    fn single_site_cell_is_the_tet() {
        let m = unit_cube();
        let pts = [Point3::new(0.3, 0.3, 0.3)];
        for provider in [Provider::Exhaustive, Provider::Knn] {
            let d = PowerDiagram::new(&pts, &[0.0], PredicateMode::Exact, provider);
            let c = d.cell_in_tet(&m, 0, 0);
            assert_eq!(c.vertices().len(), 4);
            assert!(c.faces().iter().all(|f| matches!(c.face_provenance(f), crate::geom::Provenance::MeshFacet { .. })));
        }
    }

    #[test]
    fn weighted_pair_splits_cube_at_0_6() {
        let m = unit_cube();
        let pts = [Point3::new(0.25, 0.5, 0.5), Point3::new(0.75, 0.5, 0.5)];
        let w = [0.1, 0.0];
        for provider in [Provider::Exhaustive, Provider::Knn] {
            let d = PowerDiagram::new(&pts, &w, PredicateMode::Exact, provider);
            let mass0: f64 = (0..m.num_tets())
                .map(|t| integrate(&d.cell_in_tet(&m, t, 0), &LinearField::constant(1.0), Point3::ZERO).mass)
                .sum();
            assert!((mass0 - 0.6).abs() < 1e-14, "{mass0}");
        }
    }

    fn sorted_vertices(c: &ConvexCell) -> Vec<[u64; 3]> {
        let mut v: Vec<[u64; 3]> = c.vertices().iter().map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).collect();
        v.sort();
        v.dedup();
        v
    }

    #[test]
    fn knn_matches_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mesh = cube_grid(2, Point3::ZERO, 1.0);
        for _ in 0..20 {
            let k = rng.gen_range(2..=64);
            let pts: Vec<Point3> = (0..k).map(|_| Point3::new(rng.gen(), rng.gen(), rng.gen())).collect();
            let w: Vec<f64> = (0..k).map(|_| rng.gen_range(-0.05..0.05)).collect();
            let ex = PowerDiagram::new(&pts, &w, PredicateMode::Exact, Provider::Exhaustive);
            let kn = PowerDiagram::new(&pts, &w, PredicateMode::Exact, Provider::Knn);
            for t in 0..mesh.num_tets() {
                for i in 0..k {
                    let a = ex.cell_in_tet(&mesh, t, i);
                    let b = kn.cell_in_tet(&mesh, t, i);
                    assert_eq!(sorted_vertices(&a), sorted_vertices(&b), "t={t} i={i} k={k}");
                }
            }
        }
    }

    #[test]
    fn nearest_agrees_with_lifted_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k = 40;
        let pts: Vec<Point3> = (0..k).map(|_| Point3::new(rng.gen(), rng.gen(), rng.gen())).collect();
        let w: Vec<f64> = (0..k).map(|_| rng.gen_range(-0.1..0.1)).collect();
        let lifted = lift(&pts, &w);
        let kn = PowerDiagram::new(&pts, &w, PredicateMode::Exact, Provider::Knn);
        let ex = PowerDiagram::new(&pts, &w, PredicateMode::Exact, Provider::Exhaustive);
        for _ in 0..10_000 {
            let x = Point3::new(rng.gen_range(-0.2..1.2), rng.gen_range(-0.2..1.2), rng.gen_range(-0.2..1.2));
            let by_lift = (0..k).min_by(|&a, &b| lifted[a].dist2(x).total_cmp(&lifted[b].dist2(x))).unwrap();
            let i = kn.nearest(x);
            assert_eq!(i, ex.nearest(x));
            assert_eq!(i, by_lift);
            for j in 0..k {
                if j != i {
                    assert_eq!(side_of_bisector(x, &kn.site(i), &kn.site(j), PredicateMode::Exact), Side::I);
                }
            }
        }
    }

    #[test]
    fn validation_catches_bad_sets() {
        assert!(SiteSet::new(vec![]).validate().is_err());
        let s = SiteSet::new(vec![Point3::ZERO]).with_masses(vec![0.0]);
        assert!(s.validate().is_err());
        let s = SiteSet::new(vec![Point3::ZERO]).with_weights(vec![f64::NAN]);
        assert!(s.validate().is_err());
        assert!(SiteSet::new(vec![Point3::ZERO]).with_masses(vec![1.0]).validate().is_ok());
    }
}
