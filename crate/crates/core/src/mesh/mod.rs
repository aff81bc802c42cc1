//! The source measure: a tetrahedral mesh with optional per-vertex density.

pub mod generators;
mod io;

use std::collections::HashMap;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::geom::cell::TET_FACETS;
use crate::geom::point::tet_signed_volume;
use crate::geom::{integrate, Aabb, ConvexCell, LinearField, Point3};
use crate::hilbert::hilbert_key;

pub use io::{load_mesh, parse_mesh, save_mesh, write_mesh};

/// Neighbor slot value for facets on the boundary.
pub const NO_NEIGHBOR: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct TetMesh {
    vertices: Vec<Point3>,
    density: Option<Vec<f64>>,
    tets: Vec<[u32; 4]>,
    neighbors: Vec<[u32; 4]>,
}

/// Total measure `μ(M)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Measure {
    pub total: f64,
}

/// Problems found while assembling a mesh; `tet` indexes the offending tetrahedron.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum MeshDefect {
    Empty,
    VertexNotFinite(usize),
    DensityCount,
    DensityInvalid(usize),
    IndexOutOfRange { tet: usize, index: usize },
    Degenerate(usize),
}

impl std::fmt::Display for MeshDefect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MeshDefect::Empty => write!(f, "mesh has no tetrahedra"),
            MeshDefect::VertexNotFinite(v) => write!(f, "vertex {v} has a non-finite coordinate"),
            MeshDefect::DensityCount => write!(f, "density must have one value per vertex"),
            MeshDefect::DensityInvalid(v) => write!(f, "density at vertex {v} is negative or not finite"),
            MeshDefect::IndexOutOfRange { tet, index } => write!(f, "tet {tet} references missing vertex {index}"),
            MeshDefect::Degenerate(t) => write!(f, "tet {t} has zero volume"),
        }
    }
}

impl TetMesh {
    /// Builds a mesh, repairing negatively oriented tetrahedra and computing
    /// facet adjacency.
    pub fn new(vertices: Vec<Point3>, tets: Vec<[usize; 4]>, density: Option<Vec<f64>>) -> Result<Self> {
        Self::assemble(vertices, tets, density).map_err(|d| Error::Invalid(d.to_string()))
    }

    pub(crate) fn assemble(
        vertices: Vec<Point3>,
        tets: Vec<[usize; 4]>,
        density: Option<Vec<f64>>,
    ) -> std::result::Result<Self, MeshDefect> {
        if tets.is_empty() {
            return Err(MeshDefect::Empty);
        }
        if let Some(v) = vertices.iter().position(|p| !p.is_finite()) {
            return Err(MeshDefect::VertexNotFinite(v));
        }
        if let Some(d) = &density {
            if d.len() != vertices.len() {
                return Err(MeshDefect::DensityCount);
            }
            if let Some(v) = d.iter().position(|r| !(r.is_finite() && *r >= 0.0)) {
                return Err(MeshDefect::DensityInvalid(v));
            }
        }
        let mut oriented = Vec::with_capacity(tets.len());
        for (t, tet) in tets.iter().enumerate() {
            if let Some(&index) = tet.iter().find(|&&i| i >= vertices.len()) {
                return Err(MeshDefect::IndexOutOfRange { tet: t, index });
            }
            let [a, b, c, d] = tet.map(|i| vertices[i]);
            let vol = tet_signed_volume(a, b, c, d);
            let mut tet = tet.map(|i| i as u32);
            if vol == 0.0 || !vol.is_finite() {
                return Err(MeshDefect::Degenerate(t));
            }
            if vol < 0.0 {
                tet.swap(2, 3);
            }
            oriented.push(tet);
        }
        let neighbors = build_adjacency(&oriented);
        Ok(TetMesh { vertices, density, tets: oriented, neighbors })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn tets(&self) -> &[[u32; 4]] {
        &self.tets
    }

    pub fn density(&self) -> Option<&[f64]> {
        self.density.as_deref()
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn tet_corners(&self, t: usize) -> [Point3; 4] {
        self.tets[t].map(|v| self.vertices[v as usize])
    }

    /// Density values at the corners of tet `t` (ones when no density is attached).
    pub fn tet_density_values(&self, t: usize) -> [f64; 4] {
        match &self.density {
            Some(d) => self.tets[t].map(|v| d[v as usize]),
            None => [1.0; 4],
        }
    }

    /// The affine density over tet `t`.
    pub fn tet_density(&self, t: usize) -> LinearField {
        match &self.density {
            Some(_) => LinearField::from_tet(self.tet_corners(t), self.tet_density_values(t)),
            None => LinearField::constant(1.0),
        }
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        let [a, b, c, d] = self.tet_corners(t);
        tet_signed_volume(a, b, c, d)
    }

    pub fn tet_centroid(&self, t: usize) -> Point3 {
        let c = self.tet_corners(t);
        (c[0] + c[1] + c[2] + c[3]) * 0.25
    }

    /// Neighbor across the facet opposite local vertex `facet`.
    pub fn neighbor(&self, t: usize, facet: usize) -> Option<usize> {
        let n = self.neighbors[t][facet];
        (n != NO_NEIGHBOR).then_some(n as usize)
    }

    pub fn neighbors(&self) -> &[[u32; 4]] {
        &self.neighbors
    }

    /// Tet `t` as a convex cell owned by `site`.
    pub fn tet_cell(&self, t: usize, site: usize) -> ConvexCell {
        ConvexCell::from_tet(self.tet_corners(t), t, site)
    }

    /// Mass of tet `t`: volume times the mean corner density.
    pub fn tet_mass(&self, t: usize) -> f64 {
        let d = self.tet_density_values(t);
        self.tet_volume(t) * (d[0] + d[1] + d[2] + d[3]) / 4.0
    }

    pub fn measure(&self) -> Measure {
        Measure { total: (0..self.num_tets()).map(|t| self.tet_mass(t)).sum() }
    }

    /// `μ(M)` recomputed through the cell integrator, tet by tet.
    pub fn measure_by_integration(&self) -> f64 {
        (0..self.num_tets())
            .map(|t| integrate(&self.tet_cell(t, 0), &self.tet_density(t), Point3::ZERO).mass)
            .sum()
    }

    pub fn bbox(&self) -> Aabb {
        Aabb::from_points(&self.vertices).expect("mesh has vertices")
    }

    pub fn translated(&self, v: Point3) -> TetMesh {
        let mut m = self.clone();
        for p in &mut m.vertices {
            *p += v;
        }
        m
    }

    /// Splits the tets into `n_parts` contiguous ranges of a Hilbert ordering of
    /// their centroids. Range sizes differ by at most one.
    pub fn partition(&self, n_parts: usize) -> Partition {
        let nt = self.num_tets();
        let n_parts = n_parts.clamp(1, nt);
        let centroids: Vec<Point3> = (0..nt).map(|t| self.tet_centroid(t)).collect();
        let bbox = Aabb::from_points(&centroids).expect("non-empty");
        let mut keyed: Vec<(u64, usize)> = centroids.iter().enumerate().map(|(t, &c)| (hilbert_key(c, &bbox), t)).collect();
        keyed.sort_unstable();
        let order: Vec<usize> = keyed.into_iter().map(|(_, t)| t).collect();
        let base = nt / n_parts;
        let extra = nt % n_parts;
        let mut ranges = Vec::with_capacity(n_parts);
        let mut start = 0;
        for p in 0..n_parts {
            let len = base + usize::from(p < extra);
            ranges.push(start..start + len);
            start += len;
        }
        Partition { order, ranges }
    }
}

/// Tets in spatial order, cut into contiguous ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub order: Vec<usize>,
    pub ranges: Vec<Range<usize>>,
}

impl Partition {
    pub fn part(&self, p: usize) -> &[usize] {
        &self.order[self.ranges[p].clone()]
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    /// Part index of every tet.
    pub fn owners(&self, num_tets: usize) -> Vec<u32> {
        let mut owner = vec![0u32; num_tets];
        for (p, r) in self.ranges.iter().enumerate() {
            for &t in &self.order[r.clone()] {
                owner[t] = p as u32;
            }
        }
        owner
    }
}

fn build_adjacency(tets: &[[u32; 4]]) -> Vec<[u32; 4]> {
    let mut neighbors = vec![[NO_NEIGHBOR; 4]; tets.len()];
    let mut open: HashMap<[u32; 3], (u32, u8)> = HashMap::with_capacity(tets.len() * 2);
    for (t, tet) in tets.iter().enumerate() {
        for (f, facet) in TET_FACETS.iter().enumerate() {
            let mut key = facet.map(|l| tet[l]);
            key.sort_unstable();
            match open.get(&key) {
                // A third tet on the same facet stays unlinked (non-manifold).
                Some(&(other, of)) if neighbors[other as usize][of as usize] == NO_NEIGHBOR => {
                    neighbors[other as usize][of as usize] = t as u32;
                    neighbors[t][f] = other;
                }
                Some(_) => {}
                None => {
                    open.insert(key, (t as u32, f as u8));
                }
            }
        }
    }
    neighbors
}

#[cfg(test)]
mod tests {
    use super::generators::{cube_grid, unit_cube};
    use super::*;

    #[test]
    fn unit_cube_measure() {
        let m = unit_cube();
        assert_eq!(m.num_vertices(), 8);
        assert_eq!(m.num_tets(), 5);
        assert!((m.measure().total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reference_tet_measure() {
        let m = TetMesh::new(
            vec![Point3::ZERO, Point3::new(1., 0., 0.), Point3::new(0., 1., 0.), Point3::new(0., 0., 1.)],
            vec![[0, 1, 2, 3]],
            None,
        )
        .unwrap();
        assert!((m.measure().total - 1.0 / 6.0).abs() < 1e-16);
    }

    #[test]
    fn linear_density_measure() {
        let cube = unit_cube();
        let rho = cube.vertices().iter().map(|p| p.x).collect();
        let m = TetMesh::new(cube.vertices().to_vec(), cube.tets().iter().map(|t| t.map(|v| v as usize)).collect(), Some(rho)).unwrap();
        assert!((m.measure().total - 0.5).abs() < 1e-15);
        assert!((m.measure_by_integration() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn disjoint_cubes_add() {
        let a = unit_cube();
        let b = a.translated(Point3::new(3., 0., 0.));
        let mut verts = a.vertices().to_vec();
        verts.extend_from_slice(b.vertices());
        let mut tets: Vec<[usize; 4]> = a.tets().iter().map(|t| t.map(|v| v as usize)).collect();
        tets.extend(b.tets().iter().map(|t| t.map(|v| v as usize + 8)));
        let m = TetMesh::new(verts, tets, None).unwrap();
        assert!((m.measure().total - 2.0).abs() < 1e-15);
    }

    #[test]
    fn orientation_is_repaired() {
        let m = TetMesh::new(
            vec![Point3::ZERO, Point3::new(1., 0., 0.), Point3::new(0., 1., 0.), Point3::new(0., 0., 1.)],
            vec![[0, 2, 1, 3]],
            None,
        )
        .unwrap();
        assert!(m.tet_volume(0) > 0.0);
    }

    #[test]
    fn degenerate_and_out_of_range_rejected() {
        let v = vec![Point3::ZERO, Point3::new(1., 0., 0.), Point3::new(2., 0., 0.), Point3::new(0., 0., 1.)];
        assert!(TetMesh::new(v.clone(), vec![[0, 1, 2, 3]], None).is_err());
        assert!(TetMesh::new(v, vec![[0, 1, 2, 99]], None).is_err());
    }

    #[test]
    fn adjacency_is_symmetric() {
        let m = cube_grid(3, Point3::ZERO, 1.0);
        for t in 0..m.num_tets() {
            for f in 0..4 {
                if let Some(n) = m.neighbor(t, f) {
                    let back = (0..4).filter(|&g| m.neighbor(n, g) == Some(t)).count();
                    assert_eq!(back, 1);
                    // shared facet: same three vertices
                    let mut a: Vec<u32> = TET_FACETS[f].iter().map(|&l| m.tets()[t][l]).collect();
                    let g = (0..4).find(|&g| m.neighbor(n, g) == Some(t)).unwrap();
                    let mut b: Vec<u32> = TET_FACETS[g].iter().map(|&l| m.tets()[n][l]).collect();
                    a.sort();
                    b.sort();
                    assert_eq!(a, b);
                }
            }
        }
        // interior facets of a 3x3x3 grid are all matched
        let boundary: usize = m.neighbors().iter().flatten().filter(|&&n| n == NO_NEIGHBOR).count();
        assert_eq!(boundary, 6 * 9 * 2);
    }

    #[test]
    fn measure_matches_integration() {
        let m = cube_grid(3, Point3::new(-1., 0.5, 2.), 0.7);
        let a = m.measure().total;
        let b = m.measure_by_integration();
        assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn partition_sizes() {
        let m = unit_cube();
        let sizes = |n| m.partition(n).ranges.iter().map(|r| r.len()).collect::<Vec<_>>();
        assert_eq!(sizes(2), vec![3, 2]);
        assert_eq!(sizes(1), vec![5]);
        let m8 = TetMesh::new(
            m.vertices().to_vec(),
            m.tets().iter().chain(m.tets().iter().take(3)).map(|t| t.map(|v| v as usize)).collect(),
            None,
        )
        .unwrap();
        assert_eq!(m8.partition(4).ranges.iter().map(|r| r.len()).collect::<Vec<_>>(), vec![2, 2, 2, 2]);
        let p = m8.partition(4);
        let mut all: Vec<usize> = p.order.clone();
        all.sort();
        assert_eq!(all, (0..8).collect::<Vec<_>>());
    }
}
