//! Convex cells in boundary representation and re-entrant clipping.
//!
//! Every vertex records the three planes it was built from. New vertices are
//! computed from their three planes taken in canonical (provenance) order, so
//! the coordinates of a vertex do not depend on the order in which the cell
//! was clipped.

use super::halfspace::{HalfSpace, Provenance};
use super::point::{tet_signed_volume, Point3};

/// A face: a vertex cycle, counter-clockwise when seen from outside the cell,
/// lying on `planes[plane]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub plane: u32,
    pub cycle: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexCell {
    vertices: Vec<Point3>,
    supports: Vec<[u32; 3]>,
    planes: Vec<HalfSpace>,
    faces: Vec<Face>,
    pub site: usize,
    pub tet: usize,
}

/// Local vertex cycles of the four facets of a positively oriented tetrahedron;
/// facet `f` is opposite local vertex `f`.
pub const TET_FACETS: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];

impl ConvexCell {
    pub fn empty(site: usize, tet: usize) -> Self {
        ConvexCell { vertices: Vec::new(), supports: Vec::new(), planes: Vec::new(), faces: Vec::new(), site, tet }
    }

    /// The tetrahedron `corners` (positively oriented) as a cell whose faces carry
    /// `MeshFacet` provenance for mesh tetrahedron `tet`.
    pub fn from_tet(corners: [Point3; 4], tet: usize, site: usize) -> Self {
        let planes: Vec<HalfSpace> = TET_FACETS
            .iter()
            .enumerate()
            .map(|(f, c)| {
                HalfSpace::through(
                    corners[c[0]],
                    corners[c[1]],
                    corners[c[2]],
                    Provenance::MeshFacet { tet, facet: f as u8 },
                )
            })
            .collect();
        let faces = TET_FACETS
            .iter()
            .enumerate()
            .map(|(f, c)| Face { plane: f as u32, cycle: c.iter().map(|&v| v as u32).collect() })
            .collect();
        // Vertex v lies on every facet except the one opposite to it.
        let supports = (0..4u32)
            .map(|v| {
                let mut s = [0u32; 3];
                let mut k = 0;
                for f in 0..4u32 {
                    if f != v {
                        s[k] = f;
                        k += 1;
                    }
                }
                s
            })
            .collect();
        ConvexCell { vertices: corners.to_vec(), supports, planes, faces, site, tet }
    }

    /// Axis-aligned box; faces are tagged as facets 0..6 of tetrahedron `tet`.
    pub fn from_box(min: Point3, max: Point3, tet: usize) -> Self {
        let vertices: Vec<Point3> = (0..8)
            .map(|i| {
                Point3::new(
                    if i & 1 == 0 { min.x } else { max.x },
                    if i & 2 == 0 { min.y } else { max.y },
                    if i & 4 == 0 { min.z } else { max.z },
                )
            })
            .collect();
        let axes = [Point3::new(1., 0., 0.), Point3::new(0., 1., 0.), Point3::new(0., 0., 1.)];
        let mut planes = Vec::with_capacity(6);
        for (a, n) in axes.iter().enumerate() {
            planes.push(HalfSpace::new(-*n, -min.coord(a), Provenance::MeshFacet { tet, facet: (2 * a) as u8 }));
            planes.push(HalfSpace::new(*n, max.coord(a), Provenance::MeshFacet { tet, facet: (2 * a + 1) as u8 }));
        }
        let cycles: [[u32; 4]; 6] =
            [[0, 4, 6, 2], [1, 3, 7, 5], [0, 1, 5, 4], [2, 6, 7, 3], [0, 2, 3, 1], [4, 5, 7, 6]];
        let faces = cycles.iter().enumerate().map(|(p, c)| Face { plane: p as u32, cycle: c.to_vec() }).collect();
        let supports = (0..8u32).map(|i| [i & 1, 2 + ((i >> 1) & 1), 4 + ((i >> 2) & 1)]).collect();
        ConvexCell { vertices, supports, planes, faces, site: 0, tet }
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn plane(&self, face: &Face) -> &HalfSpace {
        &self.planes[face.plane as usize]
    }

    pub fn face_provenance(&self, face: &Face) -> Provenance {
        self.planes[face.plane as usize].provenance
    }

    /// Provenances of the three planes that define vertex `v`.
    pub fn vertex_support(&self, v: usize) -> [Provenance; 3] {
        self.supports[v].map(|p| self.planes[p as usize].provenance)
    }

    pub fn has_plane(&self, provenance: Provenance) -> bool {
        self.planes.iter().any(|p| p.provenance == provenance)
    }

    pub fn barycenter(&self) -> Point3 {
        let n = self.vertices.len().max(1) as f64;
        self.vertices.iter().fold(Point3::ZERO, |a, &b| a + b) / n
    }

    /// Calls `f` with every tetrahedron of the fan decomposition from the barycenter.
    pub fn for_each_fan_tet(&self, mut f: impl FnMut(Point3, Point3, Point3, Point3)) {
        if self.is_empty() {
            return;
        }
        let apex = self.barycenter();
        for face in &self.faces {
            let c = &face.cycle;
            let v0 = self.vertices[c[0] as usize];
            for k in 1..c.len() - 1 {
                f(apex, v0, self.vertices[c[k] as usize], self.vertices[c[k + 1] as usize]);
            }
        }
    }

    pub fn volume(&self) -> f64 {
        let mut v = 0.0;
        self.for_each_fan_tet(|a, b, c, d| v += tet_signed_volume(a, b, c, d));
        v
    }

    /// `self` intersected with `h`, classifying vertices with plain floating point.
    pub fn clip(&self, h: &HalfSpace) -> ConvexCell {
        self.clip_with(h, |p| h.contains(p))
    }

    /// `self` intersected with `h`, where `inside` decides on which side each
    /// existing vertex lies. Vertices already built on `h`'s plane are kept.
    pub fn clip_with(&self, h: &HalfSpace, inside: impl Fn(Point3) -> bool) -> ConvexCell {
        let mut cell = self.clone();
        cell.clip_in_place(h, inside);
        cell
    }

    /// In-place [`ConvexCell::clip_with`]; returns whether the cell changed.
    /// A cell entirely inside `h` is left untouched without allocating.
    pub fn clip_in_place(&mut self, h: &HalfSpace, inside: impl Fn(Point3) -> bool) -> bool {
        if self.is_empty() {
            return false;
        }
        let existing = self.planes.iter().position(|p| p.provenance == h.provenance).map(|i| i as u32);
        let kept = |v: usize| existing.is_some_and(|e| self.supports[v].contains(&e)) || inside(self.vertices[v]);
        let Some(first_out) = (0..self.vertices.len()).find(|&v| !kept(v)) else {
            return false;
        };
        let keep: Vec<bool> = (0..self.vertices.len()).map(|v| v != first_out && (v < first_out || kept(v))).collect();
        *self = self.cut(h, existing, keep);
        true
    }

    fn cut(&self, h: &HalfSpace, existing: Option<u32>, keep: Vec<bool>) -> ConvexCell {
        let n_in = keep.iter().filter(|&&k| k).count();
        if n_in == 0 {
            return ConvexCell::empty(self.site, self.tet);
        }

        let mut planes = self.planes.clone();
        let h_idx = existing.unwrap_or_else(|| {
            planes.push(*h);
            (planes.len() - 1) as u32
        });

        // Directed edge -> face lookup, to find the second plane of a cut edge.
        let mut edges: Vec<(u32, u32, u32)> = Vec::with_capacity(self.faces.len() * 6);
        for (fi, face) in self.faces.iter().enumerate() {
            let c = &face.cycle;
            for k in 0..c.len() {
                edges.push((c[k], c[(k + 1) % c.len()], fi as u32));
            }
        }
        edges.sort_unstable();
        let face_of = |u: u32, w: u32| -> Option<u32> {
            edges
                .binary_search_by(|e| (e.0, e.1).cmp(&(u, w)))
                .ok()
                .map(|i| edges[i].2)
        };

        // Old kept vertices keep their relative order; new ones are appended.
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::with_capacity(n_in + 8);
        let mut supports = Vec::with_capacity(n_in + 8);
        for (i, &k) in keep.iter().enumerate() {
            if k {
                remap[i] = vertices.len() as u32;
                vertices.push(self.vertices[i]);
                supports.push(self.supports[i]);
            }
        }
        let mut cut_cache: Vec<((u32, u32), u32)> = Vec::new();
        let mut cut_vertex = |u: u32, w: u32, face_plane: u32, vertices: &mut Vec<Point3>, supports: &mut Vec<[u32; 3]>| -> u32 {
            let key = (u.min(w), u.max(w));
            if let Some(&(_, v)) = cut_cache.iter().find(|(k, _)| *k == key) {
                return v;
            }
            let other_plane = face_of(w, u).map(|f| self.faces[f as usize].plane);
            let (pu, pw) = (self.vertices[u as usize], self.vertices[w as usize]);
            let (pos, support) = match other_plane {
                Some(op) if op != face_plane && op != h_idx && face_plane != h_idx => {
                    let mut s = [face_plane, op, h_idx];
                    s.sort_by_key(|&p| planes[p as usize].provenance);
                    let pos = intersect3(&planes[s[0] as usize], &planes[s[1] as usize], &planes[s[2] as usize])
                        .filter(|p| near_segment(*p, pu, pw))
                        .unwrap_or_else(|| interpolate(h, pu, pw));
                    (pos, s)
                }
                _ => (interpolate(h, pu, pw), [face_plane, face_plane, h_idx]),
            };
            let idx = vertices.len() as u32;
            vertices.push(pos);
            supports.push(support);
            cut_cache.push((key, idx));
            idx
        };

        let mut faces = Vec::with_capacity(self.faces.len() + 1);
        // cap_next[entry] = exit: the cap walks each cut edge backwards.
        let mut cap_links: Vec<(u32, u32)> = Vec::new();
        for face in &self.faces {
            let c = &face.cycle;
            let mut cycle = Vec::with_capacity(c.len() + 2);
            let mut exit = None;
            let mut entry = None;
            for k in 0..c.len() {
                let u = c[k];
                let w = c[(k + 1) % c.len()];
                let (ku, kw) = (keep[u as usize], keep[w as usize]);
                if ku {
                    cycle.push(remap[u as usize]);
                }
                if ku != kw {
                    let v = cut_vertex(u, w, face.plane, &mut vertices, &mut supports);
                    cycle.push(v);
                    if ku {
                        exit = Some(v);
                    } else {
                        entry = Some(v);
                    }
                }
            }
            if let (Some(x), Some(e)) = (exit, entry) {
                cap_links.push((e, x));
            }
            if distinct_positions(&cycle, &vertices) >= 3 {
                faces.push(Face { plane: face.plane, cycle });
            }
        }

        if let Some(cap) = build_cap(&cap_links, &vertices, h) {
            if distinct_positions(&cap, &vertices) >= 3 {
                faces.push(Face { plane: h_idx, cycle: cap });
            }
        }
        if faces.is_empty() {
            return ConvexCell::empty(self.site, self.tet);
        }
        ConvexCell { vertices, supports, planes, faces, site: self.site, tet: self.tet }
    }

    /// Checks the boundary representation: faces planar within `1e-9 x` bbox
    /// diagonal, vertices inside every face plane, Euler characteristic 2.
    pub fn validate(&self) -> Result<(), String> {
        if self.is_empty() {
            return Ok(());
        }
        let bb = super::point::Aabb::from_points(&self.vertices).unwrap();
        let tol = 1e-9 * bb.diagonal().max(f64::MIN_POSITIVE);
        for face in &self.faces {
            let h = self.plane(face);
            let n = h.normal.norm();
            for &v in &face.cycle {
                let d = h.eval(self.vertices[v as usize]) / n;
                if d.abs() > tol {
                    return Err(format!("face {:?} not planar: {d}", h.provenance));
                }
            }
            for (i, &p) in self.vertices.iter().enumerate() {
                if h.eval(p) / n > tol {
                    return Err(format!("vertex {i} outside plane {:?}", h.provenance));
                }
            }
        }
        let mut used = vec![false; self.vertices.len()];
        let mut half_edges = 0;
        for face in &self.faces {
            half_edges += face.cycle.len();
            for &v in &face.cycle {
                used[v as usize] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        let e = (half_edges / 2) as i64;
        let f = self.faces.len() as i64;
        if v - e + f != 2 {
            return Err(format!("Euler characteristic {} (V={v}, E={e}, F={f})", v - e + f));
        }
        Ok(())
    }
}

fn distinct_positions(cycle: &[u32], vertices: &[Point3]) -> usize {
    let mut seen: Vec<Point3> = Vec::with_capacity(cycle.len());
    for &v in cycle {
        let p = vertices[v as usize];
        if !seen.contains(&p) {
            seen.push(p);
        }
    }
    seen.len()
}

fn build_cap(links: &[(u32, u32)], vertices: &[Point3], h: &HalfSpace) -> Option<Vec<u32>> {
    if links.len() < 3 {
        return None;
    }
    let mut cycle = Vec::with_capacity(links.len());
    let start = links[0].0;
    let mut cur = start;
    loop {
        cycle.push(cur);
        match links.iter().find(|l| l.0 == cur) {
            Some(&(_, next)) if next == start => break,
            Some(&(_, next)) if cycle.len() <= links.len() => cur = next,
            _ => return Some(sort_cap_by_angle(links, vertices, h)),
        }
    }
    if cycle.len() != links.len() {
        return Some(sort_cap_by_angle(links, vertices, h));
    }
    Some(cycle)
}

/// Fallback for inconsistent cut topologies: order the cap vertices by angle
/// around their centroid, counter-clockwise about the outward normal.
fn sort_cap_by_angle(links: &[(u32, u32)], vertices: &[Point3], h: &HalfSpace) -> Vec<u32> {
    let mut ids: Vec<u32> = links.iter().flat_map(|l| [l.0, l.1]).collect();
    ids.sort_unstable();
    ids.dedup();
    let c = ids.iter().fold(Point3::ZERO, |a, &v| a + vertices[v as usize]) / ids.len() as f64;
    let n = h.normal;
    let helper = if n.x.abs() < 0.9 * n.norm() { Point3::new(1., 0., 0.) } else { Point3::new(0., 1., 0.) };
    let u = n.cross(helper);
    let w = n.cross(u);
    let mut keyed: Vec<(f64, u32)> = ids
        .iter()
        .map(|&v| {
            let d = vertices[v as usize] - c;
            (d.dot(w).atan2(d.dot(u)), v)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, v)| v).collect()
}

/// Intersection point of three planes, if they are not close to degenerate.
pub fn intersect3(a: &HalfSpace, b: &HalfSpace, c: &HalfSpace) -> Option<Point3> {
    let bc = b.normal.cross(c.normal);
    let det = a.normal.dot(bc);
    let scale = a.normal.norm() * b.normal.norm() * c.normal.norm();
    if !(det.abs() > 1e-12 * scale) {
        return None;
    }
    let p = (bc * a.offset + c.normal.cross(a.normal) * b.offset + a.normal.cross(b.normal) * c.offset) / det;
    p.is_finite().then_some(p)
}

fn near_segment(p: Point3, a: Point3, b: Point3) -> bool {
    let slack = 1e-6 * (b - a).norm() + 1e-12 * (a.norm() + b.norm()).max(f64::MIN_POSITIVE);
    let lo = a.min(b);
    let hi = a.max(b);
    p.x >= lo.x - slack && p.y >= lo.y - slack && p.z >= lo.z - slack && p.x <= hi.x + slack && p.y <= hi.y + slack && p.z <= hi.z + slack
}

fn interpolate(h: &HalfSpace, a: Point3, b: Point3) -> Point3 {
    let fa = h.eval(a);
    let fb = h.eval(b);
    let t = if fa == fb { 0.5 } else { (fa / (fa - fb)).clamp(0.0, 1.0) };
    a.lerp(b, t)
}
