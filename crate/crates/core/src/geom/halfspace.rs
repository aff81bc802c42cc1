use super::point::Point3;
use super::predicates::WeightedSite;

/// Where a bounding plane of a cell came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Provenance {
    /// Facet `facet` (opposite local vertex `facet`) of mesh tetrahedron `tet`.
    MeshFacet { tet: usize, facet: u8 },
    /// Bisector shared with site `site`.
    Bisector { site: usize },
}

impl Provenance {
    pub fn bisector_site(&self) -> Option<usize> {
        match *self {
            Provenance::Bisector { site } => Some(site),
            Provenance::MeshFacet { .. } => None,
        }
    }
}

/// The closed half-space `{x : normal . x <= offset}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSpace {
    pub normal: Point3,
    pub offset: f64,
    pub provenance: Provenance,
}

impl HalfSpace {
    pub fn new(normal: Point3, offset: f64, provenance: Provenance) -> Self {
        HalfSpace { normal, offset, provenance }
    }

    /// Plane through three points, oriented so that the normal is `(b-a) x (c-a)`.
    pub fn through(a: Point3, b: Point3, c: Point3, provenance: Provenance) -> Self {
        let normal = (b - a).cross(c - a);
        HalfSpace { normal, offset: normal.dot(a), provenance }
    }

    #[inline]
    pub fn eval(&self, p: Point3) -> f64 {
        self.normal.dot(p) - self.offset
    }

    #[inline]
    pub fn contains(&self, p: Point3) -> bool {
        self.eval(p) <= 0.0
    }

    /// The complementary half-space, sharing the boundary plane.
    pub fn flipped(&self) -> Self {
        HalfSpace { normal: -self.normal, offset: -self.offset, provenance: self.provenance }
    }
}

/// Half-space holding the power cell of `si` against `sj`:
/// `2 (p_j - p_i) . x <= |p_j|^2 - |p_i|^2 - w_j + w_i`.
///
/// Coincident sites give a zero normal; the offset then encodes which site
/// owns all of space (larger weight, or smaller index on equal weights).
pub fn bisector(si: &WeightedSite, sj: &WeightedSite) -> HalfSpace {
    let provenance = Provenance::Bisector { site: sj.index };
    if si.point == sj.point {
        let wins = si.weight > sj.weight || (si.weight == sj.weight && si.index < sj.index);
        return HalfSpace::new(Point3::ZERO, if wins { 1.0 } else { -1.0 }, provenance);
    }
    let normal = (sj.point - si.point) * 2.0;
    let offset = (sj.point.norm2() - si.point.norm2()) - (sj.weight - si.weight);
    HalfSpace::new(normal, offset, provenance)
}
