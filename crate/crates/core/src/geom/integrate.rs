//! Exact integration of `rho`, `rho x` and `rho |x - y|^2` over convex cells,
//! for an affine density `rho`.

use std::ops::{Add, AddAssign};

use super::cell::ConvexCell;
use super::point::{tet_signed_volume, Point3};

/// Affine scalar field `value + gradient . (x - base)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearField {
    pub base: Point3,
    pub value: f64,
    pub gradient: Point3,
}

impl LinearField {
    pub fn constant(value: f64) -> Self {
        LinearField { base: Point3::ZERO, value, gradient: Point3::ZERO }
    }

    /// The affine interpolant of `values` at the corners of a non-degenerate tetrahedron.
    pub fn from_tet(corners: [Point3; 4], values: [f64; 4]) -> Self {
        let [a, b, c, d] = corners;
        let (e1, e2, e3) = (b - a, c - a, d - a);
        let det = e1.dot(e2.cross(e3));
        let (r1, r2, r3) = (values[1] - values[0], values[2] - values[0], values[3] - values[0]);
        let gradient = (e2.cross(e3) * r1 + e3.cross(e1) * r2 + e1.cross(e2) * r3) / det;
        LinearField { base: a, value: values[0], gradient }
    }

    #[inline]
    pub fn eval(&self, p: Point3) -> f64 {
        self.value + self.gradient.dot(p - self.base)
    }
}

/// Zeroth, first and second moments of a density over a region.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MomentSet {
    /// `∫ rho`
    pub mass: f64,
    /// `∫ rho x`
    pub moment: Point3,
    /// `∫ rho |x - y|^2` for the reference point `y` used at integration time.
    pub cost: f64,
}

impl MomentSet {
    pub fn centroid(&self) -> Option<Point3> {
        (self.mass > 0.0).then(|| self.moment / self.mass)
    }
}

impl Add for MomentSet {
    type Output = MomentSet;
    fn add(self, o: MomentSet) -> MomentSet {
        MomentSet { mass: self.mass + o.mass, moment: self.moment + o.moment, cost: self.cost + o.cost }
    }
}

impl AddAssign for MomentSet {
    fn add_assign(&mut self, o: MomentSet) {
        *self = *self + o;
    }
}

/// Moments of a single tetrahedron, with `rho` linear, relative to `ref_point`.
///
/// With barycentric coordinates `l_k`, `∫ l_k l_l = V (1 + δ_kl) / 20` and
/// `∫ l_k l_l l_m = V (1 + δ_kl + δ_lm + δ_km + 2 δ_klm) / 120`, which gives the
/// closed forms below (`q_k = p_k - ref`, `S = Σ q_k`, `T = Σ rho_k q_k`).
pub fn tet_moments(corners: [Point3; 4], rho: [f64; 4], ref_point: Point3) -> MomentSet {
    let vol = tet_signed_volume(corners[0], corners[1], corners[2], corners[3]);
    let q = corners.map(|p| p - ref_point);
    let r_sum: f64 = rho.iter().sum();
    let s = q[0] + q[1] + q[2] + q[3];
    let mut t = Point3::ZERO;
    let mut q2_sum = 0.0;
    let mut rq2_sum = 0.0;
    for k in 0..4 {
        t += q[k] * rho[k];
        let n2 = q[k].norm2();
        q2_sum += n2;
        rq2_sum += rho[k] * n2;
    }
    let mass = vol * r_sum / 4.0;
    let rel_moment = (s * r_sum + t) * (vol / 20.0);
    let cost = vol / 120.0 * (r_sum * (s.norm2() + q2_sum) + 2.0 * t.dot(s) + 2.0 * rq2_sum);
    MomentSet { mass, moment: rel_moment + ref_point * mass, cost }
}

/// Integrates over `cell` through its fan decomposition from the barycenter.
pub fn integrate(cell: &ConvexCell, density: &LinearField, ref_point: Point3) -> MomentSet {
    let mut mass = 0.0;
    let mut rel_moment = Point3::ZERO;
    let mut cost = 0.0;
    cell.for_each_fan_tet(|a, b, c, d| {
        let corners = [a, b, c, d];
        let m = tet_moments(corners, corners.map(|p| density.eval(p)), ref_point);
        mass += m.mass;
        rel_moment += m.moment - ref_point * m.mass;
        cost += m.cost;
    });
    MomentSet { mass, moment: rel_moment + ref_point * mass, cost }
}
