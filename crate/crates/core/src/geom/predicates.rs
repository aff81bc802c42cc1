//! Power-distance predicates.

use super::expansion::Expansion;
use super::point::Point3;

/// How predicate signs are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PredicateMode {
    /// Plain floating point.
    Fast,
    /// Floating-point filter with exact expansion fallback.
    #[default]
    Exact,
}

impl std::str::FromStr for PredicateMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fast" => Ok(PredicateMode::Fast),
            "exact" => Ok(PredicateMode::Exact),
            other => Err(format!("unknown predicate mode `{other}` (expected fast|exact)")),
        }
    }
}

/// A site together with its weight and index, as seen by the predicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedSite {
    pub point: Point3,
    pub weight: f64,
    pub index: usize,
}

impl WeightedSite {
    pub fn new(point: Point3, weight: f64, index: usize) -> Self {
        WeightedSite { point, weight, index }
    }

    #[inline]
    pub fn power(&self, x: Point3) -> f64 {
        x.dist2(self.point) - self.weight
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    I,
    J,
}

const FILTER_FACTOR: f64 = 16.0 * f64::EPSILON;

/// Sign of `pow_i(x) - pow_j(x)` where `pow(x) = |x - p|^2 - w`.
///
/// In exact mode the sign is certified; in fast mode it is whatever the
/// floating-point evaluation gives.
pub fn power_difference_sign(x: Point3, si: &WeightedSite, sj: &WeightedSite, mode: PredicateMode) -> i32 {
    let a = x - si.point;
    let b = x - sj.point;
    let sa = a.norm2();
    let sb = b.norm2();
    let f = (sa - si.weight) - (sb - sj.weight);
    match mode {
        PredicateMode::Fast => sign_of(f),
        PredicateMode::Exact => {
            let bound = FILTER_FACTOR * (sa + sb + si.weight.abs() + sj.weight.abs());
            if f > bound {
                1
            } else if f < -bound {
                -1
            } else {
                exact_power_difference(x, si, sj).sign()
            }
        }
    }
}

fn sign_of(f: f64) -> i32 {
    if f > 0.0 {
        1
    } else if f < 0.0 {
        -1
    } else {
        0
    }
}

pub(crate) fn exact_power_difference(x: Point3, si: &WeightedSite, sj: &WeightedSite) -> Expansion {
    let mut acc = &Expansion::from_f64(sj.weight) - &Expansion::from_f64(si.weight);
    for axis in 0..3 {
        let di = Expansion::from_diff(x.coord(axis), si.point.coord(axis));
        let dj = Expansion::from_diff(x.coord(axis), sj.point.coord(axis));
        acc = &acc + &di.square();
        acc = &acc - &dj.square();
    }
    acc
}

/// Which of the two power cells `x` belongs to. Exact ties go to the smaller site index.
pub fn side_of_bisector(x: Point3, si: &WeightedSite, sj: &WeightedSite, mode: PredicateMode) -> Side {
    match power_difference_sign(x, si, sj, mode) {
        s if s < 0 => Side::I,
        s if s > 0 => Side::J,
        _ => {
            if si.index < sj.index {
                Side::I
            } else {
                Side::J
            }
        }
    }
}

/// Exact sign of `orient3d`-style determinant `det[b-a, c-a, d-a]`.
pub fn orient3d_exact(a: Point3, b: Point3, c: Point3, d: Point3) -> i32 {
    let rows: Vec<Vec<Expansion>> = [b, c, d]
        .iter()
        .map(|p| (0..3).map(|k| Expansion::from_diff(p.coord(k), a.coord(k))).collect())
        .collect();
    super::expansion::determinant(&rows).sign()
}

/// Sign of `det[y_p - y_e, h_p - h_e]` over the rows `p = a, b, c, d` for five
/// lifted points, with `e` the fifth. Multiplied by [`orient3d_exact`] of the
/// first four, it is positive when `e` lies above the hyperplane through the
/// other four lifted points and zero when all five share a hyperplane.
fn lifted_orient(points: [Point3; 5], heights: impl Fn(usize) -> (f64, Expansion)) -> i32 {
    let e = points[4];
    let mut approx = [[0.0; 4]; 4];
    let mut abs = [[0.0; 4]; 4];
    for r in 0..4 {
        for k in 0..3 {
            approx[r][k] = points[r].coord(k) - e.coord(k);
        }
        approx[r][3] = heights(r).0;
        for k in 0..4 {
            abs[r][k] = approx[r][k].abs();
        }
    }
    let det = det4(&approx, false);
    // generous bound on the rounding error of the entries and the expansion
    if det.abs() > 1e-10 * det4(&abs, true) {
        return sign_of(det);
    }
    let rows: Vec<Vec<Expansion>> = (0..4)
        .map(|r| {
            let mut row: Vec<Expansion> = (0..3).map(|k| Expansion::from_diff(points[r].coord(k), e.coord(k))).collect();
            row.push(heights(r).1);
            row
        })
        .collect();
    super::expansion::determinant(&rows).sign()
}

/// Determinant (or permanent when `permanent`) of a 4x4 matrix.
fn det4(m: &[[f64; 4]; 4], permanent: bool) -> f64 {
    let s = if permanent { 1.0 } else { -1.0 };
    let det3 = |r: [usize; 3], c: [usize; 3]| {
        let e = |i: usize, j: usize| m[r[i]][c[j]];
        e(0, 0) * (e(1, 1) * e(2, 2) + s * e(1, 2) * e(2, 1)) + s * e(0, 1) * (e(1, 0) * e(2, 2) + s * e(1, 2) * e(2, 0))
            + e(0, 2) * (e(1, 0) * e(2, 1) + s * e(1, 1) * e(2, 0))
    };
    let cols = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];
    (0..4).map(|c| (if c % 2 == 0 { 1.0 } else { s }) * m[0][c] * det3([1, 2, 3], cols[c])).sum()
}

/// Position of site `e` against the power sphere of `a, b, c, d`: positive
/// outside, zero on it, negative inside (when `orient3d_exact(a, b, c, d) > 0`,
/// the sign flips otherwise). Exact.
pub fn power_sphere_side(sites: [&WeightedSite; 5]) -> i32 {
    let e = sites[4];
    let points = sites.map(|s| s.point);
    lifted_orient(points, |r| {
        let s = sites[r];
        let d = s.point - e.point;
        let approx = d.norm2() - (s.weight - e.weight);
        let mut exact = Expansion::from_diff(e.weight, s.weight);
        for k in 0..3 {
            exact = &exact + &Expansion::from_diff(s.point.coord(k), e.point.coord(k)).square();
        }
        (approx, exact)
    })
}

/// [`power_sphere_side`] for points lifted to infinitesimal heights
/// `ε^rank`, ranks distinct. Only zero when all five points are coplanar.
pub fn perturbed_lifted_side(points: [Point3; 5], ranks: [usize; 5]) -> i32 {
    // the height column expands to Σ_r (-1)^r h_r orient(others), dominated by
    // the smallest rank with a non-zero minor
    let mut order = [0, 1, 2, 3, 4];
    order.sort_by_key(|&r| ranks[r]);
    for r in order {
        let others: Vec<Point3> = (0..5).filter(|&q| q != r).map(|q| points[q]).collect();
        let o = orient3d_exact(others[0], others[1], others[2], others[3]);
        if o != 0 {
            return if r % 2 == 0 { o } else { -o };
        }
    }
    0
}
