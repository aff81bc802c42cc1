//! Procedural meshes used by tests, benchmarks and the CLI fixtures.

use crate::geom::Point3;

use super::TetMesh;

/// The unit cube `[0,1]^3` split into 5 tetrahedra.
pub fn unit_cube() -> TetMesh {
    let vertices = (0..8)
        .map(|i| Point3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
        .collect();
    let tets = vec![[1, 2, 4, 7], [0, 1, 2, 4], [3, 1, 2, 7], [5, 1, 4, 7], [6, 2, 4, 7]];
    TetMesh::new(vertices, tets, None).expect("unit cube is valid")
}

/// `n^3` cubes of side `size / n` starting at `origin`, each cut into the 6
/// Kuhn tetrahedra around its main diagonal (a conforming subdivision).
pub fn cube_grid(n: usize, origin: Point3, size: f64) -> TetMesh {
    let (vertices, tets) = kuhn_grid(n, |i, j, k| {
        origin + Point3::new(i as f64, j as f64, k as f64) * (size / n as f64)
    });
    TetMesh::new(vertices, tets, None).expect("cube grid is valid")
}

/// A tessellated ball: the Kuhn grid of `[-1,1]^3` with `n` cells per axis,
/// pushed radially onto the ball of radius `radius` around `center`.
/// `n = 7` gives 2058 tetrahedra.
pub fn ball(n: usize, radius: f64, center: Point3) -> TetMesh {
    let (vertices, tets) = kuhn_grid(n, |i, j, k| {
        let s = |a: usize| 2.0 * a as f64 / n as f64 - 1.0;
        let p = Point3::new(s(i), s(j), s(k));
        let l2 = p.norm();
        let linf = p.x.abs().max(p.y.abs()).max(p.z.abs());
        let q = if l2 > 0.0 { p * (linf / l2) } else { p };
        center + q * radius
    });
    TetMesh::new(vertices, tets, None).expect("ball mesh is valid")
}

fn kuhn_grid(n: usize, place: impl Fn(usize, usize, usize) -> Point3) -> (Vec<Point3>, Vec<[usize; 4]>) {
    assert!(n >= 1);
    let m = n + 1;
    let id = |i: usize, j: usize, k: usize| i + m * (j + m * k);
    let mut vertices = Vec::with_capacity(m * m * m);
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                vertices.push(place(i, j, k));
            }
        }
    }
    const AXIS_ORDERS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut tets = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for order in AXIS_ORDERS {
                    let mut c = [i, j, k];
                    let mut tet = [id(c[0], c[1], c[2]); 4];
                    for (step, &axis) in order.iter().enumerate() {
                        c[axis] += 1;
                        tet[step + 1] = id(c[0], c[1], c[2]);
                    }
                    tets.push(tet);
                }
            }
        }
    }
    (vertices, tets)
}
