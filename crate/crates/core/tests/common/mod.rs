//! Random instances shared by the integration tests.
#![allow(dead_code)]

use ot3d::geom::Point3;
use ot3d::mesh::generators::{ball, cube_grid, unit_cube};
use ot3d::TetMesh;
use rand::Rng;

/// A mesh with 5 to 384 tets: a cube, a grid or a ball, under a random
/// orientation-preserving affine map and with an optional random density.
pub fn random_mesh(rng: &mut impl Rng) -> TetMesh {
    let base = match rng.gen_range(0..3) {
        0 => unit_cube(),
        1 => cube_grid(rng.gen_range(1..=4), Point3::ZERO, 1.0),
        _ => ball(rng.gen_range(1..=4), 0.5, Point3::new(0.5, 0.5, 0.5)),
    };
    let shear = |rng: &mut dyn rand::RngCore| Point3::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2));
    let (a, b, c) = (shear(rng), shear(rng), shear(rng));
    let offset = Point3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    let scale = rng.gen_range(0.5..3.0);
    let vertices: Vec<Point3> = base
        .vertices()
        .iter()
        .map(|p| {
            let q = *p + Point3::new(a.dot(*p), b.dot(*p), c.dot(*p));
            q * scale + offset
        })
        .collect();
    let density = rng.gen_bool(0.5).then(|| vertices.iter().map(|_| rng.gen_range(0.2..2.0)).collect());
    let tets = base.tets().iter().map(|t| t.map(|v| v as usize)).collect();
    TetMesh::new(vertices, tets, density).expect("affine image of a valid mesh")
}

/// `k` points in the mesh bounding box grown by 10% on each side.
pub fn random_points(mesh: &TetMesh, k: usize, rng: &mut impl Rng) -> Vec<Point3> {
    let b = mesh.bbox();
    let pad = (b.max - b.min) * 0.1;
    let (lo, hi) = (b.min - pad, b.max + pad);
    (0..k).map(|_| Point3::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y), rng.gen_range(lo.z..hi.z))).collect()
}

/// Weights of magnitude up to `fraction` of the squared bbox diagonal.
pub fn random_weights(mesh: &TetMesh, k: usize, fraction: f64, rng: &mut impl Rng) -> Vec<f64> {
    let d2 = mesh.bbox().diagonal().powi(2);
    (0..k).map(|_| rng.gen_range(-fraction..=fraction) * d2).collect()
}

/// `|a - b| <= rel * max(|a|, |b|, floor)`.
pub fn close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(floor)
}
