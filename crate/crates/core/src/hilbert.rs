//! 3D Hilbert-curve keys and spatial sorting.

use crate::geom::{Aabb, Point3};

/// Bits of quantization per axis.
pub const HILBERT_BITS: u32 = 21;

/// Hilbert index of integer coordinates `coords` (each `< 2^bits`), using
/// Skilling's transpose formulation.
pub fn hilbert_index(coords: [u32; 3], bits: u32) -> u64 {
    debug_assert!((1..=21).contains(&bits));
    let mut x = coords;
    let m = 1u32 << (bits - 1);
    // inverse undo
    let mut q = m;
    while q > 1 {
        let p = q - 1;
        for i in 0..3 {
            if x[i] & q != 0 {
                x[0] ^= p;
            } else {
                let t = (x[0] ^ x[i]) & p;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
        q >>= 1;
    }
    // Gray encode
    for i in 1..3 {
        x[i] ^= x[i - 1];
    }
    let mut t = 0;
    let mut q = m;
    while q > 1 {
        if x[2] & q != 0 {
            t ^= q - 1;
        }
        q >>= 1;
    }
    for v in &mut x {
        *v ^= t;
    }
    let mut key = 0u64;
    for b in (0..bits).rev() {
        for v in &x {
            key = (key << 1) | u64::from((v >> b) & 1);
        }
    }
    key
}

/// Quantizes `p` to the `2^HILBERT_BITS` grid spanning `bbox` and returns its key.
pub fn hilbert_key(p: Point3, bbox: &Aabb) -> u64 {
    let cells = (1u64 << HILBERT_BITS) as f64;
    let q = |v: f64, lo: f64, hi: f64| -> u32 {
        let ext = hi - lo;
        if ext <= 0.0 {
            return 0;
        }
        (((v - lo) / ext * cells).floor()).clamp(0.0, cells - 1.0) as u32
    };
    hilbert_index(
        [q(p.x, bbox.min.x, bbox.max.x), q(p.y, bbox.min.y, bbox.max.y), q(p.z, bbox.min.z, bbox.max.z)],
        HILBERT_BITS,
    )
}

/// Sorts `indices` along the Hilbert curve of the bounding box of the points
/// they reference. Ties keep their relative order.
pub fn hilbert_sort(points: &[Point3], indices: &mut [usize]) {
    let Some(bbox) = Aabb::from_points(indices.iter().map(|&i| &points[i])) else {
        return;
    };
    let mut keyed: Vec<(u64, usize)> = indices.iter().map(|&i| (hilbert_key(points[i], &bbox), i)).collect();
    keyed.sort_by_key(|&(k, _)| k);
    for (slot, (_, i)) in indices.iter_mut().zip(keyed) {
        *slot = i;
    }
}
