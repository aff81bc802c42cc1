//! Floating-point expansion arithmetic.
//!
//! A value is stored as a sum of non-overlapping doubles sorted by increasing
//! magnitude, so sums, differences and products of doubles are represented
//! without rounding error. Only the operations needed by the predicates are
//! provided; the sign of the result is read off the most significant term.

use std::ops::{Add, Mul, Neg, Sub};

#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bv = s - a;
    let av = s - bv;
    (s, (a - av) + (b - bv))
}

#[inline]
pub fn two_diff(a: f64, b: f64) -> (f64, f64) {
    two_sum(a, -b)
}

#[inline]
pub fn two_product(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expansion(Vec<f64>);

impl Expansion {
    pub fn zero() -> Self {
        Expansion(Vec::new())
    }

    pub fn from_f64(a: f64) -> Self {
        if a == 0.0 {
            Expansion::zero()
        } else {
            Expansion(vec![a])
        }
    }

    pub fn from_diff(a: f64, b: f64) -> Self {
        let (s, e) = two_diff(a, b);
        Expansion::from_pair(s, e)
    }

    pub fn from_product(a: f64, b: f64) -> Self {
        let (p, e) = two_product(a, b);
        Expansion::from_pair(p, e)
    }

    fn from_pair(hi: f64, lo: f64) -> Self {
        let mut v = Vec::with_capacity(2);
        if lo != 0.0 {
            v.push(lo);
        }
        if hi != 0.0 {
            v.push(hi);
        }
        Expansion(v)
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    /// Approximate value (sum of components).
    pub fn estimate(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn sign(&self) -> i32 {
        match self.0.last() {
            Some(&v) if v > 0.0 => 1,
            Some(&v) if v < 0.0 => -1,
            _ => 0,
        }
    }

    /// Adds a single double (Shewchuk's GROW-EXPANSION with zero elimination).
    fn grow(&self, b: f64) -> Expansion {
        let mut q = b;
        let mut out = Vec::with_capacity(self.0.len() + 1);
        for &e in &self.0 {
            let (s, h) = two_sum(q, e);
            if h != 0.0 {
                out.push(h);
            }
            q = s;
        }
        if q != 0.0 {
            out.push(q);
        }
        Expansion(out)
    }

    /// Multiplies by a single double (SCALE-EXPANSION with zero elimination).
    fn scale(&self, b: f64) -> Expansion {
        if self.0.is_empty() || b == 0.0 {
            return Expansion::zero();
        }
        let mut out = Vec::with_capacity(2 * self.0.len());
        let (mut q, h) = two_product(self.0[0], b);
        if h != 0.0 {
            out.push(h);
        }
        for &e in &self.0[1..] {
            let (t_hi, t_lo) = two_product(e, b);
            let (s, h) = two_sum(q, t_lo);
            if h != 0.0 {
                out.push(h);
            }
            let (s2, h2) = two_sum(t_hi, s);
            if h2 != 0.0 {
                out.push(h2);
            }
            q = s2;
        }
        if q != 0.0 {
            out.push(q);
        }
        Expansion(out)
    }

    fn add_ref(&self, o: &Expansion) -> Expansion {
        let (base, other) = if self.0.len() >= o.0.len() { (self, o) } else { (o, self) };
        let mut acc = base.clone();
        for &c in &other.0 {
            acc = acc.grow(c);
        }
        acc
    }

    fn mul_ref(&self, o: &Expansion) -> Expansion {
        let mut acc = Expansion::zero();
        for &c in &o.0 {
            acc = acc.add_ref(&self.scale(c));
        }
        acc
    }

    pub fn square(&self) -> Expansion {
        self.mul_ref(self)
    }
}

impl Neg for Expansion {
    type Output = Expansion;
    fn neg(self) -> Expansion {
        Expansion(self.0.into_iter().map(|c| -c).collect())
    }
}

impl Neg for &Expansion {
    type Output = Expansion;
    fn neg(self) -> Expansion {
        Expansion(self.0.iter().map(|c| -c).collect())
    }
}

impl Add<&Expansion> for &Expansion {
    type Output = Expansion;
    fn add(self, o: &Expansion) -> Expansion {
        self.add_ref(o)
    }
}

impl Sub<&Expansion> for &Expansion {
    type Output = Expansion;
    fn sub(self, o: &Expansion) -> Expansion {
        self.add_ref(&-o)
    }
}

impl Mul<&Expansion> for &Expansion {
    type Output = Expansion;
    fn mul(self, o: &Expansion) -> Expansion {
        self.mul_ref(o)
    }
}

/// Exact determinant of a square matrix of expansions (n <= 5), by cofactor expansion.
pub fn determinant(m: &[Vec<Expansion>]) -> Expansion {
    let n = m.len();
    match n {
        0 => Expansion::from_f64(1.0),
        1 => m[0][0].clone(),
        2 => &(&m[0][0] * &m[1][1]) - &(&m[0][1] * &m[1][0]),
        _ => {
            let mut acc = Expansion::zero();
            for col in 0..n {
                if m[0][col].sign() == 0 {
                    continue;
                }
                let minor: Vec<Vec<Expansion>> = m[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|(c, _)| *c != col)
                            .map(|(_, e)| e.clone())
                            .collect()
                    })
                    .collect();
                let term = &m[0][col] * &determinant(&minor);
                acc = if col % 2 == 0 { &acc + &term } else { &acc - &term };
            }
            acc
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cancellation_is_exact() {
        let big = Expansion::from_f64(1e20);
        let tiny = Expansion::from_f64(1.0);
        let s = &(&big + &tiny) - &big;
        assert_eq!(s.sign(), 1);
        assert_eq!(s.estimate(), 1.0);
    }

    #[test]
    fn product_of_sums_matches_integer_arithmetic() {
        // (2^53 + 1) is not representable; build it as an expansion.
        let a = &Expansion::from_f64(9007199254740992.0) + &Expansion::from_f64(1.0);
        let sq = a.square();
        // (2^53+1)^2 - 2^106 - 2^54 = 1
        let rest = &(&sq - &Expansion::from_product(9007199254740992.0, 9007199254740992.0))
            - &Expansion::from_f64(18014398509481984.0);
        assert_eq!(rest.estimate(), 1.0);
    }

    #[test]
    fn determinant_of_singular_matrix_is_zero() {
        let rows = [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]];
        let m: Vec<Vec<Expansion>> = rows
            .iter()
            .map(|r| r.iter().map(|&v| Expansion::from_f64(v)).collect())
            .collect();
        assert_eq!(determinant(&m).sign(), 0);
        let rows = [[0.1, 0.2, 0.3], [0.4, 0.5, 0.6], [0.7, 0.8, 0.91]];
        let m: Vec<Vec<Expansion>> = rows
            .iter()
            .map(|r| r.iter().map(|&v| Expansion::from_f64(v)).collect())
            .collect();
        assert!(determinant(&m).sign() != 0);
    }
}
