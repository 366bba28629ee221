use alloc::vec::Vec;
use core::fmt;

use rand::RngCore;

use crate::field::{Dimension, DisplacementIndex};
use crate::rng::{substream, uniform_below};
use crate::{Error, Result};

/// `[[a, b], [c, e]]` over `Z_d` with `ae − bc = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SymplecticMat2 {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub e: usize,
}

impl SymplecticMat2 {
    pub const IDENTITY: SymplecticMat2 = SymplecticMat2 { a: 1, b: 0, c: 0, e: 1 };

    pub fn new(d: Dimension, a: i64, b: i64, c: i64, e: i64) -> Result<Self> {
        let m = SymplecticMat2 { a: d.reduce(a), b: d.reduce(b), c: d.reduce(c), e: d.reduce(e) };
        if m.det(d) != 1 {
            return Err(Error::InvalidParameter(alloc::format!("{m} has determinant {} mod {d}", m.det(d))));
        }
        Ok(m)
    }

    pub fn det(&self, d: Dimension) -> usize {
        d.sub(d.mul(self.a, self.e), d.mul(self.b, self.c))
    }

    /// `C (q, p)ᵀ`.
    pub fn apply(&self, d: Dimension, v: DisplacementIndex) -> DisplacementIndex {
        DisplacementIndex {
            q: d.add(d.mul(self.a, v.q), d.mul(self.b, v.p)),
            p: d.add(d.mul(self.c, v.q), d.mul(self.e, v.p)),
        }
    }

    /// Matrix product `self · rhs`.
    pub fn compose(&self, d: Dimension, rhs: &Self) -> Self {
        SymplecticMat2 {
            a: d.add(d.mul(self.a, rhs.a), d.mul(self.b, rhs.c)),
            b: d.add(d.mul(self.a, rhs.b), d.mul(self.b, rhs.e)),
            c: d.add(d.mul(self.c, rhs.a), d.mul(self.e, rhs.c)),
            e: d.add(d.mul(self.c, rhs.b), d.mul(self.e, rhs.e)),
        }
    }

    pub fn inverse(&self, d: Dimension) -> Self {
        SymplecticMat2 { a: self.e, b: d.neg(self.b), c: d.neg(self.c), e: self.a }
    }

    /// Position in `Z_d^4` read as base-`d` digits `(a, b, c, e)`.
    pub fn key(&self, d: Dimension) -> usize {
        let n = d.get();
        ((self.a * n + self.b) * n + self.c) * n + self.e
    }
}

impl fmt::Display for SymplecticMat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{},{}],[{},{}]]", self.a, self.b, self.c, self.e)
    }
}

/// `|SL(2, Z_d)| = d(d² − 1)`.
pub fn symplectic_group_order(d: Dimension) -> usize {
    let n = d.get();
    n * (n * n - 1)
}

/// Every element of `SL(2, Z_d)` in increasing [`SymplecticMat2::key`] order.
pub fn enumerate_symplectic(d: Dimension) -> Vec<SymplecticMat2> {
    let n = d.get();
    let mut out = Vec::with_capacity(symplectic_group_order(d));
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for e in 0..n {
                    let m = SymplecticMat2 { a, b, c, e };
                    if m.det(d) == 1 {
                        out.push(m);
                    }
                }
            }
        }
    }
    out
}

/// Uniform element of `SL(2, Z_d)`.
pub fn sample_symplectic(d: Dimension, seed: u64) -> SymplecticMat2 {
    sample_symplectic_with(d, &mut substream(seed, 0))
}

/// Draws the first column uniformly from nonzero vectors, then one of the `d`
/// second columns completing it to determinant one.
pub fn sample_symplectic_with<R: RngCore + ?Sized>(d: Dimension, rng: &mut R) -> SymplecticMat2 {
    let n = d.get();
    let k = 1 + uniform_below(rng, n * n - 1);
    let (a, c) = (k / n, k % n);
    if a != 0 {
        let b = uniform_below(rng, n);
        let e = d.mul(d.add(1, d.mul(b, c)), d.inv(a).expect("a is nonzero"));
        SymplecticMat2 { a, b, c, e }
    } else {
        let b = d.neg(d.inv(c).expect("first column is nonzero"));
        let e = uniform_below(rng, n);
        SymplecticMat2 { a, b, c, e }
    }
}
