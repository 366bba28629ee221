//! Prime dimensions and arithmetic in `Z_d`.

use core::fmt;

use crate::{Error, Result};

/// Largest single-system dimension accepted anywhere in the crate.
pub const MAX_DIMENSION: usize = 101;

/// Largest Hilbert-space dimension for tensor-product constructions.
pub const MAX_TENSOR_DIMENSION: usize = 4096;

pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut k = 2;
    while k * k <= n {
        if n.is_multiple_of(k) {
            return false;
        }
        k += 1;
    }
    true
}

/// A prime qudit dimension `2 ≤ d ≤ 101`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "usize", into = "usize"))]
pub struct Dimension(usize);

impl Dimension {
    pub fn new(d: usize) -> Result<Self> {
        if !is_prime(d) {
            return Err(Error::NotPrime(d));
        }
        if d > MAX_DIMENSION {
            return Err(Error::DimensionCap { dim: d, cap: MAX_DIMENSION });
        }
        Ok(Dimension(d))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }

    /// Canonical representative of `x` in `[0, d)`.
    #[inline]
    pub fn reduce(self, x: i64) -> usize {
        x.rem_euclid(self.0 as i64) as usize
    }

    #[inline]
    pub fn add(self, x: usize, y: usize) -> usize {
        (x + y) % self.0
    }

    #[inline]
    pub fn sub(self, x: usize, y: usize) -> usize {
        (x + self.0 - y % self.0) % self.0
    }

    #[inline]
    pub fn mul(self, x: usize, y: usize) -> usize {
        (x * y) % self.0
    }

    #[inline]
    pub fn neg(self, x: usize) -> usize {
        (self.0 - x % self.0) % self.0
    }

    /// Multiplicative inverse, `None` for zero.
    pub fn inv(self, x: usize) -> Option<usize> {
        let x = x % self.0;
        if x == 0 {
            return None;
        }
        // Fermat: x^(d-2) is the inverse in a prime field.
        let mut acc = 1;
        let mut base = x;
        let mut e = self.0 - 2;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        Some(acc)
    }

    /// Every element of `Z_d × Z_d` in row-major order `(q, p)`.
    pub fn indices(self) -> impl Iterator<Item = DisplacementIndex> {
        let d = self.0;
        (0..d * d).map(move |k| DisplacementIndex { q: k / d, p: k % d })
    }

    /// All indices except `(0, 0)`.
    pub fn nonzero_indices(self) -> impl Iterator<Item = DisplacementIndex> {
        self.indices().skip(1)
    }
}

impl TryFrom<usize> for Dimension {
    type Error = Error;
    fn try_from(d: usize) -> Result<Self> {
        Dimension::new(d)
    }
}

impl From<Dimension> for usize {
    fn from(d: Dimension) -> usize {
        d.0
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A phase-space point `(q, p) ∈ Z_d × Z_d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DisplacementIndex {
    pub q: usize,
    pub p: usize,
}

impl DisplacementIndex {
    pub const ZERO: DisplacementIndex = DisplacementIndex { q: 0, p: 0 };

    /// Reduces arbitrary integers into `[0, d)`.
    pub fn new(d: Dimension, q: i64, p: i64) -> Self {
        DisplacementIndex { q: d.reduce(q), p: d.reduce(p) }
    }

    pub fn is_zero(self) -> bool {
        self.q == 0 && self.p == 0
    }

    pub fn neg(self, d: Dimension) -> Self {
        DisplacementIndex { q: d.neg(self.q), p: d.neg(self.p) }
    }

    pub fn scale(self, d: Dimension, k: usize) -> Self {
        DisplacementIndex { q: d.mul(k % d.get(), self.q), p: d.mul(k % d.get(), self.p) }
    }

    pub fn add(self, d: Dimension, other: Self) -> Self {
        DisplacementIndex { q: d.add(self.q, other.q), p: d.add(self.p, other.p) }
    }

    /// Position in the row-major enumeration of `Z_d × Z_d`.
    #[inline]
    pub fn flat(self, d: Dimension) -> usize {
        self.q * d.get() + self.p
    }

    #[inline]
    pub fn from_flat(d: Dimension, k: usize) -> Self {
        DisplacementIndex { q: k / d.get(), p: k % d.get() }
    }

    /// Symplectic form `q p' − q' p` in `Z_d`.
    pub fn symplectic_form(self, d: Dimension, other: Self) -> usize {
        d.sub(d.mul(self.q, other.p), d.mul(other.q, self.p))
    }
}

impl fmt::Display for DisplacementIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.q, self.p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primality_and_caps() {
        let primes: alloc::vec::Vec<usize> = (0..40).filter(|&n| is_prime(n)).collect();
        assert_eq!(primes, [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37]);
        assert_eq!(Dimension::new(4), Err(Error::NotPrime(4)));
        assert_eq!(Dimension::new(1), Err(Error::NotPrime(1)));
        assert!(Dimension::new(101).is_ok());
        assert_eq!(Dimension::new(103), Err(Error::DimensionCap { dim: 103, cap: 101 }));
    }

    #[test]
    fn inverses() {
        for d in [2, 3, 5, 7, 11, 13, 101] {
            let dim = Dimension::new(d).unwrap();
            assert_eq!(dim.inv(0), None);
            for x in 1..d {
                assert_eq!(dim.mul(x, dim.inv(x).unwrap()), 1);
            }
        }
    }

    #[test]
    fn negative_inputs_reduce() {
        let d = Dimension::new(5).unwrap();
        assert_eq!(DisplacementIndex::new(d, -1, -7), DisplacementIndex { q: 4, p: 3 });
        assert_eq!(DisplacementIndex::new(d, 12, 0).neg(d), DisplacementIndex { q: 3, p: 0 });
        assert_eq!(d.nonzero_indices().count(), 24);
    }
}
