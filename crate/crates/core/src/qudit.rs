//! Clock, shift and displacement operators.
//!
//! `D_{q,p}` has entries `⟨j+q|D_{q,p}|j⟩ = φ(q,p)·ω^{jp}` with `ω = e^{2πi/d}`.
//! For odd `d` the phase is `φ = e^{iπ q̃ p/d}` where `q̃ ∈ {q, q+d}` is the lift
//! making `q̃p` even, i.e. `φ = ω^{qp/2}` with `1/2` taken in `Z_d`. This keeps the
//! operator a function of `(q, p) mod d`, so `D† = D_{−q,−p}` and `D^k = D_{kq,kp}`
//! hold exactly on reduced indices. For `d = 2` the phase is `e^{iπqp/2}`, giving
//! the Pauli matrices `I, X, Z, Y`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::field::{Dimension, DisplacementIndex, MAX_TENSOR_DIMENSION};
use crate::matrix::ComplexMatrix;
use crate::{Error, Result};

/// `χ = (1 + i)/2`.
pub const CHI: Complex64 = Complex64::new(0.5, 0.5);

/// `e^{iπ n/d}`, reduced mod `2d` before converting to a float angle.
#[inline]
pub fn half_angle(n: i64, d: usize) -> Complex64 {
    let m = n.rem_euclid(2 * d as i64);
    Complex64::from_polar(1.0, PI * m as f64 / d as f64)
}

/// `ω^k = e^{2πik/d}`.
#[inline]
pub fn omega_pow(d: usize, k: i64) -> Complex64 {
    half_angle(2 * k.rem_euclid(d as i64), d)
}

/// `ω^0, …, ω^{d−1}`.
pub fn roots_of_unity(d: Dimension) -> Vec<Complex64> {
    (0..d.get() as i64).map(|k| omega_pow(d.get(), k)).collect()
}

/// The phase `φ(q,p)` of `D_{q,p}` on reduced indices.
pub fn displacement_phase(d: Dimension, idx: DisplacementIndex) -> Complex64 {
    let n = d.get();
    let (q, p) = (idx.q % n, idx.p % n);
    if n == 2 {
        return half_angle((q * p) as i64, 2);
    }
    let lift = if (q * p) % 2 == 0 { q } else { q + n };
    half_angle(((lift * p) % (2 * n)) as i64, n)
}

/// `(X, Z)` with `X|j⟩ = |j+1⟩` and `Z|j⟩ = ω^j|j⟩`.
pub fn clock_shift(d: Dimension) -> (ComplexMatrix, ComplexMatrix) {
    let n = d.get();
    let roots = roots_of_unity(d);
    let x = ComplexMatrix::from_fn(n, |i, j| if i == (j + 1) % n { 1.0.into() } else { 0.0.into() });
    let z = ComplexMatrix::diagonal(&roots);
    (x, z)
}

pub fn displacement(d: Dimension, idx: DisplacementIndex) -> ComplexMatrix {
    let n = d.get();
    let (q, p) = (idx.q % n, idx.p % n);
    let phase = displacement_phase(d, idx);
    let mut m = ComplexMatrix::zeros(n);
    for j in 0..n {
        m[((j + q) % n, j)] = phase * omega_pow(n, (j * p) as i64);
    }
    m
}

/// `e^{iπqp/d} X^q Z^p` evaluated on the given integers without reduction.
pub fn displacement_lifted(d: Dimension, q: i64, p: i64) -> ComplexMatrix {
    let n = d.get();
    let phase = half_angle((q as i128 * p as i128).rem_euclid(2 * n as i128) as i64, n);
    let shift = d.reduce(q);
    let mut m = ComplexMatrix::zeros(n);
    for j in 0..n {
        m[((j + shift) % n, j)] = phase * omega_pow(n, (j as i64) * p.rem_euclid(n as i64));
    }
    m
}

/// `E_{q,p} = χ D_{q,p} + χ* D_{−q,−p}`.
pub fn displacement_observable(d: Dimension, idx: DisplacementIndex) -> ComplexMatrix {
    let plus = displacement(d, idx).scale(CHI);
    let minus = displacement(d, idx.neg(d)).scale(CHI.conj());
    &plus + &minus
}

/// `χ D + χ* D` on lifted integers `(q, p)` and `(−q, −p)`.
pub fn displacement_observable_lifted(d: Dimension, q: i64, p: i64) -> ComplexMatrix {
    let plus = displacement_lifted(d, q, p).scale(CHI);
    let minus = displacement_lifted(d, -q, -p).scale(CHI.conj());
    &plus + &minus
}

/// `D_{q1,p1} ⊗ … ⊗ D_{qn,pn}`.
pub fn tensor_displacement(d: Dimension, qvec: &[i64], pvec: &[i64]) -> Result<ComplexMatrix> {
    if qvec.len() != pvec.len() {
        return Err(Error::DimensionMismatch { expected: qvec.len(), found: pvec.len() });
    }
    if qvec.is_empty() {
        return Err(Error::Empty("displacement vectors"));
    }
    let total = tensor_dimension(d, qvec.len())?;
    let mut out = ComplexMatrix::identity(1);
    for (&q, &p) in qvec.iter().zip(pvec) {
        out = out.kron(&displacement(d, DisplacementIndex::new(d, q, p)));
    }
    debug_assert_eq!(out.dim(), total);
    Ok(out)
}

/// `d^n`, or an error above the tensor cap.
pub fn tensor_dimension(d: Dimension, n: usize) -> Result<usize> {
    let mut total: usize = 1;
    for _ in 0..n {
        total = total.saturating_mul(d.get());
        if total > MAX_TENSOR_DIMENSION {
            return Err(Error::DimensionCap { dim: total, cap: MAX_TENSOR_DIMENSION });
        }
    }
    Ok(total)
}

/// `D_{q,p} |v⟩` without forming the matrix.
pub fn apply_displacement(d: Dimension, idx: DisplacementIndex, v: &[Complex64]) -> Vec<Complex64> {
    let n = d.get();
    assert_eq!(v.len(), n);
    let phase = displacement_phase(d, idx);
    let mut out = alloc::vec![Complex64::new(0.0, 0.0); n];
    for (j, &vj) in v.iter().enumerate() {
        out[(j + idx.q) % n] = phase * omega_pow(n, (j * idx.p) as i64) * vj;
    }
    out
}

/// `Tr(D_{q,p} A)` in `O(d)`.
pub fn displacement_trace(d: Dimension, idx: DisplacementIndex, a: &ComplexMatrix) -> Complex64 {
    let n = d.get();
    assert_eq!(a.dim(), n);
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..n {
        acc += omega_pow(n, (k * idx.p) as i64) * a[(k, (k + idx.q) % n)];
    }
    acc * displacement_phase(d, idx)
}

/// `c` with `D_u D_v = c · D_{u+v}`.
pub fn product_phase(d: Dimension, u: DisplacementIndex, v: DisplacementIndex) -> Complex64 {
    let n = d.get();
    displacement_phase(d, u) * displacement_phase(d, v) * omega_pow(n, (u.p * v.q) as i64)
        / displacement_phase(d, u.add(d, v))
}

/// Quantum Fourier transform `W|b⟩ = (1/√d) Σ_j ω^{−bj}|j⟩`.
pub fn fourier(d: Dimension) -> ComplexMatrix {
    let n = d.get();
    let s = 1.0 / libm::sqrt(n as f64);
    ComplexMatrix::from_fn(n, |j, b| omega_pow(n, -((b * j) as i64)) * s)
}
