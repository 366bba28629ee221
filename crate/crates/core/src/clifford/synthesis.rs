//! Unitaries for symplectic matrices, in the convention `U† D_v U ∝ D_{Cv}`.
//!
//! A product `C = C₁ C₂` is realised by `U = U₂ U₁`. Generators:
//! `F = [[0,−1],[1,0]]` by the Fourier matrix `W`, the lower shear
//! `[[1,0],[c,1]]` by a quadratic phase, and `diag(a⁻¹, a)` by `|j⟩ ↦ |aj⟩`.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand::RngCore;

use super::symplectic::{enumerate_symplectic, sample_symplectic_with, SymplecticMat2};
use crate::field::{Dimension, DisplacementIndex};
use crate::matrix::ComplexMatrix;
use crate::qudit::{displacement, displacement_phase, fourier, half_angle, omega_pow};
use crate::rng::uniform_below;
use crate::{Error, Result};

/// Largest `d` for which [`CliffordCache`] precomputes every symplectic unitary.
pub const CACHE_MAX_DIMENSION: usize = 13;

/// One generalized Clifford up to global phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CliffordElement {
    pub symplectic: SymplecticMat2,
    pub pauli: DisplacementIndex,
    pub d: Dimension,
}

impl CliffordElement {
    pub fn new(d: Dimension, symplectic: SymplecticMat2, pauli: DisplacementIndex) -> Result<Self> {
        if symplectic.det(d) != 1 {
            return Err(Error::InvalidParameter(alloc::format!("{symplectic} is not symplectic mod {d}")));
        }
        Ok(CliffordElement { symplectic, pauli: DisplacementIndex::new(d, pauli.q as i64, pauli.p as i64), d })
    }

    pub fn identity(d: Dimension) -> Self {
        CliffordElement { symplectic: SymplecticMat2::IDENTITY, pauli: DisplacementIndex::ZERO, d }
    }
}

/// `diag(τ^{−c j²})`, the lower shear `[[1,0],[c,1]]`.
fn shear_unitary(d: Dimension, c: usize) -> ComplexMatrix {
    let n = d.get();
    let entries: Vec<Complex64> = if n == 2 {
        // Phase gate S^c.
        (0..2).map(|j| half_angle((c * j) as i64, 2)).collect()
    } else {
        // τ = ω^{1/2}, so τ^{−c j²} = ω^{−c j² / 2} with 1/2 taken mod d.
        let half = d.inv(2).expect("odd prime");
        (0..n).map(|j| omega_pow(n, -((d.mul(half, d.mul(c, d.mul(j, j)))) as i64))).collect()
    };
    ComplexMatrix::diagonal(&entries)
}

/// `|j⟩ ↦ |aj⟩`, realising `diag(a⁻¹, a)`.
fn multiplier_unitary(d: Dimension, a: usize) -> ComplexMatrix {
    let n = d.get();
    ComplexMatrix::from_fn(n, |i, j| if i == d.mul(a, j) { 1.0.into() } else { 0.0.into() })
}

fn decomposition_error(c: &SymplecticMat2) -> Error {
    Error::Decomposition { a: c.a, b: c.b, c: c.c, e: c.e }
}

/// Unitary realising a lower-triangular symplectic `[[a,0],[c,a⁻¹]] = L(c/a)·diag(a, a⁻¹)`.
fn lower_triangular(d: Dimension, m: &SymplecticMat2) -> Result<ComplexMatrix> {
    let a_inv = d.inv(m.a).ok_or_else(|| decomposition_error(m))?;
    let shear = shear_unitary(d, d.mul(m.c, a_inv));
    // diag(a, a⁻¹) is realised by the multiplier with factor a⁻¹.
    let scale = multiplier_unitary(d, a_inv);
    Ok(scale.matmul(&shear))
}

/// Unitary `V` with `V† D_v V ∝ D_{Cv}`, without the canonical phase fix.
fn symplectic_unitary(d: Dimension, m: &SymplecticMat2) -> Result<ComplexMatrix> {
    if m.b == 0 {
        return lower_triangular(d, m);
    }
    let w = fourier(d);
    if m.a != 0 {
        // C = (C · U(−b/a)) · U(b/a) with U(x) = [[1,x],[0,1]] = F⁻¹ L(−x) F.
        let x = d.mul(m.b, d.inv(m.a).ok_or_else(|| decomposition_error(m))?);
        let undo = SymplecticMat2 { a: 1, b: d.neg(x), c: 0, e: 1 };
        let lower = m.compose(d, &undo);
        if lower.b != 0 {
            return Err(decomposition_error(m));
        }
        let upper = w.matmul(&shear_unitary(d, d.neg(x))).matmul(&w.dagger());
        return Ok(upper.matmul(&lower_triangular(d, &lower)?));
    }
    // a = 0: C = (C · F) · F⁻¹, and C · F is lower triangular.
    let f = SymplecticMat2 { a: 0, b: d.neg(1), c: 1, e: 0 };
    let lower = m.compose(d, &f);
    if lower.b != 0 {
        return Err(decomposition_error(m));
    }
    Ok(w.dagger().matmul(&lower_triangular(d, &lower)?))
}

/// Multiplies by the phase making the first nonzero entry real and positive.
fn canonical_phase(mut u: ComplexMatrix) -> ComplexMatrix {
    if let Some(z) = u.as_slice().iter().find(|z| z.norm() > 1e-12).copied() {
        u = u.scale(z.conj() / z.norm());
    }
    u
}

/// `V · D_pauli` with `V` realising the symplectic part, phase-fixed.
fn attach_pauli(d: Dimension, v: &ComplexMatrix, pauli: DisplacementIndex) -> ComplexMatrix {
    let n = d.get();
    if pauli.is_zero() {
        return v.clone();
    }
    // (V D)_{i,j} = V_{i, j+q} φ ω^{jp}
    let phase = displacement_phase(d, pauli);
    let col_phase: Vec<Complex64> = (0..n).map(|j| phase * omega_pow(n, (j * pauli.p) as i64)).collect();
    canonical_phase(ComplexMatrix::from_fn(n, |i, j| v[(i, (j + pauli.q) % n)] * col_phase[j]))
}

pub fn synthesize_clifford(elem: &CliffordElement) -> Result<ComplexMatrix> {
    let v = canonical_phase(symplectic_unitary(elem.d, &elem.symplectic)?);
    Ok(attach_pauli(elem.d, &v, elem.pauli))
}

/// Every `(symplectic, Pauli offset)` pair for `d ∈ {2, 3, 5}`.
pub fn enumerate_cliffords(d: Dimension) -> Result<Vec<CliffordElement>> {
    if d.get() > 5 {
        return Err(Error::Unsupported(alloc::format!(
            "Clifford enumeration is limited to d ≤ 5, got {d}"
        )));
    }
    Ok(all_cliffords(d))
}

pub(crate) fn all_cliffords(d: Dimension) -> Vec<CliffordElement> {
    let mut out = Vec::new();
    for symplectic in enumerate_symplectic(d) {
        for pauli in d.indices() {
            out.push(CliffordElement { symplectic, pauli, d });
        }
    }
    out
}

/// Uniform Clifford: symplectic part and Pauli offset drawn independently.
pub fn sample_clifford_with<R: RngCore + ?Sized>(d: Dimension, rng: &mut R) -> CliffordElement {
    let symplectic = sample_symplectic_with(d, rng);
    let pauli = DisplacementIndex::from_flat(d, uniform_below(rng, d.get() * d.get()));
    CliffordElement { symplectic, pauli, d }
}

/// Immutable memo of synthesized symplectic unitaries.
///
/// Filled once at construction for `d ≤ 13`; larger `d` synthesize on demand.
#[derive(Clone, Debug)]
pub struct CliffordCache {
    d: Dimension,
    by_key: Vec<Option<CachedSymplectic>>,
}

#[derive(Clone, Debug)]
struct CachedSymplectic {
    unitary: ComplexMatrix,
    phases: Vec<Complex64>,
}

impl CachedSymplectic {
    fn build(d: Dimension, m: &SymplecticMat2) -> Result<Self> {
        let unitary = canonical_phase(symplectic_unitary(d, m)?);
        let phases = stabilizer_phases(d, m, &unitary);
        Ok(CachedSymplectic { unitary, phases })
    }
}

/// How a Clifford maps the computational-basis stabilizers.
///
/// `U† Z^t U = phases[t] · D_{t·generator}`, so `⟨b|U D_{tg} U†|b⟩ = conj(phases[t]) ω^{bt}`
/// and the snapshot `U†|b⟩` has nonzero displacement expectations only along `g`.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilizerFrame {
    pub generator: DisplacementIndex,
    pub phases: Vec<Complex64>,
}

impl StabilizerFrame {
    /// `⟨w|D_{t·g}|w⟩` for `w = U†|b⟩` and `t = 0..d`.
    pub fn snapshot_values(&self, outcome: usize) -> Vec<Complex64> {
        let n = self.phases.len();
        self.phases
            .iter()
            .enumerate()
            .map(|(t, c)| c.conj() * omega_pow(n, (outcome * t) as i64))
            .collect()
    }
}

/// Phases `c_t` with `V† Z^t V = c_t D_{C(0,t)}`, read off one column.
fn stabilizer_phases(d: Dimension, m: &SymplecticMat2, v: &ComplexMatrix) -> Vec<Complex64> {
    let n = d.get();
    let first: Vec<Complex64> = (0..n).map(|i| v[(i, 0)]).collect();
    let vd = v.dagger();
    (0..n)
        .map(|t| {
            let image = m.apply(d, DisplacementIndex { q: 0, p: t });
            let shifted: Vec<Complex64> =
                first.iter().enumerate().map(|(j, x)| x * omega_pow(n, (j * t) as i64)).collect();
            let row = vd.row(image.q);
            let x: Complex64 = row.iter().zip(&shifted).map(|(a, b)| a * b).sum();
            // D_g|0⟩ = φ_g |g_q⟩
            x / displacement_phase(d, image)
        })
        .collect()
}

impl CliffordCache {
    pub fn new(d: Dimension) -> Result<Self> {
        let n = d.get();
        let mut by_key = Vec::new();
        if n <= CACHE_MAX_DIMENSION {
            by_key = alloc::vec![None; n * n * n * n];
            for m in enumerate_symplectic(d) {
                by_key[m.key(d)] = Some(CachedSymplectic::build(d, &m)?);
            }
        }
        Ok(CliffordCache { d, by_key })
    }

    /// A cache that synthesizes every request on demand.
    pub fn empty(d: Dimension) -> Self {
        CliffordCache { d, by_key: Vec::new() }
    }

    pub fn dimension(&self) -> Dimension {
        self.d
    }

    fn check(&self, elem: &CliffordElement) -> Result<()> {
        if elem.d != self.d {
            return Err(Error::DimensionMismatch { expected: self.d.get(), found: elem.d.get() });
        }
        Ok(())
    }

    fn cached(&self, elem: &CliffordElement) -> Option<&CachedSymplectic> {
        self.by_key.get(elem.symplectic.key(self.d)).and_then(|m| m.as_ref())
    }

    pub fn unitary(&self, elem: &CliffordElement) -> Result<ComplexMatrix> {
        self.check(elem)?;
        match self.cached(elem) {
            Some(c) => Ok(attach_pauli(self.d, &c.unitary, elem.pauli)),
            None => synthesize_clifford(elem),
        }
    }

    pub fn frame(&self, elem: &CliffordElement) -> Result<StabilizerFrame> {
        self.check(elem)?;
        let d = self.d;
        let built;
        let base = match self.cached(elem) {
            Some(c) => &c.phases,
            None => {
                built = CachedSymplectic::build(d, &elem.symplectic)?;
                &built.phases
            }
        };
        let generator = elem.symplectic.apply(d, DisplacementIndex { q: 0, p: 1 });
        // D_s† D_x D_s = ω^{σ(s,x)} D_x
        let twist = elem.pauli.symplectic_form(d, generator);
        let phases =
            base.iter().enumerate().map(|(t, c)| c * omega_pow(d.get(), (twist * t) as i64)).collect();
        Ok(StabilizerFrame { generator, phases })
    }
}

/// Largest phase-stripped deviation of `U† D_v U` from `D_{Cv}` over all `v`.
pub fn conjugation_defect(elem: &CliffordElement, u: &ComplexMatrix) -> f64 {
    let d = elem.d;
    let ud = u.dagger();
    let mut worst: f64 = 0.0;
    for v in d.indices() {
        let lhs = ud.matmul(&displacement(d, v)).matmul(u);
        let target = displacement(d, elem.symplectic.apply(d, v));
        let overlap = target.hs_inner(&lhs) / d.get() as f64;
        worst = worst.max((overlap.norm() - 1.0).abs());
        let phase = overlap / overlap.norm();
        worst = worst.max(lhs.max_abs_diff(&target.scale(phase)));
    }
    worst
}
