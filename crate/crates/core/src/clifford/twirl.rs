//! k-fold twirl channels `(1/|Cl|) Σ 𝒰^{⊗k}` in the displacement basis.
//!
//! Basis vector `i = q·d + p` of one copy is `|D_{q,p}⟫ = D_{q,p}/√d`; a k-fold
//! index is the base-`d²` number with the first copy most significant.

use alloc::vec::Vec;

use num_complex::Complex64;

use super::synthesis::{all_cliffords, CliffordCache, CliffordElement};
use crate::field::{Dimension, DisplacementIndex};
use crate::matrix::ComplexMatrix;
use crate::qudit::{displacement, displacement_trace, product_phase};
use crate::{Error, Result};

/// A superoperator on `k` copies, in the k-fold displacement basis.
#[derive(Clone, Debug)]
pub struct SuperOperatorMatrix {
    pub k: usize,
    pub d: Dimension,
    pub matrix: ComplexMatrix,
}

impl SuperOperatorMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// `max |S² − S|`.
    pub fn idempotency_defect(&self) -> f64 {
        self.matrix.matmul(&self.matrix).max_abs_diff(&self.matrix)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.matrix.hermiticity_defect()
    }

    /// Rank of a projector, read off its trace.
    pub fn projector_rank(&self) -> usize {
        libm::round(self.matrix.trace().re).max(0.0) as usize
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.matrix.max_abs_diff(&other.matrix)
    }
}

/// Whether `(k, d)` is within the supported twirl grid.
pub fn twirl_supported(k: usize, d: Dimension) -> bool {
    match k {
        1 | 2 => matches!(d.get(), 2 | 3 | 5),
        3 => matches!(d.get(), 2 | 3),
        _ => false,
    }
}

fn check_supported(k: usize, d: Dimension) -> Result<()> {
    if twirl_supported(k, d) {
        Ok(())
    } else {
        Err(Error::Unsupported(alloc::format!(
            "twirl (k={k}, d={d}) is outside k ≤ 2 with d ∈ {{2,3,5}} and k = 3 with d ∈ {{2,3}}"
        )))
    }
}

/// Coordinates `Tr(D_i† A)/√d` of `A` in the displacement basis.
pub fn liouville_coefficients(d: Dimension, a: &ComplexMatrix) -> Vec<Complex64> {
    let s = 1.0 / libm::sqrt(d.get() as f64);
    d.indices().map(|v| displacement_trace(d, v.neg(d), a) * s).collect()
}

/// The operator with the given displacement-basis coordinates.
pub fn from_liouville(d: Dimension, coeffs: &[Complex64]) -> ComplexMatrix {
    let s = 1.0 / libm::sqrt(d.get() as f64);
    let mut out = ComplexMatrix::zeros(d.get());
    for (v, &c) in d.indices().zip(coeffs) {
        if c.norm() > 0.0 {
            out = &out + &displacement(d, v).scale(c * s);
        }
    }
    out
}

/// `(Cv, c_v)` with `U† D_v U = c_v D_{Cv}`, for every `v`.
fn monomial_action(cache: &CliffordCache, elem: &CliffordElement) -> Result<Vec<(usize, Complex64)>> {
    let d = elem.d;
    let u = cache.unitary(elem)?;
    let ud = u.dagger();
    Ok(d
        .indices()
        .map(|v| {
            let image = elem.symplectic.apply(d, v);
            let conj = ud.matmul(&displacement(d, v)).matmul(&u);
            let c = displacement_trace(d, image.neg(d), &conj) / d.get() as f64;
            (image.flat(d), c)
        })
        .collect())
}

/// Brute-force group average of `𝒰^{⊗k}`.
pub fn twirl_channel(k: usize, d: Dimension) -> Result<SuperOperatorMatrix> {
    check_supported(k, d)?;
    let base = d.get() * d.get();
    let dim = base.pow(k as u32);
    let cache = CliffordCache::new(d)?;
    let group = all_cliffords(d);
    let weight = 1.0 / group.len() as f64;
    let mut matrix = ComplexMatrix::zeros(dim);
    for elem in &group {
        let action = monomial_action(&cache, elem)?;
        for col in 0..dim {
            let mut rest = col;
            let mut row = 0;
            let mut value = Complex64::new(weight, 0.0);
            let mut place = 1;
            for _ in 0..k {
                let (target, c) = action[rest % base];
                row += target * place;
                value *= c;
                rest /= base;
                place *= base;
            }
            matrix[(row, col)] += value;
        }
    }
    Ok(SuperOperatorMatrix { k, d, matrix })
}

/// Flat k-fold index of single-copy indices, first copy most significant.
fn multi_index(d: Dimension, parts: &[DisplacementIndex]) -> usize {
    let base = d.get() * d.get();
    parts.iter().fold(0, |acc, v| acc * base + v.flat(d))
}

fn add_projector(matrix: &mut ComplexMatrix, entries: &[(usize, Complex64)]) {
    for &(i, a) in entries {
        for &(j, b) in entries {
            matrix[(i, j)] += a * b.conj();
        }
    }
}

/// Sparse unit vectors spanning the commutant of `Cl_d^{⊗k}`.
pub fn twirl_basis(k: usize, d: Dimension) -> Result<Vec<Vec<(usize, Complex64)>>> {
    check_supported(k, d)?;
    let n = d.get();
    let nf = n as f64;
    let zero = DisplacementIndex::ZERO;
    let one = Complex64::new(1.0, 0.0);
    let phi_norm = 1.0 / libm::sqrt(nf * nf - 1.0);
    let mut basis = alloc::vec![alloc::vec![(0usize, one)]];
    let pair = |v: DisplacementIndex, slot: Option<usize>| -> usize {
        // |D_v⟫|D_v†⟫ with the identity inserted at `slot`.
        let parts = [v, v.neg(d)];
        match slot {
            None => multi_index(d, &parts),
            Some(s) => {
                let mut full: Vec<DisplacementIndex> = parts.to_vec();
                full.insert(s, zero);
                multi_index(d, &full)
            }
        }
    };
    match k {
        1 => {}
        2 => basis.push(d.nonzero_indices().map(|v| (pair(v, None), Complex64::new(phi_norm, 0.0))).collect()),
        _ => {
            // Identity slot last, middle, first: Φ₃, Φ₂, Φ₁.
            for slot in [2, 1, 0] {
                basis.push(d.nonzero_indices().map(|v| (pair(v, Some(slot)), Complex64::new(phi_norm, 0.0))).collect());
            }
            for m in 1..n.saturating_sub(1) {
                basis.push(
                    d.nonzero_indices()
                        .map(|v| {
                            let kv = v.scale(d, m);
                            // D_v† D_{kv}† = conj(c) D_{−(k+1)v} with D_{kv} D_v = c D_{(k+1)v}
                            let phase = product_phase(d, kv, v).conj();
                            let third = kv.add(d, v).neg(d);
                            (multi_index(d, &[v, kv, third]), phase * phi_norm)
                        })
                        .collect(),
                );
            }
            let upsilon_norm = 1.0 / libm::sqrt(nf * (nf * nf - 1.0));
            for l in 1..n {
                let mut entries = Vec::new();
                for v1 in d.indices() {
                    for v2 in d.indices() {
                        if d.sub(d.mul(v1.p, v2.q), d.mul(v1.q, v2.p)) != l {
                            continue;
                        }
                        let phase = product_phase(d, v2, v1).conj();
                        let third = v1.add(d, v2).neg(d);
                        entries.push((multi_index(d, &[v1, v2, third]), phase * upsilon_norm));
                    }
                }
                basis.push(entries);
            }
        }
    }
    Ok(basis)
}

/// Twirl projector assembled from its commutant basis.
pub fn twirl_theory(k: usize, d: Dimension) -> Result<SuperOperatorMatrix> {
    let basis = twirl_basis(k, d)?;
    let dim = (d.get() * d.get()).pow(k as u32);
    let mut matrix = ComplexMatrix::zeros(dim);
    for v in &basis {
        add_projector(&mut matrix, v);
    }
    Ok(SuperOperatorMatrix { k, d, matrix })
}

/// Expected projector rank `1`, `2`, or `1 + 3 + (d−2) + (d−1)`.
pub fn twirl_rank(k: usize, d: Dimension) -> usize {
    match k {
        1 => 1,
        2 => 2,
        _ => 1 + 3 + (d.get() - 2) + (d.get() - 1),
    }
}
