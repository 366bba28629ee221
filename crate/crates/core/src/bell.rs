//! Generalized Bell basis and joint measurements of `ρ ⊗ σ`.
//!
//! `|Φ_{a,b}⟩ = (1/√d) Σ_j ω^{bj} |j+a⟩|−j⟩`. Two-qudit vectors are indexed
//! `x·d + y` with the first register major.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand::RngCore;

use crate::field::{Dimension, DisplacementIndex};
use crate::matrix::ComplexMatrix;
use crate::qudit::{fourier, omega_pow, roots_of_unity};
use crate::rng::{cumulative, sample_cdf, substream};
use crate::state::DensityMatrix;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BellOutcome {
    pub a: usize,
    pub b: usize,
}

impl BellOutcome {
    #[inline]
    pub fn flat(self, d: Dimension) -> usize {
        self.a * d.get() + self.b
    }

    #[inline]
    pub fn from_flat(d: Dimension, k: usize) -> Self {
        BellOutcome { a: k / d.get(), b: k % d.get() }
    }
}

/// Outcome probabilities over `Z_d × Z_d`, indexed by [`BellOutcome::flat`].
#[derive(Clone, Debug, PartialEq)]
pub struct BellDistribution {
    d: Dimension,
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl BellDistribution {
    pub fn from_probs(d: Dimension, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != d.get() * d.get() {
            return Err(Error::DimensionMismatch { expected: d.get() * d.get(), found: probs.len() });
        }
        if probs.iter().any(|p| !p.is_finite() || *p < -1e-12) {
            return Err(Error::InvalidParameter("probabilities must be finite and non-negative".into()));
        }
        let total: f64 = probs.iter().map(|p| p.max(0.0)).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(alloc::format!("probabilities sum to {total}")));
        }
        let probs: Vec<f64> = probs.into_iter().map(|p| p.max(0.0)).collect();
        let cdf = cumulative(&probs);
        Ok(BellDistribution { d, probs, cdf })
    }

    pub fn dimension(&self) -> Dimension {
        self.d
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, out: BellOutcome) -> f64 {
        self.probs[out.flat(self.d)]
    }

    pub fn sample_one<R: RngCore + ?Sized>(&self, rng: &mut R) -> BellOutcome {
        BellOutcome::from_flat(self.d, sample_cdf(rng, &self.cdf))
    }

    pub fn sample_with<R: RngCore + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<BellOutcome> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }

    /// Outcome counts of `n` draws, indexed like `probs`.
    pub fn histogram_with<R: RngCore + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<u64> {
        let mut counts = alloc::vec![0u64; self.probs.len()];
        for _ in 0..n {
            counts[sample_cdf(rng, &self.cdf)] += 1;
        }
        counts
    }

    /// `Σ_{a,b} P(a,b) e^{i2π(ap − bq)/d}`.
    pub fn expected_phase(&self, idx: DisplacementIndex) -> Complex64 {
        let d = self.d;
        self.probs
            .iter()
            .enumerate()
            .map(|(k, &p)| bell_eigenvalue(d, idx, BellOutcome::from_flat(d, k)) * p)
            .sum()
    }
}

/// `|Φ_{a,b}⟩` as a `d²` vector.
pub fn bell_state(d: Dimension, a: usize, b: usize) -> Vec<Complex64> {
    let n = d.get();
    let s = 1.0 / libm::sqrt(n as f64);
    let mut v = alloc::vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let x = (j + a) % n;
        let y = (n - j) % n;
        v[x * n + y] = omega_pow(n, (b * j) as i64) * s;
    }
    v
}

/// `P(a,b) = ⟨Φ_{a,b}| ρ⊗σ |Φ_{a,b}⟩` by index contraction in `O(d³)`.
pub fn bell_distribution(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<BellDistribution> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: sigma.dim() });
    }
    let d = Dimension::new(rho.dim())?;
    let n = d.get();
    let (r, s) = (rho.matrix(), sigma.matrix());
    let roots = roots_of_unity(d);
    let mut probs = Vec::with_capacity(n * n);
    let mut by_shift = alloc::vec![Complex64::new(0.0, 0.0); n];
    for a in 0..n {
        // c_k = Σ_{j − j' = k} ρ_{j+a, j'+a} σ_{−j, −j'}
        by_shift.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for j in 0..n {
            for jp in 0..n {
                let k = (j + n - jp) % n;
                by_shift[k] += r[((j + a) % n, (jp + a) % n)] * s[((n - j) % n, (n - jp) % n)];
            }
        }
        for b in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, c) in by_shift.iter().enumerate() {
                acc += roots[(n - (b * k) % n) % n] * c;
            }
            probs.push(acc.re / n as f64);
        }
    }
    BellDistribution::from_probs(d, probs)
}

/// Bell probabilities of an arbitrary joint two-qudit operator, by dense sandwiching.
pub fn bell_distribution_dense(d: Dimension, joint: &ComplexMatrix) -> Result<BellDistribution> {
    let n = d.get();
    if joint.dim() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, found: joint.dim() });
    }
    let probs = (0..n * n)
        .map(|k| {
            let phi = bell_state(d, k / n, k % n);
            joint.sandwich(&phi, &phi).re
        })
        .collect();
    BellDistribution::from_probs(d, probs)
}

/// Bell probabilities of a joint pure state `|ψ⟩` of two qudits.
pub fn bell_distribution_pure(d: Dimension, psi: &[Complex64]) -> Result<BellDistribution> {
    let n = d.get();
    if psi.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, found: psi.len() });
    }
    let norm = crate::matrix::vector_norm(psi);
    let probs = (0..n * n)
        .map(|k| {
            let phi = bell_state(d, k / n, k % n);
            (crate::matrix::inner(&phi, psi) / norm).norm_sqr()
        })
        .collect();
    BellDistribution::from_probs(d, probs)
}

pub fn sample_bell(dist: &BellDistribution, n: usize, seed: u64) -> Vec<BellOutcome> {
    dist.sample_with(n, &mut substream(seed, 0))
}

/// `CX|j⟩|l⟩ = |j+l⟩|l⟩`.
pub fn controlled_shift(d: Dimension) -> ComplexMatrix {
    let n = d.get();
    ComplexMatrix::from_fn(n * n, |row, col| {
        let (j, l) = (col / n, col % n);
        if row == ((j + l) % n) * n + l {
            1.0.into()
        } else {
            0.0.into()
        }
    })
}

/// Largest deviation of `(CX)^{-1}(1⊗W)|a⟩|b⟩` from `|Φ_{a,b}⟩`.
pub fn bell_circuit_check(d: Dimension) -> f64 {
    let n = d.get();
    let circuit = controlled_shift(d).dagger().matmul(&ComplexMatrix::identity(n).kron(&fourier(d)));
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            let out = circuit.column(a * n + b);
            let phi = bell_state(d, a, b);
            for (x, y) in out.iter().zip(&phi) {
                worst = worst.max((x - y).norm());
            }
        }
    }
    worst
}

/// `e^{i2π(ap − bq)/d}`, the eigenvalue of `D_{q,p} ⊗ D_{−q,p}` on `|Φ_{a,b}⟩`.
#[inline]
pub fn bell_eigenvalue(d: Dimension, idx: DisplacementIndex, out: BellOutcome) -> Complex64 {
    let n = d.get();
    let e = (out.a * idx.p + (n - out.b) * idx.q) % n;
    omega_pow(n, e as i64)
}

/// Outcome of a Bell measurement on each of `n` register pairs.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BellOutcomeVec {
    pub avec: Vec<usize>,
    pub bvec: Vec<usize>,
}

/// One draw per register from a product of per-register Bell distributions.
pub fn sample_bell_product(dists: &[BellDistribution], n: usize, seed: u64) -> Vec<BellOutcomeVec> {
    let mut rng = substream(seed, 0);
    (0..n)
        .map(|_| {
            let (avec, bvec) = dists.iter().map(|dist| {
                let o = dist.sample_one(&mut rng);
                (o.a, o.b)
            }).unzip();
            BellOutcomeVec { avec, bvec }
        })
        .collect()
}

/// `e^{i2π(a⃗·p⃗ − b⃗·q⃗)/d}`.
pub fn bell_eigenvalue_vec(d: Dimension, qvec: &[usize], pvec: &[usize], out: &BellOutcomeVec) -> Complex64 {
    let n = d.get();
    let mut e = 0;
    for k in 0..qvec.len() {
        e += out.avec[k] * pvec[k] + (n - out.bvec[k]) * qvec[k];
    }
    omega_pow(n, (e % n) as i64)
}

/// Exact `Σ P(a⃗,b⃗) e^{i2π(a⃗·p⃗ − b⃗·q⃗)/d}` for a product distribution.
pub fn expected_phase_product(dists: &[BellDistribution], qvec: &[usize], pvec: &[usize]) -> Complex64 {
    dists
        .iter()
        .zip(qvec.iter().zip(pvec))
        .map(|(dist, (&q, &p))| dist.expected_phase(DisplacementIndex { q, p }))
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::inner;
    use crate::qudit::displacement;
    use crate::state::{amplitudes, make_test_state, random_mixed, TestStateKind};

    fn dim(d: usize) -> Dimension {
        Dimension::new(d).unwrap()
    }

    #[test]
    fn small_bell_states() {
        let r = 1.0 / 2f64.sqrt();
        let phi = bell_state(dim(2), 0, 0);
        let expected = [r, 0.0, 0.0, r];
        assert!(phi.iter().zip(expected).all(|(x, e)| (x - e).norm() < 1e-15));
        let phi3 = bell_state(dim(3), 0, 0);
        let s = 1.0 / 3f64.sqrt();
        for (k, z) in phi3.iter().enumerate() {
            let e = if [0, 5, 7].contains(&k) { s } else { 0.0 };
            assert!((z - e).norm() < 1e-15);
        }
    }

    #[test]
    fn bell_basis_is_orthonormal() {
        for d in [2, 3, 5, 7] {
            let dd = dim(d);
            let states: Vec<_> = (0..d * d).map(|k| bell_state(dd, k / d, k % d)).collect();
            for (i, u) in states.iter().enumerate() {
                for (j, v) in states.iter().enumerate() {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((inner(u, v) - e).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn contraction_matches_dense_oracle() {
        let mut rng = substream(5, 0);
        for d in [2, 3, 5] {
            let dd = dim(d);
            let rho = random_mixed(d, 2, &mut rng);
            let sigma = random_mixed(d, 3, &mut rng);
            let fast = bell_distribution(&rho, &sigma).unwrap();
            let dense = bell_distribution_dense(dd, &rho.matrix().kron(sigma.matrix())).unwrap();
            for (x, y) in fast.probs().iter().zip(dense.probs()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ground_state_moment_identity() {
        let mut e0 = alloc::vec![Complex64::new(0.0, 0.0); 3];
        e0[0] = 1.0.into();
        let rho = DensityMatrix::pure(&e0).unwrap();
        let dist = bell_distribution(&rho, &rho.conj()).unwrap();
        let table = amplitudes(&rho).unwrap();
        for (idx, y) in table.iter() {
            assert!((dist.expected_phase(idx) - y * y).norm() < 1e-12);
        }
    }

    #[test]
    fn uniform_and_point_mass() {
        let d = dim(3);
        let mm = DensityMatrix::maximally_mixed(3);
        let dist = bell_distribution(&mm, &mm).unwrap();
        assert!(dist.probs().iter().all(|p| (p - 1.0 / 9.0).abs() < 1e-15));
        let point = bell_distribution_pure(d, &bell_state(d, 0, 0)).unwrap();
        assert!((point.prob(BellOutcome { a: 0, b: 0 }) - 1.0).abs() < 1e-12);
        assert!(sample_bell(&point, 50, 3).iter().all(|o| *o == BellOutcome { a: 0, b: 0 }));
    }

    #[test]
    fn uniform_counts_within_five_sigma() {
        let mm = DensityMatrix::maximally_mixed(3);
        let dist = bell_distribution(&mm, &mm).unwrap();
        let counts = dist.histogram_with(90_000, &mut substream(2024, 0));
        let sigma = (90_000.0f64 * (1.0 / 9.0) * (8.0 / 9.0)).sqrt();
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 5.0 * sigma, "{c}");
        }
        assert_eq!(sample_bell(&dist, 100, 8), sample_bell(&dist, 100, 8));
    }

    #[test]
    fn circuit_and_eigenvalues() {
        for d in [2, 3, 5] {
            assert!(bell_circuit_check(dim(d)) < 1e-12);
        }
        let d = dim(3);
        let v = bell_eigenvalue(d, DisplacementIndex { q: 1, p: 0 }, BellOutcome { a: 0, b: 1 });
        assert!((v - omega_pow(3, -1)).norm() < 1e-15);
        // Dense check of the same case.
        let op = displacement(d, DisplacementIndex { q: 1, p: 0 }).kron(&displacement(d, DisplacementIndex { q: 2, p: 0 }));
        let phi = bell_state(d, 0, 1);
        let out = op.apply(&phi);
        assert!(out.iter().zip(&phi).all(|(x, y)| (x - v * y).norm() < 1e-12));
    }

    #[test]
    fn product_sampling_factorises() {
        let d = dim(3);
        let mut rng = substream(1, 0);
        let rho = make_test_state(d, TestStateKind::HaarPure, 4).unwrap();
        let sigma = random_mixed(3, 1, &mut rng);
        let dists = [bell_distribution(&rho, &rho.conj()).unwrap(), bell_distribution(&sigma, &sigma.conj()).unwrap()];
        let samples = sample_bell_product(&dists, 40_000, 17);
        let (qv, pv) = ([1, 2], [0, 1]);
        let mean: Complex64 =
            samples.iter().map(|o| bell_eigenvalue_vec(d, &qv, &pv, o)).sum::<Complex64>() / samples.len() as f64;
        let exact = expected_phase_product(&dists, &qv, &pv);
        assert!((mean - exact).norm() < 5.0 / (40_000f64).sqrt());
    }
}
