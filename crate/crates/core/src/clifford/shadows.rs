//! Classical shadows from uniformly random generalized Cliffords.
//!
//! A sample measures `UρU†` in the computational basis. The snapshot
//! `ℳ⁻¹(U†|b⟩⟨b|U)` gives the per-sample estimate
//! `(d+1)⟨b|UOU†|b⟩ − tr O` of `tr(Oρ)`.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand::RngCore;

use super::synthesis::{all_cliffords, sample_clifford_with, CliffordCache, CliffordElement, StabilizerFrame};
use crate::field::{Dimension, DisplacementIndex};
use crate::matrix::ComplexMatrix;
use crate::qudit::{displacement_phase, displacement_trace, omega_pow, product_phase};
use crate::rng::{cumulative, sample_cdf, substream};
use crate::state::DensityMatrix;
use crate::{Error, Result};

/// Largest `d` accepted by the exhaustive group averages.
pub const EXHAUSTIVE_MAX_DIMENSION: usize = 7;

const IMAGINARY_TOL: f64 = 1e-9;

/// One measurement record `(U, b)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShadowSample {
    pub clifford: CliffordElement,
    pub outcome: usize,
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShadowEstimate {
    pub mean: Complex64,
    pub stderr: f64,
}

/// `⟨b|UρU†|b⟩` for every `b`.
pub fn outcome_probabilities(u: &ComplexMatrix, rho: &ComplexMatrix) -> Vec<f64> {
    let n = u.dim();
    let u_rho = u.matmul(rho);
    (0..n)
        .map(|b| {
            let row = u.row(b);
            u_rho.row(b).iter().zip(row).map(|(x, y)| (x * y.conj()).re).sum::<f64>().max(0.0)
        })
        .collect()
}

/// `U†|b⟩`, the measured state pulled back to the lab frame.
pub fn snapshot_vector(u: &ComplexMatrix, outcome: usize) -> Vec<Complex64> {
    u.row(outcome).iter().map(|z| z.conj()).collect()
}

/// Draws one sample, returning it with its pulled-back state.
pub fn draw_snapshot<R: RngCore + ?Sized>(
    cache: &CliffordCache,
    rho: &DensityMatrix,
    rng: &mut R,
) -> Result<(ShadowSample, Vec<Complex64>)> {
    let clifford = sample_clifford_with(cache.dimension(), rng);
    let u = cache.unitary(&clifford)?;
    let probs = outcome_probabilities(&u, rho.matrix());
    let outcome = sample_cdf(rng, &cumulative(&probs));
    Ok((ShadowSample { clifford, outcome }, snapshot_vector(&u, outcome)))
}

/// `Tr(D_v† ρ)` for every `v`, indexed by [`DisplacementIndex::flat`].
pub fn displacement_coefficients(rho: &DensityMatrix) -> Result<Vec<Complex64>> {
    let d = rho.dimension()?;
    Ok(d.indices().map(|v| displacement_trace(d, v.neg(d), rho.matrix())).collect())
}

/// Outcome distribution from the frame alone, in `O(d²)`.
pub fn frame_probabilities(d: Dimension, frame: &StabilizerFrame, coeffs: &[Complex64]) -> Vec<f64> {
    let n = d.get();
    let weights: Vec<Complex64> =
        (0..n).map(|t| coeffs[frame.generator.scale(d, t).flat(d)] * frame.phases[t].conj()).collect();
    (0..n)
        .map(|b| {
            let acc: Complex64 =
                weights.iter().enumerate().map(|(t, y)| y * omega_pow(n, (b * t) as i64)).sum();
            (acc.re / n as f64).max(0.0)
        })
        .collect()
}

/// A sample with the nonzero part of its displacement snapshot.
#[derive(Clone, Debug)]
pub struct FrameSnapshot {
    pub sample: ShadowSample,
    pub generator: DisplacementIndex,
    /// `⟨w|D_{t·generator}|w⟩` for `t = 0..d`.
    pub values: Vec<Complex64>,
}

/// Draws one sample without forming the unitary.
///
/// `coeffs` are the [`displacement_coefficients`] of the measured state.
pub fn draw_frame_snapshot<R: RngCore + ?Sized>(
    cache: &CliffordCache,
    coeffs: &[Complex64],
    rng: &mut R,
) -> Result<FrameSnapshot> {
    let d = cache.dimension();
    if coeffs.len() != d.get() * d.get() {
        return Err(Error::DimensionMismatch { expected: d.get() * d.get(), found: coeffs.len() });
    }
    let clifford = sample_clifford_with(d, rng);
    let frame = cache.frame(&clifford)?;
    let outcome = sample_cdf(rng, &cumulative(&frame_probabilities(d, &frame, coeffs)));
    Ok(FrameSnapshot {
        sample: ShadowSample { clifford, outcome },
        generator: frame.generator,
        values: frame.snapshot_values(outcome),
    })
}

pub fn shadow_sample(rho: &DensityMatrix, n: usize, seed: u64) -> Result<Vec<ShadowSample>> {
    let cache = CliffordCache::new(rho.dimension()?)?;
    shadow_sample_cached(&cache, rho, n, seed)
}

pub fn shadow_sample_cached(
    cache: &CliffordCache,
    rho: &DensityMatrix,
    n: usize,
    seed: u64,
) -> Result<Vec<ShadowSample>> {
    rho.check_dim(cache.dimension())?;
    let mut rng = substream(seed, 0);
    (0..n).map(|_| draw_snapshot(cache, rho, &mut rng).map(|(s, _)| s)).collect()
}

/// Measures `n` times in the basis of one fixed Clifford.
pub fn shadow_sample_with_clifford(
    rho: &DensityMatrix,
    clifford: CliffordElement,
    n: usize,
    seed: u64,
) -> Result<Vec<ShadowSample>> {
    rho.check_dim(clifford.d)?;
    let u = CliffordCache::new(clifford.d)?.unitary(&clifford)?;
    let cdf = cumulative(&outcome_probabilities(&u, rho.matrix()));
    let mut rng = substream(seed, 0);
    Ok((0..n).map(|_| ShadowSample { clifford, outcome: sample_cdf(&mut rng, &cdf) }).collect())
}

fn check_square(a: &ComplexMatrix, d: Dimension) -> Result<()> {
    if a.dim() != d.get() {
        return Err(Error::DimensionMismatch { expected: d.get(), found: a.dim() });
    }
    Ok(())
}

/// `ℳ(A) = (tr(A) I + A)/(d+1)`.
pub fn measurement_channel(a: &ComplexMatrix, d: Dimension) -> Result<ComplexMatrix> {
    check_square(a, d)?;
    let id = ComplexMatrix::identity(d.get()).scale(a.trace());
    Ok((&id + a).scale(Complex64::new(1.0 / (d.get() as f64 + 1.0), 0.0)))
}

/// `ℳ⁻¹(A) = (d+1) A − tr(A) I`.
pub fn inverse_channel(a: &ComplexMatrix, d: Dimension) -> Result<ComplexMatrix> {
    check_square(a, d)?;
    let id = ComplexMatrix::identity(d.get()).scale(a.trace());
    Ok(&a.scale(Complex64::new(d.get() as f64 + 1.0, 0.0)) - &id)
}

/// `(d+1)⟨w|O|w⟩ − tr O` for the pulled-back state `w = U†|b⟩`.
pub fn single_estimate(w: &[Complex64], observable: &ComplexMatrix) -> Complex64 {
    let n = w.len();
    observable.sandwich(w, w) * (n as f64 + 1.0) - observable.trace()
}

/// `⟨w|D_v|w⟩` for every `v`, indexed by [`DisplacementIndex::flat`].
pub fn displacement_snapshot(d: Dimension, w: &[Complex64]) -> Vec<Complex64> {
    let n = d.get();
    let mut out = alloc::vec![Complex64::new(0.0, 0.0); n * n];
    let mut shifted = alloc::vec![Complex64::new(0.0, 0.0); n];
    for q in 0..n {
        for (j, s) in shifted.iter_mut().enumerate() {
            *s = w[(j + q) % n].conj() * w[j];
        }
        for p in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, s) in shifted.iter().enumerate() {
                acc += omega_pow(n, (j * p) as i64) * s;
            }
            let idx = DisplacementIndex { q, p };
            out[idx.flat(d)] = acc * displacement_phase(d, idx);
        }
    }
    out
}

/// Mean and standard error of complex values.
pub fn mean_and_stderr(values: &[Complex64]) -> Result<ShadowEstimate> {
    if values.is_empty() {
        return Err(Error::Empty("samples"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<Complex64>() / n;
    if values.len() == 1 {
        return Ok(ShadowEstimate { mean, stderr: 0.0 });
    }
    let ss: f64 = values.iter().map(|x| (x - mean).norm_sqr()).sum();
    Ok(ShadowEstimate { mean, stderr: libm::sqrt(ss / (n - 1.0) / n) })
}

pub fn estimate_expectation(samples: &[ShadowSample], observable: &ComplexMatrix) -> Result<ShadowEstimate> {
    let first = samples.first().ok_or(Error::Empty("samples"))?;
    let d = first.clifford.d;
    check_square(observable, d)?;
    let cache = CliffordCache::new(d)?;
    let values = samples
        .iter()
        .map(|s| {
            let u = cache.unitary(&s.clifford)?;
            Ok(single_estimate(&snapshot_vector(&u, s.outcome), observable))
        })
        .collect::<Result<Vec<_>>>()?;
    mean_and_stderr(&values)
}

/// `U|j⟩⟨i|U†` for the unitary of `clifford`.
pub fn transition_observable(clifford: &CliffordElement, i: usize, j: usize) -> Result<ComplexMatrix> {
    let n = clifford.d.get();
    if i >= n || j >= n {
        return Err(Error::InvalidParameter(alloc::format!("basis indices ({i}, {j}) out of range for d = {n}")));
    }
    if i == j {
        return Err(Error::InvalidParameter(alloc::format!(
            "transition_estimate needs i ≠ j: diagonal elements have shadow variance growing linearly in d (got i = j = {i})"
        )));
    }
    let u = CliffordCache::new(clifford.d)?.unitary(clifford)?;
    Ok(ComplexMatrix::outer(&u.column(j), &u.column(i)))
}

/// Estimate of `⟨i|U†ρU|j⟩` for `i ≠ j`.
pub fn transition_estimate(
    samples: &[ShadowSample],
    clifford: &CliffordElement,
    i: usize,
    j: usize,
) -> Result<ShadowEstimate> {
    estimate_expectation(samples, &transition_observable(clifford, i, j)?)
}

fn traceless_part(o: &ComplexMatrix) -> ComplexMatrix {
    let n = o.dim();
    let shift = ComplexMatrix::identity(n).scale(o.trace() / n as f64);
    o - &shift
}

/// Closed-form `E|ô|²` for the traceless part of `O`.
pub fn second_moment_oracle(observable: &ComplexMatrix, rho: &DensityMatrix) -> Result<f64> {
    let d = rho.dimension()?;
    check_square(observable, d)?;
    let n = d.get();
    let nf = n as f64;
    let o0 = traceless_part(observable);
    let hs = o0.frobenius_norm();
    // a_v = tr(D_v† O₀), b_v = tr(D_v† O₀†), r_v = tr(D_v ρ)
    let a: Vec<Complex64> = d.indices().map(|v| displacement_trace(d, v.neg(d), &o0)).collect();
    let b: Vec<Complex64> = d.indices().map(|v| displacement_trace(d, v, &o0).conj()).collect();
    let r: Vec<Complex64> = d.indices().map(|v| displacement_trace(d, v, rho.matrix())).collect();
    let mut cross = Complex64::new(0.0, 0.0);
    for k in 1..n.saturating_sub(1) {
        for v in d.nonzero_indices() {
            let kv = v.scale(d, k);
            let joint = kv.add(d, v);
            cross += a[v.flat(d)] * b[kv.flat(d)] * product_phase(d, kv, v) * r[joint.flat(d)];
        }
    }
    let total = Complex64::new((nf + 1.0) / nf * hs * hs, 0.0) + cross * ((nf + 1.0) / (nf * nf));
    if total.im.abs() > IMAGINARY_TOL * (1.0 + total.re.abs()) {
        return Err(Error::ImaginaryResidue(total.im));
    }
    Ok(total.re)
}

/// Closed-form shadow variance of `tr(Oρ)`.
pub fn variance_oracle(observable: &ComplexMatrix, rho: &DensityMatrix) -> Result<f64> {
    let second = second_moment_oracle(observable, rho)?;
    let o0 = traceless_part(observable);
    Ok(second - rho.expectation(&o0).norm_sqr())
}

/// Exact mean, second moment and variance of the estimator over the full group.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShadowMoments {
    pub mean: Complex64,
    pub second_moment: f64,
    pub variance: f64,
}

/// Calls `f(probability, pulled-back state)` for every (Clifford, outcome) pair.
fn for_each_outcome(
    d: Dimension,
    rho: &DensityMatrix,
    mut f: impl FnMut(f64, &[Complex64]),
) -> Result<()> {
    if d.get() > EXHAUSTIVE_MAX_DIMENSION {
        return Err(Error::Unsupported(alloc::format!(
            "exhaustive group averages are limited to d ≤ {EXHAUSTIVE_MAX_DIMENSION}, got {d}"
        )));
    }
    rho.check_dim(d)?;
    let cache = CliffordCache::new(d)?;
    let group = all_cliffords(d);
    let weight = 1.0 / group.len() as f64;
    for elem in &group {
        let u = cache.unitary(elem)?;
        for (b, p) in outcome_probabilities(&u, rho.matrix()).into_iter().enumerate() {
            f(weight * p, &snapshot_vector(&u, b));
        }
    }
    Ok(())
}

/// Estimator moments by summing over every Clifford and outcome.
pub fn exhaustive_moments(observable: &ComplexMatrix, rho: &DensityMatrix) -> Result<ShadowMoments> {
    let d = rho.dimension()?;
    check_square(observable, d)?;
    // ô for O and for its traceless part differ by the constant tr(O)/d.
    let offset = observable.trace() / d.get() as f64;
    let mut mean = Complex64::new(0.0, 0.0);
    let mut second_moment = 0.0;
    for_each_outcome(d, rho, |p, w| {
        let x = single_estimate(w, observable);
        mean += x * p;
        second_moment += p * (x - offset).norm_sqr();
    })?;
    let variance = second_moment - (mean - offset).norm_sqr();
    Ok(ShadowMoments { mean, second_moment, variance })
}

/// `𝔼_U Σ_b ⟨b|UAU†|b⟩ U†|b⟩⟨b|U`, the measurement channel by group averaging.
pub fn averaged_measurement_channel(a: &ComplexMatrix, d: Dimension) -> Result<ComplexMatrix> {
    check_square(a, d)?;
    if d.get() > EXHAUSTIVE_MAX_DIMENSION {
        return Err(Error::Unsupported(alloc::format!("group average limited to d ≤ {EXHAUSTIVE_MAX_DIMENSION}")));
    }
    let cache = CliffordCache::new(d)?;
    let group = all_cliffords(d);
    let mut acc = ComplexMatrix::zeros(d.get());
    for elem in &group {
        let u = cache.unitary(elem)?;
        for b in 0..d.get() {
            let w = snapshot_vector(&u, b);
            let weight = a.sandwich(&w, &w);
            acc = &acc + &ComplexMatrix::outer(&w, &w).scale(weight);
        }
    }
    Ok(acc.scale(Complex64::new(1.0 / group.len() as f64, 0.0)))
}
