//! Learning displacement amplitudes from conjugate pairs `ρ ⊗ ρ*`.
//!
//! [`algorithm1`] recovers `y_{q,p}` up to a sign from Bell samples,
//! [`find_hypothesis`] runs matrix multiplicative weights to find a classical
//! state consistent with those magnitudes, and [`algorithm2`] uses Bell samples
//! of `ρ ⊗ ρ̃*` against that hypothesis to fix the signs.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::RngCore;

use crate::bell::{bell_distribution, bell_eigenvalue, BellDistribution, BellOutcome};
use crate::field::{Dimension, DisplacementIndex};
use crate::matrix::{spectral_sum, ComplexMatrix};
use crate::qudit::{displacement, displacement_trace, omega_pow};
use crate::rng::{child_seed, cumulative, sample_cdf, substream};
use crate::state::{amplitudes, AmplitudeTable, DensityMatrix, Sign};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LearnerConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub sample_multiplier: f64,
}

impl LearnerConfig {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        let cfg = LearnerConfig { epsilon, delta, sample_multiplier: 1.0 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_multiplier(self, sample_multiplier: f64) -> Result<Self> {
        let cfg = LearnerConfig { sample_multiplier, ..self };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon = {} must lie in (0, 1)", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta = {} must lie in (0, 1)", self.delta)));
        }
        if !(self.sample_multiplier >= 1.0 && self.sample_multiplier.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sample_multiplier = {} must be a finite number ≥ 1",
                self.sample_multiplier
            )));
        }
        Ok(())
    }

    /// Same failure budget at a different precision.
    pub fn at_precision(self, epsilon: f64) -> Self {
        LearnerConfig { epsilon, ..self }
    }

    /// `N = ⌈c · 8 ln(4M/δ) / ε⁴⌉` Bell samples for `M` indices.
    pub fn sample_count(&self, m: usize) -> usize {
        let m = m.max(1) as f64;
        libm::ceil(self.sample_multiplier * 8.0 * libm::log(4.0 * m / self.delta) / libm::pow(self.epsilon, 4.0)) as usize
    }

    /// Null-branch threshold `(2/3) ε²` on `|v̂|`.
    pub fn null_threshold(&self) -> f64 {
        2.0 / 3.0 * self.epsilon * self.epsilon
    }

    /// Accuracy `(√2/(2√3)) ε` promised for non-null magnitudes.
    pub fn magnitude_tolerance(&self) -> f64 {
        libm::sqrt(2.0) / (2.0 * libm::sqrt(3.0)) * self.epsilon
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MagnitudeEstimate {
    pub idx: DisplacementIndex,
    /// Estimate of `y²`.
    pub v_hat: Complex64,
    /// Principal square root of `v̂`, `None` when `|v̂|` is below threshold.
    pub u_hat: Option<Complex64>,
}

impl MagnitudeEstimate {
    pub fn from_v(idx: DisplacementIndex, v_hat: Complex64, cfg: &LearnerConfig) -> Self {
        let u_hat = (v_hat.norm() > cfg.null_threshold()).then(|| principal_sqrt(v_hat));
        MagnitudeEstimate { idx, v_hat, u_hat }
    }

    /// Whether the estimate meets the per-index guarantee against the true `y`.
    pub fn meets_guarantee(&self, y: Complex64, cfg: &LearnerConfig) -> bool {
        match self.u_hat {
            None => y.norm() <= cfg.epsilon,
            Some(u) => (u - y).norm().min((u + y).norm()) <= cfg.magnitude_tolerance(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignedEstimate {
    pub idx: DisplacementIndex,
    pub y_hat: Complex64,
}

/// Square root with argument in `(−π/2, π/2]`.
pub fn principal_sqrt(v: Complex64) -> Complex64 {
    let r = v.sqrt();
    if r.re < 0.0 || (r.re == 0.0 && r.im < 0.0) {
        -r
    } else {
        r
    }
}

/// `v̂ = (1/N) Σ_k e^{i2π(a_k p − b_k q)/d}`.
pub fn estimate_v(outcomes: &[BellOutcome], idx: DisplacementIndex, d: Dimension) -> Result<Complex64> {
    if outcomes.is_empty() {
        return Err(Error::Empty("Bell outcome list"));
    }
    let sum: Complex64 = outcomes.iter().map(|&o| bell_eigenvalue(d, idx, o)).sum();
    Ok(sum / outcomes.len() as f64)
}

/// `v̂` from outcome counts indexed by [`BellOutcome::flat`].
pub fn estimate_v_counts(d: Dimension, counts: &[u64], idx: DisplacementIndex) -> Result<Complex64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::Empty("Bell outcome histogram"));
    }
    let weights: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    Ok(weighted_phase(d, &weights, idx))
}

/// `Σ_{a,b} w(a,b) e^{i2π(ap − bq)/d}` for weights indexed by [`BellOutcome::flat`].
pub fn weighted_phase(d: Dimension, weights: &[f64], idx: DisplacementIndex) -> Complex64 {
    let n = d.get();
    // Sum the weights by phase exponent first; only d distinct phases occur.
    let mut by_phase = alloc::vec![0.0f64; n];
    for (k, &w) in weights.iter().enumerate() {
        if w != 0.0 {
            let (a, b) = (k / n, k % n);
            by_phase[(a * idx.p + (n - b) * idx.q) % n] += w;
        }
    }
    by_phase.iter().enumerate().map(|(e, &w)| omega_pow(n, e as i64) * w).sum()
}

fn check_indices(d: Dimension, indices: &[DisplacementIndex]) -> Result<()> {
    if let Some(bad) = indices.iter().find(|i| i.q >= d.get() || i.p >= d.get()) {
        return Err(Error::InvalidParameter(format!("index {bad} is not reduced mod {d}")));
    }
    Ok(())
}

/// Magnitudes of `y_{q,p}` up to sign from Bell samples of `ρ ⊗ ρ*`.
pub fn algorithm1(
    rho: &DensityMatrix,
    indices: &[DisplacementIndex],
    cfg: &LearnerConfig,
    seed: u64,
) -> Result<Vec<MagnitudeEstimate>> {
    cfg.validate()?;
    let d = Dimension::new(rho.dim())?;
    check_indices(d, indices)?;
    let dist = bell_distribution(rho, &rho.conj())?;
    let n = cfg.sample_count(indices.len());
    let counts = dist.histogram_with(n, &mut substream(seed, 0));
    indices
        .iter()
        .map(|&idx| Ok(MagnitudeEstimate::from_v(idx, estimate_v_counts(d, &counts, idx)?, cfg)))
        .collect()
}

/// [`algorithm1`] with sampling replaced by the exact outcome distribution.
pub fn algorithm1_exact(
    rho: &DensityMatrix,
    indices: &[DisplacementIndex],
    cfg: &LearnerConfig,
) -> Result<Vec<MagnitudeEstimate>> {
    cfg.validate()?;
    let d = Dimension::new(rho.dim())?;
    check_indices(d, indices)?;
    let dist = bell_distribution(rho, &rho.conj())?;
    Ok(indices.iter().map(|&idx| MagnitudeEstimate::from_v(idx, dist.expected_phase(idx), cfg)).collect())
}

/// Outcome distribution of measuring `ρ` in the eigenbasis of `D_{q,p}`.
///
/// Entry `k` is the probability of eigenvalue `ω^k`, from the spectral
/// projectors `P_k = (1/d) Σ_m ω^{−km} D^m` and `D^m = D_{mq,mp}`.
pub fn sign_outcome_distribution(rho: &DensityMatrix, idx: DisplacementIndex) -> Result<Vec<f64>> {
    let d = Dimension::new(rho.dim())?;
    let n = d.get();
    let powers: Vec<Complex64> =
        (0..n).map(|m| displacement_trace(d, idx.scale(d, m), rho.matrix())).collect();
    let probs = (0..n)
        .map(|k| {
            let s: Complex64 = powers.iter().enumerate().map(|(m, y)| omega_pow(n, -((k * m) as i64)) * y).sum();
            (s.re / n as f64).max(0.0)
        })
        .collect::<Vec<_>>();
    let total: f64 = probs.iter().sum();
    Ok(probs.into_iter().map(|p| p / total).collect())
}

/// Mean eigenvalue over `n` simulated single-copy measurements in the eigenbasis of `D_{q,p}`.
pub fn measure_sign_samples(rho: &DensityMatrix, idx: DisplacementIndex, n: usize, seed: u64) -> Result<Complex64> {
    measure_sign_with(rho, idx, n, &mut substream(seed, 0))
}

fn measure_sign_with<R: RngCore + ?Sized>(
    rho: &DensityMatrix,
    idx: DisplacementIndex,
    n: usize,
    rng: &mut R,
) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::InvalidParameter("sign measurement needs n ≥ 1".into()));
    }
    let d = rho.dim();
    let cdf = cumulative(&sign_outcome_distribution(rho, idx)?);
    let mut counts = alloc::vec![0u64; d];
    for _ in 0..n {
        counts[sample_cdf(rng, &cdf)] += 1;
    }
    let sum: Complex64 = counts.iter().enumerate().map(|(k, &c)| omega_pow(d, k as i64) * c as f64).sum();
    Ok(sum / n as f64)
}

/// `exp(−β S) / Tr exp(−β S)` for Hermitian `S`.
pub fn gibbs_state(total_loss: &ComplexMatrix, beta: f64) -> DensityMatrix {
    let eig = total_loss.hermitian_eigen();
    let lo = eig.values[0];
    let weights: Vec<f64> = eig.values.iter().map(|&x| libm::exp(-beta * (x - lo))).collect();
    let z: f64 = weights.iter().sum();
    let weights: Vec<f64> = weights.iter().map(|w| w / z).collect();
    let m = spectral_sum(&eig.vectors, &weights);
    // Symmetrise away rounding so downstream Hermiticity checks stay tight.
    DensityMatrix::new_unchecked((&m + &m.dagger()).scale(0.5.into()))
}

/// Matrix multiplicative weights: `ω = exp(−β Σ M) / Tr(·)`.
pub fn mmw_update(loss_history: &[ComplexMatrix], beta: f64, d: Dimension) -> Result<DensityMatrix> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("beta = {beta} must be positive")));
    }
    let n = d.get();
    let mut total = ComplexMatrix::zeros(n);
    for m in loss_history {
        if m.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: m.dim() });
        }
        let defect = m.hermiticity_defect();
        if defect > 1e-9 {
            return Err(Error::NotHermitian(defect));
        }
        let ev = m.eigenvalues_hermitian();
        let norm = ev[0].abs().max(ev[n - 1].abs());
        if norm > 1.0 + 1e-9 {
            return Err(Error::InvalidParameter(format!("loss operator norm {norm} exceeds 1")));
        }
        total = &total + m;
    }
    Ok(gibbs_state(&total, beta))
}

/// `T = ⌈16 ln d / ε²⌉`.
pub fn hypothesis_bound(d: Dimension, epsilon: f64) -> usize {
    libm::ceil(16.0 * libm::log(d.get() as f64) / (epsilon * epsilon)) as usize
}

/// Diagnostics accumulated over the ERROR events of [`find_hypothesis`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RegretRecord {
    /// `Σ_t Tr(M_t ω_t) − Tr(M_t ρ)`.
    pub loss_gap: f64,
    /// `Σ_t β Tr(M_t² ω_t)`.
    pub quadratic_penalty: f64,
    /// `Σ_t |Tr(D_t ω_t) − Tr(D_t ρ)|`.
    pub amplitude_gap: f64,
    /// `2 √(ln d · T)`.
    pub bound: f64,
    pub beta: f64,
    pub log_d: f64,
}

impl RegretRecord {
    /// Right-hand side of the MMW regret inequality, `β Σ Tr(M² ω) + ln d / β`.
    pub fn mmw_rhs(&self) -> f64 {
        self.quadratic_penalty + self.log_d / self.beta
    }
}

#[derive(Clone, Debug)]
pub struct HypothesisState {
    pub omega: DensityMatrix,
    pub error_count: usize,
    /// Sign `s` minimising `|Tr(D ω) − s û|` for each tracked index.
    pub sign_guesses: Vec<(DisplacementIndex, Sign)>,
    /// `T = ⌈16 ln d / ε²⌉`.
    pub error_bound: usize,
    /// Set when more than `T` errors were needed.
    pub exceeded_bound: bool,
    pub regret: RegretRecord,
}

/// Hypothesis closeness per unit of precision, `√2/(2√3)`.
pub const HYPOTHESIS_CLOSENESS: f64 = 0.408_248_290_463_863;

/// Hypothesis search: a state `ω` with `min_s |Tr(D_j ω) − s û_j| < HYPOTHESIS_CLOSENESS·ε` for every
/// tracked index. The mistake bound and sign shots use `ε` itself.
///
/// `cfg.epsilon` is the precision of this search.
pub fn find_hypothesis(
    rho: &DensityMatrix,
    estimates: &[MagnitudeEstimate],
    cfg: &LearnerConfig,
    seed: u64,
) -> Result<HypothesisState> {
    cfg.validate()?;
    let d = Dimension::new(rho.dim())?;
    let n = d.get();
    let eps = cfg.epsilon;
    let closeness = HYPOTHESIS_CLOSENESS * eps;
    let tracked: Vec<(DisplacementIndex, Complex64)> =
        estimates.iter().filter_map(|e| e.u_hat.map(|u| (e.idx, u))).collect();
    check_indices(d, &tracked.iter().map(|t| t.0).collect::<Vec<_>>())?;

    let t_bound = hypothesis_bound(d, eps);
    let log_d = libm::log(n as f64);
    let beta = libm::sqrt(log_d / t_bound as f64);
    let sign_shots = libm::ceil(25.0 / (eps * eps)) as usize;
    let mut regret = RegretRecord { bound: 2.0 * libm::sqrt(log_d * t_bound as f64), beta, log_d, ..Default::default() };

    let mut omega = DensityMatrix::maximally_mixed(n);
    let mut total_loss = ComplexMatrix::zeros(n);
    let mut errors = 0usize;
    loop {
        let mut clean = true;
        for &(idx, u) in &tracked {
            let y_tilde = displacement_trace(d, idx, omega.matrix());
            if (y_tilde - u).norm().min((y_tilde + u).norm()) < closeness {
                continue;
            }
            clean = false;
            errors += 1;
            if errors > t_bound + 1 {
                return Err(Error::TheoryViolation { errors, limit: t_bound + 1 });
            }
            let mean = measure_sign_with(rho, idx, sign_shots, &mut substream(child_seed(seed, errors as u64), 0))?;
            let r = Sign::of((mean.conj() * u).re).value();
            let c = y_tilde - u * r;
            let dm = displacement(d, idx);
            let loss = (&dm.scale(c.conj()) + &dm.dagger().scale(c)).scale((0.5 / c.norm()).into());

            let y = displacement_trace(d, idx, rho.matrix());
            regret.loss_gap += ((c.conj() * y_tilde).re - (c.conj() * y).re) / c.norm();
            regret.quadratic_penalty += beta * loss.matmul(&loss).trace_product(omega.matrix()).re;
            regret.amplitude_gap += (y_tilde - y).norm();

            total_loss = &total_loss + &loss;
            omega = gibbs_state(&total_loss, beta);
        }
        if clean {
            break;
        }
    }

    let sign_guesses = tracked
        .iter()
        .map(|&(idx, u)| {
            let y_tilde = displacement_trace(d, idx, omega.matrix());
            let s = if (y_tilde - u).norm() <= (y_tilde + u).norm() { Sign::Plus } else { Sign::Minus };
            (idx, s)
        })
        .collect();
    Ok(HypothesisState {
        omega,
        error_count: errors,
        sign_guesses,
        error_bound: t_bound,
        exceeded_bound: errors > t_bound,
        regret,
    })
}

/// Wraps an angle into `(−π, π]`.
fn wrap_angle(x: f64) -> f64 {
    let mut y = x % (2.0 * PI);
    if y <= -PI {
        y += 2.0 * PI;
    } else if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// Sign resolution with a hypothesis already in hand.
pub fn resolve_signs(
    rho: &DensityMatrix,
    estimates: &[MagnitudeEstimate],
    hypothesis: &HypothesisState,
    cfg: &LearnerConfig,
    seed: u64,
) -> Result<Vec<SignedEstimate>> {
    let d = Dimension::new(rho.dim())?;
    let dist: BellDistribution = bell_distribution(rho, &hypothesis.omega.conj())?;
    let counts = dist.histogram_with(cfg.sample_count(estimates.len()), &mut substream(seed, 0));
    let mut out = Vec::new();
    for (idx, s) in &hypothesis.sign_guesses {
        let u = match estimates.iter().find(|e| e.idx == *idx).and_then(|e| e.u_hat) {
            Some(u) => u,
            None => continue,
        };
        let v = estimate_v_counts(d, &counts, *idx)?;
        let aligned = wrap_angle(v.arg() - 2.0 * u.arg()).abs() <= PI / 2.0;
        let r = if aligned { s.value() } else { -s.value() };
        out.push(SignedEstimate { idx: *idx, y_hat: u * r });
    }
    Ok(out)
}

/// Signs of the non-null estimates, which were produced at precision `ε/2`.
///
/// Runs [`find_hypothesis`] at precision `ε/2`; null estimates are omitted from the output.
pub fn algorithm2(
    rho: &DensityMatrix,
    estimates: &[MagnitudeEstimate],
    cfg: &LearnerConfig,
    seed: u64,
) -> Result<Vec<SignedEstimate>> {
    Ok(algorithm2_with_hypothesis(rho, estimates, cfg, seed)?.0)
}

pub fn algorithm2_with_hypothesis(
    rho: &DensityMatrix,
    estimates: &[MagnitudeEstimate],
    cfg: &LearnerConfig,
    seed: u64,
) -> Result<(Vec<SignedEstimate>, Option<HypothesisState>)> {
    cfg.validate()?;
    if estimates.iter().all(|e| e.u_hat.is_none()) {
        return Ok((Vec::new(), None));
    }
    let hyp = find_hypothesis(rho, estimates, &cfg.at_precision(cfg.epsilon / 2.0), child_seed(seed, 0))?;
    let signed = resolve_signs(rho, estimates, &hyp, cfg, child_seed(seed, 1))?;
    Ok((signed, Some(hyp)))
}

/// Output of the full pipeline: magnitudes at `ε/2`, then sign resolution at `ε`.
#[derive(Clone, Debug)]
pub struct LearnReport {
    pub magnitudes: Vec<MagnitudeEstimate>,
    pub signed: Vec<SignedEstimate>,
    pub hypothesis: Option<HypothesisState>,
    /// Learned `ŷ`, with zero for null indices.
    pub table: AmplitudeTable,
}

impl LearnReport {
    /// Largest `|ŷ − y|` against the exact amplitudes of `rho`.
    pub fn max_error(&self, rho: &DensityMatrix) -> Result<f64> {
        let exact = amplitudes(rho)?;
        Ok(self
            .table
            .iter()
            .map(|(idx, y_hat)| (y_hat - exact.get(idx).unwrap_or_default()).norm())
            .fold(0.0, f64::max))
    }
}

/// Learns signed amplitudes for `indices`.
pub fn learn_amplitudes(
    rho: &DensityMatrix,
    indices: &[DisplacementIndex],
    cfg: &LearnerConfig,
    seed: u64,
) -> Result<LearnReport> {
    cfg.validate()?;
    let d = Dimension::new(rho.dim())?;
    let magnitudes = algorithm1(rho, indices, &cfg.at_precision(cfg.epsilon / 2.0), child_seed(seed, 0))?;
    let (signed, hypothesis) = algorithm2_with_hypothesis(rho, &magnitudes, cfg, child_seed(seed, 1))?;
    let mut table = AmplitudeTable::new(d);
    for m in &magnitudes {
        table.set(m.idx, Complex64::new(0.0, 0.0));
    }
    for s in &signed {
        table.set(s.idx, s.y_hat);
    }
    Ok(LearnReport { magnitudes, signed, hypothesis, table })
}
