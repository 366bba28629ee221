//! Many-vs-one distinguishing trials, sample-complexity scans and
//! operator-norm checks.
//!
//! A trial flips a fair coin: NO prepares `I/d`, YES prepares the spiked state
//! `(I + rεE_{q,p})/d` for a uniform `(q,p) ≠ (0,0)` and sign `r`. The chosen
//! protocol then decides from `n` samples.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;
use rand::RngCore;

use crate::bell::bell_distribution;
use crate::clifford::shadows::{displacement_coefficients, draw_frame_snapshot};
use crate::clifford::synthesis::CliffordCache;
use crate::field::{Dimension, DisplacementIndex, MAX_TENSOR_DIMENSION};
use crate::learner::{weighted_phase, LearnerConfig};
use crate::matrix::ComplexMatrix;
use crate::qudit::{displacement, displacement_observable, displacement_phase, omega_pow, tensor_dimension};
use crate::rng::{child_seed, substream, uniform_below};
use crate::state::{random_mixed, spiked_state, DensityMatrix, Sign};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ProtocolKind {
    /// Bell measurements on `ρ ⊗ ρ*`.
    ConjugateBell,
    /// Clifford shadows of `ρ`.
    SingleCopyShadow,
    /// Clifford shadows alternating between `ρ` and `ρ*`.
    SingleCopyWithConjugate,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 3] =
        [ProtocolKind::ConjugateBell, ProtocolKind::SingleCopyShadow, ProtocolKind::SingleCopyWithConjugate];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::ConjugateBell => "conjugate_bell",
            ProtocolKind::SingleCopyShadow => "single_copy_shadow",
            ProtocolKind::SingleCopyWithConjugate => "single_copy_with_conjugate",
        }
    }

    fn ordinal(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ProtocolKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidParameter(alloc::format!("unknown protocol {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Decision {
    #[cfg_attr(feature = "serde", serde(rename = "YES"))]
    Yes,
    #[cfg_attr(feature = "serde", serde(rename = "NO"))]
    No,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Yes => "YES",
            Decision::No => "NO",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrialRecord {
    pub d: Dimension,
    pub epsilon: f64,
    pub protocol: ProtocolKind,
    pub n_samples: usize,
    pub decision: Decision,
    pub truth: Decision,
    pub seed: u64,
    /// The protocol's test statistic, compared against its threshold.
    pub statistic: f64,
}

impl TrialRecord {
    pub fn correct(&self) -> bool {
        self.decision == self.truth
    }
}

/// Threshold on `max |v̂|`: the magnitude learner's null cut at precision `ε/2`.
pub fn conjugate_threshold(eps: f64) -> f64 {
    LearnerConfig { epsilon: eps / 2.0, delta: 0.5, sample_multiplier: 1.0 }.null_threshold()
}

/// Threshold `ε/2` on `max |ê_{q,p}|` for the shadow protocols.
pub fn shadow_threshold(eps: f64) -> f64 {
    eps / 2.0
}

/// Secretly prepared state of one trial.
fn prepare<R: RngCore + ?Sized>(d: Dimension, eps: f64, rng: &mut R) -> Result<(Decision, DensityMatrix)> {
    if rng.next_u32() & 1 == 0 {
        return Ok((Decision::No, DensityMatrix::maximally_mixed(d.get())));
    }
    let n = d.get();
    let idx = DisplacementIndex::from_flat(d, 1 + uniform_below(rng, n * n - 1));
    let sign = if rng.next_u32() & 1 == 0 { Sign::Plus } else { Sign::Minus };
    Ok((Decision::Yes, spiked_state(d, idx, sign, eps)?))
}

fn conjugate_statistic(d: Dimension, rho: &DensityMatrix, n: usize, seed: u64) -> Result<f64> {
    let dist = bell_distribution(rho, &rho.conj())?;
    let counts = dist.histogram_with(n, &mut substream(seed, 1));
    let weights: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    Ok(d.nonzero_indices().map(|v| weighted_phase(d, &weights, v).norm()).fold(0.0, f64::max))
}

fn shadow_statistic(
    cache: &CliffordCache,
    rho: &DensityMatrix,
    n: usize,
    seed: u64,
    with_conjugate: bool,
) -> Result<f64> {
    let d = cache.dimension();
    let dd = d.get() * d.get();
    let direct = displacement_coefficients(rho)?;
    let mirrored = displacement_coefficients(&rho.conj())?;
    let mut rng = substream(seed, 1);
    let mut sums = alloc::vec![0.0f64; dd];
    for t in 0..n {
        let from_conjugate = with_conjugate && t % 2 == 1;
        let coeffs = if from_conjugate { &mirrored } else { &direct };
        let snap = draw_frame_snapshot(cache, coeffs, &mut rng)?;
        for (k, s) in snap.values.iter().enumerate().skip(1) {
            let image = snap.generator.scale(d, k);
            let (slot, s) = if from_conjugate {
                // ⟨w*|D_x|w*⟩ = conj(λ ⟨w|D_{x'}|w⟩) with D_x* = λ D_{x'}, x = (q', −p')
                let x = DisplacementIndex { q: image.q, p: d.neg(image.p) };
                let lambda = displacement_phase(d, x).conj() / displacement_phase(d, image);
                (x, (lambda * s).conj())
            } else {
                (image, *s)
            };
            // ô(E_v) = (d+1)·2 Re(χ ⟨w|D_v|w⟩)
            sums[slot.flat(d)] += s.re - s.im;
        }
    }
    let scale = (d.get() as f64 + 1.0) / n as f64;
    Ok(sums.iter().skip(1).map(|s| (s * scale).abs()).fold(0.0, f64::max))
}

/// One distinguishing trial, reusing a prepared Clifford cache.
pub fn distinguishing_trial_cached(
    cache: &CliffordCache,
    eps: f64,
    protocol: ProtocolKind,
    n: usize,
    seed: u64,
) -> Result<TrialRecord> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(alloc::format!("eps = {eps} must lie in (0, 1)")));
    }
    let d = cache.dimension();
    let (truth, rho) = prepare(d, eps, &mut substream(seed, 0))?;
    let (statistic, threshold) = if n == 0 {
        (0.0, f64::INFINITY)
    } else {
        match protocol {
            ProtocolKind::ConjugateBell => (conjugate_statistic(d, &rho, n, seed)?, conjugate_threshold(eps)),
            ProtocolKind::SingleCopyShadow => (shadow_statistic(cache, &rho, n, seed, false)?, shadow_threshold(eps)),
            ProtocolKind::SingleCopyWithConjugate => {
                (shadow_statistic(cache, &rho, n, seed, true)?, shadow_threshold(eps))
            }
        }
    };
    let decision = if statistic > threshold { Decision::Yes } else { Decision::No };
    Ok(TrialRecord { d, epsilon: eps, protocol, n_samples: n, decision, truth, seed, statistic })
}

pub fn distinguishing_trial(d: Dimension, eps: f64, protocol: ProtocolKind, n: usize, seed: u64) -> Result<TrialRecord> {
    let cache = match protocol {
        ProtocolKind::ConjugateBell => CliffordCache::empty(d),
        _ => CliffordCache::new(d)?,
    };
    distinguishing_trial_cached(&cache, eps, protocol, n, seed)
}

/// Executes independent seeded jobs; implementations may run them in parallel.
pub trait TrialRunner {
    fn run<T, F>(&self, seeds: &[u64], job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send;
}

/// Runs jobs one after another on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct SequentialRunner;

impl TrialRunner for SequentialRunner {
    fn run<T, F>(&self, seeds: &[u64], job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        seeds.iter().map(|&s| job(s)).collect()
    }
}

/// Seeds of `trials` independent trials under `seed`.
pub fn trial_seeds(seed: u64, trials: usize) -> Vec<u64> {
    (0..trials as u64).map(|t| child_seed(seed, t)).collect()
}

/// All records of `trials` trials at one sample size.
pub fn run_trials<R: TrialRunner>(
    runner: &R,
    cache: &CliffordCache,
    eps: f64,
    protocol: ProtocolKind,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<TrialRecord>> {
    runner
        .run(&trial_seeds(seed, trials), |s| distinguishing_trial_cached(cache, eps, protocol, n, s))
        .into_iter()
        .collect()
}

/// Fraction of correct decisions.
pub fn success_rate(records: &[TrialRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().filter(|r| r.correct()).count() as f64 / records.len() as f64
}

/// Sample grid and success target of a scan.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScanSettings {
    pub start: usize,
    pub max: usize,
    pub target: f64,
}

impl Default for ScanSettings {
    fn default() -> Self {
        ScanSettings { start: 16, max: 1 << 20, target: 0.9 }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalingRow {
    pub d: Dimension,
    pub protocol: ProtocolKind,
    /// Smallest probed sample size reaching the target, `None` if the grid ran out.
    pub samples_to_success: Option<usize>,
    /// Every probed `(n, success rate)` in probe order.
    pub probes: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalingReport {
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
    pub settings: ScanSettings,
    /// Grid description, `n = start·2^k` refined once by bisection.
    pub grid: String,
    pub rows: Vec<ScalingRow>,
}

/// Seed shared by every probe of one `(d, protocol)` point.
pub fn point_seed(seed: u64, d: Dimension, protocol: ProtocolKind) -> u64 {
    child_seed(child_seed(seed, d.get() as u64), protocol.ordinal())
}

fn scan_point<R: TrialRunner>(
    runner: &R,
    cache: &CliffordCache,
    eps: f64,
    protocol: ProtocolKind,
    trials: usize,
    seed: u64,
    settings: &ScanSettings,
) -> Result<ScalingRow> {
    let mut probes = Vec::new();
    let rate_at = |n: usize, probes: &mut Vec<(usize, f64)>| -> Result<f64> {
        let rate = success_rate(&run_trials(runner, cache, eps, protocol, n, trials, seed)?);
        probes.push((n, rate));
        Ok(rate)
    };
    let mut below = None;
    let mut n = settings.start.max(1);
    let mut found = None;
    while n <= settings.max {
        if rate_at(n, &mut probes)? >= settings.target {
            found = Some(n);
            break;
        }
        below = Some(n);
        n *= 2;
    }
    if let (Some(hi), Some(lo)) = (found, below) {
        let mid = (lo + hi) / 2;
        if mid > lo && mid < hi && rate_at(mid, &mut probes)? >= settings.target {
            found = Some(mid);
        }
    }
    Ok(ScalingRow { d: cache.dimension(), protocol, samples_to_success: found, probes })
}

pub fn scaling_scan_with<R: TrialRunner>(
    runner: &R,
    dims: &[Dimension],
    eps: f64,
    protocols: &[ProtocolKind],
    trials: usize,
    seed: u64,
    settings: ScanSettings,
) -> Result<ScalingReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let mut rows = Vec::new();
    for &d in dims {
        let needs_shadows = protocols.iter().any(|p| *p != ProtocolKind::ConjugateBell);
        let cache = if needs_shadows { CliffordCache::new(d)? } else { CliffordCache::empty(d) };
        for &protocol in protocols {
            rows.push(scan_point(runner, &cache, eps, protocol, trials, point_seed(seed, d, protocol), &settings)?);
        }
    }
    Ok(ScalingReport {
        epsilon: eps,
        trials,
        seed,
        settings,
        grid: alloc::format!("n = {}·2^k up to {}, one bisection step", settings.start, settings.max),
        rows,
    })
}

pub fn scaling_scan<R: TrialRunner>(
    runner: &R,
    dims: &[Dimension],
    eps: f64,
    protocols: &[ProtocolKind],
    trials: usize,
    seed: u64,
) -> Result<ScalingReport> {
    scaling_scan_with(runner, dims, eps, protocols, trials, seed, ScanSettings::default())
}

/// Sparse matrix with one nonzero per column: `M|j⟩ = phase[j] |target[j]⟩`.
#[derive(Clone, Debug, PartialEq)]
struct Monomial {
    target: Vec<usize>,
    phase: Vec<Complex64>,
}

impl Monomial {
    fn displacement(d: Dimension, idx: DisplacementIndex) -> Self {
        let n = d.get();
        let phi = displacement_phase(d, idx);
        Monomial {
            target: (0..n).map(|j| (j + idx.q) % n).collect(),
            phase: (0..n).map(|j| phi * omega_pow(n, (j * idx.p) as i64)).collect(),
        }
    }

    fn transpose(&self) -> Self {
        let n = self.target.len();
        let mut target = alloc::vec![0; n];
        let mut phase = alloc::vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            target[self.target[j]] = j;
            phase[self.target[j]] = self.phase[j];
        }
        Monomial { target, phase }
    }

    fn kron(&self, other: &Self) -> Self {
        let m = other.target.len();
        let mut target = Vec::with_capacity(self.target.len() * m);
        let mut phase = Vec::with_capacity(self.target.len() * m);
        for (i, &a) in self.target.iter().enumerate() {
            for (j, &b) in other.target.iter().enumerate() {
                target.push(a * m + b);
                phase.push(self.phase[i] * other.phase[j]);
            }
        }
        Monomial { target, phase }
    }

    /// `self · rhs`.
    fn compose(&self, rhs: &Self) -> Self {
        Monomial {
            target: rhs.target.iter().map(|&t| self.target[t]).collect(),
            phase: rhs.target.iter().zip(&rhs.phase).map(|(&t, &c)| c * self.phase[t]).collect(),
        }
    }

    /// Frobenius norm of `self − other`.
    fn distance(&self, other: &Self) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.target.len() {
            if self.target[j] == other.target[j] {
                acc += (self.phase[j] - other.phase[j]).norm_sqr();
            } else {
                acc += self.phase[j].norm_sqr() + other.phase[j].norm_sqr();
            }
        }
        libm::sqrt(acc)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CommutationReport {
    /// Largest `‖[D_v ⊗ D_vᵀ, D_u ⊗ D_uᵀ]‖_F` over all pairs.
    pub max_commutator_norm: f64,
    /// Largest `|Tr((D ⊗ Dᵀ)(ρ ⊗ ρ*)) − Tr(Dρ)²|` over the random states.
    pub max_trace_defect: f64,
    /// `‖[D_{1,0}, D_{0,1}]‖_F`, which should equal `|ω − 1|·√d`.
    pub bare_commutator_norm: f64,
}

/// Commutation of the family `D_{q,p} ⊗ D_{−q,p}` and the conjugate-pair trace identity.
///
/// The second factor is taken as `D_{q,p}ᵀ`, which equals `D_{−q,p}` for odd `d`
/// and agrees with it up to sign for `d = 2`.
pub fn tensor_commutation_check(d: Dimension, seed: u64) -> Result<CommutationReport> {
    if d.get() > 13 {
        return Err(Error::DimensionCap { dim: d.get(), cap: 13 });
    }
    let family: Vec<Monomial> = d
        .indices()
        .map(|v| {
            let m = Monomial::displacement(d, v);
            m.kron(&m.transpose())
        })
        .collect();
    let mut max_commutator_norm: f64 = 0.0;
    for (i, a) in family.iter().enumerate() {
        for b in &family[i + 1..] {
            max_commutator_norm = max_commutator_norm.max(a.compose(b).distance(&b.compose(a)));
        }
    }
    let mut rng = substream(seed, 0);
    let mut max_trace_defect: f64 = 0.0;
    for _ in 0..3 {
        let rho = random_mixed(d.get(), d.get(), &mut rng);
        let joint = rho.tensor(&rho.conj());
        for v in d.indices() {
            let dv = displacement(d, v);
            let pair = dv.kron(&dv.transpose());
            let lhs = joint.expectation(&pair);
            let y = rho.expectation(&dv);
            max_trace_defect = max_trace_defect.max((lhs - y * y).norm());
        }
    }
    let x = Monomial::displacement(d, DisplacementIndex { q: 1, p: 0 });
    let z = Monomial::displacement(d, DisplacementIndex { q: 0, p: 1 });
    let bare_commutator_norm = x.compose(&z).distance(&z.compose(&x));
    Ok(CommutationReport { max_commutator_norm, max_trace_defect, bare_commutator_norm })
}

fn check_norm_args(d: Dimension, k: usize) -> Result<usize> {
    if d.get() == 2 {
        return Err(Error::InvalidParameter("norm lemmas need an odd prime d".into()));
    }
    if k == 0 || k % 2 == 1 {
        return Err(Error::InvalidParameter(alloc::format!("k = {k} must be a positive even integer")));
    }
    let total = tensor_dimension(d, k)?;
    debug_assert!(total <= MAX_TENSOR_DIMENSION);
    Ok(total)
}

fn kron_power(factors: &[ComplexMatrix]) -> ComplexMatrix {
    factors.iter().fold(ComplexMatrix::identity(1), |acc, f| acc.kron(f))
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NormLemmaReport {
    pub d: Dimension,
    pub m: usize,
    pub k: usize,
    pub op_norm: f64,
    pub is_permutation: bool,
}

/// Whether `a` has exactly one entry equal to one in each row and column, zeros elsewhere.
fn is_permutation_matrix(a: &ComplexMatrix, tol: f64) -> bool {
    let n = a.dim();
    let mut col_hits = alloc::vec![0usize; n];
    for i in 0..n {
        let mut row_hits = 0;
        for (j, z) in a.row(i).iter().enumerate() {
            if (z - 1.0).norm() <= tol {
                row_hits += 1;
                col_hits[j] += 1;
            } else if z.norm() > tol {
                return false;
            }
        }
        if row_hits != 1 {
            return false;
        }
    }
    col_hits.iter().all(|&c| c == 1)
}

/// `𝒟(m,k) = Σ_{q,p} D_{q,p}^{⊗m} ⊗ D_{−q,−p}^{⊗(k−m)}`.
pub fn displacement_sum(d: Dimension, m: usize, k: usize) -> Result<ComplexMatrix> {
    let total = check_norm_args(d, k)?;
    if m == 0 || m > k {
        return Err(Error::InvalidParameter(alloc::format!("m = {m} must satisfy 1 ≤ m ≤ k = {k}")));
    }
    let mut sum = ComplexMatrix::zeros(total);
    for v in d.indices() {
        let plus = displacement(d, v);
        let minus = displacement(d, v.neg(d));
        let factors: Vec<ComplexMatrix> = (0..k).map(|i| if i < m { plus.clone() } else { minus.clone() }).collect();
        sum = &sum + &kron_power(&factors);
    }
    Ok(sum)
}

pub fn norm_lemma_check(d: Dimension, m: usize, k: usize) -> Result<NormLemmaReport> {
    let sum = displacement_sum(d, m, k)?;
    let is_permutation = is_permutation_matrix(&sum.scale(Complex64::new(1.0 / d.get() as f64, 0.0)), 1e-9);
    Ok(NormLemmaReport { d, m, k, op_norm: sum.op_norm(), is_permutation })
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ENormReport {
    pub d: Dimension,
    pub k: usize,
    pub op_norm: f64,
    /// `2^{k/2}·d`.
    pub bound: f64,
    pub within_bound: bool,
    /// Whether the norm also stays below the conjectured `2d`.
    pub within_conjectured: bool,
}

/// `‖Σ_{q,p} E_{q,p}^{⊗k}‖_op` against `2^{k/2}·d`.
pub fn e_norm_check(d: Dimension, k: usize) -> Result<ENormReport> {
    let total = check_norm_args(d, k)?;
    let mut sum = ComplexMatrix::zeros(total);
    for v in d.indices() {
        let e = displacement_observable(d, v);
        let factors: Vec<ComplexMatrix> = (0..k).map(|_| e.clone()).collect();
        sum = &sum + &kron_power(&factors);
    }
    // Hermitian, so the operator norm is the largest |eigenvalue|.
    let op_norm = sum.eigenvalues_hermitian().iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let nf = d.get() as f64;
    let bound = libm::pow(2.0, k as f64 / 2.0) * nf;
    Ok(ENormReport {
        d,
        k,
        op_norm,
        bound,
        within_bound: op_norm <= bound + 1e-8,
        within_conjectured: op_norm <= 2.0 * nf + 1e-8,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dim(d: usize) -> Dimension {
        Dimension::new(d).unwrap()
    }

    #[test]
    fn protocol_names_round_trip() {
        for p in ProtocolKind::ALL {
            assert_eq!(p.name().parse::<ProtocolKind>().unwrap(), p);
        }
        assert!("bell".parse::<ProtocolKind>().is_err());
    }

    #[test]
    fn zero_samples_decide_no() {
        for p in ProtocolKind::ALL {
            for seed in 0..10 {
                assert_eq!(distinguishing_trial(dim(3), 0.5, p, 0, seed).unwrap().decision, Decision::No);
            }
        }
    }

    #[test]
    fn trials_are_reproducible() {
        for p in ProtocolKind::ALL {
            let a = distinguishing_trial(dim(5), 0.5, p, 200, 77).unwrap();
            assert_eq!(a, distinguishing_trial(dim(5), 0.5, p, 200, 77).unwrap());
        }
    }

    #[test]
    fn conjugate_no_and_yes_rates() {
        let d = dim(5);
        let cache = CliffordCache::empty(d);
        let eps = 0.5;
        let mut no_right = 0;
        let mut no_total = 0;
        let mut yes_right = 0;
        let mut yes_total = 0;
        let yes_n = libm::ceil(64.0 * libm::log(4.0 * 25.0) / libm::pow(eps, 4.0)) as usize;
        for s in trial_seeds(5, 400) {
            let r = distinguishing_trial_cached(&cache, eps, ProtocolKind::ConjugateBell, 10_000, s).unwrap();
            if r.truth == Decision::No {
                no_total += 1;
                no_right += r.correct() as usize;
            } else {
                let r = distinguishing_trial_cached(&cache, eps, ProtocolKind::ConjugateBell, yes_n, s).unwrap();
                yes_total += 1;
                yes_right += r.correct() as usize;
            }
        }
        assert!(no_right as f64 >= 0.95 * no_total as f64, "{no_right}/{no_total}");
        assert!(yes_right as f64 >= 0.9 * yes_total as f64, "{yes_right}/{yes_total}");
    }

    #[test]
    fn single_point_scan_has_one_row() {
        let report = scaling_scan(&SequentialRunner, &[dim(3)], 0.5, &[ProtocolKind::ConjugateBell], 1, 4).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!(report.rows[0].samples_to_success.is_some());
    }

    #[test]
    fn displacement_sums_are_scaled_permutations() {
        for (d, m, k) in [(3, 1, 2), (5, 2, 2), (3, 2, 4), (3, 4, 4), (5, 1, 4)] {
            let r = norm_lemma_check(dim(d), m, k).unwrap();
            assert!(r.is_permutation, "{r:?}");
            assert!((r.op_norm - d as f64).abs() < 1e-9, "{r:?}");
        }
        assert!(norm_lemma_check(dim(2), 1, 2).is_err());
        assert!(norm_lemma_check(dim(3), 1, 3).is_err());
        assert!(norm_lemma_check(dim(3), 0, 2).is_err());
        assert!(norm_lemma_check(dim(11), 1, 4).is_err());
    }

    #[test]
    fn e_norms_within_bound() {
        for (d, k) in [(3, 2), (3, 4), (5, 2)] {
            let r = e_norm_check(dim(d), k).unwrap();
            assert!(r.within_bound, "{r:?}");
        }
    }

    #[test]
    fn commuting_family() {
        for d in [2, 3, 5] {
            let r = tensor_commutation_check(dim(d), 1).unwrap();
            assert!(r.max_commutator_norm < 1e-10, "{r:?}");
            assert!(r.max_trace_defect < 1e-10, "{r:?}");
            let omega = omega_pow(d, 1);
            assert!((r.bare_commutator_norm - (omega - 1.0).norm() * libm::sqrt(d as f64)).abs() < 1e-9);
        }
    }

    fn dense_statistic(cache: &CliffordCache, rho: &DensityMatrix, n: usize, seed: u64, with_conjugate: bool) -> f64 {
        use crate::clifford::shadows::{displacement_snapshot, draw_snapshot};
        let d = cache.dimension();
        let conj = rho.conj();
        let mut rng = substream(seed, 1);
        let mut sums = alloc::vec![0.0f64; d.get() * d.get()];
        for t in 0..n {
            let from_conjugate = with_conjugate && t % 2 == 1;
            let (_, mut w) = draw_snapshot(cache, if from_conjugate { &conj } else { rho }, &mut rng).unwrap();
            if from_conjugate {
                w.iter_mut().for_each(|z| *z = z.conj());
            }
            for (sum, s) in sums.iter_mut().zip(displacement_snapshot(d, &w)) {
                *sum += s.re - s.im;
            }
        }
        let scale = (d.get() as f64 + 1.0) / n as f64;
        sums.iter().skip(1).map(|s| (s * scale).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn sparse_statistic_matches_dense() {
        let mut rng = substream(21, 0);
        for n in [2, 3, 5, 7] {
            let cache = CliffordCache::new(dim(n)).unwrap();
            let rho = random_mixed(n, n, &mut rng);
            for with_conjugate in [false, true] {
                let fast = shadow_statistic(&cache, &rho, 200, 9, with_conjugate).unwrap();
                let slow = dense_statistic(&cache, &rho, 200, 9, with_conjugate);
                assert!((fast - slow).abs() < 1e-9, "d={n} conj={with_conjugate}: {fast} vs {slow}");
            }
        }
    }
}
