//! Numerical invariant suites.
//!
//! Every check reports the largest deviation it saw next to its tolerance, so
//! callers can print or serialize results without re-running anything.

use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::bell::{bell_circuit_check, bell_distribution, bell_eigenvalue, bell_state, BellOutcome};
use crate::clifford::shadows::{exhaustive_moments, inverse_channel, measurement_channel, averaged_measurement_channel};
use crate::clifford::synthesis::{conjugation_defect, sample_clifford_with, CliffordCache, CliffordElement};
use crate::clifford::symplectic::enumerate_symplectic;
use crate::experiments::tensor_commutation_check;
use crate::field::{Dimension, DisplacementIndex};
use crate::matrix::{inner, ComplexMatrix};
use crate::qudit::{
    displacement, displacement_lifted, displacement_observable, displacement_observable_lifted, displacement_phase,
    displacement_trace, omega_pow,
};
use crate::rng::substream;
use crate::state::{amplitudes, bloch_reconstruct, random_matrix, random_mixed};

/// Tolerance of the exact algebraic identities.
pub const ALGEBRA_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CheckResult {
    pub name: String,
    pub d: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    pub fn new(name: &str, d: Dimension, max_deviation: f64, tolerance: f64) -> Self {
        CheckResult {
            name: name.into(),
            d: d.get(),
            max_deviation,
            tolerance,
            passed: max_deviation.is_finite() && max_deviation <= tolerance,
        }
    }

    /// A yes/no check, reported as deviation 0 or 1.
    pub fn flag(name: &str, d: Dimension, ok: bool) -> Self {
        CheckResult::new(name, d, if ok { 0.0 } else { 1.0 }, 0.0)
    }
}

fn lifted(v: DisplacementIndex) -> (i64, i64) {
    (v.q as i64, v.p as i64)
}

/// `D† = D_{−q,−p}`, `D* = D_{q,−p}`, `Dᵀ = D_{−q,p}` and `D^k = D_{kq,kp}` over integer lifts.
fn lifted_identities(d: Dimension) -> [f64; 4] {
    let n = d.get() as i64;
    let mut worst = [0.0f64; 4];
    for v in d.indices() {
        let (q, p) = lifted(v);
        let m = displacement_lifted(d, q, p);
        worst[0] = worst[0].max(m.dagger().max_abs_diff(&displacement_lifted(d, -q, -p)));
        worst[1] = worst[1].max(m.conj().max_abs_diff(&displacement_lifted(d, q, -p)));
        worst[2] = worst[2].max(m.transpose().max_abs_diff(&displacement_lifted(d, -q, p)));
        let mut power = ComplexMatrix::identity(d.get());
        for k in 0..=n {
            worst[3] = worst[3].max(power.max_abs_diff(&displacement_lifted(d, k * q, k * p)));
            power = power.matmul(&m);
        }
    }
    worst
}

/// The same identities with every index reduced mod `d`.
fn reduced_identities(d: Dimension) -> [f64; 4] {
    let n = d.get();
    let mut worst = [0.0f64; 4];
    for v in d.indices() {
        let m = displacement(d, v);
        worst[0] = worst[0].max(m.dagger().max_abs_diff(&displacement(d, v.neg(d))));
        worst[1] = worst[1].max(m.conj().max_abs_diff(&displacement(d, DisplacementIndex::new(d, v.q as i64, -(v.p as i64)))));
        worst[2] = worst[2].max(m.transpose().max_abs_diff(&displacement(d, DisplacementIndex::new(d, -(v.q as i64), v.p as i64))));
        let mut power = ComplexMatrix::identity(n);
        for k in 0..=n {
            worst[3] = worst[3].max(power.max_abs_diff(&displacement(d, v.scale(d, k))));
            power = power.matmul(&m);
        }
    }
    worst
}

/// `D_{v'} D_v = ω^{qp' − q'p} D_v D_{v'}` for every pair.
fn commutation_defect(d: Dimension) -> f64 {
    let n = d.get();
    let mats: Vec<ComplexMatrix> = d.indices().map(|v| displacement(d, v)).collect();
    let mut worst: f64 = 0.0;
    for v in d.indices() {
        for w in d.indices() {
            let (a, b) = (&mats[v.flat(d)], &mats[w.flat(d)]);
            let phase = omega_pow(n, (v.q * w.p) as i64 - (w.q * v.p) as i64);
            worst = worst.max(b.matmul(a).max_abs_diff(&a.matmul(b).scale(phase)));
        }
    }
    worst
}

/// `Tr(D_v† D_w) = d δ_{v,w}`.
fn hs_orthogonality_defect(d: Dimension) -> f64 {
    let n = d.get() as f64;
    let mut worst: f64 = 0.0;
    for w in d.indices() {
        let dw = displacement(d, w);
        for v in d.indices() {
            let expected = if v == w { n } else { 0.0 };
            worst = worst.max((displacement_trace(d, v.neg(d), &dw) - expected).norm());
        }
    }
    worst
}

fn bell_gram_defect(d: Dimension) -> f64 {
    let n = d.get();
    let states: Vec<Vec<Complex64>> = (0..n * n).map(|k| bell_state(d, k / n, k % n)).collect();
    let mut worst: f64 = 0.0;
    for (i, u) in states.iter().enumerate() {
        for (j, v) in states.iter().enumerate() {
            let expected = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((inner(u, v) - expected).norm());
        }
    }
    worst
}

/// `(D_v ⊗ D_vᵀ)|Φ_{a,b}⟩ = ω^{ap − bq}|Φ_{a,b}⟩`, with `D_vᵀ = D_{−q,p}` for odd `d`.
fn bell_eigen_defect(d: Dimension) -> f64 {
    let n = d.get();
    let mut worst: f64 = 0.0;
    for v in d.indices() {
        // D|j⟩ = c_j |j+q⟩ and Dᵀ|l⟩ = c_{l−q} |l−q⟩
        let phi = displacement_phase(d, v);
        let c: Vec<Complex64> = (0..n).map(|j| phi * omega_pow(n, (j * v.p) as i64)).collect();
        for k in 0..n * n {
            let out = BellOutcome::from_flat(d, k);
            let state = bell_state(d, out.a, out.b);
            let mut image = alloc::vec![Complex64::new(0.0, 0.0); n * n];
            for j in 0..n {
                for l in 0..n {
                    let amp = state[j * n + l];
                    if amp.norm() == 0.0 {
                        continue;
                    }
                    let lq = (l + n - v.q) % n;
                    image[((j + v.q) % n) * n + lq] += c[j] * c[lq] * amp;
                }
            }
            let lambda = bell_eigenvalue(d, v, out);
            for (x, y) in image.iter().zip(&state) {
                worst = worst.max((x - lambda * y).norm());
            }
        }
    }
    worst
}

/// `(P ⊗ P*) vec(Q) = vec(P Q P†) = ω^{ap − qb} vec(Q)` for `P = D_{q,p}`, `Q = D_{a,b}`.
fn vectorization_defect(d: Dimension) -> f64 {
    let n = d.get();
    let mats: Vec<ComplexMatrix> = d.indices().map(|v| displacement(d, v)).collect();
    let mut worst: f64 = 0.0;
    for v in d.indices() {
        let p = &mats[v.flat(d)];
        let pd = p.dagger();
        for w in d.indices() {
            let q = &mats[w.flat(d)];
            let alpha = omega_pow(n, (w.q * v.p) as i64 - (v.q * w.p) as i64);
            worst = worst.max(p.matmul(q).matmul(&pd).max_abs_diff(&q.scale(alpha)));
        }
    }
    worst
}

/// Largest `|Tr(Dρ)·Tr(Dᵀρ*) − Tr(Dρ)²|` and `|y*_v − y_{−v}|` on random states.
fn conjugate_pair_defects(d: Dimension, seed: u64) -> (f64, f64) {
    let mut rng = substream(seed, 0);
    let (mut trace, mut sym) = (0.0f64, 0.0f64);
    for _ in 0..3 {
        let rho = random_mixed(d.get(), d.get(), &mut rng);
        let conj = rho.conj();
        for v in d.indices() {
            let m = displacement(d, v);
            let y = rho.expectation(&m);
            trace = trace.max((y * conj.expectation(&m.transpose()) - y * y).norm());
        }
        sym = sym.max(amplitudes(&rho).map(|t| t.conjugation_defect()).unwrap_or(f64::INFINITY));
    }
    (trace, sym)
}

fn bloch_round_trip_defect(d: Dimension, seed: u64) -> f64 {
    let mut rng = substream(seed, 1);
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let rho = random_mixed(d.get(), 2.min(d.get()), &mut rng);
        worst = match amplitudes(&rho).and_then(|t| bloch_reconstruct(&t)) {
            Ok(r) => worst.max(r.matrix.max_abs_diff(rho.matrix())),
            Err(_) => f64::INFINITY,
        };
    }
    worst
}

/// Hermiticity, `‖E‖_op ≤ √2`, `Tr(E E') = d δ` and `E* = E_{−q,p}`.
fn observable_defects(d: Dimension) -> [f64; 4] {
    let n = d.get();
    let mats: Vec<ComplexMatrix> = d.indices().map(|v| displacement_observable(d, v)).collect();
    let mut worst = [0.0f64; 4];
    for v in d.indices() {
        let e = &mats[v.flat(d)];
        worst[0] = worst[0].max(e.hermiticity_defect());
        worst[1] = worst[1].max(e.op_norm() - core::f64::consts::SQRT_2);
        for w in d.indices() {
            let expected = if v == w { n as f64 } else { 0.0 };
            worst[2] = worst[2].max((e.trace_product(&mats[w.flat(d)]) - expected).norm());
        }
        let conj = if n == 2 {
            let (q, p) = lifted(v);
            displacement_observable_lifted(d, q, p).conj().max_abs_diff(&displacement_observable_lifted(d, -q, p))
        } else {
            let target = DisplacementIndex::new(d, -(v.q as i64), v.p as i64);
            e.conj().max_abs_diff(&mats[target.flat(d)])
        };
        worst[3] = worst[3].max(conj);
    }
    worst
}

/// The algebraic suite: operator identities, orthogonality and the Bell basis.
///
/// At `d = 2` the conjugate, transpose and power identities only hold over
/// integer lifts, so the reduced versions are checked for odd `d` alone.
pub fn algebraic_suite(d: Dimension) -> Vec<CheckResult> {
    let tol = ALGEBRA_TOL;
    let mut out = Vec::new();
    let lift = lifted_identities(d);
    out.push(CheckResult::new("dagger_lifted", d, lift[0], tol));
    out.push(CheckResult::new("conjugate_lifted", d, lift[1], tol));
    out.push(CheckResult::new("transpose_lifted", d, lift[2], tol));
    out.push(CheckResult::new("power_lifted", d, lift[3], tol));
    let reduced = reduced_identities(d);
    out.push(CheckResult::new("dagger", d, reduced[0], tol));
    if d.get() != 2 {
        out.push(CheckResult::new("conjugate", d, reduced[1], tol));
        out.push(CheckResult::new("transpose", d, reduced[2], tol));
    }
    out.push(CheckResult::new("power", d, reduced[3], tol));
    out.push(CheckResult::new("commutation", d, commutation_defect(d), tol));
    out.push(CheckResult::new("hs_orthogonality", d, hs_orthogonality_defect(d), tol));
    out.push(CheckResult::new("vectorization", d, vectorization_defect(d), tol));
    out.push(CheckResult::new("bell_orthonormality", d, bell_gram_defect(d), tol));
    out.push(CheckResult::new("bell_eigenvalue", d, bell_eigen_defect(d), tol));
    out.push(CheckResult::new("bell_circuit", d, bell_circuit_check(d), tol));
    out
}

/// States, amplitudes, observables and the conjugate-pair moment identity.
pub fn state_suite(d: Dimension, seed: u64) -> Vec<CheckResult> {
    let tol = ALGEBRA_TOL;
    let mut out = Vec::new();
    let (trace, sym) = conjugate_pair_defects(d, seed);
    out.push(CheckResult::new("conjugate_trace_identity", d, trace, tol));
    out.push(CheckResult::new("amplitude_symmetry", d, sym, tol));
    out.push(CheckResult::new("bloch_round_trip", d, bloch_round_trip_defect(d, seed), tol));
    let obs = observable_defects(d);
    out.push(CheckResult::new("observable_hermitian", d, obs[0], 1e-12));
    out.push(CheckResult::new("observable_norm", d, obs[1].max(0.0), 1e-12));
    out.push(CheckResult::new("observable_orthogonality", d, obs[2], tol));
    out.push(CheckResult::new("observable_conjugate", d, obs[3], tol));
    let mut rng = substream(seed, 2);
    let rho = random_mixed(d.get(), d.get(), &mut rng);
    let moment = match bell_distribution(&rho, &rho.conj()) {
        Ok(dist) => d
            .indices()
            .map(|v| {
                let y = rho.expectation(&displacement(d, v));
                (dist.expected_phase(v) - y * y).norm()
            })
            .fold(0.0, f64::max),
        Err(_) => f64::INFINITY,
    };
    out.push(CheckResult::new("bell_moment_identity", d, moment, tol));
    out
}

/// Clifford synthesis, the measurement channel and (for small `d`) exhaustive checks.
pub fn clifford_suite(d: Dimension, seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut rng = substream(seed, 3);
    let cache = match CliffordCache::new(d) {
        Ok(c) => c,
        Err(_) => return alloc::vec![CheckResult::flag("clifford_cache", d, false)],
    };
    let mut covariance: f64 = 0.0;
    if d.get() <= 7 {
        for m in enumerate_symplectic(d) {
            let elem = CliffordElement { symplectic: m, ..sample_clifford_with(d, &mut rng) };
            covariance = covariance.max(cache.unitary(&elem).map_or(f64::INFINITY, |u| conjugation_defect(&elem, &u)));
        }
    } else {
        for _ in 0..50 {
            let elem = sample_clifford_with(d, &mut rng);
            covariance = covariance.max(cache.unitary(&elem).map_or(f64::INFINITY, |u| conjugation_defect(&elem, &u)));
        }
    }
    out.push(CheckResult::new("clifford_covariance", d, covariance, 1e-9));
    let a = random_matrix(d.get(), &mut rng);
    let round_trip = measurement_channel(&a, d)
        .and_then(|m| inverse_channel(&m, d))
        .map_or(f64::INFINITY, |b| b.max_abs_diff(&a));
    out.push(CheckResult::new("channel_round_trip", d, round_trip, 1e-12));
    if d.get() <= 5 {
        let averaged = averaged_measurement_channel(&a, d)
            .and_then(|avg| measurement_channel(&a, d).map(|m| avg.max_abs_diff(&m)))
            .unwrap_or(f64::INFINITY);
        out.push(CheckResult::new("channel_group_average", d, averaged, 1e-10));
    }
    if d.get() <= 3 {
        let rho = random_mixed(d.get(), d.get(), &mut rng);
        let o = random_matrix(d.get(), &mut rng);
        let bias = exhaustive_moments(&o, &rho).map_or(f64::INFINITY, |m| (m.mean - rho.expectation(&o)).norm());
        out.push(CheckResult::new("shadow_unbiased", d, bias, 1e-10));
    }
    if let Ok(r) = tensor_commutation_check(d, seed) {
        out.push(CheckResult::new("bell_family_commutes", d, r.max_commutator_norm, ALGEBRA_TOL));
    }
    out
}

/// Every suite at one dimension.
pub fn full_suite(d: Dimension, seed: u64) -> Vec<CheckResult> {
    let mut out = algebraic_suite(d);
    out.extend(state_suite(d, seed));
    out.extend(clifford_suite(d, seed));
    out
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.passed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_at_small_d() {
        for n in [2, 3, 5] {
            let d = Dimension::new(n).unwrap();
            for r in full_suite(d, 1) {
                assert!(r.passed, "{r:?}");
            }
        }
    }

    #[test]
    fn reduced_identities_fail_at_d2() {
        let d = Dimension::new(2).unwrap();
        let reduced = reduced_identities(d);
        // Y* = −Y while D_{1,−1} = D_{1,1} = Y.
        assert!((reduced[1] - 2.0).abs() < 1e-12);
        assert!(reduced[0] < 1e-12);
    }

    #[test]
    fn failed_check_is_reported() {
        let d = Dimension::new(3).unwrap();
        assert!(!CheckResult::new("x", d, 1e-3, 1e-10).passed);
        assert!(!CheckResult::new("x", d, f64::NAN, 1e-10).passed);
        assert!(!CheckResult::flag("x", d, false).passed);
    }
}
