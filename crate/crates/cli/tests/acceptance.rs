//! End-to-end acceptance checks, one line per criterion.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use qudit_learn::commands::{scaling_checks, TWIRL_GRID};
use qudit_learn_core::bell::bell_distribution;
use qudit_learn_core::clifford::shadows::{
    averaged_measurement_channel, exhaustive_moments, inverse_channel, measurement_channel, second_moment_oracle,
    transition_observable,
};
use qudit_learn_core::clifford::twirl::{twirl_channel, twirl_rank, twirl_theory};
use qudit_learn_core::clifford::sample_clifford_with;
use qudit_learn_core::experiments::{
    e_norm_check, norm_lemma_check, scaling_scan_with, ProtocolKind, ScanSettings, SequentialRunner,
};
use qudit_learn_core::learner::{algorithm1, learn_amplitudes, weighted_phase, LearnerConfig};
use qudit_learn_core::qudit::displacement;
use qudit_learn_core::rng::{child_seed, substream, uniform_below};
use qudit_learn_core::state::{amplitudes, haar_pure, random_hermitian, random_matrix, random_mixed};
use qudit_learn_core::verify::algebraic_suite;
use qudit_learn_core::{ComplexMatrix, DensityMatrix, Dimension, DisplacementIndex};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn dim(d: usize) -> Dimension {
    Dimension::new(d).unwrap()
}

/// Haar-random pure states for even seeds, full-rank mixed states for odd ones.
fn test_state(d: Dimension, seed: u64) -> DensityMatrix {
    let mut rng = substream(seed, 0);
    if seed.is_multiple_of(2) {
        haar_pure(d.get(), &mut rng)
    } else {
        random_mixed(d.get(), d.get(), &mut rng)
    }
}

fn within_time(elapsed: Duration, limit: Duration) -> String {
    format!("{:.1}s (limit {}s)", elapsed.as_secs_f64(), limit.as_secs())
}

fn algebraic_identities() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for d in [2, 3, 5, 7, 11, 13] {
        for r in algebraic_suite(dim(d)) {
            worst = worst.max(r.max_deviation);
            if !r.passed {
                failures.push(format!("{}@{d}", r.name));
            }
        }
    }
    let limit = Duration::from_secs(30);
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && elapsed < limit,
        format!("max deviation {worst:.2e}, failures [{}], {}", failures.join(","), within_time(elapsed, limit)),
    )
}

fn estimator_identities() -> Outcome {
    let mut worst = 0.0f64;
    for d in [3, 5, 7] {
        let d = dim(d);
        for s in 0..20 {
            let rho = test_state(d, child_seed(2, s));
            let exact = amplitudes(&rho).unwrap();
            let dist = bell_distribution(&rho, &rho.conj()).unwrap();
            for v in d.indices() {
                let y = exact.get(v).unwrap();
                worst = worst.max((weighted_phase(d, dist.probs(), v) - y * y).norm());
            }
        }
    }
    outcome(worst <= 1e-10, format!("max |E[v̂] − y²| = {worst:.2e}"))
}

fn algorithm1_guarantee() -> Outcome {
    let start = Instant::now();
    let d = dim(7);
    let cfg = LearnerConfig::new(0.2, 0.1).unwrap();
    let indices: Vec<DisplacementIndex> = d.nonzero_indices().collect();
    let mut good = 0;
    for s in 0..100u64 {
        let rho = test_state(d, child_seed(3, s));
        let exact = amplitudes(&rho).unwrap();
        let estimates = algorithm1(&rho, &indices, &cfg, child_seed(30, s)).unwrap();
        if estimates.iter().all(|m| m.meets_guarantee(exact.get(m.idx).unwrap(), &cfg)) {
            good += 1;
        }
    }
    let limit = Duration::from_secs(300);
    let elapsed = start.elapsed();
    outcome(good >= 90 && elapsed < limit, format!("{good}/100 runs meet the guarantee, {}", within_time(elapsed, limit)))
}

fn signed_learning() -> Outcome {
    let d = dim(7);
    let cfg = LearnerConfig::new(0.2, 0.1).unwrap();
    let indices: Vec<DisplacementIndex> = d.nonzero_indices().collect();
    let bound = (16.0 * 7f64.ln() / 0.1f64.powi(2)).ceil() as usize;
    let (mut good, mut max_errors, mut over) = (0, 0, 0);
    for s in 0..100u64 {
        let rho = test_state(d, child_seed(4, s));
        let report = learn_amplitudes(&rho, &indices, &cfg, child_seed(40, s)).unwrap();
        if report.max_error(&rho).unwrap() <= cfg.epsilon {
            good += 1;
        }
        if let Some(h) = &report.hypothesis {
            max_errors = max_errors.max(h.error_count);
            if h.error_count > bound {
                over += 1;
            }
        }
    }
    outcome(
        good >= 90 && over == 0,
        format!("{good}/100 runs within ε, max error_count {max_errors} (bound {bound}), {over} over bound"),
    )
}

fn twirl_projectors() -> Outcome {
    let start = Instant::now();
    let (mut worst, mut worst_idem) = (0.0f64, 0.0f64);
    let mut ranks_ok = true;
    for &(k, d) in TWIRL_GRID {
        let d = dim(d);
        let brute = twirl_channel(k, d).unwrap();
        let theory = twirl_theory(k, d).unwrap();
        worst = worst.max(brute.max_abs_diff(&theory));
        worst_idem = worst_idem.max(brute.idempotency_defect()).max(theory.idempotency_defect());
        ranks_ok &= theory.projector_rank() == twirl_rank(k, d);
    }
    let limit = Duration::from_secs(600);
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-9 && worst_idem <= 1e-8 && ranks_ok && elapsed < limit,
        format!("max deviation {worst:.2e}, idempotency {worst_idem:.2e}, ranks ok {ranks_ok}, {}", within_time(elapsed, limit)),
    )
}

fn channel_and_unbiasedness() -> Outcome {
    let mut rng = substream(6, 0);
    let mut channel = 0.0f64;
    for d in [2, 3, 5] {
        let n = d;
        let d = dim(d);
        let a = random_matrix(n, &mut rng);
        let averaged = averaged_measurement_channel(&a, d).unwrap();
        // (A + tr(A) I)/(d+1)
        let formula = ComplexMatrix::from_fn(n, |i, j| {
            (a[(i, j)] + if i == j { a.trace() } else { 0.0.into() }) / (n as f64 + 1.0)
        });
        channel = channel.max(averaged.max_abs_diff(&formula));
        channel = channel.max(measurement_channel(&a, d).unwrap().max_abs_diff(&formula));
        // (d+1)B − tr(B) I undoes it
        let inverse = ComplexMatrix::from_fn(n, |i, j| {
            averaged[(i, j)] * (n as f64 + 1.0) - if i == j { averaged.trace() } else { 0.0.into() }
        });
        channel = channel.max(inverse.max_abs_diff(&a));
        channel = channel.max(inverse_channel(&averaged, d).unwrap().max_abs_diff(&a));
    }
    let mut bias = 0.0f64;
    for d in [2, 3] {
        for _ in 0..10 {
            let o = random_matrix(d, &mut rng);
            let rho = random_mixed(d, d, &mut rng);
            let m = exhaustive_moments(&o, &rho).unwrap();
            bias = bias.max((m.mean - rho.expectation(&o)).norm());
        }
    }
    outcome(channel <= 1e-10 && bias <= 1e-10, format!("channel deviation {channel:.2e}, estimator bias {bias:.2e}"))
}

fn variance_checks() -> Outcome {
    let mut rng = substream(7, 0);
    let mut general = 0.0f64;
    for _ in 0..10 {
        let o = random_matrix(3, &mut rng);
        let rho = random_mixed(3, 3, &mut rng);
        let exact = exhaustive_moments(&o, &rho).unwrap().second_moment;
        general = general.max((exact - second_moment_oracle(&o, &rho).unwrap()).abs());
    }
    let mut displacement_dev = 0.0f64;
    for d in [2, 3, 5] {
        let d = dim(d);
        let rho = random_mixed(d.get(), d.get(), &mut rng);
        for v in d.nonzero_indices() {
            let dv = displacement(d, v);
            let y = rho.expectation(&dv);
            let var = exhaustive_moments(&dv, &rho).unwrap().variance;
            displacement_dev = displacement_dev.max((var - (d.get() as f64 + 1.0 - y.norm_sqr())).abs());
        }
    }
    let mut transition_excess = f64::NEG_INFINITY;
    for d in [3, 5, 7] {
        let n = d;
        let d = dim(d);
        for _ in 0..20 {
            let clifford = sample_clifford_with(d, &mut rng);
            let i = uniform_below(&mut rng, n);
            let j = (i + 1 + uniform_below(&mut rng, n - 1)) % n;
            let o = transition_observable(&clifford, i, j).unwrap();
            let rho = random_mixed(n, n, &mut rng);
            let var = exhaustive_moments(&o, &rho).unwrap().variance;
            transition_excess = transition_excess.max(var - (n as f64 + 1.0) / n as f64);
        }
    }
    let mut qubit = 0.0f64;
    for _ in 0..10 {
        let h = random_hermitian(2, &mut rng);
        let tr = h.trace();
        let o0 = ComplexMatrix::from_fn(2, |i, j| h[(i, j)] - if i == j { tr / 2.0 } else { 0.0.into() });
        let rho = random_mixed(2, 2, &mut rng);
        let second = exhaustive_moments(&o0, &rho).unwrap().second_moment;
        qubit = qubit.max((second - 1.5 * o0.frobenius_norm().powi(2)).abs());
    }
    outcome(
        general <= 1e-9 && displacement_dev <= 1e-9 && transition_excess <= 1e-9 && qubit <= 1e-10,
        format!(
            "oracle {general:.2e}, displacement {displacement_dev:.2e}, transition excess {transition_excess:.3}, qubit {qubit:.2e}"
        ),
    )
}

fn norm_lemmas() -> Outcome {
    let mut perm_ok = true;
    let mut norm_dev = 0.0f64;
    let mut e_ok = true;
    let mut e_detail = Vec::new();
    for d in [3, 5] {
        let d = dim(d);
        for k in [2, 4] {
            for m in 1..=k {
                let r = norm_lemma_check(d, m, k).unwrap();
                perm_ok &= r.is_permutation;
                norm_dev = norm_dev.max((r.op_norm - d.get() as f64).abs());
            }
            let e = e_norm_check(d, k).unwrap();
            e_ok &= e.within_bound;
            e_detail.push(format!("{:.3}≤{}", e.op_norm, e.bound));
        }
    }
    outcome(
        perm_ok && norm_dev <= 1e-9 && e_ok,
        format!("permutations {perm_ok}, |‖𝒟‖ − d| ≤ {norm_dev:.2e}, E sums [{}]", e_detail.join(", ")),
    )
}

fn scaling_separation() -> Outcome {
    let start = Instant::now();
    let dims: Vec<Dimension> = [3, 5, 7, 11, 13].into_iter().map(dim).collect();
    let protocols = [ProtocolKind::ConjugateBell, ProtocolKind::SingleCopyShadow];
    let report =
        scaling_scan_with(&SequentialRunner, &dims, 0.5, &protocols, 200, 2024, ScanSettings::default()).unwrap();
    let checks = scaling_checks(&report);
    let table: Vec<String> = report
        .rows
        .iter()
        .map(|r| format!("{}@{}={}", r.protocol, r.d, r.samples_to_success.map_or("-".into(), |n| n.to_string())))
        .collect();
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| format!("{} ({})", c.name, c.detail)).collect();
    let trend: Vec<String> = checks.iter().filter(|c| c.name.contains("growth") || c.name.contains("linear")).map(|c| c.detail.clone()).collect();
    let limit = Duration::from_secs(1800);
    let elapsed = start.elapsed();
    outcome(
        failed.is_empty() && elapsed < limit,
        format!("{}; {}; failed [{}]; {}", table.join(" "), trend.join(", "), failed.join("; "), within_time(elapsed, limit)),
    )
}

fn run_binary(args: &[&str], out: &Path) -> (i32, Vec<u8>) {
    let status = Command::new(env!("CARGO_BIN_EXE_qudit-learn"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("QUDIT_LEARN_WORKERS")
        .stderr(std::process::Stdio::null())
        .status()
        .expect("binary runs");
    (status.code().unwrap_or(-1), std::fs::read(out).unwrap_or_default())
}

fn cli_determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("qudit-learn-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let runs: &[&[&str]] = &[
        &["verify", "--dims", "2,3", "--seed", "5"],
        &["learn", "--d", "5", "--eps", "0.3", "--trials", "3", "--seed", "5"],
        &["shadows", "--d", "3", "--samples", "300", "--seed", "5"],
        &["scaling", "--dims", "3,5", "--trials", "20", "--protocols", "conjugate_bell,single_copy_shadow", "--seed", "5"],
        &["twirl", "--dims", "2,3"],
        &["norms", "--dims", "3"],
    ];
    let mut mismatches = Vec::new();
    let mut compared = 0;
    for (i, args) in runs.iter().enumerate() {
        for format in ["csv", "json"] {
            let mut full: Vec<&str> = args.to_vec();
            full.extend(["--format", format]);
            let first = run_binary(&full, &dir.join(format!("{i}-a.{format}")));
            let mut parallel = full.clone();
            parallel.extend(["--workers", "2"]);
            let second = run_binary(&parallel, &dir.join(format!("{i}-b.{format}")));
            compared += 1;
            if first.1.is_empty() || first != second {
                mismatches.push(format!("{} {format}", args[0]));
            }
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    outcome(
        mismatches.is_empty(),
        format!("{compared} reruns compared byte-for-byte, mismatches [{}]", mismatches.join(", ")),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("algebraic identities", algebraic_identities),
        ("estimator identities", estimator_identities),
        ("magnitude learning", algorithm1_guarantee),
        ("signed learning", signed_learning),
        ("twirl projectors", twirl_projectors),
        ("measurement channel", channel_and_unbiasedness),
        ("shadow variance", variance_checks),
        ("norm lemmas", norm_lemmas),
        ("scaling separation", scaling_separation),
        ("cli determinism", cli_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let verdict = if result.passed { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {verdict} {name} [{:.1}s]: {}", i + 1, start.elapsed().as_secs_f64(), result.detail);
        if !result.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
