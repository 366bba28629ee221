//! One function per command, each producing a [`ResultEnvelope`].

use qudit_learn_core::clifford::shadows::{
    draw_snapshot, mean_and_stderr, single_estimate, variance_oracle,
};
use qudit_learn_core::clifford::twirl::{twirl_channel, twirl_rank, twirl_supported, twirl_theory};
use qudit_learn_core::clifford::CliffordCache;
use qudit_learn_core::experiments::{
    e_norm_check, norm_lemma_check, scaling_scan_with, trial_seeds, ProtocolKind, ScalingReport, ScanSettings,
    TrialRunner,
};
use qudit_learn_core::learner::{learn_amplitudes, LearnerConfig};
use qudit_learn_core::qudit::displacement_observable;
use qudit_learn_core::rng::{child_seed, substream};
use qudit_learn_core::state::{amplitudes, make_test_state, Sign, TestStateKind};
use qudit_learn_core::verify::full_suite;
use qudit_learn_core::{DensityMatrix, Dimension, DisplacementIndex};

use crate::config::{CommandKind, RunConfig, StateKind};
use crate::envelope::{Cell, Check, ResultEnvelope};
use crate::error::{RunError, UsageError};

pub const VERIFY_COLUMNS: &[&str] = &["check", "d", "max_deviation", "tolerance", "passed"];
pub const LEARN_COLUMNS: &[&str] = &[
    "trial", "q", "p", "y_re", "y_im", "y_hat_re", "y_hat_im", "abs_error", "magnitude_ok", "within_eps",
];
pub const SHADOW_COLUMNS: &[&str] =
    &["q", "p", "exact", "estimate", "stderr", "oracle_variance", "sample_variance", "z_score"];
pub const SCALING_COLUMNS: &[&str] = &["d", "protocol", "samples_to_success", "probes"];
pub const TWIRL_COLUMNS: &[&str] =
    &["k", "d", "theory_deviation", "idempotency_defect", "hermiticity_defect", "rank", "expected_rank", "passed"];
pub const NORM_COLUMNS: &[&str] = &["family", "d", "k", "m", "op_norm", "bound", "passed"];

/// Every `(k, d)` pair with a closed-form twirl.
pub const TWIRL_GRID: &[(usize, usize)] = &[(1, 2), (1, 3), (1, 5), (2, 2), (2, 3), (2, 5), (3, 2), (3, 3)];

const TWIRL_TOL: f64 = 1e-9;
const IDEMPOTENCY_TOL: f64 = 1e-8;
const NORM_TOL: f64 = 1e-9;
/// Largest shadow z-score accepted against the variance oracle.
const Z_LIMIT: f64 = 5.0;

pub fn run<R: TrialRunner>(config: &RunConfig, runner: &R) -> Result<ResultEnvelope, RunError> {
    match config.command {
        CommandKind::Verify => verify(config),
        CommandKind::Learn => learn(config, runner),
        CommandKind::Shadows => shadows(config),
        CommandKind::Scaling => scaling(config, runner),
        CommandKind::Twirl => twirl(config),
        CommandKind::Norms => norms(config),
    }
}

fn verify(config: &RunConfig) -> Result<ResultEnvelope, RunError> {
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for d in config.dimensions() {
        let results = full_suite(d, config.seed);
        let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
        checks.push(Check::new(format!("verify d={d}"), failed.is_empty(), failed.join(",")));
        rows.extend(results.iter().map(|r| {
            vec![r.name.as_str().into(), r.d.into(), r.max_deviation.into(), r.tolerance.into(), r.passed.into()]
        }));
    }
    Ok(ResultEnvelope::new(config.clone(), VERIFY_COLUMNS, rows, checks))
}

/// The state prepared for `learn` and `shadows`.
pub fn prepared_state(d: Dimension, kind: StateKind, eps: f64, seed: u64) -> Result<DensityMatrix, RunError> {
    let kind = match kind {
        StateKind::MaximallyMixed => TestStateKind::MaximallyMixed,
        StateKind::HaarPure => TestStateKind::HaarPure,
        StateKind::Spiked => TestStateKind::Spiked { idx: DisplacementIndex { q: 1, p: 1 }, sign: Sign::Plus, eps },
    };
    Ok(make_test_state(d, kind, seed)?)
}

struct LearnRun {
    rows: Vec<Vec<Cell>>,
    signed_ok: bool,
    magnitudes_ok: bool,
    error_count: Option<usize>,
    error_bound: Option<usize>,
    exceeded: bool,
}

fn learn_one(config: &RunConfig, trial: usize, seed: u64) -> Result<LearnRun, RunError> {
    let d = config.dimension();
    let rho = prepared_state(d, config.state, config.epsilon, child_seed(seed, 0))?;
    let exact = amplitudes(&rho)?;
    let cfg = LearnerConfig::new(config.epsilon, config.delta)?;
    let magnitude_cfg = cfg.at_precision(cfg.epsilon / 2.0);
    let indices: Vec<DisplacementIndex> = d.nonzero_indices().collect();
    let report = learn_amplitudes(&rho, &indices, &cfg, child_seed(seed, 1))?;
    let mut rows = Vec::with_capacity(indices.len());
    let (mut signed_ok, mut magnitudes_ok) = (true, true);
    for m in &report.magnitudes {
        let y = exact.get(m.idx).unwrap_or_default();
        let y_hat = report.table.get(m.idx).unwrap_or_default();
        let error = (y_hat - y).norm();
        let magnitude_ok = m.meets_guarantee(y, &magnitude_cfg);
        signed_ok &= error <= cfg.epsilon;
        magnitudes_ok &= magnitude_ok;
        rows.push(vec![
            trial.into(),
            m.idx.q.into(),
            m.idx.p.into(),
            y.re.into(),
            y.im.into(),
            y_hat.re.into(),
            y_hat.im.into(),
            error.into(),
            magnitude_ok.into(),
            (error <= cfg.epsilon).into(),
        ]);
    }
    let h = report.hypothesis.as_ref();
    Ok(LearnRun {
        rows,
        signed_ok,
        magnitudes_ok,
        error_count: h.map(|h| h.error_count),
        error_bound: h.map(|h| h.error_bound),
        exceeded: h.is_some_and(|h| h.exceeded_bound),
    })
}

fn learn<R: TrialRunner>(config: &RunConfig, runner: &R) -> Result<ResultEnvelope, RunError> {
    let seeds = trial_seeds(config.seed, config.trials);
    let indexed: Vec<u64> = (0..seeds.len() as u64).collect();
    let runs = runner
        .run(&indexed, |t| learn_one(config, t as usize, seeds[t as usize]))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let trials = runs.len();
    let needed = ((1.0 - config.delta) * trials as f64).ceil() as usize;
    let signed = runs.iter().filter(|r| r.signed_ok).count();
    let magnitudes = runs.iter().filter(|r| r.magnitudes_ok).count();
    let max_errors = runs.iter().filter_map(|r| r.error_count).max();
    let bound = runs.iter().filter_map(|r| r.error_bound).max();
    let exceeded = runs.iter().filter(|r| r.exceeded).count();
    let checks = vec![
        Check::new("signed_within_eps", signed >= needed, format!("{signed}/{trials} runs, need {needed}")),
        Check::new("magnitude_guarantee", magnitudes >= needed, format!("{magnitudes}/{trials} runs, need {needed}")),
        Check::new(
            "hypothesis_errors_within_bound",
            exceeded == 0,
            match (max_errors, bound) {
                (Some(m), Some(b)) => format!("max error_count {m}, bound {b}"),
                _ => "no hypothesis search needed".to_string(),
            },
        ),
    ];
    let rows = runs.into_iter().flat_map(|r| r.rows).collect();
    Ok(ResultEnvelope::new(config.clone(), LEARN_COLUMNS, rows, checks))
}

fn shadows(config: &RunConfig) -> Result<ResultEnvelope, RunError> {
    let d = config.dimension();
    let rho = prepared_state(d, config.state, config.epsilon, child_seed(config.seed, 0))?;
    let cache = CliffordCache::new(d)?;
    let indices: Vec<DisplacementIndex> = d.nonzero_indices().collect();
    let observables: Vec<_> = indices.iter().map(|&v| displacement_observable(d, v)).collect();
    let mut values = vec![Vec::with_capacity(config.samples); observables.len()];
    let mut rng = substream(config.seed, 1);
    for _ in 0..config.samples {
        let (_, w) = draw_snapshot(&cache, &rho, &mut rng)?;
        for (acc, o) in values.iter_mut().zip(&observables) {
            acc.push(single_estimate(&w, o));
        }
    }
    let n = config.samples as f64;
    let mut rows = Vec::with_capacity(indices.len());
    let (mut worst_z, mut worst_ratio) = (0.0f64, 1.0f64);
    for ((v, o), vals) in indices.iter().zip(&observables).zip(&values) {
        let exact = rho.expectation(o).re;
        let est = mean_and_stderr(vals)?;
        let oracle = variance_oracle(o, &rho)?;
        let sample_variance = est.stderr * est.stderr * n;
        let deviation = (est.mean.re - exact).abs();
        let z = if oracle > 0.0 { deviation / (oracle / n).sqrt() } else if deviation < 1e-9 { 0.0 } else { f64::INFINITY };
        worst_z = worst_z.max(z);
        if oracle > 0.0 {
            let ratio = sample_variance / oracle;
            if (ratio.ln()).abs() > worst_ratio.ln().abs() {
                worst_ratio = ratio;
            }
        }
        rows.push(vec![
            v.q.into(),
            v.p.into(),
            exact.into(),
            est.mean.re.into(),
            est.stderr.into(),
            oracle.into(),
            sample_variance.into(),
            z.into(),
        ]);
    }
    let checks = vec![
        Check::new("estimates_within_oracle", worst_z <= Z_LIMIT, format!("max z-score {worst_z:.3}, limit {Z_LIMIT}")),
        Check::new(
            "sample_variance_near_oracle",
            config.samples < 100 || (0.5..=2.0).contains(&worst_ratio),
            format!("worst sample/oracle variance ratio {worst_ratio:.4}"),
        ),
    ];
    Ok(ResultEnvelope::new(config.clone(), SHADOW_COLUMNS, rows, checks))
}

fn growth(report: &ScalingReport, protocol: ProtocolKind) -> Option<(f64, f64)> {
    let mut rows: Vec<_> = report.rows.iter().filter(|r| r.protocol == protocol).collect();
    rows.sort_by_key(|r| r.d);
    let (first, last) = (rows.first()?, rows.last()?);
    if first.d == last.d {
        return None;
    }
    let ratio = last.samples_to_success? as f64 / first.samples_to_success? as f64;
    Some((ratio, last.d.get() as f64 / first.d.get() as f64))
}

/// Trend checks: conjugate sampling grows by less than 3×, single-copy shadows by more
/// than 3× and within a factor 2 of linear in `d`.
pub fn scaling_checks(report: &ScalingReport) -> Vec<Check> {
    let mut checks: Vec<Check> = report
        .rows
        .iter()
        .map(|r| {
            Check::new(
                format!("{} d={} reached target", r.protocol, r.d),
                r.samples_to_success.is_some(),
                format!("samples_to_success = {:?}", r.samples_to_success),
            )
        })
        .collect();
    let has = |p| report.rows.iter().any(|r| r.protocol == p);
    if has(ProtocolKind::ConjugateBell) {
        if let Some((g, _)) = growth(report, ProtocolKind::ConjugateBell) {
            checks.push(Check::new("conjugate_bell growth < 3", g < 3.0, format!("growth {g:.3}")));
        }
    }
    if has(ProtocolKind::SingleCopyShadow) {
        if let Some((g, linear)) = growth(report, ProtocolKind::SingleCopyShadow) {
            checks.push(Check::new("single_copy_shadow growth > 3", g > 3.0, format!("growth {g:.3}")));
            let rel = g / linear;
            checks.push(Check::new(
                "single_copy_shadow within 2x of linear",
                (0.5..=2.0).contains(&rel),
                format!("growth / (d_max/d_min) = {rel:.3}"),
            ));
        }
    }
    checks
}

pub fn scaling_rows(report: &ScalingReport) -> Vec<Vec<Cell>> {
    report
        .rows
        .iter()
        .map(|r| {
            let probes: Vec<String> = r.probes.iter().map(|(n, rate)| format!("{n}:{rate}")).collect();
            vec![r.d.get().into(), r.protocol.name().into(), r.samples_to_success.into(), probes.join(";").into()]
        })
        .collect()
}

fn scaling<R: TrialRunner>(config: &RunConfig, runner: &R) -> Result<ResultEnvelope, RunError> {
    let settings = ScanSettings { max: config.max_samples, ..ScanSettings::default() };
    let report = scaling_scan_with(
        runner,
        &config.dimensions(),
        config.epsilon,
        &config.protocols,
        config.trials,
        config.seed,
        settings,
    )?;
    Ok(ResultEnvelope::new(config.clone(), SCALING_COLUMNS, scaling_rows(&report), scaling_checks(&report)))
}

fn twirl(config: &RunConfig) -> Result<ResultEnvelope, RunError> {
    let grid: Vec<(usize, Dimension)> = TWIRL_GRID
        .iter()
        .filter(|(_, d)| config.dims.contains(d))
        .map(|&(k, d)| (k, Dimension::new(d).expect("grid is prime")))
        .filter(|&(k, d)| twirl_supported(k, d))
        .collect();
    if grid.is_empty() {
        return Err(UsageError::Invalid(format!("twirl supports d ∈ {{2,3,5}}, got {:?}", config.dims)).into());
    }
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for (k, d) in grid {
        let brute = twirl_channel(k, d)?;
        let theory = twirl_theory(k, d)?;
        let deviation = brute.max_abs_diff(&theory);
        let idempotency = brute.idempotency_defect().max(theory.idempotency_defect());
        let hermiticity = brute.hermiticity_defect();
        let (rank, expected) = (brute.projector_rank(), twirl_rank(k, d));
        let passed = deviation <= TWIRL_TOL && idempotency <= IDEMPOTENCY_TOL && rank == expected;
        checks.push(Check::new(format!("twirl k={k} d={d}"), passed, format!("deviation {deviation:e}")));
        rows.push(vec![
            k.into(),
            d.get().into(),
            deviation.into(),
            idempotency.into(),
            hermiticity.into(),
            rank.into(),
            expected.into(),
            passed.into(),
        ]);
    }
    Ok(ResultEnvelope::new(config.clone(), TWIRL_COLUMNS, rows, checks))
}

fn norms(config: &RunConfig) -> Result<ResultEnvelope, RunError> {
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for d in config.dimensions() {
        let nf = d.get() as f64;
        for k in [2usize, 4] {
            for m in 1..=k {
                let r = norm_lemma_check(d, m, k)?;
                let passed = r.is_permutation && (r.op_norm - nf).abs() <= NORM_TOL;
                checks.push(Check::new(format!("displacement_sum d={d} k={k} m={m}"), passed, format!("{}", r.op_norm)));
                rows.push(vec![
                    "displacement_sum".into(),
                    d.get().into(),
                    k.into(),
                    m.into(),
                    r.op_norm.into(),
                    nf.into(),
                    passed.into(),
                ]);
            }
            let e = e_norm_check(d, k)?;
            checks.push(Check::new(format!("e_sum d={d} k={k}"), e.within_bound, format!("{} ≤ {}", e.op_norm, e.bound)));
            rows.push(vec![
                "e_sum".into(),
                d.get().into(),
                k.into(),
                Cell::Null,
                e.op_norm.into(),
                e.bound.into(),
                e.within_bound.into(),
            ]);
        }
    }
    Ok(ResultEnvelope::new(config.clone(), NORM_COLUMNS, rows, checks))
}

