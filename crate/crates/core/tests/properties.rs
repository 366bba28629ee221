use proptest::prelude::*;
use qudit_learn_core::bell::bell_distribution;
use qudit_learn_core::clifford::shadows::{
    displacement_coefficients, frame_probabilities, inverse_channel, measurement_channel, outcome_probabilities,
    snapshot_vector,
};
use qudit_learn_core::clifford::synthesis::conjugation_defect;
use qudit_learn_core::clifford::{sample_clifford_with, sample_symplectic, CliffordCache, SymplecticMat2};
use qudit_learn_core::learner::{algorithm1_exact, LearnerConfig};
use qudit_learn_core::qudit::{displacement, product_phase};
use qudit_learn_core::rng::substream;
use qudit_learn_core::state::{amplitudes, bloch_reconstruct, haar_pure, random_hermitian, random_mixed};
use qudit_learn_core::{Complex64, ComplexMatrix, DensityMatrix, Dimension, DisplacementIndex};

const PRIMES: [usize; 6] = [2, 3, 5, 7, 11, 13];

fn prime() -> impl Strategy<Value = Dimension> {
    prop::sample::select(PRIMES.to_vec()).prop_map(|d| Dimension::new(d).unwrap())
}

fn small_prime() -> impl Strategy<Value = Dimension> {
    prop::sample::select(vec![2usize, 3, 5, 7]).prop_map(|d| Dimension::new(d).unwrap())
}

fn index(d: Dimension) -> impl Strategy<Value = DisplacementIndex> {
    (any::<i64>(), any::<i64>()).prop_map(move |(q, p)| DisplacementIndex::new(d, q % 1000, p % 1000))
}

fn state(d: Dimension, seed: u64) -> DensityMatrix {
    let mut rng = substream(seed, 0);
    match seed % 3 {
        0 => haar_pure(d.get(), &mut rng),
        1 => random_mixed(d.get(), d.get(), &mut rng),
        _ => random_mixed(d.get(), 2, &mut rng),
    }
}

fn pow(m: &ComplexMatrix, k: usize) -> ComplexMatrix {
    (0..k).fold(ComplexMatrix::identity(m.dim()), |acc, _| acc.matmul(m))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn field_operations_form_a_field(d in prime(), x in 0usize..1000, y in 0usize..1000, z in 0usize..1000) {
        let (x, y, z) = (x % d.get(), y % d.get(), z % d.get());
        prop_assert_eq!(d.sub(d.add(x, y), y), x);
        prop_assert_eq!(d.add(x, d.neg(x)), 0);
        prop_assert_eq!(d.mul(x, d.add(y, z)), d.add(d.mul(x, y), d.mul(x, z)));
        match d.inv(x) {
            Some(i) => prop_assert_eq!(d.mul(x, i), 1),
            None => prop_assert_eq!(x, 0),
        }
    }

    #[test]
    fn reduction_is_canonical(d in prime(), q in -10_000i64..10_000, p in -10_000i64..10_000) {
        let v = DisplacementIndex::new(d, q, p);
        prop_assert!(v.q < d.get() && v.p < d.get());
        prop_assert_eq!(v, DisplacementIndex::new(d, q + d.get() as i64, p - 3 * d.get() as i64));
        prop_assert_eq!(DisplacementIndex::from_flat(d, v.flat(d)), v);
    }

    #[test]
    fn displacement_group_law((d, u, v) in prime().prop_flat_map(|d| (Just(d), index(d), index(d)))) {
        let du = displacement(d, u);
        let dv = displacement(d, v);
        let joint = displacement(d, u.add(d, v)).scale(product_phase(d, u, v));
        prop_assert!(du.matmul(&dv).max_abs_diff(&joint) < 1e-10);
        prop_assert!(du.dagger().max_abs_diff(&displacement(d, u.neg(d))) < 1e-10);

        let omega = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * u.symplectic_form(d, v) as f64 / d.get() as f64);
        prop_assert!(dv.matmul(&du).max_abs_diff(&du.matmul(&dv).scale(omega)) < 1e-10);

        let inner = du.dagger().matmul(&dv).trace();
        let expected = if u == v { d.get() as f64 } else { 0.0 };
        prop_assert!((inner - Complex64::new(expected, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn displacement_powers_stay_in_the_group((d, v, k) in small_prime().prop_flat_map(|d| (Just(d), index(d), 0usize..20))) {
        let power = pow(&displacement(d, v), k);
        let target = displacement(d, v.scale(d, k));
        // qubit powers agree only up to a sign
        let phase = if d.get() == 2 { target.hs_inner(&power) / 2.0 } else { Complex64::new(1.0, 0.0) };
        prop_assert!((phase.norm() - 1.0).abs() < 1e-10);
        prop_assert!(power.max_abs_diff(&target.scale(phase)) < 1e-10);
    }

    #[test]
    fn symplectic_group_closure(d in prime(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let a = sample_symplectic(d, s1);
        let b = sample_symplectic(d, s2);
        prop_assert_eq!(a.det(d), 1);
        prop_assert_eq!(a.compose(d, &b).det(d), 1);
        prop_assert_eq!(a.compose(d, &a.inverse(d)), SymplecticMat2::IDENTITY);
        for v in [DisplacementIndex { q: 1, p: 0 }, DisplacementIndex { q: 0, p: 1 }, DisplacementIndex { q: 1, p: 1 }] {
            prop_assert_eq!(a.compose(d, &b).apply(d, v), a.apply(d, b.apply(d, v)));
        }
    }

    #[test]
    fn synthesized_cliffords_conjugate_displacements(d in small_prime(), seed in any::<u64>()) {
        let elem = sample_clifford_with(d, &mut substream(seed, 0));
        let u = CliffordCache::empty(d).unitary(&elem).unwrap();
        prop_assert!(u.dagger().matmul(&u).max_abs_diff(&ComplexMatrix::identity(d.get())) < 1e-10);
        prop_assert!(conjugation_defect(&elem, &u) < 1e-9);
    }

    #[test]
    fn stabilizer_frame_agrees_with_dense_unitary(d in small_prime(), seed in any::<u64>()) {
        let cache = CliffordCache::empty(d);
        let elem = sample_clifford_with(d, &mut substream(seed, 0));
        let u = cache.unitary(&elem).unwrap();
        let frame = cache.frame(&elem).unwrap();
        for b in 0..d.get() {
            let w = snapshot_vector(&u, b);
            let values = frame.snapshot_values(b);
            for (t, value) in values.iter().enumerate() {
                let op = displacement(d, frame.generator.scale(d, t));
                let direct: Complex64 = (0..d.get())
                    .map(|i| (0..d.get()).map(|j| w[i].conj() * op[(i, j)] * w[j]).sum::<Complex64>())
                    .sum();
                prop_assert!((direct - value).norm() < 1e-10);
            }
        }
        let rho = state(d, seed);
        let sparse = frame_probabilities(d, &frame, &displacement_coefficients(&rho).unwrap());
        let dense = outcome_probabilities(&u, rho.matrix());
        for (s, e) in sparse.iter().zip(&dense) {
            prop_assert!((s - e).abs() < 1e-10);
        }
    }

    #[test]
    fn measurement_channel_round_trip(d in small_prime(), seed in any::<u64>()) {
        let a = random_hermitian(d.get(), &mut substream(seed, 0));
        let back = inverse_channel(&measurement_channel(&a, d).unwrap(), d).unwrap();
        prop_assert!(back.max_abs_diff(&a) < 1e-10);
    }

    #[test]
    fn bloch_round_trip(d in prime(), seed in any::<u64>()) {
        let rho = state(d, seed);
        let table = amplitudes(&rho).unwrap();
        prop_assert!((table.get(DisplacementIndex::ZERO).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-10);
        prop_assert!(table.conjugation_defect() < 1e-10);
        let rebuilt = bloch_reconstruct(&table).unwrap();
        prop_assert!(rebuilt.matrix.max_abs_diff(rho.matrix()) < 1e-10);
        prop_assert!(rebuilt.is_psd());
    }

    #[test]
    fn bell_moments_are_squared_amplitudes(d in small_prime(), seed in any::<u64>()) {
        let rho = state(d, seed);
        let dist = bell_distribution(&rho, &rho.conj()).unwrap();
        prop_assert!((dist.probs().iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(dist.probs().iter().all(|&p| p >= -1e-12));
        let table = amplitudes(&rho).unwrap();
        for (idx, y) in table.iter() {
            prop_assert!((dist.expected_phase(idx) - y * y).norm() < 1e-10);
        }
    }

    #[test]
    fn exact_magnitudes_meet_the_case_bounds(d in small_prime(), seed in any::<u64>(), eps in 0.05f64..0.6) {
        let rho = state(d, seed);
        let cfg = LearnerConfig::new(eps, 0.1).unwrap();
        let indices: Vec<_> = d.nonzero_indices().collect();
        let table = amplitudes(&rho).unwrap();
        for est in algorithm1_exact(&rho, &indices, &cfg).unwrap() {
            let y = table.get(est.idx).unwrap();
            prop_assert!(est.meets_guarantee(y, &cfg));
            if let Some(u) = est.u_hat {
                prop_assert!((u * u - est.v_hat).norm() < 1e-12);
                prop_assert!(u.norm() >= (2.0f64 / 3.0).sqrt() * eps - 1e-12);
            }
        }
    }
}
