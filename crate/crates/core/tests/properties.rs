//! Randomized invariants over small input domains.

use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;

use selftest_lab::bitstring::BitString;
use selftest_lab::bounds::{evaluate_bound, BoundName, VACUOUS_ABOVE};
use selftest_lab::isometry::IsometryPlan;
use selftest_lab::linalg::{
    distance_phase_aligned, inner, ordered_power, Layout, Pauli, StateVector, NORM_TOL, STRUCTURE_TOL,
};
use selftest_lab::protocol::{alternative_referee_expectation, epsilon_my, game_expectation_exact};
use selftest_lab::strategy::{
    honest_my_strategy, honest_spp_strategy, perturb_strategy, validate_strategy, EpsilonBundle, NoiseSpec, TestFlavor,
};

fn bits(n: usize) -> impl Strategy<Value = BitString> {
    (0..1u64 << n).prop_map(move |v| BitString::from_value(v, n).unwrap())
}

fn sized_pair(max_half: usize) -> impl Strategy<Value = (BitString, BitString)> {
    (1..=max_half).prop_flat_map(|h| (bits(2 * h), bits(2 * h)))
}

fn unit_vector(dim: usize) -> impl Strategy<Value = DVector<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim)
        .prop_filter("nonzero", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3))
        .prop_map(|v| {
            let x = DVector::from_iterator(v.len(), v.into_iter().map(|(a, b)| Complex64::new(a, b)));
            let norm = x.norm();
            x / Complex64::new(norm, 0.0)
        })
}

fn noise() -> impl Strategy<Value = NoiseSpec> {
    (-0.3f64..0.3, -0.3f64..0.3, 0.0f64..0.05, any::<u64>()).prop_map(|(theta_alice, theta_bob, w, seed)| NoiseSpec {
        theta_alice,
        theta_bob,
        w,
        seed,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn halves_recombine_and_swap_is_an_isometry((x, y) in sized_pair(4)) {
        prop_assert_eq!(x.half_a().unwrap().xor(&x.half_b().unwrap()).unwrap(), x);
        let sx = x.swap_halves().unwrap();
        prop_assert_eq!(sx.swap_halves().unwrap(), x);
        prop_assert_eq!(sx.dot(&y.swap_halves().unwrap()).unwrap(), x.dot(&y).unwrap());
    }

    #[test]
    fn phase_aligned_distance_is_bounded_by_overlap(
        (v, w) in (1usize..=64).prop_flat_map(|d| (unit_vector(d), unit_vector(d))),
    ) {
        let dim = v.len();
        let layout = Layout::new(vec![("r".into(), dim)]).unwrap();
        let v = StateVector::new(v, layout.clone()).unwrap();
        let w = StateVector::new(w, layout).unwrap();
        let eps = 1.0 - inner(&v, &w).unwrap().norm();
        let d = distance_phase_aligned(&v, &w).unwrap();
        prop_assert!(d <= (2.0 * eps).sqrt() + 1e-12, "d = {d}, eps = {eps}");
    }

    #[test]
    fn ordered_powers_of_commuting_paulis_multiply(n in 1usize..=4, s in any::<u64>(), t in any::<u64>()) {
        let layout = Layout::qubits(n);
        let ops: Vec<_> = (1..=n)
            .map(|k| selftest_lab::linalg::embed_matrix(&Pauli::Z.matrix(), &[k], &layout).unwrap())
            .collect();
        let mask = (1u64 << n) - 1;
        let s = BitString::from_value(s & mask, n).unwrap();
        let t = BitString::from_value(t & mask, n).unwrap();
        let lhs = ordered_power(&ops, &s).unwrap() * ordered_power(&ops, &t).unwrap();
        let rhs = ordered_power(&ops, &s.xor(&t).unwrap()).unwrap();
        prop_assert!((lhs - rhs).norm() < STRUCTURE_TOL);
    }

    #[test]
    fn bounds_are_nonnegative_and_flag_vacuity(
        half in 1usize..=2,
        w_frac in 0.0f64..=1.0,
        e in prop::array::uniform6(0.0f64..0.5),
    ) {
        let n = 2 * half;
        let w = (w_frac * n as f64).floor() as usize;
        let bundle = EpsilonBundle { eps: e[0], eps1: e[1], eps2: e[2], eps3: e[3], eps4: e[4], delta: e[5] };
        for name in BoundName::ALL {
            let r = evaluate_bound(name, n, w, &bundle).unwrap();
            prop_assert!(r.value >= 0.0 && r.value.is_finite(), "{name}: {}", r.value);
            prop_assert_eq!(r.vacuous, r.value > VACUOUS_ABOVE);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn noisy_strategies_stay_valid(spec in noise(), spp in any::<bool>()) {
        let honest = if spp { honest_spp_strategy(1) } else { honest_my_strategy(1) }.unwrap();
        let s = perturb_strategy(&honest, &spec).unwrap();
        prop_assert!(validate_strategy(&s).passed());
    }

    #[test]
    fn isometry_preserves_norms(spec in noise(), v in unit_vector(4)) {
        let s = perturb_strategy(&honest_my_strategy(1).unwrap(), &spec).unwrap();
        let plan = IsometryPlan::new(&s, TestFlavor::My).unwrap();
        prop_assert_eq!(plan.system_dim(), 4);
        let out = plan.apply(&v).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < NORM_TOL);
        prop_assert!((plan.junk().unwrap().norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn both_referees_agree(spec in noise()) {
        let s = perturb_strategy(&honest_spp_strategy(1).unwrap(), &spec).unwrap();
        let a = game_expectation_exact(&s).unwrap();
        let b = alternative_referee_expectation(&s).unwrap();
        prop_assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn zero_noise_leaves_expectations_unchanged() {
    let honest = honest_my_strategy(2).unwrap();
    let same = perturb_strategy(&honest, &NoiseSpec::default()).unwrap();
    let (a, b) = (epsilon_my(&honest).unwrap(), epsilon_my(&same).unwrap());
    for (x, y) in a.entries.iter().zip(&b.entries) {
        assert_eq!(x.measured, y.measured);
    }
}

#[test]
fn rotation_never_decreases_epsilon() {
    let honest = honest_my_strategy(1).unwrap();
    let eps: Vec<f64> = (0..10)
        .map(|i| {
            let theta = 0.3 * i as f64 / 9.0;
            let noise = NoiseSpec { theta_alice: theta, theta_bob: theta, ..Default::default() };
            epsilon_my(&perturb_strategy(&honest, &noise).unwrap()).unwrap().eps
        })
        .collect();
    assert!(eps.windows(2).all(|w| w[1] >= w[0]), "{eps:?}");
}
