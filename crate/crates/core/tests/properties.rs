mod common;

use proptest::prelude::*;
use tcl_mfc::bregman::{gamma_marginal_form, gamma_policy_form, kl};
use tcl_mfc::heater::{rounding_distribution, transition, HeaterParams, PhysicalSpec};
use tcl_mfc::mdp::{policy_from_distribution, propagate};
use tcl_mfc::objective::{build_target, step_deviation, ConsumptionObservable};
use tcl_mfc::popsim::{count_switches, FleetTrace};
use tcl_mfc::solvers::{monotonicity_gap, monotonicity_gap_closed_form};

fn shape() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (1usize..=4, 1usize..=3, 1usize..=4, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn propagation_conserves_mass((nx, na, n, seed) in shape()) {
        let mut r = common::rng(seed);
        let k = common::kernel(&mut r, nx, na, n, true);
        let pi = common::policy(&mut r, nx, na, n);
        let mu0 = common::simplex(&mut r, nx * na, true);
        let mu = propagate(&mu0, &pi, &k).unwrap();
        for step in 0..=n {
            let s = mu.slice(step);
            prop_assert!(s.iter().all(|m| *m >= 0.0));
            prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        prop_assert!(mu.validate().is_ok());
    }

    #[test]
    fn recovered_policy_reproduces_flow((nx, na, n, seed) in shape()) {
        let mut r = common::rng(seed);
        let k = common::kernel(&mut r, nx, na, n, true);
        let pi = common::policy(&mut r, nx, na, n);
        let mu0 = common::simplex(&mut r, nx * na, false);
        let mu = propagate(&mu0, &pi, &k).unwrap();
        let back = propagate(&mu0, &policy_from_distribution(&mu), &k).unwrap();
        prop_assert!(back.max_abs_diff(&mu) < 1e-12);
    }

    #[test]
    fn divergence_is_nonnegative_and_strongly_convex((nx, na, n, seed) in shape()) {
        let mut r = common::rng(seed);
        let k = common::kernel(&mut r, nx, na, n, true);
        let mu0 = common::simplex(&mut r, nx * na, false);
        let pi = common::policy(&mut r, nx, na, n);
        let pi_ref = common::policy(&mut r, nx, na, n);
        let mu = propagate(&mu0, &pi, &k).unwrap();
        let mu_ref = propagate(&mu0, &pi_ref, &k).unwrap();
        let g = gamma_policy_form(&mu, &pi, &pi_ref).unwrap().value.value();
        prop_assert!(g >= -1e-12);
        prop_assert!(g + 1e-12 >= 0.5 * mu.sup_l1_distance(&mu_ref).powi(2));
        prop_assert!(gamma_marginal_form(&mu, &mu).unwrap().value().abs() < 1e-12);
    }

    #[test]
    fn kl_is_nonnegative(seed in any::<u64>(), k in 1usize..6) {
        let mut r = common::rng(seed);
        let a = common::simplex(&mut r, k, true);
        let b = common::interior(&mut r, k, 1e-3);
        prop_assert!(kl(&a, &b).unwrap().value() >= -1e-15);
    }

    #[test]
    fn monotonicity_gap_is_nonpositive(seed in any::<u64>(), nx in 1usize..6, gamma in 0.0f64..1.0) {
        let mut r = common::rng(seed);
        let phi: ConsumptionObservable = common::observable(&mut r, nx);
        let a = common::simplex(&mut r, nx * 2, true);
        let b = common::simplex(&mut r, nx * 2, true);
        let g = monotonicity_gap(&a, &b, gamma, &phi);
        prop_assert!(g <= 1e-12);
        prop_assert!((g - monotonicity_gap_closed_form(&a, &b, &phi)).abs() <= 1e-12);
    }

    #[test]
    fn heater_rows_are_stochastic(
        mode in 0u8..2, action in 0u8..2, temp in 25i32..=65, q in 0.0f64..=1.0, litres in 0.0f64..60.0,
        volume in 0.05f64..0.5, power in 500.0f64..5000.0,
    ) {
        let spec = PhysicalSpec { volume, rated_power: power, ..PhysicalSpec::default() };
        let p = HeaterParams::from_spec(&spec, 50, 65, 25, 18.0, 10.0).unwrap();
        let space = p.state_space();
        let row = transition(&space, &p, mode, temp, action, q, litres);
        prop_assert!(row.len() <= 4);
        prop_assert!((row.iter().map(|e| e.1).sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(row.iter().all(|(x, w)| *x < space.len() && *w >= 0.0));
        for (x, w) in row {
            let (m, t) = space.decode(x).unwrap();
            if w > 0.0 && t < p.t_min {
                prop_assert_eq!(m, 1);
            }
        }
    }

    #[test]
    fn rounding_is_unbiased(theta in -100.0f64..100.0) {
        let d = rounding_distribution(theta);
        let mean: f64 = d.iter().map(|(t, w)| *t as f64 * w).sum();
        prop_assert!((mean - theta).abs() < 1e-9);
        prop_assert!((d.iter().map(|e| e.1).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn targets_stay_in_unit_interval(seed in any::<u64>(), amp in 0.0f64..0.5) {
        let mut r = common::rng(seed);
        let base: Vec<f64> = (0..144).map(|_| rand::Rng::gen::<f64>(&mut r)).collect();
        let dev = step_deviation(30, 6, amp, 144).unwrap();
        let (t, _) = build_target(&base, &dev).unwrap();
        prop_assert!(t.values().iter().all(|g| (0.0..=1.0).contains(g)));
    }

    #[test]
    fn switch_counts_are_bounded(modes in proptest::collection::vec(proptest::collection::vec(0u8..2, 145), 1..5)) {
        let t = FleetTrace::from_modes(modes, 144.0).unwrap();
        let s = count_switches(&t);
        prop_assert!((0.0..=143.0).contains(&s));
    }
}
