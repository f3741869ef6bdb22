use kr_core::sampling;
use kr_core::*;
use proptest::prelude::*;

fn family(seed: u64, count: usize, max_steps: usize, max_atoms: usize) -> Vec<PathMeasure> {
    sampling::random_family(&mut sampling::rng(seed), count, 1, max_steps, max_atoms)
}

fn exponent() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.0), Just(1.5), Just(2.0), Just(3.0)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quantile_round_trip(seed in any::<u64>()) {
        let mu = &family(seed, 1, 4, 12)[0];
        let q = quantile_process(mu).unwrap();
        prop_assert!(q.is_triangular_increasing());
        prop_assert!(q.is_consistent());
        prop_assert_eq!(&pushforward(&q).unwrap(), mu);
    }

    #[test]
    fn map_json_round_trip(seed in any::<u64>()) {
        let mu = &family(seed, 1, 3, 8)[0];
        let q = quantile_process(mu).unwrap();
        let back = TriangularMap::from_json(&q.to_json()).unwrap();
        prop_assert_eq!(&back, q.as_map());
    }

    #[test]
    fn measure_serialization_round_trip(seed in any::<u64>()) {
        let mu = &family(seed, 1, 3, 8)[0];
        prop_assert_eq!(&parse_measure(&serialize_measure(mu)).unwrap(), mu);
    }

    #[test]
    fn disintegration_round_trip(seed in any::<u64>()) {
        let mu = &family(seed, 1, 4, 10)[0];
        let tree = disintegrate(mu, 0.0);
        for node in tree.nodes().iter().filter(|n| !n.is_leaf()) {
            let total: f64 = node.branches.iter().map(|b| b.weight).sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }
        prop_assert_eq!(&flatten(&tree).unwrap(), mu);
    }

    #[test]
    fn kr_is_a_metric(seed in any::<u64>(), p in exponent()) {
        let f = family(seed, 3, 3, 6);
        let d = |a: usize, b: usize| kr_distance(&f[a], &f[b], p).unwrap();
        prop_assert_eq!(d(0, 0), 0.0);
        prop_assert!((d(0, 1) - d(1, 0)).abs() <= 1e-12);
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-9);
        if f[0] != f[1] {
            prop_assert!(d(0, 1) > 0.0);
        }
    }

    #[test]
    fn kr_equals_quantile_map_distance(seed in any::<u64>(), p in prop_oneof![Just(0.0), exponent()]) {
        let f = family(seed, 2, 3, 8);
        let (qa, qb) = (quantile_process(&f[0]).unwrap(), quantile_process(&f[1]).unwrap());
        let kr = kr_distance(&f[0], &f[1], p).unwrap();
        prop_assert!((kr - map_distance(&qa, &qb, p).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn kr_coupling_is_bicausal_and_comonotone(seed in any::<u64>()) {
        let f = family(seed, 2, 3, 8);
        let c = kr_coupling(&f[0], &f[1]).unwrap();
        let (l, r) = c.marginal_sums();
        for (a, b) in l.iter().zip(f[0].weights()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        for (a, b) in r.iter().zip(f[1].weights()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        prop_assert!(c.is_bicausal(1e-9));
        prop_assert!(c.is_stagewise_comonotone());
    }

    #[test]
    fn distance_chain(seed in any::<u64>(), p in prop_oneof![Just(1.0), Just(2.0)]) {
        let f = family(seed, 2, 3, 6);
        let w = w_distance(&f[0], &f[1], p).unwrap();
        let aw = aw_distance(&f[0], &f[1], p).unwrap();
        let kr = kr_distance(&f[0], &f[1], p).unwrap();
        prop_assert!(w <= aw.value + 1e-9);
        prop_assert!(aw.value <= kr + 1e-9);
        prop_assert!(aw.coupling.is_bicausal(1e-9));
        prop_assert!((aw.coupling.cost(p) - aw.value.powf(p)).abs() <= 1e-9);
    }

    #[test]
    fn adapted_variation_bounds(seed in any::<u64>()) {
        let f = family(seed, 2, 3, 6);
        let av = adapted_variation(&f[0], &f[1]).unwrap();
        let tv = f[0].total_variation(&f[1]).unwrap();
        prop_assert!(tv <= av + 1e-9);
        prop_assert!(av <= 1.0 + 1e-12);
    }

    #[test]
    fn geodesic_has_constant_speed(seed in any::<u64>(), t in 0.0f64..=1.0, p in exponent()) {
        let f = family(seed, 2, 3, 6);
        let total = kr_distance(&f[0], &f[1], p).unwrap();
        let mid = geodesic_point(&f[0], &f[1], t, p).unwrap();
        prop_assert!((kr_distance(&f[0], &mid, p).unwrap() - t * total).abs() <= 1e-9);
        prop_assert!((kr_distance(&mid, &f[1], p).unwrap() - (1.0 - t) * total).abs() <= 1e-9);
    }

    #[test]
    fn barycenter_of_copies(seed in any::<u64>()) {
        let mu = family(seed, 1, 3, 6).pop().unwrap();
        let b = barycenter(&[mu.clone(), mu.clone()], &[0.3, 0.7], 2.0).unwrap();
        prop_assert!(b.approx_eq_atoms(&mu, 1e-12));
    }

    #[test]
    fn convex_combinations_stay_triangular(seed in any::<u64>(), s in 0.0f64..=1.0) {
        let f = family(seed, 2, 3, 6);
        let (qa, qb) = (quantile_process(&f[0]).unwrap(), quantile_process(&f[1]).unwrap());
        let m = convex_combine(&[qa.as_map(), qb.as_map()], &[s, 1.0 - s]).unwrap();
        prop_assert!(m.is_triangular_increasing());
        prop_assert!(m.is_consistent());
    }

    #[test]
    fn tilde_kr_is_symmetric(seed in any::<u64>()) {
        let f = family(seed, 2, 2, 5);
        let (a, _) = tilde_kr(&f[0], &f[1], 2.0).unwrap();
        let (b, _) = tilde_kr(&f[1], &f[0], 2.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-9);
    }

    #[test]
    fn stage_modulus_is_monotone(seed in any::<u64>(), d1 in 0.0f64..3.0, d2 in 0.0f64..3.0) {
        let mu = &family(seed, 1, 2, 6)[0];
        prop_assume!(mu.steps() == 2);
        let (lo, hi) = (d1.min(d2), d1.max(d2));
        prop_assert!(stage_modulus(mu, 2, lo, 2.0).unwrap() <= stage_modulus(mu, 2, hi, 2.0).unwrap() + 1e-9);
    }

    #[test]
    fn two_step_measures_are_markov(seed in any::<u64>()) {
        let mu = &family(seed, 1, 2, 6)[0];
        prop_assert!(is_markov(mu, 0.0));
    }
}
