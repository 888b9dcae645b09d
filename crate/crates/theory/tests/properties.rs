use fragmgan_theory::{
    c_of_g, optimal_discriminator, posterior_check, random_simplex, run_suite, shared_deviation,
    solve_shared, verify_gain_mar, verify_recovery, DiscreteGenerator, DiscreteInstance,
    GainInstance, Mechanism, RandomInstance, SuiteConfig,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mechanism() -> impl Strategy<Value = Mechanism> {
    prop_oneof![
        Just(Mechanism::Mcar),
        Just(Mechanism::Mar),
        Just(Mechanism::Mnar)
    ]
}

fn instance() -> impl Strategy<Value = (RandomInstance, u64)> {
    (
        1usize..=4,
        1usize..=4,
        1usize..=4,
        mechanism(),
        any::<bool>(),
        any::<u64>(),
    )
        .prop_map(|(n_o, n_m, k, mechanism, pattern1_complete, seed)| {
            (
                RandomInstance {
                    n_o,
                    n_m,
                    k,
                    mechanism,
                    pattern1_complete,
                },
                seed,
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn simplex_points_are_distributions(n in 1usize..10, seed in any::<u64>()) {
        let p = random_simplex(n, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(p.len(), n);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn objective_forms_agree((spec, seed) in instance()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = DiscreteInstance::random(&spec, &mut rng);
        let gen = DiscreteGenerator::random(&inst, &mut rng);
        let c = c_of_g(&inst, &gen);
        prop_assert!((c.direct - c.kl_form - c.constant).abs() < 1e-10);
        prop_assert!(c.kl_form >= -1e-15);
        prop_assert!(c.constant <= 1e-15);
    }

    #[test]
    fn posterior_rows_are_distributions((spec, seed) in instance()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = DiscreteInstance::random(&spec, &mut rng);
        let gen = DiscreteGenerator::random(&inst, &mut rng);
        let d = optimal_discriminator(&inst, &gen);
        for o in 0..spec.n_o {
            for m in 0..spec.n_m {
                let row = d.get(o, m).unwrap();
                prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        prop_assert!(posterior_check(&inst, &gen).gap < 1e-9);
    }

    #[test]
    fn shared_generators_attain_the_constant((spec, seed) in instance()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = DiscreteInstance::random(&spec, &mut rng);
        let gen = DiscreteGenerator::shared(&inst, |_| random_simplex(spec.n_m, &mut rng)).unwrap();
        prop_assert!(shared_deviation(&inst, &gen) <= 1e-12);
        let c = c_of_g(&inst, &gen);
        prop_assert!((c.direct - c.constant).abs() < 1e-10);
    }

    #[test]
    fn mar_solutions_match_the_data(n_o in 1usize..=4, n_m in 1usize..=4, k in 1usize..=4, seed in any::<u64>()) {
        let spec = RandomInstance { n_o, n_m, k, mechanism: Mechanism::Mar, pattern1_complete: true };
        let inst = DiscreteInstance::random(&spec, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(inst.is_mar());
        prop_assert!(shared_deviation(&inst, &solve_shared(&inst).unwrap()) <= 1e-12);
        let report = verify_recovery(&inst).unwrap();
        prop_assert!(report.holds, "{:?}", report);
    }

    #[test]
    fn gain_chain_holds_under_mar(n_o in 1usize..=3, c0 in 2usize..=3, c1 in 2usize..=3, seed in any::<u64>()) {
        let inst = GainInstance::random(n_o, &[c0, c1], Mechanism::Mar, &mut ChaCha8Rng::seed_from_u64(seed));
        let report = verify_gain_mar(&inst, &[]).unwrap();
        prop_assert!(report.holds, "{:?}", report);
    }
}

#[test]
fn default_suite_passes() {
    let lines = run_suite(&SuiteConfig::default(), None).unwrap();
    for line in &lines {
        assert!(line.passed, "{line:?}");
    }
}
