use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rducb::acquisition::AcquisitionSpec;
use rducb::optimizer::build_tables;
use rducb::{brute_force_max, fit, maximize_additive, sample_random_tree, Dataset, DomainSpec, FitOptions, GpModel, KernelParams, MaximizeOptions};

fn instance(seed: u64) -> (GpModel, AcquisitionSpec, usize, DomainSpec) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(1..=4);
    let grid = rng.random_range(2..=15);
    let g = sample_random_tree(d, rng.random_range(0..d), &mut rng).unwrap();
    let t = rng.random_range(0..=10);
    let xs: Vec<Vec<f64>> = (0..t).map(|_| (0..d).map(|_| rng.random()).collect()).collect();
    let ys: Vec<f64> = (0..t).map(|_| rng.random_range(-1.0..1.0)).collect();
    let model = if t == 0 {
        GpModel::prior(g, KernelParams::uniform(d, 0.3, 1e-3).unwrap()).unwrap()
    } else {
        fit(&Dataset::new(xs.clone(), ys).unwrap(), &g, &FitOptions::default(), &mut rng).unwrap()
    };
    let spec = if t > 0 && rng.random_bool(0.3) { AcquisitionSpec::ei(xs[0].clone()) } else { AcquisitionSpec::ucb() };
    (model, spec, rng.random_range(1..40), DomainSpec::unit(d, grid).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn message_passing_equals_enumeration(seed in any::<u64>()) {
        let (model, spec, t, domain) = instance(seed);
        let mp = maximize_additive(&model, &spec, t, &domain, &MaximizeOptions::default()).unwrap();
        let bf = brute_force_max(&model, &spec, t, &domain).unwrap();
        prop_assert!((mp.value - bf.value).abs() <= 1e-10);
        prop_assert_eq!(mp.indices, bf.indices);
        prop_assert_eq!(mp.x, bf.x);
    }

    #[test]
    fn argmax_ignores_constant_shift_of_one_component(seed in any::<u64>(), shift in -5.0f64..5.0, pick in any::<usize>()) {
        let (model, spec, t, domain) = instance(seed);
        let mut tables = build_tables(&model, &spec, t, &domain, 1024.0).unwrap();
        let (idx, value) = tables.maximize();
        let comps = model.decomposition().components();
        let c = &comps[pick % comps.len()];
        tables.shift_component(c, shift).unwrap();
        let (idx2, value2) = tables.maximize();
        prop_assert_eq!(idx, idx2);
        prop_assert!((value2 - value - shift).abs() <= 1e-10);
    }

    #[test]
    fn component_terms_ignore_other_dimensions(seed in any::<u64>()) {
        let (model, spec, t, _) = instance(seed);
        let d = model.decomposition().dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 7);
        let x: Vec<f64> = (0..d).map(|_| rng.random()).collect();
        for c in model.decomposition().components() {
            let before = rducb::acquisition::component_term(&model, c, &c.project(&x), &spec, t).unwrap();
            let mut y = x.clone();
            for (i, v) in y.iter_mut().enumerate() {
                if !c.contains(i + 1) {
                    *v = rng.random();
                }
            }
            let after = rducb::acquisition::component_term(&model, c, &c.project(&y), &spec, t).unwrap();
            prop_assert_eq!(before.to_bits(), after.to_bits());
        }
    }
}
