use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rducb::{additive_kernel, gram_matrix, information_gain, sample_random_tree, Decomposition, KernelParams};

fn points(rng: &mut ChaCha8Rng, t: usize, d: usize) -> Vec<Vec<f64>> {
    (0..t).map(|_| (0..d).map(|_| rng.random()).collect()).collect()
}

fn lengthscales(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(0.1..1.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn kernel_is_symmetric(seed in any::<u64>(), d in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = sample_random_tree(d, rng.random_range(0..d), &mut rng).unwrap();
        let p = KernelParams::new(lengthscales(&mut rng, d), 0.01).unwrap();
        let xs = points(&mut rng, 2, d);
        let a = additive_kernel(&g, &p, &xs[0], &xs[1]).unwrap();
        let b = additive_kernel(&g, &p, &xs[1], &xs[0]).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a > 0.0 && a <= g.len() as f64);
    }

    #[test]
    fn gram_plus_noise_is_positive_definite(seed in any::<u64>(), d in 1usize..6, t in 1usize..25) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = sample_random_tree(d, rng.random_range(0..d), &mut rng).unwrap();
        let noise = rng.random_range(1e-4..0.1);
        let p = KernelParams::new(lengthscales(&mut rng, d), noise).unwrap();
        let xs = points(&mut rng, t, d);
        let k = gram_matrix(&g, &p, &xs);
        prop_assert!((k.clone() - k.transpose()).amax() == 0.0);
        for i in 0..t {
            prop_assert_eq!(k[(i, i)], g.len() as f64);
        }
        let shifted = k + DMatrix::identity(t, t) * noise;
        prop_assert!(shifted.clone().cholesky().is_some());
        let min_eig = shifted.symmetric_eigenvalues().min();
        prop_assert!(min_eig >= noise * (1.0 - 1e-9) - 1e-12, "min eigenvalue {min_eig} below {noise}");
    }

    #[test]
    fn information_gain_grows_with_added_psd_term(seed in any::<u64>(), t in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 3;
        let p = KernelParams::new(lengthscales(&mut rng, d), 0.01).unwrap();
        let xs = points(&mut rng, t, d);
        let base = gram_matrix(&Decomposition::separable(d), &p, &xs);
        let a = DMatrix::from_fn(t, 2, |_, _| rng.random_range(-1.0..1.0));
        let bigger = &base + &a * a.transpose();
        let ig = information_gain(&base, 0.1).unwrap();
        prop_assert!(ig >= 0.0);
        prop_assert!(information_gain(&bigger, 0.1).unwrap() >= ig - 1e-12);
    }
}

#[test]
fn tree_gain_below_full_pairwise_gain() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let d = 5;
    let full = Decomposition::full_pairwise(d);
    for _ in 0..50 {
        let g = sample_random_tree(d, rng.random_range(0..d), &mut rng).unwrap();
        let p = KernelParams::new(lengthscales(&mut rng, d), 0.01).unwrap();
        let xs = points(&mut rng, 8, d);
        let tree = information_gain(&gram_matrix(&g, &p, &xs), 0.1).unwrap();
        let all = information_gain(&gram_matrix(&full, &p, &xs), 0.1).unwrap();
        assert!(tree <= all + 1e-9, "{tree} > {all}");
    }
}
