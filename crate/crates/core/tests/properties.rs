mod common;

use halfspace_lab::concepts::{Label, LabeledSample};
use halfspace_lab::dims::{littlestone_dim, vc_dim};
use halfspace_lab::geometry::{sample_uniform_sphere, SeededRng};
use halfspace_lab::learner::concentration_bound;
use halfspace_lab::rounding::{build_net, round_to_net};
use halfspace_lab::svm::{hard_svm, DEFAULT_TOL};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rounding_is_nearest_and_within_alpha(d in 2usize..=4, alpha in 0.3f64..0.8, seed in any::<u64>()) {
        let net = build_net(d, alpha, seed).unwrap();
        let mut rng = SeededRng::new(seed, 1);
        for _ in 0..200 {
            let x = sample_uniform_sphere(d, &mut rng).unwrap();
            let (z, i) = round_to_net(&net, &x).unwrap();
            prop_assert!(z.distance(&x).unwrap() < alpha);
            prop_assert_eq!(Some(i), net.nearest_linear(x.coords()).map(|(j, _)| j));
        }
    }
}

proptest! {
    #[test]
    fn svm_separates_and_beats_the_planted_margin(d in 2usize..=6, n in 1usize..=40, seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed, 0);
        let w = sample_uniform_sphere(d, &mut rng).unwrap();
        let mut pairs = Vec::new();
        while pairs.len() < n {
            let x = sample_uniform_sphere(d, &mut rng).unwrap();
            let s: f64 = x.coords().iter().zip(w.coords()).map(|(a, b)| a * b).sum();
            if s.abs() >= 0.02 {
                pairs.push((x, Label::of(s)));
            }
        }
        let planted = pairs
            .iter()
            .map(|(x, y)| y.sign() * x.coords().iter().zip(w.coords()).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        let sol = hard_svm(&LabeledSample::new(pairs.clone()).unwrap(), DEFAULT_TOL).unwrap();
        prop_assert!(sol.margin >= planted - 1e-7);
        for (x, y) in &pairs {
            let s: f64 = x.coords().iter().zip(sol.w.coords()).map(|(a, b)| a * b).sum();
            prop_assert!(y.sign() * s >= sol.margin - 1e-9);
        }
    }

    #[test]
    fn dimensions_agree_with_brute_force_and_are_ordered(rows in 1usize..=7, cols in 1usize..=7, seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed, 0);
        let star_p = rng.random_range(0.0..0.6);
        let m = common::random_partial_matrix(rows, cols, star_p, &mut rng);
        let (vc, _) = vc_dim(&m).unwrap();
        let (ldim, cert) = littlestone_dim(&m).unwrap();
        prop_assert_eq!(ldim as i64, common::naive_ldim(&m));
        prop_assert_eq!(vc, common::naive_vc(&m));
        prop_assert!(cert.validate(&m));
        prop_assert!(vc <= ldim);
        prop_assert!(1usize << ldim <= rows);
    }

    #[test]
    fn forked_streams_are_reproducible(seed in any::<u64>(), index in 0u64..1000) {
        let root = SeededRng::new(seed, 0);
        let draw = |mut r: SeededRng| (0..4).map(|_| r.random::<u64>()).collect::<Vec<_>>();
        let a = draw(root.fork("x", index));
        let b = draw(root.fork("x", index));
        let c = draw(root.fork("x", index + 1));
        prop_assert_eq!(&a, &b);
        prop_assert_ne!(&a, &c);
    }

    #[test]
    fn concentration_bound_decreases_in_t_and_k(d in 1usize..=8, k in 1usize..500, t in 0.01f64..2.0) {
        let b = concentration_bound(d, k, t, 1.0);
        prop_assert!(concentration_bound(d, k, t * 1.5, 1.0) <= b);
        prop_assert!(concentration_bound(d, k + 1, t, 1.0) <= b);
    }
}
