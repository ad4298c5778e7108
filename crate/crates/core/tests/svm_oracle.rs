mod common;

use common::{dual_oracle, random_instance, relative_error, signs};
use picpriv::svm::{grid_search_cv, smo_train, smo_train_with_info, solve_dual, GridSpec, KernelSpec, SmoParams};
use picpriv::PrivacyLabel::{self, Private as P, Public as U};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn eight_points_match_dense_oracle() {
    let x = vec![
        vec![2.0, 2.0],
        vec![3.0, 1.5],
        vec![2.5, 3.0],
        vec![4.0, 2.5],
        vec![-1.0, -0.5],
        vec![0.0, -2.0],
        vec![-2.0, 0.5],
        vec![-0.5, -1.5],
    ];
    let y = vec![P, P, P, P, U, U, U, U];
    let spec = KernelSpec::Poly { degree: 1 };
    let model = smo_train(&x, &y, &SmoParams::new(10.0, spec)).unwrap();
    for (xi, yi) in x.iter().zip(&y) {
        assert_eq!(model.predict(xi).unwrap(), *yi);
    }
    let oracle = dual_oracle(&x, &signs(&y), 10.0, &spec);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let p = vec![rng.gen_range(-3.0..5.0), rng.gen_range(-3.0..4.0)];
        let ours = model.decision_value(&p).unwrap();
        let theirs = oracle.decision(&x, &signs(&y), &spec, &p);
        assert!((ours - theirs).abs() <= 1e-3 * theirs.abs().max(1.0), "{ours} vs {theirs}");
    }
}

#[test]
fn objective_tracks_oracle_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for case in 0..40 {
        let (x, y, c, spec) = random_instance(&mut rng);
        let (_, info) = smo_train_with_info(&x, &y, &SmoParams::new(c, spec)).unwrap();
        let oracle = dual_oracle(&x, &signs(&y), c, &spec);
        let rel = relative_error(info.objective, oracle.objective, 1e-12);
        assert!(
            info.objective >= oracle.objective - 1e-3 * oracle.objective.abs() && rel <= 1e-3,
            "case {case}: smo {} oracle {} ({spec}, C={c}, n={})",
            info.objective,
            oracle.objective,
            x.len()
        );
    }
}

/// Two concentric rings. The winner is double-checked by exhaustive evaluation on held-out
/// points.
#[test]
fn two_rings_select_the_separating_gamma() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ring = |rng: &mut ChaCha8Rng, r: f64| {
        let t = rng.gen_range(0.0..std::f64::consts::TAU);
        let rr = r + rng.gen_range(-0.3..0.3);
        vec![rr * t.cos(), rr * t.sin()]
    };
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..120 {
        if i % 4 == 0 {
            x.push(ring(&mut rng, 2.0));
            y.push(P);
        } else {
            x.push(ring(&mut rng, 6.0));
            y.push(U);
        }
    }
    let grid = GridSpec {
        c_values: vec![1.0],
        kernels: vec![KernelSpec::Rbf { gamma: 0.05 }, KernelSpec::Rbf { gamma: 5.0 }],
        folds: 4,
    };
    let r = grid_search_cv(&x, &y, &grid, 11, false).unwrap();
    assert_eq!(r.best_kernel, KernelSpec::Rbf { gamma: 0.05 });

    // exhaustive check of the same claim on fresh points
    let test: Vec<(Vec<f64>, PrivacyLabel)> = (0..200)
        .map(|i| {
            if i % 4 == 0 {
                (ring(&mut rng, 2.0), P)
            } else {
                (ring(&mut rng, 6.0), U)
            }
        })
        .collect();
    let acc = |gamma: f64| {
        let m = smo_train(&x, &y, &SmoParams::new(1.0, KernelSpec::Rbf { gamma })).unwrap();
        test.iter().filter(|(p, l)| m.predict(p).unwrap() == *l).count() as f64 / test.len() as f64
    };
    assert!(acc(0.05) > acc(5.0));
}

#[test]
fn duplicating_points_keeps_the_decision_function() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10 {
        let (x, y, c, spec) = random_instance(&mut rng);
        let once = dual_oracle(&x, &signs(&y), c, &spec);
        let x2: Vec<Vec<f64>> = x.iter().chain(&x).cloned().collect();
        let y2: Vec<PrivacyLabel> = y.iter().chain(&y).copied().collect();
        // each copy gets half of the original multiplier, so the box doubles with it
        let model = smo_train(&x2, &y2, &SmoParams::new(c / 2.0, spec)).unwrap();
        let twice = dual_oracle(&x2, &signs(&y2), c / 2.0, &spec);
        for p in x.iter().take(10) {
            let a = once.decision(&x, &signs(&y), &spec, p);
            let b = twice.decision(&x2, &signs(&y2), &spec, p);
            assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "oracle {a} vs {b}");
            let ours = model.decision_value(p).unwrap();
            assert!((ours - a).abs() <= 2e-2 * a.abs().max(1.0), "smo {ours} vs {a}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dual_stays_feasible(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y, c, spec) = random_instance(&mut rng);
        let (alpha, _, _) = solve_dual(&x, &y, &SmoParams::new(c, spec)).unwrap();
        let balance: f64 = alpha.iter().zip(signs(&y)).map(|(a, s)| a * s).sum();
        prop_assert!(alpha.iter().all(|&a| (0.0..=c).contains(&a)));
        prop_assert!(balance.abs() <= 1e-6 * c);
    }

    #[test]
    fn kernels_are_symmetric(a in prop::collection::vec(-5.0..5.0f64, 1..8), seed in any::<u64>(), gamma in 0.001..10.0f64, degree in 1u32..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = a.iter().map(|_| rng.gen_range(-5.0..5.0)).collect();
        for spec in [KernelSpec::Rbf { gamma }, KernelSpec::Poly { degree }] {
            prop_assert_eq!(spec.eval(&a, &b).to_bits(), spec.eval(&b, &a).to_bits());
        }
    }
}
