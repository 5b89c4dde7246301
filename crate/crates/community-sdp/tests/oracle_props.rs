use community_sdp::model::{gen_instance, rng_from_seed, ModelSpec, SymMatrix};
use community_sdp::oracle::{mle_exhaustive, subset_value, swap_check};
use community_sdp::sdp::{integral_support, solve_community_sdp, SolverOptions};
use proptest::prelude::*;
use rand::Rng;

/// Plain bitmask enumeration with a per-subset double loop.
fn naive_best(l: &SymMatrix, k: usize) -> (f64, Vec<Vec<usize>>) {
    let n = l.n();
    let mut best = f64::NEG_INFINITY;
    let mut sets = Vec::new();
    for bits in 0u32..(1 << n) {
        if bits.count_ones() as usize != k {
            continue;
        }
        let s: Vec<usize> = (0..n).filter(|&i| bits >> i & 1 == 1).collect();
        let mut v = 0.0;
        for &i in &s {
            for &j in &s {
                if i != j {
                    v += l.get(i, j);
                }
            }
        }
        if v > best + 1e-12 {
            best = v;
            sets.clear();
        }
        if (v - best).abs() <= 1e-12 {
            sets.push(s);
        }
    }
    sets.sort();
    (best, sets)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn enumeration_matches_naive(n in 2usize..=10, f in 0.0f64..1.0, seed in any::<u64>(), ints in any::<bool>()) {
        let k = 1 + ((n - 1) as f64 * f) as usize;
        let mut rng = rng_from_seed(seed);
        // Small integer entries force ties.
        let l = SymMatrix::from_upper(n, |_, _| {
            if ints { rng.random_range(-2..=2) as f64 } else { rng.random_range(-1.0..1.0) }
        });
        let got = mle_exhaustive(&l, k).unwrap();
        let (best, sets) = naive_best(&l, k);
        prop_assert!((got.best_value - best).abs() <= 1e-12 * (1.0 + best.abs()));
        if ints {
            prop_assert_eq!(&got.maximizers, &sets);
        } else {
            prop_assert!(sets.contains(&got.maximizers[0]));
        }
        for s in &got.maximizers {
            prop_assert_eq!(subset_value(&l, s), got.best_value);
        }
    }

    #[test]
    fn maximizers_admit_no_improving_swap(n in 3usize..=11, f in 0.0f64..1.0, seed in any::<u64>()) {
        let k = 1 + ((n - 2) as f64 * f) as usize;
        let mut rng = rng_from_seed(seed);
        let l = SymMatrix::from_upper(n, |_, _| rng.random_range(-1.0..1.0));
        let got = mle_exhaustive(&l, k).unwrap();
        for s in &got.maximizers {
            let sc = swap_check(&l, s);
            prop_assert!(sc.max_swap_delta <= 1e-12, "{sc:?}");
        }
    }
}

#[test]
fn mle_dominates_integral_solver_output() {
    let spec = ModelSpec::gaussian(12, 4, 2.0);
    for seed in 0..5 {
        let inst = gen_instance(&spec, seed).unwrap();
        let sol = solve_community_sdp(&inst.a, 4, &SolverOptions::default()).unwrap();
        let mle = mle_exhaustive(&inst.a, 4).unwrap();
        if let Some(s) = integral_support(&sol.z, 4, 1e-4) {
            assert!(mle.best_value >= subset_value(&inst.a, &s));
            assert!(mle.maximizers.contains(&s), "seed {seed}: {s:?} vs {:?}", mle.maximizers);
        }
    }
}
