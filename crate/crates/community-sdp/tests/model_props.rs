use std::collections::HashMap;

use community_sdp::model::{
    cluster_matrix, gen_instance, gen_sbm, rng_from_seed, score_matrix, ModelKind, ModelSpec, ScoreKind,
};
use proptest::prelude::*;
use rand::Rng;

fn spec_strategy() -> impl Strategy<Value = ModelSpec> {
    prop_oneof![
        (2usize..30, 0.0f64..1.0, 0.01f64..3.0).prop_map(|(n, f, mu)| {
            let k = 2 + ((n - 2) as f64 * f) as usize;
            ModelSpec::gaussian(n, k, mu)
        }),
        (2usize..30, 0.0f64..1.0, 0.0f64..=1.0, 0.0f64..=1.0).prop_filter_map("need q < p", |(n, f, x, y)| {
            let k = 2 + ((n - 2) as f64 * f) as usize;
            (x != y).then(|| ModelSpec::bernoulli(n, k, x.max(y), x.min(y)))
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generated_matrices_symmetric_with_zero_diagonal(spec in spec_strategy(), seed in any::<u64>()) {
        let inst = gen_instance(&spec, seed).unwrap();
        let a = &inst.a;
        for i in 0..spec.n {
            prop_assert_eq!(a.get(i, i), 0.0);
            for j in 0..spec.n {
                prop_assert_eq!(a.get(i, j).to_bits(), a.get(j, i).to_bits());
            }
        }
        let c = inst.community();
        prop_assert_eq!(c.len(), spec.k);
        prop_assert!(c.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(c.iter().all(|&i| i < spec.n));
    }

    #[test]
    fn same_seed_is_bit_identical(spec in spec_strategy(), seed in any::<u64>()) {
        let x = gen_instance(&spec, seed).unwrap();
        let y = gen_instance(&spec, seed).unwrap();
        prop_assert_eq!(&x.truth, &y.truth);
        let bits = |m: &[f64]| m.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(x.a.as_slice()), bits(y.a.as_slice()));
    }

    #[test]
    fn cluster_matrix_trace_and_mass(n in 1usize..40, f in 0.0f64..1.0, seed in any::<u64>()) {
        let k = ((n as f64 * f) as usize).max(1);
        let mut rng = rng_from_seed(seed);
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            idx.swap(i, rng.random_range(0..=i));
        }
        let mut truth = idx[..k].to_vec();
        truth.sort_unstable();
        let z = cluster_matrix(&truth, n);
        prop_assert_eq!(z.trace(), k as f64);
        prop_assert_eq!(z.sum(), (k * k) as f64);
    }

    #[test]
    fn sbm_partition_covers_vertices(r in 2usize..5, per in 2usize..6, seed in any::<u64>()) {
        let n = r * per;
        let inst = gen_sbm(n, r, 0.7, 0.2, seed).unwrap();
        let blocks = inst.truth.partition().unwrap();
        prop_assert_eq!(blocks.len(), r);
        let mut all: Vec<usize> = blocks.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }
}

#[test]
fn different_seeds_give_different_communities() {
    let spec = ModelSpec::gaussian(50, 7, 1.0);
    let a = gen_instance(&spec, 1).unwrap();
    let b = gen_instance(&spec, 2).unwrap();
    assert_ne!(a.truth, b.truth);
}

/// Survival function of chi^2 with an even number of degrees of freedom (closed form).
fn chi2_sf_even_dof(x: f64, dof: usize) -> f64 {
    assert!(dof % 2 == 0);
    let h = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for i in 1..dof / 2 {
        term *= h / i as f64;
        sum += term;
    }
    (-h).exp() * sum
}

#[test]
fn community_draws_uniform_over_subsets() {
    let spec = ModelSpec::gaussian(6, 2, 1.0);
    let draws = 6000;
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    for seed in 0..draws {
        *counts.entry(gen_instance(&spec, seed).unwrap().community().to_vec()).or_default() += 1;
    }
    assert_eq!(counts.len(), 15);
    let expected = draws as f64 / 15.0;
    let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = chi2_sf_even_dof(chi2, 14);
    assert!(p > 0.001, "chi2 = {chi2}, p = {p}");
}

#[test]
fn chi2_tail_reference_values() {
    // Reference: 1 - CDF of chi^2_14 at 23.685 is 0.05, at 6.571 is 0.95.
    assert!((chi2_sf_even_dof(23.684_791, 14) - 0.05).abs() < 1e-5);
    assert!((chi2_sf_even_dof(6.570_631, 14) - 0.95).abs() < 1e-5);
}

#[test]
fn llr_mean_inside_exceeds_mean_outside() {
    let draws = 100_000;
    let mut rng = rng_from_seed(99);
    // Gaussian: L = μ(x - μ/2).
    let mu = 0.7f64;
    let (mut sp, mut sq) = (0.0, 0.0);
    for _ in 0..draws {
        let z: f64 = rng.sample(rand_distr::StandardNormal);
        sp += mu * (z + mu - mu / 2.0);
        sq += mu * (z - mu / 2.0);
    }
    assert!(sp / draws as f64 >= sq / draws as f64);

    // Bernoulli: sample means of the LLR score over in-community and cross pairs.
    let spec = ModelSpec::bernoulli(20, 10, 0.6, 0.3);
    let (mut sp, mut np, mut sq, mut nq) = (0.0, 0usize, 0.0, 0usize);
    let mut seed = 0;
    while np < draws || nq < draws {
        let inst = gen_instance(&spec, seed).unwrap();
        let l = score_matrix(&inst, ScoreKind::Llr).unwrap();
        let inside = community_sdp::model::mask(inst.community(), 20);
        for i in 0..20 {
            for j in i + 1..20 {
                if inside[i] && inside[j] {
                    sp += l.get(i, j);
                    np += 1;
                } else if inside[i] != inside[j] {
                    sq += l.get(i, j);
                    nq += 1;
                }
            }
        }
        seed += 1;
    }
    assert!(sp / np as f64 >= sq / nq as f64, "{} vs {}", sp / np as f64, sq / nq as f64);
    assert_eq!(spec.kind, ModelKind::Bernoulli);
}
