use community_sdp::info::{gamma_pair, kl_bern, rate_i, solve_tau12, tau_star};
use proptest::prelude::*;

fn ordered_pq() -> impl Strategy<Value = (f64, f64)> {
    (1e-6f64..1.0 - 1e-6, 1e-6f64..1.0 - 1e-6).prop_map(|(x, y)| (x.max(y), x.min(y)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn divergence_sandwich((p, q) in ordered_pq()) {
        let d = kl_bern(p, q).unwrap();
        let lo = (p - q).powi(2) / (2.0 * p * (1.0 - q));
        let hi = (p - q).powi(2) / (q * (1.0 - q));
        // Relative slack only for rounding in the closed forms.
        let slack = 1e-12 * hi.max(1e-300);
        prop_assert!(lo <= d + slack, "lower: {lo} > {d}");
        prop_assert!(d <= hi + slack, "upper: {d} > {hi}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn kl_increasing_above_q(q in 0.01f64..0.9, s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let (a, b) = (s.min(t), s.max(t));
        prop_assume!(b - a > 1e-9);
        let x = q + (1.0 - q) * a;
        let y = q + (1.0 - q) * b;
        prop_assert!(kl_bern(x, q).unwrap() < kl_bern(y, q).unwrap());
    }

    #[test]
    fn tau12_residuals(n in 10usize..5000, f in 0.01f64..0.5, (p, q) in ordered_pq()) {
        let k = ((n as f64 * f) as usize).clamp(2, n - 2);
        prop_assume!(p - q > 1e-3);
        let Ok((t1, t2)) = solve_tau12(n, k, p, q) else { return Ok(()) };
        let kf = k as f64;
        prop_assert!((kf * kl_bern(t1, p).unwrap() - kf.ln()).abs() <= 1e-10);
        prop_assert!((kf * kl_bern(t2, q).unwrap() - ((n - k) as f64).ln()).abs() <= 1e-10);
        prop_assert!(t1 < p && t2 > q);
    }

    #[test]
    fn rate_function_zero_only_on_diagonal(x in 1e-3f64..50.0, y in 1e-3f64..50.0) {
        prop_assert!(rate_i(x, x).abs() <= 1e-12 * x);
        if (x - y).abs() > 1e-6 * x.max(y) {
            prop_assert!(rate_i(x, y) > 0.0);
        }
    }

    #[test]
    fn gamma_pair_solves_rate_equations(rho in 0.05f64..20.0, a in 0.1f64..20.0, f in 0.01f64..0.99) {
        prop_assume!(rho * a > 1.0);
        let b = a * f;
        let (g1, g2) = gamma_pair(rho, a, b).unwrap();
        prop_assert!(g1 < a && g2 > b);
        prop_assert!((rho * rate_i(a, g1) - 1.0).abs() <= 1e-9);
        prop_assert!((rho * rate_i(b, g2) - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn tau_star_between_q_and_p_for_large_communities(p in 0.3f64..0.95, f in 0.05f64..0.9) {
        let q = p * f;
        let t = tau_star(100_000, 50_000, p, q).unwrap();
        prop_assert!(t.in_range, "{t:?}");
    }
}
