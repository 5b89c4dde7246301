//! Acceptance criteria C1-C11. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line; exits non-zero if any fails.
//! Positional arguments such as `C5` restrict the run to those criteria.

use std::io::Write as _;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use community_sdp::certify::{
    build_dual_certificate, nec_check, perturbation_solution, sbm_witness, suff_check, verify_kkt,
    vm_witness_bernoulli, vm_witness_gaussian, Means, TauBranch,
};
use community_sdp::info::{kappa, kl_bern, solve_tau12, InfoConfig, InfoError};
use community_sdp::linalg::spectral_norm;
use community_sdp::model::{
    cluster_matrix, gen_instance, gen_sbm, mean_matrix, partition_matrix, rng_from_seed, ModelSpec, ScoreKind,
    SymMatrix,
};
use community_sdp::oracle::mle_exhaustive;
use community_sdp::sdp::{
    check_feasibility, integral_support, max_dist_to_cluster, recovery_diagnostic, solve_community_sdp,
    solve_sbm_sdp, solve_vm, Problem, SolveStatus, SolverOptions, NONUNIQUE_DIST, SUCCESS_TOL,
};
use rand::Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn opts_tol(tol: f64) -> SolverOptions {
    SolverOptions { tol_primal: tol, tol_dual: tol, tol_gap: tol, ..SolverOptions::default() }
}

fn wigner(m: usize, seed: u64) -> SymMatrix {
    let mut rng = rng_from_seed(seed);
    SymMatrix::from_upper(m, |_, _| rng.sample(StandardNormal))
}

fn bernoulli_matrix(m: usize, q: f64, seed: u64) -> SymMatrix {
    let mut rng = rng_from_seed(seed);
    SymMatrix::from_upper(m, |_, _| if rng.random::<f64>() < q { 1.0 } else { 0.0 })
}

fn c1() -> Outcome {
    let spec = ModelSpec::gaussian(12, 4, 3.0);
    let opts = SolverOptions::default();
    let (mut integral, mut agree) = (0, 0);
    for seed in 0..50 {
        let inst = gen_instance(&spec, seed).unwrap();
        let sol = solve_community_sdp(&inst.a, 4, &opts).unwrap();
        if let Some(s) = integral_support(&sol.z, 4, 1e-4) {
            integral += 1;
            if mle_exhaustive(&inst.a, 4).unwrap().maximizers.contains(&s) {
                agree += 1;
            }
        }
    }
    outcome(integral >= 40 && agree == integral, format!("{integral}/50 integral, {agree}/{integral} in MLE set"))
}

fn c2_c3() -> (Outcome, Outcome) {
    let opts = SolverOptions::default();
    let mut specs = Vec::new();
    for n in [60, 120] {
        let k = n / 5;
        for mu in [1.0, 2.0, 4.0] {
            specs.push(ModelSpec::gaussian(n, k, mu));
        }
        specs.push(ModelSpec::bernoulli(n, k, 0.9, 0.2));
        specs.push(ModelSpec::bernoulli(n, k, 0.7, 0.3));
    }
    let (mut total, mut accepted, mut sound_viol, mut suff, mut suff_viol) = (0, 0, 0, 0, 0);
    let mut notes = Vec::new();
    for (si, spec) in specs.iter().enumerate() {
        for t in 0..20u64 {
            let seed = 1000 * si as u64 + t;
            let inst = gen_instance(spec, seed).unwrap();
            let (l, truth) = (&inst.a, inst.community());
            let means = Means::model(spec, ScoreKind::Adjacency).unwrap();
            let zstar = cluster_matrix(truth, spec.n);
            let cert = build_dual_certificate(l, truth, means).unwrap();
            let rep = verify_kkt(l, spec.k, &zstar, &cert, 1e-6).unwrap();
            let sc = suff_check(l, truth, means).unwrap();
            total += 1;
            if sc.margin > 0.0 {
                suff += 1;
                if !(rep.accepted && rep.unique) {
                    suff_viol += 1;
                    notes.push(format!("C3 seed {seed}: {:?}", rep.failures));
                }
            }
            if rep.accepted {
                accepted += 1;
                let sol = solve_community_sdp(l, spec.k, &opts).unwrap();
                let obj = l.inner(&zstar);
                let tied = (sol.objective - obj).abs() <= 1e-5 * (1.0 + sol.objective.abs());
                let recovered = max_dist_to_cluster(&sol.z, truth) <= SUCCESS_TOL;
                if !(tied && recovered) {
                    sound_viol += 1;
                    notes.push(format!("C2 seed {seed}: obj {} vs {obj}, recovered {recovered}", sol.objective));
                }
            }
        }
    }
    for n in &notes {
        eprintln!("  {n}");
    }
    (
        outcome(
            sound_viol == 0 && accepted > 0,
            format!("{accepted}/{total} certificates accepted, {sound_viol} violations"),
        ),
        outcome(suff_viol == 0 && suff > 0, format!("{suff}/{total} with positive margin, {suff_viol} violations")),
    )
}

fn c4() -> Outcome {
    let opts = SolverOptions::default();
    let mut rates = [0.0; 2];
    let mut nonunique = 0;
    for (slot, k) in [50usize, 9].into_iter().enumerate() {
        let spec = ModelSpec::bernoulli(400, k, 1.0, 0.5);
        let mut succ = 0;
        for t in 0..20u64 {
            let inst = gen_instance(&spec, 4000 + 100 * k as u64 + t).unwrap();
            let sol = solve_community_sdp(&inst.a, k, &opts).unwrap();
            let d = recovery_diagnostic(&inst.a, &sol, inst.community(), 1e-6);
            succ += d.success as usize;
            if k == 9 && d.non_unique {
                nonunique += 1;
            }
        }
        rates[slot] = succ as f64 / 20.0;
    }
    let diff = rates[0] - rates[1];
    outcome(
        diff >= 0.8 && nonunique >= 10,
        format!("rate(K=50) {:.2}, rate(K=9) {:.2}, non-unique at K=9 {nonunique}/20", rates[0], rates[1]),
    )
}

fn c5() -> Outcome {
    let (n, k) = (500usize, 22usize);
    let kf = k as f64;
    let mu = 0.5 * (1.0 + n as f64 / (4.0 * kf * kf)).ln().sqrt();
    let spec = ModelSpec::gaussian(n, k, mu);
    // Margins here are O(10) and distances to Z* O(1); 1e-5 keeps 100 n=500 instances in budget.
    let opts = opts_tol(1e-5);
    let a = kf.sqrt() * ((n - k) as f64).powf(0.25);
    let (mut flagged, mut dominated) = (0, 0);
    for seed in 0..100u64 {
        let inst = gen_instance(&spec, 5000 + seed).unwrap();
        let (l, truth) = (&inst.a, inst.community());
        let nec = nec_check(l, truth, &[a], |w, a| solve_vm(w, a, &opts)).unwrap();
        if nec.consistent || nec.worst_margin >= -1e-3 {
            continue;
        }
        flagged += 1;
        let u = nec.argmax_solution.as_ref().unwrap();
        let zstar = cluster_matrix(truth, n);
        let base = l.inner(&zstar);
        let ok = match perturbation_solution(l, truth, u, nec.argmax_a, 1e-3) {
            Ok(p) => {
                let feasible = check_feasibility(&p.z, Problem::Community { k }).unwrap().is_feasible(1e-9);
                let better = l.inner(&p.z) > base + 1e-6;
                let sol = solve_community_sdp(l, k, &opts).unwrap();
                let moved = sol.status == SolveStatus::Optimal && sol.z.max_abs_diff(&zstar) > NONUNIQUE_DIST;
                if !(feasible && better && moved) {
                    eprintln!("  seed {seed}: feasible {feasible}, better {better}, solver moved {moved}");
                }
                feasible && better && moved
            }
            Err(e) => {
                eprintln!("  seed {seed}: {e}");
                false
            }
        };
        dominated += ok as usize;
    }
    let pass = flagged > 0 && dominated as f64 >= 0.95 * flagged as f64;
    outcome(pass, format!("{flagged}/100 flagged, witness dominance in {dominated}/{flagged}"))
}

fn c6() -> Outcome {
    let m = 500usize;
    let mf = m as f64;
    let a = mf.powf(0.75).ceil();
    let bound = mf.sqrt() / 2.0 - (mf.powf(0.75) / (8.0 * (a - 1.0)).sqrt() + 2.0 * a / mf.sqrt());
    let cfg = InfoConfig::default();
    let (mut exact, mut psd, mut above) = (0, 0, 0);
    let mut branch_ok = true;
    for seed in 0..10u64 {
        let w = wigner(m, 6000 + seed);
        let wit = vm_witness_gaussian(&w, a, &cfg).unwrap();
        let r = &wit.report;
        exact += ((r.trace - 1.0).abs() <= 1e-9 && (r.j_sum - a).abs() <= 1e-9 * a) as usize;
        psd += (r.min_eig >= -1e-8 && r.min_entry >= 0.0) as usize;
        above += (r.objective >= bound) as usize;
        branch_ok &= r.branch == Some(TauBranch::Large);
    }
    outcome(
        exact == 10 && psd >= 9 && above >= 8 && branch_ok,
        format!("a = {a}, equalities {exact}/10, PSD {psd}/10, objective >= {bound:.3} in {above}/10"),
    )
}

fn c7() -> Outcome {
    let (m, q) = (500usize, 0.2);
    let mf = m as f64;
    let cfg = InfoConfig::default();
    let kap = kappa(m, q, &cfg);
    let a = 1.0 + 2.0 * (mf * q / (1.0 - q)).sqrt() / kap;
    let (mut exact, mut psd, mut worst) = (0, 0, 0.0f64);
    for seed in 0..10u64 {
        let mm = bernoulli_matrix(m, q, 7000 + seed);
        match vm_witness_bernoulli(&mm, a, q, &cfg) {
            Ok(wit) => {
                let gamma = wit.params.gamma.unwrap();
                let err = (wit.report.objective - (a - 1.0) * gamma).abs();
                worst = worst.max(err);
                exact += (err <= 1e-12) as usize;
                psd += wit.report.is_psd(1e-8) as usize;
            }
            Err(e) => eprintln!("  seed {seed}: {e}"),
        }
    }
    outcome(
        exact == 10 && psd >= 9,
        format!("a = {a:.4}, kappa = {kap}, identity {exact}/10 (max err {worst:.1e}), PSD {psd}/10"),
    )
}

fn c8() -> Outcome {
    let (n, r) = (300usize, 20usize);
    // The high-rank optimum makes the 1e-6 tail very slow; 1e-5 still separates Y* by orders of magnitude.
    let opts = opts_tol(1e-5);
    let (mut valid, mut crossed) = (0, 0);
    for seed in 0..10u64 {
        let inst = gen_sbm(n, r, 0.3, 0.2, 8000 + seed).unwrap();
        let blocks = inst.truth.partition().unwrap();
        let wit = match sbm_witness(&inst.a, blocks, 0.05) {
            Ok(w) => w,
            Err(e) => {
                eprintln!("  seed {seed}: {e}");
                continue;
            }
        };
        let rep = &wit.report;
        let gain_exact = (rep.objective - 1.05 * rep.truth_objective).abs() <= 1e-9 * rep.truth_objective.abs();
        if !(rep.is_feasible(1e-6) && gain_exact) {
            continue;
        }
        valid += 1;
        let sol = solve_sbm_sdp(&inst.a, r, &opts).unwrap();
        let ystar = partition_matrix(blocks, n);
        let optimal = sol.status == SolveStatus::Optimal;
        let dist = sol.z.max_abs_diff(&ystar);
        if !optimal || dist <= NONUNIQUE_DIST {
            eprintln!("  seed {seed}: status {:?}, distance to Y* {dist:.3e}", sol.status);
        }
        crossed += (optimal && dist > NONUNIQUE_DIST) as usize;
    }
    outcome(
        valid >= 8 && crossed == valid,
        format!("witness valid in {valid}/10, solver avoids Y* in {crossed}/{valid}"),
    )
}

fn c9() -> Outcome {
    let mut rng = rng_from_seed(9);
    let (mut valid, mut root_viol, mut draws) = (0, 0, 0);
    while valid < 1000 {
        draws += 1;
        let n = rng.random_range(10..100_000usize);
        let k = rng.random_range(2..=n / 2);
        let (x, y): (f64, f64) = (rng.random_range(1e-4..1.0 - 1e-4), rng.random_range(1e-4..1.0 - 1e-4));
        if x == y {
            continue;
        }
        let (p, q) = (x.max(y), x.min(y));
        let (t1, t2) = match solve_tau12(n, k, p, q) {
            Ok(t) => t,
            Err(InfoError::NoRoot(_)) => continue,
            Err(e) => panic!("{e}"),
        };
        valid += 1;
        let kf = k as f64;
        let r1 = (kf * kl_bern(t1, p).unwrap() - kf.ln()).abs();
        let r2 = (kf * kl_bern(t2, q).unwrap() - ((n - k) as f64).ln()).abs();
        root_viol += (r1 > 1e-10 || r2 > 1e-10) as usize;
    }
    let mut sandwich_viol = 0;
    for _ in 0..10_000 {
        let (x, y): (f64, f64) = (rng.random_range(1e-9..1.0), rng.random_range(1e-9..1.0));
        let (p, q) = (x.max(y), x.min(y));
        if p >= 1.0 {
            continue;
        }
        let d = kl_bern(p, q).unwrap();
        let lo = (p - q).powi(2) / (2.0 * p * (1.0 - q));
        let hi = (p - q).powi(2) / (q * (1.0 - q));
        sandwich_viol += (d < lo * (1.0 - 1e-12) || d > hi * (1.0 + 1e-12)) as usize;
    }
    outcome(
        root_viol == 0 && sandwich_viol == 0,
        format!("{valid} root draws ({draws} tried), {root_viol} residual violations; sandwich {sandwich_viol}/10000 violations"),
    )
}

fn c10() -> Outcome {
    let n = 1000usize;
    let spec = ModelSpec::gaussian(n, 30, 1.0);
    let bound = 2.0 * (n as f64).sqrt() + 6.0;
    let (mut ok, mut worst) = (0, 0.0f64);
    for seed in 0..100u64 {
        let inst = gen_instance(&spec, 10_000 + seed).unwrap();
        let mut dev = inst.a.matrix().clone();
        dev.axpy(-1.0, mean_matrix(inst.community(), n, 1.0, 0.0).matrix());
        let s = spectral_norm(&dev).unwrap();
        worst = worst.max(s);
        ok += (s <= bound) as usize;
    }
    outcome(ok >= 97, format!("{ok}/100 within {bound:.2} (max {worst:.2})"))
}

fn c11() -> Outcome {
    let m = 40usize;
    let opts = SolverOptions::default();
    let grid: Vec<f64> = (0..=20).map(|i| 1.0 + (m as f64 - 1.0) * i as f64 / 20.0).collect();
    let (mut concave, mut ends) = (0, 0);
    let mut worst_dip = 0.0f64;
    for seed in 0..10u64 {
        let w = wigner(m, 11_000 + seed);
        let v: Vec<f64> = grid.iter().map(|&a| solve_vm(&w, a, &opts).unwrap().objective).collect();
        let dip = (1..grid.len() - 1).map(|i| 0.5 * (v[i - 1] + v[i + 1]) - v[i]).fold(f64::NEG_INFINITY, f64::max);
        worst_dip = worst_dip.max(dip);
        concave += (dip <= 1e-5) as usize;
        let last = v[grid.len() - 1];
        ends += (v[0].abs() <= 1e-7 && (last - w.sum() / m as f64).abs() <= 1e-7) as usize;
    }
    outcome(
        concave == 10 && ends == 10,
        format!("concave {concave}/10 (worst dip {worst_dip:.1e}), endpoints {ends}/10"),
    )
}

type Runner = fn() -> Vec<Outcome>;

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with('C')).collect();
    let criteria: [(&[&str], &[&str], &[u64], Runner); 10] = [
        (&["C1"], &["oracle agreement"], &[120], || vec![c1()]),
        (&["C2", "C3"], &["certificate soundness", "sufficient condition implies certificate"], &[600], || {
            let (a, b) = c2_c3();
            vec![a, b]
        }),
        (&["C4"], &["planted-clique window"], &[1200], || vec![c4()]),
        (&["C5"], &["necessity and witness dominance"], &[1800], || vec![c5()]),
        (&["C6"], &["Gaussian V_m witness"], &[300], || vec![c6()]),
        (&["C7"], &["Bernoulli V_m witness"], &[300], || vec![c7()]),
        (&["C8"], &["SBM witness"], &[900], || vec![c8()]),
        (&["C9"], &["root solvers and divergence sandwich"], &[60], || vec![c9()]),
        (&["C10"], &["concentration sanity"], &[300], || vec![c10()]),
        (&["C11"], &["V_m concavity and endpoints"], &[300], || vec![c11()]),
    ];
    let mut failed = 0;
    let mut out = std::io::stdout();
    for (ids, names, budgets, run) in criteria {
        if !filter.is_empty() && !ids.iter().any(|id| filter.iter().any(|f| f == id)) {
            continue;
        }
        let start = Instant::now();
        let results = run();
        let elapsed = start.elapsed();
        for ((id, name), res) in ids.iter().zip(names.iter()).zip(results) {
            let budget = Duration::from_secs(budgets[0]);
            let pass = res.pass && elapsed < budget;
            failed += !pass as usize;
            let _ = writeln!(
                out,
                "{id:<4} {:<4} {name}: {} [{:.1}s, budget {}s]",
                if pass { "PASS" } else { "FAIL" },
                res.detail,
                elapsed.as_secs_f64(),
                budget.as_secs()
            );
            let _ = out.flush();
        }
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
