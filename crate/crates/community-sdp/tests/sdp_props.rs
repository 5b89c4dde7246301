use community_sdp::linalg::Matrix;
use community_sdp::model::{cluster_matrix, gen_instance, rng_from_seed, sample_subset, ModelSpec, SymMatrix};
use community_sdp::sdp::{check_feasibility, solve_community_sdp, solve_vm, Problem, SolveStatus, SolverOptions};
use rand::Rng;

fn opts() -> SolverOptions {
    SolverOptions::default()
}

#[test]
fn weak_duality_against_random_feasible_points() {
    let (n, k) = (30, 6);
    let inst = gen_instance(&ModelSpec::gaussian(n, k, 1.0), 11).unwrap();
    let sol = solve_community_sdp(&inst.a, k, &opts()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    let problem = Problem::Community { k };
    let slater = problem.interior_point(n);
    let mut rng = rng_from_seed(5);
    let tol = 1e-6 * (1.0 + sol.objective.abs());
    for _ in 0..1000 {
        let s = sample_subset(&mut rng, n, k);
        let t: f64 = rng.random();
        let mut z = cluster_matrix(&s, n);
        z.scale(t);
        z.axpy(1.0 - t, &slater);
        assert!(check_feasibility(&z, problem).unwrap().is_feasible(1e-9));
        assert!(sol.objective >= inst.a.inner(&z) - tol);
    }
    // The planted community is one of those points.
    assert!(sol.objective >= inst.a.inner(&cluster_matrix(inst.community(), n)) - tol);
}

#[test]
fn vm_value_monotone_in_matrix() {
    let m = 16;
    let mut rng = rng_from_seed(21);
    for trial in 0..4 {
        let w = SymMatrix::from_upper(m, |_, _| rng.random_range(-1.0..1.0));
        let bump = SymMatrix::from_upper(m, |_, _| rng.random_range(0.0..0.5));
        let mut sum = w.matrix().clone();
        sum.axpy(1.0, bump.matrix());
        let w2 = SymMatrix::from_matrix(sum).unwrap();
        for a in [1.5, 4.0, 9.0] {
            let v1 = solve_vm(&w, a, &opts()).unwrap().objective;
            let v2 = solve_vm(&w2, a, &opts()).unwrap().objective;
            assert!(v2 >= v1 - 1e-6, "trial {trial}, a = {a}: {v2} < {v1}");
        }
    }
}

#[test]
fn vm_concave_on_grid() {
    let m = 20;
    let mut rng = rng_from_seed(8);
    let w = SymMatrix::from_upper(m, |_, _| rng.random_range(-1.0..1.0));
    let grid: Vec<f64> = (0..=12).map(|i| 1.0 + (m as f64 - 1.0) * i as f64 / 12.0).collect();
    let v: Vec<f64> = grid.iter().map(|&a| solve_vm(&w, a, &opts()).unwrap().objective).collect();
    for i in 1..grid.len() - 1 {
        // Uniform grid: midpoint value dominates the chord.
        assert!(v[i] >= 0.5 * (v[i - 1] + v[i + 1]) - 1e-5, "at a = {}: {v:?}", grid[i]);
    }
    assert!(v[0].abs() <= 1e-7);
    assert!((v[grid.len() - 1] - w.sum() / m as f64).abs() <= 1e-7);
}

#[test]
fn solution_is_feasible() {
    let inst = gen_instance(&ModelSpec::bernoulli(40, 8, 0.7, 0.3), 2).unwrap();
    let sol = solve_community_sdp(&inst.a, 8, &opts()).unwrap();
    let rep = check_feasibility(&sol.z, Problem::Community { k: 8 }).unwrap();
    assert!(rep.is_feasible(1e-6), "{rep:?}");
    assert!(sol.upper_bound >= sol.objective - 1e-9);
    let _: &Matrix = &sol.z;
}
