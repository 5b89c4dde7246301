//! First-order solvers for the community SDP, the auxiliary `V_m(a)` SDP and the
//! multi-community SBM SDP.
//!
//! All three have the form `max <C, Z>` over `Z` in `PSD ∩ P`, with `P` a
//! polyhedron whose Euclidean projection is cheap. The solver runs
//! over-relaxed ADMM (Douglas-Rachford form) on the splitting `X = Y`,
//! `X ⪰ 0`, `Y ∈ P`, with state `V = Y + U`:
//!
//! ```text
//! Y = Π_P(V)
//! X = Π_psd(2Y - V + C/ρ)
//! V+ = V + α (X - Y)
//! ```
//!
//! The fixed-point map `V ↦ V+` is accelerated with safeguarded type-II
//! Anderson mixing, and `ρ` is rebalanced from the primal/dual residual ratio.
//!
//! The returned matrix is the `Y` iterate, which satisfies every polyhedral
//! constraint to rounding error; its PSD violation is measured exactly at exit.
//! `Λ = ρ(V - 2Y + X)` satisfies `Λ ⪰ C` exactly, so the support function
//! `σ_P(Λ) = max_{Y ∈ P} <Λ, Y>` is a valid upper bound on the optimum at no
//! extra cost; the reported gap is measured against it.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, psd_project_unchecked, LinalgError, Matrix};
use crate::model::{mask, SymMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub tol_gap: f64,
    pub max_iters: usize,
    /// Initial ADMM penalty, relative to an internal reference that accounts
    /// for the scale of `C` and of the feasible set.
    pub penalty: f64,
    pub adaptive_penalty: bool,
    pub over_relaxation: f64,
    /// Anderson acceleration memory (0 disables).
    pub anderson_memory: usize,
    /// Minimum iterations between penalty updates.
    pub adapt_interval: usize,
    /// Print progress to stderr every this many iterations (0 = silent).
    pub verbose_every: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_primal: 1e-7,
            tol_dual: 1e-7,
            tol_gap: 1e-7,
            max_iters: 50_000,
            penalty: 1.0,
            adaptive_penalty: true,
            over_relaxation: 1.6,
            anderson_memory: 8,
            adapt_interval: 20,
            verbose_every: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SdpError> {
        let ok = self.tol_primal > 0.0
            && self.tol_dual > 0.0
            && self.tol_gap > 0.0
            && self.max_iters >= 1
            && self.penalty > 0.0
            && (1.0..2.0).contains(&self.over_relaxation);
        if ok {
            Ok(())
        } else {
            Err(SdpError::Invalid(format!("bad solver options: {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    MaxIters,
    Infeasible,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// Maximum constraint violation of the returned matrix.
    pub primal: f64,
    /// `ρ‖Y+ - Y‖_F / (1 + ‖C‖_F)`.
    pub dual: f64,
    /// `(upper bound - objective) / (1 + |objective|)`.
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution {
    pub z: Matrix,
    pub objective: f64,
    /// Certified upper bound on the optimal value (`+inf` when unavailable).
    pub upper_bound: f64,
    pub status: SolveStatus,
    pub residuals: Residuals,
    pub iters: usize,
    pub seconds: f64,
}

/// Summary without the matrix, for JSON output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub objective: f64,
    pub upper_bound: f64,
    pub status: SolveStatus,
    pub residuals: Residuals,
    pub iters: usize,
    pub seconds: f64,
}

impl SdpSolution {
    pub fn summary(&self) -> SolutionSummary {
        SolutionSummary {
            objective: self.objective,
            upper_bound: self.upper_bound,
            status: self.status,
            residuals: self.residuals,
            iters: self.iters,
            seconds: self.seconds,
        }
    }

    fn infeasible(n: usize) -> Self {
        SdpSolution {
            z: Matrix::zeros(n),
            objective: f64::NEG_INFINITY,
            upper_bound: f64::NEG_INFINITY,
            status: SolveStatus::Infeasible,
            residuals: Residuals::default(),
            iters: 0,
            seconds: 0.0,
        }
    }
}

/// Which SDP a matrix belongs to, with its size parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "problem")]
pub enum Problem {
    /// `Z ⪰ 0, Z ≥ 0, Z_ii ≤ 1, Tr Z = K, <J,Z> = K²`.
    Community { k: usize },
    /// `Z ⪰ 0, Z ≥ 0, Tr Z = 1, <J,Z> = a`.
    Vm { a: f64 },
    /// `Y ⪰ 0, Y_ii = 1, Y_ij ≥ -1/(r-1), <J,Y> = 0`.
    Sbm { r: usize },
}

impl Problem {
    fn trace(&self, n: usize) -> f64 {
        match *self {
            Problem::Community { k } => k as f64,
            Problem::Vm { .. } => 1.0,
            Problem::Sbm { .. } => n as f64,
        }
    }

    /// Sum of off-diagonal entries over ordered pairs.
    fn offdiag_sum(&self, n: usize) -> f64 {
        match *self {
            Problem::Community { k } => (k * k - k) as f64,
            Problem::Vm { a } => a - 1.0,
            Problem::Sbm { .. } => -(n as f64),
        }
    }

    fn offdiag_lower(&self) -> f64 {
        match *self {
            Problem::Sbm { r } => -1.0 / (r as f64 - 1.0),
            _ => 0.0,
        }
    }

    /// A strictly feasible point (PSD part of the interior where one exists).
    pub fn interior_point(&self, n: usize) -> Matrix {
        let nf = n as f64;
        let (d, o) = match *self {
            Problem::Community { k } => {
                let kf = k as f64;
                if n == 1 {
                    (kf, 0.0)
                } else {
                    (kf * (nf - kf) / (nf * (nf - 1.0)), kf * (kf - 1.0) / (nf * (nf - 1.0)))
                }
            }
            Problem::Vm { a } => {
                if n == 1 {
                    (1.0, 0.0)
                } else {
                    ((nf - a) / (nf * (nf - 1.0)), (a - 1.0) / (nf * (nf - 1.0)))
                }
            }
            Problem::Sbm { .. } => (nf / (nf - 1.0), -1.0 / (nf - 1.0)),
        };
        // d*I + o*J
        Matrix::from_fn(n, |i, j| if i == j { d + o } else { o })
    }

    /// Euclidean projection of the symmetric matrix `v` onto `P`, written to `out`.
    fn project(&self, v: &Matrix, out: &mut Matrix, scratch: &mut Vec<f64>) {
        let n = v.n();
        // Diagonal block.
        let mut diag = v.diag();
        match *self {
            Problem::Community { k } => project_box_sum(&mut diag, k as f64),
            Problem::Vm { .. } => project_simplex(&mut diag, 1.0, 0.0, scratch),
            Problem::Sbm { .. } => diag.iter_mut().for_each(|x| *x = 1.0),
        }
        // Off-diagonal block, over the upper triangle (each entry counted once).
        let lb = self.offdiag_lower();
        let half = 0.5 * self.offdiag_sum(n);
        let mut upper = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
        for i in 0..n {
            let row = v.row(i);
            upper.extend_from_slice(&row[i + 1..]);
        }
        project_simplex(&mut upper, half, lb, scratch);
        let data = out.as_mut_slice();
        let mut idx = 0;
        for i in 0..n {
            data[i * n + i] = diag[i];
            for j in i + 1..n {
                let y = upper[idx];
                idx += 1;
                data[i * n + j] = y;
                data[j * n + i] = y;
            }
        }
    }

    /// `max_{Y ∈ P} <Λ, Y>`.
    fn support(&self, lam: &Matrix) -> f64 {
        let n = lam.n();
        let mut diag = lam.diag();
        let diag_part = match *self {
            Problem::Community { k } => {
                diag.sort_by(|a, b| b.total_cmp(a));
                diag[..k].iter().sum::<f64>()
            }
            Problem::Vm { .. } => diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            Problem::Sbm { .. } => diag.iter().sum(),
        };
        if n < 2 {
            return diag_part;
        }
        // Off-diagonal: mass `total` above the floor `lb`, placed on the largest pair.
        let lb = self.offdiag_lower();
        let mut maxo = f64::NEG_INFINITY;
        let mut sum_o = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let x = lam.get(i, j);
                    maxo = maxo.max(x);
                    sum_o += x;
                }
            }
        }
        let total = self.offdiag_sum(n) - lb * (n * (n - 1)) as f64;
        diag_part + lb * sum_o + total * maxo
    }

    /// Per-constraint violations of `z`.
    pub fn feasibility(&self, z: &Matrix) -> Result<FeasReport, SdpError> {
        check_feasibility(z, *self)
    }
}

/// Projects `v` onto `{y : y_i ≥ lb, Σ y_i = s}` in place.
fn project_simplex(v: &mut [f64], s: f64, lb: f64, scratch: &mut Vec<f64>) {
    let m = v.len();
    if m == 0 {
        return;
    }
    let s0 = s - lb * m as f64;
    if s0 <= 0.0 {
        v.iter_mut().for_each(|x| *x = lb);
        return;
    }
    // Find μ with Σ max(v_i - lb - μ, 0) = s0 by Michelot's active-set iteration.
    scratch.clear();
    scratch.extend(v.iter().map(|x| x - lb));
    let mut mu = (scratch.iter().sum::<f64>() - s0) / m as f64;
    loop {
        let before = scratch.len();
        scratch.retain(|&x| x > mu);
        let cnt = scratch.len();
        if cnt == 0 {
            break;
        }
        mu = (scratch.iter().sum::<f64>() - s0) / cnt as f64;
        if cnt == before {
            break;
        }
    }
    for x in v.iter_mut() {
        *x = lb + (*x - lb - mu).max(0.0);
    }
}

/// Projects `v` onto `{0 ≤ y_i ≤ 1, Σ y_i = s}` in place (`0 ≤ s ≤ len`).
fn project_box_sum(v: &mut [f64], s: f64) {
    let m = v.len();
    if m == 0 {
        return;
    }
    let g = |nu: f64, v: &[f64]| v.iter().map(|x| (x - nu).clamp(0.0, 1.0)).sum::<f64>();
    let mut bps: Vec<f64> = v.iter().flat_map(|&x| [x, x - 1.0]).collect();
    bps.sort_by(|a, b| a.total_cmp(b));
    // g is nonincreasing in ν; find adjacent breakpoints bracketing s.
    let (mut lo, mut hi) = (0usize, bps.len() - 1);
    if g(bps[lo], v) <= s {
        let nu = bps[lo];
        v.iter_mut().for_each(|x| *x = (*x - nu).clamp(0.0, 1.0));
        return;
    }
    if g(bps[hi], v) >= s {
        let nu = bps[hi];
        v.iter_mut().for_each(|x| *x = (*x - nu).clamp(0.0, 1.0));
        return;
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if g(bps[mid], v) >= s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (a, b) = (bps[lo], bps[hi]);
    let (ga, gb) = (g(a, v), g(b, v));
    let nu = if ga > gb { a + (ga - s) * (b - a) / (ga - gb) } else { a };
    v.iter_mut().for_each(|x| *x = (*x - nu).clamp(0.0, 1.0));
}

/// Per-constraint worst violations; each entry is `0` when satisfied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasReport {
    pub min_eigenvalue: f64,
    /// `max(0, lower_bound - min off-diagonal entry)` (and diagonal for community/V_m).
    pub entry_violation: f64,
    /// Community: `max(0, max Z_ii - 1)`; SBM: `max |Y_ii - 1|`.
    pub diagonal_violation: f64,
    pub trace_violation: f64,
    pub sum_violation: f64,
    pub asymmetry: f64,
}

impl FeasReport {
    pub fn max_violation(&self) -> f64 {
        [
            (-self.min_eigenvalue).max(0.0),
            self.entry_violation,
            self.diagonal_violation,
            self.trace_violation,
            self.sum_violation,
            self.asymmetry,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_violation() <= tol
    }
}

pub fn check_feasibility(z: &Matrix, problem: Problem) -> Result<FeasReport, SdpError> {
    let n = z.n();
    let mut zs = z.clone();
    let asymmetry = z.asymmetry();
    zs.symmetrize();
    let min_eigenvalue = linalg::lambda_min(&zs)?;
    let lb = problem.offdiag_lower();
    let mut entry_violation: f64 = 0.0;
    let mut diagonal_violation: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = z.get(i, j);
            if i == j {
                match problem {
                    Problem::Community { .. } => {
                        entry_violation = entry_violation.max(-x);
                        diagonal_violation = diagonal_violation.max(x - 1.0);
                    }
                    Problem::Vm { .. } => entry_violation = entry_violation.max(-x),
                    Problem::Sbm { .. } => diagonal_violation = diagonal_violation.max((x - 1.0).abs()),
                }
            } else {
                entry_violation = entry_violation.max(lb - x);
            }
        }
    }
    let trace_violation = (z.trace() - problem.trace(n)).abs();
    let target = match problem {
        Problem::Community { k } => (k * k) as f64,
        Problem::Vm { a } => a,
        Problem::Sbm { .. } => 0.0,
    };
    let sum_violation = (z.sum() - target).abs();
    Ok(FeasReport {
        min_eigenvalue,
        entry_violation: entry_violation.max(0.0),
        diagonal_violation: diagonal_violation.max(0.0),
        trace_violation,
        sum_violation,
        asymmetry,
    })
}

pub fn solve_community_sdp(l: &SymMatrix, k: usize, opts: &SolverOptions) -> Result<SdpSolution, SdpError> {
    let n = l.n();
    if k < 1 || k > n {
        return Err(SdpError::Invalid(format!("need 1 <= K <= n, got K = {k}, n = {n}")));
    }
    solve(l, Problem::Community { k }, opts)
}

/// `V_m(a)`; for `a ∉ [1, m]` returns status `Infeasible` with objective `-inf`.
pub fn solve_vm(m: &SymMatrix, a: f64, opts: &SolverOptions) -> Result<SdpSolution, SdpError> {
    let dim = m.n();
    if !(a >= 1.0 && a <= dim as f64) {
        return Ok(SdpSolution::infeasible(dim));
    }
    solve(m, Problem::Vm { a }, opts)
}

pub fn solve_sbm_sdp(a: &SymMatrix, r: usize, opts: &SolverOptions) -> Result<SdpSolution, SdpError> {
    let n = a.n();
    if r < 2 || n % r != 0 || n < 2 {
        return Err(SdpError::Invalid(format!("need r >= 2 dividing n, got n = {n}, r = {r}")));
    }
    solve(a, Problem::Sbm { r }, opts)
}

/// Penalty at `penalty = 1` for the scaled problem; tuned on planted-clique and
/// Gaussian instances with n between 120 and 500.
const RHO_REF: f64 = 0.3;

const ADAPT_MAX_SPACING: usize = 640;

/// Solves `max <C, Z>` over `PSD ∩ P(problem)`.
pub fn solve(c: &Matrix, problem: Problem, opts: &SolverOptions) -> Result<SdpSolution, SdpError> {
    opts.validate()?;
    let start = Instant::now();
    let n = c.n();
    if c.asymmetry() > 1e-12 * c.max_abs().max(1.0) || !c.is_finite() {
        return Err(SdpError::Invalid("objective matrix must be finite and symmetric".into()));
    }
    if n == 1 || matches!(problem, Problem::Vm { a } if a <= 1.0 || a >= n as f64) {
        return Ok(trivial_solution(c, problem, start));
    }
    let cnorm = c.frob_norm();
    let mut v = problem.interior_point(n);
    // Scale C relative to the feasible set so that ρ = 1 balances both sides.
    let scale = if cnorm > 0.0 { cnorm / v.frob_norm() } else { 1.0 };
    let cs = c.scaled(1.0 / scale);
    let alpha = opts.over_relaxation;
    let mut rho = opts.penalty * RHO_REF;

    // Douglas-Rachford state V = Y + U; Y = Π_P(V), U = V - Y.
    let mut y = Matrix::zeros(n);
    let mut y_prev = v.clone();
    let mut t = Matrix::zeros(n);
    let mut lam = Matrix::zeros(n);
    let mut f = Matrix::zeros(n);
    let mut scratch = Vec::new();
    let mut aa = Anderson::new(opts.anderson_memory, n * n);
    // Plain step from the last accepted point, used when an accelerated point is rejected.
    let mut fallback: Option<(Matrix, f64)> = None;

    let mut status = SolveStatus::MaxIters;
    let mut res = Residuals { primal: f64::INFINITY, dual: f64::INFINITY, gap: f64::INFINITY };
    let mut best_ub = f64::INFINITY;
    let mut iters = 0;
    let mut last_exact_check = 0usize;
    let mut since_adapt = 0usize;
    // Spacing doubles after each change so that ρ settles.
    let mut adapt_every = opts.adapt_interval;

    for it in 1..=opts.max_iters {
        iters = it;
        problem.project(&v, &mut y, &mut scratch);
        {
            let (td, yd, vd, cd) = (t.as_mut_slice(), y.as_slice(), v.as_slice(), cs.as_slice());
            let inv = 1.0 / rho;
            for idx in 0..td.len() {
                td[idx] = 2.0 * yd[idx] - vd[idx] + inv * cd[idx];
            }
        }
        let (x, info) = psd_project_unchecked(&t)?;

        // Fixed-point residual g = α(X - Y); F(V) = V + g.
        let mut r_p2 = 0.0;
        {
            let (fd, vd, xd, yd) = (f.as_mut_slice(), v.as_slice(), x.as_slice(), y.as_slice());
            for idx in 0..fd.len() {
                let d = xd[idx] - yd[idx];
                r_p2 += d * d;
                fd[idx] = vd[idx] + alpha * d;
            }
        }
        let r_p = r_p2.sqrt();

        if let Some((fb, fb_norm)) = fallback.take() {
            if r_p > fb_norm {
                // Accelerated point made things worse: restart from the plain step.
                v = fb;
                aa.reset();
                continue;
            }
        }

        // Λ = ρ(U + X - Y) satisfies C/scale - Λ = ρ(T - X) ⪯ 0.
        {
            let (ld, vd, xd, yd) = (lam.as_mut_slice(), v.as_slice(), x.as_slice(), y.as_slice());
            for idx in 0..ld.len() {
                ld[idx] = rho * (vd[idx] - 2.0 * yd[idx] + xd[idx]);
            }
        }
        best_ub = best_ub.min(scale * problem.support(&lam));

        let dy = y.as_slice().iter().zip(y_prev.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        std::mem::swap(&mut y_prev, &mut y);
        // y_prev now holds the current Y.
        let objective = c.inner(&y_prev);
        res.primal = r_p;
        res.dual = scale * rho * dy / (1.0 + cnorm);
        res.gap = (best_ub - objective) / (1.0 + objective.abs());

        if opts.verbose_every > 0 && it % opts.verbose_every == 0 {
            eprintln!(
                "it {it:6} rho {rho:9.3e} r_p {r_p:9.3e} r_d {:9.3e} obj {objective:.10e} ub {best_ub:.10e} gap {:9.3e} rank {}",
                res.dual, res.gap, info.positive
            );
        }

        if res.gap.abs() <= opts.tol_gap && res.dual <= opts.tol_dual && r_p <= opts.tol_primal.max(1e-3) {
            // ‖X - Y‖_F bounds the PSD violation of Y; confirm with an exact
            // eigenvalue when the proxy alone is inconclusive.
            if r_p <= opts.tol_primal {
                status = SolveStatus::Optimal;
                break;
            }
            if it >= last_exact_check + 10 {
                last_exact_check = it;
                if -linalg::lambda_min(&y_prev)? <= opts.tol_primal {
                    status = SolveStatus::Optimal;
                    break;
                }
            }
        }

        since_adapt += 1;
        if opts.adaptive_penalty && since_adapt >= adapt_every {
            let rel_p = r_p / y_prev.frob_norm().max(1e-300);
            let rel_d = rho * dy / lam.frob_norm().max(1e-300);
            let ratio = rel_p / rel_d;
            let factor = if ratio.is_finite() && ratio > 0.0 && !(1.0 / 3.0..=3.0).contains(&ratio) {
                ratio.sqrt().clamp(0.1, 10.0)
            } else {
                1.0
            };
            if factor != 1.0 {
                since_adapt = 0;
                adapt_every = (2 * adapt_every).min(ADAPT_MAX_SPACING);
                rho *= factor;
                // Keep Y and rescale the scaled dual U = F - Π_P(F).
                problem.project(&f, &mut y, &mut scratch);
                let (fd, yd) = (f.as_mut_slice(), y.as_slice());
                for idx in 0..fd.len() {
                    fd[idx] = yd[idx] + (fd[idx] - yd[idx]) / factor;
                }
                std::mem::swap(&mut v, &mut f);
                aa.reset();
                continue;
            }
        }

        match aa.step(&v, &f) {
            Some(next) => {
                fallback = Some((f.clone(), r_p));
                v = next;
            }
            None => std::mem::swap(&mut v, &mut f),
        }
    }

    let y = y_prev;
    let objective = c.inner(&y);
    let feas = check_feasibility(&y, problem)?;
    let violation = feas.max_violation();
    res.primal = violation;
    if status == SolveStatus::Optimal && violation > opts.tol_primal {
        status = SolveStatus::MaxIters;
    }
    res.gap = (best_ub - objective) / (1.0 + objective.abs());
    Ok(SdpSolution {
        z: y,
        objective,
        upper_bound: best_ub,
        status,
        residuals: res,
        iters,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Type-II Anderson acceleration of the map `V ↦ F(V)`.
struct Anderson {
    mem: usize,
    dim: usize,
    prev_g: Option<Vec<f64>>,
    prev_f: Vec<f64>,
    dg: Vec<Vec<f64>>,
    df: Vec<Vec<f64>>,
    head: usize,
    len: usize,
}

impl Anderson {
    fn new(mem: usize, dim: usize) -> Self {
        Self { mem, dim, prev_g: None, prev_f: Vec::new(), dg: Vec::new(), df: Vec::new(), head: 0, len: 0 }
    }

    fn reset(&mut self) {
        self.prev_g = None;
        self.len = 0;
        self.head = 0;
    }

    /// Records `(V, F(V))` and proposes the next iterate, if any.
    fn step(&mut self, v: &Matrix, f: &Matrix) -> Option<Matrix> {
        if self.mem == 0 {
            return None;
        }
        let (vd, fd) = (v.as_slice(), f.as_slice());
        let g: Vec<f64> = fd.iter().zip(vd).map(|(a, b)| a - b).collect();
        if let Some(pg) = self.prev_g.take() {
            if self.dg.len() < self.mem {
                self.dg.push(vec![0.0; self.dim]);
                self.df.push(vec![0.0; self.dim]);
            }
            let slot = self.head;
            for idx in 0..self.dim {
                self.dg[slot][idx] = g[idx] - pg[idx];
                self.df[slot][idx] = fd[idx] - self.prev_f[idx];
            }
            self.head = (self.head + 1) % self.mem;
            self.len = (self.len + 1).min(self.mem);
        }
        self.prev_g = Some(g);
        self.prev_f.clear();
        self.prev_f.extend_from_slice(fd);
        if self.len == 0 {
            return None;
        }
        let m = self.len;
        let g = self.prev_g.as_ref().unwrap();
        let mut gram = vec![0.0; m * m];
        let mut rhs = vec![0.0; m];
        for a in 0..m {
            rhs[a] = crate::linalg::dot(&self.dg[a], g);
            for b in 0..=a {
                let val = crate::linalg::dot(&self.dg[a], &self.dg[b]);
                gram[a * m + b] = val;
                gram[b * m + a] = val;
            }
        }
        let tr: f64 = (0..m).map(|a| gram[a * m + a]).sum();
        if tr <= 0.0 || !tr.is_finite() {
            return None;
        }
        for a in 0..m {
            gram[a * m + a] += 1e-10 * tr;
        }
        let gamma = solve_dense(&mut gram, &mut rhs, m)?;
        let mut next = fd.to_vec();
        for (a, &ga) in gamma.iter().enumerate() {
            for (x, d) in next.iter_mut().zip(&self.df[a]) {
                *x -= ga * d;
            }
        }
        Some(Matrix::from_row_major(v.n(), next))
    }
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve_dense(a: &mut [f64], b: &mut [f64], m: usize) -> Option<Vec<f64>> {
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i * m + col].abs().total_cmp(&a[j * m + col].abs()))?;
        if a[piv * m + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..m {
                a.swap(piv * m + k, col * m + k);
            }
            b.swap(piv, col);
        }
        for row in col + 1..m {
            let factor = a[row * m + col] / a[col * m + col];
            for k in col..m {
                a[row * m + k] -= factor * a[col * m + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; m];
    for row in (0..m).rev() {
        let mut s = b[row];
        for k in row + 1..m {
            s -= a[row * m + k] * x[k];
        }
        x[row] = s / a[row * m + row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn trivial_solution(c: &Matrix, problem: Problem, start: Instant) -> SdpSolution {
    let n = c.n();
    let z = match problem {
        // a = m: J/m is the only feasible point (λmax(J) = m).
        Problem::Vm { a } if n > 1 && a >= n as f64 => Matrix::from_fn(n, |_, _| 1.0 / n as f64),
        Problem::Vm { .. } if n > 1 => {
            // a = 1: Z must be diagonal (Z ≥ 0, off-diagonal mass 0); C has zero
            // diagonal so every such Z is optimal with value Σ C_ii Z_ii.
            let best = (0..n).max_by(|&i, &j| c.get(i, i).total_cmp(&c.get(j, j))).unwrap_or(0);
            let mut z = Matrix::zeros(n);
            z.set(best, best, 1.0);
            z
        }
        _ => Matrix::from_fn(n, |_, _| problem.trace(n) / n as f64),
    };
    let objective = c.inner(&z);
    SdpSolution {
        z,
        objective,
        upper_bound: objective,
        status: SolveStatus::Optimal,
        residuals: Residuals::default(),
        iters: 0,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Top-K indices of the leading eigenvector of `Z`, ties by larger row sum then
/// smaller index. Returned sorted.
pub fn round_solution(z: &Matrix, k: usize) -> Result<Vec<usize>, SdpError> {
    let n = z.n();
    let mut zs = z.clone();
    zs.symmetrize();
    let e = linalg::sym_eig(&zs)?;
    let v = e.vector(n - 1);
    let row_sums: Vec<f64> = (0..n).map(|i| zs.row(i).iter().sum()).collect();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| {
        v[j].total_cmp(&v[i]).then(row_sums[j].total_cmp(&row_sums[i])).then(i.cmp(&j))
    });
    let mut out = idx[..k.min(n)].to_vec();
    out.sort_unstable();
    Ok(out)
}

/// Exact-recovery success: `‖Z - ξξ^T‖_max ≤ 1e-4`.
pub const SUCCESS_TOL: f64 = 1e-4;
/// Distance above which an optimal `Z` counts as a different maximizer.
pub const NONUNIQUE_DIST: f64 = 1e-2;

pub fn max_dist_to_cluster(z: &Matrix, truth: &[usize]) -> f64 {
    let n = z.n();
    let m = mask(truth, n);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if m[i] && m[j] { 1.0 } else { 0.0 };
            worst = worst.max((z.get(i, j) - target).abs());
        }
    }
    worst
}

pub fn is_exact_recovery(z: &Matrix, truth: &[usize]) -> bool {
    max_dist_to_cluster(z, truth) <= SUCCESS_TOL
}

/// If `Z` is within `tol` (max-norm) of some `ξξ^T` with `|ξ| = k`, returns that support.
pub fn integral_support(z: &Matrix, k: usize, tol: f64) -> Option<Vec<usize>> {
    let n = z.n();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| z.get(j, j).total_cmp(&z.get(i, i)).then(i.cmp(&j)));
    let mut s = idx[..k.min(n)].to_vec();
    s.sort_unstable();
    (max_dist_to_cluster(z, &s) <= tol).then_some(s)
}

/// Outcome of comparing a solver output against a planted community.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryDiagnostic {
    pub distance: f64,
    pub success: bool,
    /// Objective equals `<L, Z*>` within the gap tolerance but `Z` is far from `Z*`.
    pub non_unique: bool,
}

pub fn recovery_diagnostic(
    l: &SymMatrix,
    sol: &SdpSolution,
    truth: &[usize],
    tol_gap: f64,
) -> RecoveryDiagnostic {
    let distance = max_dist_to_cluster(&sol.z, truth);
    let truth_value: f64 = {
        let m = mask(truth, l.n());
        let mut s = 0.0;
        for &i in truth {
            for j in 0..l.n() {
                if m[j] {
                    s += l.get(i, j);
                }
            }
        }
        s
    };
    let tied = (sol.objective - truth_value).abs() <= tol_gap * (1.0 + truth_value.abs());
    RecoveryDiagnostic {
        distance,
        success: distance <= SUCCESS_TOL,
        non_unique: tied && distance > NONUNIQUE_DIST,
    }
}
