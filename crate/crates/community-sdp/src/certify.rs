//! Optimality certificates and failure witnesses for the community SDP.
//!
//! A [`DualCert`] is the tuple `(D, B, λ, η, S)` with `S = D - B - L + ηI + λJ`.
//! [`build_dual_certificate`] makes the standard choice; [`verify_kkt`] checks any
//! tuple against a candidate `Z`. Witnesses are explicit primal points:
//! [`perturbation_solution`] for the community SDP, [`vm_witness_gaussian`] and
//! [`vm_witness_bernoulli`] for `V_m(a)`, and [`sbm_witness`] for the SBM SDP.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::info::{kappa, InfoConfig};
use crate::io::{write_matrix_market, IoError};
use crate::linalg::{self, lambda2_orth, lambda_min, spectral_norm, LinalgError, Matrix};
use crate::model::{
    complement, e_stats, indicator, mask, mean_matrix, partition_matrix, score_means, ModelError,
    ModelSpec, ScoreKind, SymMatrix,
};
use crate::sdp::{integral_support, Problem, SdpError, SdpSolution};

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("witness failed: {0}")]
    WitnessFailed(String),
    #[error("degenerate density R = {0}")]
    DegenerateDensity(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

type Result<T> = std::result::Result<T, CertifyError>;

fn check_truth(n: usize, truth: &[usize]) -> Result<()> {
    if truth.is_empty() || truth.len() > n {
        return Err(CertifyError::Domain(format!("community size {} for n = {n}", truth.len())));
    }
    if truth.windows(2).any(|w| w[0] >= w[1]) || truth.iter().any(|&i| i >= n) {
        return Err(CertifyError::Domain("truth must be sorted, distinct and < n".into()));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanSource {
    /// Exact model expectation.
    Model,
    /// Plug-in block means of the supplied matrix.
    Empirical,
}

/// Block means `α = E_P[L_12]`, `β = E_Q[L_12]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Means {
    pub alpha: f64,
    pub beta: f64,
    pub source: MeanSource,
}

impl Means {
    pub fn model(spec: &ModelSpec, kind: ScoreKind) -> Result<Self> {
        let (alpha, beta) = score_means(spec, kind)?;
        Ok(Self { alpha, beta, source: MeanSource::Model })
    }

    /// Mean of `L` over off-diagonal pairs inside `C*` and over all other off-diagonal pairs.
    pub fn empirical(l: &SymMatrix, truth: &[usize]) -> Self {
        let n = l.n();
        let m = mask(truth, n);
        let (mut si, mut ni, mut so, mut no) = (0.0, 0usize, 0.0, 0usize);
        for i in 0..n {
            for j in i + 1..n {
                if m[i] && m[j] {
                    si += l.get(i, j);
                    ni += 1;
                } else {
                    so += l.get(i, j);
                    no += 1;
                }
            }
        }
        let avg = |s: f64, c: usize| if c == 0 { f64::NAN } else { s / c as f64 };
        Self { alpha: avg(si, ni), beta: avg(so, no), source: MeanSource::Empirical }
    }
}

/// `(D, B, λ, η, S)` for a planted community `truth`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualCert {
    pub truth: Vec<usize>,
    /// Diagonal of `D`.
    pub d: Vec<f64>,
    pub b: Matrix,
    pub lambda: f64,
    pub eta: f64,
    pub s: Matrix,
    pub means: Means,
}

impl DualCert {
    /// Completes `(λ, η)` to a tuple with `Sξ* = 0` and complementary slackness by
    /// construction. Nonnegativity of `D` and `B` depends on `(λ, η)`.
    pub fn assemble(l: &SymMatrix, truth: &[usize], lambda: f64, eta: f64, means: Means) -> Result<Self> {
        let n = l.n();
        check_truth(n, truth)?;
        let k = truth.len() as f64;
        let inside = mask(truth, n);
        let e = e_stats(l, truth);
        let d: Vec<f64> = (0..n).map(|i| if inside[i] { e[i] - eta - lambda * k } else { 0.0 }).collect();
        let bv: Vec<f64> = (0..n).map(|i| if inside[i] { 0.0 } else { lambda - e[i] / k }).collect();
        let b = Matrix::from_fn(n, |i, j| match (inside[i], inside[j]) {
            (false, true) => bv[i],
            (true, false) => bv[j],
            _ => 0.0,
        });
        let s = Matrix::from_fn(n, |i, j| {
            let diag = if i == j { d[i] + eta } else { 0.0 };
            diag - b.get(i, j) - l.get(i, j) + lambda
        });
        Ok(Self { truth: truth.to_vec(), d, b, lambda, eta, s, means })
    }

    pub fn d_matrix(&self) -> Matrix {
        Matrix::from_fn(self.d.len(), |i, j| if i == j { self.d[i] } else { 0.0 })
    }

    /// `max |S - (D - B - L + ηI + λJ)|`.
    pub fn identity_residual(&self, l: &SymMatrix) -> f64 {
        let n = self.s.n();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let diag = if i == j { self.d[i] + self.eta } else { 0.0 };
                let want = diag - self.b.get(i, j) - l.get(i, j) + self.lambda;
                worst = worst.max((self.s.get(i, j) - want).abs());
            }
        }
        worst
    }
}

/// `λ = max{max_{i∉C*} e(i,C*)/K, β}`, `η = min_{i∈C*} e(i,C*) - λK`.
pub fn build_dual_certificate(l: &SymMatrix, truth: &[usize], means: Means) -> Result<DualCert> {
    let n = l.n();
    check_truth(n, truth)?;
    let k = truth.len() as f64;
    let e = e_stats(l, truth);
    let inside = mask(truth, n);
    let max_out = (0..n).filter(|&i| !inside[i]).map(|i| e[i]).fold(f64::NEG_INFINITY, f64::max);
    let min_in = truth.iter().map(|&i| e[i]).fold(f64::INFINITY, f64::min);
    let lambda = (max_out / k).max(means.beta);
    let eta = min_in - lambda * k;
    DualCert::assemble(l, truth, lambda, eta, means)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktCheck {
    pub name: String,
    pub value: f64,
    /// Nonnegative iff the check passes.
    #[serde(with = "crate::info::nan_null")]
    pub margin: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub checks: Vec<KktCheck>,
    /// Smallest eigenvalue of `S` on the complement of `ξ`.
    pub lambda2: f64,
    pub unique_lambda2: bool,
    pub unique_positive: bool,
    pub accepted: bool,
    pub unique: bool,
    pub failures: Vec<String>,
}

impl KktReport {
    pub fn check(&self, name: &str) -> Option<&KktCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Checks `(Z, cert)` against the KKT conditions.
///
/// Sign conditions (`S ⪰ 0`, `D ≥ 0`, `B ≥ 0`) pass at `≥ -tol`. Stationarity and
/// slackness residuals pass at `≤ tol · max(1, max|S|)`. The identity for `S` is
/// checked at `1e-10 · max(1, max|L|)`.
pub fn verify_kkt(l: &SymMatrix, k: usize, z: &Matrix, cert: &DualCert, tol: f64) -> Result<KktReport> {
    let n = l.n();
    if z.n() != n || cert.s.n() != n || cert.b.n() != n || cert.d.len() != n {
        return Err(CertifyError::Dimension(format!(
            "L is {n}x{n}, Z is {0}x{0}, S is {1}x{1}, B is {2}x{2}, d has {3}",
            z.n(),
            cert.s.n(),
            cert.b.n(),
            cert.d.len()
        )));
    }
    let scale = cert.s.max_abs().max(1.0);
    let mut checks = Vec::new();
    let mut failures = Vec::new();
    let mut push = |name: &str, value: f64, margin: f64, msg: String| {
        let passed = margin >= 0.0;
        if !passed {
            failures.push(msg);
        }
        checks.push(KktCheck { name: name.into(), value, margin, passed });
    };

    let lmin = lambda_min(&cert.s)?;
    push("psd", lmin, lmin + tol, format!("S not PSD: lambda_min(S) = {lmin:e}"));

    let support = integral_support(z, k, tol.max(crate::sdp::SUCCESS_TOL));
    let xi = indicator(support.as_deref().unwrap_or(&cert.truth), n);
    if support.is_some() {
        let sx = cert.s.mul_vec(&xi);
        let r = sx.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        push("stationarity", r, tol * scale - r, format!("S xi != 0: max |S xi| = {r:e}"));
    } else {
        let r = cert.s.inner(z);
        push("stationarity", r, tol * scale - r, format!("<S, Z> = {r:e} > 0"));
    }

    let dmin = cert.d.iter().copied().fold(f64::INFINITY, f64::min);
    push("d_nonneg", dmin, dmin + tol, format!("d_i < 0 (positivityD): min d_i = {dmin:e}"));
    let bmin = cert.b.min_entry();
    push("b_nonneg", bmin, bmin + tol, format!("B_ij < 0 (positivityB): min B_ij = {bmin:e}"));

    let mut slack: f64 = 0.0;
    for i in 0..n {
        slack = slack.max((cert.d[i] * (z.get(i, i) - 1.0)).abs());
        for j in 0..n {
            slack = slack.max((cert.b.get(i, j) * z.get(i, j)).abs());
        }
    }
    push("slackness", slack, tol * scale - slack, format!("complementary slackness violated by {slack:e}"));

    let idr = cert.identity_residual(l);
    let id_tol = 1e-10 * l.max_abs().max(1.0);
    push("identity", idr, id_tol - idr, format!("S != D - B - L + eta I + lambda J: residual {idr:e}"));

    let lambda2 = lambda2_orth(&cert.s, &xi)?;
    let unique_lambda2 = lambda2 > tol;
    let inside = mask(&cert.truth, n);
    let min_d_in = cert.truth.iter().map(|&i| cert.d[i]).fold(f64::INFINITY, f64::min);
    let mut min_b_off = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            if i != j && !(inside[i] && inside[j]) {
                min_b_off = min_b_off.min(cert.b.get(i, j));
            }
        }
    }
    let unique_positive = min_d_in > tol && min_b_off > tol;
    let accepted = failures.is_empty();
    Ok(KktReport {
        checks,
        lambda2,
        unique_lambda2,
        unique_positive,
        accepted,
        unique: accepted && (unique_lambda2 || unique_positive),
        failures,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuffCheck {
    pub satisfied: bool,
    pub margin: f64,
    pub min_in: f64,
    pub max_out: f64,
    /// `‖L - E L‖` with the block mean matrix.
    pub deviation: f64,
    pub beta: f64,
    pub source: MeanSource,
}

/// `min_{C*} e - max{max_{∉C*} e, Kβ} - ‖L - Lmean‖ + β > 0`.
pub fn suff_check(l: &SymMatrix, truth: &[usize], means: Means) -> Result<SuffCheck> {
    let n = l.n();
    check_truth(n, truth)?;
    let k = truth.len() as f64;
    let e = e_stats(l, truth);
    let inside = mask(truth, n);
    let min_in = truth.iter().map(|&i| e[i]).fold(f64::INFINITY, f64::min);
    let max_out = (0..n).filter(|&i| !inside[i]).map(|i| e[i]).fold(f64::NEG_INFINITY, f64::max);
    let mut dev = l.matrix().clone();
    dev.axpy(-1.0, mean_matrix(truth, n, means.alpha, means.beta).matrix());
    let deviation = spectral_norm(&dev)?;
    let margin = min_in - max_out.max(k * means.beta) - deviation + means.beta;
    Ok(SuffCheck { satisfied: margin > 0.0, margin, min_in, max_out, deviation, beta: means.beta, source: means.source })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NecPoint {
    pub a: f64,
    /// Objective of the returned `V_{n-K}(a)` solution (a lower bound on the value).
    pub v: f64,
    /// Certified upper bound on `V_{n-K}(a)`.
    pub v_upper: f64,
    /// `V - (a/K) max_{j∉C*} e`.
    pub term: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NecReport {
    pub consistent: bool,
    /// `min e - max e - sup_a term`.
    pub worst_margin: f64,
    pub argmax_a: f64,
    pub min_in: f64,
    pub max_out: f64,
    pub points: Vec<NecPoint>,
    /// `V_{n-K}` solution at `argmax_a`, indexed by the ascending complement of `C*`.
    #[serde(skip)]
    pub argmax_solution: Option<Matrix>,
}

/// Geometric grid of 32 points on `[1, K]`, plus `√K (n-K)^{1/4}`, `√(nq/(1-q))/κ + 1`
/// when `q` is given, and `K`; clipped to `[1, min(K, n-K)]`, sorted, deduplicated.
pub fn default_a_grid(n: usize, k: usize, q: Option<f64>, cfg: &InfoConfig) -> Vec<f64> {
    let kf = k as f64;
    let m = n.saturating_sub(k) as f64;
    let hi = kf.min(m).max(1.0);
    let mut g: Vec<f64> = (0..32).map(|i| kf.powf(i as f64 / 31.0)).collect();
    g.push(kf.sqrt() * m.powf(0.25));
    if let Some(q) = q {
        if q > 0.0 && q < 1.0 {
            g.push((n as f64 * q / (1.0 - q)).sqrt() / kappa(n, q, cfg) + 1.0);
        }
    }
    g.push(kf);
    let mut g: Vec<f64> = g.into_iter().filter(|a| a.is_finite()).map(|a| a.clamp(1.0, hi)).collect();
    g.sort_by(f64::total_cmp);
    g.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    g
}

/// Evaluates the necessary condition on a grid of `a` using `vm` to compute
/// `V_{n-K}(a)` on the complement block of `L`.
pub fn nec_check<F>(l: &SymMatrix, truth: &[usize], a_grid: &[f64], mut vm: F) -> Result<NecReport>
where
    F: FnMut(&SymMatrix, f64) -> std::result::Result<SdpSolution, SdpError>,
{
    let n = l.n();
    check_truth(n, truth)?;
    let k = truth.len();
    let kf = k as f64;
    if n - k < 2 {
        return Err(CertifyError::Domain(format!("complement of size {} too small", n - k)));
    }
    if a_grid.is_empty() {
        return Err(CertifyError::Domain("empty a grid".into()));
    }
    if let Some(a) = a_grid.iter().find(|a| !(1.0..=kf).contains(*a)) {
        return Err(CertifyError::Domain(format!("a = {a} outside [1, {k}]")));
    }
    let comp = complement(truth, n);
    let e = e_stats(l, truth);
    let min_in = truth.iter().map(|&i| e[i]).fold(f64::INFINITY, f64::min);
    let max_out = comp.iter().map(|&i| e[i]).fold(f64::NEG_INFINITY, f64::max);
    let w = l.sub(&comp);
    let m = comp.len() as f64;

    let mut points = Vec::with_capacity(a_grid.len());
    let mut best: Option<(f64, f64, Matrix)> = None;
    for &a in a_grid {
        if a > m {
            // V_m(a) is infeasible for a > m.
            points.push(NecPoint { a, v: f64::NEG_INFINITY, v_upper: f64::NEG_INFINITY, term: f64::NEG_INFINITY });
            continue;
        }
        let sol = vm(&w, a)?;
        let term = sol.objective - a / kf * max_out;
        points.push(NecPoint { a, v: sol.objective, v_upper: sol.upper_bound, term });
        if best.as_ref().map_or(true, |(t, _, _)| term > *t) {
            best = Some((term, a, sol.z));
        }
    }
    let (sup, argmax_a, z) = best.ok_or_else(|| CertifyError::Domain("no feasible a in grid".into()))?;
    let worst_margin = min_in - max_out - sup;
    Ok(NecReport {
        consistent: worst_margin >= 0.0,
        worst_margin,
        argmax_a,
        min_in,
        max_out,
        points,
        argmax_solution: Some(z),
    })
}

/// Scalars of the perturbation family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbScalars {
    pub eps: f64,
    pub r: f64,
    pub alpha_p: f64,
    pub beta_p: f64,
}

impl PerturbScalars {
    /// Solves the two equality constraints exactly for `(α, β)`, taking the root of
    /// the quadratic in `β` nearest `1 - r`.
    pub fn solve(k: usize, r: f64, eps: f64) -> Result<Self> {
        let kf = k as f64;
        let e = eps;
        // (K-2e)(K-(1-b)e)^2 = (K^2-2eKr)(K-2e+(1+b^2)e^2), divided by e.
        let qa = e * (-kf * kf + 2.0 * kf * e * r + kf - 2.0 * e);
        let qb = 2.0 * (kf - e) * (kf - 2.0 * e);
        let qc = -kf * kf * e + 2.0 * kf * kf * r - 2.0 * kf * kf + 2.0 * kf * e * e * r - 4.0 * kf * e * r
            + 5.0 * kf * e
            - 2.0 * e * e;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            return Err(CertifyError::WitnessFailed(format!("no real beta at eps = {eps:e}")));
        }
        let beta_p = -2.0 * qc / (qb + disc.sqrt());
        let alpha_p = (kf - 2.0 * e) / (kf - 2.0 * e + (1.0 + beta_p * beta_p) * e * e);
        Ok(Self { eps, r, alpha_p, beta_p })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub z: Matrix,
    pub scalars: PerturbScalars,
    /// Member of `C*` with the smallest `e(i, C*)` (its entry becomes `1 - ε`).
    pub i_min: usize,
    /// Outsider with the largest `e(j, C*)` (its entry becomes `βε`).
    pub j_max: usize,
    /// Weight of the interior point mixed into `U` to make it PSD.
    pub theta: f64,
    pub halvings: u32,
    pub min_eig: f64,
    pub trace_residual: f64,
    pub sum_residual: f64,
}

/// `Z = α ξ_ε ξ_εᵀ + 2ε U` with `U` a `V_{n-K}(a)` point on the complement block
/// (indexed by the ascending complement of `truth`). `ε` is halved until `Z` is PSD
/// to `-1e-9`, failing below `1e-8`.
pub fn perturbation_solution(l: &SymMatrix, truth: &[usize], u: &Matrix, a: f64, eps: f64) -> Result<Perturbation> {
    let n = l.n();
    check_truth(n, truth)?;
    let k = truth.len();
    let kf = k as f64;
    let comp = complement(truth, n);
    let m = comp.len();
    if u.n() != m {
        return Err(CertifyError::Dimension(format!("U is {0}x{0}, complement has {m}", u.n())));
    }
    if m == 0 {
        return Err(CertifyError::Domain("empty complement".into()));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(CertifyError::Domain(format!("eps = {eps} outside (0, 1/2)")));
    }
    if !(1.0..=kf).contains(&a) {
        return Err(CertifyError::Domain(format!("a = {a} outside [1, {k}]")));
    }
    let e = e_stats(l, truth);
    let i_min = *truth.iter().min_by(|&&i, &&j| e[i].total_cmp(&e[j]).then(i.cmp(&j))).unwrap();
    let j_max = *comp.iter().max_by(|&&i, &&j| e[i].total_cmp(&e[j]).then(j.cmp(&i))).unwrap();

    // Mix U with the interior point dI + oJ of V_m(a) so that it is PSD.
    let mut u = u.clone();
    u.symmetrize();
    let mut theta = 0.0;
    let lu = lambda_min(&u)?;
    let mf = m as f64;
    if lu < 0.0 && m >= 2 && a < mf {
        let d0 = (mf - a) / (mf * (mf - 1.0));
        theta = -lu / (d0 - lu);
        let mut y0 = Problem::Vm { a }.interior_point(m);
        y0.scale(theta);
        u.scale(1.0 - theta);
        u.axpy(1.0, &y0);
    }

    let r = a / kf;
    let inside = mask(truth, n);
    let mut pos = vec![usize::MAX; n];
    for (p, &i) in comp.iter().enumerate() {
        pos[i] = p;
    }
    let mut eps = eps;
    let mut halvings = 0;
    loop {
        let sc = PerturbScalars::solve(k, r, eps)?;
        let mut xi: Vec<f64> = (0..n).map(|i| if inside[i] { 1.0 } else { 0.0 }).collect();
        xi[i_min] = 1.0 - eps;
        xi[j_max] = sc.beta_p * eps;
        let z = Matrix::from_fn(n, |i, j| {
            let base = sc.alpha_p * xi[i] * xi[j];
            if pos[i] != usize::MAX && pos[j] != usize::MAX {
                base + 2.0 * eps * u.get(pos[i], pos[j])
            } else {
                base
            }
        });
        let min_eig = lambda_min(&z)?;
        let diag_ok = z.diag().iter().all(|&x| x <= 1.0 + 1e-12);
        if min_eig >= -1e-9 && z.min_entry() >= -1e-12 && diag_ok {
            return Ok(Perturbation {
                scalars: sc,
                i_min,
                j_max,
                theta,
                halvings,
                min_eig,
                trace_residual: (z.trace() - kf).abs(),
                sum_residual: (z.sum() - kf * kf).abs(),
                z,
            });
        }
        eps /= 2.0;
        halvings += 1;
        if eps < 1e-8 {
            return Err(CertifyError::WitnessFailed(format!(
                "no feasible perturbation down to eps = {eps:e} (min eig {min_eig:e})"
            )));
        }
    }
}

/// Scalars of a `V_m(a)` witness; fields not used by a construction are `None`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WitnessParams {
    pub tau: Option<f64>,
    pub gamma: Option<f64>,
    pub eps_w: Option<f64>,
    pub r: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub kappa: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauBranch {
    /// `a ≥ c_hi √m`.
    Large,
    /// `a ≤ c_lo √m`.
    Small,
    /// Constant tilt in between.
    Middle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub trace: f64,
    pub j_sum: f64,
    pub min_entry: f64,
    pub min_eig: f64,
    pub objective: f64,
    pub branch: Option<TauBranch>,
}

impl WitnessReport {
    fn of(z: &Matrix, w: &Matrix, branch: Option<TauBranch>) -> Result<Self> {
        Ok(Self {
            trace: z.trace(),
            j_sum: z.sum(),
            min_entry: z.min_entry(),
            min_eig: lambda_min(z)?,
            objective: z.inner_accurate(w),
            branch,
        })
    }

    /// `Z ≥ 0` and `Z ⪰ 0` to `tol`.
    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eig >= -tol && self.min_entry >= -tol
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VmWitness {
    pub z: Matrix,
    pub params: WitnessParams,
    pub report: WitnessReport,
}

/// Tilt `τ` of the Gaussian witness for given `m`, `a`.
pub fn gaussian_tau(m: usize, a: f64, cfg: &InfoConfig) -> (f64, TauBranch) {
    let mf = m as f64;
    let x = a / mf.sqrt();
    if x >= cfg.c_hi {
        let tau = mf.sqrt() / (2.0 * (a - 1.0))
            - mf.powf(0.75) / (2.0 * 2f64.sqrt() * (a - 1.0).powf(1.5))
            - 1.0 / mf.sqrt();
        (tau, TauBranch::Large)
    } else if x <= cfg.c_lo {
        let ell = (mf / (a * a)).ln();
        (((ell - ell.ln()) / 3.0).max(0.0).sqrt(), TauBranch::Small)
    } else {
        (0.9 * (1.0 + mf / (4.0 * a * a)).ln().sqrt(), TauBranch::Middle)
    }
}

/// `Z_ii = 1/m`, `Z_ij = (a-1) g(W_ij) / (α m(m-1))` with `g(x) = e^{τx - τ²/2}`.
pub fn vm_witness_gaussian(w: &SymMatrix, a: f64, cfg: &InfoConfig) -> Result<VmWitness> {
    let m = w.n();
    if !(a > 1.0) {
        return Err(CertifyError::Domain(format!("a = {a} must exceed 1")));
    }
    if m < 2 || a > m as f64 {
        return Err(CertifyError::Domain(format!("a = {a} infeasible for m = {m}")));
    }
    let (tau, branch) = gaussian_tau(m, a, cfg);
    let g = |x: f64| (tau * x - tau * tau / 2.0).exp();
    let mf = m as f64;
    let pairs = mf * (mf - 1.0) / 2.0;
    let mut sum = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            sum += g(w.get(i, j));
        }
    }
    let alpha = sum / pairs;
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(CertifyError::WitnessFailed(format!("normalizer alpha = {alpha}")));
    }
    let c = (a - 1.0) / (alpha * mf * (mf - 1.0));
    let z = Matrix::from_fn(m, |i, j| if i == j { 1.0 / mf } else { c * g(w.get(i, j)) });
    let report = WitnessReport::of(&z, w, Some(branch))?;
    let params = WitnessParams { tau: Some(tau), alpha: Some(alpha), ..Default::default() };
    Ok(VmWitness { z, params, report })
}

/// `Z_ii = 1/m`, `Z_ij = α M_ij + β` with `γ = min{q + (1-ε)√(mq(1-q))/(κ(a-1)), 1}`.
pub fn vm_witness_bernoulli(mm: &SymMatrix, a: f64, q: f64, cfg: &InfoConfig) -> Result<VmWitness> {
    let m = mm.n();
    if !(a >= 1.0) || m < 2 || a > m as f64 {
        return Err(CertifyError::Domain(format!("a = {a} infeasible for m = {m}")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(CertifyError::Domain(format!("q = {q} outside (0, 1)")));
    }
    let mf = m as f64;
    let r = mm.sum() / (mf * (mf - 1.0));
    if !(r > 0.0 && r < 1.0) {
        return Err(CertifyError::DegenerateDensity(r));
    }
    let eps_w = 2.0 / (mf * q.sqrt().min(1.0 / a)).ln();
    if !(eps_w > 0.0 && eps_w < 1.0) {
        return Err(CertifyError::WitnessFailed(format!("slack eps = {eps_w} outside (0, 1)")));
    }
    let kap = kappa(m, q, cfg);
    let gamma = if a == 1.0 {
        1.0
    } else {
        (q + (1.0 - eps_w) * (mf * q * (1.0 - q)).sqrt() / (kap * (a - 1.0))).min(1.0)
    };
    let unit = (a - 1.0) / (mf * (mf - 1.0));
    let alpha = (gamma - r) / (r * (1.0 - r)) * unit;
    let beta = (1.0 - gamma) / (1.0 - r) * unit;
    let z = Matrix::from_fn(m, |i, j| if i == j { 1.0 / mf } else { alpha * mm.get(i, j) + beta });
    let report = WitnessReport::of(&z, mm, None)?;
    let params = WitnessParams {
        gamma: Some(gamma),
        eps_w: Some(eps_w),
        r: Some(r),
        alpha: Some(alpha),
        beta: Some(beta),
        kappa: Some(kap),
        ..Default::default()
    };
    Ok(VmWitness { z, params, report })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbmReport {
    /// `max |(Y1)_i|`.
    pub row_sum_residual: f64,
    pub diag_exact: bool,
    pub min_offdiag: f64,
    /// `-1/(r-1)`.
    pub offdiag_bound: f64,
    /// `t + 2 w d_max`, a lower bound on the off-diagonal for `s ≥ 0`, `A ≥ 0`.
    pub cond1: f64,
    pub min_eig: f64,
    pub objective: f64,
    pub target: f64,
    pub truth_objective: f64,
}

impl SbmReport {
    /// All SBM constraints hold to `tol`.
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.diag_exact
            && self.row_sum_residual <= tol
            && self.min_offdiag >= self.offdiag_bound - tol
            && self.min_eig >= -tol
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbmWitness {
    pub y: Matrix,
    pub s: f64,
    pub t: f64,
    pub w: f64,
    pub report: SbmReport,
}

/// `Y = sA + t(J - I) + w(d1ᵀ + 1dᵀ - 2D) + I` with `Y1 = 0` and
/// `<A, Y> = (1 + eps_gain) <A, Y*>`.
pub fn sbm_witness(a: &SymMatrix, blocks: &[Vec<usize>], eps_gain: f64) -> Result<SbmWitness> {
    let n = a.n();
    let r = blocks.len();
    if r < 2 || blocks.iter().map(Vec::len).sum::<usize>() != n || n < 3 {
        return Err(CertifyError::Domain(format!("partition of {r} blocks does not cover n = {n}")));
    }
    let nf = n as f64;
    let d: Vec<f64> = (0..n).map(|i| a.row(i).iter().sum()).collect();
    let z: f64 = d.iter().sum();
    let d2: f64 = d.iter().map(|x| x * x).sum();
    let a2: f64 = a.as_slice().iter().map(|x| x * x).sum();
    let ystar = partition_matrix(blocks, n);
    let truth_objective = a.inner_accurate(&ystar);
    let target = (1.0 + eps_gain) * truth_objective;
    // w = -s/(n-2), t = s z/((n-1)(n-2)) - 1/(n-1), and s ΣA² + t z + 2 w ‖d‖² = target.
    let coef = a2 + z * z / ((nf - 1.0) * (nf - 2.0)) - 2.0 * d2 / (nf - 2.0);
    let rhs = target + z / (nf - 1.0);
    if !(coef.abs() > 1e-12 * (a2 + 1.0)) {
        return Err(CertifyError::WitnessFailed(format!("singular system (coefficient {coef:e})")));
    }
    let s = rhs / coef;
    let w = -s / (nf - 2.0);
    let t = s * z / ((nf - 1.0) * (nf - 2.0)) - 1.0 / (nf - 1.0);
    let y = Matrix::from_fn(n, |i, j| if i == j { 1.0 } else { s * a.get(i, j) + t + w * (d[i] + d[j]) });
    let row_sum_residual = (0..n).map(|i| y.row(i).iter().sum::<f64>().abs()).fold(0.0, f64::max);
    let mut min_offdiag = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                min_offdiag = min_offdiag.min(y.get(i, j));
            }
        }
    }
    let dmax = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let report = SbmReport {
        row_sum_residual,
        diag_exact: y.diag().iter().all(|&x| x == 1.0),
        min_offdiag,
        offdiag_bound: -1.0 / (r as f64 - 1.0),
        cond1: t + 2.0 * w * dmax,
        min_eig: linalg::lambda_min(&y)?,
        objective: a.inner_accurate(&y),
        target,
        truth_objective,
    };
    Ok(SbmWitness { y, s, t, w, report })
}

/// Scalar part of an exported certificate; matrices go to sibling Matrix Market files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertEnvelope {
    pub kind: String,
    pub n: usize,
    pub k: usize,
    pub truth: Vec<usize>,
    pub lambda: f64,
    pub eta: f64,
    pub d: Vec<f64>,
    pub means: Means,
    pub files: Vec<String>,
}

/// Writes `cert.json`, `D.mtx`, `B.mtx` and `S.mtx` into `dir`.
pub fn export_certificate(cert: &DualCert, dir: impl AsRef<Path>) -> Result<CertEnvelope> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(IoError::from)?;
    write_matrix_market(dir.join("D.mtx"), &cert.d_matrix())?;
    write_matrix_market(dir.join("B.mtx"), &cert.b)?;
    write_matrix_market(dir.join("S.mtx"), &cert.s)?;
    let env = CertEnvelope {
        kind: "dual_certificate".into(),
        n: cert.s.n(),
        k: cert.truth.len(),
        truth: cert.truth.clone(),
        lambda: cert.lambda,
        eta: cert.eta,
        d: cert.d.clone(),
        means: cert.means,
        files: vec!["D.mtx".into(), "B.mtx".into(), "S.mtx".into()],
    };
    fs::write(dir.join("cert.json"), serde_json::to_string_pretty(&env)?).map_err(IoError::from)?;
    Ok(env)
}
