//! Monte Carlo sweeps over model parameters and their aggregation.
//!
//! A sweep is a grid of at most two parameter axes, each cell run for `trials`
//! independent seeds. Rows are written as CSV (schema [`SCHEMA_VERSION`]) in
//! `(cell, trial)` order whatever order the workers finish in.
//!
//! Axis parameters: `n`, `k`, `r`, `mu`, `p`, `q`, and the scaled forms
//! `rho` (`K = ρ n / log n`), `mu0` (`μ = μ0 log n / √n`), `a` (`p = a log² n / n`)
//! and `b` (`q = b log² n / n`).

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certify::{build_dual_certificate, default_a_grid, nec_check, suff_check, verify_kkt, Means};
use crate::info::{evaluate_conditions, InfoConfig};
use crate::model::{
    cluster_matrix, gen_instance, partition_matrix, score_matrix, splitmix64, ModelKind, ModelSpec, ScoreKind,
};
use crate::oracle::{binomial, mle_exhaustive, MLE_GUARD};
use crate::sdp::{
    recovery_diagnostic, solve_community_sdp, solve_sbm_sdp, solve_vm, SolverOptions,
    SUCCESS_TOL,
};

pub const SCHEMA_VERSION: u32 = 1;
/// Environment variable capping the number of sweep workers.
pub const THREADS_ENV: &str = "COMMUNITY_SDP_THREADS";

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid sweep config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Sdp,
    Mle,
    /// Sufficient-condition check and KKT verification at `Z*`, no solve.
    Certify,
    /// Necessary-condition check on the default `a` grid.
    Nec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Template; axis values override its fields.
    pub model: ModelSpec,
    #[serde(default = "default_score")]
    pub score: ScoreKind,
    #[serde(default)]
    pub axes: Vec<Axis>,
    pub trials: usize,
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub seed0: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub info: InfoConfig,
    /// Tolerance handed to the KKT verifier.
    #[serde(default = "default_kkt_tol")]
    pub kkt_tol: f64,
    /// Adds wall-time columns (breaks byte-identical reruns).
    #[serde(default)]
    pub timing: bool,
}

fn default_score() -> ScoreKind {
    ScoreKind::Adjacency
}

fn default_out() -> PathBuf {
    PathBuf::from("sweep.csv")
}

fn default_kkt_tol() -> f64 {
    1e-6
}

const PARAMS: [&str; 10] = ["n", "r", "rho", "k", "mu0", "mu", "a", "b", "p", "q"];

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self, LabError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Cell coordinates in row-major order (first axis outermost).
    pub fn cells(&self) -> Vec<Vec<f64>> {
        let mut cells = vec![Vec::new()];
        for axis in &self.axes {
            cells = cells
                .into_iter()
                .flat_map(|c| {
                    axis.values.iter().map(move |&v| {
                        let mut c = c.clone();
                        c.push(v);
                        c
                    })
                })
                .collect();
        }
        cells
    }

    /// Model at the given cell coordinates.
    pub fn spec_at(&self, coords: &[f64]) -> Result<ModelSpec, LabError> {
        let mut spec = self.model.clone();
        let get = |name: &str| self.axes.iter().position(|a| a.param == name).map(|i| coords[i]);
        let as_count = |name: &str, v: f64| -> Result<usize, LabError> {
            if v >= 0.0 && v.fract() == 0.0 && v <= 1e9 {
                Ok(v as usize)
            } else {
                Err(LabError::Config(format!("{name} = {v} is not a count")))
            }
        };
        if let Some(v) = get("n") {
            spec.n = as_count("n", v)?;
        }
        if let Some(v) = get("r") {
            spec.r = Some(as_count("r", v)?);
        }
        let nf = spec.n as f64;
        let ln = nf.ln();
        if spec.kind == ModelKind::Sbm {
            let r = spec.r.unwrap_or(0);
            spec.k = if r > 0 { spec.n / r } else { 0 };
        }
        if let Some(rho) = get("rho") {
            spec.k = (rho * nf / ln).round().max(0.0) as usize;
        }
        if let Some(v) = get("k") {
            spec.k = as_count("k", v)?;
        }
        if let Some(mu0) = get("mu0") {
            spec.mu = Some(mu0 * ln / nf.sqrt());
        }
        if let Some(v) = get("mu") {
            spec.mu = Some(v);
        }
        if let Some(a) = get("a") {
            spec.p = Some(a * ln * ln / nf);
        }
        if let Some(b) = get("b") {
            spec.q = Some(b * ln * ln / nf);
        }
        if let Some(v) = get("p") {
            spec.p = Some(v);
        }
        if let Some(v) = get("q") {
            spec.q = Some(v);
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let bad = |s: String| Err(LabError::Config(s));
        if self.trials < 1 {
            return bad("trials must be >= 1".into());
        }
        if self.axes.len() > 2 {
            return bad(format!("at most 2 axes, got {}", self.axes.len()));
        }
        if self.algorithms.is_empty() {
            return bad("no algorithms selected".into());
        }
        for (i, a) in self.axes.iter().enumerate() {
            if !PARAMS.contains(&a.param.as_str()) {
                return bad(format!("unknown axis parameter {:?}", a.param));
            }
            if a.values.is_empty() {
                return bad(format!("axis {:?} has an empty grid", a.param));
            }
            if self.axes[..i].iter().any(|b| b.param == a.param) {
                return bad(format!("axis {:?} repeated", a.param));
            }
        }
        self.solver.validate().map_err(|e| LabError::Config(e.to_string()))?;
        let sbm = self.model.kind == ModelKind::Sbm;
        for coords in self.cells() {
            let spec = self.spec_at(&coords)?;
            spec.validate().map_err(|e| LabError::Config(format!("cell {coords:?}: {e}")))?;
            if self.algorithms.contains(&Algorithm::Mle) {
                let c = binomial(spec.n, spec.k);
                if c > MLE_GUARD as f64 {
                    return bad(format!("cell {coords:?}: C({}, {}) = {c} exceeds the MLE guard", spec.n, spec.k));
                }
            }
            if sbm && self.algorithms.iter().any(|a| *a != Algorithm::Sdp) {
                return bad("SBM sweeps support only the sdp algorithm".into());
            }
            if self.score == ScoreKind::Llr && spec.kind != ModelKind::Gaussian {
                let (p, q) = (spec.p(), spec.q());
                if p >= 1.0 || q <= 0.0 {
                    return bad(format!("cell {coords:?}: LLR undefined for p = {p}, q = {q}"));
                }
            }
        }
        Ok(())
    }
}

/// Trial seed mixed from `seed0`, the cell index and the trial index.
pub fn trial_seed(seed0: u64, cell: usize, trial: usize) -> u64 {
    let mut s = seed0;
    let a = splitmix64(&mut s);
    let mut s = a ^ (cell as u64).wrapping_mul(0xd134_2543_de82_ef95);
    let b = splitmix64(&mut s);
    let mut s = b ^ (trial as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    splitmix64(&mut s)
}

/// One `(cell, trial)` outcome. Missing values are `NaN` / `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub cell: usize,
    pub coords: Vec<f64>,
    pub trial: usize,
    pub seed: u64,
    pub spec: ModelSpec,
    pub rho_eff: f64,
    pub mu0_eff: f64,
    pub sdp_status: Option<String>,
    pub sdp_success: Option<bool>,
    pub sdp_distance: f64,
    pub sdp_non_unique: Option<bool>,
    pub sdp_objective: f64,
    pub truth_objective: f64,
    pub sdp_upper_bound: f64,
    pub sdp_res_primal: f64,
    pub sdp_res_dual: f64,
    pub sdp_gap: f64,
    pub sdp_iters: Option<usize>,
    pub sdp_seconds: f64,
    pub mle_success: Option<bool>,
    pub mle_value: f64,
    pub mle_ties: Option<usize>,
    pub mle_seconds: f64,
    pub cert_suff_margin: f64,
    pub cert_accepted: Option<bool>,
    pub cert_unique: Option<bool>,
    pub cert_lambda2: f64,
    pub nec_consistent: Option<bool>,
    pub nec_margin: f64,
    pub nec_argmax_a: f64,
    pub threshold_margins: Vec<f64>,
    pub error: String,
}

impl TrialRow {
    fn empty(cell: usize, coords: Vec<f64>, trial: usize, seed: u64, spec: ModelSpec) -> Self {
        let nan = f64::NAN;
        let (nf, kf) = (spec.n as f64, spec.k as f64);
        let rho_eff = kf * nf.ln() / nf;
        let mu0_eff = spec.mu.map_or(nan, |mu| mu * nf.sqrt() / nf.ln());
        Self {
            cell,
            coords,
            trial,
            seed,
            spec,
            rho_eff,
            mu0_eff,
            sdp_status: None,
            sdp_success: None,
            sdp_distance: nan,
            sdp_non_unique: None,
            sdp_objective: nan,
            truth_objective: nan,
            sdp_upper_bound: nan,
            sdp_res_primal: nan,
            sdp_res_dual: nan,
            sdp_gap: nan,
            sdp_iters: None,
            sdp_seconds: nan,
            mle_success: None,
            mle_value: nan,
            mle_ties: None,
            mle_seconds: nan,
            cert_suff_margin: nan,
            cert_accepted: None,
            cert_unique: None,
            cert_lambda2: nan,
            nec_consistent: None,
            nec_margin: nan,
            nec_argmax_a: nan,
            threshold_margins: Vec::new(),
            error: String::new(),
        }
    }

    fn note(&mut self, what: &str, e: impl std::fmt::Display) {
        if !self.error.is_empty() {
            self.error.push_str("; ");
        }
        self.error.push_str(&format!("{what}: {e}"));
    }
}

fn fnum(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

fn fopt<T: ToString>(x: &Option<T>) -> String {
    x.as_ref().map_or_else(String::new, T::to_string)
}

/// `ρμ0²`, `ρμ0 - 2√(2ρ) - 2` and `ρμ0 - 2√(2ρ) - 1/2` at the effective `(ρ, μ0)`.
pub fn gaussian_reference_curves(rho: f64, mu0: f64) -> [f64; 3] {
    let base = rho * mu0 - 2.0 * (2.0 * rho).sqrt();
    [rho * mu0 * mu0, base - 2.0, base - 0.5]
}

/// Column names for a sweep; `margins` are threshold-report columns.
pub fn csv_header(cfg: &SweepConfig, margins: &[String]) -> Vec<String> {
    let mut h: Vec<String> = vec!["cell".into()];
    h.extend(cfg.axes.iter().map(|a| format!("axis:{}", a.param)));
    h.extend(
        [
            "trial", "seed", "kind", "n", "k", "r", "mu", "p", "q", "rho_eff", "mu0_eff", "rho_mu0_sq",
            "suff_curve", "nec_curve",
        ]
        .map(String::from),
    );
    h.extend(
        [
            "sdp_status",
            "sdp_success",
            "sdp_distance",
            "sdp_non_unique",
            "sdp_objective",
            "truth_objective",
            "sdp_upper_bound",
            "sdp_res_primal",
            "sdp_res_dual",
            "sdp_gap",
            "sdp_iters",
        ]
        .map(String::from),
    );
    if cfg.timing {
        h.push("sdp_seconds".into());
    }
    h.extend(["mle_success", "mle_value", "mle_ties"].map(String::from));
    if cfg.timing {
        h.push("mle_seconds".into());
    }
    h.extend(
        [
            "cert_suff_margin",
            "cert_accepted",
            "cert_unique",
            "cert_lambda2",
            "nec_consistent",
            "nec_margin",
            "nec_argmax_a",
        ]
        .map(String::from),
    );
    h.extend(margins.iter().cloned());
    h.push("error".into());
    h
}

impl TrialRow {
    pub fn record(&self, timing: bool, n_margins: usize) -> Vec<String> {
        let s = &self.spec;
        let curves = if s.kind == ModelKind::Gaussian {
            gaussian_reference_curves(self.rho_eff, self.mu0_eff)
        } else {
            [f64::NAN; 3]
        };
        let kind = match s.kind {
            ModelKind::Gaussian => "gaussian",
            ModelKind::Bernoulli => "bernoulli",
            ModelKind::Sbm => "sbm",
        };
        let mut r = vec![self.cell.to_string()];
        r.extend(self.coords.iter().map(|&c| fnum(c)));
        r.extend([
            self.trial.to_string(),
            self.seed.to_string(),
            kind.into(),
            s.n.to_string(),
            s.k.to_string(),
            fopt(&s.r),
            s.mu.map_or_else(String::new, fnum),
            s.p.map_or_else(String::new, fnum),
            s.q.map_or_else(String::new, fnum),
            fnum(self.rho_eff),
            fnum(self.mu0_eff),
            fnum(curves[0]),
            fnum(curves[1]),
            fnum(curves[2]),
            fopt(&self.sdp_status),
            fopt(&self.sdp_success),
            fnum(self.sdp_distance),
            fopt(&self.sdp_non_unique),
            fnum(self.sdp_objective),
            fnum(self.truth_objective),
            fnum(self.sdp_upper_bound),
            fnum(self.sdp_res_primal),
            fnum(self.sdp_res_dual),
            fnum(self.sdp_gap),
            fopt(&self.sdp_iters),
        ]);
        if timing {
            r.push(fnum(self.sdp_seconds));
        }
        r.extend([fopt(&self.mle_success), fnum(self.mle_value), fopt(&self.mle_ties)]);
        if timing {
            r.push(fnum(self.mle_seconds));
        }
        r.extend([
            fnum(self.cert_suff_margin),
            fopt(&self.cert_accepted),
            fopt(&self.cert_unique),
            fnum(self.cert_lambda2),
            fopt(&self.nec_consistent),
            fnum(self.nec_margin),
            fnum(self.nec_argmax_a),
        ]);
        for i in 0..n_margins {
            r.push(self.threshold_margins.get(i).map_or_else(String::new, |&x| fnum(x)));
        }
        r.push(self.error.clone());
        r
    }
}

/// Runs one trial; failures are recorded in the row.
pub fn run_trial(cfg: &SweepConfig, cell: usize, coords: &[f64], trial: usize) -> TrialRow {
    let seed = trial_seed(cfg.seed0, cell, trial);
    let spec = match cfg.spec_at(coords) {
        Ok(s) => s,
        Err(e) => {
            let mut row = TrialRow::empty(cell, coords.to_vec(), trial, seed, cfg.model.clone());
            row.note("spec", e);
            return row;
        }
    };
    let mut row = TrialRow::empty(cell, coords.to_vec(), trial, seed, spec.clone());
    let inst = match gen_instance(&spec, seed) {
        Ok(i) => i,
        Err(e) => {
            row.note("generate", e);
            return row;
        }
    };
    let l = match score_matrix(&inst, cfg.score) {
        Ok(l) => l,
        Err(e) => {
            row.note("score", e);
            return row;
        }
    };

    if let Some(blocks) = inst.truth.partition() {
        if cfg.algorithms.contains(&Algorithm::Sdp) {
            let t0 = Instant::now();
            match solve_sbm_sdp(&l, blocks.len(), &cfg.solver) {
                Ok(sol) => {
                    let ystar = partition_matrix(blocks, spec.n);
                    let dist = sol.z.max_abs_diff(&ystar);
                    row.sdp_status = Some(format!("{:?}", sol.status));
                    row.sdp_distance = dist;
                    row.sdp_success = Some(dist <= SUCCESS_TOL);
                    row.sdp_objective = sol.objective;
                    row.truth_objective = l.inner(&ystar);
                    row.sdp_upper_bound = sol.upper_bound;
                    row.sdp_res_primal = sol.residuals.primal;
                    row.sdp_res_dual = sol.residuals.dual;
                    row.sdp_gap = sol.residuals.gap;
                    row.sdp_iters = Some(sol.iters);
                }
                Err(e) => row.note("sdp", e),
            }
            row.sdp_seconds = t0.elapsed().as_secs_f64();
        }
        return row;
    }

    let truth = inst.community().to_vec();
    let k = spec.k;
    for alg in &cfg.algorithms {
        match alg {
            Algorithm::Sdp => {
                let t0 = Instant::now();
                match solve_community_sdp(&l, k, &cfg.solver) {
                    Ok(sol) => {
                        let diag = recovery_diagnostic(&l, &sol, &truth, cfg.solver.tol_gap.max(1e-6));
                        row.sdp_status = Some(format!("{:?}", sol.status));
                        row.sdp_success = Some(diag.success);
                        row.sdp_distance = diag.distance;
                        row.sdp_non_unique = Some(diag.non_unique);
                        row.sdp_objective = sol.objective;
                        row.truth_objective = l.inner(&cluster_matrix(&truth, spec.n));
                        row.sdp_upper_bound = sol.upper_bound;
                        row.sdp_res_primal = sol.residuals.primal;
                        row.sdp_res_dual = sol.residuals.dual;
                        row.sdp_gap = sol.residuals.gap;
                        row.sdp_iters = Some(sol.iters);
                    }
                    Err(e) => row.note("sdp", e),
                }
                row.sdp_seconds = t0.elapsed().as_secs_f64();
            }
            Algorithm::Mle => {
                let t0 = Instant::now();
                match mle_exhaustive(&l, k) {
                    Ok(m) => {
                        row.mle_success = Some(m.maximizers.len() == 1 && m.maximizers[0] == truth);
                        row.mle_value = m.best_value;
                        row.mle_ties = Some(m.maximizers.len());
                    }
                    Err(e) => row.note("mle", e),
                }
                row.mle_seconds = t0.elapsed().as_secs_f64();
            }
            Algorithm::Certify => {
                let res = Means::model(&spec, cfg.score).and_then(|means| {
                    let sc = suff_check(&l, &truth, means)?;
                    let cert = build_dual_certificate(&l, &truth, means)?;
                    let rep = verify_kkt(&l, k, &cluster_matrix(&truth, spec.n), &cert, cfg.kkt_tol)?;
                    Ok((sc, rep))
                });
                match res {
                    Ok((sc, rep)) => {
                        row.cert_suff_margin = sc.margin;
                        row.cert_accepted = Some(rep.accepted);
                        row.cert_unique = Some(rep.unique);
                        row.cert_lambda2 = rep.lambda2;
                    }
                    Err(e) => row.note("certify", e),
                }
            }
            Algorithm::Nec => {
                let q = (spec.kind == ModelKind::Bernoulli).then(|| spec.q());
                let grid = default_a_grid(spec.n, k, q, &cfg.info);
                match nec_check(&l, &truth, &grid, |w, a| solve_vm(w, a, &cfg.solver)) {
                    Ok(r) => {
                        row.nec_consistent = Some(r.consistent);
                        row.nec_margin = r.worst_margin;
                        row.nec_argmax_a = r.argmax_a;
                    }
                    Err(e) => row.note("nec", e),
                }
            }
        }
    }
    row
}

/// Worker count from [`THREADS_ENV`], if set to a positive integer.
pub fn configured_threads() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&t: &usize| t > 0)
}

/// Maps `f` over `jobs` preserving order, in parallel when the feature is on.
pub fn map_ordered<T, R, F>(jobs: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let run = || jobs.par_iter().map(&f).collect();
        match configured_threads() {
            Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
                Ok(pool) => pool.install(run),
                Err(_) => run(),
            },
            None => run(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.iter().map(f).collect()
    }
}

/// All rows of a sweep, in `(cell, trial)` order.
pub fn sweep_rows(cfg: &SweepConfig) -> Result<Vec<TrialRow>, LabError> {
    cfg.validate()?;
    let cells = cfg.cells();
    let jobs: Vec<(usize, usize)> =
        (0..cells.len()).flat_map(|c| (0..cfg.trials).map(move |t| (c, t))).collect();
    let margins: Vec<Vec<f64>> = cells
        .iter()
        .map(|c| {
            cfg.spec_at(c)
                .ok()
                .and_then(|s| evaluate_conditions(&s, &cfg.info).ok())
                .map(|r| r.entries.iter().map(|e| e.margin).collect())
                .unwrap_or_default()
        })
        .collect();
    let mut rows = map_ordered(&jobs, |&(c, t)| run_trial(cfg, c, &cells[c], t));
    for row in &mut rows {
        row.threshold_margins = margins[row.cell].clone();
    }
    Ok(rows)
}

fn margin_columns(cfg: &SweepConfig) -> Vec<String> {
    cfg.cells()
        .iter()
        .find_map(|c| cfg.spec_at(c).ok().and_then(|s| evaluate_conditions(&s, &cfg.info).ok()))
        .map(|r| r.csv_header())
        .unwrap_or_default()
}

/// Writes the schema comment line and the rows as CSV.
pub fn write_rows<W: Write>(cfg: &SweepConfig, rows: &[TrialRow], mut out: W) -> Result<(), LabError> {
    writeln!(out, "# community-sdp-lab v{SCHEMA_VERSION}")?;
    let margins = margin_columns(cfg);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(cfg, &margins))?;
    for row in rows {
        w.write_record(row.record(cfg.timing, margins.len()))?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the sweep and writes `cfg.out`; returns its path.
pub fn run_sweep(cfg: &SweepConfig) -> Result<PathBuf, LabError> {
    let rows = sweep_rows(cfg)?;
    let file = BufWriter::new(File::create(&cfg.out)?);
    write_rows(cfg, &rows, file)?;
    Ok(cfg.out.clone())
}

/// 95% two-sided normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes / trials`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (f64::NAN, f64::NAN);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Boolean columns aggregated by [`report`].
pub const RATE_COLUMNS: [&str; 6] =
    ["sdp_success", "sdp_non_unique", "mle_success", "cert_accepted", "cert_unique", "nec_consistent"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub column: String,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: String,
    /// `(axis column, value)` as written in the input.
    pub coords: Vec<(String, String)>,
    pub rates: Vec<Rate>,
}

/// Per-cell success rates with Wilson intervals from a sweep CSV.
pub fn report<R: Read>(input: R) -> Result<Vec<CellSummary>, LabError> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let cell_col = col("cell").ok_or_else(|| LabError::Config("input has no cell column".into()))?;
    let axis_cols: Vec<usize> = (0..headers.len()).filter(|&i| headers[i].starts_with("axis:")).collect();
    let rate_cols: Vec<(usize, &str)> = RATE_COLUMNS.iter().filter_map(|&c| col(c).map(|i| (i, c))).collect();

    let mut order: Vec<String> = Vec::new();
    let mut acc: HashMap<String, (Vec<(String, String)>, Vec<(usize, usize)>)> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let cell = rec.get(cell_col).unwrap_or("").to_string();
        let entry = acc.entry(cell.clone()).or_insert_with(|| {
            order.push(cell.clone());
            let coords = axis_cols
                .iter()
                .map(|&i| (headers[i].to_string(), rec.get(i).unwrap_or("").to_string()))
                .collect();
            (coords, vec![(0, 0); rate_cols.len()])
        });
        for (slot, &(i, name)) in rate_cols.iter().enumerate() {
            match rec.get(i).unwrap_or("") {
                "" => {}
                "true" => {
                    entry.1[slot].0 += 1;
                    entry.1[slot].1 += 1;
                }
                "false" => entry.1[slot].1 += 1,
                other => return Err(LabError::Config(format!("column {name}: not a boolean: {other:?}"))),
            }
        }
    }
    Ok(order
        .into_iter()
        .map(|cell| {
            let (coords, counts) = acc.remove(&cell).unwrap();
            let rates = rate_cols
                .iter()
                .zip(counts)
                .filter(|(_, (_, t))| *t > 0)
                .map(|(&(_, name), (s, t))| {
                    let (lo, hi) = wilson_interval(s, t, Z95);
                    Rate { column: name.into(), trials: t, successes: s, rate: s as f64 / t as f64, lo, hi }
                })
                .collect();
            CellSummary { cell, coords, rates }
        })
        .collect())
}

/// Writes a report as CSV with one row per `(cell, column)`.
pub fn write_report<W: Write>(cells: &[CellSummary], out: W) -> Result<(), LabError> {
    let mut w = csv::Writer::from_writer(out);
    let axis_names: Vec<String> = cells.first().map(|c| c.coords.iter().map(|(n, _)| n.clone()).collect()).unwrap_or_default();
    let mut header = vec!["cell".to_string()];
    header.extend(axis_names.iter().cloned());
    header.extend(["column", "trials", "successes", "rate", "wilson_lo", "wilson_hi"].map(String::from));
    w.write_record(&header)?;
    for c in cells {
        for r in &c.rates {
            let mut rec = vec![c.cell.clone()];
            rec.extend(c.coords.iter().map(|(_, v)| v.clone()));
            rec.extend([
                r.column.clone(),
                r.trials.to_string(),
                r.successes.to_string(),
                fnum(r.rate),
                fnum(r.lo),
                fnum(r.hi),
            ]);
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn report_file(path: impl AsRef<Path>) -> Result<Vec<CellSummary>, LabError> {
    report(File::open(path)?)
}
