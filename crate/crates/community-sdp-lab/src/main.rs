//! `community-sdp-lab`: generate instances, solve, certify, sweep and report.
//!
//! Exit status is 0 on success, 1 on a runtime failure and 2 on a usage error.
//! Errors are printed to stderr as a single JSON object.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use community_sdp::certify::{
    build_dual_certificate, default_a_grid, export_certificate, nec_check, perturbation_solution, sbm_witness,
    suff_check, verify_kkt, vm_witness_bernoulli, vm_witness_gaussian, MeanSource, Means,
};
use community_sdp::info::{evaluate_conditions, InfoConfig};
use community_sdp::io::{read_matrix_market, write_matrix_market};
use community_sdp::lab::{report_file, run_sweep, write_report, SweepConfig};
use community_sdp::model::{
    cluster_matrix, gen_instance, score_matrix, InstanceRecord, ModelSpec, ScoreKind, SymMatrix, Truth,
};
use community_sdp::sdp::{
    recovery_diagnostic, solve_community_sdp, solve_sbm_sdp, solve_vm, SdpSolution, SolverOptions,
};

#[derive(Parser, Debug)]
#[command(name = "community-sdp-lab", version, about = "Hidden-community SDP experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Gaussian,
    Bernoulli,
    Sbm,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Score {
    Adjacency,
    Llr,
}

impl From<Score> for ScoreKind {
    fn from(s: Score) -> Self {
        match s {
            Score::Adjacency => ScoreKind::Adjacency,
            Score::Llr => ScoreKind::Llr,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Witness {
    Perturbation,
    VmGaussian,
    VmBernoulli,
    Sbm,
}

#[derive(clap::Args, Debug, Clone)]
struct SolverArgs {
    /// Primal, dual and gap tolerance.
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 50_000)]
    max_iters: usize,
    /// Penalty multiplier.
    #[arg(long, default_value_t = 1.0)]
    penalty: f64,
    /// Print solver progress every this many iterations.
    #[arg(long, default_value_t = 0)]
    verbose_every: usize,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            tol_primal: self.tol,
            tol_dual: self.tol,
            tol_gap: self.tol,
            max_iters: self.max_iters,
            penalty: self.penalty,
            verbose_every: self.verbose_every,
            ..SolverOptions::default()
        }
    }
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Draw an instance; writes A.mtx, instance.json and (with --score llr) L.mtx.
    Generate {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        n: usize,
        /// Community size (ignored for SBM, where K = n / r).
        #[arg(long, default_value_t = 0)]
        k: usize,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        r: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Score::Adjacency)]
        score: Score,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Solve the community SDP (default), V_m(a) (--a) or the SBM SDP (--r).
    Solve {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        r: Option<usize>,
        /// Planted community as a comma list, for the recovery diagnostic.
        #[arg(long, value_delimiter = ',')]
        truth: Vec<usize>,
        /// Write the solution matrix here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Build and verify the dual certificate for a planted community, optionally
    /// with the necessary-condition check and a witness.
    Certify {
        #[arg(long = "in")]
        input: PathBuf,
        /// Community as a comma list.
        #[arg(long, value_delimiter = ',')]
        truth: Vec<usize>,
        /// instance.json from `generate`; supplies the truth and exact means.
        #[arg(long)]
        instance: Option<PathBuf>,
        /// Score the matrix was built with (for exact means).
        #[arg(long, value_enum, default_value_t = Score::Adjacency)]
        score: Score,
        /// In-community mean; with --beta overrides the model/plug-in means.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long, default_value_t = 1e-6)]
        kkt_tol: f64,
        /// Also evaluate the necessary condition over the default a grid.
        #[arg(long)]
        nec: bool,
        #[arg(long, value_enum)]
        witness: Option<Witness>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[arg(long, default_value_t = 0.05)]
        eps_gain: f64,
        /// Directory for the JSON envelope and Matrix Market blocks.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// V_m(a) over one or more values of a.
    Vm {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        a: Vec<f64>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Run a sweep described by a JSON config; writes CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-cell success rates with Wilson intervals from a sweep CSV.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate every threshold condition at one parameter point.
    Thresholds {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        k: usize,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        r: Option<usize>,
    },
}

/// Bad flag combination detected after parsing; exits with status 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

fn spec_from(kind: Kind, n: usize, k: usize, mu: Option<f64>, p: Option<f64>, q: Option<f64>, r: Option<usize>) -> Result<ModelSpec> {
    let need = |x: Option<f64>, name: &str| x.ok_or_else(|| anyhow::Error::new(Usage(format!("--{name} is required for this model"))));
    Ok(match kind {
        Kind::Gaussian => ModelSpec::gaussian(n, k, need(mu, "mu")?),
        Kind::Bernoulli => ModelSpec::bernoulli(n, k, need(p, "p")?, need(q, "q")?),
        Kind::Sbm => ModelSpec::sbm(n, r.ok_or_else(|| anyhow::Error::new(Usage("--r is required for sbm".into())))?, need(p, "p")?, need(q, "q")?),
    })
}

fn read_sym(path: &Path) -> Result<SymMatrix> {
    let m = read_matrix_market(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(SymMatrix::from_matrix(m)?)
}

fn solution_json(sol: &SdpSolution) -> Value {
    json!({
        "objective": sol.objective,
        "upper_bound": finite(sol.upper_bound),
        "status": format!("{:?}", sol.status),
        "iters": sol.iters,
        "residuals": {
            "primal": sol.residuals.primal,
            "dual": sol.residuals.dual,
            "gap": sol.residuals.gap,
        },
    })
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn print_json(v: &Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn load_record(path: &Path) -> Result<InstanceRecord> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Generate { kind, n, k, mu, p, q, r, seed, score, out_dir } => {
            let spec = spec_from(kind, n, k, mu, p, q, r)?;
            let inst = gen_instance(&spec, seed)?;
            fs::create_dir_all(&out_dir)?;
            write_matrix_market(out_dir.join("A.mtx"), inst.a.matrix())?;
            let mut files = vec!["A.mtx"];
            if let Score::Llr = score {
                let l = score_matrix(&inst, ScoreKind::Llr)?;
                write_matrix_market(out_dir.join("L.mtx"), l.matrix())?;
                files.push("L.mtx");
            }
            let rec = inst.record();
            fs::write(out_dir.join("instance.json"), serde_json::to_string_pretty(&rec)?)?;
            files.push("instance.json");
            print_json(&json!({ "instance": rec, "files": files }))
        }
        Cmd::Solve { input, k, a, r, truth, out, solver } => {
            if [k.is_some(), a.is_some(), r.is_some()].iter().filter(|&&b| b).count() != 1 {
                return usage("give exactly one of --k, --a, --r");
            }
            let l = read_sym(&input)?;
            let opts = solver.options();
            let (sol, extra) = match (k, a, r) {
                (Some(k), None, None) => {
                    let sol = solve_community_sdp(&l, k, &opts)?;
                    let extra = if truth.is_empty() {
                        Value::Null
                    } else {
                        let d = recovery_diagnostic(&l, &sol, &truth, opts.tol_gap.max(1e-6));
                        json!({ "distance": d.distance, "success": d.success, "non_unique": d.non_unique })
                    };
                    (sol, extra)
                }
                (None, Some(a), None) => (solve_vm(&l, a, &opts)?, Value::Null),
                (None, None, Some(r)) => (solve_sbm_sdp(&l, r, &opts)?, Value::Null),
                _ => return usage("give exactly one of --k, --a, --r"),
            };
            if let Some(path) = out {
                write_matrix_market(path, &sol.z)?;
            }
            let mut v = solution_json(&sol);
            v["recovery"] = extra;
            print_json(&v)
        }
        Cmd::Certify {
            input,
            truth,
            instance,
            score,
            alpha,
            beta,
            kkt_tol,
            nec,
            witness,
            a,
            q,
            eps,
            eps_gain,
            out_dir,
            solver,
        } => {
            let l = read_sym(&input)?;
            let record = instance.as_deref().map(load_record).transpose()?;
            let truth_set = match (&record, truth.is_empty()) {
                (_, false) => Truth::Community(truth.clone()),
                (Some(rec), true) => rec.truth.clone(),
                (None, true) => return usage("give --truth or --instance"),
            };
            let opts = solver.options();
            let info_cfg = InfoConfig::default();
            let mut out = json!({});

            if let Some(blocks) = truth_set.partition() {
                match witness {
                    Some(Witness::Sbm) | None => {
                        let w = sbm_witness(&l, blocks, eps_gain)?;
                        if let Some(dir) = &out_dir {
                            fs::create_dir_all(dir)?;
                            write_matrix_market(dir.join("Y.mtx"), &w.y)?;
                        }
                        out["sbm_witness"] = json!({
                            "s": w.s, "t": w.t, "w": w.w,
                            "report": w.report,
                            "feasible": w.report.is_feasible(1e-6),
                        });
                    }
                    Some(other) => return usage(format!("witness {other:?} needs a single community")),
                }
                return print_json(&out);
            }

            let truth = truth_set.community().unwrap_or_default().to_vec();
            let means = match (alpha, beta, &record) {
                (Some(alpha), Some(beta), _) => Means { alpha, beta, source: MeanSource::Model },
                (None, None, Some(rec)) => Means::model(&rec.spec, score.into())?,
                (None, None, None) => Means::empirical(&l, &truth),
                _ => return usage("give both --alpha and --beta"),
            };
            let k = truth.len();
            let sc = suff_check(&l, &truth, means)?;
            let cert = build_dual_certificate(&l, &truth, means)?;
            let zstar = cluster_matrix(&truth, l.n());
            let rep = verify_kkt(&l, k, &zstar, &cert, kkt_tol)?;
            out["means"] = json!(means);
            out["suff_check"] = json!(sc);
            out["kkt"] = json!(rep);
            out["verdict"] = json!(if rep.unique {
                "certified unique"
            } else if rep.accepted {
                "certified"
            } else {
                "not certified"
            });
            if let Some(dir) = &out_dir {
                out["envelope"] = json!(export_certificate(&cert, dir)?);
            }
            if nec {
                let q = record.as_ref().and_then(|r| r.spec.q);
                let grid = default_a_grid(l.n(), k, q, &info_cfg);
                let r = nec_check(&l, &truth, &grid, |w, a| solve_vm(w, a, &opts))?;
                out["nec_check"] = json!(r);
            }
            if let Some(wit) = witness {
                let comp = community_sdp::model::complement(&truth, l.n());
                let w = l.sub(&comp);
                let Some(a) = a else { return usage("--a is required for this witness") };
                match wit {
                    Witness::Perturbation => {
                        let u = solve_vm(&w, a, &opts)?;
                        let p = perturbation_solution(&l, &truth, &u.z, a, eps)?;
                        let gain = l.inner(&p.z) - l.inner(&zstar);
                        if let Some(dir) = &out_dir {
                            write_matrix_market(dir.join("Z.mtx"), &p.z)?;
                        }
                        out["perturbation"] = json!({
                            "scalars": p.scalars, "i_min": p.i_min, "j_max": p.j_max,
                            "theta": p.theta, "halvings": p.halvings, "min_eig": p.min_eig,
                            "trace_residual": p.trace_residual, "sum_residual": p.sum_residual,
                            "objective_gain": gain, "v_value": u.objective,
                        });
                    }
                    Witness::VmGaussian | Witness::VmBernoulli => {
                        let vw = if let Witness::VmGaussian = wit {
                            vm_witness_gaussian(&w, a, &info_cfg)?
                        } else {
                            let q = q.or(record.as_ref().and_then(|r| r.spec.q)).ok_or_else(|| anyhow::Error::new(Usage("--q is required".into())))?;
                            vm_witness_bernoulli(&w, a, q, &info_cfg)?
                        };
                        if let Some(dir) = &out_dir {
                            write_matrix_market(dir.join("Z.mtx"), &vw.z)?;
                        }
                        out["vm_witness"] = json!({ "params": vw.params, "report": vw.report });
                    }
                    Witness::Sbm => return usage("the sbm witness needs a partition (use --instance)"),
                }
            }
            print_json(&out)
        }
        Cmd::Vm { input, a, solver } => {
            let m = read_sym(&input)?;
            let opts = solver.options();
            let mut rows = Vec::new();
            for a in a {
                let sol = solve_vm(&m, a, &opts)?;
                let mut v = solution_json(&sol);
                v["a"] = json!(a);
                v["value"] = json!(sol.objective);
                rows.push(v);
            }
            print_json(&Value::Array(rows))
        }
        Cmd::Sweep { config, out } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg = SweepConfig::from_json(&text)?;
            if let Some(out) = out {
                cfg.out = out;
            }
            let path = run_sweep(&cfg)?;
            print_json(&json!({ "out": path }))
        }
        Cmd::Report { input, out } => {
            let cells = report_file(&input)?;
            match out {
                Some(path) => {
                    write_report(&cells, fs::File::create(&path)?)?;
                    print_json(&json!({ "out": path, "cells": cells.len() }))
                }
                None => Ok(write_report(&cells, io::stdout().lock())?),
            }
        }
        Cmd::Thresholds { kind, n, k, mu, p, q, r } => {
            let spec = spec_from(kind, n, k, mu, p, q, r)?;
            let rep = evaluate_conditions(&spec, &InfoConfig::default())?;
            print_json(&serde_json::from_str(&rep.to_json())?)
        }
    }
}

fn emit_error(kind: &str, message: &str) {
    let v = json!({ "error": kind, "message": message });
    eprintln!("{v}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            emit_error("usage", &e.to_string());
            return ExitCode::from(2);
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Usage>() => {
            emit_error("usage", &format!("{e:#}"));
            ExitCode::from(2)
        }
        Err(e) => {
            emit_error("runtime", &format!("{e:#}"));
            ExitCode::from(1)
        }
    }
}
