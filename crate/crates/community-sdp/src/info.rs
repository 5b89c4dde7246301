//! Divergences, threshold quantities and condition evaluators.
//!
//! All logarithms are natural. Asymptotic side conditions (`ω`, `o`, `Θ`) are
//! never assumed: they are reported as regime labels using the configurable
//! cutoffs in [`InfoConfig`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, ModelKind, ModelSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InfoError {
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("infinite divergence d({p} || {q})")]
    InfiniteDivergence { p: f64, q: f64 },
    #[error("no root: {0}")]
    NoRoot(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Constants that the asymptotic statements leave unspecified.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InfoConfig {
    /// κ in the `nq = Ω(log n)` branch (not a paper value).
    pub kappa_c0: f64,
    /// `nq ≥ kappa_c1 · log n` selects the `4 + o(1)` branch of κ (not a paper value).
    pub kappa_c1: f64,
    /// `x ≤ c_lo` is labelled `o(·)` when comparing a size against `√n`.
    pub c_lo: f64,
    /// `x ≥ c_hi` is labelled `ω(·)`.
    pub c_hi: f64,
}

impl Default for InfoConfig {
    fn default() -> Self {
        Self { kappa_c0: 8.0, kappa_c1: 5.0, c_lo: 0.3, c_hi: 4.0 }
    }
}

impl InfoConfig {
    /// Order label for a ratio `x` (e.g. `K/√n`).
    pub fn order_label(&self, x: f64) -> &'static str {
        if x <= self.c_lo {
            "o"
        } else if x >= self.c_hi {
            "omega"
        } else {
            "Theta"
        }
    }
}

fn xlogy_ratio(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

/// Binary KL divergence `d(p || q)` with `0 log 0 = 0`.
pub fn kl_bern(p: f64, q: f64) -> Result<f64, InfoError> {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
        return Err(InfoError::Domain(format!("kl_bern({p}, {q})")));
    }
    if (q == 0.0 && p > 0.0) || (q == 1.0 && p < 1.0) {
        return Err(InfoError::InfiniteDivergence { p, q });
    }
    Ok((xlogy_ratio(p, q) + xlogy_ratio(1.0 - p, 1.0 - q)).max(0.0))
}

/// `d(x || q)` extended by `+inf` where it diverges.
fn kl_ext(x: f64, q: f64) -> f64 {
    kl_bern(x, q).unwrap_or(f64::INFINITY)
}

/// Bisection for a sign change of `f` on `[lo, hi]`, run to machine precision
/// (at most 200 halvings). Returns the endpoint with the smaller residual.
pub fn bisect(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64) -> Result<f64, InfoError> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return Err(InfoError::NoRoot(format!("no sign change on [{lo}, {hi}]")));
    }
    let mut fhi = fhi;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    Ok(if flo.abs() <= fhi.abs() { lo } else { hi })
}

fn check_pq(p: f64, q: f64, strict: bool) -> Result<(), InfoError> {
    let ok = if strict { 0.0 < q && q < p && p < 1.0 } else { 0.0 <= q && q < p && p <= 1.0 };
    if ok {
        Ok(())
    } else {
        Err(InfoError::Domain(format!("need 0 < q < p < 1, got p = {p}, q = {q}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauStar {
    pub value: f64,
    /// Whether `q ≤ τ* ≤ p`.
    pub in_range: bool,
}

/// `τ* = (log((1-q)/(1-p)) + log(n/K)/K) / log(p(1-q)/(q(1-p)))`.
/// At `p = 1` the limit `τ* = 1` is returned.
pub fn tau_star(n: usize, k: usize, p: f64, q: f64) -> Result<TauStar, InfoError> {
    check_pq(p, q, false)?;
    if q == 0.0 {
        return Err(InfoError::Domain("tau_star undefined at q = 0".into()));
    }
    if k == 0 || k > n {
        return Err(InfoError::Domain(format!("need 1 <= K <= n, got n = {n}, K = {k}")));
    }
    let value = if p == 1.0 {
        1.0
    } else {
        let den = (p * (1.0 - q) / (q * (1.0 - p))).ln();
        if !(den.abs() > 1e-300) {
            return Err(InfoError::Domain("log-likelihood ratio vanishes (q -> p)".into()));
        }
        (((1.0 - q) / (1.0 - p)).ln() + (n as f64 / k as f64).ln() / k as f64) / den
    };
    Ok(TauStar { value, in_range: q <= value && value <= p })
}

/// Roots `τ1 ∈ (0, p)` of `K d(τ||p) = log K` and `τ2 ∈ (q, 1)` of
/// `K d(τ||q) = log(n-K)`. `K = 1` gives `τ1 = p`, `n - K = 1` gives `τ2 = q`;
/// `p = 1` gives `τ1 = 1` and `q = 0` gives `τ2 = 0` (divergence is infinite
/// everywhere else).
pub fn solve_tau12(n: usize, k: usize, p: f64, q: f64) -> Result<(f64, f64), InfoError> {
    check_pq(p, q, false)?;
    if k == 0 || k >= n {
        return Err(InfoError::Domain(format!("need 1 <= K < n, got n = {n}, K = {k}")));
    }
    let kf = k as f64;
    let log_k = kf.ln();
    let log_m = ((n - k) as f64).ln();

    let tau1 = if k == 1 || p == 1.0 {
        p
    } else {
        let f = |t: f64| kf * kl_ext(t, p) - log_k;
        if !(f(0.0) > 0.0) {
            return Err(InfoError::NoRoot(format!("K d(0||p) = {} <= log K", kf * kl_ext(0.0, p))));
        }
        bisect(f, 0.0, p)?
    };
    let tau2 = if n - k == 1 || q == 0.0 {
        q
    } else {
        let f = |t: f64| kf * kl_ext(t, q) - log_m;
        if !(f(1.0) > 0.0) {
            return Err(InfoError::NoRoot(format!("K d(1||q) = {} <= log(n-K)", kf * kl_ext(1.0, q))));
        }
        bisect(f, q, 1.0)?
    };
    Ok((tau1, tau2))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KappaBranch {
    /// `nq = ω(log⁴ n)`: κ = 2.
    Log4,
    /// `nq = ω(log n)`: κ = 4.
    LogN,
    /// `nq = Ω(log n)`: configured constant.
    Constant,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    pub value: f64,
    pub branch: KappaBranch,
    /// `nq < log n`, outside the regime the constant is stated for.
    pub below_log_n: bool,
}

pub fn kappa_branch(n: usize, q: f64, cfg: &InfoConfig) -> Kappa {
    let nq = n as f64 * q;
    let ln = (n as f64).ln();
    let (value, branch) = if nq >= ln.powi(4) {
        (2.0, KappaBranch::Log4)
    } else if nq >= cfg.kappa_c1 * ln {
        (4.0, KappaBranch::LogN)
    } else {
        (cfg.kappa_c0, KappaBranch::Constant)
    };
    Kappa { value, branch, below_log_n: nq < ln }
}

/// Piecewise constant κ: 2, 4 or `kappa_c0`.
pub fn kappa(n: usize, q: f64, cfg: &InfoConfig) -> f64 {
    kappa_branch(n, q, cfg).value
}

/// `I(x, y) = x - y log(e x / y)`.
pub fn rate_i(x: f64, y: f64) -> f64 {
    x - y - y * (x / y).ln()
}

/// `γ1 < a` with `ρ I(a, γ1) = 1` and `γ2 > b` with `ρ I(b, γ2) = 1`.
pub fn gamma_pair(rho: f64, a: f64, b: f64) -> Result<(f64, f64), InfoError> {
    if !(rho > 0.0 && a > b && b > 0.0) {
        return Err(InfoError::Domain(format!("need rho > 0, a > b > 0; got {rho}, {a}, {b}")));
    }
    // I(a, .) decreases from a (at 0+) to 0 (at a).
    if !(rho * a > 1.0) {
        return Err(InfoError::NoRoot(format!("rho * a = {} <= 1, gamma1 undefined", rho * a)));
    }
    let f1 = |y: f64| if y == 0.0 { rho * a - 1.0 } else { rho * rate_i(a, y) - 1.0 };
    let g1 = bisect(f1, 0.0, a)?;
    // I(b, .) increases from 0 (at b) without bound.
    let f2 = |y: f64| rho * rate_i(b, y) - 1.0;
    let mut hi = 2.0 * b;
    while f2(hi) <= 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(InfoError::NoRoot("gamma2 bracket".into()));
        }
    }
    let g2 = bisect(f2, b, hi)?;
    Ok((g1, g2))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Sufficient,
    Necessary,
    #[serde(rename = "ITpossible")]
    ItPossible,
    #[serde(rename = "ITimpossible")]
    ItImpossible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub id: String,
    pub side: Side,
    #[serde(with = "nan_null")]
    pub lhs: f64,
    #[serde(with = "nan_null")]
    pub rhs: f64,
    pub satisfied: bool,
    #[serde(with = "nan_null")]
    pub margin: f64,
}

impl Entry {
    /// `satisfied ⟺ lhs - rhs > 0`; NaN (not applicable) is never satisfied.
    pub fn new(id: &str, side: Side, lhs: f64, rhs: f64) -> Self {
        let margin = lhs - rhs;
        Self { id: id.to_string(), side, lhs, rhs, satisfied: margin > 0.0, margin }
    }
}

/// An order condition or reference line, reported but not evaluated as a criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub name: String,
    #[serde(with = "nan_null")]
    pub value: f64,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub point: ModelSpec,
    pub entries: Vec<Entry>,
    pub regimes: Vec<Regime>,
    pub notes: Vec<String>,
}

impl ThresholdReport {
    pub fn entry(&self, id: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn margin(&self, id: &str) -> Option<f64> {
        self.entry(id).map(|e| e.margin)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// CSV header: one `margin:<id>` column per entry. The entry list is fixed
    /// per model kind, so rows of the same kind share a header.
    pub fn csv_header(&self) -> Vec<String> {
        self.entries.iter().map(|e| format!("margin:{}", e.id)).collect()
    }

    pub fn csv_row(&self) -> Vec<String> {
        self.entries.iter().map(|e| fmt_f64(e.margin)).collect()
    }
}

/// Non-finite numbers round-trip through JSON as `null` (NaN).
pub(crate) mod nan_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

pub(crate) fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x}")
    }
}

/// Evaluates every applicable condition at one parameter point.
pub fn evaluate_conditions(spec: &ModelSpec, cfg: &InfoConfig) -> Result<ThresholdReport, InfoError> {
    spec.validate()?;
    let mut rep = ThresholdReport { point: spec.clone(), entries: Vec::new(), regimes: Vec::new(), notes: Vec::new() };
    match spec.kind {
        ModelKind::Gaussian => gaussian_conditions(spec, cfg, &mut rep),
        ModelKind::Bernoulli => bernoulli_conditions(spec, cfg, &mut rep),
        ModelKind::Sbm => sbm_conditions(spec, cfg, &mut rep),
    }
    Ok(rep)
}

fn gaussian_conditions(spec: &ModelSpec, cfg: &InfoConfig, rep: &mut ThresholdReport) {
    let (n, k, mu) = (spec.n as f64, spec.k as f64, spec.mu());
    let ln = n.ln();
    let lk = k.ln();
    let lm = (n - k).ln();
    let sk = k.sqrt();
    let base = ((2.0 * lk).sqrt() + (2.0 * lm).sqrt()) / sk;
    let e = &mut rep.entries;
    e.push(Entry::new("sdp-suff", Side::Sufficient, mu, base + 2.0 * n.sqrt() / k));
    e.push(Entry::new("SDP-trivial", Side::Sufficient, mu, 2.0 * lk.sqrt() + 2.0 * ln.sqrt()));
    e.push(Entry::new("sdp-nece1", Side::Necessary, mu, base + n.sqrt() / (2.0 * k)));
    e.push(Entry::new("sdp-nece2", Side::Necessary, mu, (1.0 + n / (4.0 * k * k)).ln().sqrt()));
    let nece3 = if n > k * k { ((n / (k * k)).ln() / 3.0).sqrt() } else { f64::NAN };
    e.push(Entry::new("sdp-nece3", Side::Necessary, mu, nece3));
    let it = ((2.0 * lk).sqrt() + (2.0 * ln).sqrt()).max(2.0 * (n / k).ln().max(0.0).sqrt()) / sk;
    e.push(Entry::new("infor_exact", Side::ItPossible, mu, it));
    e.push(Entry::new("infor_exact_necc", Side::ItImpossible, it, mu));

    // K = ρ n / log n, μ = μ0 log n / √n.
    let rho = k * ln / n;
    let mu0 = mu * n.sqrt() / ln;
    let rm = rho * mu0;
    e.push(Entry::new("regime-sdp-suff", Side::Sufficient, rm, 2.0 * (2.0 * rho).sqrt() + 2.0));
    e.push(Entry::new("regime-sdp-nec", Side::Necessary, rm, 2.0 * (2.0 * rho).sqrt() + 0.5));
    e.push(Entry::new("regime-mle", Side::ItPossible, rho * mu0 * mu0, 8.0));
    e.push(Entry::new("regime-mle-nec", Side::ItImpossible, 8.0, rho * mu0 * mu0));

    let ks = k / n.sqrt();
    let r = &mut rep.regimes;
    r.push(Regime { name: "K/sqrt(n)".into(), value: ks, label: cfg.order_label(ks).into() });
    let active = match cfg.order_label(ks) {
        "omega" => "sdp-nece1",
        "Theta" => "sdp-nece2",
        _ => "sdp-nece3",
    };
    r.push(Regime { name: "necessary-branch".into(), value: ks, label: active.into() });
    r.push(Regime { name: "K log n / n".into(), value: rho, label: cfg.order_label(rho).into() });
    r.push(Regime { name: "K/n".into(), value: k / n, label: "n-K ~ n requires K/n bounded away from 1".into() });
    r.push(Regime { name: "ref:mp-cleanup rho*mu0".into(), value: rm, label: "succeeds if rho*mu0^2 > 8 and rho*mu0 > 1/sqrt(e)".into() });
    r.push(Regime { name: "ref:linear-mp rho*mu0".into(), value: rm, label: "succeeds if rho*mu0^2 > 8 and rho*mu0 > 1".into() });
}

fn bernoulli_conditions(spec: &ModelSpec, cfg: &InfoConfig, rep: &mut ThresholdReport) {
    let (n, k, p, q) = (spec.n, spec.k, spec.p(), spec.q());
    let (nf, kf) = (n as f64, k as f64);
    let ln = nf.ln();
    let kap = kappa_branch(n, q, cfg);
    let kv = kap.value;
    let taus = solve_tau12(n, k, p, q);
    let (t1, t2) = match &taus {
        Ok((a, b)) => (*a, *b),
        Err(err) => {
            rep.notes.push(format!("tau1/tau2 undefined: {err}"));
            (f64::NAN, f64::NAN)
        }
    };
    let e = &mut rep.entries;
    e.push(Entry::new(
        "sdp-suff-Bern",
        Side::Sufficient,
        kf * (t1 - t2),
        kv * ((nf * q * (1.0 - q)).sqrt() + (kf * p * (1.0 - p)).sqrt()),
    ));
    let root = (nf * q / (1.0 - q)).sqrt() / kv;
    e.push(Entry::new("sdp-necc-BernXX", Side::Necessary, kf, root + 1.0));
    let lk = kf.ln();
    let nec_rhs = root * (1.0 - t2) - 6.0 * (kf * p / lk).sqrt() - kf * (p - q) * (2.0 * lk.ln() + 1.0) / lk;
    e.push(Entry::new("sdp-necc-Bern", Side::Necessary, kf * (t1 - t2), nec_rhs));
    e.push(Entry::new("tau12-undefined", Side::ItImpossible, if taus.is_err() { 1.0 } else { 0.0 }, 0.0));

    let ts = tau_star(n, k, p, q);
    let (ra, rb) = match &ts {
        Ok(t) => {
            if !t.in_range {
                rep.notes.push(format!("tau* = {} outside [q, p]", t.value));
            }
            let da = kl_bern(t.value.clamp(0.0, 1.0), q).unwrap_or(f64::NAN);
            let dpq = kl_bern(p, q).unwrap_or(f64::NAN);
            (kf * da / ln, kf * dpq / (nf / kf).ln())
        }
        Err(err) => {
            rep.notes.push(format!("tau* undefined: {err}"));
            (f64::NAN, f64::NAN)
        }
    };
    e.push(Entry::new("infor_exact_Bernoulli:tau", Side::ItPossible, ra, 1.0));
    e.push(Entry::new("infor_exact_Bernoulli:pq", Side::ItPossible, rb, 2.0));
    e.push(Entry::new("infor_exact_Bernoulli_necess:tau", Side::ItImpossible, 1.0, ra));
    e.push(Entry::new("infor_exact_Bernoulli_necess:pq", Side::ItImpossible, 2.0, rb));

    // Planted clique specialisation.
    let pc = p == 1.0 && q == 0.5;
    let (pc_l, pc_s, pc_n) = if pc { (kf, 2.0 * nf.sqrt(), nf.sqrt() / 2.0) } else { (f64::NAN, f64::NAN, f64::NAN) };
    e.push(Entry::new("rmk-PC-suff", Side::Sufficient, pc_l, pc_s));
    e.push(Entry::new("rmk-PC-nec", Side::Necessary, pc_l, pc_n));

    // K = ρ n / log n, p = a log² n / n, q = b log² n / n.
    let rho = kf * ln / nf;
    let a = p * nf / (ln * ln);
    let b = q * nf / (ln * ln);
    let (g1, g2) = match gamma_pair(rho, a, b) {
        Ok(g) => g,
        Err(err) => {
            rep.notes.push(format!("gamma pair undefined: {err}"));
            (f64::NAN, f64::NAN)
        }
    };
    e.push(Entry::new("cor1-mle", Side::ItPossible, g1, g2));
    e.push(Entry::new("cor1-mle-nec", Side::ItImpossible, g2, g1));
    e.push(Entry::new("cor1-sdp-suff", Side::Sufficient, rho * (g1 - g2), 4.0 * b.sqrt()));
    e.push(Entry::new("cor1-sdp-nec", Side::Necessary, rho * (g1 - g2), b.sqrt() / 4.0));

    let r = &mut rep.regimes;
    let branch = match kap.branch {
        KappaBranch::Log4 => "nq >= log^4 n (kappa = 2)",
        KappaBranch::LogN => "nq >= c1 log n (kappa = 4)",
        KappaBranch::Constant => "nq = Omega(log n) (kappa = c0, not a paper value)",
    };
    r.push(Regime { name: "kappa".into(), value: kv, label: branch.into() });
    if kap.below_log_n {
        rep.notes.push("nq < log n: outside the assumed sparsity regime".into());
    }
    r.push(Regime { name: "nq/log n".into(), value: nf * q / ln, label: cfg.order_label(nf * q / ln / cfg.c_hi.max(1.0)).into() });
    let sep = kf * (p - q) / (nf * q).sqrt();
    r.push(Regime { name: "K(p-q)/sqrt(nq)".into(), value: sep, label: cfg.order_label(sep).into() });
    r.push(Regime { name: "K log n / n".into(), value: rho, label: cfg.order_label(rho).into() });
    r.push(Regime { name: "log LLR slope".into(), value: (p * (1.0 - q) / (q * (1.0 - p))).ln(), label: "assumed bounded".into() });
    r.push(Regime { name: "ref:bp-cleanup rho(a-b)".into(), value: rho * (a - b), label: "succeeds if gamma1 > gamma2 and rho(a-b) > sqrt(b/e)".into() });
    r.push(Regime { name: "ref:linear-mp rho(a-b)".into(), value: rho * (a - b), label: "succeeds if gamma1 > gamma2 and rho(a-b) > sqrt(b)".into() });
}

fn sbm_conditions(spec: &ModelSpec, cfg: &InfoConfig, rep: &mut ThresholdReport) {
    let (n, k, p, q) = (spec.n, spec.k, spec.p(), spec.q());
    let (nf, kf) = (n as f64, k as f64);
    let r = (n / k) as f64;
    let kap = kappa_branch(n, q, cfg);
    let kv = kap.value;
    let e = &mut rep.entries;
    e.push(Entry::new("sdp-necc-Bern_SBM", Side::Necessary, kf * (p - q).powi(2), r * q * q / (p * kv * kv)));
    // Failure regime when the lhs drops below (1 - ε)/κ.
    e.push(Entry::new("sdp-necc-Bern_SBM-c", Side::Necessary, (p - q) * (nf * p).sqrt() / (r * q), 1.0 / kv));
    let chen = kf * (p - q).powi(2) / (q * nf.ln());
    rep.regimes.push(Regime { name: "K(p-q)^2/(q log n)".into(), value: chen, label: "MLE succeeds iff this is bounded below (order condition)".into() });
    rep.regimes.push(Regime { name: "kappa".into(), value: kv, label: format!("{:?}", kap.branch) });
    rep.regimes.push(Regime { name: "r/log n".into(), value: r / nf.ln(), label: cfg.order_label(r / nf.ln()).into() });
}
