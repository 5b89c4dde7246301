//! Hidden-community and stochastic-block-model instances.
//!
//! Random draws use ChaCha20 seeded from a 64-bit seed expanded by SplitMix64
//! (see [`rng_from_seed`]). For a fixed seed the draw order is: the community
//! (partial Fisher-Yates over `0..n`), then the upper-triangle entries in
//! row-major order `(0,1), (0,2), ..., (n-2,n-1)`.

use std::ops::Deref;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    Parameter(String),
    #[error("log-likelihood ratio is degenerate for p = {p}, q = {q}; use the adjacency score")]
    DegenerateLikelihood { p: f64, q: f64 },
    #[error("matrix is not a valid score matrix: {0}")]
    NotScoreMatrix(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gaussian,
    Bernoulli,
    Sbm,
}

/// Model parameters. Unused fields are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
}

impl ModelSpec {
    pub fn gaussian(n: usize, k: usize, mu: f64) -> Self {
        Self { kind: ModelKind::Gaussian, n, k, mu: Some(mu), p: None, q: None, r: None }
    }

    pub fn bernoulli(n: usize, k: usize, p: f64, q: f64) -> Self {
        Self { kind: ModelKind::Bernoulli, n, k, mu: None, p: Some(p), q: Some(q), r: None }
    }

    /// SBM with `r` blocks; `k` is set to `n / r` (validation rejects a remainder).
    pub fn sbm(n: usize, r: usize, p: f64, q: f64) -> Self {
        let k = if r > 0 { n / r } else { 0 };
        Self { kind: ModelKind::Sbm, n, k, mu: None, p: Some(p), q: Some(q), r: Some(r) }
    }

    pub fn mu(&self) -> f64 {
        self.mu.unwrap_or(f64::NAN)
    }

    pub fn p(&self) -> f64 {
        self.p.unwrap_or(f64::NAN)
    }

    pub fn q(&self) -> f64 {
        self.q.unwrap_or(f64::NAN)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |s: String| Err(ModelError::Parameter(s));
        if self.k < 2 || self.k > self.n {
            return bad(format!("need 2 <= K <= n, got K = {}, n = {}", self.k, self.n));
        }
        match self.kind {
            ModelKind::Gaussian => match self.mu {
                Some(mu) if mu > 0.0 && mu.is_finite() => Ok(()),
                _ => bad("Gaussian model needs mu > 0".into()),
            },
            ModelKind::Bernoulli | ModelKind::Sbm => {
                let (p, q) = match (self.p, self.q) {
                    (Some(p), Some(q)) => (p, q),
                    _ => return bad("Bernoulli/SBM model needs p and q".into()),
                };
                // The SBM generator also accepts q = p (a structureless graph).
                let ordered = if self.kind == ModelKind::Sbm { q <= p } else { q < p };
                if !(0.0 <= q && ordered && p <= 1.0) {
                    return bad(format!("need 0 <= q < p <= 1, got p = {p}, q = {q}"));
                }
                if self.kind == ModelKind::Sbm {
                    let r = self.r.unwrap_or(0);
                    if r < 2 || self.n != r * self.k || self.n % r != 0 {
                        return bad(format!("SBM needs n = r*K with r >= 2, got n = {}, r = {r}", self.n));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Symmetric matrix with exactly zero diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self(Matrix::zeros(n))
    }

    /// Builds from `f(i, j)` evaluated for `i < j` only.
    pub fn from_upper(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            for j in i + 1..n {
                m.set_sym(i, j, f(i, j));
            }
        }
        Self(m)
    }

    /// Validates exact symmetry and a zero diagonal.
    pub fn from_matrix(m: Matrix) -> Result<Self, ModelError> {
        let n = m.n();
        for i in 0..n {
            if m.get(i, i) != 0.0 {
                return Err(ModelError::NotScoreMatrix(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                if m.get(i, j) != m.get(j, i) {
                    return Err(ModelError::NotScoreMatrix(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        if !m.is_finite() {
            return Err(ModelError::NotScoreMatrix("non-finite entry".into()));
        }
        Ok(Self(m))
    }

    /// Symmetrises and zeroes the diagonal.
    pub fn from_matrix_lossy(mut m: Matrix) -> Self {
        m.symmetrize();
        for i in 0..m.n() {
            m.set(i, i, 0.0);
        }
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// Principal submatrix; still zero-diagonal.
    pub fn sub(&self, idx: &[usize]) -> SymMatrix {
        SymMatrix(self.0.submatrix(idx))
    }

    /// Applies `f` to every off-diagonal entry.
    pub fn map_offdiag(&self, mut f: impl FnMut(f64) -> f64) -> SymMatrix {
        SymMatrix::from_upper(self.n(), |i, j| f(self.get(i, j)))
    }
}

impl Deref for SymMatrix {
    type Target = Matrix;
    fn deref(&self) -> &Matrix {
        &self.0
    }
}

impl TryFrom<Matrix> for SymMatrix {
    type Error = ModelError;
    fn try_from(m: Matrix) -> Result<Self, ModelError> {
        SymMatrix::from_matrix(m)
    }
}

impl From<SymMatrix> for Matrix {
    fn from(s: SymMatrix) -> Matrix {
        s.0
    }
}

/// Ground truth: a single community or an SBM partition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truth {
    Community(Vec<usize>),
    Partition(Vec<Vec<usize>>),
}

impl Truth {
    pub fn community(&self) -> Option<&[usize]> {
        match self {
            Truth::Community(c) => Some(c),
            Truth::Partition(_) => None,
        }
    }

    pub fn partition(&self) -> Option<&[Vec<usize>]> {
        match self {
            Truth::Partition(p) => Some(p),
            Truth::Community(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub spec: ModelSpec,
    pub a: SymMatrix,
    pub truth: Truth,
    pub seed: u64,
}

/// Serializable provenance of an instance (everything but the matrix).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub spec: ModelSpec,
    pub seed: u64,
    pub truth: Truth,
}

impl Instance {
    pub fn record(&self) -> InstanceRecord {
        InstanceRecord { spec: self.spec.clone(), seed: self.seed, truth: self.truth.clone() }
    }

    /// Community indices; panics for SBM instances.
    pub fn community(&self) -> &[usize] {
        self.truth.community().expect("instance has no single community")
    }
}

/// SplitMix64 step.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// ChaCha20 generator whose 256-bit key is four SplitMix64 outputs of `seed`.
pub fn rng_from_seed(seed: u64) -> ChaCha20Rng {
    let mut s = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
    }
    ChaCha20Rng::from_seed(key)
}

/// Uniform K-subset of `0..n`, sorted.
pub fn sample_subset<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        perm.swap(i, j);
    }
    let mut c = perm[..k].to_vec();
    c.sort_unstable();
    c
}

pub fn gen_instance(spec: &ModelSpec, seed: u64) -> Result<Instance, ModelError> {
    spec.validate()?;
    if spec.kind == ModelKind::Sbm {
        return gen_sbm(spec.n, spec.r.unwrap_or(0), spec.p(), spec.q(), seed);
    }
    let n = spec.n;
    let mut rng = rng_from_seed(seed);
    let truth = sample_subset(&mut rng, n, spec.k);
    let mut inside = vec![false; n];
    for &i in &truth {
        inside[i] = true;
    }
    let a = match spec.kind {
        ModelKind::Gaussian => {
            let mu = spec.mu();
            SymMatrix::from_upper(n, |i, j| {
                let z: f64 = rng.sample(StandardNormal);
                if inside[i] && inside[j] {
                    z + mu
                } else {
                    z
                }
            })
        }
        _ => {
            let (p, q) = (spec.p(), spec.q());
            SymMatrix::from_upper(n, |i, j| {
                let prob = if inside[i] && inside[j] { p } else { q };
                if rng.random::<f64>() < prob {
                    1.0
                } else {
                    0.0
                }
            })
        }
    };
    Ok(Instance { spec: spec.clone(), a, truth: Truth::Community(truth), seed })
}

/// SBM with `r` equal blocks. Blocks are listed sorted, ordered by smallest member.
pub fn gen_sbm(n: usize, r: usize, p: f64, q: f64, seed: u64) -> Result<Instance, ModelError> {
    if r < 2 || n % r != 0 {
        return Err(ModelError::Parameter(format!("n = {n} is not divisible by r = {r}")));
    }
    let spec = ModelSpec::sbm(n, r, p, q);
    spec.validate()?;
    let k = spec.k;
    let mut rng = rng_from_seed(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in 0..n.saturating_sub(1) {
        let j = rng.random_range(i..n);
        perm.swap(i, j);
    }
    let mut label = vec![0usize; n];
    let mut blocks: Vec<Vec<usize>> = perm
        .chunks(k)
        .map(|c| {
            let mut b = c.to_vec();
            b.sort_unstable();
            b
        })
        .collect();
    blocks.sort_by_key(|b| b[0]);
    for (b, block) in blocks.iter().enumerate() {
        for &i in block {
            label[i] = b;
        }
    }
    let a = SymMatrix::from_upper(n, |i, j| {
        let prob = if label[i] == label[j] { p } else { q };
        if rng.random::<f64>() < prob {
            1.0
        } else {
            0.0
        }
    });
    Ok(Instance { spec, a, truth: Truth::Partition(blocks), seed })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Adjacency,
    Llr,
}

pub fn score_matrix(inst: &Instance, kind: ScoreKind) -> Result<SymMatrix, ModelError> {
    match kind {
        ScoreKind::Adjacency => Ok(inst.a.clone()),
        ScoreKind::Llr => match inst.spec.kind {
            ModelKind::Gaussian => {
                let mu = inst.spec.mu();
                Ok(inst.a.map_offdiag(|x| mu * (x - mu / 2.0)))
            }
            ModelKind::Bernoulli | ModelKind::Sbm => {
                let (p, q) = (inst.spec.p(), inst.spec.q());
                if p >= 1.0 || q <= 0.0 {
                    return Err(ModelError::DegenerateLikelihood { p, q });
                }
                let slope = (p * (1.0 - q) / (q * (1.0 - p))).ln();
                let offset = ((1.0 - p) / (1.0 - q)).ln();
                Ok(inst.a.map_offdiag(|x| slope * x + offset))
            }
        },
    }
}

/// Means `(E_P[L_12], E_Q[L_12])` of the score under the model.
pub fn score_means(spec: &ModelSpec, kind: ScoreKind) -> Result<(f64, f64), ModelError> {
    match (spec.kind, kind) {
        (ModelKind::Gaussian, ScoreKind::Adjacency) => Ok((spec.mu(), 0.0)),
        (ModelKind::Gaussian, ScoreKind::Llr) => {
            let h = spec.mu() * spec.mu() / 2.0;
            Ok((h, -h))
        }
        (_, ScoreKind::Adjacency) => Ok((spec.p(), spec.q())),
        (_, ScoreKind::Llr) => {
            let (p, q) = (spec.p(), spec.q());
            if p >= 1.0 || q <= 0.0 {
                return Err(ModelError::DegenerateLikelihood { p, q });
            }
            let slope = (p * (1.0 - q) / (q * (1.0 - p))).ln();
            let offset = ((1.0 - p) / (1.0 - q)).ln();
            Ok((slope * p + offset, slope * q + offset))
        }
    }
}

/// `e(i, S) = sum_{j in S} L_ij`.
pub fn e_stat(l: &SymMatrix, s: &[usize], i: usize) -> f64 {
    let row = l.row(i);
    s.iter().map(|&j| row[j]).sum()
}

/// `e(i, S)` for every `i`.
pub fn e_stats(l: &SymMatrix, s: &[usize]) -> Vec<f64> {
    (0..l.n()).map(|i| e_stat(l, s, i)).collect()
}

/// 0/1 indicator vector of `s`.
pub fn indicator(s: &[usize], n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    for &i in s {
        v[i] = 1.0;
    }
    v
}

/// Membership mask of `s`.
pub fn mask(s: &[usize], n: usize) -> Vec<bool> {
    let mut v = vec![false; n];
    for &i in s {
        v[i] = true;
    }
    v
}

/// Indices of `0..n` not in `s`, ascending.
pub fn complement(s: &[usize], n: usize) -> Vec<usize> {
    let m = mask(s, n);
    (0..n).filter(|&i| !m[i]).collect()
}

/// Cluster matrix `xi xi^T` including the diagonal.
pub fn cluster_matrix(truth: &[usize], n: usize) -> Matrix {
    let m = mask(truth, n);
    Matrix::from_fn(n, |i, j| if m[i] && m[j] { 1.0 } else { 0.0 })
}

/// SBM truth matrix: 1 within blocks, `-1/(r-1)` across.
pub fn partition_matrix(blocks: &[Vec<usize>], n: usize) -> Matrix {
    let r = blocks.len();
    let mut label = vec![usize::MAX; n];
    for (b, block) in blocks.iter().enumerate() {
        for &i in block {
            label[i] = b;
        }
    }
    let off = -1.0 / (r as f64 - 1.0);
    Matrix::from_fn(n, |i, j| if label[i] == label[j] { 1.0 } else { off })
}

/// Block mean of the score: `alpha` on `C* x C*` off the diagonal, `beta` elsewhere
/// off the diagonal, zero diagonal.
pub fn mean_matrix(truth: &[usize], n: usize, alpha: f64, beta: f64) -> SymMatrix {
    let m = mask(truth, n);
    SymMatrix::from_upper(n, |i, j| if m[i] && m[j] { alpha } else { beta })
}
