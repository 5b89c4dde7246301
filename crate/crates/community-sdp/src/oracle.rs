//! Brute-force references for small instances.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{complement, e_stats, mask, SymMatrix};

/// Largest `C(n, K)` that [`mle_exhaustive`] will enumerate.
pub const MLE_GUARD: u64 = 10_000_000;

/// Exact values are recomputed from scratch this often along a chain.
const RESYNC: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("C({n}, {k}) = {count} subsets exceeds the guard {MLE_GUARD}")]
    TooMany { n: usize, k: usize, count: f64 },
    #[error("invalid K = {k} for n = {n}")]
    InvalidK { n: usize, k: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleResult {
    /// Sum of `L_ij` over ordered pairs `i ≠ j` of the best subset.
    pub best_value: f64,
    /// All maximizers, each sorted, in lexicographic order.
    pub maximizers: Vec<Vec<usize>>,
    pub evaluated: u64,
}

/// `C(n, k)` as `f64` (exact below 2^53).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0f64;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c.round()
}

/// Subset value with a fixed, index-ascending summation order.
pub fn subset_value(l: &SymMatrix, s: &[usize]) -> f64 {
    let mut idx = s.to_vec();
    idx.sort_unstable();
    let mut v = 0.0;
    for (a, &i) in idx.iter().enumerate() {
        let row = l.row(i);
        for &j in &idx[a + 1..] {
            v += row[j];
        }
    }
    2.0 * v
}

#[derive(Clone, Debug)]
struct Best {
    value: f64,
    sets: Vec<Vec<usize>>,
    evaluated: u64,
}

impl Best {
    fn empty() -> Self {
        Self { value: f64::NEG_INFINITY, sets: Vec::new(), evaluated: 0 }
    }

    fn offer(&mut self, value: f64, set: &[usize]) {
        if value > self.value {
            self.value = value;
            self.sets.clear();
        }
        if value == self.value {
            let mut s = set.to_vec();
            s.sort_unstable();
            self.sets.push(s);
        }
    }

    fn merge(mut self, other: Best) -> Best {
        self.evaluated += other.evaluated;
        if other.value > self.value {
            self.value = other.value;
            self.sets = other.sets;
        } else if other.value == self.value {
            self.sets.extend(other.sets);
        }
        self
    }
}

/// Revolving-door (Knuth 7.2.1.3, Algorithm R) walk over `t`-subsets of `0..m`,
/// calling `visit` with the current combination after every single-element swap.
fn revolving_door(m: usize, t: usize, mut visit: impl FnMut(&[usize])) {
    if t == 0 {
        visit(&[]);
        return;
    }
    if t > m {
        return;
    }
    // c[1..=t] ascending, c[t+1] = m sentinel; c[0] unused.
    let mut c: Vec<usize> = (0..t + 2).map(|j| j.saturating_sub(1)).collect();
    c[t + 1] = m;
    enum Step {
        Visit,
        Decrease(usize),
        Increase(usize),
    }
    let mut step = Step::Visit;
    loop {
        step = match step {
            Step::Visit => {
                visit(&c[1..=t]);
                if t % 2 == 1 {
                    if c[1] + 1 < c[2] {
                        c[1] += 1;
                        Step::Visit
                    } else {
                        Step::Decrease(2)
                    }
                } else if c[1] > 0 {
                    c[1] -= 1;
                    Step::Visit
                } else {
                    Step::Increase(2)
                }
            }
            Step::Decrease(j) => {
                if j > t {
                    return;
                }
                if c[j] >= j {
                    c[j] = c[j - 1];
                    c[j - 1] = j - 2;
                    Step::Visit
                } else {
                    Step::Increase(j + 1)
                }
            }
            Step::Increase(j) => {
                if j > t {
                    return;
                }
                if c[j] + 1 < c[j + 1] {
                    c[j - 1] = c[j];
                    c[j] += 1;
                    Step::Visit
                } else {
                    Step::Decrease(j + 1)
                }
            }
        };
    }
}

/// Best subsets among those containing `first` with all other members `> first`.
fn chunk(l: &SymMatrix, k: usize, first: usize) -> Best {
    let n = l.n();
    let offset = first + 1;
    let m = n - offset;
    let scale = l.max_abs().max(1.0);
    let slack = 1e-9 * (1.0 + (k * k) as f64 * scale);
    let mut best = Best::empty();
    let mut cur: Vec<usize> = Vec::with_capacity(k);
    let mut prev: Vec<usize> = Vec::with_capacity(k);
    let mut value = 0.0;
    let mut since = 0usize;
    revolving_door(m, k - 1, |comb| {
        cur.clear();
        cur.push(first);
        cur.extend(comb.iter().map(|&c| c + offset));
        best.evaluated += 1;
        let out = prev.iter().copied().find(|x| !cur.contains(x));
        let inn = cur.iter().copied().find(|x| !prev.contains(x));
        match (out, inn) {
            (Some(x), Some(y)) if since < RESYNC => {
                // Remove x, add y; the rest of the set is shared.
                let (rx, ry) = (l.row(x), l.row(y));
                let mut dx = 0.0;
                let mut dy = 0.0;
                for &j in &cur {
                    if j != y {
                        dx += rx[j];
                        dy += ry[j];
                    }
                }
                value += 2.0 * (dy - dx);
                since += 1;
            }
            _ => {
                value = subset_value(l, &cur);
                since = 0;
            }
        }
        if value >= best.value - slack {
            let exact = subset_value(l, &cur);
            best.offer(exact, &cur);
        }
        std::mem::swap(&mut prev, &mut cur);
    });
    best
}

/// Exhaustive maximizer of the sum of a `K x K` principal submatrix.
pub fn mle_exhaustive(l: &SymMatrix, k: usize) -> Result<MleResult, OracleError> {
    let n = l.n();
    if k == 0 || k > n {
        return Err(OracleError::InvalidK { n, k });
    }
    let count = binomial(n, k);
    if count > MLE_GUARD as f64 {
        return Err(OracleError::TooMany { n, k, count });
    }
    let firsts = 0..=(n - k);
    #[cfg(feature = "parallel")]
    let best = {
        use rayon::prelude::*;
        firsts.into_par_iter().map(|f| chunk(l, k, f)).reduce(Best::empty, Best::merge)
    };
    #[cfg(not(feature = "parallel"))]
    let best = firsts.map(|f| chunk(l, k, f)).fold(Best::empty(), Best::merge);
    let mut maximizers = best.sets;
    maximizers.sort();
    maximizers.dedup();
    Ok(MleResult { best_value: best.value, maximizers, evaluated: best.evaluated })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwapCheck {
    pub holds: bool,
    /// `min_{i∈C*} e(i,C*) - max_{j∉C*} e(j,C*)`; `+inf` when `K = n`.
    pub gap: f64,
    /// `max_{i∈C*, j∉C*} e(j, C*\{i}) - e(i, C*\{i})`; `-inf` when `K = n`.
    pub max_swap_delta: f64,
    /// Pair `(i, j)` attaining `max_swap_delta`.
    pub worst_pair: Option<(usize, usize)>,
    /// No single swap increases the objective.
    pub swap_optimal: bool,
}

pub fn swap_check(l: &SymMatrix, truth: &[usize]) -> SwapCheck {
    let n = l.n();
    let inside = mask(truth, n);
    let out = complement(truth, n);
    if out.is_empty() || truth.is_empty() {
        return SwapCheck {
            holds: true,
            gap: f64::INFINITY,
            max_swap_delta: f64::NEG_INFINITY,
            worst_pair: None,
            swap_optimal: true,
        };
    }
    let e = e_stats(l, truth);
    let min_in = truth.iter().map(|&i| e[i]).fold(f64::INFINITY, f64::min);
    let max_out = out.iter().map(|&j| e[j]).fold(f64::NEG_INFINITY, f64::max);
    let gap = min_in - max_out;
    let mut max_swap_delta = f64::NEG_INFINITY;
    let mut worst_pair = None;
    for &i in truth {
        debug_assert!(inside[i]);
        for &j in &out {
            let delta = (e[j] - l.get(j, i)) - e[i];
            if delta > max_swap_delta {
                max_swap_delta = delta;
                worst_pair = Some((i, j));
            }
        }
    }
    SwapCheck { holds: gap >= 0.0, gap, max_swap_delta, worst_pair, swap_optimal: max_swap_delta <= 0.0 }
}
