//! Lambda-coefficients for Gaussian designs with known covariance, with the
//! function class restricted to unit-norm linear functionals.
//!
//! For that class the dependence between two disjoint blocks is the spectral
//! norm of their cross-covariance, and the dependence of a set is the
//! smallest such norm over its bipartitions.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;
use crate::permute::PrefixSampler;

/// Largest set for which bipartitions are enumerated.
pub const MAX_SET_SIZE: usize = 12;
/// Largest population for exact tuple enumeration.
pub const MAX_EXACT_N: usize = 10;
/// Supported tuple sizes.
pub const MAX_K: usize = 8;

fn check_indices(cov: &SymmetricMatrix, set: &[usize]) -> Result<()> {
    if let Some(&bad) = set.iter().find(|&&i| i >= cov.dim()) {
        return Err(Error::InvalidInput(format!("index {bad} out of range for dimension {}", cov.dim())));
    }
    Ok(())
}

fn cross_norm(cov: &SymmetricMatrix, a1: &[usize], a2: &[usize]) -> f64 {
    if a1.len() == 1 || a2.len() == 1 {
        let (one, many) = if a1.len() == 1 { (a1[0], a2) } else { (a2[0], a1) };
        return many.iter().map(|&j| cov.get(one, j).powi(2)).sum::<f64>().sqrt();
    }
    let block = DMatrix::from_fn(a1.len(), a2.len(), |r, c| cov.get(a1[r], a2[c]));
    block.singular_values().max()
}

/// Spectral norm of the cross-covariance block `cov[a1, a2]`.
pub fn pair_dependence(cov: &SymmetricMatrix, a1: &[usize], a2: &[usize]) -> Result<f64> {
    check_indices(cov, a1)?;
    check_indices(cov, a2)?;
    if a1.is_empty() || a2.is_empty() {
        return Err(Error::InvalidInput("index sets must be non-empty".into()));
    }
    if a1.iter().any(|i| a2.contains(i)) {
        return Err(Error::InvalidInput("index sets overlap".into()));
    }
    Ok(cross_norm(cov, a1, a2))
}

/// Variance for a singleton; otherwise the minimum of [`pair_dependence`]
/// over the `2^(|A|-1) - 1` bipartitions of `a`.
pub fn set_dependence(cov: &SymmetricMatrix, a: &[usize]) -> Result<f64> {
    check_indices(cov, a)?;
    match a.len() {
        0 => return Err(Error::InvalidInput("index set is empty".into())),
        1 => return Ok(cov.get(a[0], a[0])),
        len if len > MAX_SET_SIZE => {
            return Err(Error::InvalidInput(format!("set of size {len} exceeds the limit of {MAX_SET_SIZE}")))
        }
        _ => {}
    }
    for (k, i) in a.iter().enumerate() {
        if a[..k].contains(i) {
            return Err(Error::InvalidInput(format!("index {i} repeated")));
        }
    }
    Ok(min_bipartition(cov, a))
}

fn min_bipartition(cov: &SymmetricMatrix, a: &[usize]) -> f64 {
    // a[0] always sits in the first block; the mask picks the rest of it
    let rest = a.len() - 1;
    let mut best = f64::INFINITY;
    let mut a1 = Vec::with_capacity(a.len());
    let mut a2 = Vec::with_capacity(a.len());
    for mask in 0..(1u32 << rest) - 1 {
        a1.clear();
        a2.clear();
        a1.push(a[0]);
        for (bit, &i) in a[1..].iter().enumerate() {
            if mask & (1 << bit) != 0 {
                a1.push(i);
            } else {
                a2.push(i);
            }
        }
        best = best.min(cross_norm(cov, &a1, &a2));
        if best == 0.0 {
            break;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaMethod {
    ExactEnumeration,
    MonteCarloPermutations,
}

impl LambdaMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            LambdaMethod::ExactEnumeration => "exact",
            LambdaMethod::MonteCarloPermutations => "monte_carlo",
        }
    }
}

impl std::fmt::Display for LambdaMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaReport {
    pub n: usize,
    pub k: usize,
    pub lambda_value: f64,
    /// `n^(floor(k/2) - k) * d^(floor((k+1)/2))` with the constant set to 1.
    pub bound: f64,
    pub method: LambdaMethod,
    /// Monte Carlo standard error; zero for exact enumeration.
    pub mc_se: f64,
}

/// Rate bound with unit constant.
pub fn rate_bound(n: usize, k: usize, max_degree: usize) -> f64 {
    let n = n as f64;
    let d = max_degree as f64;
    n.powi((k / 2) as i32 - k as i32) * d.powi(k.div_ceil(2) as i32)
}

/// Largest number of nonzero off-diagonal covariances in a row: the maximum
/// degree of the dependency graph a Gaussian design induces.
pub fn support_degree(cov: &SymmetricMatrix) -> usize {
    (0..cov.dim())
        .map(|i| (0..cov.dim()).filter(|&j| j != i && cov.get(i, j) != 0.0).count())
        .max()
        .unwrap_or(0)
}

fn check_k(cov: &SymmetricMatrix, k: usize) -> Result<()> {
    if !(1..=MAX_K).contains(&k) {
        return Err(Error::InvalidInput(format!("k must be in 1..={MAX_K}, got {k}")));
    }
    if k > cov.dim() {
        return Err(Error::InvalidInput(format!("k = {k} exceeds dimension {}", cov.dim())));
    }
    Ok(())
}

/// Calls `f` on every ordered k-tuple of distinct indices below n.
fn for_each_tuple(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(n: usize, k: usize, used: &mut [bool], tuple: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if tuple.len() == k {
            f(tuple);
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                tuple.push(i);
                rec(n, k, used, tuple, f);
                tuple.pop();
                used[i] = false;
            }
        }
    }
    rec(n, k, &mut vec![false; n], &mut Vec::with_capacity(k), f)
}

/// Sum that depends only on the multiset of terms.
fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.into_iter().sum()
}

/// Exact lambda(k): the average of [`set_dependence`] over all ordered k-tuples.
pub fn lambda_exact(cov: &SymmetricMatrix, k: usize) -> Result<LambdaReport> {
    check_k(cov, k)?;
    let n = cov.dim();
    if n > MAX_EXACT_N {
        return Err(Error::InvalidInput(format!(
            "exact enumeration needs n <= {MAX_EXACT_N}, got {n}; use Monte Carlo"
        )));
    }
    let mut values = Vec::new();
    for_each_tuple(n, k, &mut |t| values.push(min_or_var(cov, t)));
    let count = values.len() as f64;
    Ok(LambdaReport {
        n,
        k,
        lambda_value: sorted_sum(values) / count,
        bound: rate_bound(n, k, support_degree(cov)),
        method: LambdaMethod::ExactEnumeration,
        mc_se: 0.0,
    })
}

fn min_or_var(cov: &SymmetricMatrix, t: &[usize]) -> f64 {
    if t.len() == 1 {
        cov.get(t[0], t[0])
    } else {
        min_bipartition(cov, t)
    }
}

/// Monte Carlo lambda(k) over `draws` uniform random k-prefixes.
pub fn lambda_monte_carlo<R: Rng + ?Sized>(
    cov: &SymmetricMatrix,
    k: usize,
    draws: usize,
    rng: &mut R,
) -> Result<LambdaReport> {
    check_k(cov, k)?;
    if draws < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 Monte Carlo draws, got {draws}")));
    }
    let n = cov.dim();
    let mut sampler = PrefixSampler::new(n);
    let mut prefixes = Vec::with_capacity(draws * k);
    for _ in 0..draws {
        sampler.draw_into(rng, k, &mut prefixes);
    }
    let values: Vec<f64> = prefixes.par_chunks_exact(k).map(|t| min_or_var(cov, t)).collect();
    let count = draws as f64;
    let mean = values.iter().sum::<f64>() / count;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
    Ok(LambdaReport {
        n,
        k,
        lambda_value: mean,
        bound: rate_bound(n, k, support_degree(cov)),
        method: LambdaMethod::MonteCarloPermutations,
        mc_se: (var / count).sqrt(),
    })
}
