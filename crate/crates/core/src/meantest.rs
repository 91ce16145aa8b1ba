//! Inference on a population mean with the randomized-subsampling U-type
//! statistic.
//!
//! For a bundle of R permutation prefixes of length b,
//!
//! ```text
//! U_r(mu) = 1/(m b) * sum_{i != j in prefix r} (x_i - mu)' S^{-1} (x_j - mu)
//! S_n(mu) = R^{-1/2} * sum_r U_r(mu)
//! T_n(mu) = S_n(mu) - sqrt(R) b / n
//! ```
//!
//! where `S` is the 1/n sample covariance. The double sum is evaluated as
//! `(sum z)' A (sum z) - sum z' A z`.

use rayon::prelude::*;

use crate::data::{CriticalValueMethod, InferenceConfig, Sample};
use crate::error::{Error, Result};
use crate::linalg::{invert_spd, SymmetricMatrix, DEFAULT_PIVOT_TOL};
use crate::normal::upper_critical;
use crate::permute::{draw_bundle_with, PermutationBundle, PrefixSampler, RngStream, StreamFamily};

pub fn sample_mean(x: &Sample) -> Vec<f64> {
    let mut mean = vec![0.0; x.m()];
    for row in x.rows() {
        for (acc, v) in mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    let n = x.n() as f64;
    mean.iter_mut().for_each(|v| *v /= n);
    mean
}

/// Covariance with the 1/n normalization.
pub fn sample_covariance(x: &Sample) -> SymmetricMatrix {
    let mean = sample_mean(x);
    let m = x.m();
    let mut cov = SymmetricMatrix::zeros(m);
    let mut dev = vec![0.0; m];
    for row in x.rows() {
        for k in 0..m {
            dev[k] = row[k] - mean[k];
        }
        for i in 0..m {
            for j in 0..=i {
                cov.set(i, j, cov.get(i, j) + dev[i] * dev[j]);
            }
        }
    }
    let n = x.n() as f64;
    SymmetricMatrix::from_fn(m, |i, j| cov.get(i, j) / n)
}

/// Inverse of the sample covariance.
pub fn sample_precision(x: &Sample) -> Result<SymmetricMatrix> {
    if x.n() < 2 {
        return Err(Error::InvalidInput("at least two observations are required".into()));
    }
    invert_spd(&sample_covariance(x), DEFAULT_PIVOT_TOL)
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Sum over the prefix of the deviations `x_i - center`, and of their
/// quadratic forms under `a`. Writes the sum into `sum`.
#[inline]
fn prefix_moments(x: &Sample, center: &[f64], a: &SymmetricMatrix, prefix: &[usize], sum: &mut [f64], dev: &mut [f64]) -> f64 {
    let m = x.m();
    sum.iter_mut().for_each(|v| *v = 0.0);
    let mut quad = 0.0;
    if m == 1 {
        let a00 = a.get(0, 0);
        for &i in prefix {
            let z = x.row(i)[0] - center[0];
            sum[0] += z;
            quad += z * z;
        }
        return quad * a00;
    }
    for &i in prefix {
        let row = x.row(i);
        for k in 0..m {
            dev[k] = row[k] - center[k];
            sum[k] += dev[k];
        }
        quad += a.quad_form(dev);
    }
    quad
}

/// U_{n,r}(mu) for one prefix.
pub fn u_statistic(x: &Sample, mu: &[f64], sigma_inv: &SymmetricMatrix, prefix: &[usize]) -> f64 {
    let m = x.m();
    let mut sum = vec![0.0; m];
    let mut dev = vec![0.0; m];
    let quad = prefix_moments(x, mu, sigma_inv, prefix, &mut sum, &mut dev);
    (sigma_inv.quad_form(&sum) - quad) / (m as f64 * prefix.len() as f64)
}

/// Precomputed pieces shared by every statistic on one dataset.
#[derive(Debug, Clone)]
pub struct MeanStatistic<'a> {
    sample: &'a Sample,
    mean: Vec<f64>,
    precision: SymmetricMatrix,
}

impl<'a> MeanStatistic<'a> {
    pub fn new(sample: &'a Sample) -> Result<Self> {
        let precision = sample_precision(sample)?;
        Ok(Self {
            sample,
            mean: sample_mean(sample),
            precision,
        })
    }

    /// Uses a caller-supplied inverse covariance instead of the sample one.
    pub fn with_precision(sample: &'a Sample, precision: SymmetricMatrix) -> Result<Self> {
        check_dim(sample.m(), precision.dim())?;
        Ok(Self {
            sample,
            mean: sample_mean(sample),
            precision,
        })
    }

    pub fn sample(&self) -> &Sample {
        self.sample
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn precision(&self) -> &SymmetricMatrix {
        &self.precision
    }

    pub fn u(&self, mu: &[f64], prefix: &[usize]) -> f64 {
        u_statistic(self.sample, mu, &self.precision, prefix)
    }

    /// S_n(mu) over the bundle.
    pub fn s(&self, mu: &[f64], bundle: &PermutationBundle) -> Result<f64> {
        check_dim(self.sample.m(), mu.len())?;
        check_dim(self.sample.n(), bundle.n())?;
        let m = self.sample.m();
        let mut sum = vec![0.0; m];
        let mut dev = vec![0.0; m];
        let scale = m as f64 * bundle.b() as f64;
        let total: f64 = bundle
            .prefixes()
            .map(|p| {
                let quad = prefix_moments(self.sample, mu, &self.precision, p, &mut sum, &mut dev);
                (self.precision.quad_form(&sum) - quad) / scale
            })
            .sum();
        Ok(total / (bundle.r() as f64).sqrt())
    }

    /// T_n(mu) = S_n(mu) - sqrt(R) b / n.
    pub fn t(&self, mu: &[f64], bundle: &PermutationBundle) -> Result<f64> {
        Ok(self.s(mu, bundle)? - bias_adjustment(bundle.r(), bundle.b(), self.sample.n()))
    }

    /// Reduces a bundle to the two quantities S_n(mu) depends on, measured
    /// around the sample mean.
    pub fn summarize(&self, bundle: &PermutationBundle) -> BundleSummary {
        let m = self.sample.m();
        let mut acc = SummaryAccumulator::new(m);
        for p in bundle.prefixes() {
            acc.push(self, p);
        }
        acc.finish(self, bundle.r(), bundle.b())
    }

    /// Draws R prefixes from `rng` and summarizes them without storing the
    /// bundle. Consumes the stream exactly like `draw_bundle`.
    pub fn summarize_stream(&self, rng: &mut RngStream, sampler: &mut PrefixSampler, r: usize, b: usize) -> BundleSummary {
        let m = self.sample.m();
        let mut acc = SummaryAccumulator::new(m);
        let mut buf = Vec::with_capacity(b);
        for _ in 0..r {
            buf.clear();
            sampler.draw_into(rng, b, &mut buf);
            acc.push(self, &buf);
        }
        acc.finish(self, r, b)
    }
}

struct SummaryAccumulator {
    k: f64,
    total: Vec<f64>,
    sum: Vec<f64>,
    dev: Vec<f64>,
}

impl SummaryAccumulator {
    fn new(m: usize) -> Self {
        Self {
            k: 0.0,
            total: vec![0.0; m],
            sum: vec![0.0; m],
            dev: vec![0.0; m],
        }
    }

    #[inline]
    fn push(&mut self, stat: &MeanStatistic<'_>, prefix: &[usize]) {
        let quad = prefix_moments(stat.sample, &stat.mean, &stat.precision, prefix, &mut self.sum, &mut self.dev);
        self.k += stat.precision.quad_form(&self.sum) - quad;
        for (t, s) in self.total.iter_mut().zip(&self.sum) {
            *t += s;
        }
    }

    fn finish(self, stat: &MeanStatistic<'_>, r: usize, b: usize) -> BundleSummary {
        BundleSummary {
            k: self.k,
            precision_times_total: stat.precision.mul_vec(&self.total),
            r,
            b,
        }
    }
}

/// Sufficient statistics of one bundle for evaluating S_n at any mu.
///
/// With `d = mu - xbar`, `s_r` the prefix sum of `x_i - xbar` and `Q_r` the
/// prefix sum of their quadratic forms,
///
/// ```text
/// m b sqrt(R) S_n(mu) = sum_r (s_r' A s_r - Q_r) - 2 (b - 1) d' A sum_r s_r + R b (b - 1) d' A d
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct BundleSummary {
    k: f64,
    precision_times_total: Vec<f64>,
    r: usize,
    b: usize,
}

impl BundleSummary {
    pub fn r(&self) -> usize {
        self.r
    }

    pub fn b(&self) -> usize {
        self.b
    }

    /// S_n at the sample mean.
    pub fn s_at_mean(&self) -> f64 {
        let m = self.precision_times_total.len() as f64;
        self.k / (m * self.b as f64 * (self.r as f64).sqrt())
    }

    pub fn s(&self, stat: &MeanStatistic<'_>, mu: &[f64]) -> f64 {
        let m = self.precision_times_total.len();
        let d: Vec<f64> = mu.iter().zip(stat.mean()).map(|(a, b)| a - b).collect();
        let lin: f64 = d.iter().zip(&self.precision_times_total).map(|(a, b)| a * b).sum();
        let quad = stat.precision().quad_form(&d);
        let b = self.b as f64;
        let num = self.k - 2.0 * (b - 1.0) * lin + self.r as f64 * b * (b - 1.0) * quad;
        num / (m as f64 * b * (self.r as f64).sqrt())
    }

    pub fn t(&self, stat: &MeanStatistic<'_>, mu: &[f64]) -> f64 {
        self.s(stat, mu) - bias_adjustment(self.r, self.b, stat.sample().n())
    }
}

pub fn bias_adjustment(r: usize, b: usize, n: usize) -> f64 {
    (r as f64).sqrt() * b as f64 / n as f64
}

pub fn s_statistic(x: &Sample, mu: &[f64], bundle: &PermutationBundle) -> Result<f64> {
    MeanStatistic::new(x)?.s(mu, bundle)
}

pub fn t_statistic(x: &Sample, mu: &[f64], bundle: &PermutationBundle) -> Result<f64> {
    MeanStatistic::new(x)?.t(mu, bundle)
}

/// Index (1-based) of the order statistic realizing the permutation
/// critical value: ceil(L (1 - alpha)).
pub fn critical_rank(l: usize, alpha: f64) -> Result<usize> {
    let x = l as f64 * (1.0 - alpha);
    // guard against 20 * 0.95 = 19.000000000000004
    let k = (x - 1e-9 * x.max(1.0)).ceil().max(0.0) as usize;
    if k == 0 {
        return Err(Error::LevelUnattainable(x));
    }
    Ok(k.min(l))
}

/// inf{c > 0 : (1/L) #{v_l > c} <= alpha}, i.e. the ceil(L(1-alpha))-th
/// smallest value, floored at zero. Sorts `values` in place.
pub fn critical_value_from_draws(values: &mut [f64], alpha: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidInput("no permutation draws".into()));
    }
    let k = critical_rank(values.len(), alpha)?;
    values.sort_by(f64::total_cmp);
    Ok(values[k - 1].max(0.0))
}

pub(crate) fn check_draw_counts(cfg: &InferenceConfig) -> Result<()> {
    use crate::permute::purpose::{MAX_CONFIDENCE_DRAWS, MAX_CRITICAL_DRAWS};
    if cfg.l >= MAX_CRITICAL_DRAWS || cfg.s >= MAX_CONFIDENCE_DRAWS {
        return Err(Error::InvalidInput(format!(
            "L must be below {MAX_CRITICAL_DRAWS} and S below {MAX_CONFIDENCE_DRAWS}"
        )));
    }
    Ok(())
}

/// S_n(xbar) over L bundles, bundle l drawn from `family.critical(l)`.
pub fn permutation_draws(stat: &MeanStatistic<'_>, cfg: &InferenceConfig, family: StreamFamily) -> Vec<f64> {
    let n = stat.sample().n();
    (0..cfg.l)
        .into_par_iter()
        .map_init(
            || PrefixSampler::new(n),
            |sampler, l| {
                stat.summarize_stream(&mut family.critical(l), sampler, cfg.r, cfg.b)
                    .s_at_mean()
            },
        )
        .collect()
}

/// The permutation critical value c~ at level `cfg.alpha`.
pub fn permutation_critical_value(x: &Sample, cfg: &InferenceConfig, family: StreamFamily) -> Result<f64> {
    cfg.validate_for(x.n())?;
    check_draw_counts(cfg)?;
    let stat = MeanStatistic::new(x)?;
    let mut draws = permutation_draws(&stat, cfg, family);
    critical_value_from_draws(&mut draws, cfg.alpha)
}

/// Critical value for `cfg.critical_value` at level `alpha`.
pub fn critical_value(stat: &MeanStatistic<'_>, cfg: &InferenceConfig, alpha: f64, family: StreamFamily) -> Result<f64> {
    match cfg.critical_value {
        CriticalValueMethod::AsymptoticNormal => upper_critical(alpha),
        CriticalValueMethod::Permutation => {
            let mut draws = permutation_draws(stat, cfg, family);
            critical_value_from_draws(&mut draws, alpha)
        }
    }
}

/// The S confidence-function bundles, bundle s drawn from `family.confidence(s)`.
pub fn confidence_summaries(stat: &MeanStatistic<'_>, cfg: &InferenceConfig, family: StreamFamily) -> Vec<BundleSummary> {
    let n = stat.sample().n();
    (0..cfg.s)
        .into_par_iter()
        .map_init(
            || PrefixSampler::new(n),
            |sampler, s| stat.summarize_stream(&mut family.confidence(s), sampler, cfg.r, cfg.b),
        )
        .collect()
}

/// q(mu; alpha) = (1/S) #{s : T_n(mu; pi_s) <= c}.
pub fn confidence_function(x: &Sample, mu: &[f64], cfg: &InferenceConfig, family: StreamFamily) -> Result<f64> {
    cfg.validate_for(x.n())?;
    check_draw_counts(cfg)?;
    check_dim(x.m(), mu.len())?;
    let stat = MeanStatistic::new(x)?;
    let c = critical_value(&stat, cfg, cfg.alpha, family)?;
    Ok(q_from_summaries(&stat, &confidence_summaries(&stat, cfg, family), mu, c))
}

/// Fraction of the summarized bundles whose T_n(mu) is at most `c`.
pub fn q_from_summaries(stat: &MeanStatistic<'_>, summaries: &[BundleSummary], mu: &[f64], c: f64) -> f64 {
    if summaries.is_empty() {
        return 0.0;
    }
    let accepted = summaries.iter().filter(|s| s.t(stat, mu) <= c).count();
    accepted as f64 / summaries.len() as f64
}

/// Fraction of `t_values` at or below `c`.
pub fn acceptance_rate(t_values: &[f64], c: f64) -> f64 {
    if t_values.is_empty() {
        return 0.0;
    }
    t_values.iter().filter(|&&t| t <= c).count() as f64 / t_values.len() as f64
}

/// Outcome of a single randomized test of H0: mu0 = mu.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanTestResult {
    pub statistic: f64,
    pub critical_value: f64,
    pub reject: bool,
    pub method: CriticalValueMethod,
    pub s_n: f64,
    pub bias_adjustment: f64,
}

/// One draw of T_n(mu) (bundle from `family.test_bundle()`) against the
/// configured critical value. Rejects when T_n > c.
pub fn mean_test(x: &Sample, mu: &[f64], cfg: &InferenceConfig, family: StreamFamily) -> Result<MeanTestResult> {
    cfg.validate_for(x.n())?;
    check_draw_counts(cfg)?;
    check_dim(x.m(), mu.len())?;
    let stat = MeanStatistic::new(x)?;
    let mut sampler = PrefixSampler::new(x.n());
    let bundle = draw_bundle_with(&mut sampler, &mut family.test_bundle(), cfg.b, cfg.r);
    let s_n = stat.s(mu, &bundle)?;
    let bias = bias_adjustment(cfg.r, cfg.b, x.n());
    let statistic = s_n - bias;
    let c = critical_value(&stat, cfg, cfg.alpha, family)?;
    Ok(MeanTestResult {
        statistic,
        critical_value: c,
        reject: statistic > c,
        method: cfg.critical_value,
        s_n,
        bias_adjustment: bias,
    })
}

/// q(.; alpha - beta) over a grid of mu values.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceFunctionCurve {
    pub grid: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
}

/// `q >= 1 - alpha`, allowing for rounding in `1 - alpha` when `q` is a
/// fraction of S.
pub fn meets_level(q: f64, alpha: f64) -> bool {
    q >= 1.0 - alpha - 1e-12
}

/// The curve plus membership in C_alpha = {mu : q(mu; alpha - beta) >= 1 - alpha}.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceSet {
    pub curve: ConfidenceFunctionCurve,
    pub members: Vec<bool>,
    /// Critical value used at level alpha - beta.
    pub critical_value: f64,
}

impl ConfidenceSet {
    /// Whether the members form one unbroken run of grid points.
    pub fn is_contiguous(&self) -> bool {
        let first = self.members.iter().position(|&m| m);
        let last = self.members.iter().rposition(|&m| m);
        match (first, last) {
            (Some(a), Some(b)) => self.members[a..=b].iter().all(|&m| m),
            _ => true,
        }
    }

    /// Smallest and largest member for a univariate grid.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        let first = self.members.iter().position(|&m| m)?;
        let last = self.members.iter().rposition(|&m| m)?;
        Some((self.curve.grid[first][0], self.curve.grid[last][0]))
    }
}

/// Evaluates q(mu; alpha - beta) on every grid point, reusing the same S
/// bundles at each point. The critical value is computed once.
pub fn confidence_set(x: &Sample, grid: &[Vec<f64>], cfg: &InferenceConfig, family: StreamFamily) -> Result<ConfidenceSet> {
    cfg.validate_for(x.n())?;
    check_draw_counts(cfg)?;
    if grid.is_empty() {
        return Err(Error::InvalidInput("confidence-set grid is empty".into()));
    }
    for mu in grid {
        check_dim(x.m(), mu.len())?;
    }
    let stat = MeanStatistic::new(x)?;
    let level = cfg.alpha - cfg.beta;
    let c = critical_value(&stat, cfg, level, family)?;
    let summaries = confidence_summaries(&stat, cfg, family);
    let values: Vec<f64> = grid
        .par_iter()
        .map(|mu| q_from_summaries(&stat, &summaries, mu, c))
        .collect();
    let members = values.iter().map(|&q| meets_level(q, cfg.alpha)).collect();
    Ok(ConfidenceSet {
        curve: ConfidenceFunctionCurve {
            grid: grid.to_vec(),
            values,
            alpha: cfg.alpha,
            beta: cfg.beta,
        },
        members,
        critical_value: c,
    })
}

/// 401 equispaced points on xbar +/- 8 sd R^{-1/4} b^{-1/2} for univariate data.
pub fn default_grid(x: &Sample, cfg: &InferenceConfig) -> Result<Vec<Vec<f64>>> {
    if x.m() != 1 {
        return Err(Error::InvalidInput("a grid must be supplied for multivariate data".into()));
    }
    let center = sample_mean(x)[0];
    let sd = sample_covariance(x).get(0, 0).sqrt();
    let half = 8.0 * sd * (cfg.r as f64).powf(-0.25) * (cfg.b as f64).powf(-0.5);
    Ok(linspace(center - half, center + half, 401).into_iter().map(|v| vec![v]).collect())
}

pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}
