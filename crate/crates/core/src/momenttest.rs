//! Test inversion for models defined by moment restrictions
//! `E[g(X_i; theta0)] = 0`.
//!
//! At each theta the moment rows `g_i(theta)` play the role of the data in
//! [`crate::meantest`]: the statistic uses the uncentered rows with
//! hypothesized mean zero, the covariance is centered at `gbar(theta)`, and
//! the permutation critical value uses rows centered at `gbar(theta)`.

use rayon::prelude::*;

use crate::data::{CriticalValueMethod, InferenceConfig, Sample};
use crate::error::{Error, Result};
use crate::meantest::{
    check_dim, check_draw_counts, confidence_summaries, critical_value, meets_level, permutation_draws, q_from_summaries,
    MeanStatistic,
};
use crate::normal::upper_critical;
use crate::permute::{PermutationBundle, StreamFamily};

/// A moment function `g(row, theta) -> R^m`.
pub trait MomentModel: Sync {
    fn dim_theta(&self) -> usize;
    fn dim_moment(&self) -> usize;
    /// Writes `g(row; theta)` into `out` (length `dim_moment`).
    fn eval(&self, row: &[f64], theta: &[f64], out: &mut [f64]);
}

/// `g(x; theta) = x - theta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeanModel {
    pub dim: usize,
}

impl MomentModel for MeanModel {
    fn dim_theta(&self) -> usize {
        self.dim
    }

    fn dim_moment(&self) -> usize {
        self.dim
    }

    fn eval(&self, row: &[f64], theta: &[f64], out: &mut [f64]) {
        for ((o, x), t) in out.iter_mut().zip(row).zip(theta) {
            *o = x - t;
        }
    }
}

/// A column of the data, or the constant 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Constant,
    Index(usize),
}

impl Column {
    #[inline]
    fn value(self, row: &[f64]) -> f64 {
        match self {
            Column::Constant => 1.0,
            Column::Index(j) => row[j],
        }
    }
}

/// Linear instrumental-variables moments `g = z (y - x' theta)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearIv {
    pub outcome: usize,
    pub regressors: Vec<Column>,
    pub instruments: Vec<Column>,
}

impl MomentModel for LinearIv {
    fn dim_theta(&self) -> usize {
        self.regressors.len()
    }

    fn dim_moment(&self) -> usize {
        self.instruments.len()
    }

    fn eval(&self, row: &[f64], theta: &[f64], out: &mut [f64]) {
        let fitted: f64 = self.regressors.iter().zip(theta).map(|(c, t)| c.value(row) * t).sum();
        let resid = row[self.outcome] - fitted;
        for (o, z) in out.iter_mut().zip(&self.instruments) {
            *o = z.value(row) * resid;
        }
    }
}

/// Adapts a closure into a [`MomentModel`].
pub struct FnModel<F> {
    pub dim_theta: usize,
    pub dim_moment: usize,
    pub g: F,
}

impl<F> MomentModel for FnModel<F>
where
    F: Fn(&[f64], &[f64], &mut [f64]) + Sync,
{
    fn dim_theta(&self) -> usize {
        self.dim_theta
    }

    fn dim_moment(&self) -> usize {
        self.dim_moment
    }

    fn eval(&self, row: &[f64], theta: &[f64], out: &mut [f64]) {
        (self.g)(row, theta, out)
    }
}

/// The n x m matrix with row i equal to `g(X_i; theta)`.
pub fn moment_matrix(x: &Sample, model: &dyn MomentModel, theta: &[f64]) -> Result<Sample> {
    check_dim(model.dim_theta(), theta.len())?;
    let m = model.dim_moment();
    let mut data = vec![0.0; x.n() * m];
    for (i, (row, out)) in x.rows().zip(data.chunks_exact_mut(m)).enumerate() {
        model.eval(row, theta, out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteMoment { row: i });
        }
    }
    Sample::new(x.n(), m, data)
}

/// T_n(theta) for one bundle.
pub fn t_statistic_theta(x: &Sample, model: &dyn MomentModel, theta: &[f64], bundle: &PermutationBundle) -> Result<f64> {
    let g = moment_matrix(x, model, theta)?;
    let zero = vec![0.0; g.m()];
    MeanStatistic::new(&g)?.t(&zero, bundle)
}

/// S~_n(theta): the statistic with moment rows centered at `gbar(theta)`.
pub fn centered_s_statistic(x: &Sample, model: &dyn MomentModel, theta: &[f64], bundle: &PermutationBundle) -> Result<f64> {
    let g = moment_matrix(x, model, theta)?;
    let stat = MeanStatistic::new(&g)?;
    stat.s(stat.mean(), bundle)
}

/// c~(theta) at level `cfg.alpha`.
pub fn critical_value_theta(
    x: &Sample,
    model: &dyn MomentModel,
    theta: &[f64],
    cfg: &InferenceConfig,
    family: StreamFamily,
) -> Result<f64> {
    cfg.validate_for(x.n())?;
    check_draw_counts(cfg)?;
    let g = moment_matrix(x, model, theta)?;
    let stat = MeanStatistic::new(&g)?;
    let mut draws = permutation_draws(&stat, cfg, family);
    crate::meantest::critical_value_from_draws(&mut draws, cfg.alpha)
}

/// q(theta; alpha).
pub fn confidence_function_theta(
    x: &Sample,
    model: &dyn MomentModel,
    theta: &[f64],
    cfg: &InferenceConfig,
    family: StreamFamily,
) -> Result<f64> {
    cfg.validate_for(x.n())?;
    check_draw_counts(cfg)?;
    let g = moment_matrix(x, model, theta)?;
    let stat = MeanStatistic::new(&g)?;
    let c = critical_value(&stat, cfg, cfg.alpha, family)?;
    let zero = vec![0.0; g.m()];
    Ok(q_from_summaries(&stat, &confidence_summaries(&stat, cfg, family), &zero, c))
}

/// q(theta; alpha - beta) and C_alpha membership over a parameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGridResult {
    pub grid: Vec<Vec<f64>>,
    /// 0 at degenerate points.
    pub q_values: Vec<f64>,
    /// Critical value used at each point; NaN where degenerate.
    pub critical_values: Vec<f64>,
    pub members: Vec<bool>,
    /// Points where the moment covariance could not be inverted.
    pub degenerate: Vec<bool>,
}

struct PointEval {
    q: f64,
    c: f64,
}

fn eval_point(
    x: &Sample,
    model: &dyn MomentModel,
    theta: &[f64],
    cfg: &InferenceConfig,
    level: f64,
    family: StreamFamily,
) -> Result<PointEval> {
    let g = moment_matrix(x, model, theta)?;
    let stat = MeanStatistic::new(&g)?;
    let c = critical_value(&stat, cfg, level, family)?;
    let zero = vec![0.0; g.m()];
    let q = q_from_summaries(&stat, &confidence_summaries(&stat, cfg, family), &zero, c);
    Ok(PointEval { q, c })
}

/// Sweeps the grid. Every point uses the same stream family, so the curve
/// does not depend on grid order. Degenerate points are flagged and left
/// out of the set; other errors abort.
pub fn confidence_set_theta(
    x: &Sample,
    model: &dyn MomentModel,
    grid: &[Vec<f64>],
    cfg: &InferenceConfig,
    family: StreamFamily,
) -> Result<ParamGridResult> {
    cfg.validate_for(x.n())?;
    check_draw_counts(cfg)?;
    for theta in grid {
        check_dim(model.dim_theta(), theta.len())?;
    }
    let level = cfg.alpha - cfg.beta;
    let evals: Vec<Result<PointEval>> = grid
        .par_iter()
        .map(|theta| eval_point(x, model, theta, cfg, level, family))
        .collect();
    let mut out = ParamGridResult {
        grid: grid.to_vec(),
        q_values: Vec::with_capacity(grid.len()),
        critical_values: Vec::with_capacity(grid.len()),
        members: Vec::with_capacity(grid.len()),
        degenerate: Vec::with_capacity(grid.len()),
    };
    for eval in evals {
        match eval {
            Ok(PointEval { q, c }) => {
                out.q_values.push(q);
                out.critical_values.push(c);
                out.members.push(meets_level(q, cfg.alpha));
                out.degenerate.push(false);
            }
            Err(e) if e.is_degenerate() => {
                out.q_values.push(0.0);
                out.critical_values.push(f64::NAN);
                out.members.push(false);
                out.degenerate.push(true);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Result of profiling out the nuisance block theta2.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileResult {
    /// min over the theta2 grid of the confidence function at c~(theta1).
    pub q: f64,
    pub critical_value: f64,
    /// theta2 points skipped as degenerate.
    pub degenerate: Vec<bool>,
}

/// inf{c > 0 : min_k (1/L) #{v_{k,l} > c} <= alpha} over the pooled draws.
pub fn profiled_critical_value(draws: &[Vec<f64>], alpha: f64) -> Result<f64> {
    if draws.is_empty() || draws.iter().any(|d| d.is_empty()) {
        return Err(Error::InvalidInput("no permutation draws to profile over".into()));
    }
    let sorted: Vec<Vec<f64>> = draws
        .iter()
        .map(|d| {
            let mut d = d.clone();
            d.sort_by(f64::total_cmp);
            d
        })
        .collect();
    let exceed_ok = |c: f64| {
        sorted.iter().any(|d| {
            let above = d.len() - d.partition_point(|&v| v <= c);
            above as f64 <= alpha * d.len() as f64 + 1e-9
        })
    };
    if exceed_ok(0.0) {
        return Ok(0.0);
    }
    let mut pooled: Vec<f64> = sorted.iter().flatten().copied().filter(|&v| v > 0.0).collect();
    pooled.sort_by(f64::total_cmp);
    pooled
        .into_iter()
        .find(|&c| exceed_ok(c))
        .ok_or_else(|| Error::InvalidInput("no candidate critical value satisfies the level".into()))
}

/// Profiled confidence function for the leading block `theta1` of
/// `theta = (theta1, theta2)`, with both infima taken over `grid_theta2`.
pub fn profiled_confidence_function(
    x: &Sample,
    model: &dyn MomentModel,
    theta1: &[f64],
    grid_theta2: &[Vec<f64>],
    cfg: &InferenceConfig,
    family: StreamFamily,
) -> Result<ProfileResult> {
    cfg.validate_for(x.n())?;
    check_draw_counts(cfg)?;
    if grid_theta2.is_empty() {
        return Err(Error::InvalidInput("nuisance grid is empty".into()));
    }
    let thetas: Vec<Vec<f64>> = grid_theta2
        .iter()
        .map(|t2| theta1.iter().chain(t2).copied().collect())
        .collect();
    for theta in &thetas {
        check_dim(model.dim_theta(), theta.len())?;
    }

    let moments: Vec<Option<Sample>> = thetas
        .iter()
        .map(|theta| moment_matrix(x, model, theta).map(Some))
        .collect::<Result<_>>()?;
    let stats: Vec<Option<MeanStatistic<'_>>> = moments
        .iter()
        .map(|g| match g.as_ref().map(MeanStatistic::new) {
            Some(Ok(stat)) => Ok(Some(stat)),
            Some(Err(e)) if e.is_degenerate() => Ok(None),
            Some(Err(e)) => Err(e),
            None => Ok(None),
        })
        .collect::<Result<_>>()?;
    let degenerate: Vec<bool> = stats.iter().map(Option::is_none).collect();
    let live: Vec<&MeanStatistic<'_>> = stats.iter().flatten().collect();
    if live.is_empty() {
        return Err(Error::NotPositiveDefinite { pivot: 0.0, floor: 0.0 });
    }

    let c = match cfg.critical_value {
        CriticalValueMethod::AsymptoticNormal => upper_critical(cfg.alpha)?,
        CriticalValueMethod::Permutation => {
            let draws: Vec<Vec<f64>> = live.iter().map(|stat| permutation_draws(stat, cfg, family)).collect();
            profiled_critical_value(&draws, cfg.alpha)?
        }
    };
    let q = live
        .iter()
        .map(|stat| {
            let zero = vec![0.0; stat.sample().m()];
            q_from_summaries(stat, &confidence_summaries(stat, cfg, family), &zero, c)
        })
        .fold(f64::INFINITY, f64::min);
    Ok(ProfileResult {
        q,
        critical_value: c,
        degenerate,
    })
}
