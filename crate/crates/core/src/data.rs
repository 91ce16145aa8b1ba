//! Observed data and inference tuning parameters.

use crate::error::{Error, Result};

/// An n x m matrix of finite reals, one row per cross-sectional unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    data: Vec<f64>,
    n: usize,
    m: usize,
}

impl Sample {
    /// Builds a sample from row-major storage. Every entry must be finite.
    pub fn new(n: usize, m: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidInput(format!(
                "sample must have at least one row and one column (got {n}x{m})"
            )));
        }
        if data.len() != n * m {
            return Err(Error::DimensionMismatch {
                expected: n * m,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / m,
                col: pos % m,
            });
        }
        Ok(Self { data, n, m })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let m = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * m);
        for row in rows {
            let row = row.as_ref();
            if row.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), m, data)
    }

    /// A univariate sample (n x 1).
    pub fn column(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(n, 1, values)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.m)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Column `j` copied out.
    pub fn column_values(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

}

/// How the critical value of the U-type test is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CriticalValueMethod {
    /// Upper (1 - alpha) quantile of N(0, 1).
    AsymptoticNormal,
    /// Order statistic of the statistic recomputed over fresh permutation bundles.
    Permutation,
}

impl CriticalValueMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CriticalValueMethod::AsymptoticNormal => "normal",
            CriticalValueMethod::Permutation => "permutation",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" | "asymptotic" | "asymptoticnormal" => Ok(Self::AsymptoticNormal),
            "permutation" | "perm" => Ok(Self::Permutation),
            other => Err(Error::InvalidInput(format!(
                "unknown critical-value method `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for CriticalValueMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Tuning parameters shared by every test and confidence-set routine.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceConfig {
    /// Permutations per statistic.
    pub r: usize,
    /// Subsample size read from each permutation.
    pub b: usize,
    /// Permutation bundles used for the critical value.
    pub l: usize,
    /// Bundles averaged by the confidence function.
    pub s: usize,
    pub alpha: f64,
    /// Margin used by the non-randomized confidence set.
    pub beta: f64,
    pub seed: u64,
    pub critical_value: CriticalValueMethod,
}

/// Largest integer c with c^3 <= n, at least 2.
pub fn default_subsample_size(n: usize) -> usize {
    let mut c = (n as f64).cbrt().round() as usize;
    while c > 0 && c * c * c > n {
        c -= 1;
    }
    while (c + 1) * (c + 1) * (c + 1) <= n {
        c += 1;
    }
    c.max(2)
}

impl InferenceConfig {
    /// Defaults for a sample of size `n`: R = n, b = floor(n^(1/3)), L = S = 1000,
    /// alpha = 0.05, beta = 0.005, permutation critical values.
    pub fn for_sample_size(n: usize) -> Self {
        Self {
            r: n.max(1),
            b: default_subsample_size(n),
            l: 1000,
            s: 1000,
            alpha: 0.05,
            beta: 0.005,
            seed: 0,
            critical_value: CriticalValueMethod::Permutation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(Error::InvalidInput("R must be positive".into()));
        }
        if self.b < 2 {
            return Err(Error::InvalidInput(format!("b_n must be at least 2 (got {})", self.b)));
        }
        if self.l == 0 || self.s == 0 {
            return Err(Error::InvalidInput("L and S must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!("alpha must lie in (0,1) (got {})", self.alpha)));
        }
        if !(self.beta >= 0.0 && self.beta < self.alpha) {
            return Err(Error::InvalidInput(format!(
                "beta must lie in [0, alpha) (got beta={}, alpha={})",
                self.beta, self.alpha
            )));
        }
        Ok(())
    }

    /// Validates and checks that the subsample fits in a sample of size `n`.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        self.validate()?;
        if self.b > n {
            return Err(Error::SubsampleTooLarge { b: self.b, n });
        }
        Ok(())
    }

    /// The term sqrt(R) * b / n subtracted from S_n.
    pub fn bias_adjustment(&self, n: usize) -> f64 {
        (self.r as f64).sqrt() * self.b as f64 / n as f64
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { alpha, ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_entries() {
        let err = Sample::new(2, 2, vec![1.0, 2.0, f64::NAN, 0.0]).unwrap_err();
        assert_eq!(err, Error::NonFinite { row: 1, col: 0 });
        assert!(Sample::column(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn ragged_rows_rejected() {
        let rows = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(matches!(
            Sample::from_rows(&rows),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn cube_root_defaults() {
        assert_eq!(default_subsample_size(500), 7);
        assert_eq!(default_subsample_size(1000), 10);
        assert_eq!(default_subsample_size(3000), 14);
        assert_eq!(default_subsample_size(8), 2);
        assert_eq!(default_subsample_size(3), 2);
        assert_eq!(default_subsample_size(27), 3);
    }

    #[test]
    fn config_validation() {
        let mut cfg = InferenceConfig::for_sample_size(100);
        assert!(cfg.validate().is_ok());
        cfg.beta = cfg.alpha;
        assert!(cfg.validate().is_err());
        cfg.beta = 0.0;
        cfg.b = 200;
        assert!(matches!(cfg.validate_for(100), Err(Error::SubsampleTooLarge { .. })));
    }

    #[test]
    fn bias_adjustment_value() {
        let cfg = InferenceConfig {
            r: 1,
            b: 2,
            ..InferenceConfig::for_sample_size(4)
        };
        assert_eq!(cfg.bias_adjustment(4), 0.5);
    }
}
