//! Small dense symmetric matrices and the Cholesky-based inverse used for
//! the sample covariance.

use crate::error::{Error, Result};

/// Default relative pivot floor for [`invert_spd`].
pub const DEFAULT_PIVOT_TOL: f64 = 1e-10;

/// Symmetric matrix storing only the lower triangle, row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    packed: Vec<f64>,
}

#[inline]
fn packed_index(i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    r * (r + 1) / 2 + c
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            packed: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        Self::from_fn(diag.len(), |i, j| if i == j { diag[i] } else { 0.0 })
    }

    /// Builds the matrix from `f(i, j)` evaluated on the lower triangle (i >= j).
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut packed = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in 0..=i {
                packed.push(f(i, j));
            }
        }
        Self { dim, packed }
    }

    /// Symmetric part of a row-major dense matrix.
    pub fn from_dense(dim: usize, dense: &[f64]) -> Result<Self> {
        if dense.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: dense.len(),
            });
        }
        Ok(Self::from_fn(dim, |i, j| 0.5 * (dense[i * dim + j] + dense[j * dim + i])))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.packed[packed_index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.packed[packed_index(i, j)] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = self.get(i, j);
            }
        }
        out
    }

    /// `self * x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// `x' * self * y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        let mut acc = 0.0;
        for i in 0..self.dim {
            let row: f64 = (0..self.dim).map(|j| self.get(i, j) * y[j]).sum();
            acc += x[i] * row;
        }
        acc
    }

    #[inline]
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }
}

/// Lower Cholesky factor (row-major dense) of a symmetric matrix, with the
/// pivot floor applied to every diagonal pivot before its square root.
fn cholesky(m: &SymmetricMatrix, floor: f64) -> Result<Vec<f64>> {
    let d = m.dim();
    let mut l = vec![0.0; d * d];
    for j in 0..d {
        let mut pivot = m.get(j, j);
        for k in 0..j {
            pivot -= l[j * d + k] * l[j * d + k];
        }
        if !(pivot > floor) || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot, floor });
        }
        let diag = pivot.sqrt();
        l[j * d + j] = diag;
        for i in (j + 1)..d {
            let mut v = m.get(i, j);
            for k in 0..j {
                v -= l[i * d + k] * l[j * d + k];
            }
            l[i * d + j] = v / diag;
        }
    }
    Ok(l)
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
///
/// Fails with [`Error::NotPositiveDefinite`] when any pivot falls below
/// `rel_tol * trace(M) / dim`, which is how a constant column in the data
/// surfaces.
pub fn invert_spd(m: &SymmetricMatrix, rel_tol: f64) -> Result<SymmetricMatrix> {
    let d = m.dim();
    if d == 0 {
        return Err(Error::InvalidInput("cannot invert a 0x0 matrix".into()));
    }
    let floor = rel_tol * m.trace() / d as f64;
    let l = cholesky(m, floor.max(0.0))?;

    // L^{-1}, lower triangular.
    let mut linv = vec![0.0; d * d];
    for j in 0..d {
        linv[j * d + j] = 1.0 / l[j * d + j];
        for i in (j + 1)..d {
            let mut s = 0.0;
            for k in j..i {
                s += l[i * d + k] * linv[k * d + j];
            }
            linv[i * d + j] = -s / l[i * d + i];
        }
    }
    // M^{-1} = L^{-T} L^{-1}
    Ok(SymmetricMatrix::from_fn(d, |i, j| {
        (i.max(j)..d).map(|k| linv[k * d + i] * linv[k * d + j]).sum()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matmul(d: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = (0..d).map(|k| a[i * d + k] * b[k * d + j]).sum();
            }
        }
        out
    }

    fn random_spd(d: usize, rng: &mut ChaCha8Rng) -> SymmetricMatrix {
        let a: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        SymmetricMatrix::from_fn(d, |i, j| {
            let dot: f64 = (0..d).map(|k| a[i * d + k] * a[j * d + k]).sum();
            dot + if i == j { 0.5 } else { 0.0 }
        })
    }

    #[test]
    fn identity_inverse() {
        let inv = invert_spd(&SymmetricMatrix::identity(3), 1e-10).unwrap();
        assert_eq!(inv, SymmetricMatrix::identity(3));
    }

    #[test]
    fn diagonal_inverse() {
        let inv = invert_spd(&SymmetricMatrix::diagonal(&[2.0, 4.0]), 1e-10).unwrap();
        assert!((inv.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((inv.get(1, 1) - 0.25).abs() < 1e-15);
        assert_eq!(inv.get(0, 1), 0.0);
    }

    #[test]
    fn random_spd_multiplies_back_to_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let m = random_spd(4, &mut rng);
            let inv = invert_spd(&m, 1e-10).unwrap();
            let prod = matmul(4, &m.to_dense(), &inv.to_dense());
            let err = (0..16)
                .map(|k| (prod[k] - if k % 5 == 0 { 1.0 } else { 0.0 }).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-10, "residual {err}");
        }
    }

    #[test]
    fn double_inverse_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in 1..6 {
            let m = random_spd(d, &mut rng);
            let back = invert_spd(&invert_spd(&m, 1e-10).unwrap(), 1e-10).unwrap();
            for i in 0..d {
                for j in 0..=i {
                    let rel = (back.get(i, j) - m.get(i, j)).abs() / m.get(i, i).abs().max(1.0);
                    assert!(rel < 1e-8);
                }
            }
        }
    }

    #[test]
    fn singular_matrix_rejected() {
        let zero = SymmetricMatrix::zeros(2);
        assert!(matches!(invert_spd(&zero, 1e-10), Err(Error::NotPositiveDefinite { .. })));
        // rank one
        let m = SymmetricMatrix::from_fn(2, |_, _| 1.0);
        assert!(invert_spd(&m, 1e-10).unwrap_err().is_degenerate());
    }

    #[test]
    fn packed_storage_is_symmetric() {
        let mut m = SymmetricMatrix::zeros(3);
        m.set(0, 2, 5.0);
        assert_eq!(m.get(2, 0), 5.0);
        assert_eq!(m.bilinear(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]), 5.0);
    }
}
