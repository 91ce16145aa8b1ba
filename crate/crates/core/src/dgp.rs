//! Data-generating processes of the simulation study: i.i.d. normals,
//! edge-by-edge mixing along a dependency graph, and Gaussian vectors whose
//! correlation decays as `exp(-rho * D)` in graph distance.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::graph::{DistanceMatrix, Graph};
use crate::linalg::SymmetricMatrix;

/// Eigenvalue floor used when repairing the network correlation matrix.
pub const EIGEN_FLOOR: f64 = 1e-10;
/// Largest relative Frobenius change the repair may make.
pub const MAX_REPAIR_PERTURBATION: f64 = 0.05;

fn normals<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// `n` i.i.d. N(0, 1) draws as an n x 1 sample.
pub fn iid_normal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Sample> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("need n >= 2, got {n}")));
    }
    Sample::column(normals(n, rng))
}

/// Strength of the mixing step, `0 <= c <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingParams {
    c: f64,
}

impl MixingParams {
    pub fn new(c: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::InvalidInput(format!("mixing strength c = {c} outside [0, 1]")));
        }
        Ok(MixingParams { c })
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

/// Starts from i.i.d. normals and walks the edges in lexicographic order;
/// at each edge both endpoints become `sqrt(1 - c^2) * current + c * Z` with
/// a fresh shared `Z`. Every marginal stays N(0, 1).
pub fn dependency_graph_mix<R: Rng + ?Sized>(g: &Graph, params: MixingParams, rng: &mut R) -> Result<Sample> {
    let mut y = normals(g.n(), rng);
    let c = params.c;
    let keep = (1.0 - c * c).sqrt();
    for (i, j) in g.edges() {
        let z: f64 = rng.sample(StandardNormal);
        y[i] = keep * y[i] + c * z;
        y[j] = keep * y[j] + c * z;
    }
    Sample::column(y)
}

/// Population covariance of [`dependency_graph_mix`].
///
/// `Z_s` for edge `s = (i, j)` enters `Y_i` with weight `c` and is then
/// shrunk by `sqrt(1 - c^2)` at every later edge touching `i`, so
/// `Cov(Y_i, Y_j) = c^2 * keep^(a_i + a_j)` where `a_i` counts the edges of
/// `i` processed after `s`. Non-adjacent pairs share no `Z` and are uncorrelated.
pub fn dependency_graph_mix_covariance(g: &Graph, params: MixingParams) -> SymmetricMatrix {
    let c = params.c;
    let keep = (1.0 - c * c).sqrt();
    let mut remaining: Vec<i32> = (0..g.n()).map(|i| g.degree(i) as i32).collect();
    let mut cov = SymmetricMatrix::identity(g.n());
    for (i, j) in g.edges() {
        remaining[i] -= 1;
        remaining[j] -= 1;
        cov.set(i, j, c * c * keep.powi(remaining[i] + remaining[j]));
    }
    cov
}

/// Decay rate `rho > 0` of the network correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkCovParams {
    rho: f64,
}

impl NetworkCovParams {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidInput(format!("decay rate rho = {rho} must be positive")));
        }
        Ok(NetworkCovParams { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// `C_ij = exp(-rho * D_ij)`, zero for unreachable pairs, unit diagonal.
pub fn target_correlation(dist: &DistanceMatrix, params: NetworkCovParams) -> DMatrix<f64> {
    let n = dist.n();
    // distances are small integers, so tabulate exp(-rho * d)
    let max_d = (0..n)
        .flat_map(|i| dist.row(i).iter().copied())
        .filter(|&d| d != DistanceMatrix::INFINITE)
        .max()
        .unwrap_or(0) as usize;
    let table: Vec<f64> = (0..=max_d).map(|d| (-params.rho * d as f64).exp()).collect();
    DMatrix::from_fn(n, n, |i, j| match dist.get(i, j) {
        DistanceMatrix::INFINITE => 0.0,
        d => table[d as usize],
    })
}

/// Sampler for N(0, C~) where C~ is the PSD repair of the target correlation.
#[derive(Debug, Clone)]
pub struct NetworkGaussian {
    factor: DMatrix<f64>,
    perturbation: f64,
}

impl NetworkGaussian {
    /// Factors the target, repairing it if it is not safely positive definite.
    /// Fails if the repair moves the target by more than
    /// [`MAX_REPAIR_PERTURBATION`] in relative Frobenius norm.
    pub fn new(dist: &DistanceMatrix, params: NetworkCovParams) -> Result<Self> {
        let target = target_correlation(dist, params);
        let n = target.nrows();
        // all eigenvalues exceed the floor iff C - floor * I is positive definite,
        // in which case the repair is the identity
        let shifted = &target - DMatrix::identity(n, n) * EIGEN_FLOOR;
        if Cholesky::new(shifted).is_some() {
            let chol = Cholesky::new(target).expect("shifted matrix was positive definite");
            return Ok(NetworkGaussian {
                factor: chol.l(),
                perturbation: 0.0,
            });
        }
        let (repaired, factor) = repair(&target);
        let perturbation = (&repaired - &target).norm() / target.norm();
        if perturbation >= MAX_REPAIR_PERTURBATION {
            return Err(Error::CovarianceRepair { perturbation });
        }
        Ok(NetworkGaussian { factor, perturbation })
    }

    pub fn n(&self) -> usize {
        self.factor.nrows()
    }

    /// Relative Frobenius distance between the repaired and target matrices.
    pub fn perturbation(&self) -> f64 {
        self.perturbation
    }

    /// The covariance of the draws, `F F'`.
    pub fn covariance(&self) -> DMatrix<f64> {
        &self.factor * self.factor.transpose()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Sample> {
        let z = DVector::from_vec(normals(self.factor.ncols(), rng));
        let y = &self.factor * z;
        Sample::column(y.as_slice().to_vec())
    }
}

/// Clips eigenvalues at the floor and rescales to unit diagonal. Returns the
/// repaired matrix and a factor `F` with `F F'` equal to it.
fn repair(target: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(target.clone());
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(EIGEN_FLOOR).sqrt());
    let mut factor = eig.eigenvectors;
    for (mut col, s) in factor.column_iter_mut().zip(sqrt_vals.iter()) {
        col *= *s;
    }
    for mut row in factor.row_iter_mut() {
        let norm = row.norm();
        row /= norm;
    }
    let repaired = &factor * factor.transpose();
    (repaired, factor)
}

/// One draw of the network Gaussian design. Builds the factor each call;
/// reuse a [`NetworkGaussian`] when the graph is fixed.
pub fn network_gaussian<R: Rng + ?Sized>(dist: &DistanceMatrix, params: NetworkCovParams, rng: &mut R) -> Result<Sample> {
    NetworkGaussian::new(dist, params)?.sample(rng)
}
