//! Reproducible random streams and uniform draws of permutation prefixes.
//!
//! Every random quantity in the crate comes from an [`RngStream`], which is a
//! ChaCha8 generator keyed by the master seed and positioned on a 64-bit
//! stream id. The key is the master seed expanded to 256 bits by four rounds
//! of SplitMix64; the stream id selects one of the 2^64 independent ChaCha
//! streams under that key. Stream ids are laid out as
//!
//! ```text
//! stream_id = replication * 2^20 + purpose
//! ```
//!
//! with the purpose codes in [`purpose`]. Work items never share a live
//! stream, so results do not depend on how work is scheduled across threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Width of the purpose field in a stream id.
pub const PURPOSE_SPAN: u64 = 1 << 20;

/// Largest usable replication index.
pub const MAX_REPLICATION: u64 = (u64::MAX >> 20) - 1;

/// Purpose codes within one replication.
pub mod purpose {
    /// Simulated data for the replication.
    pub const DATA: u64 = 0;
    /// Graph realisation.
    pub const GRAPH: u64 = 1;
    /// The single bundle behind a one-shot test statistic.
    pub const TEST_BUNDLE: u64 = 2;
    /// Monte Carlo draws of lambda-coefficients.
    pub const LAMBDA: u64 = 3;
    /// Critical-value bundle `l` uses `CRITICAL_BASE + l`.
    pub const CRITICAL_BASE: u64 = 1 << 18;
    /// Confidence-function bundle `s` uses `CONFIDENCE_BASE + s`.
    pub const CONFIDENCE_BASE: u64 = 1 << 19;
    /// Upper bound on L.
    pub const MAX_CRITICAL_DRAWS: usize = 1 << 18;
    /// Upper bound on S.
    pub const MAX_CONFIDENCE_DRAWS: usize = 1 << 19;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A single-owner random stream identified by `(master_seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut state = master_seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(stream_id);
        Self { inner }
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    #[inline]
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// The streams belonging to one replication (or one dataset).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamFamily {
    pub seed: u64,
    pub replication: u64,
}

impl StreamFamily {
    pub fn new(seed: u64, replication: u64) -> Self {
        debug_assert!(replication <= MAX_REPLICATION + 1);
        Self { seed, replication }
    }

    pub fn stream_id(&self, purpose: u64) -> u64 {
        debug_assert!(purpose < PURPOSE_SPAN);
        self.replication
            .wrapping_mul(PURPOSE_SPAN)
            .wrapping_add(purpose)
    }

    pub fn stream(&self, purpose: u64) -> RngStream {
        RngStream::new(self.seed, self.stream_id(purpose))
    }

    pub fn data(&self) -> RngStream {
        self.stream(purpose::DATA)
    }

    pub fn test_bundle(&self) -> RngStream {
        self.stream(purpose::TEST_BUNDLE)
    }

    pub fn critical(&self, l: usize) -> RngStream {
        debug_assert!(l < purpose::MAX_CRITICAL_DRAWS);
        self.stream(purpose::CRITICAL_BASE + l as u64)
    }

    pub fn confidence(&self, s: usize) -> RngStream {
        debug_assert!(s < purpose::MAX_CONFIDENCE_DRAWS);
        self.stream(purpose::CONFIDENCE_BASE + s as u64)
    }

    /// Family reserved for objects shared by all replications, such as the
    /// graph that stays fixed across a design.
    pub fn shared(seed: u64) -> Self {
        Self::new(seed, MAX_REPLICATION + 1)
    }
}

/// The first `b` entries of a permutation of `[n]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PermutationPrefix {
    indices: Vec<usize>,
}

impl PermutationPrefix {
    /// Checks that `indices` are distinct and below `n`.
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        for &i in &indices {
            if i >= n {
                return Err(Error::InvalidInput(format!("index {i} out of range for n={n}")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidInput(format!("index {i} repeated in prefix")));
            }
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

fn check_sizes(n: usize, b: usize) -> Result<()> {
    if b > n {
        return Err(Error::SubsampleTooLarge { b, n });
    }
    if b < 2 {
        return Err(Error::InvalidInput(format!("subsample size must be at least 2 (got {b})")));
    }
    Ok(())
}

/// Partial Fisher-Yates over a reusable index pool.
///
/// After every draw the pool is restored to the identity, so a draw depends
/// only on the random stream and not on earlier draws.
#[derive(Debug, Clone)]
pub struct PrefixSampler {
    pool: Vec<usize>,
    swaps: Vec<usize>,
}

impl PrefixSampler {
    pub fn new(n: usize) -> Self {
        Self {
            pool: (0..n).collect(),
            swaps: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.pool.len()
    }

    /// Appends a uniform ordered `b`-tuple of distinct indices to `out`.
    pub fn draw_into<R: Rng + ?Sized>(&mut self, rng: &mut R, b: usize, out: &mut Vec<usize>) {
        let n = self.pool.len();
        debug_assert!(b <= n);
        self.swaps.clear();
        for i in 0..b {
            let j = rng.random_range(i..n);
            self.pool.swap(i, j);
            self.swaps.push(j);
            out.push(self.pool[i]);
        }
        for (i, &j) in self.swaps.iter().enumerate().rev() {
            self.pool.swap(i, j);
        }
    }
}

/// One uniform prefix of length `b` from a permutation of `[n]`.
pub fn draw_prefix<R: Rng + ?Sized>(rng: &mut R, n: usize, b: usize) -> Result<PermutationPrefix> {
    check_sizes(n, b)?;
    let mut out = Vec::with_capacity(b);
    PrefixSampler::new(n).draw_into(rng, b, &mut out);
    Ok(PermutationPrefix { indices: out })
}

/// R independent prefixes stored contiguously.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationBundle {
    n: usize,
    b: usize,
    flat: Vec<usize>,
}

impl PermutationBundle {
    pub fn from_prefixes(n: usize, b: usize, prefixes: &[PermutationPrefix]) -> Result<Self> {
        check_sizes(n, b)?;
        let mut flat = Vec::with_capacity(prefixes.len() * b);
        for p in prefixes {
            if p.len() != b {
                return Err(Error::DimensionMismatch { expected: b, got: p.len() });
            }
            if p.indices.iter().any(|&i| i >= n) {
                return Err(Error::InvalidInput("prefix index out of range".into()));
            }
            flat.extend_from_slice(&p.indices);
        }
        Ok(Self { n, b, flat })
    }

    /// Number of prefixes R.
    pub fn r(&self) -> usize {
        self.flat.len() / self.b
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn prefixes(&self) -> impl ExactSizeIterator<Item = &[usize]> + '_ {
        self.flat.chunks_exact(self.b)
    }

    pub fn prefix(&self, r: usize) -> PermutationPrefix {
        PermutationPrefix {
            indices: self.flat[r * self.b..(r + 1) * self.b].to_vec(),
        }
    }
}

/// R independent prefixes drawn in sequence from `rng`.
pub fn draw_bundle<R: Rng + ?Sized>(rng: &mut R, n: usize, b: usize, r: usize) -> Result<PermutationBundle> {
    check_sizes(n, b)?;
    let mut sampler = PrefixSampler::new(n);
    Ok(draw_bundle_with(&mut sampler, rng, b, r))
}

/// Like [`draw_bundle`] but reusing a sampler's scratch pool.
pub fn draw_bundle_with<R: Rng + ?Sized>(
    sampler: &mut PrefixSampler,
    rng: &mut R,
    b: usize,
    r: usize,
) -> PermutationBundle {
    let mut flat = Vec::with_capacity(r * b);
    for _ in 0..r {
        sampler.draw_into(rng, b, &mut flat);
    }
    PermutationBundle {
        n: sampler.n(),
        b,
        flat,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn fixed_stream_is_reproducible() {
        let a = draw_prefix(&mut RngStream::new(42, 0), 10, 4).unwrap();
        let b = draw_prefix(&mut RngStream::new(42, 0), 10, 4).unwrap();
        assert_eq!(a, b);
        let c = draw_prefix(&mut RngStream::new(42, 1), 10, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn oversized_subsample_rejected() {
        let mut rng = RngStream::new(1, 0);
        assert!(matches!(draw_prefix(&mut rng, 3, 4), Err(Error::SubsampleTooLarge { b: 4, n: 3 })));
        assert!(draw_bundle(&mut rng, 3, 4, 2).is_err());
    }

    #[test]
    fn empty_bundle() {
        let bundle = draw_bundle(&mut RngStream::new(3, 0), 10, 3, 0).unwrap();
        assert_eq!(bundle.r(), 0);
        assert!(bundle.is_empty());
    }

    #[test]
    fn bundle_reproducible() {
        let a = draw_bundle(&mut RngStream::new(9, 5), 20, 3, 3).unwrap();
        let b = draw_bundle(&mut RngStream::new(9, 5), 20, 3, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.r(), 3);
        for p in a.prefixes() {
            PermutationPrefix::new(p.to_vec(), 20).unwrap();
        }
    }

    #[test]
    fn two_of_two_is_balanced() {
        let mut rng = RngStream::new(5, 0);
        let draws = 20_000;
        let forward = (0..draws)
            .filter(|_| draw_prefix(&mut rng, 2, 2).unwrap().indices() == [0, 1])
            .count();
        // chi-square with one degree of freedom, 99.9% point 10.83
        let e = draws as f64 / 2.0;
        let chi2 = 2.0 * (forward as f64 - e).powi(2) / e;
        assert!(chi2 < 10.83, "chi2 = {chi2}");
    }

    #[test]
    fn ordered_triples_uniform() {
        let mut rng = RngStream::new(17, 0);
        let mut sampler = PrefixSampler::new(5);
        let draws = 600_000usize;
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut buf = Vec::with_capacity(3);
        for _ in 0..draws {
            buf.clear();
            sampler.draw_into(&mut rng, 3, &mut buf);
            *counts.entry(buf.clone()).or_default() += 1;
        }
        assert_eq!(counts.len(), 60);
        let p = 1.0 / 60.0;
        let e = draws as f64 * p;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for (k, c) in counts {
            assert!((c as f64 - e).abs() < 4.0 * sd, "{k:?}: {c}");
        }
    }

    #[test]
    fn truncated_full_shuffle_matches_prefix_draw() {
        // Both routes should put mass 1/12 on each ordered pair of [4].
        use rand::seq::SliceRandom;
        let draws = 120_000usize;
        let mut rng = RngStream::new(23, 0);
        let mut prefix_counts = [[0usize; 4]; 4];
        let mut shuffle_counts = [[0usize; 4]; 4];
        for _ in 0..draws {
            let p = draw_prefix(&mut rng, 4, 2).unwrap();
            prefix_counts[p.indices()[0]][p.indices()[1]] += 1;
            let mut full: Vec<usize> = (0..4).collect();
            full.shuffle(&mut rng);
            shuffle_counts[full[0]][full[1]] += 1;
        }
        let e = draws as f64 / 12.0;
        let sd = (draws as f64 * (1.0 / 12.0) * (11.0 / 12.0)).sqrt();
        for i in 0..4 {
            for j in 0..4 {
                if i == j {
                    assert_eq!(prefix_counts[i][j], 0);
                    assert_eq!(shuffle_counts[i][j], 0);
                } else {
                    assert!((prefix_counts[i][j] as f64 - e).abs() < 4.0 * sd);
                    assert!((shuffle_counts[i][j] as f64 - e).abs() < 4.0 * sd);
                }
            }
        }
    }

    #[test]
    fn first_position_histogram_uniform() {
        let (n, b, r) = (100, 5, 10_000);
        let bundle = draw_bundle(&mut RngStream::new(31, 0), n, b, r).unwrap();
        let mut counts = vec![0usize; n];
        for p in bundle.prefixes() {
            counts[p[0]] += 1;
        }
        let e = r as f64 / n as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // chi-square, 99 df, upper 1% point
        assert!(chi2 < 134.64, "chi2 = {chi2}");
    }

    #[test]
    fn sampler_pool_restored() {
        let mut sampler = PrefixSampler::new(8);
        let mut rng = RngStream::new(2, 2);
        let mut out = Vec::new();
        sampler.draw_into(&mut rng, 5, &mut out);
        assert_eq!(sampler.pool, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn prefix_validation() {
        assert!(PermutationPrefix::new(vec![0, 0], 3).is_err());
        assert!(PermutationPrefix::new(vec![0, 3], 3).is_err());
        assert!(PermutationPrefix::new(vec![2, 0], 3).is_ok());
    }

    #[test]
    fn stream_layout() {
        let fam = StreamFamily::new(0, 3);
        assert_eq!(fam.stream_id(purpose::DATA), 3 * PURPOSE_SPAN);
        assert_eq!(fam.stream_id(purpose::CONFIDENCE_BASE + 7), 3 * PURPOSE_SPAN + (1 << 19) + 7);
    }
}
