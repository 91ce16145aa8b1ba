//! Fixtures shared by the benchmarks.

use randsub::dgp::iid_normal;
use randsub::graph::erdos_renyi;
use randsub::{Graph, RngStream, Sample};

/// Standard normal column of length `n`.
pub fn normal_sample(n: usize, seed: u64) -> Sample {
    iid_normal(n, &mut RngStream::new(seed, 0)).expect("n >= 2")
}

/// Erdos-Renyi graph with mean degree `lambda`.
pub fn er_graph(n: usize, lambda: f64, seed: u64) -> Graph {
    erdos_renyi(n, lambda, &mut RngStream::new(seed, 1)).expect("valid graph parameters")
}
