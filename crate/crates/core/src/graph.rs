//! Simple undirected graphs, the Erdős–Rényi and Barabási–Albert generators
//! of the simulation design, and all-pairs hop distances.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Simple undirected graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph {
            adjacency: vec![Vec::new(); n],
        }
    }

    /// Builds a graph from undirected edges. Loops and duplicates are errors.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidInput(format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            if i == j {
                return Err(Error::InvalidInput(format!("self-loop at node {i}")));
            }
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        for (i, adj) in adjacency.iter_mut().enumerate() {
            adj.sort_unstable();
            if adj.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidInput(format!("duplicate edge at node {i}")));
            }
        }
        Ok(Graph { adjacency })
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    /// Sorted neighbours of `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    /// Each undirected edge once as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for (i, adj) in self.adjacency.iter().enumerate() {
            out.extend(adj.iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        out
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn mean_degree(&self) -> f64 {
        if self.n() == 0 {
            return 0.0;
        }
        2.0 * self.num_edges() as f64 / self.n() as f64
    }

    fn add_edge_unchecked(&mut self, i: usize, j: usize) {
        self.adjacency[i].push(j);
        self.adjacency[j].push(i);
    }

    fn sort_adjacency(&mut self) {
        for adj in &mut self.adjacency {
            adj.sort_unstable();
        }
    }

    /// Edge-list text: `n=<n>` then one `i j` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("n={}\n", self.n());
        for (i, j) in self.edges() {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }

    /// Parses the edge-list format. Blank lines and `#` comments are skipped.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("graph file is empty".into()))?;
        let n = header
            .strip_prefix("n=")
            .and_then(|v| v.trim().parse::<usize>().ok())
            .ok_or_else(|| Error::InvalidInput(format!("expected header `n=<n>`, got `{header}`")))?;
        let mut edges = Vec::new();
        for (lineno, line) in lines {
            let mut parts = line.split_whitespace();
            let parse = |p: Option<&str>| p.and_then(|v| v.parse::<usize>().ok());
            match (parse(parts.next()), parse(parts.next()), parts.next()) {
                (Some(i), Some(j), None) => edges.push((i, j)),
                _ => return Err(Error::InvalidInput(format!("line {lineno}: expected `i j`, got `{line}`"))),
            }
        }
        Graph::from_edges(n, &edges)
    }
}

/// G(n, p) with `p = lambda / (n - 1)`, so the expected degree is `lambda`.
pub fn erdos_renyi<R: Rng + ?Sized>(n: usize, lambda: f64, rng: &mut R) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("Erdős–Rényi graph needs n >= 2, got {n}")));
    }
    if !(0.0..=(n - 1) as f64).contains(&lambda) {
        return Err(Error::InvalidInput(format!("lambda = {lambda} outside [0, {}]", n - 1)));
    }
    let p = lambda / (n - 1) as f64;
    let mut g = Graph::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                g.add_edge_unchecked(i, j);
            }
        }
    }
    g.sort_adjacency();
    Ok(g)
}

/// Size of the Erdős–Rényi seed graph in [`barabasi_albert`].
pub const BA_SEED_NODES: usize = 20;
/// Expected degree of the seed graph.
pub const BA_SEED_LAMBDA: f64 = 1.0;
/// Attachment weight of a node is `degree + BA_EPSILON * max(1, mean degree)`.
pub const BA_EPSILON: f64 = 1e-9;

/// Preferential attachment grown from an ER(20, 1) seed.
///
/// Each new node picks `m_attach` distinct existing targets by sequential
/// weighted draws without replacement. Weights are degrees plus a tiny
/// floor so isolated seed nodes stay reachable, and they are refreshed only
/// after all of the new node's edges are placed.
pub fn barabasi_albert<R: Rng + ?Sized>(n: usize, m_attach: usize, rng: &mut R) -> Result<Graph> {
    if n <= BA_SEED_NODES {
        return Err(Error::InvalidInput(format!("Barabási–Albert graph needs n >= {}, got {n}", BA_SEED_NODES + 1)));
    }
    if !(1..=BA_SEED_NODES).contains(&m_attach) {
        return Err(Error::InvalidInput(format!("m_attach must be in 1..={BA_SEED_NODES}, got {m_attach}")));
    }
    let seed = erdos_renyi(BA_SEED_NODES, BA_SEED_LAMBDA, rng)?;
    let mut g = Graph::empty(n);
    for (i, j) in seed.edges() {
        g.add_edge_unchecked(i, j);
    }

    let mut weights: Vec<f64> = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(m_attach);
    for new in BA_SEED_NODES..n {
        let total_degree: usize = (0..new).map(|i| g.degree(i)).sum();
        let eps = BA_EPSILON * (total_degree as f64 / new as f64).max(1.0);
        weights.clear();
        weights.extend((0..new).map(|i| g.degree(i) as f64 + eps));
        let mut mass: f64 = weights.iter().sum();

        targets.clear();
        for _ in 0..m_attach {
            let pick = weighted_index(&weights, mass, rng);
            mass -= weights[pick];
            weights[pick] = 0.0;
            targets.push(pick);
        }
        for &t in &targets {
            g.add_edge_unchecked(new, t);
        }
    }
    g.sort_adjacency();
    Ok(g)
}

fn weighted_index<R: Rng + ?Sized>(weights: &[f64], mass: f64, rng: &mut R) -> usize {
    let u = rng.random::<f64>() * mass;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    // rounding left u at the very top of the range
    last
}

/// Dense hop-distance matrix; unreachable pairs hold [`DistanceMatrix::INFINITE`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<u32>,
}

impl DistanceMatrix {
    pub const INFINITE: u32 = u32::MAX;

    pub fn from_dense(n: usize, d: Vec<u32>) -> Result<Self> {
        if d.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: d.len() });
        }
        Ok(DistanceMatrix { n, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.d[i * self.n + j]
    }

    /// `None` for unreachable pairs.
    pub fn distance(&self, i: usize, j: usize) -> Option<u32> {
        match self.get(i, j) {
            Self::INFINITE => None,
            d => Some(d),
        }
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.d[i * self.n..(i + 1) * self.n]
    }
}

/// BFS from every node, sources in parallel.
pub fn all_pairs_distances(g: &Graph) -> DistanceMatrix {
    let n = g.n();
    let mut d = vec![DistanceMatrix::INFINITE; n * n];
    if n > 0 {
        d.par_chunks_mut(n).enumerate().for_each_init(
            || VecDeque::with_capacity(n),
            |queue, (src, row)| bfs(g, src, row, queue),
        );
    }
    DistanceMatrix { n, d }
}

fn bfs(g: &Graph, src: usize, row: &mut [u32], queue: &mut VecDeque<usize>) {
    queue.clear();
    row[src] = 0;
    queue.push_back(src);
    while let Some(u) = queue.pop_front() {
        let next = row[u] + 1;
        for &v in g.neighbors(u) {
            if row[v] == DistanceMatrix::INFINITE {
                row[v] = next;
                queue.push_back(v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::permute::RngStream;
    use proptest::prelude::*;

    fn assert_simple(g: &Graph) {
        for i in 0..g.n() {
            let adj = g.neighbors(i);
            assert!(adj.windows(2).all(|w| w[0] < w[1]));
            assert!(!adj.contains(&i));
            for &j in adj {
                assert!(g.has_edge(j, i));
            }
        }
    }

    fn floyd_warshall(g: &Graph) -> Vec<Option<u32>> {
        let n = g.n();
        let mut d = vec![None; n * n];
        for i in 0..n {
            d[i * n + i] = Some(0);
            for &j in g.neighbors(i) {
                d[i * n + j] = Some(1);
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if let (Some(a), Some(b)) = (d[i * n + k], d[k * n + j]) {
                        if d[i * n + j].map_or(true, |c| a + b < c) {
                            d[i * n + j] = Some(a + b);
                        }
                    }
                }
            }
        }
        d
    }

    #[test]
    fn er_extremes() {
        let mut rng = RngStream::new(1, 0);
        assert_eq!(erdos_renyi(10, 0.0, &mut rng).unwrap().num_edges(), 0);
        assert_eq!(erdos_renyi(10, 9.0, &mut rng).unwrap().num_edges(), 45);
        assert!(erdos_renyi(10, 9.5, &mut rng).is_err());
        assert!(erdos_renyi(10, -0.1, &mut rng).is_err());
        assert!(erdos_renyi(1, 0.0, &mut rng).is_err());
    }

    #[test]
    fn er_mean_degree() {
        let mut total = 0.0;
        for rep in 0..100 {
            let g = erdos_renyi(1000, 3.0, &mut RngStream::new(7, rep)).unwrap();
            assert_simple(&g);
            total += g.mean_degree();
        }
        assert!((total / 100.0 - 3.0).abs() < 0.2);
    }

    #[test]
    fn er_edge_count_matches_binomial() {
        let (n, lambda, reps) = (60usize, 2.0, 400u64);
        let pairs = (n * (n - 1) / 2) as f64;
        let p = lambda / (n - 1) as f64;
        let mean: f64 = (0..reps)
            .map(|rep| erdos_renyi(n, lambda, &mut RngStream::new(3, rep)).unwrap().num_edges() as f64)
            .sum::<f64>()
            / reps as f64;
        let se = (pairs * p * (1.0 - p) / reps as f64).sqrt();
        assert!((mean - pairs * p).abs() < 4.0 * se, "mean {mean} vs {}", pairs * p);
    }

    #[test]
    fn ba_edge_accounting() {
        let mut rng = RngStream::new(11, 0);
        let seed_edges = {
            let mut probe = RngStream::new(11, 0);
            erdos_renyi(BA_SEED_NODES, BA_SEED_LAMBDA, &mut probe).unwrap().num_edges()
        };
        let g = barabasi_albert(21, 1, &mut rng).unwrap();
        assert_eq!(g.num_edges(), seed_edges + 1);
        assert_eq!(g.degree(20), 1);

        let seed_edges = erdos_renyi(BA_SEED_NODES, BA_SEED_LAMBDA, &mut RngStream::new(12, 0)).unwrap().num_edges();
        let g = barabasi_albert(3000, 2, &mut RngStream::new(12, 0)).unwrap();
        assert_simple(&g);
        assert_eq!(g.n(), 3000);
        assert_eq!(g.num_edges(), seed_edges + 2 * 2980);
    }

    #[test]
    fn ba_parameter_checks() {
        let mut rng = RngStream::new(1, 0);
        assert!(barabasi_albert(20, 1, &mut rng).is_err());
        assert!(barabasi_albert(100, 0, &mut rng).is_err());
        assert!(barabasi_albert(100, 21, &mut rng).is_err());
        let g = barabasi_albert(100, 20, &mut rng).unwrap();
        assert_simple(&g);
        assert!((BA_SEED_NODES..100).all(|i| g.degree(i) >= 20));
    }

    fn percentile_99(g: &Graph) -> usize {
        let mut deg: Vec<usize> = (0..g.n()).map(|i| g.degree(i)).collect();
        deg.sort_unstable();
        deg[(0.99 * (deg.len() - 1) as f64).round() as usize]
    }

    #[test]
    fn ba_tail_heavier_than_er() {
        let (mut ba, mut er) = (0.0, 0.0);
        for rep in 0..50 {
            let g = barabasi_albert(3000, 1, &mut RngStream::new(21, rep)).unwrap();
            let mean = g.mean_degree();
            ba += percentile_99(&g) as f64;
            er += percentile_99(&erdos_renyi(3000, mean, &mut RngStream::new(22, rep)).unwrap()) as f64;
        }
        assert!(ba > er, "BA {ba} vs ER {er}");
    }

    #[test]
    fn weighted_draw_reaches_isolated_nodes() {
        let mut rng = RngStream::new(0, 0);
        let weights = [0.0, 1e-9, 0.0];
        for _ in 0..100 {
            assert_eq!(weighted_index(&weights, 1e-9, &mut rng), 1);
        }
    }

    #[test]
    fn distance_examples() {
        let path = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(all_pairs_distances(&path).distance(0, 2), Some(2));
        let split = Graph::empty(2);
        let d = all_pairs_distances(&split);
        assert_eq!(d.distance(0, 1), None);
        assert_eq!(d.get(0, 1), DistanceMatrix::INFINITE);
    }

    #[test]
    fn distances_match_floyd_warshall() {
        let g = Graph::from_edges(8, &[(0, 1), (1, 2), (2, 3), (3, 0), (2, 4), (4, 5), (6, 7)]).unwrap();
        let d = all_pairs_distances(&g);
        let fw = floyd_warshall(&g);
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(d.distance(i, j), fw[i * 8 + j]);
            }
        }
    }

    #[test]
    fn degree_examples() {
        assert_eq!(Graph::empty(5).max_degree(), 0);
        let star = Graph::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        assert_eq!(star.max_degree(), 4);
        let g = erdos_renyi(1000, 5.0, &mut RngStream::new(2, 0)).unwrap();
        assert!(g.max_degree() as f64 >= g.mean_degree());
    }

    #[test]
    fn bad_edges_rejected() {
        assert!(Graph::from_edges(3, &[(0, 0)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 1), (1, 0)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 3)]).is_err());
    }

    #[test]
    fn edge_list_round_trip() {
        let g = erdos_renyi(30, 2.0, &mut RngStream::new(5, 0)).unwrap();
        let text = g.to_edge_list();
        assert!(text.starts_with("n=30\n"));
        assert_eq!(Graph::parse_edge_list(&text).unwrap(), g);
        assert!(Graph::parse_edge_list("3\n0 1\n").is_err());
        assert!(Graph::parse_edge_list("n=3\n0 1 2\n").is_err());
        assert!(Graph::parse_edge_list("n=3\n0 x\n").is_err());
        assert!(Graph::parse_edge_list("").is_err());
        assert_eq!(Graph::parse_edge_list("# comment\nn=2\n\n0 1\n").unwrap().num_edges(), 1);
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (1usize..12).prop_flat_map(|n| {
            proptest::collection::vec((0..n, 0..n), 0..30).prop_map(move |pairs| {
                let mut edges: Vec<(usize, usize)> = pairs
                    .into_iter()
                    .filter(|(i, j)| i != j)
                    .map(|(i, j)| (i.min(j), i.max(j)))
                    .collect();
                edges.sort_unstable();
                edges.dedup();
                Graph::from_edges(n, &edges).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn bfs_metric_properties(g in arb_graph()) {
            let d = all_pairs_distances(&g);
            let fw = floyd_warshall(&g);
            let n = g.n();
            for i in 0..n {
                prop_assert_eq!(d.get(i, i), 0);
                for j in 0..n {
                    prop_assert_eq!(d.get(i, j), d.get(j, i));
                    prop_assert_eq!(d.distance(i, j), fw[i * n + j]);
                    for k in 0..n {
                        if let (Some(a), Some(b), Some(c)) = (d.distance(i, j), d.distance(j, k), d.distance(i, k)) {
                            prop_assert!(c <= a + b);
                        }
                    }
                }
            }
        }

        #[test]
        fn generators_are_simple(seed in any::<u64>(), lambda in 0.0f64..4.0, m in 1usize..4) {
            let er = erdos_renyi(40, lambda, &mut RngStream::new(seed, 0)).unwrap();
            assert_simple(&er);
            let ba = barabasi_albert(45, m, &mut RngStream::new(seed, 1)).unwrap();
            assert_simple(&ba);
            prop_assert_eq!(ba.num_edges(), erdos_renyi(BA_SEED_NODES, BA_SEED_LAMBDA, &mut RngStream::new(seed, 1)).unwrap().num_edges() + 25 * m);
        }
    }
}
