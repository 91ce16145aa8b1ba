use proptest::prelude::*;

use randsub::dgp::{dependency_graph_mix_covariance, MixingParams, NetworkCovParams, NetworkGaussian};
use randsub::graph::{all_pairs_distances, barabasi_albert, erdos_renyi};
use randsub::{Graph, RngStream};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn edge_list_round_trips(n in 2usize..60, lambda in 0.0f64..4.0, seed in any::<u64>()) {
        let g = erdos_renyi(n, lambda.min((n - 1) as f64), &mut RngStream::new(seed, 1)).unwrap();
        let back = Graph::parse_edge_list(&g.to_edge_list()).unwrap();
        prop_assert_eq!(back.edges(), g.edges());
        prop_assert_eq!(back.n(), g.n());
    }

    #[test]
    fn distances_are_symmetric_metrics(n in 2usize..40, seed in any::<u64>()) {
        let g = barabasi_albert(n.max(21), 2, &mut RngStream::new(seed, 1)).unwrap();
        let d = all_pairs_distances(&g);
        for i in 0..d.n() {
            prop_assert_eq!(d.get(i, i), 0);
            for &j in g.neighbors(i) {
                prop_assert_eq!(d.get(i, j), 1);
            }
            for j in 0..d.n() {
                prop_assert_eq!(d.get(i, j), d.get(j, i));
            }
        }
    }

    #[test]
    fn mixing_covariance_is_unit_diagonal_and_local(n in 3usize..40, seed in any::<u64>(), c in 0.05f64..0.95) {
        let g = erdos_renyi(n, 2.0, &mut RngStream::new(seed, 1)).unwrap();
        let cov = dependency_graph_mix_covariance(&g, MixingParams::new(c).unwrap());
        for i in 0..n {
            prop_assert!((cov.get(i, i) - 1.0).abs() < 1e-12);
            for j in 0..n {
                if i != j && !g.has_edge(i, j) {
                    prop_assert_eq!(cov.get(i, j), 0.0);
                }
            }
        }
    }
}

#[test]
fn network_covariance_on_a_path() {
    let edges: Vec<(usize, usize)> = (0..9).map(|i| (i, i + 1)).collect();
    let g = Graph::from_edges(10, &edges).unwrap();
    let net = NetworkGaussian::new(&all_pairs_distances(&g), NetworkCovParams::new(1.0).unwrap()).unwrap();
    let cov = net.covariance();
    assert_eq!(net.perturbation(), 0.0);
    for i in 0..10 {
        assert!((cov[(i, i)] - 1.0).abs() < 1e-9);
    }
    assert!(cov[(0, 1)] > cov[(0, 2)] && cov[(0, 2)] > cov[(0, 5)]);
    let x = net.sample(&mut RngStream::new(2, 0)).unwrap();
    assert_eq!(x.n(), 10);
}

#[test]
fn malformed_edge_lists_are_rejected() {
    for text in ["0 1\n", "n=3\n0 3\n", "n=3\n1 1\n", "n=3\n0 1\n1 0\n", "n=3\n0 x\n"] {
        assert!(Graph::parse_edge_list(text).is_err(), "{text:?}");
    }
}
