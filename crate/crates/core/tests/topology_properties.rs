use std::collections::{BTreeSet, VecDeque};

use lra_core::lattice::rect_sites;
use lra_core::{chain_sites, BoundaryDistance, ConnectivityGraph, Coupling, Site, TopologyError};
use proptest::prelude::*;

const SHELL: i64 = 100;

/// Interior vertices `0..n`, shell vertices `100, 101`; edges by index pairs.
#[derive(Clone, Debug)]
struct RandomGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    shell_edges: Vec<(usize, usize)>,
}

impl RandomGraph {
    fn graph(&self) -> ConnectivityGraph {
        let interior = (0..self.n as i64).map(Site::D1);
        let shell = [Site::D1(SHELL), Site::D1(SHELL + 1)];
        let edges = self
            .edges
            .iter()
            .map(|&(a, b)| (Site::D1(a as i64), Site::D1(b as i64)))
            .chain(
                self.shell_edges
                    .iter()
                    .map(|&(s, b)| (Site::D1(SHELL + s as i64), Site::D1(b as i64))),
            );
        ConnectivityGraph::from_edges(interior, shell, edges).unwrap()
    }

    /// `reach[i][j]`: a path of at least one edge from `i` to `j`.
    fn closure(&self) -> Vec<Vec<bool>> {
        let n = self.n;
        let mut reach = vec![vec![false; n]; n];
        for &(a, b) in &self.edges {
            reach[a][b] = true;
        }
        for k in 0..n {
            for i in 0..n {
                if reach[i][k] {
                    for j in 0..n {
                        if reach[k][j] {
                            reach[i][j] = true;
                        }
                    }
                }
            }
        }
        reach
    }

    fn has_cycle(&self) -> bool {
        let reach = self.closure();
        (0..self.n).any(|i| reach[i][i])
    }

    /// Breadth-first distance from the shell.
    fn distances(&self) -> Vec<Option<u64>> {
        let mut dist = vec![None; self.n];
        let mut queue = VecDeque::new();
        for &(_, b) in &self.shell_edges {
            if dist[b].is_none() {
                dist[b] = Some(1);
                queue.push_back(b);
            }
        }
        while let Some(a) = queue.pop_front() {
            for &(x, y) in &self.edges {
                if x == a && dist[y].is_none() {
                    dist[y] = Some(dist[a].unwrap() + 1);
                    queue.push_back(y);
                }
            }
        }
        dist
    }
}

fn random_graph() -> impl Strategy<Value = RandomGraph> {
    (1usize..=12, prop::sample::select(vec![0.1f64, 0.3])).prop_flat_map(|(n, p)| {
        let pairs = n * n;
        (
            prop::collection::vec(prop::bool::weighted(p), pairs),
            prop::collection::vec(prop::bool::weighted(p), 2 * n),
        )
            .prop_map(move |(bits, shell_bits)| RandomGraph {
                n,
                edges: (0..pairs)
                    .filter(|&k| bits[k] && k / n != k % n)
                    .map(|k| (k / n, k % n))
                    .collect(),
                shell_edges: (0..2 * n)
                    .filter(|&k| shell_bits[k])
                    .map(|k| (k / n, k % n))
                    .collect(),
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn enumeration_exists_exactly_for_acyclic_graphs(g in random_graph()) {
        let graph = g.graph();
        let cyclic = g.has_cycle();
        prop_assert_eq!(graph.detect_cycle().is_some(), cyclic);
        match graph.enumerate() {
            Ok(e) => {
                prop_assert!(!cyclic);
                prop_assert!(graph.validate_enumeration(&e));
                // direct scan: a permutation of 1..=n, increasing along every interior edge
                let labels: BTreeSet<u64> = e.labels.values().copied().collect();
                prop_assert_eq!(labels, (1..=g.n as u64).collect::<BTreeSet<_>>());
                for &(a, b) in &g.edges {
                    prop_assert!(e.labels[&Site::D1(a as i64)] < e.labels[&Site::D1(b as i64)]);
                }
            }
            Err(TopologyError::CycleDetected(witness)) => {
                prop_assert!(cyclic);
                // consecutive witness vertices are joined by edges, closing the loop
                for k in 0..witness.len() {
                    let (a, b) = (witness[k], witness[(k + 1) % witness.len()]);
                    prop_assert!(graph.edges().contains(&(a, b)), "{a} -> {b} is not an edge");
                }
            }
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn upstream_sets_match_reachability(g in random_graph()) {
        prop_assume!(!g.has_cycle());
        let graph = g.graph();
        let reach = g.closure();
        for target in 0..g.n {
            let expected: BTreeSet<Site> = (0..g.n).filter(|&i| reach[i][target]).map(|i| Site::D1(i as i64)).collect();
            prop_assert_eq!(graph.upstream_set(&Site::D1(target as i64)).unwrap(), expected);
        }
    }

    #[test]
    fn boundary_distance_matches_search(g in random_graph()) {
        let graph = g.graph();
        let oracle = g.distances();
        let l = graph.boundary_distances();
        for (k, d) in oracle.iter().enumerate() {
            let got = l[&Site::D1(k as i64)];
            match d {
                Some(d) => prop_assert_eq!(got, BoundaryDistance::Finite(*d)),
                None => prop_assert_eq!(got, BoundaryDistance::Infinite),
            }
        }
        for &(a, b) in &g.edges {
            if let (Some(la), Some(lb)) = (l[&Site::D1(a as i64)].finite(), l[&Site::D1(b as i64)].finite()) {
                prop_assert!(lb <= la + 1);
            }
        }
        for &(_, b) in &g.shell_edges {
            prop_assert_eq!(l[&Site::D1(b as i64)], BoundaryDistance::Finite(1));
        }
    }
}

/// `K` counts in- and out-edges. The couplings of the shipped experiments stay
/// within 4; two-dimensional nearest-neighbour diffusion (cyclic, never
/// shipped) has 4 + 4.
#[test]
fn vertex_degree_bound() {
    let within: Vec<Coupling<f64>> = vec![
        Coupling::diffusive(&chain_sites(8), 0.3).unwrap(),
        Coupling::unidirectional(&chain_sites(8), 0.7).unwrap(),
        Coupling::unidirectional_k(&chain_sites(16), &[0.2, 0.4, 0.4]).unwrap(),
        Coupling::toom_ne(&rect_sites(4, 4), [0.2, 0.4, 0.4]).unwrap(),
    ];
    let degree = |c: &Coupling<f64>| {
        ConnectivityGraph::build(c, &c.natural_box().unwrap())
            .unwrap()
            .max_degree()
    };
    for c in &within {
        assert!(degree(c) <= 4, "degree {}", degree(c));
    }
    assert_eq!(
        degree(&Coupling::diffusive(&rect_sites(4, 4), 0.1).unwrap()),
        8
    );
}
