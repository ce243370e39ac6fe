use mgcert::netgraph::{build_coupling, build_incidence, inf_norm, GraphError, NetworkGraph};
use proptest::prelude::*;

fn ring(n: usize) -> NetworkGraph {
    NetworkGraph::new(n, (0..n).map(|i| (i, (i + 1) % n)).collect()).unwrap()
}

/// Random connected graph: a spanning tree plus a few extra edges.
fn connected_graph() -> impl Strategy<Value = NetworkGraph> {
    (2usize..9)
        .prop_flat_map(|n| {
            let parents: Vec<_> = (1..n).map(|i| 0..i).collect();
            let extra = proptest::collection::vec((0..n, 0..n), 0..4);
            (
                Just(n),
                parents,
                extra,
                proptest::collection::vec(any::<bool>(), n + 4),
            )
        })
        .prop_map(|(n, parents, extra, flip)| {
            let mut edges: Vec<(usize, usize)> = parents
                .iter()
                .enumerate()
                .map(|(i, &p)| (p, i + 1))
                .collect();
            edges.extend(extra.into_iter().filter(|(a, b)| a != b));
            for (e, f) in edges.iter_mut().zip(flip) {
                if f {
                    *e = (e.1, e.0);
                }
            }
            NetworkGraph::new(n, edges).unwrap()
        })
}

#[test]
fn ring_incidence_columns() {
    let inc = build_incidence(&ring(4));
    for k in 0..4 {
        let col: Vec<i8> = (0..4).map(|j| inc.get(j, k)).collect();
        assert_eq!(col.iter().map(|&x| x as i32).sum::<i32>(), 0);
        assert_eq!(col.iter().filter(|&&x| x != 0).count(), 2);
    }
    assert_eq!(inc.get(0, 0), 1);
    assert_eq!(inc.get(1, 0), -1);
    assert_eq!(inc.neighbors(0), &[0, 3]);
}

#[test]
fn flipping_negates_one_column() {
    let g = ring(5);
    let a = build_incidence(&g);
    let b = build_incidence(&g.flipped(2));
    for j in 0..5 {
        for k in 0..5 {
            let want = if k == 2 { -a.get(j, k) } else { a.get(j, k) };
            assert_eq!(b.get(j, k), want);
        }
    }
}

#[test]
fn rejects_bad_graphs() {
    assert_eq!(NetworkGraph::new(0, vec![]), Err(GraphError::Empty));
    assert_eq!(
        NetworkGraph::new(3, vec![(0, 1), (1, 1)]),
        Err(GraphError::SelfLoop { edge: 2, bus: 2 })
    );
    assert_eq!(
        NetworkGraph::new(3, vec![(0, 1)]),
        Err(GraphError::DisconnectedGraph { unreached: 3 })
    );
    assert!(matches!(
        NetworkGraph::from_one_based(2, &[(0, 1)]),
        Err(GraphError::BadEdge {
            edge: 1,
            bus: 0,
            ..
        })
    ));
    assert!(matches!(
        NetworkGraph::new(2, vec![(0, 2)]),
        Err(GraphError::BadEdge { bus: 3, .. })
    ));
}

#[test]
fn one_based_matches_zero_based() {
    let a = NetworkGraph::from_one_based(3, &[(1, 2), (3, 2)]).unwrap();
    let b = NetworkGraph::new(3, vec![(0, 1), (2, 1)]).unwrap();
    assert_eq!(a, b);
}

#[test]
fn two_bus_gram_row_sum_is_two() {
    let g = NetworkGraph::new(2, vec![(0, 1)]).unwrap();
    let c = build_coupling(&build_incidence(&g));
    assert_eq!(c.gram.nrows(), 2);
    assert_eq!(inf_norm(&c.gram), 2.0);
    assert_eq!(
        c.stacked.transpose() * &c.stacked,
        nalgebra::DMatrix::from_element(1, 1, 2.0)
    );
}

proptest! {
    #[test]
    fn incidence_and_coupling_invariants(g in connected_graph()) {
        let inc = build_incidence(&g);
        let a = inc.to_f64();
        for k in 0..g.n_edges() {
            let col = a.column(k);
            prop_assert_eq!(col.sum(), 0.0);
            prop_assert_eq!(col.iter().filter(|x| **x != 0.0).count(), 2);
        }
        // each edge is selected by exactly its two endpoints
        let c = build_coupling(&inc);
        let mtm = c.stacked.transpose() * &c.stacked;
        let two = nalgebra::DMatrix::<f64>::identity(g.n_edges(), g.n_edges()) * 2.0;
        prop_assert_eq!(mtm, two);
        let ev = c.gram.clone().symmetric_eigen().eigenvalues;
        prop_assert!(ev.min() >= -1e-12);
        prop_assert!(ev.max() <= 2.0 + 1e-12);
        for j in 0..g.n_buses() {
            let deg = inc.neighbors(j).len();
            prop_assert_eq!(a.row(j).iter().filter(|x| **x != 0.0).count(), deg);
            prop_assert_eq!(inc.row(j).transpose(), a.row(j).into_owned());
        }
    }

    #[test]
    fn flipping_twice_is_identity(g in connected_graph(), k in 0usize..1000) {
        let k = k % g.n_edges();
        prop_assert_eq!(g.flipped(k).flipped(k), g);
    }
}
