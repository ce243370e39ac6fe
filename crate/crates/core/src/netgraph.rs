//! Network topology: oriented edges, the node-edge incidence matrix and the
//! selector/gram operators used by the bus-plus-lines decomposition.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("edge {edge} has endpoint {bus} outside 1..={n_buses}")]
    BadEdge {
        edge: usize,
        bus: usize,
        n_buses: usize,
    },
    #[error("edge {edge} is a self-loop on bus {bus}")]
    SelfLoop { edge: usize, bus: usize },
    #[error("network needs at least one bus")]
    Empty,
    #[error("graph is disconnected: bus {unreached} cannot be reached from bus 1")]
    DisconnectedGraph { unreached: usize },
}

/// Buses and directed edges. Endpoints are stored zero-based; the JSON
/// format and error messages use one-based indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkGraph {
    n_buses: usize,
    edges: Vec<(usize, usize)>,
}

impl NetworkGraph {
    /// Edges are `(tail, head)` pairs of zero-based bus indices.
    pub fn new(n_buses: usize, edges: Vec<(usize, usize)>) -> Result<Self, GraphError> {
        if n_buses == 0 {
            return Err(GraphError::Empty);
        }
        for (k, &(t, h)) in edges.iter().enumerate() {
            for b in [t, h] {
                if b >= n_buses {
                    return Err(GraphError::BadEdge {
                        edge: k + 1,
                        bus: b + 1,
                        n_buses,
                    });
                }
            }
            if t == h {
                return Err(GraphError::SelfLoop {
                    edge: k + 1,
                    bus: t + 1,
                });
            }
        }
        let g = NetworkGraph { n_buses, edges };
        g.check_connected()?;
        Ok(g)
    }

    /// Same as [`NetworkGraph::new`] but with one-based endpoints.
    pub fn from_one_based(n_buses: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut zb = Vec::with_capacity(edges.len());
        for (k, &(t, h)) in edges.iter().enumerate() {
            for b in [t, h] {
                if b == 0 || b > n_buses {
                    return Err(GraphError::BadEdge {
                        edge: k + 1,
                        bus: b,
                        n_buses,
                    });
                }
            }
            zb.push((t - 1, h - 1));
        }
        Self::new(n_buses, zb)
    }

    pub fn n_buses(&self) -> usize {
        self.n_buses
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Copy with edge `k` reversed.
    pub fn flipped(&self, k: usize) -> NetworkGraph {
        let mut g = self.clone();
        let (t, h) = g.edges[k];
        g.edges[k] = (h, t);
        g
    }

    fn check_connected(&self) -> Result<(), GraphError> {
        let mut adj = vec![Vec::new(); self.n_buses];
        for &(t, h) in &self.edges {
            adj[t].push(h);
            adj[h].push(t);
        }
        let mut seen = vec![false; self.n_buses];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(b) => Err(GraphError::DisconnectedGraph { unreached: b + 1 }),
            None => Ok(()),
        }
    }
}

/// Node-edge incidence: +1 where the edge leaves the bus, -1 where it enters.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix {
    entries: DMatrix<i8>,
    neighbors: Vec<Vec<usize>>,
}

pub fn build_incidence(graph: &NetworkGraph) -> IncidenceMatrix {
    let (nb, ne) = (graph.n_buses(), graph.n_edges());
    let mut entries = DMatrix::<i8>::zeros(nb, ne);
    for (k, &(t, h)) in graph.edges().iter().enumerate() {
        entries[(t, k)] = 1;
        entries[(h, k)] = -1;
    }
    let neighbors = (0..nb)
        .map(|j| (0..ne).filter(|&k| entries[(j, k)] != 0).collect())
        .collect();
    IncidenceMatrix { entries, neighbors }
}

impl IncidenceMatrix {
    pub fn n_buses(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_edges(&self) -> usize {
        self.entries.ncols()
    }

    pub fn get(&self, j: usize, k: usize) -> i8 {
        self.entries[(j, k)]
    }

    pub fn entries(&self) -> &DMatrix<i8> {
        &self.entries
    }

    /// E_j: edges touching bus `j`, in increasing order.
    pub fn neighbors(&self, j: usize) -> &[usize] {
        &self.neighbors[j]
    }

    /// Row `j` as a real vector (a^r_j).
    pub fn row(&self, j: usize) -> DVector<f64> {
        DVector::from_iterator(
            self.n_edges(),
            (0..self.n_edges()).map(|k| self.get(j, k) as f64),
        )
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        self.entries.map(|e| e as f64)
    }
}

/// M_j selectors, their stack M and the gram A = M M*.
#[derive(Debug, Clone)]
pub struct CouplingOperators {
    pub selectors: Vec<DMatrix<f64>>,
    pub stacked: DMatrix<f64>,
    pub gram: DMatrix<f64>,
}

pub fn build_coupling(inc: &IncidenceMatrix) -> CouplingOperators {
    let (nb, ne) = (inc.n_buses(), inc.n_edges());
    let selectors: Vec<DMatrix<f64>> = (0..nb)
        .map(|j| {
            DMatrix::from_diagonal(&DVector::from_iterator(
                ne,
                (0..ne).map(|k| if inc.get(j, k) != 0 { 1.0 } else { 0.0 }),
            ))
        })
        .collect();
    let mut stacked = DMatrix::zeros(nb * ne, ne);
    for (j, m) in selectors.iter().enumerate() {
        stacked.view_mut((j * ne, 0), (ne, ne)).copy_from(m);
    }
    let gram = &stacked * stacked.transpose();
    CouplingOperators {
        selectors,
        stacked,
        gram,
    }
}

/// Induced infinity norm (max absolute row sum).
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
