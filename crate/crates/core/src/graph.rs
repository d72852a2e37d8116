//! Undirected simple graphs and their symmetric normalized adjacency.
//!
//! A [`Graph`] stores its edge set as sorted `(u, v)` pairs with `u < v`.
//! Construction deduplicates reversed and repeated pairs and rejects
//! self-loops, so every `Graph` value is a simple graph.
//!
//! The normalized adjacency is `D^{-1/2} A D^{-1/2}`. Isolated nodes get a
//! zero row and column (their `D^{-1/2}` entry is taken to be 0), which
//! makes them contribute an eigenvalue 0.

use std::collections::BTreeSet;

use ndarray::Array2;
use rand::seq::index::sample;
use rand::Rng;
use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Builds a graph on `n` nodes. Reversed and repeated pairs collapse to a
    /// single edge.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::TooFewNodes { min: 1, got: 0 });
        }
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            for index in [u, v] {
                if index >= n {
                    return Err(Error::NodeOutOfRange { index, n });
                }
            }
            if u == v {
                return Err(Error::SelfLoop { line: 0, node: u });
            }
            set.insert((u.min(v), u.max(v)));
        }
        Ok(Graph {
            n,
            edges: set.into_iter().collect(),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Sorted edge list with `u < v` in every pair.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.binary_search(&(u.min(v), u.max(v))).is_ok()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn adjacency_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n, self.n));
        for &(u, v) in &self.edges {
            a[[u, v]] = 1.0;
            a[[v, u]] = 1.0;
        }
        a
    }

    /// Path `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Result<Self> {
        Graph::new(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::TooFewNodes { min: 3, got: n });
        }
        Graph::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    /// Node 0 joined to `leaves` leaf nodes.
    pub fn star(leaves: usize) -> Result<Self> {
        Graph::new(leaves + 1, (1..=leaves).map(|i| (0, i)))
    }

    pub fn complete(n: usize) -> Result<Self> {
        Graph::new(
            n,
            (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))),
        )
    }

    /// G(n, p) random graph.
    pub fn erdos_renyi<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        Graph::new(n, edges)
    }

    /// A cycle with `extra` random chords; connected and free of isolated
    /// nodes for `n >= 3`.
    pub fn ring_with_chords<R: Rng + ?Sized>(n: usize, extra: usize, rng: &mut R) -> Result<Self> {
        let mut edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        let mut added = 0;
        let mut attempts = 0;
        while added < extra && attempts < 50 * (extra + 1) {
            attempts += 1;
            let pair = sample(rng, n, 2);
            let (u, v) = (pair.index(0), pair.index(1));
            let key = (u.min(v), u.max(v));
            if !edges.iter().any(|&(a, b)| (a.min(b), a.max(b)) == key) {
                edges.push(key);
                added += 1;
            }
        }
        Graph::new(n, edges)
    }
}

/// Dense `D^{-1/2} A D^{-1/2}`. Entries are written in symmetric pairs from
/// the same computed value, so the result is exactly symmetric.
pub fn normalized_adjacency(g: &Graph) -> Array2<f64> {
    let scale = inv_sqrt_degrees(g);
    let mut a = Array2::zeros((g.n, g.n));
    for &(u, v) in &g.edges {
        let w = scale[u] * scale[v];
        a[[u, v]] = w;
        a[[v, u]] = w;
    }
    a
}

/// Same matrix as [`normalized_adjacency`] in CSR layout.
pub fn normalized_adjacency_sparse(g: &Graph) -> CsMat<f64> {
    let scale = inv_sqrt_degrees(g);
    let mut tri = TriMat::with_capacity((g.n, g.n), 2 * g.edges.len());
    for &(u, v) in &g.edges {
        let w = scale[u] * scale[v];
        tri.add_triplet(u, v, w);
        tri.add_triplet(v, u, w);
    }
    tri.to_csr()
}

fn inv_sqrt_degrees(g: &Graph) -> Vec<f64> {
    g.degrees()
        .into_iter()
        .map(|d| if d == 0 { 0.0 } else { 1.0 / (d as f64).sqrt() })
        .collect()
}

/// Attaches a mirror copy of the subgraph induced by `h_nodes`.
///
/// Mirror `q_i` of `h_nodes[i]` gets index `j.num_nodes() + i`. It copies
/// every edge `p_i - p_j` inside the subgraph as `q_i - q_j`, and every edge
/// `p_i - r` to a node `r` outside the subgraph as `q_i - r`. Whenever the
/// induced subgraph's adjacency is singular, the result carries an
/// eigenvalue-0 eigenvector supported on the `p_i, q_i` with
/// `u[p_i] = -u[q_i]` (see [`crate::spectral::mirror_kernel_vector`]).
pub fn duplicate_subgraph(j: &Graph, h_nodes: &[usize]) -> Result<Graph> {
    let n = j.n;
    let mut position = vec![None; n];
    for (i, &p) in h_nodes.iter().enumerate() {
        if p >= n {
            return Err(Error::NodeOutOfRange { index: p, n });
        }
        if position[p].is_some() {
            return Err(Error::DuplicateNode(p));
        }
        position[p] = Some(i);
    }
    let mut edges = j.edges.clone();
    for &(u, v) in &j.edges {
        match (position[u], position[v]) {
            (Some(a), Some(b)) => edges.push((n + a, n + b)),
            (Some(a), None) => edges.push((n + a, v)),
            (None, Some(b)) => edges.push((u, n + b)),
            (None, None) => {}
        }
    }
    Graph::new(n + h_nodes.len(), edges)
}
