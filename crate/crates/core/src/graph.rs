//! Agent network topology.
//!
//! Links are symmetric: every undirected link `{i, j}` is stored as the two
//! directed edges `(i, j)` and `(j, i)`, and each directed edge carries its own
//! dual variable. Edge ids are dense and ordered lexicographically by
//! `(source, target)`.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct NetworkGraph {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    edge_ids: HashMap<(usize, usize), usize>,
    diameter: usize,
}

impl NetworkGraph {
    /// Builds a validated graph from an undirected or directed edge list.
    ///
    /// Both orientations of every listed pair are inserted and duplicates are
    /// merged. Fails on self-loops, out-of-range endpoints and disconnected
    /// topologies.
    pub fn new(n_nodes: usize, edge_list: &[(usize, usize)]) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut directed = BTreeSet::new();
        for &(i, j) in edge_list {
            if i >= n_nodes || j >= n_nodes {
                return Err(Error::NodeOutOfRange(i, j, n_nodes));
            }
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            directed.insert((i, j));
            directed.insert((j, i));
        }
        let edges: Vec<(usize, usize)> = directed.into_iter().collect();
        let mut adjacency = vec![Vec::new(); n_nodes];
        let mut edge_ids = HashMap::with_capacity(edges.len());
        for (id, &(i, j)) in edges.iter().enumerate() {
            adjacency[i].push(j);
            edge_ids.insert((i, j), id);
        }

        let mut diameter = 0;
        for source in 0..n_nodes {
            let dist = bfs(&adjacency, source);
            if let Some(unreachable) = dist.iter().position(Option::is_none) {
                return Err(Error::DisconnectedGraph(unreachable));
            }
            let ecc = dist.iter().flatten().copied().max().unwrap_or(0);
            diameter = diameter.max(ecc);
        }

        Ok(Self {
            n_nodes,
            edges,
            adjacency,
            edge_ids,
            diameter,
        })
    }

    /// Path `0 - 1 - ... - (n-1)`.
    pub fn path(n_nodes: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n_nodes).map(|i| (i - 1, i)).collect();
        Self::new(n_nodes, &edges)
    }

    /// Cycle over `n_nodes` nodes (a path for `n_nodes < 3`).
    pub fn ring(n_nodes: usize) -> Result<Self> {
        let mut edges: Vec<_> = (1..n_nodes).map(|i| (i - 1, i)).collect();
        if n_nodes >= 3 {
            edges.push((n_nodes - 1, 0));
        }
        Self::new(n_nodes, &edges)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Number of directed edges `M`.
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> (usize, usize) {
        self.edges[id]
    }

    pub fn edge_id(&self, i: usize, j: usize) -> Option<usize> {
        self.edge_ids.get(&(i, j)).copied()
    }

    /// Sorted open neighborhood `n_i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    /// Sorted closed neighborhood `n_i ∪ {i}`.
    pub fn closed_neighborhood(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.adjacency[i].len() + 1);
        let mut inserted = false;
        for &j in &self.adjacency[i] {
            if !inserted && j > i {
                out.push(i);
                inserted = true;
            }
            out.push(j);
        }
        if !inserted {
            out.push(i);
        }
        out
    }

    pub fn diameter(&self) -> usize {
        self.diameter
    }
}

fn bfs(adjacency: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adjacency.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap_or(0);
        for &v in &adjacency[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}
