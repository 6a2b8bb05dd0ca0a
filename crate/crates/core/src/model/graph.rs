use std::collections::{BTreeSet, VecDeque};

use nalgebra::DMatrix;

use crate::error::{DfmError, Result};

/// Undirected communication graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    node_count: usize,
    edges: BTreeSet<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph; edges are unordered and stored as `(min, max)`.
    /// Repeated edges collapse into one.
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Graph {
            node_count,
            edges: BTreeSet::new(),
            adjacency: vec![Vec::new(); node_count],
        };
        for (i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    pub fn empty(node_count: usize) -> Self {
        Graph::new(node_count, []).expect("no edges")
    }

    /// Path 0 - 1 - ... - (n-1).
    pub fn line(node_count: usize) -> Self {
        Graph::new(node_count, (1..node_count).map(|i| (i - 1, i))).expect("valid line")
    }

    pub fn complete(node_count: usize) -> Self {
        let edges = (0..node_count).flat_map(|i| ((i + 1)..node_count).map(move |j| (i, j)));
        Graph::new(node_count, edges).expect("valid complete graph")
    }

    pub fn star(node_count: usize, center: usize) -> Self {
        Graph::new(node_count, (0..node_count).filter(|&j| j != center).map(|j| (center, j)))
            .expect("valid star")
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        if i == j {
            return Err(DfmError::InvalidProblem(format!("self-loop at node {i}")));
        }
        if i >= self.node_count || j >= self.node_count {
            return Err(DfmError::InvalidProblem(format!(
                "edge ({i}, {j}) out of range for {} nodes",
                self.node_count
            )));
        }
        let e = (i.min(j), i.max(j));
        if self.edges.insert(e) {
            let (a, b) = e;
            insert_sorted(&mut self.adjacency[a], b);
            insert_sorted(&mut self.adjacency[b], a);
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    /// Neighbor set `N_i`, sorted.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    /// Closed neighborhood `N_i ∪ {i}`, sorted.
    pub fn closed_neighborhood(&self, i: usize) -> Vec<usize> {
        let mut v = self.adjacency[i].clone();
        insert_sorted(&mut v, i);
        v
    }

    pub fn closed_degree(&self, i: usize) -> usize {
        self.adjacency[i].len() + 1
    }

    pub fn is_connected(&self) -> bool {
        if self.node_count == 0 {
            return true;
        }
        let mut seen = vec![false; self.node_count];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.node_count
    }

    /// Combinatorial Laplacian `D - Adj`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.node_count;
        let mut l = DMatrix::zeros(n, n);
        for &(i, j) in &self.edges {
            l[(i, j)] -= 1.0;
            l[(j, i)] -= 1.0;
            l[(i, i)] += 1.0;
            l[(j, j)] += 1.0;
        }
        l
    }
}

fn insert_sorted(v: &mut Vec<usize>, x: usize) {
    if let Err(pos) = v.binary_search(&x) {
        v.insert(pos, x);
    }
}
