use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::sparse::SparseOperator;

/// An undirected simple graph. Edges are stored once as `(u, v)` with
/// `u < v`, sorted; self-loops and duplicates are dropped on construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(num_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) has an endpoint outside 0..{num_nodes}"
                )));
            }
            if u != v {
                set.insert((u.min(v), u.max(v)));
            }
        }
        Ok(Self {
            num_nodes,
            edges: set.into_iter().collect(),
        })
    }

    /// Graph with `n` nodes and no edges.
    pub fn isolated(n: usize) -> Self {
        Self {
            num_nodes: n,
            edges: Vec::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_nodes];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Component id per node, numbered in order of first appearance.
    pub fn connected_components(&self) -> Vec<usize> {
        let adj = self.adjacency_lists();
        let mut comp = vec![usize::MAX; self.num_nodes];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..self.num_nodes {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = next;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &v in &adj[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn is_connected(&self) -> bool {
        self.num_nodes > 0 && self.connected_components().iter().all(|&c| c == 0)
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.num_nodes {
            return Err(Error::dims("permute", self.num_nodes, perm.len()));
        }
        Self::new(
            self.num_nodes,
            self.edges.iter().map(|&(u, v)| (perm[u], perm[v])),
        )
    }
}

/// Which degree matrix the normalized Laplacian subtracts `Â` from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LaplacianMode {
    /// `L̂ = D̂ − Â` with `D̂ = diag(Â·1)`.
    #[default]
    PaperDegree,
    /// `L̂ = I − Â`; positive semidefinite.
    IdentityDegree,
}

impl LaplacianMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LaplacianMode::PaperDegree => "paper-degree",
            LaplacianMode::IdentityDegree => "identity-degree",
        }
    }
}

impl fmt::Display for LaplacianMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for LaplacianMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-degree" => Ok(LaplacianMode::PaperDegree),
            "identity-degree" => Ok(LaplacianMode::IdentityDegree),
            other => Err(Error::Config(format!(
                "unknown laplacian mode `{other}` (expected paper-degree or identity-degree)"
            ))),
        }
    }
}

/// Symmetric normalized adjacency with self-loops,
/// `Â = D̃^{-1/2} (A + I) D̃^{-1/2}` where `D̃ = diag((A + I)·1)`.
pub fn normalize_sym(graph: &Graph) -> Result<SparseOperator> {
    let n = graph.num_nodes();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let self_loop_degree: Vec<f64> = graph.degrees().iter().map(|&d| (d + 1) as f64).collect();
    // Multiplication commutes exactly, so Â[i][j] and Â[j][i] are bit-equal.
    let weight = |i: usize, j: usize| (self_loop_degree[i] * self_loop_degree[j]).sqrt().recip();
    let mut triplets = Vec::with_capacity(n + 2 * graph.num_edges());
    for i in 0..n {
        triplets.push((i, i, weight(i, i)));
    }
    for &(u, v) in graph.edges() {
        let w = weight(u, v);
        triplets.push((u, v, w));
        triplets.push((v, u, w));
    }
    SparseOperator::from_triplets(n, n, triplets)
}

/// Diagonal operator of the row sums of `op`.
pub fn degree_matrix(op: &SparseOperator) -> Result<SparseOperator> {
    if !op.is_square() {
        return Err(Error::dims("degree_matrix", "square operator", format!("{}x{}", op.rows(), op.cols())));
    }
    Ok(SparseOperator::diagonal(&op.row_sums()))
}

pub fn laplacian(adj: &SparseOperator, mode: LaplacianMode) -> Result<SparseOperator> {
    let degree = match mode {
        LaplacianMode::PaperDegree => degree_matrix(adj)?,
        LaplacianMode::IdentityDegree => {
            if !adj.is_square() {
                return Err(Error::dims("laplacian", "square operator", format!("{}x{}", adj.rows(), adj.cols())));
            }
            SparseOperator::identity(adj.rows())
        }
    };
    degree.linear_combination(1.0, adj, -1.0)
}

/// The LoG operator `L̂Â`: one smoothing step followed by the Laplacian.
pub fn log_operator(adj: &SparseOperator, lap: &SparseOperator) -> Result<SparseOperator> {
    if !adj.is_square() || !lap.is_square() || adj.rows() != lap.rows() {
        return Err(Error::dims(
            "log_operator",
            format!("conformable square operators ({}x{})", lap.rows(), lap.cols()),
            format!("{}x{}", adj.rows(), adj.cols()),
        ));
    }
    lap.matmul(adj)
}

/// `D̂^{-1}Â`, the row-stochastic form used by passive diffusion.
pub fn row_normalize(op: &SparseOperator) -> Result<SparseOperator> {
    let sums = op.row_sums();
    let triplets = op
        .triplets()
        .map(|(r, c, v)| (r, c, v / sums[r]))
        .collect();
    SparseOperator::from_triplets(op.rows(), op.cols(), triplets)
}
