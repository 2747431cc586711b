//! Undirected, unweighted networks over grid nodes.

use crate::error::{Error, Result};
use crate::grid_io::GridSpec;

/// Symmetric adjacency stored as sorted, duplicate-free neighbor lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    grid: GridSpec,
    neighbors: Vec<Vec<u32>>,
    n_edges: usize,
}

impl Network {
    pub fn edgeless(grid: GridSpec) -> Self {
        let n = grid.len();
        Network {
            grid,
            neighbors: vec![Vec::new(); n],
            n_edges: 0,
        }
    }

    /// Builds a network from undirected edges given in any order or
    /// orientation. Duplicate edges are merged; self-loops are rejected.
    pub fn from_edges<I>(grid: GridSpec, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let n = grid.len();
        let mut neighbors = vec![Vec::new(); n];
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({i}, {j}) references a node outside 0..{n}"
                )));
            }
            if i == j {
                return Err(Error::InvalidInput(format!("self-loop at node {i}")));
            }
            neighbors[i].push(j as u32);
            neighbors[j].push(i as u32);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        let n_edges = neighbors.iter().map(Vec::len).sum::<usize>() / 2;
        Ok(Network {
            grid,
            neighbors,
            n_edges,
        })
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn neighbors(&self, node: usize) -> &[u32] {
        &self.neighbors[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.neighbors[node].len()
    }

    pub fn edge_count(&self) -> usize {
        self.n_edges
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&(j as u32)).is_ok()
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors.iter().enumerate().flat_map(|(i, list)| {
            list.iter()
                .map(|&j| j as usize)
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
    }
}
