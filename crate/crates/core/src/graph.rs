//! Plain undirected graphs with stable edge ids.

use std::collections::VecDeque;

use serde::Serialize;

/// Whether a weight function lives on edges or on vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Edge,
    Vertex,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Graph {
    adj: Vec<Vec<(u32, u32)>>,
    edges: Vec<(u32, u32)>,
}

pub const UNREACHED: u32 = u32::MAX;

impl Graph {
    pub fn new(n: usize) -> Self {
        Graph { adj: vec![Vec::new(); n], edges: Vec::new() }
    }

    /// Builds a graph from an edge list; duplicate edges and loops are ignored.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Graph::new(n);
        for &(u, v) in edges {
            if u != v && g.edge_between(u, v).is_none() {
                g.add_edge(u, v);
            }
        }
        g
    }

    /// Adds an edge without duplicate checks and returns its id.
    pub fn add_edge(&mut self, u: usize, v: usize) -> usize {
        let e = self.edges.len();
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        self.edges.push((a as u32, b as u32));
        self.adj[u].push((v as u32, e as u32));
        self.adj[v].push((u as u32, e as u32));
        e
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// `(neighbor, edge id)` pairs incident to `v`.
    pub fn neighbors(&self, v: usize) -> &[(u32, u32)] {
        &self.adj[v]
    }

    /// Endpoints of edge `e` with the smaller id first.
    pub fn edge(&self, e: usize) -> (usize, usize) {
        let (a, b) = self.edges[e];
        (a as usize, b as usize)
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().map(|&(a, b)| (a as usize, b as usize))
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        let (small, other) = if self.adj[u].len() <= self.adj[v].len() { (u, v) } else { (v, u) };
        self.adj[small].iter().find(|&&(w, _)| w as usize == other).map(|&(_, e)| e as usize)
    }

    pub(crate) fn sort_adjacency(&mut self) {
        for a in &mut self.adj {
            a.sort_unstable();
        }
    }

    /// Hop distances from a set of sources; `UNREACHED` where no path exists.
    pub fn bfs(&self, sources: &[usize]) -> Vec<u32> {
        self.bfs_filtered(sources, |_| true)
    }

    /// Hop distances from `sources` through vertices accepted by `allow`.
    pub fn bfs_filtered(&self, sources: &[usize], allow: impl Fn(usize) -> bool) -> Vec<u32> {
        let mut dist = vec![UNREACHED; self.vertex_count()];
        let mut queue = VecDeque::new();
        for &s in sources {
            if allow(s) && dist[s] == UNREACHED {
                dist[s] = 0;
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            let d = dist[u] + 1;
            for &(w, _) in &self.adj[u] {
                let w = w as usize;
                if dist[w] == UNREACHED && allow(w) {
                    dist[w] = d;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.vertex_count() == 0 || self.bfs(&[0]).iter().all(|&d| d != UNREACHED)
    }

    /// Induced subgraph on `keep` (in the given order); returns the graph and the edge-id map.
    pub fn induced(&self, keep: &[usize]) -> (Graph, Vec<usize>) {
        let mut local = vec![u32::MAX; self.vertex_count()];
        for (i, &v) in keep.iter().enumerate() {
            local[v] = i as u32;
        }
        let mut g = Graph::new(keep.len());
        let mut emap = Vec::new();
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            let (la, lb) = (local[a as usize], local[b as usize]);
            if la != u32::MAX && lb != u32::MAX {
                g.add_edge(la as usize, lb as usize);
                emap.push(e);
            }
        }
        (g, emap)
    }
}
