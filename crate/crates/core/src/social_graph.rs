//! Synthetic scale-free social networks.
//!
//! Networks are grown by preferential attachment from a complete seed graph
//! on `m` nodes. Each new node picks `m` distinct existing nodes with
//! probability proportional to their current degree; repeated picks are
//! redrawn. The result has exactly `m(m-1)/2 + m(n-m)` edges.
//!
//! Adjacency is stored as a compressed row (CSR) layout with neighbor lists
//! sorted ascending, so a network built from the same seed is byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::index;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::seed;

pub type NodeId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorParams {
    pub attachments: usize,
    pub seed: u64,
}

/// Undirected simple graph over dense node ids `0..node_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SocialNetwork {
    offsets: Vec<usize>,
    neighbors: Vec<NodeId>,
    params: Option<GeneratorParams>,
}

impl SocialNetwork {
    /// Build from an undirected edge list. Rejects self-loops, duplicate
    /// edges and endpoints outside `0..node_count`.
    pub fn from_edges(node_count: usize, edges: &[(NodeId, NodeId)]) -> Result<Self> {
        if node_count > NodeId::MAX as usize {
            return Err(invalid(format!("{node_count} nodes exceeds the id range")));
        }
        for &(u, v) in edges {
            if u as usize >= node_count || v as usize >= node_count {
                return Err(invalid(format!(
                    "edge ({u}, {v}) outside 0..{node_count}"
                )));
            }
            if u == v {
                return Err(invalid(format!("self-loop on node {u}")));
            }
        }
        let net = Self::from_edges_unchecked(node_count, edges, None);
        for v in 0..node_count {
            let adj = net.neighbors(v as NodeId);
            if adj.windows(2).any(|w| w[0] == w[1]) {
                return Err(invalid(format!("duplicate edge at node {v}")));
            }
        }
        Ok(net)
    }

    fn from_edges_unchecked(
        node_count: usize,
        edges: &[(NodeId, NodeId)],
        params: Option<GeneratorParams>,
    ) -> Self {
        let mut offsets = vec![0usize; node_count + 1];
        for &(u, v) in edges {
            offsets[u as usize + 1] += 1;
            offsets[v as usize + 1] += 1;
        }
        for i in 0..node_count {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut neighbors = vec![0 as NodeId; offsets[node_count]];
        for &(u, v) in edges {
            neighbors[fill[u as usize]] = v;
            fill[u as usize] += 1;
            neighbors[fill[v as usize]] = u;
            fill[v as usize] += 1;
        }
        for v in 0..node_count {
            neighbors[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        SocialNetwork {
            offsets,
            neighbors,
            params,
        }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        let v = v as usize;
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        let v = v as usize;
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn mean_degree(&self) -> f64 {
        if self.node_count() == 0 {
            return 0.0;
        }
        self.neighbors.len() as f64 / self.node_count() as f64
    }

    pub fn max_degree(&self) -> usize {
        (0..self.node_count())
            .map(|v| self.degree(v as NodeId))
            .max()
            .unwrap_or(0)
    }

    pub fn generator_params(&self) -> Option<GeneratorParams> {
        self.params
    }

    /// Iterate each undirected edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.node_count() as NodeId).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    /// Write the `# nodes=<n>` edge-list format.
    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_edge_list()).map_err(|e| Error::io(path, e))
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(self.edge_count() * 14 + 16);
        let _ = writeln!(out, "# nodes={}", self.node_count());
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn read_edge_list(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse_edge_list(BufReader::new(file))
    }

    pub fn parse_edge_list<R: BufRead>(reader: R) -> Result<Self> {
        let mut node_count = None;
        let mut edges = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::EdgeList {
                line: lineno,
                message: e.to_string(),
            })?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(n) = comment.trim().strip_prefix("nodes=") {
                    let n = n.trim().parse::<usize>().map_err(|e| Error::EdgeList {
                        line: lineno,
                        message: format!("bad node count: {e}"),
                    })?;
                    node_count = Some(n);
                }
                continue;
            }
            let mut parts = line.split_whitespace();
            let mut endpoint = || -> Result<NodeId> {
                parts
                    .next()
                    .ok_or_else(|| Error::EdgeList {
                        line: lineno,
                        message: "expected `u v`".into(),
                    })?
                    .parse::<NodeId>()
                    .map_err(|e| Error::EdgeList {
                        line: lineno,
                        message: e.to_string(),
                    })
            };
            let u = endpoint()?;
            let v = endpoint()?;
            edges.push((u, v));
        }
        let n = node_count.ok_or_else(|| Error::EdgeList {
            line: 1,
            message: "missing `# nodes=<n>` header".into(),
        })?;
        Self::from_edges(n, &edges)
    }
}

/// Fenwick tree over node degrees, used to draw a node with probability
/// proportional to its degree in O(log n).
struct DegreeTree {
    tree: Vec<u64>,
    total: u64,
    top_bit: usize,
}

impl DegreeTree {
    fn new(n: usize) -> Self {
        let top_bit = if n == 0 { 0 } else { 1 << (usize::BITS - 1 - n.leading_zeros()) };
        DegreeTree {
            tree: vec![0; n + 1],
            total: 0,
            top_bit,
        }
    }

    fn add(&mut self, node: usize, delta: u64) {
        self.total += delta;
        let mut i = node + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    /// Smallest node whose cumulative degree (in id order) exceeds `r`.
    fn find(&self, mut r: u64) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut step = self.top_bit;
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= r {
                pos = next;
                r -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

/// Grow a preferential-attachment network with `n` nodes and `m`
/// attachments per new node.
pub fn generate_scale_free(n: usize, m: usize, seed: u64) -> Result<SocialNetwork> {
    if m < 1 {
        return Err(invalid("attachments per node must be at least 1"));
    }
    if n <= m {
        return Err(invalid(format!(
            "node count {n} must exceed attachments per node {m}"
        )));
    }
    if n > NodeId::MAX as usize {
        return Err(invalid(format!("{n} nodes exceeds the id range")));
    }
    let mut rng = seed::rng(seed);
    let mut edges: Vec<(NodeId, NodeId)> = Vec::with_capacity(m * (m - 1) / 2 + m * (n - m));
    let mut degrees = DegreeTree::new(n);

    for u in 0..m {
        for v in u + 1..m {
            edges.push((u as NodeId, v as NodeId));
        }
        degrees.add(u, (m - 1) as u64);
    }

    let mut targets: Vec<usize> = Vec::with_capacity(m);
    for v in m..n {
        targets.clear();
        if degrees.total == 0 {
            // m = 1: the lone seed node has no edges yet.
            targets.push(0);
        } else {
            while targets.len() < m {
                let r = rng.gen_range(0..degrees.total);
                let t = degrees.find(r);
                if !targets.contains(&t) {
                    targets.push(t);
                }
            }
        }
        for &t in &targets {
            edges.push((t as NodeId, v as NodeId));
            degrees.add(t, 1);
        }
        degrees.add(v, m as u64);
    }

    Ok(SocialNetwork::from_edges_unchecked(
        n,
        &edges,
        Some(GeneratorParams {
            attachments: m,
            seed,
        }),
    ))
}

/// Uniformly sample `round(fraction * n)` distinct nodes, returned in
/// ascending id order.
pub fn sample_stranger_recipients(
    net: &SocialNetwork,
    fraction: f64,
    seed: u64,
) -> Result<Vec<NodeId>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(invalid(format!("seed fraction {fraction} outside [0, 1]")));
    }
    let n = net.node_count();
    let amount = ((fraction * n as f64).round() as usize).min(n);
    let mut rng = seed::rng(seed);
    let mut picked: Vec<NodeId> = index::sample(&mut rng, n, amount)
        .into_iter()
        .map(|i| i as NodeId)
        .collect();
    picked.sort_unstable();
    Ok(picked)
}

pub fn degree_histogram(net: &SocialNetwork) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for v in 0..net.node_count() {
        *hist.entry(net.degree(v as NodeId)).or_insert(0) += 1;
    }
    hist
}
