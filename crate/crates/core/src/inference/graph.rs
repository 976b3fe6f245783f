use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// How a Euclidean distance becomes an affinity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeWeight {
    /// `1 / (1 + d)`.
    #[default]
    Inverse,
    /// `exp(-d^2 / sigma^2)` with sigma the median pairwise distance.
    Gaussian,
}

impl std::str::FromStr for EdgeWeight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inverse" => Ok(EdgeWeight::Inverse),
            "gaussian" => Ok(EdgeWeight::Gaussian),
            other => Err(Error::parameter(format!(
                "unknown edge weighting {other:?}"
            ))),
        }
    }
}

/// Undirected weighted graph; each edge stored once with `u < v`, sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnGraph {
    n: usize,
    k: usize,
    edges: Vec<Edge>,
}

impl KnnGraph {
    /// Builds a graph from explicit edges. Either orientation is accepted;
    /// repeated edges must carry the same weight and collapse to one.
    pub fn from_edges(n: usize, k: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut out: Vec<Edge> = Vec::new();
        for e in edges {
            if e.u >= n || e.v >= n {
                return Err(Error::dimension(format!(
                    "edge ({}, {}) outside {n} nodes",
                    e.u, e.v
                )));
            }
            if e.u == e.v {
                return Err(Error::parameter(format!("self-loop at node {}", e.u)));
            }
            if !(e.weight > 0.0 && e.weight.is_finite()) {
                return Err(Error::parameter(format!(
                    "edge ({}, {}) weight {} is not positive",
                    e.u, e.v, e.weight
                )));
            }
            out.push(Edge {
                u: e.u.min(e.v),
                v: e.u.max(e.v),
                weight: e.weight,
            });
        }
        out.sort_by(|a, b| {
            (a.u, a.v)
                .cmp(&(b.u, b.v))
                .then(a.weight.total_cmp(&b.weight))
        });
        out.dedup_by(|b, a| (a.u, a.v) == (b.u, b.v));
        Ok(Self { n, k, edges: out })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbor lists with weights, each sorted by neighbor index.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.u].push((e.v, e.weight));
            adj[e.v].push((e.u, e.weight));
        }
        for a in adj.iter_mut() {
            a.sort_by_key(|&(v, _)| v);
        }
        adj
    }

    /// Weighted degrees.
    pub fn degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for e in &self.edges {
            d[e.u] += e.weight;
            d[e.v] += e.weight;
        }
        d
    }

    /// Writes one `u v weight` line per undirected edge.
    pub fn write_edge_list(&self, mut w: impl Write) -> Result<()> {
        for e in &self.edges {
            writeln!(w, "{} {} {}", e.u, e.v, e.weight)?;
        }
        Ok(())
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// For every row, the `k` nearest other rows as `(index, distance)`,
/// nearest first, ties to the smaller index.
pub fn knn_indices(x: &DenseMatrix, k: usize) -> Result<Vec<Vec<(usize, f64)>>> {
    let n = x.rows();
    if k == 0 || k >= n {
        return Err(Error::parameter(format!(
            "k = {k} must satisfy 1 <= k < N = {n}"
        )));
    }
    if !x.all_finite() {
        return Err(Error::Degenerate("embedding has non-finite entries".into()));
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, distance(x.row(i), x.row(j))))
                .collect();
            let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
            cand.select_nth_unstable_by(k - 1, cmp);
            cand.truncate(k);
            cand.sort_by(cmp);
            cand
        })
        .collect())
}

fn median_pairwise_distance(x: &DenseMatrix) -> f64 {
    let n = x.rows();
    let mut d: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| ((i + 1)..n).map(move |j| distance(x.row(i), x.row(j))))
        .collect();
    if d.is_empty() {
        return 0.0;
    }
    let mid = d.len() / 2;
    let (_, &mut hi, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    if d.len() % 2 == 1 {
        hi
    } else {
        let lo = d[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

/// Exact K-NN graph over the rows of `x`, union-symmetrized.
pub fn build_knn(x: &DenseMatrix, k: usize, weighting: EdgeWeight) -> Result<KnnGraph> {
    let nbrs = knn_indices(x, k)?;
    let sigma = match weighting {
        EdgeWeight::Inverse => 0.0,
        // all rows identical: every distance is 0 and any scale works
        EdgeWeight::Gaussian => Some(median_pairwise_distance(x))
            .filter(|&s| s > 0.0)
            .unwrap_or(1.0),
    };
    let weight = |d: f64| match weighting {
        EdgeWeight::Inverse => 1.0 / (1.0 + d),
        EdgeWeight::Gaussian => (-(d * d) / (sigma * sigma)).exp().max(f64::MIN_POSITIVE),
    };
    let edges = nbrs.iter().enumerate().flat_map(|(u, list)| {
        list.iter().map(move |&(v, d)| Edge {
            u,
            v,
            weight: weight(d),
        })
    });
    KnnGraph::from_edges(x.rows(), k, edges)
}
