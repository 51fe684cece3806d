//! Sampling the bipartite vertex/object graph and measuring distances in the
//! intersection graph it induces.
//!
//! The intersection graph is never built: two vertices are adjacent when they
//! share an object, so the intersection distance is half the bipartite
//! distance and a breadth-first search over the bipartite adjacency suffices.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;

use crate::harness::seed::derive_seed;
use crate::model::ModelParams;
use crate::sampling::{binomial, rng_from_seed, sample_distinct};
use crate::{Error, Result};

/// Bipartite graph with vertices grouped by type, then objects grouped by
/// type. Vertex `v` of type `k` has global id `vertex_offsets[k] + v`, and the
/// same layout is used for objects.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BipartiteGraph {
    vertex_offsets: Vec<usize>,
    object_offsets: Vec<usize>,
    vertex_adj: Vec<Vec<u32>>,
    object_adj: Vec<Vec<u32>>,
}

fn offsets(sizes: &[u64]) -> Vec<usize> {
    let mut out = Vec::with_capacity(sizes.len() + 1);
    let mut acc = 0usize;
    out.push(0);
    for &s in sizes {
        acc += s as usize;
        out.push(acc);
    }
    out
}

impl BipartiteGraph {
    /// Builds a graph from an explicit edge list of `(vertex id, object id)`.
    /// Duplicate edges are merged.
    pub fn from_edges(n: &[u64], m: &[u64], edges: &[(usize, usize)]) -> Result<Self> {
        let vertex_offsets = offsets(n);
        let object_offsets = offsets(m);
        let (nv, no) = (*vertex_offsets.last().unwrap(), *object_offsets.last().unwrap());
        let mut vertex_adj = vec![Vec::new(); nv];
        for &(v, u) in edges {
            if v >= nv {
                return Err(Error::InvalidVertex(v));
            }
            if u >= no {
                return Err(Error::InvalidParams(format!("invalid object id {u}")));
            }
            vertex_adj[v].push(u as u32);
        }
        for adj in &mut vertex_adj {
            adj.sort_unstable();
            adj.dedup();
        }
        Ok(Self::assemble(vertex_offsets, object_offsets, vertex_adj))
    }

    fn assemble(vertex_offsets: Vec<usize>, object_offsets: Vec<usize>, vertex_adj: Vec<Vec<u32>>) -> Self {
        let mut object_adj = vec![Vec::new(); *object_offsets.last().unwrap()];
        for (v, adj) in vertex_adj.iter().enumerate() {
            for &u in adj {
                object_adj[u as usize].push(v as u32);
            }
        }
        BipartiteGraph {
            vertex_offsets,
            object_offsets,
            vertex_adj,
            object_adj,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertex_adj.len()
    }

    pub fn num_objects(&self) -> usize {
        self.object_adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.vertex_adj.iter().map(Vec::len).sum()
    }

    /// Global id of vertex `index` of type `k` (both 0-based).
    pub fn vertex_id(&self, k: usize, index: usize) -> usize {
        let id = self.vertex_offsets[k] + index;
        assert!(id < self.vertex_offsets[k + 1], "vertex index out of range");
        id
    }

    pub fn vertex_type(&self, v: usize) -> usize {
        self.vertex_offsets.partition_point(|&o| o <= v) - 1
    }

    pub fn object_type(&self, u: usize) -> usize {
        self.object_offsets.partition_point(|&o| o <= u) - 1
    }

    pub fn vertex_neighbors(&self, v: usize) -> &[u32] {
        &self.vertex_adj[v]
    }

    pub fn object_neighbors(&self, u: usize) -> &[u32] {
        &self.object_adj[u]
    }

    /// Checks `u ∈ adj(v) ⇔ v ∈ adj(u)` and that no list has duplicates.
    pub fn is_consistent(&self) -> bool {
        let no_dups = |lists: &[Vec<u32>]| {
            lists.iter().all(|l| {
                let mut s = l.clone();
                s.sort_unstable();
                s.windows(2).all(|w| w[0] != w[1])
            })
        };
        if !no_dups(&self.vertex_adj) || !no_dups(&self.object_adj) {
            return false;
        }
        let forward = self
            .vertex_adj
            .iter()
            .enumerate()
            .all(|(v, adj)| adj.iter().all(|&u| self.object_adj[u as usize].contains(&(v as u32))));
        let backward = self
            .object_adj
            .iter()
            .enumerate()
            .all(|(u, adj)| adj.iter().all(|&v| self.vertex_adj[v as usize].contains(&(u as u32))));
        forward && backward
    }
}

/// Samples the graph with independent edges of probability `p_kj`.
///
/// For each vertex and object class the degree is drawn from `Bi(m_j, p_kj)`
/// and that many distinct objects are chosen uniformly, which gives the same
/// law as one Bernoulli trial per pair.
pub fn sample_bipartite(p: &ModelParams, seed: u64) -> BipartiteGraph {
    let mut rng = rng_from_seed(seed);
    sample_bipartite_with(p, &mut rng)
}

pub fn sample_bipartite_with<R: Rng + ?Sized>(p: &ModelParams, rng: &mut R) -> BipartiteGraph {
    let vertex_offsets = offsets(&p.n);
    let object_offsets = offsets(&p.m);
    let mut vertex_adj = Vec::with_capacity(*vertex_offsets.last().unwrap());
    let mut picks = Vec::new();
    for (k, &nk) in p.n.iter().enumerate() {
        for _ in 0..nk {
            let mut adj = Vec::new();
            for (j, &mj) in p.m.iter().enumerate() {
                let deg = binomial(rng, mj, p.p[(k, j)]);
                picks.clear();
                sample_distinct(rng, mj, deg, &mut picks);
                adj.extend(picks.iter().map(|&x| (object_offsets[j] as u64 + x) as u32));
            }
            vertex_adj.push(adj);
        }
    }
    BipartiteGraph::assemble(vertex_offsets, object_offsets, vertex_adj)
}

struct BitSet(Vec<u64>);

impl BitSet {
    fn new(len: usize) -> Self {
        BitSet(vec![0; len.div_ceil(64)])
    }

    /// Sets bit `i`, returning whether it was previously clear.
    fn insert(&mut self, i: usize) -> bool {
        let (w, b) = (i / 64, 1u64 << (i % 64));
        let fresh = self.0[w] & b == 0;
        self.0[w] |= b;
        fresh
    }
}

/// Intersection-graph distance between vertices `a` and `b`: half their
/// bipartite distance, `Some(0)` when `a == b`, `None` when they lie in
/// different components.
pub fn pair_distance(g: &BipartiteGraph, a: usize, b: usize) -> Result<Option<u32>> {
    for v in [a, b] {
        if v >= g.num_vertices() {
            return Err(Error::InvalidVertex(v));
        }
    }
    if a == b {
        return Ok(Some(0));
    }
    let mut seen_v = BitSet::new(g.num_vertices());
    let mut seen_u = BitSet::new(g.num_objects());
    seen_v.insert(a);
    let mut frontier = vec![a as u32];
    let mut objects = Vec::new();
    let mut next = Vec::new();
    let mut depth = 0u32;
    while !frontier.is_empty() {
        depth += 1;
        objects.clear();
        for &v in &frontier {
            for &u in &g.vertex_adj[v as usize] {
                if seen_u.insert(u as usize) {
                    objects.push(u);
                }
            }
        }
        next.clear();
        for &u in &objects {
            for &v in &g.object_adj[u as usize] {
                if seen_v.insert(v as usize) {
                    if v as usize == b {
                        return Ok(Some(depth));
                    }
                    next.push(v);
                }
            }
        }
        std::mem::swap(&mut frontier, &mut next);
    }
    Ok(None)
}

/// Histogram of a defective distance law on `{0, 1, 2, ...} ∪ {∞}`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DistanceLaw {
    pub counts: BTreeMap<u32, u64>,
    pub infinite_count: u64,
    pub total: u64,
}

impl DistanceLaw {
    pub fn record(&mut self, d: Option<u32>) {
        match d {
            Some(d) => *self.counts.entry(d).or_insert(0) += 1,
            None => self.infinite_count += 1,
        }
        self.total += 1;
    }

    pub fn from_samples(samples: impl IntoIterator<Item = Option<u32>>) -> Self {
        let mut law = DistanceLaw::default();
        for d in samples {
            law.record(d);
        }
        law
    }

    /// Empirical `P[D > d]`, counting the mass at infinity.
    pub fn exceed(&self, d: i64) -> f64 {
        if self.total == 0 {
            return f64::NAN;
        }
        let above: u64 = self
            .counts
            .iter()
            .filter(|(&k, _)| k as i64 > d)
            .map(|(_, &c)| c)
            .sum();
        (above + self.infinite_count) as f64 / self.total as f64
    }

    pub fn prob(&self, d: u32) -> f64 {
        self.counts.get(&d).copied().unwrap_or(0) as f64 / self.total as f64
    }

    pub fn prob_infinite(&self) -> f64 {
        self.infinite_count as f64 / self.total as f64
    }

    pub fn min_finite(&self) -> Option<u32> {
        self.counts.keys().next().copied()
    }

    pub fn max_finite(&self) -> Option<u32> {
        self.counts.keys().next_back().copied()
    }

    pub fn is_consistent(&self) -> bool {
        self.counts.values().sum::<u64>() + self.infinite_count == self.total
    }

    /// `distance,count` rows in increasing distance, then `inf,count`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("distance,count\n");
        for (d, c) in &self.counts {
            writeln!(s, "{d},{c}").unwrap();
        }
        writeln!(s, "inf,{}", self.infinite_count).unwrap();
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut law = DistanceLaw::default();
        for (i, line) in text.lines().enumerate().skip(1) {
            let bad = || Error::InvalidParams(format!("distance CSV line {}: {line:?}", i + 1));
            let (d, c) = line.split_once(',').ok_or_else(bad)?;
            let c: u64 = c.trim().parse().map_err(|_| bad())?;
            if d == "inf" {
                law.infinite_count += c;
            } else {
                *law.counts.entry(d.parse().map_err(|_| bad())?).or_insert(0) += c;
            }
            law.total += c;
        }
        Ok(law)
    }
}

/// Monte Carlo law of the distance between a uniformly chosen ordered pair of
/// distinct vertices of types `k1` and `k2` (0-based), one fresh graph per
/// replicate. Replicate `r` draws its graph from the stream
/// `derive_seed(seed, "graph", r)` and its pair from `derive_seed(seed, "pair", r)`.
pub fn empirical_distance_law(p: &ModelParams, k1: usize, k2: usize, reps: u64, seed: u64) -> Result<DistanceLaw> {
    let samples = distance_samples(p, k1, k2, reps, seed)?;
    Ok(DistanceLaw::from_samples(samples))
}

/// Per-replicate distances in replicate order.
pub fn distance_samples(p: &ModelParams, k1: usize, k2: usize, reps: u64, seed: u64) -> Result<Vec<Option<u32>>> {
    p.validate()?;
    for k in [k1, k2] {
        if k >= p.vertex_types() {
            return Err(Error::InsufficientVertices(k + 1));
        }
    }
    if k1 == k2 && p.n[k1] < 2 {
        return Err(Error::InsufficientVertices(k1 + 1));
    }
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let g = sample_bipartite(p, derive_seed(seed, "graph", r));
            let mut rng = rng_from_seed(derive_seed(seed, "pair", r));
            let (a, b) = choose_pair(&mut rng, p, k1, k2);
            pair_distance(&g, g.vertex_id(k1, a), g.vertex_id(k2, b))
        })
        .collect()
}

/// Uniform ordered pair of distinct vertices, the first of type `k1` and the
/// second of type `k2`, as within-type indices.
pub fn choose_pair<R: Rng + ?Sized>(rng: &mut R, p: &ModelParams, k1: usize, k2: usize) -> (usize, usize) {
    let a = rng.random_range(0..p.n[k1] as usize);
    if k1 != k2 {
        return (a, rng.random_range(0..p.n[k2] as usize));
    }
    let mut b = rng.random_range(0..p.n[k2] as usize - 1);
    if b >= a {
        b += 1;
    }
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Matrix;

    fn path_graph() -> BipartiteGraph {
        // v1-u1-v2-u2-v3 (0-based ids).
        BipartiteGraph::from_edges(&[3], &[2], &[(0, 0), (1, 0), (1, 1), (2, 1)]).unwrap()
    }

    #[test]
    fn hand_checked_distances() {
        let g = path_graph();
        assert_eq!(pair_distance(&g, 0, 2).unwrap(), Some(2));
        assert_eq!(pair_distance(&g, 0, 1).unwrap(), Some(1));
        assert_eq!(pair_distance(&g, 1, 1).unwrap(), Some(0));
        assert!(matches!(pair_distance(&g, 0, 3), Err(Error::InvalidVertex(3))));

        let g = BipartiteGraph::from_edges(&[3], &[2], &[(1, 0), (1, 1), (2, 1)]).unwrap();
        assert_eq!(pair_distance(&g, 0, 1).unwrap(), None);
    }

    #[test]
    fn extreme_probabilities() {
        let zero = ModelParams::homogeneous(vec![5, 4], vec![3, 6], 0.0).unwrap();
        assert_eq!(sample_bipartite(&zero, 1).edge_count(), 0);
        let one = ModelParams::homogeneous(vec![5, 4], vec![3, 6], 1.0).unwrap();
        let g = sample_bipartite(&one, 1);
        assert_eq!(g.edge_count(), 9 * 9);
        assert!(g.is_consistent());
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = ModelParams::new(
            vec![40, 60],
            vec![50],
            Matrix::from_rows(&[vec![0.05], vec![0.02]]),
        )
        .unwrap();
        assert_eq!(sample_bipartite(&p, 9), sample_bipartite(&p, 9));
        assert_ne!(sample_bipartite(&p, 9), sample_bipartite(&p, 10));
        assert!(sample_bipartite(&p, 9).is_consistent());
    }

    #[test]
    fn types_from_ids() {
        let g = BipartiteGraph::from_edges(&[2, 3], &[4], &[]).unwrap();
        assert_eq!(g.vertex_type(1), 0);
        assert_eq!(g.vertex_type(2), 1);
        assert_eq!(g.vertex_id(1, 2), 4);
        assert_eq!(g.object_type(3), 0);
    }

    #[test]
    fn degenerate_laws() {
        let one = ModelParams::scalar(6, 4, 1.0).unwrap();
        let law = empirical_distance_law(&one, 0, 0, 50, 3).unwrap();
        assert_eq!(law.counts.get(&1), Some(&50));
        let zero = ModelParams::scalar(6, 4, 0.0).unwrap();
        let law = empirical_distance_law(&zero, 0, 0, 50, 3).unwrap();
        assert_eq!(law.infinite_count, 50);
        assert!(law.is_consistent());
    }

    #[test]
    fn insufficient_vertices() {
        let p = ModelParams::scalar(6, 4, 0.5).unwrap();
        assert!(matches!(
            empirical_distance_law(&p, 1, 0, 5, 1),
            Err(Error::InsufficientVertices(2))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let law = DistanceLaw::from_samples([Some(2), Some(3), None, Some(2)]);
        let csv = law.to_csv();
        assert_eq!(csv, "distance,count\n2,2\n3,1\ninf,1\n");
        assert_eq!(DistanceLaw::from_csv(&csv).unwrap(), law);
        assert_eq!(law.exceed(2), 0.5);
        assert_eq!(law.exceed(1), 1.0);
    }

    #[test]
    fn distinct_pairs() {
        let p = ModelParams::scalar(2, 2, 0.5).unwrap();
        let mut rng = rng_from_seed(4);
        for _ in 0..100 {
            let (a, b) = choose_pair(&mut rng, &p, 0, 0);
            assert_ne!(a, b);
        }
    }
}
