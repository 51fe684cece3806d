//! Growing the branching process from two tagged vertices while assigning
//! graph indices, so that the class-1 individuals reproduce the union of the
//! two graph components explored in breadth-first order.
//!
//! Individuals of class 0 (ghosts) re-use an index already held by a class-1
//! individual of the same type. A ghost is class 0′ when that index was first
//! handed out in the ghost's own generation; the edge from its class-1 parent
//! is then a genuine graph edge. Ghost descendants play no part in the graph,
//! so after the original ghost is recorded its offspring are followed only as
//! type counts.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;

use super::{objects_from, vertices_from, DEFAULT_POP_CAP};
use crate::harness::seed::derive_seed;
use crate::model::{mean_matrices, perron, spectral_radius, ModelParams};
use crate::sampling::{binomial, rng_from_seed, sample_distinct};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Root {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Class {
    One,
    ZeroPrime,
    Zero,
}

/// A vertex (`object == false`) or object of the underlying graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Node {
    pub object: bool,
    pub typ: usize,
    pub index: u64,
}

/// An individual of the process. Even generations are vertices, odd ones
/// objects. `parent` is a position in [`LabeledForest::individuals`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Individual {
    pub generation: usize,
    pub typ: usize,
    pub parent: Option<usize>,
    pub index: u64,
    pub class: Class,
    pub root: Root,
}

impl Individual {
    pub fn node(&self) -> Node {
        Node {
            object: self.generation % 2 == 1,
            typ: self.typ,
            index: self.index,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForestDistance {
    Finite(u32),
    /// One of the two components was exhausted without meeting the other.
    Infinite,
    /// Both explorations were still growing at the final generation.
    Unresolved,
}

/// Result of [`labeled_growth`].
///
/// `individuals` holds every class-1 individual and every original ghost
/// (a ghost whose parent is class 1). Per-generation tallies are indexed by
/// the generation of the alternating process, `0..=2d`.
#[derive(Clone, Debug)]
pub struct LabeledForest {
    pub depth: usize,
    pub individuals: Vec<Individual>,
    /// Graph edges `(parent node, child node)` from class-1 parents to
    /// class-1 or class-0′ children.
    pub edges: Vec<(Node, Node)>,
    /// All class-0 individuals per generation and type.
    pub ghosts: Vec<Vec<u64>>,
    /// Original ghosts per generation and type.
    pub original_ghosts: Vec<Vec<u64>>,
    /// Class-1 individuals per generation descended from `A` and from `B`.
    pub class1: Vec<[u64; 2]>,
}

impl LabeledForest {
    pub fn generations(&self) -> usize {
        self.ghosts.len() - 1
    }

    /// `G^X(i)`: vertex ghosts in generation `2i`, summed over types.
    pub fn ghost_x(&self, i: usize) -> u64 {
        self.ghosts[2 * i].iter().sum()
    }

    /// `G^Y(i)`: object ghosts in generation `2i - 1`, summed over types.
    pub fn ghost_y(&self, i: usize) -> u64 {
        assert!(i >= 1);
        self.ghosts[2 * i - 1].iter().sum()
    }

    /// `H^X(i)`: original vertex ghosts born in generation `2i`.
    pub fn original_x(&self, i: usize) -> u64 {
        self.original_ghosts[2 * i].iter().sum()
    }

    /// `H^Y(i)`: original object ghosts born in generation `2i - 1`.
    pub fn original_y(&self, i: usize) -> u64 {
        assert!(i >= 1);
        self.original_ghosts[2 * i - 1].iter().sum()
    }

    pub fn roots(&self) -> (Node, Node) {
        (self.individuals[0].node(), self.individuals[1].node())
    }

    /// No two class-1 individuals of the same type share an index.
    pub fn class1_indices_unique(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.individuals
            .iter()
            .filter(|ind| ind.class == Class::One)
            .all(|ind| seen.insert(ind.node()))
    }

    /// Graph distance between the two roots as far as the forest resolves it.
    ///
    /// Every recorded edge is an edge of the graph and every shortest path of
    /// bipartite length at most `4d` is recorded, so a path found here is a
    /// shortest one.
    pub fn distance(&self) -> ForestDistance {
        let (a, b) = self.roots();
        let mut adj: HashMap<Node, Vec<Node>> = HashMap::new();
        for &(u, v) in &self.edges {
            adj.entry(u).or_default().push(v);
            adj.entry(v).or_default().push(u);
        }
        let mut dist: HashMap<Node, u32> = HashMap::from([(a, 0)]);
        let mut queue = VecDeque::from([a]);
        while let Some(u) = queue.pop_front() {
            let du = dist[&u];
            for &v in adj.get(&u).map(Vec::as_slice).unwrap_or(&[]) {
                if !dist.contains_key(&v) {
                    if v == b {
                        return ForestDistance::Finite((du + 1) / 2);
                    }
                    dist.insert(v, du + 1);
                    queue.push_back(v);
                }
            }
        }
        let last = self.class1.last().unwrap();
        if last[0] == 0 || last[1] == 0 {
            ForestDistance::Infinite
        } else {
            ForestDistance::Unresolved
        }
    }
}

/// Grows `2 depth` generations from root `A` of type `k1` and root `B` of type
/// `k2` (0-based), with the default population cap.
pub fn labeled_growth(p: &ModelParams, k1: usize, k2: usize, depth: usize, seed: u64) -> Result<LabeledForest> {
    labeled_growth_capped(p, k1, k2, depth, seed, DEFAULT_POP_CAP)
}

pub fn labeled_growth_capped(
    p: &ModelParams,
    k1: usize,
    k2: usize,
    depth: usize,
    seed: u64,
    cap: u64,
) -> Result<LabeledForest> {
    p.validate()?;
    for k in [k1, k2] {
        if k >= p.vertex_types() {
            return Err(Error::InsufficientVertices(k + 1));
        }
    }
    if k1 == k2 && p.n[k1] < 2 {
        return Err(Error::InsufficientVertices(k1 + 1));
    }
    if depth == 0 {
        return Err(Error::InvalidParams("depth must be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let a_index = rng.random_range(0..p.n[k1]);
    let b_index = if k1 == k2 {
        let b = rng.random_range(0..p.n[k2] - 1);
        b + (b >= a_index) as u64
    } else {
        rng.random_range(0..p.n[k2])
    };

    // Generation in which each (type, index) was first held by a class-1
    // individual, per side.
    let mut vertex_seen: Vec<HashMap<u64, usize>> = vec![HashMap::new(); p.vertex_types()];
    let mut object_seen: Vec<HashMap<u64, usize>> = vec![HashMap::new(); p.object_types()];
    vertex_seen[k1].insert(a_index, 0);
    vertex_seen[k2].insert(b_index, 0);

    let mut individuals = vec![
        Individual {
            generation: 0,
            typ: k1,
            parent: None,
            index: a_index,
            class: Class::One,
            root: Root::A,
        },
        Individual {
            generation: 0,
            typ: k2,
            parent: None,
            index: b_index,
            class: Class::One,
            root: Root::B,
        },
    ];
    let mut frontier = vec![0usize, 1];
    let mut ghost_now = vec![0u64; p.vertex_types()];
    let mut ghosts = vec![ghost_now.clone()];
    let mut original_ghosts = vec![vec![0u64; p.vertex_types()]];
    let mut class1 = vec![[1u64, 1]];
    let mut edges = Vec::new();
    let mut picks = Vec::new();

    for g in 0..2 * depth {
        let child_gen = g + 1;
        let to_objects = g % 2 == 0;
        let child_types = if to_objects { p.object_types() } else { p.vertex_types() };

        // Offspring of class-1 parents, drawn parent by parent.
        let mut draws: Vec<(usize, usize, u64)> = Vec::new();
        for (pos, &pid) in frontier.iter().enumerate() {
            let k = individuals[pid].typ;
            for t in 0..child_types {
                let (range, prob) = if to_objects {
                    (p.m[t], p.p[(k, t)])
                } else {
                    (p.n[t], p.p[(t, k)])
                };
                let count = binomial(&mut rng, range, prob);
                picks.clear();
                sample_distinct(&mut rng, range, count, &mut picks);
                draws.extend(picks.iter().map(|&idx| (t, pos, idx)));
            }
        }
        let mut ghost_next = if to_objects {
            objects_from(p, &ghost_now, &mut rng)
        } else {
            vertices_from(p, &ghost_now, &mut rng)
        };

        // Class assignment in (type, parent, sibling rank) order.
        draws.sort_by_key(|&(t, pos, _)| (t, pos));
        let seen = if to_objects { &mut object_seen } else { &mut vertex_seen };
        let mut next = Vec::new();
        let mut originals = vec![0u64; child_types];
        let mut counts = [0u64; 2];
        for (t, pos, idx) in draws {
            let class = match seen[t].get(&idx) {
                None => {
                    seen[t].insert(idx, child_gen);
                    Class::One
                }
                Some(&first) if first == child_gen => Class::ZeroPrime,
                Some(_) => Class::Zero,
            };
            let parent = frontier[pos];
            let child = Individual {
                generation: child_gen,
                typ: t,
                parent: Some(parent),
                index: idx,
                class,
                root: individuals[parent].root,
            };
            if class != Class::Zero {
                edges.push((individuals[parent].node(), child.node()));
            }
            if class == Class::One {
                next.push(individuals.len());
                counts[(child.root == Root::B) as usize] += 1;
            } else {
                originals[t] += 1;
                ghost_next[t] += 1;
            }
            individuals.push(child);
        }

        let size = next.len() as u64 + ghost_next.iter().sum::<u64>();
        if size > cap {
            return Err(Error::PopulationCap {
                generation: child_gen,
                size,
                cap,
            });
        }
        ghosts.push(ghost_next.clone());
        original_ghosts.push(originals);
        class1.push(counts);
        ghost_now = ghost_next;
        frontier = next;
    }

    Ok(LabeledForest {
        depth,
        individuals,
        edges,
        ghosts,
        original_ghosts,
        class1,
    })
}

/// One row of the ghost scaling table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GhostRow {
    pub i: usize,
    pub ghost_x_mean: f64,
    pub ghost_y_mean: f64,
    pub ratio_x: f64,
    pub ratio_y: f64,
}

fn ratio(mean: f64, scale: f64) -> f64 {
    if mean == 0.0 {
        0.0
    } else {
        mean / scale
    }
}

/// Monte Carlo means of `G^X(i)` and `G^Y(i)` for `i = 1..=depth`, scaled by
/// `τ^{2i} e(m,n)⁴` and `√(m/n) τ^{2(i-1)} e(m,n)⁴` respectively.
///
/// Replicate `r` uses `derive_seed(seed, "ghosts", r)`.
pub fn ghost_scaling(
    p: &ModelParams,
    k1: usize,
    k2: usize,
    depth: usize,
    reps: u64,
    seed: u64,
) -> Result<Vec<GhostRow>> {
    p.validate()?;
    let m_x = mean_matrices(p).0;
    let tau = perron(&m_x).map(|pf| pf.tau).unwrap_or_else(|_| spectral_radius(&m_x));
    let (n, m) = (p.n_total() as f64, p.m_total() as f64);
    let e4 = (n.powf(-0.25) + m.powf(-0.25)).powi(4);

    let per_rep: Vec<Vec<(u64, u64)>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let f = labeled_growth(p, k1, k2, depth, derive_seed(seed, "ghosts", r))?;
            Ok((1..=depth).map(|i| (f.ghost_x(i), f.ghost_y(i))).collect())
        })
        .collect::<Result<_>>()?;

    Ok((1..=depth)
        .map(|i| {
            let (mut sx, mut sy) = (0.0, 0.0);
            for rep in &per_rep {
                sx += rep[i - 1].0 as f64;
                sy += rep[i - 1].1 as f64;
            }
            let (gx, gy) = (sx / reps as f64, sy / reps as f64);
            GhostRow {
                i,
                ghost_x_mean: gx,
                ghost_y_mean: gy,
                ratio_x: ratio(gx, tau.powi(2 * i as i32) * e4),
                ratio_y: ratio(gy, (m / n).sqrt() * tau.powi(2 * (i as i32 - 1)) * e4),
            }
        })
        .collect())
}

pub fn ghost_table_csv(rows: &[GhostRow]) -> String {
    let mut s = String::from("i,ghostX_mean,ghostY_mean,ratioX,ratioY\n");
    for r in rows {
        writeln!(s, "{},{},{},{},{}", r.i, r.ghost_x_mean, r.ghost_y_mean, r.ratio_x, r.ratio_y).unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_probability_keeps_roots() {
        let p = ModelParams::scalar(10, 10, 0.0).unwrap();
        let f = labeled_growth(&p, 0, 0, 3, 5).unwrap();
        assert_eq!(f.individuals.len(), 2);
        assert!(f.edges.is_empty());
        assert!(f.ghosts.iter().flatten().all(|&g| g == 0));
        assert_eq!(f.distance(), ForestDistance::Infinite);
        assert_ne!(f.individuals[0].index, f.individuals[1].index);
    }

    #[test]
    fn full_probability_reuses_indices() {
        let p = ModelParams::scalar(2, 2, 1.0).unwrap();
        let f = labeled_growth(&p, 0, 0, 1, 5).unwrap();
        // Both roots pick both objects; the second picks are class 0′.
        assert_eq!(f.class1[1], [2, 0]);
        assert_eq!(f.ghost_y(1), 2);
        assert_eq!(f.original_y(1), 2);
        assert!(f.ghost_x(1) > 0);
        assert_eq!(f.distance(), ForestDistance::Finite(1));
        assert!(f.class1_indices_unique());
    }

    #[test]
    fn path_through_shared_object() {
        // With one object every vertex pair is at distance 1 once both pick it.
        let p = ModelParams::scalar(30, 2, 1.0).unwrap();
        let f = labeled_growth(&p, 0, 0, 2, 1).unwrap();
        assert_eq!(f.distance(), ForestDistance::Finite(1));
    }

    #[test]
    fn ghost_table_zero_model() {
        let p = ModelParams::scalar(10, 10, 0.0).unwrap();
        let rows = ghost_scaling(&p, 0, 0, 3, 20, 1).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.ghost_x_mean == 0.0 && r.ratio_x == 0.0 && r.ratio_y == 0.0));
        assert!(ghost_table_csv(&rows).starts_with("i,ghostX_mean,ghostY_mean,ratioX,ratioY\n1,0,0,0,0\n"));
    }

    #[test]
    fn deterministic_and_consistent() {
        let p = ModelParams::scalar(200, 200, 0.01).unwrap();
        for seed in 0..20 {
            let f = labeled_growth(&p, 0, 0, 4, seed).unwrap();
            let g = labeled_growth(&p, 0, 0, 4, seed).unwrap();
            assert_eq!(f.edges, g.edges);
            assert!(f.class1_indices_unique());
            for ind in &f.individuals[2..] {
                let parent = &f.individuals[ind.parent.unwrap()];
                assert_eq!(parent.class, Class::One);
                assert_eq!(parent.generation + 1, ind.generation);
                assert_eq!(parent.root, ind.root);
            }
        }
    }
}
