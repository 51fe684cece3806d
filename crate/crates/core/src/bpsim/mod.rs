//! The alternating vertex/object multitype branching process: plain
//! simulation, the normalised martingale `W_i = τ^{-i} νᵀX(i)`, extinction
//! probabilities, and the index-labelled coupling with the graph.

mod labeled;

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;

pub use labeled::{
    ghost_scaling, ghost_table_csv, labeled_growth, labeled_growth_capped, Class, ForestDistance, GhostRow,
    Individual, LabeledForest, Node, Root,
};

use crate::harness::seed::derive_seed;
use crate::model::{ModelParams, SpectralData};
use crate::sampling::{binomial, rng_from_seed};
use crate::{Error, Result};

/// Default bound on the number of individuals in one generation.
pub const DEFAULT_POP_CAP: u64 = 100_000_000;

/// Once a line reaches this many vertex individuals its extinction
/// probability is below `q^SATURATION`, which is far under any Monte Carlo
/// resolution used here, so it is counted as surviving.
pub const SATURATION: u64 = 10_000;

/// Counts per generation. `x[i]` is `X(i)` for `i = 0..=I` and `y[i - 1]` is
/// `Y(i)` for `i = 1..=I`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trajectory {
    pub x: Vec<Vec<u64>>,
    pub y: Vec<Vec<u64>>,
    pub start: Vec<usize>,
}

impl Trajectory {
    pub fn generations(&self) -> usize {
        self.x.len() - 1
    }

    /// `generation,side,type,count` with 1-based types, generation by
    /// generation, `Y(i)` before `X(i)`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("generation,side,type,count\n");
        for i in 0..self.x.len() {
            if i > 0 {
                for (j, c) in self.y[i - 1].iter().enumerate() {
                    writeln!(s, "{i},Y,{},{c}", j + 1).unwrap();
                }
            }
            for (k, c) in self.x[i].iter().enumerate() {
                writeln!(s, "{i},X,{},{c}", k + 1).unwrap();
            }
        }
        s
    }
}

fn check_cap(generation: usize, counts: &[u64], cap: u64) -> Result<()> {
    let size: u64 = counts.iter().sum();
    if size > cap {
        return Err(Error::PopulationCap { generation, size, cap });
    }
    Ok(())
}

/// One object generation from vertex counts: `Y_j = Σ_k Bi(x_k m_j, p_kj)`.
///
/// Summing the offspring of `x_k` individuals, each `Bi(m_j, p_kj)`, gives
/// exactly one `Bi(x_k m_j, p_kj)` draw.
pub(crate) fn objects_from<R: Rng + ?Sized>(p: &ModelParams, x: &[u64], rng: &mut R) -> Vec<u64> {
    (0..p.object_types())
        .map(|j| {
            x.iter()
                .enumerate()
                .map(|(k, &xk)| binomial(rng, xk * p.m[j], p.p[(k, j)]))
                .sum()
        })
        .collect()
}

/// One vertex generation from object counts: `X_k = Σ_j Bi(y_j n_k, p_kj)`.
pub(crate) fn vertices_from<R: Rng + ?Sized>(p: &ModelParams, y: &[u64], rng: &mut R) -> Vec<u64> {
    (0..p.vertex_types())
        .map(|k| {
            y.iter()
                .enumerate()
                .map(|(j, &yj)| binomial(rng, yj * p.n[k], p.p[(k, j)]))
                .sum()
        })
        .collect()
}

fn initial_counts(p: &ModelParams, start: &[usize]) -> Result<Vec<u64>> {
    if start.is_empty() {
        return Err(Error::InvalidParams("start population is empty".into()));
    }
    let mut x0 = vec![0u64; p.vertex_types()];
    for &k in start {
        if k >= p.vertex_types() {
            return Err(Error::InvalidParams(format!("start type {} out of range", k + 1)));
        }
        x0[k] += 1;
    }
    for (k, (&c, &nk)) in x0.iter().zip(&p.n).enumerate() {
        if c > nk {
            return Err(Error::InvalidParams(format!("X_{}(0) = {c} > n_{} = {nk}", k + 1, k + 1)));
        }
    }
    Ok(x0)
}

/// Runs `generations` full vertex generations from the given start types
/// (0-based), with the default population cap.
pub fn simulate(p: &ModelParams, start: &[usize], generations: usize, seed: u64) -> Result<Trajectory> {
    simulate_capped(p, start, generations, seed, DEFAULT_POP_CAP)
}

pub fn simulate_capped(p: &ModelParams, start: &[usize], generations: usize, seed: u64, cap: u64) -> Result<Trajectory> {
    p.validate()?;
    let mut rng = rng_from_seed(seed);
    let mut x = vec![initial_counts(p, start)?];
    let mut y = Vec::with_capacity(generations);
    for i in 1..=generations {
        let yi = objects_from(p, &x[i - 1], &mut rng);
        check_cap(i, &yi, cap)?;
        let xi = vertices_from(p, &yi, &mut rng);
        check_cap(i, &xi, cap)?;
        y.push(yi);
        x.push(xi);
    }
    Ok(Trajectory {
        x,
        y,
        start: start.to_vec(),
    })
}

/// Final vertex counts only, without keeping the history.
fn final_counts<R: Rng + ?Sized>(p: &ModelParams, x0: Vec<u64>, generations: usize, cap: u64, rng: &mut R) -> Result<Vec<u64>> {
    let mut x = x0;
    for i in 1..=generations {
        let y = objects_from(p, &x, rng);
        check_cap(i, &y, cap)?;
        x = vertices_from(p, &y, rng);
        check_cap(i, &x, cap)?;
        if x.iter().all(|&c| c == 0) {
            break;
        }
    }
    Ok(x)
}

/// The pair `(τ, ν)` used to normalise `νᵀX(I)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WNormalizer {
    pub tau: f64,
    pub nu: Vec<f64>,
}

impl From<&SpectralData> for WNormalizer {
    fn from(s: &SpectralData) -> Self {
        WNormalizer {
            tau: s.tau,
            nu: s.nu.clone(),
        }
    }
}

/// One draw of `W_I = τ^{-I} νᵀX(I)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WSample {
    pub value: f64,
    pub horizon: usize,
    pub survived: bool,
}

/// `W_I` from a single process started by one vertex of type `k` (0-based).
pub fn w_sample(p: &ModelParams, norm: &WNormalizer, k: usize, horizon: usize, seed: u64) -> Result<WSample> {
    w_sample_capped(p, norm, k, horizon, seed, DEFAULT_POP_CAP)
}

pub fn w_sample_capped(
    p: &ModelParams,
    norm: &WNormalizer,
    k: usize,
    horizon: usize,
    seed: u64,
    cap: u64,
) -> Result<WSample> {
    if !(norm.tau > 1.0) {
        return Err(Error::NotSupercritical(norm.tau));
    }
    if horizon == 0 {
        return Err(Error::InvalidParams("horizon must be at least 1".into()));
    }
    p.validate()?;
    let x0 = initial_counts(p, &[k])?;
    let mut rng = rng_from_seed(seed);
    let x = final_counts(p, x0, horizon, cap, &mut rng)?;
    let survived = x.iter().any(|&c| c > 0);
    let value = x.iter().zip(&norm.nu).map(|(&c, v)| c as f64 * v).sum::<f64>() / norm.tau.powi(horizon as i32);
    Ok(WSample {
        value,
        horizon,
        survived,
    })
}

/// `W_I` for replicates `0..reps`, replicate `r` seeded by
/// `derive_seed(seed, "w", r)`.
pub fn w_samples(p: &ModelParams, norm: &WNormalizer, k: usize, horizon: usize, reps: u64, seed: u64) -> Result<Vec<WSample>> {
    (0..reps)
        .into_par_iter()
        .map(|r| w_sample(p, norm, k, horizon, derive_seed(seed, "w", r)))
        .collect()
}

/// Default horizon `max(12, 2 i₀)`.
pub fn default_horizon(s: &SpectralData) -> usize {
    12.max(2 * s.i0.max(0) as usize)
}

/// Survival probabilities `P_k[W > 0]`, one per vertex type, from the minimal
/// fixed point of the one-generation extinction map.
pub fn survival_prob(p: &ModelParams) -> Vec<f64> {
    const MAX_ITER: usize = 10_000_000;
    let (kk, jj) = (p.vertex_types(), p.object_types());
    let mut q = vec![0.0f64; kk];
    for _ in 0..MAX_ITER {
        // ln g_j(q) = Σ_l n_l ln(1 - p_lj (1 - q_l))
        let g: Vec<f64> = (0..jj)
            .map(|j| {
                (0..kk)
                    .map(|l| p.n[l] as f64 * (-p.p[(l, j)] * (1.0 - q[l])).ln_1p())
                    .sum::<f64>()
                    .exp()
            })
            .collect();
        let next: Vec<f64> = (0..kk)
            .map(|k| {
                (0..jj)
                    .map(|j| p.m[j] as f64 * (-p.p[(k, j)] * (1.0 - g[j])).ln_1p())
                    .sum::<f64>()
                    .exp()
            })
            .collect();
        let change = next.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        q = next;
        if change < 1e-12 {
            break;
        }
    }
    q.into_iter().map(|v| 1.0 - v).collect()
}

/// Whether the process from one type-`k` vertex is extinct by vertex
/// generation `generations`. Lines reaching [`SATURATION`] vertices are
/// reported as surviving.
pub fn extinct_by(p: &ModelParams, k: usize, generations: usize, seed: u64) -> Result<bool> {
    let mut x = initial_counts(p, &[k])?;
    let mut rng = rng_from_seed(seed);
    for _ in 0..generations {
        let y = objects_from(p, &x, &mut rng);
        x = vertices_from(p, &y, &mut rng);
        let total: u64 = x.iter().sum();
        if total == 0 {
            return Ok(true);
        }
        if total >= SATURATION {
            return Ok(false);
        }
    }
    Ok(false)
}

/// Fraction of `reps` processes from type `k` extinct by `generations`.
pub fn extinction_frequency(p: &ModelParams, k: usize, generations: usize, reps: u64, seed: u64) -> Result<f64> {
    p.validate()?;
    let flags: Vec<bool> = (0..reps)
        .into_par_iter()
        .map(|r| extinct_by(p, k, generations, derive_seed(seed, "extinction", r)))
        .collect::<Result<_>>()?;
    Ok(flags.iter().filter(|&&e| e).count() as f64 / reps as f64)
}

/// Minimum acceptance rate below which conditioning on survival is refused.
pub const MIN_ACCEPTANCE: f64 = 1e-4;
const MIN_ATTEMPTS: u64 = 100_000;

/// `pool_size` draws of `W_I` conditioned on survival to the horizon.
///
/// Attempt `a` uses the stream `derive_seed(seed, "wpool", a)`. Attempts run
/// in fixed-size batches and accepted values are kept in attempt order, so
/// the pool does not depend on the number of worker threads.
pub fn conditioned_w_pool(
    p: &ModelParams,
    norm: &WNormalizer,
    k: usize,
    horizon: usize,
    pool_size: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    conditioned_w_pool_capped(p, norm, k, horizon, pool_size, seed, DEFAULT_POP_CAP)
}

pub fn conditioned_w_pool_capped(
    p: &ModelParams,
    norm: &WNormalizer,
    k: usize,
    horizon: usize,
    pool_size: usize,
    seed: u64,
    cap: u64,
) -> Result<Vec<f64>> {
    if !(norm.tau > 1.0) {
        return Err(Error::NotSupercritical(norm.tau));
    }
    let batch = (2 * pool_size as u64).clamp(1024, 1 << 16);
    let mut pool = Vec::with_capacity(pool_size);
    let mut attempts = 0u64;
    while pool.len() < pool_size {
        let draws: Vec<WSample> = (attempts..attempts + batch)
            .into_par_iter()
            .map(|a| w_sample_capped(p, norm, k, horizon, derive_seed(seed, "wpool", a), cap))
            .collect::<Result<_>>()?;
        for d in draws {
            attempts += 1;
            if d.survived {
                pool.push(d.value);
                if pool.len() == pool_size {
                    break;
                }
            }
        }
        let rate = pool.len() as f64 / attempts as f64;
        if attempts >= MIN_ATTEMPTS && rate < MIN_ACCEPTANCE {
            return Err(Error::SurvivalTooRare { rate, attempts });
        }
    }
    Ok(pool)
}
