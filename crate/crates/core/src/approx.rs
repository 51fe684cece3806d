//! The branching-process approximation to the distance law.
//!
//! With `W^A`, `W^B` independent martingale limits for the two start types,
//! `P[D > i₀ + u] ≈ E exp(-W^A W^B κ τ^u φ(n))`. Expectations over `W` are
//! taken over every pair of pooled positive draws, with the atoms at zero
//! added in closed form through the survival probabilities.

use std::fmt::Write as _;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::Serialize;

use crate::bpsim::{conditioned_w_pool_capped, survival_prob, WNormalizer, DEFAULT_POP_CAP};
use crate::graphgen::DistanceLaw;
use crate::harness::seed::derive_seed;
use crate::model::{ModelParams, SpectralData};
use crate::sampling::{open_unit, rng_from_seed, standard_gumbel};
use crate::{Error, Result};

/// `L(d) = κ n⁻¹ (τ^d - 1)`, the mean number of links between the two
/// neighbourhoods over `d` steps.
#[allow(non_snake_case)]
pub fn L_of_d(s: &SpectralData, d: i64) -> Result<f64> {
    if d < 1 {
        return Err(Error::InvalidParams(format!("d = {d} < 1")));
    }
    Ok(s.kappa / s.n as f64 * (s.tau.powi(d as i32) - 1.0))
}

/// Pools of `W` conditioned on survival for the two start types, with the
/// survival probabilities that restore the atoms at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct WPools {
    pub pool_a: Vec<f64>,
    pub pool_b: Vec<f64>,
    pub surv_a: f64,
    pub surv_b: f64,
    pub horizon: usize,
}

impl WPools {
    pub fn new(pool_a: Vec<f64>, pool_b: Vec<f64>, surv_a: f64, surv_b: f64, horizon: usize) -> Result<Self> {
        if pool_a.is_empty() || pool_b.is_empty() {
            return Err(Error::EmptyPool);
        }
        if pool_a.iter().chain(&pool_b).any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParams("pooled W values must be positive and finite".into()));
        }
        for s in [surv_a, surv_b] {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::InvalidProbability(format!("survival probability {s} out of [0,1]")));
            }
        }
        Ok(WPools {
            pool_a,
            pool_b,
            surv_a,
            surv_b,
            horizon,
        })
    }

    /// Both pools equal to the single value `w`.
    pub fn point_mass(w: f64, surv: f64) -> Result<Self> {
        Self::new(vec![w], vec![w], surv, surv, 0)
    }

    /// Simulated pools of `size` draws each at the given horizon. Pool A uses
    /// the master seed `derive_seed(seed, "pool-a", 0)` and pool B
    /// `derive_seed(seed, "pool-b", 0)`.
    pub fn simulate(
        p: &ModelParams,
        s: &SpectralData,
        k1: usize,
        k2: usize,
        horizon: usize,
        size: usize,
        seed: u64,
    ) -> Result<Self> {
        Self::simulate_capped(p, s, k1, k2, horizon, size, seed, DEFAULT_POP_CAP)
    }

    /// As [`WPools::simulate`] with an explicit population cap.
    #[allow(clippy::too_many_arguments)]
    pub fn simulate_capped(
        p: &ModelParams,
        s: &SpectralData,
        k1: usize,
        k2: usize,
        horizon: usize,
        size: usize,
        seed: u64,
        cap: u64,
    ) -> Result<Self> {
        let norm = WNormalizer::from(s);
        let surv = survival_prob(p);
        let pool_a = conditioned_w_pool_capped(p, &norm, k1, horizon, size, derive_seed(seed, "pool-a", 0), cap)?;
        let pool_b = conditioned_w_pool_capped(p, &norm, k2, horizon, size, derive_seed(seed, "pool-b", 0), cap)?;
        Self::new(pool_a, pool_b, surv[k1], surv[k2], horizon)
    }

    /// `P[W^A W^B > 0]`.
    pub fn joint_survival(&self) -> f64 {
        self.surv_a * self.surv_b
    }

    /// Mean of `f(w_A w_B)` over all pool pairs. Rows are summed in parallel
    /// and combined in row order.
    pub fn pair_mean(&self, f: impl Fn(f64) -> f64 + Sync) -> f64 {
        let rows: Vec<f64> = self
            .pool_a
            .par_iter()
            .map(|&a| self.pool_b.iter().map(|&b| f(a * b)).sum::<f64>())
            .collect();
        rows.iter().sum::<f64>() / (self.pool_a.len() * self.pool_b.len()) as f64
    }
}

/// The scale constants an approximation was computed with.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Scales {
    pub kappa: f64,
    pub tau: f64,
    pub phi_n: f64,
    pub i0: i64,
    pub n: u64,
}

impl From<&SpectralData> for Scales {
    fn from(s: &SpectralData) -> Self {
        Scales {
            kappa: s.kappa,
            tau: s.tau,
            phi_n: s.phi_n,
            i0: s.i0,
            n: s.n,
        }
    }
}

/// Which link intensity multiplies `W^A W^B` at offset `u`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Rate {
    /// `κ τ^u φ(n)`.
    #[default]
    Asymptotic,
    /// `L(i₀ + u)`.
    Exact,
}

impl Rate {
    fn value(self, sc: &Scales, u: i64) -> f64 {
        match self {
            Rate::Asymptotic => sc.kappa * sc.tau.powi(u as i32) * sc.phi_n,
            Rate::Exact => sc.kappa / sc.n as f64 * (sc.tau.powi((sc.i0 + u) as i32) - 1.0).max(0.0),
        }
    }
}

fn exceed_at_rate(pools: &WPools, rate: f64) -> f64 {
    let js = pools.joint_survival();
    js * pools.pair_mean(|x| (-x * rate).exp()) + (1.0 - js)
}

/// `E exp(-W^A W^B κ τ^u φ(n))`, approximating `P[D > i₀ + u]`.
pub fn exceed_prob(s: &SpectralData, pools: &WPools, u: i64) -> f64 {
    exceed_prob_with(&Scales::from(s), pools, u, Rate::Asymptotic)
}

pub fn exceed_prob_with(sc: &Scales, pools: &WPools, u: i64, rate: Rate) -> f64 {
    exceed_at_rate(pools, rate.value(sc, u))
}

/// `P[U′ ≤ u] = P[W^A W^B > 0] E[1 - exp(-W̃_A W̃_B κ τ^u)]`.
#[allow(non_snake_case)]
pub fn cdf_U_prime(s: &SpectralData, pools: &WPools, u: f64) -> f64 {
    pools.joint_survival() * cdf_U_prime_conditional(s, pools, u)
}

/// `P[Ũ ≤ u]`, the law of `U′` given that it is finite.
#[allow(non_snake_case)]
pub fn cdf_U_prime_conditional(s: &SpectralData, pools: &WPools, u: f64) -> f64 {
    let rate = s.kappa * s.tau.powf(u);
    pools.pair_mean(|x| -(-x * rate).exp_m1())
}

const UTILDE_CHUNK: usize = 4096;

/// Draws of `Ũ = -(Γ + ln W̃_A + ln W̃_B + ln κ)/ln τ` with `Γ` standard
/// Gumbel and `W̃_A`, `W̃_B` drawn uniformly from the pools. Chunk `c` of
/// 4096 draws uses `derive_seed(seed, "utilde", c)`.
#[allow(non_snake_case)]
pub fn sample_U_tilde(s: &SpectralData, pools: &WPools, count: usize, seed: u64) -> Vec<f64> {
    sample_U_tilde_scaled(s.kappa, s.tau, pools, count, seed)
}

#[allow(non_snake_case)]
pub fn sample_U_tilde_scaled(kappa: f64, tau: f64, pools: &WPools, count: usize, seed: u64) -> Vec<f64> {
    let (ln_kappa, ln_tau) = (kappa.ln(), tau.ln());
    let chunks = count.div_ceil(UTILDE_CHUNK);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = UTILDE_CHUNK.min(count - c * UTILDE_CHUNK);
            let mut rng = rng_from_seed(derive_seed(seed, "utilde", c as u64));
            (0..len)
                .map(|_| {
                    let g = standard_gumbel(&mut rng);
                    let wa = pools.pool_a[pick(&mut rng, pools.pool_a.len())];
                    let wb = pools.pool_b[pick(&mut rng, pools.pool_b.len())];
                    -(g + wa.ln() + wb.ln() + ln_kappa) / ln_tau
                })
                .collect()
        })
        .collect();
    parts.concat()
}

fn pick<R: rand::Rng + ?Sized>(rng: &mut R, len: usize) -> usize {
    ((open_unit(rng) * len as f64) as usize).min(len - 1)
}

/// `θ̃_i = √(i+1) (γ/τ²)^{i/4}`.
pub fn theta_tilde(s: &SpectralData, i: i64) -> f64 {
    ((i + 1) as f64).sqrt() * (s.gamma / (s.tau * s.tau)).powf(i as f64 / 4.0)
}

/// The error scale `δ(y) = c₂₅ {(y^{3/2}+1)(n^{1/4}e² ∧ 1) + (y+1) n^{1/4} e θ̃_{i₀}}`.
/// The constant `c₂₅` is not known, so this is a scale and not a bound.
pub fn delta_error_scale(s: &SpectralData, y: f64, c25: f64) -> f64 {
    let n4 = (s.n as f64).powf(0.25);
    let e = s.e_mn;
    c25 * ((y.powf(1.5) + 1.0) * (n4 * e * e).min(1.0) + (y + 1.0) * n4 * e * theta_tilde(s, s.i0))
}

/// Offsets `u` with `|u| < i₀/2`.
pub fn default_window(i0: i64) -> RangeInclusive<i64> {
    let h = (i0 - 1).max(0) / 2;
    -h..=h
}

/// Approximate law of `D - i₀` on a window of offsets, with its defect.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApproxLaw {
    pub support: Vec<i64>,
    pub exceed_prob: Vec<f64>,
    /// `P[U′ = ∞] = 1 - P[W^A > 0] P[W^B > 0]`.
    pub defect: f64,
    /// `None` for a model with no supercritical spectral data, where all mass
    /// is at infinity.
    pub scales: Option<Scales>,
}

impl ApproxLaw {
    pub fn compute(s: &SpectralData, pools: &WPools, window: RangeInclusive<i64>, rate: Rate) -> Self {
        let sc = Scales::from(s);
        let support: Vec<i64> = window.collect();
        let exceed_prob = support.iter().map(|&u| exceed_prob_with(&sc, pools, u, rate)).collect();
        ApproxLaw {
            support,
            exceed_prob,
            defect: 1.0 - pools.joint_survival(),
            scales: Some(sc),
        }
    }

    /// The law of a model without supercritical growth: `D = ∞` surely.
    pub fn degenerate() -> Self {
        ApproxLaw {
            support: Vec::new(),
            exceed_prob: Vec::new(),
            defect: 1.0,
            scales: None,
        }
    }

    /// `u,exceed_prob` rows then `inf,defect`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("u,exceed_prob\n");
        for (u, e) in self.support.iter().zip(&self.exceed_prob) {
            writeln!(s, "{u},{e}").unwrap();
        }
        writeln!(s, "inf,{}", self.defect).unwrap();
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompareRow {
    /// `None` for the row comparing the masses at infinity.
    pub u: Option<i64>,
    pub empirical: f64,
    pub approx: f64,
    pub abs_diff: f64,
    pub delta_scale: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub rows: Vec<CompareRow>,
}

impl Comparison {
    /// Largest difference over the finite offsets.
    pub fn max_abs_diff(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.u.is_some())
            .map(|r| r.abs_diff)
            .fold(0.0, f64::max)
    }

    pub fn defect_row(&self) -> &CompareRow {
        self.rows.iter().find(|r| r.u.is_none()).expect("defect row present")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("u,empirical_exceed,approx_exceed,abs_diff,delta_scale\n");
        for r in &self.rows {
            let u = r.u.map_or("inf".to_string(), |u| u.to_string());
            let d = r.delta_scale.map_or("nan".to_string(), |d| d.to_string());
            writeln!(s, "{u},{},{},{},{d}", r.empirical, r.approx, r.abs_diff).unwrap();
        }
        s
    }
}

/// Empirical exceedances `P̂[D > i₀ + u]` against the approximation, plus the
/// mass at infinity. Finite rows carry `δ(τ^u)`; the defect row carries
/// `δ(n^α)` with `α` in the middle of its admissible range `(0, (i₀-2)/2i₀)`.
pub fn compare(empirical: &DistanceLaw, s: Option<&SpectralData>, law: &ApproxLaw, c25: f64) -> Result<Comparison> {
    if empirical.total == 0 {
        return Err(Error::InvalidParams("empirical distance law is empty".into()));
    }
    let mut rows = Vec::new();
    match (s, &law.scales) {
        (Some(s), Some(sc)) => {
            if sc.i0 != s.i0 {
                return Err(Error::MismatchedI0 { law: sc.i0, model: s.i0 });
            }
            for (&u, &approx) in law.support.iter().zip(&law.exceed_prob) {
                let emp = empirical.exceed(s.i0 + u);
                rows.push(CompareRow {
                    u: Some(u),
                    empirical: emp,
                    approx,
                    abs_diff: (emp - approx).abs(),
                    delta_scale: Some(delta_error_scale(s, s.tau.powi(u as i32), c25)),
                });
            }
            let alpha = ((s.i0 - 2) as f64 / (4 * s.i0) as f64).max(0.0);
            let emp = empirical.prob_infinite();
            rows.push(CompareRow {
                u: None,
                empirical: emp,
                approx: law.defect,
                abs_diff: (emp - law.defect).abs(),
                delta_scale: Some(delta_error_scale(s, (s.n as f64).powf(alpha), c25)),
            });
        }
        (_, None) => {
            let emp = empirical.prob_infinite();
            rows.push(CompareRow {
                u: None,
                empirical: emp,
                approx: law.defect,
                abs_diff: (emp - law.defect).abs(),
                delta_scale: None,
            });
        }
        (None, Some(_)) => {
            return Err(Error::InvalidParams("approximation has scales but the model has none".into()));
        }
    }
    Ok(Comparison { rows })
}
