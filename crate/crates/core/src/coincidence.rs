//! Coincidences between two families of uniformly drawn subsets, their
//! Poisson approximation and explicit error bounds, with exact and Monte Carlo
//! oracles for the no-coincidence probability.
//!
//! For each class `l` side A draws subsets of sizes `zA[l][r]` from a set of
//! `w[l]` labels and side B draws subsets of sizes `zB[l][r']`, all
//! independently. `S` counts pairs (one element from each side) carrying the
//! same label outside the excluded set `W*_l`, taken here to be the first
//! `wstar[l]` labels.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::harness::seed::derive_seed;
use crate::sampling::{rng_from_seed, sample_distinct};
use crate::{Error, Result};

/// Upper limit on the work of one exact evaluation.
pub const MAX_EXACT_COST: u128 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingScheme {
    pub w: Vec<u64>,
    #[serde(rename = "zA")]
    pub z_a: Vec<Vec<u64>>,
    #[serde(rename = "zB")]
    pub z_b: Vec<Vec<u64>>,
    pub wstar: Vec<u64>,
}

impl SamplingScheme {
    /// A scheme with one draw per class and side.
    pub fn single(w: Vec<u64>, z_a: Vec<u64>, z_b: Vec<u64>, wstar: Vec<u64>) -> Result<Self> {
        let s = SamplingScheme {
            w,
            z_a: z_a.into_iter().map(|z| vec![z]).collect(),
            z_b: z_b.into_iter().map(|z| vec![z]).collect(),
            wstar,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn classes(&self) -> usize {
        self.w.len()
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.w.len();
        if l == 0 || self.z_a.len() != l || self.z_b.len() != l || self.wstar.len() != l {
            return Err(Error::InvalidParams(
                "w, zA, zB and wstar must have the same nonzero length".into(),
            ));
        }
        for i in 0..l {
            let w = self.w[i];
            if w < 2 {
                return Err(Error::InvalidParams(format!("w_{} = {w} < 2", i + 1)));
            }
            if self.z_a[i].iter().chain(&self.z_b[i]).any(|&z| z > w) {
                return Err(Error::InvalidParams(format!("draw size exceeds w_{} = {w}", i + 1)));
            }
            if self.wstar[i] > w {
                return Err(Error::InvalidParams(format!("w*_{} exceeds w_{}", i + 1, i + 1)));
            }
        }
        Ok(())
    }

    /// `z_l`, the total drawn by side A in class `l`.
    pub fn z_total_a(&self, l: usize) -> u64 {
        self.z_a[l].iter().sum()
    }

    pub fn z_total_b(&self, l: usize) -> u64 {
        self.z_b[l].iter().sum()
    }

    fn totals(&self) -> (Vec<f64>, Vec<f64>) {
        (
            (0..self.classes()).map(|l| self.z_total_a(l) as f64).collect(),
            (0..self.classes()).map(|l| self.z_total_b(l) as f64).collect(),
        )
    }
}

fn lambda_of(x: &[f64], y: &[f64], w: &[u64]) -> f64 {
    x.iter().zip(y).zip(w).map(|((a, b), &w)| a * b / w as f64).sum()
}

/// `λ = Σ_l z_l z′_l / w_l`.
pub fn lambda_value(s: &SamplingScheme) -> f64 {
    let (za, zb) = s.totals();
    lambda_of(&za, &zb, &s.w)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bounds {
    pub b1: f64,
    pub b1_star: f64,
    pub b2: f64,
}

/// `B1 = 2 Σ (z_l + z′_l)/w_l`, `B1* = Σ z_l z′_l w*_l / w_l²` and
/// `B2 = λ̄(z, ε′) + λ̄(ε, z′) + λ̄(ε, ε′)` with `λ̄ = min(λ, 1)`.
pub fn bounds(s: &SamplingScheme, eps_a: &[f64], eps_b: &[f64]) -> Bounds {
    assert_eq!(eps_a.len(), s.classes());
    assert_eq!(eps_b.len(), s.classes());
    let (za, zb) = s.totals();
    let b1 = 2.0
        * (0..s.classes())
            .map(|l| (za[l] + zb[l]) / s.w[l] as f64)
            .sum::<f64>();
    let b1_star = (0..s.classes())
        .map(|l| za[l] * zb[l] * s.wstar[l] as f64 / (s.w[l] as f64).powi(2))
        .sum();
    let bar = |x: &[f64], y: &[f64]| lambda_of(x, y, &s.w).min(1.0);
    let b2 = bar(&za, eps_b) + bar(eps_a, &zb) + bar(eps_a, eps_b);
    Bounds { b1, b1_star, b2 }
}

/// An exact probability as a fraction of counts, kept in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ratio {
    pub num: u128,
    pub den: u128,
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Ratio {
    pub fn new(num: u128, den: u128) -> Self {
        let g = gcd(num, den).max(1);
        Ratio {
            num: num / g,
            den: den / g,
        }
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// `C(n, k)` with overflow detection.
pub fn binom_u128(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k as u128 {
        c = c.checked_mul(n as u128 - i)? / (i + 1);
    }
    Some(c)
}

/// `ln C(n, k)` in floating point, for sizes beyond exact integers.
fn ln_binom(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum()
}

/// Single-draw no-coincidence probability for one class: side A's `z` labels
/// meet `a` of the excluded labels with hypergeometric probability, and B's
/// `z′` labels must avoid the `z - a` non-excluded ones.
pub fn single_draw_closed_form(w: u64, z: u64, z2: u64, wstar: u64) -> f64 {
    let lo = z.saturating_sub(w - wstar);
    let hi = z.min(wstar);
    (lo..=hi)
        .map(|a| {
            let ln_h = ln_binom(wstar, a) + ln_binom(w - wstar, z - a) - ln_binom(w, z);
            let ln_avoid = ln_binom(w - (z - a), z2) - ln_binom(w, z2);
            (ln_h + ln_avoid).exp()
        })
        .sum()
}

/// The same closed form as an exact fraction, when the counts fit.
pub fn single_draw_ratio(w: u64, z: u64, z2: u64, wstar: u64) -> Option<Ratio> {
    let lo = z.saturating_sub(w - wstar);
    let hi = z.min(wstar);
    let mut num: u128 = 0;
    for a in lo..=hi {
        let term = binom_u128(wstar, a)?
            .checked_mul(binom_u128(w - wstar, z - a)?)?
            .checked_mul(binom_u128(w - (z - a), z2)?)?;
        num = num.checked_add(term)?;
    }
    let den = binom_u128(w, z)?.checked_mul(binom_u128(w, z2)?)?;
    Some(Ratio::new(num, den))
}

/// All `k`-subsets of `0..w` as bit masks, `w ≤ 64`.
fn subsets(w: u64, k: u64) -> Vec<u64> {
    if k == 0 {
        return vec![0];
    }
    if k > w {
        return Vec::new();
    }
    let limit: u128 = 1u128 << w;
    let mut out = Vec::new();
    let mut x: u64 = if k == 64 { u64::MAX } else { (1u64 << k) - 1 };
    loop {
        out.push(x);
        // Gosper's hack: next larger integer with the same popcount.
        let c = x & x.wrapping_neg();
        let r = x as u128 + c as u128;
        if r >= limit {
            break;
        }
        let r = r as u64;
        x = (((r ^ x) >> 2) / c) | r;
    }
    out
}

/// Distribution of the union of independent uniform draws, as mask counts.
fn union_counts(w: u64, draws: &[u64]) -> HashMap<u64, u128> {
    let mut acc: HashMap<u64, u128> = HashMap::from([(0, 1)]);
    for &z in draws {
        let subs = subsets(w, z);
        let mut next: HashMap<u64, u128> = HashMap::new();
        for (&mask, &count) in &acc {
            for &s in &subs {
                *next.entry(mask | s).or_insert(0) += count;
            }
        }
        acc = next;
    }
    acc
}

fn tuples(w: u64, draws: &[u64]) -> Option<u128> {
    draws.iter().try_fold(1u128, |acc, &z| acc.checked_mul(binom_u128(w, z)?))
}

/// Work estimate of enumerating one class: the draw tuples of each side plus
/// the pairs of distinct unions.
fn enumeration_cost(w: u64, za: &[u64], zb: &[u64]) -> Option<u128> {
    if w > 64 {
        return None;
    }
    let (ta, tb) = (tuples(w, za)?, tuples(w, zb)?);
    let states = 1u128 << w.min(100);
    ta.checked_add(tb)?.checked_add(ta.min(states).checked_mul(tb.min(states))?)
}

/// Exact no-coincidence probability of one class by enumerating every draw.
pub fn enumerate_class(w: u64, za: &[u64], zb: &[u64], wstar: u64) -> Result<Ratio> {
    match enumeration_cost(w, za, zb) {
        Some(c) if c <= MAX_EXACT_COST => {}
        c => return Err(Error::InstanceTooLarge(c.unwrap_or(u128::MAX))),
    }
    let counted = if wstar >= 64 { 0 } else { !((1u64 << wstar) - 1) };
    let a = union_counts(w, za);
    let b = union_counts(w, zb);
    let mut good: u128 = 0;
    for (&ma, &ca) in &a {
        for (&mb, &cb) in &b {
            if ma & mb & counted == 0 {
                good += ca * cb;
            }
        }
    }
    let total = tuples(w, za).unwrap() * tuples(w, zb).unwrap();
    Ok(Ratio::new(good, total))
}

/// Exact `P[S = 0]`, a product over the independent classes. Classes with at
/// most one draw per side use the closed form; the rest are enumerated.
pub fn p_no_collision_exact(s: &SamplingScheme) -> Result<f64> {
    s.validate()?;
    let mut cost: u128 = 0;
    for l in 0..s.classes() {
        if s.z_a[l].len() > 1 || s.z_b[l].len() > 1 {
            cost = cost.saturating_add(enumeration_cost(s.w[l], &s.z_a[l], &s.z_b[l]).unwrap_or(u128::MAX));
        }
    }
    if cost > MAX_EXACT_COST {
        return Err(Error::InstanceTooLarge(cost));
    }
    let mut prob = 1.0;
    for l in 0..s.classes() {
        prob *= if s.z_a[l].len() <= 1 && s.z_b[l].len() <= 1 {
            single_draw_closed_form(s.w[l], s.z_total_a(l), s.z_total_b(l), s.wstar[l])
        } else {
            enumerate_class(s.w[l], &s.z_a[l], &s.z_b[l], s.wstar[l])?.value()
        };
    }
    Ok(prob)
}

/// Monte Carlo estimate of `P[S = 0]` with its binomial standard error.
/// Replicate `r` uses `derive_seed(seed, "coincidence", r)`.
pub fn p_no_collision_mc(s: &SamplingScheme, reps: u64, seed: u64) -> Result<(f64, f64)> {
    s.validate()?;
    if reps == 0 {
        return Err(Error::InvalidParams("reps must be at least 1".into()));
    }
    let hits: Vec<bool> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from_seed(derive_seed(seed, "coincidence", r));
            let mut picks = Vec::new();
            let mut clear = true;
            for l in 0..s.classes() {
                let mut seen = HashSet::new();
                for &z in &s.z_a[l] {
                    picks.clear();
                    sample_distinct(&mut rng, s.w[l], z, &mut picks);
                    seen.extend(picks.iter().copied().filter(|&x| x >= s.wstar[l]));
                }
                for &z in &s.z_b[l] {
                    picks.clear();
                    sample_distinct(&mut rng, s.w[l], z, &mut picks);
                    if picks.iter().any(|x| seen.contains(x)) {
                        clear = false;
                    }
                }
            }
            clear
        })
        .collect();
    let est = hits.iter().filter(|&&h| h).count() as f64 / reps as f64;
    Ok((est, (est * (1.0 - est) / reps as f64).sqrt()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PoissonReport {
    pub lambda: f64,
    pub p_no_collision: f64,
    /// `None` when `p_no_collision` is exact.
    pub std_error: Option<f64>,
    pub exp_neg_lambda: f64,
    pub abs_diff: f64,
    /// `B1 + B1*`.
    pub bound: f64,
    pub pass: bool,
}

impl PoissonReport {
    pub const CSV_HEADER: &'static str = "lambda,p_no_collision,std_error,exp_neg_lambda,abs_diff,bound,method,pass";

    pub fn csv_row(&self) -> String {
        let (se, method) = match self.std_error {
            Some(se) => (se.to_string(), "mc"),
            None => ("0".to_string(), "exact"),
        };
        format!(
            "{},{},{},{},{},{},{},{}",
            self.lambda, self.p_no_collision, se, self.exp_neg_lambda, self.abs_diff, self.bound, method, self.pass
        )
    }
}

fn report(s: &SamplingScheme, prob: f64, se: Option<f64>) -> PoissonReport {
    let lambda = lambda_value(s);
    let b = bounds(s, &vec![0.0; s.classes()], &vec![0.0; s.classes()]);
    let exp_neg_lambda = (-lambda).exp();
    let abs_diff = (prob - exp_neg_lambda).abs();
    let bound = b.b1 + b.b1_star;
    PoissonReport {
        lambda,
        p_no_collision: prob,
        std_error: se,
        exp_neg_lambda,
        abs_diff,
        bound,
        pass: abs_diff <= bound + 3.0 * se.unwrap_or(0.0),
    }
}

/// Compares `P[S = 0]` with `e^{-λ}` against `B1 + B1*`, exactly when the
/// instance is small enough and otherwise by Monte Carlo, where three
/// standard errors are added to the allowance.
pub fn poisson_check_with(s: &SamplingScheme, mc_reps: u64, seed: u64) -> Result<PoissonReport> {
    match p_no_collision_exact(s) {
        Ok(p) => Ok(report(s, p, None)),
        Err(Error::InstanceTooLarge(_)) => {
            let (p, se) = p_no_collision_mc(s, mc_reps, seed)?;
            Ok(report(s, p, Some(se)))
        }
        Err(e) => Err(e),
    }
}

pub fn poisson_check(s: &SamplingScheme) -> Result<PoissonReport> {
    poisson_check_with(s, 100_000, 0)
}

/// Every one-class scheme with `w ∈ 2..=max_w`, one or two draws per side of
/// sizes `0..=max_z` (at most `w`), and `w* ∈ {0, 1}`.
pub fn small_grid(max_w: u64, max_z: u64) -> Vec<SamplingScheme> {
    let mut out = Vec::new();
    for w in 2..=max_w {
        let zmax = max_z.min(w);
        let mut draw_lists = Vec::new();
        for a in 0..=zmax {
            draw_lists.push(vec![a]);
        }
        for a in 0..=zmax {
            for b in 0..=zmax {
                draw_lists.push(vec![a, b]);
            }
        }
        for za in &draw_lists {
            for zb in &draw_lists {
                for wstar in 0..=1 {
                    out.push(SamplingScheme {
                        w: vec![w],
                        z_a: vec![za.clone()],
                        z_b: vec![zb.clone()],
                        wstar: vec![wstar],
                    });
                }
            }
        }
    }
    out
}

pub fn reports_csv(rows: &[(SamplingScheme, PoissonReport)]) -> String {
    let mut s = format!("scheme,{}\n", PoissonReport::CSV_HEADER);
    for (scheme, r) in rows {
        let json = serde_json::to_string(scheme).unwrap().replace('"', "\"\"");
        writeln!(s, "\"{json}\",{}", r.csv_row()).unwrap();
    }
    s
}
