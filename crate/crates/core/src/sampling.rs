//! Random primitives shared by the graph sampler, the branching process and
//! the coincidence oracle.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

/// The generator used everywhere. ChaCha output is specified bit-for-bit, so
/// a seed reproduces the same stream on every platform.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One exact `Bi(trials, p)` draw.
///
/// Small means use inversion and large means the BTPE accept-reject scheme.
pub fn binomial<R: Rng + ?Sized>(rng: &mut R, trials: u64, p: f64) -> u64 {
    if trials == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return trials;
    }
    Binomial::new(trials, p)
        .expect("probability checked to lie in (0, 1)")
        .sample(rng)
}

/// Draws `count` distinct elements of `0..universe`, every subset of that size
/// being equally likely, and appends them to `out` in draw order.
///
/// This is a partial Fisher-Yates shuffle over a virtual identity array. Only
/// the swapped positions are stored, so the cost is linear in `count` and not
/// in `universe`.
pub fn sample_distinct<R: Rng + ?Sized>(rng: &mut R, universe: u64, count: u64, out: &mut Vec<u64>) {
    assert!(count <= universe, "cannot draw {count} distinct from {universe}");
    if count == 0 {
        return;
    }
    // Dense path once the draw is a sizeable share of the universe.
    if universe <= 64 || count.saturating_mul(4) >= universe {
        let mut slots: Vec<u64> = (0..universe).collect();
        for i in 0..count as usize {
            let j = rng.random_range(i..universe as usize);
            slots.swap(i, j);
            out.push(slots[i]);
        }
        return;
    }
    let mut swapped: HashMap<u64, u64> = HashMap::with_capacity(count as usize * 2);
    for i in 0..count {
        let j = rng.random_range(i..universe);
        let at_j = *swapped.get(&j).unwrap_or(&j);
        let at_i = *swapped.get(&i).unwrap_or(&i);
        swapped.insert(j, at_i);
        out.push(at_j);
    }
}

/// Uniform draw on `(0, 1)`, never returning either endpoint.
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Standard Gumbel variate by inversion of `F(g) = exp(-exp(-g))`.
pub fn standard_gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    -(-open_unit(rng).ln()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distinct_draws_are_distinct_and_in_range() {
        let mut rng = rng_from_seed(7);
        for &(universe, count) in &[(10u64, 10u64), (1000, 3), (1_000_000, 500), (65, 20), (2, 1)] {
            let mut out = Vec::new();
            sample_distinct(&mut rng, universe, count, &mut out);
            assert_eq!(out.len() as u64, count);
            let mut sorted = out.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len() as u64, count);
            assert!(out.iter().all(|&x| x < universe));
        }
    }

    #[test]
    fn sparse_draw_is_uniform_over_elements() {
        // Each element of a 200-set should be hit with probability 3/200.
        let mut rng = rng_from_seed(11);
        let mut hits = vec![0u32; 200];
        let reps = 200_000;
        let mut out = Vec::new();
        for _ in 0..reps {
            out.clear();
            sample_distinct(&mut rng, 200, 3, &mut out);
            for &x in &out {
                hits[x as usize] += 1;
            }
        }
        let expected = reps as f64 * 3.0 / 200.0;
        let sd = (expected * (1.0 - 3.0 / 200.0)).sqrt();
        for &h in &hits {
            assert!((h as f64 - expected).abs() < 5.0 * sd, "{h} vs {expected}");
        }
    }

    #[test]
    fn binomial_edges() {
        let mut rng = rng_from_seed(1);
        assert_eq!(binomial(&mut rng, 10, 0.0), 0);
        assert_eq!(binomial(&mut rng, 10, 1.0), 10);
        assert_eq!(binomial(&mut rng, 0, 0.5), 0);
    }

    #[test]
    fn gumbel_mean() {
        let mut rng = rng_from_seed(3);
        let n = 200_000;
        let mean = (0..n).map(|_| standard_gumbel(&mut rng)).sum::<f64>() / n as f64;
        // Euler-Mascheroni constant; sd of the Gumbel is pi/sqrt(6).
        let se = std::f64::consts::PI / 6f64.sqrt() / (n as f64).sqrt();
        assert!((mean - 0.577_215_664_901_532_9).abs() < 4.0 * se);
    }
}
