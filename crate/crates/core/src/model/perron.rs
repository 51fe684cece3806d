//! Perron root and eigenvectors of nonnegative primitive matrices, and the
//! modulus of the subdominant eigenvalue.

use std::collections::VecDeque;

use super::linalg::{dot, norm1, Matrix};
use crate::{Error, Result};

/// Relative Collatz-Wielandt gap at which power iteration stops.
pub const PERRON_TOL: f64 = 1e-12;
pub const MAX_ITER: usize = 100_000;

/// Perron root with left and right eigenvectors, normalised so that
/// `‖left‖₁ = 1` and `leftᵀ right = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Perron {
    pub tau: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

/// Period of the support digraph of an irreducible matrix: the gcd of the
/// lengths of all its cycles. Returns `Error::Reducible` when some state
/// cannot reach some other.
pub fn support_period(m: &Matrix) -> Result<usize> {
    assert!(m.is_square());
    let n = m.rows();
    if n == 0 {
        return Err(Error::Reducible);
    }
    let reach = |from: usize, transpose: bool| -> Vec<Option<usize>> {
        let mut level = vec![None; n];
        level[from] = Some(0);
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            let lu = level[u].unwrap();
            for v in 0..n {
                let w = if transpose { m[(v, u)] } else { m[(u, v)] };
                if w > 0.0 && level[v].is_none() {
                    level[v] = Some(lu + 1);
                    queue.push_back(v);
                }
            }
        }
        level
    };
    let forward = reach(0, false);
    let backward = reach(0, true);
    if forward.iter().chain(&backward).any(Option::is_none) {
        return Err(Error::Reducible);
    }
    // Every cycle length is a multiple of the gcd of level(u) + 1 - level(v)
    // over the edges u -> v, and that gcd is attained.
    let mut g = 0usize;
    for u in 0..n {
        for v in 0..n {
            if m[(u, v)] > 0.0 {
                let d = (forward[u].unwrap() as i64 + 1 - forward[v].unwrap() as i64).unsigned_abs() as usize;
                g = gcd(g, d);
            }
        }
    }
    if g == 0 {
        // No edges at all, e.g. the 1x1 zero matrix.
        return Err(Error::Reducible);
    }
    Ok(g)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Checks that `m` is irreducible and aperiodic (primitive).
pub fn check_primitive(m: &Matrix) -> Result<()> {
    match support_period(m)? {
        1 => Ok(()),
        p => Err(Error::Periodic(p)),
    }
}

/// Dominant eigenpair of a primitive matrix acting on the right (`M x = τ x`).
///
/// Stops once the Collatz-Wielandt bounds `min (Mx)_i/x_i ≤ τ ≤ max (Mx)_i/x_i`
/// agree to `PERRON_TOL` relative.
fn power_right(m: &Matrix) -> Result<(f64, Vec<f64>)> {
    let n = m.rows();
    let mut x = vec![1.0 / n as f64; n];
    for _ in 0..MAX_ITER {
        let y = m.mul_vec(&x);
        let s = norm1(&y);
        if !(s > 0.0) {
            return Err(Error::Reducible);
        }
        let positive = x.iter().all(|&v| v > 0.0);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        if positive {
            for (yi, xi) in y.iter().zip(&x) {
                let r = yi / xi;
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        x = y.into_iter().map(|v| v / s).collect();
        if positive && hi - lo <= PERRON_TOL * hi {
            let mx = m.mul_vec(&x);
            let tau = dot(&mx, &x) / dot(&x, &x);
            return Ok((tau, x));
        }
    }
    Err(Error::NoConvergence(MAX_ITER))
}

/// Perron root and normalised eigenvectors of a primitive nonnegative matrix.
pub fn perron(m: &Matrix) -> Result<Perron> {
    check_primitive(m)?;
    let (tau, right) = power_right(m)?;
    let (_, left) = power_right(&m.transpose())?;
    let l1 = norm1(&left);
    let left: Vec<f64> = left.iter().map(|v| v / l1).collect();
    let scale = dot(&left, &right);
    let right = right.iter().map(|v| v / scale).collect();
    Ok(Perron { tau, left, right })
}

/// Spectral radius of an arbitrary square matrix, computed by power iteration
/// with step doubling: `ρ(B) = lim ‖B^N‖^{1/N}` along `N = 2^s`, with the
/// iterate renormalised after every squaring.
pub fn spectral_radius(b: &Matrix) -> f64 {
    let norm = b.norm_inf();
    if norm == 0.0 {
        return 0.0;
    }
    let mut a = b.scale(1.0 / norm);
    let mut log_norm = norm.ln();
    let mut steps = 1.0f64;
    for _ in 0..60 {
        let sq = a.matmul(&a);
        let s = sq.norm_inf();
        if s == 0.0 {
            return 0.0;
        }
        a = sq.scale(1.0 / s);
        log_norm = 2.0 * log_norm + s.ln();
        steps *= 2.0;
    }
    (log_norm / steps).exp()
}

/// `M - τ ν μᵀ`, the part of `M` orthogonal to the Perron projection.
pub fn deflate(m: &Matrix, p: &Perron) -> Matrix {
    m.sub(&Matrix::outer(&p.right, &p.left).scale(p.tau))
}

/// `|λ₂|`, the largest modulus among the non-Perron eigenvalues. Values below
/// `1e-10 τ` are rounding residue of an exactly singular deflation and are
/// reported as zero.
pub fn second_modulus(m: &Matrix, p: &Perron) -> f64 {
    let r = spectral_radius(&deflate(m, p));
    if r < 1e-10 * p.tau {
        0.0
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar() {
        let p = perron(&Matrix::from_rows(&[vec![4.0]])).unwrap();
        assert_eq!(p.tau, 4.0);
        assert_eq!(p.left, vec![1.0]);
        assert_eq!(p.right, vec![1.0]);
    }

    #[test]
    fn two_cycle_is_periodic() {
        let m = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(matches!(perron(&m), Err(Error::Periodic(2))));
    }

    #[test]
    fn reducible_detected() {
        let m = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]);
        assert!(matches!(perron(&m), Err(Error::Reducible)));
        assert!(matches!(perron(&Matrix::zeros(1, 1)), Err(Error::Reducible)));
    }

    #[test]
    fn known_second_eigenvalue() {
        // Characteristic polynomial x² - 6.5x + 7.5 = (x - 5)(x - 1.5).
        let m = Matrix::from_rows(&[vec![4.0, 1.0], vec![2.5, 2.5]]);
        let p = perron(&m).unwrap();
        assert!((p.tau - 5.0).abs() < 1e-12);
        assert!((second_modulus(&m, &p) - 1.5).abs() < 1e-9);
    }

    #[test]
    fn complex_pair_modulus() {
        // circ(2, 1, 0) has eigenvalues 3 and 2 + ω, 2 + ω² with |2 + ω| = √3.
        let m = Matrix::from_rows(&[
            vec![2.0, 1.0, 0.0],
            vec![0.0, 2.0, 1.0],
            vec![1.0, 0.0, 2.0],
        ]);
        let p = perron(&m).unwrap();
        assert!((p.tau - 3.0).abs() < 1e-12);
        assert!((second_modulus(&m, &p) - 3f64.sqrt()).abs() < 1e-9);
    }
}
