//! Model parameters and every spectral or scalar quantity derived from them.

mod linalg;
mod perron;
mod rank1;

use serde::{Deserialize, Serialize};

pub use linalg::Matrix;
pub use perron::{check_primitive, deflate, perron, second_modulus, spectral_radius, support_period, Perron};
pub use rank1::{rank1_build, Rank1Input, Rank1Model, Rank1Params};

use linalg::{dot, norm1, norm_inf};

use crate::{Error, Result};

/// The law of the bipartite graph: `n[k]` vertices of type `k`, `m[j]`
/// objects of type `j`, and edge probability `p[(k, j)]` between them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub n: Vec<u64>,
    pub m: Vec<u64>,
    #[serde(rename = "P")]
    pub p: Matrix,
}

impl ModelParams {
    pub fn new(n: Vec<u64>, m: Vec<u64>, p: Matrix) -> Result<Self> {
        let params = ModelParams { n, m, p };
        params.validate()?;
        Ok(params)
    }

    /// Single vertex type and single object type with edge probability `p`.
    pub fn scalar(n: u64, m: u64, p: f64) -> Result<Self> {
        Self::new(vec![n], vec![m], Matrix::from_rows(&[vec![p]]))
    }

    /// Constant edge probability `p` for every pair of types.
    pub fn homogeneous(n: Vec<u64>, m: Vec<u64>, p: f64) -> Result<Self> {
        let pm = Matrix::from_fn(n.len(), m.len(), |_, _| p);
        Self::new(n, m, pm)
    }

    pub fn vertex_types(&self) -> usize {
        self.n.len()
    }

    pub fn object_types(&self) -> usize {
        self.m.len()
    }

    /// Total number of vertices `n = Σ n_k`.
    pub fn n_total(&self) -> u64 {
        self.n.iter().sum()
    }

    /// Total number of objects `m = Σ m_j`.
    pub fn m_total(&self) -> u64 {
        self.m.iter().sum()
    }

    /// Reports the first violated constraint; type indices are 1-based.
    pub fn validate(&self) -> Result<()> {
        let (k, j) = (self.n.len(), self.m.len());
        if k == 0 || j == 0 {
            return Err(Error::InvalidParams("at least one vertex and one object type required".into()));
        }
        if self.p.rows() != k || self.p.cols() != j {
            return Err(Error::InvalidParams(format!(
                "P is {}x{}, expected {k}x{j}",
                self.p.rows(),
                self.p.cols()
            )));
        }
        if let Some((i, &v)) = self.n.iter().enumerate().find(|(_, &v)| v < 2) {
            return Err(Error::InvalidParams(format!("n_{} = {v} < 2", i + 1)));
        }
        if let Some((i, &v)) = self.m.iter().enumerate().find(|(_, &v)| v < 2) {
            return Err(Error::InvalidParams(format!("m_{} = {v} < 2", i + 1)));
        }
        for a in 0..k {
            for b in 0..j {
                let v = self.p[(a, b)];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidParams(format!("p_{}{} = {v}: p out of [0,1]", a + 1, b + 1)));
                }
            }
        }
        Ok(())
    }

    fn n_f64(&self) -> Vec<f64> {
        self.n.iter().map(|&v| v as f64).collect()
    }

    fn m_f64(&self) -> Vec<f64> {
        self.m.iter().map(|&v| v as f64).collect()
    }
}

pub fn validate_params(p: &ModelParams) -> Result<()> {
    p.validate()
}

/// Mean matrices of the vertex and object processes,
/// `M_X = P N_Y Pᵀ N_X` and `M_Y = Pᵀ N_X P N_Y`.
pub fn mean_matrices(p: &ModelParams) -> (Matrix, Matrix) {
    let (nx, ny) = (p.n_f64(), p.m_f64());
    let pt = p.p.transpose();
    let m_x = p.p.scale_cols(&ny).matmul(&pt).scale_cols(&nx);
    let m_y = pt.scale_cols(&nx).matmul(&p.p).scale_cols(&ny);
    (m_x, m_y)
}

/// Everything derived from the Perron data of `M_X`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralData {
    pub n: u64,
    pub m: u64,
    #[serde(rename = "M_X")]
    pub m_x: Matrix,
    #[serde(rename = "M_Y")]
    pub m_y: Matrix,
    pub tau: f64,
    /// Modulus of the subdominant eigenvalue of `M_X`.
    pub lambda2_mod: f64,
    pub gamma: f64,
    pub theta: f64,
    /// Left Perron vector of `M_X`, `‖μ‖₁ = 1`.
    pub mu: Vec<f64>,
    /// Right Perron vector of `M_X`, `μᵀν = 1`.
    pub nu: Vec<f64>,
    /// Left Perron vector of `M_Y`, `‖μ̃‖₁ = 1`.
    pub mu_tilde: Vec<f64>,
    pub zeta: f64,
    pub zeta_star: f64,
    #[serde(rename = "Z_star")]
    pub z_star: f64,
    /// The constant whose square is `τ (Σ μ_k²/q^X_k) / (Σ μ̃_j²/q^Y_j)`.
    #[serde(rename = "frakZ")]
    pub frak_z: f64,
    /// `(τ/(τ-1)) Σ μ_k²/q^X_k`.
    pub kappa: f64,
    /// `(τ/(τ-1)) Σ μ_k²/n_k`, kept as a diagnostic only.
    pub kappa_printed: f64,
    #[serde(rename = "qX")]
    pub q_x: Vec<f64>,
    #[serde(rename = "qY")]
    pub q_y: Vec<f64>,
    #[serde(rename = "rhoX")]
    pub rho_x: f64,
    #[serde(rename = "rhoY")]
    pub rho_y: f64,
    pub i0: i64,
    pub phi_n: f64,
    pub e_mn: f64,
    pub u_mn: f64,
}

impl SpectralData {
    pub fn compute(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let (m_x, m_y) = mean_matrices(params);
        let pf = perron(&m_x)?;
        let tau = pf.tau;
        if !(tau > 1.0) {
            return Err(Error::NotSupercritical(tau));
        }
        let lambda2_mod = second_modulus(&m_x, &pf);
        let (gamma, theta) = gamma_theta(tau, lambda2_mod)?;

        let (n, m) = (params.n_total(), params.m_total());
        let (nf, mf) = (n as f64, m as f64);
        let ny = params.m_f64();
        let q_x: Vec<f64> = params.n.iter().map(|&v| v as f64 / nf).collect();
        let q_y: Vec<f64> = params.m.iter().map(|&v| v as f64 / mf).collect();
        let mu = pf.left;
        let nu = pf.right;

        // ζ = μᵀ P N_Y 1 and μ̃ = ζ⁻¹ N_Y Pᵀ μ.
        let pt_mu = params.p.vec_mul(&mu);
        let unnorm: Vec<f64> = pt_mu.iter().zip(&ny).map(|(a, b)| a * b).collect();
        let zeta: f64 = unnorm.iter().sum();
        let mu_tilde: Vec<f64> = unnorm.iter().map(|v| v / zeta).collect();

        let sx: f64 = mu.iter().zip(&q_x).map(|(a, q)| a * a / q).sum();
        let sy: f64 = mu_tilde.iter().zip(&q_y).map(|(a, q)| a * a / q).sum();
        let frak_z = (tau * sx / sy).sqrt();

        let j = params.object_types() as f64;
        let zeta_star = j * (0..params.object_types())
            .flat_map(|b| (0..params.vertex_types()).map(move |a| (a, b)))
            .map(|(a, b)| params.p[(a, b)] * ny[b])
            .fold(0.0, f64::max);
        let z_star = zeta_star * (nf / mf).sqrt();

        let kappa = tau / (tau - 1.0) * sx;
        let kappa_printed = tau / (tau - 1.0) * mu.iter().zip(&params.n).map(|(a, &nk)| a * a / nk as f64).sum::<f64>();

        let rho_x = mu.iter().zip(&q_x).map(|(a, q)| a / q).fold(0.0, f64::max);
        let rho_y = mu_tilde.iter().zip(&q_y).map(|(a, q)| a / q).fold(0.0, f64::max);

        let i0 = i0_for(n, tau);
        let phi_n = tau.powi(i0 as i32) / nf;
        let e_mn = nf.powf(-0.25) + mf.powf(-0.25);
        let r = (mf / nf).powf(0.25);
        let u_mn = r * (1.0 + r);

        Ok(SpectralData {
            n,
            m,
            m_x,
            m_y,
            tau,
            lambda2_mod,
            gamma,
            theta,
            mu,
            nu,
            mu_tilde,
            zeta,
            zeta_star,
            z_star,
            frak_z,
            kappa,
            kappa_printed,
            q_x,
            q_y,
            rho_x,
            rho_y,
            i0,
            phi_n,
            e_mn,
            u_mn,
        })
    }
}

pub fn derived_scalars(params: &ModelParams) -> Result<SpectralData> {
    SpectralData::compute(params)
}

/// Largest `i` with `τ^i ≤ n`, so that `τ^i ≤ n < τ^{i+1}`.
pub fn i0_for(n: u64, tau: f64) -> i64 {
    assert!(tau > 1.0);
    let nf = n as f64;
    let mut i = (nf.ln() / tau.ln()).floor().max(0.0) as i64;
    while i > 0 && tau.powi(i as i32) > nf {
        i -= 1;
    }
    while tau.powi(i as i32 + 1) <= nf {
        i += 1;
    }
    i
}

/// `γ = max{τ, |λ₂|²}` and `θ = max_{s≥0} (s+1)(√γ/τ)^s`.
///
/// The maximand is unimodal in `s`; the scan stops once it has stayed below
/// its running maximum for ten consecutive steps.
pub fn gamma_theta(tau: f64, lambda2_mod: f64) -> Result<(f64, f64)> {
    if !(tau > 1.0) {
        return Err(Error::NotSupercritical(tau));
    }
    let gamma = tau.max(lambda2_mod * lambda2_mod);
    let r = gamma.sqrt() / tau;
    let (mut best, mut below) = (0.0f64, 0u32);
    let mut s = 0i32;
    while below < 10 {
        let v = (s as f64 + 1.0) * r.powi(s);
        if v > best {
            best = v;
            below = 0;
        } else {
            below += 1;
        }
        s += 1;
    }
    Ok((gamma, best))
}

/// Numerical check of every identity a [`SpectralData`] should satisfy.
/// Residuals are relative; the two booleans are exact integer or order facts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    /// `‖μᵀM_X - τμᵀ‖∞ / (τ‖μ‖∞)`.
    pub left_eigen: f64,
    /// `‖M_Xν - τν‖∞ / (τ‖ν‖∞)`.
    pub right_eigen: f64,
    /// `‖μ̃ᵀM_Y - τμ̃ᵀ‖∞ / (τ‖μ̃‖∞)`.
    pub mu_tilde_eigen: f64,
    pub mu_norm: f64,
    pub mu_nu: f64,
    pub mu_tilde_norm: f64,
    /// `|ζ²n/m - 𝔷²| / 𝔷²` with `𝔷²` recomputed from `μ` and `μ̃`.
    pub zeta_identity: f64,
    pub i0_bracket: bool,
    pub zeta_sandwich: bool,
}

impl IdentityReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.left_eigen,
            self.right_eigen,
            self.mu_tilde_eigen,
            self.mu_norm,
            self.mu_nu,
            self.mu_tilde_norm,
            self.zeta_identity,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// True when every residual is within `tol` and both exact checks hold.
    pub fn holds(&self, tol: f64) -> bool {
        self.max_residual() <= tol && self.i0_bracket && self.zeta_sandwich
    }
}

pub fn identity_report(s: &SpectralData) -> IdentityReport {
    let eigen_residual = |m: &Matrix, v: &[f64], left: bool| {
        let mv = if left { m.vec_mul(v) } else { m.mul_vec(v) };
        let diff: Vec<f64> = mv.iter().zip(v).map(|(a, b)| a - s.tau * b).collect();
        norm_inf(&diff) / (s.tau * norm_inf(v))
    };
    let sx: f64 = s.mu.iter().zip(&s.q_x).map(|(a, q)| a * a / q).sum();
    let sy: f64 = s.mu_tilde.iter().zip(&s.q_y).map(|(a, q)| a * a / q).sum();
    let z2 = s.tau * sx / sy;
    let lhs = s.zeta * s.zeta * s.n as f64 / s.m as f64;
    let nf = s.n as f64;
    let bracket = s.tau.powi(s.i0 as i32) <= nf && nf < s.tau.powi(s.i0 as i32 + 1);
    let min_mu = s.mu.iter().copied().fold(f64::INFINITY, f64::min);
    let j = s.mu_tilde.len() as f64;
    let slack = 1e-12 * s.zeta_star;
    let sandwich = min_mu / j * s.zeta_star <= s.zeta + slack && s.zeta <= s.zeta_star + slack;
    IdentityReport {
        left_eigen: eigen_residual(&s.m_x, &s.mu, true),
        right_eigen: eigen_residual(&s.m_x, &s.nu, false),
        mu_tilde_eigen: eigen_residual(&s.m_y, &s.mu_tilde, true),
        mu_norm: (norm1(&s.mu) - 1.0).abs(),
        mu_nu: (dot(&s.mu, &s.nu) - 1.0).abs(),
        mu_tilde_norm: (norm1(&s.mu_tilde) - 1.0).abs(),
        zeta_identity: (lhs - z2).abs() / z2,
        i0_bracket: bracket,
        zeta_sandwich: sandwich,
    }
}

/// Finite-horizon lower estimates of the constants `c₀` and `c₁`.
///
/// `c₀` is scanned over `i ≤ horizon`, the unit-ℓ₁ vector `a` (a basis vector
/// attains the supremum) and the coordinate, for both `M_X` and `M_Y`. `c₁`
/// uses `|λ₂|^{-i}‖(M_X - τνμᵀ)^i‖_{∞→∞}` with the `i = 0` term `I - νμᵀ`;
/// when `λ₂ = 0` only that term is used.
pub fn c0_c1_estimate(s: &SpectralData, horizon: usize) -> (f64, f64) {
    let c0_for = |m: &Matrix, left: &[f64]| {
        let d = m.rows();
        let mut power = Matrix::identity(d);
        let mut best = 0.0f64;
        for i in 0..=horizon {
            if i > 0 {
                power = power.matmul(m).scale(1.0 / s.tau);
            }
            for a in 0..d {
                for (k, &lk) in left.iter().enumerate() {
                    best = best.max(power[(a, k)] / lk);
                }
            }
        }
        best
    };
    let c0 = c0_for(&s.m_x, &s.mu).max(c0_for(&s.m_y, &s.mu_tilde));

    let k = s.mu.len();
    let projector = Matrix::outer(&s.nu, &s.mu);
    let mut c1 = Matrix::identity(k).sub(&projector).norm_inf();
    if s.lambda2_mod > 0.0 {
        let step = s.m_x.sub(&projector.scale(s.tau)).scale(1.0 / s.lambda2_mod);
        let mut power = Matrix::identity(k);
        for _ in 1..=horizon {
            power = power.matmul(&step);
            c1 = c1.max(power.norm_inf());
        }
    }
    (c0, c1)
}

/// Rayleigh lower bound on `τ` for fixed average degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DegreeBound {
    /// `s_B²/m` with `s_B² = Σ n_k (D^X_k)²` and `D^X_k = Σ_j p_kj m_j`.
    pub bound: f64,
    pub tau: f64,
    /// `τ - bound`, nonnegative up to rounding.
    pub slack: f64,
}

pub fn degree_bound(p: &ModelParams) -> Result<DegreeBound> {
    p.validate()?;
    let (m_x, _) = mean_matrices(p);
    let tau = perron(&m_x)?.tau;
    let ny = p.m_f64();
    let s_b2: f64 = (0..p.vertex_types())
        .map(|k| {
            let d: f64 = p.p.row(k).iter().zip(&ny).map(|(a, b)| a * b).sum();
            p.n[k] as f64 * d * d
        })
        .sum();
    let bound = s_b2 / p.m_total() as f64;
    Ok(DegreeBound {
        bound,
        tau,
        slack: tau - bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar4() -> ModelParams {
        ModelParams::scalar(1000, 1000, 0.002).unwrap()
    }

    fn rank1_fixture() -> ModelParams {
        ModelParams::new(
            vec![200, 300],
            vec![500],
            Matrix::from_rows(&[vec![0.005], vec![0.004]]),
        )
        .unwrap()
    }

    #[test]
    fn validation_messages() {
        assert!(scalar4().validate().is_ok());
        let e = ModelParams::scalar(5, 1, 0.1).unwrap_err().to_string();
        assert!(e.contains("m_1 = 1 < 2"), "{e}");
        let e = ModelParams::scalar(5, 5, 1.5).unwrap_err().to_string();
        assert!(e.contains("p out of [0,1]"), "{e}");
        let e = ModelParams::scalar(1, 5, 0.5).unwrap_err().to_string();
        assert!(e.contains("n_1 = 1 < 2"), "{e}");
    }

    #[test]
    fn json_shape() {
        let p: ModelParams = serde_json::from_str(r#"{"n":[1000],"m":[1000],"P":[[0.002]]}"#).unwrap();
        assert_eq!(p, scalar4());
        assert!(serde_json::from_str::<ModelParams>(r#"{"n":[2],"m":[2],"P":[[0.1]],"x":1}"#).is_err());
    }

    #[test]
    fn scalar_mean_matrices() {
        let (mx, my) = mean_matrices(&scalar4());
        assert!((mx[(0, 0)] - 4.0).abs() < 1e-12);
        assert!((my[(0, 0)] - 4.0).abs() < 1e-12);
        let zero = ModelParams::homogeneous(vec![3, 4], vec![5], 0.0).unwrap();
        assert_eq!(mean_matrices(&zero).0.max_abs(), 0.0);
    }

    #[test]
    fn rank1_mean_matrix_entries() {
        // Direct triple sum Σ_j p_kj m_j p_lj n_l.
        let p = rank1_fixture();
        let (mx, my) = mean_matrices(&p);
        for k in 0..2 {
            for l in 0..2 {
                let direct = p.p[(k, 0)] * 500.0 * p.p[(l, 0)] * p.n[l] as f64;
                assert!((mx[(k, l)] - direct).abs() < 1e-15);
            }
        }
        // M_Y[0,0] = Σ_k p_k n_k p_k m.
        let direct: f64 = (0..2).map(|k| p.p[(k, 0)].powi(2) * p.n[k] as f64 * 500.0).sum();
        assert!((my[(0, 0)] - direct).abs() < 1e-15);
    }

    #[test]
    fn scalar4_derived() {
        let s = SpectralData::compute(&scalar4()).unwrap();
        assert!((s.tau - 4.0).abs() < 1e-12);
        assert!((s.zeta - 2.0).abs() < 1e-12);
        assert_eq!(s.mu_tilde, vec![1.0]);
        assert!((s.kappa - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.i0, 4);
        assert!((s.phi_n - 0.256).abs() < 1e-12);
        assert!((s.frak_z.powi(2) - 4.0).abs() < 1e-12);
        assert_eq!(s.lambda2_mod, 0.0);
        assert!((s.gamma - 4.0).abs() < 1e-12);
        // max_s (s+1) 2^{-s} = 1, attained at s = 0 and s = 1.
        assert!((s.theta - 1.0).abs() < 1e-12);
        let r = identity_report(&s);
        assert!(r.holds(1e-12), "{r:?}");
    }

    #[test]
    fn scalar2_derived() {
        let p = ModelParams::scalar(10_000, 10_000, 2f64.sqrt() * 1e-4).unwrap();
        let s = SpectralData::compute(&p).unwrap();
        assert!((s.kappa - 2.0).abs() < 1e-9);
        assert_eq!(s.i0, 13);
        assert!((s.phi_n - 0.8192).abs() < 1e-9);
    }

    #[test]
    fn rank1_fixture_perron() {
        let s = SpectralData::compute(&rank1_fixture()).unwrap();
        assert!((s.tau - 4.9).abs() < 1e-12);
        assert!((s.mu[0] - 1.0 / 2.2).abs() < 1e-12);
        assert!((s.mu[1] - 1.2 / 2.2).abs() < 1e-12);
        assert_eq!(s.lambda2_mod, 0.0);
        assert!((s.gamma - 4.9).abs() < 1e-12);
    }

    #[test]
    fn subcritical_rejected() {
        let p = ModelParams::scalar(100, 100, 0.001).unwrap();
        assert!(matches!(SpectralData::compute(&p), Err(Error::NotSupercritical(_))));
        assert!(gamma_theta(0.5, 0.0).is_err());
    }

    #[test]
    fn corrupted_mu_tilde_flagged() {
        let p = ModelParams::new(
            vec![300, 500],
            vec![400, 600],
            Matrix::from_rows(&[vec![0.004, 0.001], vec![0.002, 0.003]]),
        )
        .unwrap();
        let mut s = SpectralData::compute(&p).unwrap();
        assert!(identity_report(&s).holds(1e-10));
        s.mu_tilde[0] += 1e-3;
        let r = identity_report(&s);
        assert!(r.mu_tilde_eigen > 1e-4 || r.mu_tilde_norm > 1e-4);
        assert!(r.max_residual() > 1e-4);
    }

    #[test]
    fn c0_scalar_is_one() {
        let s = SpectralData::compute(&scalar4()).unwrap();
        assert_eq!(c0_c1_estimate(&s, 0).0, 1.0);
        let (c0, c1) = c0_c1_estimate(&s, 20);
        assert!((c0 - 1.0).abs() < 1e-12);
        // λ₂ = 0: only ‖I - νμᵀ‖ = 0 in the scalar case.
        assert!(c1.abs() < 1e-12);
    }

    #[test]
    fn c0_monotone_in_horizon() {
        let s = SpectralData::compute(&rank1_fixture()).unwrap();
        let mut last = 0.0;
        for h in [0, 1, 2, 5, 10] {
            let (c0, _) = c0_c1_estimate(&s, h);
            assert!(c0 >= last);
            last = c0;
        }
    }

    #[test]
    fn degree_bound_equality_case() {
        // p_kj = D_k / m with m = 100, D = (2, 3).
        let p = ModelParams::new(
            vec![10, 10],
            vec![50, 50],
            Matrix::from_rows(&[vec![0.02, 0.02], vec![0.03, 0.03]]),
        )
        .unwrap();
        let b = degree_bound(&p).unwrap();
        assert!(b.slack.abs() < 1e-9, "{b:?}");
        let b = degree_bound(&rank1_fixture()).unwrap();
        assert!(b.slack >= -1e-9);
    }

    #[test]
    fn i0_brackets() {
        assert_eq!(i0_for(1000, 4.0), 4);
        assert_eq!(i0_for(1024, 4.0), 5);
        assert_eq!(i0_for(10, 100.0), 0);
        assert_eq!(i0_for(8, 2.0), 3);
    }
}
