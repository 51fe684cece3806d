use serde::{Deserialize, Serialize};

use super::linalg::{dot, Matrix};
use super::ModelParams;
use crate::{Error, Result};

/// Product-form edge probabilities `P = αβᵀ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rank1Params {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

/// JSON form: `{"alpha":[...], "beta":[...], "n":[...], "m":[...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rank1Input {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub n: Vec<u64>,
    pub m: Vec<u64>,
}

impl Rank1Input {
    pub fn build(&self) -> Result<Rank1Model> {
        let r = Rank1Params {
            alpha: self.alpha.clone(),
            beta: self.beta.clone(),
        };
        rank1_build(&r, &self.n, &self.m)
    }
}

/// A rank-1 model with its closed-form Perron data.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Rank1Model {
    pub params: ModelParams,
    /// `C = Σ_j m_j β_j²`.
    pub c: f64,
    pub tau: f64,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
}

/// Builds `P = αβᵀ` and evaluates `τ = C αᵀN_Xα`, `μ = N_Xα / 1ᵀN_Xα` and
/// `ν = C (τ⁻¹ 1ᵀN_Xα) α` without any iteration.
pub fn rank1_build(r: &Rank1Params, n: &[u64], m: &[u64]) -> Result<Rank1Model> {
    if r.alpha.len() != n.len() || r.beta.len() != m.len() {
        return Err(Error::InvalidParams(format!(
            "alpha/beta lengths {}/{} do not match n/m lengths {}/{}",
            r.alpha.len(),
            r.beta.len(),
            n.len(),
            m.len()
        )));
    }
    if r.alpha.iter().chain(&r.beta).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidParams("alpha and beta must be positive".into()));
    }
    for (k, &a) in r.alpha.iter().enumerate() {
        for (j, &b) in r.beta.iter().enumerate() {
            if a * b > 1.0 {
                return Err(Error::InvalidProbability(format!(
                    "invalid probability alpha_{}beta_{} = {} > 1",
                    k + 1,
                    j + 1,
                    a * b
                )));
            }
        }
    }
    let params = ModelParams::new(n.to_vec(), m.to_vec(), Matrix::outer(&r.alpha, &r.beta))?;
    let c: f64 = r.beta.iter().zip(m).map(|(b, &mj)| mj as f64 * b * b).sum();
    let nx_alpha: Vec<f64> = r.alpha.iter().zip(n).map(|(a, &nk)| a * nk as f64).collect();
    let total: f64 = nx_alpha.iter().sum();
    let tau = c * dot(&r.alpha, &nx_alpha);
    let mu = nx_alpha.iter().map(|v| v / total).collect();
    let nu = r.alpha.iter().map(|a| c * total / tau * a).collect();
    Ok(Rank1Model { params, c, tau, mu, nu })
}
