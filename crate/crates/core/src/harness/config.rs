//! Experiment configuration: a JSON document naming the model, the tagged
//! vertex types, replicate counts and the master seed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::approx::Rate;
use crate::bpsim::DEFAULT_POP_CAP;
use crate::coincidence::SamplingScheme;
use crate::model::{ModelParams, Rank1Input};
use crate::{Error, Result};

/// Replicate counts per stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Reps {
    /// Graph samples for the empirical distance law.
    pub graph: u64,
    /// Size of each conditioned `W` pool.
    pub pool: usize,
    /// Branching-process replicates (trajectory means, ghost tallies).
    pub bp: u64,
    /// Monte Carlo replicates for coincidence instances too large to enumerate.
    pub mc: u64,
}

impl Default for Reps {
    fn default() -> Self {
        Reps {
            graph: 1000,
            pool: 1000,
            bp: 1000,
            mc: 100_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateChoice {
    #[default]
    Asymptotic,
    Exact,
}

impl From<RateChoice> for Rate {
    fn from(r: RateChoice) -> Self {
        match r {
            RateChoice::Asymptotic => Rate::Asymptotic,
            RateChoice::Exact => Rate::Exact,
        }
    }
}

/// The document as written, before validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model: Option<ModelParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rank1: Option<Rank1Input>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k1: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k2: Option<usize>,
    #[serde(default)]
    reps: Reps,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c25: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scheme: Option<SamplingScheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    window: Option<[i64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rate: Option<RateChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pop_cap: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelSpec {
    General(ModelParams),
    Rank1(Rank1Input),
}

/// A validated configuration. Vertex types `k1`, `k2` are stored 0-based;
/// the document uses 1-based types.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub params: ModelParams,
    pub k1: usize,
    pub k2: usize,
    pub reps: Reps,
    /// `None` selects the default `max(12, 2 i₀)`.
    pub horizon: Option<usize>,
    pub depth: usize,
    pub seed: u64,
    pub workers: usize,
    pub output_dir: PathBuf,
    pub c25: f64,
    pub scheme: Option<SamplingScheme>,
    pub window: Option<(i64, i64)>,
    pub rate: Rate,
    /// Largest population allowed in one generation of a branching process.
    pub pop_cap: u64,
    /// SHA-256 of the canonical JSON form of the document.
    pub hash: String,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        let seed = raw.seed.ok_or_else(|| config_err("seed required"))?;
        let (model, params) = match (&raw.model, &raw.rank1) {
            (Some(p), None) => {
                p.validate()?;
                (ModelSpec::General(p.clone()), p.clone())
            }
            (None, Some(r)) => (ModelSpec::Rank1(r.clone()), r.build()?.params),
            _ => return Err(config_err("exactly one model block (\"model\" or \"rank1\") is required")),
        };
        let types = params.vertex_types();
        let k = |v: Option<usize>, name: &str| -> Result<usize> {
            let v = v.unwrap_or(1);
            if v == 0 || v > types {
                return Err(config_err(format!("{name} = {v} is not a vertex type in 1..={types}")));
            }
            Ok(v - 1)
        };
        let (k1, k2) = (k(raw.k1, "k1")?, k(raw.k2, "k2")?);
        if k1 == k2 && params.n[k1] < 2 {
            return Err(Error::InsufficientVertices(k1 + 1));
        }
        let reps = raw.reps;
        if reps.graph == 0 || reps.pool == 0 || reps.bp == 0 || reps.mc == 0 {
            return Err(config_err("every reps entry must be at least 1"));
        }
        if raw.horizon == Some(0) {
            return Err(config_err("horizon must be at least 1"));
        }
        let depth = raw.depth.unwrap_or(5);
        if depth == 0 {
            return Err(config_err("depth must be at least 1"));
        }
        let workers = match raw.workers {
            Some(0) => return Err(config_err("workers must be at least 1")),
            Some(w) => w,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        let c25 = raw.c25.unwrap_or(1.0);
        if !(c25 > 0.0) || !c25.is_finite() {
            return Err(config_err("c25 must be positive"));
        }
        if let Some(s) = &raw.scheme {
            s.validate()?;
        }
        let window = match raw.window {
            Some([lo, hi]) if lo > hi => return Err(config_err("window must be [lo, hi] with lo <= hi")),
            w => w.map(|[lo, hi]| (lo, hi)),
        };
        let pop_cap = raw.pop_cap.unwrap_or(DEFAULT_POP_CAP);
        if pop_cap == 0 {
            return Err(config_err("pop_cap must be at least 1"));
        }
        let canonical = serde_json::to_string(&raw).expect("config serialises");
        Ok(ExperimentConfig {
            model,
            params,
            k1,
            k2,
            reps,
            horizon: raw.horizon,
            depth,
            seed,
            workers,
            output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("igdist-out")),
            c25,
            scheme: raw.scheme,
            window,
            rate: raw.rate.unwrap_or_default().into(),
            pop_cap,
            hash: hex::encode(Sha256::digest(canonical.as_bytes())),
        })
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::from_json(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
