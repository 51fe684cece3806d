use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, ModelSpec};
use super::manifest::{sha256_hex, unix_now, OutputFile, RunManifest};
use super::seed::derive_seed;
use crate::approx::{compare, default_window, ApproxLaw, WPools};
use crate::bpsim::{
    conditioned_w_pool_capped, default_horizon, ghost_scaling, ghost_table_csv, simulate_capped, survival_prob,
    WNormalizer,
};
use crate::coincidence::{poisson_check_with, reports_csv, small_grid};
use crate::graphgen::empirical_distance_law;
use crate::model::{
    c0_c1_estimate, degree_bound, identity_report, mean_matrices, perron, DegreeBound, IdentityReport, ModelParams,
    SpectralData,
};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Subcommand {
    Spectral,
    GraphDist,
    Bp,
    Coincidence,
    Approx,
    Compare,
    Rank1,
    Ghosts,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Spectral => "spectral",
            Subcommand::GraphDist => "graph-dist",
            Subcommand::Bp => "bp",
            Subcommand::Coincidence => "coincidence",
            Subcommand::Approx => "approx",
            Subcommand::Compare => "compare",
            Subcommand::Rank1 => "rank1",
            Subcommand::Ghosts => "ghosts",
        }
    }
}

/// Files written so far, removed again if the run fails.
struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<OutputFile>,
}

impl Outputs {
    fn open(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            created_dir,
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
        self.files.push(OutputFile {
            name: name.to_string(),
            sha256: sha256_hex(content.as_bytes()),
            bytes: content.len() as u64,
        });
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let text = serde_json::to_string_pretty(value).expect("output serialises") + "\n";
        self.write(name, &text)
    }

    fn discard(self) {
        for f in &self.files {
            let _ = std::fs::remove_file(self.dir.join(&f.name));
        }
        if self.created_dir {
            let _ = std::fs::remove_dir(&self.dir);
        }
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    seeds: BTreeMap<String, u64>,
}

impl Ctx<'_> {
    fn seed(&mut self, stage: &str) -> u64 {
        let s = derive_seed(self.cfg.seed, stage, 0);
        self.seeds.insert(stage.to_string(), s);
        s
    }

    fn p(&self) -> &ModelParams {
        &self.cfg.params
    }

    fn horizon(&self, s: Option<&SpectralData>) -> usize {
        self.cfg.horizon.unwrap_or_else(|| s.map_or(12, default_horizon))
    }
}

/// `None` when no edge is possible at all, so that every distance is infinite.
fn spectral_or_degenerate(p: &ModelParams) -> Result<Option<SpectralData>> {
    if mean_matrices(p).0.max_abs() == 0.0 {
        return Ok(None);
    }
    SpectralData::compute(p).map(Some)
}

/// Runs one subcommand inside a pool of `cfg.workers` threads, writing its
/// outputs and `manifest.json` to `cfg.output_dir`. On failure every file
/// written by the run is removed.
pub fn run(sub: Subcommand, cfg: &ExperimentConfig) -> Result<RunManifest> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;
    let started = unix_now();
    let mut out = Outputs::open(&cfg.output_dir)?;
    let mut ctx = Ctx {
        cfg,
        seeds: BTreeMap::new(),
    };
    let result = pool.install(|| dispatch(sub, &mut ctx, &mut out));
    if let Err(e) = result {
        out.discard();
        return Err(e);
    }
    let manifest = RunManifest {
        subcommand: sub.name().to_string(),
        config_hash: cfg.hash.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        stage_seeds: ctx.seeds,
        workers: cfg.workers,
        started_unix: started,
        finished_unix: unix_now(),
        files: out.files.clone(),
    };
    if let Err(e) = manifest.write(&out.dir) {
        out.discard();
        return Err(e);
    }
    Ok(manifest)
}

fn dispatch(sub: Subcommand, ctx: &mut Ctx, out: &mut Outputs) -> Result<()> {
    match sub {
        Subcommand::Spectral => spectral(ctx, out),
        Subcommand::GraphDist => graph_dist(ctx, out).map(|_| ()),
        Subcommand::Bp => bp(ctx, out),
        Subcommand::Coincidence => coincidence(ctx, out),
        Subcommand::Approx => approx(ctx, out).map(|_| ()),
        Subcommand::Compare => {
            let law = graph_dist(ctx, out)?;
            let (s, approx_law) = approx(ctx, out)?;
            let cmp = compare(&law, s.as_ref(), &approx_law, ctx.cfg.c25)?;
            out.write("comparison.csv", &cmp.to_csv())
        }
        Subcommand::Rank1 => rank1(ctx, out),
        Subcommand::Ghosts => {
            let seed = ctx.seed("ghosts");
            let c = ctx.cfg;
            let rows = ghost_scaling(ctx.p(), c.k1, c.k2, c.depth, c.reps.bp, seed)?;
            out.write("ghosts.csv", &ghost_table_csv(&rows))
        }
    }
}

#[derive(Serialize)]
struct SpectralOut<'a> {
    #[serde(flatten)]
    spectral: &'a SpectralData,
    identity: IdentityReport,
    degree_bound: DegreeBound,
    c0_hat: f64,
    c1_hat: f64,
}

fn spectral(ctx: &mut Ctx, out: &mut Outputs) -> Result<()> {
    let s = SpectralData::compute(ctx.p())?;
    let identity = identity_report(&s);
    let (c0_hat, c1_hat) = c0_c1_estimate(&s, ctx.cfg.horizon.unwrap_or(20));
    out.write_json(
        "spectral.json",
        &SpectralOut {
            spectral: &s,
            identity: identity.clone(),
            degree_bound: degree_bound(ctx.p())?,
            c0_hat,
            c1_hat,
        },
    )?;
    let mut csv = String::from("identity,value\n");
    for (name, v) in [
        ("left_eigen", identity.left_eigen),
        ("right_eigen", identity.right_eigen),
        ("mu_tilde_eigen", identity.mu_tilde_eigen),
        ("mu_norm", identity.mu_norm),
        ("mu_nu", identity.mu_nu),
        ("mu_tilde_norm", identity.mu_tilde_norm),
        ("zeta_identity", identity.zeta_identity),
    ] {
        writeln!(csv, "{name},{v}").unwrap();
    }
    writeln!(csv, "i0_bracket,{}", identity.i0_bracket).unwrap();
    writeln!(csv, "zeta_sandwich,{}", identity.zeta_sandwich).unwrap();
    out.write("identity.csv", &csv)
}

fn graph_dist(ctx: &mut Ctx, out: &mut Outputs) -> Result<crate::graphgen::DistanceLaw> {
    let seed = ctx.seed("graph");
    let c = ctx.cfg;
    let law = empirical_distance_law(ctx.p(), c.k1, c.k2, c.reps.graph, seed)?;
    out.write("distance_law.csv", &law.to_csv())?;
    Ok(law)
}

fn bp(ctx: &mut Ctx, out: &mut Outputs) -> Result<()> {
    let seed = ctx.seed("bp");
    let c = ctx.cfg;
    let p = &c.params;
    // A subcritical or edgeless model still has trajectories and survival
    // probabilities, but no W normalisation.
    let s = SpectralData::compute(p).ok();
    let horizon = ctx.horizon(s.as_ref());

    let runs: Vec<_> = (0..c.reps.bp)
        .into_par_iter()
        .map(|r| simulate_capped(p, &[c.k1], horizon, derive_seed(seed, "trajectory", r), c.pop_cap))
        .collect::<Result<_>>()?;
    out.write("trajectory.csv", &runs[0].to_csv())?;

    let mut csv = String::from("generation,side,type,mean\n");
    let reps = runs.len() as f64;
    for i in 0..=horizon {
        if i > 0 {
            for j in 0..p.object_types() {
                let mean = runs.iter().map(|t| t.y[i - 1][j] as f64).sum::<f64>() / reps;
                writeln!(csv, "{i},Y,{},{mean}", j + 1).unwrap();
            }
        }
        for k in 0..p.vertex_types() {
            let mean = runs.iter().map(|t| t.x[i][k] as f64).sum::<f64>() / reps;
            writeln!(csv, "{i},X,{},{mean}", k + 1).unwrap();
        }
    }
    out.write("mean_trajectory.csv", &csv)?;

    let mut csv = String::from("type,survival\n");
    for (k, v) in survival_prob(p).iter().enumerate() {
        writeln!(csv, "{},{v}", k + 1).unwrap();
    }
    out.write("survival.csv", &csv)?;

    if let Some(s) = &s {
        let norm = WNormalizer::from(s);
        let pool_seed = ctx.seed("pool");
        let mut csv = String::from("pool,index,w\n");
        for (name, k, tag) in [("A", c.k1, "pool-a"), ("B", c.k2, "pool-b")] {
            let pool_seed = derive_seed(pool_seed, tag, 0);
            let pool = conditioned_w_pool_capped(p, &norm, k, horizon, c.reps.pool, pool_seed, c.pop_cap)?;
            for (i, w) in pool.iter().enumerate() {
                writeln!(csv, "{name},{i},{w}").unwrap();
            }
        }
        out.write("wpool.csv", &csv)?;
    }
    Ok(())
}

fn coincidence(ctx: &mut Ctx, out: &mut Outputs) -> Result<()> {
    let seed = ctx.seed("coincidence");
    let c = ctx.cfg;
    let schemes = match &c.scheme {
        Some(s) => vec![s.clone()],
        None => small_grid(8, 3),
    };
    let rows: Vec<_> = schemes
        .into_par_iter()
        .enumerate()
        .map(|(i, s)| {
            let r = poisson_check_with(&s, c.reps.mc, derive_seed(seed, "scheme", i as u64))?;
            Ok((s, r))
        })
        .collect::<Result<_>>()?;
    out.write("coincidence.csv", &reports_csv(&rows))
}

fn approx(ctx: &mut Ctx, out: &mut Outputs) -> Result<(Option<SpectralData>, ApproxLaw)> {
    let seed = ctx.seed("pool");
    let c = ctx.cfg;
    let s = spectral_or_degenerate(ctx.p())?;
    let law = match &s {
        None => ApproxLaw::degenerate(),
        Some(s) => {
            let horizon = ctx.horizon(Some(s));
            let pools = WPools::simulate_capped(ctx.p(), s, c.k1, c.k2, horizon, c.reps.pool, seed, c.pop_cap)?;
            let window = c.window.map_or_else(|| default_window(s.i0), |(lo, hi)| lo..=hi);
            ApproxLaw::compute(s, &pools, window, c.rate)
        }
    };
    out.write("approx.csv", &law.to_csv())?;
    Ok((s, law))
}

#[derive(Serialize)]
struct PerronSummary {
    tau: f64,
    mu: Vec<f64>,
    nu: Vec<f64>,
}

#[derive(Serialize)]
struct Rank1Out {
    c: f64,
    closed_form: PerronSummary,
    power_iteration: PerronSummary,
    max_rel_diff: f64,
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

fn rank1(ctx: &mut Ctx, out: &mut Outputs) -> Result<()> {
    let ModelSpec::Rank1(input) = &ctx.cfg.model else {
        return Err(Error::Config("the rank1 subcommand needs a \"rank1\" model block".into()));
    };
    let model = input.build()?;
    let pf = perron(&mean_matrices(&model.params).0)?;
    let max_rel_diff = rel_diff(&[model.tau], &[pf.tau])
        .max(rel_diff(&model.mu, &pf.left))
        .max(rel_diff(&model.nu, &pf.right));
    out.write_json(
        "rank1.json",
        &Rank1Out {
            c: model.c,
            closed_form: PerronSummary {
                tau: model.tau,
                mu: model.mu.clone(),
                nu: model.nu.clone(),
            },
            power_iteration: PerronSummary {
                tau: pf.tau,
                mu: pf.left,
                nu: pf.right,
            },
            max_rel_diff,
        },
    )
}
