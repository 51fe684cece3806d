use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use igdist::harness::{derive_seed, run, ExperimentConfig, RunManifest, Subcommand};
use serde_json::Value;
use tempfile::TempDir;

const SCALAR4: &str = r#""model":{"n":[1000],"m":[1000],"P":[[0.002]]}"#;

fn igdist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_igdist")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

fn run_cli(sub: &str, config: &Path, out: &Path, workers: Option<usize>) -> Output {
    let mut args = vec![sub.to_string(), "--config".into(), config.display().to_string(), "--out".into()];
    args.push(out.display().to_string());
    if let Some(w) = workers {
        args.push("--workers".into());
        args.push(w.to_string());
    }
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    igdist(&refs)
}

fn listing(dir: &Path) -> BTreeSet<String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect()
}

#[test]
fn derived_seeds_match_golden_file() {
    let text = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/derive_seed.json")).unwrap();
    let golden: Value = serde_json::from_str(&text).unwrap();
    let cases = golden["cases"].as_array().unwrap();
    assert!(!cases.is_empty());
    for c in cases {
        let got = derive_seed(c["master"].as_u64().unwrap(), c["tag"].as_str().unwrap(), c["replicate"].as_u64().unwrap());
        assert_eq!(got, c["seed"].as_u64().unwrap(), "{c}");
    }
}

#[test]
fn spectral_subcommand_reports_scalar_values() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &format!("{{{SCALAR4},\"seed\":1}}"));
    let out = tmp.path().join("out");
    let o = run_cli("spectral", &cfg, &out, Some(1));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let j: Value = serde_json::from_str(&fs::read_to_string(out.join("spectral.json")).unwrap()).unwrap();
    assert!((j["tau"].as_f64().unwrap() - 4.0).abs() < 1e-12);
    assert!((j["kappa"].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-12);
    assert_eq!(j["i0"].as_i64().unwrap(), 4);
    assert!((j["phi_n"].as_f64().unwrap() - 0.256).abs() < 1e-12);
    assert!(j["identity"]["i0_bracket"].as_bool().unwrap());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("spectral.json") && stdout.contains("identity.csv"));
}

#[test]
fn configuration_errors_exit_with_code_2() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cases = [
        format!("{{{SCALAR4}}}"),
        format!("{{{SCALAR4},\"seed\":1,\"mystery\":3}}"),
        "{\"seed\":1}".to_string(),
        format!("{{{SCALAR4},\"seed\":1,\"k1\":2}}"),
        r#"{"model":{"n":[5],"m":[1],"P":[[0.1]]},"seed":1}"#.to_string(),
        "not json".to_string(),
    ];
    for body in &cases {
        let cfg = write_config(tmp.path(), body);
        let o = run_cli("spectral", &cfg, &out, None);
        assert_eq!(o.status.code(), Some(2), "{body}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!out.exists());
    }
    let o = run_cli("spectral", &tmp.path().join("missing.json"), &out, None);
    assert_eq!(o.status.code(), Some(2));
    let cfg = write_config(tmp.path(), &format!("{{{SCALAR4},\"seed\":1}}"));
    assert_eq!(run_cli("spectral", &cfg, &out, Some(0)).status.code(), Some(2));
    // The rank1 subcommand needs a rank1 block.
    assert_eq!(run_cli("rank1", &cfg, &out, None).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn runtime_failure_exits_3_and_removes_partial_outputs() {
    let tmp = TempDir::new().unwrap();
    // The distance law is written before the pools hit the tiny cap.
    let body = format!("{{{SCALAR4},\"seed\":4,\"reps\":{{\"graph\":20,\"pool\":50}},\"pop_cap\":10}}");
    let cfg = write_config(tmp.path(), &body);
    let fresh = tmp.path().join("fresh");
    let o = run_cli("compare", &cfg, &fresh, Some(1));
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("generation"));
    assert!(!fresh.exists());

    let existing = tmp.path().join("existing");
    fs::create_dir(&existing).unwrap();
    fs::write(existing.join("keep.txt"), "x").unwrap();
    assert_eq!(run_cli("compare", &cfg, &existing, Some(1)).status.code(), Some(3));
    assert_eq!(listing(&existing), BTreeSet::from(["keep.txt".to_string()]));
}

#[test]
fn edgeless_model_compares_only_the_mass_at_infinity() {
    let tmp = TempDir::new().unwrap();
    let body = r#"{"model":{"n":[100],"m":[100],"P":[[0.0]]},"seed":2,"reps":{"graph":30}}"#;
    let cfg = write_config(tmp.path(), body);
    let out = tmp.path().join("out");
    let o = run_cli("compare", &cfg, &out, Some(2));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read_to_string(out.join("comparison.csv")).unwrap(),
        "u,empirical_exceed,approx_exceed,abs_diff,delta_scale\ninf,1,1,0,nan\n"
    );
    assert_eq!(fs::read_to_string(out.join("approx.csv")).unwrap(), "u,exceed_prob\ninf,1\n");
}

#[test]
fn rank1_subcommand() {
    let tmp = TempDir::new().unwrap();
    let body = r#"{"rank1":{"alpha":[0.005,0.004],"beta":[1.0],"n":[200,300],"m":[500]},"seed":1}"#;
    let cfg = write_config(tmp.path(), body);
    let out = tmp.path().join("out");
    assert!(run_cli("rank1", &cfg, &out, None).status.success());
    let j: Value = serde_json::from_str(&fs::read_to_string(out.join("rank1.json")).unwrap()).unwrap();
    assert!((j["closed_form"]["tau"].as_f64().unwrap() - 4.9).abs() < 1e-12);
    assert!(j["max_rel_diff"].as_f64().unwrap() < 1e-8);
}

const ALL: [Subcommand; 8] = [
    Subcommand::Spectral,
    Subcommand::GraphDist,
    Subcommand::Bp,
    Subcommand::Coincidence,
    Subcommand::Approx,
    Subcommand::Compare,
    Subcommand::Rank1,
    Subcommand::Ghosts,
];

fn small_config(dir: &Path, workers: usize) -> ExperimentConfig {
    let body = r#"{"rank1":{"alpha":[0.005,0.004],"beta":[1.0],"n":[200,300],"m":[500]},
        "seed":99,"k2":2,"reps":{"graph":200,"pool":200,"bp":200,"mc":2000},"horizon":8,"depth":3,
        "scheme":{"w":[40],"zA":[[6,6,6]],"zB":[[7,7]],"wstar":[2]}}"#;
    let mut cfg = ExperimentConfig::from_json(body).unwrap();
    cfg.output_dir = dir.to_path_buf();
    cfg.workers = workers;
    cfg
}

/// CSV and JSON outputs of every subcommand, keyed by subcommand and file.
fn outputs(root: &Path, workers: usize) -> Vec<(String, Vec<u8>)> {
    let mut all = Vec::new();
    for sub in ALL {
        let dir = root.join(sub.name());
        let m = run(sub, &small_config(&dir, workers)).unwrap();
        assert!(m.verify(&dir).unwrap());
        let mut listed: BTreeSet<String> = m.files.iter().map(|f| f.name.clone()).collect();
        listed.insert("manifest.json".into());
        assert_eq!(listed, listing(&dir), "{}", sub.name());
        let on_disk: RunManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(on_disk, m);
        assert_eq!(m.workers, workers);
        assert_eq!(m.subcommand, sub.name());
        for f in &m.files {
            all.push((format!("{}/{}", sub.name(), f.name), fs::read(dir.join(&f.name)).unwrap()));
        }
    }
    all
}

#[test]
fn outputs_are_reproducible_and_independent_of_workers() {
    let tmp = TempDir::new().unwrap();
    let a = outputs(&tmp.path().join("a"), 1);
    let b = outputs(&tmp.path().join("b"), 1);
    let c = outputs(&tmp.path().join("c"), 8);
    assert_eq!(a.len(), b.len());
    for ((na, ba), ((nb, bb), (nc, bc))) in a.iter().zip(b.iter().zip(&c)) {
        assert_eq!(na, nb);
        assert_eq!(na, nc);
        assert!(ba == bb, "{na} differs between identical runs");
        assert!(ba == bc, "{na} differs between 1 and 8 workers");
        assert!(!ba.contains(&b'\r'));
    }
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    for expected in [
        "spectral/spectral.json",
        "graph-dist/distance_law.csv",
        "bp/trajectory.csv",
        "bp/wpool.csv",
        "coincidence/coincidence.csv",
        "approx/approx.csv",
        "compare/comparison.csv",
        "rank1/rank1.json",
        "ghosts/ghosts.csv",
    ] {
        assert!(names.contains(&expected), "{expected} missing");
    }
}
