use igdist::bpsim::{
    conditioned_w_pool, conditioned_w_pool_capped, ghost_scaling, labeled_growth, simulate, simulate_capped,
    survival_prob, w_sample, w_sample_capped, Class, ForestDistance, WNormalizer,
};
use igdist::harness::derive_seed;
use igdist::model::{Matrix, ModelParams, SpectralData};
use igdist::Error;
use rayon::prelude::*;

fn scalar4() -> ModelParams {
    ModelParams::scalar(1000, 1000, 0.002).unwrap()
}

fn rank1_fixture() -> ModelParams {
    ModelParams::new(vec![200, 300], vec![500], Matrix::from_rows(&[vec![0.005], vec![0.004]])).unwrap()
}

fn two_by_two() -> ModelParams {
    ModelParams::new(
        vec![600, 400],
        vec![500, 700],
        Matrix::from_rows(&[vec![0.0018, 0.0006], vec![0.0006, 0.0024]]),
    )
    .unwrap()
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn proportions(v: &[u64]) -> Vec<f64> {
    let t: u64 = v.iter().sum();
    v.iter().map(|&c| c as f64 / t as f64).collect()
}

#[test]
fn object_mean_recursion() {
    for p in [scalar4(), two_by_two()] {
        let ny = Matrix::from_fn(p.object_types(), p.object_types(), |a, b| if a == b { p.m[a] as f64 } else { 0.0 });
        let pny = p.p.matmul(&ny);
        let (m_x, _) = igdist::model::mean_matrices(&p);
        let reps = 100_000u64;
        let runs: Vec<_> = (0..reps)
            .into_par_iter()
            .map(|r| simulate(&p, &[0], 4, derive_seed(17, "y-mean", r)).unwrap())
            .collect();
        let mut row = vec![0.0; p.vertex_types()];
        row[0] = 1.0;
        for i in 1..=4 {
            let expect = pny.vec_mul(&row);
            for (j, &e) in expect.iter().enumerate() {
                let ys: Vec<f64> = runs.iter().map(|t| t.y[i - 1][j] as f64).collect();
                let (mean, se) = mean_se(&ys);
                assert!((mean - e).abs() <= 3.0 * se, "Y_{j}({i}): {mean} vs {e} (se {se})");
            }
            row = m_x.vec_mul(&row);
        }
    }
}

#[test]
fn scalar_first_generation_means() {
    let p = scalar4();
    let runs: Vec<_> = (0..100_000u64)
        .into_par_iter()
        .map(|r| simulate(&p, &[0], 1, derive_seed(3, "first", r)).unwrap())
        .collect();
    let (mx, sx) = mean_se(&runs.iter().map(|t| t.x[1][0] as f64).collect::<Vec<_>>());
    let (my, sy) = mean_se(&runs.iter().map(|t| t.y[0][0] as f64).collect::<Vec<_>>());
    assert!((mx - 4.0).abs() <= 3.0 * sx, "{mx} {sx}");
    assert!((my - 2.0).abs() <= 3.0 * sy, "{my} {sy}");
}

#[test]
fn martingale_variance_stabilises() {
    let p = scalar4();
    let norm = WNormalizer::from(&SpectralData::compute(&p).unwrap());
    let reps = 20_000u64;
    let var_and_se = |horizon: usize| {
        let w: Vec<f64> = (0..reps)
            .into_par_iter()
            .map(|r| w_sample_capped(&p, &norm, 0, horizon, derive_seed(5, "var", r), 1 << 40).unwrap().value)
            .collect();
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let m2 = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m4 = w.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        (m2, ((m4 - m2 * m2) / n).sqrt())
    };
    let (v8, s8) = var_and_se(8);
    let (v12, s12) = var_and_se(12);
    let se = (s8 * s8 + s12 * s12).sqrt();
    assert!((v8 - v12).abs() <= 3.0 * se, "{v8} vs {v12} (se {se})");
}

#[test]
fn stable_type_proportions() {
    let cases = [(rank1_fixture(), 0usize), (two_by_two(), 0), (two_by_two(), 1)];
    for (p, k) in cases {
        let s = SpectralData::compute(&p).unwrap();
        let runs: Vec<_> = (0..4000u64)
            .into_par_iter()
            .map(|r| simulate_capped(&p, &[k], 10, derive_seed(8, "proportions", r), 1 << 40).unwrap())
            .collect();
        let alive: Vec<_> = runs.iter().filter(|t| t.x[10].iter().sum::<u64>() > 0).collect();
        assert!(alive.len() > 1000);
        for (kk, &mu) in s.mu.iter().enumerate() {
            let mean = alive.iter().map(|t| proportions(&t.x[10])[kk]).sum::<f64>() / alive.len() as f64;
            assert!((mean - mu).abs() <= 0.02, "X type {kk}: {mean} vs {mu}");
        }
        for (j, &mu) in s.mu_tilde.iter().enumerate() {
            let mean = alive.iter().map(|t| proportions(&t.y[9])[j]).sum::<f64>() / alive.len() as f64;
            assert!((mean - mu).abs() <= 0.02, "Y type {j}: {mean} vs {mu}");
        }
    }
}

#[test]
fn pool_mean_matches_inverse_survival() {
    let p = scalar4();
    let norm = WNormalizer::from(&SpectralData::compute(&p).unwrap());
    // 4^12 W exceeds the default cap for W above about 6, so the cap is raised.
    let pool = conditioned_w_pool_capped(&p, &norm, 0, 12, 10_000, 77, 1 << 40).unwrap();
    assert!(pool.iter().all(|&w| w > 0.0));
    let (mean, se) = mean_se(&pool);
    let target = 1.0 / survival_prob(&p)[0];
    assert!((mean - target).abs() <= 3.0 * se, "{mean} vs {target} (se {se})");

    let again = conditioned_w_pool_capped(&p, &norm, 0, 12, 10_000, 77, 1 << 40).unwrap();
    assert_eq!(pool, again);
}

#[test]
fn population_cap_is_enforced() {
    let p = scalar4();
    match simulate_capped(&p, &[0; 50], 30, 1, 1000) {
        Err(Error::PopulationCap { generation, cap, size }) => {
            assert_eq!(cap, 1000);
            assert!(size > 1000 && generation >= 1 && generation <= 30);
        }
        other => panic!("expected a population cap error, got {other:?}"),
    }
}

#[test]
fn trivial_processes() {
    let zero = ModelParams::scalar(10, 10, 0.0).unwrap();
    let norm = WNormalizer { tau: 4.0, nu: vec![1.0] };
    let w = w_sample(&zero, &norm, 0, 3, 1).unwrap();
    assert_eq!(w.value, 0.0);
    assert!(!w.survived);
    assert!(matches!(conditioned_w_pool(&zero, &norm, 0, 3, 5, 1), Err(Error::SurvivalTooRare { .. })));
    assert_eq!(survival_prob(&zero), vec![0.0]);
    assert_eq!(survival_prob(&ModelParams::scalar(3, 2, 1.0).unwrap()), vec![1.0]);

    let f = labeled_growth(&zero, 0, 0, 3, 9).unwrap();
    assert_eq!(f.individuals.len(), 2);
    assert!(f.edges.is_empty());
    assert!(f.ghosts.iter().flatten().all(|&g| g == 0));
    assert_eq!(f.distance(), ForestDistance::Infinite);
    let rows = ghost_scaling(&scalar4_zero(), 0, 0, 3, 20, 1).unwrap();
    assert!(rows.iter().all(|r| r.ghost_x_mean == 0.0 && r.ghost_y_mean == 0.0));
}

fn scalar4_zero() -> ModelParams {
    ModelParams::scalar(1000, 1000, 0.0).unwrap()
}

#[test]
fn full_graph_reuses_indices_immediately() {
    let p = ModelParams::scalar(2, 2, 1.0).unwrap();
    let f = labeled_growth(&p, 0, 0, 2, 4).unwrap();
    assert!(f.ghost_y(1) + f.ghost_x(1) > 0);
    assert_eq!(f.distance(), ForestDistance::Finite(1));
}

#[test]
fn class_bookkeeping() {
    let models = [scalar4(), two_by_two(), ModelParams::scalar(50, 40, 0.08).unwrap()];
    for (mi, p) in models.iter().enumerate() {
        for r in 0..200u64 {
            let f = labeled_growth(p, 0, p.vertex_types() - 1, 4, derive_seed(mi as u64, "classes", r)).unwrap();
            assert!(f.class1_indices_unique());
            for ind in &f.individuals {
                if let Some(q) = ind.parent {
                    assert_eq!(f.individuals[q].class, Class::One, "ghost with a recorded child");
                    assert_eq!(f.individuals[q].generation + 1, ind.generation);
                    assert_eq!(f.individuals[q].root, ind.root);
                }
            }
            for (g, o) in f.ghosts.iter().zip(&f.original_ghosts) {
                assert!(g.iter().zip(o).all(|(a, b)| a >= b));
            }
            for (u, v) in &f.edges {
                assert_ne!(u.object, v.object);
            }
        }
    }
}
