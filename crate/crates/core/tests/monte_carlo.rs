use rand::Rng;
use rand_distr::StandardNormal;

use simplexdyn::aitchison::{aitchison_log_density, ContrastMatrix, IlrPoint};
use simplexdyn::sde::{
    bm_exact_ensemble, bm_path, derive_seed, drift_in_chart, rng_from_seed, run_ensemble, sample_dirichlet, sde_path,
    InitialLaw,
};
use simplexdyn::stats::{ks_critical_value, ks_statistic, standard_normal_cdf, vertex_absorption_stats, LEVEL};
use simplexdyn::{Composition, DriftKind, PayoffMatrix, SdeConfig};

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let m = v.len() as f64;
    let mean = v.iter().sum::<f64>() / m;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

#[test]
fn log_density_changes_variables_onto_the_chart() {
    // Uniform simplex draws weighted by the density of λ_A recover the volume
    // of an ilr box. In the first n-1 coordinates the chart Jacobian is
    // 1/(√n·∏p_i).
    let n = 3;
    let half = 1.0;
    let psi = ContrastMatrix::new(n).unwrap();
    let mut rng = rng_from_seed(21);
    let uniform_density = 2.0; // (n-1)!
    let w: Vec<f64> = (0..100_000)
        .map(|_| {
            let p = sample_dirichlet(&[1.0; 3], &mut rng).unwrap();
            let x = psi.ilr(&p).unwrap();
            if x.0.iter().all(|v| v.abs() <= half) {
                (aitchison_log_density(&p).unwrap() - 0.5 * (n as f64).ln()).exp() / uniform_density
            } else {
                0.0
            }
        })
        .collect();
    let (mean, se) = mean_and_se(&w);
    let volume = (2.0 * half).powi(n as i32 - 1);
    assert!((mean - volume).abs() < 3.0 * se, "{mean} ± {se} vs {volume}");
}

#[test]
fn driftless_sde_has_the_brownian_law() {
    let p0 = Composition::new(vec![0.5, 0.3, 0.2]).unwrap();
    let psi = ContrastMatrix::new(3).unwrap();
    let x0 = psi.ilr(&p0).unwrap().0;
    let cfg = SdeConfig::new(1.0, 1.0, 1e-2, 5).unwrap();
    let ens = run_ensemble(&DriftKind::None, &InitialLaw::Point(p0), &cfg, 10_000).unwrap();
    let pts = ens.ilr_points().unwrap();
    for k in 0..2 {
        let z: Vec<f64> = pts.iter().map(|x| x[k] - x0[k]).collect();
        assert!(ks_statistic(&z, standard_normal_cdf).unwrap() < ks_critical_value(z.len(), LEVEL));
    }
}

#[test]
fn chart_increments_are_iid_gaussian() {
    let p0 = Composition::barycenter(4).unwrap();
    let dt = 1e-2;
    let mut inc = vec![Vec::new(); 3];
    for i in 0..200 {
        let t = bm_path(&p0, &SdeConfig::new(1.0, 1.0, dt, derive_seed(8, i)).unwrap()).unwrap();
        for w in t.ilr.windows(2) {
            for k in 0..3 {
                inc[k].push((w[1][k] - w[0][k]) / dt.sqrt());
            }
        }
    }
    for k in 0..3 {
        let (mean, se) = mean_and_se(&inc[k]);
        assert!(mean.abs() < 3.0 * se);
        let sq: Vec<f64> = inc[k].iter().map(|v| v * v).collect();
        let (var, se) = mean_and_se(&sq);
        assert!((var - 1.0).abs() < 3.0 * se);
        let cross: Vec<f64> = inc[k].iter().zip(&inc[(k + 1) % 3]).map(|(a, b)| a * b).collect();
        let (c, se) = mean_and_se(&cross);
        assert!(c.abs() < 3.0 * se);
    }
}

#[test]
fn paths_have_no_large_jumps() {
    let p0 = Composition::barycenter(3).unwrap();
    let (dt, steps) = (1e-3f64, 1000usize);
    let bound = 6.0 * dt.sqrt() * (2.0 * (steps as f64).ln()).sqrt();
    for i in 0..1000 {
        let t = bm_path(&p0, &SdeConfig::new(1.0, 1.0, dt, derive_seed(9, i)).unwrap()).unwrap();
        let jump = t
            .ilr
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        assert!(jump < bound, "path {i}: {jump}");
    }
}

#[test]
fn short_times_stay_near_the_start_vertex() {
    let p0 = Composition::new(vec![0.9, 0.05, 0.05]).unwrap();
    let ens = bm_exact_ensemble(&p0, 0.01, 1.0, 4, 3000).unwrap();
    assert!(!vertex_absorption_stats(&ens.terminal_states, Some(4)).unwrap().pass);
}

/// Euler-Maruyama in the chart driven by the given standard normals, `d` per
/// step; the same draws `sde_path` makes from its seed.
fn euler_with_normals(drift: &DriftKind, x0: &[f64], sigma: f64, dt: f64, xi: &[Vec<f64>]) -> Vec<f64> {
    let mut x = x0.to_vec();
    for z in xi {
        let theta = drift_in_chart(drift, &x).unwrap();
        for k in 0..x.len() {
            x[k] += theta[k] * dt + sigma * dt.sqrt() * z[k];
        }
    }
    x
}

#[test]
fn euler_maruyama_matches_its_definition() {
    let a = PayoffMatrix::from_rows(&[vec![-3.0, 1.0, 0.0], vec![0.0, -3.0, 2.0], vec![1.0, 0.0, -3.0]]).unwrap();
    let drift = DriftKind::replicator(&a);
    let p0 = Composition::new(vec![0.6, 0.3, 0.1]).unwrap();
    let cfg = SdeConfig::new(1.3, 0.5, 1e-2, 31).unwrap();
    let traj = sde_path(&drift, &p0, &cfg).unwrap();
    let mut rng = rng_from_seed(31);
    let xi: Vec<Vec<f64>> = (0..cfg.steps()).map(|_| (0..2).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let x0 = ContrastMatrix::new(3).unwrap().ilr(&p0).unwrap().0;
    let x = euler_with_normals(&drift, &x0, cfg.sigma, cfg.dt, &xi);
    assert!(x.iter().zip(traj.terminal_ilr()).all(|(a, b)| (a - b).abs() < 1e-12));
}

#[test]
fn euler_maruyama_has_weak_order_one() {
    // Coarse paths reuse the summed fine increments, so the weak error of the
    // terminal mean of p_1 is resolved well below its Monte Carlo spread.
    let drift = DriftKind::replicator(&PayoffMatrix::from_rows(&[vec![-3.0, 0.0, 0.0], vec![0.0, -3.0, 0.0], vec![0.0, 0.0, -3.0]]).unwrap());
    let psi = ContrastMatrix::new(3).unwrap();
    let x0 = psi.ilr(&Composition::new(vec![0.7, 0.2, 0.1]).unwrap()).unwrap().0;
    let sigma = 2f64.sqrt();
    let fine_dt = 1.0 / 1280.0;
    let levels = [20usize, 40, 80];
    let paths = 4000;
    let mut diffs = vec![Vec::with_capacity(paths); levels.len()];
    for i in 0..paths {
        let mut rng = rng_from_seed(derive_seed(77, i as u64));
        let fine: Vec<Vec<f64>> = (0..1280).map(|_| (0..2).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let p1 = |x: Vec<f64>| psi.ilr_inv(&IlrPoint(x)).unwrap()[0];
        let reference = p1(euler_with_normals(&drift, &x0, sigma, fine_dt, &fine));
        for (slot, &steps) in diffs.iter_mut().zip(&levels) {
            let group = 1280 / steps;
            let coarse: Vec<Vec<f64>> = fine
                .chunks(group)
                .map(|c| (0..2).map(|k| c.iter().map(|z| z[k]).sum::<f64>() / (group as f64).sqrt()).collect())
                .collect();
            slot.push(p1(euler_with_normals(&drift, &x0, sigma, 1.0 / steps as f64, &coarse)) - reference);
        }
    }
    let errors: Vec<(f64, f64)> = diffs.iter().map(|d| mean_and_se(d)).collect();
    for (e, se) in &errors {
        assert!(e.abs() > 5.0 * se, "weak error {e} not resolved (se {se})");
    }
    for w in errors.windows(2) {
        let ratio = w[1].0 / w[0].0;
        assert!((0.25..=0.75).contains(&ratio), "ratio {ratio}, errors {errors:?}");
    }
}
