//! Verification suites behind `simplexdyn verify` and the acceptance tests.
//!
//! A suite is a list of gates, each a [`TestReport`] with a fixed threshold,
//! plus informational reports that never decide the outcome. All randomness
//! is derived from the suite seed.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aitchison::{
    clr, closure, dist, inner, perturb, power, sfm, sfm_jacobian, shahshahani_inv, Composition, ContrastMatrix,
    IlrPoint,
};
use crate::error::{Error, Result};
use crate::jko::{jko_flow_vs_heat, w2_quantile, GaussianStart, DEFAULT_LEVELS};
use crate::payoff::{decompose, enumerate_nash, fixtures, interior_ne_decomposed, simplex_grid, PayoffMatrix};
use crate::sde::{
    bm_exact_ensemble, bm_path, coupled_pair, derive_seed, donsker_rescaled, drift_in_chart, heat_kernel_log_density,
    rng_from_seed, run_ensemble, sample_dirichlet, simplex_ito_drift, wong_zakai_ensemble, DriftKind, InitialLaw,
    SdeConfig, SimplexWalk,
};
use crate::stats::{
    contraction_report, dircond_residual, dirichlet_moment_check, dirichlet_potential_gradient,
    dirichlet_potential_hessian, energy_distance_with_se, energy_permutation_test, hj_residual, ks_critical_value,
    ks_statistic, standard_normal_cdf, vertex_absorption_stats, ContractionReport, TestReport, LEVEL,
};

pub const DEFAULT_SEED: u64 = 0x5eed_0001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Geometry,
    Examples,
    Dirichlet,
    Brownian,
    Contraction,
    Wongzakai,
    Donsker,
    Transience,
    Jko,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Geometry,
        Suite::Examples,
        Suite::Dirichlet,
        Suite::Brownian,
        Suite::Contraction,
        Suite::Wongzakai,
        Suite::Donsker,
        Suite::Transience,
        Suite::Jko,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Geometry => "geometry",
            Suite::Examples => "examples",
            Suite::Dirichlet => "dirichlet",
            Suite::Brownian => "brownian",
            Suite::Contraction => "contraction",
            Suite::Wongzakai => "wongzakai",
            Suite::Donsker => "donsker",
            Suite::Transience => "transience",
            Suite::Jko => "jko",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown suite {s:?}")))
    }
}

/// Configuration of one suite run. `A` and `alpha` replace the default game
/// of the dirichlet and contraction suites; `paths` scales Monte Carlo sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub suite: Suite,
    pub seed: u64,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
}

impl SuiteConfig {
    pub fn new(suite: Suite) -> Self {
        Self { suite, seed: DEFAULT_SEED, a: None, alpha: None, paths: None }
    }

    fn matrix(&self) -> Result<Option<PayoffMatrix>> {
        self.a.as_deref().map(PayoffMatrix::from_rows).transpose()
    }

    fn paths_or(&self, default: usize) -> usize {
        self.paths.unwrap_or(default)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub gates: Vec<TestReport>,
    /// Diagnostics reported alongside the gates; they never fail a suite.
    pub info: Vec<TestReport>,
    pub pass: bool,
}

impl SuiteReport {
    fn new(cfg: &SuiteConfig, gates: Vec<TestReport>, info: Vec<TestReport>) -> Self {
        let pass = !gates.is_empty() && gates.iter().all(|g| g.pass);
        Self { suite: cfg.suite, seed: cfg.seed, gates, info, pass }
    }

    pub fn failed(&self) -> impl Iterator<Item = &TestReport> {
        self.gates.iter().filter(|g| !g.pass)
    }

    /// One `PASS`/`FAIL` line per gate, then one `INFO` line per diagnostic.
    pub fn lines(&self) -> Vec<String> {
        self.gates
            .iter()
            .map(TestReport::line)
            .chain(self.info.iter().map(|r| format!("INFO {}", r.line())))
            .collect()
    }
}

pub fn run(cfg: &SuiteConfig) -> Result<SuiteReport> {
    match cfg.suite {
        Suite::Geometry => geometry(cfg),
        Suite::Examples => examples(cfg),
        Suite::Dirichlet => dirichlet(cfg),
        Suite::Brownian => brownian(cfg),
        Suite::Contraction => contraction(cfg),
        Suite::Wongzakai => wong_zakai(cfg),
        Suite::Donsker => donsker(cfg),
        Suite::Transience => transience(cfg),
        Suite::Jko => jko(cfg),
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `ilr⁻¹` of a standard normal chart point.
fn random_composition(rng: &mut ChaCha8Rng, psi: &ContrastMatrix) -> Result<Composition> {
    let x: Vec<f64> = (0..psi.parts() - 1).map(|_| rng.sample(StandardNormal)).collect();
    psi.ilr_inv(&IlrPoint(x))
}

/// Interior lattice points of the simplex, at least `min_points` of them.
fn interior_grid(n: usize, min_points: usize) -> Result<Vec<Composition>> {
    let mut r = n + 1;
    loop {
        let grid: Vec<Vec<f64>> = simplex_grid(n, r).into_iter().filter(|p| p.iter().all(|x| *x > 0.0)).collect();
        if grid.len() >= min_points {
            return grid.into_iter().map(Composition::try_from).collect();
        }
        r += 1;
    }
}

const GEOMETRY_INSTANCES: usize = 1000;
const GEOMETRY_TOL: f64 = 1e-12;

fn geometry(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let psis: Vec<ContrastMatrix> = (2..=8).map(ContrastMatrix::new).collect::<Result<_>>()?;
    let mut rng = rng_from_seed(derive_seed(cfg.seed, 1));
    let (mut rule_i, mut rule_ii, mut ilr_rt, mut clr_rt, mut isometry, mut euclid_excess) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, f64::NEG_INFINITY);
    for k in 0..GEOMETRY_INSTANCES {
        let psi = &psis[k % psis.len()];
        let n = psi.parts();
        let p = random_composition(&mut rng, psi)?;
        let q = random_composition(&mut rng, psi)?;
        let alpha: f64 = rng.random_range(-3.0..3.0);
        let (cp, cq) = (clr(&p)?.into_vec(), clr(&q)?.into_vec());

        let lhs = clr(&perturb(&power(alpha, &p), &q)?)?.into_vec();
        let rhs: Vec<f64> = cp.iter().zip(&cq).map(|(a, b)| alpha * a + b).collect();
        rule_i = rule_i.max(max_abs_diff(&lhs, &rhs));
        rule_ii = rule_ii.max((inner(&p, &q)? - dot(&cp, &cq)).abs());

        let x = psi.ilr(&p)?;
        ilr_rt = ilr_rt.max(max_abs_diff(psi.ilr_inv(&x)?.as_slice(), p.as_slice()));
        ilr_rt = ilr_rt.max(max_abs_diff(&psi.ilr(&psi.ilr_inv(&x)?)?.0, &x.0));
        clr_rt = clr_rt.max(max_abs_diff(sfm(&cp).as_slice(), p.as_slice()));
        clr_rt = clr_rt.max(max_abs_diff(&clr(&sfm(&cp))?.into_vec(), &cp));

        let d = dist(&p, &q)?;
        let chart = euclid(&x.0, &psi.ilr(&q)?.0);
        let (lp, lq) = (p.logs()?, q.logs()?);
        let mut double_sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                double_sum += ((lp[i] - lp[j]) - (lq[i] - lq[j])).powi(2);
            }
        }
        isometry = isometry.max((d - chart).abs()).max((d - (double_sum / (2.0 * n as f64)).sqrt()).abs());
        euclid_excess = euclid_excess.max(euclid(p.as_slice(), q.as_slice()) - d);
    }
    let mut contrast = 0.0f64;
    for psi in &psis {
        let n = psi.parts();
        let m = psi.to_matrix();
        let gram = &m * m.transpose() - DMatrix::identity(n - 1, n - 1);
        let proj = m.transpose() * &m - (DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64));
        contrast = contrast.max(gram.amax()).max(proj.amax());
    }
    let size = vec![GEOMETRY_INSTANCES];
    let seed = Some(cfg.seed);
    let mut gates = vec![
        TestReport::at_most("geometry clr(a⊙p⊕q) = a·clr p + clr q", rule_i, GEOMETRY_TOL, seed, size.clone()),
        TestReport::at_most("geometry <p,q>_A = (clr p, clr q)", rule_ii, GEOMETRY_TOL, seed, size.clone()),
        TestReport::at_most("geometry contrast identities", contrast, GEOMETRY_TOL, None, vec![psis.len()]),
        TestReport::at_most("geometry ilr round trip", ilr_rt, GEOMETRY_TOL, seed, size.clone()),
        TestReport::at_most("geometry clr round trip", clr_rt, GEOMETRY_TOL, seed, size.clone()),
        TestReport::at_most("geometry isometry", isometry, GEOMETRY_TOL, seed, size.clone()),
        TestReport::at_most("geometry euclidean - d_A", euclid_excess, GEOMETRY_TOL, seed, size),
    ];
    gates.extend(cross_oracles(cfg.seed)?);
    Ok(SuiteReport::new(cfg, gates, Vec::new()))
}

const CROSS_CASES: usize = 200;

fn cross_oracles(seed: u64) -> Result<Vec<TestReport>> {
    let mut rng = rng_from_seed(derive_seed(seed, 2));
    let mut residual_gap = 0.0f64;
    for _ in 0..CROSS_CASES {
        let n = rng.random_range(2..6);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-4.0..4.0)).collect()).collect();
        let a = PayoffMatrix::from_rows(&rows)?;
        let alpha: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..4.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let p = closure(&v)?;
        let hj = hj_residual(
            &a,
            dirichlet_potential_gradient(alpha.clone()),
            dirichlet_potential_hessian(alpha.clone()),
            &p,
        )?;
        residual_gap = residual_gap.max((hj - dircond_residual(&a, &alpha, &p)?).abs());
    }

    // Drift of sfm(psiᵀx) for dx = θdt + σdB by central differences:
    // Dsfm·psiᵀθ + ½σ²Δ_x(sfm∘psiᵀ).
    let h = 1e-4;
    let sigma = 1.0;
    let mut corrector_gap = 0.0f64;
    for k in 0..CROSS_CASES {
        let n = 3 + k % 4;
        let psi = ContrastMatrix::new(n)?;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let drift = DriftKind::replicator(&PayoffMatrix::from_rows(&rows)?);
        let x: Vec<f64> = (0..n - 1).map(|_| rng.random_range(-2.0..2.0)).collect();
        let to_p = |x: &[f64]| sfm(&psi.apply_transpose(x)).into_vec();
        let p = to_p(&x);
        let theta = drift_in_chart(&drift, &x)?;
        let mut fd = vec![0.0; n];
        for j in 0..n - 1 {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[j] += h;
            xm[j] -= h;
            let (pp, pm) = (to_p(&xp), to_p(&xm));
            for i in 0..n {
                fd[i] += (pp[i] - pm[i]) / (2.0 * h) * theta[j] + 0.5 * sigma * sigma * (pp[i] - 2.0 * p[i] + pm[i]) / (h * h);
            }
        }
        let analytic = simplex_ito_drift(&drift, &Composition::try_from(p)?, sigma)?;
        corrector_gap = corrector_gap.max(max_abs_diff(&analytic, &fd));
    }

    let mut metric_gap = 0.0f64;
    for k in 0..GEOMETRY_INSTANCES {
        let psi = ContrastMatrix::new(2 + k % 7)?;
        let p = random_composition(&mut rng, &psi)?;
        let lhs = shahshahani_inv(&p);
        let rhs = sfm_jacobian(clr(&p)?.as_slice());
        metric_gap = metric_gap.max((lhs - rhs).amax());
    }
    Ok(vec![
        TestReport::at_most("cross-oracle dircond = hj residual", residual_gap, 1e-10, Some(seed), vec![CROSS_CASES]),
        TestReport::at_most("cross-oracle ito corrector vs chart", corrector_gap, 1e-6, Some(seed), vec![CROSS_CASES]),
        TestReport::at_most(
            "cross-oracle g^-1 = Dsfm(clr p)",
            metric_gap,
            GEOMETRY_TOL,
            Some(seed),
            vec![GEOMETRY_INSTANCES],
        ),
    ])
}

fn examples(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let tol = 1e-12;
    let telema = fixtures::one_to_nine();
    let decomposition_err = decompose(&telema).map_or(f64::INFINITY, |d| {
        d.lambda
            .abs()
            .max(max_abs_diff(&d.u, &[0.0, 3.0, 6.0]))
            .max(max_abs_diff(&d.v, &[1.0, 2.0, 3.0]))
    });
    let ess_err = enumerate_nash(&telema)?
        .ess
        .map_or(f64::INFINITY, |e| max_abs_diff(&e.point, &[0.0, 0.0, 1.0]));

    let interior_target = [1.0 / 30.0, 1.0 / 3.0, 19.0 / 30.0];
    let shifted = telema.shift_diagonal(-10.0);
    let interior_err = enumerate_nash(&shifted)?
        .interior_ne
        .map_or(f64::INFINITY, |p| max_abs_diff(p.as_slice(), &interior_target));
    let closed_form_err = match decompose(&shifted) {
        Some(d) => interior_ne_decomposed(&d, 3)?.map_or(f64::INFINITY, |p| max_abs_diff(p.as_slice(), &interior_target)),
        None => f64::INFINITY,
    };

    let boundary_err = enumerate_nash(&telema.shift_diagonal(-5.0))?
        .boundary_ne
        .iter()
        .map(|b| max_abs_diff(&b.point, &[0.0, 0.2, 0.8]))
        .fold(f64::INFINITY, f64::min);
    let gates = vec![
        TestReport::at_most("examples decompose(1..9) = (0, (0,3,6), (1,2,3))", decomposition_err, tol, None, vec![3]),
        TestReport::at_most("examples ESS of 1..9 = (0,0,1)", ess_err, tol, None, vec![3]),
        TestReport::at_most("examples interior NE of 1..9 - 10 id", interior_err, tol, None, vec![3]),
        TestReport::at_most("examples closed-form interior NE of 1..9 - 10 id", closed_form_err, tol, None, vec![3]),
        TestReport::at_most("examples boundary NE (0,1/5,4/5) of 1..9 - 5 id", boundary_err, 1e-9, None, vec![3]),
    ];
    Ok(SuiteReport::new(cfg, gates, Vec::new()))
}

const DIRICHLET_PATHS: usize = 100_000;
const MIXING_LONG_T: f64 = 10.0;

fn dirichlet(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let (a, alpha) = match (cfg.matrix()?, cfg.alpha.clone()) {
        (None, None) => (fixtures::negative_identity(3, 3.0), vec![1.0; 3]),
        (Some(a), Some(alpha)) => (a, alpha),
        _ => return Err(Error::InvalidConfig("A and alpha must be given together".into())),
    };
    let n = a.n();
    if alpha.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: alpha.len() });
    }
    let grid = interior_grid(n, 1000)?;
    let mut residual = 0.0f64;
    for p in &grid {
        residual = residual.max(dircond_residual(&a, &alpha, p)?.abs());
    }

    let paths = cfg.paths_or(DIRICHLET_PATHS);
    let drift = DriftKind::replicator(&a);
    let start = SdeConfig::new(SQRT_2, 1.0, 1e-3, derive_seed(cfg.seed, 1))?;
    let from_law = run_ensemble(&drift, &InitialLaw::Dirichlet(alpha.clone()), &start, paths)?;
    let mut law_gate = dirichlet_moment_check(&from_law.terminal_states, &alpha, Some(start.master_seed))?;
    law_gate.name = "dirichlet moments at t=1 from Dir(alpha)".into();

    let point = if n == 3 {
        Composition::new(vec![0.7, 0.2, 0.1])?
    } else {
        closure(&(1..=n).rev().map(|k| k as f64).collect::<Vec<_>>())?
    };
    let mixing = SdeConfig::new(SQRT_2, 5.0, 1e-3, derive_seed(cfg.seed, 2))?;
    let from_point = run_ensemble(&drift, &InitialLaw::Point(point.clone()), &mixing, paths)?;
    let mut mixing_gate = dirichlet_moment_check(&from_point.terminal_states, &alpha, Some(mixing.master_seed))?;
    mixing_gate.name = "dirichlet moments at t=5 from a point".into();

    // The chart potential n·LSE(psiᵀx) has exponential tails and an O(1)
    // spectral gap; t = 5 leaves a transient of several standard errors.
    let long = SdeConfig { t_end: MIXING_LONG_T, master_seed: derive_seed(cfg.seed, 3), ..mixing };
    let from_point_long = run_ensemble(&drift, &InitialLaw::Point(point), &long, paths)?;
    let mut long_info = dirichlet_moment_check(&from_point_long.terminal_states, &alpha, Some(long.master_seed))?;
    long_info.name = format!("dirichlet moments at t={MIXING_LONG_T} from a point");

    let gates = vec![
        TestReport::at_most("dirichlet stationarity residual on grid", residual, 1e-12, None, vec![grid.len()]),
        law_gate,
        mixing_gate,
    ];
    Ok(SuiteReport::new(cfg, gates, vec![long_info]))
}

const BROWNIAN_PATHS: usize = 10_000;
const A2_SAMPLES: usize = 1000;
const VARADHAN_PAIRS: usize = 20;
const VARADHAN_T: f64 = 1e-3;
/// Pairs closer than this have `t·(n-1)·ln(2πt)/d²` outside the ratio band.
const VARADHAN_MIN_DIST: f64 = 0.5;

fn brownian(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let paths = cfg.paths_or(BROWNIAN_PATHS);
    let p0 = Composition::barycenter(3)?;
    let master = derive_seed(cfg.seed, 1);
    // Records at t = 0, 0.25, 0.5, 0.75, 1.
    let chart_paths = (0..paths as u64)
        .into_par_iter()
        .map(|i| {
            let sde = SdeConfig::new(1.0, 1.0, 1e-3, derive_seed(master, i))?.record_every(250);
            bm_path(&p0, &sde).map(|t| t.ilr)
        })
        .collect::<Result<Vec<_>>>()?;
    if chart_paths.iter().any(|x| x.len() != 5) {
        return Err(Error::GridMismatch);
    }

    let critical = ks_critical_value(paths, LEVEL);
    let mut gates = Vec::new();
    for k in 0..2 {
        let marginal: Vec<f64> = chart_paths.iter().map(|x| x[4][k]).collect();
        let ks = ks_statistic(&marginal, standard_normal_cdf)?;
        gates.push(TestReport::at_most(format!("brownian KS ilr_{} at t=1", k + 1), ks, critical, Some(master), vec![paths]));
    }

    let increment = |x: &[Vec<f64>], s: usize, t: usize| -> Vec<f64> { x[t].iter().zip(&x[s]).map(|(b, a)| b - a).collect() };
    let first: Vec<Vec<f64>> = chart_paths.iter().map(|x| increment(x, 0, 2)).collect();
    let second: Vec<Vec<f64>> = chart_paths.iter().map(|x| increment(x, 2, 4)).collect();
    let mut worst_corr = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            let a: Vec<f64> = first.iter().map(|v| v[i]).collect();
            let b: Vec<f64> = second.iter().map(|v| v[j]).collect();
            worst_corr = worst_corr.max(correlation(&a, &b).abs());
        }
    }
    gates.push(TestReport::at_most(
        "brownian A1 |corr| of disjoint increments",
        worst_corr,
        3.0 / (paths as f64).sqrt(),
        Some(master),
        vec![paths],
    ));

    let m = A2_SAMPLES.min(paths / 2);
    let early: Vec<Vec<f64>> = chart_paths[..m].iter().map(|x| increment(x, 0, 1)).collect();
    let late: Vec<Vec<f64>> = chart_paths[m..2 * m].iter().map(|x| increment(x, 3, 4)).collect();
    gates.push(energy_permutation_test(
        "brownian A2 energy test, increments on [0,1/4] vs [3/4,1]",
        &early,
        &late,
        LEVEL,
        derive_seed(cfg.seed, 2),
    )?);

    let mut rng = rng_from_seed(derive_seed(cfg.seed, 3));
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut found = 0;
    while found < VARADHAN_PAIRS {
        let p = sample_dirichlet(&[1.0; 3], &mut rng)?;
        let q = sample_dirichlet(&[1.0; 3], &mut rng)?;
        let d = dist(&p, &q)?;
        if d < VARADHAN_MIN_DIST {
            continue;
        }
        let ratio = VARADHAN_T * heat_kernel_log_density(&p, &q, VARADHAN_T)? / (-0.5 * d * d);
        lo = lo.min(ratio);
        hi = hi.max(ratio);
        found += 1;
    }
    let seed = Some(derive_seed(cfg.seed, 3));
    gates.push(TestReport::at_least("brownian Varadhan ratio min", lo, 0.9, seed, vec![VARADHAN_PAIRS]));
    gates.push(TestReport::at_most("brownian Varadhan ratio max", hi, 1.0, seed, vec![VARADHAN_PAIRS]));
    Ok(SuiteReport::new(cfg, gates, Vec::new()))
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let m = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / m, b.iter().sum::<f64>() / m);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

const CONTRACTION_PAIRS: usize = 100;

/// Synchronously coupled pairs from independent `Dir(1,…,1)` starts, σ = √2,
/// t ∈ [0, 1], dt = 1e-3.
fn coupled_reports(a: &PayoffMatrix, lambda: f64, pairs: usize, seed: u64) -> Result<Vec<(u64, ContractionReport)>> {
    let drift = DriftKind::replicator(a);
    let ones = vec![1.0; a.n()];
    (0..pairs as u64)
        .into_par_iter()
        .map(|i| {
            let s = derive_seed(seed, i);
            let mut rng = rng_from_seed(derive_seed(s, 0));
            let p0 = sample_dirichlet(&ones, &mut rng)?;
            let q0 = sample_dirichlet(&ones, &mut rng)?;
            let sde = SdeConfig::new(SQRT_2, 1.0, 1e-3, s)?;
            let (tp, tq) = coupled_pair(&drift, &p0, &q0, &sde)?;
            Ok((s, contraction_report(&tp, &tq, lambda)?))
        })
        .collect()
}

/// Gate passing when at least one coupled pair expands in `d_A`.
fn expansion_control(name: &str, a: &PayoffMatrix, seed: u64) -> Result<TestReport> {
    let reports = coupled_reports(a, 0.0, CONTRACTION_PAIRS, seed)?;
    let witnesses: Vec<u64> = reports.iter().filter(|(_, r)| !r.non_expansion.pass).map(|(s, _)| *s).collect();
    Ok(TestReport::at_least(
        format!("{name} expansion witnesses"),
        witnesses.len() as f64,
        1.0,
        Some(witnesses.first().copied().unwrap_or(seed)),
        vec![CONTRACTION_PAIRS],
    ))
}

fn contraction(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let custom = cfg.matrix()?;
    let a = custom.clone().unwrap_or_else(|| fixtures::one_to_nine().shift_diagonal(-10.0));
    let mut gates = Vec::new();
    let mut info = Vec::new();
    match decompose(&a).filter(|d| d.lambda > 0.0) {
        Some(d) => {
            let seed = derive_seed(cfg.seed, 1);
            let pairs = cfg.paths_or(CONTRACTION_PAIRS);
            let reports = coupled_reports(&a, d.lambda, pairs, seed)?;
            let worst = |f: &dyn Fn(&ContractionReport) -> f64| reports.iter().map(|(_, r)| f(r)).fold(0.0, f64::max);
            let size = vec![pairs];
            gates.push(TestReport::at_most(
                "contraction (a) d_A non-expansion, worst ratio",
                worst(&|r| r.non_expansion.worst_ratio),
                1.0,
                Some(seed),
                size.clone(),
            ));
            gates.push(TestReport::at_most(
                format!("contraction (b) exponential bound lambda={}, worst ratio", d.lambda),
                worst(&|r| r.exponential.as_ref().map_or(0.0, |c| c.worst_ratio)),
                1.0,
                Some(seed),
                size.clone(),
            ));
            gates.push(TestReport::at_most(
                format!("contraction (c) integral bound lambda={}, worst ratio", d.lambda),
                worst(&|r| r.integral.worst_ratio),
                1.0,
                Some(seed),
                size,
            ));
        }
        None => gates.push(expansion_control("contraction negative control (custom game)", &a, derive_seed(cfg.seed, 1))?),
    }
    if custom.is_none() {
        let control = PayoffMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]])?;
        gates.push(expansion_control("contraction negative control diag(1,-1)", &control, derive_seed(cfg.seed, 2))?);
        info.push(expansion_control(
            "contraction control id_2 (coordination)",
            &fixtures::coordination_2(),
            derive_seed(cfg.seed, 3),
        )?);
    }
    Ok(SuiteReport::new(cfg, gates, info))
}

const WONG_ZAKAI_PATHS: usize = 10_000;
const WONG_ZAKAI_LAMBDAS: [f64; 4] = [0.8, 0.4, 0.2, 0.1];
const WONG_ZAKAI_MAX_DT: f64 = 0.01;
const ENERGY_BLOCKS: usize = 20;

fn wong_zakai(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let paths = cfg.paths_or(WONG_ZAKAI_PATHS);
    let p0 = Composition::barycenter(3)?;
    // The colored-noise limit has ilr variance 2t.
    let reference = bm_exact_ensemble(&p0, 1.0, SQRT_2, derive_seed(cfg.seed, 1), paths)?.ilr_points()?;
    let mut energies = Vec::new();
    let mut info = Vec::new();
    for (k, &lambda) in WONG_ZAKAI_LAMBDAS.iter().enumerate() {
        let dt = (lambda * lambda / 10.0).min(WONG_ZAKAI_MAX_DT);
        let sde = SdeConfig::new(0.0, 1.0, dt, derive_seed(cfg.seed, 10 + k as u64))?;
        let ens = wong_zakai_ensemble(lambda, &p0, &sde, paths)?.ilr_points()?;
        let (e, se) = energy_distance_with_se(&ens, &reference, ENERGY_BLOCKS)?;
        info.push(TestReport::at_most(
            format!("wongzakai energy distance lambda={lambda} (se {se:.2e})"),
            e,
            f64::INFINITY,
            Some(sde.master_seed),
            vec![paths, paths],
        ));
        energies.push((lambda, e, se));
    }
    let gates = energies
        .windows(2)
        .map(|w| {
            let ((l0, e0, s0), (l1, e1, s1)) = (w[0], w[1]);
            TestReport::at_most(
                format!("wongzakai energy(lambda={l1}) - energy(lambda={l0}) within 2 SE"),
                e1 - e0,
                2.0 * (s0 * s0 + s1 * s1).sqrt(),
                Some(cfg.seed),
                vec![paths, paths],
            )
        })
        .collect();
    Ok(SuiteReport::new(cfg, gates, info))
}

const DONSKER_WALKS: usize = 10_000;
const DONSKER_STEPS: [usize; 3] = [16, 64, 256];

fn donsker(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let walks = cfg.paths_or(DONSKER_WALKS);
    let p0 = Composition::barycenter(3)?;
    let walker = SimplexWalk::rademacher(3)?;
    let mut ks = Vec::new();
    for (k, &n_steps) in DONSKER_STEPS.iter().enumerate() {
        let master = derive_seed(cfg.seed, 1 + k as u64);
        let terminal = (0..walks as u64)
            .into_par_iter()
            .map(|i| {
                let walk = walker.walk(&p0, n_steps, derive_seed(master, i))?;
                donsker_rescaled(&walk, n_steps, &[1.0]).map(|t| t.terminal_ilr().to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        let mut worst = 0.0f64;
        for c in 0..2 {
            let marginal: Vec<f64> = terminal.iter().map(|x| x[c]).collect();
            worst = worst.max(ks_statistic(&marginal, standard_normal_cdf)?);
        }
        ks.push((n_steps, worst, master));
    }
    let mut gates: Vec<TestReport> = ks
        .windows(2)
        .map(|w| {
            TestReport::at_most(
                format!("donsker KS(n={}) below KS(n={})", w[1].0, w[0].0),
                w[1].1,
                w[0].1,
                Some(w[1].2),
                vec![walks],
            )
        })
        .collect();
    let (n_last, ks_last, seed_last) = ks[ks.len() - 1];
    gates.push(TestReport::at_most(format!("donsker KS(n={n_last})"), ks_last, 0.05, Some(seed_last), vec![walks]));
    Ok(SuiteReport::new(cfg, gates, Vec::new()))
}

const TRANSIENCE_PATHS: usize = 30_000;
const TRANSIENCE_T: f64 = 1e4;

fn transience(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let paths = cfg.paths_or(TRANSIENCE_PATHS);
    let seed = derive_seed(cfg.seed, 1);
    let ens = bm_exact_ensemble(&Composition::barycenter(3)?, TRANSIENCE_T, 1.0, seed, paths)?;
    let mut gate = vertex_absorption_stats(&ens.terminal_states, Some(seed))?;
    gate.name = "transience nearest-vertex chi-square at t=1e4".into();
    Ok(SuiteReport::new(cfg, vec![gate], Vec::new()))
}

const JKO_T_END: f64 = 0.2;
const JKO_STEPS: [usize; 3] = [10, 20, 40];
/// Step count of the fine flow that isolates the time-discretization error.
const JKO_REFERENCE_STEPS: usize = 1280;

fn jko(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let start = GaussianStart { mean: 0.0, sd: 1.0 };
    let flows = JKO_STEPS
        .iter()
        .map(|&n| jko_flow_vs_heat(start, DEFAULT_LEVELS, JKO_T_END, n))
        .collect::<Result<Vec<_>>>()?;
    let reference = jko_flow_vs_heat(start, DEFAULT_LEVELS, JKO_T_END, JKO_REFERENCE_STEPS)?.terminal;
    let sizes = vec![DEFAULT_LEVELS];
    let mut gates = Vec::new();
    let mut info = Vec::new();
    for k in 1..flows.len() {
        let ratio = flows[k].terminal_error() / flows[k - 1].terminal_error();
        gates.push(TestReport::at_most(
            format!("jko |ratio - 1/2| of error vs exact, n={}/{} (ratio {ratio:.3})", JKO_STEPS[k], JKO_STEPS[k - 1]),
            (ratio - 0.5).abs(),
            0.15,
            None,
            sizes.clone(),
        ));
        let time_ratio = w2_quantile(&flows[k].terminal, &reference)? / w2_quantile(&flows[k - 1].terminal, &reference)?;
        info.push(TestReport::at_most(
            format!(
                "jko |ratio - 1/2| of error vs n={JKO_REFERENCE_STEPS} flow, n={}/{} (ratio {time_ratio:.3})",
                JKO_STEPS[k],
                JKO_STEPS[k - 1]
            ),
            (time_ratio - 0.5).abs(),
            0.15,
            None,
            sizes.clone(),
        ));
    }
    let mut abs = flows[flows.len() - 1].report(0.01);
    abs.name = format!("jko W2 error vs exact at n={}", JKO_STEPS[JKO_STEPS.len() - 1]);
    gates.push(abs);
    Ok(SuiteReport::new(cfg, gates, info))
}
