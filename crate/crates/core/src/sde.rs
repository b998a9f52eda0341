//! Stochastic simulation on the simplex.
//!
//! Everything runs in the ilr chart, where the noise is additive and the
//! drifts are bounded: exact Aitchison Brownian motion, Euler-Maruyama for the
//! stochastic replicator and Dirichlet-Langevin equations, synchronous
//! couplings, Ornstein-Uhlenbeck colored-noise paths and the simplex random
//! walk with its diffusive rescaling.
//!
//! Ensembles derive the stream of trajectory `i` from `(master_seed, i)`, so
//! results do not depend on thread count or scheduling.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aitchison::{perturb, sfm, sfm_into, Composition, ContrastMatrix};
use crate::error::{Error, Result};
use crate::payoff::PayoffMatrix;
use crate::replicator::{fmt_full, rk4, validate_grid, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DriftKind {
    None,
    Replicator {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
    },
    DirichletLangevin { alpha: Vec<f64> },
}

impl DriftKind {
    pub fn replicator(a: &PayoffMatrix) -> Self {
        DriftKind::Replicator { a: a.rows() }
    }

    pub fn dirichlet_langevin(alpha: Vec<f64>) -> Result<Self> {
        validate_alpha(&alpha)?;
        Ok(DriftKind::DirichletLangevin { alpha })
    }

    /// Number of strategies the drift is defined for, if it fixes one.
    pub fn parts(&self) -> Option<usize> {
        match self {
            DriftKind::None => None,
            DriftKind::Replicator { a } => Some(a.len()),
            DriftKind::DirichletLangevin { alpha } => Some(alpha.len()),
        }
    }

    fn field(&self, n: usize) -> Result<DriftField> {
        if let Some(m) = self.parts() {
            if m != n {
                return Err(Error::DimensionMismatch { expected: m, got: n });
            }
        }
        let psi = ContrastMatrix::new(n)?;
        let law = match self {
            DriftKind::None => FieldLaw::Zero,
            DriftKind::Replicator { a } => FieldLaw::Replicator(PayoffMatrix::from_rows(a)?),
            DriftKind::DirichletLangevin { alpha } => {
                validate_alpha(alpha)?;
                FieldLaw::Dirichlet { total: alpha.iter().sum(), alpha: alpha.clone() }
            }
        };
        Ok(DriftField { psi, law, z: vec![0.0; n], p: vec![0.0; n], w: vec![0.0; n] })
    }
}

fn validate_alpha(alpha: &[f64]) -> Result<()> {
    if alpha.len() < 2 {
        return Err(Error::BadDimension(alpha.len()));
    }
    for (index, &value) in alpha.iter().enumerate() {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::NonPositiveEntry { index, value });
        }
    }
    Ok(())
}

enum FieldLaw {
    Zero,
    Replicator(PayoffMatrix),
    Dirichlet { alpha: Vec<f64>, total: f64 },
}

/// Drift in the ilr chart with scratch space for allocation-free evaluation.
struct DriftField {
    psi: ContrastMatrix,
    law: FieldLaw,
    z: Vec<f64>,
    p: Vec<f64>,
    w: Vec<f64>,
}

impl DriftField {
    fn eval(&mut self, x: &[f64], out: &mut [f64]) {
        match &self.law {
            FieldLaw::Zero => out.iter_mut().for_each(|v| *v = 0.0),
            FieldLaw::Replicator(a) => {
                self.psi.apply_transpose_into(x, &mut self.z);
                sfm_into(&self.z, &mut self.p);
                a.mul_into(&self.p, &mut self.w);
                self.psi.apply_into(&self.w, out);
            }
            FieldLaw::Dirichlet { alpha, total } => {
                self.psi.apply_transpose_into(x, &mut self.z);
                sfm_into(&self.z, &mut self.p);
                for i in 0..alpha.len() {
                    self.w[i] = alpha[i] - total * self.p[i];
                }
                self.psi.apply_into(&self.w, out);
            }
        }
    }
}

/// Drift of `kind` at the ilr point `x`.
pub fn drift_in_chart(kind: &DriftKind, x: &[f64]) -> Result<Vec<f64>> {
    let mut field = kind.field(x.len() + 1)?;
    let mut out = vec![0.0; x.len()];
    field.eval(x, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    pub sigma: f64,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "one")]
    pub record_every: usize,
    pub master_seed: u64,
}

fn one() -> usize {
    1
}

impl SdeConfig {
    pub fn new(sigma: f64, t_end: f64, dt: f64, master_seed: u64) -> Result<Self> {
        let cfg = Self { sigma, t_end, dt, record_every: 1, master_seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn record_every(mut self, k: usize) -> Self {
        self.record_every = k;
        self
    }

    pub fn validate(&self) -> Result<usize> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidConfig(format!("sigma must be nonnegative, got {}", self.sigma)));
        }
        validate_grid(self.t_end, self.dt, self.record_every)
    }

    pub fn steps(&self) -> usize {
        ((self.t_end / self.dt).round() as usize).max(1)
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trajectory `index` in an ensemble with `master_seed`.
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    mix64(mix64(master_seed) ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn fill_normal(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

/// One draw from `Dir(alpha)` via normalized Gamma variates.
pub fn sample_dirichlet(alpha: &[f64], rng: &mut ChaCha8Rng) -> Result<Composition> {
    validate_alpha(alpha)?;
    let mut g: Vec<f64> = alpha
        .iter()
        .map(|&a| rng.sample(Gamma::new(a, 1.0).expect("alpha validated")))
        .collect();
    // Small shapes can underflow to zero.
    for v in g.iter_mut() {
        *v = v.max(f64::MIN_POSITIVE);
    }
    crate::aitchison::closure(&g)
}

/// `X_t = p0 ⊕ sfm(B_t)` with `B_t ~ N(0, σ²t·id_n)`.
pub fn bm_exact(p0: &Composition, t: f64, sigma: f64, seed: u64) -> Result<Composition> {
    let mut rng = rng_from_seed(seed);
    bm_exact_with(p0, t, sigma, &mut rng)
}

fn bm_exact_with(p0: &Composition, t: f64, sigma: f64, rng: &mut ChaCha8Rng) -> Result<Composition> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::NonpositiveTime(t));
    }
    if t == 0.0 {
        return Ok(p0.clone());
    }
    let scale = sigma * t.sqrt();
    let b: Vec<f64> = (0..p0.len()).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    perturb(p0, &sfm(&b))
}

/// Exact Brownian motion for many independent paths; path `i` uses
/// `derive_seed(master_seed, i)`.
pub fn bm_exact_ensemble(p0: &Composition, t: f64, sigma: f64, master_seed: u64, paths: usize) -> Result<Ensemble> {
    let seeds: Vec<u64> = (0..paths as u64).map(|i| derive_seed(master_seed, i)).collect();
    let terminal_states = seeds
        .par_iter()
        .map(|&s| bm_exact(p0, t, sigma, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble {
        terminal_states,
        seeds,
        config: SdeConfig { sigma, t_end: t, dt: t, record_every: 1, master_seed },
    })
}

/// Density of the σ = 1 Aitchison heat kernel against the Aitchison measure.
pub fn heat_kernel_density(p: &Composition, q: &Composition, t: f64) -> Result<f64> {
    heat_kernel_log_density(p, q, t).map(f64::exp)
}

pub fn heat_kernel_log_density(p: &Composition, q: &Composition, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NonpositiveTime(t));
    }
    let d = crate::aitchison::dist(p, q)?;
    let dim = (p.len() - 1) as f64;
    Ok(-0.5 * dim * (2.0 * std::f64::consts::PI * t).ln() - d * d / (2.0 * t))
}

/// Euler-Maruyama in the ilr chart; records into `traj` when given and
/// returns the terminal chart point.
fn euler_maruyama(
    field: &mut DriftField,
    x0: &[f64],
    cfg: &SdeConfig,
    steps: usize,
    rng: &mut ChaCha8Rng,
    mut traj: Option<&mut Trajectory>,
) -> Vec<f64> {
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut drift = vec![0.0; d];
    let mut xi = vec![0.0; d];
    let noise = cfg.sigma * cfg.dt.sqrt();
    if let Some(t) = traj.as_deref_mut() {
        t.push(0.0, &field.psi, &x);
    }
    for step in 0..steps {
        field.eval(&x, &mut drift);
        fill_normal(rng, &mut xi);
        for i in 0..d {
            x[i] += drift[i] * cfg.dt + noise * xi[i];
        }
        if let Some(t) = traj.as_deref_mut() {
            if (step + 1) % cfg.record_every == 0 || step + 1 == steps {
                t.push((step + 1) as f64 * cfg.dt, &field.psi, &x);
            }
        }
    }
    x
}

/// Brownian motion path from exact Gaussian ilr increments.
pub fn bm_path(p0: &Composition, cfg: &SdeConfig) -> Result<Trajectory> {
    let steps = cfg.validate()?;
    let mut field = DriftKind::None.field(p0.len())?;
    let x0 = field.psi.ilr(p0)?;
    let mut traj = Trajectory::with_capacity("exact-bm", Some(cfg.master_seed), steps / cfg.record_every + 2);
    let mut rng = rng_from_seed(cfg.master_seed);
    euler_maruyama(&mut field, x0.as_slice(), cfg, steps, &mut rng, Some(&mut traj));
    Ok(traj)
}

/// `x_{k+1} = x_k + θ(x_k)dt + σ√dt·ξ_k` with θ given by `drift`.
pub fn sde_path(drift: &DriftKind, p0: &Composition, cfg: &SdeConfig) -> Result<Trajectory> {
    let steps = cfg.validate()?;
    let mut field = drift.field(p0.len())?;
    let x0 = field.psi.ilr(p0)?;
    let mut traj = Trajectory::with_capacity("euler-maruyama-ilr", Some(cfg.master_seed), steps / cfg.record_every + 2);
    let mut rng = rng_from_seed(cfg.master_seed);
    euler_maruyama(&mut field, x0.as_slice(), cfg, steps, &mut rng, Some(&mut traj));
    Ok(traj)
}

/// Two Euler-Maruyama paths driven by the same noise increments.
pub fn coupled_pair(
    drift: &DriftKind,
    p0: &Composition,
    q0: &Composition,
    cfg: &SdeConfig,
) -> Result<(Trajectory, Trajectory)> {
    if p0.len() != q0.len() {
        return Err(Error::DimensionMismatch { expected: p0.len(), got: q0.len() });
    }
    let steps = cfg.validate()?;
    let mut field = drift.field(p0.len())?;
    let psi = field.psi.clone();
    let mut x = psi.ilr(p0)?.0;
    let mut y = psi.ilr(q0)?.0;
    let d = x.len();
    let cap = steps / cfg.record_every + 2;
    let mut tp = Trajectory::with_capacity("coupled-euler-maruyama-ilr", Some(cfg.master_seed), cap);
    let mut tq = Trajectory::with_capacity("coupled-euler-maruyama-ilr", Some(cfg.master_seed), cap);
    tp.push(0.0, &psi, &x);
    tq.push(0.0, &psi, &y);
    let mut rng = rng_from_seed(cfg.master_seed);
    let (mut fx, mut fy, mut xi) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let noise = cfg.sigma * cfg.dt.sqrt();
    for step in 0..steps {
        field.eval(&x, &mut fx);
        field.eval(&y, &mut fy);
        fill_normal(&mut rng, &mut xi);
        for i in 0..d {
            x[i] += fx[i] * cfg.dt + noise * xi[i];
            y[i] += fy[i] * cfg.dt + noise * xi[i];
        }
        if (step + 1) % cfg.record_every == 0 || step + 1 == steps {
            let t = (step + 1) as f64 * cfg.dt;
            tp.push(t, &psi, &x);
            tq.push(t, &psi, &y);
        }
    }
    Ok((tp, tq))
}

/// Law of the initial state of each ensemble member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialLaw {
    Point(Composition),
    Dirichlet(Vec<f64>),
}

impl InitialLaw {
    pub fn parts(&self) -> usize {
        match self {
            InitialLaw::Point(p) => p.len(),
            InitialLaw::Dirichlet(a) => a.len(),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<Composition> {
        match self {
            InitialLaw::Point(p) => Ok(p.clone()),
            InitialLaw::Dirichlet(alpha) => sample_dirichlet(alpha, rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub terminal_states: Vec<Composition>,
    pub seeds: Vec<u64>,
    pub config: SdeConfig,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.terminal_states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terminal_states.is_empty()
    }

    /// Terminal states in ilr coordinates.
    pub fn ilr_points(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.terminal_states.first().ok_or(Error::Empty)?.len();
        let psi = ContrastMatrix::new(n)?;
        self.terminal_states.iter().map(|p| psi.ilr(p).map(|x| x.0)).collect()
    }

    /// CSV with header `trajectory_id,seed,p_1..p_n`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.terminal_states.first().map_or(0, |p| p.len());
        let mut header = vec!["trajectory_id".to_string(), "seed".to_string()];
        header.extend((1..=n).map(|i| format!("p_{i}")));
        writeln!(w, "{}", header.join(","))?;
        for (i, (p, seed)) in self.terminal_states.iter().zip(&self.seeds).enumerate() {
            let cells: Vec<String> = p.as_slice().iter().map(|v| fmt_full(*v)).collect();
            writeln!(w, "{i},{seed},{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Terminal states of `paths` independent Euler-Maruyama trajectories. The
/// initial state of trajectory `i` is drawn from its own stream first.
pub fn run_ensemble(drift: &DriftKind, init: &InitialLaw, cfg: &SdeConfig, paths: usize) -> Result<Ensemble> {
    if paths == 0 {
        return Err(Error::InvalidConfig("ensemble needs at least one path".into()));
    }
    let steps = cfg.validate()?;
    let n = init.parts();
    drift.field(n)?;
    let seeds: Vec<u64> = (0..paths as u64).map(|i| derive_seed(cfg.master_seed, i)).collect();
    let terminal_states = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = rng_from_seed(seed);
            let p0 = init.draw(&mut rng)?;
            let mut field = drift.field(n)?;
            let x0 = field.psi.ilr(&p0)?;
            let x = euler_maruyama(&mut field, x0.as_slice(), cfg, steps, &mut rng, None);
            let mut p = vec![0.0; n];
            sfm_into(&field.psi.apply_transpose(&x), &mut p);
            Composition::try_from(p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble { terminal_states, seeds, config: *cfg })
}

/// Stationary unit-variance Ornstein-Uhlenbeck fitness `λ²dy = -y dt + λ dB`
/// sampled exactly on the grid `k·dt`, `k = 0..=steps`; `y_0 ~ N(0, id_n)` and
/// `E[y_s y_t] = exp(-|s-t|/λ²)`.
pub fn ou_fitness_path(lambda_corr: f64, n: usize, cfg: &SdeConfig, seed: u64) -> Result<Vec<Vec<f64>>> {
    let steps = cfg.validate()?;
    let mut rng = rng_from_seed(seed);
    ou_samples(lambda_corr, n, cfg.dt, steps, &mut rng)
}

fn ou_samples(lambda_corr: f64, n: usize, dt: f64, steps: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    if !(lambda_corr.is_finite() && lambda_corr > 0.0) {
        return Err(Error::InvalidConfig(format!("correlation parameter must be positive, got {lambda_corr}")));
    }
    let decay = (-dt / (lambda_corr * lambda_corr)).exp();
    let kick = (1.0 - decay * decay).sqrt();
    let mut y = vec![0.0; n];
    fill_normal(rng, &mut y);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(y.clone());
    let mut xi = vec![0.0; n];
    for _ in 0..steps {
        fill_normal(rng, &mut xi);
        for i in 0..n {
            y[i] = decay * y[i] + kick * xi[i];
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// RK4 for `ẋ = λ⁻¹·psi·y(t)` given fitness samples on the half-step grid
/// `k·dt/2`.
pub(crate) fn random_ode_path(
    lambda_corr: f64,
    p0: &Composition,
    cfg: &SdeConfig,
    steps: usize,
    fitness: &[Vec<f64>],
) -> Result<Trajectory> {
    let psi = ContrastMatrix::new(p0.len())?;
    if fitness.len() < 2 * steps + 1 {
        return Err(Error::SizeMismatch(fitness.len(), 2 * steps + 1));
    }
    let x0 = psi.ilr(p0)?;
    let mut traj = Trajectory::with_capacity("rk4-ilr-colored-noise", Some(cfg.master_seed), steps / cfg.record_every + 2);
    let half = cfg.dt / 2.0;
    let psi_f = psi.clone();
    rk4(x0.as_slice(), cfg.dt, steps, cfg.record_every, &mut traj, &psi, |t, _x, out| {
        let k = (t / half).round() as usize;
        psi_f.apply_into(&fitness[k], out);
        out.iter_mut().for_each(|v| *v /= lambda_corr);
    })?;
    Ok(traj)
}

/// Replicator flow driven by colored-noise fitness `λ⁻¹·y_t`, with `y` the
/// Ornstein-Uhlenbeck fitness drawn from `cfg.master_seed`.
pub fn wong_zakai_path(lambda_corr: f64, p0: &Composition, cfg: &SdeConfig) -> Result<Trajectory> {
    let steps = cfg.validate()?;
    let max = lambda_corr * lambda_corr / 10.0;
    if cfg.dt > max * (1.0 + 1e-12) {
        return Err(Error::StepVsCorrelation { dt: cfg.dt, max });
    }
    let mut rng = rng_from_seed(cfg.master_seed);
    let fitness = ou_samples(lambda_corr, p0.len(), cfg.dt / 2.0, 2 * steps, &mut rng)?;
    random_ode_path(lambda_corr, p0, cfg, steps, &fitness)
}

/// Terminal states of independent colored-noise paths; path `i` uses
/// `derive_seed(cfg.master_seed, i)`.
pub fn wong_zakai_ensemble(lambda_corr: f64, p0: &Composition, cfg: &SdeConfig, paths: usize) -> Result<Ensemble> {
    let seeds: Vec<u64> = (0..paths as u64).map(|i| derive_seed(cfg.master_seed, i)).collect();
    let terminal_states = seeds
        .par_iter()
        .map(|&seed| {
            let sub = SdeConfig { master_seed: seed, record_every: usize::MAX, ..*cfg };
            wong_zakai_path(lambda_corr, p0, &sub).map(|t| t.terminal().clone())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble { terminal_states, seeds, config: *cfg })
}

/// Distribution of one ilr step of the simplex random walk.
pub trait StepLaw: Sync {
    fn draw(&self, rng: &mut ChaCha8Rng, out: &mut [f64]);
}

/// Independent ±1 coordinates.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rademacher;

impl StepLaw for Rademacher {
    fn draw(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
    }
}

impl<F> StepLaw for F
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    fn draw(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        self(rng, out)
    }
}

/// Draws used to verify a caller-supplied step law.
pub const STEP_LAW_DRAWS: usize = 10_000;
/// Standard-error gate for the step-law moment check.
pub const STEP_LAW_GATE: f64 = 5.0;

/// Random walk `p_{k+1} = p_k ⊕ f_{k+1}` on the simplex with i.i.d. steps.
pub struct SimplexWalk<L: StepLaw> {
    psi: ContrastMatrix,
    law: L,
}

impl SimplexWalk<Rademacher> {
    pub fn rademacher(n: usize) -> Result<Self> {
        Ok(Self { psi: ContrastMatrix::new(n)?, law: Rademacher })
    }
}

impl<L: StepLaw> SimplexWalk<L> {
    /// Accepts `law` only if its empirical ilr mean is 0 and covariance the
    /// identity within [`STEP_LAW_GATE`] standard errors over
    /// [`STEP_LAW_DRAWS`] draws.
    pub fn new(n: usize, law: L, check_seed: u64) -> Result<Self> {
        let psi = ContrastMatrix::new(n)?;
        let d = n - 1;
        let mut rng = rng_from_seed(check_seed);
        let mut draws = vec![vec![0.0; d]; STEP_LAW_DRAWS];
        for x in draws.iter_mut() {
            law.draw(&mut rng, x);
        }
        let m = STEP_LAW_DRAWS as f64;
        for i in 0..d {
            let (mean, se) = mean_and_se(draws.iter().map(|x| x[i]), m);
            if mean.abs() > STEP_LAW_GATE * se {
                return Err(Error::BadStepLaw(format!("mean of coordinate {} is {mean:.4}", i + 1)));
            }
            for j in i..d {
                let target = if i == j { 1.0 } else { 0.0 };
                let (c, se) = mean_and_se(draws.iter().map(|x| x[i] * x[j]), m);
                if (c - target).abs() > STEP_LAW_GATE * se.max(1e-12) && (c - target).abs() > 1e-12 {
                    return Err(Error::BadStepLaw(format!("covariance ({}, {}) is {c:.4}", i + 1, j + 1)));
                }
            }
        }
        Ok(Self { psi, law })
    }

    pub fn parts(&self) -> usize {
        self.psi.parts()
    }

    /// Walk in ilr coordinates: partial sums of the steps, starting at `x0`.
    pub fn walk_ilr(&self, x0: &[f64], steps: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(steps + 1);
        let mut x = x0.to_vec();
        let mut f = vec![0.0; x0.len()];
        out.push(x.clone());
        for _ in 0..steps {
            self.law.draw(rng, &mut f);
            for (xi, fi) in x.iter_mut().zip(&f) {
                *xi += fi;
            }
            out.push(x.clone());
        }
        out
    }

    pub fn walk(&self, p0: &Composition, steps: usize, seed: u64) -> Result<Vec<Composition>> {
        if p0.len() != self.parts() {
            return Err(Error::DimensionMismatch { expected: self.parts(), got: p0.len() });
        }
        let x0 = self.psi.ilr(p0)?;
        let mut rng = rng_from_seed(seed);
        let xs = self.walk_ilr(x0.as_slice(), steps, &mut rng);
        std::iter::once(Ok(p0.clone()))
            .chain(xs[1..].iter().map(|x| self.psi.ilr_inv(&crate::aitchison::IlrPoint(x.clone()))))
            .collect()
    }
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone, m: f64) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / m;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Rademacher simplex random walk of `steps` steps from `p0`.
pub fn simplex_random_walk(p0: &Composition, steps: usize, step_seed: u64) -> Result<Vec<Composition>> {
    SimplexWalk::rademacher(p0.len())?.walk(p0, steps, step_seed)
}

/// Diffusive rescaling `n^{-1/2} ⊙ p_{nt}` with Aitchison-linear
/// interpolation between consecutive walk states.
pub fn donsker_rescaled(walk: &[Composition], n_steps: usize, t_grid: &[f64]) -> Result<Trajectory> {
    let first = walk.first().ok_or(Error::Empty)?;
    let psi = ContrastMatrix::new(first.len())?;
    let needed_len = |t: f64| -> usize {
        let s = n_steps as f64 * t;
        let k = s.floor() as usize;
        if s > k as f64 { k + 2 } else { k + 1 }
    };
    let mut prev = f64::NEG_INFINITY;
    for &t in t_grid {
        if !(t.is_finite() && t >= 0.0 && t > prev) {
            return Err(Error::InvalidConfig("time grid must be nonnegative and strictly increasing".into()));
        }
        prev = t;
        if needed_len(t) > walk.len() {
            return Err(Error::WalkTooShort { len: walk.len(), needed: needed_len(t) });
        }
    }
    let mut ilr_cache: Vec<Option<Vec<f64>>> = vec![None; walk.len()];
    let mut ilr_at = |k: usize| -> Result<Vec<f64>> {
        if ilr_cache[k].is_none() {
            ilr_cache[k] = Some(psi.ilr(&walk[k])?.0);
        }
        Ok(ilr_cache[k].clone().expect("filled above"))
    };
    let scale = 1.0 / (n_steps as f64).sqrt();
    let mut traj = Trajectory::with_capacity("donsker-rescaled", None, t_grid.len());
    for &t in t_grid {
        let s = n_steps as f64 * t;
        let k = s.floor() as usize;
        let frac = s - k as f64;
        let mut x = ilr_at(k)?;
        if frac > 0.0 {
            let next = ilr_at(k + 1)?;
            for (xi, ni) in x.iter_mut().zip(&next) {
                *xi += frac * (ni - *xi);
            }
        }
        x.iter_mut().for_each(|v| *v *= scale);
        traj.push(t, &psi, &x);
    }
    Ok(traj)
}

/// Ito corrector `b(p) = -g^{-1}(p)·p`, i.e. `b_i = p_i(Σ_k p_k² - p_i)`.
pub fn ito_corrector(p: &Composition) -> Vec<f64> {
    let s = p.norm_sq();
    p.as_slice().iter().map(|pi| pi * (s - pi)).collect()
}

/// Drift of `p_t = sfm(psi^T x_t)` in simplex coordinates when the chart
/// process solves `dx = θ(x)dt + σ dB`: `Dsfm·psi^T·θ + σ²·b(p)`.
pub fn simplex_ito_drift(drift: &DriftKind, p: &Composition, sigma: f64) -> Result<Vec<f64>> {
    let mut field = drift.field(p.len())?;
    let x = field.psi.ilr(p)?;
    let mut theta = vec![0.0; p.len() - 1];
    field.eval(x.as_slice(), &mut theta);
    let v = field.psi.apply_transpose(&theta);
    let pv: f64 = p.as_slice().iter().zip(&v).map(|(a, b)| a * b).sum();
    let b = ito_corrector(p);
    Ok(p.as_slice()
        .iter()
        .zip(&v)
        .zip(&b)
        .map(|((pi, vi), bi)| pi * (vi - pv) + sigma * sigma * bi)
        .collect())
}
