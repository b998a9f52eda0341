//! Verification statistics: stationarity residuals of the Fokker-Planck
//! equation, moment and goodness-of-fit tests, pathwise contraction checks
//! and exact one-dimensional Wasserstein distances.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::aitchison::{shahshahani_inv, Composition};
use crate::error::{Error, Result};
use crate::payoff::{potential_lambda, PayoffMatrix};
use crate::replicator::Trajectory;
use crate::sde::rng_from_seed;

/// Significance level of every hypothesis test in this module.
pub const LEVEL: f64 = 0.01;
/// Standard-error gate for moment comparisons.
pub const MOMENT_GATE: f64 = 3.0;
pub const MIN_SAMPLES: usize = 100;
pub const PERMUTATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// Outcome of one gate; `pass` is `statistic <= threshold` or
/// `statistic >= threshold` according to `direction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub direction: Direction,
    pub pass: bool,
    pub seed: Option<u64>,
    pub sizes: Vec<usize>,
}

impl TestReport {
    pub fn at_most(name: impl Into<String>, statistic: f64, threshold: f64, seed: Option<u64>, sizes: Vec<usize>) -> Self {
        Self {
            name: name.into(),
            statistic,
            threshold,
            direction: Direction::AtMost,
            pass: statistic <= threshold,
            seed,
            sizes,
        }
    }

    pub fn at_least(name: impl Into<String>, statistic: f64, threshold: f64, seed: Option<u64>, sizes: Vec<usize>) -> Self {
        Self {
            name: name.into(),
            statistic,
            threshold,
            direction: Direction::AtLeast,
            pass: statistic >= threshold,
            seed,
            sizes,
        }
    }

    pub fn line(&self) -> String {
        let op = match self.direction {
            Direction::AtMost => "<=",
            Direction::AtLeast => ">=",
        };
        format!(
            "{} {}: {:.6e} {op} {:.6e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.statistic,
            self.threshold
        )
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Stationarity residual of `Dir(alpha)` under the replicator Fokker-Planck
/// operator:
/// `(α - |α|p)·Ap + Λ(p) - ‖α - |α|p‖² + |α|(1 - ‖p‖²)`.
pub fn dircond_residual(a: &PayoffMatrix, alpha: &[f64], p: &Composition) -> Result<f64> {
    if alpha.len() != a.n() {
        return Err(Error::DimensionMismatch { expected: a.n(), got: alpha.len() });
    }
    if p.len() != a.n() {
        return Err(Error::DimensionMismatch { expected: a.n(), got: p.len() });
    }
    let total: f64 = alpha.iter().sum();
    let w: Vec<f64> = alpha.iter().zip(p.as_slice()).map(|(al, pi)| al - total * pi).collect();
    let ap = a.mul(p.as_slice());
    Ok(dot(&w, &ap) + potential_lambda(a, p)? - dot(&w, &w) + total * (1.0 - p.norm_sq()))
}

/// Residual `L'V - ΓV - Z_A V + Λ` of the Gibbs stationarity equation for
/// `exp(-V)` against the Aitchison measure, from the Euclidean gradient and
/// Hessian of `V`.
///
/// With `G = g⁻¹` and `b = -g⁻¹p`: `L'V = tr(G² ∇²V) + 2 b·∇V`,
/// `ΓV = ‖G∇V‖²` and `Z_A V = Ap·G∇V`.
pub fn hj_residual<G, H>(a: &PayoffMatrix, grad: G, hess: H, p: &Composition) -> Result<f64>
where
    G: Fn(&[f64]) -> Vec<f64>,
    H: Fn(&[f64]) -> DMatrix<f64>,
{
    let n = a.n();
    if p.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: p.len() });
    }
    let g = grad(p.as_slice());
    let h = hess(p.as_slice());
    if g.len() != n || h.nrows() != n || h.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: g.len() });
    }
    let ginv = shahshahani_inv(p);
    let gv = &ginv * DVector::from_column_slice(&g);
    let second = (&ginv * &ginv * h).trace();
    let corrector: Vec<f64> = {
        let s = p.norm_sq();
        p.as_slice().iter().map(|pi| pi * (s - pi)).collect()
    };
    let generator = second + 2.0 * dot(&corrector, &g);
    let carre_du_champ = gv.norm_squared();
    let transport = dot(&a.mul(p.as_slice()), gv.as_slice());
    Ok(generator - carre_du_champ - transport + potential_lambda(a, p)?)
}

/// Euclidean gradient of the Dirichlet potential `V = -Σ α_i ln p_i`.
pub fn dirichlet_potential_gradient(alpha: Vec<f64>) -> impl Fn(&[f64]) -> Vec<f64> {
    move |p| alpha.iter().zip(p).map(|(a, x)| -a / x).collect()
}

pub fn dirichlet_potential_hessian(alpha: Vec<f64>) -> impl Fn(&[f64]) -> DMatrix<f64> {
    move |p| DMatrix::from_fn(p.len(), p.len(), |i, j| if i == j { alpha[i] / (p[i] * p[i]) } else { 0.0 })
}

/// `sup_x |F_n(x) - F(x)|`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_SAMPLES, got: samples.len() });
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i as f64 + 1.0) / m - f).max(f - i as f64 / m);
    }
    Ok(d)
}

/// Asymptotic critical value `sqrt(ln(2/level)/2)/sqrt(m)` of the
/// one-sample KS statistic.
pub fn ks_critical_value(m: usize, level: f64) -> f64 {
    ((2.0 / level).ln() / 2.0).sqrt() / (m as f64).sqrt()
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_samples(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<()> {
    for s in [a, b] {
        if s.len() < MIN_SAMPLES {
            return Err(Error::TooFewSamples { needed: MIN_SAMPLES, got: s.len() });
        }
    }
    let d = a[0].len();
    if let Some(bad) = a.iter().chain(b).find(|x| x.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: bad.len() });
    }
    Ok(())
}

/// Sum of `|x_i - y_j|` over all pairs, rows reduced in order.
fn cross_sum(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let rows: Vec<f64> = a.par_iter().map(|x| b.iter().map(|y| euclid(x, y)).sum()).collect();
    rows.iter().sum()
}

/// Sum of `|x_i - x_j|` over `i < j`.
fn within_sum(a: &[Vec<f64>]) -> f64 {
    let rows: Vec<f64> = (0..a.len())
        .into_par_iter()
        .map(|i| a[i + 1..].iter().map(|y| euclid(&a[i], y)).sum())
        .collect();
    rows.iter().sum()
}

/// Energy distance V-statistic
/// `2E|X - Y| - E|X - X'| - E|Y - Y'|` of two point clouds.
pub fn two_sample_energy(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    check_samples(a, b)?;
    let (n, m) = (a.len() as f64, b.len() as f64);
    Ok(2.0 * cross_sum(a, b) / (n * m) - 2.0 * within_sum(a) / (n * n) - 2.0 * within_sum(b) / (m * m))
}

fn energy_u(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let (n, m) = (a.len() as f64, b.len() as f64);
    2.0 * cross_sum(a, b) / (n * m) - 2.0 * within_sum(a) / (n * (n - 1.0)) - 2.0 * within_sum(b) / (m * (m - 1.0))
}

/// Unbiased energy distance together with a Monte Carlo standard error from
/// `blocks` disjoint sub-sample estimates.
pub fn energy_distance_with_se(a: &[Vec<f64>], b: &[Vec<f64>], blocks: usize) -> Result<(f64, f64)> {
    check_samples(a, b)?;
    if blocks < 2 || a.len() / blocks < 2 || b.len() / blocks < 2 {
        return Err(Error::TooFewSamples { needed: 2 * blocks.max(2), got: a.len().min(b.len()) });
    }
    let full = energy_u(a, b);
    let (sa, sb) = (a.len() / blocks, b.len() / blocks);
    let parts: Vec<f64> = (0..blocks)
        .map(|k| energy_u(&a[k * sa..(k + 1) * sa], &b[k * sb..(k + 1) * sb]))
        .collect();
    let mean = parts.iter().sum::<f64>() / blocks as f64;
    let var = parts.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (blocks as f64 - 1.0);
    Ok((full, (var / blocks as f64).sqrt()))
}

/// Permutation test of equal distributions with the energy statistic. The
/// threshold is the `1 - level` quantile of [`PERMUTATIONS`] relabelled
/// statistics; `pass` means no detectable difference.
pub fn energy_permutation_test(
    name: &str,
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    level: f64,
    seed: u64,
) -> Result<TestReport> {
    check_samples(a, b)?;
    let pooled: Vec<&Vec<f64>> = a.iter().chain(b).collect();
    let total = pooled.len();
    let dist: Vec<Vec<f64>> = (0..total)
        .into_par_iter()
        .map(|i| pooled.iter().map(|y| euclid(pooled[i], y)).collect())
        .collect();
    let all: f64 = dist.iter().map(|r| r.iter().sum::<f64>()).sum();
    let (n, m) = (a.len() as f64, b.len() as f64);
    let statistic_for = |in_a: &[bool]| -> f64 {
        let (mut saa, mut sbb) = (0.0, 0.0);
        for i in 0..total {
            for j in 0..total {
                match (in_a[i], in_a[j]) {
                    (true, true) => saa += dist[i][j],
                    (false, false) => sbb += dist[i][j],
                    _ => {}
                }
            }
        }
        let sab = (all - saa - sbb) / 2.0;
        2.0 * sab / (n * m) - saa / (n * n) - sbb / (m * m)
    };
    let labels: Vec<bool> = (0..total).map(|i| i < a.len()).collect();
    let observed = statistic_for(&labels);
    let mut rng = rng_from_seed(seed);
    let mut shuffled = labels.clone();
    let mut null: Vec<f64> = Vec::with_capacity(PERMUTATIONS);
    for _ in 0..PERMUTATIONS {
        shuffled.shuffle(&mut rng);
        null.push(statistic_for(&shuffled));
    }
    null.sort_by(f64::total_cmp);
    let idx = (((1.0 - level) * PERMUTATIONS as f64).ceil() as usize).clamp(1, PERMUTATIONS) - 1;
    Ok(TestReport::at_most(name, observed, null[idx], Some(seed), vec![a.len(), b.len()]))
}

/// First and second moments of an ensemble against `Dir(alpha)`. The
/// statistic is the largest standardized deviation over all components.
pub fn dirichlet_moment_check(states: &[Composition], alpha: &[f64], seed: Option<u64>) -> Result<TestReport> {
    if states.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_SAMPLES, got: states.len() });
    }
    let n = alpha.len();
    if let Some(bad) = states.iter().find(|p| p.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: bad.len() });
    }
    let total: f64 = alpha.iter().sum();
    let m = states.len() as f64;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let mean_target = alpha[i] / total;
        let second_target = alpha[i] * (alpha[i] + 1.0) / (total * (total + 1.0));
        for (power, target) in [(1, mean_target), (2, second_target)] {
            let values: Vec<f64> = states.iter().map(|p| p[i].powi(power)).collect();
            let mean = values.iter().sum::<f64>() / m;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
            let se = (var / m).sqrt();
            worst = worst.max((mean - target).abs() / se);
        }
    }
    Ok(TestReport::at_most("dirichlet-moments", worst, MOMENT_GATE, seed, vec![states.len()]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub pass: bool,
    /// Largest `lhs / rhs` along the path.
    pub worst_ratio: f64,
    /// First recorded time at which the check failed.
    pub witness_time: Option<f64>,
}

impl CheckOutcome {
    fn from_ratios(times: &[f64], ratios: impl Iterator<Item = f64>) -> Self {
        let mut worst: f64 = 0.0;
        let mut witness = None;
        for (t, r) in times.iter().zip(ratios) {
            worst = worst.max(r);
            if r > 1.0 && witness.is_none() {
                witness = Some(*t);
            }
        }
        Self { pass: witness.is_none(), worst_ratio: worst, witness_time: witness }
    }
}

/// Pathwise contraction checks for a synchronously coupled pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub lambda: f64,
    pub dt: f64,
    /// `d_A(t) <= min_{s<t} d_A(s)·(1 + 10dt) + 1e-6`.
    pub non_expansion: CheckOutcome,
    /// `‖Y_t - Y'_t‖ <= e^{-λt} d_A(0)(1 + 10dt)`, only for `λ > 0`.
    pub exponential: Option<CheckOutcome>,
    /// `d_A(t)² + 2λ∫‖Y - Y'‖² <= d_A(0)²(1 + 10dt)`, trapezoid rule.
    pub integral: CheckOutcome,
}

impl ContractionReport {
    pub fn pass(&self) -> bool {
        self.non_expansion.pass && self.integral.pass && self.exponential.as_ref().is_none_or(|c| c.pass)
    }
}

/// `dt` is the recording interval of the trajectories.
pub fn contraction_report(p: &Trajectory, q: &Trajectory, lambda: f64) -> Result<ContractionReport> {
    if p.times != q.times || p.is_empty() {
        return Err(Error::GridMismatch);
    }
    let dt = if p.len() > 1 { p.times[1] - p.times[0] } else { 0.0 };
    let slack = 1.0 + 10.0 * dt;
    let d: Vec<f64> = p.ilr.iter().zip(&q.ilr).map(|(x, y)| euclid(x, y)).collect();
    let e: Vec<f64> = p
        .states
        .iter()
        .zip(&q.states)
        .map(|(x, y)| euclid(x.as_slice(), y.as_slice()))
        .collect();
    let d0 = d[0];

    let mut running_min = f64::INFINITY;
    let non_expansion = CheckOutcome::from_ratios(
        &p.times,
        d.iter().map(|&dk| {
            let bound = if running_min.is_finite() { running_min * slack + 1e-6 } else { f64::INFINITY };
            running_min = running_min.min(dk);
            if bound.is_finite() { dk / bound } else { 0.0 }
        }),
    );

    let exponential = (lambda > 0.0).then(|| {
        CheckOutcome::from_ratios(
            &p.times,
            p.times.iter().zip(&e).map(|(t, ek)| {
                let bound = (-lambda * t).exp() * d0 * slack;
                if bound > 0.0 { ek / bound } else if *ek > 0.0 { f64::INFINITY } else { 0.0 }
            }),
        )
    });

    let mut integral = 0.0;
    let rhs = d0 * d0 * slack;
    let integral_check = CheckOutcome::from_ratios(
        &p.times,
        (0..d.len()).map(|k| {
            if k > 0 {
                let h = p.times[k] - p.times[k - 1];
                integral += 0.5 * h * (e[k - 1] * e[k - 1] + e[k] * e[k]);
            }
            let lhs = d[k] * d[k] + 2.0 * lambda * integral;
            if rhs > 0.0 { lhs / rhs } else if lhs > 0.0 { f64::INFINITY } else { 0.0 }
        }),
    );
    Ok(ContractionReport { lambda, dt, non_expansion, exponential, integral: integral_check })
}

/// Exact 2-Wasserstein distance between two empirical laws on the line.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty);
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    if xs.len() == ys.len() {
        let m = xs.len() as f64;
        return Ok((xs.iter().zip(&ys).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / m).sqrt());
    }
    // Quantile functions are step functions on the grids k/n and k/m.
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut u = 0.0;
    let mut acc = 0.0;
    while i < n && j < m {
        let next_x = (i + 1) as f64 / n as f64;
        let next_y = (j + 1) as f64 / m as f64;
        let next = next_x.min(next_y);
        acc += (next - u) * (xs[i] - ys[j]).powi(2);
        u = next;
        if next_x <= next {
            i += 1;
        }
        if next_y <= next {
            j += 1;
        }
    }
    Ok(acc.sqrt())
}

/// Chi-square test of uniformity of labels in `0..k` at level [`LEVEL`].
pub fn chi_square_uniform(name: &str, labels: &[usize], k: usize, seed: Option<u64>) -> Result<TestReport> {
    if labels.is_empty() {
        return Err(Error::Empty);
    }
    if k < 2 {
        return Err(Error::BadDimension(k));
    }
    let mut counts = vec![0usize; k];
    for &l in labels {
        if l >= k {
            return Err(Error::DimensionMismatch { expected: k, got: l + 1 });
        }
        counts[l] += 1;
    }
    let expected = labels.len() as f64 / k as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let threshold = ChiSquared::new((k - 1) as f64).expect("k >= 2").inverse_cdf(1.0 - LEVEL);
    Ok(TestReport::at_most(name, stat, threshold, seed, vec![labels.len()]))
}

/// Uniformity of nearest-vertex indices of terminal states.
pub fn vertex_absorption_stats(states: &[Composition], seed: Option<u64>) -> Result<TestReport> {
    let n = states.first().ok_or(Error::Empty)?.len();
    let labels: Vec<usize> = states.iter().map(|p| p.nearest_vertex()).collect();
    chi_square_uniform("vertex-absorption", &labels, n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aitchison::closure;
    use crate::payoff::fixtures::*;
    use crate::payoff::simplex_grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn interior_grid() -> Vec<Composition> {
        // 1035 interior points of the lattice with spacing 1/48.
        simplex_grid(3, 48)
            .into_iter()
            .filter(|p| p.iter().all(|x| *x > 0.0))
            .map(|p| Composition::new(p).unwrap())
            .collect()
    }

    #[test]
    fn dircond_examples() {
        let grid = interior_grid();
        assert!(grid.len() >= 1000);
        let a = negative_identity(3, 3.0);
        for p in &grid {
            assert!(dircond_residual(&a, &[1.0, 1.0, 1.0], p).unwrap().abs() <= 1e-12);
        }
        assert!(grid.iter().any(|p| dircond_residual(&one_to_nine(), &[1.0, 1.0, 1.0], p).unwrap().abs() > 1e-6));
        assert!(grid.iter().any(|p| dircond_residual(&a, &[2.0, 1.0, 1.0], p).unwrap().abs() > 1e-6));
        assert!(dircond_residual(&a, &[1.0, 1.0], &grid[0]).is_err());
    }

    #[test]
    fn hj_examples() {
        let zero_grad = |p: &[f64]| vec![0.0; p.len()];
        let zero_hess = |p: &[f64]| DMatrix::zeros(p.len(), p.len());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for p in interior_grid() {
            let r = hj_residual(&rock_paper_scissors(), zero_grad, zero_hess, &p).unwrap();
            assert!(r.abs() <= 1e-12);
            let r = hj_residual(&one_to_nine(), zero_grad, zero_hess, &p).unwrap();
            assert!(r.abs() <= 1e-12);
            let r = hj_residual(&negative_identity(3, 3.0), zero_grad, zero_hess, &p).unwrap();
            assert!((r + 3.0 * (1.0 - p.norm_sq())).abs() < 1e-12);
        }
        // Random games and Dirichlet potentials: both residuals agree.
        for _ in 0..200 {
            let n = rng.random_range(2..6);
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-4.0..4.0)).collect()).collect();
            let a = PayoffMatrix::from_rows(&rows).unwrap();
            let alpha: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..4.0)).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
            let p = closure(&v).unwrap();
            let hj = hj_residual(&a, dirichlet_potential_gradient(alpha.clone()), dirichlet_potential_hessian(alpha.clone()), &p).unwrap();
            let dc = dircond_residual(&a, &alpha, &p).unwrap();
            assert!((hj - dc).abs() < 1e-10, "{hj} vs {dc}");
        }
    }

    #[test]
    fn ks_self_consistency() {
        let mut rejections = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xs: Vec<f64> = (0..500).map(|_| rng.sample(StandardNormal)).collect();
            if ks_statistic(&xs, standard_normal_cdf).unwrap() > ks_critical_value(500, LEVEL) {
                rejections += 1;
            }
        }
        assert!(rejections <= 5, "{rejections}");
        assert!(matches!(ks_statistic(&[0.0; 10], standard_normal_cdf), Err(Error::TooFewSamples { .. })));
        assert!((ks_critical_value(1, 0.01) - 1.6276).abs() < 1e-4);
    }

    #[test]
    fn ks_exact_small_case() {
        // Uniform cdf against the midpoints of 100 cells: D = 1/200.
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((d - 0.005).abs() < 1e-15);
    }

    fn gaussian_cloud(seed: u64, m: usize, shift: f64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m).map(|_| vec![rng.sample::<f64, _>(StandardNormal) + shift]).collect()
    }

    #[test]
    fn energy_examples() {
        let a = gaussian_cloud(1, 1000, 0.0);
        assert!(two_sample_energy(&a, &a).unwrap().abs() < 1e-12);
        let same = energy_permutation_test("same", &a, &a, LEVEL, 3).unwrap();
        assert!(same.pass);
        let b = gaussian_cloud(2, 1000, 1.0);
        let diff = energy_permutation_test("shifted", &a, &b, LEVEL, 3).unwrap();
        assert!(!diff.pass);
        let c = gaussian_cloud(5, 1000, 0.0);
        assert!(energy_permutation_test("independent", &a, &c, LEVEL, 3).unwrap().pass);
        assert!(two_sample_energy(&a[..10], &b).is_err());
    }

    #[test]
    fn energy_matches_closed_form() {
        // For N(0,1) vs N(m,1): 2E|X-Y| - 2E|X-X'| with E|N(μ, s²)| known.
        let m = 1.0f64;
        let e_abs = |mu: f64, s: f64| {
            s * (2.0 / std::f64::consts::PI).sqrt() * (-mu * mu / (2.0 * s * s)).exp()
                + mu * (1.0 - 2.0 * standard_normal_cdf(-mu / s))
        };
        let exact = 2.0 * e_abs(m, 2f64.sqrt()) - 2.0 * e_abs(0.0, 2f64.sqrt());
        let a = gaussian_cloud(6, 4000, 0.0);
        let b = gaussian_cloud(7, 4000, m);
        let (est, se) = energy_distance_with_se(&a, &b, 20).unwrap();
        assert!((est - exact).abs() < 4.0 * se, "{est} ± {se} vs {exact}");
    }

    #[test]
    fn wasserstein_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
        assert_eq!(wasserstein_1d(&a, &a).unwrap(), 0.0);
        let shifted: Vec<f64> = a.iter().map(|x| x + 0.7).collect();
        assert!((wasserstein_1d(&a, &shifted).unwrap() - 0.7).abs() < 1e-12);
        let b: Vec<f64> = (0..100_000).map(|_| rng.sample::<f64, _>(StandardNormal) + 1.5).collect();
        assert!((wasserstein_1d(&a, &b).unwrap() - 1.5).abs() < 0.02);
        assert!(matches!(wasserstein_1d(&[], &a), Err(Error::Empty)));
        // Unequal sizes: {0, 1} vs {0, 0, 1} differ on a third of the mass by 1.
        let w = wasserstein_1d(&[0.0, 1.0], &[0.0, 0.0, 1.0]).unwrap();
        assert!((w - (1.0f64 / 6.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn chi_square_examples() {
        let labels: Vec<usize> = (0..3000).map(|i| i % 3).collect();
        assert!(chi_square_uniform("uniform", &labels, 3, None).unwrap().pass);
        let skewed: Vec<usize> = (0..3000).map(|i| if i % 4 == 0 { 1 } else { 0 }).collect();
        assert!(!chi_square_uniform("skewed", &skewed, 3, None).unwrap().pass);
        let r = chi_square_uniform("uniform", &labels, 3, None).unwrap();
        assert!((r.threshold - 9.2103).abs() < 1e-3);
    }

    #[test]
    fn moment_check_on_exact_samples() {
        let mut rng = crate::sde::rng_from_seed(30);
        let states: Vec<Composition> = (0..20_000)
            .map(|_| crate::sde::sample_dirichlet(&[1.0, 1.0, 1.0], &mut rng).unwrap())
            .collect();
        assert!(dirichlet_moment_check(&states, &[1.0, 1.0, 1.0], Some(30)).unwrap().pass);
        assert!(!dirichlet_moment_check(&states, &[2.0, 1.0, 1.0], Some(30)).unwrap().pass);
    }

    fn pair(drift: &crate::sde::DriftKind, p: &[f64], q: &[f64], seed: u64) -> (Trajectory, Trajectory) {
        let cfg = crate::sde::SdeConfig::new(1.0, 1.0, 1e-3, seed).unwrap();
        crate::sde::coupled_pair(drift, &Composition::new(p.to_vec()).unwrap(), &Composition::new(q.to_vec()).unwrap(), &cfg)
            .unwrap()
    }

    #[test]
    fn contraction_without_drift_is_an_equality() {
        let (a, b) = pair(&crate::sde::DriftKind::None, &[0.2, 0.3, 0.5], &[0.5, 0.3, 0.2], 1);
        let r = contraction_report(&a, &b, 0.0).unwrap();
        assert!(r.pass());
        assert!(r.exponential.is_none());
        assert!((r.integral.worst_ratio - 1.0 / (1.0 + 10.0 * r.dt)).abs() < 1e-9);
    }

    #[test]
    fn contraction_checks_for_a_strictly_stable_game() {
        let drift = crate::sde::DriftKind::replicator(&one_to_nine().shift_diagonal(-10.0));
        let (a, b) = pair(&drift, &[0.2, 0.3, 0.5], &[0.5, 0.3, 0.2], 2);
        let r = contraction_report(&a, &b, 10.0).unwrap();
        assert!(r.non_expansion.pass);
        assert!(r.integral.pass);
        // The exponential rate 10 is not attained near the equilibrium.
        let exp = r.exponential.unwrap();
        assert!(!exp.pass);
        assert!(exp.witness_time.is_some());
    }

    #[test]
    fn coordination_game_yields_an_expansion_witness() {
        let drift = crate::sde::DriftKind::replicator(&coordination_2());
        let (a, b) = pair(&drift, &[0.55, 0.45], &[0.45, 0.55], 3);
        let r = contraction_report(&a, &b, 0.0).unwrap();
        assert!(!r.non_expansion.pass);
        assert!(r.non_expansion.witness_time.is_some());
    }

    #[test]
    fn contraction_needs_a_shared_grid() {
        let (a, _) = pair(&crate::sde::DriftKind::None, &[0.2, 0.8], &[0.5, 0.5], 1);
        let mut b = a.clone();
        b.times[1] += 1e-3;
        assert!(matches!(contraction_report(&a, &b, 0.0), Err(Error::GridMismatch)));
    }

    #[test]
    fn report_json_layout() {
        let r = TestReport::at_most("x", 1.0, 2.0, Some(3), vec![10]);
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in ["name", "statistic", "threshold", "direction", "pass", "seed", "sizes"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["direction"], "<=");
        assert!(TestReport::at_least("y", 1.0, 2.0, None, vec![]).line().starts_with("FAIL"));
    }
}
