//! Minimizing movements for the heat flow on the two-part simplex.
//!
//! In the one-dimensional ilr chart optimal transport is monotone
//! rearrangement, so a law is represented by its quantile function sampled
//! at the levels `(k - ½)/m` and each step is a strictly convex problem in
//! those quantiles.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::replicator::fmt_full;
use crate::stats::TestReport;

/// Diffusion coefficient of the flow: the objective is `D·S + W²/(2τ)`, whose
/// steps approximate `∂ρ = D·∂²ρ` with variance growing at rate `2D = 1`.
pub const HEAT_DIFFUSION: f64 = 0.5;
pub const DEFAULT_LEVELS: usize = 1000;
pub const GRADIENT_TOL: f64 = 1e-10;
pub const MAX_NEWTON_ITERATIONS: usize = 200;
const MAX_HALVINGS: usize = 60;
const ARMIJO: f64 = 1e-4;

/// Quantile function at the levels `(k - ½)/m`, strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QuantileDensity(Vec<f64>);

impl QuantileDensity {
    pub fn new(quantiles: Vec<f64>) -> Result<Self> {
        if quantiles.len() < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: quantiles.len() });
        }
        if quantiles.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("quantiles"));
        }
        if let Some(k) = quantiles.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotone(k + 1));
        }
        Ok(Self(quantiles))
    }

    pub fn levels(m: usize) -> Vec<f64> {
        (0..m).map(|k| (k as f64 + 0.5) / m as f64).collect()
    }

    pub fn gaussian(mean: f64, sd: f64, m: usize) -> Result<Self> {
        let law = Normal::new(mean, sd).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Self::new(Self::levels(m).into_iter().map(|u| law.inverse_cdf(u)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.0.iter().map(|q| (q - mu) * (q - mu)).sum::<f64>() / self.len() as f64
    }

    /// `m4/m2² - 3` of the equally weighted atoms.
    pub fn excess_kurtosis(&self) -> f64 {
        let mu = self.mean();
        let m = self.len() as f64;
        let m2 = self.0.iter().map(|q| (q - mu).powi(2)).sum::<f64>() / m;
        let m4 = self.0.iter().map(|q| (q - mu).powi(4)).sum::<f64>() / m;
        m4 / (m2 * m2) - 3.0
    }
}

impl TryFrom<Vec<f64>> for QuantileDensity {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<QuantileDensity> for Vec<f64> {
    fn from(q: QuantileDensity) -> Self {
        q.0
    }
}

fn raw_entropy(q: &[f64]) -> f64 {
    let m = q.len() as f64;
    -q.windows(2).map(|w| (m * (w[1] - w[0])).ln()).sum::<f64>() / m
}

/// `S = -(1/m) Σ ln(m·(q_{k+1} - q_k))`, the discrete `∫ρ ln ρ`.
pub fn entropy(q: &QuantileDensity) -> Result<f64> {
    if let Some(k) = q.0.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::NonMonotone(k + 1));
    }
    Ok(raw_entropy(&q.0))
}

/// Exact 2-Wasserstein distance of two laws given on the same level grid.
pub fn w2_quantile(a: &QuantileDensity, b: &QuantileDensity) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch(a.len(), b.len()));
    }
    let m = a.len() as f64;
    Ok((a.0.iter().zip(&b.0).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / m).sqrt())
}

struct StepProblem<'a> {
    q0: &'a [f64],
    tau: f64,
    diffusion: f64,
}

impl StepProblem<'_> {
    fn m(&self) -> f64 {
        self.q0.len() as f64
    }

    fn objective(&self, q: &[f64]) -> f64 {
        let m = self.m();
        let transport: f64 = q.iter().zip(self.q0).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / (2.0 * self.tau * m);
        self.diffusion * raw_entropy(q) + transport
    }

    fn gradient(&self, q: &[f64], out: &mut [f64]) {
        let m = self.m();
        let n = q.len();
        for k in 0..n {
            let mut g = (q[k] - self.q0[k]) / (self.tau * m);
            if k >= 1 {
                g -= self.diffusion / (m * (q[k] - q[k - 1]));
            }
            if k + 1 < n {
                g += self.diffusion / (m * (q[k + 1] - q[k]));
            }
            out[k] = g;
        }
    }

    /// Tridiagonal Hessian as (sub/super diagonal, diagonal).
    fn hessian(&self, q: &[f64], off: &mut [f64], diag: &mut [f64]) {
        let m = self.m();
        let n = q.len();
        diag.iter_mut().for_each(|d| *d = 1.0 / (self.tau * m));
        for k in 0..n - 1 {
            let c = self.diffusion / (m * (q[k + 1] - q[k]).powi(2));
            off[k] = -c;
            diag[k] += c;
            diag[k + 1] += c;
        }
    }
}

/// Solves `T x = rhs` for symmetric tridiagonal `T` (Thomas algorithm).
fn solve_tridiagonal(off: &[f64], diag: &[f64], rhs: &[f64], x: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = if n > 1 { off[0] / diag[0] } else { 0.0 };
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - off[i - 1] * c[i - 1];
        if i + 1 < n {
            c[i] = off[i] / denom;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
    }
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn increasing(q: &[f64]) -> bool {
    q.windows(2).all(|w| w[1] > w[0])
}

/// One minimizing-movement step of size `tau` with the heat diffusion
/// coefficient [`HEAT_DIFFUSION`].
pub fn jko_step(q0: &QuantileDensity, tau: f64) -> Result<QuantileDensity> {
    jko_step_with(q0, tau, HEAT_DIFFUSION)
}

/// Minimizes `D·S(q) + W₂²(q, q0)/(2τ)` by damped Newton, halving the step
/// until the iterate stays strictly increasing and the objective decreases.
pub fn jko_step_with(q0: &QuantileDensity, tau: f64, diffusion: f64) -> Result<QuantileDensity> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::NonpositiveTime(tau));
    }
    let problem = StepProblem { q0: &q0.0, tau, diffusion };
    let n = q0.len();
    let mut q = q0.0.clone();
    let (mut grad, mut dir, mut off, mut diag, mut trial, mut trial_grad) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n - 1], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut value = problem.objective(&q);
    problem.gradient(&q, &mut grad);
    for _ in 0..MAX_NEWTON_ITERATIONS {
        let gnorm = norm(&grad);
        if gnorm <= GRADIENT_TOL {
            return QuantileDensity::new(q);
        }
        problem.hessian(&q, &mut off, &mut diag);
        solve_tridiagonal(&off, &diag, &grad, &mut dir);
        let slope = -grad.iter().zip(&dir).map(|(g, d)| g * d).sum::<f64>();
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            for k in 0..n {
                trial[k] = q[k] - step * dir[k];
            }
            if increasing(&trial) {
                let trial_value = problem.objective(&trial);
                problem.gradient(&trial, &mut trial_grad);
                // Near the optimum rounding hides the decrease; accept a smaller gradient instead.
                if trial_value <= value + ARMIJO * step * slope || norm(&trial_grad) < gnorm {
                    accepted = true;
                    value = trial_value;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence { iterations: MAX_NEWTON_ITERATIONS, grad_norm: gnorm });
        }
        assert!(increasing(&trial), "Newton iterate left the monotone cone");
        std::mem::swap(&mut q, &mut trial);
        std::mem::swap(&mut grad, &mut trial_grad);
    }
    let gnorm = norm(&grad);
    if gnorm <= GRADIENT_TOL {
        QuantileDensity::new(q)
    } else {
        Err(Error::NoConvergence { iterations: MAX_NEWTON_ITERATIONS, grad_norm: gnorm })
    }
}

/// Gaussian initial law in the chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianStart {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JkoRow {
    pub step: usize,
    pub t: f64,
    pub entropy: f64,
    pub variance: f64,
    pub w2_error_vs_exact: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JkoFlow {
    pub diffusion: f64,
    pub levels: usize,
    pub rows: Vec<JkoRow>,
    pub terminal: QuantileDensity,
}

impl JkoFlow {
    pub fn terminal_error(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.w2_error_vs_exact)
    }

    pub fn report(&self, threshold: f64) -> TestReport {
        TestReport::at_most(
            "jko-w2-error",
            self.terminal_error(),
            threshold,
            None,
            vec![self.levels, self.rows.len().saturating_sub(1)],
        )
    }

    /// CSV with header `step,t,entropy,variance,w2_error_vs_exact`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "step,t,entropy,variance,w2_error_vs_exact")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.step,
                fmt_full(r.t),
                fmt_full(r.entropy),
                fmt_full(r.variance),
                fmt_full(r.w2_error_vs_exact)
            )?;
        }
        Ok(())
    }
}

/// Runs `n_steps` steps of size `t_end/n_steps` from the Gaussian start and
/// compares each iterate with the exact heat solution `N(mean, sd² + 2D·t)`
/// on the same level grid.
pub fn jko_flow_vs_heat(start: GaussianStart, levels: usize, t_end: f64, n_steps: usize) -> Result<JkoFlow> {
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::NonpositiveTime(t_end));
    }
    let diffusion = HEAT_DIFFUSION;
    let exact = |t: f64| QuantileDensity::gaussian(start.mean, (start.sd * start.sd + 2.0 * diffusion * t).sqrt(), levels);
    let mut q = QuantileDensity::gaussian(start.mean, start.sd, levels)?;
    let row = |step: usize, t: f64, q: &QuantileDensity| -> Result<JkoRow> {
        Ok(JkoRow {
            step,
            t,
            entropy: entropy(q)?,
            variance: q.variance(),
            w2_error_vs_exact: w2_quantile(q, &exact(t)?)?,
        })
    };
    let mut rows = vec![row(0, 0.0, &q)?];
    if t_end > 0.0 {
        if n_steps == 0 {
            return Err(Error::InvalidConfig("n_steps must be positive".into()));
        }
        let tau = t_end / n_steps as f64;
        for k in 1..=n_steps {
            q = jko_step_with(&q, tau, diffusion)?;
            rows.push(row(k, k as f64 * tau, &q)?);
        }
    }
    Ok(JkoFlow { diffusion, levels, rows, terminal: q })
}
