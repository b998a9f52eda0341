//! Deterministic replicator dynamics `ṗ_i = p_i((Ap)_i - p·Ap)`, integrated
//! in ilr coordinates where the drift `psi·A·sfm(psi^T x)` is bounded and
//! globally Lipschitz.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::aitchison::{sfm_into, Composition, ContrastMatrix, IlrPoint};
use crate::error::{Error, Result};
use crate::payoff::PayoffMatrix;

/// A single RK4 stage moving further than this signals a misconfigured step.
pub const MAX_STAGE_MOVE: f64 = 1e3;
const MAX_STEPS: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeConfig {
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "one")]
    pub record_every: usize,
}

fn one() -> usize {
    1
}

impl OdeConfig {
    pub fn new(t_end: f64, dt: f64, record_every: usize) -> Result<Self> {
        let cfg = Self { t_end, dt, record_every };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        validate_grid(self.t_end, self.dt, self.record_every).map(|_| ())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Checks a fixed-step time grid and returns its number of steps.
pub(crate) fn validate_grid(t_end: f64, dt: f64, record_every: usize) -> Result<usize> {
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::InvalidConfig(format!("t_end must be positive, got {t_end}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidConfig(format!("dt must be positive, got {dt}")));
    }
    if dt > t_end * (1.0 + 1e-12) {
        return Err(Error::InvalidConfig(format!("dt = {dt} exceeds t_end = {t_end}")));
    }
    if t_end / dt > MAX_STEPS {
        return Err(Error::InvalidConfig(format!("t_end/dt = {} exceeds 1e8", t_end / dt)));
    }
    if record_every == 0 {
        return Err(Error::InvalidConfig("record_every must be at least 1".into()));
    }
    Ok(((t_end / dt).round() as usize).max(1))
}

/// Recorded path; `ilr` holds the chart coordinates the integrator worked in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Composition>,
    pub ilr: Vec<Vec<f64>>,
    pub scheme: String,
    pub seed: Option<u64>,
}

impl Trajectory {
    pub(crate) fn with_capacity(scheme: &str, seed: Option<u64>, cap: usize) -> Self {
        Self {
            times: Vec::with_capacity(cap),
            states: Vec::with_capacity(cap),
            ilr: Vec::with_capacity(cap),
            scheme: scheme.to_string(),
            seed,
        }
    }

    pub(crate) fn push(&mut self, t: f64, psi: &ContrastMatrix, x: &[f64]) {
        let mut p = vec![0.0; psi.parts()];
        sfm_into(&psi.apply_transpose(x), &mut p);
        self.times.push(t);
        self.states.push(Composition::try_from(p).expect("sfm output is a composition"));
        self.ilr.push(x.to_vec());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn terminal(&self) -> &Composition {
        self.states.last().expect("trajectories are never empty")
    }

    pub fn terminal_ilr(&self) -> &[f64] {
        self.ilr.last().expect("trajectories are never empty")
    }

    /// CSV with header `t,p_1..p_n,ilr_1..ilr_{n-1}` at 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.states.first().map_or(0, |p| p.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("p_{i}")));
        header.extend((1..n).map(|i| format!("ilr_{i}")));
        writeln!(w, "{}", header.join(","))?;
        for ((t, p), x) in self.times.iter().zip(&self.states).zip(&self.ilr) {
            let row: Vec<String> = std::iter::once(t)
                .chain(p.as_slice())
                .chain(x)
                .map(|v| fmt_full(*v))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Round-trippable 17-significant-digit formatting.
pub fn fmt_full(v: f64) -> String {
    format!("{v:.16e}")
}

/// Classical RK4 for `ẋ = f(t, x)` on the uniform grid `k·dt`, recording every
/// `record_every` steps and always the final state.
pub(crate) fn rk4<F>(
    x0: &[f64],
    dt: f64,
    steps: usize,
    record_every: usize,
    traj: &mut Trajectory,
    psi: &ContrastMatrix,
    mut f: F,
) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut tmp = vec![0.0; d];
    let mut k = [vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]];
    let stage_check = |k: &[f64]| -> Result<()> {
        let moved = dt * k.iter().map(|v| v * v).sum::<f64>().sqrt();
        if moved > MAX_STAGE_MOVE || !moved.is_finite() {
            Err(Error::StepTooLarge(moved))
        } else {
            Ok(())
        }
    };
    traj.push(0.0, psi, &x);
    for step in 0..steps {
        let t = step as f64 * dt;
        f(t, &x, &mut k[0]);
        stage_check(&k[0])?;
        for i in 0..d {
            tmp[i] = x[i] + 0.5 * dt * k[0][i];
        }
        f(t + 0.5 * dt, &tmp, &mut k[1]);
        stage_check(&k[1])?;
        for i in 0..d {
            tmp[i] = x[i] + 0.5 * dt * k[1][i];
        }
        f(t + 0.5 * dt, &tmp, &mut k[2]);
        stage_check(&k[2])?;
        for i in 0..d {
            tmp[i] = x[i] + dt * k[2][i];
        }
        f(t + dt, &tmp, &mut k[3]);
        stage_check(&k[3])?;
        for i in 0..d {
            x[i] += dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }
        if (step + 1) % record_every == 0 || step + 1 == steps {
            traj.push((step + 1) as f64 * dt, psi, &x);
        }
    }
    Ok(())
}

/// `ṗ_i = p_i((Ap)_i - p·Ap)`.
pub fn replicator_rhs(a: &PayoffMatrix, p: &Composition) -> Result<Vec<f64>> {
    if p.len() != a.n() {
        return Err(Error::DimensionMismatch { expected: a.n(), got: p.len() });
    }
    let p = p.as_slice();
    let ap = a.mul(p);
    let mean: f64 = p.iter().zip(&ap).map(|(x, y)| x * y).sum();
    Ok(p.iter().zip(&ap).map(|(pi, f)| pi * (f - mean)).collect())
}

/// Reusable evaluator of `psi·A·sfm(psi^T x)`.
pub(crate) struct IlrReplicator<'a> {
    a: &'a PayoffMatrix,
    psi: &'a ContrastMatrix,
    z: Vec<f64>,
    p: Vec<f64>,
    ap: Vec<f64>,
}

impl<'a> IlrReplicator<'a> {
    pub(crate) fn new(a: &'a PayoffMatrix, psi: &'a ContrastMatrix) -> Self {
        let n = a.n();
        Self { a, psi, z: vec![0.0; n], p: vec![0.0; n], ap: vec![0.0; n] }
    }

    pub(crate) fn eval(&mut self, x: &[f64], out: &mut [f64]) {
        self.psi.apply_transpose_into(x, &mut self.z);
        sfm_into(&self.z, &mut self.p);
        self.a.mul_into(&self.p, &mut self.ap);
        self.psi.apply_into(&self.ap, out);
    }
}

/// Replicator drift in the ilr chart.
pub fn ilr_drift(a: &PayoffMatrix, x: &IlrPoint) -> Result<IlrPoint> {
    if x.dim() + 1 != a.n() {
        return Err(Error::DimensionMismatch { expected: a.n() - 1, got: x.dim() });
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ilr point"));
    }
    let psi = ContrastMatrix::new(a.n())?;
    let mut out = vec![0.0; a.n() - 1];
    IlrReplicator::new(a, &psi).eval(x.as_slice(), &mut out);
    Ok(IlrPoint(out))
}

/// RK4 on the ilr drift, mapped back through `ilr_inv`.
pub fn integrate_replicator(a: &PayoffMatrix, p0: &Composition, cfg: &OdeConfig) -> Result<Trajectory> {
    if p0.len() != a.n() {
        return Err(Error::DimensionMismatch { expected: a.n(), got: p0.len() });
    }
    let steps = validate_grid(cfg.t_end, cfg.dt, cfg.record_every)?;
    let psi = ContrastMatrix::new(a.n())?;
    let x0 = psi.ilr(p0)?;
    let mut traj = Trajectory::with_capacity("rk4-ilr", None, steps / cfg.record_every + 2);
    let mut drift = IlrReplicator::new(a, &psi);
    rk4(x0.as_slice(), cfg.dt, steps, cfg.record_every, &mut traj, &psi, |_, x, out| {
        drift.eval(x, out)
    })?;
    Ok(traj)
}

/// Interior points of the barycentric lattice with spacing `1/g` together with
/// the replicator vector field there. Requires `n = 3`.
pub fn phase_portrait(a: &PayoffMatrix, grid_per_side: usize) -> Result<Vec<(Composition, Vec<f64>)>> {
    if a.n() != 3 {
        return Err(Error::WrongDimension { expected: 3, got: a.n() });
    }
    if grid_per_side < 2 {
        return Err(Error::InvalidConfig(format!("grid_per_side must be at least 2, got {grid_per_side}")));
    }
    let g = grid_per_side;
    let mut out = Vec::with_capacity((g - 1) * (g - 2) / 2);
    for i in 1..g {
        for j in 1..g - i {
            let k = g - i - j;
            let p = Composition::new(vec![i as f64 / g as f64, j as f64 / g as f64, k as f64 / g as f64])?;
            let v = replicator_rhs(a, &p)?;
            out.push((p, v));
        }
    }
    Ok(out)
}
