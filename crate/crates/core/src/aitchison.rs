//! Aitchison geometry of the open simplex.
//!
//! The open simplex with perturbation as addition and powering as scalar
//! multiplication is a Hilbert space; `clr` maps it isometrically onto the
//! zero-sum hyperplane `H` of `R^n` and `ilr` onto `R^(n-1)`. Softmax (`sfm`)
//! is the inverse of `clr`.
//!
//! All functions here are pure. Compositions are validated once on
//! construction; functions that take logarithms refuse entries below
//! [`LOG_FLOOR`] instead of producing infinities.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for the unit-sum constraint.
pub const SUM_TOL: f64 = 1e-12;
/// Smallest entry accepted by operations that take logarithms.
pub const LOG_FLOOR: f64 = 1e-300;

/// A point of the open simplex: strictly positive shares summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Composition(Vec<f64>);

impl Composition {
    /// Validates `entries` and divides by their sum.
    ///
    /// The sum has to be within [`SUM_TOL`] of one already; use [`closure`]
    /// for unnormalized positive vectors.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        check_positive(&entries)?;
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self(entries.into_iter().map(|v| v / sum).collect()))
    }

    /// The neutral element `e = (1/n, ..., 1/n)`.
    pub fn barycenter(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::BadDimension(n));
        }
        Ok(Self(vec![1.0 / n as f64; n]))
    }

    // Caller guarantees positivity and unit sum up to rounding.
    fn from_normalized(entries: Vec<f64>) -> Self {
        Self(entries)
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

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Group inverse `(-1) ⊙ p`.
    pub fn inverse(&self) -> Self {
        power(-1.0, self)
    }

    /// Natural logarithms of the entries, guarded by [`LOG_FLOOR`].
    pub fn logs(&self) -> Result<Vec<f64>> {
        self.0
            .iter()
            .enumerate()
            .map(|(index, &value)| {
                if value < LOG_FLOOR {
                    Err(Error::BoundaryProximity { index, value })
                } else {
                    Ok(value.ln())
                }
            })
            .collect()
    }

    /// Index of the largest entry (the nearest vertex in Euclidean distance).
    pub fn nearest_vertex(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.0.iter().enumerate() {
            if v > self.0[best] {
                best = i;
            }
        }
        best
    }

    /// Squared Euclidean norm of the entries.
    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }
}

impl std::ops::Index<usize> for Composition {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for Composition {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Composition::new(v)
    }
}

impl From<Composition> for Vec<f64> {
    fn from(p: Composition) -> Self {
        p.0
    }
}

/// An element of the zero-sum hyperplane `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector(Vec<f64>);

impl TangentVector {
    /// Accepts vectors summing to zero within `1e-12` (relative to their
    /// 1-norm when that exceeds one) and removes the residual mean.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tangent vector"));
        }
        let sum: f64 = entries.iter().sum();
        let scale = entries.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        if sum.abs() > SUM_TOL * scale {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self(center(entries)))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Coordinates of a composition in an isometric log-ratio chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IlrPoint(pub Vec<f64>);

impl IlrPoint {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// `(n-1) x n` matrix whose rows are the clr images of an orthonormal basis.
///
/// Rows follow the Helmert pattern `(1, ..., 1, -k, 0, ..., 0) / sqrt(k(k+1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastMatrix {
    n: usize,
    // row-major, (n-1) * n
    rows: Vec<f64>,
}

impl ContrastMatrix {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::BadDimension(n));
        }
        let mut rows = vec![0.0; (n - 1) * n];
        for k in 1..n {
            let norm = ((k * (k + 1)) as f64).sqrt();
            let row = &mut rows[(k - 1) * n..k * n];
            for v in row.iter_mut().take(k) {
                *v = 1.0 / norm;
            }
            row[k] = -(k as f64) / norm;
        }
        Ok(Self { n, rows })
    }

    /// Number of parts `n`; the chart has dimension `n - 1`.
    pub fn parts(&self) -> usize {
        self.n
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k * self.n..(k + 1) * self.n]
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n - 1, self.n, &self.rows)
    }

    /// `out = psi * v` for `v` in `R^n`.
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.n);
        for (k, o) in out.iter_mut().enumerate().take(self.n - 1) {
            *o = self.row(k).iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    /// `out = psi^T * x` for `x` in `R^(n-1)`.
    pub fn apply_transpose_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n - 1);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (k, &xk) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(k)) {
                *o += a * xk;
            }
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n - 1];
        self.apply_into(v, &mut out);
        out
    }

    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.apply_transpose_into(x, &mut out);
        out
    }

    pub fn ilr(&self, p: &Composition) -> Result<IlrPoint> {
        same_dim(self.n, p.len())?;
        Ok(IlrPoint(self.apply(clr(p)?.as_slice())))
    }

    pub fn ilr_inv(&self, x: &IlrPoint) -> Result<Composition> {
        same_dim(self.n - 1, x.dim())?;
        if x.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ilr point"));
        }
        Ok(sfm(&self.apply_transpose(&x.0)))
    }
}

fn check_positive(v: &[f64]) -> Result<()> {
    if v.len() < 2 {
        return Err(Error::BadDimension(v.len()));
    }
    match v.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
        Some(index) => Err(Error::NonPositiveEntry { index, value: v[index] }),
        None => Ok(()),
    }
}

fn same_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

fn center(mut v: Vec<f64>) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    v
}

/// Rescales a positive vector onto the simplex.
pub fn closure(v: &[f64]) -> Result<Composition> {
    check_positive(v)?;
    let sum: f64 = v.iter().sum();
    Ok(Composition::from_normalized(v.iter().map(|x| x / sum).collect()))
}

/// Perturbation `p ⊕ q`: closure of the componentwise product.
pub fn perturb(p: &Composition, q: &Composition) -> Result<Composition> {
    same_dim(p.len(), q.len())?;
    // Work in log space so tiny shares cannot underflow to zero.
    let logs: Vec<f64> = p.0.iter().zip(&q.0).map(|(a, b)| a.ln() + b.ln()).collect();
    Ok(sfm(&logs))
}

/// Powering `alpha ⊙ p`: closure of the componentwise powers.
pub fn power(alpha: f64, p: &Composition) -> Composition {
    let logs: Vec<f64> = p.0.iter().map(|a| alpha * a.ln()).collect();
    sfm(&logs)
}

/// `p ⊖ q = p ⊕ ((-1) ⊙ q)`.
pub fn ominus(p: &Composition, q: &Composition) -> Result<Composition> {
    same_dim(p.len(), q.len())?;
    let logs: Vec<f64> = p.0.iter().zip(&q.0).map(|(a, b)| a.ln() - b.ln()).collect();
    Ok(sfm(&logs))
}

/// Aitchison inner product `(1/2n) Σ_ij ln(p_i/p_j) ln(q_i/q_j)`.
pub fn inner(p: &Composition, q: &Composition) -> Result<f64> {
    same_dim(p.len(), q.len())?;
    let lp = p.logs()?;
    let lq = q.logs()?;
    let n = p.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (lp[i] - lp[j]) * (lq[i] - lq[j]);
        }
    }
    Ok(acc / (2.0 * n as f64))
}

/// Aitchison norm `‖p‖_A`.
pub fn norm(p: &Composition) -> Result<f64> {
    Ok(inner(p, p)?.max(0.0).sqrt())
}

/// Aitchison distance, computed from the double sum of log-ratio differences.
pub fn dist(p: &Composition, q: &Composition) -> Result<f64> {
    same_dim(p.len(), q.len())?;
    let lp = p.logs()?;
    let lq = q.logs()?;
    let n = p.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = (lp[i] - lp[j]) - (lq[i] - lq[j]);
            acc += d * d;
        }
    }
    Ok((acc / (2.0 * n as f64)).sqrt())
}

/// Centered log-ratio transform `ln(p_i / g(p))`.
pub fn clr(p: &Composition) -> Result<TangentVector> {
    Ok(TangentVector(center(p.logs()?)))
}

/// Softmax `exp(x_i) / Σ exp(x_j)`, shifted by the maximum before
/// exponentiating. Shares that underflow are clamped to the smallest normal
/// double, which lies below [`LOG_FLOOR`], so later log-taking operations
/// report [`Error::BoundaryProximity`] instead of silently losing mass.
pub fn sfm(x: &[f64]) -> Composition {
    let mut out = vec![0.0; x.len()];
    sfm_into(x, &mut out);
    Composition::from_normalized(out)
}

/// Allocation-free softmax used by the simulators.
pub fn sfm_into(x: &[f64], out: &mut [f64]) {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(x) {
        *o = (v - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o = (*o / sum).max(f64::MIN_POSITIVE);
    }
}

/// Contrast matrix for `n` parts (Helmert basis).
pub fn contrast_matrix(n: usize) -> Result<ContrastMatrix> {
    ContrastMatrix::new(n)
}

/// Isometric log-ratio transform with the Helmert contrast matrix.
pub fn ilr(p: &Composition) -> Result<IlrPoint> {
    ContrastMatrix::new(p.len())?.ilr(p)
}

/// Inverse of [`ilr`]: `sfm(psi^T x)`.
pub fn ilr_inv(x: &IlrPoint) -> Result<Composition> {
    ContrastMatrix::new(x.dim() + 1)?.ilr_inv(x)
}

/// Inverse Shahshahani metric tensor `g^{-1}(p)_ij = p_i (δ_ij - p_j)`.
pub fn shahshahani_inv(p: &Composition) -> DMatrix<f64> {
    let n = p.len();
    DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        p[i] * (d - p[j])
    })
}

/// Jacobian of softmax, `diag(s) - s ⊗ s` with `s = sfm(x)`.
pub fn sfm_jacobian(x: &[f64]) -> DMatrix<f64> {
    let s = sfm(x);
    let n = s.len();
    DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { s[i] } else { 0.0 };
        diag - s[i] * s[j]
    })
}

/// Shahshahani gradient `g^{-1}(p) ∇f` from the ambient Euclidean gradient.
pub fn shahshahani_gradient(euclid_grad: &[f64], p: &Composition) -> Result<Vec<f64>> {
    same_dim(p.len(), euclid_grad.len())?;
    let mean: f64 = p.0.iter().zip(euclid_grad).map(|(a, b)| a * b).sum();
    Ok(p.0.iter().zip(euclid_grad).map(|(pi, gi)| pi * (gi - mean)).collect())
}

/// Aitchison gradient `sfm(g^{-1}(p) ∇f)`, an element of the simplex.
pub fn aitchison_gradient(euclid_grad: &[f64], p: &Composition) -> Result<Composition> {
    if euclid_grad.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    Ok(sfm(&shahshahani_gradient(euclid_grad, p)?))
}

/// Log-density `-Σ ln p_i` of the Aitchison measure in the chart of the first
/// `n - 1` shares (up to the constant factor `1/sqrt(n)`).
pub fn aitchison_log_density(p: &Composition) -> Result<f64> {
    Ok(-p.logs()?.iter().sum::<f64>())
}
