//! Static analysis of payoff matrices.
//!
//! Covers the potential `Λ(p) = Σ a_ii p_i - p·Ap`, conditional definiteness
//! on the zero-sum hyperplane, the `-λ·id + u⊗1 + 1⊗v` decomposition that
//! characterises non-expansive replicator flows, Nash equilibria and ESS, and
//! a sampling probe for the monotonicity of the ilr drift.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::aitchison::{sfm, shahshahani_inv, Composition, ContrastMatrix};
use crate::error::{Error, Result};

/// Absolute tolerance for matrix-derived equalities (entries are O(10)).
pub const MATRIX_TOL: f64 = 1e-9;
/// Singular-value cutoff below which a support system counts as degenerate.
pub const RANK_TOL: f64 = 1e-10;
/// Largest game handled by support enumeration.
pub const MAX_ENUMERATION_N: usize = 5;
/// Number of closed-simplex grid points used by the fallback ESS check.
pub const ESS_GRID_POINTS: usize = 10_000;

/// Square payoff matrix of a symmetric two-player game, `n >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffMatrix(DMatrix<f64>);

/// On-disk matrix format `{"n": 3, "A": [[...], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixFile {
    pub n: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
}

impl PayoffMatrix {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), got: a.ncols() });
        }
        if a.nrows() < 2 {
            return Err(Error::BadDimension(a.nrows()));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("payoff matrix"));
        }
        Ok(Self(a))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: bad.len() });
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn from_file(file: &MatrixFile) -> Result<Self> {
        if file.a.len() != file.n {
            return Err(Error::DimensionMismatch { expected: file.n, got: file.a.len() });
        }
        Self::from_rows(&file.a)
    }

    pub fn to_file(&self) -> MatrixFile {
        MatrixFile { n: self.n(), a: self.rows() }
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| self.0.row(i).iter().copied().collect()).collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// `A + c·id`.
    pub fn shift_diagonal(&self, c: f64) -> Self {
        let mut a = self.0.clone();
        for i in 0..self.n() {
            a[(i, i)] += c;
        }
        Self(a)
    }

    /// `out = A p`.
    pub fn mul_into(&self, p: &[f64], out: &mut [f64]) {
        let n = self.n();
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let mut acc = 0.0;
            for (j, pj) in p.iter().enumerate() {
                acc += self.0[(i, j)] * pj;
            }
            *o = acc;
        }
    }

    pub fn mul(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        self.mul_into(p, &mut out);
        out
    }

    /// `p · A q`.
    pub fn bilinear(&self, p: &[f64], q: &[f64]) -> f64 {
        dot(p, &self.mul(q))
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got == self.n() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.n(), got })
        }
    }
}

/// Games used throughout the examples and acceptance suites.
pub mod fixtures {
    use super::PayoffMatrix;

    /// `[[1,2,3],[4,5,6],[7,8,9]] = (0,3,6)⊗1 + 1⊗(1,2,3)`.
    pub fn one_to_nine() -> PayoffMatrix {
        PayoffMatrix::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![4.0, 5.0, 6.0],
            vec![7.0, 8.0, 9.0],
        ])
        .expect("static matrix")
    }

    pub fn rock_paper_scissors() -> PayoffMatrix {
        PayoffMatrix::from_rows(&[
            vec![0.0, -1.0, 1.0],
            vec![1.0, 0.0, -1.0],
            vec![-1.0, 1.0, 0.0],
        ])
        .expect("static matrix")
    }

    /// `-λ·id` for `n` strategies.
    pub fn negative_identity(n: usize, lambda: f64) -> PayoffMatrix {
        PayoffMatrix::new(nalgebra::DMatrix::identity(n, n) * -lambda).expect("n >= 2")
    }

    /// The pure coordination game `id_2`; its ilr drift is expanding.
    pub fn coordination_2() -> PayoffMatrix {
        PayoffMatrix::new(nalgebra::DMatrix::identity(2, 2)).expect("static matrix")
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Potential `Λ(p) = Σ a_ii p_i - p·Ap`.
pub fn potential_lambda(a: &PayoffMatrix, p: &Composition) -> Result<f64> {
    a.check_dim(p.len())?;
    let p = p.as_slice();
    let diag: f64 = (0..a.n()).map(|i| a.get(i, i) * p[i]).sum();
    Ok(diag - a.bilinear(p, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Definiteness {
    NegativeDefinite,
    NegativeSemiDefinite,
    Indefinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefinitenessReport {
    pub classification: Definiteness,
    /// `-max_{h∈H} h·Ah/‖h‖²`; positive exactly for negative definite matrices.
    pub rayleigh_lambda: f64,
}

/// Classifies `A` on the zero-sum hyperplane via `psi · sym(A) · psi^T`.
pub fn definiteness(a: &PayoffMatrix) -> DefinitenessReport {
    let n = a.n();
    let psi = ContrastMatrix::new(n).expect("n >= 2").to_matrix();
    let sym = (a.matrix() + a.matrix().transpose()) * 0.5;
    let projected = &psi * sym * psi.transpose();
    let top = SymmetricEigen::new(projected)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if top < -MATRIX_TOL {
        DefinitenessReport {
            classification: Definiteness::NegativeDefinite,
            rayleigh_lambda: -top,
        }
    } else if top <= MATRIX_TOL {
        DefinitenessReport {
            classification: Definiteness::NegativeSemiDefinite,
            rayleigh_lambda: 0.0,
        }
    } else {
        DefinitenessReport {
            classification: Definiteness::Indefinite,
            rayleigh_lambda: -top,
        }
    }
}

/// The common value `c = a_ij + a_ji - a_ii - a_jj` over all `i != j`, if
/// there is one. `c = 0` gives invariance of the Aitchison measure; `c > 0`
/// makes `A` a Dirichlet candidate with `|α| = c/2`.
pub fn sum_condition(a: &PayoffMatrix) -> Option<f64> {
    let n = a.n();
    let pair = |i: usize, j: usize| a.get(i, j) + a.get(j, i) - a.get(i, i) - a.get(j, j);
    let c = pair(0, 1);
    for i in 0..n {
        for j in i + 1..n {
            if (pair(i, j) - c).abs() > MATRIX_TOL {
                return None;
            }
        }
    }
    Some(c)
}

/// Certificate `A = -λ·id + u⊗1 + 1⊗v` with gauge `u_1 = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub lambda: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Max-norm of `A - (-λ·id + u⊗1 + 1⊗v)`.
    pub residual: f64,
}

impl Decomposition {
    pub fn reconstruct(&self) -> PayoffMatrix {
        let n = self.u.len();
        let a = DMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { -self.lambda } else { 0.0 };
            d + self.u[i] + self.v[j]
        });
        PayoffMatrix::new(a).expect("finite decomposition")
    }
}

/// Builds the decomposition from the first row and column and accepts it
/// only if it reconstructs `A` within [`MATRIX_TOL`] with `λ >= 0`.
pub fn decompose(a: &PayoffMatrix) -> Option<Decomposition> {
    let n = a.n();
    let raw_lambda = (a.get(0, 1) + a.get(1, 0) - a.get(0, 0) - a.get(1, 1)) / 2.0;
    if raw_lambda < -1e-12 {
        return None;
    }
    let lambda = raw_lambda.max(0.0);
    let mut v: Vec<f64> = (0..n).map(|j| a.get(0, j)).collect();
    v[0] = a.get(0, 0) + lambda;
    let mut u = vec![0.0; n];
    for (i, ui) in u.iter_mut().enumerate().skip(1) {
        *ui = a.get(i, 0) - v[0];
    }
    let mut d = Decomposition { lambda, u, v, residual: 0.0 };
    d.residual = (a.matrix() - d.reconstruct().matrix()).amax();
    (d.residual <= MATRIX_TOL).then_some(d)
}

/// Interior Nash equilibrium of a decomposable game with `λ > 0`, which
/// exists iff `u` is constant or `λ > |u| + n·max_i u_i⁻`.
pub fn interior_ne_decomposed(d: &Decomposition, n: usize) -> Result<Option<Composition>> {
    if d.u.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: d.u.len() });
    }
    if d.lambda <= 0.0 {
        return Err(Error::LambdaZero);
    }
    let max = d.u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = d.u.iter().cloned().fold(f64::INFINITY, f64::min);
    if max - min <= 1e-12 {
        return Composition::barycenter(n).map(Some);
    }
    let shift = (-min).max(0.0);
    let shifted: Vec<f64> = d.u.iter().map(|x| x + shift).collect();
    let total: f64 = shifted.iter().sum();
    if d.lambda <= total {
        return Ok(None);
    }
    let delta = (1.0 - total / d.lambda) / n as f64;
    let p: Vec<f64> = shifted.iter().map(|x| x / d.lambda + delta).collect();
    Composition::new(p).map(Some)
}

/// Nash set of `u⊗1 + 1⊗v`: the face spanned by the maximisers of `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroLambdaNash {
    /// Zero-based vertex indices spanning the Nash face.
    pub vertices: Vec<usize>,
    /// The vertex itself when the face is a single point (then it is the ESS).
    pub ess: Option<Vec<f64>>,
}

pub fn nash_set_zero_lambda(d: &Decomposition) -> Result<ZeroLambdaNash> {
    if d.lambda > 0.0 {
        return Err(Error::LambdaNonzero(d.lambda));
    }
    let max = d.u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let vertices: Vec<usize> = (0..d.u.len()).filter(|&i| max - d.u[i] <= MATRIX_TOL).collect();
    let ess = (vertices.len() == 1).then(|| {
        let mut e = vec![0.0; d.u.len()];
        e[vertices[0]] = 1.0;
        e
    });
    Ok(ZeroLambdaNash { vertices, ess })
}

/// `p` is a best reply to itself: `max_i (Ap)_i <= p·Ap + tol`.
pub fn is_nash(a: &PayoffMatrix, p: &[f64], tol: f64) -> bool {
    if p.len() != a.n() {
        return false;
    }
    let ap = a.mul(p);
    let value = dot(p, &ap);
    ap.iter().all(|x| *x <= value + tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EssStatus {
    Certified,
    SufficientConditionOnly,
    NotEss,
}

/// Evolutionary stability of a Nash equilibrium `p` of the closed simplex.
///
/// Certified through the decomposition (interior equilibrium for `λ > 0`,
/// unique maximising vertex for `λ = 0`) or, for interior `p`, through
/// negative definiteness. Otherwise the stability condition is checked on a
/// grid of about [`ESS_GRID_POINTS`] points.
pub fn is_ess(a: &PayoffMatrix, p: &[f64], tol: f64) -> Result<EssStatus> {
    a.check_dim(p.len())?;
    if !is_nash(a, p, tol) {
        return Err(Error::NotNash);
    }
    let n = a.n();
    let close = |q: &[f64]| p.iter().zip(q).all(|(x, y)| (x - y).abs() <= 1e-8);
    if let Some(d) = decompose(a) {
        if d.lambda > 0.0 {
            if let Some(star) = interior_ne_decomposed(&d, n)? {
                if close(star.as_slice()) {
                    return Ok(EssStatus::Certified);
                }
            }
        } else if let Some(vertex) = nash_set_zero_lambda(&d)?.ess {
            if close(&vertex) {
                return Ok(EssStatus::Certified);
            }
        }
    }
    let interior = p.iter().all(|&x| x > tol);
    if interior && definiteness(a).classification == Definiteness::NegativeDefinite {
        return Ok(EssStatus::Certified);
    }
    let ap_star = a.mul(p);
    let value = dot(p, &ap_star);
    for q in simplex_grid(n, grid_resolution(n, ESS_GRID_POINTS)) {
        if close(&q) {
            continue;
        }
        if (dot(&q, &ap_star) - value).abs() <= tol {
            let aq = a.mul(&q);
            if dot(p, &aq) - dot(&q, &aq) <= tol {
                return Ok(EssStatus::NotEss);
            }
        }
    }
    Ok(EssStatus::SufficientConditionOnly)
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Largest lattice resolution whose closed-simplex grid has at most `points`.
pub(crate) fn grid_resolution(n: usize, points: usize) -> usize {
    let mut r = 1;
    while r < 10_000 && binomial(r + 1 + n - 1, n - 1) <= points {
        r += 1;
    }
    r
}

/// Barycentric lattice `{k / r : k ∈ N^n, Σk = r}` of the closed simplex.
pub(crate) fn simplex_grid(n: usize, r: usize) -> Vec<Vec<f64>> {
    fn rec(n: usize, left: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() == n - 1 {
            cur.push(left);
            out.push(cur.iter().map(|&k| k as f64 / r as f64).collect());
            cur.pop();
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(n, left - k, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, r, r, &mut Vec::with_capacity(n), &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryNe {
    pub point: Vec<f64>,
    /// Zero-based indices of the strategies in use.
    pub support: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssReport {
    pub point: Vec<f64>,
    pub flag: EssStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub interior_ne: Option<Composition>,
    pub boundary_ne: Vec<BoundaryNe>,
    pub ess: Option<EssReport>,
    /// Supports skipped because their linear system was singular.
    pub diagnostics: Vec<String>,
}

impl EquilibriumReport {
    pub fn all_points(&self) -> Vec<Vec<f64>> {
        self.interior_ne
            .iter()
            .map(|p| p.as_slice().to_vec())
            .chain(self.boundary_ne.iter().map(|b| b.point.clone()))
            .collect()
    }
}

/// Support enumeration for `n <= 5`.
///
/// For every support `S` solves `(Ap)_i = w (i ∈ S)`, `Σp = 1`, `p = 0` off
/// `S`; keeps nonnegative solutions that pass [`is_nash`] at [`MATRIX_TOL`].
pub fn enumerate_nash(a: &PayoffMatrix) -> Result<EquilibriumReport> {
    let n = a.n();
    if n > MAX_ENUMERATION_N {
        return Err(Error::TooLarge(n));
    }
    let mut found: Vec<Vec<f64>> = Vec::new();
    let mut diagnostics = Vec::new();
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let k = support.len();
        let mut m = DMatrix::zeros(k + 1, k + 1);
        let mut rhs = DVector::zeros(k + 1);
        for (r, &i) in support.iter().enumerate() {
            for (c, &j) in support.iter().enumerate() {
                m[(r, c)] = a.get(i, j);
            }
            m[(r, k)] = -1.0;
            m[(k, r)] = 1.0;
        }
        rhs[k] = 1.0;
        let svd = m.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smin <= RANK_TOL * smax.max(1.0) {
            diagnostics.push(format!("support {support:?}: singular system skipped"));
            continue;
        }
        let Ok(z) = svd.solve(&rhs, 0.0) else {
            diagnostics.push(format!("support {support:?}: solve failed"));
            continue;
        };
        if (0..k).any(|r| z[r] < -1e-12) {
            continue;
        }
        let mut p = vec![0.0; n];
        for (r, &i) in support.iter().enumerate() {
            p[i] = z[r].max(0.0);
        }
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= s);
        if !is_nash(a, &p, MATRIX_TOL) {
            continue;
        }
        if found.iter().any(|q| q.iter().zip(&p).all(|(x, y)| (x - y).abs() <= 1e-8)) {
            continue;
        }
        found.push(p);
    }

    let mut interior_ne = None;
    let mut boundary_ne = Vec::new();
    for p in &found {
        let support: Vec<usize> = (0..n).filter(|&i| p[i] > 0.0).collect();
        if support.len() == n && interior_ne.is_none() {
            interior_ne = Some(Composition::new(p.clone())?);
        } else {
            boundary_ne.push(BoundaryNe { point: p.clone(), support });
        }
    }
    let mut ess = None;
    for p in &found {
        let flag = is_ess(a, p, MATRIX_TOL)?;
        if flag != EssStatus::NotEss {
            ess = Some(EssReport { point: p.clone(), flag });
            break;
        }
    }
    Ok(EquilibriumReport { interior_ne, boundary_ne, ess, diagnostics })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeForm {
    /// `(A sfm(psi^T x) - A sfm(psi^T y)) · psi^T (x - y) <= 0`.
    Finite,
    /// `h · A g^{-1}(p) h <= 0` with `p = sfm(psi^T x)`, `h = psi^T y`.
    Infinitesimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum ProbeOutcome {
    MonotoneOnSamples { samples: usize },
    Violation { form: ProbeForm, x: Vec<f64>, y: Vec<f64>, value: f64 },
}

impl ProbeOutcome {
    pub fn is_monotone(&self) -> bool {
        matches!(self, ProbeOutcome::MonotoneOnSamples { .. })
    }
}

/// Samples ilr pairs with standard deviation 2 and looks for a violation of
/// either monotonicity inequality (slack `1e-12`).
pub fn monotonicity_probe(a: &PayoffMatrix, samples: usize, rng_seed: u64) -> ProbeOutcome {
    const SLACK: f64 = 1e-12;
    let n = a.n();
    let psi = ContrastMatrix::new(n).expect("n >= 2");
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n - 1).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect()
    };
    for _ in 0..samples.max(1) {
        let x = draw(&mut rng);
        let y = draw(&mut rng);
        let zx = psi.apply_transpose(&x);
        let zy = psi.apply_transpose(&y);
        let ax = a.mul(sfm(&zx).as_slice());
        let ay = a.mul(sfm(&zy).as_slice());
        let diff: Vec<f64> = zx.iter().zip(&zy).map(|(p, q)| p - q).collect();
        let value: f64 = ax.iter().zip(&ay).zip(&diff).map(|((p, q), d)| (p - q) * d).sum();
        if value > SLACK {
            return ProbeOutcome::Violation { form: ProbeForm::Finite, x, y, value };
        }

        let p = sfm(&zx);
        let h = zy;
        let gh = shahshahani_inv(&p) * DVector::from_column_slice(&h);
        let value = dot(&h, &a.mul(gh.as_slice()));
        if value > SLACK {
            return ProbeOutcome::Violation { form: ProbeForm::Infinitesimal, x, y, value };
        }
    }
    ProbeOutcome::MonotoneOnSamples { samples: samples.max(1) }
}

/// Everything the analyzer reports about one matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixReport {
    pub n: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub decomposition: Option<Decomposition>,
    pub definiteness: DefinitenessReport,
    pub sum_condition: Option<f64>,
    pub equilibria: EquilibriumReport,
}

pub fn analyze(a: &PayoffMatrix) -> Result<MatrixReport> {
    Ok(MatrixReport {
        n: a.n(),
        a: a.rows(),
        decomposition: decompose(a),
        definiteness: definiteness(a),
        sum_condition: sum_condition(a),
        equilibria: enumerate_nash(a)?,
    })
}
