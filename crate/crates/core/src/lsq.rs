//! Least-squares prototypes for groups of signals on a shared grid.
//!
//! Stacking `l` signals gives the system `B X ≈ Y` with `B` made of `l`
//! copies of the design matrix `B₀`. Its normal equations collapse to
//! `B₀ᵀB₀ X = B₀ᵀ S̄` where `S̄` is the pointwise mean (the centroid), so
//! the system matrix depends only on the basis and the grid. A
//! [`SolverHandle`] factors it once; every later membership change only
//! moves the centroid and costs one matrix-vector product.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::{design_matrix, monomial, ExponentSet, TimeGrid};
use crate::error::{Error, Result};
use crate::schur::{is_gram_invertible, GramCheck, InvertibilityReport, DEFAULT_TOL};

const SVD_MAX_ITER: usize = 10_000;

/// `N × l` samples; column `j` is signal `j` on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSet {
    samples: DMatrix<f64>,
    grid: TimeGrid,
}

impl SignalSet {
    pub fn new(grid: TimeGrid, samples: DMatrix<f64>) -> Result<Self> {
        if samples.nrows() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                actual: samples.nrows(),
            });
        }
        if samples.ncols() == 0 {
            return Err(Error::Input("a signal set needs at least one signal".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("signal samples"));
        }
        Ok(Self { samples, grid })
    }

    pub fn from_columns(grid: TimeGrid, columns: &[Vec<f64>]) -> Result<Self> {
        let n = grid.len();
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::SizeMismatch {
                expected: n,
                actual: bad.len(),
            });
        }
        let samples = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
        Self::new(grid, samples)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    /// Number of signals `l`.
    pub fn num_signals(&self) -> usize {
        self.samples.ncols()
    }

    /// Number of grid points `N`.
    pub fn num_points(&self) -> usize {
        self.samples.nrows()
    }

    pub fn signal(&self, j: usize) -> &[f64] {
        let n = self.num_points();
        &self.samples.as_slice()[j * n..(j + 1) * n]
    }

    pub fn signals(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.num_signals()).map(move |j| self.signal(j))
    }

    /// The signals at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let cols: Vec<Vec<f64>> = indices.iter().map(|&j| self.signal(j).to_vec()).collect();
        Self::from_columns(self.grid.clone(), &cols)
    }
}

/// Pointwise mean of a group of signals together with the group size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    pub values: Vec<f64>,
    pub weight: usize,
}

pub fn centroid(signals: &SignalSet) -> Centroid {
    let l = signals.num_signals();
    let mut values = vec![0.0; signals.num_points()];
    for s in signals.signals() {
        for (v, x) in values.iter_mut().zip(s) {
            *v += x;
        }
    }
    values.iter_mut().for_each(|v| *v /= l as f64);
    Centroid { values, weight: l }
}

/// `(l·S_old + Σ added − Σ removed) / (l + l_a − l_r)`.
///
/// Removed signals must have been members; that cannot be verified here.
pub fn update_centroid(old: &Centroid, added: &SignalSet, removed: &SignalSet) -> Result<Centroid> {
    update_centroid_with(old, added.signals(), removed.signals())
}

/// [`update_centroid`] over borrowed signal slices. Signals that appear
/// bit-for-bit in both lists cancel before any arithmetic.
pub fn update_centroid_with<'a, A, R>(old: &Centroid, added: A, removed: R) -> Result<Centroid>
where
    A: IntoIterator<Item = &'a [f64]>,
    R: IntoIterator<Item = &'a [f64]>,
{
    let n = old.values.len();
    let mut added: Vec<&[f64]> = added.into_iter().collect();
    let mut removed: Vec<&[f64]> = removed.into_iter().collect();
    if let Some(bad) = added.iter().chain(&removed).find(|s| s.len() != n) {
        return Err(Error::SizeMismatch {
            expected: n,
            actual: bad.len(),
        });
    }
    added.retain(|a| match removed.iter().position(|r| r == a) {
        Some(pos) => {
            removed.swap_remove(pos);
            false
        }
        None => true,
    });

    let weight = (old.weight + added.len())
        .checked_sub(removed.len())
        .filter(|&w| w >= 1)
        .ok_or(Error::EmptyGroup)?;
    if added.is_empty() && removed.is_empty() {
        return Ok(old.clone());
    }

    let l = old.weight as f64;
    let mut values: Vec<f64> = old.values.iter().map(|v| l * v).collect();
    for s in &added {
        values.iter_mut().zip(*s).for_each(|(v, x)| *v += x);
    }
    for s in &removed {
        values.iter_mut().zip(*s).for_each(|(v, x)| *v -= x);
    }
    values.iter_mut().for_each(|v| *v /= weight as f64);
    Ok(Centroid { values, weight })
}

/// Coefficients of a basis combination, ordered like the basis exponents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prototype {
    coefficients: Vec<f64>,
    basis: ExponentSet,
}

impl Prototype {
    pub fn new(basis: ExponentSet, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != basis.len() {
            return Err(Error::SizeMismatch {
                expected: basis.len(),
                actual: coefficients.len(),
            });
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("prototype coefficients"));
        }
        Ok(Self { coefficients, basis })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn basis(&self) -> &ExponentSet {
        &self.basis
    }

    /// `Σ_j x_j t^(m_j)`.
    pub fn evaluate(&self, t: f64) -> f64 {
        self.coefficients
            .iter()
            .zip(self.basis.exponents())
            .fold(0.0, |acc, (c, &m)| acc + c * monomial(t, m))
    }

    /// Prototype values on every grid point.
    pub fn sample(&self, grid: &TimeGrid) -> Vec<f64> {
        grid.points().iter().map(|&t| self.evaluate(t)).collect()
    }
}

pub fn evaluate_prototype(p: &Prototype, t: f64) -> f64 {
    p.evaluate(t)
}

/// Sum of squared residuals of every signal against the prototype.
pub fn group_objective(p: &Prototype, signals: &SignalSet) -> f64 {
    let fitted = p.sample(signals.grid());
    signals.signals().map(|s| squared_distance(s, &fitted)).sum()
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `A = B₀ᵀB₀` and `b = B₀ᵀ c`.
pub fn assemble_normal_system(basis: &ExponentSet, grid: &TimeGrid, c: &Centroid) -> (DMatrix<f64>, DVector<f64>) {
    let b0 = design_matrix(basis, grid).into_values();
    let rhs = b0.tr_mul(&DVector::from_column_slice(&c.values));
    (b0.tr_mul(&b0), rhs)
}

/// Hex digest identifying a `(basis, grid)` pair bit-for-bit.
pub fn gram_fingerprint(basis: &ExponentSet, grid: &TimeGrid) -> String {
    let mut h = Sha256::new();
    h.update((basis.len() as u64).to_le_bytes());
    for m in basis.exponents() {
        h.update(m.to_le_bytes());
    }
    h.update((grid.len() as u64).to_le_bytes());
    for t in grid.points() {
        h.update(t.to_bits().to_le_bytes());
    }
    hex::encode(&h.finalize()[..16])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    Inverse,
    Svd,
}

impl std::fmt::Display for SolverMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverMode::Inverse => "inverse",
            SolverMode::Svd => "svd",
        })
    }
}

#[derive(Debug, Clone)]
enum Payload {
    /// `(B₀ᵀB₀)⁻¹` and `B₀ᵀ`.
    Inverse {
        gram_inverse: DMatrix<f64>,
        design_t: DMatrix<f64>,
    },
    /// Pseudo-inverse of `B₀`, `k × N`.
    Svd { pseudo_inverse: DMatrix<f64> },
}

/// Factored normal-equations matrix for one `(basis, grid)` pair, reusable
/// for any centroid on that grid.
#[derive(Debug, Clone)]
pub struct SolverHandle {
    basis: ExponentSet,
    grid_len: usize,
    fingerprint: String,
    payload: Payload,
    rank: usize,
    condition: Option<f64>,
    report: Option<InvertibilityReport>,
}

impl SolverHandle {
    pub fn mode(&self) -> SolverMode {
        match self.payload {
            Payload::Inverse { .. } => SolverMode::Inverse,
            Payload::Svd { .. } => SolverMode::Svd,
        }
    }

    pub fn basis(&self) -> &ExponentSet {
        &self.basis
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Numerical rank of `B₀` (equal to `k` in inverse mode).
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// 1-norm condition number of `B₀ᵀB₀` in inverse mode.
    pub fn condition(&self) -> Option<f64> {
        self.condition
    }

    /// The invertibility verdict that chose the mode; absent when the grid
    /// has fewer points than the basis has functions.
    pub fn report(&self) -> Option<&InvertibilityReport> {
        self.report.as_ref()
    }

    pub fn gram_inverse(&self) -> Option<&DMatrix<f64>> {
        match &self.payload {
            Payload::Inverse { gram_inverse, .. } => Some(gram_inverse),
            Payload::Svd { .. } => None,
        }
    }

    pub fn matches(&self, basis: &ExponentSet, grid: &TimeGrid) -> bool {
        self.fingerprint == gram_fingerprint(basis, grid)
    }

    fn solve_values(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.grid_len {
            return Err(Error::HandleMismatch);
        }
        let c = DVector::from_column_slice(values);
        let x = match &self.payload {
            Payload::Inverse { gram_inverse, design_t } => gram_inverse * (design_t * c),
            Payload::Svd { pseudo_inverse } => pseudo_inverse * c,
        };
        Ok(x.iter().copied().collect())
    }
}

/// Factors `B₀ᵀB₀` once. The explicit inverse is used when
/// [`is_gram_invertible`] certifies the basis on this grid; otherwise the
/// handle holds the SVD pseudo-inverse of `B₀` with singular values below
/// `tol · σ_max` dropped.
pub fn precompute_solver(basis: &ExponentSet, grid: &TimeGrid, tol: f64) -> Result<SolverHandle> {
    let b0 = design_matrix(basis, grid).into_values();
    if b0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design matrix"));
    }
    let k = basis.len();
    let report = if grid.len() >= k {
        Some(is_gram_invertible(basis, grid, &GramCheck::with_tol(tol))?)
    } else {
        None
    };
    let mut handle = SolverHandle {
        basis: basis.clone(),
        grid_len: grid.len(),
        fingerprint: gram_fingerprint(basis, grid),
        payload: Payload::Svd {
            pseudo_inverse: DMatrix::zeros(0, 0),
        },
        rank: 0,
        condition: None,
        report,
    };

    if handle.report.as_ref().is_some_and(|r| r.invertible) {
        let gram = b0.tr_mul(&b0);
        if let Some(inv) = gram.clone().lu().try_inverse().filter(|m| m.iter().all(|v| v.is_finite())) {
            handle.condition = Some(one_norm(&gram) * one_norm(&inv));
            handle.rank = k;
            handle.payload = Payload::Inverse {
                gram_inverse: inv,
                design_t: b0.transpose(),
            };
            return Ok(handle);
        }
    }

    let svd = b0
        .try_svd(true, true, f64::EPSILON, SVD_MAX_ITER)
        .ok_or(Error::SvdNoConvergence)?;
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = tol * sigma_max;
    handle.rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let pseudo_inverse = pseudo_inverse(&svd, cutoff);
    handle.payload = Payload::Svd { pseudo_inverse };
    Ok(handle)
}

fn pseudo_inverse(svd: &nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>, cutoff: f64) -> DMatrix<f64> {
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let mut out = DMatrix::zeros(v_t.ncols(), u.nrows());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            out += v_t.row(i).transpose() * u.column(i).transpose() / s;
        }
    }
    out
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Prototype for the centroid: `A⁻¹ b` in inverse mode, the minimum-norm
/// least-squares solution in SVD mode.
pub fn solve_with_handle(h: &SolverHandle, c: &Centroid) -> Result<Prototype> {
    let x = h.solve_values(&c.values)?;
    Prototype::new(h.basis.clone(), x)
}

/// Like [`solve_with_handle`] but also checks that the handle was built for
/// exactly this grid.
pub fn solve_on_grid(h: &SolverHandle, grid: &TimeGrid, c: &Centroid) -> Result<Prototype> {
    if !h.matches(&h.basis, grid) {
        return Err(Error::HandleMismatch);
    }
    solve_with_handle(h, c)
}

/// Least-squares prototype of a whole group.
///
/// ```
/// use protofit::{fit_prototype, ExponentSet, SignalSet, TimeGrid};
///
/// let grid = TimeGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
/// let signals = SignalSet::from_columns(grid, &[vec![1.0, 3.0, 5.0], vec![1.0, 3.0, 5.0]]).unwrap();
/// let p = fit_prototype(&ExponentSet::full(1), &signals).unwrap();
/// assert!((p.coefficients()[0] - 2.0).abs() < 1e-12);
/// assert!((p.coefficients()[1] - 1.0).abs() < 1e-12);
/// ```
pub fn fit_prototype(basis: &ExponentSet, signals: &SignalSet) -> Result<Prototype> {
    let handle = precompute_solver(basis, signals.grid(), DEFAULT_TOL)?;
    solve_with_handle(&handle, &centroid(signals))
}
