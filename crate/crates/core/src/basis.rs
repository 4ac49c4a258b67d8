//! Monomial bases with arbitrary exponent sets, their design matrices, and
//! generalized Vandermonde matrices.
//!
//! All matrices use one column convention: exponents in strictly decreasing
//! order. The increasing-power layout `1, t, t², …` is the column reversal
//! of what [`design_matrix`] returns.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest matrix size for which determinants use cofactor expansion.
const COFACTOR_LIMIT: usize = 4;

/// `t^m` with `0⁰ = 1`.
///
/// Every matrix and evaluation in the crate goes through this function, so
/// entries built on different routes are bit-identical.
#[inline]
pub fn monomial(t: f64, exponent: u32) -> f64 {
    match i32::try_from(exponent) {
        Ok(e) => t.powi(e),
        Err(_) => t.powf(exponent as f64),
    }
}

/// Ordered, pairwise distinct sample times shared by every signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if let Some(bad) = points.iter().find(|t| !t.is_finite()) {
            return Err(Error::Input(format!("non-finite time value {bad}")));
        }
        let mut sorted = points.clone();
        sorted.sort_by(f64::total_cmp);
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateTime(w[0]));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl TryFrom<Vec<f64>> for TimeGrid {
    type Error = Error;

    fn try_from(points: Vec<f64>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<TimeGrid> for Vec<f64> {
    fn from(grid: TimeGrid) -> Self {
        grid.points
    }
}

/// Strictly decreasing, nonempty list of monomial exponents.
///
/// `{0, 2}` describes the basis `t², 1` in which `t` is missing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct ExponentSet {
    exponents: Vec<u32>,
}

impl ExponentSet {
    /// Canonicalizes a set of degrees into decreasing order.
    ///
    /// ```
    /// use protofit::ExponentSet;
    ///
    /// let basis = ExponentSet::new([0, 2]).unwrap();
    /// assert_eq!(basis.exponents(), &[2, 0]);
    /// assert!(ExponentSet::new([0, 0]).is_err());
    /// ```
    pub fn new<I: IntoIterator<Item = u32>>(degrees: I) -> Result<Self> {
        let mut exponents: Vec<u32> = degrees.into_iter().collect();
        if exponents.is_empty() {
            return Err(Error::EmptyBasis);
        }
        exponents.sort_unstable_by(|a, b| b.cmp(a));
        if let Some(w) = exponents.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateExponent(w[0]));
        }
        Ok(Self { exponents })
    }

    /// The full polynomial basis of the given degree, `(degree, …, 1, 0)`.
    pub fn full(degree: u32) -> Self {
        Self {
            exponents: (0..=degree).rev().collect(),
        }
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    /// Number of basis functions.
    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// True when no monomial below the leading one is missing.
    pub fn is_full(&self) -> bool {
        self.exponents[0] as usize + 1 == self.exponents.len()
    }
}

impl TryFrom<Vec<u32>> for ExponentSet {
    type Error = Error;

    fn try_from(v: Vec<u32>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ExponentSet> for Vec<u32> {
    fn from(b: ExponentSet) -> Self {
        b.exponents
    }
}

impl fmt::Display for ExponentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.exponents.iter().map(u32::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

/// Shorthand for [`ExponentSet::new`].
pub fn make_exponent_set<I: IntoIterator<Item = u32>>(degrees: I) -> Result<ExponentSet> {
    ExponentSet::new(degrees)
}

/// The `N × k` matrix of basis functions sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
    grid: TimeGrid,
    basis: ExponentSet,
}

impl DesignMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn basis(&self) -> &ExponentSet {
        &self.basis
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }
}

/// Entry `(i, j)` is `t_i^(m_j)`.
pub fn design_matrix(basis: &ExponentSet, grid: &TimeGrid) -> DesignMatrix {
    let exps = basis.exponents();
    let values = DMatrix::from_fn(grid.len(), exps.len(), |i, j| monomial(grid.points()[i], exps[j]));
    DesignMatrix {
        values,
        grid: grid.clone(),
        basis: basis.clone(),
    }
}

/// Square matrix with entry `(i, j) = t_j^(m_i)`: one row per exponent, one
/// column per point.
pub fn generalized_vandermonde(basis: &ExponentSet, points: &[f64]) -> Result<DMatrix<f64>> {
    let k = basis.len();
    if points.len() != k {
        return Err(Error::SizeMismatch {
            expected: k,
            actual: points.len(),
        });
    }
    if has_duplicates(points) {
        return Err(Error::CoincidentPoints);
    }
    let exps = basis.exponents();
    Ok(DMatrix::from_fn(k, k, |i, j| monomial(points[j], exps[i])))
}

/// `∏_{i<j} (t_i − t_j)`, the determinant of the classical Vandermonde
/// matrix in the same layout as [`generalized_vandermonde`] with basis
/// `(k−1, …, 1, 0)`. Coincident points give zero.
pub fn vandermonde_det(points: &[f64]) -> f64 {
    let mut det = 1.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            det *= points[i] - points[j];
        }
    }
    det
}

/// Determinant of a square matrix: cofactor expansion up to 4×4, LU with
/// partial pivoting beyond.
pub fn determinant(m: &DMatrix<f64>) -> f64 {
    assert!(m.is_square(), "determinant of a non-square matrix");
    let n = m.nrows();
    if n == 0 {
        return 1.0;
    }
    if n <= COFACTOR_LIMIT {
        let rows: Vec<usize> = (0..n).collect();
        let cols: Vec<usize> = (0..n).collect();
        cofactor(m, &rows, &cols)
    } else {
        m.clone().lu().determinant()
    }
}

fn cofactor(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    match rows.len() {
        1 => m[(rows[0], cols[0])],
        2 => m[(rows[0], cols[0])] * m[(rows[1], cols[1])] - m[(rows[0], cols[1])] * m[(rows[1], cols[0])],
        _ => {
            let r = rows[0];
            let rest = &rows[1..];
            let mut sum = 0.0;
            let mut minor_cols = Vec::with_capacity(cols.len() - 1);
            for (pos, &c) in cols.iter().enumerate() {
                let a = m[(r, c)];
                if a == 0.0 {
                    continue;
                }
                minor_cols.clear();
                minor_cols.extend(cols.iter().copied().filter(|&x| x != c));
                let term = a * cofactor(m, rest, &minor_cols);
                if pos % 2 == 0 {
                    sum += term;
                } else {
                    sum -= term;
                }
            }
            sum
        }
    }
}

pub(crate) fn has_duplicates(points: &[f64]) -> bool {
    (0..points.len()).any(|i| (i + 1..points.len()).any(|j| points[i] == points[j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(p: &[f64]) -> TimeGrid {
        TimeGrid::new(p.to_vec()).unwrap()
    }

    #[test]
    fn exponent_sets_are_sorted_and_validated() {
        assert_eq!(ExponentSet::new([0, 1, 2]).unwrap().exponents(), &[2, 1, 0]);
        assert_eq!(ExponentSet::new([0, 2]).unwrap().exponents(), &[2, 0]);
        assert_eq!(ExponentSet::new([0, 0]), Err(Error::DuplicateExponent(0)));
        assert_eq!(ExponentSet::new([]), Err(Error::EmptyBasis));
        assert_eq!(Error::EmptyBasis.to_string(), "empty basis");
        assert!(Error::DuplicateExponent(3).to_string().starts_with("duplicate exponent"));
        assert!(ExponentSet::full(2).is_full());
        assert!(!ExponentSet::new([0, 2]).unwrap().is_full());
    }

    #[test]
    fn grid_rejects_duplicates() {
        assert_eq!(TimeGrid::new(vec![1.0, 1.5, 1.5]), Err(Error::DuplicateTime(1.5)));
        assert_eq!(TimeGrid::new(vec![]), Err(Error::EmptyGrid));
        assert!(TimeGrid::new(vec![0.0, -0.0]).is_err());
        assert!(TimeGrid::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn design_matrix_layout() {
        let (a, b, c) = (0.5, -1.25, 3.0);
        let dm = design_matrix(&ExponentSet::full(2), &grid(&[a, b, c]));
        for (i, t) in [a, b, c].into_iter().enumerate() {
            assert_eq!(dm.values().row(i).iter().copied().collect::<Vec<_>>(), vec![t * t, t, 1.0]);
        }

        let dm = design_matrix(&ExponentSet::new([0, 2]).unwrap(), &grid(&[1.0, -1.0]));
        assert_eq!(dm.values(), &DMatrix::from_element(2, 2, 1.0));

        let dm = design_matrix(&ExponentSet::new([0]).unwrap(), &grid(&[0.0, 2.0, -7.0]));
        assert_eq!(dm.values(), &DMatrix::from_element(3, 1, 1.0));
    }

    #[test]
    fn zero_to_the_zero_is_one() {
        assert_eq!(monomial(0.0, 0), 1.0);
        assert_eq!(monomial(0.0, 3), 0.0);
    }

    #[test]
    fn generalized_vandermonde_examples() {
        let (t1, t2) = (0.3, -2.0);
        let g = generalized_vandermonde(&ExponentSet::full(1), &[t1, t2]).unwrap();
        assert_eq!(g, DMatrix::from_row_slice(2, 2, &[t1, t2, 1.0, 1.0]));

        let even = ExponentSet::new([2, 0]).unwrap();
        let g = generalized_vandermonde(&even, &[1.0, -1.0]).unwrap();
        assert_eq!(g, DMatrix::from_element(2, 2, 1.0));
        assert_eq!(determinant(&g), 0.0);

        let g = generalized_vandermonde(&even, &[1.0, 2.0]).unwrap();
        assert_eq!(g, DMatrix::from_row_slice(2, 2, &[1.0, 4.0, 1.0, 1.0]));
        assert_eq!(determinant(&g), -3.0);

        assert_eq!(
            generalized_vandermonde(&even, &[1.0]),
            Err(Error::SizeMismatch { expected: 2, actual: 1 })
        );
        assert_eq!(generalized_vandermonde(&even, &[2.0, 2.0]), Err(Error::CoincidentPoints));
    }

    #[test]
    fn vandermonde_det_examples() {
        assert_eq!(vandermonde_det(&[4.0, 1.5]), 2.5);
        // cofactor expansion of [[1,4,9],[1,2,3],[1,1,1]] gives -1 + 8 - 9
        assert_eq!(vandermonde_det(&[1.0, 2.0, 3.0]), -2.0);
        let g = generalized_vandermonde(&ExponentSet::full(2), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(determinant(&g), -2.0);
        assert_eq!(vandermonde_det(&[0.7, 0.7]), 0.0);
    }

    #[test]
    fn cofactor_and_lu_agree() {
        // 5x5 goes through LU, its leading 4x4 block through cofactors.
        let m = DMatrix::from_fn(5, 5, |i, j| ((i * 7 + j * 3) % 5) as f64 - 1.5 + (i == j) as u8 as f64);
        let lu = m.clone().lu().determinant();
        assert!((determinant(&m) - lu).abs() < 1e-12 * lu.abs().max(1.0));
        let sub = m.view((0, 0), (4, 4)).into_owned();
        let lu4 = sub.clone().lu().determinant();
        assert!((determinant(&sub) - lu4).abs() < 1e-12 * lu4.abs().max(1.0));
    }
}
