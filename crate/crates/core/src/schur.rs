//! Partitions, Schur polynomial evaluation, and the Gram-matrix
//! invertibility test for monomial bases.
//!
//! A strictly decreasing exponent set `m_1 > … > m_k` corresponds to the
//! partition `λ_i = m_i − (k − i)`. For pairwise distinct points the
//! generalized Vandermonde determinant factors as `s_λ(t) · V(t)`, so the
//! `k × k` minor of the design matrix on any `k` grid rows vanishes exactly
//! when the Schur polynomial does. The design matrix has full column rank
//! (and its Gram matrix is invertible) iff one such minor is nonzero.
//!
//! Two evaluators are provided and kept independent of each other:
//! [`schur_bialternant`] divides two determinants, while
//! [`schur_combinatorial`] sums monomials over semistandard Young tableaux and
//! never forms a determinant.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::basis::{self, design_matrix, ExponentSet, TimeGrid};
use crate::error::{Error, Result};

/// Largest partition weight accepted by the tableau enumerator.
pub const MAX_COMBINATORIAL_WEIGHT: u32 = 20;

/// Relative size of the Vandermonde denominator below which the bialternant
/// quotient is abandoned in favor of tableau enumeration.
pub const DENOMINATOR_CUTOFF: f64 = 1e-10;

/// Largest point count whose bialternant numerator is expanded in
/// double-double arithmetic (720 Leibniz terms).
pub const EXTENDED_LIMIT: usize = 6;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_SUBSET_CAP: usize = 10_000;

const SUBSET_CHUNK: usize = 256;

/// Weakly decreasing sequence of nonnegative parts. Trailing zeros count:
/// the length is the number of variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    parts: Vec<u32>,
}

impl Partition {
    pub fn new(parts: Vec<u32>) -> Result<Self> {
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidPartition);
        }
        Ok(Self { parts })
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    /// Number of variables `k`, including zero parts.
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Sum of the parts, `|λ|`.
    pub fn weight(&self) -> u32 {
        self.parts.iter().sum()
    }
}

/// `λ_i = m_i − (k − i)`.
pub fn partition_from_exponents(basis: &ExponentSet) -> Partition {
    let k = basis.len();
    let parts = basis
        .exponents()
        .iter()
        .enumerate()
        .map(|(i, &m)| m - (k - 1 - i) as u32)
        .collect();
    Partition { parts }
}

/// `m_i = λ_i + (k − i)`.
pub fn exponents_from_partition(p: &Partition) -> ExponentSet {
    let k = p.len();
    ExponentSet::new(p.parts.iter().enumerate().map(|(i, &l)| l + (k - 1 - i) as u32))
        .expect("a partition maps to strictly decreasing exponents")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchurMethod {
    Bialternant,
    Combinatorial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchurValue {
    pub value: f64,
    pub method: SchurMethod,
    /// Set when the Vandermonde denominator was too small relative to the
    /// point magnitudes and the tableau sum was used instead.
    pub condition_flag: bool,
}

/// `det G / det V` for pairwise distinct points, falling back to
/// [`schur_combinatorial`] when the points are nearly coincident.
///
/// ```
/// use protofit::schur::{schur_bialternant, Partition};
///
/// let p = Partition::new(vec![1, 0]).unwrap();
/// assert_eq!(schur_bialternant(&p, &[1.0, 2.0]).unwrap().value, 3.0);
/// assert_eq!(schur_bialternant(&p, &[1.0, -1.0]).unwrap().value, 0.0);
/// ```
pub fn schur_bialternant(p: &Partition, points: &[f64]) -> Result<SchurValue> {
    check_arity(p, points)?;
    if basis::has_duplicates(points) {
        return Err(Error::CoincidentPoints);
    }
    let exps = exponents_from_partition(p);
    let (num, den) = quotient_parts(&exps, points);
    if den.abs() < DENOMINATOR_CUTOFF * separation_scale(points) {
        let mut v = schur_combinatorial(p, points)?;
        v.condition_flag = true;
        return Ok(v);
    }
    Ok(SchurValue {
        value: num / den,
        method: SchurMethod::Bialternant,
        condition_flag: false,
    })
}

/// Sum over semistandard Young tableaux of shape `p` with entries in
/// `1..=k` of `∏ points[entry]`. Defined for any points, coincident or not.
///
/// ```
/// use protofit::schur::{schur_combinatorial, Partition};
///
/// // tableaux 11, 12, 22
/// let p = Partition::new(vec![2, 0]).unwrap();
/// let (x, y) = (3.0, 5.0);
/// assert_eq!(schur_combinatorial(&p, &[x, y]).unwrap().value, x * x + x * y + y * y);
/// ```
pub fn schur_combinatorial(p: &Partition, points: &[f64]) -> Result<SchurValue> {
    check_arity(p, points)?;
    let weight = p.weight();
    if weight > MAX_COMBINATORIAL_WEIGHT {
        return Err(Error::PartitionTooLarge {
            weight,
            limit: MAX_COMBINATORIAL_WEIGHT,
        });
    }
    let value = Tableaux::new(p, points).sum();
    Ok(SchurValue {
        value,
        method: SchurMethod::Combinatorial,
        condition_flag: false,
    })
}

fn check_arity(p: &Partition, points: &[f64]) -> Result<()> {
    if p.len() != points.len() {
        return Err(Error::SizeMismatch {
            expected: p.len(),
            actual: points.len(),
        });
    }
    Ok(())
}

/// Numerator and denominator of the bialternant quotient.
///
/// For nearly coincident points `det G` is a small difference of large
/// products, so up to [`EXTENDED_LIMIT`] points the powers and the Leibniz
/// expansion are carried in double-double arithmetic. The denominator is a
/// product of exact-ish differences and needs no such care.
fn quotient_parts(exps: &ExponentSet, points: &[f64]) -> (f64, f64) {
    let k = points.len();
    let num = if k <= EXTENDED_LIMIT {
        let g: Vec<Vec<TwoFloat>> = exps
            .exponents()
            .iter()
            .map(|&m| points.iter().map(|&t| power_dd(t, m)).collect())
            .collect();
        let cols: Vec<usize> = (0..k).collect();
        f64::from(cofactor_dd(&g, 0, &cols))
    } else {
        let g = DMatrix::from_fn(k, k, |i, j| basis::monomial(points[j], exps.exponents()[i]));
        basis::determinant(&g)
    };
    (num, basis::vandermonde_det(points))
}

fn power_dd(t: f64, m: u32) -> TwoFloat {
    let mut base = TwoFloat::from(t);
    let mut acc = TwoFloat::from(1.0);
    let mut e = m;
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}

/// Laplace expansion along `row`, over the remaining `cols`.
fn cofactor_dd(g: &[Vec<TwoFloat>], row: usize, cols: &[usize]) -> TwoFloat {
    if cols.len() == 1 {
        return g[row][cols[0]];
    }
    let mut sum = TwoFloat::from(0.0);
    let mut rest = Vec::with_capacity(cols.len() - 1);
    for (pos, &c) in cols.iter().enumerate() {
        rest.clear();
        rest.extend(cols.iter().copied().filter(|&x| x != c));
        let term = g[row][c] * cofactor_dd(g, row + 1, &rest);
        if pos % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    sum
}

/// `∏_{i<j} (|t_i| + |t_j|)`: what `|V(t)|` would be without cancellation.
fn separation_scale(points: &[f64]) -> f64 {
    let mut s = 1.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            s *= points[i].abs() + points[j].abs();
        }
    }
    s
}

/// Row-major depth-first enumeration of semistandard fillings.
struct Tableaux<'a> {
    rows: Vec<usize>,
    /// `heights[c]` is the number of rows reaching column `c`.
    heights: Vec<usize>,
    points: &'a [f64],
    fill: Vec<Vec<usize>>,
}

impl<'a> Tableaux<'a> {
    fn new(p: &Partition, points: &'a [f64]) -> Self {
        let rows: Vec<usize> = p.parts().iter().filter(|&&l| l > 0).map(|&l| l as usize).collect();
        let width = rows.first().copied().unwrap_or(0);
        let heights = (0..width).map(|c| rows.iter().filter(|&&l| l > c).count()).collect();
        let fill = rows.iter().map(|&l| vec![0; l]).collect();
        Self {
            rows,
            heights,
            points,
            fill,
        }
    }

    fn sum(mut self) -> f64 {
        if self.rows.is_empty() {
            return 1.0;
        }
        self.visit(0, 0, 1.0)
    }

    fn visit(&mut self, r: usize, c: usize, acc: f64) -> f64 {
        if r == self.rows.len() {
            return acc;
        }
        let (nr, nc) = if c + 1 == self.rows[r] { (r + 1, 0) } else { (r, c + 1) };
        let mut lo = 0;
        if c > 0 {
            lo = lo.max(self.fill[r][c - 1]);
        }
        if r > 0 {
            lo = lo.max(self.fill[r - 1][c] + 1);
        }
        // leave room for the strictly increasing entries below in this column
        let below = self.heights[c] - 1 - r;
        let Some(hi) = self.points.len().checked_sub(below + 1) else {
            return 0.0;
        };
        let mut total = 0.0;
        for v in lo..=hi {
            self.fill[r][c] = v;
            total += self.visit(nr, nc, acc * self.points[v]);
        }
        total
    }
}

/// Settings for [`is_gram_invertible`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramCheck {
    /// Relative threshold below which a Schur value counts as zero.
    pub tol: f64,
    /// Number of `k`-subsets examined before deferring to an SVD rank test.
    pub subset_cap: usize,
}

impl Default for GramCheck {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            subset_cap: DEFAULT_SUBSET_CAP,
        }
    }
}

impl GramCheck {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// How an [`InvertibilityReport`] reached its verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// A subset with nonzero Schur value was found.
    SchurCertificate,
    /// Every `k`-subset was examined and all Schur values vanish.
    Exhaustive,
    /// The subset cap was hit; the design matrix rank decided.
    SvdRank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertibilityReport {
    pub invertible: bool,
    /// Zero-based grid indices of a subset with nonzero Schur value.
    pub certificate: Option<Vec<usize>>,
    /// Schur value of the certificate subset, or the largest magnitude seen
    /// when no certificate exists.
    pub schur_value: Option<f64>,
    pub partition: Vec<u32>,
    pub subsets_checked: usize,
    pub decided_by: Verdict,
}

/// Decides whether `B₀ᵀB₀` is nonsingular for `basis` sampled on `grid`.
///
/// Candidates are tried in a fixed order: the first `k` strictly positive
/// grid points (on which every Schur value is positive), then all
/// `k`-subsets in lexicographic order up to `check.subset_cap`. A subset
/// counts as a certificate when `|s_λ| > tol · max(1, max|t|^|λ|)` over its
/// points. If the cap is exhausted the numerical rank of the design matrix
/// decides.
///
/// ```
/// use protofit::{ExponentSet, TimeGrid};
/// use protofit::schur::{is_gram_invertible, GramCheck};
///
/// let basis = ExponentSet::new([0, 2]).unwrap();
/// let symmetric = TimeGrid::new(vec![1.0, -1.0]).unwrap();
/// assert!(!is_gram_invertible(&basis, &symmetric, &GramCheck::default()).unwrap().invertible);
///
/// let report = is_gram_invertible(&basis, &TimeGrid::new(vec![1.0, 2.0]).unwrap(), &GramCheck::default()).unwrap();
/// assert!(report.invertible);
/// assert_eq!(report.schur_value, Some(3.0));
/// ```
pub fn is_gram_invertible(basis: &ExponentSet, grid: &TimeGrid, check: &GramCheck) -> Result<InvertibilityReport> {
    let k = basis.len();
    let n = grid.len();
    if n < k {
        return Err(Error::Underdetermined { points: n, functions: k });
    }
    let lambda = partition_from_exponents(basis);
    let t = grid.points();
    if t.iter().any(|x| !basis::monomial(*x, basis.exponents()[0]).is_finite()) {
        return Err(Error::NonFinite("design matrix"));
    }

    let eval = |subset: &[usize]| -> (f64, bool) {
        let pts: Vec<f64> = subset.iter().map(|&i| t[i]).collect();
        let value = subset_schur(&lambda, basis, &pts);
        let scale = pts
            .iter()
            .map(|x| x.abs().powi(lambda.weight() as i32))
            .fold(1.0_f64, f64::max);
        (value, value.abs() > check.tol * scale)
    };

    let mut checked = 0;
    let mut largest: Option<f64> = None;
    let mut note = |v: f64| {
        if largest.is_none_or(|l| v.abs() > l.abs()) {
            largest = Some(v);
        }
    };

    let positive: Vec<usize> = (0..n).filter(|&i| t[i] > 0.0).take(k).collect();
    if positive.len() == k {
        let (value, ok) = eval(&positive);
        checked += 1;
        if ok {
            return Ok(certified(lambda, positive, value, checked));
        }
        note(value);
    }

    let mut combos = Combinations::new(n, k);
    let mut exhausted = false;
    while checked < check.subset_cap {
        let room = (check.subset_cap - checked).min(SUBSET_CHUNK);
        let chunk: Vec<Vec<usize>> = combos.by_ref().take(room).collect();
        if chunk.is_empty() {
            exhausted = true;
            break;
        }
        let results: Vec<(f64, bool)> = chunk.par_iter().map(|s| eval(s)).collect();
        checked += chunk.len();
        if let Some(pos) = results.iter().position(|r| r.1) {
            let value = results[pos].0;
            return Ok(certified(lambda, chunk[pos].clone(), value, checked));
        }
        results.iter().for_each(|r| note(r.0));
    }
    if !exhausted && combos.peek_done() {
        exhausted = true;
    }

    if exhausted {
        return Ok(InvertibilityReport {
            invertible: false,
            certificate: None,
            schur_value: largest,
            partition: lambda.parts,
            subsets_checked: checked,
            decided_by: Verdict::Exhaustive,
        });
    }

    let b0 = design_matrix(basis, grid).into_values();
    let invertible = numerical_rank(&b0, check.tol) == k;
    Ok(InvertibilityReport {
        invertible,
        certificate: None,
        schur_value: None,
        partition: lambda.parts,
        subsets_checked: checked,
        decided_by: Verdict::SvdRank,
    })
}

fn certified(lambda: Partition, subset: Vec<usize>, value: f64, checked: usize) -> InvertibilityReport {
    InvertibilityReport {
        invertible: true,
        certificate: Some(subset),
        schur_value: Some(value),
        partition: lambda.parts,
        subsets_checked: checked,
        decided_by: Verdict::SchurCertificate,
    }
}

/// Schur value on distinct points, preferring the bialternant quotient and
/// keeping the raw quotient when tableau enumeration would be too large.
fn subset_schur(lambda: &Partition, basis: &ExponentSet, pts: &[f64]) -> f64 {
    match schur_bialternant(lambda, pts) {
        Ok(v) => v.value,
        Err(_) => {
            let (num, den) = quotient_parts(basis, pts);
            num / den
        }
    }
}

/// Count of singular values above `tol · σ_max`.
pub(crate) fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let sv = m.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * max).count()
}

/// Lexicographic `k`-subsets of `0..n`.
struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            current: (k <= n).then(|| (0..k).collect()),
        }
    }

    fn peek_done(&self) -> bool {
        self.current.is_none()
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.take()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}
