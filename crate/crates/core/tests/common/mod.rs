//! Independent oracles and random instance generators shared by the
//! integration suites. Nothing here calls the solver paths it checks.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use protofit::{ExponentSet, Partition, SignalSet, TimeGrid};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

/// Distinct points drawn uniformly from `[lo, hi]`.
pub fn distinct_points<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut pts: Vec<f64> = Vec::with_capacity(n);
    while pts.len() < n {
        let t = rng.random_range(lo..=hi);
        if !pts.contains(&t) {
            pts.push(t);
        }
    }
    pts
}

/// Distinct points from the lattice `{-2, -1.75, …, 2}`.
pub fn lattice_points<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut lattice: Vec<f64> = (-8..=8).map(|i| i as f64 * 0.25).collect();
    lattice.shuffle(rng);
    lattice.truncate(n);
    lattice
}

/// `±t` pairs from the lattice, plus a zero when `n` is odd.
pub fn symmetric_points<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut mags: Vec<f64> = (1..=8).map(|i| i as f64 * 0.25).collect();
    mags.shuffle(rng);
    let mut pts = Vec::with_capacity(n);
    for m in mags.into_iter().take(n / 2) {
        pts.push(m);
        pts.push(-m);
    }
    if n % 2 == 1 {
        pts.push(0.0);
    }
    pts.shuffle(rng);
    pts
}

pub fn random_basis<R: Rng>(rng: &mut R, k: usize, max_exp: u32) -> ExponentSet {
    let mut pool: Vec<u32> = (0..=max_exp).collect();
    pool.shuffle(rng);
    ExponentSet::new(pool.into_iter().take(k)).unwrap()
}

/// Every partition of weight at most `max_weight` with at most `k` nonzero
/// parts, padded with zeros to length `k`.
pub fn partitions_up_to(k: usize, max_weight: u32) -> Vec<Partition> {
    fn rec(k: usize, left: u32, cap: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for p in (0..=cap.min(left)).rev() {
            cur.push(p);
            rec(k, left - p, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, max_weight, max_weight, &mut Vec::new(), &mut out);
    out.into_iter().map(|p| Partition::new(p).unwrap()).collect()
}

pub fn random_partition<R: Rng>(rng: &mut R, k: usize, max_part: u32) -> Partition {
    let mut parts: Vec<u32> = (0..k).map(|_| rng.random_range(0..=max_part)).collect();
    parts.sort_unstable_by(|a, b| b.cmp(a));
    Partition::new(parts).unwrap()
}

pub fn random_signals<R: Rng>(rng: &mut R, grid: &TimeGrid, l: usize) -> SignalSet {
    let cols: Vec<Vec<f64>> = (0..l)
        .map(|_| (0..grid.len()).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    SignalSet::from_columns(grid.clone(), &cols).unwrap()
}

/// `B₀` built entry by entry with `powi`, independent of the crate.
pub fn oracle_design(exps: &[u32], t: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(t.len(), exps.len(), |i, j| t[i].powi(exps[j] as i32))
}

/// Least-squares solution of the stacked system with `l` copies of `B₀`
/// and all signals concatenated, solved by SVD.
pub fn stacked_solution(exps: &[u32], signals: &SignalSet) -> Vec<f64> {
    let t = signals.grid().points();
    let n = t.len();
    let l = signals.num_signals();
    let b0 = oracle_design(exps, t);
    let b = DMatrix::from_fn(n * l, exps.len(), |r, c| b0[(r % n, c)]);
    let y = DVector::from_iterator(n * l, (0..l).flat_map(|j| signals.signal(j).iter().copied()));
    let svd = b.svd(true, true);
    svd.solve(&y, 1e-14).unwrap().iter().copied().collect()
}

/// `‖Y − B X‖²` over the stacked system.
pub fn stacked_objective(exps: &[u32], signals: &SignalSet, x: &[f64]) -> f64 {
    let t = signals.grid().points();
    let mut total = 0.0;
    for j in 0..signals.num_signals() {
        for (i, &ti) in t.iter().enumerate() {
            let p: f64 = exps.iter().zip(x).map(|(&m, &c)| c * ti.powi(m as i32)).sum();
            let r = signals.signal(j)[i] - p;
            total += r * r;
        }
    }
    total
}

/// Rank by counting singular values above `tol · σ_max`.
pub fn svd_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * max).count()
}

/// Minimum-norm least-squares solution as the limit of ridge solutions,
/// `(BᵀB + μI)⁻¹ Bᵀ c` with small `μ`, solved by LU. The bias is of order
/// `μ / σ²` on the retained directions; rounding noise in the null
/// directions is amplified by `1 / μ`, so `μ` cannot go much lower.
pub fn ridge_limit_solution(b0: &DMatrix<f64>, c: &[f64]) -> Vec<f64> {
    let gram = b0.tr_mul(b0);
    let mu = 1e-8 * gram.norm();
    let k = gram.nrows();
    let reg = gram + DMatrix::identity(k, k) * mu;
    let rhs = b0.tr_mul(&DVector::from_column_slice(c));
    reg.lu().solve(&rhs).unwrap().iter().copied().collect()
}

/// Mean of columns by straightforward per-component summation.
pub fn mean_columns(cols: &[&[f64]]) -> Vec<f64> {
    let n = cols[0].len();
    (0..n)
        .map(|i| cols.iter().map(|c| c[i]).sum::<f64>() / cols.len() as f64)
        .collect()
}
