//! k-means over curves with least-squares prototypes as cluster centers.
//!
//! Every cluster shares the grid and the basis, so one [`SolverHandle`]
//! serves all of them and refitting a cluster is a single solve against its
//! centroid.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::ExponentSet;
use crate::error::{Error, Result};
use crate::lsq::{
    precompute_solver, solve_with_handle, squared_distance, update_centroid_with, Centroid, Prototype, SignalSet, SolverHandle,
};
use crate::schur::DEFAULT_TOL;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub max_iter: usize,
    pub seed: u64,
    /// Stop once an iteration improves the objective by less than this.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            seed: 0,
            tol: 1e-9,
        }
    }
}

/// Clustering of a signal set. Cluster indices are zero-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    pub assignments: Vec<usize>,
    pub prototypes: Vec<Prototype>,
    pub centroids: Vec<Centroid>,
    /// Per-cluster sum of squared residuals.
    pub cluster_objectives: Vec<f64>,
    pub objective: f64,
    pub iteration: usize,
    /// Objective after each refit, oldest first.
    pub history: Vec<f64>,
    /// Signals whose cluster changed during the run that produced this state.
    pub reassignments: usize,
}

impl ClusterState {
    pub fn num_clusters(&self) -> usize {
        self.prototypes.len()
    }

    /// Members of each cluster in increasing signal order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        members_of(&self.assignments, self.num_clusters())
    }

    /// Centroids, prototypes and objectives recomputed from scratch for a
    /// fixed assignment.
    pub fn rebuild(signals: &SignalSet, handle: &SolverHandle, assignments: Vec<usize>, k: usize) -> Result<Self> {
        if assignments.len() != signals.num_signals() {
            return Err(Error::SizeMismatch {
                expected: signals.num_signals(),
                actual: assignments.len(),
            });
        }
        if let Some(&bad) = assignments.iter().find(|&&a| a >= k) {
            return Err(Error::Input(format!("cluster index {bad} out of range for {k} clusters")));
        }
        let members = members_of(&assignments, k);
        if let Some(empty) = members.iter().position(Vec::is_empty) {
            return Err(Error::ClusterEmptied(empty));
        }
        let fits: Vec<(Centroid, Prototype, f64)> = members
            .par_iter()
            .map(|m| {
                let c = centroid_of(signals, m);
                let p = solve_with_handle(handle, &c)?;
                let obj = objective_of(signals, &p, m);
                Ok((c, p, obj))
            })
            .collect::<Result<_>>()?;
        let mut state = ClusterState {
            assignments,
            prototypes: Vec::with_capacity(k),
            centroids: Vec::with_capacity(k),
            cluster_objectives: Vec::with_capacity(k),
            objective: 0.0,
            iteration: 0,
            history: Vec::new(),
            reassignments: 0,
        };
        for (c, p, obj) in fits {
            state.centroids.push(c);
            state.prototypes.push(p);
            state.cluster_objectives.push(obj);
        }
        state.objective = state.cluster_objectives.iter().sum();
        Ok(state)
    }
}

fn members_of(assignments: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); k];
    for (j, &a) in assignments.iter().enumerate() {
        members[a].push(j);
    }
    members
}

/// Same arithmetic as [`crate::lsq::centroid`] on the selected columns.
fn centroid_of(signals: &SignalSet, members: &[usize]) -> Centroid {
    let mut values = vec![0.0; signals.num_points()];
    for &j in members {
        values.iter_mut().zip(signals.signal(j)).for_each(|(v, x)| *v += x);
    }
    values.iter_mut().for_each(|v| *v /= members.len() as f64);
    Centroid {
        values,
        weight: members.len(),
    }
}

fn objective_of(signals: &SignalSet, p: &Prototype, members: &[usize]) -> f64 {
    let fitted = p.sample(signals.grid());
    members.iter().map(|&j| squared_distance(signals.signal(j), &fitted)).sum()
}

/// Nearest prototype for every signal by squared residual; ties go to the
/// lowest cluster index.
pub fn assign_signals(signals: &SignalSet, prototypes: &[Prototype]) -> Vec<usize> {
    nearest(signals, prototypes).into_iter().map(|(c, _)| c).collect()
}

fn nearest(signals: &SignalSet, prototypes: &[Prototype]) -> Vec<(usize, f64)> {
    let sampled: Vec<Vec<f64>> = prototypes.iter().map(|p| p.sample(signals.grid())).collect();
    (0..signals.num_signals())
        .into_par_iter()
        .map(|j| {
            let s = signals.signal(j);
            let mut best = (0, f64::INFINITY);
            for (c, f) in sampled.iter().enumerate() {
                let d = squared_distance(s, f);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best
        })
        .collect()
}

/// Moves the worst-fitting signal of a multi-member cluster into each empty
/// cluster.
fn repair_empty(assign: &mut [(usize, f64)], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        assign.iter().for_each(|(c, _)| counts[*c] += 1);
        let Some(empty) = counts.iter().position(|&n| n == 0) else {
            return;
        };
        let worst = assign
            .iter()
            .enumerate()
            .filter(|(_, (c, _))| counts[*c] > 1)
            .fold(None::<(usize, f64)>, |best, (j, &(_, d))| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((j, d)),
            })
            .map(|(j, _)| j)
            .expect("k <= l leaves a cluster with two members");
        assign[worst] = (empty, 0.0);
    }
}

/// Runs k-means from `k` distinct signals picked by `config.seed`.
///
/// The Gram matrix is factored once for the shared grid. The loop alternates
/// assignment and refitting until no signal changes cluster, an iteration
/// improves the objective by less than `config.tol`, or `config.max_iter`
/// refits have run.
pub fn kmeans_curves(signals: &SignalSet, basis: &ExponentSet, k: usize, config: &KMeansConfig) -> Result<ClusterState> {
    let l = signals.num_signals();
    if k == 0 || k > l {
        return Err(Error::TooManyClusters { clusters: k, signals: l });
    }
    let handle = precompute_solver(basis, signals.grid(), DEFAULT_TOL)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let seeds = rand::seq::index::sample(&mut rng, l, k).into_vec();
    let prototypes = seeds
        .iter()
        .map(|&j| {
            let c = Centroid {
                values: signals.signal(j).to_vec(),
                weight: 1,
            };
            solve_with_handle(&handle, &c)
        })
        .collect::<Result<Vec<_>>>()?;
    iterate(signals, &handle, prototypes, None, Vec::new(), config)
}

/// Continues k-means from an existing state.
pub fn kmeans_resume(
    signals: &SignalSet,
    handle: &SolverHandle,
    state: &ClusterState,
    config: &KMeansConfig,
) -> Result<ClusterState> {
    iterate(
        signals,
        handle,
        state.prototypes.clone(),
        Some(state.assignments.clone()),
        state.history.clone(),
        config,
    )
}

fn iterate(
    signals: &SignalSet,
    handle: &SolverHandle,
    mut prototypes: Vec<Prototype>,
    mut previous: Option<Vec<usize>>,
    mut history: Vec<f64>,
    config: &KMeansConfig,
) -> Result<ClusterState> {
    let k = prototypes.len();
    let mut state: Option<ClusterState> = None;
    let mut reassignments = 0;
    let mut iteration = 0;
    loop {
        let mut near = nearest(signals, &prototypes);
        repair_empty(&mut near, k);
        let assignments: Vec<usize> = near.into_iter().map(|(c, _)| c).collect();
        if let Some(prev) = &previous {
            let changed = prev.iter().zip(&assignments).filter(|(a, b)| a != b).count();
            if changed == 0 {
                break;
            }
            reassignments += changed;
        }
        let next = ClusterState::rebuild(signals, handle, assignments.clone(), k)?;
        iteration += 1;
        let improvement = history.last().map(|last| last - next.objective);
        history.push(next.objective);
        prototypes = next.prototypes.clone();
        previous = Some(assignments);
        state = Some(next);
        if improvement.is_some_and(|d| d < config.tol) || iteration >= config.max_iter {
            break;
        }
    }
    let mut state = match state {
        Some(s) => s,
        // already converged on entry
        None => ClusterState::rebuild(signals, handle, previous.expect("resumed state"), k)?,
    };
    state.iteration = iteration;
    state.history = history;
    state.reassignments = reassignments;
    Ok(state)
}

/// A solver handle per cluster. With a shared grid and basis every entry is
/// the same handle.
#[derive(Debug, Clone)]
pub struct HandleBank {
    handles: Vec<Arc<SolverHandle>>,
}

impl HandleBank {
    pub fn shared(handle: SolverHandle, k: usize) -> Self {
        let h = Arc::new(handle);
        Self { handles: vec![h; k] }
    }

    pub fn new(handles: Vec<SolverHandle>) -> Self {
        Self {
            handles: handles.into_iter().map(Arc::new).collect(),
        }
    }

    pub fn get(&self, cluster: usize) -> &SolverHandle {
        &self.handles[cluster]
    }

    pub fn len(&self) -> usize {
        self.handles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.handles.is_empty()
    }
}

/// Moves `signal` from cluster `from` to cluster `to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Move {
    pub signal: usize,
    pub from: usize,
    pub to: usize,
}

/// Applies membership changes without refactoring anything: each affected
/// cluster's centroid is updated in place and its prototype re-solved
/// through the handle bank. Moves are applied in order; a signal that ends
/// where it started leaves its clusters untouched.
pub fn apply_membership_moves(
    state: &ClusterState,
    signals: &SignalSet,
    moves: &[Move],
    bank: &HandleBank,
) -> Result<ClusterState> {
    let k = state.num_clusters();
    let l = signals.num_signals();
    if state.assignments.len() != l {
        return Err(Error::SizeMismatch {
            expected: l,
            actual: state.assignments.len(),
        });
    }
    if bank.len() != k {
        return Err(Error::SizeMismatch {
            expected: k,
            actual: bank.len(),
        });
    }

    let mut assignments = state.assignments.clone();
    let mut counts = vec![0usize; k];
    assignments.iter().for_each(|&a| counts[a] += 1);
    for (i, m) in moves.iter().enumerate() {
        if m.signal >= l || m.from >= k || m.to >= k {
            return Err(Error::InvalidMove(format!(
                "move {i} references an unknown signal or cluster"
            )));
        }
        if m.from == m.to {
            return Err(Error::InvalidMove(format!("move {i} has identical source and target")));
        }
        if assignments[m.signal] != m.from {
            return Err(Error::InvalidMove(format!(
                "move {i}: signal {} is in cluster {}, not {}",
                m.signal, assignments[m.signal], m.from
            )));
        }
        counts[m.from] -= 1;
        if counts[m.from] == 0 {
            return Err(Error::ClusterEmptied(m.from));
        }
        counts[m.to] += 1;
        assignments[m.signal] = m.to;
    }

    let mut added = vec![Vec::new(); k];
    let mut removed = vec![Vec::new(); k];
    for (j, (&before, &after)) in state.assignments.iter().zip(&assignments).enumerate() {
        if before != after {
            removed[before].push(j);
            added[after].push(j);
        }
    }

    let mut next = state.clone();
    next.assignments = assignments;
    let members = next.members();
    for c in 0..k {
        if added[c].is_empty() && removed[c].is_empty() {
            continue;
        }
        let centroid = update_centroid_with(
            &state.centroids[c],
            added[c].iter().map(|&j| signals.signal(j)),
            removed[c].iter().map(|&j| signals.signal(j)),
        )?;
        let prototype = solve_with_handle(bank.get(c), &centroid)?;
        next.cluster_objectives[c] = objective_of(signals, &prototype, &members[c]);
        next.centroids[c] = centroid;
        next.prototypes[c] = prototype;
    }
    next.objective = next.cluster_objectives.iter().sum();
    Ok(next)
}
