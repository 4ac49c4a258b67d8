//! JSON snapshot of a clustering, enough to resume with incremental moves.

use serde::{Deserialize, Serialize};

use crate::basis::{ExponentSet, TimeGrid};
use crate::cluster::ClusterState;
use crate::error::{Error, Result};
use crate::lsq::{gram_fingerprint, Centroid, Prototype};

pub const STATE_FORMAT: &str = "protofit-state/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub weight: usize,
    pub centroid: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub format: String,
    pub basis: ExponentSet,
    pub grid_fingerprint: String,
    pub num_points: usize,
    pub assignments: Vec<usize>,
    pub clusters: Vec<ClusterRecord>,
    pub objective: f64,
    pub iteration: usize,
    pub history: Vec<f64>,
}

impl StateFile {
    pub fn from_state(state: &ClusterState, basis: &ExponentSet, grid: &TimeGrid) -> Self {
        let clusters = state
            .centroids
            .iter()
            .zip(&state.prototypes)
            .zip(&state.cluster_objectives)
            .map(|((c, p), &objective)| ClusterRecord {
                weight: c.weight,
                centroid: c.values.clone(),
                coefficients: p.coefficients().to_vec(),
                objective,
            })
            .collect();
        Self {
            format: STATE_FORMAT.to_owned(),
            basis: basis.clone(),
            grid_fingerprint: gram_fingerprint(basis, grid),
            num_points: grid.len(),
            assignments: state.assignments.clone(),
            clusters,
            objective: state.objective,
            iteration: state.iteration,
            history: state.history.clone(),
        }
    }

    /// Rebuilds the in-memory state, checking it belongs to `grid`.
    pub fn into_state(self, grid: &TimeGrid) -> Result<ClusterState> {
        if self.format != STATE_FORMAT {
            return Err(Error::Input(format!("unsupported state format '{}'", self.format)));
        }
        if self.grid_fingerprint != gram_fingerprint(&self.basis, grid) {
            return Err(Error::HandleMismatch);
        }
        let k = self.clusters.len();
        if let Some(&bad) = self.assignments.iter().find(|&&a| a >= k) {
            return Err(Error::Input(format!("state assigns a signal to unknown cluster {bad}")));
        }
        let mut state = ClusterState {
            assignments: self.assignments,
            prototypes: Vec::with_capacity(k),
            centroids: Vec::with_capacity(k),
            cluster_objectives: Vec::with_capacity(k),
            objective: self.objective,
            iteration: self.iteration,
            history: self.history,
            reassignments: 0,
        };
        for c in self.clusters {
            if c.centroid.len() != self.num_points {
                return Err(Error::SizeMismatch {
                    expected: self.num_points,
                    actual: c.centroid.len(),
                });
            }
            state.prototypes.push(Prototype::new(self.basis.clone(), c.coefficients)?);
            state.centroids.push(Centroid {
                values: c.centroid,
                weight: c.weight,
            });
            state.cluster_objectives.push(c.objective);
        }
        Ok(state)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("state serializes");
        s.push('\n');
        s
    }
}
