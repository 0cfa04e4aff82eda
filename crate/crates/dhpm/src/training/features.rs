//! Candidate-function maps feeding the dynamics network.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::net::FeatureMap;

/// The inputs offered to the dynamics network. 2-D systems pass the state
/// estimate straight through; the Lorenz setup appends the pairwise products
/// `(x, y, z) -> (x, y, z, xy, yz, zx)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "snake_case")]
pub enum CandidateMap {
    Identity { dim: usize },
    PairProducts,
}

impl CandidateMap {
    pub fn identity(dim: usize) -> Self {
        CandidateMap::Identity { dim }
    }

    /// The 3-state map with pairwise products appended.
    pub fn pair_products() -> Self {
        CandidateMap::PairProducts
    }
}

impl FeatureMap for CandidateMap {
    fn in_dim(&self) -> usize {
        match self {
            CandidateMap::Identity { dim } => *dim,
            CandidateMap::PairProducts => 3,
        }
    }

    fn out_dim(&self) -> usize {
        match self {
            CandidateMap::Identity { dim } => *dim,
            CandidateMap::PairProducts => 6,
        }
    }

    fn eval(&self, states: ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(states.ncols(), self.in_dim(), "state width mismatch");
        match self {
            CandidateMap::Identity { .. } => states.to_owned(),
            CandidateMap::PairProducts => {
                let mut out = Array2::zeros((states.nrows(), 6));
                for (row, mut target) in states.rows().into_iter().zip(out.rows_mut()) {
                    let (x, y, z) = (row[0], row[1], row[2]);
                    target[0] = x;
                    target[1] = y;
                    target[2] = z;
                    target[3] = x * y;
                    target[4] = y * z;
                    target[5] = z * x;
                }
                out
            }
        }
    }

    fn backprop(
        &self,
        states: ArrayView2<'_, f64>,
        grad_features: ArrayView2<'_, f64>,
    ) -> Array2<f64> {
        assert_eq!(grad_features.ncols(), self.out_dim(), "feature width mismatch");
        match self {
            CandidateMap::Identity { .. } => grad_features.to_owned(),
            CandidateMap::PairProducts => {
                let mut out = Array2::zeros((states.nrows(), 3));
                for ((row, g), mut target) in states
                    .rows()
                    .into_iter()
                    .zip(grad_features.rows())
                    .zip(out.rows_mut())
                {
                    let (x, y, z) = (row[0], row[1], row[2]);
                    target[0] = g[0] + g[3] * y + g[5] * z;
                    target[1] = g[1] + g[3] * x + g[4] * z;
                    target[2] = g[2] + g[4] * y + g[5] * x;
                }
                out
            }
        }
    }
}
