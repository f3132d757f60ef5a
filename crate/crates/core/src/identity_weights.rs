//! Node identities and the normalised weight function.
//!
//! Weights are fixed for the lifetime of a run and sum to one. The same table
//! is used both for voting mass (Witness and Approval Weight) and for the
//! per-node issuance rates in the simulator.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Tolerance on the normalisation `Σ w(i) = 1`.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Index of a node in `[0, N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum WeightError {
    #[error("weight table must contain at least one node")]
    Empty,
    #[error("all weights are zero")]
    AllZeroWeights,
    #[error("node {index} has negative or non-finite weight {value}")]
    NegativeWeight { index: usize, value: f64 },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("zipf parameter must be finite and non-negative, got {0}")]
    InvalidZipfParameter(f64),
}

/// Normalised, immutable per-node weights.
///
/// Serialises as a JSON array of weights; deserialisation accepts any
/// non-negative array and normalises it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightTable {
    weights: Vec<f64>,
}

impl WeightTable {
    /// Normalises `raw` by its sum. Node `i` maps to entry `i`.
    pub fn new(raw: &[f64]) -> Result<Self, WeightError> {
        if raw.is_empty() {
            return Err(WeightError::Empty);
        }
        for (index, &value) in raw.iter().enumerate() {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(WeightError::NegativeWeight { index, value });
            }
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(WeightError::AllZeroWeights);
        }
        let weights = raw.iter().map(|w| w / total).collect();
        Ok(Self { weights })
    }

    /// `N` nodes of equal weight.
    pub fn uniform(n: usize) -> Result<Self, WeightError> {
        Self::new(&vec![1.0; n])
    }

    /// Zipf law: the node of rank `r` (rank = index + 1) gets weight
    /// `r^(-s) / Σ_j j^(-s)`.
    pub fn zipf(n_nodes: usize, s: f64) -> Result<Self, WeightError> {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(WeightError::InvalidZipfParameter(s));
        }
        let raw: Vec<f64> = (1..=n_nodes).map(|r| (r as f64).powf(-s)).collect();
        Self::new(&raw)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.weights.len() as u32).map(NodeId)
    }

    pub fn weight(&self, node: NodeId) -> Result<f64, WeightError> {
        self.weights
            .get(node.index())
            .copied()
            .ok_or(WeightError::UnknownNode(node))
    }

    /// Weight of a node known to exist. Panics otherwise.
    #[inline]
    pub fn w(&self, node: NodeId) -> f64 {
        self.weights[node.index()]
    }

    /// Sum of member weights, accumulated in ascending `NodeId` order so the
    /// result does not depend on the order the caller collected the set in.
    pub fn weight_of_set<I>(&self, nodes: I) -> Result<f64, WeightError>
    where
        I: IntoIterator<Item = NodeId>,
    {
        let mut ids: Vec<NodeId> = nodes.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        let mut sum = 0.0;
        for id in ids {
            sum += self.weight(id)?;
        }
        Ok(sum)
    }

    /// Total weight; equals one up to [`NORMALIZATION_TOLERANCE`].
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Free-function form of [`WeightTable::new`].
pub fn new_weight_table(raw: &[f64]) -> Result<WeightTable, WeightError> {
    WeightTable::new(raw)
}

/// Free-function form of [`WeightTable::zipf`].
pub fn zipf_weights(n_nodes: usize, s: f64) -> Result<WeightTable, WeightError> {
    WeightTable::zipf(n_nodes, s)
}

/// Free-function form of [`WeightTable::weight_of_set`].
pub fn weight_of_set<I>(table: &WeightTable, nodes: I) -> Result<f64, WeightError>
where
    I: IntoIterator<Item = NodeId>,
{
    table.weight_of_set(nodes)
}

impl TryFrom<Vec<f64>> for WeightTable {
    type Error = WeightError;
    fn try_from(raw: Vec<f64>) -> Result<Self, Self::Error> {
        WeightTable::new(&raw)
    }
}

impl From<WeightTable> for Vec<f64> {
    fn from(t: WeightTable) -> Self {
        t.weights
    }
}
