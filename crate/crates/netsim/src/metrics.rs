//! Run reports and their file formats.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Quantiles of a sample where some values may be infinite (censored).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Quantiles {
    pub samples: usize,
    /// Samples that never finished (counted as +∞).
    pub censored: usize,
    pub p10: Option<f64>,
    pub median: Option<f64>,
    pub p90: Option<f64>,
}

impl Quantiles {
    /// Nearest-rank quantiles; a quantile landing on a censored sample is `None`.
    pub fn from_samples(mut xs: Vec<f64>) -> Self {
        xs.sort_by(f64::total_cmp);
        let finite = |v: f64| v.is_finite().then_some(v);
        let at = |p: f64| -> Option<f64> {
            if xs.is_empty() {
                return None;
            }
            let i = ((xs.len() - 1) as f64 * p).round() as usize;
            finite(xs[i])
        };
        Self {
            samples: xs.len(),
            censored: xs.iter().filter(|v| !v.is_finite()).count(),
            p10: at(0.1),
            median: at(0.5),
            p90: at(0.9),
        }
    }
}

/// Mean simulated Witness Weight against the analytic growth bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WwGrowthPoint {
    pub t: f64,
    pub simulated: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictOutcome {
    /// Labels (`c<index>`) of the transactions in the conflict set.
    pub members: Vec<String>,
    /// Time at which the set first contained two transactions.
    pub created: f64,
    /// Time until some member was confirmed by every honest node.
    pub consensus_time: Option<f64>,
    pub winner: Option<String>,
}

/// Two honest nodes confirmed conflicting transactions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyEvent {
    pub a: String,
    pub b: String,
    pub node_a: u32,
    pub node_b: u32,
    /// When the second of the two confirmations happened.
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpinionChange {
    pub t: f64,
    pub node: u32,
    pub reality: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub n_star: Option<usize>,
    pub feasible: Vec<usize>,
    pub x_confirmed_at: Option<f64>,
    pub switched_at: Option<f64>,
    pub released_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetastabilityReport {
    /// Preference of each honest node (`x`/`y`) at each issuance round.
    pub preferences: Vec<Vec<char>>,
    /// Rounds (≥ 1) in which every node held the opposite preference of the
    /// previous round.
    pub inverted_rounds: usize,
    /// Consecutive inverted rounds starting at round 1.
    pub sustained_rounds: usize,
    /// Whether every node had inverted its opinion at the first re-issuance.
    pub exact_inversion_at_first_round: bool,
    /// Whether all nodes shared one preference in the last round.
    pub agreed_at_end: bool,
    /// Side changes of the minority voter (second attack).
    pub adversary_switches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct AdversaryReport {
    pub strategy: String,
    pub spends: usize,
    pub blocks: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metastability: Option<MetastabilityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct NetworkCounters {
    pub packages: u64,
    pub duplicates: u64,
    pub requests: u64,
    pub unanswered_requests: u64,
    pub held: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub tip_pool: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub nodes: usize,
    pub horizon: f64,
    pub blocks: usize,
    pub honest_blocks: usize,
    pub contested_transactions: usize,
    /// Block confirmation times seen by the observers.
    pub confirmation: Quantiles,
    /// Time-averaged tip pool over honest nodes after warm-up.
    pub tip_pool_mean: f64,
    pub ww_growth: Vec<WwGrowthPoint>,
    pub conflicts: Vec<ConflictOutcome>,
    /// Every conflict set reached consensus (false when there were none).
    pub consensus: bool,
    pub broken_safety: Vec<SafetyEvent>,
    pub orphaned_blocks: usize,
    pub network: NetworkCounters,
    pub adversary: AdversaryReport,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub opinions: Vec<OpinionChange>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub samples: Vec<Sample>,
}

impl RunReport {
    pub fn write_json(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(path, text)
    }

    /// One row per tip-pool sample.
    pub fn write_samples_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for s in &self.samples {
            w.serialize(s)?;
        }
        w.flush()
    }
}

/// Writes one JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for it in items {
        serde_json::to_writer(&mut f, it).map_err(std::io::Error::other)?;
        f.write_all(b"\n")?;
    }
    f.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_handle_censoring() {
        let q = Quantiles::from_samples(vec![3.0, 1.0, 2.0, f64::INFINITY, 4.0]);
        assert_eq!(q.samples, 5);
        assert_eq!(q.censored, 1);
        assert_eq!(q.median, Some(3.0));
        assert_eq!(q.p10, Some(1.0));
        assert_eq!(q.p90, None);
        assert_eq!(Quantiles::from_samples(vec![]).median, None);
    }
}
