//! Peer-to-peer overlay graphs.

use crate::config::{ConfigError, TopologyConfig};
use rand::Rng;
use serde::Serialize;
use std::collections::{BTreeSet, VecDeque};

/// Attempts at drawing a connected Watts-Strogatz graph before giving up.
const MAX_ATTEMPTS: usize = 100;

/// Undirected overlay; every channel is stored in both adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Topology {
    pub kind: TopologyKind,
    adjacency: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TopologyKind {
    Complete,
    WattsStrogatz { neighbours: usize, rewiring_prob: f64 },
}

impl Eq for TopologyKind {}

impl Topology {
    pub fn build<R: Rng + ?Sized>(cfg: &TopologyConfig, n: usize, rng: &mut R) -> Result<Self, ConfigError> {
        match *cfg {
            TopologyConfig::Complete => Ok(Self::complete(n)),
            TopologyConfig::WattsStrogatz { neighbours, rewiring } => {
                for _ in 0..MAX_ATTEMPTS {
                    let t = Self::watts_strogatz(n, neighbours, rewiring, rng);
                    if t.is_connected() {
                        return Ok(t);
                    }
                }
                Err(ConfigError::Invalid(format!(
                    "no connected Watts-Strogatz graph (n = {n}, k = {neighbours}, p = {rewiring}) after {MAX_ATTEMPTS} draws"
                )))
            }
        }
    }

    pub fn complete(n: usize) -> Self {
        let adjacency = (0..n as u32).map(|i| (0..n as u32).filter(|&j| j != i).collect()).collect();
        Self { kind: TopologyKind::Complete, adjacency }
    }

    /// Ring lattice with `k/2` neighbours on each side, then every lattice
    /// edge `(i, i+j)` is rewired with probability `p` to a uniformly chosen
    /// endpoint that avoids self-loops and duplicate edges.
    pub fn watts_strogatz<R: Rng + ?Sized>(n: usize, k: usize, p: f64, rng: &mut R) -> Self {
        let mut adj: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); n];
        for i in 0..n {
            for j in 1..=k / 2 {
                let t = (i + j) % n;
                adj[i].insert(t as u32);
                adj[t].insert(i as u32);
            }
        }
        for j in 1..=k / 2 {
            for i in 0..n {
                let t = ((i + j) % n) as u32;
                if !adj[i].contains(&t) || !rng.random_bool(p) {
                    continue;
                }
                if adj[i].len() >= n - 1 {
                    continue;
                }
                let new = loop {
                    let c = rng.random_range(0..n as u32);
                    if c as usize != i && !adj[i].contains(&c) {
                        break c;
                    }
                };
                adj[i].remove(&t);
                adj[t as usize].remove(&(i as u32));
                adj[i].insert(new);
                adj[new as usize].insert(i as u32);
            }
        }
        Self {
            kind: TopologyKind::WattsStrogatz { neighbours: k, rewiring_prob: p },
            adjacency: adj.into_iter().map(|s| s.into_iter().collect()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbours(&self, i: usize) -> &[u32] {
        &self.adjacency[i]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(|a| a.len()).sum::<usize>() / 2
    }

    pub fn is_connected(&self) -> bool {
        self.component_of(0, |_| true).len() == self.len()
    }

    /// Nodes reachable from `start` through nodes accepted by `keep`.
    pub fn component_of(&self, start: usize, keep: impl Fn(usize) -> bool) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        if self.is_empty() || !keep(start) {
            return seen;
        }
        let mut queue = VecDeque::from([start]);
        seen.insert(start);
        while let Some(v) = queue.pop_front() {
            for &w in &self.adjacency[v] {
                let w = w as usize;
                if keep(w) && seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    /// Hop distances from `start` (`usize::MAX` when unreachable).
    pub fn hop_distances(&self, start: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.len()];
        dist[start] = 0;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &w in &self.adjacency[v] {
                if dist[w as usize] == usize::MAX {
                    dist[w as usize] = dist[v] + 1;
                    queue.push_back(w as usize);
                }
            }
        }
        dist
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn symmetric(t: &Topology) -> bool {
        (0..t.len()).all(|i| t.neighbours(i).iter().all(|&j| t.neighbours(j as usize).contains(&(i as u32))))
    }

    #[test]
    fn complete_graph() {
        let t = Topology::complete(5);
        assert_eq!(t.edge_count(), 10);
        assert!(symmetric(&t));
        assert!(t.is_connected());
    }

    #[test]
    fn ring_lattice_without_rewiring() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = Topology::watts_strogatz(10, 4, 0.0, &mut rng);
        assert!((0..10).all(|i| t.neighbours(i).len() == 4));
        assert_eq!(t.neighbours(0), &[1, 2, 8, 9]);
    }

    #[test]
    fn rewiring_preserves_edge_count_and_symmetry() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = Topology::build(&TopologyConfig::WattsStrogatz { neighbours: 8, rewiring: 1.0 }, 100, &mut rng).unwrap();
            assert_eq!(t.edge_count(), 400);
            assert!(symmetric(&t));
            assert!(t.is_connected());
            assert!((0..100).all(|i| !t.neighbours(i).contains(&(i as u32))));
        }
    }

    #[test]
    fn same_seed_same_graph() {
        let cfg = TopologyConfig::WattsStrogatz { neighbours: 8, rewiring: 0.5 };
        let a = Topology::build(&cfg, 50, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = Topology::build(&cfg, 50, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
    }
}
