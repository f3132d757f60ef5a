//! Adversary strategies and the fixtures that seed conflicts.
//!
//! Adversary identities (and the weightless dealer) see every block the
//! moment it is created; they answer every solidification request.

use crate::arena::{Arena, BlockIx, TxIx};
use crate::config::{AdversaryConfig, ConfigError, MinorityTrigger, SimConfig};
use crate::engine::{RoutePolicy, Sim, Targets};
use crate::metrics::{AdversaryReport, MetastabilityReport, PartitionReport};
use otv_core::tangle_core::Reference;
use otv_core::utxo_ledger::OutputId;
use serde::Serialize;
use std::collections::BTreeSet;

/// Group sizes for the partition-and-switch attack.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionPlan {
    /// Chosen size of group X.
    pub n_star: usize,
    /// Every integer size satisfying both inequalities.
    pub feasible: Vec<usize>,
    /// Group X must exceed this many nodes for its votes plus `q` to pass θ.
    pub lower: f64,
    /// Group X must stay below this many nodes for Y plus `q` to outweigh it.
    pub upper: f64,
}

/// Sizes `N*` of group X with `(1−q)·N*/N_h + q > θ` (X confirms x̄ with the
/// adversary's help) and `(1−q)·N*/N_h < (1−q)·(N_h−N*)/N_h + q` (Y with the
/// adversary outweighs X afterwards). Picks the size with the largest
/// distance to both bounds.
pub fn safety_partition(q: f64, theta: f64, n_h: usize) -> Result<PartitionPlan, ConfigError> {
    let n = n_h as f64;
    let lower = (theta - q) / (1.0 - q) * n;
    let upper = 0.5 / (1.0 - q) * n;
    let feasible: Vec<usize> = (1..n_h).filter(|&k| (k as f64) > lower && (k as f64) < upper).collect();
    let margin = |k: usize| (k as f64 - lower).min(upper - k as f64);
    let n_star = feasible
        .iter()
        .copied()
        .max_by(|&a, &b| margin(a).total_cmp(&margin(b)))
        .ok_or(ConfigError::InfeasiblePartition { q, theta, n_h })?;
    Ok(PartitionPlan { n_star, feasible, lower, upper })
}

#[derive(Debug, Default)]
pub(crate) enum Strategy {
    #[default]
    None,
    DoubleSpend { at: f64, blocks: usize },
    Bait(Bait),
    MetaI(MetaI),
    MetaII(MetaII),
    Safety(Safety),
}

#[derive(Debug)]
pub(crate) struct Bait {
    start: f64,
    alpha: Option<f64>,
    max_spends: usize,
    output: Option<OutputId>,
    favourite: Option<TxIx>,
    spends: usize,
    blocks: usize,
}

#[derive(Debug)]
pub(crate) struct MetaI {
    delta: f64,
    gamma: f64,
    rounds: usize,
    attack: bool,
}

#[derive(Debug)]
pub(crate) struct MetaII {
    mute_after: Option<f64>,
    trigger: MinorityTrigger,
    side: usize,
    txs: [TxIx; 2],
    switches: usize,
    blocks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Idle,
    /// Partition active; X is being pushed to confirm x̄.
    Split,
    /// The adversary now votes ȳ; partition still active.
    Switched,
    Released,
    /// No feasible partition: plain public double spend.
    Plain,
}

#[derive(Debug)]
pub(crate) struct Safety {
    plan: Option<PartitionPlan>,
    start: f64,
    switch_timeout: f64,
    release_after: f64,
    hold_cap: Option<f64>,
    phase: Phase,
    x_group: Vec<u32>,
    y_group: Vec<u32>,
    txs: [TxIx; 2],
    x_confirmed_at: Option<f64>,
    switched_at: Option<f64>,
    released_at: Option<f64>,
    blocks: usize,
}

const POLL: f64 = 0.05;
const TAG_START: u32 = 0;
const TAG_POLL: u32 = 1;
const TAG_RELEASE: u32 = 2;

/// Two conflicting spends by the dealer, installed in every view at once.
fn seed_pair(sim: &mut Sim) -> [TxIx; 2] {
    let dealer = sim.dealer.expect("fixture has a dealer");
    let o = sim.arena.fresh_output();
    let mut txs = [0; 2];
    for t in &mut txs {
        let g = Reference::block(Arena::block_id(Arena::GENESIS));
        let b = sim.create_block(dealer, vec![g, g], Some(o));
        sim.install_everywhere(b);
        *t = sim.arena.block(b).contested.expect("seed carries a spend");
    }
    txs
}

fn prefer(sim: &mut Sim, node: u32, t: TxIx) {
    let r: BTreeSet<_> = [sim.arena.contested[t as usize].id].into();
    sim.set_reality(node, r);
}

/// Issues a block by `issuer` voting for `t`, built on `tips_of`'s tips.
fn vote(sim: &mut Sim, issuer: u32, tips_of: u32, t: TxIx, targets: Targets) -> BlockIx {
    let r = sim.forced_reality(issuer, &[t], None);
    let refs = sim.select_references(tips_of, issuer, &r, &[t]);
    let b = sim.create_block(issuer, refs, None);
    sim.distribute(b, issuer, targets);
    b
}

/// Issues a new spend of `o` by `issuer`, built on `tips_of`'s tips.
fn spend(sim: &mut Sim, issuer: u32, tips_of: u32, o: OutputId, targets: Targets) -> TxIx {
    let r = sim.forced_reality(issuer, &[], Some(o));
    let refs = sim.select_references(tips_of, issuer, &r, &[]);
    let b = sim.create_block(issuer, refs, Some(o));
    sim.distribute(b, issuer, targets);
    sim.arena.block(b).contested.expect("spend carrier")
}

impl Strategy {
    pub(crate) fn new(cfg: &SimConfig) -> Result<Self, ConfigError> {
        Ok(match cfg.adversary {
            AdversaryConfig::None => Self::None,
            AdversaryConfig::DoubleSpend { at } => Self::DoubleSpend { at, blocks: 0 },
            AdversaryConfig::BaitAndSwitch { start, alpha, max_spends, .. } => Self::Bait(Bait {
                start,
                alpha,
                max_spends,
                output: None,
                favourite: None,
                spends: 0,
                blocks: 0,
            }),
            AdversaryConfig::MetastabilityI { delta, gamma, rounds, attack } => Self::MetaI(MetaI { delta, gamma, rounds, attack }),
            AdversaryConfig::MetastabilityII { mute_after, ref trigger, .. } => Self::MetaII(MetaII {
                mute_after,
                trigger: trigger.clone(),
                side: 1,
                txs: [0, 0],
                switches: 0,
                blocks: 0,
            }),
            AdversaryConfig::SafetyBreaker { q, n_star, start, switch_timeout, release_after, hold_cap } => {
                let plan = match n_star {
                    Some(n) => {
                        let mut p = safety_partition(q, cfg.theta, cfg.nodes)
                            .unwrap_or(PartitionPlan { n_star: n, feasible: vec![], lower: f64::NAN, upper: f64::NAN });
                        p.n_star = n;
                        Some(p)
                    }
                    None => safety_partition(q, cfg.theta, cfg.nodes).ok(),
                };
                Self::Safety(Safety {
                    plan,
                    start,
                    switch_timeout,
                    release_after,
                    hold_cap,
                    phase: Phase::Idle,
                    x_group: vec![],
                    y_group: vec![],
                    txs: [0, 0],
                    x_confirmed_at: None,
                    switched_at: None,
                    released_at: None,
                    blocks: 0,
                })
            }
        })
    }

    /// Rounds of periodic issuance (round 0 plus the attacked rounds).
    pub(crate) fn max_rounds(&self) -> usize {
        match self {
            Self::MetaI(m) => m.rounds + 1,
            _ => usize::MAX,
        }
    }

    pub(crate) fn start(&mut self, sim: &mut Sim) {
        match self {
            Self::None => {}
            Self::DoubleSpend { at, .. } => sim.schedule_adversary_timer(*at, TAG_START),
            Self::Bait(b) => sim.schedule_adversary_timer(b.start, TAG_START),
            Self::MetaI(m) => {
                let [x, y] = seed_pair(sim);
                for node in 0..4 {
                    prefer(sim, node, if node < 2 { x } else { y });
                }
                if m.attack {
                    sim.route = RoutePolicy::Groups { group: vec![0, 0, 1, 1], same: m.gamma, cross: m.delta };
                }
            }
            Self::MetaII(m) => {
                m.txs = seed_pair(sim);
                let half = sim.n_honest as u32 / 2;
                for node in sim.honest_nodes() {
                    prefer(sim, node, m.txs[usize::from(node >= half)]);
                }
                m.vote_all(sim);
                if let MinorityTrigger::Timer { interval } = m.trigger {
                    sim.schedule_adversary_timer(interval, TAG_POLL);
                }
            }
            Self::Safety(s) => sim.schedule_adversary_timer(s.start, TAG_START),
        }
    }

    pub(crate) fn on_timer(&mut self, sim: &mut Sim, tag: u32) {
        match self {
            Self::DoubleSpend { blocks, .. } => {
                let dealer = sim.dealer.expect("double spend has a dealer");
                let o = sim.arena.fresh_output();
                let n = sim.n_honest as u32;
                let first = sim.rng_index(n);
                let second = if n > 1 { (first + 1 + sim.rng_index(n - 1)) % n } else { first };
                for to in [first, second] {
                    spend(sim, dealer, dealer, o, Targets::Nodes(vec![to]));
                    *blocks += 1;
                }
            }
            Self::Bait(b) => {
                b.respend(sim);
                sim.schedule_adversary_issue();
            }
            Self::MetaII(m) => {
                m.check(sim);
                if let MinorityTrigger::Timer { interval } = m.trigger {
                    sim.schedule_adversary_timer(sim.now() + interval, TAG_POLL);
                }
            }
            Self::Safety(s) => match tag {
                TAG_START => s.begin(sim),
                TAG_POLL => s.poll(sim),
                _ => {
                    sim.release();
                    s.phase = Phase::Released;
                    s.released_at = Some(sim.now());
                }
            },
            Self::None | Self::MetaI(_) => {}
        }
    }

    /// A Poisson issuance slot of the adversary identity.
    pub(crate) fn on_issue(&mut self, sim: &mut Sim) {
        let adv = sim.adversary_ids.first().copied();
        match self {
            Self::Bait(b) => {
                if let (Some(adv), Some(fav)) = (adv, b.favourite) {
                    let r = sim.forced_reality(adv, &[fav], b.output);
                    let refs = sim.select_references(adv, adv, &r, &[fav]);
                    let blk = sim.create_block(adv, refs, None);
                    sim.distribute(blk, adv, Targets::Gossip);
                    b.blocks += 1;
                }
            }
            Self::Safety(s) => s.issue(sim),
            _ => {}
        }
    }

    pub(crate) fn on_honest_block(&mut self, sim: &mut Sim, _b: BlockIx) {
        match self {
            Self::Bait(b) => {
                let Some(fav) = b.favourite else { return };
                if b.spends >= b.max_spends {
                    return;
                }
                let h = sim.global.honest_support(fav);
                let q = sim.cfg.adversary.q();
                // Re-spend as soon as the favourite gains honest support (or
                // at alpha·q when configured): votes still in flight would
                // otherwise lift it past q before the new spend is seen.
                let fire = match b.alpha {
                    Some(a) => h > 0.0 && h >= a * q,
                    None => h > 0.0,
                };
                if fire {
                    b.respend(sim);
                }
            }
            Self::MetaII(m) if m.trigger == MinorityTrigger::Defection => m.check(sim),
            _ => {}
        }
    }

    pub(crate) fn on_sample(&mut self, _sim: &mut Sim) {}

    pub(crate) fn report(&self, sim: &Sim) -> AdversaryReport {
        let strategy = sim.cfg.adversary.name().to_string();
        match self {
            Self::None => AdversaryReport { strategy, ..Default::default() },
            Self::DoubleSpend { blocks, .. } => AdversaryReport { strategy, spends: *blocks, blocks: *blocks, ..Default::default() },
            Self::Bait(b) => AdversaryReport { strategy, spends: b.spends, blocks: b.blocks + b.spends, ..Default::default() },
            Self::MetaI(_) => AdversaryReport {
                strategy,
                spends: 2,
                blocks: 2,
                metastability: Some(metastability_report(&sim.round_prefs, 0)),
                ..Default::default()
            },
            Self::MetaII(m) => AdversaryReport {
                strategy,
                spends: 2,
                blocks: m.blocks,
                metastability: Some(metastability_report(&sim.round_prefs, m.switches)),
                ..Default::default()
            },
            Self::Safety(s) => AdversaryReport {
                strategy,
                spends: if s.phase == Phase::Idle { 0 } else { 2 },
                blocks: s.blocks,
                partition: Some(PartitionReport {
                    n_star: s.plan.as_ref().map(|p| p.n_star),
                    feasible: s.plan.as_ref().map(|p| p.feasible.clone()).unwrap_or_default(),
                    x_confirmed_at: s.x_confirmed_at,
                    switched_at: s.switched_at,
                    released_at: s.released_at,
                }),
                ..Default::default()
            },
        }
    }
}

fn metastability_report(prefs: &[Vec<char>], adversary_switches: usize) -> MetastabilityReport {
    let inverted = |r: usize| prefs[r].iter().zip(&prefs[r - 1]).all(|(a, b)| *a != '-' && *b != '-' && a != b);
    let inverted_rounds = (1..prefs.len()).filter(|&r| inverted(r)).count();
    let sustained_rounds = (1..prefs.len()).take_while(|&r| inverted(r)).count();
    let agreed_at_end = prefs.last().is_some_and(|p| p.iter().all(|c| *c != '-' && *c == p[0]));
    MetastabilityReport {
        preferences: prefs.to_vec(),
        inverted_rounds,
        sustained_rounds,
        exact_inversion_at_first_round: prefs.len() > 1 && inverted(1),
        agreed_at_end,
        adversary_switches,
    }
}

impl Bait {
    fn respend(&mut self, sim: &mut Sim) {
        let Some(&adv) = sim.adversary_ids.first() else { return };
        let o = *self.output.get_or_insert_with(|| sim.arena.fresh_output());
        self.favourite = Some(spend(sim, adv, adv, o, Targets::Gossip));
        self.spends += 1;
    }
}

impl MetaII {
    fn vote_all(&mut self, sim: &mut Sim) {
        let t = self.txs[self.side];
        for id in sim.adversary_ids.clone() {
            vote(sim, id, id, t, Targets::Gossip);
            self.blocks += 1;
        }
    }

    /// Switches sides once the adversary's side holds the honest majority.
    fn check(&mut self, sim: &mut Sim) {
        if self.mute_after.is_some_and(|m| sim.now() >= m) {
            return;
        }
        let hx = sim.global.honest_support(self.txs[0]);
        let hy = sim.global.honest_support(self.txs[1]);
        let majority = if hx > hy {
            0
        } else if hy > hx {
            1
        } else {
            return;
        };
        if majority == self.side {
            self.side = 1 - self.side;
            self.switches += 1;
            self.vote_all(sim);
        }
    }
}

impl Safety {
    fn adv(sim: &Sim) -> u32 {
        sim.adversary_ids[0]
    }

    fn begin(&mut self, sim: &mut Sim) {
        let adv = Self::adv(sim);
        let o = sim.arena.fresh_output();
        match &self.plan {
            Some(plan) => {
                let n = plan.n_star as u32;
                self.x_group = (0..n).collect();
                self.y_group = (n..sim.n_honest as u32).collect();
                let group = (0..sim.n_honest).map(|i| u8::from(i >= plan.n_star)).collect();
                sim.route = RoutePolicy::Partition { group, active: true, cap: self.hold_cap };
                let (x_rep, y_rep) = (self.x_group[0], self.y_group[0]);
                self.txs[0] = spend(sim, adv, x_rep, o, Targets::Nodes(self.x_group.clone()));
                self.txs[1] = spend(sim, adv, y_rep, o, Targets::Nodes(self.y_group.clone()));
                self.phase = Phase::Split;
                sim.schedule_adversary_timer(sim.now() + POLL, TAG_POLL);
            }
            None => {
                self.txs[0] = spend(sim, adv, adv, o, Targets::Gossip);
                self.txs[1] = spend(sim, adv, adv, o, Targets::Gossip);
                self.phase = Phase::Plain;
            }
        }
        self.blocks += 2;
        sim.schedule_adversary_issue();
    }

    fn poll(&mut self, sim: &mut Sim) {
        if self.phase != Phase::Split {
            return;
        }
        let x = self.txs[0];
        let all = self.x_group.iter().all(|&i| sim.views[i as usize].confirmed_at(x).is_some());
        if all {
            self.x_confirmed_at = Some(sim.now());
        }
        if all || sim.now() >= self.start + self.switch_timeout {
            self.switch(sim);
        } else {
            sim.schedule_adversary_timer(sim.now() + POLL, TAG_POLL);
        }
    }

    /// Votes ȳ towards both groups, keeping each block within the tips its
    /// recipients already know, then schedules the release.
    fn switch(&mut self, sim: &mut Sim) {
        let adv = Self::adv(sim);
        let y = self.txs[1];
        vote(sim, adv, self.y_group[0], y, Targets::Nodes(self.y_group.clone()));
        vote(sim, adv, self.x_group[0], y, Targets::Nodes(self.x_group.clone()));
        self.blocks += 2;
        self.phase = Phase::Switched;
        self.switched_at = Some(sim.now());
        sim.schedule_adversary_timer(sim.now() + self.release_after, TAG_RELEASE);
    }

    fn issue(&mut self, sim: &mut Sim) {
        let adv = Self::adv(sim);
        let [x, y] = self.txs;
        match self.phase {
            Phase::Idle => return,
            Phase::Split => {
                vote(sim, adv, self.x_group[0], x, Targets::Nodes(self.x_group.clone()));
            }
            Phase::Switched => {
                vote(sim, adv, self.y_group[0], y, Targets::Nodes(self.y_group.clone()));
            }
            Phase::Released => {
                vote(sim, adv, adv, y, Targets::Gossip);
            }
            Phase::Plain => {
                vote(sim, adv, adv, x, Targets::Gossip);
            }
        }
        self.blocks += 1;
    }
}
