//! The discrete-event loop: issuance, gossip, solidification requests,
//! reality selection (plain or SRRS) and the adversary hooks.

use crate::adversary::Strategy;
use crate::arena::{Arena, BlockIx, TxIx};
use crate::config::{AdversaryConfig, ConfigError, DelayModel, IssuanceMode, SimConfig, TieBreakRule};
use crate::metrics::{NetworkCounters, OpinionChange, RunReport, Sample};
use crate::queue::EventQueue;
use crate::report;
use crate::topology::Topology;
use crate::view::{quantize_weights, theta_fixed, Arrival, Ctx, View};
use otv_core::reality_engine::{select_reality_with, select_reality_with_coin_unchecked, TieBreak};
use otv_core::tangle_core::{BlockId, RefLabel, Reference};
use otv_core::tip_selection::{fallback_choice, r_urts, TipContext};
use otv_core::utxo_ledger::{OutputId, Owner, TransactionId};
use otv_core::{NodeId, WeightTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::Serialize;
use std::collections::BTreeSet;

const PACKAGE: u8 = 0;
const BEACON: u8 = 1;
const ADVERSARY: u8 = 2;
const ISSUE: u8 = 3;
const SAMPLE: u8 = 4;

#[derive(Debug, Clone, Copy)]
pub(crate) enum Event {
    Deliver { block: BlockIx, from: u32, to: u32 },
    Request { block: BlockIx, requester: u32, peer: u32 },
    Beacon { epoch: u64 },
    Reselect { node: u32, coin: f64 },
    AdversaryTimer { tag: u32 },
    HonestIssue,
    PeriodicIssue { node: u32, round: usize },
    AdversaryIssue,
    Sample,
}

/// Entry of the optional event trace (`events.jsonl`).
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum TraceEvent {
    Issue { t: f64, block: BlockIx, issuer: u32, refs: Vec<(BlockIx, char)>, spend: Option<String> },
    Confirm { t: f64, node: u32, tx: String },
    Beacon { t: f64, epoch: u64, x: f64 },
    Release { t: f64, packages: usize },
}

/// How honest-to-honest packages are routed.
#[derive(Debug, Clone, Default)]
pub(crate) enum RoutePolicy {
    #[default]
    Default,
    /// Fixed delays inside and across groups.
    Groups { group: Vec<u8>, same: f64, cross: f64 },
    /// Cross-group packages are held (or delayed by `cap`) while active.
    Partition { group: Vec<u8>, active: bool, cap: Option<f64> },
}

/// Recipients of a freshly created block.
pub(crate) enum Targets {
    /// Topology neighbours (or every honest node when relaying is off).
    Gossip,
    Nodes(Vec<u32>),
}

/// Tip-selection adapter: tips come from `tips_of`, branches are judged
/// with the conflict knowledge of `knowledge` (the same view for honest
/// nodes; an omniscient one when an adversary builds on a victim's tips).
pub(crate) struct TipCtx<'a> {
    pub tips_of: &'a View,
    pub knowledge: &'a View,
    pub arena: &'a Arena,
}

impl TipContext for TipCtx<'_> {
    fn tips(&self) -> Vec<BlockId> {
        self.tips_of.tips().iter().map(|&b| Arena::block_id(b)).collect()
    }
    fn voting_branch_of(&self, b: BlockId) -> BTreeSet<TransactionId> {
        self.knowledge.local_branch(self.arena, &self.arena.block(Arena::ix(b)).cone)
    }
    fn tx_branch_of(&self, b: BlockId) -> BTreeSet<TransactionId> {
        match self.arena.block(Arena::ix(b)).contested {
            Some(t) => self.knowledge.local_branch(self.arena, &self.arena.contested[t as usize].past),
            None => BTreeSet::new(),
        }
    }
    fn is_conflict_free(&self, s: &BTreeSet<TransactionId>) -> bool {
        self.arena.ledger.is_conflict_free(s)
    }
}

/// Latest issued vote of every identity on every contested transaction, as
/// an omniscient observer sees it at issuance time.
#[derive(Debug, Default)]
pub(crate) struct GlobalVotes {
    time: Vec<Vec<f64>>,
    support: Vec<Vec<bool>>,
    honest: Vec<u64>,
}

impl GlobalVotes {
    fn sync(&mut self, n_tx: usize, n_ids: usize) {
        while self.honest.len() < n_tx {
            self.time.push(vec![f64::NEG_INFINITY; n_ids]);
            self.support.push(vec![false; n_ids]);
            self.honest.push(0);
        }
    }

    fn apply(&mut self, arena: &Arena, b: BlockIx, wq: &[u64], n_honest: usize) {
        let rec = arena.block(b);
        if !rec.valid {
            return;
        }
        let j = rec.issuer.index();
        let mut set = |t: TxIx, s: bool| {
            let t = t as usize;
            if rec.issue_time < self.time[t][j] {
                return;
            }
            self.time[t][j] = rec.issue_time;
            if self.support[t][j] != s {
                self.support[t][j] = s;
                if j < n_honest {
                    if s {
                        self.honest[t] += wq[j];
                    } else {
                        self.honest[t] -= wq[j];
                    }
                }
            }
        };
        for &t in &rec.cone {
            set(t, true);
        }
        for &t in &rec.against {
            set(t, false);
        }
    }

    /// Honest weight whose latest issued vote supports `t`.
    pub fn honest_support(&self, t: TxIx) -> f64 {
        self.honest.get(t as usize).map(|&w| crate::view::to_fraction(w)).unwrap_or(0.0)
    }
}

pub struct Sim {
    pub(crate) cfg: SimConfig,
    pub(crate) rng: ChaCha8Rng,
    pub(crate) weights: WeightTable,
    pub(crate) wq: Vec<u64>,
    pub(crate) theta_q: u64,
    pub(crate) topo: Topology,
    pub(crate) arena: Arena,
    pub(crate) views: Vec<View>,
    pub(crate) queue: EventQueue<Event>,
    pub(crate) n_honest: usize,
    pub(crate) adversary_ids: Vec<u32>,
    pub(crate) dealer: Option<u32>,
    pub(crate) observers: Vec<u32>,
    pub(crate) route: RoutePolicy,
    pub(crate) held: Vec<(BlockIx, u32, u32)>,
    pub(crate) global: GlobalVotes,
    pub(crate) strategy: Strategy,
    pub(crate) tie: TieBreakRule,
    pub(crate) counters: NetworkCounters,
    pub(crate) opinions: Vec<OpinionChange>,
    pub(crate) samples: Vec<Sample>,
    pub(crate) trace: Vec<TraceEvent>,
    /// Preferences at each periodic issuance round (metastability fixtures).
    pub(crate) round_prefs: Vec<Vec<char>>,
    honest_cum: Vec<f64>,
    honest_weight: f64,
    delay_exp: Exp<f64>,
    arrival: Arrival,
    record_opinions: bool,
}

impl Sim {
    pub fn new(cfg: SimConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let mut cfg = cfg;
        if let AdversaryConfig::MetastabilityI { gamma, .. } = cfg.adversary {
            cfg.issuance = IssuanceMode::Periodic { period: gamma, offset: 0.0 };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let q = cfg.adversary.q();
        let n_adv = cfg.adversary.identities();
        let honest = WeightTable::zipf(cfg.nodes, cfg.zipf_s).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let mut raw: Vec<f64> = honest.weights().iter().map(|w| w * (1.0 - q)).collect();
        raw.extend(std::iter::repeat_n(q / n_adv.max(1) as f64, n_adv));
        let has_dealer = cfg.adversary.has_dealer();
        if has_dealer {
            raw.push(0.0);
        }
        let weights = WeightTable::new(&raw).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let wq = quantize_weights(weights.weights());
        let net = cfg.network_size();
        let topo = Topology::build(&cfg.topology, net, &mut rng)?;
        let n_ids = weights.len();
        let genesis_issuer = NodeId(0);
        let arena = Arena::new(genesis_issuer, rng.random());
        let n_obs = cfg.observer_count();
        let observers: Vec<u32> = (0..n_obs).map(|i| (i * cfg.nodes / n_obs) as u32).collect();
        let views = (0..n_ids)
            .map(|i| View::new(NodeId(i as u32), n_ids, observers.contains(&(i as u32))))
            .collect();
        let mut honest_cum = Vec::with_capacity(cfg.nodes);
        let mut acc = 0.0;
        for w in &weights.weights()[..cfg.nodes] {
            acc += w;
            honest_cum.push(acc);
        }
        let tie = match cfg.adversary {
            AdversaryConfig::MetastabilityI { .. } | AdversaryConfig::MetastabilityII { .. } => TieBreakRule::PreferCurrent,
            _ => cfg.tie_break,
        };
        let record_opinions = cfg.metrics.record_opinions;
        let strategy = Strategy::new(&cfg)?;
        Ok(Self {
            theta_q: theta_fixed(cfg.theta),
            rng,
            wq,
            topo,
            arena,
            views,
            queue: EventQueue::new(),
            n_honest: cfg.nodes,
            adversary_ids: (cfg.nodes..net).map(|i| i as u32).collect(),
            dealer: has_dealer.then_some(net as u32),
            observers,
            route: RoutePolicy::Default,
            held: vec![],
            global: GlobalVotes::default(),
            strategy,
            tie,
            counters: NetworkCounters::default(),
            opinions: vec![],
            samples: vec![],
            trace: vec![],
            round_prefs: vec![],
            honest_cum,
            honest_weight: acc,
            delay_exp: Exp::new(1.0).expect("unit rate"),
            arrival: Arrival::default(),
            record_opinions,
            weights,
            cfg,
        })
    }

    pub fn now(&self) -> f64 {
        self.queue.now()
    }

    pub(crate) fn rng_index(&mut self, n: u32) -> u32 {
        self.rng.random_range(0..n)
    }

    pub(crate) fn is_honest(&self, i: u32) -> bool {
        (i as usize) < self.n_honest
    }

    pub(crate) fn honest_nodes(&self) -> std::ops::Range<u32> {
        0..self.n_honest as u32
    }

    /// Runs to the horizon and assembles the report.
    pub fn run(mut self) -> (RunReport, Vec<TraceEvent>) {
        self.start();
        let horizon = self.cfg.horizon;
        while let Some((key, ev)) = self.queue.pop() {
            if key.time > horizon {
                break;
            }
            self.handle(ev);
        }
        let report = report::build(&self);
        (report, std::mem::take(&mut self.trace))
    }

    fn start(&mut self) {
        let mut out = std::mem::take(&mut self.arrival);
        out.clear();
        for i in 0..self.views.len() {
            let ctx = Ctx { arena: &self.arena, weights: &self.wq, theta: self.cfg.theta, now: 0.0 };
            self.views[i].install(&ctx, Arena::GENESIS, self.theta_q, &mut out);
        }
        self.arrival = out;
        match self.cfg.issuance {
            IssuanceMode::Poisson => self.schedule_honest_issue(),
            IssuanceMode::Periodic { offset, .. } => {
                for i in self.honest_nodes() {
                    self.queue.push(offset, ISSUE, Event::PeriodicIssue { node: i, round: 0 });
                }
            }
        }
        if self.cfg.srrs.enabled {
            self.queue.push(self.cfg.srrs.epoch, BEACON, Event::Beacon { epoch: 1 });
        }
        self.queue.push(0.0, SAMPLE, Event::Sample);
        self.with_strategy(|s, sim| s.start(sim));
    }

    fn with_strategy(&mut self, f: impl FnOnce(&mut Strategy, &mut Sim)) {
        let mut s = std::mem::take(&mut self.strategy);
        f(&mut s, self);
        self.strategy = s;
    }

    pub(crate) fn schedule_adversary_timer(&mut self, at: f64, tag: u32) {
        self.queue.push(at, ADVERSARY, Event::AdversaryTimer { tag });
    }

    pub(crate) fn schedule_adversary_issue(&mut self) {
        let rate = self.cfg.lambda * self.cfg.adversary.q();
        if rate > 0.0 {
            let dt = self.delay_exp.sample(&mut self.rng) / rate;
            self.queue.push(self.now() + dt, ISSUE, Event::AdversaryIssue);
        }
    }

    fn schedule_honest_issue(&mut self) {
        let rate = self.cfg.lambda * self.honest_weight;
        let dt = self.delay_exp.sample(&mut self.rng) / rate;
        self.queue.push(self.now() + dt, ISSUE, Event::HonestIssue);
    }

    fn handle(&mut self, ev: Event) {
        match ev {
            Event::Deliver { block, from, to } => self.deliver(block, from, to),
            Event::Request { block, requester, peer } => self.answer_request(block, requester, peer),
            Event::Beacon { epoch } => self.beacon(epoch),
            Event::Reselect { node, coin } => self.reselect(node, coin),
            Event::AdversaryTimer { tag } => self.with_strategy(|s, sim| s.on_timer(sim, tag)),
            Event::HonestIssue => {
                let u: f64 = self.rng.random::<f64>() * self.honest_weight;
                let i = self.honest_cum.partition_point(|&c| c <= u).min(self.n_honest - 1);
                self.issue_honest(i as u32);
                self.schedule_honest_issue();
            }
            Event::PeriodicIssue { node, round } => {
                if self.round_prefs.len() <= round {
                    self.round_prefs.resize(round + 1, vec!['-'; self.n_honest]);
                }
                self.issue_honest(node);
                if let IssuanceMode::Periodic { period, offset } = self.cfg.issuance {
                    let next = round + 1;
                    if next < self.strategy.max_rounds() {
                        self.queue.push(offset + next as f64 * period, ISSUE, Event::PeriodicIssue { node, round: next });
                    }
                }
            }
            Event::AdversaryIssue => {
                self.with_strategy(|s, sim| s.on_issue(sim));
                self.schedule_adversary_issue();
            }
            Event::Sample => {
                let t = self.now();
                let pool: usize = self.views[..self.n_honest].iter().map(|v| v.tips().len()).sum();
                self.samples.push(Sample { t, tip_pool: pool as f64 / self.n_honest as f64 });
                self.with_strategy(|s, sim| s.on_sample(sim));
                self.queue.push(t + self.cfg.metrics.sample_interval, SAMPLE, Event::Sample);
            }
        }
    }

    // ----- delays and routing -------------------------------------------

    pub(crate) fn sample_delay(&mut self) -> f64 {
        match self.cfg.delay {
            DelayModel::Constant { h } | DelayModel::AdversaryControlled { h } => h,
            DelayModel::ProbSync { delta, eps } => {
                if self.rng.random::<f64>() < eps {
                    delta + delta * self.delay_exp.sample(&mut self.rng)
                } else {
                    // Uniform on (0, Δ].
                    delta * (1.0 - self.rng.random::<f64>())
                }
            }
        }
    }

    /// Sends `b` from `from` to `to`, subject to the routing policy.
    /// Adversary and dealer views receive everything at creation, so
    /// packages addressed to them are dropped.
    pub(crate) fn send(&mut self, b: BlockIx, from: u32, to: u32) {
        if !self.is_honest(to) {
            return;
        }
        let base = self.sample_delay();
        let honest_pair = self.is_honest(from);
        let delay = match &self.route {
            RoutePolicy::Groups { group, same, cross } if honest_pair => {
                if group[from as usize] == group[to as usize] {
                    *same
                } else {
                    *cross
                }
            }
            RoutePolicy::Partition { group, active: true, cap } if honest_pair && group[from as usize] != group[to as usize] => {
                match cap {
                    Some(c) => base + c,
                    None => {
                        self.held.push((b, from, to));
                        self.counters.held += 1;
                        return;
                    }
                }
            }
            _ => base,
        };
        self.counters.packages += 1;
        self.queue.push(self.now() + delay, PACKAGE, Event::Deliver { block: b, from, to });
    }

    pub(crate) fn release(&mut self) {
        if let RoutePolicy::Partition { active, .. } = &mut self.route {
            *active = false;
        }
        let held = std::mem::take(&mut self.held);
        let n = held.len();
        for (b, from, to) in held {
            self.send(b, from, to);
        }
        if self.cfg.metrics.events {
            self.trace.push(TraceEvent::Release { t: self.now(), packages: n });
        }
    }

    // ----- receiving ----------------------------------------------------

    fn deliver(&mut self, b: BlockIx, from: u32, to: u32) {
        let mut out = std::mem::take(&mut self.arrival);
        out.clear();
        {
            let ctx = Ctx { arena: &self.arena, weights: &self.wq, theta: self.cfg.theta, now: self.now() };
            self.views[to as usize].receive(&ctx, b, from, self.theta_q, &mut out);
        }
        if out.duplicate {
            self.counters.duplicates += 1;
        }
        for &p in &out.requests {
            self.counters.requests += 1;
            let d = self.sample_delay();
            self.queue.push(self.now() + d, PACKAGE, Event::Request { block: p, requester: to, peer: from });
        }
        self.after_arrival(to, &out);
        if self.cfg.relay {
            for &(s, src) in &out.solid {
                for k in 0..self.topo.neighbours(to as usize).len() {
                    let n = self.topo.neighbours(to as usize)[k];
                    if n != src && self.is_honest(n) {
                        self.send(s, to, n);
                    }
                }
            }
        }
        self.arrival = out;
    }

    fn answer_request(&mut self, b: BlockIx, requester: u32, peer: u32) {
        if self.is_honest(peer) && !self.views[peer as usize].is_solid(b) {
            self.counters.unanswered_requests += 1;
            return;
        }
        // Responses bypass partition holds: the requester already depends
        // on the block, so it must have come through an open channel.
        let d = self.sample_delay();
        self.counters.packages += 1;
        self.queue.push(self.now() + d, PACKAGE, Event::Deliver { block: b, from: peer, to: requester });
    }

    /// Bookkeeping after blocks became solid at `node`.
    fn after_arrival(&mut self, node: u32, out: &Arrival) {
        if !self.is_honest(node) {
            return;
        }
        if self.cfg.metrics.events {
            for &t in &out.confirmed {
                self.trace.push(TraceEvent::Confirm { t: self.now(), node, tx: tx_label(t) });
            }
        }
        if out.votes_changed && !self.cfg.srrs.enabled && self.tie == TieBreakRule::PreferCurrent {
            self.refresh_reality(node);
        }
    }

    // ----- reality selection --------------------------------------------

    /// Dense weights and active mask over the global conflict graph as seen
    /// by `node`; with `min_age`, younger local conflicts are left out.
    fn local_conflicts(&self, node: u32, min_age: Option<f64>) -> (Vec<f64>, Vec<bool>) {
        let v = &self.views[node as usize];
        let n = self.arena.graph.len();
        let now = self.now();
        let mut w = vec![0.0; n];
        let mut active = vec![false; n];
        for (g, &t) in self.arena.contested_of.iter().enumerate() {
            if let Some(since) = v.conflict_since(t) {
                active[g] = min_age.is_none_or(|d| now - since >= d);
                w[g] = v.approval_weight(t);
            }
        }
        (w, active)
    }

    /// Recomputes the preferred reality of `node` (non-SRRS operation).
    pub(crate) fn refresh_reality(&mut self, node: u32) {
        let (w, active) = self.local_conflicts(node, None);
        let current = &self.views[node as usize].reality;
        let tie = match self.tie {
            TieBreakRule::MinDigest => TieBreak::MinDigest,
            TieBreakRule::PreferCurrent => TieBreak::PreferCurrent(current),
        };
        let r = select_reality_with(&self.arena.graph, &w, Some(&active), tie).branch;
        self.set_reality(node, r);
    }

    pub(crate) fn set_reality(&mut self, node: u32, r: BTreeSet<TransactionId>) {
        let v = &mut self.views[node as usize];
        if v.reality != r {
            if self.record_opinions {
                let mut labels: Vec<String> =
                    r.iter().filter_map(|id| self.arena.tx_index(*id)).map(tx_label).collect();
                labels.sort();
                self.opinions.push(OpinionChange { t: self.queue.now(), node, reality: labels });
            }
            v.reality = r;
        }
    }

    fn beacon(&mut self, epoch: u64) {
        let s = self.cfg.srrs.clone();
        let x = self.rng.random_range(0.5..=self.cfg.theta);
        if self.cfg.metrics.events {
            self.trace.push(TraceEvent::Beacon { t: self.now(), epoch, x });
        }
        for i in self.honest_nodes() {
            let coin = if self.rng.random::<f64>() < s.loss { self.cfg.theta } else { x };
            self.queue.push(self.now() + s.jitter, BEACON, Event::Reselect { node: i, coin });
        }
        self.queue.push((epoch + 1) as f64 * s.epoch, BEACON, Event::Beacon { epoch: epoch + 1 });
    }

    /// SRRS: pick the reality for the next epoch with the common coin,
    /// considering only conflicts known for at least one epoch.
    fn reselect(&mut self, node: u32, coin: f64) {
        let (w, active) = self.local_conflicts(node, Some(self.cfg.srrs.epoch));
        let r = select_reality_with_coin_unchecked(&self.arena.graph, &w, coin, Some(&active)).branch;
        self.views[node as usize].coin = coin;
        self.set_reality(node, r);
    }

    /// Reality an adversary-controlled identity uses for tip selection: the
    /// view's local conflicts minus the spends of `exclude`, with `favour`
    /// forced in.
    pub(crate) fn forced_reality(&self, view: u32, favour: &[TxIx], exclude: Option<OutputId>) -> BTreeSet<TransactionId> {
        let (mut w, mut active) = self.local_conflicts(view, None);
        for (g, &t) in self.arena.contested_of.iter().enumerate() {
            let c = &self.arena.contested[t as usize];
            if favour.contains(&t) {
                if active[g] {
                    w[g] = 2.0;
                }
            } else if exclude == Some(c.spends) {
                active[g] = false;
            }
        }
        select_reality_with(&self.arena.graph, &w, Some(&active), TieBreak::MinDigest).branch
    }

    // ----- issuance -----------------------------------------------------

    fn issue_honest(&mut self, node: u32) {
        let reality = if self.cfg.srrs.enabled {
            self.views[node as usize].reality.clone()
        } else {
            self.refresh_reality(node);
            self.views[node as usize].reality.clone()
        };
        if let Some(round) = self.current_round() {
            let pref = self.preference_char(&reality);
            self.round_prefs[round][node as usize] = pref;
        }
        let favour: Vec<TxIx> = reality
            .iter()
            .filter_map(|id| self.arena.tx_index(*id))
            .filter(|&t| !self.views[node as usize].supports(t, node as usize))
            .collect();
        let refs = self.select_references(node, node, &reality, &favour);
        let b = self.create_block(node, refs, None);
        self.distribute(b, node, Targets::Gossip);
        self.with_strategy(|s, sim| s.on_honest_block(sim, b));
    }

    fn current_round(&self) -> Option<usize> {
        match self.cfg.issuance {
            IssuanceMode::Periodic { period, offset } if !self.round_prefs.is_empty() => {
                let r = ((self.now() - offset) / period).round() as usize;
                (r < self.round_prefs.len()).then_some(r)
            }
            _ => None,
        }
    }

    fn preference_char(&self, reality: &BTreeSet<TransactionId>) -> char {
        let has = |t: usize| self.arena.contested.get(t).is_some_and(|c| reality.contains(&c.id));
        match (has(0), has(1)) {
            (true, false) => 'x',
            (false, true) => 'y',
            _ => '-',
        }
    }

    /// R-URTS over the tips of `tips_of` (falling back to the issuer's last
    /// block or the genesis), plus transaction references to the carriers of
    /// `favour` that the chosen references do not already vote for.
    pub(crate) fn select_references(
        &mut self,
        tips_of: u32,
        knowledge: u32,
        reality: &BTreeSet<TransactionId>,
        favour: &[TxIx],
    ) -> Vec<Reference> {
        let ctx = TipCtx { tips_of: &self.views[tips_of as usize], knowledge: &self.views[knowledge as usize], arena: &self.arena };
        let choice = match r_urts(&ctx, reality, self.cfg.k, &mut self.rng) {
            Ok(c) => c,
            Err(_) => {
                let own = self.views[knowledge as usize].own_last.map(Arena::block_id);
                fallback_choice(&ctx, reality, own, Arena::block_id(Arena::GENESIS))
            }
        };
        let mut refs = choice.references();
        if !favour.is_empty() {
            let pairs: Vec<(BlockIx, RefLabel)> = refs.iter().map(|r| (Arena::ix(r.target), r.label)).collect();
            let cone = self.arena.cone_of(&pairs);
            for &t in favour {
                if cone.binary_search(&t).is_err() {
                    let carrier = self.arena.contested[t as usize].carrier;
                    refs.push(Reference::tx(Arena::block_id(carrier)));
                }
            }
        }
        refs
    }

    /// Adds a block to the store and makes it solid in its issuer's view and
    /// in every omniscient (adversary/dealer) view.
    pub(crate) fn create_block(&mut self, issuer: u32, refs: Vec<Reference>, spend: Option<OutputId>) -> BlockIx {
        let now = self.now();
        let b = self.arena.add_block(NodeId(issuer), now, &refs, spend.map(|o| (o, Owner::Node(NodeId(issuer)))));
        let n_tx = self.arena.contested.len();
        if spend.is_some() {
            for v in &mut self.views {
                v.sync_contested(n_tx);
            }
        }
        self.global.sync(n_tx, self.views.len());
        self.global.apply(&self.arena, b, &self.wq, self.n_honest);
        if self.cfg.metrics.events {
            let rec = self.arena.block(b);
            let refs = rec
                .refs
                .iter()
                .map(|&(p, l)| (p, if l == RefLabel::BlockVote { 'b' } else { 't' }))
                .collect();
            self.trace.push(TraceEvent::Issue { t: now, block: b, issuer, refs, spend: rec.contested.map(tx_label) });
        }
        let mut out = std::mem::take(&mut self.arrival);
        let omniscient: Vec<u32> = self.adversary_ids.iter().copied().chain(self.dealer).collect();
        for i in std::iter::once(issuer).chain(omniscient.into_iter().filter(|&i| i != issuer)) {
            out.clear();
            let ctx = Ctx { arena: &self.arena, weights: &self.wq, theta: self.cfg.theta, now };
            self.views[i as usize].receive(&ctx, b, i, self.theta_q, &mut out);
            debug_assert!(out.requests.is_empty(), "issuer views hold every parent");
            self.after_arrival(i, &out);
        }
        self.arrival = out;
        self.views[issuer as usize].own_last = Some(b);
        b
    }

    /// Installs a block as solid in every view at the current time (seeds
    /// of the metastability fixtures).
    pub(crate) fn install_everywhere(&mut self, b: BlockIx) {
        let mut out = std::mem::take(&mut self.arrival);
        for i in 0..self.views.len() as u32 {
            out.clear();
            let ctx = Ctx { arena: &self.arena, weights: &self.wq, theta: self.cfg.theta, now: self.now() };
            self.views[i as usize].install(&ctx, b, self.theta_q, &mut out);
            self.after_arrival(i, &out);
        }
        self.arrival = out;
    }

    pub(crate) fn distribute(&mut self, b: BlockIx, origin: u32, targets: Targets) {
        match targets {
            Targets::Gossip if self.cfg.relay => {
                for k in 0..self.topo.neighbours(origin as usize).len() {
                    let n = self.topo.neighbours(origin as usize)[k];
                    self.send(b, origin, n);
                }
            }
            Targets::Gossip => {
                for n in self.honest_nodes() {
                    if n != origin {
                        self.send(b, origin, n);
                    }
                }
            }
            Targets::Nodes(list) => {
                for n in list {
                    if n != origin {
                        self.send(b, origin, n);
                    }
                }
            }
        }
    }

    pub(crate) fn strategy_report(&self) -> crate::metrics::AdversaryReport {
        self.strategy.report(self)
    }
}

pub(crate) fn tx_label(t: TxIx) -> String {
    format!("c{t}")
}

/// Validates `cfg` and runs one replication.
pub fn run(cfg: SimConfig) -> Result<RunReport, ConfigError> {
    Ok(Sim::new(cfg)?.run().0)
}

/// Like [`run`] but also returns the event trace (empty unless
/// `metrics.events` is set).
pub fn run_traced(cfg: SimConfig) -> Result<(RunReport, Vec<TraceEvent>), ConfigError> {
    Ok(Sim::new(cfg)?.run())
}
