//! Deterministic discrete-event network simulation.
//!
//! One simulation owns one encryption domain, one engine per process, and a
//! single event queue ordered by `(tick, sequence)`. Channels are reliable:
//! every sent message is delivered, under a delay chosen by the schedule
//! policy. All randomness comes from one seeded stream, so a transcript is
//! a pure function of `(scenario, seed)`.
//!
//! Rounds are driven by permutation batches: at each batch tick, every
//! evaluating process computes the whole permutation's pipelines and
//! broadcasts its decryption shares for all of the batch's rounds at once,
//! which is what gives one-round-trip latency regardless of the permutation
//! length. Decisions then arrive as shares cross the stake threshold.
//!
//! Completed rounds are pruned from the domain registry once no process can
//! still need their handles, keeping long runs at constant memory.

pub mod adversary;
pub mod scenario;
pub mod transcript;
pub mod wire;

pub use adversary::AdversaryStrategy;
pub use scenario::{Scenario, SchedulePolicy, ScenarioError};
pub use transcript::{
    ChainOutcome, EnvelopeRecord, MessageStats, RoundSummary, RunOutcome, Transcript,
};

use crate::chain::{self, BlockProposal};
use crate::circuits::cost::CostAccumulator;
use crate::encdom::{keygen, EncDomain};
use crate::setup::{Ceremony, Contribution, SetupError};
use crate::sortition::{Engine, SortitionError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use thiserror::Error;
use wire::{PVoucherMsg, WireMessage};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Setup(#[from] SetupError),
    #[error(transparent)]
    Sortition(#[from] SortitionError),
}

/// Run one scenario to completion or budget exhaustion.
pub fn run(scenario: &Scenario, seed: u64) -> Result<Transcript, SimError> {
    Simulation::new(scenario.clone(), seed)?.run()
}

#[derive(Debug)]
enum Action {
    /// Evaluate and share one permutation batch on one process.
    Start { process: usize, start_round: u64 },
    Deliver {
        from: usize,
        to: usize,
        sent_tick: u64,
        bytes: u64,
        msg: WireMessage,
    },
}

#[derive(Debug)]
struct Queued {
    tick: u64,
    seq: u64,
    action: Action,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.tick == other.tick && self.seq == other.seq
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.tick, self.seq).cmp(&(other.tick, other.seq))
    }
}

struct RoundTracker {
    start_tick: u64,
    voucher: Option<Vec<u8>>,
    /// Decision tick per process, corrupted included.
    decided: BTreeMap<u16, u64>,
    finalized: bool,
    /// Correct-process accepts per claimed proposer.
    chain_accepts: BTreeMap<u16, u32>,
    chain_rejects: u32,
    steal_attempts: u32,
}

impl RoundTracker {
    fn new(start_tick: u64) -> Self {
        Self {
            start_tick,
            voucher: None,
            decided: BTreeMap::new(),
            finalized: false,
            chain_accepts: BTreeMap::new(),
            chain_rejects: 0,
            steal_attempts: 0,
        }
    }
}

struct Simulation {
    sc: Scenario,
    n: usize,
    correct_count: usize,
    lambda: u32,
    dom: EncDomain,
    engines: Vec<Engine>,
    costs: Vec<CostAccumulator>,
    corrupted: Vec<bool>,
    rng: ChaCha20Rng,
    queue: BinaryHeap<Reverse<Queued>>,
    next_seq: u64,
    tick: u64,
    stats: MessageStats,
    envelopes: Vec<EnvelopeRecord>,
    trackers: BTreeMap<u64, RoundTracker>,
    prune_cursor: u64,
    last_pvoucher: Vec<Option<PVoucherMsg>>,
    /// Rounds each corrupted process has already attempted to steal.
    stole: Vec<BTreeSet<u64>>,
    seed: u64,
}

impl Simulation {
    fn new(sc: Scenario, seed: u64) -> Result<Self, SimError> {
        let (table, config) = sc.validate()?;
        let n = table.len();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let key = keygen(&table, &mut rng);
        let mut dom = EncDomain::new(config, table, key);
        let contributions: Vec<Contribution> = (0..n)
            .map(|i| Contribution::random(i as u16, n, sc.beta_x, &mut rng))
            .collect();
        let ceremony = Ceremony::run(&mut dom, &contributions)?;
        let mut engines = Vec::with_capacity(n);
        for i in 0..n {
            let ticket = ceremony.deliver_ticket(&mut dom, i, i)?;
            engines.push(Engine::new(i, ticket, ceremony.artifacts(), sc.d, config)?);
        }
        let mut corrupted = vec![false; n];
        for &c in &sc.corrupted {
            corrupted[usize::from(c)] = true;
        }
        let correct_count = corrupted.iter().filter(|&&c| !c).count();
        let lambda = sc.lambda;
        let mut sim = Self {
            n,
            correct_count,
            lambda,
            dom,
            engines,
            costs: vec![CostAccumulator::new(); n],
            corrupted,
            rng,
            queue: BinaryHeap::new(),
            next_seq: 0,
            tick: 0,
            stats: MessageStats::default(),
            envelopes: Vec::new(),
            trackers: BTreeMap::new(),
            prune_cursor: 1,
            last_pvoucher: vec![None; n],
            stole: vec![BTreeSet::new(); n],
            seed,
            sc,
        };
        sim.schedule_batches();
        Ok(sim)
    }

    fn schedule_batches(&mut self) {
        for k in 0..self.sc.permutations() {
            let tick = k * self.sc.start_spacing;
            let start_round = 1 + k * self.sc.d;
            for p in 0..self.n {
                if self.corrupted[p] && !self.sc.strategy.evaluates() {
                    continue;
                }
                self.push(
                    tick,
                    Action::Start {
                        process: p,
                        start_round,
                    },
                );
            }
        }
    }

    fn push(&mut self, tick: u64, action: Action) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(Queued { tick, seq, action }));
    }

    fn run(mut self) -> Result<Transcript, SimError> {
        let budget = self.sc.effective_max_ticks();
        while let Some(Reverse(q)) = self.queue.pop() {
            if q.tick > budget {
                break;
            }
            self.tick = q.tick;
            self.dom.set_tick(q.tick);
            match q.action {
                Action::Start {
                    process,
                    start_round,
                } => self.on_start(process, start_round)?,
                Action::Deliver {
                    from,
                    to,
                    sent_tick,
                    bytes,
                    msg,
                } => self.on_deliver(from, to, sent_tick, bytes, msg)?,
            }
        }
        Ok(self.into_transcript())
    }

    fn on_start(&mut self, p: usize, start_round: u64) -> Result<(), SimError> {
        let last = (start_round + self.sc.d - 1).min(self.sc.rounds);
        for r in start_round..=last {
            let tick = self.tick;
            self.trackers
                .entry(r)
                .or_insert_with(|| RoundTracker::new(tick));
            let key = self.dom.key_material().share(p).clone();
            let share = self.engines[p].own_share(&mut self.dom, &mut self.costs[p], &key, r)?;
            let msg = PVoucherMsg::from_share(r, start_round, &share);
            self.broadcast_share(p, &msg);
            self.last_pvoucher[p] = Some(msg);
            self.drain_decisions(p);
        }
        Ok(())
    }

    fn broadcast_share(&mut self, from: usize, msg: &PVoucherMsg) {
        let strategy = if self.corrupted[from] {
            self.sc.strategy
        } else {
            AdversaryStrategy::Honest
        };
        let extra = strategy.extra_delay();
        for to in 0..self.n {
            if to == from {
                continue;
            }
            if let Some(out) = strategy.outgoing(msg, to, self.last_pvoucher[from].as_ref()) {
                self.send(from, to, WireMessage::PVoucher(out), extra);
            }
        }
    }

    fn send(&mut self, from: usize, to: usize, msg: WireMessage, extra_delay: u64) {
        let bytes = msg.encode().len() as u64;
        match msg {
            WireMessage::PVoucher(_) => self.stats.pvoucher_sent += 1,
            WireMessage::Proposal(_) => self.stats.proposal_sent += 1,
        }
        self.stats.bytes_sent += bytes;
        let policy_delay = match self.sc.schedule {
            SchedulePolicy::Fifo => 0,
            SchedulePolicy::Random { max_delay } => self.rng.gen_range(0..=max_delay),
            SchedulePolicy::Starve {
                victim,
                release_tick,
            } => {
                if to == usize::from(victim) {
                    release_tick.saturating_sub(self.tick + 1)
                } else {
                    0
                }
            }
            SchedulePolicy::CorruptedFirst { correct_delay } => {
                if self.corrupted[from] {
                    0
                } else {
                    correct_delay
                }
            }
        };
        let deliver_tick = self.tick + 1 + policy_delay + extra_delay;
        let sent_tick = self.tick;
        self.push(
            deliver_tick,
            Action::Deliver {
                from,
                to,
                sent_tick,
                bytes,
                msg,
            },
        );
    }

    fn on_deliver(
        &mut self,
        from: usize,
        to: usize,
        sent_tick: u64,
        bytes: u64,
        msg: WireMessage,
    ) -> Result<(), SimError> {
        if self.sc.record_envelopes {
            self.envelopes.push(EnvelopeRecord {
                from: from as u16,
                to: to as u16,
                kind: msg.kind(),
                bytes,
                sent_tick,
                delivered_tick: self.tick,
            });
        }
        match msg {
            WireMessage::PVoucher(m) => {
                self.stats.pvoucher_delivered += 1;
                let finalized = self
                    .trackers
                    .get(&m.round)
                    .is_some_and(|t| t.finalized);
                if !finalized {
                    self.engines[to].ingest_share(&mut self.dom, m.round, m.share())?;
                    self.drain_decisions(to);
                }
            }
            WireMessage::Proposal(p) => {
                self.stats.proposal_delivered += 1;
                self.on_proposal(to, p);
            }
        }
        Ok(())
    }

    fn drain_decisions(&mut self, p: usize) {
        while let Some((r, voucher)) = self.engines[p].take_decision() {
            let tracker = self
                .trackers
                .get_mut(&r)
                .expect("decided rounds were started");
            match &tracker.voucher {
                None => tracker.voucher = Some(voucher.clone()),
                Some(v) => debug_assert_eq!(
                    v, &voucher,
                    "all processes decrypt the same voucher"
                ),
            }
            tracker.decided.insert(p as u16, self.tick);
            let correct_decided = tracker
                .decided
                .keys()
                .filter(|&&q| !self.corrupted[usize::from(q)])
                .count();
            let newly_final = !tracker.finalized && correct_decided == self.correct_count;
            if newly_final {
                tracker.finalized = true;
            }
            if self.sc.enable_chain {
                if let Some(claim) = self.engines[p].claim(r, &voucher) {
                    let extra = if self.corrupted[p] {
                        self.sc.strategy.extra_delay()
                    } else {
                        0
                    };
                    let proposal = BlockProposal {
                        round: r,
                        proposer: p as u16,
                        proof: claim.proof,
                        block: chain::block_payload(r, p as u16),
                    };
                    for q in 0..self.n {
                        if q != p {
                            self.send(p, q, WireMessage::Proposal(proposal.clone()), extra);
                        }
                    }
                }
            }
            if newly_final {
                self.try_prune();
            }
        }
    }

    /// Drop domain and engine state for every round that nothing can still
    /// reference: the round is finalized and so is the round consuming its
    /// artifacts (its successor within the same permutation).
    fn try_prune(&mut self) {
        loop {
            let r = self.prune_cursor;
            if r > self.sc.rounds {
                return;
            }
            let Some(t) = self.trackers.get(&r) else {
                return;
            };
            if !t.finalized {
                return;
            }
            let start = r - ((r - 1) % self.sc.d);
            let last_of_perm = (start + self.sc.d - 1).min(self.sc.rounds);
            let successor_done = r == last_of_perm
                || self
                    .trackers
                    .get(&(r + 1))
                    .is_some_and(|next| next.finalized);
            if !successor_done {
                return;
            }
            self.dom.prune_round(r);
            for e in &mut self.engines {
                e.forget_round(r);
            }
            self.prune_cursor += 1;
        }
    }

    fn on_proposal(&mut self, to: usize, p: BlockProposal) {
        let accepted = {
            let Some(tracker) = self.trackers.get_mut(&p.round) else {
                return;
            };
            let Some(voucher) = &tracker.voucher else {
                return;
            };
            let accepted = chain::accepts(&p, voucher, self.lambda);
            if !self.corrupted[to] {
                if accepted {
                    *tracker.chain_accepts.entry(p.proposer).or_insert(0) += 1;
                } else {
                    tracker.chain_rejects += 1;
                }
            }
            accepted
        };
        // A corrupted receiver tries to pass the revealed proof off as its
        // own and as everyone else's, once per round.
        if accepted && self.corrupted[to] && self.stole[to].insert(p.round) {
            let tracker = self
                .trackers
                .get_mut(&p.round)
                .expect("tracker checked above");
            tracker.steal_attempts += (self.n - 1) as u32;
            let extra = self.sc.strategy.extra_delay();
            for idx in 0..self.n as u16 {
                if idx == p.proposer {
                    continue;
                }
                let forged = BlockProposal {
                    round: p.round,
                    proposer: idx,
                    proof: p.proof.clone(),
                    block: chain::block_payload(p.round, idx),
                };
                for q in 0..self.n {
                    if q != to {
                        self.send(to, q, WireMessage::Proposal(forged.clone()), extra);
                    }
                }
            }
        }
    }

    fn into_transcript(self) -> Transcript {
        let mut rounds = Vec::new();
        let mut undecided = 0u64;
        for r in 1..=self.sc.rounds {
            match self.trackers.get(&r) {
                Some(t) if t.finalized => rounds.push(self.summarize(r, t)),
                _ => undecided += 1,
            }
        }
        let outcome = if undecided == 0 {
            RunOutcome::Completed
        } else {
            RunOutcome::LivenessViolation {
                undecided_rounds: undecided,
                at_tick: self.tick,
            }
        };
        Transcript {
            scenario_digest: self.sc.digest(),
            seed: self.seed,
            outcome,
            ticks: self.tick,
            messages: self.stats,
            gates_per_process: self.costs.iter().map(|c| c.total_binary_gates()).collect(),
            final_handle_count: self.dom.handle_count(),
            rounds,
            envelopes: self.envelopes,
            audit: self.dom.audit_log().records().to_vec(),
        }
    }

    fn summarize(&self, r: u64, t: &RoundTracker) -> RoundSummary {
        let voucher = t.voucher.clone().expect("finalized rounds are decided");
        let claimants: Vec<u16> = (0..self.n)
            .filter(|&p| self.engines[p].claim(r, &voucher).is_some())
            .map(|p| p as u16)
            .collect();
        let leader = if claimants.len() == 1 {
            Some(claimants[0])
        } else {
            None
        };
        let correct_ticks: Vec<u64> = t
            .decided
            .iter()
            .filter(|(q, _)| !self.corrupted[usize::from(**q)])
            .map(|(_, &tick)| tick)
            .collect();
        let first = correct_ticks.iter().copied().min().unwrap_or(0);
        let last = correct_ticks.iter().copied().max().unwrap_or(0);
        let chain = self.sc.enable_chain.then(|| {
            let accepted_by = leader
                .and_then(|l| t.chain_accepts.get(&l).copied())
                .unwrap_or(0);
            let steal_accepts = t
                .chain_accepts
                .iter()
                .filter(|(proposer, _)| Some(**proposer) != leader)
                .map(|(_, &c)| c)
                .sum();
            ChainOutcome {
                proposer: leader,
                accepted_by,
                rejected: t.chain_rejects,
                steal_attempts: t.steal_attempts,
                steal_accepts,
            }
        });
        RoundSummary {
            round: r,
            permutation_start: r - ((r - 1) % self.sc.d),
            start_tick: t.start_tick,
            first_decided_tick: first,
            last_decided_tick: last,
            voucher: hex::encode(&voucher),
            claimants,
            leader,
            chain,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn honest_fifo_run_has_exact_message_count_and_unit_latency() {
        let scenario = Scenario::honest(vec![1, 1, 1, 1], 3);
        let t = run(&scenario, 1).unwrap();
        assert!(t.completed());
        assert_eq!(t.rounds.len(), 3);
        // Each of the 4 processes broadcasts one share to 3 peers per round.
        assert_eq!(t.messages.pvoucher_sent, 3 * 4 * 3);
        assert_eq!(t.messages.pvoucher_delivered, t.messages.pvoucher_sent);
        assert_eq!(t.messages.bytes_sent, 3 * 4 * 3 * 99);
        for r in &t.rounds {
            assert_eq!(r.last_decided_tick - r.start_tick, 1, "round {}", r.round);
            assert_eq!(r.claimants.len(), 1);
            assert!(r.leader.is_some());
        }
        // Every round was pruned; only setup material remains registered.
        assert_eq!(t.final_handle_count, 5);
        assert!(t.decrypts_only_vouchers());
        assert!(!t.seed_was_decrypted());
        // All processes evaluated identical pipelines.
        assert!(t.gates_per_process.iter().all(|&g| g == t.gates_per_process[0] && g > 0));
    }

    #[test]
    fn transcripts_are_pure_functions_of_scenario_and_seed() {
        let mut scenario = Scenario::honest(vec![3, 1, 2, 1], 4);
        scenario.d = 2;
        scenario.corrupted = vec![1];
        scenario.strategy = AdversaryStrategy::ForgeShares;
        scenario.schedule = SchedulePolicy::Random { max_delay: 4 };
        scenario.record_envelopes = true;
        let a = run(&scenario, 42).unwrap().to_jsonl();
        let b = run(&scenario, 42).unwrap().to_jsonl();
        assert_eq!(a, b);
        let c = run(&scenario, 43).unwrap().to_jsonl();
        assert_ne!(a, c);
    }

    #[test]
    fn every_strategy_terminates_under_every_schedule_at_full_corruption() {
        let policies = [
            SchedulePolicy::Fifo,
            SchedulePolicy::Random { max_delay: 5 },
            SchedulePolicy::Starve {
                victim: 0,
                release_tick: 40,
            },
            SchedulePolicy::CorruptedFirst { correct_delay: 7 },
        ];
        for strategy in AdversaryStrategy::ALL {
            for policy in policies {
                let mut scenario = Scenario::honest(vec![1, 1, 1, 1, 1], 4);
                scenario.d = 2;
                // Corrupted stake 2 sits exactly at the bound s_f = 2.
                scenario.corrupted = vec![3, 4];
                scenario.strategy = strategy;
                scenario.schedule = policy;
                let t = run(&scenario, 9).unwrap();
                assert!(
                    t.completed(),
                    "strategy {strategy:?} under {policy:?} failed to complete"
                );
                for r in &t.rounds {
                    assert_eq!(r.claimants.len(), 1, "strategy {strategy:?} round {}", r.round);
                }
            }
        }
    }

    #[test]
    fn starvation_delays_the_victim_without_blocking_the_run() {
        let mut scenario = Scenario::honest(vec![1, 1, 1], 2);
        scenario.schedule = SchedulePolicy::Starve {
            victim: 0,
            release_tick: 40,
        };
        let t = run(&scenario, 5).unwrap();
        assert!(t.completed());
        let r1 = &t.rounds[0];
        // Two unstarved processes reach the threshold a tick after start.
        assert_eq!(r1.first_decided_tick, r1.start_tick + 1);
        // The victim's shares arrive only after release.
        assert!(r1.last_decided_tick >= 40, "victim decided at {}", r1.last_decided_tick);
    }

    #[test]
    fn exhausted_budget_reports_a_liveness_violation() {
        let mut scenario = Scenario::honest(vec![2, 1], 1);
        scenario.schedule = SchedulePolicy::Starve {
            victim: 1,
            release_tick: 100,
        };
        scenario.max_ticks = 20;
        let t = run(&scenario, 3).unwrap();
        assert!(!t.completed());
        assert_eq!(
            t.outcome,
            RunOutcome::LivenessViolation {
                undecided_rounds: 1,
                at_tick: t.ticks,
            }
        );
    }

    #[test]
    fn stolen_proofs_are_never_accepted() {
        let mut scenario = Scenario::honest(vec![1, 1, 1, 1], 6);
        scenario.corrupted = vec![3];
        scenario.enable_chain = true;
        let t = run(&scenario, 17).unwrap();
        assert!(t.completed());
        let mut attempts = 0u32;
        for r in &t.rounds {
            let chain = r.chain.as_ref().expect("chain enabled");
            assert_eq!(chain.steal_accepts, 0, "round {}", r.round);
            let leader = r.leader.expect("honest committee always has a claimant");
            if leader == 3 {
                // The thief was the leader: it receives no foreign proposal
                // to steal, and its own honest proposal is accepted.
                assert_eq!(chain.steal_attempts, 0);
                assert_eq!(chain.accepted_by, 3);
            } else {
                assert_eq!(chain.steal_attempts, 3);
                // Each of 3 impersonations is rejected by the correct
                // receivers among the other 3 processes.
                assert_eq!(chain.rejected, 9);
                assert_eq!(chain.accepted_by, 2);
            }
            attempts += chain.steal_attempts;
        }
        assert!(attempts > 0, "the thief never got a chance to steal");
    }

    #[test]
    fn envelopes_record_each_delivery() {
        let mut scenario = Scenario::honest(vec![1, 1, 1], 1);
        scenario.record_envelopes = true;
        let t = run(&scenario, 2).unwrap();
        assert_eq!(t.envelopes.len(), 6);
        for e in &t.envelopes {
            assert_eq!(e.kind, "pvoucher");
            assert_eq!(e.bytes, 99);
            assert!(e.delivered_tick > e.sent_tick);
        }
    }

    #[test]
    fn permutations_elect_distinct_leaders_and_prune_cleanly() {
        let mut scenario = Scenario::honest(vec![3, 1, 2], 9);
        scenario.d = 3;
        let t = run(&scenario, 23).unwrap();
        assert!(t.completed());
        for perm in 0..3 {
            let leaders: BTreeSet<u16> = t.rounds[perm * 3..perm * 3 + 3]
                .iter()
                .map(|r| r.leader.expect("unique claimant"))
                .collect();
            assert_eq!(leaders.len(), 3, "permutation {perm} repeated a leader");
        }
        assert_eq!(t.final_handle_count, 4);
    }
}
