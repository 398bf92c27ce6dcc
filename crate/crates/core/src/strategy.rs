//! Miner behavior.
//!
//! Quantum miners run a batch of Grover iterations and measure at the end.
//! When a competing block arrives mid-run, a peaceful miner throws the run
//! away and starts over on the new tip, while an aggressive miner measures
//! immediately, hoping the partial run already succeeded. Classical miners
//! are modeled at block granularity: the time to the next valid hash is
//! exponential, so nothing is lost by restarting.
//!
//! Mallory is a timestamp attacker: she waits for her victim's block, then
//! mines a sibling whose committed timestamp is the victim's plus a fixed
//! offset.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::chain::{BlockId, MinerId};
use crate::error::{Error, Result};
use crate::grover::{amplitude_probability, CalibratedRun, ClassicalModel};

/// Minutes per second.
pub const SECOND: f64 = 1.0 / 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    QuantumPeaceful,
    QuantumAggressive,
    ClassicalPeaceful,
    ClassicalAggressive,
    Mallory,
}

impl StrategyKind {
    pub fn is_quantum(self) -> bool {
        matches!(self, StrategyKind::QuantumPeaceful | StrategyKind::QuantumAggressive)
    }

    pub fn is_classical(self) -> bool {
        matches!(self, StrategyKind::ClassicalPeaceful | StrategyKind::ClassicalAggressive)
    }

    pub fn is_aggressive(self) -> bool {
        matches!(self, StrategyKind::QuantumAggressive | StrategyKind::ClassicalAggressive)
    }
}

/// Distribution of the iteration count a quantum miner commits to per run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QDistribution {
    Point { q: u64 },
    /// Inclusive on both ends.
    Uniform { min: u64, max: u64 },
}

impl QDistribution {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match *self {
            QDistribution::Point { q } => q,
            QDistribution::Uniform { min, max } => rng.random_range(min..=max),
        }
    }

    pub fn max(&self) -> u64 {
        match *self {
            QDistribution::Point { q } => q,
            QDistribution::Uniform { max, .. } => max,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            QDistribution::Point { .. } => Ok(()),
            QDistribution::Uniform { min, max } if min <= max => Ok(()),
            QDistribution::Uniform { min, max } => Err(Error::InvalidRoster(format!(
                "uniform q_distribution has min {min} > max {max}"
            ))),
        }
    }
}

/// How a miner picks the timestamp it commits to before mining.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimestampPolicy {
    /// The time the run is scheduled to finish.
    CommitExpectedFinish,
    /// The time the run starts.
    CommitStart,
    /// The victim's committed timestamp plus `offset` minutes.
    MalloryOffset { offset: f64 },
}

/// How long Mallory's sibling block takes to find.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MalloryFind {
    /// Always succeeds after `delay` minutes.
    Deterministic { delay: f64 },
    /// A regular Grover run; on failure Mallory waits for the next victim block.
    Stochastic,
}

impl Default for MalloryFind {
    fn default() -> Self {
        MalloryFind::Deterministic { delay: 100.0 * SECOND }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinerSpec {
    pub miner_id: MinerId,
    pub strategy: StrategyKind,
    /// Falls back to the calibrated point mass when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_distribution: Option<QDistribution>,
    pub timestamp_policy: TimestampPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_victim: Option<MinerId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mallory_find: Option<MalloryFind>,
    /// Replaces the calibrated full-run success probability. Useful for
    /// scripted scenarios: 0 makes a pure observer, 1 a certain finder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_full: Option<f64>,
}

impl MinerSpec {
    pub fn new(miner_id: MinerId, strategy: StrategyKind) -> Self {
        Self {
            miner_id,
            strategy,
            q_distribution: None,
            timestamp_policy: TimestampPolicy::CommitExpectedFinish,
            target_victim: None,
            mallory_find: None,
            p_full: None,
        }
    }

    pub fn mallory(miner_id: MinerId, victim: MinerId, offset: f64) -> Self {
        Self {
            miner_id,
            strategy: StrategyKind::Mallory,
            q_distribution: None,
            timestamp_policy: TimestampPolicy::MalloryOffset { offset },
            target_victim: Some(victim),
            mallory_find: Some(MalloryFind::default()),
            p_full: None,
        }
    }

    pub fn with_q(mut self, q: QDistribution) -> Self {
        self.q_distribution = Some(q);
        self
    }

    pub fn with_timestamp_policy(mut self, policy: TimestampPolicy) -> Self {
        self.timestamp_policy = policy;
        self
    }

    pub fn with_p_full(mut self, p: f64) -> Self {
        self.p_full = Some(p);
        self
    }

    pub fn with_mallory_find(mut self, find: MalloryFind) -> Self {
        self.mallory_find = Some(find);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mallory_policy = matches!(self.timestamp_policy, TimestampPolicy::MalloryOffset { .. });
        match self.strategy {
            StrategyKind::Mallory => {
                if self.target_victim.is_none() {
                    return Err(Error::InvalidRoster(format!(
                        "miner {}: mallory requires target_victim",
                        self.miner_id
                    )));
                }
                if !mallory_policy {
                    return Err(Error::InvalidRoster(format!(
                        "miner {}: mallory requires the mallory_offset timestamp policy",
                        self.miner_id
                    )));
                }
                if self.target_victim == Some(self.miner_id) {
                    return Err(Error::InvalidRoster(format!(
                        "miner {}: mallory cannot target herself",
                        self.miner_id
                    )));
                }
            }
            _ => {
                if mallory_policy {
                    return Err(Error::InvalidRoster(format!(
                        "miner {}: mallory_offset is reserved for mallory",
                        self.miner_id
                    )));
                }
                if self.target_victim.is_some() || self.mallory_find.is_some() {
                    return Err(Error::InvalidRoster(format!(
                        "miner {}: target_victim and mallory_find apply only to mallory",
                        self.miner_id
                    )));
                }
            }
        }
        if let Some(q) = &self.q_distribution {
            q.validate()?;
        }
        if let Some(p) = self.p_full {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidRoster(format!(
                    "miner {}: p_full {p} outside [0, 1]",
                    self.miner_id
                )));
            }
        }
        if let Some(MalloryFind::Deterministic { delay }) = self.mallory_find {
            if !(delay >= 0.0 && delay.is_finite()) {
                return Err(Error::InvalidRoster(format!(
                    "miner {}: mallory delay must be nonnegative",
                    self.miner_id
                )));
            }
        }
        Ok(())
    }
}

/// A miner's in-flight attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct MinerState {
    pub current_parent: BlockId,
    pub run_start: f64,
    pub q_committed: u64,
    pub committed_timestamp: f64,
    /// When the attempt resolves: end of the Grover run, the classical find
    /// time, or Mallory's deterministic find.
    pub finish_at: f64,
}

/// What the engine should do after a miner reacts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    /// Keep the current attempt going.
    Continue,
    /// Drop the current attempt and start a new one on `parent`.
    Restart { parent: BlockId, after_failure: bool },
    /// A block was found; broadcast it. The miner then mines on top of it.
    Emit {
        parent: BlockId,
        timestamp: f64,
        /// Found by measuring before the run was complete.
        early: bool,
    },
    /// Nothing to do until the next victim block (Mallory only).
    Idle,
}

/// How a node's view changed on receiving a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reception {
    /// The tip the node's fork choice selected after the arrival.
    pub selected_tip: BlockId,
    /// The selected tip differs from the one the miner was working on.
    pub tip_changed: bool,
    /// The incoming block sits at the same height as the miner's current
    /// parent without displacing it.
    pub tie: bool,
}

/// A spec bound to its calibration.
#[derive(Debug, Clone)]
pub struct Miner {
    spec: MinerSpec,
    run: CalibratedRun,
    classical: ClassicalModel,
    restart_delay: f64,
    aggressive_on_tie: bool,
    find_time: Option<Exp<f64>>,
}

impl Miner {
    pub fn new(
        spec: MinerSpec,
        run: CalibratedRun,
        classical: ClassicalModel,
        restart_delay: f64,
        aggressive_on_tie: bool,
    ) -> Result<Self> {
        spec.validate()?;
        let find_time = if spec.strategy.is_classical() {
            let rate = match spec.p_full {
                // interpret the override as success probability per calibrated run
                Some(p) => p / run.run_minutes().max(f64::MIN_POSITIVE),
                None => classical.find_rate(),
            };
            if rate > 0.0 {
                Some(Exp::new(rate).map_err(|e| Error::InvalidParameter {
                    name: "classical find rate",
                    reason: e.to_string(),
                })?)
            } else {
                None
            }
        } else {
            None
        };
        Ok(Self {
            spec,
            run,
            classical,
            restart_delay,
            aggressive_on_tie,
            find_time,
        })
    }

    pub fn spec(&self) -> &MinerSpec {
        &self.spec
    }

    pub fn id(&self) -> MinerId {
        self.spec.miner_id
    }

    pub fn strategy(&self) -> StrategyKind {
        self.spec.strategy
    }

    pub fn t_iteration(&self) -> f64 {
        self.run.t_iteration
    }

    pub fn restart_delay(&self) -> f64 {
        self.restart_delay
    }

    /// Success probability after `q` iterations (full or partial run).
    pub fn success_probability(&self, q: u64, q_committed: u64) -> f64 {
        match self.spec.p_full {
            // keep the override exact at completion; scale partial runs by the
            // same amplitude law
            Some(p) if q >= q_committed => p,
            Some(p) => {
                let theta = p.sqrt().asin() / (2.0 * q_committed as f64 + 1.0);
                amplitude_probability(q, theta)
            }
            None => self.run.success_for(q),
        }
    }

    /// Whole iterations completed by `now`, capped at the committed count.
    pub fn iterations_elapsed(&self, state: &MinerState, now: f64) -> u64 {
        let raw = (now - state.run_start) / self.run.t_iteration;
        if raw <= 0.0 {
            return 0;
        }
        ((raw + 1e-9).floor() as u64).min(state.q_committed)
    }

    /// Starts an attempt on `parent` at `now`.
    ///
    /// `victim_timestamp` is the committed timestamp of the victim block
    /// Mallory is answering; Mallory stays idle (`None`) without one.
    pub fn start_run<R: Rng + ?Sized>(
        &self,
        parent: BlockId,
        now: f64,
        victim_timestamp: Option<f64>,
        rng: &mut R,
    ) -> Option<MinerState> {
        let q_dist = self
            .spec
            .q_distribution
            .unwrap_or(QDistribution::Point { q: self.run.q_total });
        match self.spec.strategy {
            StrategyKind::QuantumPeaceful | StrategyKind::QuantumAggressive => {
                let q = q_dist.sample(rng);
                let finish_at = now + q as f64 * self.run.t_iteration;
                let committed_timestamp = match self.spec.timestamp_policy {
                    TimestampPolicy::CommitExpectedFinish => finish_at,
                    _ => now,
                };
                Some(MinerState {
                    current_parent: parent,
                    run_start: now,
                    q_committed: q,
                    committed_timestamp,
                    finish_at,
                })
            }
            StrategyKind::ClassicalPeaceful | StrategyKind::ClassicalAggressive => {
                let finish_at = match &self.find_time {
                    Some(exp) => now + exp.sample(rng),
                    None => f64::INFINITY,
                };
                // Classical miners refresh the timestamp with every nonce, so
                // the expected finish is the find time itself.
                let committed_timestamp = match self.spec.timestamp_policy {
                    TimestampPolicy::CommitExpectedFinish if finish_at.is_finite() => finish_at,
                    _ => now,
                };
                Some(MinerState {
                    current_parent: parent,
                    run_start: now,
                    q_committed: 0,
                    committed_timestamp,
                    finish_at,
                })
            }
            StrategyKind::Mallory => {
                let anchor = victim_timestamp?;
                let offset = match self.spec.timestamp_policy {
                    TimestampPolicy::MalloryOffset { offset } => offset,
                    _ => unreachable!("validated"),
                };
                let (q, finish_at) = match self.spec.mallory_find.unwrap_or_default() {
                    MalloryFind::Deterministic { delay } => (0, now + delay),
                    MalloryFind::Stochastic => {
                        let q = q_dist.sample(rng);
                        (q, now + q as f64 * self.run.t_iteration)
                    }
                };
                Some(MinerState {
                    current_parent: parent,
                    run_start: now,
                    q_committed: q,
                    committed_timestamp: anchor + offset,
                    finish_at,
                })
            }
        }
    }

    /// Reaction to a block arriving mid-attempt.
    pub fn on_block_received<R: Rng + ?Sized>(
        &self,
        state: &MinerState,
        incoming: Reception,
        now: f64,
        rng: &mut R,
    ) -> Action {
        let triggered = incoming.tip_changed || (incoming.tie && self.aggressive_on_tie);
        match self.spec.strategy {
            StrategyKind::QuantumPeaceful | StrategyKind::ClassicalPeaceful => {
                if incoming.tip_changed {
                    Action::Restart {
                        parent: incoming.selected_tip,
                        after_failure: false,
                    }
                } else {
                    Action::Continue
                }
            }
            StrategyKind::QuantumAggressive if triggered => {
                let elapsed = self.iterations_elapsed(state, now);
                let p = self.success_probability(elapsed, state.q_committed);
                debug_assert!(
                    elapsed == state.q_committed
                        || p <= self.success_probability(state.q_committed, state.q_committed) + 1e-15
                        || (2 * state.q_committed + 1) as f64 * self.run.theta_eff > std::f64::consts::FRAC_PI_2
                );
                if rng.random::<f64>() < p {
                    Action::Emit {
                        parent: state.current_parent,
                        timestamp: state.committed_timestamp,
                        early: elapsed < state.q_committed,
                    }
                } else {
                    Action::Restart {
                        parent: incoming.selected_tip,
                        after_failure: true,
                    }
                }
            }
            StrategyKind::ClassicalAggressive if triggered => {
                // the single hash in flight when the block arrived
                if rng.random::<f64>() < self.classical.p_hash() {
                    Action::Emit {
                        parent: state.current_parent,
                        timestamp: state.committed_timestamp,
                        early: true,
                    }
                } else {
                    Action::Restart {
                        parent: incoming.selected_tip,
                        after_failure: false,
                    }
                }
            }
            StrategyKind::QuantumAggressive | StrategyKind::ClassicalAggressive => Action::Continue,
            StrategyKind::Mallory => Action::Continue,
        }
    }

    /// Resolution of an attempt that ran to its scheduled end.
    pub fn on_run_complete<R: Rng + ?Sized>(&self, state: &MinerState, rng: &mut R) -> Action {
        let emit = Action::Emit {
            parent: state.current_parent,
            timestamp: state.committed_timestamp,
            early: false,
        };
        match self.spec.strategy {
            StrategyKind::QuantumPeaceful | StrategyKind::QuantumAggressive => {
                let p = self.success_probability(state.q_committed, state.q_committed);
                if rng.random::<f64>() < p {
                    emit
                } else {
                    Action::Restart {
                        parent: state.current_parent,
                        after_failure: true,
                    }
                }
            }
            StrategyKind::ClassicalPeaceful | StrategyKind::ClassicalAggressive => emit,
            StrategyKind::Mallory => match self.spec.mallory_find.unwrap_or_default() {
                MalloryFind::Deterministic { .. } => emit,
                MalloryFind::Stochastic => {
                    let p = self.success_probability(state.q_committed, state.q_committed);
                    if rng.random::<f64>() < p {
                        emit
                    } else {
                        Action::Idle
                    }
                }
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grover::calibrate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn classical() -> ClassicalModel {
        ClassicalModel::calibrated(1000, 10.0, 6e14).unwrap()
    }

    fn miner(spec: MinerSpec, t_iteration: f64) -> Miner {
        let run = calibrate(1000, 1.0, 10.0, t_iteration).unwrap();
        Miner::new(spec, run, classical(), 0.0, true).unwrap()
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn commit_expected_finish() {
        let spec = MinerSpec::new(MinerId(0), StrategyKind::QuantumPeaceful).with_q(QDistribution::Point { q: 20 });
        let m = miner(spec, 0.1);
        let s = m.start_run(BlockId(0), 0.0, None, &mut rng()).unwrap();
        assert!((s.committed_timestamp - 2.0).abs() < 1e-12);
        assert_eq!(s.q_committed, 20);
        assert_eq!(s.finish_at, s.committed_timestamp);
    }

    #[test]
    fn commit_start() {
        let spec = MinerSpec::new(MinerId(0), StrategyKind::QuantumAggressive)
            .with_timestamp_policy(TimestampPolicy::CommitStart);
        let m = miner(spec, 0.01);
        let s = m.start_run(BlockId(0), 7.3, None, &mut rng()).unwrap();
        assert_eq!(s.committed_timestamp, 7.3);
    }

    #[test]
    fn mallory_anchors_on_victim() {
        let m = miner(MinerSpec::mallory(MinerId(1), MinerId(0), SECOND), 0.01);
        assert!(m.start_run(BlockId(0), 3.0, None, &mut rng()).is_none());
        let s_a = 42.0;
        let s = m.start_run(BlockId(0), 42.0 + SECOND, Some(s_a), &mut rng()).unwrap();
        assert_eq!(s.committed_timestamp, s_a + 1.0 / 60.0);
        assert!((s.finish_at - (42.0 + 101.0 * SECOND)).abs() < 1e-12);
    }

    #[test]
    fn peaceful_discards() {
        let m = miner(MinerSpec::new(MinerId(0), StrategyKind::QuantumPeaceful), 0.01);
        let s = m.start_run(BlockId(0), 0.0, None, &mut rng()).unwrap();
        for now in [0.0, 0.3, 0.99] {
            let a = m.on_block_received(
                &s,
                Reception {
                    selected_tip: BlockId(5),
                    tip_changed: true,
                    tie: false,
                },
                now,
                &mut rng(),
            );
            assert_eq!(
                a,
                Action::Restart {
                    parent: BlockId(5),
                    after_failure: false
                }
            );
        }
        let a = m.on_block_received(
            &s,
            Reception {
                selected_tip: BlockId(0),
                tip_changed: false,
                tie: true,
            },
            0.5,
            &mut rng(),
        );
        assert_eq!(a, Action::Continue);
    }

    #[test]
    fn aggressive_measure_probabilities() {
        let m = miner(MinerSpec::new(MinerId(0), StrategyKind::QuantumAggressive), 0.01);
        let s = m.start_run(BlockId(0), 0.0, None, &mut rng()).unwrap();
        assert_eq!(m.iterations_elapsed(&s, 0.0), 0);
        let p0 = m.success_probability(0, s.q_committed);
        assert!((p0 - m.run.theta_eff.sin().powi(2)).abs() < 1e-20);
        assert!(p0 < 1e-7);
        assert_eq!(m.iterations_elapsed(&s, s.finish_at), s.q_committed);
        let pf = m.success_probability(s.q_committed, s.q_committed);
        assert!((pf - m.run.p_full).abs() / m.run.p_full < 1e-12);
        // monotone along the run
        let mut prev = 0.0;
        for e in 0..=s.q_committed {
            let p = m.success_probability(e, s.q_committed);
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn aggressive_emits_with_committed_timestamp() {
        let spec = MinerSpec::new(MinerId(0), StrategyKind::QuantumAggressive).with_p_full(1.0);
        let m = miner(spec, 0.01);
        let s = m.start_run(BlockId(3), 0.0, None, &mut rng()).unwrap();
        let a = m.on_block_received(
            &s,
            Reception {
                selected_tip: BlockId(4),
                tip_changed: true,
                tie: false,
            },
            s.finish_at,
            &mut rng(),
        );
        assert_eq!(
            a,
            Action::Emit {
                parent: BlockId(3),
                timestamp: s.committed_timestamp,
                early: false
            }
        );
    }

    #[test]
    fn run_complete_extremes() {
        for (p, expect_emit) in [(1.0, true), (0.0, false)] {
            let spec = MinerSpec::new(MinerId(0), StrategyKind::QuantumPeaceful).with_p_full(p);
            let m = miner(spec, 0.01);
            let mut r = rng();
            for _ in 0..200 {
                let s = m.start_run(BlockId(0), 0.0, None, &mut r).unwrap();
                let a = m.on_run_complete(&s, &mut r);
                assert_eq!(matches!(a, Action::Emit { .. }), expect_emit);
            }
        }
    }

    #[test]
    fn classical_find_and_timestamp() {
        let m = miner(MinerSpec::new(MinerId(0), StrategyKind::ClassicalPeaceful), 0.01);
        let mut r = rng();
        let s = m.start_run(BlockId(0), 2.0, None, &mut r).unwrap();
        assert!(s.finish_at > 2.0);
        assert_eq!(s.committed_timestamp, s.finish_at);
        assert!(matches!(m.on_run_complete(&s, &mut r), Action::Emit { .. }));
    }

    #[test]
    fn spec_validation() {
        let mut bad = MinerSpec::mallory(MinerId(1), MinerId(0), SECOND);
        bad.target_victim = None;
        assert!(bad.validate().is_err());
        let bad = MinerSpec::new(MinerId(0), StrategyKind::Mallory);
        assert!(bad.validate().is_err());
        let bad = MinerSpec::new(MinerId(0), StrategyKind::QuantumPeaceful)
            .with_timestamp_policy(TimestampPolicy::MalloryOffset { offset: 1.0 });
        assert!(bad.validate().is_err());
        let bad = MinerSpec::new(MinerId(0), StrategyKind::QuantumPeaceful).with_q(QDistribution::Uniform { min: 5, max: 2 });
        assert!(bad.validate().is_err());
        assert!(MinerSpec::mallory(MinerId(1), MinerId(0), SECOND).validate().is_ok());
    }
}
