//! Mallory's timestamp attack against a victim.
//!
//! Alice finds a block and it reaches every other node `victim_delay` later.
//! Mallory, on seeing it, starts mining a sibling whose committed timestamp
//! is Alice's plus `mallory_offset`, and finds it `mallory_delay` later. The
//! remaining nodes are observers that never find blocks; the attack succeeds
//! in a replication when every observer ends up mining on Mallory's block.

use serde::{Deserialize, Serialize};

use super::{
    run_replication_observed, Calibration, DelayModel, Horizon, NetworkConfig, Observer, SimConfig, TipChoice,
    Topology, DEFAULT_QUEUE_CAP,
};
use crate::chain::{Block, BlockId, MinerId};
use crate::error::{Error, Result};
use crate::strategy::{MalloryFind, MinerSpec, QDistribution, StrategyKind, SECOND};
use crate::tiebreak::{TieBreakRule, TipView};

pub const ALICE: MinerId = MinerId(0);
pub const MALLORY: MinerId = MinerId(1);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackScenario {
    pub rule: TieBreakRule,
    /// Minutes for any block to reach any other node.
    pub victim_delay: f64,
    /// Minutes Mallory needs to find her block.
    pub mallory_delay: f64,
    /// Added to Alice's timestamp to form Mallory's.
    pub mallory_offset: f64,
    pub observers: usize,
    pub replications: usize,
    pub seed: u64,
}

impl AttackScenario {
    pub fn new(rule: TieBreakRule) -> Self {
        Self {
            rule,
            victim_delay: SECOND,
            mallory_delay: 100.0 * SECOND,
            mallory_offset: SECOND,
            observers: 8,
            replications: 100,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidParameter {
                name: "replications",
                reason: "must be at least 1".into(),
            });
        }
        if self.observers == 0 {
            return Err(Error::InvalidParameter {
                name: "observers",
                reason: "need at least one third-party node".into(),
            });
        }
        for (name, v) in [
            ("victim_delay", self.victim_delay),
            ("mallory_delay", self.mallory_delay),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be a nonnegative number of minutes, got {v}"),
                });
            }
        }
        Ok(())
    }

    // Alice's first find lands uniformly in [3, 6] minutes; her next run
    // cannot finish before Mallory's block has reached everyone.
    fn alice_q(&self) -> QDistribution {
        let min_run = (3.0f64).max(self.mallory_delay + 3.0 * self.victim_delay + 1.0);
        let t_iteration = SECOND;
        let lo = (min_run / t_iteration).ceil() as u64;
        QDistribution::Uniform { min: lo, max: 2 * lo }
    }

    fn sim_config(&self, seed: u64) -> SimConfig {
        let n = self.observers + 2;
        let alice_q = self.alice_q();
        let mut miners = vec![
            MinerSpec::new(ALICE, StrategyKind::QuantumPeaceful)
                .with_q(alice_q)
                .with_p_full(1.0),
            MinerSpec::mallory(MALLORY, ALICE, self.mallory_offset)
                .with_mallory_find(MalloryFind::Deterministic { delay: self.mallory_delay }),
        ];
        for i in 2..n {
            miners.push(MinerSpec::new(MinerId(i as u32), StrategyKind::QuantumPeaceful).with_p_full(0.0));
        }
        let horizon = alice_q.max() as f64 * SECOND + self.mallory_delay + 3.0 * self.victim_delay + 1.0;
        SimConfig {
            network: NetworkConfig {
                n_miners: n,
                topology: Topology::Clique,
                delay_model: DelayModel::Constant { d: self.victim_delay },
                horizon: Horizon::Minutes { minutes: horizon },
                seed,
            },
            miners,
            tie_break_rule: self.rule,
            calibration: Calibration::new(1.0, 10.0, SECOND),
            restart_delay: 0.0,
            aggressive_on_tie: true,
            queue_cap: DEFAULT_QUEUE_CAP,
            emit_trace: false,
        }
    }
}

/// What happened in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub replication: usize,
    pub seed: u64,
    pub alice_block: Option<u64>,
    pub mallory_block: Option<u64>,
    /// Observers on Mallory's block once it reached them.
    pub observers_on_mallory: usize,
    pub observers_on_alice: usize,
    /// Alice's and Mallory's `|s − t|` at an observer, in minutes.
    pub alice_delta: Option<f64>,
    pub mallory_delta: Option<f64>,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub rule: TieBreakRule,
    pub outcomes: Vec<AttackOutcome>,
    pub success_rate: f64,
}

#[derive(Default)]
struct Watch {
    alice_block: Option<BlockId>,
    mallory_block: Option<BlockId>,
    on_mallory: usize,
    on_alice: usize,
    alice_delta: Option<f64>,
    mallory_delta: Option<f64>,
}

impl Observer for Watch {
    fn on_block(&mut self, block: &Block, _early: bool) {
        match block.miner() {
            Some(ALICE) if self.alice_block.is_none() => self.alice_block = Some(block.id()),
            Some(MALLORY) if self.mallory_block.is_none() => self.mallory_block = Some(block.id()),
            _ => {}
        }
    }

    fn on_tip_choice(&mut self, c: &TipChoice<'_>) {
        if c.node == ALICE || c.node == MALLORY {
            return;
        }
        let (Some(a), Some(m)) = (self.alice_block, self.mallory_block) else {
            return;
        };
        if c.incoming != m {
            return;
        }
        let find = |id: BlockId| c.tips.iter().find(|v| v.block_id == id).map(TipView::delta);
        self.alice_delta = self.alice_delta.or(find(a));
        self.mallory_delta = self.mallory_delta.or(find(m));
        if c.chosen == m {
            self.on_mallory += 1;
        } else if c.chosen == a {
            self.on_alice += 1;
        }
    }
}

/// Runs the scenario; replication `k` uses seed `seed + k`.
pub fn run_attack(scenario: &AttackScenario) -> Result<AttackReport> {
    scenario.validate()?;
    let mut outcomes = Vec::with_capacity(scenario.replications);
    for k in 0..scenario.replications {
        let seed = scenario.seed.wrapping_add(k as u64);
        let mut watch = Watch::default();
        run_replication_observed(&scenario.sim_config(seed), &mut watch)?;
        let success = watch.mallory_block.is_some() && watch.on_mallory == scenario.observers;
        outcomes.push(AttackOutcome {
            replication: k,
            seed,
            alice_block: watch.alice_block.map(|b| b.0),
            mallory_block: watch.mallory_block.map(|b| b.0),
            observers_on_mallory: watch.on_mallory,
            observers_on_alice: watch.on_alice,
            alice_delta: watch.alice_delta,
            mallory_delta: watch.mallory_delta,
            success,
        });
    }
    let wins = outcomes.iter().filter(|o| o.success).count();
    Ok(AttackReport {
        rule: scenario.rule,
        success_rate: wins as f64 / outcomes.len() as f64,
        outcomes,
    })
}
