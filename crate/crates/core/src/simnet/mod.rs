//! Deterministic discrete-event simulation of a mining network.
//!
//! Nodes form a clique. Every node is also a miner. A found block is
//! delivered to every other node after the configured delay, and each node
//! keeps its own view of the competing tips at its longest height.
//! Replications are single threaded and fully determined by the config and
//! seed; [`run_batch`] runs independent replications in parallel.

mod attack;
mod batch;
mod engine;
pub mod queue;

use serde::{Deserialize, Serialize};

use crate::analytics::DEFAULT_BLOCK_INTERVAL;
use crate::chain::{MinerId, StaleStats};
use crate::error::{Error, Result};
use crate::grover::{calibrate, CalibratedRun, ClassicalModel};
use crate::strategy::{MinerSpec, StrategyKind};
use crate::tiebreak::TieBreakRule;

pub use attack::{run_attack, AttackOutcome, AttackReport, AttackScenario};
pub use batch::{run_batch, BatchRow, SweepOverride};
pub use engine::{run_replication, run_replication_observed, NoopObserver, Observer, TipChoice};

/// Default pending-event cap before a run is declared runaway.
pub const DEFAULT_QUEUE_CAP: usize = 50_000_000;

/// Ten tera-hashes per second.
pub const DEFAULT_HASHES_PER_MINUTE: f64 = 6e14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    #[default]
    Clique,
}

/// Propagation delay between nodes, in minutes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelayModel {
    Zero,
    Constant { d: f64 },
    /// `matrix[from][to]`; zero diagonal.
    PerEdge { matrix: Vec<Vec<f64>> },
}

impl DelayModel {
    pub fn delay(&self, from: MinerId, to: MinerId) -> f64 {
        if from == to {
            return 0.0;
        }
        match self {
            DelayModel::Zero => 0.0,
            DelayModel::Constant { d } => *d,
            DelayModel::PerEdge { matrix } => matrix[from.index()][to.index()],
        }
    }

    pub fn max_delay(&self) -> f64 {
        match self {
            DelayModel::Zero => 0.0,
            DelayModel::Constant { d } => *d,
            DelayModel::PerEdge { matrix } => matrix.iter().flatten().copied().fold(0.0, f64::max),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            DelayModel::Zero => Ok(()),
            DelayModel::Constant { d } if *d >= 0.0 && d.is_finite() => Ok(()),
            DelayModel::Constant { d } => Err(Error::InvalidParameter {
                name: "delay_model.d",
                reason: format!("must be a nonnegative finite delay, got {d}"),
            }),
            DelayModel::PerEdge { matrix } => {
                if matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
                    return Err(Error::InvalidParameter {
                        name: "delay_model.matrix",
                        reason: format!("must be {n}×{n}"),
                    });
                }
                for (i, row) in matrix.iter().enumerate() {
                    if row[i] != 0.0 {
                        return Err(Error::InvalidParameter {
                            name: "delay_model.matrix",
                            reason: format!("diagonal entry {i} must be zero"),
                        });
                    }
                    if row.iter().any(|&d| !(d >= 0.0 && d.is_finite())) {
                        return Err(Error::InvalidParameter {
                            name: "delay_model.matrix",
                            reason: format!("row {i} has a negative or non-finite delay"),
                        });
                    }
                }
                Ok(())
            }
        }
    }
}

/// When a replication stops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Horizon {
    /// Stop once the longest chain reaches this many blocks (all events at
    /// that instant are still processed).
    MainChainBlocks { blocks: u64 },
    /// Stop after this much simulated time.
    Minutes { minutes: f64 },
}

impl Default for Horizon {
    fn default() -> Self {
        Horizon::MainChainBlocks { blocks: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub n_miners: usize,
    #[serde(default)]
    pub topology: Topology,
    pub delay_model: DelayModel,
    #[serde(default)]
    pub horizon: Horizon,
    pub seed: u64,
}

/// Parameters that fix the difficulty for the whole run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Minutes of Grover iterations per run.
    pub t: f64,
    pub block_interval: f64,
    /// Minutes per Grover iteration.
    pub t_iteration: f64,
    #[serde(default = "default_hash_rate")]
    pub hashes_per_minute: f64,
}

fn default_hash_rate() -> f64 {
    DEFAULT_HASHES_PER_MINUTE
}

impl Calibration {
    pub fn new(t: f64, block_interval: f64, t_iteration: f64) -> Self {
        Self {
            t,
            block_interval,
            t_iteration,
            hashes_per_minute: DEFAULT_HASHES_PER_MINUTE,
        }
    }

    pub fn with_t(t: f64) -> Self {
        Self::new(t, DEFAULT_BLOCK_INTERVAL, 0.01)
    }

    pub fn quantum(&self, n_miners: usize) -> Result<CalibratedRun> {
        calibrate(n_miners, self.t, self.block_interval, self.t_iteration)
    }

    pub fn classical(&self, n_miners: usize) -> Result<ClassicalModel> {
        ClassicalModel::calibrated(n_miners, self.block_interval, self.hashes_per_minute)
    }
}

/// Everything a replication needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub network: NetworkConfig,
    pub miners: Vec<MinerSpec>,
    pub tie_break_rule: TieBreakRule,
    pub calibration: Calibration,
    /// Pause, in minutes, before a new run after an unsuccessful measurement.
    #[serde(default)]
    pub restart_delay: f64,
    /// Aggressive miners also measure when a block ties their current tip.
    #[serde(default = "yes")]
    pub aggressive_on_tie: bool,
    #[serde(default = "default_queue_cap")]
    pub queue_cap: usize,
    /// Keep one record per block in the result.
    #[serde(default)]
    pub emit_trace: bool,
}

fn yes() -> bool {
    true
}

fn default_queue_cap() -> usize {
    DEFAULT_QUEUE_CAP
}

impl SimConfig {
    /// `n` identical miners of one strategy.
    pub fn homogeneous(
        n: usize,
        strategy: StrategyKind,
        rule: TieBreakRule,
        delay_model: DelayModel,
        horizon: Horizon,
        calibration: Calibration,
        seed: u64,
    ) -> Self {
        let miners = (0..n).map(|i| MinerSpec::new(MinerId(i as u32), strategy)).collect();
        Self {
            network: NetworkConfig {
                n_miners: n,
                topology: Topology::Clique,
                delay_model,
                horizon,
                seed,
            },
            miners,
            tie_break_rule: rule,
            calibration,
            restart_delay: 0.0,
            aggressive_on_tie: true,
            queue_cap: DEFAULT_QUEUE_CAP,
            emit_trace: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.network.n_miners;
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "network.n_miners",
                reason: "must be at least 1".into(),
            });
        }
        if self.miners.len() != n {
            return Err(Error::InvalidRoster(format!(
                "roster has {} miners but n_miners is {n}",
                self.miners.len()
            )));
        }
        for (i, m) in self.miners.iter().enumerate() {
            if m.miner_id.index() != i {
                return Err(Error::InvalidRoster(format!(
                    "miner at position {i} has id {}; ids must be 0..n in order",
                    m.miner_id
                )));
            }
            m.validate()?;
            if let Some(v) = m.target_victim {
                if v.index() >= n {
                    return Err(Error::InvalidRoster(format!(
                        "miner {i}: target_victim {v} is not in the roster"
                    )));
                }
            }
        }
        self.network.delay_model.validate(n)?;
        match self.network.horizon {
            Horizon::MainChainBlocks { blocks } if blocks > 0 => {}
            Horizon::Minutes { minutes } if minutes > 0.0 => {}
            _ => {
                return Err(Error::InvalidParameter {
                    name: "network.horizon",
                    reason: "must be positive".into(),
                })
            }
        }
        if !(self.restart_delay >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "restart_delay",
                reason: "must be nonnegative".into(),
            });
        }
        self.calibration.quantum(n)?;
        self.calibration.classical(n)?;
        Ok(())
    }
}

/// One row of the per-block trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub id: u64,
    pub parent: u64,
    pub miner: u32,
    pub timestamp: f64,
    pub created_at: f64,
    pub height: u64,
    pub in_main_chain: bool,
    /// Found by measuring before the committed run finished.
    pub early: bool,
}

/// Outcomes of block races: heights at which at least two blocks exist, up
/// to the canonical tip.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RaceStats {
    pub races: u64,
    /// Races in which at least one early-measured block took part.
    pub races_with_early: u64,
    /// ... of which an early-measured block ended up on the main chain.
    pub early_wins: u64,
    /// Races in which an aggressive miner's block took part.
    pub races_with_aggressive: u64,
    /// ... of which an aggressive miner's block won.
    pub aggressive_wins: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub stale_stats: StaleStats,
    pub per_miner_main_chain_blocks: Vec<u64>,
    pub per_miner_total_blocks: Vec<u64>,
    /// Heights at which two or more blocks were found.
    pub fork_events: u64,
    /// Fraction of blocks found within one iteration time after another
    /// block reached their miner.
    pub measure_correlation: f64,
    pub early_blocks: u64,
    pub races: RaceStats,
    pub canonical_tip: u64,
    pub end_time: f64,
    pub events_processed: u64,
    /// Hex digest of the processed event sequence.
    pub trace_digest: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<BlockRecord>,
}
