//! The TOML run configuration.
//!
//! ```toml
//! replications = 4
//! tie_break_rule = "new_penalty"
//!
//! [network]
//! n_miners = 100
//! seed = 7
//! delay_model = { kind = "constant", d = "0.5s" }
//! horizon = { kind = "main_chain_blocks", blocks = 10000 }
//!
//! [calibration]
//! t = "5min"
//! block_interval = "10min"
//! t_iteration = "1s"
//!
//! [[miners]]
//! count = 50
//! strategy = "quantum_aggressive"
//!
//! [[miners]]
//! count = 50
//! strategy = "quantum_peaceful"
//! ```
//!
//! Roster entries are expanded in order; miner ids are assigned from 0.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use qmine::chain::MinerId;
use qmine::simnet::{Calibration, DelayModel, Horizon, NetworkConfig, SimConfig, Topology, DEFAULT_QUEUE_CAP};
use qmine::strategy::{MalloryFind, MinerSpec, QDistribution, StrategyKind, TimestampPolicy, SECOND};
use qmine::tiebreak::TieBreakRule;

use crate::duration::Minutes;

/// A configuration problem, tagged with the offending field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ValidationError {
    pub path: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub replications: usize,
    pub tie_break_rule: TieBreakRule,
    pub network: NetworkSection,
    pub calibration: CalibrationSection,
    /// Defaults to `n_miners` peaceful quantum miners.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub miners: Vec<RosterEntry>,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub restart_delay: Minutes,
    #[serde(default = "yes")]
    pub aggressive_on_tie: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub n_miners: usize,
    #[serde(default)]
    pub topology: Topology,
    pub delay_model: DelaySection,
    #[serde(default)]
    pub horizon: HorizonSection,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelaySection {
    Zero,
    Constant { d: Minutes },
    PerEdge { matrix: Vec<Vec<Minutes>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HorizonSection {
    MainChainBlocks { blocks: u64 },
    Duration { length: Minutes },
}

impl Default for HorizonSection {
    fn default() -> Self {
        HorizonSection::MainChainBlocks { blocks: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    pub t: Minutes,
    pub block_interval: Minutes,
    pub t_iteration: Minutes,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub emit_trace: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RosterEntry {
    #[serde(default = "one")]
    pub count: usize,
    pub strategy: StrategyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_distribution: Option<QDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp_policy: Option<PolicySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_victim: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mallory_find: Option<MalloryFindSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_full: Option<f64>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySection {
    CommitExpectedFinish,
    CommitStart,
    MalloryOffset { offset: Minutes },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MalloryFindSection {
    Deterministic { delay: Minutes },
    Stochastic,
}

fn positive(path: &str, v: f64) -> Result<(), ValidationError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ValidationError::new(path, format!("must be positive, got {v} minutes")))
    }
}

fn nonnegative(path: &str, v: f64) -> Result<(), ValidationError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ValidationError::new(path, format!("must be nonnegative, got {v} minutes")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ValidationError> {
        toml::from_str(text).map_err(|e| ValidationError::new("config", e.to_string().trim_end().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every field and builds the simulator configuration.
    pub fn to_sim_config(&self) -> Result<SimConfig, ValidationError> {
        if self.replications == 0 {
            return Err(ValidationError::new("replications", "must be at least 1"));
        }
        let n = self.network.n_miners;
        if n == 0 {
            return Err(ValidationError::new("network.n_miners", "must be at least 1"));
        }

        let cal = &self.calibration;
        positive("calibration.block_interval", cal.block_interval.get())?;
        let (t, interval) = (cal.t.get(), cal.block_interval.get());
        if !(t > 0.0 && t < interval) {
            return Err(ValidationError::new(
                "calibration.t",
                format!("must lie strictly between 0 and block_interval ({interval} min), got {t} min"),
            ));
        }
        positive("calibration.t_iteration", cal.t_iteration.get())?;
        if cal.t_iteration.get() > t {
            return Err(ValidationError::new(
                "calibration.t_iteration",
                "must not exceed calibration.t",
            ));
        }
        nonnegative("restart_delay", self.restart_delay.get())?;

        let delay_model = match &self.network.delay_model {
            DelaySection::Zero => DelayModel::Zero,
            DelaySection::Constant { d } => {
                nonnegative("network.delay_model.d", d.get())?;
                DelayModel::Constant { d: d.get() }
            }
            DelaySection::PerEdge { matrix } => {
                if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
                    return Err(ValidationError::new(
                        "network.delay_model.matrix",
                        format!("must be {n}×{n}"),
                    ));
                }
                for (i, row) in matrix.iter().enumerate() {
                    for (j, d) in row.iter().enumerate() {
                        let path = format!("network.delay_model.matrix[{i}][{j}]");
                        nonnegative(&path, d.get())?;
                        if i == j && d.get() != 0.0 {
                            return Err(ValidationError::new(path, "diagonal must be zero"));
                        }
                    }
                }
                DelayModel::PerEdge {
                    matrix: matrix.iter().map(|r| r.iter().map(|d| d.get()).collect()).collect(),
                }
            }
        };
        let horizon = match self.network.horizon {
            HorizonSection::MainChainBlocks { blocks } if blocks > 0 => Horizon::MainChainBlocks { blocks },
            HorizonSection::Duration { length } if length.get() > 0.0 && length.get().is_finite() => {
                Horizon::Minutes { minutes: length.get() }
            }
            _ => return Err(ValidationError::new("network.horizon", "must be positive")),
        };

        let miners = self.roster(n)?;
        let calibration = Calibration::new(t, interval, cal.t_iteration.get());
        if let Err(e) = calibration.quantum(n) {
            return Err(ValidationError::new("calibration.t", e.to_string()));
        }
        let cfg = SimConfig {
            network: NetworkConfig {
                n_miners: n,
                topology: self.network.topology,
                delay_model,
                horizon,
                seed: self.network.seed,
            },
            miners,
            tie_break_rule: self.tie_break_rule,
            calibration,
            restart_delay: self.restart_delay.get(),
            aggressive_on_tie: self.aggressive_on_tie,
            queue_cap: DEFAULT_QUEUE_CAP,
            emit_trace: self.output.emit_trace,
        };
        cfg.validate().map_err(|e| ValidationError::new("config", e.to_string()))?;
        Ok(cfg)
    }

    fn roster(&self, n: usize) -> Result<Vec<MinerSpec>, ValidationError> {
        if self.miners.is_empty() {
            return Ok((0..n)
                .map(|i| MinerSpec::new(MinerId(i as u32), StrategyKind::QuantumPeaceful))
                .collect());
        }
        let total: usize = self.miners.iter().map(|e| e.count).sum();
        if total != n {
            return Err(ValidationError::new(
                "miners",
                format!("roster counts sum to {total}, but network.n_miners is {n}"),
            ));
        }
        let mut out = Vec::with_capacity(n);
        for (k, e) in self.miners.iter().enumerate() {
            let path = |field: &str| format!("miners[{k}].{field}");
            if e.count == 0 {
                return Err(ValidationError::new(path("count"), "must be at least 1"));
            }
            if let Some(QDistribution::Uniform { min, max }) = e.q_distribution {
                if min > max {
                    return Err(ValidationError::new(path("q_distribution"), format!("min {min} > max {max}")));
                }
            }
            if let Some(p) = e.p_full {
                if !(0.0..=1.0).contains(&p) {
                    return Err(ValidationError::new(path("p_full"), format!("must lie in [0, 1], got {p}")));
                }
            }
            let mallory = e.strategy == StrategyKind::Mallory;
            let policy = match (e.timestamp_policy, mallory) {
                (None, false) => TimestampPolicy::CommitExpectedFinish,
                (None, true) => TimestampPolicy::MalloryOffset { offset: SECOND },
                (Some(PolicySection::MalloryOffset { offset }), true) => {
                    TimestampPolicy::MalloryOffset { offset: offset.get() }
                }
                (Some(PolicySection::CommitExpectedFinish), false) => TimestampPolicy::CommitExpectedFinish,
                (Some(PolicySection::CommitStart), false) => TimestampPolicy::CommitStart,
                (Some(_), true) => {
                    return Err(ValidationError::new(path("timestamp_policy"), "mallory requires mallory_offset"))
                }
                (Some(_), false) => {
                    return Err(ValidationError::new(
                        path("timestamp_policy"),
                        "mallory_offset is reserved for the mallory strategy",
                    ))
                }
            };
            let victim = match (e.target_victim, mallory) {
                (Some(v), true) if (v as usize) < n => Some(MinerId(v)),
                (Some(v), true) => {
                    return Err(ValidationError::new(
                        path("target_victim"),
                        format!("miner {v} is not in the roster"),
                    ))
                }
                (None, true) => return Err(ValidationError::new(path("target_victim"), "mallory requires a victim")),
                (Some(_), false) => {
                    return Err(ValidationError::new(path("target_victim"), "only mallory has a victim"))
                }
                (None, false) => None,
            };
            let mallory_find = match e.mallory_find {
                Some(MalloryFindSection::Deterministic { delay }) => {
                    nonnegative(&path("mallory_find.delay"), delay.get())?;
                    Some(MalloryFind::Deterministic { delay: delay.get() })
                }
                Some(MalloryFindSection::Stochastic) => Some(MalloryFind::Stochastic),
                None if mallory => Some(MalloryFind::default()),
                None => None,
            };
            for _ in 0..e.count {
                let id = MinerId(out.len() as u32);
                if victim == Some(id) {
                    return Err(ValidationError::new(path("target_victim"), "mallory cannot target herself"));
                }
                out.push(MinerSpec {
                    miner_id: id,
                    strategy: e.strategy,
                    q_distribution: e.q_distribution,
                    timestamp_policy: policy,
                    target_victim: victim,
                    mallory_find,
                    p_full: e.p_full,
                });
            }
        }
        Ok(out)
    }
}
