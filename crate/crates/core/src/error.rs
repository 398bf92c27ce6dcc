use thiserror::Error;

use crate::chain::BlockId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{name} = {value} is outside the domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error(
        "calibration infeasible: per-miner success probability {p_full} exceeds 1 \
         (n_miners = {n_miners}, t = {t}, block_interval = {block_interval})"
    )]
    CalibrationInfeasible {
        p_full: f64,
        n_miners: usize,
        t: f64,
        block_interval: f64,
    },

    #[error("block {0} has an unknown parent {1}")]
    UnknownParent(BlockId, BlockId),

    #[error("block id {0} already present")]
    DuplicateBlock(BlockId),

    #[error("block {0} is not a longest tip")]
    TipNotLongest(BlockId),

    #[error("tie-break over an empty tip set")]
    EmptyTipSet,

    #[error("invalid roster: {0}")]
    InvalidRoster(String),

    #[error("event queue exceeded its cap of {0} pending events")]
    QueueOverflow(usize),

    #[error("sweep point {index}: {source}")]
    SweepPoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}
