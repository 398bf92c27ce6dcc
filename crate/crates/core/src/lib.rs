//! Simulation of proof-of-work mining by quantum (Grover) and classical
//! miners.
//!
//! Quantum miners that measure early whenever a competitor's block arrives
//! produce blocks at correlated times, which inflates the stale rate. The
//! crate provides:
//!
//! * [`grover`]: success laws for full and partial Grover runs, and the
//!   calibration of difficulty to a target block interval;
//! * [`analytics`]: the synchronous-model stale rate and the double-spend
//!   threshold in closed form;
//! * [`chain`]: the block tree and stale-rate accounting;
//! * [`tiebreak`]: fork-choice rules, including a timestamp penalty that
//!   disarms early measurement;
//! * [`strategy`]: peaceful and aggressive miners, plus a timestamp attacker;
//! * [`simnet`]: the discrete-event engine, batch sweeps and the attack
//!   scenario.
//!
//! ```
//! use qmine::analytics::{analytic_stale_rate, SyncModelParams};
//!
//! let p = SyncModelParams::with_t(1.0).unwrap();
//! let stale = analytic_stale_rate(&p).unwrap();
//! assert!((stale - 0.0509).abs() < 1e-4);
//! ```

pub mod analytics;
pub mod chain;
pub mod error;
pub mod grover;
pub mod simnet;
pub mod strategy;
pub mod tiebreak;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    struct Intro;
    #[doc = include_str!("../../../book/src/grover.md")]
    struct Grover;
    #[doc = include_str!("../../../book/src/stale-rate.md")]
    struct StaleRate;
    #[doc = include_str!("../../../book/src/tie-breaking.md")]
    struct TieBreaking;
    #[doc = include_str!("../../../book/src/strategies.md")]
    struct Strategies;
    #[doc = include_str!("../../../book/src/simulator.md")]
    struct Simulator;
}
