//! Equilibrium analysis of the click-fraud game among artists on a streaming
//! platform, under pro-rata, user-centric and weighted revenue sharing.
//!
//! Artists are indexed from 0. Strategies are fraud ratios `t_i`, fake streams
//! per unit of real platform streams.

// Range checks are written as `!(x > 0.0)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod crosscheck;
pub mod equilibrium;
pub mod error;
pub mod exec;
pub mod fairness;
pub mod model;
pub mod oracle;
pub mod policy;
pub mod report;
mod roots;
pub mod rules;
pub mod sweep;

pub use equilibrium::{EquilibriumResult, Regime};
pub use error::{Error, Result};
pub use exec::Exec;
pub use fairness::FairnessReport;
pub use model::{RawConstants, ReducedGame, Scenario, StrategyProfile};
pub use policy::{PolicyAnalysis, ThresholdClass};
pub use rules::WeightedRule;
pub use sweep::{SweepParam, SweepSpec};
