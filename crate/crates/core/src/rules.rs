//! Weighted rule: `alpha * pro-rata + (1 - alpha) * user-centric`.
//!
//! Only the pro-rata part carries a fraud incentive, so the strategic game under
//! weight `alpha` is the pro-rata game with `V` replaced by `alpha V`.

use serde::{Deserialize, Serialize};

use crate::equilibrium::{self, fraud_free_threshold, EquilibriumResult};
use crate::error::{Error, Result};
use crate::model::{ReducedGame, StrategyProfile};

/// Blend weight `alpha` in `(0, 1]`; `1` is pure pro-rata.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct WeightedRule(f64);

impl WeightedRule {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha <= 1.0 {
            Ok(Self(alpha))
        } else {
            Err(Error::AlphaOutOfRange(alpha))
        }
    }

    pub fn alpha(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for WeightedRule {
    type Error = Error;

    fn try_from(a: f64) -> Result<Self> {
        Self::new(a)
    }
}

impl From<WeightedRule> for f64 {
    fn from(r: WeightedRule) -> f64 {
        r.0
    }
}

/// Normalized utility of artist `i` under the weighted rule.
pub fn weighted_utility(g: &ReducedGame, rule: WeightedRule, t: &StrategyProfile, i: usize) -> Result<f64> {
    let raw = g.raw().ok_or(Error::MissingRawConstants)?;
    let scale = g.fake_to_real_scale().ok_or(Error::MissingRawConstants)?;
    if t.len() != g.n() {
        return Err(Error::ProfileLength {
            expected: g.n(),
            got: t.len(),
        });
    }
    if i >= g.n() {
        return Err(Error::IndexOutOfRange { index: i, n: g.n() });
    }
    let a = rule.alpha();
    let d = g.d()[i];
    let t_i = t[i];
    let share = (d + t_i) / (1.0 + t_i + t.others(i));
    Ok(share * g.v() * a - t_i + (d * a + scale * raw.uc_shares[i] * (1.0 - a)) / g.xi())
}

pub fn weighted_utilities(g: &ReducedGame, rule: WeightedRule, t: &StrategyProfile) -> Result<Vec<f64>> {
    (0..g.n()).map(|i| weighted_utility(g, rule, t, i)).collect()
}

/// Whether honesty strictly dominates for every artist: `alpha V <= 1 / (1 - d_min)`.
pub fn weighted_dominance_threshold(g: &ReducedGame, rule: WeightedRule) -> bool {
    g.v() <= 0.0 || g.v() * rule.alpha() <= fraud_free_threshold(g)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaBound {
    /// Largest weight that still guarantees a fraud-free equilibrium (inclusive).
    pub alpha: f64,
    /// Set when pure pro-rata is already fraud-free; `alpha` is then 1.
    pub already_fraud_free: bool,
}

pub fn max_alpha(g: &ReducedGame) -> AlphaBound {
    if g.v() <= fraud_free_threshold(g) {
        return AlphaBound {
            alpha: 1.0,
            already_fraud_free: true,
        };
    }
    AlphaBound {
        alpha: 1.0 / ((1.0 - g.d_min()) * g.v()),
        already_fraud_free: false,
    }
}

/// Equilibrium under the weighted rule. Strategies come from the scaled game;
/// reported utilities are weighted utilities, so raw constants are required.
pub fn solve_weighted(g: &ReducedGame, rule: WeightedRule) -> Result<EquilibriumResult> {
    if g.raw().is_none() {
        return Err(Error::MissingRawConstants);
    }
    let scaled = g.with_fraud_value(g.v() * rule.alpha())?;
    let mut eq = equilibrium::solve(&scaled)?;
    eq.utilities = weighted_utilities(g, rule, &eq.t_star)?;
    Ok(eq)
}
