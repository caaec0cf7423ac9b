//! Qualification thresholds: only tracks with streamshare at least `d_hat`
//! enter the pro-rata pool.
//!
//! For thresholds slightly above the cutoff `d*`, cheaters just qualify
//! (`t_hat_i = max(d_hat - d_i, 0)`), which raises total fraud and lowers every
//! artist's utility. The characterized range is `(d*, d* + theta**]`; above it
//! the analysis is not extended.

use serde::{Deserialize, Serialize};

use crate::equilibrium::{best_response, EquilibriumResult, Regime};
use crate::error::{Error, Result};
use crate::model::{ReducedGame, StrategyProfile};
use crate::roots::bisect;

/// Bracket width at which the `theta**` bisection stops.
pub const THETA_REL_TOL: f64 = 1e-12;
pub const THETA_MAX_ITER: usize = 400;
/// A deviation gain above this is a strict improvement.
pub const DEVIATION_TOLERANCE: f64 = 1e-12;
/// Deviation gains within this band of zero are reported as near-indifferent.
pub const INDIFFERENCE_BAND: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdClass {
    /// `d_hat <= d*`: equilibrium unchanged.
    NoEffect,
    /// `d* < d_hat <= d* + theta**`: just-qualify equilibrium.
    SlightlyHigh,
    /// `d_hat > d* + theta**`: outside the characterized range.
    Uncharacterized,
}

impl ThresholdClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ThresholdClass::NoEffect => "NoEffect",
            ThresholdClass::SlightlyHigh => "SlightlyHigh",
            ThresholdClass::Uncharacterized => "Uncharacterized",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaRange {
    pub theta_star: f64,
    pub theta_double_star: f64,
}

/// Equilibrium check of the just-qualify profile under the threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualifyCheck {
    /// Best deviation gain per artist (<= 0 means no profitable deviation).
    pub best_deviation_gain: Vec<f64>,
    pub verified: bool,
    /// Artists for whom dropping out of the pool is within [`INDIFFERENCE_BAND`] of their current payoff.
    pub near_indifferent: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyAnalysis {
    pub d_hat: f64,
    pub classification: ThresholdClass,
    pub d_star: f64,
    pub theta_star: f64,
    pub theta_double_star: f64,
    /// Profile under the threshold; absent when uncharacterized.
    pub t_hat: Option<StrategyProfile>,
    #[serde(rename = "T_hat")]
    pub total_fraud: Option<f64>,
    pub u_star: Vec<f64>,
    pub u_hat: Option<Vec<f64>>,
    /// `u_i(t_hat) - u_i(t*)`.
    pub welfare_delta: Option<Vec<f64>>,
    pub all_worse_off: Option<bool>,
    pub check: Option<QualifyCheck>,
}

/// Converts a raw stream threshold to a streamshare threshold `lambda_hat / (m lambda_bar)`.
pub fn share_threshold(g: &ReducedGame, lambda_hat: f64) -> Result<f64> {
    let raw = g.raw().ok_or(Error::MissingRawConstants)?;
    if !(lambda_hat >= 0.0) {
        return Err(Error::Domain(format!(
            "stream threshold must be non-negative, got {lambda_hat}"
        )));
    }
    Ok(lambda_hat / (raw.m as f64 * raw.lambda_bar))
}

fn check_d_hat(d_hat: f64) -> Result<()> {
    if !(d_hat >= 0.0) || !d_hat.is_finite() {
        return Err(Error::Domain(format!(
            "threshold d_hat must be non-negative, got {d_hat}"
        )));
    }
    Ok(())
}

fn fraud_parts(eq: &EquilibriumResult) -> Result<(f64, f64)> {
    match (eq.regime, eq.d_star) {
        (Regime::Fraud, Some(d_star)) => Ok((d_star, eq.total_fraud)),
        _ => Err(Error::WrongRegime { expected: "Fraud" }),
    }
}

/// `t_hat_i = max(d_hat - d_i, 0)`.
pub fn just_qualify(g: &ReducedGame, d_hat: f64) -> Result<StrategyProfile> {
    check_d_hat(d_hat)?;
    StrategyProfile::new(g.d().iter().map(|d| (d_hat - d).max(0.0)).collect())
}

/// Lower bound on the pivotal artist's utility when the threshold sits `theta` above `d*`.
pub fn pivotal_bound(g: &ReducedGame, eq: &EquilibriumResult, theta: f64) -> Result<f64> {
    let (d_star, total) = fraud_parts(eq)?;
    let n = g.n() as f64;
    Ok((d_star + theta) / (1.0 + total + n * theta) * g.v() - d_star - theta + (1.0 + 1.0 / g.xi()) * g.d_min())
}

/// The range parameters: `theta*` (peak of the pivotal bound) and `theta**` (its root).
pub fn theta_range(g: &ReducedGame, eq: &EquilibriumResult) -> Result<ThetaRange> {
    let (d_star, total) = fraud_parts(eq)?;
    let v = g.v();
    let n = g.n() as f64;
    let ratio = 1.0 + total;
    let theta_star = if ratio / (n * d_star) < v / (v - 1.0) {
        0.0
    } else {
        (((ratio - n * d_star) * v).sqrt() - ratio).max(0.0) / n
    };
    let upper = v + (1.0 + 1.0 / g.xi()) * g.d_min();
    let root = bisect(
        |theta| pivotal_bound(g, eq, theta).unwrap_or(f64::NAN),
        theta_star,
        upper,
        THETA_REL_TOL,
        THETA_MAX_ITER,
        "theta** bisection",
    )?;
    Ok(ThetaRange {
        theta_star,
        theta_double_star: root,
    })
}

fn classify_threshold(d_hat: f64, d_star: f64, range: &ThetaRange) -> ThresholdClass {
    if d_hat <= d_star {
        ThresholdClass::NoEffect
    } else if d_hat <= d_star + range.theta_double_star {
        ThresholdClass::SlightlyHigh
    } else {
        ThresholdClass::Uncharacterized
    }
}

/// Utility of artist `i` under the threshold. Below `d_hat` the artist gets
/// nothing from the pool and still pays for fraud.
pub fn threshold_payoff(g: &ReducedGame, d_hat: f64, i: usize, t_i: f64, tau: f64) -> f64 {
    if g.d()[i] + t_i >= d_hat {
        g.payoff(i, t_i, tau)
    } else {
        -(1.0 + 1.0 / g.xi()) * t_i
    }
}

/// Checks that no artist gains by deviating from `t_hat` under the threshold.
///
/// An artist below `d_hat` can either drop out of the pool (`t = 0`, utility 0)
/// or qualify with some `t >= d_hat - d_i`; the best qualifying level is the
/// unconstrained best response clamped to that interval.
pub fn check_just_qualify(g: &ReducedGame, d_hat: f64, t_hat: &StrategyProfile) -> Result<QualifyCheck> {
    let mut gains = Vec::with_capacity(g.n());
    let mut near_indifferent = Vec::new();
    for (i, &d) in g.d().iter().enumerate() {
        let tau = t_hat.others(i);
        let current = t_hat[i];
        let unconstrained = best_response(g, i, tau);
        let gain = if d < d_hat {
            let qualify = unconstrained.max(d_hat - d);
            let qualify_gain = g.deviation_gain(i, tau, current, qualify);
            let drop_out_gain = threshold_payoff(g, d_hat, i, 0.0, tau) - g.payoff(i, current, tau);
            if drop_out_gain.abs() < INDIFFERENCE_BAND {
                near_indifferent.push(i);
            }
            qualify_gain.max(drop_out_gain)
        } else {
            g.deviation_gain(i, tau, current, unconstrained)
        };
        gains.push(gain);
    }
    let verified = gains.iter().all(|&x| x <= DEVIATION_TOLERANCE);
    Ok(QualifyCheck {
        best_deviation_gain: gains,
        verified,
        near_indifferent,
    })
}

pub fn analyze(g: &ReducedGame, eq: &EquilibriumResult, d_hat: f64) -> Result<PolicyAnalysis> {
    check_d_hat(d_hat)?;
    let (d_star, total) = fraud_parts(eq)?;
    let range = theta_range(g, eq)?;
    let classification = classify_threshold(d_hat, d_star, &range);
    let mut out = PolicyAnalysis {
        d_hat,
        classification,
        d_star,
        theta_star: range.theta_star,
        theta_double_star: range.theta_double_star,
        t_hat: None,
        total_fraud: None,
        u_star: eq.utilities.clone(),
        u_hat: None,
        welfare_delta: None,
        all_worse_off: None,
        check: None,
    };
    match classification {
        ThresholdClass::Uncharacterized => {}
        ThresholdClass::NoEffect => {
            out.t_hat = Some(eq.t_star.clone());
            out.total_fraud = Some(total);
            out.u_hat = Some(eq.utilities.clone());
            out.welfare_delta = Some(vec![0.0; g.n()]);
            out.all_worse_off = Some(false);
        }
        ThresholdClass::SlightlyHigh => {
            let t_hat = just_qualify(g, d_hat)?;
            let u_hat = g.utilities(&t_hat)?;
            let delta: Vec<f64> = u_hat.iter().zip(&eq.utilities).map(|(a, b)| a - b).collect();
            out.all_worse_off = Some(delta.iter().all(|&x| x < 0.0));
            out.check = Some(check_just_qualify(g, d_hat, &t_hat)?);
            out.total_fraud = Some(t_hat.total());
            out.t_hat = Some(t_hat);
            out.u_hat = Some(u_hat);
            out.welfare_delta = Some(delta);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn scenario_a() -> (ReducedGame, EquilibriumResult) {
        let g = ReducedGame::new(vec![0.3, 0.7], 0.5, 4.0).unwrap();
        let eq = solve(&g).unwrap();
        (g, eq)
    }

    fn scenario_b() -> (ReducedGame, EquilibriumResult) {
        let g = ReducedGame::new(vec![0.05, 0.15, 0.8], 0.5, 2.0).unwrap();
        let eq = solve(&g).unwrap();
        (g, eq)
    }

    #[test]
    fn just_qualify_examples() {
        let (g, eq) = scenario_b();
        assert!(just_qualify(&g, 0.04).unwrap().iter().all(|&t| t == 0.0));
        let t = just_qualify(&g, 0.4).unwrap();
        assert_relative_eq!(t[0], 0.35, epsilon = 1e-12);
        assert_relative_eq!(t[1], 0.25, epsilon = 1e-12);
        assert_eq!(t[2], 0.0);
        assert!(just_qualify(&g, -0.1).is_err());
        let _ = eq;

        let (g, eq) = scenario_a();
        let t = just_qualify(&g, eq.d_star.unwrap()).unwrap();
        for i in 0..2 {
            assert_relative_eq!(t[i], eq.t_star[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn pivotal_bound_examples() {
        let (g, eq) = scenario_a();
        let h0 = pivotal_bound(&g, &eq, 0.0).unwrap();
        assert_relative_eq!(h0, 1.9, epsilon = 1e-12);
        assert_relative_eq!(h0, eq.utilities[0], epsilon = 1e-12);
        let top = g.v() + 3.0 * g.d_min();
        assert!(pivotal_bound(&g, &eq, top).unwrap() < 0.0);

        let (g, eq) = scenario_b();
        assert!(pivotal_bound(&g, &eq, 0.0).unwrap() > 0.0);
    }

    #[test]
    fn theta_range_scenario_a() {
        let (g, eq) = scenario_a();
        let r = theta_range(&g, &eq).unwrap();
        assert_eq!(r.theta_star, 0.0);
        // Here the pivotal bound reduces to 1.9 - theta.
        assert_relative_eq!(r.theta_double_star, 1.9, epsilon = 1e-10);
        assert!(pivotal_bound(&g, &eq, r.theta_double_star).unwrap().abs() < 1e-10);
    }

    #[test]
    fn analyze_scenario_a() {
        let (g, eq) = scenario_a();
        let a = analyze(&g, &eq, 0.8).unwrap();
        assert_eq!(a.classification, ThresholdClass::NoEffect);
        assert_eq!(a.t_hat.as_ref().unwrap(), &eq.t_star);

        let a = analyze(&g, &eq, 1.5).unwrap();
        assert_eq!(a.classification, ThresholdClass::SlightlyHigh);
        let t = a.t_hat.as_ref().unwrap();
        assert_relative_eq!(t[0], 1.2, epsilon = 1e-12);
        assert_relative_eq!(t[1], 0.8, epsilon = 1e-12);
        let u = a.u_hat.as_ref().unwrap();
        assert_relative_eq!(u[0], 1.4, epsilon = 1e-12);
        assert_relative_eq!(u[1], 2.6, epsilon = 1e-12);
        assert_eq!(a.all_worse_off, Some(true));
        assert!(a.check.as_ref().unwrap().verified);
        assert!(a.total_fraud.unwrap() > eq.total_fraud);

        let a = analyze(&g, &eq, 3.0).unwrap();
        assert_eq!(a.classification, ThresholdClass::Uncharacterized);
        assert!(a.t_hat.is_none());

        assert!(analyze(&g, &eq, -1.0).is_err());
    }

    #[test]
    fn boundaries_are_inclusive() {
        let (g, eq) = scenario_a();
        let d_star = eq.d_star.unwrap();
        assert_eq!(
            analyze(&g, &eq, d_star).unwrap().classification,
            ThresholdClass::NoEffect
        );
        let r = theta_range(&g, &eq).unwrap();
        assert_eq!(
            analyze(&g, &eq, d_star + r.theta_double_star).unwrap().classification,
            ThresholdClass::SlightlyHigh
        );
    }

    #[test]
    fn requires_fraud_equilibrium() {
        let g = ReducedGame::new(vec![0.5, 0.5], 0.5, 1.5).unwrap();
        let eq = solve(&g).unwrap();
        assert!(matches!(analyze(&g, &eq, 0.6), Err(Error::WrongRegime { .. })));
        assert!(matches!(theta_range(&g, &eq), Err(Error::WrongRegime { .. })));
    }

    #[test]
    fn share_threshold_conversion() {
        let s = crate::model::fixtures::scenario_a();
        let g = s.reduce().unwrap();
        assert_relative_eq!(share_threshold(&g, 300.0).unwrap(), 1.5);
        let bare = ReducedGame::new(vec![0.3, 0.7], 0.5, 4.0).unwrap();
        assert!(matches!(share_threshold(&bare, 1.0), Err(Error::MissingRawConstants)));
    }

    fn arb_fraud_game() -> impl Strategy<Value = ReducedGame> {
        (prop::collection::vec(0.02f64..1.0, 2..6), 0.0f64..1.0, 0.2f64..2.0).prop_map(|(raw, u, xi)| {
            let s: f64 = raw.iter().sum();
            let d: Vec<f64> = raw.iter().map(|x| x / s).collect();
            let lo = 1.0 / (1.0 - d.iter().copied().fold(1.0, f64::min));
            let v = lo + (15.0 - lo) * (1.0 - u) + 1e-6;
            ReducedGame::new(d, xi, v).unwrap()
        })
    }

    proptest! {
        #[test]
        fn pivotal_bound_shape(g in arb_fraud_game()) {
            let eq = solve(&g).unwrap();
            let r = theta_range(&g, &eq).unwrap();
            prop_assert!(r.theta_double_star > r.theta_star);
            prop_assert!(pivotal_bound(&g, &eq, r.theta_double_star).unwrap().abs() < 1e-9);
            let h = |x: f64| pivotal_bound(&g, &eq, x).unwrap();
            // decreasing past theta*
            let mut prev = h(r.theta_star);
            for k in 1..=50 {
                let x = r.theta_star + (r.theta_double_star - r.theta_star) * 2.0 * k as f64 / 50.0;
                let cur = h(x);
                prop_assert!(cur < prev);
                prev = cur;
            }
            // increasing before theta*
            if r.theta_star > 0.0 {
                let mut prev = h(0.0);
                for k in 1..=20 {
                    let cur = h(r.theta_star * k as f64 / 20.0);
                    prop_assert!(cur > prev);
                    prev = cur;
                }
            }
        }

        #[test]
        fn slightly_high_hurts_everyone(g in arb_fraud_game(), s in 0.01f64..1.0) {
            let eq = solve(&g).unwrap();
            let r = theta_range(&g, &eq).unwrap();
            let d_hat = eq.d_star.unwrap() + s * r.theta_double_star;
            let a = analyze(&g, &eq, d_hat).unwrap();
            prop_assert_eq!(a.classification, ThresholdClass::SlightlyHigh);
            prop_assert_eq!(a.all_worse_off, Some(true));
            prop_assert!(a.total_fraud.unwrap() > eq.total_fraud);
            let u_hat = a.u_hat.unwrap();
            let sum_hat: f64 = u_hat.iter().sum();
            let sum_star: f64 = eq.utilities.iter().sum();
            prop_assert!(sum_hat < sum_star);
            prop_assert!(u_hat.iter().copied().fold(f64::INFINITY, f64::min) < eq.min_utility());
        }

        #[test]
        fn partial_qualification_is_dominated(g in arb_fraud_game(), s in 0.01f64..0.99, tau in 0.0f64..10.0, frac in 0.001f64..0.999) {
            let eq = solve(&g).unwrap();
            let d_hat = eq.d_star.unwrap() + s;
            for (i, &d) in g.d().iter().enumerate() {
                if d < d_hat {
                    let t = frac * (d_hat - d);
                    prop_assert!(threshold_payoff(&g, d_hat, i, t, tau) < threshold_payoff(&g, d_hat, i, 0.0, tau));
                }
            }
        }
    }
}
