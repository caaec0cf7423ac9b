//! Independent verification: best-response iteration and grid search.
//!
//! Nothing here touches the equilibrium solvers. Best responses are found by
//! bisecting the marginal payoff, and grid searches compare payoffs through
//! [`ReducedGame::deviation_gain`], so the only shared code is the game itself.

pub mod sample;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ReducedGame, StrategyProfile};

/// A grid point beating the incumbent by more than this is an equilibrium violation.
pub const VIOLATION_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Points per axis over `[0, V/2]`.
    pub grid_points: usize,
    /// Cap on best-response sweeps.
    pub max_iterations: usize,
    /// Largest per-component change in a sweep at which iteration stops.
    pub convergence_tol: f64,
    /// Local re-gridding passes around the incumbent argmax.
    pub refinement_rounds: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            grid_points: 20001,
            max_iterations: 10000,
            convergence_tol: 1e-10,
            refinement_rounds: 3,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points < 3 {
            return Err(Error::Domain(format!(
                "grid_points must be >= 3, got {}",
                self.grid_points
            )));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::Domain("convergence_tol must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Domain("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Upper end of the search domain; larger fraud levels are strictly dominated.
fn search_cap(g: &ReducedGame) -> f64 {
    (g.v() / 2.0).max(0.0)
}

/// Payoff-maximizing fraud level for artist `i`, by bisection on the marginal payoff.
fn marginal_best_response(g: &ReducedGame, i: usize, tau: f64) -> f64 {
    let cap = search_cap(g);
    if cap == 0.0 || g.marginal_payoff(i, 0.0, tau) <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, cap);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g.marginal_payoff(i, mid, tau) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Cyclic best-response iteration in ascending artist order.
pub fn br_iterate(g: &ReducedGame, start: &StrategyProfile, cfg: &OracleConfig) -> Result<StrategyProfile> {
    cfg.validate()?;
    if start.len() != g.n() {
        return Err(Error::ProfileLength {
            expected: g.n(),
            got: start.len(),
        });
    }
    let cap = search_cap(g);
    if cap > 0.0 && start.iter().any(|&t| t > cap) {
        return Err(Error::Domain(format!(
            "start profile must lie in [0, V/2] = [0, {cap}]"
        )));
    }
    let mut t = start.to_vec();
    for _ in 0..cfg.max_iterations {
        let mut change: f64 = 0.0;
        for i in 0..t.len() {
            let tau: f64 = t.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, x)| x).sum();
            let next = marginal_best_response(g, i, tau);
            change = change.max((next - t[i]).abs());
            t[i] = next;
        }
        if change < cfg.convergence_tol {
            return StrategyProfile::new(t);
        }
    }
    Err(Error::NoConvergence {
        what: "best-response iteration",
        iterations: cfg.max_iterations,
    })
}

/// Grid argmax over `[lo, hi]` of the gain relative to `reference`.
fn grid_argmax(g: &ReducedGame, i: usize, tau: f64, reference: f64, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    let step = (hi - lo) / (points - 1) as f64;
    let mut best = (reference, 0.0);
    for k in 0..points {
        let t = if k + 1 == points { hi } else { lo + step * k as f64 };
        let gain = g.deviation_gain(i, tau, reference, t);
        if gain > best.1 {
            best = (t, gain);
        }
    }
    best
}

/// Refined grid search for the best fraud level against `tau`; returns `(argmax, gain over reference)`.
fn refined_search(g: &ReducedGame, i: usize, tau: f64, reference: f64, cfg: &OracleConfig) -> (f64, f64) {
    let cap = search_cap(g);
    if cap == 0.0 {
        return (0.0, g.deviation_gain(i, tau, reference, 0.0).max(0.0));
    }
    let mut step = cap / (cfg.grid_points - 1) as f64;
    let (mut incumbent, mut total_gain) = grid_argmax(g, i, tau, reference, 0.0, cap, cfg.grid_points);
    for _ in 0..cfg.refinement_rounds {
        let lo = (incumbent - 2.0 * step).max(0.0);
        let hi = (incumbent + 2.0 * step).min(cap);
        // Gains are measured from the current incumbent to keep them well conditioned.
        let (t, extra) = grid_argmax(g, i, tau, incumbent, lo, hi, cfg.grid_points);
        total_gain += extra;
        incumbent = t;
        step = (hi - lo) / (cfg.grid_points - 1) as f64;
    }
    (incumbent, total_gain)
}

/// Argmax of artist `i`'s payoff against `tau` over the refined grid on `[0, V/2]`.
pub fn grid_best_response(g: &ReducedGame, i: usize, tau: f64, cfg: &OracleConfig) -> Result<f64> {
    cfg.validate()?;
    if i >= g.n() {
        return Err(Error::IndexOutOfRange { index: i, n: g.n() });
    }
    Ok(refined_search(g, i, tau, 0.0, cfg).0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Largest payoff improvement any grid point offers each artist (0 if none).
    pub max_violation: Vec<f64>,
    pub passed: bool,
}

/// Grid check that no artist can improve on `t` by more than [`VIOLATION_TOLERANCE`].
pub fn verify_equilibrium(g: &ReducedGame, t: &StrategyProfile, cfg: &OracleConfig) -> Result<VerificationReport> {
    cfg.validate()?;
    if t.len() != g.n() {
        return Err(Error::ProfileLength {
            expected: g.n(),
            got: t.len(),
        });
    }
    let max_violation: Vec<f64> = (0..g.n())
        .map(|i| refined_search(g, i, t.others(i), t[i], cfg).1.max(0.0))
        .collect();
    let passed = max_violation.iter().all(|&v| v <= VIOLATION_TOLERANCE);
    Ok(VerificationReport { max_violation, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scenario_a() -> ReducedGame {
        ReducedGame::new(vec![0.3, 0.7], 0.5, 4.0).unwrap()
    }

    fn profile(t: &[f64]) -> StrategyProfile {
        StrategyProfile::new(t.to_vec()).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(OracleConfig::default().validate().is_ok());
        let bad = OracleConfig {
            grid_points: 2,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn br_iteration_scenario_a() {
        let g = scenario_a();
        let cfg = OracleConfig::default();
        let t = br_iterate(&g, &profile(&[0.1, 0.1]), &cfg).unwrap();
        assert!((t[0] - 0.7).abs() < 1e-8);
        assert!((t[1] - 0.3).abs() < 1e-8);
        let again = br_iterate(&g, &t, &cfg).unwrap();
        for k in 0..2 {
            assert!((again[k] - t[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn br_iteration_fraud_free_goes_to_zero() {
        let g = ReducedGame::new(vec![0.4, 0.6], 0.5, 1.6).unwrap();
        let t = br_iterate(&g, &profile(&[0.8, 0.5]), &OracleConfig::default()).unwrap();
        assert!(t.iter().all(|&x| x == 0.0));
        let neg = ReducedGame::new(vec![0.4, 0.6], 0.5, -1.0).unwrap();
        let t = br_iterate(&neg, &profile(&[0.0, 0.0]), &OracleConfig::default()).unwrap();
        assert!(t.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn br_iteration_rejects_out_of_domain_start() {
        let g = scenario_a();
        assert!(br_iterate(&g, &profile(&[3.0, 0.0]), &OracleConfig::default()).is_err());
    }

    #[test]
    fn br_iteration_cap_reports_error() {
        let g = scenario_a();
        let cfg = OracleConfig {
            max_iterations: 1,
            ..Default::default()
        };
        assert!(matches!(
            br_iterate(&g, &profile(&[0.1, 0.1]), &cfg),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn grid_best_response_examples() {
        let g = scenario_a();
        let coarse = OracleConfig {
            refinement_rounds: 0,
            ..Default::default()
        };
        let fine = OracleConfig::default();
        assert!((grid_best_response(&g, 0, 0.3, &coarse).unwrap() - 0.7).abs() < 1e-4);
        assert!((grid_best_response(&g, 0, 0.3, &fine).unwrap() - 0.7).abs() < 1e-8);
        let neg = ReducedGame::new(vec![0.3, 0.7], 0.5, -0.5).unwrap();
        assert_eq!(grid_best_response(&neg, 0, 0.3, &fine).unwrap(), 0.0);
        // corner: (1 - d + tau) V <= (1 + tau)^2
        assert_eq!(grid_best_response(&g, 0, 3.0, &fine).unwrap(), 0.0);
    }

    #[test]
    fn marginal_best_response_matches_grid() {
        let g = ReducedGame::new(vec![0.05, 0.15, 0.8], 0.5, 2.0).unwrap();
        let cfg = OracleConfig::default();
        for &tau in &[0.0, 0.1, 0.3, 0.7] {
            for i in 0..3 {
                let a = marginal_best_response(&g, i, tau);
                let b = grid_best_response(&g, i, tau, &cfg).unwrap();
                assert!((a - b).abs() < 1e-8, "i={i} tau={tau}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn verify_scenario_equilibria() {
        let cfg = OracleConfig::default();
        let g = scenario_a();
        let r = verify_equilibrium(&g, &profile(&[0.7, 0.3]), &cfg).unwrap();
        assert!(r.passed, "{:?}", r.max_violation);

        let b = ReducedGame::new(vec![0.05, 0.15, 0.8], 0.5, 2.0).unwrap();
        let ratio = 1.05f64.sqrt() + 0.5;
        let d_star = (0.2 + ratio - 1.0) / 2.0;
        let t = profile(&[d_star - 0.05, d_star - 0.15, 0.0]);
        assert!(verify_equilibrium(&b, &t, &cfg).unwrap().passed);
    }

    #[test]
    fn verify_flags_perturbed_profile() {
        let g = scenario_a();
        let r = verify_equilibrium(&g, &profile(&[0.75, 0.3]), &OracleConfig::default()).unwrap();
        assert!(!r.passed);
        assert!(r.max_violation[0] > VIOLATION_TOLERANCE);
    }

    #[test]
    fn verify_flags_zero_profile_at_pivotal_artist() {
        let g = scenario_a();
        let r = verify_equilibrium(&g, &StrategyProfile::zeros(2), &OracleConfig::default()).unwrap();
        assert!(!r.passed);
        // the explicit deviation sqrt((1 - d_min) V) - 1 is profitable
        let dev = ((1.0 - 0.3) * 4.0f64).sqrt() - 1.0;
        let gain = g.payoff(0, dev, 0.0) - g.payoff(0, 0.0, 0.0);
        assert!(gain > 0.0);
        assert!(r.max_violation[0] >= gain - 1e-9);
        assert_relative_eq!(
            r.max_violation[0],
            g.payoff(0, marginal_best_response(&g, 0, 0.0), 0.0) - g.payoff(0, 0.0, 0.0),
            epsilon = 1e-9
        );
    }
}
