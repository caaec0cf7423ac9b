//! Egalitarian comparison of the fraud equilibrium against the fraud-free profile.

use serde::{Deserialize, Serialize};

use crate::equilibrium::{EquilibriumResult, Regime};
use crate::error::{Error, Result};
use crate::model::ReducedGame;

/// Gap between the two minima below which a comparison is flagged as a knife edge.
pub const KNIFE_EDGE_BAND: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub u_star: Vec<f64>,
    pub u_zero: Vec<f64>,
    pub min_star: f64,
    pub min_zero: f64,
    /// `min u* > min u0`.
    pub fairer: bool,
    /// `V - sqrt(d_min V (V - 1))`.
    pub condition_rhs: f64,
    /// `1 + T* < condition_rhs`.
    pub condition_holds: bool,
    pub knife_edge: bool,
}

/// Utilities with nobody cheating: `d_i (1/xi + V)`.
pub fn fraud_free_profile(g: &ReducedGame) -> Vec<f64> {
    let scale = 1.0 / g.xi() + g.v();
    g.d().iter().map(|d| d * scale).collect()
}

fn min_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Compares a fraud equilibrium with the fraud-free profile, both by the closed
/// condition on `1 + T*` and by the minima directly. The two must agree unless
/// the minima are within [`KNIFE_EDGE_BAND`].
pub fn compare(g: &ReducedGame, eq: &EquilibriumResult) -> Result<FairnessReport> {
    if eq.regime != Regime::Fraud {
        return Err(Error::WrongRegime { expected: "Fraud" });
    }
    let v = g.v();
    if v < 1.0 {
        return Err(Error::Domain(format!("fairness condition needs V >= 1, got {v}")));
    }
    let u_zero = fraud_free_profile(g);
    let u_star = eq.utilities.clone();
    let min_star = min_of(&u_star);
    let min_zero = min_of(&u_zero);
    let fairer = min_star > min_zero;
    let condition_rhs = v - (g.d_min() * v * (v - 1.0)).sqrt();
    let condition_holds = 1.0 + eq.total_fraud < condition_rhs;
    let knife_edge = (min_star - min_zero).abs() < KNIFE_EDGE_BAND;
    if condition_holds != fairer && !knife_edge {
        return Err(Error::FairnessMismatch {
            condition: condition_holds,
            direct: fairer,
        });
    }
    Ok(FairnessReport {
        u_star,
        u_zero,
        min_star,
        min_zero,
        fairer,
        condition_rhs,
        condition_holds,
        knife_edge,
    })
}

/// Whether the worst fraud equilibrium beats the fraud-free profile: `d_min < V / (n^2 (V-1))`.
pub fn worst_case_fairer(n: usize, d_min: f64, v: f64) -> Result<bool> {
    if !(v > 1.0) {
        return Err(Error::Domain(format!("worst-case fairness needs V > 1, got {v}")));
    }
    let n = n as f64;
    Ok(d_min < v / (n * n * (v - 1.0)))
}
