//! Regime classification and the unique pure-strategy equilibrium.
//!
//! Two solvers compute the same fraud equilibrium independently:
//! [`solve_closed_form`] enumerates the size of the dishonest set and uses the
//! closed form for the total-to-real stream ratio, while [`solve_fixed_point`]
//! bisects the aggregate share map `F(T)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ReducedGame, StrategyProfile};
use crate::roots::bisect;

/// Distance from the fraud-free threshold below which a diagnostic flag is raised.
pub const THRESHOLD_FLAG_BAND: f64 = 1e-9;
/// Tolerance on the cutoff self-consistency identity.
pub const CUTOFF_IDENTITY_TOLERANCE: f64 = 1e-9;
/// Relative bracket width at which the fixed-point bisection stops.
pub const FIXED_POINT_REL_TOL: f64 = 1e-12;
pub const FIXED_POINT_MAX_ITER: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    FraudFree,
    Fraud,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::FraudFree => "FraudFree",
            Regime::Fraud => "Fraud",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub regime: Regime,
    /// Aggregate normalized fraud `T*`.
    #[serde(rename = "T_star")]
    pub total_fraud: f64,
    /// Cutoff streamshare; `None` when fraud-free.
    pub d_star: Option<f64>,
    /// Indices of dishonest artists, ascending.
    pub dishonest: Vec<usize>,
    pub n_d: usize,
    pub t_star: StrategyProfile,
    pub utilities: Vec<f64>,
    pub worst_case: bool,
    /// `(r_lower(n_d), r_upper(n_d))` bracketing `1 + T*`.
    pub bounds: Option<(f64, f64)>,
    /// Set when `V` lies within [`THRESHOLD_FLAG_BAND`] of the fraud-free threshold.
    pub near_threshold: bool,
}

impl EquilibriumResult {
    pub fn min_utility(&self) -> f64 {
        self.utilities.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Honesty threshold on `V` as a function of one artist's streamshare.
pub fn h(d_i: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&d_i) {
        return Err(Error::Domain(format!("h(d) needs d in [0, 1), got {d_i}")));
    }
    Ok(if d_i <= 0.5 { 1.0 / (1.0 - d_i) } else { 4.0 * d_i })
}

/// Whether `t_i = 0` strictly dominates every positive fraud level for artist `i`.
pub fn honesty_dominant(g: &ReducedGame, i: usize) -> Result<bool> {
    let d = *g.d().get(i).ok_or(Error::IndexOutOfRange { index: i, n: g.n() })?;
    if g.v() <= 0.0 {
        return Ok(true);
    }
    Ok(g.v() <= h(d)?)
}

/// `1 / (1 - d_min)`: the largest fraud value at which honesty is an equilibrium.
pub fn fraud_free_threshold(g: &ReducedGame) -> f64 {
    1.0 / (1.0 - g.d_min())
}

pub fn classify(g: &ReducedGame) -> Regime {
    if g.v() <= fraud_free_threshold(g) {
        Regime::FraudFree
    } else {
        Regime::Fraud
    }
}

fn near_threshold(g: &ReducedGame) -> bool {
    (g.v() - fraud_free_threshold(g)).abs() < THRESHOLD_FLAG_BAND
}

/// Best response of artist `i` to opponents' aggregate fraud `tau`.
pub fn best_response(g: &ReducedGame, i: usize, tau: f64) -> f64 {
    let v = g.v();
    if v <= 0.0 {
        return 0.0;
    }
    let inner = (1.0 - g.d()[i] + tau) * v;
    (inner.sqrt() - (1.0 + tau)).max(0.0)
}

/// Envelope `(r_lower, r_upper)` of the total-to-real stream ratio for `n_d` cheaters.
pub fn bounds_envelope(n_d: usize, v: f64) -> Result<(f64, f64)> {
    if n_d == 0 {
        return Err(Error::Domain("bounds need at least one dishonest artist".into()));
    }
    if !(v > 0.0) {
        return Err(Error::Domain(format!("bounds need V > 0, got {v}")));
    }
    let s = n_d as f64;
    let half = (s - 1.0) * v / (2.0 * s);
    Ok(((s - 1.0) * v / s, (half * half + v / s).sqrt() + half))
}

/// Worst fraud equilibrium (every artist cheats) test: `d_max < (n-1) V / n^2`.
pub fn is_worst_case(g: &ReducedGame) -> bool {
    let n = g.n() as f64;
    g.d_max() < (n - 1.0) * g.v() / (n * n)
}

/// Total-to-real ratio `1 + T*` when the `n_d` cheaters hold `share` of real streams.
pub fn total_ratio(n_d: usize, share: f64, v: f64) -> f64 {
    let s = n_d as f64;
    let half = (s - 1.0) * v / (2.0 * s);
    (half * half + (1.0 - share) * v / s).sqrt() + half
}

fn require_fraud(g: &ReducedGame) -> Result<()> {
    match classify(g) {
        Regime::Fraud => Ok(()),
        Regime::FraudFree => Err(Error::WrongRegime { expected: "Fraud" }),
    }
}

fn assemble(g: &ReducedGame, d_star: f64, total_fraud: f64) -> Result<EquilibriumResult> {
    let mut t = vec![0.0; g.n()];
    let mut dishonest = Vec::new();
    for (i, &d) in g.d().iter().enumerate() {
        if d < d_star {
            t[i] = d_star - d;
            dishonest.push(i);
        }
    }
    if dishonest.is_empty() {
        return Err(Error::NoConsistentCandidate);
    }
    let t_star = StrategyProfile::new(t)?;
    let n_d = dishonest.len();
    Ok(EquilibriumResult {
        regime: Regime::Fraud,
        total_fraud,
        d_star: Some(d_star),
        utilities: g.utilities(&t_star)?,
        worst_case: n_d == g.n(),
        bounds: Some(bounds_envelope(n_d, g.v())?),
        near_threshold: near_threshold(g),
        dishonest,
        n_d,
        t_star,
    })
}

/// Fraud equilibrium by enumerating the dishonest-set size over streamshares sorted ascending.
pub fn solve_closed_form(g: &ReducedGame) -> Result<EquilibriumResult> {
    require_fraud(g)?;
    let v = g.v();
    let d = g.d();
    let mut order: Vec<usize> = (0..g.n()).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));

    let mut prefix = 0.0;
    for k in 1..=g.n() {
        prefix += d[order[k - 1]];
        let ratio = total_ratio(k, prefix, v);
        let total_fraud = ratio - 1.0;
        let d_star = (prefix + total_fraud) / k as f64;
        let members_cheat = d[order[k - 1]] < d_star;
        let rest_honest = k == g.n() || d[order[k]] >= d_star;
        if !(members_cheat && rest_honest) {
            continue;
        }
        let implied = ratio - ratio * ratio / v;
        if (d_star - implied).abs() > CUTOFF_IDENTITY_TOLERANCE * d_star.abs().max(1.0) {
            return Err(Error::CutoffMismatch { d_star, implied });
        }
        return assemble(g, d_star, total_fraud);
    }
    Err(Error::NoConsistentCandidate)
}

/// Aggregate post-fraud share map minus one; its unique root on `[0, V-1]` is `T*`.
pub fn aggregate_share_excess(g: &ReducedGame, total_fraud: f64) -> f64 {
    let r = 1.0 + total_fraud;
    let level = r - r * r / g.v();
    g.d().iter().map(|&d| d.max(level)).sum::<f64>() / r - 1.0
}

/// Fraud equilibrium by bisecting the aggregate share map.
pub fn solve_fixed_point(g: &ReducedGame) -> Result<EquilibriumResult> {
    require_fraud(g)?;
    let v = g.v();
    let total_fraud = bisect(
        |t| aggregate_share_excess(g, t),
        0.0,
        v - 1.0,
        FIXED_POINT_REL_TOL,
        FIXED_POINT_MAX_ITER,
        "aggregate fraud bisection",
    )?;
    let r = 1.0 + total_fraud;
    assemble(g, r - r * r / v, total_fraud)
}

/// Equilibrium in either regime; the fraud branch uses the closed form.
pub fn solve(g: &ReducedGame) -> Result<EquilibriumResult> {
    match classify(g) {
        Regime::Fraud => solve_closed_form(g),
        Regime::FraudFree => {
            let t_star = StrategyProfile::zeros(g.n());
            Ok(EquilibriumResult {
                regime: Regime::FraudFree,
                total_fraud: 0.0,
                d_star: None,
                dishonest: Vec::new(),
                n_d: 0,
                utilities: g.utilities(&t_star)?,
                t_star,
                worst_case: false,
                bounds: None,
                near_threshold: near_threshold(g),
            })
        }
    }
}
