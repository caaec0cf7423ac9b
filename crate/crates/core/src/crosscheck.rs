//! Randomized cross-validation of the solvers against the oracle and the
//! structural properties of the fraud equilibrium.

use serde::{Deserialize, Serialize};

use crate::equilibrium::{self, is_worst_case, EquilibriumResult};
use crate::error::Result;
use crate::exec::Exec;
use crate::fairness::{self, worst_case_fairer};
use crate::model::{ReducedGame, StrategyProfile};
use crate::oracle::{self, sample, OracleConfig};

/// Per-component agreement required between solvers and the oracle.
pub const AGREEMENT_TOLERANCE: f64 = 1e-6;
/// Bound on `|du_i/dt_i|` at interior equilibrium strategies.
pub const FOC_TOLERANCE: f64 = 1e-8;
/// Spread allowed in `d_i + t_i` across dishonest artists.
pub const EQUALIZATION_TOLERANCE: f64 = 1e-9;
/// Relative slack, in units of `V`, on the ratio bounds.
pub const BOUND_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    pub seed: u64,
    pub games: usize,
    /// Random starting profiles for best-response iteration, per game.
    pub starts: usize,
    /// Also run the grid equilibrium check (slow).
    pub grid: bool,
    pub oracle: OracleConfig,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            seed: sample::DEFAULT_SEED,
            games: 1000,
            starts: 2,
            grid: false,
            oracle: OracleConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameCheck {
    pub n: usize,
    pub v: f64,
    pub n_d: usize,
    /// Max component gap between closed-form and fixed-point profiles.
    pub solver_gap: f64,
    /// Max component gap between closed form and best-response iteration, over all starts.
    pub oracle_gap: f64,
    /// Largest `|du_i/dt_i|` over dishonest artists.
    pub foc_residual: f64,
    /// Honest artists have non-positive marginal payoff at zero.
    pub honest_foc: bool,
    pub equalization_spread: f64,
    /// `1 + T*` lies within the envelope for `n_d` cheaters.
    pub within_bounds: bool,
    /// `1 + T* <= V`.
    pub below_value: bool,
    /// Worst-case test agrees with everybody cheating.
    pub worst_case_agrees: bool,
    /// Closed fairness condition agrees with the min-utility comparison.
    pub fairness_agrees: bool,
    /// Worst-case fairness corollary agrees with the direct comparison; `None` off the worst case.
    pub corollary_agrees: Option<bool>,
    pub grid_violation: Option<f64>,
}

impl GameCheck {
    pub fn passed(&self) -> bool {
        self.solver_gap <= AGREEMENT_TOLERANCE
            && self.oracle_gap <= AGREEMENT_TOLERANCE
            && self.foc_residual <= FOC_TOLERANCE
            && self.honest_foc
            && self.equalization_spread <= EQUALIZATION_TOLERANCE
            && self.within_bounds
            && self.below_value
            && self.worst_case_agrees
            && self.fairness_agrees
            && self.corollary_agrees != Some(false)
            && self.grid_violation.is_none_or(|v| v <= oracle::VIOLATION_TOLERANCE)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub seed: u64,
    pub games: usize,
    pub failed_games: usize,
    /// Games whose solve or oracle run returned an error.
    pub errors: usize,
    pub max_solver_gap: f64,
    pub max_oracle_gap: f64,
    pub max_foc_residual: f64,
    pub max_equalization_spread: f64,
    pub bound_failures: usize,
    pub worst_case_mismatches: usize,
    pub fairness_mismatches: usize,
    pub worst_case_games: usize,
    pub corollary_mismatches: usize,
    pub max_grid_violation: Option<f64>,
    pub passed: bool,
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Runs every check on a single fraud-regime game.
pub fn check_game(g: &ReducedGame, starts: &[StrategyProfile], opts: &CheckOptions) -> Result<GameCheck> {
    let closed = equilibrium::solve_closed_form(g)?;
    let fixed = equilibrium::solve_fixed_point(g)?;
    let solver_gap = max_gap(&closed.t_star, &fixed.t_star);

    let mut oracle_gap: f64 = 0.0;
    for s in starts {
        let t = oracle::br_iterate(g, s, &opts.oracle)?;
        oracle_gap = oracle_gap.max(max_gap(&closed.t_star, &t));
    }

    let (foc_residual, honest_foc, equalization_spread) = structure(g, &closed);

    let r = 1.0 + closed.total_fraud;
    let v = g.v();
    let slack = BOUND_SLACK * v;
    let (lo, hi) = equilibrium::bounds_envelope(closed.n_d, v)?;
    let within_bounds = r >= lo - slack && r <= hi + slack;
    let below_value = r <= v + slack;

    let report = fairness::compare(g, &closed);
    let fairness_agrees = report.is_ok();
    let corollary_agrees = match (&report, closed.worst_case) {
        (Ok(rep), true) => Some(worst_case_fairer(g.n(), g.d_min(), v)? == rep.fairer),
        _ => None,
    };

    let grid_violation = if opts.grid {
        let rep = oracle::verify_equilibrium(g, &closed.t_star, &opts.oracle)?;
        Some(rep.max_violation.into_iter().fold(0.0, f64::max))
    } else {
        None
    };

    Ok(GameCheck {
        n: g.n(),
        v,
        n_d: closed.n_d,
        solver_gap,
        oracle_gap,
        foc_residual,
        honest_foc,
        equalization_spread,
        within_bounds,
        below_value,
        worst_case_agrees: is_worst_case(g) == closed.worst_case,
        fairness_agrees,
        corollary_agrees,
        grid_violation,
    })
}

/// FOC residual over cheaters, honest FOC sign, spread of `d_i + t_i` over cheaters.
fn structure(g: &ReducedGame, eq: &EquilibriumResult) -> (f64, bool, f64) {
    let t = &eq.t_star;
    let mut residual: f64 = 0.0;
    let mut honest = true;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..g.n() {
        let m = g.marginal_payoff(i, t[i], t.others(i));
        if eq.dishonest.contains(&i) {
            residual = residual.max(m.abs());
            let level = g.d()[i] + t[i];
            lo = lo.min(level);
            hi = hi.max(level);
        } else if m > FOC_TOLERANCE {
            honest = false;
        }
    }
    (residual, honest, if hi >= lo { hi - lo } else { 0.0 })
}

/// Draws games and starting profiles in sequence from the seed, so the batch is
/// identical whichever executor runs it.
pub fn draw(opts: &CheckOptions) -> Vec<(ReducedGame, Vec<StrategyProfile>)> {
    let mut rng = sample::rng(opts.seed);
    (0..opts.games)
        .map(|_| {
            let g = sample::fraud_game(&mut rng);
            let cap = g.v() / 2.0;
            let starts = (0..opts.starts)
                .map(|_| sample::profile(&mut rng, g.n(), cap))
                .collect();
            (g, starts)
        })
        .collect()
}

pub fn run_batch(opts: &CheckOptions, exec: Exec) -> (Vec<Result<GameCheck>>, BatchSummary) {
    let batch = draw(opts);
    let checks = exec.map(&batch, |(g, starts)| check_game(g, starts, opts));
    let summary = summarize(opts, &checks);
    (checks, summary)
}

pub fn summarize(opts: &CheckOptions, checks: &[Result<GameCheck>]) -> BatchSummary {
    let ok: Vec<&GameCheck> = checks.iter().filter_map(|c| c.as_ref().ok()).collect();
    let errors = checks.len() - ok.len();
    let fold = |f: fn(&GameCheck) -> f64| ok.iter().map(|c| f(c)).fold(0.0, f64::max);
    let count = |f: fn(&GameCheck) -> bool| ok.iter().filter(|c| f(c)).count();
    let failed_games = errors + count(|c| !c.passed());
    let max_grid_violation = opts.grid.then(|| fold(|c| c.grid_violation.unwrap_or(0.0)));
    BatchSummary {
        seed: opts.seed,
        games: checks.len(),
        failed_games,
        errors,
        max_solver_gap: fold(|c| c.solver_gap),
        max_oracle_gap: fold(|c| c.oracle_gap),
        max_foc_residual: fold(|c| c.foc_residual),
        max_equalization_spread: fold(|c| c.equalization_spread),
        bound_failures: count(|c| !(c.within_bounds && c.below_value)),
        worst_case_mismatches: count(|c| !c.worst_case_agrees),
        fairness_mismatches: count(|c| !c.fairness_agrees),
        worst_case_games: count(|c| c.corollary_agrees.is_some()),
        corollary_mismatches: count(|c| c.corollary_agrees == Some(false)),
        max_grid_violation,
        passed: failed_games == 0,
    }
}
