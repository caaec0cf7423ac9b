//! One-parameter sweeps emitting one CSV row per grid point.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::equilibrium::{self, EquilibriumResult, Regime};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fairness;
use crate::model::ReducedGame;
use crate::policy::{self, ThresholdClass};
use crate::report::{fmt_num, fmt_opt, Csv};
use crate::rules::{self, WeightedRule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Lambda0,
    Alpha,
    DHat,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Lambda0 => "lambda0",
            SweepParam::Alpha => "alpha",
            SweepParam::DHat => "d_hat",
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda0" => Ok(SweepParam::Lambda0),
            "alpha" => Ok(SweepParam::Alpha),
            "d_hat" | "d-hat" => Ok(SweepParam::DHat),
            other => Err(Error::InvalidSweep(format!(
                "unknown parameter {other:?}, expected lambda0, alpha or d_hat"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::InvalidSweep("steps must be at least 1".into()));
        }
        if !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::InvalidSweep("bounds must be finite".into()));
        }
        if self.min > self.max {
            return Err(Error::InvalidSweep(format!(
                "min {} exceeds max {}",
                self.min, self.max
            )));
        }
        Ok(())
    }

    /// Grid points, endpoints inclusive, ascending. A single step yields `min`.
    pub fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let last = self.steps - 1;
        (0..self.steps)
            .map(|k| {
                if k == last {
                    self.max
                } else {
                    self.min + (self.max - self.min) * k as f64 / last as f64
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub regime: Regime,
    #[serde(rename = "T_star")]
    pub total_fraud: Option<f64>,
    pub n_d: Option<usize>,
    pub d_star: Option<f64>,
    pub min_utility: Option<f64>,
    pub fairer: Option<bool>,
    /// Threshold class; only for `d_hat` sweeps.
    pub classification: Option<ThresholdClass>,
}

fn min_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Summary row of a pro-rata equilibrium.
pub fn summary_row(value: f64, g: &ReducedGame, eq: &EquilibriumResult) -> Result<SweepRow> {
    let fairer = match eq.regime {
        Regime::Fraud => Some(fairness::compare(g, eq)?.fairer),
        Regime::FraudFree => None,
    };
    Ok(SweepRow {
        value,
        regime: eq.regime,
        total_fraud: Some(eq.total_fraud),
        n_d: Some(eq.n_d),
        d_star: eq.d_star,
        min_utility: Some(eq.min_utility()),
        fairer,
        classification: None,
    })
}

fn lambda0_row(g: &ReducedGame, lambda0: f64) -> Result<SweepRow> {
    let gp = g.with_lambda0(lambda0)?;
    let eq = equilibrium::solve(&gp)?;
    summary_row(lambda0, &gp, &eq)
}

fn alpha_row(g: &ReducedGame, alpha: f64) -> Result<SweepRow> {
    let rule = WeightedRule::new(alpha)?;
    let eq = rules::solve_weighted(g, rule)?;
    let honest = rules::weighted_utilities(g, rule, &crate::model::StrategyProfile::zeros(g.n()))?;
    let fairer = match eq.regime {
        Regime::Fraud => Some(eq.min_utility() > min_of(&honest)),
        Regime::FraudFree => None,
    };
    Ok(SweepRow {
        value: alpha,
        regime: eq.regime,
        total_fraud: Some(eq.total_fraud),
        n_d: Some(eq.n_d),
        d_star: eq.d_star,
        min_utility: Some(eq.min_utility()),
        fairer,
        classification: None,
    })
}

fn d_hat_row(g: &ReducedGame, eq: &EquilibriumResult, d_hat: f64) -> Result<SweepRow> {
    let a = policy::analyze(g, eq, d_hat)?;
    let honest_min = min_of(&fairness::fraud_free_profile(g));
    let (n_d, min_u, fairer) = match (&a.t_hat, &a.u_hat) {
        (Some(t), Some(u)) => {
            let m = min_of(u);
            (
                Some(t.iter().filter(|&&x| x > 0.0).count()),
                Some(m),
                Some(m > honest_min),
            )
        }
        _ => (None, None, None),
    };
    Ok(SweepRow {
        value: d_hat,
        regime: eq.regime,
        total_fraud: a.total_fraud,
        n_d,
        d_star: Some(a.d_star),
        min_utility: min_u,
        fairer,
        classification: Some(a.classification),
    })
}

/// Evaluates every grid point (in parallel when `exec` allows) and returns rows in ascending order.
pub fn run(g: &ReducedGame, spec: &SweepSpec, exec: Exec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let points = spec.points();
    let rows: Vec<Result<SweepRow>> = match spec.param {
        SweepParam::Lambda0 => {
            if g.raw().is_none() {
                return Err(Error::MissingRawConstants);
            }
            exec.map(&points, |&p| lambda0_row(g, p))
        }
        SweepParam::Alpha => {
            if g.raw().is_none() {
                return Err(Error::MissingRawConstants);
            }
            exec.map(&points, |&p| alpha_row(g, p))
        }
        SweepParam::DHat => {
            let eq = equilibrium::solve(g)?;
            if eq.regime != Regime::Fraud {
                return Err(Error::WrongRegime { expected: "Fraud" });
            }
            exec.map(&points, |&p| d_hat_row(g, &eq, p))
        }
    };
    rows.into_iter().collect()
}

pub fn to_csv(param: SweepParam, rows: &[SweepRow]) -> String {
    let mut header = vec![
        param.name(),
        "regime",
        "T_star",
        "n_d",
        "d_star",
        "min_utility",
        "fairer",
    ];
    if param == SweepParam::DHat {
        header.push("classification");
    }
    let mut csv = Csv::new(&header);
    for r in rows {
        let mut fields = vec![
            fmt_num(r.value),
            r.regime.as_str().to_string(),
            fmt_opt(r.total_fraud),
            r.n_d.map(|n| n.to_string()).unwrap_or_default(),
            fmt_opt(r.d_star),
            fmt_opt(r.min_utility),
            r.fairer.map(|b| b.to_string()).unwrap_or_default(),
        ];
        if param == SweepParam::DHat {
            fields.push(r.classification.map(|c| c.as_str().to_string()).unwrap_or_default());
        }
        csv.row(fields);
    }
    csv.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::scenario_a;

    #[test]
    fn grid_points() {
        let s = SweepSpec {
            param: SweepParam::Alpha,
            min: 0.1,
            max: 1.0,
            steps: 4,
        };
        let p = s.points();
        assert_eq!(p.len(), 4);
        assert_eq!(p[0], 0.1);
        assert_eq!(p[3], 1.0);
        assert!(p.windows(2).all(|w| w[0] < w[1]));
        let one = SweepSpec { steps: 1, ..s };
        assert_eq!(one.points(), vec![0.1]);
    }

    #[test]
    fn spec_validation() {
        let s = SweepSpec {
            param: SweepParam::Lambda0,
            min: 2.0,
            max: 1.0,
            steps: 3,
        };
        assert!(s.validate().is_err());
        assert!(SweepSpec {
            steps: 0,
            min: 0.0,
            ..s
        }
        .validate()
        .is_err());
        assert!("gamma".parse::<SweepParam>().is_err());
        assert_eq!("d_hat".parse::<SweepParam>().unwrap(), SweepParam::DHat);
    }

    #[test]
    fn lambda0_sweep_flips_at_threshold() {
        let g = scenario_a().reduce().unwrap();
        let threshold = 100.0 * (1.0 + 0.5 / 0.7);
        let spec = SweepSpec {
            param: SweepParam::Lambda0,
            min: 150.0,
            max: 200.0,
            steps: 51,
        };
        let rows = run(&g, &spec, Exec::Sequential).unwrap();
        for r in &rows {
            let expect = if r.value <= threshold {
                Regime::FraudFree
            } else {
                Regime::Fraud
            };
            assert_eq!(r.regime, expect, "lambda0 = {}", r.value);
        }
    }

    #[test]
    fn single_point_matches_solve_summary() {
        let g = scenario_a().reduce().unwrap();
        let spec = SweepSpec {
            param: SweepParam::Lambda0,
            min: 300.0,
            max: 300.0,
            steps: 1,
        };
        let rows = run(&g, &spec, Exec::Parallel).unwrap();
        let eq = equilibrium::solve(&g).unwrap();
        assert_eq!(rows, vec![summary_row(300.0, &g, &eq).unwrap()]);
    }

    #[test]
    fn alpha_sweep_flips_at_max_alpha() {
        let g = scenario_a().reduce().unwrap();
        let spec = SweepSpec {
            param: SweepParam::Alpha,
            min: 0.05,
            max: 1.0,
            steps: 96,
        };
        let rows = run(&g, &spec, Exec::Parallel).unwrap();
        let bound = rules::max_alpha(&g).alpha;
        for r in &rows {
            let expect = if r.value <= bound {
                Regime::FraudFree
            } else {
                Regime::Fraud
            };
            assert_eq!(r.regime, expect);
        }
        let csv = to_csv(SweepParam::Alpha, &rows);
        assert!(csv.starts_with("alpha,regime,T_star,n_d,d_star,min_utility,fairer\n"));
        assert_eq!(csv.lines().count(), 97);
    }

    #[test]
    fn d_hat_sweep_rows() {
        let g = scenario_a().reduce().unwrap();
        let spec = SweepSpec {
            param: SweepParam::DHat,
            min: 0.5,
            max: 3.5,
            steps: 7,
        };
        let rows = run(&g, &spec, Exec::Sequential).unwrap();
        let classes: Vec<_> = rows.iter().map(|r| r.classification.unwrap()).collect();
        assert_eq!(classes[0], ThresholdClass::NoEffect);
        assert_eq!(classes[2], ThresholdClass::SlightlyHigh);
        assert_eq!(classes[6], ThresholdClass::Uncharacterized);
        assert!(rows[6].total_fraud.is_none());
        let csv = to_csv(SweepParam::DHat, &rows);
        assert!(csv.lines().next().unwrap().ends_with(",classification"));
    }

    #[test]
    fn sweeps_need_raw_constants() {
        let g = ReducedGame::new(vec![0.3, 0.7], 0.5, 4.0).unwrap();
        let spec = SweepSpec {
            param: SweepParam::Lambda0,
            min: 100.0,
            max: 200.0,
            steps: 3,
        };
        assert!(matches!(
            run(&g, &spec, Exec::Sequential),
            Err(Error::MissingRawConstants)
        ));
        let spec = SweepSpec {
            param: SweepParam::DHat,
            min: 0.5,
            max: 1.5,
            steps: 3,
        };
        assert_eq!(run(&g, &spec, Exec::Sequential).unwrap().len(), 3);
    }
}
