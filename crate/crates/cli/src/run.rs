use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use fraudgame::crosscheck::{self, CheckOptions, GameCheck};
use fraudgame::equilibrium::{self, EquilibriumResult, Regime};
use fraudgame::fairness::{self, FairnessReport};
use fraudgame::oracle::{self, sample, OracleConfig, VerificationReport};
use fraudgame::policy::{self, PolicyAnalysis};
use fraudgame::report::{self, fmt_num, Csv};
use fraudgame::rules::{self, AlphaBound, WeightedRule};
use fraudgame::sweep::{self, SweepParam, SweepRow, SweepSpec};
use fraudgame::{Error, Exec, ReducedGame, Scenario, StrategyProfile};
use serde::Serialize;
use serde_json::Value;

use crate::{Command, CommonArgs, Format, OracleArgs, PolicyArgs, SolveArgs, SweepArgs, WeightedArgs};

const EXIT_INPUT: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn solver(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_SOLVER,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_solver_failure() {
            Self::solver(e.to_string())
        } else {
            Self::input(e.to_string())
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

pub fn dispatch(cmd: Command) -> Outcome {
    match cmd {
        Command::Solve(a) => solve(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Fairness(a) => fairness_cmd(a),
        Command::Weighted(a) => weighted(a),
        Command::Policy(a) => policy_cmd(a),
        Command::OracleCheck(a) => oracle_check(a),
    }
}

/// Where reports go: files in a directory, or stdout.
struct Output {
    dir: Option<PathBuf>,
    formats: Vec<Format>,
}

impl Output {
    fn new(dir: Option<PathBuf>, formats: &[Format], stdout_default: Format) -> Outcome<Self> {
        let formats = match (formats.is_empty(), &dir) {
            (false, _) => formats.to_vec(),
            (true, Some(_)) => vec![Format::Json, Format::Csv],
            (true, None) => vec![stdout_default],
        };
        if let Some(d) = &dir {
            fs::create_dir_all(d).map_err(|e| Failure::input(format!("cannot create {}: {e}", d.display())))?;
        }
        Ok(Self { dir, formats })
    }

    fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    fn emit(&self, name: &str, content: &str) -> Outcome {
        match &self.dir {
            Some(d) => {
                let path = d.join(name);
                fs::write(&path, content).map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
            }
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(content.as_bytes())
                    .map_err(|e| Failure::input(format!("cannot write to stdout: {e}")))
            }
        }
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Outcome {
        if self.wants(Format::Json) {
            self.emit(name, &report::to_json(value)?)?;
        }
        Ok(())
    }

    fn csv(&self, name: &str, content: impl FnOnce() -> String) -> Outcome {
        if self.wants(Format::Csv) {
            self.emit(name, &content())?;
        }
        Ok(())
    }
}

fn load_game(path: &Path, renormalize: bool) -> Outcome<ReducedGame> {
    let text = fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::input(format!("malformed JSON in {}: {e}", path.display())))?;
    let Some(obj) = value.as_object() else {
        return Err(Failure::input(format!(
            "{}: top level must be a JSON object",
            path.display()
        )));
    };
    if obj.contains_key("stream_shares") || obj.contains_key("user_streams") {
        let scenario: Scenario = serde_json::from_value(value)
            .map_err(|e| Failure::input(format!("invalid scenario in {}: {e}", path.display())))?;
        let scenario = if renormalize { scenario.renormalized() } else { scenario };
        Ok(scenario.reduce()?)
    } else if obj.contains_key("d") {
        if renormalize {
            return Err(Failure::input("--renormalize applies to scenario input only"));
        }
        serde_json::from_value(value).map_err(|e| Failure::input(format!("invalid game in {}: {e}", path.display())))
    } else {
        Err(Failure::input(format!(
            "{}: expected a scenario (n, m, user_streams, stream_shares, beta, delta, lambda0) or a reduced game (d, xi, V)",
            path.display()
        )))
    }
}

fn load(common: &CommonArgs) -> Outcome<ReducedGame> {
    load_game(&common.input, common.renormalize)
}

fn verify(g: &ReducedGame, t: &StrategyProfile) -> Outcome<VerificationReport> {
    Ok(oracle::verify_equilibrium(g, t, &OracleConfig::default())?)
}

fn require_verified(what: &str, r: &VerificationReport) -> Outcome {
    if r.passed {
        return Ok(());
    }
    let worst = r.max_violation.iter().copied().fold(0.0, f64::max);
    Err(Failure::solver(format!(
        "{what} failed oracle verification: a deviation gains {worst:e}"
    )))
}

#[derive(Serialize)]
struct SolveReport<'a> {
    game: &'a ReducedGame,
    #[serde(flatten)]
    equilibrium: &'a EquilibriumResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    fairness: Option<&'a FairnessReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verification: Option<&'a VerificationReport>,
}

fn solve(a: SolveArgs) -> Outcome {
    let g = load(&a.common)?;
    let out = Output::new(a.common.out.clone(), &a.common.format, Format::Json)?;
    let eq = equilibrium::solve(&g)?;
    let fair = match eq.regime {
        Regime::Fraud => Some(fairness::compare(&g, &eq)?),
        Regime::FraudFree => None,
    };
    let check = if a.verify { Some(verify(&g, &eq.t_star)?) } else { None };
    out.json(
        "equilibrium.json",
        &SolveReport {
            game: &g,
            equilibrium: &eq,
            fairness: fair.as_ref(),
            verification: check.as_ref(),
        },
    )?;
    out.csv("equilibrium.csv", || report::equilibrium_csv(&g, &eq))?;
    if let Some(f) = &fair {
        out.csv("fairness.csv", || report::fairness_csv(f))?;
    }
    match &check {
        Some(r) => require_verified("equilibrium", r),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct FairnessOutput<'a> {
    #[serde(flatten)]
    report: &'a FairnessReport,
    worst_case: bool,
    /// Worst-case corollary; only meaningful when everybody cheats.
    #[serde(skip_serializing_if = "Option::is_none")]
    worst_case_fairer: Option<bool>,
}

fn fairness_cmd(a: CommonArgs) -> Outcome {
    let g = load(&a)?;
    let out = Output::new(a.out.clone(), &a.format, Format::Json)?;
    let eq = equilibrium::solve(&g)?;
    if eq.regime == Regime::FraudFree {
        return Err(Failure::input(
            "the game is fraud-free; fairness compares a fraud equilibrium with honesty",
        ));
    }
    let r = fairness::compare(&g, &eq)?;
    let corollary = if eq.worst_case {
        Some(fairness::worst_case_fairer(g.n(), g.d_min(), g.v())?)
    } else {
        None
    };
    out.json(
        "fairness.json",
        &FairnessOutput {
            report: &r,
            worst_case: eq.worst_case,
            worst_case_fairer: corollary,
        },
    )?;
    out.csv("fairness.csv", || report::fairness_csv(&r))
}

#[derive(Serialize)]
struct WeightedOutput<'a> {
    alpha_bound: AlphaBound,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    /// `alpha V <= 1 / (1 - d_min)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    honesty_dominant: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    equilibrium: Option<&'a EquilibriumResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verification: Option<&'a VerificationReport>,
}

fn weighted(a: WeightedArgs) -> Outcome {
    let g = load(&a.common)?;
    let out = Output::new(a.common.out.clone(), &a.common.format, Format::Json)?;
    let bound = rules::max_alpha(&g);
    let Some(alpha) = a.alpha else {
        if a.verify {
            return Err(Failure::input("--verify needs --alpha"));
        }
        return out.json(
            "weighted.json",
            &WeightedOutput {
                alpha_bound: bound,
                alpha: None,
                honesty_dominant: None,
                equilibrium: None,
                verification: None,
            },
        );
    };
    let rule = WeightedRule::new(alpha)?;
    let eq = rules::solve_weighted(&g, rule)?;
    let check = if a.verify {
        Some(verify(&g.with_fraud_value(g.v() * alpha)?, &eq.t_star)?)
    } else {
        None
    };
    out.json(
        "weighted.json",
        &WeightedOutput {
            alpha_bound: bound,
            alpha: Some(alpha),
            honesty_dominant: Some(rules::weighted_dominance_threshold(&g, rule)),
            equilibrium: Some(&eq),
            verification: check.as_ref(),
        },
    )?;
    out.csv("weighted.csv", || report::equilibrium_csv(&g, &eq))?;
    match &check {
        Some(r) => require_verified("weighted equilibrium", r),
        None => Ok(()),
    }
}

fn policy_cmd(a: PolicyArgs) -> Outcome {
    let g = load(&a.common)?;
    let out = Output::new(a.common.out.clone(), &a.common.format, Format::Json)?;
    let d_hat = match (a.d_hat, a.lambda_hat) {
        (Some(d), None) => d,
        (None, Some(l)) => policy::share_threshold(&g, l)?,
        _ => return Err(Failure::input("exactly one of --d-hat or --lambda-hat is required")),
    };
    let eq = equilibrium::solve(&g)?;
    if eq.regime == Regime::FraudFree {
        return Err(Failure::input(
            "the game is fraud-free; threshold analysis needs the fraud regime",
        ));
    }
    let analysis: PolicyAnalysis = policy::analyze(&g, &eq, d_hat)?;
    out.json("policy.json", &analysis)?;
    out.csv("welfare.csv", || report::welfare_csv(&analysis))
}

#[derive(Serialize)]
struct SweepOutput<'a> {
    param: SweepParam,
    rows: &'a [SweepRow],
}

fn run_sweep(a: SweepArgs) -> Outcome {
    let param: SweepParam = a.param.parse()?;
    let spec = SweepSpec {
        param,
        min: a.min,
        max: a.max,
        steps: a.steps,
    };
    spec.validate()?;
    let g = load(&a.common)?;
    let out = Output::new(a.common.out.clone(), &a.common.format, Format::Csv)?;
    let rows = sweep::run(&g, &spec, Exec::Parallel)?;
    let checks = if a.verify { Some(verify_sweep(&g, &spec)?) } else { None };
    out.csv("sweep.csv", || sweep::to_csv(param, &rows))?;
    out.json("sweep.json", &SweepOutput { param, rows: &rows })?;
    if let Some(checks) = checks {
        for (x, r) in spec.points().iter().zip(&checks) {
            require_verified(&format!("equilibrium at {param} = {}", fmt_num(*x)), r)?;
        }
    }
    Ok(())
}

/// Grid-checks the equilibrium behind every sweep point. Threshold sweeps share
/// one pro-rata equilibrium.
fn verify_sweep(g: &ReducedGame, spec: &SweepSpec) -> Outcome<Vec<VerificationReport>> {
    let cfg = OracleConfig::default();
    let check = |game: ReducedGame, eq: EquilibriumResult| -> fraudgame::Result<VerificationReport> {
        oracle::verify_equilibrium(&game, &eq.t_star, &cfg)
    };
    let points = spec.points();
    let reports: Vec<fraudgame::Result<VerificationReport>> = match spec.param {
        SweepParam::Lambda0 => Exec::Parallel.map(&points, |&l| {
            let game = g.with_lambda0(l)?;
            let eq = equilibrium::solve(&game)?;
            check(game, eq)
        }),
        SweepParam::Alpha => Exec::Parallel.map(&points, |&alpha| {
            let eq = rules::solve_weighted(g, WeightedRule::new(alpha)?)?;
            check(g.with_fraud_value(g.v() * alpha)?, eq)
        }),
        SweepParam::DHat => {
            let r = check(g.clone(), equilibrium::solve(g)?)?;
            return Ok(vec![r; points.len()]);
        }
    };
    Ok(reports.into_iter().collect::<fraudgame::Result<Vec<_>>>()?)
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SingleCheck {
    Fraud(GameCheck),
    FraudFree { verification: VerificationReport },
}

fn oracle_check(a: OracleArgs) -> Outcome {
    let out = Output::new(a.out.clone(), &a.format, Format::Json)?;
    let seed = a.seed.unwrap_or_else(sample::seed_from_env);
    let opts = CheckOptions {
        seed,
        games: a.games,
        grid: a.verify,
        ..Default::default()
    };
    if let Some(path) = &a.input {
        let g = load_game(path, false)?;
        let result = match equilibrium::classify(&g) {
            Regime::Fraud => {
                let mut rng = sample::rng(seed);
                let starts: Vec<StrategyProfile> = (0..opts.starts)
                    .map(|_| sample::profile(&mut rng, g.n(), g.v() / 2.0))
                    .collect();
                SingleCheck::Fraud(crosscheck::check_game(&g, &starts, &opts)?)
            }
            Regime::FraudFree => SingleCheck::FraudFree {
                verification: verify(&g, &StrategyProfile::zeros(g.n()))?,
            },
        };
        out.json("oracle_check.json", &result)?;
        let passed = match &result {
            SingleCheck::Fraud(c) => c.passed(),
            SingleCheck::FraudFree { verification } => verification.passed,
        };
        return if passed {
            Ok(())
        } else {
            Err(Failure::solver("oracle check failed"))
        };
    }
    if a.games == 0 {
        return Err(Failure::input("--games must be at least 1"));
    }
    let (checks, summary) = crosscheck::run_batch(&opts, Exec::Parallel);
    out.json("oracle_check.json", &summary)?;
    out.csv("oracle_check.csv", || checks_csv(&checks))?;
    if summary.passed {
        Ok(())
    } else {
        Err(Failure::solver(format!(
            "oracle check failed on {} of {} games",
            summary.failed_games, summary.games
        )))
    }
}

fn checks_csv(checks: &[fraudgame::Result<GameCheck>]) -> String {
    let mut csv = Csv::new(&[
        "game",
        "n",
        "V",
        "n_d",
        "solver_gap",
        "oracle_gap",
        "foc_residual",
        "equalization_spread",
        "passed",
    ]);
    for (k, c) in checks.iter().enumerate() {
        match c {
            Ok(c) => csv.row([
                k.to_string(),
                c.n.to_string(),
                fmt_num(c.v),
                c.n_d.to_string(),
                fmt_num(c.solver_gap),
                fmt_num(c.oracle_gap),
                fmt_num(c.foc_residual),
                fmt_num(c.equalization_spread),
                c.passed().to_string(),
            ]),
            Err(_) => {
                let mut fields = vec![String::new(); 9];
                fields[0] = k.to_string();
                fields[8] = "false".to_string();
                csv.row(fields);
            }
        }
    }
    csv.finish()
}
