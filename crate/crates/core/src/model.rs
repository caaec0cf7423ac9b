//! Platform data, its reduction to the normalized fraud game, and payoffs.
//!
//! A [`Scenario`] holds raw platform data. [`Scenario::reduce`] maps it to a
//! [`ReducedGame`] in which each artist `i` picks a fake-stream ratio `t_i >= 0`
//! and earns
//!
//! ```text
//! u_i(t) = (d_i + t_i) / (1 + sum_j t_j) * V - t_i + d_i / xi
//! ```
//!
//! which is the pro-rata net gain rescaled by `lambda0 / (m * lambda_bar * (delta - beta))`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on column sums of the stream-share matrix and on `sum(d)`.
pub const SHARE_TOLERANCE: f64 = 1e-9;

/// Relative tolerance for identities between raw and reduced quantities.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

/// Raw platform data over one subscription term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub n: usize,
    pub m: usize,
    /// Total streams per user, length `m`.
    pub user_streams: Vec<f64>,
    /// Row-major `n x m` matrix; entry `[i][j]` is user `j`'s share on artist `i`.
    pub stream_shares: Vec<Vec<f64>>,
    pub beta: f64,
    pub delta: f64,
    pub lambda0: f64,
}

/// One failed scenario constraint.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub field: &'static str,
    pub index: Option<usize>,
    pub value: f64,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(f, "{}[{}] = {}: {}", self.field, i, self.value, self.message),
            None => write!(f, "{} = {}: {}", self.field, self.value, self.message),
        }
    }
}

impl Violation {
    fn new(field: &'static str, index: Option<usize>, value: f64, message: impl Into<String>) -> Self {
        Self {
            field,
            index,
            value,
            message: message.into(),
        }
    }
}

impl Scenario {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Lists every violated constraint. Empty means the scenario is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.n < 2 {
            out.push(Violation::new(
                "n",
                None,
                self.n as f64,
                "at least two artists are required",
            ));
        }
        if self.m < 1 {
            out.push(Violation::new(
                "m",
                None,
                self.m as f64,
                "at least one user is required",
            ));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            out.push(Violation::new("beta", None, self.beta, "beta must lie in (0, 1)"));
        }
        if !(self.delta > 1.0) || !self.delta.is_finite() {
            out.push(Violation::new("delta", None, self.delta, "delta must exceed 1"));
        }
        if !(self.lambda0 > 0.0) || !self.lambda0.is_finite() {
            out.push(Violation::new(
                "lambda0",
                None,
                self.lambda0,
                "lambda0 must be positive",
            ));
        }
        if self.user_streams.len() != self.m {
            out.push(Violation::new(
                "user_streams",
                None,
                self.user_streams.len() as f64,
                format!("expected {} entries", self.m),
            ));
        }
        for (j, &l) in self.user_streams.iter().enumerate() {
            if !(l > 0.0) || !l.is_finite() {
                out.push(Violation::new(
                    "user_streams",
                    Some(j),
                    l,
                    "streams per user must be positive",
                ));
            }
        }
        if self.stream_shares.len() != self.n {
            out.push(Violation::new(
                "stream_shares",
                None,
                self.stream_shares.len() as f64,
                format!("expected {} rows", self.n),
            ));
        }
        let mut shape_ok = self.stream_shares.len() == self.n && self.user_streams.len() == self.m;
        for (i, row) in self.stream_shares.iter().enumerate() {
            if row.len() != self.m {
                shape_ok = false;
                out.push(Violation::new(
                    "stream_shares",
                    Some(i),
                    row.len() as f64,
                    format!("row has wrong length, expected {}", self.m),
                ));
                continue;
            }
            for &p in row {
                if !(0.0..=1.0).contains(&p) {
                    out.push(Violation::new("stream_shares", Some(i), p, "shares must lie in [0, 1]"));
                }
            }
        }
        if !shape_ok {
            return out;
        }
        for j in 0..self.m {
            let col: f64 = self.stream_shares.iter().map(|row| row[j]).sum();
            if (col - 1.0).abs() > SHARE_TOLERANCE {
                out.push(Violation::new(
                    "stream_shares column",
                    Some(j),
                    col,
                    "shares of each user must sum to 1",
                ));
            }
        }
        if out.is_empty() {
            for (i, d) in self.streamshares().into_iter().enumerate() {
                if d >= 1.0 {
                    out.push(Violation::new(
                        "streamshare",
                        Some(i),
                        d,
                        "monopolist artist (d_i >= 1)",
                    ));
                }
            }
        }
        out
    }

    /// Rescales each user's shares to sum to 1. Only applied on request.
    pub fn renormalized(&self) -> Self {
        let mut s = self.clone();
        for j in 0..s.m.min(s.user_streams.len()) {
            let col: f64 = s.stream_shares.iter().filter_map(|r| r.get(j)).sum();
            if col > 0.0 {
                for row in s.stream_shares.iter_mut() {
                    if let Some(p) = row.get_mut(j) {
                        *p /= col;
                    }
                }
            }
        }
        s
    }

    pub fn total_streams(&self) -> f64 {
        self.user_streams.iter().sum()
    }

    pub fn mean_streams(&self) -> f64 {
        self.total_streams() / self.m as f64
    }

    fn streamshares(&self) -> Vec<f64> {
        let total = self.total_streams();
        self.stream_shares
            .iter()
            .map(|row| row.iter().zip(&self.user_streams).map(|(p, l)| p * l).sum::<f64>() / total)
            .collect()
    }

    /// Reduces to the normalized game.
    pub fn reduce(&self) -> Result<ReducedGame> {
        let violations = self.validate();
        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }
        let lambda_bar = self.mean_streams();
        let xi = (self.delta - self.beta) / self.beta;
        let v = (self.lambda0 - lambda_bar) / (xi * lambda_bar);
        let raw = RawConstants {
            m: self.m,
            lambda_bar,
            lambda0: self.lambda0,
            beta: self.beta,
            delta: self.delta,
            uc_shares: self.stream_shares.iter().map(|row| row.iter().sum()).collect(),
        };
        ReducedGame::new(self.streamshares(), xi, v)?.with_raw(raw)
    }

    fn check_fraud(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::ProfileLength {
                expected: self.n,
                got: x.len(),
            });
        }
        for (index, &value) in x.iter().enumerate() {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::NegativeFraud { index, value });
            }
        }
        Ok(())
    }

    /// Net gain of artist `i` under pro-rata when artists buy `x` fake users.
    pub fn net_gain_prorata(&self, x: &[f64], i: usize) -> Result<f64> {
        self.check_fraud(x)?;
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        let real_total = self.total_streams();
        let real_i: f64 = self.stream_shares[i]
            .iter()
            .zip(&self.user_streams)
            .map(|(p, l)| p * l)
            .sum();
        let x_total: f64 = x.iter().sum();
        let share = (real_i + self.lambda0 * x[i]) / (real_total + self.lambda0 * x_total);
        Ok(share * (self.m as f64 + x_total) * self.beta - self.delta * x[i])
    }

    /// Net gain of artist `i` under user-centric; fraud only costs `delta - beta` per unit.
    pub fn net_gain_usercentric(&self, x: &[f64], i: usize) -> Result<f64> {
        self.check_fraud(x)?;
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        let uc: f64 = self.stream_shares[i].iter().sum();
        Ok((uc + x[i]) * self.beta - self.delta * x[i])
    }

    /// Converts fake users bought into normalized fake-stream ratios `t = lambda0 x / (m lambda_bar)`.
    pub fn fraud_ratios(&self, x: &[f64]) -> Result<StrategyProfile> {
        self.check_fraud(x)?;
        let scale = self.lambda0 / self.total_streams();
        StrategyProfile::new(x.iter().map(|xi| xi * scale).collect())
    }

    /// Inverse of [`Scenario::fraud_ratios`].
    pub fn fraud_activity(&self, t: &StrategyProfile) -> Vec<f64> {
        let scale = self.total_streams() / self.lambda0;
        t.iter().map(|ti| ti * scale).collect()
    }

    /// Factor turning a normalized utility back into a monetary net gain.
    pub fn utility_scale(&self) -> f64 {
        self.total_streams() * (self.delta - self.beta) / self.lambda0
    }
}

/// Platform constants kept alongside the reduced game for inverse transforms
/// and for the user-centric part of the weighted rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawConstants {
    pub m: usize,
    pub lambda_bar: f64,
    pub lambda0: f64,
    pub beta: f64,
    pub delta: f64,
    /// `sum_j pi_ij` for each artist.
    pub uc_shares: Vec<f64>,
}

/// The normalized click-fraud game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ReducedGameRepr", into = "ReducedGameRepr")]
pub struct ReducedGame {
    d: Vec<f64>,
    xi: f64,
    v: f64,
    raw: Option<RawConstants>,
}

#[derive(Serialize, Deserialize)]
struct ReducedGameRepr {
    d: Vec<f64>,
    xi: f64,
    #[serde(rename = "V")]
    v: f64,
    #[serde(flatten, default, skip_serializing_if = "Option::is_none")]
    raw: Option<RawConstants>,
}

impl TryFrom<ReducedGameRepr> for ReducedGame {
    type Error = Error;

    fn try_from(r: ReducedGameRepr) -> Result<Self> {
        let g = ReducedGame::new(r.d, r.xi, r.v)?;
        match r.raw {
            Some(raw) => g.with_raw(raw),
            None => Ok(g),
        }
    }
}

impl From<ReducedGame> for ReducedGameRepr {
    fn from(g: ReducedGame) -> Self {
        ReducedGameRepr {
            d: g.d,
            xi: g.xi,
            v: g.v,
            raw: g.raw,
        }
    }
}

impl ReducedGame {
    /// Builds a game from streamshares, fraud premium and fraud value.
    pub fn new(d: Vec<f64>, xi: f64, v: f64) -> Result<Self> {
        if d.len() < 2 {
            return Err(Error::InvalidGame(format!("need at least 2 artists, got {}", d.len())));
        }
        if let Some((i, x)) = d.iter().enumerate().find(|(_, &x)| !(0.0..1.0).contains(&x)) {
            return Err(Error::InvalidGame(format!("streamshare d[{i}] = {x} outside [0, 1)")));
        }
        let sum: f64 = d.iter().sum();
        if (sum - 1.0).abs() > SHARE_TOLERANCE {
            return Err(Error::InvalidGame(format!("streamshares sum to {sum}, expected 1")));
        }
        if !(xi > 0.0) || !xi.is_finite() {
            return Err(Error::InvalidGame(format!("fraud premium xi = {xi} must be positive")));
        }
        if !v.is_finite() {
            return Err(Error::InvalidGame(format!("fraud value V = {v} is not finite")));
        }
        Ok(Self { d, xi, v, raw: None })
    }

    /// Attaches raw platform constants after checking they match `xi` and `V`.
    pub fn with_raw(mut self, raw: RawConstants) -> Result<Self> {
        if raw.uc_shares.len() != self.d.len() {
            return Err(Error::InvalidGame(format!(
                "uc_shares has {} entries, expected {}",
                raw.uc_shares.len(),
                self.d.len()
            )));
        }
        if raw.m == 0 || !(raw.lambda_bar > 0.0) || !(raw.lambda0 > 0.0) {
            return Err(Error::InvalidGame("m, lambda_bar and lambda0 must be positive".into()));
        }
        let implied = raw.lambda_bar * (1.0 + self.xi * self.v);
        if (implied - raw.lambda0).abs() > IDENTITY_TOLERANCE * raw.lambda0.abs().max(1.0) {
            return Err(Error::InvalidGame(format!(
                "lambda0 = {} inconsistent with lambda_bar (1 + xi V) = {implied}",
                raw.lambda0
            )));
        }
        let xi = (raw.delta - raw.beta) / raw.beta;
        if (xi - self.xi).abs() > IDENTITY_TOLERANCE * self.xi {
            return Err(Error::InvalidGame(format!(
                "(delta - beta) / beta = {xi} inconsistent with xi = {}",
                self.xi
            )));
        }
        self.raw = Some(raw);
        Ok(self)
    }

    /// Same game with the raw fraud technology replaced; `V` is re-derived.
    pub fn with_lambda0(&self, lambda0: f64) -> Result<Self> {
        let raw = self.raw.as_ref().ok_or(Error::MissingRawConstants)?;
        if !(lambda0 > 0.0) || !lambda0.is_finite() {
            return Err(Error::Domain(format!("lambda0 must be positive, got {lambda0}")));
        }
        let v = (lambda0 - raw.lambda_bar) / (self.xi * raw.lambda_bar);
        let raw = RawConstants { lambda0, ..raw.clone() };
        Self::new(self.d.clone(), self.xi, v)?.with_raw(raw)
    }

    /// Same streamshares and premium, different fraud value. Raw constants are dropped.
    pub fn with_fraud_value(&self, v: f64) -> Result<Self> {
        Self::new(self.d.clone(), self.xi, v)
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Fraud value `V`.
    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn raw(&self) -> Option<&RawConstants> {
        self.raw.as_ref()
    }

    pub fn d_min(&self) -> f64 {
        self.d.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn d_max(&self) -> f64 {
        self.d.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `lambda0 / (m lambda_bar)`, when raw constants are known.
    pub fn fake_to_real_scale(&self) -> Option<f64> {
        self.raw.as_ref().map(|r| r.lambda0 / (r.m as f64 * r.lambda_bar))
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            return Err(Error::IndexOutOfRange { index: i, n: self.n() });
        }
        Ok(())
    }

    fn check_profile(&self, t: &StrategyProfile) -> Result<()> {
        if t.len() != self.n() {
            return Err(Error::ProfileLength {
                expected: self.n(),
                got: t.len(),
            });
        }
        Ok(())
    }

    /// Normalized utility `u_i(t)`.
    pub fn utility(&self, t: &StrategyProfile, i: usize) -> Result<f64> {
        self.check_profile(t)?;
        self.check_index(i)?;
        Ok(self.payoff(i, t[i], t.others(i)))
    }

    pub fn utilities(&self, t: &StrategyProfile) -> Result<Vec<f64>> {
        self.check_profile(t)?;
        Ok((0..self.n()).map(|i| self.payoff(i, t[i], t.others(i))).collect())
    }

    /// Utility of artist `i` playing `t_i` against opponents' aggregate `tau`.
    pub fn payoff(&self, i: usize, t_i: f64, tau: f64) -> f64 {
        let d = self.d[i];
        (d + t_i) / (1.0 + t_i + tau) * self.v - t_i + d / self.xi
    }

    /// `d payoff / d t_i`.
    pub fn marginal_payoff(&self, i: usize, t_i: f64, tau: f64) -> f64 {
        let s = 1.0 + t_i + tau;
        (1.0 - self.d[i] + tau) * self.v / (s * s) - 1.0
    }

    /// `payoff(i, to, tau) - payoff(i, from, tau)`, factored to avoid cancellation.
    pub fn deviation_gain(&self, i: usize, tau: f64, from: f64, to: f64) -> f64 {
        let ratio = (1.0 - self.d[i] + tau) * self.v / ((1.0 + to + tau) * (1.0 + from + tau));
        (to - from) * (ratio - 1.0)
    }
}

/// Normalized fake-stream ratios, one per artist.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct StrategyProfile(Vec<f64>);

impl StrategyProfile {
    pub fn new(t: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = t.iter().enumerate().find(|(_, &x)| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::NegativeFraud { index, value });
        }
        Ok(Self(t))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Aggregate of everyone except `i`.
    pub fn others(&self, i: usize) -> f64 {
        self.0.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, t)| t).sum()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for StrategyProfile {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for StrategyProfile {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<StrategyProfile> for Vec<f64> {
    fn from(p: StrategyProfile) -> Self {
        p.0
    }
}
