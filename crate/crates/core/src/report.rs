//! Number formatting and CSV/JSON emission.
//!
//! Every number leaves the crate rounded to 12 significant digits. The rounded
//! value is printed in its shortest round-trip form, so re-parsing and
//! re-printing gives the same bytes.

use serde::Serialize;
use serde_json::Value;

use crate::equilibrium::EquilibriumResult;
use crate::error::Result;
use crate::fairness::FairnessReport;
use crate::model::ReducedGame;
use crate::policy::PolicyAnalysis;

pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

pub fn fmt_num(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        "0".to_string()
    } else {
        format!("{r}")
    }
}

/// Empty for `None`.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// Recursively rounds every float in a JSON tree.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().unwrap_or(0.0));
            if x.fract() == 0.0 && x.abs() < 9.0e15 {
                Value::from(x as i64)
            } else {
                serde_json::Number::from_f64(x)
                    .map(Value::Number)
                    .unwrap_or(Value::Null)
            }
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

/// Compact JSON with rounded numbers and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let tree = round_json(serde_json::to_value(value)?);
    let mut s = serde_json::to_string(&tree)?;
    s.push('\n');
    Ok(s)
}

/// Comma-separated text with LF line endings.
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = header.join(",");
        buf.push('\n');
        Self { buf }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let fields: Vec<String> = fields.into_iter().map(|s| s.as_ref().to_string()).collect();
        self.buf.push_str(&fields.join(","));
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

/// One row per artist: `artist,d,t_star,utility`.
pub fn equilibrium_csv(g: &ReducedGame, eq: &EquilibriumResult) -> String {
    let mut csv = Csv::new(&["artist", "d", "t_star", "utility"]);
    for (i, d) in g.d().iter().enumerate() {
        csv.row([
            i.to_string(),
            fmt_num(*d),
            fmt_num(eq.t_star[i]),
            fmt_num(eq.utilities[i]),
        ]);
    }
    csv.finish()
}

/// `artist,u_zero,u_star,delta`.
pub fn fairness_csv(r: &FairnessReport) -> String {
    let mut csv = Csv::new(&["artist", "u_zero", "u_star", "delta"]);
    for (i, (z, s)) in r.u_zero.iter().zip(&r.u_star).enumerate() {
        csv.row([i.to_string(), fmt_num(*z), fmt_num(*s), fmt_num(s - z)]);
    }
    csv.finish()
}

/// `artist,u_star,u_hat,delta`; `u_hat` and `delta` are empty when uncharacterized.
pub fn welfare_csv(a: &PolicyAnalysis) -> String {
    let mut csv = Csv::new(&["artist", "u_star", "u_hat", "delta"]);
    for (i, s) in a.u_star.iter().enumerate() {
        let hat = a.u_hat.as_ref().map(|u| u[i]);
        let delta = a.welfare_delta.as_ref().map(|d| d[i]);
        csv.row([i.to_string(), fmt_num(*s), fmt_opt(hat), fmt_opt(delta)]);
    }
    csv.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve;
    use proptest::prelude::*;

    #[test]
    fn formatting_examples() {
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(1.0 / 2.8), "0.357142857143");
        assert_eq!(fmt_num(0.30000000000000004), "0.3");
        assert_eq!(fmt_num(-2.5), "-2.5");
    }

    #[test]
    fn json_rounding() {
        let v = serde_json::json!({"a": 0.30000000000000004, "b": [1.0, 2.5], "c": "x", "d": 7});
        let r = round_json(v);
        assert_eq!(r["a"], serde_json::json!(0.3));
        assert_eq!(r["b"][0], serde_json::json!(1));
        assert_eq!(r["d"], serde_json::json!(7));
    }

    #[test]
    fn equilibrium_csv_layout() {
        let g = ReducedGame::new(vec![0.3, 0.7], 0.5, 4.0).unwrap();
        let eq = solve(&g).unwrap();
        let csv = equilibrium_csv(&g, &eq);
        assert_eq!(csv, "artist,d,t_star,utility\n0,0.3,0.7,1.9\n1,0.7,0.3,3.1\n");
        assert!(!csv.contains('\r'));
    }

    proptest! {
        #[test]
        fn formatting_is_round_trip_stable(x in -1e6f64..1e6) {
            let s = fmt_num(x);
            let back: f64 = s.parse().unwrap();
            prop_assert_eq!(fmt_num(back), s.clone());
            prop_assert!((back - x).abs() <= 1e-11 * x.abs().max(1e-300));
        }
    }
}
