//! Model parameters, validation, and derived constants.
//!
//! All closed forms in the crate are driven by three constants derived from
//! the primitive parameters:
//!
//! ```text
//! alpha = 2 kappa / (2 lambda - gamma)              (finite lambda only)
//! b_adj = (gamma / 2) phi0^2 + kappa rho chi0 phi0
//! mu~   = mu - b_adj
//! ```
//!
//! `alpha` is the time scale on which the penalized policy tolerates leftover
//! inventory near the horizon (it vanishes as `lambda -> infinity`), and
//! `b_adj` is the effective drift adjustment created by execution risk: the
//! square-root noise feeds back into revenue through the permanent-impact
//! slope and through its correlation with execution-price noise.

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Terminal inventory penalty coefficient.
///
/// The hard-liquidation limit is a distinguished value, never a large float:
/// closed forms branch on it exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TerminalPenalty {
    /// Quadratic penalty `lambda y(T)^2` with finite `lambda`.
    Finite(f64),
    /// The `lambda -> infinity` limit: full liquidation is enforced.
    Infinite,
}

impl TerminalPenalty {
    /// The finite coefficient, if any.
    pub fn finite(self) -> Option<f64> {
        match self {
            TerminalPenalty::Finite(x) => Some(x),
            TerminalPenalty::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, TerminalPenalty::Infinite)
    }
}

impl fmt::Display for TerminalPenalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TerminalPenalty::Finite(x) => write!(f, "{x}"),
            TerminalPenalty::Infinite => write!(f, "infinite"),
        }
    }
}

impl Serialize for TerminalPenalty {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TerminalPenalty::Finite(x) => s.serialize_f64(*x),
            TerminalPenalty::Infinite => s.serialize_str("infinite"),
        }
    }
}

impl<'de> Deserialize<'de> for TerminalPenalty {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = TerminalPenalty;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a finite number or the string \"infinite\"")
            }
            fn visit_f64<E: de::Error>(self, x: f64) -> Result<Self::Value, E> {
                Ok(TerminalPenalty::Finite(x))
            }
            fn visit_u64<E: de::Error>(self, x: u64) -> Result<Self::Value, E> {
                Ok(TerminalPenalty::Finite(x as f64))
            }
            fn visit_i64<E: de::Error>(self, x: i64) -> Result<Self::Value, E> {
                Ok(TerminalPenalty::Finite(x as f64))
            }
            fn visit_str<E: de::Error>(self, s: &str) -> Result<Self::Value, E> {
                parse_terminal_penalty(s).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

/// Parse a terminal-penalty scalar: a finite float, or `infinite`/`inf`.
pub fn parse_terminal_penalty(s: &str) -> Result<TerminalPenalty, String> {
    let t = s.trim();
    if t.eq_ignore_ascii_case("infinite") || t.eq_ignore_ascii_case("inf") {
        return Ok(TerminalPenalty::Infinite);
    }
    t.parse::<f64>()
        .map_err(|e| format!("expected a number or \"infinite\": {e}"))
        .and_then(|x| {
            if x.is_finite() {
                Ok(TerminalPenalty::Finite(x))
            } else {
                Err("numeric terminal penalty must be finite; use \"infinite\" for the hard-liquidation limit".into())
            }
        })
}

/// Errors from parameter construction and validation.
#[derive(Debug, Error)]
pub enum ParamError {
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("field `{field}` must be {bound}, got {got}")]
    OutOfRange {
        field: &'static str,
        bound: &'static str,
        got: f64,
    },
    #[error("field `{field}`: {msg}")]
    BadValue { field: String, msg: String },
}

/// Primitive parameters of the liquidation model.
///
/// Units follow the trading conventions: shares, days, and currency per
/// share.  Impact slopes are currency per share per share(-rate); the noise
/// scales `phi0` (strategy execution risk) and `chi0` (price execution risk)
/// are in the units that make `phi0 sqrt((T-t) v)` a share rate and
/// `chi0 sqrt((T-t) v)` a price rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Initial inventory `Y` to liquidate (shares), > 0.
    pub initial_shares: f64,
    /// Trading horizon `T` (days), > 0.
    pub horizon: f64,
    /// Base price at time zero `S0(0)` (currency/share), > 0.
    pub initial_price: f64,
    /// Base-price drift `mu` (currency/share/day); any finite value.
    pub drift: f64,
    /// Permanent impact slope `gamma` (currency/share^2), >= 0.
    pub permanent_impact: f64,
    /// Temporary impact slope `kappa` (currency·day/share^2), > 0.
    pub temporary_impact: f64,
    /// Terminal penalty `lambda`; finite values must satisfy `lambda > gamma/2`.
    pub terminal_penalty: TerminalPenalty,
    /// Base-price volatility `psi` (currency/share/sqrt(day)), >= 0.
    pub market_vol: f64,
    /// Strategy execution-risk scale `phi0` (sqrt(shares)/day), >= 0.
    pub exec_risk_strategy: f64,
    /// Price execution-risk scale `chi0`, >= 0.
    pub exec_risk_price: f64,
    /// Correlation `rho` between strategy and price execution noise, in [-1, 1].
    pub correlation: f64,
}

impl ModelParams {
    /// Validate every field; returns the first violated constraint.
    pub fn validate(&self) -> Result<(), ParamError> {
        fn finite(field: &'static str, x: f64) -> Result<f64, ParamError> {
            if x.is_finite() {
                Ok(x)
            } else {
                Err(ParamError::OutOfRange {
                    field,
                    bound: "finite",
                    got: x,
                })
            }
        }
        fn positive(field: &'static str, x: f64) -> Result<(), ParamError> {
            if finite(field, x)? > 0.0 {
                Ok(())
            } else {
                Err(ParamError::OutOfRange {
                    field,
                    bound: "> 0",
                    got: x,
                })
            }
        }
        fn non_negative(field: &'static str, x: f64) -> Result<(), ParamError> {
            if finite(field, x)? >= 0.0 {
                Ok(())
            } else {
                Err(ParamError::OutOfRange {
                    field,
                    bound: ">= 0",
                    got: x,
                })
            }
        }

        positive("initial_shares", self.initial_shares)?;
        positive("horizon", self.horizon)?;
        positive("initial_price", self.initial_price)?;
        finite("drift", self.drift)?;
        non_negative("permanent_impact", self.permanent_impact)?;
        positive("temporary_impact", self.temporary_impact)?;
        if let TerminalPenalty::Finite(lambda) = self.terminal_penalty {
            finite("terminal_penalty", lambda)?;
            if 2.0 * lambda - self.permanent_impact <= 0.0 {
                return Err(ParamError::OutOfRange {
                    field: "terminal_penalty",
                    bound: "> permanent_impact / 2 (2*terminal_penalty - permanent_impact must be > 0)",
                    got: lambda,
                });
            }
        }
        non_negative("market_vol", self.market_vol)?;
        non_negative("exec_risk_strategy", self.exec_risk_strategy)?;
        non_negative("exec_risk_price", self.exec_risk_price)?;
        let rho = finite("correlation", self.correlation)?;
        if !(-1.0..=1.0).contains(&rho) {
            return Err(ParamError::OutOfRange {
                field: "correlation",
                bound: "in [-1, 1]",
                got: rho,
            });
        }
        Ok(())
    }

    /// Derived constants for this parameter set.
    pub fn derived(&self) -> DerivedParams {
        let b_adj = 0.5 * self.permanent_impact * self.exec_risk_strategy * self.exec_risk_strategy
            + self.temporary_impact * self.correlation * self.exec_risk_price * self.exec_risk_strategy;
        let alpha = self.terminal_penalty.finite().map(|lambda| {
            2.0 * self.temporary_impact / (2.0 * lambda - self.permanent_impact)
        });
        DerivedParams {
            alpha,
            drift_adjustment: b_adj,
            adjusted_drift: self.drift - b_adj,
        }
    }
}

/// Constants derived from [`ModelParams`]; see the module docs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedParams {
    /// `alpha = 2 kappa / (2 lambda - gamma)`; `None` iff `lambda` is infinite.
    pub alpha: Option<f64>,
    /// `b_adj = (gamma/2) phi0^2 + kappa rho chi0 phi0`.
    pub drift_adjustment: f64,
    /// `mu~ = mu - b_adj`.
    pub adjusted_drift: f64,
}

/// Canonical field names accepted by [`build_params`].
pub const PARAM_FIELDS: [&str; 11] = [
    "initial_shares",
    "horizon",
    "initial_price",
    "drift",
    "permanent_impact",
    "temporary_impact",
    "terminal_penalty",
    "market_vol",
    "exec_risk_strategy",
    "exec_risk_price",
    "correlation",
];

/// Build validated parameters from a flat mapping of named scalar strings.
///
/// Every field in [`PARAM_FIELDS`] must be present; unknown keys are errors.
pub fn build_params(raw: &BTreeMap<String, String>) -> Result<ModelParams, ParamError> {
    for key in raw.keys() {
        if !PARAM_FIELDS.contains(&key.as_str()) {
            return Err(ParamError::UnknownField(key.clone()));
        }
    }
    fn get<'a>(
        raw: &'a BTreeMap<String, String>,
        key: &'static str,
    ) -> Result<&'a str, ParamError> {
        raw.get(key)
            .map(|s| s.as_str())
            .ok_or(ParamError::MissingField(key))
    }
    fn get_f64(raw: &BTreeMap<String, String>, key: &'static str) -> Result<f64, ParamError> {
        get(raw, key)?
            .trim()
            .parse::<f64>()
            .map_err(|e| ParamError::BadValue {
                field: key.to_string(),
                msg: e.to_string(),
            })
    }

    let params = ModelParams {
        initial_shares: get_f64(raw, "initial_shares")?,
        horizon: get_f64(raw, "horizon")?,
        initial_price: get_f64(raw, "initial_price")?,
        drift: get_f64(raw, "drift")?,
        permanent_impact: get_f64(raw, "permanent_impact")?,
        temporary_impact: get_f64(raw, "temporary_impact")?,
        terminal_penalty: parse_terminal_penalty(get(raw, "terminal_penalty")?).map_err(|msg| {
            ParamError::BadValue {
                field: "terminal_penalty".into(),
                msg,
            }
        })?,
        market_vol: get_f64(raw, "market_vol")?,
        exec_risk_strategy: get_f64(raw, "exec_risk_strategy")?,
        exec_risk_price: get_f64(raw, "exec_risk_price")?,
        correlation: get_f64(raw, "correlation")?,
    };
    params.validate()?;
    Ok(params)
}
