//! Closed-form selling-rate policies.
//!
//! With `tau = T - t`, `d = tau + alpha`, and the derived constants from
//! [`crate::params`], the optimal feedback rate under a finite terminal
//! penalty is
//!
//! ```text
//! v*(t, y) = y / d
//!          - (mu + b_adj)/(4 kappa) (d - alpha^2 / d)
//!          + b_adj/(2 kappa) tau
//!          + alpha/(2 kappa) ( b_adj tau / d - kappa phi0^2 ln(d/alpha) / d )
//! ```
//!
//! As `lambda -> infinity` (`alpha -> 0`) this becomes the hard-liquidation
//! rate
//!
//! ```text
//! v*(t, y) = y / tau - (mu - b_adj)/(4 kappa) tau,
//! ```
//!
//! whose expected holdings follow the closed form
//!
//! ```text
//! E y(t) = (Y/T + (mu - b_adj) t / (4 kappa)) (T - t).
//! ```
//!
//! Setting `phi0 = chi0 = 0` in the penalized rate (so `b_adj = 0`) gives the
//! adaptive VWAP baseline `y/d - mu/(4 kappa) (d - alpha^2/d)`, which ignores
//! execution risk but still reacts to realized holdings; the deterministic
//! VWAP baseline sells at the constant rate `Y/T` regardless of state.

use crate::params::{DerivedParams, ModelParams};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from policy construction and rate evaluation.
#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("rate undefined at t = {t}: requires 0 <= t < horizon = {horizon}")]
    OutsideHorizon { t: f64, horizon: f64 },
    #[error("rate undefined at t = {t}: requires 0 <= t <= horizon = {horizon}")]
    OutsideClosedHorizon { t: f64, horizon: f64 },
    #[error("policy `{0}` requires a finite terminal penalty")]
    RequiresFinitePenalty(&'static str),
    #[error("policy `{0}` requires an infinite terminal penalty")]
    RequiresInfinitePenalty(&'static str),
}

/// The four selling-rate policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Optimal feedback rate under a finite terminal penalty.
    PenalizedOptimal,
    /// Optimal feedback rate in the hard-liquidation limit.
    FuelLimitOptimal,
    /// Execution-risk-blind feedback baseline (`phi0 = chi0 = 0` closed form).
    AdaptiveVwap,
    /// Constant open-loop rate `Y/T`.
    DeterministicVwap,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::PenalizedOptimal => "penalized_optimal",
            PolicyKind::FuelLimitOptimal => "fuel_limit_optimal",
            PolicyKind::AdaptiveVwap => "adaptive_vwap",
            PolicyKind::DeterministicVwap => "deterministic_vwap",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "penalized_optimal" => Some(PolicyKind::PenalizedOptimal),
            "fuel_limit_optimal" => Some(PolicyKind::FuelLimitOptimal),
            "adaptive_vwap" => Some(PolicyKind::AdaptiveVwap),
            "deterministic_vwap" => Some(PolicyKind::DeterministicVwap),
            _ => None,
        }
    }

    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::PenalizedOptimal,
        PolicyKind::FuelLimitOptimal,
        PolicyKind::AdaptiveVwap,
        PolicyKind::DeterministicVwap,
    ];
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A policy bound to a validated parameter set.
///
/// Construction enforces the penalty/policy pairing: the hard-liquidation
/// rate exists only for `lambda = infinity`, the penalized and adaptive
/// feedback rates only for finite `lambda`.
#[derive(Debug, Clone)]
pub struct Policy {
    kind: PolicyKind,
    params: ModelParams,
    derived: DerivedParams,
}

impl Policy {
    pub fn new(kind: PolicyKind, params: &ModelParams) -> Result<Self, PolicyError> {
        let infinite = params.terminal_penalty.is_infinite();
        match kind {
            PolicyKind::FuelLimitOptimal if !infinite => {
                return Err(PolicyError::RequiresInfinitePenalty(kind.as_str()))
            }
            PolicyKind::PenalizedOptimal | PolicyKind::AdaptiveVwap if infinite => {
                return Err(PolicyError::RequiresFinitePenalty(kind.as_str()))
            }
            _ => {}
        }
        Ok(Self {
            kind,
            params: *params,
            derived: params.derived(),
        })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn derived(&self) -> &DerivedParams {
        &self.derived
    }

    /// The selling rate at `(t, y)`.
    pub fn rate(&self, t: f64, y: f64) -> Result<f64, PolicyError> {
        match self.kind {
            PolicyKind::PenalizedOptimal => rate_penalized(&self.params, &self.derived, t, y),
            PolicyKind::FuelLimitOptimal => rate_fuel_limit(&self.params, &self.derived, t, y),
            PolicyKind::AdaptiveVwap => rate_adaptive_vwap(&self.params, &self.derived, t, y),
            PolicyKind::DeterministicVwap => Ok(rate_deterministic_vwap(&self.params)),
        }
    }
}

fn check_open_horizon(p: &ModelParams, t: f64) -> Result<(), PolicyError> {
    if t >= 0.0 && t < p.horizon {
        Ok(())
    } else {
        Err(PolicyError::OutsideHorizon {
            t,
            horizon: p.horizon,
        })
    }
}

/// Optimal feedback rate under a finite terminal penalty; defined on
/// `0 <= t < T` (its `t -> T` limit is `y / alpha`).
pub fn rate_penalized(
    p: &ModelParams,
    d: &DerivedParams,
    t: f64,
    y: f64,
) -> Result<f64, PolicyError> {
    let alpha = d
        .alpha
        .ok_or(PolicyError::RequiresFinitePenalty("penalized_optimal"))?;
    check_open_horizon(p, t)?;
    let tau = p.horizon - t;
    let dd = tau + alpha;
    let b = d.drift_adjustment;
    let mu = p.drift;
    let kappa = p.temporary_impact;
    let phi0 = p.exec_risk_strategy;
    Ok(y / dd - (mu + b) / (4.0 * kappa) * (dd - alpha * alpha / dd)
        + b / (2.0 * kappa) * tau
        + alpha / (2.0 * kappa) * (b * tau / dd - kappa * phi0 * phi0 / dd * (dd / alpha).ln()))
}

/// Optimal rate in the hard-liquidation limit; defined on `0 <= t < T`.
pub fn rate_fuel_limit(
    p: &ModelParams,
    d: &DerivedParams,
    t: f64,
    y: f64,
) -> Result<f64, PolicyError> {
    if !p.terminal_penalty.is_infinite() {
        return Err(PolicyError::RequiresInfinitePenalty("fuel_limit_optimal"));
    }
    check_open_horizon(p, t)?;
    let tau = p.horizon - t;
    Ok(y / tau - d.adjusted_drift / (4.0 * p.temporary_impact) * tau)
}

/// Execution-risk-blind feedback baseline; defined on the closed interval
/// `0 <= t <= T` (bounded at the horizon, value `y / alpha`).
pub fn rate_adaptive_vwap(
    p: &ModelParams,
    d: &DerivedParams,
    t: f64,
    y: f64,
) -> Result<f64, PolicyError> {
    let alpha = d
        .alpha
        .ok_or(PolicyError::RequiresFinitePenalty("adaptive_vwap"))?;
    if !(t >= 0.0 && t <= p.horizon) {
        return Err(PolicyError::OutsideClosedHorizon {
            t,
            horizon: p.horizon,
        });
    }
    let dd = p.horizon - t + alpha;
    Ok(y / dd - p.drift / (4.0 * p.temporary_impact) * (dd - alpha * alpha / dd))
}

/// Constant open-loop rate `Y / T`.
pub fn rate_deterministic_vwap(p: &ModelParams) -> f64 {
    p.initial_shares / p.horizon
}

/// Expected holdings under the hard-liquidation optimal rate:
/// `E y(t) = (Y/T + (mu - b_adj) t / (4 kappa)) (T - t)`.
pub fn expected_holdings_fuel_limit(p: &ModelParams, d: &DerivedParams, t: f64) -> f64 {
    (p.initial_shares / p.horizon + d.adjusted_drift * t / (4.0 * p.temporary_impact))
        * (p.horizon - t)
}

#[cfg(test)]
// Frozen reference values carry more digits than f64 resolves; the extra
// digits document the exact high-precision value each literal rounds from.
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::params::tests::reference;
    use crate::params::TerminalPenalty;

    fn setup(p0: f64) -> (ModelParams, DerivedParams) {
        let p = reference(p0);
        let d = p.derived();
        (p, d)
    }

    fn fuel_setup(p0: f64) -> (ModelParams, DerivedParams) {
        let mut p = reference(p0);
        p.terminal_penalty = TerminalPenalty::Infinite;
        let d = p.derived();
        (p, d)
    }

    // Golden values were evaluated independently at 50-digit precision from
    // the four-term closed form before this module was written.

    #[test]
    fn penalized_rate_matches_frozen_values_p10() {
        let (p, d) = setup(0.1);
        let v0 = rate_penalized(&p, &d, 0.0, 1e6).unwrap();
        assert!(
            (v0 - 999_091.563_240_781_169_26).abs() < 1e-6,
            "v*(0, Y) = {v0:.9}"
        );
        let vhalf = rate_penalized(&p, &d, 0.5, 4e5).unwrap();
        assert!(
            (vhalf - 798_403.694_109_490_092_24).abs() < 1e-6,
            "v*(0.5, 4e5) = {vhalf:.9}"
        );
    }

    #[test]
    fn penalized_rate_matches_frozen_values_p30() {
        let (p, d) = setup(0.3);
        let v0 = rate_penalized(&p, &d, 0.0, 1e6).unwrap();
        assert!(
            (v0 - 999_816.476_380_178_033_23).abs() < 1e-6,
            "v*(0, Y) = {v0:.9}"
        );
        let vhalf = rate_penalized(&p, &d, 0.5, 4e5).unwrap();
        assert!(
            (vhalf - 798_408.335_562_685_145_28).abs() < 1e-6,
            "v*(0.5, 4e5) = {vhalf:.9}"
        );
    }

    #[test]
    fn penalized_rate_limit_at_horizon_is_y_over_alpha() {
        let (p, d) = setup(0.3);
        let alpha = d.alpha.unwrap();
        let y = 1234.5;
        let v = rate_penalized(&p, &d, 1.0 - 1e-12, y).unwrap();
        let rel = (v - y / alpha).abs() / (y / alpha);
        assert!(rel < 1e-8, "limit rel error {rel:e}");
    }

    #[test]
    fn penalized_rate_errors_at_and_beyond_horizon() {
        let (p, d) = setup(0.1);
        assert!(matches!(
            rate_penalized(&p, &d, 1.0, 1e5),
            Err(PolicyError::OutsideHorizon { .. })
        ));
        assert!(rate_penalized(&p, &d, 1.5, 1e5).is_err());
        assert!(rate_penalized(&p, &d, -0.1, 1e5).is_err());
    }

    #[test]
    fn penalized_rate_is_affine_in_holdings() {
        let (p, d) = setup(0.3);
        let alpha = d.alpha.unwrap();
        for &t in &[0.0, 0.3, 0.77, 0.999] {
            let dd = 1.0 - t + alpha;
            let v0 = rate_penalized(&p, &d, t, 0.0).unwrap();
            for &y in &[-2e5, 1e3, 9e5] {
                let v = rate_penalized(&p, &d, t, y).unwrap();
                let rel = ((v - v0) - y / dd).abs() / (1.0 + (y / dd).abs());
                assert!(rel < 1e-12, "affinity broken at t={t}, y={y}: {rel:e}");
            }
        }
    }

    #[test]
    fn fuel_limit_rate_matches_hand_value() {
        // y/tau - (mu - b_adj)/(4 kappa) tau with mu - b_adj = -1.25e-3:
        // 5e5/0.5 + 1.25e-3/(1e-5) * 0.5 = 1e6 + 62.5 = 1000062.5.
        let (p, d) = fuel_setup(0.1);
        let v = rate_fuel_limit(&p, &d, 0.5, 5e5).unwrap();
        assert_eq!(v, 1_000_062.5);
    }

    #[test]
    fn fuel_limit_rate_errors_at_horizon_or_finite_penalty() {
        let (p, d) = fuel_setup(0.1);
        assert!(matches!(
            rate_fuel_limit(&p, &d, 1.0, 0.0),
            Err(PolicyError::OutsideHorizon { .. })
        ));
        let (pf, df) = setup(0.1);
        assert_eq!(
            rate_fuel_limit(&pf, &df, 0.5, 1e5),
            Err(PolicyError::RequiresInfinitePenalty("fuel_limit_optimal"))
        );
    }

    #[test]
    fn adaptive_vwap_matches_frozen_value_and_horizon_limit() {
        let (p, d) = setup(0.1);
        let v0 = rate_adaptive_vwap(&p, &d, 0.0, 1e6).unwrap();
        assert!(
            (v0 - 999_000.949_098_356_561_27).abs() < 1e-6,
            "adaptive(0, Y) = {v0:.9}"
        );
        // At t = T with mu = 0 the rate is exactly y / alpha.
        let alpha = d.alpha.unwrap();
        let v_end = rate_adaptive_vwap(&p, &d, 1.0, 500.0).unwrap();
        assert_eq!(v_end, 500.0 / alpha);
        assert!(rate_adaptive_vwap(&p, &d, 1.0 + 1e-9, 1.0).is_err());
    }

    #[test]
    fn deterministic_vwap_is_constant() {
        let (p, _) = setup(0.3);
        assert_eq!(rate_deterministic_vwap(&p), 1e6);
    }

    #[test]
    fn adaptive_equals_penalized_when_execution_risk_vanishes() {
        // phi0 = chi0 = 0 makes b_adj = 0 and the two closed forms coincide.
        let mut p = reference(0.1);
        p.exec_risk_strategy = 0.0;
        p.exec_risk_price = 0.0;
        p.drift = 0.02;
        let d = p.derived();
        assert_eq!(d.drift_adjustment, 0.0);
        for &(t, y) in &[(0.0, 1e6), (0.45, 3e5), (0.99, 1e4)] {
            let a = rate_adaptive_vwap(&p, &d, t, y).unwrap();
            let b = rate_penalized(&p, &d, t, y).unwrap();
            assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn expected_holdings_matches_frozen_values() {
        let (p, d) = fuel_setup(0.1);
        assert_eq!(expected_holdings_fuel_limit(&p, &d, 0.0), 1e6);
        assert_eq!(expected_holdings_fuel_limit(&p, &d, 1.0), 0.0);
        let mid = expected_holdings_fuel_limit(&p, &d, 0.5);
        assert!((mid - 499_968.75).abs() < 1e-7, "E y(0.5) = {mid}");
        let (p30, d30) = fuel_setup(0.3);
        let mid30 = expected_holdings_fuel_limit(&p30, &d30, 0.5);
        assert!((mid30 - 499_718.75).abs() < 1e-7, "E y(0.5) = {mid30}");
    }

    #[test]
    fn penalized_approaches_fuel_limit_as_penalty_grows() {
        // Max gap over a (t, y) sample must shrink monotonically in lambda.
        let kappa = 2.5e-6;
        let mut prev = f64::INFINITY;
        for &mult in &[1e2, 1e4, 1e6, 1e8] {
            let mut p = reference(0.3);
            p.terminal_penalty = TerminalPenalty::Finite(mult * kappa);
            let d = p.derived();
            let mut pf = p;
            pf.terminal_penalty = TerminalPenalty::Infinite;
            let df = pf.derived();
            let mut max_gap = 0.0f64;
            for &t in &[0.0, 0.25, 0.5, 0.75, 0.9] {
                for &y in &[-1e6, 0.0, 5e5, 1e6] {
                    let gap = (rate_penalized(&p, &d, t, y).unwrap()
                        - rate_fuel_limit(&pf, &df, t, y).unwrap())
                    .abs();
                    max_gap = max_gap.max(gap);
                }
            }
            assert!(max_gap < prev, "gap {max_gap} not below {prev} at {mult}x");
            prev = max_gap;
        }
        assert!(prev < 1e-3 * 1e6, "final gap {prev} too large");
    }

    #[test]
    fn policy_construction_enforces_penalty_pairing() {
        let p_fin = reference(0.1);
        let mut p_inf = p_fin;
        p_inf.terminal_penalty = TerminalPenalty::Infinite;

        assert!(Policy::new(PolicyKind::PenalizedOptimal, &p_fin).is_ok());
        assert!(Policy::new(PolicyKind::AdaptiveVwap, &p_fin).is_ok());
        assert!(Policy::new(PolicyKind::DeterministicVwap, &p_fin).is_ok());
        assert!(matches!(
            Policy::new(PolicyKind::FuelLimitOptimal, &p_fin),
            Err(PolicyError::RequiresInfinitePenalty(_))
        ));

        assert!(Policy::new(PolicyKind::FuelLimitOptimal, &p_inf).is_ok());
        assert!(Policy::new(PolicyKind::DeterministicVwap, &p_inf).is_ok());
        assert!(matches!(
            Policy::new(PolicyKind::PenalizedOptimal, &p_inf),
            Err(PolicyError::RequiresFinitePenalty(_))
        ));
        assert!(matches!(
            Policy::new(PolicyKind::AdaptiveVwap, &p_inf),
            Err(PolicyError::RequiresFinitePenalty(_))
        ));
    }

    #[test]
    fn policy_kind_parse_round_trip() {
        for kind in PolicyKind::ALL {
            assert_eq!(PolicyKind::parse(kind.as_str()), Some(kind));
        }
        assert_eq!(PolicyKind::parse("twap"), None);
    }
}
