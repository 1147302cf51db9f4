//! Pathwise revenue functionals and Monte Carlo revenue reports.
//!
//! Both functionals measure excess revenue relative to marking the full
//! inventory at the initial base price, net of the terminal penalty.  On a
//! simulated path the direct ("raw") form is the Ito sum
//!
//! ```text
//! R_raw = - sum_k (S_k - S0(0)) (y_{k+1} - y_k)
//!         + (S0_N - S0(0)) y_N - lambda y_N^2
//! ```
//!
//! and summation by parts plus the state identities turn its expectation
//! into the "rewritten" form actually optimized by the closed forms,
//!
//! ```text
//! R_rw = -lambda y_N^2                      (terminal penalty)
//!      + (gamma/2) (y_N^2 - Y^2)            (permanent impact)
//!      + sum_k mu y_k dt                    (drift exposure)
//!      + sum_k b_adj (T - t_k) v_k dt       (execution-risk interaction)
//!      - sum_k kappa v_k^2 dt               (temporary impact)
//! ```
//!
//! The two agree in expectation up to O(dt) discretization bias, which is
//! how the simulator and the closed forms cross-check each other.  Neither
//! functional is defined in the hard-liquidation limit (there is no finite
//! `lambda y_N^2` term to evaluate), so everything here requires a finite
//! terminal penalty.

use crate::numeric::{mean, standard_error, CompensatedSum};
use crate::params::TerminalPenalty;
use crate::policy::PolicyKind;
use crate::simulate::PathEnsemble;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Errors from revenue evaluation.
#[derive(Debug, Error, PartialEq)]
pub enum ObjectiveError {
    #[error(
        "revenue functionals require a finite terminal penalty; \
         the hard-liquidation limit has no lambda y(T)^2 term to evaluate"
    )]
    InfinitePenalty,
}

/// The five additive pieces of the rewritten revenue on one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RevenueDecomposition {
    /// `-lambda y_N^2`.
    pub terminal_penalty: f64,
    /// `(gamma/2) (y_N^2 - Y^2)`.
    pub permanent: f64,
    /// `sum_k mu y_k dt`.
    pub drift: f64,
    /// `sum_k b_adj (T - t_k) v_k dt`.
    pub risk_interaction: f64,
    /// `-sum_k kappa v_k^2 dt`.
    pub temporary: f64,
}

impl RevenueDecomposition {
    /// Sum of the five components.
    pub fn total(&self) -> f64 {
        self.terminal_penalty + self.permanent + self.drift + self.risk_interaction
            + self.temporary
    }
}

/// Mean and standard error of one quantity across paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComponentStat {
    pub mean: f64,
    pub se: f64,
}

fn stat(values: &[f64]) -> ComponentStat {
    ComponentStat {
        mean: mean(values),
        se: standard_error(values),
    }
}

/// Monte Carlo revenue estimates for one ensemble.
///
/// `rewritten_mean` is defined as the sum of the five component means (the
/// decomposition identity holds exactly by construction); `gap` is
/// `raw_mean - rewritten_mean` and `combined_se` the standard error of that
/// difference treating the two estimators as independent.
#[derive(Debug, Clone, Serialize)]
pub struct RevenueReport {
    pub policy: PolicyKind,
    pub seed: u64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub raw_mean: f64,
    pub raw_se: f64,
    pub rewritten_mean: f64,
    pub rewritten_se: f64,
    pub gap: f64,
    pub combined_se: f64,
    pub terminal_penalty: ComponentStat,
    pub permanent: ComponentStat,
    pub drift: ComponentStat,
    pub risk_interaction: ComponentStat,
    pub temporary: ComponentStat,
}

fn finite_lambda(ens: &PathEnsemble) -> Result<f64, ObjectiveError> {
    match ens.params().terminal_penalty {
        TerminalPenalty::Finite(lambda) => Ok(lambda),
        TerminalPenalty::Infinite => Err(ObjectiveError::InfinitePenalty),
    }
}

/// The direct revenue sum on one path.
pub fn raw_revenue_path(ens: &PathEnsemble, path: usize) -> Result<f64, ObjectiveError> {
    let lambda = finite_lambda(ens)?;
    Ok(raw_path(ens, path, lambda))
}

/// The rewritten revenue components on one path.
pub fn rewritten_revenue_path(
    ens: &PathEnsemble,
    path: usize,
) -> Result<RevenueDecomposition, ObjectiveError> {
    let lambda = finite_lambda(ens)?;
    Ok(decomp_path(ens, path, lambda))
}

fn raw_path(ens: &PathEnsemble, path: usize, lambda: f64) -> f64 {
    let p = ens.params();
    let n = ens.n_steps();
    let s00 = p.initial_price;
    let y = ens.holdings_path(path);
    let s0 = ens.base_price_path(path);
    let h = ens.impact_noise_path(path);
    let v = ens.rates_path(path);
    let mut acc = CompensatedSum::new();
    for k in 0..n {
        let s_k = s0[k] + p.temporary_impact * (h[k] - v[k]);
        acc.add(-(s_k - s00) * (y[k + 1] - y[k]));
    }
    acc.add((s0[n] - s00) * y[n]);
    acc.add(-lambda * y[n] * y[n]);
    acc.total()
}

fn decomp_path(ens: &PathEnsemble, path: usize, lambda: f64) -> RevenueDecomposition {
    let p = ens.params();
    let b_adj = p.derived().drift_adjustment;
    let n = ens.n_steps();
    let dt = ens.dt();
    let y = ens.holdings_path(path);
    let v = ens.rates_path(path);
    let times = ens.times();
    let mut holding_time = CompensatedSum::new(); // sum y_k dt
    let mut risk_time = CompensatedSum::new(); // sum (T - t_k) v_k dt
    let mut effort = CompensatedSum::new(); // sum v_k^2 dt
    for k in 0..n {
        holding_time.add(y[k] * dt);
        risk_time.add((p.horizon - times[k]) * v[k] * dt);
        effort.add(v[k] * v[k] * dt);
    }
    let y_n = y[n];
    RevenueDecomposition {
        terminal_penalty: -lambda * y_n * y_n,
        permanent: 0.5 * p.permanent_impact
            * (y_n * y_n - p.initial_shares * p.initial_shares),
        drift: p.drift * holding_time.total(),
        risk_interaction: b_adj * risk_time.total(),
        temporary: -p.temporary_impact * effort.total(),
    }
}

/// Estimate both revenue functionals and the component statistics over an
/// ensemble.  Path order is fixed, so results are independent of thread
/// count.
pub fn estimate_revenue(ens: &PathEnsemble) -> Result<RevenueReport, ObjectiveError> {
    let lambda = finite_lambda(ens)?;
    let n_paths = ens.n_paths();
    let per_path: Vec<(f64, RevenueDecomposition)> = (0..n_paths)
        .into_par_iter()
        .map(|path| (raw_path(ens, path, lambda), decomp_path(ens, path, lambda)))
        .collect();

    let raw: Vec<f64> = per_path.iter().map(|(r, _)| *r).collect();
    let totals: Vec<f64> = per_path.iter().map(|(_, d)| d.total()).collect();
    let pull = |f: fn(&RevenueDecomposition) -> f64| -> Vec<f64> {
        per_path.iter().map(|(_, d)| f(d)).collect()
    };
    let terminal_penalty = stat(&pull(|d| d.terminal_penalty));
    let permanent = stat(&pull(|d| d.permanent));
    let drift = stat(&pull(|d| d.drift));
    let risk_interaction = stat(&pull(|d| d.risk_interaction));
    let temporary = stat(&pull(|d| d.temporary));

    let raw_mean = mean(&raw);
    let raw_se = standard_error(&raw);
    let rewritten_mean = terminal_penalty.mean + permanent.mean + drift.mean
        + risk_interaction.mean
        + temporary.mean;
    let rewritten_se = standard_error(&totals);
    Ok(RevenueReport {
        policy: ens.policy(),
        seed: ens.seed(),
        n_paths,
        n_steps: ens.n_steps(),
        dt: ens.dt(),
        raw_mean,
        raw_se,
        rewritten_mean,
        rewritten_se,
        gap: raw_mean - rewritten_mean,
        combined_se: (raw_se * raw_se + rewritten_se * rewritten_se).sqrt(),
        terminal_penalty,
        permanent,
        drift,
        risk_interaction,
        temporary,
    })
}
