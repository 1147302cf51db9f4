//! Euler–Maruyama simulation of the coupled holdings / impact-noise / price
//! dynamics.
//!
//! On the grid `t_k = T k / N` the scheme is
//!
//! ```text
//! y_{k+1}  = y_k - v_k dt + phi0 sqrt((T - t_k) max(v_k, 0)) dW_k
//! H_{k+1}  = H_k          + chi0 sqrt((T - t_k) max(v_k, 0)) dZ_k
//! S0_{k+1} = S0(0) + mu t_{k+1} + gamma (y_{k+1} - Y) + psi B_{k+1}
//! S_k      = S0_k + kappa (H_k - v_k)
//! ```
//!
//! where `v_k` is the policy rate at `(t_k, y_k)` and `B_k` is the running
//! sum of the independent base-price increments.  The square root clamps a
//! negative rate to zero noise — buying back carries no execution risk in
//! this model — and holdings are free to go negative; nothing clamps the
//! state.
//!
//! Policies whose rate is undefined at the horizon (the penalized and
//! hard-liquidation optima) carry the previous node's rate into the final
//! grid node, so exported rate columns always have `N + 1` entries.  All
//! randomness comes from a [`NoisePlan`], so ensembles are bit-identical
//! across thread counts and replays.

use crate::noise::NoisePlan;
use crate::params::ModelParams;
use crate::policy::{Policy, PolicyError, PolicyKind};
use rayon::prelude::*;
use thiserror::Error;

/// Errors from ensemble simulation.
#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("path {path}, step {step} (t = {t}): {source}")]
    RateEval {
        path: usize,
        step: usize,
        t: f64,
        source: PolicyError,
    },
    #[error("path {path}, step {step}: state became non-finite")]
    NonFinite { path: usize, step: usize },
}

/// One Euler update of holdings.  Requires `t <= horizon`.
pub fn step_holdings(p: &ModelParams, t: f64, y: f64, v: f64, dt: f64, dw: f64) -> f64 {
    debug_assert!(t <= p.horizon);
    y - v * dt + p.exec_risk_strategy * ((p.horizon - t) * v.max(0.0)).sqrt() * dw
}

/// One Euler update of the accumulated impact noise.  Requires `t <= horizon`.
pub fn step_impact_noise(p: &ModelParams, t: f64, h: f64, v: f64, dz: f64) -> f64 {
    debug_assert!(t <= p.horizon);
    h + p.exec_risk_price * ((p.horizon - t) * v.max(0.0)).sqrt() * dz
}

/// The base-price state identity `S0 = S0(0) + mu t + gamma (y - Y) + psi B`.
pub fn base_price_level(p: &ModelParams, t: f64, y: f64, b: f64) -> f64 {
    p.initial_price
        + p.drift * t
        + p.permanent_impact * (y - p.initial_shares)
        + p.market_vol * b
}

/// Holdings with the deterministic drift bend of the hard-liquidation
/// optimum removed: `y - (mu - b_adj) (T - t)^2 / (4 kappa)`.  Along that
/// policy the rate satisfies `(T - t) v = detrended_holdings`, so the
/// transform turns the optimal flow into pure proportional selling.
pub fn detrended_holdings(p: &ModelParams, adjusted_drift: f64, t: f64, y: f64) -> f64 {
    let tau = p.horizon - t;
    y - adjusted_drift * tau * tau / (4.0 * p.temporary_impact)
}

/// A simulated ensemble: `n_paths` trajectories on `n_steps + 1` grid nodes.
///
/// Rows are stored flat, one path per row, so the memory cost is four
/// `n_paths * (n_steps + 1)` arrays (holdings, rates, impact noise, base
/// price); the execution price is a pure function of those and is computed
/// on demand.
#[derive(Debug)]
pub struct PathEnsemble {
    params: ModelParams,
    policy: PolicyKind,
    seed: u64,
    n_paths: usize,
    n_steps: usize,
    dt: f64,
    times: Vec<f64>,
    holdings: Vec<f64>,
    rates: Vec<f64>,
    impact_noise: Vec<f64>,
    base_price: Vec<f64>,
}

impl PathEnsemble {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn policy(&self) -> PolicyKind {
        self.policy
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Grid times `t_k = horizon * k / n_steps`, length `n_steps + 1`.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    fn row(&self, data: &[f64], path: usize) -> std::ops::Range<usize> {
        assert!(path < self.n_paths, "path {path} out of range");
        debug_assert_eq!(data.len(), self.n_paths * (self.n_steps + 1));
        let rows = self.n_steps + 1;
        path * rows..(path + 1) * rows
    }

    pub fn holdings_path(&self, path: usize) -> &[f64] {
        let r = self.row(&self.holdings, path);
        &self.holdings[r]
    }

    pub fn rates_path(&self, path: usize) -> &[f64] {
        let r = self.row(&self.rates, path);
        &self.rates[r]
    }

    pub fn impact_noise_path(&self, path: usize) -> &[f64] {
        let r = self.row(&self.impact_noise, path);
        &self.impact_noise[r]
    }

    pub fn base_price_path(&self, path: usize) -> &[f64] {
        let r = self.row(&self.base_price, path);
        &self.base_price[r]
    }

    /// Execution price at a node: `S = S0 + kappa (H - v)`.
    pub fn exec_price(&self, path: usize, k: usize) -> f64 {
        let rows = self.n_steps + 1;
        assert!(path < self.n_paths && k < rows);
        let i = path * rows + k;
        self.base_price[i] + self.params.temporary_impact * (self.impact_noise[i] - self.rates[i])
    }

    /// Terminal holdings `y_N`, one value per path.
    pub fn terminal_holdings(&self) -> impl Iterator<Item = f64> + '_ {
        self.holdings[self.n_steps..]
            .iter()
            .step_by(self.n_steps + 1)
            .copied()
    }

    /// Holdings at grid node `k`, one value per path.
    pub fn holdings_at_node(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        assert!(k <= self.n_steps);
        self.holdings[k..].iter().step_by(self.n_steps + 1).copied()
    }
}

/// Simulate every path of `plan` under a named policy.
pub fn simulate_ensemble(
    params: &ModelParams,
    kind: PolicyKind,
    plan: &NoisePlan,
) -> Result<PathEnsemble, SimError> {
    let policy = Policy::new(kind, params)?;
    let n_steps = plan.n_steps;
    drive(params, plan, kind, |path, k, t, y, prev| {
        if k == n_steps {
            match kind {
                // Undefined at the horizon; carry the last rate into the
                // final grid node for export.
                PolicyKind::PenalizedOptimal | PolicyKind::FuelLimitOptimal => {
                    Ok(prev.expect("plans have at least one step"))
                }
                PolicyKind::AdaptiveVwap | PolicyKind::DeterministicVwap => policy
                    .rate(t, y)
                    .map_err(|source| SimError::RateEval { path, step: k, t, source }),
            }
        } else {
            policy
                .rate(t, y)
                .map_err(|source| SimError::RateEval { path, step: k, t, source })
        }
    })
}

/// Simulate the dynamics with externally supplied rates `(path, k, t) -> v`
/// on the same noise as `simulate_ensemble` would use.
///
/// This is the replay tool: feed back a recorded rate table to re-drive the
/// dynamics, or supply a synthetic schedule.  `label` only tags the result.
pub fn simulate_with_rates<F>(
    params: &ModelParams,
    plan: &NoisePlan,
    label: PolicyKind,
    rate: F,
) -> Result<PathEnsemble, SimError>
where
    F: Fn(usize, usize, f64) -> f64 + Sync,
{
    drive(params, plan, label, |path, k, t, _y, _prev| Ok(rate(path, k, t)))
}

fn drive<F>(
    params: &ModelParams,
    plan: &NoisePlan,
    label: PolicyKind,
    rate_source: F,
) -> Result<PathEnsemble, SimError>
where
    F: Fn(usize, usize, f64, f64, Option<f64>) -> Result<f64, SimError> + Sync,
{
    assert_eq!(
        plan.dt,
        params.horizon / plan.n_steps as f64,
        "noise plan was built for a different horizon"
    );
    assert_eq!(
        plan.correlation, params.correlation,
        "noise plan was built for a different correlation"
    );
    let n_paths = plan.n_paths;
    let n_steps = plan.n_steps;
    let rows = n_steps + 1;
    let times: Vec<f64> = (0..rows)
        .map(|k| params.horizon * k as f64 / n_steps as f64)
        .collect();
    let mut holdings = vec![0.0; n_paths * rows];
    let mut rates = vec![0.0; n_paths * rows];
    let mut impact_noise = vec![0.0; n_paths * rows];
    let mut base_price = vec![0.0; n_paths * rows];

    holdings
        .par_chunks_mut(rows)
        .zip(rates.par_chunks_mut(rows))
        .zip(impact_noise.par_chunks_mut(rows))
        .zip(base_price.par_chunks_mut(rows))
        .enumerate()
        .try_for_each(|(path, (((y_row, v_row), h_row), s_row))| {
            let mut y = params.initial_shares;
            let mut h = 0.0;
            let mut b_level = 0.0;
            y_row[0] = y;
            h_row[0] = h;
            s_row[0] = base_price_level(params, times[0], y, b_level);
            let mut prev = None;
            for k in 0..n_steps {
                let t = times[k];
                let v = rate_source(path, k, t, y, prev)?;
                v_row[k] = v;
                prev = Some(v);
                let noise = plan.increments(path, k);
                y = step_holdings(params, t, y, v, plan.dt, noise.dw);
                h = step_impact_noise(params, t, h, v, noise.dz);
                b_level += noise.db;
                if !(y.is_finite() && h.is_finite() && b_level.is_finite()) {
                    return Err(SimError::NonFinite { path, step: k });
                }
                y_row[k + 1] = y;
                h_row[k + 1] = h;
                s_row[k + 1] = base_price_level(params, times[k + 1], y, b_level);
            }
            v_row[n_steps] = rate_source(path, n_steps, times[n_steps], y, prev)?;
            Ok(())
        })?;

    Ok(PathEnsemble {
        params: *params,
        policy: label,
        seed: plan.seed,
        n_paths,
        n_steps,
        dt: plan.dt,
        times,
        holdings,
        rates,
        impact_noise,
        base_price,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::tests::reference;
    use crate::params::TerminalPenalty;
    use crate::policy::{expected_holdings_fuel_limit, rate_fuel_limit};

    #[test]
    fn step_holdings_hand_value() {
        // y = 10, v = 1, dt = 1, tau = 2, phi0 = 0.1, dW = 1:
        // 10 - 1 + 0.1 sqrt(2) = 9.1414...
        let mut p = reference(0.1);
        p.horizon = 3.0;
        p.exec_risk_strategy = 0.1;
        let y = step_holdings(&p, 1.0, 10.0, 1.0, 1.0, 1.0);
        assert!((y - (9.0 + 0.1 * 2.0f64.sqrt())).abs() < 1e-15, "{y}");
    }

    #[test]
    fn negative_rate_has_no_execution_noise() {
        // Buying back (v < 0) moves holdings deterministically.
        let p = reference(0.3);
        let y = step_holdings(&p, 0.25, 1e5, -2.0, 0.5, 0.7);
        assert_eq!(y, 1e5 + 1.0);
        let h = step_impact_noise(&p, 0.25, 3.0, -2.0, 0.7);
        assert_eq!(h, 3.0);
    }

    #[test]
    fn price_columns_satisfy_state_identities_exactly() {
        let mut p = reference(0.3);
        p.drift = 0.05;
        p.correlation = 0.3;
        let plan = NoisePlan::new(7, 4, 16, &p);
        let ens = simulate_ensemble(&p, PolicyKind::PenalizedOptimal, &plan).unwrap();
        for path in 0..4 {
            let y = ens.holdings_path(path);
            let s0 = ens.base_price_path(path);
            let h = ens.impact_noise_path(path);
            let v = ens.rates_path(path);
            let mut b_level = 0.0;
            for k in 0..=16 {
                if k > 0 {
                    b_level += plan.increments(path, k - 1).db;
                }
                let expect = base_price_level(&p, ens.times()[k], y[k], b_level);
                assert_eq!(s0[k], expect, "base price identity at path {path}, k {k}");
                let s = ens.exec_price(path, k);
                assert_eq!(s, s0[k] + p.temporary_impact * (h[k] - v[k]));
            }
        }
    }

    #[test]
    fn ensembles_are_identical_across_thread_counts() {
        let p = reference(0.1);
        let plan = NoisePlan::new(11, 8, 32, &p);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| simulate_ensemble(&p, PolicyKind::PenalizedOptimal, &plan).unwrap())
        };
        let a = run(1);
        let b = run(4);
        for path in 0..8 {
            assert_eq!(a.holdings_path(path), b.holdings_path(path));
            assert_eq!(a.rates_path(path), b.rates_path(path));
            assert_eq!(a.impact_noise_path(path), b.impact_noise_path(path));
            assert_eq!(a.base_price_path(path), b.base_price_path(path));
        }
    }

    #[test]
    fn replay_with_recorded_rates_reproduces_the_ensemble() {
        let p = reference(0.3);
        let plan = NoisePlan::new(3, 4, 16, &p);
        let base = simulate_ensemble(&p, PolicyKind::PenalizedOptimal, &plan).unwrap();
        let replay = simulate_with_rates(&p, &plan, PolicyKind::PenalizedOptimal, |path, k, _| {
            base.rates_path(path)[k]
        })
        .unwrap();
        for path in 0..4 {
            assert_eq!(base.holdings_path(path), replay.holdings_path(path));
            assert_eq!(base.base_price_path(path), replay.base_price_path(path));
        }
    }

    #[test]
    fn holdings_go_negative_under_oversized_constant_rate() {
        // Selling twice the inventory at constant speed with the noise
        // scales zeroed: y marches from Y to -Y in exact arithmetic.
        let mut p = reference(0.1);
        p.exec_risk_strategy = 0.0;
        p.exec_risk_price = 0.0;
        p.market_vol = 0.0;
        let plan = NoisePlan::new(1, 1, 16, &p);
        let rate = 2.0 * p.initial_shares / p.horizon;
        let ens =
            simulate_with_rates(&p, &plan, PolicyKind::DeterministicVwap, |_, _, _| rate).unwrap();
        let y = ens.holdings_path(0);
        assert_eq!(y[16], -1e6);
        assert!(y[9] < 0.0 && y[8] > 0.0 - 1e-9);
    }

    #[test]
    fn execution_noise_can_push_holdings_negative() {
        // With a large strategy execution-risk scale some paths overshoot
        // through zero even under the penalized optimal policy.
        let mut p = reference(0.1);
        p.exec_risk_strategy = 5.0 * 1e3; // p0 = 500% of sqrt(Y/T)
        let plan = NoisePlan::new(1, 64, 256, &p);
        let ens = simulate_ensemble(&p, PolicyKind::PenalizedOptimal, &plan).unwrap();
        let min = (0..64)
            .flat_map(|path| ens.holdings_path(path).iter().copied())
            .fold(f64::INFINITY, f64::min);
        assert!(min < 0.0, "expected an excursion below zero, min = {min}");
    }

    #[test]
    fn final_node_rate_rules() {
        let p = reference(0.1);
        let plan = NoisePlan::new(5, 2, 8, &p);

        // Penalized: final node reuses the previous rate.
        let pen = simulate_ensemble(&p, PolicyKind::PenalizedOptimal, &plan).unwrap();
        for path in 0..2 {
            let v = pen.rates_path(path);
            assert_eq!(v[8], v[7]);
        }

        // Adaptive: final node evaluates at t = T, which with mu = 0 is
        // exactly y / alpha.
        let alpha = p.derived().alpha.unwrap();
        let ada = simulate_ensemble(&p, PolicyKind::AdaptiveVwap, &plan).unwrap();
        for path in 0..2 {
            let v = ada.rates_path(path);
            let y = ada.holdings_path(path);
            assert_eq!(v[8], y[8] / alpha);
        }

        // Hard liquidation: reuses the previous rate.
        let mut pf = p;
        pf.terminal_penalty = TerminalPenalty::Infinite;
        let plan_f = NoisePlan::new(5, 2, 8, &pf);
        let fuel = simulate_ensemble(&pf, PolicyKind::FuelLimitOptimal, &plan_f).unwrap();
        for path in 0..2 {
            let v = fuel.rates_path(path);
            assert_eq!(v[8], v[7]);
        }
    }

    #[test]
    fn deterministic_fuel_run_converges_at_first_order_mid_horizon() {
        // All noise scales zero and mu = 0.05: the Euler error against the
        // closed-form expected holdings is O(dt) away from the horizon, so
        // doubling the step count halves it; the terminal error collapses
        // to exactly (mu/4kappa) dt^2 because the last update clears y/tau.
        let mut p = reference(0.1);
        p.exec_risk_strategy = 0.0;
        p.exec_risk_price = 0.0;
        p.market_vol = 0.0;
        p.drift = 0.05;
        p.terminal_penalty = TerminalPenalty::Infinite;

        let err_mid = |n: usize| {
            let plan = NoisePlan::new(1, 1, n, &p);
            let ens = simulate_ensemble(&p, PolicyKind::FuelLimitOptimal, &plan).unwrap();
            let k = n / 2;
            let exact = expected_holdings_fuel_limit(&p, &p.derived(), ens.times()[k]);
            (ens.holdings_path(0)[k] - exact, ens.holdings_path(0)[n])
        };
        let (e1, term1) = err_mid(512);
        let (e2, _) = err_mid(1024);
        let ratio = e1 / e2;
        assert!(
            (1.8..2.2).contains(&ratio),
            "mid-horizon error ratio {ratio} (e1 = {e1:e}, e2 = {e2:e})"
        );
        // mu/(4 kappa) dt^2 with dt = 1/512.
        let expect_term = 0.05 / (4.0 * p.temporary_impact) / (512.0 * 512.0);
        assert!(
            (term1 - expect_term).abs() < 1e-9 * expect_term.abs().max(1.0),
            "terminal holdings {term1:e} vs {expect_term:e}"
        );
    }

    #[test]
    fn detrended_holdings_identity_with_fuel_rate() {
        let mut p = reference(0.3);
        p.drift = 0.05;
        p.terminal_penalty = TerminalPenalty::Infinite;
        let d = p.derived();
        for &(t, y) in &[(0.0, 1e6), (0.4, 7e5), (0.9, 1e4), (0.99, -2e3)] {
            let v = rate_fuel_limit(&p, &d, t, y).unwrap();
            let lhs = (p.horizon - t) * v;
            let rhs = detrended_holdings(&p, d.adjusted_drift, t, y);
            assert!(
                (lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()),
                "t = {t}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn state_blowup_is_reported_not_propagated() {
        // A degenerate rate source (division by zero in a user-supplied
        // policy, say) must surface as an error instead of filling the
        // ensemble with NaN/inf. A merely huge finite rate cannot overflow
        // here -- the per-step drain v * dt telescopes to v * T <= f64::MAX --
        // so the probe injects an actual infinity.
        let p = reference(0.1);
        let plan = NoisePlan::new(1, 1, 32, &p);
        let err = simulate_with_rates(&p, &plan, PolicyKind::DeterministicVwap, |_, _, _| {
            f64::INFINITY
        })
        .unwrap_err();
        assert!(
            matches!(err, SimError::NonFinite { path: 0, step: 0 }),
            "{err}"
        );
    }

    #[test]
    fn fuel_policy_under_finite_penalty_is_rejected() {
        let p = reference(0.1);
        let plan = NoisePlan::new(1, 1, 4, &p);
        let err = simulate_ensemble(&p, PolicyKind::FuelLimitOptimal, &plan).unwrap_err();
        assert!(matches!(err, SimError::Policy(_)), "{err}");
    }
}
