//! Numerical certification of the quadratic value function behind the
//! closed-form policies.
//!
//! For a finite terminal penalty the value function is `V(t, y) = a(t) y^2 +
//! b(t) y + c(t)` with, writing `tau = T - t`, `d = tau + alpha`:
//!
//! ```text
//! a(t)  = -gamma/2 - kappa / d
//! b(t)  = -kappa f1(t),
//! f1(t) = [ phi0^2 (tau - alpha ln(d/alpha))
//!           - (mu + b_adj) tau^2 / (2 kappa)
//!           - mu alpha tau / kappa ] / d
//! c'(t) = -G0(t)^2 / (4 kappa),   c(T) = 0,
//! G0(t) = b_adj tau - (mu + b_adj) tau^2 / (2d) - mu alpha tau / d
//!         - kappa phi0^2 alpha ln(d/alpha) / d
//! ```
//!
//! The certificates checked here, each against an explicit tolerance:
//!
//! * the coefficient system `a' = -(a + gamma/2)^2 / kappa`,
//!   `b' = (a + gamma/2)(phi0^2 tau (a + gamma/2) + b_adj tau - b)/kappa - mu`
//!   with `a(T) = -lambda`, `b(T) = 0`, via central differences;
//! * the dynamic-programming equation
//!   `V_t + G(t, y)^2/(4 kappa) + mu y = 0` on a time-holdings grid, where
//!   `G = (phi0^2/2) tau (V_yy + gamma) + b_adj tau - (V_y + gamma y)`, plus
//!   the terminal condition `V(T, y) = -lambda y^2` and the shape of `c`
//!   (non-negative, non-increasing, vanishing at `T`);
//! * the policy is the argmax: the closed-form rate minimizes
//!   `kappa v^2 - G v` at seeded sample points;
//! * in the hard-liquidation limit, ensemble holdings match the closed-form
//!   mean `E y(t)` within Monte Carlo error and the terminal holdings
//!   collapse at first order in the step size.
//!
//! `G0` above is `G` at `y = 0` rearranged so that the `kappa phi0^2 tau / d`
//! pieces cancel symbolically instead of numerically; the naive form loses
//! four digits to cancellation, which would drown the `c` checks.

use crate::noise::{CounterRng, NoisePlan};
use crate::numeric::{adaptive_simpson, golden_section_min, linspace, mean, rms, standard_error};
use crate::params::ModelParams;
use crate::policy::{expected_holdings_fuel_limit, rate_penalized, PolicyError, PolicyKind};
use crate::simulate::simulate_ensemble;
use serde::Serialize;

/// Maximum bisection depth for the `c(t)` quadrature; `G0` has a boundary
/// layer of width `alpha` near the horizon that the integrator must split
/// down to.
const C_QUADRATURE_DEPTH: u32 = 48;

/// Absolute tolerance for the `c(t)` quadrature.
pub const C_QUADRATURE_TOL: f64 = 1e-10;

/// Coefficients of the quadratic value function (finite penalty only).
#[derive(Debug, Clone)]
pub struct ValueCoefficients {
    p: ModelParams,
    alpha: f64,
    lambda: f64,
    b_adj: f64,
}

impl ValueCoefficients {
    pub fn new(p: &ModelParams) -> Result<Self, PolicyError> {
        let derived = p.derived();
        match (p.terminal_penalty.finite(), derived.alpha) {
            (Some(lambda), Some(alpha)) => Ok(Self {
                p: *p,
                alpha,
                lambda,
                b_adj: derived.drift_adjustment,
            }),
            _ => Err(PolicyError::RequiresFinitePenalty("value_coefficients")),
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn drift_adjustment(&self) -> f64 {
        self.b_adj
    }

    /// Quadratic coefficient `a(t) = -gamma/2 - kappa/(T - t + alpha)`.
    pub fn a(&self, t: f64) -> f64 {
        let d = self.p.horizon - t + self.alpha;
        -0.5 * self.p.permanent_impact - self.p.temporary_impact / d
    }

    /// The same slope with `alpha` dropped, `-gamma/2 - kappa/tau`.  This is
    /// the `lambda -> infinity` coefficient; comparing it against [`Self::a`]
    /// shows how much the finite penalty bends the solution (reported as an
    /// informational check, never a pass/fail gate).
    pub fn a_alpha_free(&self, t: f64) -> f64 {
        let tau = self.p.horizon - t;
        -0.5 * self.p.permanent_impact - self.p.temporary_impact / tau
    }

    /// Exact derivative of [`Self::a`]: `-kappa / d^2`.
    pub fn a_prime(&self, t: f64) -> f64 {
        let d = self.p.horizon - t + self.alpha;
        -self.p.temporary_impact / (d * d)
    }

    /// The linear coefficient divided by `-kappa`.
    pub fn f1(&self, t: f64) -> f64 {
        let tau = self.p.horizon - t;
        let d = tau + self.alpha;
        let phi_sq = self.p.exec_risk_strategy * self.p.exec_risk_strategy;
        let kappa = self.p.temporary_impact;
        let mu = self.p.drift;
        (phi_sq * (tau - self.alpha * (d / self.alpha).ln())
            - (mu + self.b_adj) * tau * tau / (2.0 * kappa)
            - mu * self.alpha * tau / kappa)
            / d
    }

    /// Linear coefficient `b(t) = -kappa f1(t)`; vanishes identically at `T`.
    pub fn b(&self, t: f64) -> f64 {
        -self.p.temporary_impact * self.f1(t)
    }

    /// Exact derivative of [`Self::b`]:
    /// `(b + kappa phi0^2 tau / d - (mu + b_adj) tau - mu alpha) / d`.
    pub fn b_prime(&self, t: f64) -> f64 {
        let tau = self.p.horizon - t;
        let d = tau + self.alpha;
        let kappa = self.p.temporary_impact;
        let phi_sq = self.p.exec_risk_strategy * self.p.exec_risk_strategy;
        let mu = self.p.drift;
        (self.b(t) + kappa * phi_sq * tau / d - (mu + self.b_adj) * tau - mu * self.alpha) / d
    }

    /// `G(t, 0) = phi0^2 tau (a + gamma/2) + b_adj tau - b`, rearranged so the
    /// large `kappa phi0^2 tau / d` contributions cancel symbolically.
    pub fn g0(&self, t: f64) -> f64 {
        let tau = self.p.horizon - t;
        let d = tau + self.alpha;
        let mu = self.p.drift;
        let kap_phi_sq = self.p.temporary_impact
            * self.p.exec_risk_strategy
            * self.p.exec_risk_strategy;
        self.b_adj * tau
            - (mu + self.b_adj) * tau * tau / (2.0 * d)
            - mu * self.alpha * tau / d
            - kap_phi_sq * self.alpha * (d / self.alpha).ln() / d
    }

    /// `c'(t) = -G0(t)^2 / (4 kappa)`.
    pub fn c_prime(&self, t: f64) -> f64 {
        let g = self.g0(t);
        -g * g / (4.0 * self.p.temporary_impact)
    }

    /// `c(t) = integral_t^T G0(s)^2 / (4 kappa) ds`, by adaptive quadrature.
    pub fn c(&self, t: f64, tol: f64) -> Result<f64, crate::numeric::QuadratureError> {
        let kappa = self.p.temporary_impact;
        adaptive_simpson(
            &|s| {
                let g = self.g0(s);
                g * g / (4.0 * kappa)
            },
            t,
            self.p.horizon,
            tol,
            C_QUADRATURE_DEPTH,
        )
    }

    /// The gain `G(t, y)` of the running reward `G v - kappa v^2`; the
    /// optimal rate is `G / (2 kappa)`.
    pub fn gain(&self, t: f64, y: f64) -> f64 {
        let tau = self.p.horizon - t;
        let phi_sq = self.p.exec_risk_strategy * self.p.exec_risk_strategy;
        let a_shift = self.a(t) + 0.5 * self.p.permanent_impact;
        phi_sq * tau * a_shift + self.b_adj * tau - 2.0 * a_shift * y - self.b(t)
    }
}

/// Outcome of one verification check.
///
/// `max_residual` is measured against `tolerance`; both are in the units
/// stated by `details` (usually relative to `scale`).  Informational entries
/// never gate [`VerificationReport::all_passed`].
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub informational: bool,
    pub max_residual: f64,
    pub tolerance: f64,
    pub scale: f64,
    pub worst_location: String,
    pub details: String,
}

/// A bundle of verification checks.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckReport>,
}

impl VerificationReport {
    /// True when every non-informational check passed.
    pub fn all_passed(&self) -> bool {
        self.checks
            .iter()
            .filter(|c| !c.informational)
            .all(|c| c.passed)
    }

    /// Fixed-width text table, one row per check.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<26} {:<6} {:>13} {:>13} {:>13}  {}\n",
            "check", "status", "max residual", "tolerance", "scale", "worst at"
        ));
        for c in &self.checks {
            let status = if c.informational {
                "INFO"
            } else if c.passed {
                "PASS"
            } else {
                "FAIL"
            };
            out.push_str(&format!(
                "{:<26} {:<6} {:>13.3e} {:>13.3e} {:>13.3e}  {}\n",
                c.name, status, c.max_residual, c.tolerance, c.scale, c.worst_location
            ));
        }
        out
    }
}

fn central_diff<F: Fn(f64) -> f64>(f: &F, t: f64, h: f64) -> f64 {
    let tp = t + h;
    let tm = t - h;
    (f(tp) - f(tm)) / (tp - tm)
}

struct ResidualScan {
    max_residual: f64,
    scale: f64,
    worst: String,
}

impl ResidualScan {
    fn new() -> Self {
        Self {
            max_residual: 0.0,
            scale: 0.0,
            worst: String::new(),
        }
    }

    fn record(&mut self, residual: f64, point_scale: f64, location: impl Fn() -> String) {
        if residual > self.max_residual {
            self.max_residual = residual;
            self.worst = location();
        }
        self.scale = self.scale.max(point_scale);
    }

    /// Relative residual (against the scan-wide scale).
    fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.max_residual / self.scale
        } else {
            self.max_residual
        }
    }
}

/// Check the coefficient ODE system by central differences on a uniform
/// grid over `[0, T - 10 alpha]` (stopping short of the horizon keeps the
/// stencil inside the domain).  The difference step `h = 1e-4 (tau + alpha)`
/// shrinks with the local curvature scale.
pub fn check_riccati(coef: &ValueCoefficients) -> Vec<CheckReport> {
    let p = coef.params();
    let alpha = coef.alpha();
    let kappa = p.temporary_impact;
    let phi_sq = p.exec_risk_strategy * p.exec_risk_strategy;
    let grid = linspace(0.0, p.horizon - 10.0 * alpha, 10_000);

    let mut scan_a = ResidualScan::new();
    let mut scan_b = ResidualScan::new();
    let mut scan_gap = ResidualScan::new();
    for &t in &grid {
        let h = 1e-4 * (p.horizon - t + alpha);
        let a_shift = coef.a(t) + 0.5 * p.permanent_impact;

        let fd_a = central_diff(&|s| coef.a(s), t, h);
        let rhs_a = -a_shift * a_shift / kappa;
        scan_a.record(
            (fd_a - rhs_a).abs(),
            fd_a.abs().max(rhs_a.abs()),
            || format!("t = {t:.6}"),
        );

        let fd_b = central_diff(&|s| coef.b(s), t, h);
        let tau = p.horizon - t;
        let rhs_b =
            a_shift / kappa * (phi_sq * tau * a_shift + coef.b_adj * tau - coef.b(t)) - p.drift;
        scan_b.record(
            (fd_b - rhs_b).abs(),
            fd_b.abs().max(rhs_b.abs()),
            || format!("t = {t:.6}"),
        );

        let gap = (coef.a(t) - coef.a_alpha_free(t)).abs();
        scan_gap.record(gap, coef.a(t).abs(), || format!("t = {t:.6}"));
    }

    let tol_ode = 1e-6;
    let a_terminal = (coef.a(p.horizon) + coef.lambda).abs();
    let a_terminal_tol = 4.0 * f64::EPSILON * coef.lambda;
    let b_terminal = coef.b(p.horizon).abs();

    vec![
        CheckReport {
            name: "riccati_a_ode",
            passed: scan_a.relative() <= tol_ode,
            informational: false,
            max_residual: scan_a.relative(),
            tolerance: tol_ode,
            scale: scan_a.scale,
            worst_location: scan_a.worst,
            details: format!(
                "central difference of a(t) vs -(a + gamma/2)^2/kappa on {} nodes; \
                 residual relative to the largest slope",
                grid.len()
            ),
        },
        CheckReport {
            name: "riccati_b_ode",
            passed: scan_b.relative() <= tol_ode,
            informational: false,
            max_residual: scan_b.relative(),
            tolerance: tol_ode,
            scale: scan_b.scale,
            worst_location: scan_b.worst,
            details: format!(
                "central difference of b(t) vs its coefficient equation on {} nodes; \
                 residual relative to the largest slope",
                grid.len()
            ),
        },
        CheckReport {
            name: "riccati_a_terminal",
            passed: a_terminal <= a_terminal_tol,
            informational: false,
            max_residual: a_terminal,
            tolerance: a_terminal_tol,
            scale: coef.lambda,
            worst_location: "t = T".into(),
            details: "a(T) = -lambda up to a few rounding units: \
                      kappa/alpha reproduces lambda - gamma/2 only to machine precision"
                .into(),
        },
        CheckReport {
            name: "riccati_b_terminal",
            passed: b_terminal <= 0.0,
            informational: false,
            max_residual: b_terminal,
            tolerance: 0.0,
            scale: 1.0,
            worst_location: "t = T".into(),
            details: "b(T) must vanish identically (every term of f1 carries a factor tau)".into(),
        },
        CheckReport {
            name: "riccati_a_alpha_free_gap",
            passed: true,
            informational: true,
            max_residual: scan_gap.relative(),
            tolerance: f64::INFINITY,
            scale: scan_gap.scale,
            worst_location: scan_gap.worst,
            details: "distance between the finite-penalty slope -gamma/2 - kappa/(tau + alpha) \
                      and its hard-liquidation limit -gamma/2 - kappa/tau; grows near the \
                      horizon by design, recorded for reference only"
                .into(),
        },
    ]
}

/// Check the dynamic-programming equation on a time-holdings grid, the
/// terminal condition, and the shape of `c(t)`.
pub fn check_hjb(coef: &ValueCoefficients, quadrature_tol: f64) -> Vec<CheckReport> {
    let p = coef.params();
    let kappa = p.temporary_impact;
    let y_max = p.initial_shares;
    let t_grid = linspace(0.0, 0.99 * p.horizon, 200);
    // 201 nodes so y = 0 sits exactly on the grid.
    let y_grid = linspace(-y_max, y_max, 201);

    let mut interior = ResidualScan::new();
    for &t in &t_grid {
        let a_p = coef.a_prime(t);
        let b_p = coef.b_prime(t);
        let c_p = coef.c_prime(t);
        for &y in &y_grid {
            let gain = coef.gain(t, y);
            let terms = [a_p * y * y, b_p * y, c_p, gain * gain / (4.0 * kappa), p.drift * y];
            let residual = terms.iter().sum::<f64>().abs();
            let point_scale = terms.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            interior.record(residual, point_scale, || format!("t = {t:.6}, y = {y:.3e}"));
        }
    }
    let tol_interior = 1e-9;

    // Terminal condition V(T, y) = -lambda y^2 at the edges and the center.
    let c_t = coef.c(p.horizon, quadrature_tol);
    let mut terminal = ResidualScan::new();
    let mut terminal_err = None;
    match c_t {
        Ok(c_end) => {
            for &y in &[-y_max, 0.0, y_max] {
                let v = coef.a(p.horizon) * y * y + coef.b(p.horizon) * y + c_end;
                let target = -coef.lambda * y * y;
                terminal.record(
                    (v - target).abs(),
                    coef.lambda * y_max * y_max,
                    || format!("t = T, y = {y:.3e}"),
                );
            }
        }
        Err(e) => terminal_err = Some(e.to_string()),
    }
    let tol_terminal = 1e-12;

    // Zero-holdings slice: the equation collapses to c' + G(t,0)^2/(4 kappa)
    // = 0, comparing the cancellation-free G0 against the assembled gain.
    let mut zero_slice = ResidualScan::new();
    for &t in &t_grid {
        let g = coef.gain(t, 0.0);
        let residual = (coef.c_prime(t) + g * g / (4.0 * kappa)).abs();
        zero_slice.record(residual, coef.c_prime(t).abs(), || format!("t = {t:.6}"));
    }
    let tol_zero = 1e-9;

    // Shape of c: non-negative, non-increasing, zero at the horizon.
    let c_samples = linspace(0.0, p.horizon, 21);
    let mut c_values = Vec::with_capacity(c_samples.len());
    let mut c_err = None;
    for &t in &c_samples {
        match coef.c(t, quadrature_tol) {
            Ok(v) => c_values.push(v),
            Err(e) => {
                c_err = Some(e.to_string());
                break;
            }
        }
    }
    let c_scale = c_values.first().copied().unwrap_or(0.0);
    let slack = 2.0 * quadrature_tol + 1e-12 * c_scale.abs();
    let mut c_violation = 0.0f64;
    let mut c_worst = String::from("-");
    if c_err.is_none() {
        for (i, (&t, &v)) in c_samples.iter().zip(&c_values).enumerate() {
            if v < -slack && -v - slack > c_violation {
                c_violation = -v - slack;
                c_worst = format!("t = {t:.4} (negative)");
            }
            if i + 1 < c_values.len() && c_values[i + 1] > v + slack {
                let excess = c_values[i + 1] - v - slack;
                if excess > c_violation {
                    c_violation = excess;
                    c_worst = format!("t = {:.4} (increase)", c_samples[i + 1]);
                }
            }
        }
        let c_end = *c_values.last().unwrap();
        if c_end.abs() > c_violation {
            // c(T) is an empty integral and must be exactly zero.
            if c_end != 0.0 {
                c_violation = c_end.abs();
                c_worst = "t = T (nonzero)".into();
            }
        }
    }

    vec![
        CheckReport {
            name: "hjb_interior",
            passed: interior.relative() <= tol_interior,
            informational: false,
            max_residual: interior.relative(),
            tolerance: tol_interior,
            scale: interior.scale,
            worst_location: interior.worst,
            details: format!(
                "V_t + G^2/(4 kappa) + mu y over a {} x {} grid on [0, 0.99 T] x [-Y, Y]; \
                 residual relative to the largest single term",
                t_grid.len(),
                y_grid.len()
            ),
        },
        CheckReport {
            name: "hjb_terminal",
            passed: terminal_err.is_none() && terminal.relative() <= tol_terminal,
            informational: false,
            max_residual: terminal.relative(),
            tolerance: tol_terminal,
            scale: terminal.scale,
            worst_location: terminal.worst,
            details: terminal_err
                .unwrap_or_else(|| "V(T, y) = -lambda y^2 at y in {-Y, 0, Y}, relative to lambda Y^2".into()),
        },
        CheckReport {
            name: "hjb_zero_holdings",
            passed: zero_slice.relative() <= tol_zero,
            informational: false,
            max_residual: zero_slice.relative(),
            tolerance: tol_zero,
            scale: zero_slice.scale,
            worst_location: zero_slice.worst,
            details: "c'(t) + G(t,0)^2/(4 kappa) = 0: the cancellation-free c' against the \
                      assembled gain, relative to the largest |c'|"
                .into(),
        },
        CheckReport {
            name: "value_time_decay",
            passed: c_err.is_none() && c_violation <= 0.0,
            informational: false,
            max_residual: c_violation,
            tolerance: slack,
            scale: c_scale,
            worst_location: c_worst,
            details: c_err.unwrap_or_else(|| {
                format!(
                    "c(t) >= 0, non-increasing, c(T) = 0 at {} samples \
                     (violations measured beyond the quadrature slack)",
                    c_samples.len()
                )
            }),
        },
    ]
}

/// Seed for the argmax sample points (fixed so reports are reproducible).
const ARGMAX_SEED: u64 = 42;

/// Check that the closed-form rate is the argmax of the running reward
/// `G v - kappa v^2` at seeded sample points, by golden-section search.
pub fn check_argmax(coef: &ValueCoefficients) -> CheckReport {
    let p = coef.params();
    let kappa = p.temporary_impact;
    let derived = p.derived();
    let n_points = 100;
    let mut scan = ResidualScan::new();
    let mut perturb_ok = true;
    for i in 0..n_points {
        let u_t = CounterRng::from_key(ARGMAX_SEED, i, 0, 0).uniform();
        let u_y = CounterRng::from_key(ARGMAX_SEED, i, 0, 1).uniform();
        let t = 0.99 * p.horizon * u_t;
        let y = p.initial_shares * (2.0 * u_y - 1.0);

        let v_closed = rate_penalized(p, &derived, t, y)
            .expect("sample points lie inside the horizon");
        let g = coef.gain(t, y);
        let cost = |v: f64| kappa * v * v - g * v;
        let radius = g.abs() / kappa + 1.0;
        let v_search = golden_section_min(&cost, -radius, radius);

        scan.record(
            (v_search - v_closed).abs() / (1.0 + v_closed.abs()),
            1.0,
            || format!("t = {t:.6}, y = {y:.3e}"),
        );
        let delta = 1e-3 * (1.0 + v_closed.abs());
        if !(cost(v_closed + delta) > cost(v_closed) && cost(v_closed - delta) > cost(v_closed)) {
            perturb_ok = false;
        }
    }
    let tol = 1e-6;
    CheckReport {
        name: "argmax_consistency",
        passed: scan.max_residual <= tol && perturb_ok,
        informational: false,
        max_residual: scan.max_residual,
        tolerance: tol,
        scale: 1.0,
        worst_location: scan.worst,
        details: format!(
            "golden-section minimum of kappa v^2 - G v vs the closed-form rate at {n_points} \
             seeded points; residual is |v_search - v_closed| / (1 + |v_closed|); \
             perturbations v +/- 1e-3 (1 + |v|) must raise the cost (ok: {perturb_ok})"
        ),
    }
}

/// Check the hard-liquidation ensemble against its closed-form moments.
///
/// Runs its own simulations: a fine ensemble with `n_steps` and a coarse one
/// with `n_steps / 2` (same seed; the two are independent Monte Carlo
/// experiments).  `n_steps` must be even.
pub fn check_fuel_limit_stats(
    params: &ModelParams,
    seed: u64,
    n_paths: usize,
    n_steps: usize,
) -> Vec<CheckReport> {
    assert!(
        n_steps >= 2 && n_steps.is_multiple_of(2),
        "terminal-convergence check halves the step count; n_steps must be even"
    );
    let derived = params.derived();
    let sim_failure = |e: crate::simulate::SimError| CheckReport {
        name: "fuel_simulation",
        passed: false,
        informational: false,
        max_residual: f64::NAN,
        tolerance: 0.0,
        scale: 0.0,
        worst_location: "-".into(),
        details: format!("simulation failed: {e}"),
    };

    // Fine ensemble: checkpoint means and terminal statistics.
    let fine = {
        let plan = NoisePlan::new(seed, n_paths, n_steps, params);
        match simulate_ensemble(params, PolicyKind::FuelLimitOptimal, &plan) {
            Ok(e) => e,
            Err(e) => return vec![sim_failure(e)],
        }
    };
    let floor = 1e-9 * params.initial_shares;
    let mut scan = ResidualScan::new();
    let mut z_notes = Vec::new();
    for i in 0..10 {
        let frac = i as f64 / 10.0;
        let k = ((n_steps as f64) * frac).round() as usize;
        let t = fine.times()[k];
        let values: Vec<f64> = fine.holdings_at_node(k).collect();
        let m = mean(&values);
        let se = standard_error(&values);
        let expect = expected_holdings_fuel_limit(params, &derived, t);
        let ratio = (m - expect).abs() / (3.0 * se + floor);
        z_notes.push(format!("t={t:.1}: z={:.2}", (m - expect) / se.max(f64::MIN_POSITIVE)));
        scan.record(ratio, 1.0, || format!("t = {t:.2}"));
    }

    let terminal_fine: Vec<f64> = fine.terminal_holdings().collect();
    let dt_fine = fine.dt();
    drop(fine);

    // Terminal mean: the affine rate makes E y_N exactly
    // (mu - b_adj) dt^2 / (4 kappa) in the Euler scheme.
    let mean_term = mean(&terminal_fine);
    let se_term = standard_error(&terminal_fine);
    let expect_term =
        derived.adjusted_drift * dt_fine * dt_fine / (4.0 * params.temporary_impact);
    let z_term = (mean_term - expect_term) / se_term.max(f64::MIN_POSITIVE);
    let rms_fine = rms(&terminal_fine);

    // Coarse ensemble for the first-order collapse of the terminal spread.
    let rms_coarse = {
        let plan = NoisePlan::new(seed, n_paths, n_steps / 2, params);
        match simulate_ensemble(params, PolicyKind::FuelLimitOptimal, &plan) {
            Ok(e) => {
                let term: Vec<f64> = e.terminal_holdings().collect();
                rms(&term)
            }
            Err(e) => return vec![sim_failure(e)],
        }
    };
    let rms_ratio = rms_fine / rms_coarse;

    vec![
        CheckReport {
            name: "fuel_mean_holdings",
            passed: scan.max_residual <= 1.0,
            informational: false,
            max_residual: scan.max_residual,
            tolerance: 1.0,
            scale: params.initial_shares,
            worst_location: scan.worst,
            details: format!(
                "|ensemble mean - E y(t)| / (3 SE + 1e-9 Y) at ten checkpoints over {n_paths} \
                 paths; z-scores: {}",
                z_notes.join(", ")
            ),
        },
        CheckReport {
            name: "fuel_terminal_mean",
            passed: z_term.abs() <= 3.0,
            informational: false,
            max_residual: z_term.abs(),
            tolerance: 3.0,
            scale: se_term,
            worst_location: "t = T".into(),
            details: format!(
                "terminal mean {mean_term:.4e} vs the exact Euler expectation \
                 {expect_term:.4e}, in standard errors"
            ),
        },
        CheckReport {
            name: "fuel_terminal_rms",
            passed: rms_ratio <= 1.0 / 1.4,
            informational: false,
            max_residual: rms_ratio,
            tolerance: 1.0 / 1.4,
            scale: rms_coarse,
            worst_location: "t = T".into(),
            details: format!(
                "terminal RMS {rms_fine:.4e} at dt = {dt_fine:.2e} vs {rms_coarse:.4e} at twice \
                 the step; halving dt must shrink the spread by at least 1.4x"
            ),
        },
    ]
}

/// Run the verification suite appropriate to the parameter set: the value
/// function checks for a finite penalty, the ensemble statistics checks in
/// the hard-liquidation limit.
pub fn run_verification(
    params: &ModelParams,
    seed: u64,
    n_paths: usize,
    n_steps: usize,
) -> VerificationReport {
    let mut checks = Vec::new();
    match ValueCoefficients::new(params) {
        Ok(coef) => {
            checks.extend(check_riccati(&coef));
            checks.extend(check_hjb(&coef, C_QUADRATURE_TOL));
            checks.push(check_argmax(&coef));
        }
        Err(_) => {
            checks.extend(check_fuel_limit_stats(params, seed, n_paths, n_steps));
        }
    }
    VerificationReport { checks }
}
