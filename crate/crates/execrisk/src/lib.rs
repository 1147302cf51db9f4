//! Optimal liquidation when the executed quantity itself is uncertain.
//!
//! A trader unwinds `Y` shares over the window `[0, T]`, choosing a selling
//! rate `v`.  Orders do not fill exactly: realized holdings and the execution
//! price carry square-root noise proportional to the remaining time and the
//! attempted speed,
//!
//! ```text
//! holdings         dy(t) = -v(t) dt + phi0 sqrt((T - t) v(t)) dW(t),  y(0) = Y
//! impact noise     H(t)  = integral_0^t chi0 sqrt((T - s) v(s)) dZ(s)
//! base price       S0(t) = S0(0) + mu t + gamma (y(t) - Y) + psi B(t)
//! execution price  S(t)  = S0(t) + kappa (H(t) - v(t))
//! ```
//!
//! with `corr(dW, dZ) = rho dt` and `B` an independent Brownian motion.  The
//! trader maximizes expected revenue net of a quadratic terminal-inventory
//! penalty `lambda y(T)^2`; `lambda = infinity` is the hard-liquidation
//! limit, in which the optimal control spends its holdings like fuel and
//! reaches `y(T) = 0` almost surely.
//!
//! The crate provides:
//!
//! * [`params`] — validated model parameters and the derived constants
//!   `alpha`, `b_adj`, `mu - b_adj` used throughout the closed forms;
//! * [`policy`] — closed-form optimal selling rates (penalized and
//!   hard-liquidation variants) plus adaptive/deterministic VWAP baselines;
//! * [`noise`] — counter-keyed Gaussian increments, bit-reproducible under
//!   any parallelism;
//! * [`simulate`] — Euler–Maruyama path ensembles of the coupled dynamics;
//! * [`objective`] — pathwise revenue functionals (direct Ito sum and its
//!   integrated-by-parts rewriting) and Monte Carlo revenue reports;
//! * [`verify`] — numerical certification of the quadratic value function:
//!   Riccati residuals, HJB residuals, argmax consistency, and statistical
//!   checks of the hard-liquidation ensemble;
//! * [`scenario`] / [`export`] — the flat key/value scenario format and
//!   CSV/JSON outputs used by the `execrisk` command-line tool.

pub mod export;
pub mod noise;
pub mod numeric;
pub mod objective;
pub mod params;
pub mod policy;
pub mod scenario;
pub mod simulate;
pub mod verify;

pub use params::{DerivedParams, ModelParams, ParamError, TerminalPenalty};
pub use policy::{Policy, PolicyError, PolicyKind};
pub use simulate::PathEnsemble;
