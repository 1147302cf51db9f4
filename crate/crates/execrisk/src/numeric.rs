//! Small numerical utilities shared across the crate: compensated summation,
//! deterministic statistics, adaptive quadrature, and scalar minimization.

use thiserror::Error;

/// Error raised by the adaptive quadrature when the requested tolerance is
/// not met within the maximum refinement depth.
#[derive(Debug, Error)]
#[error("quadrature did not converge on [{a}, {b}]: tolerance {tol:e} not met at depth {max_depth}")]
pub struct QuadratureError {
    pub a: f64,
    pub b: f64,
    pub tol: f64,
    pub max_depth: u32,
}

/// Neumaier-compensated accumulator.  Adding values in a fixed order gives a
/// deterministic, nearly error-free sum regardless of magnitude disparities.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Compensated sum of a slice in index order.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for &x in values {
        acc.add(x);
    }
    acc.total()
}

/// Sample mean via compensated summation (deterministic in slice order).
pub fn mean(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "mean of empty slice");
    compensated_sum(values) / values.len() as f64
}

/// Two-pass sample standard deviation (unbiased, n-1 denominator).
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let mut acc = CompensatedSum::new();
    for &x in values {
        let d = x - m;
        acc.add(d * d);
    }
    (acc.total() / (n - 1) as f64).sqrt()
}

/// Standard error of the sample mean.
pub fn standard_error(values: &[f64]) -> f64 {
    sample_std(values) / (values.len() as f64).sqrt()
}

/// Root mean square of a slice.
pub fn rms(values: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for &x in values {
        acc.add(x * x);
    }
    (acc.total() / values.len() as f64).sqrt()
}

/// `n` evenly spaced points from `a` to `b` inclusive (`n >= 2`).
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "linspace needs at least two points");
    let step = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { b } else { a + step * i as f64 })
        .collect()
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
///
/// The local acceptance test is the classic Richardson estimate: a panel is
/// accepted when `|S_fine - S_coarse| <= 15 eps`, contributing the corrected
/// value `S_fine + (S_fine - S_coarse)/15`.  `tol` is applied as an absolute
/// tolerance on the whole interval and halves with each split.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
) -> Result<f64, QuadratureError> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_panel(f, a, b, fa, fm, fb, whole, tol, max_depth).map_err(|_| QuadratureError {
        a,
        b,
        tol,
        max_depth,
    })
}

#[allow(clippy::too_many_arguments)]
fn simpson_panel<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> Result<f64, ()> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * eps {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(());
    }
    let half = 0.5 * eps;
    Ok(simpson_panel(f, a, m, fa, flm, fm, left, half, depth - 1)?
        + simpson_panel(f, m, b, fm, frm, fb, right, half, depth - 1)?)
}

/// Golden-section minimization of a unimodal scalar function on `[lo, hi]`.
///
/// Runs a fixed number of contractions (64 brings the bracket well below the
/// sqrt(machine-epsilon) resolution limit of function-value comparisons) and
/// returns the midpoint of the final bracket.
pub fn golden_section_min<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..64 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Full-precision float formatting (17 significant digits, round-trips f64).
pub fn fmt_full(x: f64) -> String {
    format!("{x:.16e}")
}

/// Display formatting for report output (13 significant digits).
pub fn fmt_sig(x: f64) -> String {
    format!("{x:.12e}")
}
