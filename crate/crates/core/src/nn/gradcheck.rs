//! Central finite-difference verification of analytic gradients.

use crate::nn::Parameterized;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Denominator floor for relative errors; below it the comparison is
/// effectively absolute.
const REL_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Flat index of the worst parameter.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub passed: bool,
}

/// Relative error `|a - n| / max(|a|, |n|)`. Two zero gradients compare as 0.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Central differences of `loss` over every parameter of `model`.
pub fn numeric_gradient<M, L>(model: &M, loss: L, step: f64) -> Vec<f64>
where
    M: Parameterized<f64> + Clone,
    L: Fn(&M) -> f64,
{
    let base = model.flat_params();
    let mut probe = model.clone();
    let mut out = Vec::with_capacity(base.len());
    let mut params = base.clone();
    for i in 0..base.len() {
        params[i] = base[i] + step;
        probe.set_flat_params(&params);
        let up = loss(&probe);
        params[i] = base[i] - step;
        probe.set_flat_params(&params);
        let down = loss(&probe);
        params[i] = base[i];
        out.push((up - down) / (2.0 * step));
    }
    out
}

/// Compares `analytic` (flattened in [`Parameterized`] order) against central
/// differences of `loss` with step [`FD_STEP`].
pub fn finite_difference_check<M, L>(model: &M, analytic: &[f64], loss: L, tolerance: f64) -> GradCheckReport
where
    M: Parameterized<f64> + Clone,
    L: Fn(&M) -> f64,
{
    let numeric = numeric_gradient(model, loss, FD_STEP);
    assert_eq!(numeric.len(), analytic.len(), "analytic gradient length");
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: analytic.first().copied().unwrap_or(0.0),
        numeric: numeric.first().copied().unwrap_or(0.0),
        passed: true,
    };
    for (i, (&a, &n)) in analytic.iter().zip(&numeric).enumerate() {
        let e = relative_error(a, n);
        if e > report.max_rel_error {
            report = GradCheckReport {
                max_rel_error: e,
                worst_index: i,
                analytic: a,
                numeric: n,
                passed: true,
            };
        }
    }
    report.passed = report.max_rel_error < tolerance;
    report
}
