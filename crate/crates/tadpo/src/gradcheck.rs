//! Numerical verification helpers: central finite differences over parameter
//! vectors and error metrics. Used throughout the test suites to check the
//! hand-written gradients against an independent oracle; exported because
//! they are just as useful when extending the crate with new losses.

use crate::nn::ParameterVector;

/// Central-difference gradient of `f` at `params`, one coordinate at a time:
/// `(f(p + h e_i) - f(p - h e_i)) / 2h`.
pub fn finite_diff_grad(params: &ParameterVector, h: f64, mut f: impl FnMut(&ParameterVector) -> f64) -> Vec<f64> {
    let mut p = params.clone();
    let mut out = vec![0.0; params.len()];
    for i in 0..params.len() {
        let orig = p.values()[i];
        p.values_mut()[i] = orig + h;
        let fp = f(&p);
        p.values_mut()[i] = orig - h;
        let fm = f(&p);
        p.values_mut()[i] = orig;
        out[i] = (fp - fm) / (2.0 * h);
    }
    out
}

/// Largest relative error between `got` and `want`, measured coordinatewise
/// as `|got - want| / max(|want|, floor)`. The floor keeps near-zero
/// coordinates from dominating with noise.
pub fn max_abs_rel_err(got: &[f64], want: &[f64], floor: f64) -> f64 {
    assert_eq!(got.len(), want.len());
    got.iter()
        .zip(want)
        .map(|(g, w)| (g - w).abs() / w.abs().max(floor))
        .fold(0.0, f64::max)
}

/// Largest absolute error between two slices.
pub fn max_abs_err(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len());
    got.iter().zip(want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max)
}
