//! Central finite-difference oracle for gradient tests.

use super::{assign_flat, flatten, Params};

pub const STEP: f64 = 1e-5;
/// Gradients smaller than this are compared on an absolute scale.
pub const FLOOR: f64 = 1e-5;

/// Relative error with a small floor so near-zero gradients compare on an
/// absolute scale.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

/// Central difference of `loss` along every flat coordinate of `params`.
pub fn numeric_grad<P, F>(params: &P, loss: F) -> Vec<f64>
where
    P: Params<f64> + Clone,
    F: Fn(&P) -> f64,
{
    let base = flatten(params);
    let mut probe = params.clone();
    let mut v = base.clone();
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        v[i] = base[i] + STEP;
        assign_flat(&mut probe, &v);
        let up = loss(&probe);
        v[i] = base[i] - STEP;
        assign_flat(&mut probe, &v);
        let down = loss(&probe);
        v[i] = base[i];
        out.push((up - down) / (2.0 * STEP));
    }
    out
}

/// Worst relative error between `grads` and central differences, with its
/// flat index.
pub fn max_rel_err<P, F>(params: &P, grads: &P, loss: F) -> (f64, usize)
where
    P: Params<f64> + Clone,
    F: Fn(&P) -> f64,
{
    let analytic = flatten(grads);
    let numeric = numeric_grad(params, loss);
    let mut worst = (0.0, 0usize);
    for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
        let e = rel_err(*a, *n);
        if e > worst.0 || e.is_nan() {
            worst = (e, i);
        }
    }
    worst
}

/// Panics when any entry of `grads` disagrees with central differences.
pub fn check_params<P, F>(params: &P, grads: &P, loss: F, tol: f64)
where
    P: Params<f64> + Clone,
    F: Fn(&P) -> f64,
{
    let (e, i) = max_rel_err(params, grads, loss);
    assert!(e < tol, "gradient check failed at flat index {i}: rel err {e:.3e}");
}
