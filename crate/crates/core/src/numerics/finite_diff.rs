use crate::error::{Error, Result};

/// Central-difference gradient of `f` at `params`:
/// `(f(θ + eps·e_i) - f(θ - eps·e_i)) / (2·eps)` for every coordinate `i`.
///
/// `params` is perturbed in place and restored exactly before returning.
pub fn finite_diff_grad<F>(mut f: F, params: &mut [f64], eps: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("finite-difference eps must be > 0, got {eps}")));
    }
    let mut grad = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = params[i];
        params[i] = orig + eps;
        let plus = f(params);
        params[i] = orig - eps;
        let minus = f(params);
        params[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "finite-difference evaluation at coordinate {i}"
            )));
        }
        grad.push((plus - minus) / (2.0 * eps));
    }
    Ok(grad)
}
