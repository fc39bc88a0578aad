//! Waiting-time approximations. Rates are per second, waits in seconds.

use super::AppsError;

fn check(rho: f64, mu: f64) -> Result<(), AppsError> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(AppsError::InvalidParams("service rate must be positive".into()));
    }
    if rho.is_nan() || rho < 0.0 {
        return Err(AppsError::InvalidParams("utilization must be non-negative".into()));
    }
    if rho >= 1.0 {
        return Err(AppsError::Saturated { rho });
    }
    Ok(())
}

/// Single-server G/G/1 mean wait (Kingman):
/// `(1/µ) (ρ/(1−ρ)) ((C²a + C²s)/2)`.
pub fn kingman_wait(rho: f64, mu: f64, c2a: f64, c2s: f64) -> Result<f64, AppsError> {
    check(rho, mu)?;
    Ok((1.0 / mu) * (rho / (1.0 - rho)) * ((c2a + c2s) / 2.0))
}

/// Multi-server mean wait (Sakasegawa form):
/// `ρ^(√(2(m+1))−1) / (µ m (1−ρ)) ((C²a + C²s)/2)`.
///
/// At `m = 1` the exponent is exactly 1 and the result is bit-identical to
/// [`kingman_wait`].
pub fn multiserver_wait(rho: f64, mu: f64, m: usize, c2a: f64, c2s: f64) -> Result<f64, AppsError> {
    check(rho, mu)?;
    if m == 0 {
        return Err(AppsError::InvalidParams("m must be at least 1".into()));
    }
    let exponent = (2.0 * (m as f64 + 1.0)).sqrt() - 1.0;
    Ok((1.0 / mu) * (rho.powf(exponent) / (m as f64 * (1.0 - rho))) * ((c2a + c2s) / 2.0))
}
