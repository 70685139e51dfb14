//! Proximal operators.

use crate::error::{Error, Result};

pub(crate) fn check_threshold(name: &str, t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be a finite nonnegative number, got {t}"
        )))
    }
}

/// Block soft-thresholding, the proximal map of `t‖·‖₂`:
/// `max(1 − t/‖y‖₂, 0) · y`, with `y = 0` mapped to `0`.
pub fn block_soft(y: &[f64], t: f64) -> Result<Vec<f64>> {
    check_threshold("threshold", t)?;
    let mut out = y.to_vec();
    block_soft_in_place(&mut out, t);
    Ok(out)
}

/// In-place [`block_soft`]; `t` must already be validated.
pub(crate) fn block_soft_in_place(y: &mut [f64], t: f64) {
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= t || norm == 0.0 {
        y.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let scale = 1.0 - t / norm;
    y.iter_mut().for_each(|v| *v *= scale);
}

/// Scalar soft-thresholding `sign(v)·max(|v| − t, 0)`.
pub(crate) fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}
