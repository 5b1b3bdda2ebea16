use nalgebra::DMatrix;

use super::{ensure_finite, ensure_square};
use crate::error::{Error, Result};

/// `e^{A t}` by scaling and squaring with a Padé approximant (degree 13 for
/// large norms).
pub fn matrix_exponential(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    ensure_square(a, "A")?;
    ensure_finite(a, "A")?;
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!("time {t} is not finite")));
    }
    let at = a * t;
    let norm = at.lp_norm(1);
    if norm > 1e12 {
        return Err(Error::Range(format!("||A t||_1 = {norm:.3e}")));
    }
    let e = at.exp();
    if e.iter().all(|v| v.is_finite()) {
        Ok(e)
    } else {
        Err(Error::Range(format!(
            "||A t||_1 = {norm:.3e} overflows the exponential"
        )))
    }
}
