//! Least-squares fits of decay rates and polynomial prefactors.

use crate::error::{Error, Result};

/// Fitted `(rate, polynomial order)` over a window of a decaying series.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Exponential rate `r` in `value ≈ c e^{−rt}`.
    pub rate_fit: f64,
    /// Order `k` in `value · e^{2μt} ≈ c t^k`.
    pub poly_order_fit: f64,
    pub window: (f64, f64),
    /// RMS residual of the order fit in log space.
    pub residual: f64,
}

/// Residual above which a fit is reported as inconclusive.
pub const INCONCLUSIVE_RESIDUAL: f64 = 0.1;

impl FitResult {
    pub fn is_conclusive(&self) -> bool {
        self.residual <= INCONCLUSIVE_RESIDUAL
    }
}

/// Ordinary least squares `y ≈ a + b x`; returns `(a, b, rms residual)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "linear fit needs two or more paired points, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidInput("degenerate abscissae in linear fit".into()));
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss: f64 = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
    Ok((a, b, (ss / n).sqrt()))
}

/// Points of `(t, value)` inside `[lo, hi]` with finite positive values.
fn window_points(times: &[f64], values: &[f64], window: (f64, f64)) -> (Vec<f64>, Vec<f64>) {
    times
        .iter()
        .zip(values)
        .filter(|(t, v)| **t >= window.0 && **t <= window.1 && v.is_finite() && **v > 0.0)
        .map(|(t, v)| (*t, v.ln()))
        .unzip()
}

/// Slope of `log value` against `t` in the window, with its RMS residual.
pub fn log_slope(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<(f64, f64)> {
    let (t, y) = window_points(times, values, window);
    let (_, b, r) = linear_fit(&t, &y)?;
    Ok((b, r))
}

/// Fits `value(t)` against the envelope `(1 + t^{2n}) e^{−2μt}`.
///
/// The rate is the slope of `−log value` in `t`. The order regresses
/// `log value + 2μt` on `log(1 + t^{2n})` and scales the slope by `2n`; for
/// `n = 0` it regresses on `log t` directly.
pub fn fit_decay(
    times: &[f64],
    values: &[f64],
    mu: f64,
    n: usize,
    window: (f64, f64),
) -> Result<FitResult> {
    let (t, y) = window_points(times, values, window);
    if t.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "only {} usable samples in fit window [{}, {}]",
            t.len(),
            window.0,
            window.1
        )));
    }
    let (_, slope, _) = linear_fit(&t, &y)?;
    let shifted: Vec<f64> = t.iter().zip(&y).map(|(t, y)| y + 2.0 * mu * t).collect();
    let (order, residual) = if n == 0 {
        let x: Vec<f64> = t.iter().map(|t| t.ln()).collect();
        let (_, b, r) = linear_fit(&x, &shifted)?;
        (b, r)
    } else {
        let k = 2 * n as i32;
        let x: Vec<f64> = t.iter().map(|t| t.powi(k).ln_1p()).collect();
        let (_, b, r) = linear_fit(&x, &shifted)?;
        (b * k as f64, r)
    };
    Ok(FitResult {
        rate_fit: -slope,
        poly_order_fit: order,
        window,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (a, b, r) = linear_fit(&x, &y).unwrap();
        assert_relative_eq!(a, 2.0, epsilon = 1e-14);
        assert_relative_eq!(b, -0.5, epsilon = 1e-14);
        assert!(r < 1e-14);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn recovers_pure_exponential() {
        let t: Vec<f64> = (0..200).map(|k| 15.0 * k as f64 / 199.0).collect();
        let v: Vec<f64> = t.iter().map(|t| 0.3 * (-2.0 * t).exp()).collect();
        let f = fit_decay(&t, &v, 1.0, 0, (8.0, 15.0)).unwrap();
        assert_relative_eq!(f.rate_fit, 2.0, epsilon = 1e-10);
        assert!(f.poly_order_fit.abs() < 1e-8);
        assert!(f.is_conclusive());
    }

    #[test]
    fn recovers_polynomial_order() {
        let t: Vec<f64> = (0..200).map(|k| 15.0 * k as f64 / 199.0).collect();
        let v: Vec<f64> = t.iter().map(|t| 0.1 * (1.0 + t * t) * (-2.0 * t).exp()).collect();
        let f = fit_decay(&t, &v, 1.0, 1, (8.0, 15.0)).unwrap();
        assert_relative_eq!(f.poly_order_fit, 2.0, epsilon = 1e-10);
    }

    proptest! {
        #[test]
        fn slope_of_exponential(rate in 0.1f64..5.0, c in 0.01f64..100.0) {
            let t: Vec<f64> = (0..50).map(|k| 0.1 * k as f64).collect();
            let v: Vec<f64> = t.iter().map(|t| c * (-rate * t).exp()).collect();
            let (s, r) = log_slope(&t, &v, (0.0, 5.0)).unwrap();
            prop_assert!((s + rate).abs() < 1e-9 * rate.max(1.0));
            prop_assert!(r < 1e-9);
        }
    }
}
