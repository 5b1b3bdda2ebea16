use crate::error::{Error, Result};

/// The entropy generator `ψ_p(y) = (y^p − p(y−1) − 1) / (p(p−1))`, with
/// `ψ_1(y) = y log y − y + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PEntropy {
    p: f64,
}

/// Below this ratio `ψ_p''` is treated as singular for `p < 2`.
pub const RATIO_FLOOR: f64 = 1e-300;

const SERIES_RADIUS: f64 = 0.1;
const SERIES_TERMS: usize = 24;

impl PEntropy {
    pub fn new(p: f64) -> Result<Self> {
        if !(1.0..=2.0).contains(&p) {
            return Err(Error::Parameter(format!("p = {p} outside [1, 2]")));
        }
        Ok(PEntropy { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `ψ_p(y)` for `y >= 0`.
    pub fn psi(&self, y: f64) -> f64 {
        let p = self.p;
        let u = y - 1.0;
        if u.abs() < SERIES_RADIUS {
            // Σ_{k>=2} c_k u^k, c_k = Π_{j=2}^{k-1} (p − j) / k!
            let mut coeff = 0.5;
            let mut pow = u * u;
            let mut sum = coeff * pow;
            for k in 3..SERIES_TERMS {
                coeff *= (p - (k - 1) as f64) / k as f64;
                pow *= u;
                sum += coeff * pow;
            }
            return sum;
        }
        if p == 1.0 {
            if y == 0.0 {
                1.0
            } else {
                y * y.ln() - y + 1.0
            }
        } else {
            (y.powf(p) - p * u - 1.0) / (p * (p - 1.0))
        }
    }

    /// `ψ_p''(y) = y^{p−2}`.
    pub fn psi_second(&self, y: f64) -> f64 {
        if self.p == 2.0 {
            1.0
        } else {
            y.powf(self.p - 2.0)
        }
    }

    /// `½ ψ'' ψ'''' − (ψ''')²` divided by `y^{2p−6}`, i.e.
    /// `½ (p−2)(p−3) − (p−2)²`; non-negative exactly when `ψ_p` is admissible.
    pub fn admissibility_margin(&self) -> f64 {
        let p = self.p;
        0.5 * (p - 2.0) * (p - 3.0) - (p - 2.0).powi(2)
    }

    /// `1 / ((p−1)^{p−1} (2−p)^{2−p})`, with `0^0 = 1`.
    pub fn interpolation_constant(&self) -> f64 {
        let p = self.p;
        // Summing logarithms keeps the symmetric point p = 3/2 exact.
        let xlogx = |b: f64| if b == 0.0 { 0.0 } else { b * b.ln() };
        (-(xlogx(p - 1.0) + xlogx(2.0 - p))).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn normalization_at_one() {
        for p in [1.0, 1.1, 1.5, 2.0] {
            let psi = PEntropy::new(p).unwrap();
            assert_eq!(psi.psi(1.0), 0.0);
            assert_eq!(psi.psi_second(1.0), 1.0);
            assert!(psi.admissibility_margin() >= 0.0);
        }
        assert!(PEntropy::new(2.5).is_err());
        assert!(PEntropy::new(0.9).is_err());
    }

    #[test]
    fn closed_forms() {
        let psi2 = PEntropy::new(2.0).unwrap();
        assert_relative_eq!(psi2.psi(3.0), 2.0);
        assert_relative_eq!(psi2.psi(1.05), 0.5 * 0.05 * 0.05, max_relative = 1e-14);
        let psi1 = PEntropy::new(1.0).unwrap();
        assert_relative_eq!(psi1.psi(0.0), 1.0);
        assert_relative_eq!(psi1.psi(2.0), 2.0 * 2f64.ln() - 1.0, max_relative = 1e-15);
        assert_eq!(PEntropy::new(1.5).unwrap().interpolation_constant(), 2.0);
        assert_eq!(PEntropy::new(2.0).unwrap().interpolation_constant(), 1.0);
        assert_eq!(PEntropy::new(1.0).unwrap().interpolation_constant(), 1.0);
    }

    proptest! {
        #[test]
        fn series_matches_direct_form(p in 1.0f64..2.0, u in -0.0999f64..0.0999) {
            let psi = PEntropy::new(p).unwrap();
            let y: f64 = 1.0 + u;
            let direct = if p == 1.0 {
                y * u.ln_1p() - u
            } else {
                ((p * u.ln_1p()).exp_m1() - p * u) / (p * (p - 1.0))
            };
            prop_assert!((psi.psi(y) - direct).abs() <= 1e-12 * u * u + 1e-15);
            prop_assert!(psi.psi(y) >= 0.0);
        }

        #[test]
        fn admissible_on_whole_family(p in 1.0f64..=2.0) {
            prop_assert!(PEntropy::new(p).unwrap().admissibility_margin() >= -1e-15);
        }
    }
}
