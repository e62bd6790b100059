use crate::error::{Error, Result};
use serde::Serialize;

/// `N_S^n / N_C`.
pub fn nth_rate(singles: f64, coincidences: f64, n: u32) -> Result<f64> {
    if !singles.is_finite() || singles < 0.0 {
        return Err(Error::invalid(format!("singles rate must be finite and non-negative, got {singles}")));
    }
    if !coincidences.is_finite() || coincidences <= 0.0 {
        return Err(Error::invalid(format!("coincidence rate must be positive, got {coincidences}")));
    }
    if n == 0 {
        return Err(Error::invalid("photon number must be at least 1"));
    }
    Ok(singles.powi(n as i32) / coincidences)
}

/// `N_pair = N_S^2 / N_C`.
pub fn pair_rate(singles: f64, coincidences: f64) -> Result<f64> {
    nth_rate(singles, coincidences, 2)
}

/// Published singles and coincidence rates (Hz/mW) with the pair rate quoted
/// alongside them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateReference {
    pub singles: f64,
    pub coincidences: f64,
    pub reported_pair_rate: f64,
}

/// The quoted pair rate is four orders of magnitude below `N_S^2 / N_C`.
pub const REFERENCE_RATES: RateReference = RateReference {
    singles: 8.3e5,
    coincidences: 11.3,
    reported_pair_rate: 6.1e6,
};

impl RateReference {
    pub fn computed_pair_rate(&self) -> Result<f64> {
        pair_rate(self.singles, self.coincidences)
    }

    /// Computed over reported pair rate.
    pub fn discrepancy(&self) -> Result<f64> {
        Ok(self.computed_pair_rate()? / self.reported_pair_rate)
    }

    /// True when computed and reported rates differ by more than `rel_tol`.
    pub fn is_inconsistent(&self, rel_tol: f64) -> Result<bool> {
        Ok((self.discrepancy()? - 1.0).abs() > rel_tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_arithmetic() {
        let n = REFERENCE_RATES.computed_pair_rate().unwrap();
        assert!((n - 6.096_460_176_991_15e10).abs() / n < 1e-14);
        assert!(REFERENCE_RATES.is_inconsistent(0.1).unwrap());
        assert!((REFERENCE_RATES.discrepancy().unwrap() - 9994.2).abs() < 0.1);
    }

    #[test]
    fn scaling() {
        let base = pair_rate(3.0, 2.0).unwrap();
        assert_eq!(pair_rate(6.0, 2.0).unwrap(), 4.0 * base);
        assert_eq!(nth_rate(3.0, 2.0, 2).unwrap(), base);
        assert_eq!(nth_rate(3.0, 2.0, 3).unwrap(), 13.5);
    }

    #[test]
    fn zero_coincidences_rejected() {
        assert!(pair_rate(1.0, 0.0).unwrap_err().is_validation());
        assert!(nth_rate(1.0, -1.0, 4).is_err());
        assert!(nth_rate(1.0, 1.0, 0).is_err());
    }
}
