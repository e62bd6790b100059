//! Relative phase between the pump and the degenerate pair accumulated in a
//! tilted plate.
//!
//! Only the glass substrate enters: the birefringent layer of the wave plate
//! is a few microns thick and its dispersion is neglected. Indices are plain
//! constants rather than a Sellmeier fit.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Substrate thickness, refractive indices and pump wavelength.
///
/// Degenerate down-conversion (`lambda_s = lambda_i = 2 lambda_p`) is
/// assumed, so one index `n_s` covers both photons of the pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeometry", into = "RawGeometry")]
pub struct PlateGeometry {
    thickness_m: f64,
    n_pump: f64,
    n_pair: f64,
    pump_wavelength_m: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    #[serde(rename = "L_m")]
    thickness_m: f64,
    n_p: f64,
    n_s: f64,
    lambda_p_m: f64,
}

impl TryFrom<RawGeometry> for PlateGeometry {
    type Error = Error;
    fn try_from(raw: RawGeometry) -> Result<Self> {
        PlateGeometry::new(raw.thickness_m, raw.n_p, raw.n_s, raw.lambda_p_m)
    }
}

impl From<PlateGeometry> for RawGeometry {
    fn from(g: PlateGeometry) -> Self {
        RawGeometry {
            thickness_m: g.thickness_m,
            n_p: g.n_pump,
            n_s: g.n_pair,
            lambda_p_m: g.pump_wavelength_m,
        }
    }
}

impl PlateGeometry {
    pub fn new(thickness_m: f64, n_pump: f64, n_pair: f64, pump_wavelength_m: f64) -> Result<Self> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(thickness_m) {
            return Err(Error::invalid(format!("plate thickness must be > 0, got {thickness_m}")));
        }
        if !positive(pump_wavelength_m) {
            return Err(Error::invalid(format!(
                "pump wavelength must be > 0, got {pump_wavelength_m}"
            )));
        }
        for (name, n) in [("n_p", n_pump), ("n_s", n_pair)] {
            if !(n.is_finite() && n > 1.0) {
                return Err(Error::invalid(format!("{name} must exceed 1, got {n}")));
            }
        }
        Ok(PlateGeometry {
            thickness_m,
            n_pump,
            n_pair,
            pump_wavelength_m,
        })
    }

    /// N-BK7 substrate of a zero-order plate at a 405 nm pump:
    /// `L = 3 mm`, `n_p = 1.53`, `n_s = 1.51`.
    pub fn nbk7_405nm() -> Self {
        PlateGeometry {
            thickness_m: 3e-3,
            n_pump: 1.53,
            n_pair: 1.51,
            pump_wavelength_m: 405e-9,
        }
    }

    pub fn thickness_m(&self) -> f64 {
        self.thickness_m
    }

    pub fn n_pump(&self) -> f64 {
        self.n_pump
    }

    pub fn n_pair(&self) -> f64 {
        self.n_pair
    }

    pub fn pump_wavelength_m(&self) -> f64 {
        self.pump_wavelength_m
    }
}

/// `n^2 / sqrt(n^2 - sin^2 alpha)`, the tilt-dependent optical-path factor
/// (equal to `n / cos(beta)` with the refraction angle from Snell's law).
fn path_factor(n: f64, alpha: f64) -> Result<f64> {
    let s2 = alpha.sin().powi(2);
    let n2 = n * n;
    if !(s2 < n2) {
        return Err(Error::Domain(format!(
            "|sin(alpha)| = {} must stay below n = {n}",
            s2.sqrt()
        )));
    }
    Ok(n2 / (n2 - s2).sqrt())
}

/// Phase `(2 pi n^2 / lambda) L / sqrt(n^2 - sin^2 alpha)` picked up by light
/// of wavelength `lambda` crossing a plate of index `n` and thickness `L`
/// tilted by `alpha`.
pub fn phase_through_plate(wavelength_m: f64, n: f64, thickness_m: f64, alpha: f64) -> Result<f64> {
    if !(wavelength_m > 0.0 && thickness_m > 0.0 && n > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(
            "wavelength, index and thickness must be positive and alpha finite",
        ));
    }
    Ok(2.0 * PI / wavelength_m * thickness_m * path_factor(n, alpha)?)
}

/// Relative phase, raw and reduced to `[0, 2 pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativePhase {
    pub raw: f64,
    pub wrapped: f64,
}

impl RelativePhase {
    fn new(raw: f64) -> Self {
        let mut wrapped = raw.rem_euclid(TAU);
        if wrapped >= TAU {
            wrapped = 0.0;
        }
        RelativePhase { raw, wrapped }
    }
}

/// `phi_p - phi_s - phi_i` at degeneracy:
/// `(2 pi L / lambda_p) [n_p^2/sqrt(n_p^2 - sin^2 a) - n_s^2/sqrt(n_s^2 - sin^2 a)]`.
pub fn relative_phase(geom: &PlateGeometry, alpha: f64) -> Result<RelativePhase> {
    if !alpha.is_finite() {
        return Err(Error::invalid("tilt angle must be finite"));
    }
    let scale = 2.0 * PI * geom.thickness_m / geom.pump_wavelength_m;
    let raw = scale * (path_factor(geom.n_pump, alpha)? - path_factor(geom.n_pair, alpha)?);
    Ok(RelativePhase::new(raw))
}

/// `d(Delta phi)/d alpha`, analytic.
pub fn relative_phase_slope(geom: &PlateGeometry, alpha: f64) -> Result<f64> {
    // d/d alpha [n^2 (n^2 - s^2)^{-1/2}] = n^2 sin a cos a (n^2 - s^2)^{-3/2}
    let term = |n: f64| -> Result<f64> {
        let s2 = alpha.sin().powi(2);
        let n2 = n * n;
        if !(s2 < n2) {
            return Err(Error::Domain(format!("|sin(alpha)| must stay below n = {n}")));
        }
        Ok(n2 * alpha.sin() * alpha.cos() / (n2 - s2).powf(1.5))
    };
    let scale = 2.0 * PI * geom.thickness_m / geom.pump_wavelength_m;
    Ok(scale * (term(geom.n_pump)? - term(geom.n_pair)?))
}
