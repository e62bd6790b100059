//! Closed-form model of the multi-pass resonator.
//!
//! The pump passes the crystal `N` times and the down-converted pairs pick up
//! a round-trip phase `phi` between mirrors, so the per-pass pair amplitudes
//! add up to the geometric sum `A(N, phi)`. Everything observable depends on
//! the product `|A| tau`.

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Probabilities above `1 + CLAMP_WARN` are reported before clamping.
const CLAMP_WARN: f64 = 1e-12;

/// Pass count, round-trip phase and interaction parameter `tau = kappa t / hbar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig", into = "RawConfig")]
pub struct ResonatorConfig {
    passes: usize,
    phi: f64,
    tau: f64,
}

#[derive(Serialize, Deserialize)]
struct RawConfig {
    #[serde(rename = "N")]
    passes: usize,
    phi: f64,
    tau: f64,
}

impl TryFrom<RawConfig> for ResonatorConfig {
    type Error = Error;
    fn try_from(raw: RawConfig) -> Result<Self> {
        ResonatorConfig::new(raw.passes, raw.phi, raw.tau)
    }
}

impl From<ResonatorConfig> for RawConfig {
    fn from(cfg: ResonatorConfig) -> Self {
        RawConfig {
            passes: cfg.passes,
            phi: cfg.phi,
            tau: cfg.tau,
        }
    }
}

impl ResonatorConfig {
    /// Validates the parameters and reduces `phi` to `[0, 2 pi)`.
    pub fn new(passes: usize, phi: f64, tau: f64) -> Result<Self> {
        if passes == 0 {
            return Err(Error::invalid("pass count N must be at least 1"));
        }
        if !phi.is_finite() {
            return Err(Error::invalid(format!("phase must be finite, got {phi}")));
        }
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::invalid(format!(
                "interaction parameter tau must be finite and >= 0, got {tau}"
            )));
        }
        let mut phi = phi.rem_euclid(TAU);
        if phi >= TAU {
            phi = 0.0;
        }
        Ok(ResonatorConfig { passes, phi, tau })
    }

    pub fn passes(&self) -> usize {
        self.passes
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn with_phi(&self, phi: f64) -> Result<Self> {
        Self::new(self.passes, phi, self.tau)
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::new(self.passes, self.phi, tau)
    }

    pub fn with_passes(&self, passes: usize) -> Result<Self> {
        Self::new(passes, self.phi, self.tau)
    }

    pub fn amplitude(&self) -> Complex64 {
        amplitude_sum(self.passes, self.phi)
    }

    /// `A tau`.
    pub fn coupling(&self) -> Complex64 {
        self.amplitude() * self.tau
    }
}

/// Complex weights of the clockwise and counter-clockwise pair terms.
///
/// The default `(1, -1)` is the antisymmetric combination produced by a pump
/// polarized at -45 degrees, which yields `L+` exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpMixing {
    pub cw: Complex64,
    pub ccw: Complex64,
}

impl PumpMixing {
    pub fn new(cw: Complex64, ccw: Complex64) -> Self {
        PumpMixing { cw, ccw }
    }

    /// Weights for a linearly polarized pump at `angle` from horizontal:
    /// `(cos angle, sin angle)`. `-pi/4` reproduces the default up to
    /// an overall `1/sqrt(2)`.
    pub fn from_pump_angle(angle: f64) -> Self {
        PumpMixing {
            cw: Complex64::new(angle.cos(), 0.0),
            ccw: Complex64::new(angle.sin(), 0.0),
        }
    }
}

impl Default for PumpMixing {
    fn default() -> Self {
        PumpMixing {
            cw: Complex64::new(1.0, 0.0),
            ccw: Complex64::new(-1.0, 0.0),
        }
    }
}

/// `A = sum_{m=0}^{N-1} exp(i m phi)` by direct summation.
pub fn amplitude_sum(passes: usize, phi: f64) -> Complex64 {
    (0..passes)
        .map(|m| Complex64::from_polar(1.0, m as f64 * phi))
        .sum()
}

fn clamp_probability(p: f64, what: &str) -> f64 {
    if p > 1.0 + CLAMP_WARN {
        log::warn!("{what} evaluated to {p:.17e} > 1; clamping");
    }
    p.clamp(0.0, 1.0)
}

fn check_multiplicity(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::invalid("pair multiplicity M must be at least 1"));
    }
    Ok(())
}

/// `P_{M,N} = (M+1) tanh^{2M}|A tau| / cosh^4|A tau|`.
pub fn pair_probability_exact(m: usize, cfg: &ResonatorConfig) -> Result<f64> {
    check_multiplicity(m)?;
    let x = cfg.coupling().norm();
    let u = x.tanh().powi(2);
    let p = (m as f64 + 1.0) * u.powi(m as i32) / x.cosh().powi(4);
    Ok(clamp_probability(p, "P_exact"))
}

/// `|sin(N phi / 2) / sin(phi / 2)|`, with the removable singularity at
/// `phi = 0 (mod 2 pi)` replaced by its limit `N`.
pub fn dirichlet_ratio(passes: usize, phi: f64) -> f64 {
    let den = (phi / 2.0).sin();
    if den.abs() < 1e-12 {
        return passes as f64;
    }
    ((passes as f64 * phi / 2.0).sin() / den).abs()
}

/// Leading-order probability `(M+1) tau^{2M} |sin(N phi/2)/sin(phi/2)|^{2M}`.
pub fn pair_probability_approx(m: usize, cfg: &ResonatorConfig) -> Result<f64> {
    check_multiplicity(m)?;
    let x = cfg.tau() * dirichlet_ratio(cfg.passes(), cfg.phi());
    let p = (m as f64 + 1.0) * x.powi(2 * m as i32);
    Ok(clamp_probability(p, "P_approx"))
}

/// Leading-order probability at `phi = 0`: `(M+1) |N tau|^{2M}`.
pub fn pair_probability_peak(m: usize, cfg: &ResonatorConfig) -> Result<f64> {
    check_multiplicity(m)?;
    let x = cfg.passes() as f64 * cfg.tau();
    Ok(clamp_probability(
        (m as f64 + 1.0) * x.powi(2 * m as i32),
        "P_peak",
    ))
}

/// `P_2 / P_1 = 2 (1 + cos theta)` for the double-pass configuration.
pub fn double_pass_ratio(theta: f64) -> f64 {
    2.0 * (1.0 + theta.cos())
}

/// Location `u* = M / (M + 2)` of the maximum of [`probability_of_u`].
pub fn optimal_u(m: usize) -> Result<f64> {
    check_multiplicity(m)?;
    Ok(m as f64 / (m as f64 + 2.0))
}

/// `f(u) = (M+1) (1-u)^2 u^M`, the pair probability written in `u = tanh^2|A tau|`.
pub fn probability_of_u(m: usize, u: f64) -> f64 {
    (m as f64 + 1.0) * (1.0 - u).powi(2) * u.powi(m as i32)
}

/// `P_{2,N} / P_{1,N} = (3/2) tanh^2|A tau|`.
pub fn multiphoton_contamination(cfg: &ResonatorConfig) -> f64 {
    1.5 * cfg.coupling().norm().tanh().powi(2)
}

/// All probabilities for one configuration and multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityReport {
    #[serde(rename = "M")]
    pub multiplicity: usize,
    pub exact: f64,
    pub small_tau: f64,
    pub at_phi_zero: f64,
}

pub fn probability_report(m: usize, cfg: &ResonatorConfig) -> Result<ProbabilityReport> {
    Ok(ProbabilityReport {
        multiplicity: m,
        exact: pair_probability_exact(m, cfg)?,
        small_tau: pair_probability_approx(m, cfg)?,
        at_phi_zero: pair_probability_peak(m, cfg)?,
    })
}

/// One row of a resonator sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub passes: usize,
    pub phi: f64,
    pub tau: f64,
    #[serde(rename = "M")]
    pub multiplicity: usize,
    #[serde(rename = "P_exact")]
    pub p_exact: f64,
    #[serde(rename = "P_approx")]
    pub p_approx: f64,
    pub contamination: f64,
}

/// Column order of sweep CSV output.
pub const SWEEP_COLUMNS: [&str; 7] = ["N", "phi", "tau", "M", "P_exact", "P_approx", "contamination"];

pub fn sweep_row(m: usize, cfg: &ResonatorConfig) -> Result<SweepRow> {
    Ok(SweepRow {
        passes: cfg.passes(),
        phi: cfg.phi(),
        tau: cfg.tau(),
        multiplicity: m,
        p_exact: pair_probability_exact(m, cfg)?,
        p_approx: pair_probability_approx(m, cfg)?,
        contamination: multiphoton_contamination(cfg),
    })
}
