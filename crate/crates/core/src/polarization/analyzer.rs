//! Per-arm polarization analyzers: an optional quarter-wave plate followed by
//! a linear polarizer, in Jones calculus.

use super::{DensityMatrix, Matrix4c};
use crate::error::{Error, Result};
use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Analyzer on one arm. Angles are in radians from horizontal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ArmRepr", into = "ArmRepr")]
pub struct ArmSetting {
    pub pol: f64,
    /// Fast-axis angle of the quarter-wave plate, if one is inserted.
    pub qwp: Option<f64>,
}

/// Wire form with angles in degrees.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArmRepr {
    pol_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    qwp_deg: Option<f64>,
}

impl TryFrom<ArmRepr> for ArmSetting {
    type Error = Error;
    fn try_from(r: ArmRepr) -> Result<Self> {
        let s = ArmSetting {
            pol: r.pol_deg.to_radians(),
            qwp: r.qwp_deg.map(f64::to_radians),
        };
        s.validate()?;
        Ok(s)
    }
}

impl From<ArmSetting> for ArmRepr {
    fn from(s: ArmSetting) -> Self {
        ArmRepr {
            pol_deg: s.pol.to_degrees(),
            qwp_deg: s.qwp.map(f64::to_degrees),
        }
    }
}

fn rotation(theta: f64) -> Matrix2<Complex64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(
        Complex64::new(c, 0.0),
        Complex64::new(-s, 0.0),
        Complex64::new(s, 0.0),
        Complex64::new(c, 0.0),
    )
}

/// Jones matrix of a quarter-wave plate with its fast axis at `theta`.
pub fn quarter_wave_plate(theta: f64) -> Matrix2<Complex64> {
    let retarder = Matrix2::new(
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 1.0),
    );
    rotation(theta) * retarder * rotation(-theta)
}

impl ArmSetting {
    pub fn polarizer(pol: f64) -> Self {
        ArmSetting { pol, qwp: None }
    }

    pub fn with_qwp(pol: f64, qwp: f64) -> Self {
        ArmSetting { pol, qwp: Some(qwp) }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.pol.is_finite() || self.qwp.is_some_and(|q| !q.is_finite()) {
            return Err(Error::invalid("analyzer angles must be finite"));
        }
        Ok(())
    }

    /// Input polarization that passes the analyzer with unit probability.
    pub fn analyzed_state(&self) -> Vector2<Complex64> {
        let (s, c) = self.pol.sin_cos();
        let transmitted = Vector2::new(Complex64::new(c, 0.0), Complex64::new(s, 0.0));
        match self.qwp {
            Some(q) => quarter_wave_plate(q).adjoint() * transmitted,
            None => transmitted,
        }
    }

    pub fn projector(&self) -> Matrix2<Complex64> {
        let v = self.analyzed_state();
        v * v.adjoint()
    }
}

/// Analyzer settings on both arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSetting {
    pub arm_a: ArmSetting,
    pub arm_b: ArmSetting,
}

impl MeasurementSetting {
    pub fn new(arm_a: ArmSetting, arm_b: ArmSetting) -> Self {
        MeasurementSetting { arm_a, arm_b }
    }

    /// `Pi_a (x) Pi_b`.
    pub fn coincidence_operator(&self) -> Matrix4c {
        self.arm_a.projector().kronecker(&self.arm_b.projector())
    }
}

/// Born-rule coincidence probability `Tr(rho Pi_a (x) Pi_b)`.
pub fn coincidence_probability(rho: &DensityMatrix, setting: &MeasurementSetting) -> Result<f64> {
    if !rho.is_physical() {
        return Err(Error::NonPhysical(format!(
            "minimum eigenvalue {:.3e}",
            rho.min_eigenvalue()
        )));
    }
    setting.arm_a.validate()?;
    setting.arm_b.validate()?;
    Ok(rho.expectation(&setting.coincidence_operator()).clamp(0.0, 1.0))
}
