use serde::{Deserialize, Serialize};
use std::path::Path;
use stimpair::phase_plate::PlateGeometry;
use stimpair::polarization::{bell_state, dephasing_noise, ArmSetting, DensityMatrix};
use stimpair::resonator::ResonatorConfig;
use stimpair::tomography::AnalyzerBasis;
use stimpair::{Error, Result};

/// Either an explicit list or `steps` evenly spaced points from `start` to `stop`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Linspace { start: f64, stop: f64, steps: usize },
}

impl Grid {
    pub fn linspace(start: f64, stop: f64, steps: usize) -> Self {
        Grid::Linspace { start, stop, steps }
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        let points = match self {
            Grid::Values(v) => v.clone(),
            Grid::Linspace { start, stop, steps } => match steps {
                0 => return Err(Error::InvalidParameter("grid needs at least one step".into())),
                1 => vec![*start],
                n => (0..*n)
                    .map(|k| start + (stop - start) * k as f64 / (n - 1) as f64)
                    .collect(),
            },
        };
        if points.is_empty() || points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("grid values must be finite and non-empty".into()));
        }
        Ok(points)
    }
}

/// Bell singlet, optionally replaced by an explicit matrix, then dephased.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    #[serde(default)]
    pub dephasing: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<DensityMatrix>,
}

impl StateSpec {
    pub fn density(&self) -> Result<DensityMatrix> {
        let base = match &self.rho {
            Some(rho) => DensityMatrix::new(*rho.matrix())?,
            None => bell_state().density(),
        };
        dephasing_noise(&base, self.dephasing)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(rename = "N")]
    pub passes: Vec<usize>,
    pub phi: Grid,
    pub tau: f64,
    #[serde(rename = "M")]
    pub multiplicity: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            passes: vec![1, 2, 3, 5, 10],
            phi: Grid::linspace(0.0, std::f64::consts::TAU, 73),
            tau: 0.01,
            multiplicity: 1,
        }
    }
}

impl SweepConfig {
    /// Grid points paired with their configurations; the phase is kept as
    /// requested rather than reduced.
    pub fn configs(&self) -> Result<Vec<(f64, ResonatorConfig)>> {
        if self.multiplicity == 0 {
            return Err(Error::InvalidParameter("M must be at least 1".into()));
        }
        let phis = self.phi.points()?;
        let mut out = Vec::with_capacity(self.passes.len() * phis.len());
        for &n in &self.passes {
            for &phi in &phis {
                out.push((phi, ResonatorConfig::new(n, phi, self.tau)?));
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidParameter("sweep has no pass counts".into()));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig4Config {
    pub geometry: PlateGeometry,
    /// Plate tilt in radians.
    pub alpha: Grid,
    #[serde(rename = "N")]
    pub passes: usize,
    pub tau: f64,
    /// Tilt placed on a fringe maximum; ignored when `phase_offset` is set.
    pub peak_alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_offset: Option<f64>,
    /// Write expected counts instead of Poisson samples.
    #[serde(default)]
    pub noiseless: bool,
}

impl Default for Fig4Config {
    fn default() -> Self {
        Fig4Config {
            geometry: PlateGeometry::nbk7_405nm(),
            alpha: Grid::linspace(0.0, 0.2, 121),
            passes: 2,
            tau: 1e-3,
            peak_alpha: 0.0,
            phase_offset: None,
            noiseless: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FringeConfig {
    #[serde(default)]
    pub state: StateSpec,
    pub fixed_arm: ArmSetting,
    /// Quarter-wave plate angle in arm `a`, degrees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_qwp_deg: Option<f64>,
    /// Arm-`a` polarizer angles in degrees.
    pub scan_deg: Grid,
    #[serde(default)]
    pub noiseless: bool,
}

impl Default for FringeConfig {
    fn default() -> Self {
        FringeConfig {
            state: StateSpec::default(),
            fixed_arm: ArmSetting::polarizer(0.0),
            scan_qwp_deg: None,
            scan_deg: Grid::linspace(0.0, 180.0, 37),
            noiseless: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Linear,
    Mle,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographyConfig {
    #[serde(default)]
    pub state: StateSpec,
    pub method: MethodArg,
    pub bases: Vec<AnalyzerBasis>,
    #[serde(default)]
    pub jeffreys: bool,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        TomographyConfig {
            state: StateSpec::default(),
            method: MethodArg::Mle,
            bases: stimpair::tomography::DEFAULT_BASES.to_vec(),
            jeffreys: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    pub singles: f64,
    pub coincidences: f64,
    #[serde(default = "two")]
    pub n: u32,
    /// Pair rate quoted alongside the inputs, compared with the computed one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reported_pair_rate: Option<f64>,
}

fn two() -> u32 {
    2
}

impl Default for RatesConfig {
    fn default() -> Self {
        let r = stimpair::polarization::REFERENCE_RATES;
        RatesConfig {
            singles: r.singles,
            coincidences: r.coincidences,
            n: 2,
            reported_pair_rate: Some(r.reported_pair_rate),
        }
    }
}

/// Reads a JSON config, or returns the default when no path is given.
pub fn load<T>(path: Option<&Path>) -> Result<T>
where
    T: Default + for<'de> Deserialize<'de>,
{
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            Ok(serde_json::from_str(&text)?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_forms() {
        assert_eq!(Grid::linspace(0.0, 1.0, 3).points().unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(Grid::linspace(2.0, 9.0, 1).points().unwrap(), vec![2.0]);
        assert!(Grid::linspace(0.0, 1.0, 0).points().is_err());
        assert!(Grid::Values(vec![]).points().is_err());
        let g: Grid = serde_json::from_str("[0.1, 0.2]").unwrap();
        assert_eq!(g.points().unwrap(), vec![0.1, 0.2]);
        let g: Grid = serde_json::from_str(r#"{"start":0,"stop":2,"steps":5}"#).unwrap();
        assert_eq!(g.points().unwrap().len(), 5);
    }

    #[test]
    fn defaults_round_trip() {
        let text = serde_json::to_string(&Fig4Config::default()).unwrap();
        let back: Fig4Config = serde_json::from_str(&text).unwrap();
        assert_eq!(back.geometry, PlateGeometry::nbk7_405nm());
        let text = serde_json::to_string(&SweepConfig::default()).unwrap();
        assert!(text.contains("\"N\"") && text.contains("\"M\""));
        let _: SweepConfig = serde_json::from_str(&text).unwrap();
        let text = serde_json::to_string(&TomographyConfig::default()).unwrap();
        assert!(text.contains("\"R\""));
    }

    #[test]
    fn sweep_validation() {
        let cfg = SweepConfig { tau: -1.0, ..SweepConfig::default() };
        assert!(cfg.configs().is_err());
        let cfg = SweepConfig { passes: vec![0], ..SweepConfig::default() };
        assert!(cfg.configs().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<RatesConfig>(r#"{"singles":1,"coincidences":1,"x":3}"#).is_err());
    }

    #[test]
    fn state_spec_dephasing() {
        let rho = StateSpec { dephasing: 0.4, rho: None }.density().unwrap();
        assert!((stimpair::polarization::fidelity(&rho, &bell_state()) - 0.8).abs() < 1e-12);
        assert!(StateSpec { dephasing: 1.5, rho: None }.density().is_err());
    }
}
