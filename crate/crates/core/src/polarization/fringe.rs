use super::analyzer::{coincidence_probability, ArmSetting, MeasurementSetting};
use super::DensityMatrix;
use crate::error::{Error, Result};
use crate::phase_plate::{relative_phase, PlateGeometry};
use crate::resonator::{pair_probability_exact, ResonatorConfig};
use crate::rng::{poisson_count, seeded};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Coincidence counts against a scan variable (a polarizer angle or a plate
/// tilt, in radians).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct FringeScan {
    points: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for FringeScan {
    type Error = Error;
    fn try_from(points: Vec<(f64, f64)>) -> Result<Self> {
        FringeScan::new(points)
    }
}

impl From<FringeScan> for Vec<(f64, f64)> {
    fn from(s: FringeScan) -> Self {
        s.points
    }
}

impl FringeScan {
    /// Requires a non-empty, strictly monotone scan with finite non-negative counts.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("fringe scan is empty"));
        }
        if points
            .iter()
            .any(|&(x, y)| !x.is_finite() || !y.is_finite() || y < 0.0)
        {
            return Err(Error::invalid("scan values must be finite and counts non-negative"));
        }
        let increasing = points.windows(2).all(|w| w[1].0 > w[0].0);
        let decreasing = points.windows(2).all(|w| w[1].0 < w[0].0);
        if !(increasing || decreasing) {
            return Err(Error::invalid("scan variable must be strictly monotone"));
        }
        Ok(FringeScan { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.0)
    }

    pub fn counts(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.1)
    }

    pub fn max_count(&self) -> f64 {
        self.counts().fold(f64::MIN, f64::max)
    }

    pub fn min_count(&self) -> f64 {
        self.counts().fold(f64::MAX, f64::min)
    }
}

/// Raw fringe visibility `(C_max - C_min) / (C_max + C_min)`.
pub fn visibility(scan: &FringeScan) -> Result<f64> {
    let (max, min) = (scan.max_count(), scan.min_count());
    if max + min <= 0.0 {
        return Err(Error::Undefined("visibility of an all-zero scan".into()));
    }
    Ok((max - min) / (max + min))
}

fn check_shots(shots: f64) -> Result<()> {
    if !(shots > 0.0) || !shots.is_finite() {
        return Err(Error::invalid(format!("shots must be positive, got {shots}")));
    }
    Ok(())
}

/// Scans the arm-`a` polarizer through `angles` with arm `b` fixed and draws
/// Poisson counts of mean `shots * P(coincidence)` at each point.
///
/// `qwp_a` places a quarter-wave plate in arm `a` at a fixed angle.
pub fn simulate_polarization_fringe(
    rho: &DensityMatrix,
    fixed_b: ArmSetting,
    qwp_a: Option<f64>,
    angles: &[f64],
    shots: f64,
    seed: u64,
) -> Result<FringeScan> {
    check_shots(shots)?;
    let mut rng = seeded(seed);
    let mut points = Vec::with_capacity(angles.len());
    for &angle in angles {
        let setting = MeasurementSetting::new(ArmSetting { pol: angle, qwp: qwp_a }, fixed_b);
        let p = coincidence_probability(rho, &setting)?;
        points.push((angle, poisson_count(&mut rng, shots * p) as f64));
    }
    FringeScan::new(points)
}

/// Coincidence rate of the stimulated source as the plate is tilted.
///
/// The round-trip phase at tilt `alpha` is `Delta phi(alpha) + phase_offset`
/// and the mean count is normalised to the single-pass rate:
/// `shots * P_{1,N}(phi) / P_{1,1}`. For `N = 2` this follows
/// `2 shots (1 + cos phi)` to leading order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StimulationModel {
    pub geometry: PlateGeometry,
    /// Pass count and `tau`; its `phi` is ignored.
    pub resonator: ResonatorConfig,
    pub phase_offset: f64,
}

impl StimulationModel {
    pub fn round_trip_phase(&self, alpha: f64) -> Result<f64> {
        Ok(relative_phase(&self.geometry, alpha)?.raw + self.phase_offset)
    }

    /// Expected count at `alpha` in units of the single-pass level.
    pub fn enhancement(&self, alpha: f64) -> Result<f64> {
        if !(self.resonator.tau() > 0.0) {
            return Err(Error::invalid("stimulation model needs tau > 0"));
        }
        let phi = self.round_trip_phase(alpha)?;
        let cfg = self.resonator.with_phi(phi)?;
        let single = self.resonator.with_passes(1)?;
        Ok(pair_probability_exact(1, &cfg)? / pair_probability_exact(1, &single)?)
    }
}

/// Offset placing the round-trip phase at `0 (mod 2 pi)` for tilt `alpha`.
pub fn phase_offset_for_peak_at(geometry: &PlateGeometry, alpha: f64) -> Result<f64> {
    Ok((-relative_phase(geometry, alpha)?.raw).rem_euclid(TAU))
}

/// Poisson-sampled tilt scan of a [`StimulationModel`].
pub fn simulate_stimulation_fringe(
    model: &StimulationModel,
    alphas: &[f64],
    shots: f64,
    seed: u64,
) -> Result<FringeScan> {
    check_shots(shots)?;
    let mut rng = seeded(seed);
    let mut points = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let mean = shots * model.enhancement(alpha)?;
        points.push((alpha, poisson_count(&mut rng, mean) as f64));
    }
    FringeScan::new(points)
}

#[cfg(test)]
mod tests {
    use super::super::bell_state;
    use super::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    #[test]
    fn scan_validation() {
        assert!(FringeScan::new(vec![]).is_err());
        assert!(FringeScan::new(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(FringeScan::new(vec![(0.0, 1.0), (1.0, -2.0)]).is_err());
        assert!(FringeScan::new(vec![(1.0, 1.0), (0.0, 2.0)]).is_ok());
        assert!(FringeScan::new(vec![(0.0, 1.0), (2.0, 2.0), (1.0, 3.0)]).is_err());
    }

    #[test]
    fn visibility_examples() {
        let s = FringeScan::new(vec![(0.0, 100.0), (1.0, 0.0)]).unwrap();
        assert_eq!(visibility(&s).unwrap(), 1.0);
        let s = FringeScan::new(vec![(0.0, 7.0), (1.0, 7.0)]).unwrap();
        assert_eq!(visibility(&s).unwrap(), 0.0);
        let s = FringeScan::new(vec![(0.0, 0.0), (1.0, 0.0)]).unwrap();
        assert!(matches!(visibility(&s), Err(Error::Undefined(_))));
    }

    #[test]
    fn shots_must_be_positive() {
        let rho = bell_state().density();
        let r = simulate_polarization_fringe(&rho, ArmSetting::polarizer(0.0), None, &[0.0, 1.0], 0.0, 1);
        assert!(r.is_err());
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let rho = bell_state().density();
        let angles: Vec<f64> = (0..20).map(|k| k as f64 * PI / 20.0).collect();
        let a = simulate_polarization_fringe(&rho, ArmSetting::polarizer(FRAC_PI_4), None, &angles, 1e4, 9).unwrap();
        let b = simulate_polarization_fringe(&rho, ArmSetting::polarizer(FRAC_PI_4), None, &angles, 1e4, 9).unwrap();
        assert_eq!(a, b);
        let c = simulate_polarization_fringe(&rho, ArmSetting::polarizer(FRAC_PI_4), None, &angles, 1e4, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn large_shot_frequencies_match_probabilities() {
        let rho = bell_state().density();
        let fixed = ArmSetting::polarizer(0.0);
        let angles = [1.2, 1.4, 1.57, 1.8];
        let shots = 1e6;
        let scan = simulate_polarization_fringe(&rho, fixed, None, &angles, shots, 5).unwrap();
        for &(angle, count) in scan.points() {
            let p = coincidence_probability(&rho, &MeasurementSetting::new(ArmSetting::polarizer(angle), fixed)).unwrap();
            // Poisson spread is 1.5e-3 relative at these probabilities.
            assert!((count / shots - p).abs() / p < 5e-3, "angle {angle}: {count} vs {}", p * shots);
        }
    }

    #[test]
    fn ideal_stimulation_peaks_at_four_times_single_pass() {
        let geometry = PlateGeometry::nbk7_405nm();
        let model = StimulationModel {
            geometry,
            resonator: ResonatorConfig::new(2, 0.0, 1e-6).unwrap(),
            phase_offset: phase_offset_for_peak_at(&geometry, 0.0).unwrap(),
        };
        assert!((model.enhancement(0.0).unwrap() - 4.0).abs() < 1e-9);
        // A tilt that puts the phase at pi gives a dark fringe.
        let alphas: Vec<f64> = (0..2000).map(|k| k as f64 * 0.35 / 2000.0).collect();
        let min = alphas
            .iter()
            .map(|&a| model.enhancement(a).unwrap())
            .fold(f64::MAX, f64::min);
        assert!(min < 1e-5);
    }

    #[test]
    fn stimulation_requires_positive_tau() {
        let model = StimulationModel {
            geometry: PlateGeometry::nbk7_405nm(),
            resonator: ResonatorConfig::new(2, 0.0, 0.0).unwrap(),
            phase_offset: 0.0,
        };
        assert!(model.enhancement(0.1).is_err());
    }
}
