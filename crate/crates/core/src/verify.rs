//! Named numerical checks of the model against its oracles.
//!
//! Each check evaluates one acceptance property at a pinned tolerance and
//! reports the worst error it saw and its runtime. The closed-form pair
//! probability is injected through [`Suite::exact`] so that a perturbed
//! implementation can be shown to fail the checks that depend on it.

use crate::error::{Error, Result};
use crate::fock::{disentangled_state, evolve_oracle, project_entangled, EvolutionOptions, Evolved};
use crate::phase_plate::{relative_phase, PlateGeometry};
use crate::polarization::{
    bell_state, dephasing_noise, fit_fringe, phase_offset_for_peak_at, simulate_polarization_fringe,
    simulate_stimulation_fringe, state_fidelity, ArmSetting, DensityMatrix, FitOptions, PhaseCoordinate,
    StimulationModel,
};
use crate::resonator::{
    double_pass_ratio, optimal_u, pair_probability_approx, pair_probability_exact, probability_of_u,
    ResonatorConfig,
};
use crate::rng::derive_seed;
use crate::tomography::{fidelity, reconstruct_mle, simulate_tomography, MleOptions};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::time::Instant;

/// Closed-form `P_{M,N}` under test.
pub type ExactProbability = fn(usize, &ResonatorConfig) -> Result<f64>;

pub const MULTIPLICITIES: [usize; 3] = [1, 2, 3];
pub const PASSES: [usize; 5] = [1, 2, 3, 5, 10];
pub const PHASES: [f64; 4] = [0.0, 0.3, FRAC_PI_2, PI];
pub const TAUS: [f64; 3] = [0.005, 0.02, 0.05];

const ORACLE_TOL: f64 = 1e-8;
const ORACLE_BUDGET_S: f64 = 120.0;
/// Boundary weight accepted from the oracle; amplitude errors scale as its root.
const ORACLE_LEAKAGE: f64 = 1e-18;
const ENHANCEMENT_TAU: f64 = 1e-3;
const ENHANCEMENT_TOL: f64 = 1e-4;
const FOUR_TIMES_TOL: f64 = 0.01;
const FOUR_TIMES_SHOTS: f64 = 1e6;
const OPTIMAL_U_TOL: f64 = 1e-4;
const OPTIMAL_U_STEPS: usize = 1_000_000;
const PHASE_PLATE_REL_TOL: f64 = 1e-15;
/// Reference value of `Delta phi(0)` for the N-BK7 plate, accepted at 0.1 %.
const PHASE_PLATE_REFERENCE: f64 = 930.6;
const PHASE_PLATE_REFERENCE_TOL: f64 = 1e-3;
const TOMOGRAPHY_SHOTS: f64 = 1e5;
const TOMOGRAPHY_FIDELITY: f64 = 0.99;
const TOMOGRAPHY_BUDGET_S: f64 = 30.0;
const REGIME_DEPHASING: f64 = 0.3;
const REGIME_VISIBILITY_TOL: f64 = 0.02;
const REGIME_FIDELITY_TOL: f64 = 0.01;
const CONTAMINATION_LIMIT: f64 = 1e-3;
const CONTAMINATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub criterion: u8,
    pub name: &'static str,
    pub tolerance: f64,
    /// Worst value of the checked quantity, in the units of `tolerance`.
    pub max_error: f64,
    pub passed: bool,
    pub runtime_s: f64,
    pub detail: String,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {:<28} max_error={:<11.3e} tol={:<9.2e} {:>7.2}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.criterion,
            self.name,
            self.max_error,
            self.tolerance,
            self.runtime_s,
            self.detail
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub checks: Vec<CheckOutcome>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let passed = self.checks.iter().filter(|c| c.passed).count();
        write!(f, "{passed}/{} checks passed", self.checks.len())
    }
}

/// Intermediate result of a check body.
struct Measured {
    max_error: f64,
    passed: bool,
    detail: String,
}

#[derive(Debug, Clone, Copy)]
pub struct Suite {
    pub exact: ExactProbability,
    pub seed: u64,
}

impl Default for Suite {
    fn default() -> Self {
        Suite {
            exact: pair_probability_exact,
            seed: 20_240_601,
        }
    }
}

type CheckFn = fn(&Suite) -> Result<Measured>;

const CHECKS: [(u8, &str, f64, CheckFn); 10] = [
    (1, "oracle_equivalence", ORACLE_TOL, oracle_equivalence),
    (2, "disentangling_identity", ORACLE_TOL, disentangling_identity),
    (3, "quadratic_enhancement", ENHANCEMENT_TOL, quadratic_enhancement),
    (4, "double_pass_four_times", FOUR_TIMES_TOL, double_pass_four_times),
    (5, "optimal_u", OPTIMAL_U_TOL, optimal_u_grid),
    (6, "small_tau_approximation", 1.0, small_tau_approximation),
    (7, "phase_plate_model", PHASE_PLATE_REL_TOL, phase_plate_model),
    (8, "tomography_round_trip", 1.0 - TOMOGRAPHY_FIDELITY, tomography_round_trip),
    (9, "dephased_regime", REGIME_VISIBILITY_TOL, dephased_regime),
    (10, "multiphoton_contamination", CONTAMINATION_TOL, multiphoton_contamination),
];

/// Names of all checks, in run order.
pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.1).collect()
}

impl Suite {
    /// Runs the named checks, or all of them when `only` is empty.
    pub fn run(&self, only: &[&str]) -> Result<Report> {
        for name in only {
            if !CHECKS.iter().any(|c| c.1 == *name) {
                return Err(Error::invalid(format!("unknown check {name:?}")));
            }
        }
        let checks = CHECKS
            .iter()
            .filter(|c| only.is_empty() || only.contains(&c.1))
            .map(|&(criterion, name, tolerance, body)| self.run_one(criterion, name, tolerance, body))
            .collect();
        Ok(Report { checks })
    }

    fn run_one(&self, criterion: u8, name: &'static str, tolerance: f64, body: CheckFn) -> CheckOutcome {
        let start = Instant::now();
        let measured = body(self);
        let runtime_s = start.elapsed().as_secs_f64();
        let m = measured.unwrap_or_else(|e| Measured {
            max_error: f64::INFINITY,
            passed: false,
            detail: format!("error: {e}"),
        });
        log::info!("{name}: passed={} max_error={:.3e} in {runtime_s:.2}s", m.passed, m.max_error);
        CheckOutcome {
            criterion,
            name,
            tolerance,
            max_error: m.max_error,
            passed: m.passed,
            runtime_s,
            detail: m.detail,
        }
    }
}

fn grid() -> Vec<(usize, f64, f64)> {
    let mut points = Vec::new();
    for n in PASSES {
        for phi in PHASES {
            for tau in TAUS {
                points.push((n, phi, tau));
            }
        }
    }
    points
}

/// Smallest cutoff at which the disentangled series puts less than `target`
/// on states with some occupation at the cutoff.
fn predicted_cutoff(coupling: f64, target: f64, floor: usize) -> usize {
    let u = coupling.tanh().powi(2);
    let norm = (1.0 - u).powi(2);
    let mut cutoff = floor;
    loop {
        // Level n carries (n+1) u^n (1-u)^2; every level n >= cutoff touches the boundary.
        let tail: f64 = (cutoff..cutoff + 400)
            .map(|n| norm * (n as f64 + 1.0) * u.powi(n as i32))
            .sum();
        if tail < target || cutoff > 200 {
            return cutoff;
        }
        cutoff += 1;
    }
}

/// Oracle evolution at the first cutoff meeting [`ORACLE_LEAKAGE`].
pub fn converged_oracle(cfg: &ResonatorConfig, min_cutoff: usize) -> Result<Evolved> {
    let opts = EvolutionOptions::with_tolerance(ORACLE_LEAKAGE);
    let mut cutoff = predicted_cutoff(cfg.coupling().norm(), ORACLE_LEAKAGE, min_cutoff);
    loop {
        match evolve_oracle(cfg, cutoff, &opts) {
            Err(Error::Truncation { .. }) if cutoff < 60 => cutoff += 2,
            other => return other,
        }
    }
}

fn oracle_equivalence(suite: &Suite) -> Result<Measured> {
    let start = Instant::now();
    let min_cutoff = 2 * MULTIPLICITIES.iter().max().unwrap() + 6;
    let errors: Vec<(f64, String)> = grid()
        .par_iter()
        .map(|&(n, phi, tau)| -> Result<Vec<(f64, String)>> {
            let cfg = ResonatorConfig::new(n, phi, tau)?;
            let evolved = converged_oracle(&cfg, min_cutoff)?;
            MULTIPLICITIES
                .iter()
                .map(|&m| {
                    let oracle = project_entangled(&evolved.state, m)?.norm_sqr();
                    let err = ((suite.exact)(m, &cfg)? - oracle).abs();
                    Ok((err, format!("M={m} N={n} phi={phi:.4} tau={tau}")))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let elapsed = start.elapsed().as_secs_f64();
    let (worst, at) = worst(&errors);
    Ok(Measured {
        max_error: worst,
        passed: worst < ORACLE_TOL && elapsed < ORACLE_BUDGET_S,
        detail: format!("{} points, worst at {at}, {elapsed:.1}s of {ORACLE_BUDGET_S}s budget", errors.len()),
    })
}

fn disentangling_identity(_: &Suite) -> Result<Measured> {
    let errors: Vec<(f64, String)> = grid()
        .par_iter()
        .map(|&(n, phi, tau)| {
            let cfg = ResonatorConfig::new(n, phi, tau)?;
            let evolved = converged_oracle(&cfg, 12)?;
            let series = disentangled_state(cfg.coupling(), evolved.state.space().cutoff())?;
            let diff = series.max_abs_diff(&evolved.state)?;
            Ok((diff, format!("N={n} phi={phi:.4} tau={tau} cutoff={}", evolved.state.space().cutoff())))
        })
        .collect::<Result<_>>()?;
    let (worst, at) = worst(&errors);
    Ok(Measured {
        max_error: worst,
        passed: worst < ORACLE_TOL,
        detail: format!("{} states, worst at {at}", errors.len()),
    })
}

fn quadratic_enhancement(suite: &Suite) -> Result<Measured> {
    let single = (suite.exact)(1, &ResonatorConfig::new(1, 0.0, ENHANCEMENT_TAU)?)?;
    let mut errors = Vec::new();
    for n in 1..=10usize {
        let p = (suite.exact)(1, &ResonatorConfig::new(n, 0.0, ENHANCEMENT_TAU)?)?;
        let target = (n * n) as f64;
        errors.push(((p / single - target).abs() / target, format!("N={n}")));
    }
    let (worst, at) = worst(&errors);
    let failing: Vec<&str> = errors
        .iter()
        .filter(|e| e.0 >= ENHANCEMENT_TOL)
        .map(|e| e.1.as_str())
        .collect();
    Ok(Measured {
        max_error: worst,
        passed: failing.is_empty(),
        detail: if failing.is_empty() {
            format!("worst at {at}")
        } else {
            format!("worst at {at}; exceeds tolerance for {}", failing.join(","))
        },
    })
}

fn double_pass_four_times(suite: &Suite) -> Result<Measured> {
    let exact_four = double_pass_ratio(0.0) == 4.0;
    let geometry = PlateGeometry::nbk7_405nm();
    let model = StimulationModel {
        geometry,
        resonator: ResonatorConfig::new(2, 0.0, ENHANCEMENT_TAU)?,
        phase_offset: phase_offset_for_peak_at(&geometry, 0.0)?,
    };
    let alphas: Vec<f64> = (0..121).map(|k| 0.2 * k as f64 / 120.0).collect();
    let scan = simulate_stimulation_fringe(&model, &alphas, FOUR_TIMES_SHOTS, derive_seed(suite.seed, 4))?;
    let fit = fit_fringe(&scan, &FitOptions::with_coordinate(PhaseCoordinate::Tilt(geometry)))?;
    let err = (fit.p2_over_p1() - 4.0).abs();
    Ok(Measured {
        max_error: err,
        passed: exact_four && err <= FOUR_TIMES_TOL,
        detail: format!(
            "double_pass_ratio(0)={}, fitted 2(1+B)={:.5}",
            double_pass_ratio(0.0),
            fit.p2_over_p1()
        ),
    })
}

fn optimal_u_grid(_: &Suite) -> Result<Measured> {
    let mut errors = Vec::new();
    for m in 1..=5 {
        let best = (0..=OPTIMAL_U_STEPS)
            .map(|k| k as f64 / OPTIMAL_U_STEPS as f64)
            .max_by(|a, b| probability_of_u(m, *a).total_cmp(&probability_of_u(m, *b)))
            .unwrap();
        errors.push(((best - optimal_u(m)?).abs(), format!("M={m}")));
    }
    let (worst, at) = worst(&errors);
    Ok(Measured {
        max_error: worst,
        passed: worst < OPTIMAL_U_TOL,
        detail: format!("grid step {:.0e}, worst at {at}", 1.0 / OPTIMAL_U_STEPS as f64),
    })
}

/// Relative error of the leading-order probability over `10 (N tau)^2`.
///
/// Where the amplitude sum vanishes to rounding both probabilities are zero
/// and the relative error is undefined; those points pass on an absolute floor.
fn small_tau_approximation(suite: &Suite) -> Result<Measured> {
    let mut errors = Vec::new();
    let mut floored = 0;
    for &(n, phi, tau) in &grid() {
        let cfg = ResonatorConfig::new(n, phi, tau)?;
        for m in MULTIPLICITIES {
            let exact = (suite.exact)(m, &cfg)?;
            let approx = pair_probability_approx(m, &cfg)?;
            let bound = 10.0 * (n as f64 * tau).powi(2);
            if cfg.coupling().norm() < 1e-12 {
                floored += 1;
                if (approx - exact).abs() > 1e-20 {
                    errors.push((f64::INFINITY, format!("M={m} N={n} phi={phi:.4} tau={tau}")));
                }
                continue;
            }
            let rel = (approx - exact).abs() / exact;
            errors.push((rel / bound, format!("M={m} N={n} phi={phi:.4} tau={tau}")));
        }
    }
    let (worst, at) = worst(&errors);
    Ok(Measured {
        max_error: worst,
        passed: worst < 1.0,
        detail: format!("ratio to bound, worst at {at}; {floored} points with vanishing amplitude"),
    })
}

fn phase_plate_model(suite: &Suite) -> Result<Measured> {
    let geometry = PlateGeometry::nbk7_405nm();
    let closed = 2.0 * PI * geometry.thickness_m() / geometry.pump_wavelength_m() * (geometry.n_pump() - geometry.n_pair());
    let at_zero = relative_phase(&geometry, 0.0)?.raw;
    let rel = (at_zero - closed).abs() / closed;
    let reference_rel = (at_zero - PHASE_PLATE_REFERENCE).abs() / PHASE_PLATE_REFERENCE;

    let tilts: Vec<f64> = (1..=50).map(|k| 0.01 * k as f64).collect();
    let mut even = true;
    let mut steps = Vec::with_capacity(tilts.len());
    let mut previous = at_zero;
    for &a in &tilts {
        let plus = relative_phase(&geometry, a)?.raw;
        let minus = relative_phase(&geometry, -a)?.raw;
        even &= (plus - minus).abs() <= 1e-12 * plus.abs();
        steps.push(plus - previous);
        previous = plus;
    }
    // Strictly monotone in |alpha|, in one direction.
    let monotone = steps.iter().all(|&d| d < 0.0) || steps.iter().all(|&d| d > 0.0);

    // Tilt windows far apart in phase must each fit back to the injected
    // offset and unit visibility when read through the plate model.
    let offset = 1.234;
    let model = StimulationModel {
        geometry,
        resonator: ResonatorConfig::new(2, 0.0, ENHANCEMENT_TAU)?,
        phase_offset: offset,
    };
    let mut fits_consistent = true;
    let mut worst_sigma: f64 = 0.0;
    for (k, centre) in [0.1, 0.2, 0.3].into_iter().enumerate() {
        let alphas: Vec<f64> = (0..101).map(|j| centre - 0.05 + 0.1 * j as f64 / 100.0).collect();
        let scan = simulate_stimulation_fringe(&model, &alphas, 1e4, derive_seed(suite.seed, 70 + k as u64))?;
        let options = FitOptions {
            poisson_weights: true,
            ..FitOptions::with_coordinate(PhaseCoordinate::Tilt(geometry))
        };
        let fit = fit_fringe(&scan, &options)?;
        let sigma = fit.std_errors();
        let dc = {
            let d = (fit.c - offset).rem_euclid(2.0 * PI);
            d.min(2.0 * PI - d)
        };
        let z_c = dc / sigma[2];
        let z_b = (1.0 - fit.b) / sigma[1].max(1e-12);
        worst_sigma = worst_sigma.max(z_c).max(if fit.b < 1.0 { z_b } else { 0.0 });
        fits_consistent &= z_c < 3.0 && (fit.b >= 1.0 || z_b < 3.0);
    }

    Ok(Measured {
        max_error: rel,
        passed: rel <= PHASE_PLATE_REL_TOL
            && reference_rel <= PHASE_PLATE_REFERENCE_TOL
            && even
            && monotone
            && fits_consistent,
        detail: format!(
            "dphi(0)={at_zero:.6} rad (reference {PHASE_PLATE_REFERENCE}, rel {reference_rel:.2e}); even={even} monotone={monotone}; tilt fits within {worst_sigma:.2} sigma"
        ),
    })
}

fn tomography_round_trip(suite: &Suite) -> Result<Measured> {
    let bell = bell_state().density();
    let mut worst_infidelity: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    let mut physical = true;
    let mut parts = Vec::new();
    for (k, d) in [0.0, 0.1, 0.3].into_iter().enumerate() {
        let truth = dephasing_noise(&bell, d)?;
        let record = simulate_tomography(&truth, TOMOGRAPHY_SHOTS, derive_seed(suite.seed, 80 + k as u64))?;
        let start = Instant::now();
        let result = reconstruct_mle(&record, &MleOptions::default())?;
        slowest = slowest.max(start.elapsed().as_secs_f64());
        physical &= DensityMatrix::new(*result.rho.matrix()).is_ok();
        let f = state_fidelity(&result.rho, &truth);
        worst_infidelity = worst_infidelity.max(1.0 - f);
        parts.push(format!("d={d}: F={f:.5}"));
    }
    Ok(Measured {
        max_error: worst_infidelity,
        passed: worst_infidelity <= 1.0 - TOMOGRAPHY_FIDELITY && physical && slowest < TOMOGRAPHY_BUDGET_S,
        detail: format!("{}; physical={physical}; slowest {slowest:.3}s", parts.join(", ")),
    })
}

fn dephased_regime(suite: &Suite) -> Result<Measured> {
    let d = REGIME_DEPHASING;
    let rho = dephasing_noise(&bell_state().density(), d)?;
    let angles: Vec<f64> = (0..73).map(|k| k as f64 * PI / 72.0).collect();
    let scan = simulate_polarization_fringe(
        &rho,
        ArmSetting::polarizer(FRAC_PI_4),
        None,
        &angles,
        TOMOGRAPHY_SHOTS,
        derive_seed(suite.seed, 90),
    )?;
    let fit = fit_fringe(&scan, &FitOptions::with_coordinate(PhaseCoordinate::PolarizerAngle))?;
    let visibility_err = (fit.visibility() - (1.0 - d)).abs();
    let record = simulate_tomography(&rho, TOMOGRAPHY_SHOTS, derive_seed(suite.seed, 91))?;
    let estimate = reconstruct_mle(&record, &MleOptions::default())?;
    let f = fidelity(&estimate.rho, &bell_state());
    let fidelity_err = (f - (1.0 - d / 2.0)).abs();
    Ok(Measured {
        max_error: visibility_err,
        passed: visibility_err <= REGIME_VISIBILITY_TOL && fidelity_err <= REGIME_FIDELITY_TOL,
        detail: format!(
            "visibility {:.4} (target {:.2}), fidelity {f:.4} (target {:.2}, tol {REGIME_FIDELITY_TOL})",
            fit.visibility(),
            1.0 - d,
            1.0 - d / 2.0
        ),
    })
}

fn multiphoton_contamination(suite: &Suite) -> Result<Measured> {
    let mut worst_ratio: f64 = 0.0;
    let mut errors = Vec::new();
    for tau in [1e-4, 1e-3, 5e-3, 1e-2] {
        for phi in [0.0, 0.3, FRAC_PI_2] {
            let cfg = ResonatorConfig::new(2, phi, tau)?;
            let ratio = (suite.exact)(2, &cfg)? / (suite.exact)(1, &cfg)?;
            worst_ratio = worst_ratio.max(ratio);
            let evolved = converged_oracle(&cfg, 8)?;
            let oracle = project_entangled(&evolved.state, 2)?.norm_sqr() / project_entangled(&evolved.state, 1)?.norm_sqr();
            let closed = 1.5 * cfg.coupling().norm().tanh().powi(2);
            errors.push(((ratio - closed).abs().max((oracle - closed).abs()), format!("tau={tau} phi={phi:.4}")));
        }
    }
    let (worst, at) = worst(&errors);
    Ok(Measured {
        max_error: worst,
        passed: worst < CONTAMINATION_TOL && worst_ratio < CONTAMINATION_LIMIT,
        detail: format!("largest P2/P1 {worst_ratio:.3e} (limit {CONTAMINATION_LIMIT:.0e}); worst match at {at}"),
    })
}

fn worst(errors: &[(f64, String)]) -> (f64, String) {
    errors
        .iter()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(e, at)| (*e, at.clone()))
        .unwrap_or((0.0, String::new()))
}
