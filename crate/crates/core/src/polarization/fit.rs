use super::fringe::FringeScan;
use crate::error::{Error, Result};
use crate::phase_plate::{relative_phase, PlateGeometry};
use nalgebra::{Matrix3, Vector3};
use serde::{Serialize, Serializer};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

const MIN_POINTS: usize = 8;
const START_PHASES: [f64; 4] = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2];
const MAX_START_VISIBILITY: f64 = 0.999;

/// Map from the scan variable to the fringe phase `x'`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PhaseCoordinate {
    /// The scan variable already is the phase.
    #[default]
    Phase,
    /// Linear polarizer angle; the fringe phase is twice the angle.
    PolarizerAngle,
    /// Plate tilt; the fringe phase is the unwrapped relative plate phase.
    Tilt(PlateGeometry),
}

impl PhaseCoordinate {
    pub fn phase(&self, x: f64) -> Result<f64> {
        match self {
            PhaseCoordinate::Phase => Ok(x),
            PhaseCoordinate::PolarizerAngle => Ok(2.0 * x),
            PhaseCoordinate::Tilt(geom) => Ok(relative_phase(geom, x)?.raw),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub coordinate: PhaseCoordinate,
    /// Weight residuals by `1 / max(counts, 1)`.
    pub poisson_weights: bool,
    /// Iteration cap per start.
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            coordinate: PhaseCoordinate::Phase,
            poisson_weights: false,
            max_iterations: 500,
        }
    }
}

impl FitOptions {
    pub fn with_coordinate(coordinate: PhaseCoordinate) -> Self {
        FitOptions {
            coordinate,
            ..Default::default()
        }
    }
}

/// Parameters of `2A (1 + B cos(x' + C))`.
///
/// `A > 0`, `B` in `[0, 1]`, `C` in `[0, 2 pi)`. Covariance rows and columns
/// are ordered `A, B, C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub covariance: [[f64; 3]; 3],
    /// Weighted residual norm.
    pub residual: f64,
    pub iterations: usize,
}

impl FitResult {
    pub fn model(&self, phase: f64) -> f64 {
        model(&Vector3::new(self.a, self.b, self.c), phase)
    }

    pub fn visibility(&self) -> f64 {
        self.b
    }

    /// Maximum over single-pass level, `2 (1 + B)`.
    pub fn p2_over_p1(&self) -> f64 {
        2.0 * (1.0 + self.b)
    }

    pub fn std_errors(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.covariance[i][i].max(0.0).sqrt())
    }
}

#[derive(Serialize)]
struct FitRepr {
    #[serde(rename = "A")]
    a: f64,
    #[serde(rename = "B")]
    b: f64,
    #[serde(rename = "C")]
    c: f64,
    cov: [[f64; 3]; 3],
    residual: f64,
    visibility: f64,
    p2_over_p1: f64,
}

impl Serialize for FitResult {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FitRepr {
            a: self.a,
            b: self.b,
            c: self.c,
            cov: self.covariance,
            residual: self.residual,
            visibility: self.visibility(),
            p2_over_p1: self.p2_over_p1(),
        }
        .serialize(s)
    }
}

fn model(p: &Vector3<f64>, x: f64) -> f64 {
    2.0 * p[0] * (1.0 + p[1] * (x + p[2]).cos())
}

fn jacobian_row(p: &Vector3<f64>, x: f64) -> Vector3<f64> {
    let (s, c) = (x + p[2]).sin_cos();
    Vector3::new(2.0 * (1.0 + p[1] * c), 2.0 * p[0] * c, -2.0 * p[0] * p[1] * s)
}

struct Problem<'a> {
    x: &'a [f64],
    y: &'a [f64],
    w: &'a [f64],
}

impl Problem<'_> {
    fn cost(&self, p: &Vector3<f64>) -> f64 {
        self.x
            .iter()
            .zip(self.y)
            .zip(self.w)
            .map(|((&x, &y), &w)| w * (y - model(p, x)).powi(2))
            .sum()
    }

    /// `(J^T W J, J^T W r)`.
    fn normal_equations(&self, p: &Vector3<f64>) -> (Matrix3<f64>, Vector3<f64>) {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for ((&x, &y), &w) in self.x.iter().zip(self.y).zip(self.w) {
            let row = jacobian_row(p, x);
            jtj += w * row * row.transpose();
            jtr += w * (y - model(p, x)) * row;
        }
        (jtj, jtr)
    }
}

fn project(mut p: Vector3<f64>) -> Vector3<f64> {
    p[1] = p[1].clamp(0.0, 1.0);
    p
}

struct Run {
    params: Vector3<f64>,
    cost: f64,
    iterations: usize,
    converged: bool,
}

/// Damped Gauss-Newton step. `B` is held fixed when it sits on a bound and
/// the unconstrained step would leave `[0, 1]`.
fn damped_step(jtj: &Matrix3<f64>, jtr: &Vector3<f64>, lambda: f64, p: &Vector3<f64>) -> Option<Vector3<f64>> {
    let solve = |free: &[usize]| -> Option<Vector3<f64>> {
        let n = free.len();
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            let v = jtj[(free[i], free[j])];
            if i == j { v + lambda * v.max(1e-12) } else { v }
        });
        let rhs = nalgebra::DVector::from_fn(n, |i, _| jtr[free[i]]);
        let x = m.cholesky()?.solve(&rhs);
        let mut step = Vector3::zeros();
        for (i, &k) in free.iter().enumerate() {
            step[k] = x[i];
        }
        Some(step)
    };
    let step = solve(&[0, 1, 2])?;
    let pinned = (p[1] >= 1.0 && step[1] > 0.0) || (p[1] <= 0.0 && step[1] < 0.0);
    if pinned {
        solve(&[0, 2])
    } else {
        Some(step)
    }
}

/// Projected Levenberg-Marquardt from a single start.
fn levenberg_marquardt(problem: &Problem, start: Vector3<f64>, max_iterations: usize) -> Run {
    let mut p = project(start);
    let mut cost = problem.cost(&p);
    let mut lambda = 1e-3;
    for iteration in 1..=max_iterations {
        let (jtj, jtr) = problem.normal_equations(&p);
        if jtr.amax() <= 1e-15 * (1.0 + cost) {
            return Run { params: p, cost, iterations: iteration, converged: true };
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let Some(step) = damped_step(&jtj, &jtr, lambda, &p) else {
                lambda *= 10.0;
                continue;
            };
            let trial = project(p + step);
            if !(trial[0] > 0.0) {
                lambda *= 10.0;
                continue;
            }
            let trial_cost = problem.cost(&trial);
            if trial_cost <= cost {
                let moved = (trial - p).amax();
                let gain = cost - trial_cost;
                p = trial;
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if moved <= 1e-14 * (1.0 + p.amax()) || gain <= 1e-30 + 1e-13 * cost {
                    return Run { params: p, cost, iterations: iteration, converged: true };
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // No descent direction at any damping: a stationary point.
            return Run { params: p, cost, iterations: iteration, converged: true };
        }
    }
    Run { params: p, cost, iterations: max_iterations, converged: false }
}

/// Least-squares fit of `2A (1 + B cos(x' + C))` to a scan.
///
/// Requires at least 8 points spanning more than half a fringe period in `x'`.
pub fn fit_fringe(scan: &FringeScan, options: &FitOptions) -> Result<FitResult> {
    if scan.len() < MIN_POINTS {
        return Err(Error::invalid(format!(
            "fit needs at least {MIN_POINTS} points, got {}",
            scan.len()
        )));
    }
    let x: Vec<f64> = scan
        .xs()
        .map(|v| options.coordinate.phase(v))
        .collect::<Result<_>>()?;
    let span = x.iter().fold(f64::MIN, |m, &v| m.max(v)) - x.iter().fold(f64::MAX, |m, &v| m.min(v));
    if !(span > PI) {
        return Err(Error::invalid(format!(
            "scan spans {span:.4} rad of phase, need more than pi"
        )));
    }
    let raw: Vec<f64> = scan.counts().collect();
    let (max, min) = (scan.max_count(), scan.min_count());
    if max <= 0.0 {
        return Err(Error::FitFailure("all counts are zero".into()));
    }
    if max == min {
        return Err(Error::FitFailure("constant counts leave the fringe phase undetermined".into()));
    }

    // Fit in units of the largest count.
    let y: Vec<f64> = raw.iter().map(|&v| v / max).collect();
    let raw_weights: Vec<f64> = if options.poisson_weights {
        raw.iter().map(|&v| 1.0 / v.max(1.0)).collect()
    } else {
        vec![1.0; raw.len()]
    };
    let w: Vec<f64> = raw_weights.iter().map(|&v| v * max * max).collect();
    let problem = Problem { x: &x, y: &y, w: &w };

    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let b0 = ((max - min) / (max + min)).min(MAX_START_VISIBILITY);
    let mut best: Option<Run> = None;
    let mut total_iterations = 0;
    for c0 in START_PHASES {
        let run = levenberg_marquardt(&problem, Vector3::new(mean / 2.0, b0, c0), options.max_iterations);
        total_iterations += run.iterations;
        log::debug!("fit start C0={c0:.4}: cost {:.3e} after {} iterations", run.cost, run.iterations);
        if run.converged && run.cost.is_finite() && best.as_ref().is_none_or(|b| run.cost < b.cost) {
            best = Some(run);
        }
    }
    let Some(best) = best else {
        return Err(Error::FitFailure(format!(
            "no start converged within {} iterations each",
            options.max_iterations
        )));
    };

    let p = best.params;
    let params = Vector3::new(p[0] * max, p[1], p[2].rem_euclid(TAU));
    // `rem_euclid` can round up to exactly 2 pi.
    let params = if params[2] >= TAU { Vector3::new(params[0], params[1], 0.0) } else { params };

    let raw_problem = Problem { x: &x, y: &raw, w: &raw_weights };
    let (jtj, _) = raw_problem.normal_equations(&params);
    let cost = raw_problem.cost(&params);
    let inverse = jtj
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::FitFailure("singular normal matrix; parameters not identifiable".into()))?;
    let scale = if options.poisson_weights {
        1.0
    } else {
        cost / (x.len() - 3) as f64
    };
    let cov = inverse * scale;
    let mut covariance = [[0.0; 3]; 3];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = cov[(i, j)];
        }
    }
    Ok(FitResult {
        a: params[0],
        b: params[1],
        c: params[2],
        covariance,
        residual: cost.sqrt(),
        iterations: total_iterations,
    })
}
