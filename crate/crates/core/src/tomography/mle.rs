use super::{log_likelihood, reconstruct_linear, Method, ReconstructionResult, TomographyRecord};
use crate::error::{Error, Result};
use crate::polarization::{DensityMatrix, Matrix4c};
use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;

type Params = SVector<f64, 16>;
type InverseHessian = SMatrix<f64, 16, 16>;

/// Strictly lower-triangular positions of `T`, in parameter order after the diagonal.
const OFF_DIAGONAL: [(usize, usize); 6] = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
    /// Add 0.5 to every count before fitting.
    pub jeffreys: bool,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            max_iterations: 10_000,
            gradient_tolerance: 1e-8,
            step_tolerance: 1e-10,
            jeffreys: false,
        }
    }
}

/// Lower-triangular `T` with real diagonal from its 16 real parameters.
fn unpack(x: &Params) -> Matrix4c {
    let mut t = Matrix4c::zeros();
    for j in 0..4 {
        t[(j, j)] = Complex64::new(x[j], 0.0);
    }
    for (k, &(r, c)) in OFF_DIAGONAL.iter().enumerate() {
        t[(r, c)] = Complex64::new(x[4 + 2 * k], x[5 + 2 * k]);
    }
    t
}

fn pack(t: &Matrix4c) -> Params {
    let mut x = Params::zeros();
    for j in 0..4 {
        x[j] = t[(j, j)].re;
    }
    for (k, &(r, c)) in OFF_DIAGONAL.iter().enumerate() {
        x[4 + 2 * k] = t[(r, c)].re;
        x[5 + 2 * k] = t[(r, c)].im;
    }
    x
}

/// Negative Poisson log-likelihood in the unnormalised means
/// `mu_i = Tr(T^dag T Pi_i)`, divided by the total count.
struct Objective {
    projectors: Vec<Matrix4c>,
    counts: Vec<f64>,
    total: f64,
}

impl Objective {
    fn value(&self, x: &Params) -> f64 {
        let t = unpack(x);
        let gram = t.adjoint() * t;
        let mut sum = 0.0;
        for (p, &n) in self.projectors.iter().zip(&self.counts) {
            let mu = (gram * p).trace().re;
            if n > 0.0 {
                if mu <= 0.0 {
                    return f64::INFINITY;
                }
                sum += mu - n * mu.ln();
            } else {
                sum += mu;
            }
        }
        sum / self.total
    }

    /// `d mu / d Re T_jk = 2 Re (Pi T^dag)_kj`, `d mu / d Im T_jk = -2 Im (Pi T^dag)_kj`.
    fn gradient(&self, x: &Params) -> Params {
        let t = unpack(x);
        let gram = t.adjoint() * t;
        let mut weight = Matrix4c::zeros();
        for (p, &n) in self.projectors.iter().zip(&self.counts) {
            let mu = (gram * p).trace().re;
            let w = if n > 0.0 { 1.0 - n / mu } else { 1.0 };
            weight += p.scale(w);
        }
        let m = weight * t.adjoint();
        let mut g = Params::zeros();
        for j in 0..4 {
            g[j] = 2.0 * m[(j, j)].re;
        }
        for (k, &(r, c)) in OFF_DIAGONAL.iter().enumerate() {
            g[4 + 2 * k] = 2.0 * m[(c, r)].re;
            g[5 + 2 * k] = -2.0 * m[(c, r)].im;
        }
        g / self.total
    }
}

/// Lower-triangular `T` with `T^dag T = a` for positive-definite `a`.
fn upper_factor(a: &Matrix4c) -> Result<Matrix4c> {
    // Reversing rows and columns turns a Cholesky factor into the upper-triangular one.
    let flip = |m: &Matrix4c| Matrix4c::from_fn(|r, c| m[(3 - r, 3 - c)]);
    let l = flip(a)
        .cholesky()
        .ok_or_else(|| Error::Singular("initial estimate is not positive definite".into()))?
        .l();
    Ok(flip(&l).adjoint())
}

fn initial_guess(record: &TomographyRecord, counts: &[f64], projectors: &[Matrix4c]) -> Result<Params> {
    let start = match reconstruct_linear(record) {
        Ok(r) => r.rho.project_physical(),
        Err(_) => DensityMatrix::maximally_mixed(),
    };
    let start = start.mix(&DensityMatrix::maximally_mixed(), 0.9)?;
    let probability: f64 = projectors.iter().map(|p| start.expectation(p)).sum();
    let intensity = counts.iter().sum::<f64>() / probability;
    Ok(pack(&upper_factor(&start.matrix().scale(intensity))?))
}

/// Maximum-likelihood reconstruction over physical states `T^dag T / Tr`.
///
/// Quasi-Newton (BFGS with Armijo backtracking) on the 16 real parameters of
/// a lower-triangular `T`. Stops when the gradient norm or the step length
/// falls below its tolerance.
pub fn reconstruct_mle(record: &TomographyRecord, options: &MleOptions) -> Result<ReconstructionResult> {
    let offset = if options.jeffreys { 0.5 } else { 0.0 };
    let counts: Vec<f64> = record.entries().iter().map(|e| e.counts + offset).collect();
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return Err(Error::Undefined("record has no counts".into()));
    }
    let projectors: Vec<Matrix4c> = record.entries().iter().map(|e| e.setting.coincidence_operator()).collect();
    let mut x = initial_guess(record, &counts, &projectors)?;
    let objective = Objective { projectors, counts, total };

    let mut value = objective.value(&x);
    let mut grad = objective.gradient(&x);
    let mut h = InverseHessian::identity();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iterations {
        iterations += 1;
        if grad.norm() < options.gradient_tolerance {
            converged = true;
            break;
        }
        let mut direction = -(h * grad);
        let mut slope = direction.dot(&grad);
        if slope >= 0.0 {
            h = InverseHessian::identity();
            direction = -grad;
            slope = direction.dot(&grad);
        }
        let mut alpha = 1.0;
        let accepted = loop {
            let trial = x + direction * alpha;
            let trial_value = objective.value(&trial);
            if trial_value.is_finite() && trial_value <= value + 1e-4 * alpha * slope {
                break Some((trial, trial_value));
            }
            alpha *= 0.5;
            if alpha < 1e-20 {
                break None;
            }
        };
        let Some((next, next_value)) = accepted else {
            // No decrease along a descent direction: stationary to rounding.
            converged = true;
            break;
        };
        let s = next - x;
        let next_grad = objective.gradient(&next);
        let y = next_grad - grad;
        let sy = s.dot(&y);
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let hy = h * y;
            h += (s * s.transpose()) * (rho * (1.0 + rho * y.dot(&hy))) - (hy * s.transpose() + s * hy.transpose()) * rho;
        }
        x = next;
        value = next_value;
        grad = next_grad;
        if s.norm() < options.step_tolerance * (1.0 + x.norm()) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence {
            iterations,
            detail: format!("gradient norm {:.3e}, objective {value:.6e}", grad.norm()),
        });
    }
    let t = unpack(&x);
    let gram = t.adjoint() * t;
    let gram = (gram + gram.adjoint()).scale(0.5);
    let tr = gram.trace().re;
    let rho = DensityMatrix::new(gram.unscale(tr))?;
    log::debug!("mle converged in {iterations} iterations, objective {value:.9e}");
    Ok(ReconstructionResult::new(
        rho,
        Method::Mle,
        Some(log_likelihood(record, &rho)),
        iterations,
    ))
}
