//! Two-photon polarization layer.
//!
//! Two-qubit vectors use the basis order `HH, HV, VH, VV` with arm `a` as the
//! first tensor factor.

mod analyzer;
mod fit;
mod fringe;
mod rates;

pub use analyzer::{coincidence_probability, ArmSetting, MeasurementSetting};
pub use fit::{fit_fringe, FitOptions, FitResult, PhaseCoordinate};
pub use fringe::{
    phase_offset_for_peak_at, simulate_polarization_fringe, simulate_stimulation_fringe,
    visibility, FringeScan, StimulationModel,
};
pub use rates::{nth_rate, pair_rate, RateReference, REFERENCE_RATES};

use crate::error::{Error, Result};
use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type Matrix4c = Matrix4<Complex64>;

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const NEGATIVE_EIGEN_TOL: f64 = 1e-10;
const NORM_TOL: f64 = 1e-12;

/// Labels of the computational basis, in storage order.
pub const BASIS_LABELS: [&str; 4] = ["HH", "HV", "VH", "VV"];

/// Pure two-photon polarization state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationState {
    amplitudes: Vector4<Complex64>,
}

impl PolarizationState {
    /// Accepts amplitudes that are already normalised.
    pub fn new(amplitudes: [Complex64; 4]) -> Result<Self> {
        let v = Vector4::from(amplitudes);
        let norm = v.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::invalid(format!("state norm is {norm}, expected 1")));
        }
        Ok(PolarizationState { amplitudes: v })
    }

    /// Normalises arbitrary nonzero amplitudes.
    pub fn normalized(amplitudes: [Complex64; 4]) -> Result<Self> {
        let v = Vector4::from(amplitudes);
        let norm = v.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::invalid("cannot normalise a zero vector"));
        }
        Ok(PolarizationState {
            amplitudes: v.unscale(norm),
        })
    }

    pub fn amplitudes(&self) -> &Vector4<Complex64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, label: &str) -> Option<Complex64> {
        BASIS_LABELS
            .iter()
            .position(|l| *l == label)
            .map(|k| self.amplitudes[k])
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix {
            matrix: self.amplitudes * self.amplitudes.adjoint(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }
}

/// `|Phi_1^-> = (|H_a V_b> - |V_a H_b>) / sqrt(2)`.
pub fn bell_state() -> PolarizationState {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let z = Complex64::new(0.0, 0.0);
    PolarizationState {
        amplitudes: Vector4::new(z, Complex64::new(h, 0.0), Complex64::new(-h, 0.0), z),
    }
}

/// Two-qubit density operator.
///
/// Construction through [`DensityMatrix::new`] enforces Hermiticity, unit
/// trace and positivity. [`DensityMatrix::new_unit_trace`] skips the
/// positivity check and is used for linear-inversion estimates, which may
/// carry small negative eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    matrix: Matrix4c,
}

impl DensityMatrix {
    pub fn new(matrix: Matrix4c) -> Result<Self> {
        let rho = Self::new_unit_trace(matrix)?;
        let min = rho.min_eigenvalue();
        if min < -NEGATIVE_EIGEN_TOL {
            return Err(Error::NonPhysical(format!("minimum eigenvalue {min:.3e}")));
        }
        Ok(rho)
    }

    pub fn new_unit_trace(matrix: Matrix4c) -> Result<Self> {
        let dev = (matrix - matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if dev > HERMITIAN_TOL {
            return Err(Error::NonPhysical(format!("not Hermitian (deviation {dev:.3e})")));
        }
        let tr = matrix.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::NonPhysical(format!("trace is {tr}, expected 1")));
        }
        Ok(DensityMatrix { matrix })
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix {
            matrix: Matrix4c::identity().scale(0.25),
        }
    }

    pub fn matrix(&self) -> &Matrix4c {
        &self.matrix
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 4] {
        let eig = self.matrix.symmetric_eigen();
        let mut values = [0.0; 4];
        for (k, v) in eig.eigenvalues.iter().enumerate() {
            values[k] = *v;
        }
        values.sort_by(f64::total_cmp);
        values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn is_physical(&self) -> bool {
        self.min_eigenvalue() >= -NEGATIVE_EIGEN_TOL
    }

    /// `Tr(rho O)` for a Hermitian observable; the imaginary part is dropped.
    pub fn expectation(&self, observable: &Matrix4c) -> f64 {
        (self.matrix * observable).trace().re
    }

    pub fn purity(&self) -> f64 {
        (self.matrix * self.matrix).trace().re
    }

    /// `(1/2) ||rho - sigma||_1`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let diff = self.matrix - other.matrix;
        0.5 * diff.symmetric_eigen().eigenvalues.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Convex combination `w self + (1 - w) other`.
    pub fn mix(&self, other: &DensityMatrix, w: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::invalid(format!("mixing weight {w} outside [0, 1]")));
        }
        Ok(DensityMatrix {
            matrix: self.matrix.scale(w) + other.matrix.scale(1.0 - w),
        })
    }

    /// Closest physical state in Hilbert-Schmidt distance: eigenvalues are
    /// projected onto the probability simplex, eigenvectors kept.
    pub fn project_physical(&self) -> DensityMatrix {
        let eig = self.matrix.symmetric_eigen();
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let sorted: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let projected = project_to_simplex(&sorted);
        let mut m = Matrix4c::zeros();
        for (rank, &i) in order.iter().enumerate() {
            let v = eig.eigenvectors.column(i);
            m += (v * v.adjoint()).scale(projected[rank]);
        }
        let m = (m + m.adjoint()).scale(0.5);
        let tr = m.trace().re;
        DensityMatrix { matrix: m.unscale(tr) }
    }
}

/// Euclidean projection of descending-sorted values onto `{p >= 0, sum p = 1}`.
fn project_to_simplex(sorted_desc: &[f64]) -> Vec<f64> {
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (k, &v) in sorted_desc.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - 1.0) / (k as f64 + 1.0);
        if v - candidate > 0.0 {
            shift = candidate;
        }
    }
    sorted_desc.iter().map(|&v| (v - shift).max(0.0)).collect()
}

#[derive(Serialize, Deserialize)]
struct DensityRepr {
    /// Row-major `[re, im]` pairs.
    matrix: [[[f64; 2]; 4]; 4],
    eigenvalues: [f64; 4],
    min_eigenvalue: f64,
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut matrix = [[[0.0; 2]; 4]; 4];
        for (r, row) in matrix.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                let z = self.matrix[(r, c)];
                *cell = [z.re, z.im];
            }
        }
        let eigenvalues = self.eigenvalues();
        DensityRepr {
            matrix,
            eigenvalues,
            min_eigenvalue: eigenvalues[0],
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        #[derive(Deserialize)]
        struct MatrixOnly {
            matrix: [[[f64; 2]; 4]; 4],
        }
        let raw = MatrixOnly::deserialize(deserializer)?;
        let m = Matrix4c::from_fn(|r, c| Complex64::new(raw.matrix[r][c][0], raw.matrix[r][c][1]));
        DensityMatrix::new_unit_trace(m).map_err(D::Error::custom)
    }
}

/// Phase-damping of the arm-`a` polarization: `rho -> (1 - d/2) rho + (d/2) Z_a rho Z_a`.
///
/// Populations are untouched and every coherence between states of opposite
/// arm-`a` polarization, in particular `HV <-> VH`, is multiplied by `1 - d`.
/// The map is completely positive, so physical input stays physical.
pub fn dephasing_noise(rho: &DensityMatrix, d: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&d) {
        return Err(Error::invalid(format!("dephasing {d} outside [0, 1]")));
    }
    // Arm-a polarization of basis states HH, HV, VH, VV.
    const A_IS_V: [bool; 4] = [false, false, true, true];
    let m = Matrix4c::from_fn(|r, c| {
        let factor = if A_IS_V[r] == A_IS_V[c] { 1.0 } else { 1.0 - d };
        rho.matrix[(r, c)] * factor
    });
    Ok(DensityMatrix { matrix: m })
}

/// `<target| rho |target>`.
pub fn fidelity(rho: &DensityMatrix, target: &PolarizationState) -> f64 {
    let t = target.amplitudes();
    (t.adjoint() * rho.matrix() * t)[(0, 0)].re
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2` between two states.
pub fn state_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    let root = psd_sqrt(rho.matrix());
    let inner = root * sigma.matrix() * root;
    let inner = (inner + inner.adjoint()).scale(0.5);
    let s: f64 = inner.symmetric_eigen().eigenvalues.iter().map(|v| v.max(0.0).sqrt()).sum();
    (s * s).min(1.0)
}

fn psd_sqrt(m: &Matrix4c) -> Matrix4c {
    let eig = m.symmetric_eigen();
    let mut out = Matrix4c::zeros();
    for k in 0..4 {
        let v = eig.eigenvectors.column(k);
        out += (v * v.adjoint()).scale(eig.eigenvalues[k].max(0.0).sqrt());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn bell_state_properties() {
        let s = bell_state();
        assert!((s.norm() - 1.0).abs() < 1e-15);
        assert_eq!(s.amplitude("HH"), Some(c(0.0, 0.0)));
        assert!((s.amplitude("HV").unwrap().re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-16);
        assert!(s.amplitude("XY").is_none());
    }

    #[test]
    fn state_validation() {
        assert!(PolarizationState::new([c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).is_err());
        let s = PolarizationState::normalized([c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-15);
        assert!(PolarizationState::normalized([c(0.0, 0.0); 4]).is_err());
    }

    #[test]
    fn density_validation() {
        assert!(DensityMatrix::new(Matrix4c::identity()).is_err());
        let mut m = Matrix4c::identity().scale(0.25);
        m[(0, 1)] = c(0.1, 0.0);
        assert!(DensityMatrix::new(m).is_err());
        // Hermitian, trace 1, but indefinite.
        let m = Matrix4c::from_diagonal(&Vector4::new(c(0.6, 0.0), c(0.5, 0.0), c(-0.05, 0.0), c(-0.05, 0.0)));
        assert!(matches!(DensityMatrix::new(m), Err(Error::NonPhysical(_))));
        let raw = DensityMatrix::new_unit_trace(m).unwrap();
        assert!(!raw.is_physical());
        let fixed = raw.project_physical();
        assert!(fixed.is_physical());
        assert!((fixed.eigenvalues()[3] - 0.55).abs() < 1e-12);
    }

    #[test]
    fn dephasing_examples() {
        let pure = bell_state().density();
        assert_eq!(dephasing_noise(&pure, 0.0).unwrap(), pure);
        let full = dephasing_noise(&pure, 1.0).unwrap();
        assert_eq!(full.matrix()[(1, 2)], c(0.0, 0.0));
        assert!((full.matrix()[(1, 1)].re - 0.5).abs() < 1e-15);
        assert!(dephasing_noise(&pure, 1.2).is_err());
        assert!(dephasing_noise(&pure, -0.1).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let s = bell_state();
        assert!((fidelity(&s.density(), &s) - 1.0).abs() < 1e-15);
        assert!((fidelity(&DensityMatrix::maximally_mixed(), &s) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn json_shape() {
        let v = serde_json::to_value(bell_state().density()).unwrap();
        assert_eq!(v["matrix"][1][2][0], -0.5000000000000001);
        assert_eq!(v["eigenvalues"].as_array().unwrap().len(), 4);
        let back: DensityMatrix = serde_json::from_value(v).unwrap();
        assert!(back.trace_distance(&bell_state().density()) < 1e-15);
    }

    fn random_state() -> impl Strategy<Value = DensityMatrix> {
        proptest::collection::vec(-1.0f64..1.0, 32).prop_map(|xs| {
            let g = Matrix4c::from_fn(|r, c| Complex64::new(xs[4 * r + c], xs[16 + 4 * r + c]));
            let m = g * g.adjoint();
            let tr = m.trace().re.max(1e-12);
            DensityMatrix::new(m.unscale(tr)).unwrap()
        })
    }

    proptest! {
        #[test]
        fn dephasing_keeps_states_physical(rho in random_state(), d in 0.0f64..=1.0) {
            let out = dephasing_noise(&rho, d).unwrap();
            prop_assert!(DensityMatrix::new(*out.matrix()).is_ok());
            for k in 0..4 {
                prop_assert!((out.matrix()[(k, k)] - rho.matrix()[(k, k)]).norm() < 1e-15);
            }
        }

        #[test]
        fn dephased_singlet_fidelity(d in 0.0f64..=1.0) {
            let rho = dephasing_noise(&bell_state().density(), d).unwrap();
            prop_assert!((fidelity(&rho, &bell_state()) - (1.0 - d / 2.0)).abs() < 1e-12);
        }

        #[test]
        fn fidelity_is_linear(a in random_state(), b in random_state(), w in 0.0f64..=1.0) {
            let t = bell_state();
            let mixed = a.mix(&b, w).unwrap();
            let lhs = fidelity(&mixed, &t);
            let rhs = w * fidelity(&a, &t) + (1.0 - w) * fidelity(&b, &t);
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn state_fidelity_reduces_to_pure_overlap(rho in random_state()) {
            let t = bell_state();
            prop_assert!((state_fidelity(&rho, &t.density()) - fidelity(&rho, &t)).abs() < 1e-7);
            prop_assert!((state_fidelity(&t.density(), &rho) - fidelity(&rho, &t)).abs() < 1e-7);
        }

        #[test]
        fn state_fidelity_with_itself(rho in random_state()) {
            prop_assert!((state_fidelity(&rho, &rho) - 1.0).abs() < 1e-7);
        }

        #[test]
        fn projection_is_idempotent_on_physical(rho in random_state()) {
            prop_assert!(rho.project_physical().trace_distance(&rho) < 1e-10);
        }
    }
}
