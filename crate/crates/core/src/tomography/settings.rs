use crate::error::{Error, Result};
use crate::polarization::{ArmSetting, Matrix4c, MeasurementSetting};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt;
use std::str::FromStr;

/// Single-arm analyzer basis states.
///
/// The circular analyzers use a quarter-wave plate with its fast axis
/// horizontal; `R` then passes `(H - iV)/sqrt 2` and `L` passes `(H + iV)/sqrt 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AnalyzerBasis {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl AnalyzerBasis {
    pub const ALL: [AnalyzerBasis; 6] = [Self::H, Self::V, Self::D, Self::A, Self::R, Self::L];

    pub fn arm_setting(self) -> ArmSetting {
        match self {
            AnalyzerBasis::H => ArmSetting::polarizer(0.0),
            AnalyzerBasis::V => ArmSetting::polarizer(FRAC_PI_2),
            AnalyzerBasis::D => ArmSetting::polarizer(FRAC_PI_4),
            AnalyzerBasis::A => ArmSetting::polarizer(-FRAC_PI_4),
            AnalyzerBasis::R => ArmSetting::with_qwp(FRAC_PI_4, 0.0),
            AnalyzerBasis::L => ArmSetting::with_qwp(-FRAC_PI_4, 0.0),
        }
    }
}

impl fmt::Display for AnalyzerBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for AnalyzerBasis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown analyzer basis {s:?}")))
    }
}

/// Default per-arm analyzer set.
pub const DEFAULT_BASES: [AnalyzerBasis; 4] =
    [AnalyzerBasis::H, AnalyzerBasis::V, AnalyzerBasis::D, AnalyzerBasis::R];

/// Product settings `bases x bases`, arm `a` varying slowest.
pub fn product_settings(bases: &[AnalyzerBasis]) -> Result<Vec<MeasurementSetting>> {
    let settings: Vec<MeasurementSetting> = bases
        .iter()
        .flat_map(|&a| bases.iter().map(move |&b| MeasurementSetting::new(a.arm_setting(), b.arm_setting())))
        .collect();
    if !is_informationally_complete(&settings) {
        return Err(Error::invalid(format!(
            "analyzer set {bases:?} is not informationally complete"
        )));
    }
    Ok(settings)
}

/// The 16 settings built from [`DEFAULT_BASES`]; the first is `HH`.
pub fn standard_settings() -> Vec<MeasurementSetting> {
    product_settings(&DEFAULT_BASES).expect("default analyzer set is complete")
}

/// Rank of the Gram matrix `Tr(Pi_i Pi_j)` of the coincidence operators.
pub fn gram_rank(settings: &[MeasurementSetting]) -> usize {
    let ops: Vec<Matrix4c> = settings.iter().map(MeasurementSetting::coincidence_operator).collect();
    let n = ops.len();
    if n == 0 {
        return 0;
    }
    let gram = DMatrix::from_fn(n, n, |i, j| (ops[i] * ops[j]).trace().re);
    let eig = gram.symmetric_eigen();
    let largest = eig.eigenvalues.amax();
    eig.eigenvalues.iter().filter(|&&v| v > 1e-10 * largest).count()
}

/// True when the coincidence operators span all two-qubit Hermitian operators.
pub fn is_informationally_complete(settings: &[MeasurementSetting]) -> bool {
    gram_rank(settings) == 16
}
