//! Two-qubit state tomography from coincidence counts.
//!
//! A record holds one count per product analyzer setting. Reconstruction is
//! available by linear inversion, which may return a slightly non-physical
//! matrix, and by Poisson maximum likelihood over physical states.

mod mle;
mod settings;

pub use crate::polarization::{fidelity, state_fidelity};
pub use mle::{reconstruct_mle, MleOptions};
pub use settings::{
    gram_rank, is_informationally_complete, product_settings, standard_settings, AnalyzerBasis,
    DEFAULT_BASES,
};

use crate::error::{Error, Result};
use crate::polarization::{coincidence_probability, ArmSetting, DensityMatrix, Matrix4c, MeasurementSetting};
use crate::rng::{poisson_count, seeded};
use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Number of settings in a record.
pub const SETTINGS_PER_RECORD: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EntryRepr", into = "EntryRepr")]
pub struct TomographyEntry {
    pub setting: MeasurementSetting,
    pub counts: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryRepr {
    arm_a: ArmSetting,
    arm_b: ArmSetting,
    counts: f64,
}

impl TryFrom<EntryRepr> for TomographyEntry {
    type Error = Error;
    fn try_from(r: EntryRepr) -> Result<Self> {
        if !r.counts.is_finite() || r.counts < 0.0 {
            return Err(Error::invalid(format!("counts must be finite and non-negative, got {}", r.counts)));
        }
        Ok(TomographyEntry {
            setting: MeasurementSetting::new(r.arm_a, r.arm_b),
            counts: r.counts,
        })
    }
}

impl From<TomographyEntry> for EntryRepr {
    fn from(e: TomographyEntry) -> Self {
        EntryRepr {
            arm_a: e.setting.arm_a,
            arm_b: e.setting.arm_b,
            counts: e.counts,
        }
    }
}

/// Sixteen informationally complete settings with their counts.
///
/// Counts are real so that noiseless expected records can be represented;
/// sampled records hold integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<TomographyEntry>", into = "Vec<TomographyEntry>")]
pub struct TomographyRecord {
    entries: Vec<TomographyEntry>,
}

impl TryFrom<Vec<TomographyEntry>> for TomographyRecord {
    type Error = Error;
    fn try_from(entries: Vec<TomographyEntry>) -> Result<Self> {
        TomographyRecord::new(entries)
    }
}

impl From<TomographyRecord> for Vec<TomographyEntry> {
    fn from(r: TomographyRecord) -> Self {
        r.entries
    }
}

impl TomographyRecord {
    pub fn new(entries: Vec<TomographyEntry>) -> Result<Self> {
        if entries.len() != SETTINGS_PER_RECORD {
            return Err(Error::invalid(format!(
                "record needs exactly {SETTINGS_PER_RECORD} settings, got {}",
                entries.len()
            )));
        }
        for e in &entries {
            e.setting.arm_a.validate()?;
            e.setting.arm_b.validate()?;
            if !e.counts.is_finite() || e.counts < 0.0 {
                return Err(Error::invalid("counts must be finite and non-negative"));
            }
        }
        let settings: Vec<MeasurementSetting> = entries.iter().map(|e| e.setting).collect();
        if !is_informationally_complete(&settings) {
            return Err(Error::invalid("record settings are not informationally complete"));
        }
        Ok(TomographyRecord { entries })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn entries(&self) -> &[TomographyEntry] {
        &self.entries
    }

    pub fn total_counts(&self) -> f64 {
        self.entries.iter().map(|e| e.counts).sum()
    }

    /// Expected counts `shots Tr(rho Pi_i)`.
    pub fn expected(rho: &DensityMatrix, settings: &[MeasurementSetting], shots: f64) -> Result<Self> {
        check_shots(shots)?;
        let entries = settings
            .iter()
            .map(|&setting| {
                Ok(TomographyEntry {
                    setting,
                    counts: shots * coincidence_probability(rho, &setting)?,
                })
            })
            .collect::<Result<_>>()?;
        Self::new(entries)
    }
}

fn check_shots(shots: f64) -> Result<()> {
    if !(shots > 0.0) || !shots.is_finite() {
        return Err(Error::invalid(format!("shots must be positive, got {shots}")));
    }
    Ok(())
}

/// Poisson counts of mean `shots Tr(rho Pi_i)` for the standard settings.
pub fn simulate_tomography(rho: &DensityMatrix, shots: f64, seed: u64) -> Result<TomographyRecord> {
    simulate_tomography_with(rho, &standard_settings(), shots, seed)
}

pub fn simulate_tomography_with(
    rho: &DensityMatrix,
    settings: &[MeasurementSetting],
    shots: f64,
    seed: u64,
) -> Result<TomographyRecord> {
    let expected = TomographyRecord::expected(rho, settings, shots)?;
    let mut rng = seeded(seed);
    let entries = expected
        .entries
        .iter()
        .map(|e| TomographyEntry {
            setting: e.setting,
            counts: poisson_count(&mut rng, e.counts) as f64,
        })
        .collect();
    TomographyRecord::new(entries)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Linear,
    Mle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReconstructionResult {
    pub rho: DensityMatrix,
    pub method: Method,
    /// Profile Poisson log-likelihood; set for maximum likelihood only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_likelihood: Option<f64>,
    pub iterations: usize,
    pub min_eigenvalue: f64,
    /// The estimate has an eigenvalue below `-1e-10`.
    pub negative_eigenvalue: bool,
}

impl ReconstructionResult {
    fn new(rho: DensityMatrix, method: Method, log_likelihood: Option<f64>, iterations: usize) -> Self {
        let min_eigenvalue = rho.min_eigenvalue();
        ReconstructionResult {
            rho,
            method,
            log_likelihood,
            iterations,
            min_eigenvalue,
            negative_eigenvalue: !rho.is_physical(),
        }
    }
}

fn pauli(k: usize) -> Matrix2<Complex64> {
    let (o, l, i) = (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0));
    match k {
        0 => Matrix2::new(l, o, o, l),
        1 => Matrix2::new(o, l, l, o),
        2 => Matrix2::new(o, -i, i, o),
        _ => Matrix2::new(l, o, o, -l),
    }
}

/// `sigma_j (x) sigma_k` with `mu = 4 j + k`.
fn pauli_product(mu: usize) -> Matrix4c {
    pauli(mu / 4).kronecker(&pauli(mu % 4))
}

/// Linear inversion of `n_i = I Tr(rho Pi_i)` in the two-qubit Pauli basis,
/// with the unknown intensity `I` removed by normalising the identity
/// component. The estimate is Hermitian with unit trace but may have negative
/// eigenvalues.
pub fn reconstruct_linear(record: &TomographyRecord) -> Result<ReconstructionResult> {
    let ops: Vec<Matrix4c> = record.entries.iter().map(|e| e.setting.coincidence_operator()).collect();
    let paulis: Vec<Matrix4c> = (0..16).map(pauli_product).collect();
    let design = DMatrix::from_fn(ops.len(), 16, |i, mu| 0.25 * (paulis[mu] * ops[i]).trace().re);
    let counts = DVector::from_iterator(ops.len(), record.entries.iter().map(|e| e.counts));
    let svd = design.svd(true, true);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    if !(smin > 1e-12 * smax) {
        return Err(Error::Singular(format!("design matrix condition {:.3e}", smax / smin)));
    }
    let coeffs = svd.solve(&counts, 0.0).map_err(|e| Error::Singular(e.to_string()))?;
    let intensity = coeffs[0];
    if !(intensity > 0.0) {
        return Err(Error::Undefined(format!("reconstructed intensity {intensity:.3e} is not positive")));
    }
    let mut m = Matrix4c::zeros();
    for (mu, p) in paulis.iter().enumerate() {
        m += p.scale(0.25 * coeffs[mu] / intensity);
    }
    let m = (m + m.adjoint()).scale(0.5);
    let tr = m.trace().re;
    let rho = DensityMatrix::new_unit_trace(m.unscale(tr))?;
    Ok(ReconstructionResult::new(rho, Method::Linear, None, 0))
}

/// Poisson log-likelihood of `record` under `rho` with the intensity set to its
/// maximising value `sum n / sum p`. Constant `ln n!` terms are omitted.
/// A setting with counts but zero probability gives `-inf`.
pub fn log_likelihood(record: &TomographyRecord, rho: &DensityMatrix) -> f64 {
    let probs: Vec<f64> = record
        .entries
        .iter()
        .map(|e| rho.expectation(&e.setting.coincidence_operator()).max(0.0))
        .collect();
    let total_p: f64 = probs.iter().sum();
    let total_n = record.total_counts();
    if total_n == 0.0 {
        return 0.0;
    }
    if total_p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let intensity = total_n / total_p;
    record
        .entries
        .iter()
        .zip(&probs)
        .map(|(e, &p)| {
            let mean = intensity * p;
            if e.counts == 0.0 {
                -mean
            } else if mean <= 0.0 {
                f64::NEG_INFINITY
            } else {
                e.counts * mean.ln() - mean
            }
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polarization::{bell_state, dephasing_noise};
    use proptest::prelude::*;

    pub(crate) fn random_state(seed: [f64; 32]) -> DensityMatrix {
        let g = Matrix4c::from_fn(|r, c| Complex64::new(seed[4 * r + c], seed[16 + 4 * r + c]));
        let m = g * g.adjoint();
        let m = (m + m.adjoint()).scale(0.5);
        let tr = m.trace().re;
        DensityMatrix::new(m.unscale(tr)).unwrap()
    }

    #[test]
    fn expected_counts() {
        let mixed = TomographyRecord::expected(&DensityMatrix::maximally_mixed(), &standard_settings(), 1000.0).unwrap();
        assert!(mixed.entries().iter().all(|e| (e.counts - 250.0).abs() < 1e-9));
        let bell = TomographyRecord::expected(&bell_state().density(), &standard_settings(), 1000.0).unwrap();
        assert!(bell.entries()[0].counts.abs() < 1e-12);
    }

    #[test]
    fn record_validation() {
        let good = TomographyRecord::expected(&DensityMatrix::maximally_mixed(), &standard_settings(), 10.0).unwrap();
        let mut entries = good.entries().to_vec();
        entries.pop();
        assert!(TomographyRecord::new(entries.clone()).is_err());
        entries.push(entries[0]);
        assert!(TomographyRecord::new(entries).is_err());
        assert!(TomographyRecord::expected(&DensityMatrix::maximally_mixed(), &standard_settings(), 0.0).is_err());
    }

    #[test]
    fn json_round_trip_and_schema_errors() {
        let rec = simulate_tomography(&bell_state().density(), 500.0, 2).unwrap();
        let text = serde_json::to_string_pretty(&rec).unwrap();
        assert!(text.contains("pol_deg") && text.contains("counts"));
        let back = TomographyRecord::from_json(&text).unwrap();
        for (a, b) in rec.entries().iter().zip(back.entries()) {
            assert_eq!(a.counts, b.counts);
            assert!((a.setting.arm_a.pol - b.setting.arm_a.pol).abs() < 1e-15);
        }
        // The HH entry of a singlet record is zero.
        let broken = text.replacen("\"counts\": 0", "\"counts\": -3", 1);
        match TomographyRecord::from_json(&broken) {
            Err(Error::Schema { line, .. }) => assert!(line > 1),
            other => panic!("{other:?}"),
        }
        let unknown = text.replacen("\"counts\"", "\"count\"", 1);
        assert!(matches!(TomographyRecord::from_json(&unknown), Err(Error::Schema { .. })));
    }

    #[test]
    fn simulation_is_seeded() {
        let rho = bell_state().density();
        assert_eq!(simulate_tomography(&rho, 1e3, 1).unwrap(), simulate_tomography(&rho, 1e3, 1).unwrap());
        assert_ne!(simulate_tomography(&rho, 1e3, 1).unwrap(), simulate_tomography(&rho, 1e3, 2).unwrap());
    }

    #[test]
    fn frequencies_converge_like_inverse_sqrt_shots() {
        let rho = dephasing_noise(&bell_state().density(), 0.2).unwrap();
        let settings = standard_settings();
        for shots in [1e3, 1e5, 1e7] {
            let rec = simulate_tomography(&rho, shots, 17).unwrap();
            for e in rec.entries() {
                let p = coincidence_probability(&rho, &e.setting).unwrap();
                let sigma = (p / shots).sqrt().max(1.0 / shots);
                assert!((e.counts / shots - p).abs() < 5.0 * sigma, "{shots} {p} {}", e.counts);
            }
            assert_eq!(rec.entries().len(), settings.len());
        }
    }

    #[test]
    fn linear_inversion_of_maximally_mixed() {
        let rec = TomographyRecord::expected(&DensityMatrix::maximally_mixed(), &standard_settings(), 4e4).unwrap();
        let r = reconstruct_linear(&rec).unwrap();
        assert!((r.rho.matrix() - DensityMatrix::maximally_mixed().matrix()).camax() < 1e-12);
        assert_eq!(r.method, Method::Linear);
        assert!(!r.negative_eigenvalue);
    }

    #[test]
    fn linear_flags_negative_eigenvalues() {
        let rho = bell_state().density();
        let flagged = (0..20)
            .map(|seed| reconstruct_linear(&simulate_tomography(&rho, 200.0, seed).unwrap()).unwrap())
            .inspect(|r| {
                let tr = r.rho.matrix().trace();
                assert!((tr.re - 1.0).abs() < 1e-12 && tr.im.abs() < 1e-12);
                assert!((r.rho.matrix() - r.rho.matrix().adjoint()).camax() < 1e-15);
            })
            .filter(|r| r.negative_eigenvalue)
            .count();
        assert!(flagged > 0);
    }

    #[test]
    fn likelihood_examples() {
        let rho = bell_state().density();
        let rec = TomographyRecord::expected(&rho, &standard_settings(), 100.0).unwrap();
        let at_truth = log_likelihood(&rec, &rho);
        assert!(at_truth > log_likelihood(&rec, &DensityMatrix::maximally_mixed()));
        let hh = DensityMatrix::new(Matrix4c::from_fn(|r, c| Complex64::new((r == 0 && c == 0) as u8 as f64, 0.0))).unwrap();
        assert!(log_likelihood(&rec, &hh) < at_truth - 1e3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn linear_inversion_is_exact(seed in prop::array::uniform32(-1.0f64..1.0)) {
            let rho = random_state(seed);
            let rec = TomographyRecord::expected(&rho, &standard_settings(), 1e4).unwrap();
            let r = reconstruct_linear(&rec).unwrap();
            prop_assert!((r.rho.matrix() - rho.matrix()).camax() < 1e-10);
        }
    }
}
