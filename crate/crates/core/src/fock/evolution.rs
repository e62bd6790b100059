//! `|Psi_out> = exp(-i tau G)|0>` by brute force, plus the closed-form
//! disentangled series it is checked against.

use super::operator::{build_hamiltonian, OperatorMatrix, PumpBasis};
use super::{FockIndex, FockSpace, FockVector};
use crate::error::{Error, Result};
use crate::resonator::ResonatorConfig;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::collections::VecDeque;

pub const DEFAULT_LEAKAGE_TOLERANCE: f64 = 1e-10;

/// Largest dimension accepted by [`EvolutionMethod::DenseFull`].
const DENSE_FULL_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvolutionMethod {
    /// Diagonalise the generator on the subspace connected to the vacuum.
    ///
    /// The connected component is found by graph search over the sparse
    /// matrix, so the restriction is exact for any generator.
    #[default]
    InvariantBlock,
    /// Diagonalise the generator on the whole truncated space. Small cutoffs only.
    DenseFull,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionOptions {
    pub leakage_tolerance: f64,
    pub method: EvolutionMethod,
}

impl Default for EvolutionOptions {
    fn default() -> Self {
        EvolutionOptions {
            leakage_tolerance: DEFAULT_LEAKAGE_TOLERANCE,
            method: EvolutionMethod::InvariantBlock,
        }
    }
}

impl EvolutionOptions {
    pub fn with_tolerance(leakage_tolerance: f64) -> Self {
        EvolutionOptions {
            leakage_tolerance,
            ..Default::default()
        }
    }
}

/// Output of an oracle evolution.
#[derive(Debug, Clone)]
pub struct Evolved {
    pub state: FockVector,
    /// Weight on basis states with some occupation at the cutoff.
    pub leakage: f64,
    /// Dimension of the matrix that was diagonalised.
    pub block_dim: usize,
}

/// Indices reachable from `start` through nonzero matrix entries, sorted.
fn connected_component(op: &OperatorMatrix, start: usize) -> Vec<usize> {
    let mut seen = vec![false; op.dim()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    let mut members = Vec::new();
    while let Some(r) = queue.pop_front() {
        members.push(r);
        for (c, _) in op.row(r) {
            if !seen[c] {
                seen[c] = true;
                queue.push_back(c);
            }
        }
    }
    members.sort_unstable();
    members
}

/// `exp(-i tau H) e_start` for a dense Hermitian `H`, by eigendecomposition.
fn expm_apply_hermitian(h: DMatrix<Complex64>, tau: f64, start: usize) -> DVector<Complex64> {
    let n = h.nrows();
    let eig = h.symmetric_eigen();
    let v = &eig.eigenvectors;
    let coeffs = DVector::from_fn(n, |k, _| {
        let phase = Complex64::from_polar(1.0, -tau * eig.eigenvalues[k]);
        phase * v[(start, k)].conj()
    });
    v * coeffs
}

/// Applies `exp(-i tau G)` to the vacuum for a Hermitian generator `G`.
pub fn evolve_generator(
    generator: &OperatorMatrix,
    tau: f64,
    opts: &EvolutionOptions,
) -> Result<Evolved> {
    if !generator.is_flagged_hermitian() {
        return Err(Error::invalid("generator must carry the hermitian flag"));
    }
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::invalid(format!("tau must be finite and >= 0, got {tau}")));
    }
    let space = generator.space();
    let mut state = FockVector::zeros(space);

    let members: Vec<usize> = match opts.method {
        EvolutionMethod::InvariantBlock => connected_component(generator, 0),
        EvolutionMethod::DenseFull => {
            if space.dim() > DENSE_FULL_LIMIT {
                return Err(Error::invalid(format!(
                    "dense evolution limited to dimension {DENSE_FULL_LIMIT}, got {}",
                    space.dim()
                )));
            }
            (0..space.dim()).collect()
        }
    };
    let block_dim = members.len();
    let mut local = vec![usize::MAX; space.dim()];
    for (k, &g) in members.iter().enumerate() {
        local[g] = k;
    }
    let mut h = DMatrix::<Complex64>::zeros(block_dim, block_dim);
    for (k, &g) in members.iter().enumerate() {
        for (c, v) in generator.row(g) {
            let j = local[c];
            debug_assert!(j != usize::MAX, "component must be closed under the generator");
            h[(k, j)] = v;
        }
    }
    let start = local[0];
    let psi = expm_apply_hermitian(h, tau, start);
    for (k, &g) in members.iter().enumerate() {
        state.amplitudes_mut()[g] = psi[k];
    }

    let leakage = state.boundary_weight();
    if leakage > opts.leakage_tolerance {
        return Err(Error::Truncation {
            leakage,
            tolerance: opts.leakage_tolerance,
            cutoff: space.cutoff(),
        });
    }
    Ok(Evolved {
        state,
        leakage,
        block_dim,
    })
}

/// Brute-force output state of the resonator for both pump directions.
pub fn evolve_oracle(
    cfg: &ResonatorConfig,
    cutoff: usize,
    opts: &EvolutionOptions,
) -> Result<Evolved> {
    let space = FockSpace::new(cutoff)?;
    let generator = build_hamiltonian(cfg, PumpBasis::Combined, space);
    evolve_generator(&generator, cfg.tau(), opts)
}

/// Disentangled series for `exp(-i (A tau) L+ - i (A tau)* L-)|0>`:
///
/// `cosh^-2 r * sum_n (-i e^{i theta} tanh r)^n sum_l (-1)^l |n-l, l; l, n-l>`
///
/// with `A tau = r e^{i theta}`. Every term representable below the cutoff
/// is kept, i.e. `n` runs to `2 * cutoff`.
pub fn disentangled_state(a_tau: Complex64, cutoff: usize) -> Result<FockVector> {
    let space = FockSpace::new(cutoff)?;
    let (r, theta) = a_tau.to_polar();
    let ratio = Complex64::new(0.0, -1.0) * Complex64::from_polar(r.tanh(), theta);
    let norm = 1.0 / r.cosh().powi(2);
    let mut state = FockVector::zeros(space);
    let mut coeff = Complex64::new(norm, 0.0);
    for n in 0..=2 * cutoff {
        let lo = n.saturating_sub(cutoff);
        let hi = n.min(cutoff);
        for l in lo..=hi {
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            state.set(FockIndex::new(n - l, l, l, n - l), coeff * sign)?;
        }
        coeff *= ratio;
    }
    Ok(state)
}

/// `|Phi_M^-> = (M+1)^{-1/2} sum_k (-1)^k |M-k, k; k, M-k>`.
pub fn entangled_state(m: usize, space: FockSpace) -> Result<FockVector> {
    if m == 0 {
        return Err(Error::invalid("M must be at least 1"));
    }
    if m > space.cutoff() {
        return Err(Error::invalid(format!(
            "M = {m} needs per-mode cutoff >= {m}, have {}",
            space.cutoff()
        )));
    }
    let amp = 1.0 / ((m + 1) as f64).sqrt();
    let mut state = FockVector::zeros(space);
    for k in 0..=m {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        state.set(FockIndex::new(m - k, k, k, m - k), Complex64::new(sign * amp, 0.0))?;
    }
    Ok(state)
}

/// `<Phi_M^-|state>`.
pub fn project_entangled(state: &FockVector, m: usize) -> Result<Complex64> {
    let target = entangled_state(m, state.space())?;
    target.inner(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::build_l_plus;
    use crate::resonator::pair_probability_exact;
    use std::f64::consts::PI;

    fn cfg(n: usize, phi: f64, tau: f64) -> ResonatorConfig {
        ResonatorConfig::new(n, phi, tau).unwrap()
    }

    #[test]
    fn zero_tau_is_vacuum() {
        let out = evolve_oracle(&cfg(3, 0.2, 0.0), 3, &Default::default()).unwrap();
        let vac = FockVector::vacuum(out.state.space());
        assert!(out.state.max_abs_diff(&vac).unwrap() < 1e-14);
        assert!((out.state.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn double_pass_pair_probability() {
        let c = cfg(2, 0.0, 0.01);
        let out = evolve_oracle(&c, 4, &Default::default()).unwrap();
        let p = project_entangled(&out.state, 1).unwrap().norm_sqr();
        assert!((p - pair_probability_exact(1, &c).unwrap()).abs() < 1e-12);
        // 2 tau^2 N^2 = 8e-4 is the leading-order value; the exact result sits
        // 0.1066 % below it because of the cosh^-4 and tanh corrections.
        let rel = (8.0e-4 - p) / 8.0e-4;
        assert!((rel - 1.0659e-3).abs() < 1e-6, "rel = {rel}");
    }

    #[test]
    fn oracle_is_unitary() {
        for &(n, phi, tau) in &[(1, 0.0, 0.05), (3, 0.3, 0.02), (10, PI / 2.0, 0.05), (5, PI, 0.05)] {
            let out = evolve_oracle(&cfg(n, phi, tau), 8, &Default::default()).unwrap();
            assert!((out.state.norm_sqr() - 1.0).abs() < 1e-10 + out.leakage);
        }
    }

    #[test]
    fn block_method_matches_dense_full() {
        let c = cfg(3, 0.7, 0.15);
        let dense = EvolutionOptions {
            leakage_tolerance: 1.0,
            method: EvolutionMethod::DenseFull,
        };
        let block = EvolutionOptions {
            leakage_tolerance: 1.0,
            ..Default::default()
        };
        let a = evolve_oracle(&c, 3, &dense).unwrap();
        let b = evolve_oracle(&c, 3, &block).unwrap();
        assert_eq!(a.block_dim, 256);
        assert_eq!(b.block_dim, 16);
        assert!(a.state.max_abs_diff(&b.state).unwrap() < 1e-12);
        assert!((a.leakage - b.leakage).abs() < 1e-14);
    }

    #[test]
    fn dense_full_rejects_large_spaces() {
        let opts = EvolutionOptions {
            method: EvolutionMethod::DenseFull,
            ..Default::default()
        };
        assert!(evolve_oracle(&cfg(1, 0.0, 0.01), 8, &opts).is_err());
    }

    #[test]
    fn truncation_error_reports_leakage() {
        match evolve_oracle(&cfg(10, 0.0, 0.1), 2, &Default::default()) {
            Err(Error::Truncation { leakage, cutoff, .. }) => {
                assert!(leakage > 1e-10);
                assert_eq!(cutoff, 2);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn disentangled_examples() {
        let vac = disentangled_state(Complex64::new(0.0, 0.0), 3).unwrap();
        assert!(vac.max_abs_diff(&FockVector::vacuum(vac.space())).unwrap() < 1e-15);

        let x: f64 = 0.13;
        let s = disentangled_state(Complex64::new(x, 0.0), 3).unwrap();
        let expected = Complex64::new(0.0, -x.tanh()) / x.cosh().powi(2);
        assert!((s.amplitude(FockIndex::new(1, 0, 0, 1)) - expected).norm() < 1e-15);
        assert!((s.amplitude(FockIndex::new(0, 1, 1, 0)) + expected).norm() < 1e-15);
    }

    #[test]
    fn disentangled_matches_oracle() {
        for &(n, phi, tau) in &[(2usize, 0.0, 0.05), (3, 0.3, 0.04), (5, PI / 2.0, 0.03), (1, 1.0, 0.2)] {
            let c = cfg(n, phi, tau);
            let out = evolve_oracle(&c, 12, &Default::default()).unwrap();
            let series = disentangled_state(c.coupling(), 12).unwrap();
            assert!(out.state.max_abs_diff(&series).unwrap() < 1e-8);
        }
    }

    #[test]
    fn entangled_projection_examples() {
        let space = FockSpace::new(3).unwrap();
        let pair = build_l_plus(space)
            .apply(&FockVector::vacuum(space))
            .unwrap();
        let mut pair = pair;
        pair.scale(Complex64::new(1.0 / 2f64.sqrt(), 0.0));
        assert!((project_entangled(&pair, 1).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(
            project_entangled(&FockVector::vacuum(space), 1).unwrap(),
            Complex64::new(0.0, 0.0)
        );
        assert!(project_entangled(&pair, 4).is_err());
        assert!(project_entangled(&pair, 0).is_err());
        for m in 1..=3 {
            assert!((entangled_state(m, space).unwrap().norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn entangled_projections_match_closed_form() {
        let c = cfg(3, 0.3, 0.05);
        let out = evolve_oracle(&c, 10, &Default::default()).unwrap();
        let mut total = out.state.amplitude(FockIndex::VACUUM).norm_sqr();
        for m in 1..=10 {
            let p = project_entangled(&out.state, m).unwrap().norm_sqr();
            assert!((p - pair_probability_exact(m, &c).unwrap()).abs() < 1e-8);
            total += p;
        }
        assert!(total <= 1.0 + 1e-12);
        assert!(total > 1.0 - 1e-9);
    }

    #[test]
    fn increasing_cutoff_converges() {
        let c = cfg(5, 0.3, 0.05);
        let opts = EvolutionOptions::default();
        let mut prev = None;
        for cutoff in [10, 12, 14] {
            let out = evolve_oracle(&c, cutoff, &opts).unwrap();
            let p = project_entangled(&out.state, 2).unwrap().norm_sqr();
            if let Some(q) = prev {
                let delta: f64 = p - q;
                assert!(delta.abs() < opts.leakage_tolerance);
            }
            prev = Some(p);
        }
    }
}
