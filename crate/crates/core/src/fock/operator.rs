use super::{FockIndex, FockSpace, FockVector, Mode};
use crate::error::{Error, Result};
use crate::resonator::{amplitude_sum, PumpMixing, ResonatorConfig};
use num_complex::Complex64;
use std::collections::BTreeMap;

const HERMITIAN_TOL: f64 = 1e-12;

/// Square complex matrix over a [`FockSpace`] in compressed-row storage.
///
/// Rows hold their column indices in increasing order. Explicit zeros are
/// never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    space: FockSpace,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<Complex64>,
    hermitian: bool,
}

impl OperatorMatrix {
    pub fn zeros(space: FockSpace) -> Self {
        OperatorMatrix {
            space,
            row_ptr: vec![0; space.dim() + 1],
            cols: Vec::new(),
            values: Vec::new(),
            hermitian: true,
        }
    }

    pub fn identity(space: FockSpace) -> Self {
        let one = Complex64::new(1.0, 0.0);
        Self::from_triplets(space, (0..space.dim()).map(|i| (i, i, one)))
    }

    /// Assembles a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        space: FockSpace,
        triplets: impl IntoIterator<Item = (usize, usize, Complex64)>,
    ) -> Self {
        let dim = space.dim();
        let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); dim];
        for (r, c, v) in triplets {
            debug_assert!(r < dim && c < dim);
            rows[r].push((c, v));
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|&(c, _)| c);
            let mut iter = row.into_iter().peekable();
            while let Some((c, mut v)) = iter.next() {
                while let Some(&(c2, v2)) = iter.peek() {
                    if c2 != c {
                        break;
                    }
                    v += v2;
                    iter.next();
                }
                if v != Complex64::new(0.0, 0.0) {
                    cols.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        OperatorMatrix {
            space,
            row_ptr,
            cols,
            values,
            hermitian: false,
        }
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_flagged_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Sets the hermitian flag after checking `self == self^dagger` to 1e-12.
    pub fn into_hermitian(mut self) -> Result<Self> {
        let dev = self.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::invalid(format!(
                "operator deviates from its adjoint by {dev:.3e}"
            )));
        }
        self.hermitian = true;
        Ok(self)
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim()).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::from_triplets(
            self.space,
            self.triplets().map(|(r, c, v)| (c, r, v.conj())),
        );
        out.hermitian = self.hermitian;
        out
    }

    pub fn apply_slice(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.dim())
            .map(|r| self.row(r).map(|(c, a)| a * v[c]).sum())
            .collect()
    }

    pub fn apply(&self, v: &FockVector) -> Result<FockVector> {
        if v.space() != self.space {
            return Err(Error::invalid("operator and vector live in different spaces"));
        }
        FockVector::from_amplitudes(self.space, self.apply_slice(v.amplitudes()))
    }

    /// `a * self + b * other`.
    pub fn linear_combination(&self, a: Complex64, other: &Self, b: Complex64) -> Result<Self> {
        self.check_space(other)?;
        Ok(Self::from_triplets(
            self.space,
            self.triplets()
                .map(|(r, c, v)| (r, c, a * v))
                .chain(other.triplets().map(|(r, c, v)| (r, c, b * v))),
        ))
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        Self::from_triplets(self.space, self.triplets().map(|(r, c, v)| (r, c, a * v)))
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_space(other)?;
        let mut triplets = Vec::new();
        for r in 0..self.dim() {
            let mut acc: BTreeMap<usize, Complex64> = BTreeMap::new();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    *acc.entry(c).or_default() += a * b;
                }
            }
            triplets.extend(acc.into_iter().map(|(c, v)| (r, c, v)));
        }
        Ok(Self::from_triplets(self.space, triplets))
    }

    /// `[self, other] = self*other - other*self`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        let ab = self.matmul(other)?;
        let ba = other.matmul(self)?;
        ab.linear_combination(Complex64::new(1.0, 0.0), &ba, Complex64::new(-1.0, 0.0))
    }

    /// Largest `|M_rc - conj(M_cr)|`.
    pub fn hermitian_deviation(&self) -> f64 {
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Largest elementwise difference restricted to the given columns.
    pub fn max_abs_diff_on_columns(&self, other: &Self, columns: &[usize]) -> Result<f64> {
        self.check_space(other)?;
        let mut worst = 0.0f64;
        for &c in columns {
            let mut basis = vec![Complex64::new(0.0, 0.0); self.dim()];
            basis[c] = Complex64::new(1.0, 0.0);
            let x = self.apply_slice(&basis);
            let y = other.apply_slice(&basis);
            for (a, b) in x.iter().zip(&y) {
                worst = worst.max((a - b).norm());
            }
        }
        Ok(worst)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<Complex64> {
        let mut m = nalgebra::DMatrix::zeros(self.dim(), self.dim());
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    fn check_space(&self, other: &Self) -> Result<()> {
        if self.space != other.space {
            return Err(Error::invalid("operators live in different spaces"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderKind {
    Raise,
    Lower,
}

/// Creation or annihilation operator on one mode.
///
/// Raising out of the cutoff is dropped, so the top row of the creation
/// operator is zero.
pub fn ladder(space: FockSpace, mode: Mode, kind: LadderKind) -> OperatorMatrix {
    let slot = mode.slot();
    let cutoff = space.cutoff();
    let triplets = space.states().enumerate().filter_map(|(col, idx)| {
        let n = idx.occupations[slot];
        match kind {
            LadderKind::Raise if n < cutoff => {
                let mut target = idx;
                target.occupations[slot] += 1;
                let row = space.index_of(&target)?;
                Some((row, col, Complex64::new(((n + 1) as f64).sqrt(), 0.0)))
            }
            LadderKind::Lower if n > 0 => {
                let mut target = idx;
                target.occupations[slot] -= 1;
                let row = space.index_of(&target)?;
                Some((row, col, Complex64::new((n as f64).sqrt(), 0.0)))
            }
            _ => None,
        }
    });
    OperatorMatrix::from_triplets(space, triplets)
}

/// Action of `c^dagger_first c^dagger_second` on a basis state, if it stays in the space.
fn pair_step(space: &FockSpace, idx: &FockIndex, first: Mode, second: Mode) -> Option<(usize, f64)> {
    let (s1, s2) = (first.slot(), second.slot());
    debug_assert_ne!(s1, s2);
    let (n1, n2) = (idx.occupations[s1], idx.occupations[s2]);
    let mut target = *idx;
    target.occupations[s1] += 1;
    target.occupations[s2] += 1;
    let row = space.index_of(&target)?;
    Some((row, (((n1 + 1) * (n2 + 1)) as f64).sqrt()))
}

/// `c^dagger_first c^dagger_second` assembled directly, without a sparse product.
pub fn pair_creation(space: FockSpace, first: Mode, second: Mode) -> OperatorMatrix {
    OperatorMatrix::from_triplets(
        space,
        space.states().enumerate().filter_map(|(col, idx)| {
            pair_step(&space, &idx, first, second).map(|(row, w)| (row, col, Complex64::new(w, 0.0)))
        }),
    )
}

/// `L+ = aH^dagger bV^dagger - aV^dagger bH^dagger`.
pub fn build_l_plus(space: FockSpace) -> OperatorMatrix {
    pair_generator(space, Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0))
}

/// `L- = (L+)^dagger`.
pub fn build_l_minus(space: FockSpace) -> OperatorMatrix {
    build_l_plus(space).adjoint()
}

/// `L0 = [L-, L+] / 2`, built numerically so truncation effects near the
/// cutoff are visible.
pub fn build_l_zero(space: FockSpace) -> Result<OperatorMatrix> {
    let plus = build_l_plus(space);
    let minus = plus.adjoint();
    Ok(minus.commutator(&plus)?.scaled(Complex64::new(0.5, 0.0)))
}

/// `w_cw aH^dagger bV^dagger + w_ccw aV^dagger bH^dagger`.
fn pair_generator(space: FockSpace, w_cw: Complex64, w_ccw: Complex64) -> OperatorMatrix {
    let mut triplets = Vec::with_capacity(2 * space.dim());
    for (col, idx) in space.states().enumerate() {
        if w_cw != Complex64::new(0.0, 0.0) {
            if let Some((row, w)) = pair_step(&space, &idx, Mode::AH, Mode::BV) {
                triplets.push((row, col, w_cw * w));
            }
        }
        if w_ccw != Complex64::new(0.0, 0.0) {
            if let Some((row, w)) = pair_step(&space, &idx, Mode::AV, Mode::BH) {
                triplets.push((row, col, w_ccw * w));
            }
        }
    }
    OperatorMatrix::from_triplets(space, triplets)
}

/// Which pumping direction contributes to the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PumpBasis {
    /// Clockwise pump only: `A aH^dagger bV^dagger + h.c.`
    Cw,
    /// Counter-clockwise pump only: `A aV^dagger bH^dagger + h.c.`
    Ccw,
    /// Both directions with the default antisymmetric weights: `A L+ + A* L-`.
    Combined,
}

/// hbar-scaled generator `G` with `U = exp(-i tau G)`.
pub fn build_hamiltonian(
    cfg: &ResonatorConfig,
    basis: PumpBasis,
    space: FockSpace,
) -> OperatorMatrix {
    let mixing = match basis {
        PumpBasis::Cw => PumpMixing::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)),
        PumpBasis::Ccw => PumpMixing::new(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)),
        PumpBasis::Combined => PumpMixing::default(),
    };
    build_hamiltonian_mixed(cfg, mixing, space)
}

/// Generator for an arbitrary complex weighting of the two pump directions.
pub fn build_hamiltonian_mixed(
    cfg: &ResonatorConfig,
    mixing: PumpMixing,
    space: FockSpace,
) -> OperatorMatrix {
    let a = amplitude_sum(cfg.passes(), cfg.phi());
    let creation = pair_generator(space, a * mixing.cw, a * mixing.ccw);
    let annihilation = creation.adjoint();
    let one = Complex64::new(1.0, 0.0);
    let mut g = creation
        .linear_combination(one, &annihilation, one)
        .expect("same space");
    g.hermitian = true;
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn raise_and_lower_on_vacuum() {
        let space = FockSpace::new(3).unwrap();
        let vac = FockVector::vacuum(space);
        let up = ladder(space, Mode::AH, LadderKind::Raise);
        let once = up.apply(&vac).unwrap();
        assert_eq!(once.amplitude(FockIndex::new(1, 0, 0, 0)), c(1.0, 0.0));
        assert!((once.norm() - 1.0).abs() < 1e-15);
        let twice = up.apply(&once).unwrap();
        assert!((twice.amplitude(FockIndex::new(2, 0, 0, 0)).re - 2f64.sqrt()).abs() < 1e-15);
        let down = ladder(space, Mode::BV, LadderKind::Lower);
        assert_eq!(down.apply(&vac).unwrap().norm(), 0.0);
    }

    #[test]
    fn lower_is_adjoint_of_raise_and_top_row_is_empty() {
        let space = FockSpace::new(2).unwrap();
        for mode in Mode::ALL {
            let up = ladder(space, mode, LadderKind::Raise);
            let down = ladder(space, mode, LadderKind::Lower);
            assert_eq!(up.adjoint(), down);
            let top = FockVector::basis(space, {
                let mut idx = FockIndex::VACUUM;
                idx.occupations[mode.slot()] = 2;
                idx
            })
            .unwrap();
            assert_eq!(up.apply(&top).unwrap().norm(), 0.0);
        }
    }

    #[test]
    fn l_plus_on_vacuum() {
        let space = FockSpace::new(2).unwrap();
        let out = build_l_plus(space).apply(&FockVector::vacuum(space)).unwrap();
        assert_eq!(out.amplitude(FockIndex::new(1, 0, 0, 1)), c(1.0, 0.0));
        assert_eq!(out.amplitude(FockIndex::new(0, 1, 1, 0)), c(-1.0, 0.0));
        assert!((out.norm_sqr() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn l_plus_matches_ladder_products() {
        let space = FockSpace::new(2).unwrap();
        let r = |m| ladder(space, m, LadderKind::Raise);
        let a = r(Mode::AH).matmul(&r(Mode::BV)).unwrap();
        let b = r(Mode::AV).matmul(&r(Mode::BH)).unwrap();
        let expected = a.linear_combination(c(1.0, 0.0), &b, c(-1.0, 0.0)).unwrap();
        let all: Vec<usize> = (0..space.dim()).collect();
        assert!(build_l_plus(space).max_abs_diff_on_columns(&expected, &all).unwrap() < 1e-15);
        assert!(pair_creation(space, Mode::AH, Mode::BV).max_abs_diff_on_columns(&a, &all).unwrap() < 1e-15);
    }

    fn interior_columns(space: FockSpace) -> Vec<usize> {
        space
            .states()
            .enumerate()
            .filter(|(_, idx)| idx.total() + 2 <= space.cutoff())
            .map(|(p, _)| p)
            .collect()
    }

    #[test]
    fn su11_commutators_on_interior() {
        let space = FockSpace::new(4).unwrap();
        let plus = build_l_plus(space);
        let minus = build_l_minus(space);
        let zero = build_l_zero(space).unwrap();
        let cols = interior_columns(space);
        let one = c(1.0, 0.0);

        let lhs = zero.commutator(&plus).unwrap();
        assert!(lhs.max_abs_diff_on_columns(&plus, &cols).unwrap() < 1e-12);

        let lhs = zero.commutator(&minus).unwrap();
        let rhs = minus.scaled(c(-1.0, 0.0));
        assert!(lhs.max_abs_diff_on_columns(&rhs, &cols).unwrap() < 1e-12);

        let lhs = plus.commutator(&minus).unwrap();
        let rhs = zero.scaled(c(-2.0, 0.0));
        assert!(lhs.max_abs_diff_on_columns(&rhs, &cols).unwrap() < 1e-12);

        // L0 = N/2 + 1 away from the cutoff.
        let number = Mode::ALL
            .iter()
            .map(|&m| ladder(space, m, LadderKind::Raise).matmul(&ladder(space, m, LadderKind::Lower)).unwrap())
            .reduce(|x, y| x.linear_combination(one, &y, one).unwrap())
            .unwrap();
        let expected = number
            .scaled(c(0.5, 0.0))
            .linear_combination(one, &OperatorMatrix::identity(space), one)
            .unwrap();
        assert!(zero.max_abs_diff_on_columns(&expected, &cols).unwrap() < 1e-12);
    }

    #[test]
    fn l_zero_on_vacuum_is_one() {
        let space = FockSpace::new(2).unwrap();
        let vac = FockVector::vacuum(space);
        let out = build_l_zero(space).unwrap().apply(&vac).unwrap();
        assert!(out.max_abs_diff(&vac).unwrap() < 1e-15);
    }

    #[test]
    fn closure_fails_at_cutoff() {
        // Rows touching the cutoff break the su(1,1) relations.
        let space = FockSpace::new(2).unwrap();
        let plus = build_l_plus(space);
        let zero = build_l_zero(space).unwrap();
        let all: Vec<usize> = (0..space.dim()).collect();
        let lhs = zero.commutator(&plus).unwrap();
        assert!(lhs.max_abs_diff_on_columns(&plus, &all).unwrap() > 0.1);
    }

    #[test]
    fn hamiltonian_examples() {
        let space = FockSpace::new(2).unwrap();
        let plus = build_l_plus(space);
        let minus = plus.adjoint();
        let one = c(1.0, 0.0);
        let sum = plus.linear_combination(one, &minus, one).unwrap();

        let g1 = build_hamiltonian(&ResonatorConfig::new(1, 0.83, 0.0).unwrap(), PumpBasis::Combined, space);
        assert!(g1.is_flagged_hermitian());
        assert!(g1.hermitian_deviation() < 1e-12);
        assert!(g1.max_abs_diff_on_columns(&sum, &(0..81).collect::<Vec<_>>()).unwrap() < 1e-15);

        let g0 = build_hamiltonian(&ResonatorConfig::new(2, std::f64::consts::PI, 0.0).unwrap(), PumpBasis::Combined, space);
        assert!(g0.triplets().all(|(_, _, v)| v.norm() < 1e-15));

        let g2 = build_hamiltonian(&ResonatorConfig::new(2, 0.0, 0.0).unwrap(), PumpBasis::Combined, space);
        let twice = sum.scaled(c(2.0, 0.0));
        assert!(g2.max_abs_diff_on_columns(&twice, &(0..81).collect::<Vec<_>>()).unwrap() < 1e-15);
    }

    #[test]
    fn single_direction_generators() {
        let space = FockSpace::new(2).unwrap();
        let cfg = ResonatorConfig::new(1, 0.0, 0.0).unwrap();
        let vac = FockVector::vacuum(space);
        let cw = build_hamiltonian(&cfg, PumpBasis::Cw, space).apply(&vac).unwrap();
        assert_eq!(cw.amplitude(FockIndex::new(1, 0, 0, 1)), c(1.0, 0.0));
        assert_eq!(cw.amplitude(FockIndex::new(0, 1, 1, 0)), c(0.0, 0.0));
        let ccw = build_hamiltonian(&cfg, PumpBasis::Ccw, space).apply(&vac).unwrap();
        assert_eq!(ccw.amplitude(FockIndex::new(0, 1, 1, 0)), c(1.0, 0.0));
    }

    #[test]
    fn hermitian_flag_is_checked() {
        let space = FockSpace::new(1).unwrap();
        assert!(build_l_plus(space).into_hermitian().is_err());
        let g = build_hamiltonian(&ResonatorConfig::new(3, 0.4, 0.0).unwrap(), PumpBasis::Combined, space);
        assert!(g.into_hermitian().is_ok());
    }
}
