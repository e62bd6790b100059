//! Truncated four-mode bosonic Fock space.
//!
//! Modes are ordered `aH, aV, bH, bV`. Each occupation number is bounded by a
//! per-mode cutoff `c`, so the space has dimension `(c + 1)^4`. Basis states
//! are enumerated lexicographically in `(n_aH, n_aV, n_bH, n_bV)`; this order
//! is part of the serialized format of [`FockVector`].

mod evolution;
mod operator;
mod vector;

pub use evolution::{
    disentangled_state, entangled_state, evolve_generator, evolve_oracle, project_entangled,
    EvolutionMethod, EvolutionOptions, Evolved, DEFAULT_LEAKAGE_TOLERANCE,
};
pub use operator::{
    build_hamiltonian, build_hamiltonian_mixed, build_l_minus, build_l_plus, build_l_zero,
    ladder, pair_creation, LadderKind, OperatorMatrix, PumpBasis,
};
pub use vector::{FockVector, ENUMERATION_ORDER};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// One of the four output modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "aH")]
    AH,
    #[serde(rename = "aV")]
    AV,
    #[serde(rename = "bH")]
    BH,
    #[serde(rename = "bV")]
    BV,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::AH, Mode::AV, Mode::BH, Mode::BV];

    /// Position of the mode inside a [`FockIndex`].
    pub fn slot(self) -> usize {
        match self {
            Mode::AH => 0,
            Mode::AV => 1,
            Mode::BH => 2,
            Mode::BV => 3,
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aH" => Ok(Mode::AH),
            "aV" => Ok(Mode::AV),
            "bH" => Ok(Mode::BH),
            "bV" => Ok(Mode::BV),
            other => Err(Error::invalid(format!("unknown mode tag {other:?}"))),
        }
    }
}

/// Occupation numbers `|n_aH, n_aV; n_bH, n_bV>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FockIndex {
    pub occupations: [usize; 4],
}

impl FockIndex {
    pub const VACUUM: FockIndex = FockIndex {
        occupations: [0; 4],
    };

    pub fn new(n_ah: usize, n_av: usize, n_bh: usize, n_bv: usize) -> Self {
        FockIndex {
            occupations: [n_ah, n_av, n_bh, n_bv],
        }
    }

    pub fn get(&self, mode: Mode) -> usize {
        self.occupations[mode.slot()]
    }

    pub fn total(&self) -> usize {
        self.occupations.iter().sum()
    }
}

impl fmt::Display for FockIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.occupations;
        write!(f, "|{a},{b};{c},{d}>")
    }
}

/// The truncated space with a fixed per-mode cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockSpace {
    cutoff: usize,
    dim: usize,
}

impl FockSpace {
    /// Builds the enumeration for per-mode occupations `0..=cutoff`.
    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff == 0 {
            return Err(Error::invalid(
                "cutoff must be at least 1 to hold a photon pair",
            ));
        }
        let side = cutoff + 1;
        let dim = side
            .checked_pow(4)
            .ok_or_else(|| Error::invalid(format!("cutoff {cutoff} overflows the index space")))?;
        Ok(FockSpace { cutoff, dim })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn contains(&self, idx: &FockIndex) -> bool {
        idx.occupations.iter().all(|&n| n <= self.cutoff)
    }

    /// Lexicographic position of `idx`, or `None` when an occupation exceeds the cutoff.
    pub fn index_of(&self, idx: &FockIndex) -> Option<usize> {
        if !self.contains(idx) {
            return None;
        }
        let side = self.cutoff + 1;
        Some(
            idx.occupations
                .iter()
                .fold(0usize, |acc, &n| acc * side + n),
        )
    }

    pub fn state_at(&self, mut position: usize) -> FockIndex {
        debug_assert!(position < self.dim);
        let side = self.cutoff + 1;
        let mut occ = [0usize; 4];
        for slot in (0..4).rev() {
            occ[slot] = position % side;
            position /= side;
        }
        FockIndex { occupations: occ }
    }

    pub fn states(&self) -> impl Iterator<Item = FockIndex> + '_ {
        (0..self.dim).map(move |p| self.state_at(p))
    }

    /// True when some mode sits at the cutoff.
    pub fn on_boundary(&self, idx: &FockIndex) -> bool {
        idx.occupations.contains(&self.cutoff)
    }
}

/// Convenience wrapper returning the enumeration and its dimension.
pub fn build_space(cutoff: usize) -> Result<(FockSpace, usize)> {
    let space = FockSpace::new(cutoff)?;
    let dim = space.dim();
    Ok((space, dim))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        assert_eq!(build_space(1).unwrap().1, 16);
        assert_eq!(build_space(2).unwrap().1, 81);
        assert_eq!(build_space(3).unwrap().1, 256);
    }

    #[test]
    fn zero_cutoff_rejected() {
        assert!(matches!(
            FockSpace::new(0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn enumeration_is_bijective_and_lexicographic() {
        let space = FockSpace::new(3).unwrap();
        let mut prev: Option<FockIndex> = None;
        for (p, idx) in space.states().enumerate() {
            assert_eq!(space.index_of(&idx), Some(p));
            if let Some(q) = prev {
                assert!(q < idx);
            }
            prev = Some(idx);
        }
        assert_eq!(space.index_of(&FockIndex::new(4, 0, 0, 0)), None);
        assert_eq!(space.index_of(&FockIndex::new(0, 0, 0, 1)), Some(1));
        assert_eq!(space.index_of(&FockIndex::new(1, 0, 0, 0)), Some(64));
    }

    #[test]
    fn mode_tags_parse() {
        for m in Mode::ALL {
            let tag = serde_json::to_string(&m).unwrap();
            let tag = tag.trim_matches('"');
            assert_eq!(tag.parse::<Mode>().unwrap(), m);
        }
        assert!("cH".parse::<Mode>().is_err());
    }
}
