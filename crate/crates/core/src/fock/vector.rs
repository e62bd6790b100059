use super::{FockIndex, FockSpace};
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Tag written into serialized vectors; readers reject any other order.
pub const ENUMERATION_ORDER: &str = "lex(aH,aV,bH,bV)";

/// Amplitudes below this magnitude are dropped on serialization.
const SERIALIZE_THRESHOLD: f64 = 1e-15;

/// Complex amplitudes over a truncated [`FockSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    space: FockSpace,
    amplitudes: Vec<Complex64>,
}

impl FockVector {
    pub fn zeros(space: FockSpace) -> Self {
        FockVector {
            space,
            amplitudes: vec![Complex64::new(0.0, 0.0); space.dim()],
        }
    }

    pub fn vacuum(space: FockSpace) -> Self {
        let mut v = Self::zeros(space);
        v.amplitudes[0] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn basis(space: FockSpace, idx: FockIndex) -> Result<Self> {
        let p = space
            .index_of(&idx)
            .ok_or_else(|| Error::invalid(format!("{idx} lies outside cutoff {}", space.cutoff())))?;
        let mut v = Self::zeros(space);
        v.amplitudes[p] = Complex64::new(1.0, 0.0);
        Ok(v)
    }

    pub fn from_amplitudes(space: FockSpace, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::invalid(format!(
                "expected {} amplitudes, got {}",
                space.dim(),
                amplitudes.len()
            )));
        }
        Ok(FockVector { space, amplitudes })
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn cutoff(&self) -> usize {
        self.space.cutoff()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn amplitude(&self, idx: FockIndex) -> Complex64 {
        self.space
            .index_of(&idx)
            .map(|p| self.amplitudes[p])
            .unwrap_or_default()
    }

    pub fn set(&mut self, idx: FockIndex, value: Complex64) -> Result<()> {
        let p = self
            .space
            .index_of(&idx)
            .ok_or_else(|| Error::invalid(format!("{idx} lies outside cutoff {}", self.cutoff())))?;
        self.amplitudes[p] = value;
        Ok(())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &FockVector) -> Result<Complex64> {
        self.check_same_space(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Largest elementwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &FockVector) -> Result<f64> {
        self.check_same_space(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Weight carried by states with at least one mode at the cutoff.
    pub fn boundary_weight(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(p, a)| a.norm_sqr() > 0.0 && self.space.on_boundary(&self.space.state_at(*p)))
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    pub fn scale(&mut self, factor: Complex64) {
        for a in &mut self.amplitudes {
            *a *= factor;
        }
    }

    /// Nonzero entries as `(index, amplitude)`.
    pub fn nonzero(&self, threshold: f64) -> impl Iterator<Item = (FockIndex, Complex64)> + '_ {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(move |(_, a)| a.norm() > threshold)
            .map(|(p, a)| (self.space.state_at(p), *a))
    }

    fn check_same_space(&self, other: &FockVector) -> Result<()> {
        if self.space != other.space {
            return Err(Error::invalid(format!(
                "cutoff mismatch: {} vs {}",
                self.cutoff(),
                other.cutoff()
            )));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct FockVectorRepr {
    cutoff: usize,
    order: String,
    amplitudes: Vec<(usize, f64, f64)>,
}

impl Serialize for FockVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let amplitudes = self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > SERIALIZE_THRESHOLD)
            .map(|(p, a)| (p, a.re, a.im))
            .collect();
        FockVectorRepr {
            cutoff: self.cutoff(),
            order: ENUMERATION_ORDER.to_string(),
            amplitudes,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FockVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = FockVectorRepr::deserialize(deserializer)?;
        if repr.order != ENUMERATION_ORDER {
            return Err(D::Error::custom(format!(
                "unsupported enumeration order {:?}",
                repr.order
            )));
        }
        let space = FockSpace::new(repr.cutoff).map_err(D::Error::custom)?;
        let mut v = FockVector::zeros(space);
        for (p, re, im) in repr.amplitudes {
            if p >= space.dim() {
                return Err(D::Error::custom(format!(
                    "index {p} outside dimension {}",
                    space.dim()
                )));
            }
            v.amplitudes[p] = Complex64::new(re, im);
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn json_layout() {
        let space = FockSpace::new(1).unwrap();
        let mut v = FockVector::vacuum(space);
        v.set(FockIndex::new(1, 0, 0, 1), Complex64::new(0.0, -0.5))
            .unwrap();
        let json = serde_json::to_value(&v).unwrap();
        assert_eq!(json["cutoff"], 1);
        assert_eq!(json["order"], ENUMERATION_ORDER);
        assert_eq!(json["amplitudes"].as_array().unwrap().len(), 2);
        assert_eq!(json["amplitudes"][1][0], 9);
    }

    #[test]
    fn rejects_foreign_order() {
        let text = r#"{"cutoff":1,"order":"colex","amplitudes":[]}"#;
        assert!(serde_json::from_str::<FockVector>(text).is_err());
        let text = r#"{"cutoff":1,"order":"lex(aH,aV,bH,bV)","amplitudes":[[16,1.0,0.0]]}"#;
        assert!(serde_json::from_str::<FockVector>(text).is_err());
    }

    proptest! {
        #[test]
        fn json_round_trip(entries in proptest::collection::vec((0usize..81, -1.0f64..1.0, -1.0f64..1.0), 0..20)) {
            let space = FockSpace::new(2).unwrap();
            let mut v = FockVector::zeros(space);
            for (p, re, im) in entries {
                v.amplitudes_mut()[p] = Complex64::new(re, im);
            }
            // Amplitudes below the threshold are intentionally dropped.
            for a in v.amplitudes_mut() {
                if a.norm() <= SERIALIZE_THRESHOLD {
                    *a = Complex64::new(0.0, 0.0);
                }
            }
            let text = serde_json::to_string(&v).unwrap();
            let back: FockVector = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back, v);
        }
    }
}
