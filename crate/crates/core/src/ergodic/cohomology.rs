use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Degrees, in units of the hyperplane class, of the normal bundle and of
/// the cotangent bundle of a degree-`d` foliation of the projective plane.
/// Paired with a harmonic current they give χ and the mass of μ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MassIdentity {
    pub normal_degree: i64,
    pub cotangent_degree: i64,
}

impl MassIdentity {
    /// `χ = −normal/cotangent` once μ is normalized to mass one.
    pub fn exponent(&self) -> Ratio<i64> {
        Ratio::new(-self.normal_degree, self.cotangent_degree)
    }
}

pub fn mass_identity(d: u32) -> Result<MassIdentity> {
    if d < 2 {
        return Err(Error::domain(format!("degree {d}: the exponent formula needs d ≥ 2")));
    }
    Ok(MassIdentity { normal_degree: d as i64 + 2, cotangent_degree: d as i64 - 1 })
}

/// `−(d+2)/(d−1)`, exactly.
pub fn cohomological_chi(d: u32) -> Result<Ratio<i64>> {
    mass_identity(d).map(|m| m.exponent())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_degrees() {
        assert_eq!(cohomological_chi(2).unwrap(), Ratio::from_integer(-4));
        assert_eq!(cohomological_chi(3).unwrap(), Ratio::new(-5, 2));
        assert!(cohomological_chi(1).is_err());
        assert!(cohomological_chi(0).is_err());
    }

    #[test]
    fn tends_to_minus_one() {
        let r = cohomological_chi(1_000_000).unwrap();
        let v = *r.numer() as f64 / *r.denom() as f64;
        assert!((v + 1.0).abs() < 4e-6);
    }
}
