//! Foliation description files.
//!
//! JSON or TOML with either a built-in shortcut
//!
//! ```toml
//! builtin = "jouanolou"   # or "linear_model", "product_disc"
//! degree = 2              # jouanolou only
//! lambda = [0.0, 1.0]     # linear_model only, [re, im]
//! ```
//!
//! or explicit homogeneous components, one list of `[a, b, c, re, im]`
//! terms (coefficient `re + i·im` of `z₀^a z₁^b z₂^c`) per component:
//!
//! ```json
//! { "name": "example", "degree": 2,
//!   "coeffs": [[[0,2,0,1.0,0.0]], [[0,0,2,1.0,0.0]], [[2,0,0,1.0,0.0]]] }
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;

use super::{HomogPoly, PolyFoliation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FoliationSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<Vec<(u32, u32, u32, f64, f64)>>>,
}

impl FoliationSpec {
    pub fn jouanolou(degree: u32) -> Self {
        FoliationSpec {
            builtin: Some("jouanolou".into()),
            degree: Some(degree),
            ..Default::default()
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Reads a `.json` or `.toml` file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json_str(&text),
            Some("toml") => Self::from_toml_str(&text),
            _ => Err(Error::input(format!("{}: expected a .json or .toml file", path.display()))),
        }
    }

    pub fn build(&self) -> Result<PolyFoliation> {
        match self.builtin.as_deref() {
            Some("jouanolou") => {
                let d = self.degree.ok_or_else(|| Error::input("jouanolou needs a degree"))?;
                PolyFoliation::jouanolou(d)
            }
            Some("linear_model") => {
                let [re, im] = self.lambda.ok_or_else(|| Error::input("linear_model needs lambda"))?;
                PolyFoliation::linear_model(Complex64::new(re, im))
            }
            Some("product_disc") => Ok(PolyFoliation::product_disc()),
            Some(other) => Err(Error::input(format!("unknown builtin {other:?}"))),
            None => {
                let d = self.degree.ok_or_else(|| Error::input("degree is required"))?;
                let coeffs = self.coeffs.as_ref().ok_or_else(|| Error::input("coeffs are required"))?;
                if coeffs.len() != 3 {
                    return Err(Error::input(format!("expected 3 components, found {}", coeffs.len())));
                }
                let mut comps = [HomogPoly::zero(d), HomogPoly::zero(d), HomogPoly::zero(d)];
                for (k, terms) in coeffs.iter().enumerate() {
                    for &(a, b, c, re, im) in terms {
                        if !comps[k].add_term(a, b, c, Complex64::new(re, im)) {
                            return Err(Error::input(format!(
                                "component {k}: monomial z0^{a} z1^{b} z2^{c} has degree {} ≠ {d}",
                                a + b + c
                            )));
                        }
                    }
                    if comps[k].is_zero() {
                        return Err(Error::input(format!("component {k} is zero, so it has no degree {d}")));
                    }
                }
                PolyFoliation::projective(self.name.clone().unwrap_or_else(|| "custom".into()), d, comps)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foliation::ChartPoint;

    #[test]
    fn builtins_parse_in_both_formats() {
        let a = FoliationSpec::from_toml_str("builtin = \"jouanolou\"\ndegree = 3\n").unwrap();
        let b = FoliationSpec::from_json_str(r#"{"builtin": "jouanolou", "degree": 3}"#).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.build().unwrap().degree(), 3);
        let l = FoliationSpec::from_json_str(r#"{"builtin": "linear_model", "lambda": [0.0, 1.0]}"#).unwrap();
        assert!(l.build().is_ok());
    }

    #[test]
    fn explicit_coefficients_reproduce_jouanolou() {
        let s = r#"{"name": "j2", "degree": 2,
            "coeffs": [[[0,2,0,1.0,0.0]], [[0,0,2,1.0,0.0]], [[2,0,0,1.0,0.0]]]}"#;
        let f = FoliationSpec::from_json_str(s).unwrap().build().unwrap();
        let g = PolyFoliation::jouanolou(2).unwrap();
        let p = ChartPoint::affine(1, Complex64::new(0.3, 0.1), Complex64::new(-0.5, 0.2));
        assert_eq!(f.evaluate_field(&p).unwrap(), g.evaluate_field(&p).unwrap());
    }

    #[test]
    fn rejects_degree_mismatch_and_unknown_keys() {
        let s = r#"{"degree": 2, "coeffs": [[[0,2,0,1.0,0.0]], [[0,0,3,1.0,0.0]], [[2,0,0,1.0,0.0]]]}"#;
        assert!(FoliationSpec::from_json_str(s).unwrap().build().is_err());
        assert!(FoliationSpec::from_json_str(r#"{"builtin": "jouanolou", "degre": 2}"#).is_err());
        assert!(FoliationSpec::from_toml_str("builtin = \"nope\"").unwrap().build().is_err());
    }
}
