use num_complex::Complex64;
use serde::{Deserialize, Serialize};

type C = Complex64;

/// Polynomial in two complex variables, stored as its nonzero terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly2 {
    terms: Vec<(u32, u32, C)>,
    degree: u32,
}

impl Poly2 {
    pub fn zero() -> Self {
        Poly2 {
            terms: Vec::new(),
            degree: 0,
        }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (u32, u32, C)>) -> Self {
        let mut acc: Vec<(u32, u32, C)> = Vec::new();
        for (i, j, c) in terms {
            match acc.iter_mut().find(|t| t.0 == i && t.1 == j) {
                Some(t) => t.2 += c,
                None => acc.push((i, j, c)),
            }
        }
        acc.retain(|t| t.2 != C::new(0.0, 0.0));
        acc.sort_by_key(|t| (t.0 + t.1, t.0));
        let degree = acc.iter().map(|t| t.0 + t.1).max().unwrap_or(0);
        Poly2 { terms: acc, degree }
    }

    pub fn terms(&self) -> &[(u32, u32, C)] {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Poly2) -> Poly2 {
        Poly2::from_terms(self.terms.iter().chain(other.terms.iter()).copied())
    }

    pub fn scale(&self, s: C) -> Poly2 {
        Poly2::from_terms(self.terms.iter().map(|&(i, j, c)| (i, j, c * s)))
    }

    /// Multiplies by `u^di v^dj`.
    pub fn shift(&self, di: u32, dj: u32) -> Poly2 {
        Poly2::from_terms(self.terms.iter().map(|&(i, j, c)| (i + di, j + dj, c)))
    }

    pub fn d_u(&self) -> Poly2 {
        Poly2::from_terms(
            self.terms
                .iter()
                .filter(|t| t.0 > 0)
                .map(|&(i, j, c)| (i - 1, j, c * i as f64)),
        )
    }

    pub fn d_v(&self) -> Poly2 {
        Poly2::from_terms(
            self.terms
                .iter()
                .filter(|t| t.1 > 0)
                .map(|&(i, j, c)| (i, j - 1, c * j as f64)),
        )
    }

    /// Evaluation using precomputed power tables.
    #[inline]
    pub fn eval_with(&self, pu: &[C], pv: &[C]) -> C {
        let mut s = C::new(0.0, 0.0);
        for &(i, j, c) in &self.terms {
            s += c * pu[i as usize] * pv[j as usize];
        }
        s
    }

    pub fn eval(&self, u: C, v: C) -> C {
        let (pu, pv) = powers(u, v, self.degree as usize);
        self.eval_with(&pu, &pv)
    }
}

/// Power tables `u^0..=u^n`, `v^0..=v^n`.
pub fn powers(u: C, v: C, n: usize) -> (Vec<C>, Vec<C>) {
    let mut pu = Vec::with_capacity(n + 1);
    let mut pv = Vec::with_capacity(n + 1);
    let one = C::new(1.0, 0.0);
    pu.push(one);
    pv.push(one);
    for k in 0..n {
        pu.push(pu[k] * u);
        pv.push(pv[k] * v);
    }
    (pu, pv)
}

/// Homogeneous polynomial of degree `d` in `(z₀, z₁, z₂)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogPoly {
    degree: u32,
    /// Dense coefficients indexed by `monomial_index(b, c)` for `z₀^a z₁^b z₂^c`.
    coeffs: Vec<C>,
}

fn monomial_index(degree: u32, b: u32, c: u32) -> usize {
    // Rows by b; row b holds c = 0..=degree-b.
    let b = b as usize;
    let d = degree as usize;
    b * (d + 1) - b * (b.saturating_sub(1)) / 2 + c as usize
}

impl HomogPoly {
    pub fn zero(degree: u32) -> Self {
        let n = ((degree + 1) * (degree + 2) / 2) as usize;
        HomogPoly {
            degree,
            coeffs: vec![C::new(0.0, 0.0); n],
        }
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Adds `coef · z₀^a z₁^b z₂^c`; returns false on a degree mismatch.
    pub fn add_term(&mut self, a: u32, b: u32, c: u32, coef: C) -> bool {
        if a + b + c != self.degree {
            return false;
        }
        let idx = monomial_index(self.degree, b, c);
        self.coeffs[idx] += coef;
        true
    }

    pub fn monomial(degree: u32, a: u32, b: u32, c: u32) -> Option<Self> {
        let mut p = HomogPoly::zero(degree);
        p.add_term(a, b, c, C::new(1.0, 0.0)).then_some(p)
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, u32, u32, C)> + '_ {
        let d = self.degree;
        (0..=d).flat_map(move |b| {
            (0..=d - b).filter_map(move |c| {
                let coef = self.coeffs[monomial_index(d, b, c)];
                (coef != C::new(0.0, 0.0)).then_some((d - b - c, b, c, coef))
            })
        })
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == C::new(0.0, 0.0))
    }

    pub fn eval(&self, z: [C; 3]) -> C {
        self.terms()
            .map(|(a, b, c, coef)| coef * z[0].powu(a) * z[1].powu(b) * z[2].powu(c))
            .sum()
    }

    /// Restriction to the affine chart `z_k = 1`, the remaining variables in
    /// increasing index order becoming `(u, v)`.
    pub fn dehomogenize(&self, k: usize) -> Poly2 {
        Poly2::from_terms(self.terms().map(|(a, b, c, coef)| {
            let e = [a, b, c];
            let rest: Vec<u32> = (0..3).filter(|&i| i != k).map(|i| e[i]).collect();
            (rest[0], rest[1], coef)
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn monomial_indexing_is_a_bijection() {
        for d in 0..6u32 {
            let mut seen = std::collections::HashSet::new();
            for b in 0..=d {
                for cc in 0..=d - b {
                    assert!(seen.insert(monomial_index(d, b, cc)));
                }
            }
            assert_eq!(seen.len(), ((d + 1) * (d + 2) / 2) as usize);
            assert!(seen.iter().all(|&i| i < seen.len()));
        }
    }

    #[test]
    fn dehomogenize_matches_evaluation() {
        let mut p = HomogPoly::zero(3);
        assert!(p.add_term(1, 1, 1, c(2.0, -1.0)));
        assert!(p.add_term(0, 3, 0, c(0.5, 0.0)));
        assert!(p.add_term(3, 0, 0, c(0.0, 1.0)));
        assert!(!p.add_term(1, 1, 0, c(1.0, 0.0)));
        let (u, v) = (c(0.3, 0.2), c(-0.7, 0.4));
        assert!((p.dehomogenize(0).eval(u, v) - p.eval([c(1.0, 0.0), u, v])).norm() < 1e-14);
        assert!((p.dehomogenize(1).eval(u, v) - p.eval([u, c(1.0, 0.0), v])).norm() < 1e-14);
        assert!((p.dehomogenize(2).eval(u, v) - p.eval([u, v, c(1.0, 0.0)])).norm() < 1e-14);
    }

    #[test]
    fn derivatives() {
        let q = Poly2::from_terms([(2, 1, c(1.0, 0.0)), (0, 3, c(0.0, 2.0))]);
        let (u, v) = (c(0.4, 0.1), c(0.2, -0.3));
        let h = 1e-6;
        let fd = (q.eval(u + h, v) - q.eval(u - h, v)) / (2.0 * h);
        assert!((fd - q.d_u().eval(u, v)).norm() < 1e-9);
        let fd = (q.eval(u, v + h) - q.eval(u, v - h)) / (2.0 * h);
        assert!((fd - q.d_v().eval(u, v)).norm() < 1e-9);
    }
}
