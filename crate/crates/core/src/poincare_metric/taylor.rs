//! Taylor coefficients of complex-time flows of polynomial fields and an
//! estimate of their radius of convergence.

use num_complex::Complex64;

use crate::foliation::ChartField;

type C = Complex64;

/// Coefficients `b_n` of `s ↦ x(σ s)` where `x' = Z(x)`, `x(0) = x0`, for `n ≤ order`.
pub fn flow_taylor(field: &ChartField, x0: [C; 2], sigma: f64, order: usize) -> Vec<[C; 2]> {
    let deg = field.degree();
    let zero = C::new(0.0, 0.0);
    // pow_u[i][n]: coefficient n of u(s)^i.
    let mut pow_u = vec![vec![zero; order + 1]; deg + 1];
    let mut pow_v = vec![vec![zero; order + 1]; deg + 1];
    pow_u[0][0] = C::new(1.0, 0.0);
    pow_v[0][0] = C::new(1.0, 0.0);
    let mut b = vec![[zero; 2]; order + 1];
    b[0] = x0;
    let comps = field.components();
    for n in 0..=order {
        // Coefficient n of the powers, using b[0..=n].
        for i in 1..=deg {
            let mut su = zero;
            let mut sv = zero;
            for k in 0..=n {
                su += b[k][0] * pow_u[i - 1][n - k];
                sv += b[k][1] * pow_v[i - 1][n - k];
            }
            pow_u[i][n] = su;
            pow_v[i][n] = sv;
        }
        if n == order {
            break;
        }
        for (c, comp) in comps.iter().enumerate() {
            let mut acc = zero;
            for &(i, j, coef) in comp.terms() {
                let (pu, pv) = (&pow_u[i as usize], &pow_v[j as usize]);
                let mut s = zero;
                for k in 0..=n {
                    s += pu[k] * pv[n - k];
                }
                acc += coef * s;
            }
            b[n + 1][c] = acc * (sigma / (n + 1) as f64);
        }
    }
    b
}

/// Partial sum of the series at `s`.
pub fn eval_series(b: &[[C; 2]], s: C) -> [C; 2] {
    let mut out = [C::new(0.0, 0.0); 2];
    for c in b.iter().rev() {
        out[0] = out[0] * s + c[0];
        out[1] = out[1] * s + c[1];
    }
    out
}

/// Radius of convergence in units of `s`, from a least-squares fit of
/// `ln|b_n| ≈ a − n ln R + α ln n` over the upper envelope of the tail.
/// `None` when the tail vanishes (the solution is a polynomial).
pub fn radius_from_coefficients(b: &[[C; 2]]) -> Option<f64> {
    let n_max = b.len() - 1;
    let mag: Vec<f64> = b.iter().map(|c| c[0].norm().max(c[1].norm())).collect();
    let head = mag[1..=n_max.min(4)].iter().cloned().fold(0.0, f64::max).max(1e-300);
    let lo = n_max / 3;
    // Upper envelope over short windows, so cancellations between several
    // singularities at similar distance do not bias the fit.
    let win = 4;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let mut n = lo.max(1);
    while n + win <= n_max + 1 {
        let (k, m) = (n..n + win).map(|k| (k, mag[k])).fold((n, 0.0), |a, x| if x.1 > a.1 { x } else { a });
        if m > 0.0 {
            pts.push((k as f64, m.ln()));
        }
        n += win;
    }
    let tail_max = mag[lo.max(1)..].iter().cloned().fold(0.0, f64::max);
    if pts.len() < 3 || tail_max < 1e-250 || tail_max < head * 1e-200 {
        return None;
    }
    // Least squares with columns 1, n, ln n.
    let rows: Vec<[f64; 3]> = pts.iter().map(|&(n, _)| [1.0, n, n.ln()]).collect();
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for (r, &(_, y)) in rows.iter().zip(&pts) {
        for i in 0..3 {
            aty[i] += r[i] * y;
            for j in 0..3 {
                ata[i][j] += r[i] * r[j];
            }
        }
    }
    let sol = solve3(ata, aty)?;
    let slope = sol[1];
    Some((-slope).exp())
}

fn solve3(mut a: [[f64; 3]; 3], mut y: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        y.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] -= f * a[col][c];
            }
            y[r] -= f * y[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|c| a[r][c] * x[c]).sum();
        x[r] = (y[r] - s) / a[r][r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foliation::Poly2;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn riccati_pole() {
        // u' = u², v' = 1: pole at τ = 1/u0.
        let field = ChartField::new([
            Poly2::from_terms([(2, 0, c(1.0, 0.0))]),
            Poly2::from_terms([(0, 0, c(1.0, 0.0))]),
        ]);
        let u0 = c(0.6, 0.8) * 2.0;
        let b = flow_taylor(&field, [u0, c(0.0, 0.0)], 0.3, 64);
        let r = radius_from_coefficients(&b).unwrap() * 0.3;
        assert!((r - 0.5).abs() < 1e-3 * 0.5, "{r}");
        let s = c(0.5, 0.3);
        let exact = u0 / (1.0 - u0 * s * 0.3);
        assert!((eval_series(&b, s)[0] - exact).norm() < 1e-10);
    }

    #[test]
    fn branch_point() {
        // u' = 1/(2u) is not polynomial; use u' = u³ whose solution
        // (u0⁻² − 2τ)^(-1/2) has a branch point at τ = 1/(2u0²).
        let field = ChartField::new([
            Poly2::from_terms([(3, 0, c(1.0, 0.0))]),
            Poly2::from_terms([(0, 0, c(1.0, 0.0))]),
        ]);
        let u0 = c(0.3, -0.9);
        let b = flow_taylor(&field, [u0, c(0.0, 0.0)], 0.5, 64);
        let r = radius_from_coefficients(&b).unwrap() * 0.5;
        let exact = 1.0 / (2.0 * u0.norm_sqr());
        assert!((r - exact).abs() < 2e-2 * exact, "{r} vs {exact}");
    }

    #[test]
    fn polynomial_solution_has_no_radius() {
        let field = ChartField::new([
            Poly2::from_terms([(0, 0, c(1.0, 0.0))]),
            Poly2::zero(),
        ]);
        let b = flow_taylor(&field, [c(0.2, 0.0), c(0.1, 0.0)], 1.0, 32);
        assert!(radius_from_coefficients(&b).is_none());
    }
}
