//! Gauss rules on the reference triangle and the unit interval.
//!
//! Triangle rules are collapsed (Duffy) products of Gauss–Legendre rules,
//! exact for polynomials up to the requested degree.

use std::sync::OnceLock;

/// Highest exactness degree used for cell and facet integrals.
pub const MAX_DEGREE: usize = 8;

/// Quadrature rule on the reference triangle.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    /// Reference coordinates `(ξ, η)`.
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points as barycentric coordinates `(λ0, λ1, λ2)`.
    pub fn barycentric_points(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.points.iter().map(|p| [1.0 - p[0] - p[1], p[0], p[1]])
    }
}

/// Quadrature rule on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct LineRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Tricomi's initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            } else {
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
            }
            // p1 = P_n(z), p0 = P_{n-1}(z)
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            z = 0.0;
            dp = 1.0;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn build_line_rule(degree: usize) -> LineRule {
    let n = degree / 2 + 1;
    let (x, w) = gauss_legendre(n);
    LineRule {
        points: x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        weights: w.iter().map(|w| 0.5 * w).collect(),
        degree,
    }
}

fn build_triangle_rule(degree: usize) -> QuadratureRule {
    // ξ = u (1 - v), η = v with Jacobian (1 - v): degree+1 in v.
    let nu = degree / 2 + 1;
    let nv = (degree + 1) / 2 + 1;
    let (xu, wu) = gauss_legendre(nu);
    let (xv, wv) = gauss_legendre(nv);
    let mut points = Vec::with_capacity(nu * nv);
    let mut weights = Vec::with_capacity(nu * nv);
    for (v, wvv) in xv.iter().zip(&wv) {
        let v = 0.5 * (v + 1.0);
        for (u, wuu) in xu.iter().zip(&wu) {
            let u = 0.5 * (u + 1.0);
            points.push([u * (1.0 - v), v]);
            weights.push(0.25 * wuu * wvv * (1.0 - v));
        }
    }
    QuadratureRule {
        points,
        weights,
        degree,
    }
}

/// Triangle rule exact up to `degree` (clamped to `MAX_DEGREE`).
pub fn triangle_rule(degree: usize) -> &'static QuadratureRule {
    static RULES: [OnceLock<QuadratureRule>; MAX_DEGREE + 1] = [const { OnceLock::new() }; MAX_DEGREE + 1];
    let d = degree.min(MAX_DEGREE);
    RULES[d].get_or_init(|| build_triangle_rule(d))
}

/// Interval rule exact up to `degree` (clamped to `MAX_DEGREE`).
pub fn line_rule(degree: usize) -> &'static LineRule {
    static RULES: [OnceLock<LineRule>; MAX_DEGREE + 1] = [const { OnceLock::new() }; MAX_DEGREE + 1];
    let d = degree.min(MAX_DEGREE);
    RULES[d].get_or_init(|| build_line_rule(d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::reference_monomial_integral;

    #[test]
    fn gauss_legendre_small_cases() {
        let (x, w) = gauss_legendre(1);
        assert_eq!((x[0], w[0]), (0.0, 2.0));
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15 && (w[0] - 1.0).abs() < 1e-15);
        let (x, w) = gauss_legendre(64);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
        // ∫ x^62 = 2/63 is integrated exactly by 64 points.
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(62)).sum();
        assert!((s - 2.0 / 63.0).abs() < 1e-14);
    }

    #[test]
    fn triangle_rules_are_exact() {
        for d in 0..=MAX_DEGREE {
            let rule = triangle_rule(d);
            assert!((rule.weights.iter().sum::<f64>() - 0.5).abs() < 1e-15);
            for a in 0..=d {
                for b in 0..=d - a {
                    let q: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    let exact = reference_monomial_integral(a, b);
                    assert!((q - exact).abs() < 1e-14, "degree {d}: x^{a} y^{b}: {q} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn line_rules_are_exact() {
        for d in 0..=MAX_DEGREE {
            let rule = line_rule(d);
            for k in 0..=d {
                let q: f64 = rule.points.iter().zip(&rule.weights).map(|(t, w)| w * t.powi(k as i32)).sum();
                assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-15);
            }
        }
    }
}
