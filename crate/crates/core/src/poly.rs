//! Bivariate polynomials on the reference triangle.
//!
//! The reference triangle has vertices `(0,0)`, `(1,0)`, `(0,1)`; its
//! barycentric coordinates are `λ0 = 1 - ξ - η`, `λ1 = ξ`, `λ2 = η`.

use std::ops::{Add, Mul, Sub};

/// Polynomial `Σ c[i][j] ξ^i η^j` with `i + j <= degree`, stored densely in a
/// `(degree+1)²` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly2 {
    degree: usize,
    coeffs: Vec<f64>,
}

impl Poly2 {
    pub fn zero(degree: usize) -> Self {
        Self {
            degree,
            coeffs: vec![0.0; (degree + 1) * (degree + 1)],
        }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            degree: 0,
            coeffs: vec![c],
        }
    }

    /// `ξ^i η^j`.
    pub fn monomial(i: usize, j: usize) -> Self {
        let mut p = Self::zero(i + j);
        p.set(i, j, 1.0);
        p
    }

    /// Barycentric coordinate `k` of the reference triangle.
    pub fn barycentric(k: usize) -> Self {
        match k {
            0 => {
                let mut p = Self::zero(1);
                p.set(0, 0, 1.0);
                p.set(1, 0, -1.0);
                p.set(0, 1, -1.0);
                p
            }
            1 => Self::monomial(1, 0),
            2 => Self::monomial(0, 1),
            _ => panic!("barycentric index {k} out of range"),
        }
    }

    /// Cubic bubble `λ0 λ1 λ2`.
    pub fn bubble() -> Self {
        &(&Self::barycentric(0) * &Self::barycentric(1)) * &Self::barycentric(2)
    }

    /// Cone function of local edge `e`: the product of the barycentric
    /// coordinates of its two endpoints.
    pub fn cone(e: usize) -> Self {
        &Self::barycentric((e + 1) % 3) * &Self::barycentric((e + 2) % 3)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.degree + 1) + j
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i + j > self.degree {
            0.0
        } else {
            self.coeffs[self.idx(i, j)]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(i + j <= self.degree);
        let k = self.idx(i, j);
        self.coeffs[k] = v;
    }

    fn terms(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let d = self.degree;
        (0..=d).flat_map(move |i| (0..=d - i).map(move |j| (i, j, self.coeffs[i * (d + 1) + j])))
    }

    fn powers(&self, x: f64) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.degree + 1);
        let mut v = 1.0;
        for _ in 0..=self.degree {
            p.push(v);
            v *= x;
        }
        p
    }

    pub fn eval(&self, xi: [f64; 2]) -> f64 {
        let (px, py) = (self.powers(xi[0]), self.powers(xi[1]));
        self.terms().map(|(i, j, c)| c * px[i] * py[j]).sum()
    }

    /// Value, gradient and Hessian `[h_ξξ, h_ξη, h_ηη]` at a point.
    pub fn eval_all(&self, xi: [f64; 2]) -> (f64, [f64; 2], [f64; 3]) {
        let (px, py) = (self.powers(xi[0]), self.powers(xi[1]));
        let mut v = 0.0;
        let mut g = [0.0; 2];
        let mut h = [0.0; 3];
        for (i, j, c) in self.terms() {
            if c == 0.0 {
                continue;
            }
            let (fi, fj) = (i as f64, j as f64);
            v += c * px[i] * py[j];
            if i >= 1 {
                g[0] += c * fi * px[i - 1] * py[j];
            }
            if j >= 1 {
                g[1] += c * fj * px[i] * py[j - 1];
            }
            if i >= 2 {
                h[0] += c * fi * (fi - 1.0) * px[i - 2] * py[j];
            }
            if i >= 1 && j >= 1 {
                h[1] += c * fi * fj * px[i - 1] * py[j - 1];
            }
            if j >= 2 {
                h[2] += c * fj * (fj - 1.0) * px[i] * py[j - 2];
            }
        }
        (v, g, h)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    fn widen(&self, degree: usize) -> Self {
        let mut p = Self::zero(degree.max(self.degree));
        for (i, j, c) in self.terms() {
            p.set(i, j, c);
        }
        p
    }
}

impl Add for &Poly2 {
    type Output = Poly2;
    fn add(self, rhs: &Poly2) -> Poly2 {
        let mut p = self.widen(rhs.degree);
        for (i, j, c) in rhs.terms() {
            let k = p.idx(i, j);
            p.coeffs[k] += c;
        }
        p
    }
}

impl Sub for &Poly2 {
    type Output = Poly2;
    fn sub(self, rhs: &Poly2) -> Poly2 {
        self + &rhs.scale(-1.0)
    }
}

impl Mul for &Poly2 {
    type Output = Poly2;
    fn mul(self, rhs: &Poly2) -> Poly2 {
        let mut p = Poly2::zero(self.degree + rhs.degree);
        for (i, j, a) in self.terms() {
            if a == 0.0 {
                continue;
            }
            for (k, l, b) in rhs.terms() {
                let idx = p.idx(i + k, j + l);
                p.coeffs[idx] += a * b;
            }
        }
        p
    }
}

/// Exact integral of `ξ^a η^b` over the reference triangle:
/// `a! b! / (a + b + 2)!`.
pub fn reference_monomial_integral(a: usize, b: usize) -> f64 {
    let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
    fact(a) * fact(b) / fact(a + b + 2)
}

impl Poly2 {
    /// Exact integral over the reference triangle.
    pub fn integrate(&self) -> f64 {
        self.terms().map(|(i, j, c)| c * reference_monomial_integral(i, j)).sum()
    }
}
