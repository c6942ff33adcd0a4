//! Small polynomial types: the DDE nonlinearity `F(u, v, w)` and dense
//! bivariate complex polynomials used for the reduced vector field.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Highest total degree accepted for `F`.
pub const MAX_DEGREE: usize = 5;

/// One term `coeff * u^e[0] * v^e[1] * w^e[2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub exps: [u32; 3],
    pub coeff: f64,
}

impl Monomial {
    pub fn degree(&self) -> usize {
        self.exps.iter().sum::<u32>() as usize
    }
}

/// Real polynomial in `(u, v, w) = (x(t), x(t - tau), int_{t-tau}^t x)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Poly3 {
    terms: Vec<Monomial>,
}

impl Poly3 {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Builds a polynomial, merging repeated exponents and dropping zeros.
    pub fn new(terms: impl IntoIterator<Item = Monomial>) -> Result<Self> {
        let mut merged: Vec<Monomial> = Vec::new();
        for t in terms {
            if !t.coeff.is_finite() {
                return invalid("non-finite polynomial coefficient");
            }
            if t.degree() > MAX_DEGREE {
                return invalid(format!(
                    "monomial degree {} exceeds the supported maximum {MAX_DEGREE}",
                    t.degree()
                ));
            }
            match merged.iter_mut().find(|m| m.exps == t.exps) {
                Some(m) => m.coeff += t.coeff,
                None => merged.push(t),
            }
        }
        merged.retain(|m| m.coeff != 0.0);
        merged.sort_by_key(|m| (m.degree(), m.exps));
        Ok(Self { terms: merged })
    }

    /// Polynomial in the current state `u` only: `sum_k coeffs[k] u^k`.
    pub fn in_current_state(coeffs: &[f64]) -> Result<Self> {
        Self::new(coeffs.iter().enumerate().map(|(k, &c)| Monomial {
            exps: [k as u32, 0, 0],
            coeff: c,
        }))
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().map(Monomial::degree).max().unwrap_or(0)
    }

    /// True when `F(0) = 0` and `DF(0) = 0`.
    pub fn is_tangent(&self) -> bool {
        self.terms.iter().all(|m| m.degree() >= 2)
    }

    pub fn homogeneous(&self, k: usize) -> Poly3 {
        Poly3 {
            terms: self.terms.iter().copied().filter(|m| m.degree() == k).collect(),
        }
    }

    pub fn eval(&self, x: [f64; 3]) -> f64 {
        self.terms
            .iter()
            .map(|m| {
                m.coeff
                    * x[0].powi(m.exps[0] as i32)
                    * x[1].powi(m.exps[1] as i32)
                    * x[2].powi(m.exps[2] as i32)
            })
            .sum()
    }

    pub fn eval_complex(&self, x: [Complex64; 3]) -> Complex64 {
        self.terms
            .iter()
            .map(|m| {
                x[0].powu(m.exps[0]) * x[1].powu(m.exps[1]) * x[2].powu(m.exps[2]) * m.coeff
            })
            .sum()
    }

    /// Symmetric multilinear form of the degree-`k` part, `k = args.len()`,
    /// obtained by polarization: for each monomial, average over all
    /// assignments of the arguments to its variable slots.
    pub fn multilinear(&self, args: &[[Complex64; 3]]) -> Complex64 {
        let k = args.len();
        let mut total = Complex64::new(0.0, 0.0);
        let perms = permutations(k);
        let norm = perms.len() as f64;
        for m in self.terms.iter().filter(|m| m.degree() == k) {
            let mut slots = Vec::with_capacity(k);
            for (var, &e) in m.exps.iter().enumerate() {
                slots.extend(std::iter::repeat_n(var, e as usize));
            }
            let mut acc = Complex64::new(0.0, 0.0);
            for p in &perms {
                let mut prod = Complex64::new(1.0, 0.0);
                for (slot, &arg) in slots.iter().zip(p) {
                    prod *= args[arg][*slot];
                }
                acc += prod;
            }
            total += acc * (m.coeff / norm);
        }
        total
    }

    pub fn scaled(&self, factor: f64) -> Poly3 {
        Poly3 {
            terms: self
                .terms
                .iter()
                .map(|m| Monomial {
                    exps: m.exps,
                    coeff: m.coeff * factor,
                })
                .collect(),
        }
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], &mut out);
    out
}

/// Dense complex polynomial in two variables, `sum c[i][j] z1^i z2^j`
/// with `i + j <= degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly2 {
    degree: usize,
    // row-major over (i, j) with i + j <= degree
    coeffs: Vec<Complex64>,
}

impl Poly2 {
    pub fn zero(degree: usize) -> Self {
        Self {
            degree,
            coeffs: vec![Complex64::new(0.0, 0.0); (degree + 1) * (degree + 2) / 2],
        }
    }

    pub fn constant(c: Complex64) -> Self {
        let mut p = Self::zero(0);
        p.coeffs[0] = c;
        p
    }

    /// `a z1 + b z2`.
    pub fn linear(a: Complex64, b: Complex64) -> Self {
        let mut p = Self::zero(1);
        p.set(1, 0, a);
        p.set(0, 1, b);
        p
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    fn index(degree: usize, i: usize, j: usize) -> usize {
        // rows i = 0..=degree, each holding degree - i + 1 entries
        i * (degree + 1) - i * i.saturating_sub(1) / 2 + j
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if i + j > self.degree {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs[Self::index(self.degree, i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, c: Complex64) {
        assert!(i + j <= self.degree, "monomial outside polynomial degree");
        let idx = Self::index(self.degree, i, j);
        self.coeffs[idx] = c;
    }

    pub fn add_to(&mut self, i: usize, j: usize, c: Complex64) {
        let idx = Self::index(self.degree, i, j);
        self.coeffs[idx] += c;
    }

    /// Nonzero monomials as `((i, j), coeff)`.
    pub fn monomials(&self) -> Vec<((usize, usize), Complex64)> {
        let mut out = Vec::new();
        for i in 0..=self.degree {
            for j in 0..=(self.degree - i) {
                let c = self.get(i, j);
                if c != Complex64::new(0.0, 0.0) {
                    out.push(((i, j), c));
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Poly2) -> Poly2 {
        let deg = self.degree.max(other.degree);
        let mut out = Poly2::zero(deg);
        for i in 0..=deg {
            for j in 0..=(deg - i) {
                out.set(i, j, self.get(i, j) + other.get(i, j));
            }
        }
        out
    }

    pub fn scale(&self, c: Complex64) -> Poly2 {
        Poly2 {
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|x| x * c).collect(),
        }
    }

    pub fn mul(&self, other: &Poly2) -> Poly2 {
        let deg = self.degree + other.degree;
        let mut out = Poly2::zero(deg);
        for ((i, j), a) in self.monomials() {
            for ((k, l), b) in other.monomials() {
                out.add_to(i + k, j + l, a * b);
            }
        }
        out
    }

    pub fn powu(&self, e: u32) -> Poly2 {
        let mut out = Poly2::constant(Complex64::new(1.0, 0.0));
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// Horner evaluation in `z2` nested inside Horner in `z1`.
    pub fn eval(&self, z1: Complex64, z2: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in (0..=self.degree).rev() {
            let start = Self::index(self.degree, i, 0);
            let row = self.coeffs[start..=start + self.degree - i]
                .iter()
                .rev()
                .fold(Complex64::new(0.0, 0.0), |r, c| r * z2 + c);
            acc = acc * z1 + row;
        }
        acc
    }

    /// Partial derivatives `(d/dz1, d/dz2)` at a point.
    pub fn gradient(&self, z1: Complex64, z2: Complex64) -> (Complex64, Complex64) {
        let mut d1 = Complex64::new(0.0, 0.0);
        let mut d2 = Complex64::new(0.0, 0.0);
        for ((i, j), c) in self.monomials() {
            if i > 0 {
                d1 += c * (i as f64) * z1.powu(i as u32 - 1) * z2.powu(j as u32);
            }
            if j > 0 {
                d2 += c * (j as f64) * z1.powu(i as u32) * z2.powu(j as u32 - 1);
            }
        }
        (d1, d2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn tangency_and_merge() {
        let p = Poly3::in_current_state(&[0.0, 0.0, -1.5, -1.0]).unwrap();
        assert!(p.is_tangent());
        assert_eq!(p.degree(), 3);
        let q = Poly3::in_current_state(&[0.0, 1.0]).unwrap();
        assert!(!q.is_tangent());
        let merged = Poly3::new([
            Monomial { exps: [2, 0, 0], coeff: 1.0 },
            Monomial { exps: [2, 0, 0], coeff: -1.0 },
        ])
        .unwrap();
        assert!(merged.terms().is_empty());
        assert!(Poly3::new([Monomial { exps: [6, 0, 0], coeff: 1.0 }]).is_err());
    }

    #[test]
    fn multilinear_matches_diagonal() {
        let p = Poly3::new([
            Monomial { exps: [1, 1, 0], coeff: 2.0 },
            Monomial { exps: [0, 0, 2], coeff: -0.5 },
            Monomial { exps: [2, 1, 0], coeff: 0.7 },
        ])
        .unwrap();
        let x = [c(0.3, 0.1), c(-0.2, 0.4), c(1.1, -0.3)];
        let diag2 = p.homogeneous(2).eval_complex(x);
        assert_abs_diff_eq!((p.multilinear(&[x, x]) - diag2).norm(), 0.0, epsilon = 1e-14);
        let diag3 = p.homogeneous(3).eval_complex(x);
        assert_abs_diff_eq!((p.multilinear(&[x, x, x]) - diag3).norm(), 0.0, epsilon = 1e-14);
        let y = [c(0.5, 0.0), c(0.0, 1.0), c(-1.0, 0.2)];
        let xy = p.multilinear(&[x, y]);
        let yx = p.multilinear(&[y, x]);
        assert_abs_diff_eq!((xy - yx).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn poly2_arithmetic() {
        let l = Poly2::linear(c(1.0, 0.0), c(0.0, 2.0));
        let sq = l.mul(&l);
        let (z1, z2) = (c(0.3, -0.1), c(0.2, 0.5));
        let direct = (z1 + c(0.0, 2.0) * z2).powu(2);
        assert_abs_diff_eq!((sq.eval(z1, z2) - direct).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((l.powu(3).eval(z1, z2) - (z1 + c(0.0, 2.0) * z2).powu(3)).norm(), 0.0, epsilon = 1e-14);
        let (d1, d2) = sq.gradient(z1, z2);
        let base = z1 + c(0.0, 2.0) * z2;
        assert_abs_diff_eq!((d1 - base * 2.0).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((d2 - base * c(0.0, 4.0)).norm(), 0.0, epsilon = 1e-14);
    }
}
