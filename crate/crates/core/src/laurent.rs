//! Laurent polynomials with complex coefficients, stored densely from the lowest exponent.

use std::ops::{Add, Mul, Neg, Sub};

use crate::C64;

/// Coefficients whose modulus falls below this fraction of the largest one are dropped.
pub const PRUNE_REL: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq)]
pub struct LaurentPolynomial {
    low: i64,
    coeffs: Vec<C64>,
}

impl LaurentPolynomial {
    pub fn zero() -> Self {
        LaurentPolynomial {
            low: 0,
            coeffs: Vec::new(),
        }
    }

    pub fn constant(c: C64) -> Self {
        Self::monomial(0, c)
    }

    /// c z^j
    pub fn monomial(j: i64, c: C64) -> Self {
        let mut p = LaurentPolynomial {
            low: j,
            coeffs: vec![c],
        };
        p.trim();
        p
    }

    pub fn from_coeffs(low: i64, coeffs: Vec<C64>) -> Self {
        let mut p = LaurentPolynomial { low, coeffs };
        p.trim();
        p
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Lowest and highest exponent with a stored coefficient.
    pub fn support(&self) -> Option<(i64, i64)> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some((self.low, self.low + self.coeffs.len() as i64 - 1))
        }
    }

    pub fn coeff(&self, j: i64) -> C64 {
        let i = j - self.low;
        if i < 0 || i >= self.coeffs.len() as i64 {
            C64::new(0.0, 0.0)
        } else {
            self.coeffs[i as usize]
        }
    }

    /// (exponent, coefficient) pairs for nonzero coefficients.
    pub fn terms(&self) -> impl Iterator<Item = (i64, C64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != C64::new(0.0, 0.0))
            .map(move |(i, c)| (self.low + i as i64, *c))
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    fn trim(&mut self) {
        let m = self.max_abs_coeff();
        if m == 0.0 || !m.is_finite() {
            if m == 0.0 {
                self.coeffs.clear();
                self.low = 0;
            }
            return;
        }
        let tol = PRUNE_REL * m;
        for c in self.coeffs.iter_mut() {
            if c.norm() < tol {
                *c = C64::new(0.0, 0.0);
            }
        }
        let first = self.coeffs.iter().position(|c| c.norm() != 0.0).unwrap();
        let last = self.coeffs.iter().rposition(|c| c.norm() != 0.0).unwrap();
        self.coeffs.truncate(last + 1);
        self.coeffs.drain(..first);
        self.low += first as i64;
    }

    pub fn eval(&self, z: C64) -> C64 {
        if self.coeffs.is_empty() {
            return C64::new(0.0, 0.0);
        }
        // Horner in z from the top, then scale by z^low.
        let mut acc = C64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc * z.powi(self.low as i32)
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::from_coeffs(self.low, self.coeffs.iter().map(|x| x * c).collect())
    }

    /// Multiplies by z^j.
    pub fn shift(&self, j: i64) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        LaurentPolynomial {
            low: self.low + j,
            coeffs: self.coeffs.clone(),
        }
    }

    /// conj(p(1/conj(z))): coefficient c_j z^j becomes conj(c_j) z^{-j}.
    pub fn reflect(&self) -> Self {
        match self.support() {
            None => Self::zero(),
            Some((_, hi)) => {
                Self::from_coeffs(-hi, self.coeffs.iter().rev().map(|c| c.conj()).collect())
            }
        }
    }

    /// Largest coefficient difference, measured against max(1, largest coefficient of `other`).
    pub fn rel_distance(&self, other: &Self) -> f64 {
        let d = (self - other).max_abs_coeff();
        d / other.max_abs_coeff().max(1.0)
    }
}

impl Add for &LaurentPolynomial {
    type Output = LaurentPolynomial;
    fn add(self, rhs: &LaurentPolynomial) -> LaurentPolynomial {
        match (self.support(), rhs.support()) {
            (None, _) => rhs.clone(),
            (_, None) => self.clone(),
            (Some((l1, h1)), Some((l2, h2))) => {
                let lo = l1.min(l2);
                let hi = h1.max(h2);
                let coeffs = (lo..=hi).map(|j| self.coeff(j) + rhs.coeff(j)).collect();
                LaurentPolynomial::from_coeffs(lo, coeffs)
            }
        }
    }
}

impl Neg for &LaurentPolynomial {
    type Output = LaurentPolynomial;
    fn neg(self) -> LaurentPolynomial {
        LaurentPolynomial {
            low: self.low,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}

impl Sub for &LaurentPolynomial {
    type Output = LaurentPolynomial;
    fn sub(self, rhs: &LaurentPolynomial) -> LaurentPolynomial {
        self + &(-rhs)
    }
}

impl Mul for &LaurentPolynomial {
    type Output = LaurentPolynomial;
    fn mul(self, rhs: &LaurentPolynomial) -> LaurentPolynomial {
        if self.is_zero() || rhs.is_zero() {
            return LaurentPolynomial::zero();
        }
        let mut out = vec![C64::new(0.0, 0.0); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        LaurentPolynomial::from_coeffs(self.low + rhs.low, out)
    }
}

impl Add for LaurentPolynomial {
    type Output = LaurentPolynomial;
    fn add(self, rhs: LaurentPolynomial) -> LaurentPolynomial {
        &self + &rhs
    }
}

impl Sub for LaurentPolynomial {
    type Output = LaurentPolynomial;
    fn sub(self, rhs: LaurentPolynomial) -> LaurentPolynomial {
        &self - &rhs
    }
}

impl Mul for LaurentPolynomial {
    type Output = LaurentPolynomial;
    fn mul(self, rhs: LaurentPolynomial) -> LaurentPolynomial {
        &self * &rhs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eval_and_shift() {
        let p = LaurentPolynomial::from_coeffs(-1, vec![c(1.0, 0.0), c(0.0, 0.0), c(2.0, 1.0)]);
        let z = c(0.3, -0.7);
        let direct = c(1.0, 0.0) / z + c(2.0, 1.0) * z;
        assert!((p.eval(z) - direct).norm() < 1e-14);
        assert!((p.shift(3).eval(z) - direct * z.powi(3)).norm() < 1e-14);
        assert_eq!(p.support(), Some((-1, 1)));
    }

    #[test]
    fn reflect_matches_definition() {
        let p = LaurentPolynomial::from_coeffs(
            -2,
            vec![c(1.0, 2.0), c(0.5, 0.0), c(0.0, -1.0), c(3.0, 1.0)],
        );
        let z = c(0.4, 0.9);
        let lhs = p.reflect().eval(z);
        let rhs = p.eval(C64::new(1.0, 0.0) / z.conj()).conj();
        assert!((lhs - rhs).norm() < 1e-13);
    }

    #[test]
    fn product_matches_pointwise() {
        let p = LaurentPolynomial::from_coeffs(-1, vec![c(1.0, 2.0), c(0.5, 0.0)]);
        let q = LaurentPolynomial::from_coeffs(2, vec![c(0.0, 1.0), c(2.0, 0.0), c(1.0, 1.0)]);
        let z = c(-0.6, 0.2);
        assert!(((&p * &q).eval(z) - p.eval(z) * q.eval(z)).norm() < 1e-13);
        assert!(((&p - &p).is_zero()));
    }

    #[test]
    fn pruning_drops_tiny_terms() {
        let p = LaurentPolynomial::from_coeffs(0, vec![c(1e-20, 0.0), c(1.0, 0.0), c(1e-17, 0.0)]);
        assert_eq!(p.support(), Some((1, 1)));
    }
}
