use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 15;

/// Odd polynomial `sum_j coeffs[j] * x^(2j+1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddPolynomial {
    coeffs: Vec<f64>,
}

impl OddPolynomial {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument(
                "odd polynomial needs at least one coefficient".into(),
            ));
        }
        let degree = 2 * coeffs.len() - 1;
        if degree > MAX_DEGREE {
            return Err(Error::InvalidArgument(format!(
                "degree {degree} exceeds the cap of {MAX_DEGREE}"
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("polynomial coefficients".into()));
        }
        Ok(OddPolynomial { coeffs })
    }

    pub fn identity() -> Self {
        OddPolynomial { coeffs: vec![1.0] }
    }

    #[inline]
    pub fn degree(&self) -> usize {
        2 * self.coeffs.len() - 1
    }

    #[inline]
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Horner in `x^2`; exactly odd in floating point.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let x2 = x * x;
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * x2 + c;
        }
        x * acc
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        let x2 = x * x;
        let mut acc = 0.0;
        for (j, &c) in self.coeffs.iter().enumerate().rev() {
            acc = acc * x2 + (2 * j + 1) as f64 * c;
        }
        acc
    }

    /// Value and derivative in one pass.
    #[inline]
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        (self.eval(x), self.derivative(x))
    }
}

/// Closed positive interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo <= 0.0 || lo > hi {
            return Err(Error::InvalidArgument(format!(
                "interval [{lo}, {hi}] must satisfy 0 < lo <= hi"
            )));
        }
        Ok(Interval { lo, hi })
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oddness_is_exact() {
        let p = OddPolynomial::new(vec![8.4703288038, -25.1080747067, 18.6292755991]).unwrap();
        for i in 0..1000 {
            let x = (i as f64 * 0.618_033_988_7).fract() * 2.0 - 1.0;
            assert_eq!(p.eval(-x), -p.eval(x));
        }
    }

    #[test]
    fn derivative_matches_difference() {
        let p = OddPolynomial::new(vec![1.5, -0.5]).unwrap();
        assert_eq!(p.derivative(1.0), 0.0);
        assert_eq!(p.eval(1.0), 1.0);
        let h = 1e-6;
        let fd = (p.eval(0.3 + h) - p.eval(0.3 - h)) / (2.0 * h);
        assert!((fd - p.derivative(0.3)).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(OddPolynomial::new(vec![]).is_err());
        assert!(OddPolynomial::new(vec![1.0; 9]).is_err());
        assert!(Interval::new(0.0, 1.0).is_err());
        assert!(Interval::new(0.5, 0.2).is_err());
        assert!(Interval::new(1.0, 1.0).is_ok());
    }
}
