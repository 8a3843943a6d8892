//! Trigonometric polynomials on the circle: the heat semigroup is diagonal,
//! and the drift `D f = eps * f'` is a Toeplitz convolution with the
//! closed-form coefficients of the orientation step function.

use num_complex::Complex;

use crate::circle::{CirclePoint, GraphParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default number of retained frequencies on each side of zero.
pub const DEFAULT_K_MAX: usize = 64;

/// `f(theta) = sum_{|k| <= k_max} c_k e^{i k theta}`, real part taken on evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierFunction<T> {
    k_max: usize,
    coeffs: Vec<Complex<T>>,
}

impl<T: Scalar> FourierFunction<T> {
    /// Coefficients ordered `k = -k_max ..= k_max`.
    pub fn new(k_max: usize, coeffs: Vec<Complex<T>>) -> Result<Self> {
        if coeffs.len() != 2 * k_max + 1 {
            return Err(Error::InvalidParameter(format!(
                "expected {} coefficients for k_max = {k_max}, got {}",
                2 * k_max + 1,
                coeffs.len()
            )));
        }
        Ok(Self { k_max, coeffs })
    }

    pub fn zero(k_max: usize) -> Self {
        Self {
            k_max,
            coeffs: vec![Complex::new(T::zero(), T::zero()); 2 * k_max + 1],
        }
    }

    pub fn constant(c: T, k_max: usize) -> Self {
        let mut f = Self::zero(k_max);
        f.coeffs[k_max] = Complex::new(c, T::zero());
        f
    }

    /// `cos(n theta)`, or zero when `n > k_max`.
    pub fn cosine(n: usize, k_max: usize) -> Self {
        let mut f = Self::zero(k_max);
        if n == 0 {
            f.coeffs[k_max] = Complex::new(T::one(), T::zero());
        } else if n <= k_max {
            let half = Complex::new(T::lit(0.5), T::zero());
            f.coeffs[k_max + n] = half;
            f.coeffs[k_max - n] = half;
        }
        f
    }

    /// `sin(n theta)`, or zero when `n > k_max`.
    pub fn sine(n: usize, k_max: usize) -> Self {
        let mut f = Self::zero(k_max);
        if n > 0 && n <= k_max {
            f.coeffs[k_max + n] = Complex::new(T::zero(), -T::lit(0.5));
            f.coeffs[k_max - n] = Complex::new(T::zero(), T::lit(0.5));
        }
        f
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    pub fn coeff(&self, k: i64) -> Complex<T> {
        if k.unsigned_abs() as usize > self.k_max {
            return Complex::new(T::zero(), T::zero());
        }
        self.coeffs[(k + self.k_max as i64) as usize]
    }

    fn frequency(&self, idx: usize) -> T {
        T::from_usize(idx) - T::from_usize(self.k_max)
    }

    pub fn eval_angle(&self, theta: T) -> T {
        let step = Complex::new(theta.cos(), theta.sin());
        let mut phase = Complex::new(T::one(), T::zero());
        let mut acc = self.coeffs[self.k_max].re;
        for k in 1..=self.k_max {
            phase *= step;
            acc += (self.coeffs[self.k_max + k] * phase).re
                + (self.coeffs[self.k_max - k] * phase.conj()).re;
        }
        acc
    }

    pub fn eval(&self, z: CirclePoint<T>) -> T {
        self.eval_angle(z.theta())
    }

    pub fn derivative(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * Complex::new(T::zero(), self.frequency(i)))
            .collect();
        Self {
            k_max: self.k_max,
            coeffs,
        }
    }

    pub fn heat_apply(&self, t: T) -> Result<Self> {
        if !(t >= T::zero()) {
            return Err(Error::InvalidParameter(format!("heat time {t} must be nonnegative")));
        }
        let half = T::lit(0.5);
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = self.frequency(i);
                c * (-k * k * t * half).exp()
            })
            .collect();
        Ok(Self {
            k_max: self.k_max,
            coeffs,
        })
    }

    /// `sum |c_k|`, an upper bound for the sup norm.
    pub fn l1_norm(&self) -> T {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    pub fn drift_apply(&self, g: &GraphParams<T>) -> Self {
        let eps = epsilon_coefficients(g, 2 * self.k_max);
        let d = self.derivative();
        let k = self.k_max as i64;
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for n in -k..=k {
            let mut acc = Complex::new(T::zero(), T::zero());
            for m in -k..=k {
                let dm = d.coeffs[(m + k) as usize];
                if dm.re != T::zero() || dm.im != T::zero() {
                    acc += eps[(n - m + 2 * k) as usize] * dm;
                }
            }
            coeffs.push(acc);
        }
        Self {
            k_max: self.k_max,
            coeffs,
        }
    }

    /// Coefficient-wise linear combination `a * self + b * other`.
    pub fn combine(&self, a: T, other: &Self, b: T) -> Result<Self> {
        if other.k_max != self.k_max {
            return Err(Error::InvalidParameter("frequency cutoffs differ".into()));
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| x * a + y * b)
            .collect();
        Ok(Self {
            k_max: self.k_max,
            coeffs,
        })
    }
}

/// Fourier coefficients `k = -k_max ..= k_max` of the orientation
/// `eps(theta) = +1` on `[0, l]`, `-1` on `(l, 2 pi)`.
pub fn epsilon_coefficients<T: Scalar>(g: &GraphParams<T>, k_max: usize) -> Vec<Complex<T>> {
    let l = g.l();
    let pi = T::PI();
    (-(k_max as i64)..=k_max as i64)
        .map(|m| {
            if m == 0 {
                Complex::new((l - pi) / pi, T::zero())
            } else {
                let mf = T::lit(m as f64);
                // (1 - e^{-iml}) / (i pi m)
                let num = Complex::new(T::one() - (mf * l).cos(), (mf * l).sin());
                num / Complex::new(T::zero(), pi * mf)
            }
        })
        .collect()
}
