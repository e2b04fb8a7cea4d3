//! Scalar analytic functions that can be lifted to matrix arguments.
//!
//! The solver layers only ever need a handful of capabilities from `f`:
//! point evaluation, derivatives (for confluent divided differences) and a
//! bound on `|f^(d)|` over a disc (for the factorial-type error bounds).

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A scalar function, analytic on the spectral regions it is used on.
pub trait AnalyticFn: Sync {
    /// Short identifier used in traces and CSV output.
    fn name(&self) -> &'static str;

    fn eval(&self, z: Complex64) -> Complex64;

    /// `order`-th derivative at `z`; `None` when unavailable (order 0 is `eval`).
    fn nth_derivative(&self, z: Complex64, order: usize) -> Option<Complex64>;

    /// `ln(max |f^(order)(z)|)` over the closed disc `|z - center| <= radius`,
    /// returned in log scale so callers can combine it with huge or tiny
    /// factors without overflow. `None` when no bound is available.
    fn log_max_abs_nth_derivative_on_disc(
        &self,
        center: Complex64,
        radius: f64,
        order: usize,
    ) -> Option<f64>;

    /// `Some(a)` iff `f(z) = exp(a z)`, enabling the scaling-and-squaring path
    /// for matrix arguments.
    fn exp_scale(&self) -> Option<f64> {
        None
    }
}

pub(crate) fn derivative(f: &dyn AnalyticFn, z: Complex64, order: usize) -> Result<Complex64> {
    f.nth_derivative(z, order)
        .ok_or(Error::MissingDerivative { order })
}

/// `f(z) = exp(a z)`; `a = 1` is the plain exponential, `a = -1` gives
/// `exp(-z)` as used for decaying semigroup actions.
#[derive(Debug, Clone, Copy)]
pub struct ScaledExp {
    pub scale: f64,
}

impl ScaledExp {
    pub fn exp() -> Self {
        Self { scale: 1.0 }
    }

    pub fn neg_exp() -> Self {
        Self { scale: -1.0 }
    }
}

impl AnalyticFn for ScaledExp {
    fn name(&self) -> &'static str {
        if self.scale >= 0.0 {
            "exp"
        } else {
            "nexp"
        }
    }

    fn eval(&self, z: Complex64) -> Complex64 {
        (self.scale * z).exp()
    }

    fn nth_derivative(&self, z: Complex64, order: usize) -> Option<Complex64> {
        Some(self.scale.powi(order as i32) * (self.scale * z).exp())
    }

    fn log_max_abs_nth_derivative_on_disc(
        &self,
        center: Complex64,
        radius: f64,
        order: usize,
    ) -> Option<f64> {
        // |a^d exp(a z)| maximized at Re(a z) = Re(a c) + |a| r on the disc.
        Some(order as f64 * self.scale.abs().ln() + self.scale * center.re + self.scale.abs() * radius)
    }

    fn exp_scale(&self) -> Option<f64> {
        Some(self.scale)
    }
}

/// `f(z) = z^k`.
#[derive(Debug, Clone, Copy)]
pub struct Monomial {
    pub degree: usize,
}

impl AnalyticFn for Monomial {
    fn name(&self) -> &'static str {
        "monomial"
    }

    fn eval(&self, z: Complex64) -> Complex64 {
        z.powu(self.degree as u32)
    }

    fn nth_derivative(&self, z: Complex64, order: usize) -> Option<Complex64> {
        if order > self.degree {
            return Some(Complex64::new(0.0, 0.0));
        }
        let mut coeff = 1.0;
        for j in 0..order {
            coeff *= (self.degree - j) as f64;
        }
        Some(coeff * z.powu((self.degree - order) as u32))
    }

    fn log_max_abs_nth_derivative_on_disc(
        &self,
        center: Complex64,
        radius: f64,
        order: usize,
    ) -> Option<f64> {
        if order > self.degree {
            return Some(f64::NEG_INFINITY);
        }
        let mut coeff = 1.0;
        for j in 0..order {
            coeff *= (self.degree - j) as f64;
        }
        let reach = center.norm() + radius;
        Some(coeff.ln() + (self.degree - order) as f64 * reach.max(f64::MIN_POSITIVE).ln())
    }
}

/// `f(z) = c_0 + c_1 z + ... + c_m z^m` with real coefficients.
#[derive(Debug, Clone)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl AnalyticFn for Polynomial {
    fn name(&self) -> &'static str {
        "poly"
    }

    fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    fn nth_derivative(&self, z: Complex64, order: usize) -> Option<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &c) in self.coeffs.iter().enumerate().rev() {
            if i < order {
                break;
            }
            let mut coeff = c;
            for j in 0..order {
                coeff *= (i - j) as f64;
            }
            acc = acc * z + coeff;
        }
        Some(acc)
    }

    fn log_max_abs_nth_derivative_on_disc(
        &self,
        center: Complex64,
        radius: f64,
        order: usize,
    ) -> Option<f64> {
        // Triangle-inequality bound; coarse but safe for low-degree use.
        let reach = center.norm() + radius;
        let mut total = 0.0f64;
        for (i, &c) in self.coeffs.iter().enumerate() {
            if i < order {
                continue;
            }
            let mut coeff = c.abs();
            for j in 0..order {
                coeff *= (i - j) as f64;
            }
            total += coeff * reach.powi((i - order) as i32);
        }
        Some(total.max(f64::MIN_POSITIVE).ln())
    }
}

/// `f(z) = z`, handy in tests and sanity checks.
pub fn identity() -> Monomial {
    Monomial { degree: 1 }
}
