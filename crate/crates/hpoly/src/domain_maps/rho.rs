//! Defining functions on ℂ², seen as functions of the real coordinates
//! `(x₁, y₁, x₂, y₂)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type C2 = [Complex64; 2];
pub type R4 = [f64; 4];
pub type Mat4 = [[f64; 4]; 4];

pub fn to_r4(z: &C2) -> R4 {
    [z[0].re, z[0].im, z[1].re, z[1].im]
}

pub fn from_r4(x: &R4) -> C2 {
    [Complex64::new(x[0], x[1]), Complex64::new(x[2], x[3])]
}

/// A real-valued function on ℂ² with first and second derivatives.
pub trait DefiningFunction: Sync {
    fn value(&self, z: &C2) -> f64;
    /// `(ρ_{x₁}, ρ_{y₁}, ρ_{x₂}, ρ_{y₂})`.
    fn gradient(&self, z: &C2) -> R4;
    /// Symmetric real Hessian in the same ordering.
    fn hessian(&self, z: &C2) -> Mat4;

    /// `ρ_{z_j} = ½(ρ_{x_j} − iρ_{y_j})`.
    fn dz(&self, z: &C2) -> C2 {
        let g = self.gradient(z);
        [Complex64::new(0.5 * g[0], -0.5 * g[1]), Complex64::new(0.5 * g[2], -0.5 * g[3])]
    }

    /// `ρ_{z_j z̄_k}`.
    fn complex_hessian(&self, z: &C2) -> [[Complex64; 2]; 2] {
        complex_parts(&self.hessian(z)).0
    }

    /// `ρ_{z_j z_k}`.
    fn holomorphic_hessian(&self, z: &C2) -> [[Complex64; 2]; 2] {
        complex_parts(&self.hessian(z)).1
    }

    fn grad_norm(&self, z: &C2) -> f64 {
        self.gradient(z).iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Splits a real Hessian into its `∂∂̄` and `∂∂` parts.
pub fn complex_parts(h: &Mat4) -> ([[Complex64; 2]; 2], [[Complex64; 2]; 2]) {
    let mut mixed = [[Complex64::new(0.0, 0.0); 2]; 2];
    let mut holo = mixed;
    for j in 0..2 {
        for k in 0..2 {
            let (xj, yj, xk, yk) = (2 * j, 2 * j + 1, 2 * k, 2 * k + 1);
            let xx = h[xj][xk];
            let yy = h[yj][yk];
            let xy = h[xj][yk];
            let yx = h[yj][xk];
            mixed[j][k] = Complex64::new(0.25 * (xx + yy), 0.25 * (xy - yx));
            holo[j][k] = Complex64::new(0.25 * (xx - yy), -0.25 * (xy + yx));
        }
    }
    (mixed, holo)
}

impl<T: DefiningFunction + ?Sized> DefiningFunction for &T {
    fn value(&self, z: &C2) -> f64 {
        (**self).value(z)
    }
    fn gradient(&self, z: &C2) -> R4 {
        (**self).gradient(z)
    }
    fn hessian(&self, z: &C2) -> Mat4 {
        (**self).hessian(z)
    }
}

impl<T: DefiningFunction + ?Sized> DefiningFunction for Box<T> {
    fn value(&self, z: &C2) -> f64 {
        (**self).value(z)
    }
    fn gradient(&self, z: &C2) -> R4 {
        (**self).gradient(z)
    }
    fn hessian(&self, z: &C2) -> Mat4 {
        (**self).hessian(z)
    }
}

/// `c + l·x + ½ xᵀQx`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticRho {
    pub constant: f64,
    pub linear: R4,
    pub quadratic: Mat4,
}

impl QuadraticRho {
    /// `|z|² − R²`.
    pub fn ball(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return invalid(format!("ball radius must be positive, got {radius}"));
        }
        let mut q = [[0.0; 4]; 4];
        for (i, row) in q.iter_mut().enumerate() {
            row[i] = 2.0;
        }
        Ok(QuadraticRho {
            constant: -radius * radius,
            linear: [0.0; 4],
            quadratic: q,
        })
    }

    /// `−Im z₂ + λ|z₁|²`.
    pub fn siegel(lambda: f64) -> Result<Self> {
        Self::model(lambda, Complex64::new(0.0, 0.0), 0.0)
    }

    /// `−Im z₂ + λ|z₁|² + 2Re(μ z₁ z̄₂) + ν|z₂|²`.
    pub fn model(lambda: f64, mu: Complex64, nu: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return invalid(format!("lambda must be positive, got {lambda}"));
        }
        if !(mu.re.is_finite() && mu.im.is_finite() && nu.is_finite()) {
            return invalid("mu and nu must be finite");
        }
        let (a, b) = (mu.re, mu.im);
        let mut q = [[0.0; 4]; 4];
        q[0][0] = 2.0 * lambda;
        q[1][1] = 2.0 * lambda;
        q[2][2] = 2.0 * nu;
        q[3][3] = 2.0 * nu;
        // 2a(x₁x₂ + y₁y₂) − 2b(y₁x₂ − x₁y₂)
        q[0][2] = 2.0 * a;
        q[1][3] = 2.0 * a;
        q[1][2] = -2.0 * b;
        q[0][3] = 2.0 * b;
        for i in 0..4 {
            for j in 0..i {
                q[i][j] = q[j][i];
            }
        }
        Ok(QuadraticRho {
            constant: 0.0,
            linear: [0.0, 0.0, 0.0, -1.0],
            quadratic: q,
        })
    }
}

impl DefiningFunction for QuadraticRho {
    fn value(&self, z: &C2) -> f64 {
        let x = to_r4(z);
        let mut v = self.constant;
        for i in 0..4 {
            v += self.linear[i] * x[i];
            for j in 0..4 {
                v += 0.5 * x[i] * self.quadratic[i][j] * x[j];
            }
        }
        v
    }

    fn gradient(&self, z: &C2) -> R4 {
        let x = to_r4(z);
        let mut g = self.linear;
        for (i, gi) in g.iter_mut().enumerate() {
            for j in 0..4 {
                *gi += self.quadratic[i][j] * x[j];
            }
        }
        g
    }

    fn hessian(&self, _z: &C2) -> Mat4 {
        self.quadratic
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    /// Exponents of `x₁, y₁, x₂, y₂`.
    pub powers: [u32; 4],
}

/// A real polynomial in `x₁, y₁, x₂, y₂`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialRho {
    pub terms: Vec<Monomial>,
}

fn ipow(x: f64, n: u32) -> f64 {
    x.powi(n as i32)
}

impl PolynomialRho {
    pub fn new(terms: Vec<Monomial>) -> Result<Self> {
        if terms.is_empty() {
            return invalid("polynomial has no terms");
        }
        if terms.iter().any(|t| !t.coeff.is_finite()) {
            return invalid("polynomial coefficients must be finite");
        }
        Ok(PolynomialRho { terms })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: PolynomialRho = serde_json::from_str(text).map_err(|e| crate::Error::Invalid(format!("polynomial JSON: {e}")))?;
        Self::new(p.terms)
    }

    fn eval_derivative(&self, x: &R4, d: [u32; 4]) -> f64 {
        let mut s = crate::numerics::NeumaierSum::new();
        for t in &self.terms {
            let mut v = t.coeff;
            for k in 0..4 {
                let (p, q) = (t.powers[k], d[k]);
                if q > p {
                    v = 0.0;
                    break;
                }
                let falling: f64 = ((p - q + 1)..=p).map(|m| m as f64).product();
                v *= falling * ipow(x[k], p - q);
            }
            s.add(v);
        }
        s.value()
    }
}

impl DefiningFunction for PolynomialRho {
    fn value(&self, z: &C2) -> f64 {
        self.eval_derivative(&to_r4(z), [0; 4])
    }

    fn gradient(&self, z: &C2) -> R4 {
        let x = to_r4(z);
        std::array::from_fn(|i| {
            let mut d = [0; 4];
            d[i] = 1;
            self.eval_derivative(&x, d)
        })
    }

    fn hessian(&self, z: &C2) -> Mat4 {
        let x = to_r4(z);
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let mut d = [0; 4];
                d[i] += 1;
                d[j] += 1;
                self.eval_derivative(&x, d)
            })
        })
    }
}

/// `c·ρ`.
#[derive(Clone, Copy, Debug)]
pub struct Scaled<R> {
    pub inner: R,
    pub factor: f64,
}

impl<R: DefiningFunction> Scaled<R> {
    pub fn new(inner: R, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return invalid(format!("scale factor must be positive, got {factor}"));
        }
        Ok(Scaled { inner, factor })
    }
}

impl<R: DefiningFunction> DefiningFunction for Scaled<R> {
    fn value(&self, z: &C2) -> f64 {
        self.factor * self.inner.value(z)
    }
    fn gradient(&self, z: &C2) -> R4 {
        self.inner.gradient(z).map(|g| self.factor * g)
    }
    fn hessian(&self, z: &C2) -> Mat4 {
        self.inner.hessian(z).map(|r| r.map(|h| self.factor * h))
    }
}

pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Central finite differences of a value-only function.
pub struct FiniteDifference<F> {
    pub f: F,
    pub step: f64,
}

impl<F: Fn(&C2) -> f64 + Sync> FiniteDifference<F> {
    pub fn new(f: F, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return invalid(format!("finite-difference step must be positive, got {step}"));
        }
        Ok(FiniteDifference { f, step })
    }

    fn at(&self, x: &R4) -> f64 {
        (self.f)(&from_r4(x))
    }
}

fn shifted(x: &R4, i: usize, h: f64) -> R4 {
    let mut y = *x;
    y[i] += h;
    y
}

impl<F: Fn(&C2) -> f64 + Sync> DefiningFunction for FiniteDifference<F> {
    fn value(&self, z: &C2) -> f64 {
        (self.f)(z)
    }

    fn gradient(&self, z: &C2) -> R4 {
        let x = to_r4(z);
        let h = self.step;
        std::array::from_fn(|i| (self.at(&shifted(&x, i, h)) - self.at(&shifted(&x, i, -h))) / (2.0 * h))
    }

    fn hessian(&self, z: &C2) -> Mat4 {
        let x = to_r4(z);
        let h = self.step;
        let f0 = self.at(&x);
        let mut m = [[0.0; 4]; 4];
        for i in 0..4 {
            m[i][i] = (self.at(&shifted(&x, i, h)) - 2.0 * f0 + self.at(&shifted(&x, i, -h))) / (h * h);
            for j in 0..i {
                let pp = self.at(&shifted(&shifted(&x, i, h), j, h));
                let pm = self.at(&shifted(&shifted(&x, i, h), j, -h));
                let mp = self.at(&shifted(&shifted(&x, i, -h), j, h));
                let mm = self.at(&shifted(&shifted(&x, i, -h), j, -h));
                m[i][j] = (pp - pm - mp + mm) / (4.0 * h * h);
                m[j][i] = m[i][j];
            }
        }
        m
    }
}

/// Hessian by central differences of an analytic gradient.
pub(crate) fn hessian_from_gradient(grad: impl Fn(&R4) -> R4, x: &R4, h: f64) -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    for j in 0..4 {
        let gp = grad(&shifted(x, j, h));
        let gm = grad(&shifted(x, j, -h));
        for i in 0..4 {
            m[i][j] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    for i in 0..4 {
        for j in 0..i {
            let s = 0.5 * (m[i][j] + m[j][i]);
            m[i][j] = s;
            m[j][i] = s;
        }
    }
    m
}
