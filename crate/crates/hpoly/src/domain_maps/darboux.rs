//! Local maps carrying a strongly pseudoconvex boundary onto the model
//! `S_λ`: Narasimhan's convexification `Φ`, the contact straightening `Π`
//! and its extension `Ψ`, and their composite `Θ = Ψ ∘ Φ ∘ A`.
//!
//! Points of `ℝ³` are `z' = (x₁, y₁, x₂)`; the boundary near the origin is
//! the graph `y₂ = F(z')`.

use std::cell::RefCell;
use std::rc::Rc;

use nalgebra::{Matrix3, SVector, Vector3};
use num_complex::Complex64;
use ode_solvers::{Dopri5, System};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::fefferman::graph_height;
use super::levi::{cauchy_leray_model, levi_polynomial, BoundaryFrame};
use super::rho::{from_r4, hessian_from_gradient, to_r4, DefiningFunction, Mat4, C2, R4};
use crate::error::{invalid, Error, Result};
use crate::numerics::stream_rng;

type R3 = [f64; 3];

pub const NORMALIZATION_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeSpec {
    pub rtol: f64,
    pub atol: f64,
    pub newton_tol: f64,
    pub newton_max_iter: u32,
}

impl Default for OdeSpec {
    fn default() -> Self {
        OdeSpec {
            rtol: 1e-9,
            atol: 1e-9,
            newton_tol: 1e-10,
            newton_max_iter: 50,
        }
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn check_normalized<R: DefiningFunction + ?Sized>(rho: &R) -> Result<()> {
    let o = [c(0.0, 0.0); 2];
    let v = rho.value(&o);
    let g = rho.gradient(&o);
    let dev = (g[0].powi(2) + g[1].powi(2) + g[2].powi(2) + (g[3] + 1.0).powi(2)).sqrt();
    if v.abs() > NORMALIZATION_TOL || dev > NORMALIZATION_TOL {
        return invalid(format!(
            "defining function is not normalized at the origin (rho = {v:.3e}, gradient deviation {dev:.3e})"
        ));
    }
    Ok(())
}

/// Real 4×4 matrix of a complex 2×2 matrix.
fn realify(m: &[[Complex64; 2]; 2]) -> Mat4 {
    let mut r = [[0.0; 4]; 4];
    for j in 0..2 {
        for k in 0..2 {
            let (a, b) = (m[j][k].re, m[j][k].im);
            r[2 * j][2 * k] = a;
            r[2 * j][2 * k + 1] = -b;
            r[2 * j + 1][2 * k] = b;
            r[2 * j + 1][2 * k + 1] = a;
        }
    }
    r
}

fn inv2(m: &[[Complex64; 2]; 2]) -> Result<[[Complex64; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.norm() < 1e-14 {
        return Err(Error::Numeric("singular holomorphic Jacobian".into()));
    }
    Ok([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

/// `Φ(w) = (w₁, w₂ − i Σ ρ_{z_j z_k}(0) w_j w_k)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Convexification {
    pub coeffs: [[Complex64; 2]; 2],
}

/// Builds `Φ` for a defining function normalized at the origin.
pub fn convexify<R: DefiningFunction + ?Sized>(rho: &R) -> Result<Convexification> {
    check_normalized(rho)?;
    Ok(Convexification {
        coeffs: rho.holomorphic_hessian(&[c(0.0, 0.0); 2]),
    })
}

impl Convexification {
    pub fn identity() -> Self {
        Convexification {
            coeffs: [[c(0.0, 0.0); 2]; 2],
        }
    }

    fn quad(&self, w: &C2) -> Complex64 {
        let a = &self.coeffs;
        a[0][0] * w[0] * w[0] + (a[0][1] + a[1][0]) * w[0] * w[1] + a[1][1] * w[1] * w[1]
    }

    pub fn apply(&self, w: &C2) -> C2 {
        [w[0], w[1] - c(0.0, 1.0) * self.quad(w)]
    }

    pub fn jacobian(&self, w: &C2) -> [[Complex64; 2]; 2] {
        let a = &self.coeffs;
        let i = c(0.0, 1.0);
        [
            [c(1.0, 0.0), c(0.0, 0.0)],
            [
                -i * (a[0][0] * w[0] * 2.0 + (a[0][1] + a[1][0]) * w[1]),
                c(1.0, 0.0) - i * ((a[0][1] + a[1][0]) * w[0] + a[1][1] * w[1] * 2.0),
            ],
        ]
    }

    pub fn real_jacobian(&self, w: &C2) -> Mat4 {
        realify(&self.jacobian(w))
    }

    pub fn inverse(&self, v: &C2) -> Result<C2> {
        let mut w = *v;
        for _ in 0..50 {
            let g = self.apply(&w)[1] - v[1];
            if g.norm() <= 1e-15 * (1.0 + v[1].norm()) {
                return Ok(w);
            }
            let d = self.jacobian(&w)[1][1];
            if d.norm() < 1e-14 {
                break;
            }
            w[1] -= g / d;
        }
        let g = (self.apply(&w)[1] - v[1]).norm();
        if g <= 1e-13 * (1.0 + v[1].norm()) {
            Ok(w)
        } else {
            Err(Error::NotConverged { iterations: 50, residual: g })
        }
    }
}

/// `ρ ∘ Φ⁻¹`.
#[derive(Clone, Debug)]
pub struct ConvexifiedRho<R> {
    pub inner: R,
    pub phi: Convexification,
}

impl<R: DefiningFunction> ConvexifiedRho<R> {
    fn grad_at(&self, x: &R4) -> R4 {
        let v = from_r4(x);
        let Ok(w) = self.phi.inverse(&v) else {
            return [f64::NAN; 4];
        };
        let Ok(ji) = inv2(&self.phi.jacobian(&w)) else {
            return [f64::NAN; 4];
        };
        let dw = self.inner.dz(&w);
        // ∂_v ρ̃ = (J_Φ⁻¹)ᵀ ∂_w ρ
        let d: C2 = std::array::from_fn(|j| ji[0][j] * dw[0] + ji[1][j] * dw[1]);
        [2.0 * d[0].re, -2.0 * d[0].im, 2.0 * d[1].re, -2.0 * d[1].im]
    }
}

impl<R: DefiningFunction> DefiningFunction for ConvexifiedRho<R> {
    fn value(&self, z: &C2) -> f64 {
        match self.phi.inverse(z) {
            Ok(w) => self.inner.value(&w),
            Err(_) => f64::NAN,
        }
    }
    fn gradient(&self, z: &C2) -> R4 {
        self.grad_at(&to_r4(z))
    }
    fn hessian(&self, z: &C2) -> Mat4 {
        hessian_from_gradient(|x| self.grad_at(x), &to_r4(z), 1e-5)
    }
}

/// `ρ(q + U^H w) / ‖∇ρ(q)‖`, with `U` unitary sending the complex unit
/// normal at `q` to `(0, −i)`.
#[derive(Clone, Debug)]
pub struct NormalizedRho<R> {
    pub inner: R,
    pub q: C2,
    pub u: [[Complex64; 2]; 2],
    pub scale: f64,
    /// Real matrix of `U^H`.
    back: Mat4,
}

impl<R: DefiningFunction> NormalizedRho<R> {
    pub fn new(inner: R, q: &C2) -> Result<Self> {
        let frame = BoundaryFrame::new(&inner, q)?;
        let g = frame.unit_normal;
        let n = [c(g[0], g[1]), c(g[2], g[3])];
        // rows: the conjugate of the unit tangent (−i n̄₂, i n̄₁), then −i n̄;
        // U is the identity when the normal is already (0, −i)
        let i = c(0.0, 1.0);
        let u = [[i * n[1], -i * n[0]], [-i * n[0].conj(), -i * n[1].conj()]];
        let uh = [[u[0][0].conj(), u[1][0].conj()], [u[0][1].conj(), u[1][1].conj()]];
        Ok(NormalizedRho {
            inner,
            q: *q,
            u,
            scale: frame.grad_norm,
            back: realify(&uh),
        })
    }

    /// `A(z) = U(z − q)`.
    pub fn forward(&self, z: &C2) -> C2 {
        let d = [z[0] - self.q[0], z[1] - self.q[1]];
        [self.u[0][0] * d[0] + self.u[0][1] * d[1], self.u[1][0] * d[0] + self.u[1][1] * d[1]]
    }

    /// `A⁻¹(w) = q + U^H w`.
    pub fn backward(&self, w: &C2) -> C2 {
        let x = to_r4(w);
        let q = to_r4(&self.q);
        from_r4(&std::array::from_fn(|i| q[i] + (0..4).map(|j| self.back[i][j] * x[j]).sum::<f64>()))
    }
}

impl<R: DefiningFunction> DefiningFunction for NormalizedRho<R> {
    fn value(&self, z: &C2) -> f64 {
        self.inner.value(&self.backward(z)) / self.scale
    }
    fn gradient(&self, z: &C2) -> R4 {
        let g = self.inner.gradient(&self.backward(z));
        std::array::from_fn(|j| (0..4).map(|i| self.back[i][j] * g[i]).sum::<f64>() / self.scale)
    }
    fn hessian(&self, z: &C2) -> Mat4 {
        let h = self.inner.hessian(&self.backward(z));
        let r = &self.back;
        std::array::from_fn(|a| {
            std::array::from_fn(|b| {
                let mut s = 0.0;
                for i in 0..4 {
                    for j in 0..4 {
                        s += r[i][a] * h[i][j] * r[j][b];
                    }
                }
                s / self.scale
            })
        })
    }
}

type State = SVector<f64, 12>;

struct FlowSystem<'a, R> {
    flow: &'a StraightenFlow<R>,
    error: Rc<RefCell<Option<Error>>>,
}

impl<R: DefiningFunction> System<f64, State> for FlowSystem<'_, R> {
    fn system(&self, _t: f64, y: &State, dy: &mut State) {
        let p = [y[0], y[1], y[2]];
        match self.flow.field_and_jacobian(&p) {
            Ok((v, dv)) => {
                let j = Matrix3::from_column_slice(&y.as_slice()[3..12]);
                let dj = dv * j;
                for i in 0..3 {
                    dy[i] = v[i];
                }
                dy.as_mut_slice()[3..12].copy_from_slice(dj.as_slice());
            }
            Err(e) => {
                self.error.borrow_mut().get_or_insert(e);
                dy.fill(f64::NAN);
            }
        }
    }
}

/// The straightening construction for a normalized, convexified defining
/// function `ρ = −Im z₂ + λ|z₁|² + 2Re(μ z₁ z̄₂) + ν|z₂|² + o(|z|²)`.
#[derive(Clone, Debug)]
pub struct StraightenFlow<R> {
    pub rho: R,
    pub lambda: f64,
    pub radius: f64,
    pub ode: OdeSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiEval {
    /// `Γ⁻¹(z')`.
    pub x: R3,
    pub omega: [f64; 2],
    pub pi: R3,
    pub alpha: f64,
}

fn norm3(v: &R3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

impl<R: DefiningFunction> StraightenFlow<R> {
    pub fn new(rho: R, lambda: f64, radius: f64, ode: OdeSpec) -> Result<Self> {
        check_normalized(&rho)?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return invalid(format!("lambda must be positive, got {lambda}"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return invalid(format!("neighborhood radius must be positive, got {radius}"));
        }
        if !(ode.rtol > 0.0 && ode.atol > 0.0 && ode.newton_tol > 0.0 && ode.newton_max_iter > 0) {
            return invalid("ODE and Newton tolerances must be positive");
        }
        let hh = rho.holomorphic_hessian(&[c(0.0, 0.0); 2]);
        let dev = hh.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
        if dev > 1e-6 {
            return invalid(format!("defining function has a holomorphic Hessian of size {dev:.3e} at the origin"));
        }
        Ok(StraightenFlow { rho, lambda, radius, ode })
    }

    fn check_radius(&self, p: &R3) -> Result<()> {
        if norm3(p) > self.radius {
            return invalid(format!("point {p:?} lies outside the neighborhood of radius {}", self.radius));
        }
        Ok(())
    }

    /// `F(z')` with `ρ(z', F(z')) = 0`.
    pub fn height(&self, p: &R3) -> Result<f64> {
        graph_height(&self.rho, p, 0.0)
    }

    pub fn graph_point(&self, p: &R3) -> Result<C2> {
        Ok(from_r4(&[p[0], p[1], p[2], self.height(p)?]))
    }

    /// `v = (ρ_{x₂}, −ρ_{y₂}, −ρ_{x₁})` on the graph, with its Jacobian.
    pub fn field_and_jacobian(&self, p: &R3) -> Result<(Vector3<f64>, Matrix3<f64>)> {
        let z = self.graph_point(p)?;
        let g = self.rho.gradient(&z);
        let h = self.rho.hessian(&z);
        if g[3] == 0.0 {
            return Err(Error::Numeric("rho_y2 vanishes on the graph".into()));
        }
        let v = Vector3::new(g[2], -g[3], -g[0]);
        let dg = [h[2], h[3].map(|x| -x), h[0].map(|x| -x)];
        let df: R3 = std::array::from_fn(|i| -g[i] / g[3]);
        let dv = Matrix3::from_fn(|r, col| dg[r][col] + dg[r][3] * df[col]);
        Ok((v, dv))
    }

    /// `γ(start; t)` and `∂γ/∂start`.
    pub fn flow(&self, start: &R3, t: f64) -> Result<(Vector3<f64>, Matrix3<f64>)> {
        if t == 0.0 {
            return Ok((Vector3::from(*start), Matrix3::identity()));
        }
        let mut y0 = State::zeros();
        y0[0] = start[0];
        y0[1] = start[1];
        y0[2] = start[2];
        y0.as_mut_slice()[3..12].copy_from_slice(Matrix3::<f64>::identity().as_slice());
        let err = Rc::new(RefCell::new(None));
        let sys = FlowSystem { flow: self, error: err.clone() };
        let mut solver = Dopri5::new(sys, 0.0, t, t, y0, self.ode.rtol, self.ode.atol);
        let res = solver.integrate();
        if let Some(e) = err.borrow_mut().take() {
            return Err(e);
        }
        if let Err(e) = res {
            return Err(Error::Ode { t, reason: e.to_string() });
        }
        let y = solver.y_out().last().copied().ok_or_else(|| Error::Ode {
            t,
            reason: "solver produced no output".into(),
        })?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Ode { t, reason: "non-finite state".into() });
        }
        Ok((Vector3::new(y[0], y[1], y[2]), Matrix3::from_column_slice(&y.as_slice()[3..12])))
    }

    /// `Γ(X₁, Y₁, X₂) = γ((X₁, 0, X₂); Y₁)` and its Jacobian.
    pub fn gamma(&self, x: &R3) -> Result<(Vector3<f64>, Matrix3<f64>)> {
        let (g, j) = self.flow(&[x[0], 0.0, x[2]], x[1])?;
        let (v, _) = self.field_and_jacobian(&[g[0], g[1], g[2]])?;
        let jac = Matrix3::from_columns(&[j.column(0).into_owned(), v, j.column(2).into_owned()]);
        Ok((g, jac))
    }

    /// `Γ⁻¹(z')` by damped Newton, with the Jacobian of `Γ` there.
    pub fn gamma_inverse(&self, p: &R3) -> Result<(R3, Matrix3<f64>)> {
        let target = Vector3::from(*p);
        let mut x = target;
        let (mut g, mut jac) = self.gamma(&[x[0], x[1], x[2]])?;
        let mut res = (g - target).norm();
        let floor = 1e-15 * (1.0 + target.norm());
        for _ in 0..self.ode.newton_max_iter {
            if res <= floor {
                break;
            }
            let step = jac
                .lu()
                .solve(&(target - g))
                .ok_or_else(|| Error::Numeric("singular Jacobian of the straightening map".into()))?;
            let mut s = 1.0;
            let mut improved = false;
            for _ in 0..30 {
                let xn = x + step * s;
                let (gn, jn) = self.gamma(&[xn[0], xn[1], xn[2]])?;
                let rn = (gn - target).norm();
                if rn < res {
                    x = xn;
                    g = gn;
                    jac = jn;
                    res = rn;
                    improved = true;
                    break;
                }
                s *= 0.5;
            }
            if !improved {
                break;
            }
        }
        if res > self.ode.newton_tol {
            return Err(Error::NotConverged {
                iterations: self.ode.newton_max_iter as usize,
                residual: res,
            });
        }
        Ok(([x[0], x[1], x[2]], jac))
    }

    /// Coefficients of the pulled-back contact form `θ_ρ` in `dx₁, dy₁, dx₂`.
    pub fn theta_rho(&self, p: &R3) -> Result<R3> {
        let g = self.rho.gradient(&self.graph_point(p)?);
        let (x1, y1, x2, y2) = (g[0], g[1], g[2], g[3]);
        let k = -1.0 / y2;
        Ok([
            k * (y2 * y1 + x1 * x2),
            -k * (y2 * x1 - y1 * x2),
            k * (y2 * y2 + x2 * x2),
        ])
    }

    pub fn eval(&self, p: &R3) -> Result<PiEval> {
        self.check_radius(p)?;
        let (x, jac) = self.gamma_inverse(p)?;
        let inv = jac
            .try_inverse()
            .ok_or_else(|| Error::Numeric("singular Jacobian of the straightening map".into()))?;
        let a = inv.row(0).transpose();
        let b = inv.row(2).transpose();
        let th = Vector3::from(self.theta_rho(p)?);
        // least squares for θ_ρ = ω₁ dX₁ + ω₂ dX₂
        let (aa, ab, bb) = (a.dot(&a), a.dot(&b), b.dot(&b));
        let (at, bt) = (a.dot(&th), b.dot(&th));
        let det = aa * bb - ab * ab;
        if det.abs() < 1e-300 {
            return Err(Error::Numeric("dX₁ and dX₂ are dependent".into()));
        }
        let w1 = (at * bb - bt * ab) / det;
        let w2 = (aa * bt - ab * at) / det;
        if w2.abs() < 1e-12 {
            return Err(Error::Numeric("omega_2 vanishes".into()));
        }
        let y = w1 / w2;
        Ok(PiEval {
            x,
            omega: [w1, w2],
            pi: [x[0], -y / (4.0 * self.lambda), x[2] + x[0] * y / 2.0],
            alpha: 1.0 / w2,
        })
    }

    pub fn pi(&self, p: &R3) -> Result<R3> {
        Ok(self.eval(p)?.pi)
    }

    /// Central-difference Jacobian of `Π`.
    pub fn jacobian_pi(&self, p: &R3, h: f64) -> Result<Matrix3<f64>> {
        let mut m = Matrix3::zeros();
        for j in 0..3 {
            let mut a = *p;
            let mut b = *p;
            a[j] += h;
            b[j] -= h;
            let (pa, pb) = (self.pi(&a)?, self.pi(&b)?);
            for i in 0..3 {
                m[(i, j)] = (pa[i] - pb[i]) / (2.0 * h);
            }
        }
        Ok(m)
    }

    /// `max |Π*θ_{ρ^λ} − α θ_ρ|` over the three coefficients.
    pub fn contact_residual(&self, p: &R3, h: f64) -> Result<f64> {
        let e = self.eval(p)?;
        let j = self.jacobian_pi(p, h)?;
        let l = self.lambda;
        let cov = Vector3::new(-2.0 * l * e.pi[1], 2.0 * l * e.pi[0], 1.0);
        let pulled = j.transpose() * cov;
        let th = self.theta_rho(p)?;
        Ok((0..3).map(|i| (pulled[i] - e.alpha * th[i]).abs()).fold(0.0, f64::max))
    }

    /// `Ψ = G_{ρ^λ} ∘ (Π, id) ∘ G_ρ⁻¹`.
    pub fn psi(&self, z: &C2) -> Result<C2> {
        let x = to_r4(z);
        let p = [x[0], x[1], x[2]];
        let f = self.height(&p)?;
        let pi = self.pi(&p)?;
        let y = self.lambda * (pi[0] * pi[0] + pi[1] * pi[1]) + x[3] - f;
        Ok([c(pi[0], pi[1]), c(pi[2], y)])
    }
}

/// Builds the straightening for a normalized, convexified `ρ` with
/// `λ = 4M(ρ)(0)`.
pub fn straighten_flow<R: DefiningFunction>(rho: R, lambda: f64, radius: f64, ode: OdeSpec) -> Result<StraightenFlow<R>> {
    StraightenFlow::new(rho, lambda, radius, ode)
}

/// Central-difference step used by [`contact_check`].
pub const CONTACT_FD_STEP: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactCheck {
    pub lambda: f64,
    pub radius: f64,
    /// `Jac_ℝ Π(0)`, row-major.
    pub jacobian_at_origin: [[f64; 3]; 3],
    pub alpha_at_origin: f64,
    pub points: Vec<R3>,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// `max |Π(p) − p|_∞` over the probe points.
    pub max_displacement: f64,
}

/// Evaluates `Π` at the origin and the contact relation at `points` random
/// points of the ball of radius `radius`.
pub fn contact_check<R: DefiningFunction>(flow: &StraightenFlow<R>, points: usize, radius: f64, seed: u64) -> Result<ContactCheck> {
    if !(radius > 0.0 && radius < flow.radius) {
        return invalid(format!("probe radius must lie in (0, {})", flow.radius));
    }
    let j = flow.jacobian_pi(&[0.0; 3], CONTACT_FD_STEP)?;
    let e0 = flow.eval(&[0.0; 3])?;
    let mut rng = stream_rng(seed, 0xc0_7ac7, 0);
    let pts: Vec<R3> = (0..points).map(|_| sample_ball(&mut rng, radius)).collect();
    let mut residuals = Vec::with_capacity(points);
    let mut max_displacement = 0.0f64;
    for p in &pts {
        residuals.push(flow.contact_residual(p, CONTACT_FD_STEP)?);
        let pi = flow.pi(p)?;
        max_displacement = (0..3).map(|i| (pi[i] - p[i]).abs()).fold(max_displacement, f64::max);
    }
    Ok(ContactCheck {
        lambda: flow.lambda,
        radius,
        jacobian_at_origin: std::array::from_fn(|r| std::array::from_fn(|c| j[(r, c)])),
        alpha_at_origin: e0.alpha,
        max_residual: residuals.iter().copied().fold(0.0, f64::max),
        points: pts,
        residuals,
        max_displacement,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaSpec {
    pub radius: f64,
    pub eps: f64,
    pub pairs: u64,
    pub boxes: u64,
    pub seed: u64,
    pub ode: OdeSpec,
}

impl Default for ThetaSpec {
    fn default() -> Self {
        ThetaSpec {
            radius: 0.1,
            eps: 0.25,
            pairs: 200,
            boxes: 12,
            seed: 0,
            ode: OdeSpec::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaProbe {
    pub lambda: f64,
    pub radius: f64,
    pub pairs: u64,
    /// `max |𝔭 − 𝔩_λ∘Θ| / (|𝔭| + |𝔩_λ∘Θ|)`.
    pub max_ratio: f64,
    pub worst_z: R4,
    pub worst_w: R4,
    /// Range of `vol Θ(V) / vol V` over sampled boxes.
    pub volume_ratio: [f64; 2],
    /// Range of the same ratio for projected boundary boxes.
    pub boundary_ratio: [f64; 2],
    pub within_eps: bool,
}

/// `Θ = Ψ ∘ Φ ∘ A` near a boundary point.
pub struct ThetaMap<R> {
    pub frame: BoundaryFrame,
    pub flow: StraightenFlow<ConvexifiedRho<NormalizedRho<R>>>,
}

impl<R: DefiningFunction> ThetaMap<R> {
    pub fn normalized(&self) -> &NormalizedRho<R> {
        &self.flow.rho.inner
    }

    pub fn phi(&self) -> &Convexification {
        &self.flow.rho.phi
    }

    /// `Ψ ∘ Φ` in the normalized coordinates.
    pub fn apply_normalized(&self, w: &C2) -> Result<C2> {
        self.flow.psi(&self.phi().apply(w))
    }

    pub fn apply(&self, z: &C2) -> Result<C2> {
        self.apply_normalized(&self.normalized().forward(z))
    }

    fn real_jacobian_normalized(&self, w: &R4, h: f64) -> Result<Mat4> {
        let mut m = [[0.0; 4]; 4];
        for j in 0..4 {
            let mut a = *w;
            let mut b = *w;
            a[j] += h;
            b[j] -= h;
            let fa = to_r4(&self.apply_normalized(&from_r4(&a))?);
            let fb = to_r4(&self.apply_normalized(&from_r4(&b))?);
            for i in 0..4 {
                m[i][j] = (fa[i] - fb[i]) / (2.0 * h);
            }
        }
        Ok(m)
    }

    /// `z' ↦ (Θ(z', F̂(z')))'` on the normalized boundary graph.
    fn boundary_jacobian(&self, p: &R3, h: f64) -> Result<Matrix3<f64>> {
        let rho = self.normalized();
        let map = |q: &R3| -> Result<R3> {
            let y = graph_height(rho, q, 0.0)?;
            let t = to_r4(&self.apply_normalized(&from_r4(&[q[0], q[1], q[2], y]))?);
            Ok([t[0], t[1], t[2]])
        };
        let mut m = Matrix3::zeros();
        for j in 0..3 {
            let mut a = *p;
            let mut b = *p;
            a[j] += h;
            b[j] -= h;
            let (fa, fb) = (map(&a)?, map(&b)?);
            for i in 0..3 {
                m[(i, j)] = (fa[i] - fb[i]) / (2.0 * h);
            }
        }
        Ok(m)
    }
}

fn det4(m: &Mat4) -> f64 {
    nalgebra::Matrix4::from_fn(|i, j| m[i][j]).determinant()
}

fn sample_ball<const D: usize>(rng: &mut rand_chacha::ChaCha8Rng, r: f64) -> [f64; D] {
    loop {
        let u: [f64; D] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        if u.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
            return u.map(|x| r * x);
        }
    }
}

/// Builds `Θ` at the boundary point `q` and probes the local estimates on
/// a neighborhood of radius `spec.radius` in normalized coordinates.
pub fn theta_composite<R: DefiningFunction>(rho: R, q: &C2, spec: &ThetaSpec) -> Result<(ThetaMap<R>, ThetaProbe)> {
    if !(spec.radius > 0.0 && spec.eps > 0.0) || spec.pairs == 0 || spec.boxes == 0 {
        return invalid("theta probe needs a positive radius, eps, pair and box count");
    }
    let frame = BoundaryFrame::new(&rho, q)?;
    let normalized = NormalizedRho::new(rho, q)?;
    let phi = convexify(&normalized)?;
    let conv = ConvexifiedRho { inner: normalized, phi };
    // the flow and the Newton solves reach a little beyond the sampled ball
    let flow = StraightenFlow::new(conv, frame.lambda_q, 3.0 * spec.radius, spec.ode)?;
    let map = ThetaMap { frame, flow };

    let r = spec.radius;
    let lambda = frame.lambda_q;
    let rho_hat = map.normalized();
    let mut rng = stream_rng(spec.seed, 0x7e7a, 0);
    let mut probe = ThetaProbe {
        lambda,
        radius: r,
        pairs: 0,
        max_ratio: 0.0,
        worst_z: [0.0; 4],
        worst_w: [0.0; 4],
        volume_ratio: [f64::INFINITY, 0.0],
        boundary_ratio: [f64::INFINITY, 0.0],
        within_eps: false,
    };
    let mut tries = 0u64;
    while probe.pairs < spec.pairs {
        tries += 1;
        if tries > 200 * spec.pairs {
            return Err(Error::Numeric("could not sample pairs in the neighborhood".into()));
        }
        let wp: R3 = sample_ball(&mut rng, r);
        let w = from_r4(&[wp[0], wp[1], wp[2], graph_height(rho_hat, &wp, 0.0)?]);
        let d: R4 = sample_ball(&mut rng, r);
        let z = from_r4(&std::array::from_fn(|i| to_r4(&w)[i] + d[i]));
        let zr = to_r4(&z);
        if rho_hat.value(&z) > 0.0 || zr.iter().map(|x| x * x).sum::<f64>().sqrt() > r || d.iter().all(|x| *x == 0.0) {
            continue;
        }
        let p = levi_polynomial(rho_hat, &z, &w);
        let l = cauchy_leray_model(lambda, &map.apply_normalized(&z)?, &map.apply_normalized(&w)?);
        let ratio = (p - l).norm() / (p.norm() + l.norm());
        probe.pairs += 1;
        if ratio > probe.max_ratio {
            probe.max_ratio = ratio;
            probe.worst_z = zr;
            probe.worst_w = to_r4(&w);
        }
    }
    let side = r / 4.0;
    let h = 1e-5;
    for _ in 0..spec.boxes {
        let center: R4 = sample_ball(&mut rng, r / 2.0);
        let mut acc = 0.0;
        for _ in 0..8 {
            let x: R4 = std::array::from_fn(|i| center[i] + side * (rng.random::<f64>() - 0.5));
            acc += det4(&map.real_jacobian_normalized(&x, h)?).abs();
        }
        let v = acc / 8.0;
        probe.volume_ratio = [probe.volume_ratio[0].min(v), probe.volume_ratio[1].max(v)];

        let c3: R3 = sample_ball(&mut rng, r / 2.0);
        let mut acc = 0.0;
        for _ in 0..8 {
            let x: R3 = std::array::from_fn(|i| c3[i] + side * (rng.random::<f64>() - 0.5));
            acc += map.boundary_jacobian(&x, h)?.determinant().abs();
        }
        let v = acc / 8.0;
        probe.boundary_ratio = [probe.boundary_ratio[0].min(v), probe.boundary_ratio[1].max(v)];
    }
    let e = spec.eps;
    let in_band = |b: [f64; 2]| b[0] >= 1.0 - e && b[1] <= 1.0 / (1.0 - e);
    probe.within_eps = probe.max_ratio <= e && in_band(probe.volume_ratio) && in_band(probe.boundary_ratio);
    Ok((map, probe))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain_maps::levi::m_determinant;
    use crate::domain_maps::rho::{Monomial, PolynomialRho, QuadraticRho};

    fn model_mu_i() -> QuadraticRho {
        QuadraticRho::model(1.0, c(0.0, 1.0), 2.0).unwrap()
    }

    #[test]
    fn convexify_examples() {
        let s = QuadraticRho::siegel(1.0).unwrap();
        assert_eq!(convexify(&s).unwrap(), Convexification::identity());
        // −y₂ + 2x₁² = ρ¹ + Re(z₁²), so ρ_{z₁z₁}(0) = 1
        let p = PolynomialRho::new(vec![
            Monomial { coeff: -1.0, powers: [0, 0, 0, 1] },
            Monomial { coeff: 2.0, powers: [2, 0, 0, 0] },
        ])
        .unwrap();
        let phi = convexify(&p).unwrap();
        let w = [c(0.3, -0.2), c(0.1, 0.4)];
        let want = w[1] - c(0.0, 1.0) * w[0] * w[0];
        assert!((phi.apply(&w)[1] - want).norm() < 1e-15);
        assert!((phi.inverse(&phi.apply(&w)).unwrap()[1] - w[1]).norm() < 1e-14);
        let j = phi.real_jacobian(&[c(0.0, 0.0); 2]);
        for i in 0..4 {
            for k in 0..4 {
                assert_eq!(j[i][k], if i == k { 1.0 } else { 0.0 });
            }
        }
        let conv = ConvexifiedRho { inner: &p, phi };
        let hh = conv.holomorphic_hessian(&[c(0.0, 0.0); 2]);
        assert!(hh.iter().flatten().all(|v| v.norm() < 1e-8), "{hh:?}");
        assert!(convexify(&QuadraticRho::ball(1.0).unwrap()).is_err());
    }

    #[test]
    fn model_flow_is_identity() {
        let ode = OdeSpec::default();
        for lam in [0.5, 1.0, 2.0] {
            let f = straighten_flow(QuadraticRho::siegel(lam).unwrap(), lam, 0.5, ode).unwrap();
            let mut rng = stream_rng(2, 0, 0);
            for _ in 0..20 {
                let p: R3 = sample_ball(&mut rng, 0.3);
                let e = f.eval(&p).unwrap();
                for i in 0..3 {
                    assert!((e.pi[i] - p[i]).abs() < 10.0 * ode.rtol, "{e:?} {p:?}");
                }
                assert!((e.alpha - 1.0).abs() < 10.0 * ode.rtol);
            }
        }
    }

    #[test]
    fn contact_derivative_matrix() {
        let f = straighten_flow(model_mu_i(), 1.0, 0.5, OdeSpec::default()).unwrap();
        let j = f.jacobian_pi(&[0.0; 3], 1e-4).unwrap();
        let want = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, -0.5, 0.0, 0.0, 1.0);
        assert!((j - want).abs().max() < 1e-6, "{j}");
        let e = f.eval(&[0.0; 3]).unwrap();
        assert!((e.alpha - 1.0).abs() < 1e-9 && e.omega[0].abs() < 1e-9);
        let det = j.determinant();
        assert!((det.abs() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn contact_relation() {
        let f = straighten_flow(model_mu_i(), 1.0, 0.5, OdeSpec::default()).unwrap();
        let mut rng = stream_rng(3, 0, 0);
        for _ in 0..20 {
            let p: R3 = sample_ball(&mut rng, 0.1);
            let r = f.contact_residual(&p, 1e-4).unwrap();
            assert!(r < 1e-5, "{p:?}: {r}");
        }
        assert!(f.eval(&[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn contact_check_report() {
        let f = straighten_flow(model_mu_i(), 1.0, 0.5, OdeSpec::default()).unwrap();
        let r = contact_check(&f, 20, 0.1, 4).unwrap();
        let want = [[1.0, 0.0, 0.0], [0.0, 1.0, -0.5], [0.0, 0.0, 1.0]];
        for i in 0..3 {
            for k in 0..3 {
                assert!((r.jacobian_at_origin[i][k] - want[i][k]).abs() < 1e-6);
            }
        }
        assert_eq!(r.residuals.len(), 20);
        assert!(r.max_residual < 1e-5);
        assert!(contact_check(&f, 5, 0.6, 4).is_err());
    }

    #[test]
    fn flow_rejects_unnormalized_input() {
        let b = QuadraticRho::ball(1.0).unwrap();
        assert!(straighten_flow(b, 1.0, 0.1, OdeSpec::default()).is_err());
        assert!(straighten_flow(QuadraticRho::siegel(1.0).unwrap(), 0.0, 0.1, OdeSpec::default()).is_err());
    }

    #[test]
    fn normalization_of_a_ball_point() {
        let b = QuadraticRho::ball(2.0).unwrap();
        let q = [c(1.2, 0.0), c(0.0, -1.6)];
        let n = NormalizedRho::new(&b, &q).unwrap();
        let g = n.gradient(&[c(0.0, 0.0); 2]);
        assert!((g[3] + 1.0).abs() < 1e-14 && g[..3].iter().all(|v| v.abs() < 1e-14));
        let w = [c(0.3, 0.1), c(-0.2, 0.05)];
        let back = n.forward(&n.backward(&w));
        assert!((back[0] - w[0]).norm() < 1e-14 && (back[1] - w[1]).norm() < 1e-14);
        // 4M/‖∇ρ‖³ is unchanged by the normalization
        let lam = 4.0 * m_determinant(&n, &[c(0.0, 0.0); 2]).unwrap();
        assert!((lam - BoundaryFrame::new(&b, &q).unwrap().lambda_q).abs() < 1e-12);
    }

    #[test]
    fn theta_on_model_is_identity() {
        let s = QuadraticRho::siegel(1.0).unwrap();
        let spec = ThetaSpec { pairs: 50, boxes: 3, ..Default::default() };
        let (map, probe) = theta_composite(&s, &[c(0.0, 0.0); 2], &spec).unwrap();
        assert!(probe.max_ratio < 1e-7, "{probe:?}");
        assert!(probe.within_eps);
        let z = [c(0.05, -0.02), c(0.03, 0.01)];
        let t = map.apply(&z).unwrap();
        assert!((t[0] - z[0]).norm() < 1e-8 && (t[1] - z[1]).norm() < 1e-8);
    }

    #[test]
    fn theta_maps_ball_onto_model() {
        let b = QuadraticRho::ball(1.0).unwrap();
        let q = [c(0.6, 0.0), c(0.0, 0.8)];
        let spec = ThetaSpec { pairs: 30, boxes: 2, radius: 0.05, ..Default::default() };
        let (map, probe) = theta_composite(&b, &q, &spec).unwrap();
        assert!((probe.lambda - 0.5).abs() < 1e-12);
        let model = QuadraticRho::siegel(probe.lambda).unwrap();
        let mut rng = stream_rng(9, 0, 0);
        for _ in 0..10 {
            // boundary points near q go to the model boundary, interior to interior
            let d: R4 = sample_ball(&mut rng, 0.04);
            let x: R4 = std::array::from_fn(|i| to_r4(&q)[i] + d[i]);
            let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let on = from_r4(&x.map(|v| v / n));
            assert!(model.value(&map.apply(&on).unwrap()).abs() < 1e-8);
            let inside = from_r4(&x.map(|v| 0.98 * v / n));
            assert!(model.value(&map.apply(&inside).unwrap()) < 0.0);
        }
    }

    #[test]
    fn perturbed_siegel_probe_improves_with_radius() {
        // ρ¹ + 0.1Re(z₁z̄₂) + 0.3x₂² + 0.2Re(z₁²) + 0.05x₁³
        let p = PolynomialRho::new(vec![
            Monomial { coeff: -1.0, powers: [0, 0, 0, 1] },
            Monomial { coeff: 1.2, powers: [2, 0, 0, 0] },
            Monomial { coeff: 0.8, powers: [0, 2, 0, 0] },
            Monomial { coeff: 0.1, powers: [1, 0, 1, 0] },
            Monomial { coeff: 0.1, powers: [0, 1, 0, 1] },
            Monomial { coeff: 0.3, powers: [0, 0, 2, 0] },
            Monomial { coeff: 0.05, powers: [3, 0, 0, 0] },
        ])
        .unwrap();
        let o = [c(0.0, 0.0); 2];
        let probes: Vec<ThetaProbe> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&r| theta_composite(&p, &o, &ThetaSpec { radius: r, pairs: 300, boxes: 6, ..Default::default() }).unwrap().1)
            .collect();
        for w in probes.windows(2) {
            assert!(w[1].max_ratio < w[0].max_ratio);
            let dev = |p: &ThetaProbe| (1.0 - p.volume_ratio[0]).max(p.volume_ratio[1] - 1.0);
            let bdev = |p: &ThetaProbe| (1.0 - p.boundary_ratio[0]).max(p.boundary_ratio[1] - 1.0);
            assert!(dev(&w[1]) < dev(&w[0]));
            assert!(bdev(&w[1]) < bdev(&w[0]));
        }
    }
}
