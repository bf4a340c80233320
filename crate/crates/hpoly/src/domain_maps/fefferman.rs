//! Fefferman's hypersurface measure in ℂ².
//!
//! Against Euclidean surface measure `ds` the density is
//! `4^{2/3} M(ρ)^{1/3} / ‖∇ρ‖`. On the boundary `M` is homogeneous of
//! degree three in `ρ`, so the density does not depend on the choice of
//! defining function.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::levi::m_determinant;
use super::rho::{from_r4, to_r4, DefiningFunction, C2, R4};
use crate::error::{invalid, Error, Result};
use crate::numerics::compensated_sum;

pub fn fefferman_density<R: DefiningFunction + ?Sized>(rho: &R, q: &C2) -> Result<f64> {
    let m = m_determinant(rho, q)?;
    if m <= 0.0 {
        return Err(Error::Numeric(format!("M(rho) = {m:.3e} is not positive")));
    }
    Ok(4f64.powf(2.0 / 3.0) * m.cbrt() / rho.grad_norm(q))
}

/// `4M(ρ)(q) / ‖∇ρ(q)‖³`.
pub fn lambda_q<R: DefiningFunction + ?Sized>(rho: &R, q: &C2) -> Result<f64> {
    let m = m_determinant(rho, q)?;
    if m <= 0.0 {
        return Err(Error::Numeric(format!("M(rho) = {m:.3e} is not positive")));
    }
    let n = rho.grad_norm(q);
    Ok(4.0 * m / (n * n * n))
}

/// How the boundary is parametrized for quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Parametrization {
    /// The domain is star-shaped about `center`; boundary points are
    /// `center + r(θ)θ` over the unit sphere in Hopf coordinates.
    Star { center: R4 },
    /// The boundary over the unit box `[0, 1]³` of `(x₁, y₁, x₂)`, as a
    /// graph `y₂ = F(x₁, y₁, x₂)`.
    GraphOverUnitBox,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeffermanQuadrature {
    /// Midpoint nodes per coordinate.
    pub resolution: u32,
}

impl Default for FeffermanQuadrature {
    fn default() -> Self {
        FeffermanQuadrature { resolution: 48 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeffermanResult {
    pub integral: f64,
    pub area: f64,
    pub nodes: u64,
    /// `(node, density)` for a thinned subset of the nodes.
    pub samples: Vec<(R4, f64)>,
}

const ROOT_TOL: f64 = 1e-15;

/// Smallest `r > 0` with `ρ(c + rθ) = 0`.
fn ray_root<R: DefiningFunction + ?Sized>(rho: &R, c: &R4, th: &R4) -> Result<f64> {
    let at = |r: f64| -> R4 { std::array::from_fn(|i| c[i] + r * th[i]) };
    let f = |r: f64| rho.value(&from_r4(&at(r)));
    if f(0.0) >= 0.0 {
        return invalid("star center is not inside the domain");
    }
    let mut hi = 1e-3;
    while f(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::Numeric("ray does not leave the domain".into()));
        }
    }
    let mut lo = if hi > 1e-3 { hi / 2.0 } else { 0.0 };
    // bisection to a bracket, then Newton polish
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 * hi {
            break;
        }
    }
    let mut r = 0.5 * (lo + hi);
    for _ in 0..8 {
        let p = from_r4(&at(r));
        let g = rho.gradient(&p);
        let d: f64 = (0..4).map(|i| g[i] * th[i]).sum();
        if d == 0.0 {
            break;
        }
        let step = rho.value(&p) / d;
        let nr = (r - step).clamp(lo, hi);
        if (nr - r).abs() <= ROOT_TOL * r {
            r = nr;
            break;
        }
        r = nr;
    }
    Ok(r)
}

/// Solves `ρ(x₁, y₁, x₂, y₂) = 0` for `y₂` near `guess`.
pub(crate) fn graph_height<R: DefiningFunction + ?Sized>(rho: &R, zp: &[f64; 3], guess: f64) -> Result<f64> {
    let mut y = guess;
    for _ in 0..60 {
        let p = from_r4(&[zp[0], zp[1], zp[2], y]);
        let v = rho.value(&p);
        let d = rho.gradient(&p)[3];
        if d == 0.0 || !d.is_finite() {
            return Err(Error::Numeric("boundary is not a graph over the horizontal coordinates".into()));
        }
        let step = v / d;
        y -= step;
        if step.abs() <= 1e-15 * (1.0 + y.abs()) {
            return Ok(y);
        }
    }
    let p = from_r4(&[zp[0], zp[1], zp[2], y]);
    if rho.value(&p).abs() < 1e-12 {
        Ok(y)
    } else {
        Err(Error::NotConverged {
            iterations: 60,
            residual: rho.value(&p).abs(),
        })
    }
}

fn mid(i: u32, n: u32) -> f64 {
    (i as f64 + 0.5) / n as f64
}

/// Surface quadrature of the Fefferman density.
pub fn fefferman_integral<R: DefiningFunction + ?Sized>(
    rho: &R,
    param: &Parametrization,
    quad: &FeffermanQuadrature,
) -> Result<FeffermanResult> {
    let n = quad.resolution;
    if n < 2 {
        return invalid("quadrature resolution must be at least 2");
    }
    let thin = (n / 8).max(1);
    // per node: (density·weight, weight, optional sample)
    type Node = (f64, f64, Option<(R4, f64)>);
    let slab = |i: u32| -> Result<Vec<Node>> {
        let mut out = Vec::with_capacity((n * n) as usize);
        for j in 0..n {
            for k in 0..n {
                let keep = i % thin == 0 && j % thin == 0 && k % thin == 0;
                let (p, w) = match param {
                    Parametrization::Star { center } => {
                        // s = sin²η; dΩ = ½ ds dξ₁ dξ₂
                        let s = mid(i, n);
                        let (x1, x2) = (2.0 * std::f64::consts::PI * mid(j, n), 2.0 * std::f64::consts::PI * mid(k, n));
                        let (ce, se) = ((1.0 - s).sqrt(), s.sqrt());
                        let th = [ce * x1.cos(), ce * x1.sin(), se * x2.cos(), se * x2.sin()];
                        let r = ray_root(rho, center, &th)?;
                        let p: R4 = std::array::from_fn(|m| center[m] + r * th[m]);
                        let g = rho.gradient(&from_r4(&p));
                        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                        let cosang = (0..4).map(|m| g[m] * th[m]).sum::<f64>().abs();
                        let d_omega = 0.5 * (2.0 * std::f64::consts::PI).powi(2) / (n as f64).powi(3);
                        (p, r.powi(3) * gn / cosang * d_omega)
                    }
                    Parametrization::GraphOverUnitBox => {
                        let zp = [mid(i, n), mid(j, n), mid(k, n)];
                        let y = graph_height(rho, &zp, 0.0)?;
                        let p = [zp[0], zp[1], zp[2], y];
                        let g = rho.gradient(&from_r4(&p));
                        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                        (p, gn / g[3].abs() / (n as f64).powi(3))
                    }
                };
                let d = fefferman_density(rho, &from_r4(&p))?;
                out.push((d * w, w, keep.then_some((p, d))));
            }
        }
        Ok(out)
    };
    let slabs: Vec<Result<Vec<Node>>> = (0..n).into_par_iter().map(slab).collect();
    let mut nodes = Vec::with_capacity((n as usize).pow(3));
    for s in slabs {
        nodes.extend(s?);
    }
    Ok(FeffermanResult {
        integral: compensated_sum(nodes.iter().map(|t| t.0)),
        area: compensated_sum(nodes.iter().map(|t| t.1)),
        nodes: nodes.len() as u64,
        samples: nodes.into_iter().filter_map(|t| t.2).collect(),
    })
}

/// Point on the boundary reached from `center` in direction `dir`.
pub fn star_boundary_point<R: DefiningFunction + ?Sized>(rho: &R, center: &C2, dir: &C2) -> Result<C2> {
    let c = to_r4(center);
    let d = to_r4(dir);
    let len = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if len == 0.0 {
        return invalid("direction must be nonzero");
    }
    let th = d.map(|v| v / len);
    let r = ray_root(rho, &c, &th)?;
    Ok(from_r4(&std::array::from_fn(|i| c[i] + r * th[i])))
}
