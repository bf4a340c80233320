//! Levi polynomial, Cauchy-Leray map and the bordered complex Hessian.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rho::{to_r4, DefiningFunction, C2, R4};
use crate::error::{invalid, Error, Result};
use crate::numerics::stream_rng;

/// `Σ ρ_{z_j}(w)(z_j − w_j) + ½ Σ ρ_{z_j z_k}(w)(z_j − w_j)(z_k − w_k)`.
pub fn levi_polynomial<R: DefiningFunction + ?Sized>(rho: &R, z: &C2, w: &C2) -> Complex64 {
    let d = [z[0] - w[0], z[1] - w[1]];
    let hh = rho.holomorphic_hessian(w);
    let mut q = Complex64::new(0.0, 0.0);
    for j in 0..2 {
        for k in 0..2 {
            q += hh[j][k] * d[j] * d[k];
        }
    }
    cauchy_leray(rho, z, w) + 0.5 * q
}

/// `Σ ρ_{z_j}(w)(z_j − w_j)`.
pub fn cauchy_leray<R: DefiningFunction + ?Sized>(rho: &R, z: &C2, w: &C2) -> Complex64 {
    let g = rho.dz(w);
    g[0] * (z[0] - w[0]) + g[1] * (z[1] - w[1])
}

/// `𝔩_λ(z, w) = λ w̄₁(z₁ − w₁) + (i/2)(z₂ − w₂)`, the Cauchy-Leray map of
/// `−Im z₂ + λ|z₁|²`.
pub fn cauchy_leray_model(lambda: f64, z: &C2, w: &C2) -> Complex64 {
    lambda * w[0].conj() * (z[0] - w[0]) + Complex64::new(0.0, 0.5) * (z[1] - w[1])
}

fn det3(m: &[[Complex64; 3]; 3]) -> Complex64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// `M(ρ) = −det [[ρ, ρ_{z̄_k}], [ρ_{z_j}, ρ_{z_j z̄_k}]]`.
pub fn m_determinant<R: DefiningFunction + ?Sized>(rho: &R, z: &C2) -> Result<f64> {
    let r = Complex64::new(rho.value(z), 0.0);
    let d = rho.dz(z);
    let h = rho.complex_hessian(z);
    let m = [[r, d[0].conj(), d[1].conj()], [d[0], h[0][0], h[0][1]], [d[1], h[1][0], h[1][1]]];
    let det = -det3(&m);
    if !(det.re.is_finite() && det.im.is_finite()) {
        return Err(Error::Numeric("non-finite bordered determinant".into()));
    }
    if det.im.abs() > 1e-10 * det.re.abs().max(1.0) {
        return Err(Error::Numeric(format!("bordered determinant has imaginary part {:.3e}", det.im)));
    }
    Ok(det.re)
}

/// Geometric data of a defining function at a boundary point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFrame {
    pub q: R4,
    pub unit_normal: R4,
    pub grad_norm: f64,
    pub m: f64,
    /// `4M / ‖∇ρ‖³`.
    pub lambda_q: f64,
}

pub const BOUNDARY_TOL: f64 = 1e-10;

impl BoundaryFrame {
    pub fn new<R: DefiningFunction + ?Sized>(rho: &R, q: &C2) -> Result<Self> {
        let v = rho.value(q);
        if v.abs() > BOUNDARY_TOL {
            return invalid(format!("point is not on the boundary: rho = {v:.3e}"));
        }
        let g = rho.gradient(q);
        let n = rho.grad_norm(q);
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Numeric("vanishing gradient at boundary point".into()));
        }
        let m = m_determinant(rho, q)?;
        if m <= 0.0 {
            return Err(Error::Numeric(format!("M(rho) = {m:.3e} is not positive")));
        }
        Ok(BoundaryFrame {
            q: to_r4(q),
            unit_normal: g.map(|x| x / n),
            grad_norm: n,
            m,
            lambda_q: 4.0 * m / (n * n * n),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeviProbe {
    /// `max ‖z − w‖² / |𝔭(z, w)|` over the sample.
    pub c: f64,
    pub worst_z: R4,
    pub worst_w: R4,
    pub pairs: u64,
}

/// Samples `z ∈ Ω̄` with `0 < ‖z − w‖ ≤ τ` around each boundary point `w`
/// and returns the empirical constant in `‖z − w‖² ≤ c|𝔭(z, w)|`.
pub fn levi_lower_bound_probe<R: DefiningFunction + ?Sized>(
    rho: &R,
    boundary: &[C2],
    tau: f64,
    pairs_per_point: u64,
    seed: u64,
) -> Result<LeviProbe> {
    if !(tau > 0.0 && tau.is_finite()) {
        return invalid(format!("tau must be positive, got {tau}"));
    }
    if boundary.is_empty() || pairs_per_point == 0 {
        return invalid("probe needs boundary points and pairs");
    }
    let mut best = LeviProbe {
        c: 0.0,
        worst_z: [0.0; 4],
        worst_w: [0.0; 4],
        pairs: 0,
    };
    for (i, w) in boundary.iter().enumerate() {
        if rho.value(w).abs() > 1e-8 {
            return invalid(format!("sample {i} is not on the boundary"));
        }
        let mut rng = stream_rng(seed, 0x1e71, i as u64);
        let mut taken = 0;
        let mut tries = 0u64;
        while taken < pairs_per_point {
            tries += 1;
            if tries > 1000 * pairs_per_point {
                return Err(Error::Numeric(format!("could not sample the domain near boundary point {i}")));
            }
            let u: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let n2: f64 = u.iter().map(|x| x * x).sum();
            if n2 > 1.0 || n2 == 0.0 {
                continue;
            }
            let z = [
                w[0] + Complex64::new(tau * u[0], tau * u[1]),
                w[1] + Complex64::new(tau * u[2], tau * u[3]),
            ];
            if rho.value(&z) > 0.0 {
                continue;
            }
            taken += 1;
            let d2 = (z[0] - w[0]).norm_sqr() + (z[1] - w[1]).norm_sqr();
            let p = levi_polynomial(rho, &z, w).norm();
            if p == 0.0 {
                return Err(Error::Numeric(format!("Levi polynomial vanishes at distinct points near sample {i}")));
            }
            let c = d2 / p;
            if c > best.c {
                best.c = c;
                best.worst_z = to_r4(&z);
                best.worst_w = to_r4(w);
            }
        }
        best.pairs += taken;
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain_maps::rho::{from_r4, QuadraticRho, Scaled};
    use crate::numerics::stream_rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_sphere(rng: &mut rand_chacha::ChaCha8Rng, r: f64) -> C2 {
        loop {
            let u: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 0.1 && n <= 1.0 {
                return from_r4(&u.map(|x| r * x / n));
            }
        }
    }

    #[test]
    fn levi_examples() {
        let s = QuadraticRho::siegel(1.0).unwrap();
        let o = [c(0.0, 0.0); 2];
        assert_eq!(levi_polynomial(&s, &o, &o), c(0.0, 0.0));
        assert!((levi_polynomial(&s, &[c(0.0, 0.0), c(1.0, 0.0)], &o) - c(0.0, 0.5)).norm() < 1e-15);
        let ball = QuadraticRho::ball(1.0).unwrap();
        let w = [c(1.0, 0.0), c(0.0, 0.0)];
        assert!((cauchy_leray(&ball, &o, &w) - c(-1.0, 0.0)).norm() < 1e-15);
        let mut rng = stream_rng(4, 0, 0);
        for _ in 0..50 {
            let z = random_sphere(&mut rng, 0.7);
            let w = random_sphere(&mut rng, 0.9);
            let lam = QuadraticRho::siegel(1.7).unwrap();
            assert!((levi_polynomial(&lam, &z, &w) - cauchy_leray(&lam, &z, &w)).norm() < 1e-14);
            assert!((cauchy_leray(&lam, &z, &w) - cauchy_leray_model(1.7, &z, &w)).norm() < 1e-14);
            let z2 = [w[0] + (z[0] - w[0]) * 2.0, w[1] + (z[1] - w[1]) * 2.0];
            assert!((cauchy_leray(&ball, &z2, &w) - cauchy_leray(&ball, &z, &w) * 2.0).norm() < 1e-14);
        }
    }

    #[test]
    fn m_examples() {
        let ball = QuadraticRho::ball(1.0).unwrap();
        let mut rng = stream_rng(5, 0, 0);
        let ms: Vec<f64> = (0..10).map(|_| m_determinant(&ball, &random_sphere(&mut rng, 1.0)).unwrap()).collect();
        for m in &ms {
            assert!((m - 1.0).abs() < 1e-12);
        }
        let spread = ms.iter().cloned().fold(f64::MIN, f64::max) - ms.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread <= 1e-9);
        for lam in [0.5, 1.0, 2.0] {
            let s = QuadraticRho::siegel(lam).unwrap();
            let o = [c(0.0, 0.0); 2];
            assert!((m_determinant(&s, &o).unwrap() - lam / 4.0).abs() < 1e-15);
            let f = BoundaryFrame::new(&s, &o).unwrap();
            assert!((f.lambda_q - lam).abs() < 1e-14);
            assert_eq!(f.unit_normal, [0.0, 0.0, 0.0, -1.0]);
        }
        let f = BoundaryFrame::new(&ball, &[c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        assert!((f.lambda_q - 0.5).abs() < 1e-14);
        assert!(BoundaryFrame::new(&ball, &[c(0.5, 0.0), c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn lambda_q_is_scale_invariant() {
        let ball = QuadraticRho::ball(1.0).unwrap();
        let q = [c(0.0, 0.6), c(-0.8, 0.0)];
        let base = BoundaryFrame::new(&ball, &q).unwrap().lambda_q;
        for s in [0.5, 3.0] {
            let f = BoundaryFrame::new(&Scaled::new(ball, s).unwrap(), &q).unwrap();
            assert!((f.lambda_q - base).abs() < 1e-12 * base);
        }
    }

    #[test]
    fn levi_probe_is_finite() {
        let mut rng = stream_rng(6, 0, 0);
        let ball = QuadraticRho::ball(1.0).unwrap();
        let pts: Vec<C2> = (0..20).map(|_| random_sphere(&mut rng, 1.0)).collect();
        let p = levi_lower_bound_probe(&ball, &pts, 0.5, 200, 1).unwrap();
        // for the unit ball Re(1 − ⟨z, w⟩) ≥ ½‖z − w‖², so c ≤ 2
        assert!(p.c.is_finite() && p.c > 0.0 && p.c <= 2.0 + 1e-12, "{p:?}");
        assert_eq!(p.pairs, 4000);

        let s = QuadraticRho::siegel(1.0).unwrap();
        let pts: Vec<C2> = (0..20)
            .map(|_| {
                let z1 = c(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
                [z1, c(rng.random_range(-0.5..0.5), z1.norm_sqr())]
            })
            .collect();
        let p = levi_lower_bound_probe(&s, &pts, 0.5, 200, 1).unwrap();
        assert!(p.c.is_finite() && p.c > 0.0);
        assert!(levi_lower_bound_probe(&s, &pts, 0.0, 200, 1).is_err());
    }
}
