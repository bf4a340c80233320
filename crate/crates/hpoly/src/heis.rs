//! The first Heisenberg group `ℂ × ℝ` with its Korányi gauge, dilations,
//! boxes `v·I^r` and the lattice `Σ_k`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct HPoint {
    pub z1: Complex64,
    pub x2: f64,
}

impl HPoint {
    pub const ORIGIN: HPoint = HPoint {
        z1: Complex64 { re: 0.0, im: 0.0 },
        x2: 0.0,
    };

    pub fn new(x1: f64, y1: f64, x2: f64) -> Self {
        debug_assert!(x1.is_finite() && y1.is_finite() && x2.is_finite());
        HPoint {
            z1: Complex64::new(x1, y1),
            x2,
        }
    }

    pub fn from_parts(z1: Complex64, x2: f64) -> Self {
        HPoint { z1, x2 }
    }

    pub fn try_new(x1: f64, y1: f64, x2: f64) -> Result<Self> {
        if x1.is_finite() && y1.is_finite() && x2.is_finite() {
            Ok(HPoint::new(x1, y1, x2))
        } else {
            invalid("Heisenberg point with non-finite coordinate")
        }
    }

    pub fn coords(&self) -> [f64; 3] {
        [self.z1.re, self.z1.im, self.x2]
    }
}

impl TryFrom<[f64; 3]> for HPoint {
    type Error = Error;
    fn try_from(c: [f64; 3]) -> Result<Self> {
        HPoint::try_new(c[0], c[1], c[2])
    }
}

impl From<HPoint> for [f64; 3] {
    fn from(p: HPoint) -> Self {
        p.coords()
    }
}

/// `a · b = (a₁ + b₁, a₂ + b₂ + 2 Im(a₁ b̄₁))`.
pub fn group_mul(a: &HPoint, b: &HPoint) -> HPoint {
    HPoint {
        z1: a.z1 + b.z1,
        x2: a.x2 + b.x2 + 2.0 * (a.z1 * b.z1.conj()).im,
    }
}

pub fn group_inv(a: &HPoint) -> HPoint {
    HPoint {
        z1: -a.z1,
        x2: -a.x2,
    }
}

/// `inv(b) · a`, the coordinates of `a` seen from `b`.
pub fn relative(b: &HPoint, a: &HPoint) -> HPoint {
    group_mul(&group_inv(b), a)
}

/// Fourth power of the Korányi gauge, `|z₁|⁴ + x₂²`.
pub fn gauge4(a: &HPoint) -> f64 {
    let n = a.z1.norm_sqr();
    n * n + a.x2 * a.x2
}

pub fn gauge(a: &HPoint) -> f64 {
    gauge4(a).sqrt().sqrt()
}

pub fn dist(a: &HPoint, b: &HPoint) -> f64 {
    gauge(&relative(b, a))
}

fn check_xi(xi: f64) -> Result<()> {
    if xi > 0.0 && xi.is_finite() {
        Ok(())
    } else {
        invalid(format!("dilation factor must be positive, got {xi}"))
    }
}

pub fn dilate(xi: f64, a: &HPoint) -> Result<HPoint> {
    check_xi(xi)?;
    Ok(dilate_unchecked(xi, a))
}

pub(crate) fn dilate_unchecked(xi: f64, a: &HPoint) -> HPoint {
    HPoint {
        z1: a.z1 * xi,
        x2: a.x2 * xi * xi,
    }
}

/// Dilation centred at `w`: `w · δ_ξ(w⁻¹ · a)`.
pub fn dilate_about(w: &HPoint, xi: f64, a: &HPoint) -> Result<HPoint> {
    check_xi(xi)?;
    Ok(group_mul(w, &dilate_unchecked(xi, &relative(w, a))))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KoranyiBall {
    pub center: HPoint,
    pub radius: f64,
}

impl KoranyiBall {
    pub fn new(center: HPoint, radius: f64) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return invalid(format!("ball radius must be finite and >= 0, got {radius}"));
        }
        Ok(KoranyiBall { center, radius })
    }

    /// Closed ball membership.
    pub fn contains(&self, a: &HPoint) -> bool {
        let r2 = self.radius * self.radius;
        gauge4(&relative(&self.center, a)) <= r2 * r2
    }

    /// `r − dist(a, center)`; nonnegative exactly on the ball.
    pub fn margin(&self, a: &HPoint) -> f64 {
        self.radius - dist(a, &self.center)
    }

    /// Euclidean bounding box `[lo, hi]` in `(x₁, y₁, x₂)` coordinates.
    pub fn aabb(&self) -> ([f64; 3], [f64; 3]) {
        let c = self.center;
        let r = self.radius;
        // x₂ = c₂ + p₂ + 2 Im(c₁ p̄₁) with |p₁| ≤ r, |p₂| ≤ r²
        let v = r * r + 2.0 * c.z1.norm() * r;
        (
            [c.z1.re - r, c.z1.im - r, c.x2 - v],
            [c.z1.re + r, c.z1.im + r, c.x2 + v],
        )
    }
}

/// `anchor · I^side` with `I^r = [0,r]² × [0,r²]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HBox {
    pub anchor: HPoint,
    pub side: f64,
}

impl HBox {
    pub fn new(anchor: HPoint, side: f64) -> Result<Self> {
        if !(side > 0.0 && side.is_finite()) {
            return invalid(format!("box side must be positive, got {side}"));
        }
        Ok(HBox { anchor, side })
    }

    /// The unit box `I = I¹` at the origin.
    pub fn unit() -> Self {
        HBox {
            anchor: HPoint::ORIGIN,
            side: 1.0,
        }
    }

    /// Membership in `anchor·I^r`, or in `anchor·Î^r` when `hat` is set.
    /// `Î^r` is `I^{2r}` translated by `−(r/2 + i r/2, 3r²/2)`.
    pub fn contains(&self, hat: bool, a: &HPoint) -> bool {
        let p = relative(&self.anchor, a);
        let r = self.side;
        let (lo, hi, vlo, vhi) = if hat {
            (-0.5 * r, 1.5 * r, -1.5 * r * r, 2.5 * r * r)
        } else {
            (0.0, r, 0.0, r * r)
        };
        (lo..=hi).contains(&p.z1.re) && (lo..=hi).contains(&p.z1.im) && (vlo..=vhi).contains(&p.x2)
    }

    /// Point of `anchor·I^r` with unit-cube coordinates `u ∈ [0,1]³`.
    pub fn point_at(&self, u: [f64; 3]) -> HPoint {
        let r = self.side;
        group_mul(&self.anchor, &HPoint::new(u[0] * r, u[1] * r, u[2] * r * r))
    }

    pub fn corners(&self) -> [HPoint; 8] {
        std::array::from_fn(|i| {
            self.point_at([(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64])
        })
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(4)
    }
}

pub fn box_membership(b: &HBox, hat: bool, a: &HPoint) -> bool {
    b.contains(hat, a)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeIndex {
    pub p: i64,
    pub q: i64,
    pub r: i64,
}

impl LatticeIndex {
    pub fn in_sigma(&self, k: u32) -> bool {
        let k = k as i64;
        (0..k).contains(&self.p)
            && (0..k).contains(&self.q)
            && -2 * self.q <= self.r
            && self.r <= k * k - 1 + 2 * self.p
    }

    /// `v_pqr = (p/k + i q/k, r/k²)`.
    pub fn point(&self, k: u32) -> HPoint {
        let k = k as f64;
        HPoint::new(self.p as f64 / k, self.q as f64 / k, self.r as f64 / (k * k))
    }
}

/// `|Σ_k| = k⁴ + 2k³ − 2k²`.
pub fn sigma_k_count(k: u32) -> u64 {
    let k = k as u64;
    k.pow(4) + 2 * k.pow(3) - 2 * k.pow(2)
}

pub fn sigma_k_indices(k: u32) -> Result<Vec<LatticeIndex>> {
    if k == 0 {
        return invalid("lattice order k must be at least 1");
    }
    let ki = k as i64;
    let mut out = Vec::with_capacity(sigma_k_count(k) as usize);
    for p in 0..ki {
        for q in 0..ki {
            for r in -2 * q..=ki * ki - 1 + 2 * p {
                out.push(LatticeIndex { p, q, r });
            }
        }
    }
    Ok(out)
}

pub fn sigma_k_lattice(k: u32) -> Result<Vec<HPoint>> {
    Ok(sigma_k_indices(k)?.iter().map(|ix| ix.point(k)).collect())
}
