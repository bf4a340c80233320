use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::BallConfiguration;
use crate::error::{invalid, Result};
use crate::heis::{
    dilate_unchecked, dist, group_mul, sigma_k_count, sigma_k_lattice, HBox, HPoint, KoranyiBall,
};
use crate::siegel::{BoundaryPoint, Cut, FPolyhedron, SiegelDomain};

/// `5√5π / (3√2)`, the upper bound for the tiling constant.
pub fn lkor_upper() -> f64 {
    5.0 * 5f64.sqrt() * PI / (3.0 * 2f64.sqrt())
}

/// `4√2 / (π² 3⁷)`, the lower bound for the tiling constant.
pub fn lkor_lower() -> f64 {
    4.0 * 2f64.sqrt() / (PI * PI * 3f64.powi(7))
}

/// Cut size `√5 / (√2 k²)` of `P_k`.
pub fn pk_size(k: u32) -> f64 {
    (2.5f64).sqrt() / (k as f64 * k as f64)
}

/// Korányi radius `(5/2)^{1/4} / k` of the projected cuts of `P_k`.
pub fn pk_radius(k: u32) -> f64 {
    pk_size(k).sqrt()
}

fn pk_centers(k: u32) -> Result<Vec<HPoint>> {
    let kf = k as f64;
    let shift = HPoint::new(0.5 / kf, 0.5 / kf, 0.5 / (kf * kf));
    Ok(sigma_k_lattice(k)?
        .iter()
        .map(|v| group_mul(v, &shift))
        .collect())
}

/// The `f_S`-polyhedron with one cut of size `√5/(√2k²)` over the centre
/// of every tile `v_pqr · I^{1/k}`.
pub fn build_pk(k: u32) -> Result<FPolyhedron> {
    if k == 0 {
        return invalid("k must be at least 1");
    }
    let size = pk_size(k);
    let cuts = pk_centers(k)?
        .iter()
        .map(|u| Cut::new(BoundaryPoint::from_hpoint(u), size))
        .collect::<Result<Vec<_>>>()?;
    FPolyhedron::new(SiegelDomain::standard(), cuts)
}

/// Projections of the cuts of `P_k`.
pub fn pk_configuration(k: u32) -> Result<BallConfiguration> {
    if k == 0 {
        return invalid("k must be at least 1");
    }
    let r = pk_radius(k);
    let balls = pk_centers(k)?
        .into_iter()
        .map(|c| KoranyiBall::new(c, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(BallConfiguration::new(balls))
}

pub fn upper_bound_closed(k: u32) -> Result<f64> {
    if k == 0 {
        return invalid("k must be at least 1");
    }
    let kf = k as f64;
    Ok(lkor_upper() * sigma_k_count(k) as f64 / kf.powi(6))
}

/// How tightly the `P_k` balls wrap their tiles and sit in `Î`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TileContainment {
    pub k: u32,
    /// `min (r − max corner distance)`; nonnegative iff every tile lies in its ball.
    pub tile_margin: f64,
    /// Smallest distance from a ball's extent to the faces of `Î`;
    /// negative values mean a ball pokes out of `Î`.
    pub hat_margin: f64,
    pub balls_outside_hat: usize,
}

/// Maximum of `√(r⁴ − s⁴) + 2as` over `s ∈ [0, r]` (concave in `s`).
fn max_vertical_reach(r: f64, a: f64) -> f64 {
    let g = |s: f64| (r.powi(4) - s.powi(4)).max(0.0).sqrt() + 2.0 * a * s;
    let (mut lo, mut hi) = (0.0, r);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if g(m1) < g(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    g(0.5 * (lo + hi))
}

/// Exact containment margins for `P_k`: the gauge is convex along the
/// tile in local coordinates, so its maximum over a tile sits at a corner.
pub fn tile_containment(k: u32) -> Result<TileContainment> {
    let cfg = pk_configuration(k)?;
    let lattice = sigma_k_lattice(k)?;
    let side = 1.0 / k as f64;
    let mut tile_margin = f64::INFINITY;
    let mut hat_margin = f64::INFINITY;
    let mut outside = 0;
    for (v, b) in lattice.iter().zip(&cfg.balls) {
        let tile = HBox::new(*v, side)?;
        let far = tile
            .corners()
            .iter()
            .map(|c| dist(c, &b.center))
            .fold(0.0, f64::max);
        tile_margin = tile_margin.min(b.radius - far);

        let c = b.center;
        let r = b.radius;
        let reach = max_vertical_reach(r, c.z1.norm());
        let m = [
            c.z1.re - r + 0.5,
            1.5 - (c.z1.re + r),
            c.z1.im - r + 0.5,
            1.5 - (c.z1.im + r),
            c.x2 - reach + 1.5,
            2.5 - (c.x2 + reach),
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
        if m < 0.0 {
            outside += 1;
        }
        hat_margin = hat_margin.min(m);
    }
    Ok(TileContainment {
        k,
        tile_margin,
        hat_margin,
        balls_outside_hat: outside,
    })
}

/// Copies of `cfg` shrunk into every tile of `Σ_k` by `z ↦ v·δ_{1/k}(z)`.
pub fn subdivide_scale(cfg: &BallConfiguration, k: u32) -> Result<BallConfiguration> {
    if cfg.target != HBox::unit() {
        return invalid("subdivision is defined for configurations targeting the unit box");
    }
    let lattice = sigma_k_lattice(k)?;
    let xi = 1.0 / k as f64;
    let mut balls = Vec::with_capacity(lattice.len() * cfg.balls.len());
    for v in &lattice {
        for b in &cfg.balls {
            balls.push(KoranyiBall::new(
                group_mul(v, &dilate_unchecked(xi, &b.center)),
                b.radius * xi,
            )?);
        }
    }
    Ok(BallConfiguration {
        balls,
        target: cfg.target,
    })
}
