use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trend::TrendReport;
use crate::error::{invalid, Error, Result};
use crate::numerics::{compensated_sum, stream_rng};

/// How the defining product of `P_n` is read.
///
/// `PerFactor` requires every factor `(n/π)|z − ζ_k|⁻¹` to stay below one,
/// which removes a disc of radius `π/n` around each `2n`-th root of unity.
/// `Literal` bounds the whole product, i.e. `|z^{2n} − 1| > (n/π)^{2n}`,
/// and is empty once `n ≥ 4`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reading {
    #[default]
    PerFactor,
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemniscateSpec {
    pub reading: Reading,
    pub radial: u32,
    pub angular: u32,
    pub sandwich_samples: u64,
    pub seed: u64,
}

impl Default for LemniscateSpec {
    fn default() -> Self {
        LemniscateSpec {
            reading: Reading::PerFactor,
            radial: 2000,
            angular: 4000,
            sandwich_samples: 10_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemniscateRow {
    pub n: u32,
    /// `vol(𝔻∖P_n)` by polar quadrature.
    pub gap: f64,
    pub n_gap: f64,
    pub annulus_lower: f64,
    pub annulus_upper: f64,
    pub within_annulus: bool,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub inner_samples: u64,
    pub inner_violations: u64,
    /// Points of `P_n` found by rejection from the disc.
    pub outer_samples: u64,
    pub outer_violations: u64,
    pub sandwich_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemniscateReport {
    pub spec: LemniscateSpec,
    pub rows: Vec<LemniscateRow>,
    pub trend: TrendReport,
}

/// Angular distance from `theta` to the nearest `2n`-th root of unity.
fn root_offset(theta: f64, n: u32) -> f64 {
    let step = PI / n as f64;
    (theta - (theta / step).round() * step).abs()
}

/// Membership in `P_n` for a point of the unit disc.
pub fn in_pn(z: Complex64, n: u32, reading: Reading) -> bool {
    if z.norm_sqr() >= 1.0 {
        return false;
    }
    let eps = PI / n as f64;
    match reading {
        Reading::PerFactor => {
            let (r, theta) = z.to_polar();
            let a = root_offset(theta, n);
            r * r + 1.0 - 2.0 * r * a.cos() > eps * eps
        }
        Reading::Literal => (z.powu(2 * n) - 1.0).norm() > (1.0 / eps).powi(2 * n as i32),
    }
}

/// `1 − π/n`, radius of the disc contained in `P_n`.
pub fn inner_radius(n: u32) -> f64 {
    1.0 - PI / n as f64
}

/// `1 − √3π/(2n)`, radius of the disc containing `P_n`.
pub fn outer_radius(n: u32) -> f64 {
    1.0 - 3f64.sqrt() * PI / (2.0 * n as f64)
}

/// Areas of the annuli between the sandwich discs and the unit circle,
/// ordered `[lower, upper]`.
pub fn annulus_bounds(n: u32) -> [f64; 2] {
    let ring = |r: f64| PI * (1.0 - r.max(0.0).powi(2));
    [ring(outer_radius(n)), ring(inner_radius(n))]
}

/// `vol(𝔻∖P_n)` on a midpoint polar grid.
pub fn gap_polar(n: u32, reading: Reading, radial: u32, angular: u32) -> Result<f64> {
    if radial == 0 || angular == 0 {
        return invalid("polar grid needs positive resolution");
    }
    let dr = 1.0 / radial as f64;
    let dt = 2.0 * PI / angular as f64;
    let rows: Vec<f64> = (0..angular)
        .into_par_iter()
        .map(|j| {
            let theta = (j as f64 + 0.5) * dt - PI;
            let e = Complex64::from_polar(1.0, theta);
            compensated_sum((0..radial).filter_map(|i| {
                let r = (i as f64 + 0.5) * dr;
                (!in_pn(e * r, n, reading)).then_some(r)
            }))
        })
        .collect();
    let v = compensated_sum(rows) * dr * dt;
    if !v.is_finite() {
        return Err(Error::Numeric(format!("lemniscate quadrature returned {v}")));
    }
    Ok(v)
}

/// `vol(𝔻∖P_n)` for the per-factor reading by integrating the boundary
/// radius `cos α − √((π/n)² − sin²α)` along each ray.
pub fn gap_per_factor_radial(n: u32, nodes: u32) -> f64 {
    let eps = PI / n as f64;
    let half = PI / (2.0 * n as f64);
    let h = half / nodes as f64;
    let s = compensated_sum((0..nodes).map(|i| {
        let a = (i as f64 + 0.5) * h;
        let r = (a.cos() - (eps * eps - a.sin().powi(2)).sqrt()).max(0.0);
        0.5 * (1.0 - r * r)
    }));
    4.0 * n as f64 * s * h
}

fn uniform_disc<R: Rng>(rng: &mut R, radius: f64) -> Complex64 {
    let r = radius * rng.random::<f64>().sqrt();
    Complex64::from_polar(r, rng.random::<f64>() * 2.0 * PI - PI)
}

fn lemniscate_row(n: u32, spec: &LemniscateSpec) -> Result<LemniscateRow> {
    let gap = gap_polar(n, spec.reading, spec.radial, spec.angular)?;
    let [lo, hi] = annulus_bounds(n);
    let (r_in, r_out) = (inner_radius(n), outer_radius(n));

    let mut rng = stream_rng(spec.seed, n as u64, 1);
    let mut inner_samples = 0;
    let mut inner_violations = 0;
    if r_in > 0.0 {
        for _ in 0..spec.sandwich_samples {
            inner_samples += 1;
            if !in_pn(uniform_disc(&mut rng, r_in), n, spec.reading) {
                inner_violations += 1;
            }
        }
    }

    let mut rng = stream_rng(spec.seed, n as u64, 2);
    let mut outer_samples = 0;
    let mut outer_violations = 0;
    let max_attempts = spec.sandwich_samples.saturating_mul(1000);
    let mut attempts = 0;
    while outer_samples < spec.sandwich_samples && attempts < max_attempts {
        attempts += 1;
        let z = uniform_disc(&mut rng, 1.0);
        if in_pn(z, n, spec.reading) {
            outer_samples += 1;
            if z.norm() >= r_out {
                outer_violations += 1;
            }
        }
    }

    Ok(LemniscateRow {
        n,
        gap,
        n_gap: n as f64 * gap,
        annulus_lower: lo,
        annulus_upper: hi,
        within_annulus: lo <= gap && gap <= hi,
        inner_radius: r_in,
        outer_radius: r_out,
        inner_samples,
        inner_violations,
        outer_samples,
        outer_violations,
        sandwich_holds: inner_violations == 0 && outer_violations == 0,
    })
}

/// Tabulates `n·vol(𝔻∖P_n)` with sandwich and annulus checks for each `n`.
pub fn lemniscate_demo(n_list: &[u32], spec: &LemniscateSpec) -> Result<LemniscateReport> {
    if n_list.iter().any(|n| *n < 2) {
        return invalid("lemniscate demo needs n >= 2");
    }
    let rows = n_list
        .par_iter()
        .map(|n| lemniscate_row(*n, spec))
        .collect::<Result<Vec<_>>>()?;
    let trend = TrendReport::new(
        rows.iter().map(|r| r.n as u64).collect(),
        rows.iter().map(|r| r.n_gap).collect(),
    )?;
    Ok(LemniscateReport {
        spec: *spec,
        rows,
        trend,
    })
}

/// Boundary of `P_n` (per-factor reading) as `(θ, r)` samples.
pub fn boundary_curve(n: u32, points: u32) -> Vec<(f64, f64)> {
    let eps = PI / n as f64;
    (0..=points)
        .map(|j| {
            let theta = 2.0 * PI * j as f64 / points as f64;
            let a = root_offset(theta, n);
            (theta, (a.cos() - (eps * eps - a.sin().powi(2)).sqrt()).max(0.0))
        })
        .collect()
}
