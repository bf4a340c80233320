//! Euclidean power diagrams in the plane and horizontal power diagrams of
//! Korányi balls, with the integrated gap functional.

use std::cmp::Ordering;

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::heis::{gauge4, group_mul, relative, HPoint, KoranyiBall};
use crate::numerics::{
    integrate_grid, integrate_union, uniform, BoxUnion, Estimate, IntegrationSpec, Method,
};
use crate::siegel::{cut_projection, gap_volume_mc, Cut, FPolyhedron, SiegelDomain};
use crate::spatial::SquareIndex;

/// Relative gap below which two powers count as tied.
const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: [f64; 2],
    pub radius: f64,
}

pub fn pow_euclid(z: [f64; 2], d: &Disk) -> f64 {
    let dx = z[0] - d.center[0];
    let dy = z[1] - d.center[1];
    dx * dx + dy * dy - d.radius * d.radius
}

fn unique_min<I: Iterator<Item = (usize, f64)>>(it: I) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    let mut second = f64::INFINITY;
    for (i, v) in it {
        match best {
            None => best = Some((i, v)),
            Some((_, b)) if v < b => {
                second = b;
                best = Some((i, v));
            }
            Some(_) => second = second.min(v),
        }
    }
    let (i, b) = best?;
    if second - b > TIE_TOL * (1.0 + b.abs()) {
        Some(i)
    } else {
        None
    }
}

/// Index of the disk with strictly smallest power at `z`, `None` on ties.
pub fn euclid_cell_classify(z: [f64; 2], disks: &[Disk]) -> Option<usize> {
    unique_min(disks.iter().enumerate().map(|(i, d)| (i, pow_euclid(z, d))))
}

/// A real number or `+∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn finite(&self) -> Option<f64> {
        match *self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PosInf => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.partial_cmp(b),
            (ExtReal::Finite(_), ExtReal::PosInf) => Some(Ordering::Less),
            (ExtReal::PosInf, ExtReal::Finite(_)) => Some(Ordering::Greater),
            (ExtReal::PosInf, ExtReal::PosInf) => Some(Ordering::Equal),
        }
    }
}

/// Horizontal power of `z` with respect to `K`, in the coordinates
/// `p = c⁻¹·z`: `|p₁|² − √(r⁴ − p₂²)` inside the slab `|p₂| ≤ r²`.
pub fn hpow(z: &HPoint, k: &KoranyiBall) -> ExtReal {
    hpow_local(&relative(&k.center, z), k.radius)
}

fn hpow_local(p: &HPoint, r: f64) -> ExtReal {
    let r2 = r * r;
    if p.x2.abs() <= r2 {
        ExtReal::Finite(p.z1.norm_sqr() - (r2 * r2 - p.x2 * p.x2).max(0.0).sqrt())
    } else {
        ExtReal::PosInf
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HPowerDiagram {
    pub balls: Vec<KoranyiBall>,
}

impl HPowerDiagram {
    pub fn new(balls: Vec<KoranyiBall>) -> Result<Self> {
        if balls.is_empty() {
            return invalid("a power diagram needs at least one ball");
        }
        Ok(HPowerDiagram { balls })
    }
}

/// Cell of `z`: the ball of strictly smallest horizontal power, provided
/// `z` lies in the union of the balls.
pub fn hcell_classify(z: &HPoint, diag: &HPowerDiagram) -> Option<usize> {
    if !diag.balls.iter().any(|b| b.contains(z)) {
        return None;
    }
    unique_min(
        diag.balls
            .iter()
            .enumerate()
            .filter_map(|(i, b)| hpow(z, b).finite().map(|v| (i, v))),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Integrand {
    Volume,
    Gap,
}

/// Balls sampled through their boxes `|Re p₁|, |Im p₁| ≤ r`, `|p₂| ≤ r²`
/// in local coordinates `p = c⁻¹·z`.
struct BallUnion<'a> {
    balls: &'a [KoranyiBall],
    index: SquareIndex,
    integrand: Integrand,
}

impl<'a> BallUnion<'a> {
    fn new(balls: &'a [KoranyiBall], integrand: Integrand) -> Self {
        let squares: Vec<(f64, f64, f64)> = balls
            .iter()
            .map(|b| (b.center.z1.re, b.center.z1.im, b.radius))
            .collect();
        BallUnion {
            balls,
            index: SquareIndex::new(&squares),
            integrand,
        }
    }

    fn value_at(&self, z: &HPoint) -> (u32, f64) {
        let mut m = 0;
        let mut best = 0.0f64;
        let mut inside = false;
        for &j in self.index.query(z.z1.re, z.z1.im) {
            let b = &self.balls[j as usize];
            let p = relative(&b.center, z);
            let r = b.radius;
            if p.z1.re.abs() <= r && p.z1.im.abs() <= r && p.x2.abs() <= r * r {
                m += 1;
                let r2 = r * r;
                let v = (r2 * r2 - p.x2 * p.x2).max(0.0).sqrt() - p.z1.norm_sqr();
                if v >= 0.0 {
                    inside = true;
                    best = best.max(v);
                }
            }
        }
        let f = match self.integrand {
            Integrand::Volume => inside as u8 as f64,
            Integrand::Gap => best,
        };
        (m, f)
    }
}

impl BoxUnion for BallUnion<'_> {
    type Point = HPoint;

    fn box_count(&self) -> usize {
        self.balls.len()
    }

    fn box_volume(&self, i: usize) -> f64 {
        8.0 * self.balls[i].radius.powi(4)
    }

    fn sample_box(&self, i: usize, rng: &mut ChaCha8Rng) -> HPoint {
        let b = &self.balls[i];
        let r = b.radius;
        let p = HPoint::from_parts(
            Complex64::new(uniform(rng, -r, r), uniform(rng, -r, r)),
            uniform(rng, -r * r, r * r),
        );
        group_mul(&b.center, &p)
    }

    fn weigh(&self, z: &HPoint) -> (u32, f64) {
        self.value_at(z)
    }
}

fn integrate_balls(balls: &[KoranyiBall], integrand: Integrand, spec: &IntegrationSpec) -> Result<Estimate> {
    if balls.is_empty() {
        return invalid("integral over an empty ball list");
    }
    let u = BallUnion::new(balls, integrand);
    match spec.method {
        Method::MonteCarlo => {
            if spec.samples < 1000 {
                return invalid(format!("sample budget {} too small", spec.samples));
            }
            Ok(integrate_union(&u, spec.samples, spec.seed))
        }
        Method::Grid => {
            let res = spec
                .grid_resolution
                .ok_or_else(|| crate::Error::Invalid("grid method needs grid_resolution".into()))?;
            let (mut lo, mut hi) = balls[0].aabb();
            for b in &balls[1..] {
                let (l, h) = b.aabb();
                for k in 0..3 {
                    lo[k] = lo[k].min(l[k]);
                    hi[k] = hi[k].max(h[k]);
                }
            }
            let v = integrate_grid(lo, hi, res, |x| {
                let (m, f) = u.value_at(&HPoint::new(x[0], x[1], x[2]));
                if m > 0 {
                    f
                } else {
                    0.0
                }
            });
            Ok(Estimate::exact(v))
        }
    }
}

/// `∫_{∪K} max_K(−hpow(z, K)) dz`, the integrated negative power over the
/// cells of the diagram.
pub fn gap_functional(diag: &HPowerDiagram, spec: &IntegrationSpec) -> Result<Estimate> {
    integrate_balls(&diag.balls, Integrand::Gap, spec)
}

/// 3-volume of the union of the balls.
pub fn union_volume(balls: &[KoranyiBall], spec: &IntegrationSpec) -> Result<Estimate> {
    integrate_balls(balls, Integrand::Volume, spec)
}

/// Closed form of the gap functional of one ball of radius `r`: the
/// volume `(2π/3) r⁶` of the cut it projects from.
pub fn single_ball_gap(r: f64) -> f64 {
    2.0 * std::f64::consts::PI / 3.0 * r.powi(6)
}

/// The 4-volume of the union of the cuts and the gap functional of their
/// projections, estimated independently.
pub fn union_volume_consistency(cuts: &[Cut], spec: &IntegrationSpec) -> Result<(Estimate, Estimate)> {
    let s = SiegelDomain::standard();
    let p = FPolyhedron::new(s, cuts.to_vec())?;
    let balls = cuts
        .iter()
        .map(|c| cut_projection(&s, c))
        .collect::<Result<Vec<_>>>()?;
    let v4 = gap_volume_mc(&p, spec)?;
    let v3 = gap_functional(&HPowerDiagram::new(balls)?, &spec.reseed(3))?;
    Ok((v4, v3))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    pub holds: bool,
    pub t: f64,
    pub base: Estimate,
    pub scaled: Estimate,
    /// `(1+t)³ · base`.
    pub bound: f64,
    pub ratio: f64,
}

/// Checks `vol(∪C(w, (1+t)δ)) ≤ (1+t)³ vol(∪C(w, δ))` up to a 3σ slack.
pub fn doubling_check(cuts: &[Cut], t: f64, spec: &IntegrationSpec) -> Result<DoublingReport> {
    if !(0.0..=16.0).contains(&t) {
        return invalid(format!("doubling parameter t must lie in [0, 16], got {t}"));
    }
    let s = SiegelDomain::standard();
    let base = gap_volume_mc(&FPolyhedron::new(s, cuts.to_vec())?, spec)?;
    let grown: Vec<Cut> = cuts
        .iter()
        .map(|c| Cut::new(c.source, (1.0 + t) * c.size))
        .collect::<Result<_>>()?;
    let scaled = if t == 0.0 {
        base
    } else {
        gap_volume_mc(&FPolyhedron::new(s, grown)?, &spec.reseed(7))?
    };
    let d = (1.0 + t).powi(3);
    let slack = 3.0 * scaled.stderr.hypot(d * base.stderr);
    Ok(DoublingReport {
        holds: scaled.value <= d * base.value + slack,
        t,
        base,
        scaled,
        bound: d * base.value,
        ratio: scaled.value / base.value,
    })
}

/// `true` when `z` is strictly inside some ball: `gauge⁴(c⁻¹z) < r⁴`.
pub fn strictly_inside(z: &HPoint, k: &KoranyiBall) -> bool {
    let r2 = k.radius * k.radius;
    gauge4(&relative(&k.center, z)) < r2 * r2
}
