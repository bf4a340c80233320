use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::BallConfiguration;
use crate::error::{invalid, Error, Result};
use crate::heis::{dist, HPoint, KoranyiBall};
use crate::numerics::{compensated_sum, halton3};
use crate::spatial::SquareIndex;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub covered: bool,
    pub samples: u64,
    /// Smallest over sample points of the best `r − dist` among the balls.
    pub worst_margin: f64,
    pub worst_point: HPoint,
}

/// Halton points of the target box (plus its eight corners).
pub(crate) fn target_samples(cfg: &BallConfiguration, samples: u64, shift: [f64; 3]) -> Vec<HPoint> {
    let mut pts: Vec<HPoint> = cfg.target.corners().to_vec();
    pts.extend((1..=samples).map(|i| cfg.target.point_at(halton3(i, shift))));
    pts
}

pub(crate) fn best_margin(balls: &[KoranyiBall], index: &SquareIndex, p: &HPoint) -> f64 {
    let local = index
        .query(p.z1.re, p.z1.im)
        .iter()
        .map(|&j| balls[j as usize].margin(p))
        .fold(f64::NEG_INFINITY, f64::max);
    if local >= 0.0 {
        local
    } else {
        balls.iter().map(|b| b.margin(p)).fold(f64::NEG_INFINITY, f64::max)
    }
}

pub(crate) fn ball_index(balls: &[KoranyiBall]) -> SquareIndex {
    let squares: Vec<(f64, f64, f64)> = balls
        .iter()
        .map(|b| (b.center.z1.re, b.center.z1.im, b.radius))
        .collect();
    SquareIndex::new(&squares)
}

/// Samples the target box on a Halton set and checks that every sample
/// lies in some ball.
pub fn coverage_verify(cfg: &BallConfiguration, samples: u64) -> Result<CoverageReport> {
    if samples < 10_000 {
        return invalid(format!("coverage check needs at least 10^4 samples, got {samples}"));
    }
    if cfg.balls.is_empty() {
        return Ok(CoverageReport {
            covered: false,
            samples,
            worst_margin: f64::NEG_INFINITY,
            worst_point: cfg.target.anchor,
        });
    }
    let index = ball_index(&cfg.balls);
    let pts = target_samples(cfg, samples, [0.0; 3]);
    let (worst_margin, at) = pts
        .par_iter()
        .enumerate()
        .map(|(i, p)| (best_margin(&cfg.balls, &index, p), i))
        .reduce(
            || (f64::INFINITY, usize::MAX),
            |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    Ok(CoverageReport {
        covered: worst_margin >= 0.0,
        samples,
        worst_margin,
        worst_point: pts[at],
    })
}

/// Greedy disjoint subfamily by decreasing radius. Balls are kept when
/// their centres are farther apart than the sum of the radii, so each
/// discarded ball lies inside three times a kept ball of larger radius.
pub fn wiener_subcover(balls: &[KoranyiBall]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..balls.len()).collect();
    order.sort_by(|&a, &b| balls[b].radius.total_cmp(&balls[a].radius).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let bi = &balls[i];
        if kept
            .iter()
            .all(|&j| dist(&bi.center, &balls[j].center) > bi.radius + balls[j].radius)
        {
            kept.push(i);
        }
    }
    kept
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub holds: bool,
    pub radius4_sum: f64,
    pub bound: f64,
}

/// `Σ r⁴ ≥ 2/π²` for a configuration that covers its target.
pub fn lower_bound_check(cfg: &BallConfiguration) -> Result<LowerBoundReport> {
    let cov = coverage_verify(cfg, 1 << 15)?;
    if !cov.covered {
        return Err(Error::Infeasible(format!(
            "configuration does not cover its target (worst margin {:.3e})",
            cov.worst_margin
        )));
    }
    let sum = cfg.radius4_sum();
    let bound = 2.0 * cfg.target.volume() / (std::f64::consts::PI * std::f64::consts::PI);
    Ok(LowerBoundReport {
        holds: sum >= bound,
        radius4_sum: sum,
        bound,
    })
}

/// Verdict of [`lower_bound_exact`]: `Some(true)` when `π² Σ r⁴ ≥ 2 vol`
/// holds in exact rational arithmetic for a rational lower bound of `π`,
/// `Some(false)` when it fails for an upper bound, `None` in between.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactLowerBound {
    pub holds: Option<bool>,
    pub radius4_sum: f64,
}

/// Convergents of π bracketing it to about 1e-12.
const PI_BELOW: (f64, f64) = (833_719.0, 265_381.0);
const PI_ABOVE: (f64, f64) = (1_146_408.0, 364_913.0);

/// `Σ r⁴ ≥ 2 vol(target)/π²` evaluated exactly on the stored radii.
pub fn lower_bound_exact(cfg: &BallConfiguration) -> Result<ExactLowerBound> {
    let q = |v: f64| {
        BigRational::from_float(v).ok_or_else(|| Error::Invalid(format!("non-finite value {v} in configuration")))
    };
    let mut sum = q(0.0)?;
    for b in &cfg.balls {
        let r = q(b.radius)?;
        let r2 = &r * &r;
        sum += &r2 * &r2;
    }
    let two_vol = q(2.0 * cfg.target.volume())?;
    let pi_sq = |(n, d): (f64, f64)| -> Result<BigRational> {
        let p = q(n)? / q(d)?;
        Ok(&p * &p)
    };
    let holds = if pi_sq(PI_BELOW)? * &sum >= two_vol {
        Some(true)
    } else if pi_sq(PI_ABOVE)? * &sum < two_vol {
        Some(false)
    } else {
        None
    };
    Ok(ExactLowerBound {
        holds,
        radius4_sum: cfg.radius4_sum(),
    })
}

/// Power-mean inequality `M_{d+1}(ρ) ≥ M_{d−1}(ρ)`.
pub fn power_mean_check(values: &[f64], d: f64) -> Result<bool> {
    if values.is_empty() {
        return invalid("power mean of an empty list");
    }
    if values.iter().any(|&v| !(v > 0.0)) {
        return invalid("power mean needs positive entries");
    }
    if !(d > 1.0) {
        return invalid(format!("exponent d must exceed 1, got {d}"));
    }
    let k = values.len() as f64;
    let hi = (compensated_sum(values.iter().map(|v| v.powf(d + 1.0))) / k).powf(1.0 / (d + 1.0));
    let lo = (compensated_sum(values.iter().map(|v| v.powf(d - 1.0))) / k).powf(1.0 / (d - 1.0));
    Ok(hi >= lo * (1.0 - 1e-12))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tilings::pk_configuration;
    use rand::Rng;

    fn ball(x1: f64, y1: f64, x2: f64, r: f64) -> KoranyiBall {
        KoranyiBall::new(HPoint::new(x1, y1, x2), r).unwrap()
    }

    #[test]
    fn exact_lower_bound_verdicts() {
        let pk = pk_configuration(2).unwrap();
        assert_eq!(lower_bound_exact(&pk).unwrap().holds, Some(true));
        let small = BallConfiguration::new(vec![ball(0.5, 0.5, 0.5, 0.5)]);
        assert_eq!(lower_bound_exact(&small).unwrap().holds, Some(false));
        let r = (2.0 / (std::f64::consts::PI * std::f64::consts::PI)).powf(0.25);
        let edge = BallConfiguration::new(vec![ball(0.5, 0.5, 0.5, r)]);
        assert_eq!(lower_bound_exact(&edge).unwrap().holds, None);
    }

    #[test]
    fn coverage_examples() {
        let p2 = pk_configuration(2).unwrap();
        let r = coverage_verify(&p2, 20_000).unwrap();
        // lattice balls pass exactly through the box corners
        assert!(r.covered && r.worst_margin.abs() < 1e-12, "{r:?}");
        let tiny = BallConfiguration::new(vec![ball(0.5, 0.5, 0.5, 0.01)]);
        assert!(!coverage_verify(&tiny, 20_000).unwrap().covered);
        // four balls around the shell Î∖I, none reaching the centre of I
        let shell = BallConfiguration::new(vec![
            ball(-0.4, 0.5, 0.5, 0.5),
            ball(1.4, 0.5, 0.5, 0.5),
            ball(0.5, -0.4, 0.5, 0.5),
            ball(0.5, 1.4, 0.5, 0.5),
        ]);
        assert!(!coverage_verify(&shell, 20_000).unwrap().covered);
        assert!(coverage_verify(&p2, 100).is_err());
    }

    #[test]
    fn wiener_examples() {
        assert_eq!(wiener_subcover(&[ball(0.0, 0.0, 0.0, 1.0)]), vec![0]);
        let far = [ball(0.0, 0.0, 0.0, 1.0), ball(5.0, 0.0, 0.0, 1.0)];
        let mut s = wiener_subcover(&far);
        s.sort();
        assert_eq!(s, vec![0, 1]);
        let conc = [ball(0.0, 0.0, 0.0, 0.5), ball(0.0, 0.0, 0.0, 1.0)];
        assert_eq!(wiener_subcover(&conc), vec![1]);
    }

    #[test]
    fn wiener_output_disjoint_and_tripled_cover() {
        let mut rng = crate::numerics::stream_rng(41, 0, 0);
        let balls: Vec<KoranyiBall> = (0..60)
            .map(|_| ball(rng.random_range(0.0..2.0), rng.random_range(0.0..2.0), rng.random_range(0.0..2.0), rng.random_range(0.05..0.5)))
            .collect();
        let kept = wiener_subcover(&balls);
        for (a, &i) in kept.iter().enumerate() {
            for &j in &kept[a + 1..] {
                assert!(dist(&balls[i].center, &balls[j].center) > balls[i].radius + balls[j].radius);
            }
        }
        let tripled: Vec<KoranyiBall> = kept.iter().map(|&i| ball_scaled(&balls[i], 3.0)).collect();
        for _ in 0..100_000 {
            let b = &balls[rng.random_range(0..balls.len())];
            let (lo, hi) = b.aabb();
            let p = HPoint::new(rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1]), rng.random_range(lo[2]..hi[2]));
            if b.contains(&p) {
                assert!(tripled.iter().any(|t| t.contains(&p)));
            }
        }
    }

    fn ball_scaled(b: &KoranyiBall, s: f64) -> KoranyiBall {
        KoranyiBall::new(b.center, b.radius * s).unwrap()
    }

    #[test]
    fn lower_bound_examples() {
        let big = BallConfiguration::new(vec![ball(0.5, 0.5, 0.5, 2.0)]);
        assert!(lower_bound_check(&big).unwrap().holds);
        let r = lower_bound_check(&pk_configuration(2).unwrap()).unwrap();
        assert!(r.holds);
        assert!((r.radius4_sum - 3.75).abs() < 1e-12);
        assert!((r.bound - 0.2026423672846756).abs() < 1e-15);
        let tiny = BallConfiguration::new(vec![ball(0.5, 0.5, 0.5, 0.01)]);
        assert!(matches!(lower_bound_check(&tiny), Err(Error::Infeasible(_))));
    }

    #[test]
    fn power_mean_examples() {
        assert!(power_mean_check(&[2.0, 2.0, 2.0], 3.0).unwrap());
        assert!(power_mean_check(&[1.0, 2.0], 5.0).unwrap());
        let hi = ((1f64 + 64.0) / 2.0).powf(1.0 / 6.0);
        let lo = ((1f64 + 16.0) / 2.0).powf(1.0 / 4.0);
        assert!(hi > lo);
        assert!(power_mean_check(&[1.0, 0.0], 2.0).is_err());
        assert!(power_mean_check(&[], 2.0).is_err());
        assert!(power_mean_check(&[1.0], 1.0).is_err());
        let mut rng = crate::numerics::stream_rng(42, 0, 0);
        for _ in 0..1000 {
            let n = rng.random_range(1..20);
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..10.0)).collect();
            for d in [2.0, 5.0] {
                assert!(power_mean_check(&v, d).unwrap());
            }
        }
    }
}
