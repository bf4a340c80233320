use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trend::TrendReport;
use crate::error::{invalid, Error, Result};
use crate::numerics::{stream_rng, Estimate, NeumaierSum};

const CHUNK: u64 = 1 << 16;

/// `f(z, w) = (1 − z₁w̄₁)(1 − z₂w̄₂)`, the peak function of the bidisc.
pub fn f_bidisc(z: &[Complex64; 2], w: &[Complex64; 2]) -> Complex64 {
    (1.0 - z[0] * w[0].conj()) * (1.0 - z[1] * w[1].conj())
}

/// Sources on an `m × m` grid of the torus, per-cut size `c / m²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BidiscScheme {
    pub delta_constant: f64,
}

impl Default for BidiscScheme {
    fn default() -> Self {
        BidiscScheme { delta_constant: 2.0 }
    }
}

impl BidiscScheme {
    pub fn delta(&self, m: u32) -> f64 {
        self.delta_constant / (m as f64 * m as f64)
    }

    pub fn sources(&self, m: u32) -> Vec<[Complex64; 2]> {
        let root = |a: u32| Complex64::from_polar(1.0, 2.0 * PI * a as f64 / m as f64);
        (0..m).flat_map(|a| (0..m).map(move |b| [root(a), root(b)])).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BidiscSpec {
    pub scheme: BidiscScheme,
    pub samples: u64,
    pub seed: u64,
}

impl Default for BidiscSpec {
    fn default() -> Self {
        BidiscSpec {
            scheme: BidiscScheme::default(),
            samples: 4_000_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BidiscRow {
    pub m: u32,
    pub n: u64,
    pub delta: f64,
    pub gap: Estimate,
    pub sqrt_n_gap: f64,
    pub sqrt_n_gap_stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BidiscReport {
    pub spec: BidiscSpec,
    pub rows: Vec<BidiscRow>,
    pub trend: TrendReport,
    pub gap_nonincreasing: bool,
}

/// Distance from `z` (inside the disc) to the nearest `m`-th root of unity.
fn nearest_root_distance(z: Complex64, m: u32) -> f64 {
    let step = 2.0 * PI / m as f64;
    let (r, theta) = z.to_polar();
    let a = theta - (theta / step).round() * step;
    (1.0 + r * r - 2.0 * r * a.cos()).max(0.0).sqrt()
}

/// `min_j |f(z, w_j)|` over the grid sources. On the torus `|1 − z w̄| = |w − z|`,
/// so the minimum splits into a product of one-variable minima.
pub fn min_cut_value(z: &[Complex64; 2], m: u32) -> f64 {
    nearest_root_distance(z[0], m) * nearest_root_distance(z[1], m)
}

fn uniform_disc<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::from_polar(rng.random::<f64>().sqrt(), rng.random::<f64>() * 2.0 * PI)
}

/// Volume of `𝔻² ∩ ⋃ⱼ {|f(·, w_j)| ≤ δ}` by uniform sampling of the bidisc.
pub fn bidisc_gap(m: u32, scheme: &BidiscScheme, samples: u64, seed: u64) -> Result<Estimate> {
    if m == 0 {
        return invalid("bidisc grid needs m >= 1");
    }
    if samples == 0 {
        return invalid("bidisc gap needs samples > 0");
    }
    let delta = scheme.delta(m);
    let chunks = samples.div_ceil(CHUNK);
    let hits: Vec<u64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, m as u64, c);
            let len = CHUNK.min(samples - c * CHUNK);
            (0..len)
                .filter(|_| {
                    let z = [uniform_disc(&mut rng), uniform_disc(&mut rng)];
                    min_cut_value(&z, m) <= delta
                })
                .count() as u64
        })
        .collect();
    let mut acc = NeumaierSum::new();
    for h in &hits {
        acc.add(*h as f64);
    }
    let p = acc.value() / samples as f64;
    let vol = PI * PI;
    let est = Estimate {
        value: vol * p,
        stderr: vol * (p * (1.0 - p) / samples as f64).sqrt(),
    };
    if !est.value.is_finite() {
        return Err(Error::Numeric("bidisc sampling produced a non-finite volume".into()));
    }
    Ok(est)
}

/// Tabulates `√n · gap` for `n = m²` cuts on the torus grid.
pub fn bidisc_demo(m_list: &[u32], spec: &BidiscSpec) -> Result<BidiscReport> {
    if !(spec.scheme.delta_constant > 0.0 && spec.scheme.delta_constant.is_finite()) {
        return invalid("delta constant must be positive");
    }
    let rows = m_list
        .iter()
        .map(|&m| {
            let gap = bidisc_gap(m, &spec.scheme, spec.samples, spec.seed)?;
            Ok(BidiscRow {
                m,
                n: m as u64 * m as u64,
                delta: spec.scheme.delta(m),
                gap,
                sqrt_n_gap: m as f64 * gap.value,
                sqrt_n_gap_stderr: m as f64 * gap.stderr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let trend = TrendReport::new(
        rows.iter().map(|r| r.n).collect(),
        rows.iter().map(|r| r.sqrt_n_gap).collect(),
    )?;
    let gap_nonincreasing = rows.windows(2).all(|w| w[1].gap.value <= w[0].gap.value);
    Ok(BidiscReport {
        spec: *spec,
        rows,
        trend,
        gap_nonincreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::Verdict;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn split_minimum_matches_brute_force(
            r1 in 0.0..0.999f64, t1 in -PI..PI, r2 in 0.0..0.999f64, t2 in -PI..PI, m in 1u32..9,
        ) {
            let z = [Complex64::from_polar(r1, t1), Complex64::from_polar(r2, t2)];
            let brute = BidiscScheme::default()
                .sources(m)
                .iter()
                .map(|w| f_bidisc(&z, w).norm())
                .fold(f64::INFINITY, f64::min);
            prop_assert!((brute - min_cut_value(&z, m)).abs() < 1e-12);
        }
    }

    #[test]
    fn single_cut_removes_volume() {
        let g = bidisc_gap(1, &BidiscScheme::default(), 200_000, 3).unwrap();
        assert!(g.value > 10.0 * g.stderr);
        assert!(g.value < PI * PI);
    }

    #[test]
    fn deterministic() {
        let s = BidiscScheme::default();
        assert_eq!(bidisc_gap(4, &s, 300_000, 9).unwrap(), bidisc_gap(4, &s, 300_000, 9).unwrap());
    }

    #[test]
    fn default_scheme_decays() {
        let spec = BidiscSpec {
            samples: 1_000_000,
            ..BidiscSpec::default()
        };
        let r = bidisc_demo(&[2, 4, 8, 16], &spec).unwrap();
        assert!(r.gap_nonincreasing);
        assert_eq!(r.trend.verdict, Verdict::ConvergingZero);
        assert!(r.rows[0].sqrt_n_gap >= 1.2 * r.rows[3].sqrt_n_gap);
    }
}
