//! Shared numerical plumbing: tolerances, compensated sums, seeded
//! random streams, low-discrepancy points and the box-union integrators.

mod integrate;

pub use integrate::{integrate_grid, integrate_union, BoxUnion};
pub(crate) use integrate::uniform;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Relative tolerance for identities that hold exactly in real arithmetic.
pub const EXACT_TOL: f64 = 1e-12;

/// Neumaier's variant of Kahan summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<NeumaierSum>().value()
}

/// A point estimate with its standard error. Grid quadrature reports a
/// zero standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, stderr: 0.0 }
    }

    pub fn scale(self, c: f64) -> Self {
        Estimate {
            value: self.value * c,
            stderr: self.stderr * c.abs(),
        }
    }

    /// Standard error of the difference of two independent estimates.
    pub fn combined_stderr(&self, other: &Estimate) -> f64 {
        self.stderr.hypot(other.stderr)
    }

    /// `|self - x| <= k * stderr`.
    pub fn within_sigmas(&self, x: f64, k: f64) -> bool {
        (self.value - x).abs() <= k * self.stderr
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    MonteCarlo,
    Grid,
}

/// How to evaluate a volume-type integral.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrationSpec {
    pub method: Method,
    pub samples: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_resolution: Option<u32>,
}

impl IntegrationSpec {
    pub fn monte_carlo(samples: u64, seed: u64) -> Self {
        IntegrationSpec {
            method: Method::MonteCarlo,
            samples,
            seed,
            grid_resolution: None,
        }
    }

    pub fn grid(resolution: u32) -> Self {
        IntegrationSpec {
            method: Method::Grid,
            samples: 0,
            seed: 0,
            grid_resolution: Some(resolution),
        }
    }

    /// Copy with the seed replaced by a derived one.
    pub fn reseed(&self, salt: u64) -> Self {
        IntegrationSpec {
            seed: mix_seed(self.seed, salt, 0x5eed),
            ..*self
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derive an independent 64-bit seed from a master seed and two indices.
pub fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b.rotate_left(32))
}

/// Deterministic random stream for sub-task `(a, b)` of a run seeded by `seed`.
pub fn stream_rng(seed: u64, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, a, b))
}

/// Van der Corput radical inverse of `i` in `base`.
pub fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// The `i`-th point of the 3-D Halton sequence (bases 2, 3, 5), rotated
/// modulo 1 by `shift`.
pub fn halton3(i: u64, shift: [f64; 3]) -> [f64; 3] {
    let h = [
        radical_inverse(i, 2),
        radical_inverse(i, 3),
        radical_inverse(i, 5),
    ];
    [
        (h[0] + shift[0]).fract(),
        (h[1] + shift[1]).fract(),
        (h[2] + shift[2]).fract(),
    ]
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}
