use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::stream_rng;
use crate::siegel::{BoundaryPoint, SiegelDomain, C2};

/// Relative slack absorbing rounding in the chained inequalities.
pub const ROUNDING_SLACK: f64 = 1e-12;

const MAX_COUNTEREXAMPLES: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestingSpec {
    pub pairs: u64,
    pub deltas: Vec<f64>,
    /// Sources have `|w₁| ≤ scale`, `|u₂| ≤ scale²`.
    pub scale: f64,
    pub seed: u64,
}

impl Default for NestingSpec {
    fn default() -> Self {
        NestingSpec {
            pairs: 20_000,
            deltas: vec![1e-3, 1e-2, 1e-1, 1.0],
            scale: 1.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub z: [[f64; 2]; 2],
    pub w: BoundaryPoint,
    pub f: f64,
    pub g: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestingReport {
    pub eps: f64,
    pub eps_hat: f64,
    pub pairs: u64,
    /// Pairs where `|f − g| ≤ ε(|f| + |g|)`.
    pub hypothesis_holds: u64,
    /// Pairs falsifying the hypothesis, not the inclusions.
    pub counterexamples: Vec<Counterexample>,
    pub ratio_violations: u64,
    /// Membership tests `z ∈ C(w, δ; ·)` that fed an inclusion.
    pub inclusion_tests: u64,
    pub inclusion_violations: u64,
}

impl NestingReport {
    pub fn ok(&self) -> bool {
        self.ratio_violations == 0 && self.inclusion_violations == 0
    }
}

/// `ε̂ = (1 + ε)/(1 − ε)`.
pub fn eps_hat(eps: f64) -> f64 {
    (1.0 + eps) / (1.0 - eps)
}

fn le(a: f64, b: f64) -> bool {
    a <= b * (1.0 + ROUNDING_SLACK)
}

/// A source and a point of the closed domain, the point placed at a random
/// scale around the source so that cuts of every size are exercised.
fn sample_pair<R: Rng>(rng: &mut R, dom: &SiegelDomain, scale: f64) -> (C2, BoundaryPoint) {
    let disc = |rng: &mut R, r: f64| {
        Complex64::from_polar(r * rng.random::<f64>().sqrt(), rng.random::<f64>() * std::f64::consts::TAU)
    };
    let w1 = disc(rng, scale);
    let w = BoundaryPoint {
        w1,
        u2: scale * scale * rng.random_range(-1.0..1.0),
    };
    let s = scale * 10f64.powf(rng.random_range(-3.0..0.5));
    let z1 = w1 + disc(rng, s);
    let x2 = w.u2 + 2.0 * (z1 * w1.conj()).im + s * s * rng.random_range(-1.0..1.0);
    let y2 = dom.lambda * z1.norm_sqr() + s * s * rng.random::<f64>();
    ([z1, Complex64::new(x2, y2)], w)
}

/// Samples pairs `(z, w)` and, wherever `|f − g| ≤ ε(|f| + |g|)`, checks
/// `|f| ≤ ε̂|g|`, `|g| ≤ ε̂|f|` and, for every `δ`,
/// `C(w,δ;g) ⊆ C(w,ε̂δ;f) ⊆ C(w,ε̂²δ;g)` together with the same chain
/// with `f` and `g` swapped.
pub fn cut_nesting_check<F, G>(dom: &SiegelDomain, f: F, g: G, eps: f64, spec: &NestingSpec) -> Result<NestingReport>
where
    F: Fn(&C2, &BoundaryPoint) -> Complex64,
    G: Fn(&C2, &BoundaryPoint) -> Complex64,
{
    if !(0.0..1.0 / 3.0).contains(&eps) {
        return invalid(format!("eps must lie in [0, 1/3), got {eps}"));
    }
    if spec.deltas.iter().any(|d| !(*d > 0.0)) {
        return invalid("cut sizes must be positive");
    }
    if !(spec.scale > 0.0) {
        return invalid("sampling scale must be positive");
    }
    let eh = eps_hat(eps);
    let mut rng = stream_rng(spec.seed, 0x6e65_7374, 0);
    let mut rep = NestingReport {
        eps,
        eps_hat: eh,
        pairs: spec.pairs,
        hypothesis_holds: 0,
        counterexamples: Vec::new(),
        ratio_violations: 0,
        inclusion_tests: 0,
        inclusion_violations: 0,
    };
    for _ in 0..spec.pairs {
        let (z, w) = sample_pair(&mut rng, dom, spec.scale);
        let fv = f(&z, &w);
        let gv = g(&z, &w);
        let (a, b) = (fv.norm(), gv.norm());
        if !le((fv - gv).norm(), eps * (a + b)) {
            if rep.counterexamples.len() < MAX_COUNTEREXAMPLES {
                rep.counterexamples.push(Counterexample {
                    z: [[z[0].re, z[0].im], [z[1].re, z[1].im]],
                    w,
                    f: a,
                    g: b,
                });
            }
            continue;
        }
        rep.hypothesis_holds += 1;
        if !le(a, eh * b) || !le(b, eh * a) {
            rep.ratio_violations += 1;
        }
        for &d in &spec.deltas {
            for (p, q) in [(a, b), (b, a)] {
                if q <= d {
                    rep.inclusion_tests += 1;
                    if !le(p, eh * d) {
                        rep.inclusion_violations += 1;
                    }
                }
                if p <= eh * d {
                    rep.inclusion_tests += 1;
                    if !le(q, eh * eh * d) {
                        rep.inclusion_violations += 1;
                    }
                }
            }
        }
    }
    Ok(rep)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrinkReport {
    /// `δ_last < δ_first`.
    pub shrinking: bool,
    pub strictly_decreasing: bool,
    /// The gaps do not decrease, so the hypothesis is unmet.
    pub inconclusive: bool,
    /// Pearson correlation of sizes and gaps.
    pub gap_correlation: f64,
}

/// Finite-sequence check that the largest cut size tends to zero along a
/// sequence of polyhedra with decreasing gaps.
pub fn delta_shrink_check(sizes: &[f64], gaps: &[f64]) -> Result<ShrinkReport> {
    if sizes.len() != gaps.len() || sizes.len() < 2 {
        return invalid("need at least two sizes with matching gaps");
    }
    let shrinking = sizes[sizes.len() - 1] < sizes[0];
    let strictly_decreasing = sizes.windows(2).all(|w| w[1] < w[0]);
    let inconclusive = !gaps.windows(2).all(|w| w[1] < w[0]);
    Ok(ShrinkReport {
        shrinking,
        strictly_decreasing,
        inconclusive,
        gap_correlation: pearson(sizes, gaps),
    })
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::siegel::{cauchy_leray_siegel, f_siegel};
    use crate::tilings::{build_pk, pk_size, upper_bound_closed};

    fn spec() -> NestingSpec {
        NestingSpec {
            pairs: 5000,
            ..NestingSpec::default()
        }
    }

    #[test]
    fn equal_functions() {
        let d = SiegelDomain::standard();
        let f = |z: &C2, w: &BoundaryPoint| f_siegel(&d, z, w);
        let r = cut_nesting_check(&d, f, f, 0.0, &spec()).unwrap();
        assert_eq!(r.eps_hat, 1.0);
        assert_eq!(r.hypothesis_holds, r.pairs);
        assert!(r.ok() && r.inclusion_tests > 0);
    }

    #[test]
    fn scalar_multiple() {
        let d = SiegelDomain::standard();
        let eps = 0.2;
        let f = |z: &C2, w: &BoundaryPoint| f_siegel(&d, z, w);
        let g = |z: &C2, w: &BoundaryPoint| f_siegel(&d, z, w) * (1.0 + eps / 2.0);
        let r = cut_nesting_check(&d, f, g, eps, &spec()).unwrap();
        assert_eq!(r.hypothesis_holds, r.pairs);
        assert!(r.ok());
    }

    #[test]
    fn peak_function_is_scaled_cauchy_leray() {
        let d = SiegelDomain::standard();
        let f = |z: &C2, w: &BoundaryPoint| f_siegel(&d, z, w);
        let g = |z: &C2, w: &BoundaryPoint| cauchy_leray_siegel(&d, z, w) * Complex64::new(0.0, -2.0);
        let r = cut_nesting_check(&d, f, g, 1e-9, &spec()).unwrap();
        assert_eq!(r.hypothesis_holds, r.pairs);
        assert!(r.ok());
    }

    #[test]
    fn hypothesis_failures_are_reported_not_counted() {
        let d = SiegelDomain::standard();
        let f = |z: &C2, w: &BoundaryPoint| f_siegel(&d, z, w);
        let g = |z: &C2, w: &BoundaryPoint| f_siegel(&d, z, w) * 3.0;
        let r = cut_nesting_check(&d, f, g, 0.1, &spec()).unwrap();
        assert_eq!(r.hypothesis_holds, 0);
        assert!(!r.counterexamples.is_empty());
        assert!(r.ok());
    }

    #[test]
    fn rejects_large_eps() {
        let d = SiegelDomain::standard();
        let f = |z: &C2, w: &BoundaryPoint| f_siegel(&d, z, w);
        assert!(cut_nesting_check(&d, f, f, 0.4, &spec()).is_err());
    }

    #[test]
    fn pk_sizes_shrink() {
        let sizes: Vec<f64> = (1..=4).map(|k| build_pk(k).unwrap().max_size()).collect();
        for (k, s) in (1..=4).zip(&sizes) {
            assert!((s - 5f64.sqrt() / (2f64.sqrt() * (k * k) as f64)).abs() < 1e-15);
            assert_eq!(*s, pk_size(k));
        }
        let gaps: Vec<f64> = (1..=4).map(|k| upper_bound_closed(k).unwrap()).collect();
        let r = delta_shrink_check(&sizes, &gaps).unwrap();
        assert!(r.shrinking && r.strictly_decreasing && !r.inconclusive);
        assert!(r.gap_correlation > 0.9);
    }

    #[test]
    fn constant_and_mixed_sequences() {
        let r = delta_shrink_check(&[1.0, 1.0, 1.0], &[3.0, 2.0, 1.0]).unwrap();
        assert!(!r.shrinking);
        let r = delta_shrink_check(&[1.0, 0.5, 0.25], &[1.0, 2.0, 0.5]).unwrap();
        assert!(r.inconclusive);
    }
}
