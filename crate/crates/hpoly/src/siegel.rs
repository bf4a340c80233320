//! Siegel model domains `S_λ = {λ|z₁|² < Im z₂}`, their peaking function,
//! cuts, f-polyhedra and cut volumes.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::heis::{HPoint, KoranyiBall};
use crate::numerics::uniform;
use crate::numerics::{integrate_grid, integrate_union, BoxUnion, Estimate, IntegrationSpec, Method};
use crate::spatial::SquareIndex;

/// A point `(z₁, z₂)` of ℂ².
pub type C2 = [Complex64; 2];

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiegelDomain {
    pub lambda: f64,
}

impl SiegelDomain {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return invalid(format!("lambda must be positive, got {lambda}"));
        }
        Ok(SiegelDomain { lambda })
    }

    pub fn standard() -> Self {
        SiegelDomain { lambda: 1.0 }
    }

    pub fn rho(&self, z: &C2) -> f64 {
        self.lambda * z[0].norm_sqr() - z[1].im
    }

    /// Boundary point over `(w₁, u₂)`.
    pub fn lift(&self, w: &BoundaryPoint) -> C2 {
        [w.w1, Complex64::new(w.u2, self.lambda * w.w1.norm_sqr())]
    }

    /// `Ξ(z) = (λz₁, λz₂)`, mapping `S_λ` onto `S_1`.
    pub fn xi_map(&self, z: &C2) -> C2 {
        [z[0] * self.lambda, z[1] * self.lambda]
    }

    /// The boundary point whose lift is `Ξ(lift(w))`.
    pub fn xi_boundary(&self, w: &BoundaryPoint) -> BoundaryPoint {
        BoundaryPoint {
            w1: w.w1 * self.lambda,
            u2: w.u2 * self.lambda,
        }
    }
}

pub fn rho_lambda(dom: &SiegelDomain, z: &C2) -> f64 {
    dom.rho(z)
}

pub fn xi_map(dom: &SiegelDomain, z: &C2) -> C2 {
    dom.xi_map(z)
}

/// Boundary source given by its projection `(w₁, u₂)` to ℍ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub w1: Complex64,
    pub u2: f64,
}

impl BoundaryPoint {
    pub fn new(x1: f64, y1: f64, u2: f64) -> Self {
        BoundaryPoint {
            w1: Complex64::new(x1, y1),
            u2,
        }
    }

    pub fn from_hpoint(p: &HPoint) -> Self {
        BoundaryPoint { w1: p.z1, u2: p.x2 }
    }

    pub fn projection(&self) -> HPoint {
        HPoint::from_parts(self.w1, self.u2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub source: BoundaryPoint,
    pub size: f64,
}

impl Cut {
    pub fn new(source: BoundaryPoint, size: f64) -> Result<Self> {
        if !(size > 0.0 && size.is_finite()) {
            return invalid(format!("cut size must be positive, got {size}"));
        }
        Ok(Cut { source, size })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FPolyhedron {
    pub domain: SiegelDomain,
    pub cuts: Vec<Cut>,
}

impl FPolyhedron {
    pub fn new(domain: SiegelDomain, cuts: Vec<Cut>) -> Result<Self> {
        if cuts.is_empty() {
            return invalid("an f-polyhedron needs at least one cut");
        }
        Ok(FPolyhedron { domain, cuts })
    }

    /// Largest cut size `δ(P)`.
    pub fn max_size(&self) -> f64 {
        self.cuts.iter().map(|c| c.size).fold(0.0, f64::max)
    }

    pub fn contains(&self, z: &C2) -> bool {
        self.domain.rho(z) < 0.0
            && self
                .cuts
                .iter()
                .all(|c| f_siegel(&self.domain, z, &c.source).norm() > c.size)
    }

    /// The same polyhedron carried to `S_1` by `Ξ`.
    pub fn xi_image(&self) -> FPolyhedron {
        let d = self.domain;
        FPolyhedron {
            domain: SiegelDomain::standard(),
            cuts: self
                .cuts
                .iter()
                .map(|c| Cut {
                    source: d.xi_boundary(&c.source),
                    size: c.size,
                })
                .collect(),
        }
    }
}

/// `f_{S_λ}(z, w) = λ(z₂ − w̄₂) − 2iλ² z₁ w̄₁` with `w` the lifted source.
pub fn f_siegel(dom: &SiegelDomain, z: &C2, w: &BoundaryPoint) -> Complex64 {
    let l = dom.lambda;
    let wl = dom.lift(w);
    (z[1] - wl[1].conj()) * l - I * 2.0 * l * l * z[0] * wl[0].conj()
}

/// `𝔩_λ(z, w) = λ w̄₁ (z₁ − w₁) + (i/2)(z₂ − w₂)`.
pub fn cauchy_leray_siegel(dom: &SiegelDomain, z: &C2, w: &BoundaryPoint) -> Complex64 {
    let wl = dom.lift(w);
    wl[0].conj() * dom.lambda * (z[0] - wl[0]) + I * 0.5 * (z[1] - wl[1])
}

pub fn cut_projection(dom: &SiegelDomain, cut: &Cut) -> Result<KoranyiBall> {
    if dom.lambda != 1.0 {
        return invalid("cut projection is defined for lambda = 1; conjugate by xi_map first");
    }
    KoranyiBall::new(cut.source.projection(), cut.size.sqrt())
}

pub fn cut_volume_closed(delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return invalid(format!("cut size must be positive, got {delta}"));
    }
    Ok(2.0 * PI / 3.0 * delta.powi(3))
}

pub fn koranyi_ball_volume_closed(rad: f64) -> Result<f64> {
    if !(rad >= 0.0) {
        return invalid(format!("radius must be nonnegative, got {rad}"));
    }
    Ok(PI * PI / 2.0 * rad.powi(4))
}

/// Real coordinates of a point of ℂ²: `[x₁, y₁, x₂, y₂]`.
pub fn to_real(z: &C2) -> [f64; 4] {
    [z[0].re, z[0].im, z[1].re, z[1].im]
}

pub fn from_real(x: &[f64; 4]) -> C2 {
    [Complex64::new(x[0], x[1]), Complex64::new(x[2], x[3])]
}

/// Cuts of `S_1` with their enclosing boxes
/// `|z₁ − w₁|_∞ ≤ √δ, |x₂ − u₂ + 2Im(z₁w̄₁)| ≤ δ, 0 ≤ y₂ − |z₁|² ≤ δ`.
struct CutUnion<'a> {
    cuts: &'a [Cut],
    index: SquareIndex,
}

impl<'a> CutUnion<'a> {
    fn new(cuts: &'a [Cut]) -> Self {
        let squares: Vec<(f64, f64, f64)> = cuts
            .iter()
            .map(|c| (c.source.w1.re, c.source.w1.im, c.size.sqrt()))
            .collect();
        CutUnion {
            cuts,
            index: SquareIndex::new(&squares),
        }
    }
}

/// `(A, h)` with `f_S(z, w) = A + i(h + |z₁ − w₁|²)`, `h = y₂ − |z₁|²`.
fn sheared(z: &C2, w: &BoundaryPoint) -> (f64, f64) {
    let a = z[1].re - w.u2 + 2.0 * (z[0] * w.w1.conj()).im;
    let h = z[1].im - z[0].norm_sqr();
    (a, h)
}

impl BoxUnion for CutUnion<'_> {
    type Point = C2;

    fn box_count(&self) -> usize {
        self.cuts.len()
    }

    fn box_volume(&self, i: usize) -> f64 {
        8.0 * self.cuts[i].size.powi(3)
    }

    fn sample_box(&self, i: usize, rng: &mut ChaCha8Rng) -> C2 {
        let c = &self.cuts[i];
        let d = c.size;
        let s = d.sqrt();
        let z1 = c.source.w1 + Complex64::new(uniform(rng, -s, s), uniform(rng, -s, s));
        let a = uniform(rng, -d, d);
        let h = uniform(rng, 0.0, d);
        let x2 = a + c.source.u2 - 2.0 * (z1 * c.source.w1.conj()).im;
        [z1, Complex64::new(x2, h + z1.norm_sqr())]
    }

    fn weigh(&self, z: &C2) -> (u32, f64) {
        let mut m = 0;
        let mut hit = false;
        for &j in self.index.query(z[0].re, z[0].im) {
            let c = &self.cuts[j as usize];
            let d = c.size;
            let s = d.sqrt();
            let dz = z[0] - c.source.w1;
            let (a, h) = sheared(z, &c.source);
            if dz.re.abs() <= s && dz.im.abs() <= s && a.abs() <= d && (0.0..=d).contains(&h) {
                m += 1;
                if !hit {
                    let im = h + dz.norm_sqr();
                    hit = a * a + im * im <= d * d;
                }
            }
        }
        (m, hit as u8 as f64)
    }
}

fn cut_aabb(c: &Cut) -> ([f64; 4], [f64; 4]) {
    let d = c.size;
    let s = d.sqrt();
    let w = c.source.w1;
    let r = std::f64::consts::SQRT_2 * s;
    let tw = 2.0 * r * w.norm();
    let zmax = (w.norm() + r).powi(2);
    let zmin = (w.norm() - r).max(0.0).powi(2);
    (
        [w.re - s, w.im - s, c.source.u2 - d - tw, zmin],
        [w.re + s, w.im + s, c.source.u2 + d + tw, zmax + d],
    )
}

/// `vol(S_λ ∩ ⋃ C_j)`, the volume removed from `S_λ` by the cuts of `p`.
pub fn gap_volume_mc(p: &FPolyhedron, spec: &IntegrationSpec) -> Result<Estimate> {
    if p.cuts.is_empty() {
        return invalid("gap volume of an empty cut list");
    }
    let lam = p.domain.lambda;
    if lam != 1.0 {
        let e = gap_volume_mc(&p.xi_image(), spec)?;
        return Ok(e.scale(lam.powi(-4)));
    }
    match spec.method {
        Method::MonteCarlo => {
            if spec.samples < 10_000 {
                return invalid(format!("sample budget {} below 10^4", spec.samples));
            }
            Ok(integrate_union(&CutUnion::new(&p.cuts), spec.samples, spec.seed))
        }
        Method::Grid => {
            let res = spec
                .grid_resolution
                .ok_or_else(|| crate::Error::Invalid("grid method needs grid_resolution".into()))?;
            let (mut lo, mut hi) = cut_aabb(&p.cuts[0]);
            for c in &p.cuts[1..] {
                let (l, h) = cut_aabb(c);
                for k in 0..4 {
                    lo[k] = lo[k].min(l[k]);
                    hi[k] = hi[k].max(h[k]);
                }
            }
            let u = CutUnion::new(&p.cuts);
            let v = integrate_grid(lo, hi, res, |x| {
                let z = from_real(x);
                if z[1].im < z[0].norm_sqr() {
                    return 0.0;
                }
                let (m, f) = u.weigh(&z);
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heis::dist;
    use rand::Rng;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    #[test]
    fn rho_examples() {
        let s = SiegelDomain::standard();
        assert_eq!(s.rho(&[c(0.0, 0.0), c(0.0, 1.0)]), -1.0);
        assert_eq!(s.rho(&[c(1.0, 0.0), c(0.0, 1.0)]), 0.0);
        let s2 = SiegelDomain::new(2.0).unwrap();
        assert_eq!(s2.rho(&[c(1.0, 0.0), c(0.0, 0.0)]), 2.0);
        assert!(SiegelDomain::new(0.0).is_err());
    }

    #[test]
    fn f_siegel_examples() {
        let s = SiegelDomain::standard();
        let w = BoundaryPoint::new(0.0, 0.0, 0.0);
        assert_eq!(f_siegel(&s, &[c(0.0, 0.0), c(0.3, 0.7)], &w), c(0.3, 0.7));
        let w = BoundaryPoint::new(0.4, -1.1, 2.0);
        for lam in [0.5, 1.0, 3.0] {
            let d = SiegelDomain::new(lam).unwrap();
            assert!(f_siegel(&d, &d.lift(&w), &w).norm() < 1e-12);
            assert!(d.rho(&d.lift(&w)).abs() < 1e-12);
        }
    }

    #[test]
    fn cauchy_leray_examples() {
        let s = SiegelDomain::standard();
        let w = BoundaryPoint::new(0.0, 0.0, 0.0);
        assert_eq!(cauchy_leray_siegel(&s, &[c(0.0, 0.0), c(1.0, 0.0)], &w), c(0.0, 0.5));
        assert_eq!(cauchy_leray_siegel(&s, &s.lift(&w), &w), c(0.0, 0.0));
    }

    #[test]
    fn xi_examples() {
        let s2 = SiegelDomain::new(2.0).unwrap();
        assert_eq!(s2.xi_map(&[c(1.0, 0.0), c(0.0, 1.0)]), [c(2.0, 0.0), c(0.0, 2.0)]);
        let z = [c(0.3, 0.2), c(-0.1, 0.9)];
        assert_eq!(SiegelDomain::standard().xi_map(&z), z);
    }

    #[test]
    fn closed_volumes() {
        assert!((cut_volume_closed(1.0).unwrap() - 2.0 * PI / 3.0).abs() < 1e-15);
        assert!((cut_volume_closed(2.0).unwrap() - 16.0 * PI / 3.0).abs() < 1e-14);
        assert!(cut_volume_closed(0.0).is_err());
        assert!((koranyi_ball_volume_closed(1.0).unwrap() - 4.934802200544679).abs() < 1e-14);
        assert_eq!(koranyi_ball_volume_closed(0.0).unwrap(), 0.0);
    }

    #[test]
    fn projection_examples() {
        let s = SiegelDomain::standard();
        let b = cut_projection(&s, &Cut::new(BoundaryPoint::new(0.0, 0.0, 0.0), 4.0).unwrap()).unwrap();
        assert_eq!(b.radius, 2.0);
        assert_eq!(b.center, HPoint::ORIGIN);
        let s2 = SiegelDomain::new(2.0).unwrap();
        assert!(cut_projection(&s2, &Cut::new(BoundaryPoint::new(0.0, 0.0, 0.0), 1.0).unwrap()).is_err());
    }

    fn random_pair(rng: &mut ChaCha8Rng, dom: &SiegelDomain) -> (C2, BoundaryPoint) {
        let w = BoundaryPoint::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        );
        let z1 = c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let y2 = dom.lambda * z1.norm_sqr() + rng.random_range(0.0..2.0);
        ([z1, c(rng.random_range(-2.0..2.0), y2)], w)
    }

    #[test]
    fn identities_on_random_pairs() {
        let mut rng = crate::numerics::stream_rng(17, 0, 0);
        for lam in [0.5, 1.0, 2.0] {
            let d = SiegelDomain::new(lam).unwrap();
            let s1 = SiegelDomain::standard();
            for _ in 0..1000 {
                let (z, w) = random_pair(&mut rng, &d);
                let f = f_siegel(&d, &z, &w);
                let l = cauchy_leray_siegel(&d, &z, &w);
                assert!((f + I * 2.0 * lam * l).norm() <= 1e-12 * (1.0 + f.norm()) * 10.0);
                let fx = f_siegel(&s1, &d.xi_map(&z), &d.xi_boundary(&w));
                assert!((f - fx).norm() <= 1e-12 * (1.0 + f.norm()) * 10.0);
                let lifted = d.xi_map(&d.lift(&w));
                let other = s1.lift(&d.xi_boundary(&w));
                assert!((lifted[1] - other[1]).norm() < 1e-12 * (1.0 + lifted[1].norm()));
            }
        }
    }

    #[test]
    fn peaking_only_at_source() {
        let mut rng = crate::numerics::stream_rng(18, 0, 0);
        let d = SiegelDomain::standard();
        for _ in 0..100 {
            let (_, w) = random_pair(&mut rng, &d);
            for _ in 0..1000 {
                let (z, _) = random_pair(&mut rng, &d);
                let f = f_siegel(&d, &z, &w).norm();
                let wl = d.lift(&w);
                let dz = ((z[0] - wl[0]).norm_sqr() + (z[1] - wl[1]).norm_sqr()).sqrt();
                assert!(f > 0.0 || dz < 1e-10);
            }
        }
    }

    #[test]
    fn projection_equivalence_on_boundary() {
        let mut rng = crate::numerics::stream_rng(19, 0, 0);
        let s = SiegelDomain::standard();
        for delta in [0.25, 1.0, 4.0] {
            let w = BoundaryPoint::new(0.3, -0.2, 0.5);
            let cut = Cut::new(w, delta).unwrap();
            let ball = cut_projection(&s, &cut).unwrap();
            let r = 2.0 * delta.sqrt();
            for _ in 0..10_000 {
                let p = HPoint::new(
                    0.3 + rng.random_range(-r..r),
                    -0.2 + rng.random_range(-r..r),
                    0.5 + rng.random_range(-3.0 * delta..3.0 * delta),
                );
                let z = s.lift(&BoundaryPoint::from_hpoint(&p));
                let by_f = f_siegel(&s, &z, &w).norm() <= delta;
                let by_d = dist(&p, &ball.center) <= ball.radius;
                if (f_siegel(&s, &z, &w).norm() - delta).abs() > 1e-12 {
                    assert_eq!(by_f, by_d);
                }
            }
        }
    }

    #[test]
    fn enclosing_box_contains_cut() {
        // rejection check of the sheared enclosure against a loose Euclidean box
        let mut rng = crate::numerics::stream_rng(20, 0, 0);
        let s = SiegelDomain::standard();
        let cut = Cut::new(BoundaryPoint::new(0.5, 0.25, -0.3), 0.8).unwrap();
        let u = CutUnion::new(std::slice::from_ref(&cut));
        let (lo, hi) = cut_aabb(&cut);
        let mut inside = 0;
        for _ in 0..200_000 {
            let x: [f64; 4] = std::array::from_fn(|k| {
                let pad = 0.5 * (hi[k] - lo[k]);
                rng.random_range(lo[k] - pad..hi[k] + pad)
            });
            let z = from_real(&x);
            if s.rho(&z) <= 0.0 && f_siegel(&s, &z, &cut.source).norm() <= cut.size {
                inside += 1;
                assert_eq!(u.weigh(&z), (1, 1.0));
                for k in 0..4 {
                    assert!(lo[k] <= x[k] && x[k] <= hi[k]);
                }
            }
        }
        assert!(inside > 100);
    }

    #[test]
    fn gap_volume_examples() {
        let s = SiegelDomain::standard();
        let spec = IntegrationSpec::monte_carlo(400_000, 1);
        let one = FPolyhedron::new(s, vec![Cut::new(BoundaryPoint::new(0.0, 0.0, 0.0), 1.0).unwrap()]).unwrap();
        let e = gap_volume_mc(&one, &spec).unwrap();
        assert!(e.within_sigmas(2.0 * PI / 3.0, 3.0), "{e:?}");

        let far = FPolyhedron::new(
            s,
            vec![
                Cut::new(BoundaryPoint::new(0.0, 0.0, 0.0), 1.0).unwrap(),
                Cut::new(BoundaryPoint::new(10.0, 0.0, 0.0), 1.0).unwrap(),
            ],
        )
        .unwrap();
        let e = gap_volume_mc(&far, &spec).unwrap();
        assert!(e.within_sigmas(4.0 * PI / 3.0, 3.0), "{e:?}");

        let twin = FPolyhedron::new(s, vec![one.cuts[0], one.cuts[0]]).unwrap();
        let e = gap_volume_mc(&twin, &spec).unwrap();
        assert!(e.within_sigmas(2.0 * PI / 3.0, 3.0), "{e:?}");

        assert!(FPolyhedron::new(s, vec![]).is_err());
        assert!(gap_volume_mc(&one, &IntegrationSpec::monte_carlo(100, 1)).is_err());
    }

    #[test]
    fn gap_volume_grid_matches_closed_form() {
        let s = SiegelDomain::standard();
        let one = FPolyhedron::new(s, vec![Cut::new(BoundaryPoint::new(0.2, 0.1, 0.0), 0.5).unwrap()]).unwrap();
        let g = gap_volume_mc(&one, &IntegrationSpec::grid(48)).unwrap();
        let exact = cut_volume_closed(0.5).unwrap();
        assert!((g.value - exact).abs() < 0.02 * exact, "{g:?} vs {exact}");
    }

    #[test]
    fn xi_conjugated_volume() {
        let lam = 2.0;
        let d = SiegelDomain::new(lam).unwrap();
        let p = FPolyhedron::new(d, vec![Cut::new(BoundaryPoint::new(0.1, 0.0, 0.2), 1.0).unwrap()]).unwrap();
        let spec = IntegrationSpec::monte_carlo(400_000, 5);
        let e = gap_volume_mc(&p, &spec).unwrap();
        let expect = cut_volume_closed(1.0).unwrap() / lam.powi(4);
        assert!(e.within_sigmas(expect, 3.0), "{e:?} vs {expect}");

        // direct rejection estimate in S_λ coordinates as an independent oracle
        let mut rng = crate::numerics::stream_rng(21, 0, 0);
        let n = 400_000;
        let (lo, hi) = ([-1.2, -1.2, -2.0, 0.0], [1.2, 1.2, 2.0, 2.5]);
        let vol: f64 = (0..4).map(|k| hi[k] - lo[k]).product();
        let mut hits = 0u64;
        for _ in 0..n {
            let x: [f64; 4] = std::array::from_fn(|k| rng.random_range(lo[k]..hi[k]));
            let z = from_real(&x);
            if d.rho(&z) <= 0.0 && f_siegel(&d, &z, &p.cuts[0].source).norm() <= 1.0 {
                hits += 1;
            }
        }
        let pr = hits as f64 / n as f64;
        let direct = vol * pr;
        let se = vol * (pr * (1.0 - pr) / n as f64).sqrt();
        assert!((direct - e.value).abs() <= 3.0 * se.hypot(e.stderr), "{direct} vs {e:?}");
    }
}
