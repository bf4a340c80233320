use std::f64::consts::PI;

use num_complex::Complex64;

use hpoly::domain_maps::{
    fefferman_integral, lambda_q, theta_composite, FeffermanQuadrature, Parametrization, QuadraticRho, ThetaSpec,
};
use hpoly::gallery::{cut_nesting_check, delta_shrink_check, eps_hat, NestingSpec};
use hpoly::numerics::IntegrationSpec;
use hpoly::power_diagram::{gap_functional, HPowerDiagram};
use hpoly::siegel::{cut_projection, f_siegel, gap_volume_mc, BoundaryPoint, FPolyhedron, SiegelDomain};
use hpoly::tilings::{build_pk, pk_configuration, subdivide_scale, upper_bound_closed};

#[test]
fn pk_gap_two_routes() {
    // 4-D removed volume of P_2 against the 3-D gap functional of its projections
    let p = build_pk(2).unwrap();
    let s = SiegelDomain::standard();
    let balls: Vec<_> = p.cuts.iter().map(|c| cut_projection(&s, c).unwrap()).collect();
    assert_eq!(balls, pk_configuration(2).unwrap().balls);
    let v4 = gap_volume_mc(&p, &IntegrationSpec::monte_carlo(2_000_000, 1)).unwrap();
    let v3 = gap_functional(&HPowerDiagram::new(balls).unwrap(), &IntegrationSpec::monte_carlo(2_000_000, 2)).unwrap();
    assert!((v4.value - v3.value).abs() <= 3.0 * v4.combined_stderr(&v3), "{v4:?} {v3:?}");
    assert!(v4.value < upper_bound_closed(2).unwrap());
}

#[test]
fn lambda_conjugation_scales_volume() {
    let p = build_pk(1).unwrap();
    let lam = 2.0;
    let q = FPolyhedron::new(SiegelDomain::new(lam).unwrap(), p.cuts.clone()).unwrap();
    let spec = IntegrationSpec::monte_carlo(1_000_000, 5);
    let a = gap_volume_mc(&q, &spec).unwrap();
    let b = gap_volume_mc(&q.xi_image(), &spec).unwrap();
    assert!((a.value - b.value / lam.powi(4)).abs() < 1e-12 * b.value);
}

#[test]
fn subdivision_preserves_ball_count_and_radius4_sum_ratio() {
    let cfg = pk_configuration(1).unwrap();
    let sub = subdivide_scale(&cfg, 2).unwrap();
    assert_eq!(sub.balls.len(), 24);
    assert!((sub.radius4_sum() - cfg.radius4_sum() * 24.0 / 16.0).abs() < 1e-12);
    assert_eq!(sub.balls, pk_configuration(2).unwrap().balls.iter().map(|b| {
        let mut b = *b;
        b.radius = cfg.balls[0].radius / 2.0;
        b
    }).collect::<Vec<_>>());
}

#[test]
fn fefferman_and_levi_agree_on_the_ball() {
    // the Fefferman density of the unit ball is 4^{1/3} λ_q^{1/3} with λ_q = 1/2 everywhere
    let b = QuadraticRho::ball(1.0).unwrap();
    let q = [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)];
    assert!((lambda_q(&b, &q).unwrap() - 0.5).abs() < 1e-12);
    let r = fefferman_integral(&b, &Parametrization::Star { center: [0.0; 4] }, &FeffermanQuadrature::default()).unwrap();
    assert!((r.integral - 4f64.powf(1.0 / 3.0) * 0.5f64.powf(1.0 / 3.0) * 2.0 * PI * PI).abs() < 1e-9);
}

#[test]
fn theta_probe_on_a_ball() {
    let b = QuadraticRho::ball(1.0).unwrap();
    let q = [Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0)];
    let spec = ThetaSpec { radius: 0.05, pairs: 40, boxes: 2, ..ThetaSpec::default() };
    let (_, probe) = theta_composite(&b, &q, &spec).unwrap();
    assert!((probe.lambda - 0.5).abs() < 1e-12);
    assert!(probe.within_eps, "{probe:?}");
}

#[test]
fn nesting_on_a_rescaled_domain() {
    let d = SiegelDomain::new(1.5).unwrap();
    let eps = 0.1;
    let f = |z: &_, w: &BoundaryPoint| f_siegel(&d, z, w);
    let g = |z: &_, w: &BoundaryPoint| f_siegel(&d, z, w) * Complex64::from_polar(1.0 + eps / 2.0, 0.01);
    let r = cut_nesting_check(&d, f, g, eps, &NestingSpec { pairs: 4000, ..NestingSpec::default() }).unwrap();
    assert!(r.ok() && r.hypothesis_holds == r.pairs, "{r:?}");
    assert_eq!(r.eps_hat, eps_hat(eps));
    let sizes: Vec<f64> = (1..=3).map(|k| build_pk(k).unwrap().max_size()).collect();
    assert!(delta_shrink_check(&sizes, &[3.0, 2.0, 1.0]).unwrap().strictly_decreasing);
}
