use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use hpoly::domain_maps::{
    contact_check, fefferman_integral, from_r4, straighten_flow, theta_composite, to_r4, DefiningFunction,
    FeffermanQuadrature, OdeSpec, Parametrization, PolynomialRho, QuadraticRho, Scaled, ThetaSpec,
};
use hpoly::gallery::{
    bidisc_demo, boundary_curve, inner_radius, lemniscate_demo, outer_radius, BidiscScheme, BidiscSpec,
    LemniscateSpec, Reading,
};
use hpoly::heis::{HPoint, KoranyiBall};
use hpoly::numerics::{Estimate, IntegrationSpec};
use hpoly::power_diagram::{gap_functional, hcell_classify, union_volume, HPowerDiagram};
use hpoly::siegel::{
    cut_volume_closed, gap_volume_mc, koranyi_ball_volume_closed, BoundaryPoint, Cut, FPolyhedron, SiegelDomain,
};
use hpoly::tilings::{
    asymptotics_harness, build_pk, coverage_verify, estimate_vn, lkor_lower, lkor_upper, lower_bound_check,
    pk_configuration, tile_containment, upper_bound_closed, BallConfiguration, OptimizerConfig,
};

use crate::args::*;
use crate::output::{to_value, Output, Table};
use crate::svg;
use crate::CliError;

pub fn run(cli: &Cli) -> Result<Output, CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Volumes(a) => volumes(a, g),
        Command::Diagram(a) => diagram(a, g),
        Command::Tile(a) => tile(a, g),
        Command::Bounds(a) => bounds(a),
        Command::Optimize(a) => optimize(a, g),
        Command::Asymptotics(a) => asymptotics(a, g),
        Command::Fefferman(a) => fefferman(a),
        Command::Darboux(a) => darboux(a, g),
        Command::Demo(d) => match &d.demo {
            Demo::Lemniscate {
                n,
                reading,
                radial,
                angular,
                svg,
            } => lemniscate(n, *reading, *radial, *angular, *svg, g),
            Demo::Bidisc { m, delta_constant } => bidisc(m, *delta_constant, g),
        },
    }
}

fn est_json(e: &Estimate) -> Value {
    json!({"value": e.value, "stderr": e.stderr})
}

#[derive(Serialize)]
struct VolumeRow {
    body: &'static str,
    size: f64,
    closed_form: f64,
    estimate: f64,
    stderr: f64,
    rel_err: f64,
    sigmas: f64,
    within_3sigma: bool,
    within_1pct: bool,
}

impl VolumeRow {
    fn new(body: &'static str, size: f64, closed_form: f64, e: Estimate) -> Self {
        let rel_err = (e.value - closed_form).abs() / closed_form;
        VolumeRow {
            body,
            size,
            closed_form,
            estimate: e.value,
            stderr: e.stderr,
            rel_err,
            sigmas: (e.value - closed_form).abs() / e.stderr,
            within_3sigma: e.within_sigmas(closed_form, 3.0),
            within_1pct: rel_err <= 0.01,
        }
    }
}

fn volumes(a: &VolumesArgs, g: &GlobalOpts) -> Result<Output, CliError> {
    let samples = g.samples.unwrap_or(10_000_000);
    let (deltas, rads) = if a.delta.is_empty() && a.rad.is_empty() {
        (vec![0.5, 1.0, 2.0], vec![0.5, 1.0, 2.0])
    } else {
        (a.delta.clone(), a.rad.clone())
    };
    let base = IntegrationSpec::monte_carlo(samples, g.seed);
    let s = SiegelDomain::standard();
    let mut rows = Vec::new();
    for (i, &d) in deltas.iter().enumerate() {
        let closed = cut_volume_closed(d)?;
        let p = FPolyhedron::new(s, vec![Cut::new(BoundaryPoint::new(0.0, 0.0, 0.0), d)?])?;
        let e = gap_volume_mc(&p, &base.reseed(i as u64))?;
        rows.push(VolumeRow::new("cut", d, closed, e));
    }
    for (i, &r) in rads.iter().enumerate() {
        let closed = koranyi_ball_volume_closed(r)?;
        let b = KoranyiBall::new(HPoint::ORIGIN, r)?;
        let e = union_volume(&[b], &base.reseed(1000 + i as u64))?;
        rows.push(VolumeRow::new("koranyi-ball", r, closed, e));
    }
    let mut t = Table::new(&[
        "body", "size", "closed_form", "estimate", "stderr", "rel_err", "within_3sigma", "within_1pct",
    ]);
    for r in &rows {
        t.push(vec![
            r.body.into(),
            r.size.into(),
            r.closed_form.into(),
            r.estimate.into(),
            r.stderr.into(),
            r.rel_err.into(),
            r.within_3sigma.into(),
            r.within_1pct.into(),
        ]);
    }
    Ok(Output {
        resolved: json!({"samples": samples, "delta": deltas, "rad": rads}),
        result: json!({"volumes": to_value(&rows)?}),
        table: t,
        extras: Vec::new(),
    })
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn diagram(a: &DiagramArgs, g: &GlobalOpts) -> Result<Output, CliError> {
    let samples = g.samples.unwrap_or(1_000_000);
    if a.pixels == 0 || a.pixels > 4000 {
        return Err(CliError::Validation("pixels must lie in 1..=4000".into()));
    }
    let (source, cfg) = match (&a.config, a.k) {
        (Some(p), _) => {
            let cfg: BallConfiguration = serde_json::from_str(&read_text(p)?)
                .map_err(|e| CliError::Validation(format!("ball configuration: {e}")))?;
            (json!({"config": p}), cfg)
        }
        (None, k) => {
            let k = k.unwrap_or(2);
            (json!({"k": k}), pk_configuration(k)?)
        }
    };
    let diag = HPowerDiagram::new(cfg.balls.clone())?;
    let spec = IntegrationSpec::monte_carlo(samples, g.seed);
    let gap = gap_functional(&diag, &spec)?;
    let vol = union_volume(&cfg.balls, &spec.reseed(1))?;

    let (lo, hi) = (-0.5, 1.5);
    let px = a.pixels as usize;
    let step = (hi - lo) / px as f64;
    let mut cells = Vec::with_capacity(px * px);
    for j in 0..px {
        let y = hi - (j as f64 + 0.5) * step;
        for i in 0..px {
            let x = lo + (i as f64 + 0.5) * step;
            cells.push(hcell_classify(&HPoint::new(x, y, a.x2), &diag));
        }
    }
    let covered = cells.iter().filter(|c| c.is_some()).count();
    let svg = svg::cells(px, lo, hi, &cells);

    let mut t = Table::new(&["ball", "x1", "y1", "x2", "radius"]);
    for (i, b) in cfg.balls.iter().enumerate() {
        t.push(vec![i.into(), b.center.z1.re.into(), b.center.z1.im.into(), b.center.x2.into(), b.radius.into()]);
    }
    Ok(Output {
        resolved: json!({"samples": samples, "source": source, "x2": a.x2, "pixels": a.pixels}),
        result: json!({
            "balls": cfg.balls.len(),
            "radius4_sum": cfg.radius4_sum(),
            "gap_functional": est_json(&gap),
            "union_volume": est_json(&vol),
            "slice": {"x2": a.x2, "window": [lo, hi], "pixels": a.pixels, "covered_pixels": covered},
        }),
        table: t,
        extras: vec![("diagram.svg".into(), svg)],
    })
}

/// `k⁴ + 2k³ − 2k²`.
fn sigma_count_formula(k: u32) -> u64 {
    let k = k as u64;
    k.pow(4) + 2 * k.pow(3) - 2 * k.pow(2)
}

fn tile(a: &TileArgs, g: &GlobalOpts) -> Result<Output, CliError> {
    let samples = g.samples.unwrap_or(2_000_000);
    let p = build_pk(a.k)?;
    let expected = sigma_count_formula(a.k);
    let containment = tile_containment(a.k)?;
    let coverage = coverage_verify(&pk_configuration(a.k)?, a.cover_points)?;
    let gap = gap_volume_mc(&p, &IntegrationSpec::monte_carlo(samples, g.seed))?;
    let bound = upper_bound_closed(a.k)?;
    let below = gap.value <= bound + 3.0 * gap.stderr;
    let mut t = Table::new(&[
        "k", "cuts", "expected_cuts", "cut_size", "gap", "gap_stderr", "upper_bound", "gap_below_bound", "covered",
        "tile_margin", "hat_margin",
    ]);
    t.push(vec![
        a.k.into(),
        p.cuts.len().into(),
        expected.into(),
        p.max_size().into(),
        gap.value.into(),
        gap.stderr.into(),
        bound.into(),
        below.into(),
        coverage.covered.into(),
        containment.tile_margin.into(),
        containment.hat_margin.into(),
    ]);
    Ok(Output {
        resolved: json!({"samples": samples, "k": a.k, "cover_points": a.cover_points}),
        result: json!({
            "k": a.k,
            "cuts": p.cuts.len(),
            "expected_cuts": expected,
            "count_matches": p.cuts.len() as u64 == expected,
            "cut_size": p.max_size(),
            "gap": est_json(&gap),
            "upper_bound": bound,
            "gap_below_bound": below,
            "coverage": to_value(&coverage)?,
            "containment": to_value(&containment)?,
        }),
        table: t,
        extras: Vec::new(),
    })
}

fn bounds(a: &BoundsArgs) -> Result<Output, CliError> {
    let ub = upper_bound_closed(a.k)?;
    let n = sigma_count_formula(a.k);
    let (lo, hi) = (lkor_lower(), lkor_upper());
    let sqrt_n_ub = (n as f64).sqrt() * ub;
    let mut t = Table::new(&["k", "n", "upper_bound", "sqrt_n_upper_bound", "lkor_lower", "lkor_upper"]);
    t.push(vec![a.k.into(), n.into(), ub.into(), sqrt_n_ub.into(), lo.into(), hi.into()]);
    Ok(Output {
        resolved: json!({"k": a.k}),
        result: json!({
            "k": a.k,
            "n": n,
            "upper_bound": ub,
            "sqrt_n_upper_bound": sqrt_n_ub,
            "lkor_lower": lo,
            "lkor_upper": hi,
        }),
        table: t,
        extras: Vec::new(),
    })
}

fn optimizer_config(o: &OptimizerOpts, g: &GlobalOpts) -> OptimizerConfig {
    let mut c = OptimizerConfig::default();
    if let Some(i) = o.iterations {
        c.iterations = i;
    }
    if let Some(r) = o.restarts {
        c.restarts = r;
    }
    if let Some(s) = g.samples {
        c.eval_samples = s;
    }
    c
}

fn optimize(a: &OptimizeArgs, g: &GlobalOpts) -> Result<Output, CliError> {
    let cfg = optimizer_config(&a.opt, g);
    let r = estimate_vn(a.n, g.seed, &cfg)?;
    let lb = lower_bound_check(&r.config)?;
    let mut t = Table::new(&["ball", "x1", "y1", "x2", "radius"]);
    for (i, b) in r.config.balls.iter().enumerate() {
        t.push(vec![i.into(), b.center.z1.re.into(), b.center.z1.im.into(), b.center.x2.into(), b.radius.into()]);
    }
    Ok(Output {
        resolved: json!({"samples": cfg.eval_samples, "n": a.n, "optimizer": to_value(&cfg)?}),
        result: json!({
            "n": a.n,
            "record": to_value(&r.record)?,
            "coverage": to_value(&r.coverage)?,
            "lower_bound": to_value(&lb)?,
            "surrogate_gap": r.surrogate_gap,
            "chain": r.chain,
            "repaired": r.repaired,
            "configuration": to_value(&r.config)?,
        }),
        table: t,
        extras: Vec::new(),
    })
}

fn asymptotics(a: &AsymptoticsArgs, g: &GlobalOpts) -> Result<Output, CliError> {
    let cfg = optimizer_config(&a.opt, g);
    let rows = asymptotics_harness(a.k_max, g.seed, &cfg)?;
    let (lo, hi) = (lkor_lower(), lkor_upper());
    let bracketed = rows.iter().all(|r| {
        [r.lattice.sqrt_n_gap, r.optimized.sqrt_n_gap]
            .iter()
            .all(|v| (lo..=hi).contains(v))
    });
    let last = rows.last().expect("k_max >= 2");
    let improves = last.optimized.sqrt_n_gap < last.lattice.sqrt_n_gap;
    let mut t = Table::new(&[
        "k", "n", "lattice_sqrt_n_gap", "lattice_stderr", "optimized_sqrt_n_gap", "optimized_stderr",
        "optimized_radius4_sum", "optimized_balls",
    ]);
    for r in &rows {
        t.push(vec![
            r.k.into(),
            r.lattice.n.into(),
            r.lattice.sqrt_n_gap.into(),
            r.lattice.sqrt_n_stderr().into(),
            r.optimized.sqrt_n_gap.into(),
            r.optimized.sqrt_n_stderr().into(),
            r.optimized_radius4_sum.into(),
            r.optimized_balls.into(),
        ]);
    }
    Ok(Output {
        resolved: json!({"samples": cfg.eval_samples, "k_max": a.k_max, "optimizer": to_value(&cfg)?}),
        result: json!({
            "rows": to_value(&rows)?,
            "bracket": [lo, hi],
            "all_within_bracket": bracketed,
            "optimized_below_lattice_at_k_max": improves,
        }),
        table: t,
        extras: Vec::new(),
    })
}

fn parse_point(v: &[f64], what: &str) -> Result<[f64; 4], CliError> {
    <[f64; 4]>::try_from(v).map_err(|_| CliError::Validation(format!("{what} needs four coordinates")))
}

fn fefferman(a: &FeffermanArgs) -> Result<Output, CliError> {
    let quad = FeffermanQuadrature { resolution: a.resolution };
    let run = |rho: &dyn DefiningFunction, param: &Parametrization| -> Result<_, CliError> {
        Ok(fefferman_integral(&Scaled::new(rho, a.scale)?, param, &quad)?)
    };
    let (domain, res, closed) = match &a.domain {
        FeffermanDomain::Ball { radius } => {
            let rho = QuadraticRho::ball(*radius)?;
            let r = run(&rho, &Parametrization::Star { center: [0.0; 4] })?;
            (json!({"kind": "ball", "radius": radius}), r, Some(4f64.powf(2.0 / 3.0) * PI * PI * radius.powf(8.0 / 3.0)))
        }
        FeffermanDomain::Siegel { lambda } => {
            let rho = QuadraticRho::siegel(*lambda)?;
            let r = run(&rho, &Parametrization::GraphOverUnitBox)?;
            (json!({"kind": "siegel", "lambda": lambda}), r, Some(4f64.powf(1.0 / 3.0) * lambda.powf(1.0 / 3.0)))
        }
        FeffermanDomain::Custom { file, center } => {
            let rho = PolynomialRho::from_json(&read_text(file)?)?;
            let param = match center {
                Some(c) => Parametrization::Star { center: parse_point(c, "center")? },
                None => Parametrization::GraphOverUnitBox,
            };
            let r = run(&rho, &param)?;
            (json!({"kind": "custom", "file": file, "parametrization": to_value(&param)?}), r, None)
        }
    };
    let rel_err = closed.map(|c| (res.integral - c).abs() / c);
    let mut t = Table::new(&["x1", "y1", "x2", "y2", "density"]);
    for (x, d) in &res.samples {
        t.push(vec![x[0].into(), x[1].into(), x[2].into(), x[3].into(), (*d).into()]);
    }
    Ok(Output {
        resolved: json!({"domain": domain, "resolution": a.resolution, "scale": a.scale}),
        result: json!({
            "domain": domain,
            "scale": a.scale,
            "integral": res.integral,
            "area": res.area,
            "nodes": res.nodes,
            "closed_form": closed,
            "rel_err": rel_err,
        }),
        table: t,
        extras: Vec::new(),
    })
}

fn darboux(a: &DarbouxArgs, g: &GlobalOpts) -> Result<Output, CliError> {
    let ode = OdeSpec::default();
    let mu = Complex64::new(a.mu_re, a.mu_im);
    let model = QuadraticRho::model(a.lambda, mu, a.nu)?;
    let flow = straighten_flow(model, a.lambda, a.radius, ode)?;
    let contact = contact_check(&flow, a.points, a.probe_radius, g.seed)?;

    // on the model itself every stage must reduce to the identity
    let siegel = QuadraticRho::siegel(a.lambda)?;
    let id_flow = straighten_flow(&siegel, a.lambda, a.radius, ode)?;
    let id_check = contact_check(&id_flow, a.points, a.probe_radius, g.seed)?;
    let theta_spec = ThetaSpec {
        radius: a.probe_radius,
        seed: g.seed,
        pairs: 50,
        boxes: 3,
        ode,
        ..ThetaSpec::default()
    };
    let (theta_map, _) = theta_composite(&siegel, &[Complex64::new(0.0, 0.0); 2], &theta_spec)?;
    let mut theta_dev = 0.0f64;
    for p in &id_check.points {
        let z1 = Complex64::new(p[0], p[1]);
        let z = [z1, Complex64::new(p[2], a.lambda * z1.norm_sqr())];
        let t = theta_map.apply(&z)?;
        let (x, y) = (to_r4(&t), to_r4(&z));
        theta_dev = (0..4).map(|i| (x[i] - y[i]).abs()).fold(theta_dev, f64::max);
    }
    let tol = 10.0 * ode.rtol;
    let alpha_dev = (id_check.alpha_at_origin - 1.0).abs();
    let identity = json!({
        "flow_max_displacement": id_check.max_displacement,
        "alpha_deviation": alpha_dev,
        "theta_max_displacement": theta_dev,
        "tolerance": tol,
        "within_tolerance": id_check.max_displacement <= tol && alpha_dev <= tol && theta_dev <= tol,
    });

    let theta = match &a.rho_file {
        Some(f) => {
            let rho = PolynomialRho::from_json(&read_text(f)?)?;
            let q = match &a.q {
                Some(v) => from_r4(&parse_point(v, "q")?),
                None => [Complex64::new(0.0, 0.0); 2],
            };
            let spec = ThetaSpec {
                radius: a.theta_radius,
                seed: g.seed,
                ode,
                ..ThetaSpec::default()
            };
            Some(to_value(&theta_composite(&rho, &q, &spec)?.1)?)
        }
        None => None,
    };

    let mut t = Table::new(&["x1", "y1", "x2", "contact_residual"]);
    for (p, r) in contact.points.iter().zip(&contact.residuals) {
        t.push(vec![p[0].into(), p[1].into(), p[2].into(), (*r).into()]);
    }
    Ok(Output {
        resolved: json!({
            "lambda": a.lambda, "mu": [a.mu_re, a.mu_im], "nu": a.nu, "radius": a.radius,
            "probe_radius": a.probe_radius, "points": a.points, "ode": to_value(&ode)?,
            "rho_file": a.rho_file, "q": a.q, "theta_radius": a.theta_radius,
        }),
        result: json!({
            "contact": to_value(&contact)?,
            "identity": identity,
            "theta": theta,
        }),
        table: t,
        extras: Vec::new(),
    })
}

fn lemniscate(n: &[u32], reading: ReadingArg, radial: u32, angular: u32, draw: bool, g: &GlobalOpts) -> Result<Output, CliError> {
    let spec = LemniscateSpec {
        reading: match reading {
            ReadingArg::PerFactor => Reading::PerFactor,
            ReadingArg::Literal => Reading::Literal,
        },
        radial,
        angular,
        sandwich_samples: g.samples.unwrap_or(10_000),
        seed: g.seed,
    };
    let rep = lemniscate_demo(n, &spec)?;
    let mut t = Table::new(&[
        "n", "gap", "n_gap", "annulus_lower", "annulus_upper", "within_annulus", "inner_violations",
        "outer_samples", "outer_violations", "sandwich_holds",
    ]);
    for r in &rep.rows {
        t.push(vec![
            r.n.into(),
            r.gap.into(),
            r.n_gap.into(),
            r.annulus_lower.into(),
            r.annulus_upper.into(),
            r.within_annulus.into(),
            r.inner_violations.into(),
            r.outer_samples.into(),
            r.outer_violations.into(),
            r.sandwich_holds.into(),
        ]);
    }
    let mut extras = Vec::new();
    if draw {
        let m = *n.iter().max().expect("clap supplies a default list");
        extras.push((
            "lemniscate.svg".to_string(),
            svg::lemniscate(&boundary_curve(m, 4000), inner_radius(m), outer_radius(m)),
        ));
    }
    Ok(Output {
        resolved: json!({"samples": spec.sandwich_samples, "n": n, "spec": to_value(&spec)?}),
        result: to_value(&rep)?,
        table: t,
        extras,
    })
}

fn bidisc(m: &[u32], c: f64, g: &GlobalOpts) -> Result<Output, CliError> {
    let spec = BidiscSpec {
        scheme: BidiscScheme { delta_constant: c },
        samples: g.samples.unwrap_or(4_000_000),
        seed: g.seed,
    };
    let rep = bidisc_demo(m, &spec)?;
    let mut t = Table::new(&["m", "n", "delta", "gap", "gap_stderr", "sqrt_n_gap", "sqrt_n_gap_stderr"]);
    for r in &rep.rows {
        t.push(vec![
            r.m.into(),
            r.n.into(),
            r.delta.into(),
            r.gap.value.into(),
            r.gap.stderr.into(),
            r.sqrt_n_gap.into(),
            r.sqrt_n_gap_stderr.into(),
        ]);
    }
    let mut result = to_value(&rep)?;
    if let (Some(f), Some(l)) = (rep.rows.first(), rep.rows.last()) {
        result["first_to_last_ratio"] = json!(f.sqrt_n_gap / l.sqrt_n_gap);
    }
    Ok(Output {
        resolved: json!({"samples": spec.samples, "m": m, "spec": to_value(&spec)?}),
        result,
        table: t,
        extras: Vec::new(),
    })
}
