//! Simulated annealing over ball coverings of the unit box.
//!
//! The objective is the gap functional evaluated on a fixed Halton point
//! set of a bounding region; coverage is tracked by per-point cover counts
//! on a second Halton set of the target. Both sets are bucketed on a
//! horizontal grid so a move only touches points near the moved ball.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::covering::{ball_index, best_margin, coverage_verify, target_samples, CoverageReport};
use super::lattice::pk_configuration;
use super::{AsymptoticRecord, BallConfiguration};
use crate::error::{invalid, Error, Result};
use crate::heis::{dist, gauge4, group_mul, relative, sigma_k_count, HPoint, KoranyiBall};
use crate::numerics::{halton3, mix_seed, stream_rng, IntegrationSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Proposals per chain.
    pub iterations: u64,
    /// Independent chains; the best one is kept.
    pub restarts: u32,
    /// Objective points per ball.
    pub quad_points_per_ball: u64,
    /// Coverage points used while annealing.
    pub cover_points: u64,
    /// Halton points for the final coverage certificate.
    pub verify_points: u64,
    /// Monte-Carlo samples for the reported gap.
    pub eval_samples: u64,
    /// Initial and final temperature, relative to the mean gap per ball.
    pub t_start: f64,
    pub t_end: f64,
    /// Initial move size relative to the ball radius.
    pub step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            iterations: 20_000,
            restarts: 4,
            quad_points_per_ball: 2_000,
            cover_points: 1 << 15,
            verify_points: 1 << 17,
            eval_samples: 2_000_000,
            t_start: 0.05,
            t_end: 1e-4,
            step: 0.15,
        }
    }
}

impl OptimizerConfig {
    pub fn with_budget(iterations: u64) -> Self {
        OptimizerConfig {
            iterations,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VnResult {
    pub config: BallConfiguration,
    pub record: AsymptoticRecord,
    pub coverage: CoverageReport,
    /// Objective of the chosen chain on its quadrature set.
    pub surrogate_gap: f64,
    pub chain: u32,
    /// Radii enlarged while certifying coverage on the verification set.
    pub repaired: usize,
}

const NONE: u32 = u32::MAX;

/// Uniform horizontal grid.
#[derive(Clone, Copy, Debug)]
struct Grid {
    x0: f64,
    y0: f64,
    cell: f64,
    nx: usize,
    ny: usize,
}

impl Grid {
    fn cell_of(&self, x: f64, y: f64) -> usize {
        let ix = (((x - self.x0) / self.cell).floor().max(0.0) as usize).min(self.nx - 1);
        let iy = (((y - self.y0) / self.cell).floor().max(0.0) as usize).min(self.ny - 1);
        iy * self.nx + ix
    }

    /// Cell range `(ix0, ix1, iy0, iy1)` touched by a ball's horizontal square.
    fn rect(&self, b: &KoranyiBall) -> (usize, usize, usize, usize) {
        let f = |v: f64, o: f64, n: usize| (((v - o) / self.cell).floor().max(0.0) as usize).min(n - 1);
        (
            f(b.center.z1.re - b.radius, self.x0, self.nx),
            f(b.center.z1.re + b.radius, self.x0, self.nx),
            f(b.center.z1.im - b.radius, self.y0, self.ny),
            f(b.center.z1.im + b.radius, self.y0, self.ny),
        )
    }

    fn cells(&self, b: &KoranyiBall) -> impl Iterator<Item = usize> + '_ {
        let (x0, x1, y0, y1) = self.rect(b);
        (y0..=y1).flat_map(move |y| (x0..=x1).map(move |x| y * self.nx + x))
    }

    /// Cells of `a`, then the cells of `b` not already listed.
    fn cells_union(&self, a: &KoranyiBall, b: &KoranyiBall) -> Vec<usize> {
        let ra = self.rect(a);
        let mut out: Vec<usize> = self.cells(a).collect();
        let (x0, x1, y0, y1) = self.rect(b);
        for y in y0..=y1 {
            for x in x0..=x1 {
                if !(ra.0 <= x && x <= ra.1 && ra.2 <= y && y <= ra.3) {
                    out.push(y * self.nx + x);
                }
            }
        }
        out
    }
}

/// Points sorted by grid cell.
struct PointSet {
    pts: Vec<HPoint>,
    starts: Vec<usize>,
}

impl PointSet {
    fn new(grid: &Grid, mut pts: Vec<HPoint>) -> Self {
        pts.sort_by_key(|p| grid.cell_of(p.z1.re, p.z1.im));
        let mut starts = vec![0; grid.nx * grid.ny + 1];
        for p in &pts {
            starts[grid.cell_of(p.z1.re, p.z1.im) + 1] += 1;
        }
        for i in 1..starts.len() {
            starts[i] += starts[i - 1];
        }
        PointSet { pts, starts }
    }

    fn range(&self, cell: usize) -> std::ops::Range<usize> {
        self.starts[cell]..self.starts[cell + 1]
    }
}

/// `max(0, √(r⁴ − p₂²) − |p₁|²)` with `p = c⁻¹·z`: the positive part of
/// the negated horizontal power.
fn neg_power(b: &KoranyiBall, z: &HPoint) -> f64 {
    let p = relative(&b.center, z);
    let r2 = b.radius * b.radius;
    if p.x2.abs() >= r2 {
        return 0.0;
    }
    ((r2 * r2 - p.x2 * p.x2).sqrt() - p.z1.norm_sqr()).max(0.0)
}

struct Shared {
    grid: Grid,
    quad: PointSet,
    cover: PointSet,
    lo: [f64; 3],
    hi: [f64; 3],
    cell_volume: f64,
    r_max: f64,
    r_min: f64,
    target: crate::heis::HBox,
}

impl Shared {
    fn admissible(&self, b: &KoranyiBall) -> bool {
        if !(self.r_min..=self.r_max).contains(&b.radius) {
            return false;
        }
        let (l, h) = b.aabb();
        (0..3).all(|k| l[k] >= self.lo[k] && h[k] <= self.hi[k])
    }
}

struct Chain<'a> {
    s: &'a Shared,
    balls: Vec<KoranyiBall>,
    cells: Vec<Vec<u32>>,
    count: Vec<u32>,
    qval: Vec<f64>,
    qarg: Vec<u32>,
    // scratch
    qchg: Vec<(u32, f64, u32)>,
    cchg: Vec<(u32, i32)>,
}

impl<'a> Chain<'a> {
    fn new(s: &'a Shared, balls: Vec<KoranyiBall>) -> Result<Self> {
        let g = s.grid;
        let mut cells = vec![Vec::new(); g.nx * g.ny];
        for (i, b) in balls.iter().enumerate() {
            for c in g.cells(b) {
                cells[c].push(i as u32);
            }
        }
        let mut ch = Chain {
            s,
            balls,
            cells,
            count: vec![0; s.cover.pts.len()],
            qval: vec![0.0; s.quad.pts.len()],
            qarg: vec![NONE; s.quad.pts.len()],
            qchg: Vec::new(),
            cchg: Vec::new(),
        };
        for (j, p) in s.cover.pts.iter().enumerate() {
            let c = g.cell_of(p.z1.re, p.z1.im);
            ch.count[j] = ch.cells[c].iter().filter(|&&i| ch.balls[i as usize].contains(p)).count() as u32;
        }
        if ch.count.iter().any(|&c| c == 0) {
            return Err(Error::Infeasible("initial configuration leaves coverage points uncovered".into()));
        }
        for j in 0..s.quad.pts.len() {
            let (v, a) = ch.best_at(j, NONE, None);
            ch.qval[j] = v;
            ch.qarg[j] = a;
        }
        Ok(ch)
    }

    /// Best negated power at quadrature point `j`, with ball `skip`
    /// replaced by `repl`.
    fn best_at(&self, j: usize, skip: u32, repl: Option<&KoranyiBall>) -> (f64, u32) {
        let p = &self.s.quad.pts[j];
        let c = self.s.grid.cell_of(p.z1.re, p.z1.im);
        let mut best = 0.0;
        let mut arg = NONE;
        for &i in &self.cells[c] {
            if i == skip {
                continue;
            }
            let v = neg_power(&self.balls[i as usize], p);
            if v > best || (v == best && v > 0.0 && i < arg) {
                best = v;
                arg = i;
            }
        }
        if let Some(b) = repl {
            let v = neg_power(b, p);
            if v > best || (v == best && v > 0.0 && skip < arg) {
                best = v;
                arg = skip;
            }
        }
        (best, arg)
    }

    fn objective(&self) -> f64 {
        crate::numerics::compensated_sum(self.qval.iter().copied()) * self.s.cell_volume
    }

    /// Change of objective if ball `i` became `nb`, or `None` when the move
    /// uncovers a coverage point or leaves the target.
    fn evaluate(&mut self, i: usize, nb: &KoranyiBall, strict: bool) -> Option<f64> {
        let s = self.s;
        let old = self.balls[i];
        let cells = s.grid.cells_union(&old, nb);
        self.cchg.clear();
        let mut meets = s.target.contains(false, &nb.center);
        for &c in &cells {
            for j in s.cover.range(c) {
                let p = &s.cover.pts[j];
                let a = old.contains(p);
                let b = nb.contains(p);
                meets |= b;
                if a && !b {
                    if self.count[j] == 1 {
                        return None;
                    }
                    self.cchg.push((j as u32, -1));
                } else if b && !a {
                    self.cchg.push((j as u32, 1));
                }
            }
        }
        if strict && !meets {
            return None;
        }
        self.qchg.clear();
        let mut delta = 0.0;
        let iu = i as u32;
        for &c in &cells {
            for j in s.quad.range(c) {
                let p = &s.quad.pts[j];
                let (v, a) = if self.qarg[j] == iu {
                    self.best_at(j, iu, Some(nb))
                } else {
                    let v = neg_power(nb, p);
                    if v > self.qval[j] || (v == self.qval[j] && v > 0.0 && iu < self.qarg[j]) {
                        (v, iu)
                    } else {
                        continue;
                    }
                };
                if v != self.qval[j] || a != self.qarg[j] {
                    delta += v - self.qval[j];
                    self.qchg.push((j as u32, v, a));
                }
            }
        }
        Some(delta * s.cell_volume)
    }

    fn commit(&mut self, i: usize, nb: KoranyiBall) {
        let g = self.s.grid;
        let iu = i as u32;
        for c in g.cells(&self.balls[i]) {
            self.cells[c].retain(|&x| x != iu);
        }
        for c in g.cells(&nb) {
            self.cells[c].push(iu);
        }
        self.balls[i] = nb;
        for &(j, d) in &self.cchg {
            self.count[j as usize] = (self.count[j as usize] as i64 + d as i64) as u32;
        }
        for &(j, v, a) in &self.qchg {
            self.qval[j as usize] = v;
            self.qarg[j as usize] = a;
        }
    }

    /// Shrinks each ball to the farthest coverage point only it covers.
    /// Balls that cover nothing exclusively collapse to the minimum radius.
    fn tighten(&mut self) {
        let mut order: Vec<usize> = (0..self.balls.len()).collect();
        order.sort_by(|&a, &b| self.balls[b].radius.total_cmp(&self.balls[a].radius).then(a.cmp(&b)));
        for i in order {
            let b = self.balls[i];
            let mut need: f64 = 0.0;
            for c in self.s.grid.cells(&b) {
                for j in self.s.cover.range(c) {
                    let p = &self.s.cover.pts[j];
                    if self.count[j] == 1 && b.contains(p) {
                        need = need.max(dist(p, &b.center));
                    }
                }
            }
            let r = need.max(self.s.r_min);
            if r < b.radius {
                let nb = KoranyiBall { center: b.center, radius: r };
                // redundant balls collapse here and are dropped later
                if self.evaluate(i, &nb, false).is_some() {
                    self.commit(i, nb);
                }
            }
        }
    }

    fn propose(&self, rng: &mut ChaCha8Rng, i: usize, step: f64) -> KoranyiBall {
        let b = self.balls[i];
        let u: f64 = rng.random();
        let g = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };
        if u < 0.45 {
            let s = step * b.radius;
            let tau = HPoint::from_parts(Complex64::new(s * g(rng), s * g(rng)), s * s * 2.0 * g(rng) + s * b.radius * g(rng));
            KoranyiBall { center: group_mul(&b.center, &tau), radius: b.radius }
        } else if u < 0.8 {
            KoranyiBall { center: b.center, radius: b.radius * (step * 0.5 * g(rng)).exp() }
        } else if u < 0.9 {
            let s = step * b.radius;
            let tau = HPoint::from_parts(Complex64::new(s * g(rng), s * g(rng)), s * b.radius * g(rng));
            KoranyiBall { center: group_mul(&b.center, &tau), radius: b.radius * (step * 0.5 * g(rng)).exp() }
        } else {
            let j = rng.random_range(0..self.s.cover.pts.len());
            let k = rng.random_range(0..self.balls.len());
            KoranyiBall { center: self.s.cover.pts[j], radius: self.balls[k].radius }
        }
    }
}

fn initial_balls(n: u64) -> Result<Vec<KoranyiBall>> {
    let mut k = 1u32;
    while sigma_k_count(k + 1) <= n {
        k += 1;
    }
    // the lattice balls pass exactly through box corners; a relative
    // inflation of 1e-9 absorbs the rounding
    let base: Vec<KoranyiBall> = pk_configuration(k)?
        .balls
        .into_iter()
        .map(|b| KoranyiBall { center: b.center, radius: b.radius * (1.0 + 1e-9) })
        .collect();
    let mut balls = base.clone();
    let mut i = 0;
    while (balls.len() as u64) < n {
        balls.push(base[i % base.len()]);
        i += 1;
    }
    Ok(balls)
}

fn build_shared(init: &[KoranyiBall], cfg: &OptimizerConfig, target: crate::heis::HBox) -> Shared {
    let (mut lo, mut hi) = init[0].aabb();
    for b in &init[1..] {
        let (l, h) = b.aabb();
        for k in 0..3 {
            lo[k] = lo[k].min(l[k]);
            hi[k] = hi[k].max(h[k]);
        }
    }
    for k in 0..3 {
        let pad = 0.05 * (hi[k] - lo[k]);
        lo[k] -= pad;
        hi[k] += pad;
    }
    let r_max = init.iter().map(|b| b.radius).fold(0.0, f64::max);
    let cell = r_max.max(1e-3);
    let nx = (((hi[0] - lo[0]) / cell).ceil() as usize).max(1);
    let ny = (((hi[1] - lo[1]) / cell).ceil() as usize).max(1);
    let grid = Grid { x0: lo[0], y0: lo[1], cell, nx, ny };

    let nq = (cfg.quad_points_per_ball * init.len() as u64).max(20_000);
    // an irrational rotation keeps the objective set independent of the
    // coverage and verification sets
    let qshift = [0.5 * 2f64.sqrt(), 0.5 * 3f64.sqrt(), 0.1 * 5f64.sqrt()];
    let quad: Vec<HPoint> = (1..=nq)
        .map(|i| {
            let u = halton3(i, qshift);
            HPoint::new(lo[0] + u[0] * (hi[0] - lo[0]), lo[1] + u[1] * (hi[1] - lo[1]), lo[2] + u[2] * (hi[2] - lo[2]))
        })
        .collect();
    let vol: f64 = (0..3).map(|k| hi[k] - lo[k]).product();
    let probe = BallConfiguration { balls: Vec::new(), target };
    let cover = target_samples(&probe, cfg.cover_points, [PI.fract(), 0.5f64.sqrt(), 7f64.sqrt().fract()]);
    Shared {
        grid,
        quad: PointSet::new(&grid, quad),
        cover: PointSet::new(&grid, cover),
        lo,
        hi,
        cell_volume: vol / nq as f64,
        r_max,
        r_min: 1e-9,
        target,
    }
}

fn run_chain(s: &Shared, init: &[KoranyiBall], cfg: &OptimizerConfig, seed: u64, chain: u32) -> Result<(f64, Vec<KoranyiBall>)> {
    let mut ch = Chain::new(s, init.to_vec())?;
    let mut rng = stream_rng(seed, 0xa11ea1, chain as u64);
    let n = ch.balls.len();
    let scale = ch.objective() / n as f64;
    let t0 = cfg.t_start * scale;
    let t1 = cfg.t_end * scale;
    let iters = cfg.iterations.max(1);
    let mut best = (ch.objective(), ch.balls.clone());
    let mut since_check = 0u64;
    for it in 0..iters {
        let prog = it as f64 / iters as f64;
        let temp = t0 * (t1 / t0).powf(prog);
        let step = cfg.step * (1.0 - 0.9 * prog);
        let i = rng.random_range(0..n);
        let nb = ch.propose(&mut rng, i, step);
        let u: f64 = rng.random();
        if !s.admissible(&nb) {
            continue;
        }
        if let Some(d) = ch.evaluate(i, &nb, true) {
            if d <= 0.0 || u < (-d / temp).exp() {
                ch.commit(i, nb);
            }
        }
        since_check += 1;
        if since_check >= iters / 20 + 1 {
            since_check = 0;
            let o = ch.objective();
            if o < best.0 {
                best = (o, ch.balls.clone());
            }
        }
    }
    if ch.objective() > best.0 {
        ch = Chain::new(s, best.1)?;
    }
    ch.tighten();
    ch.tighten();
    Ok((ch.objective(), ch.balls))
}

/// Grows radii until every verification point is covered, and drops
/// balls that no longer meet the target.
fn certify(balls: &mut Vec<KoranyiBall>, target: crate::heis::HBox, points: u64) -> usize {
    let probe = BallConfiguration { balls: Vec::new(), target };
    let pts = target_samples(&probe, points, [0.0; 3]);
    balls.retain(|b| b.radius > 1e-6);
    let mut repaired = 0;
    let index = ball_index(balls);
    for p in &pts {
        if best_margin(balls, &index, p) >= 0.0 {
            continue;
        }
        let (j, _) = balls
            .iter()
            .enumerate()
            .map(|(j, b)| (j, dist(p, &b.center) - b.radius))
            .fold((0, f64::INFINITY), |a, x| if x.1 < a.1 { x } else { a });
        let c = balls[j].center;
        let r4 = gauge4(&relative(&c, p));
        let mut r = r4.sqrt().sqrt();
        while !(KoranyiBall { center: c, radius: r }).contains(p) {
            r = r * (1.0 + 1e-15) + f64::MIN_POSITIVE;
        }
        balls[j].radius = r;
        repaired += 1;
    }
    let covered: Vec<bool> = balls.iter().map(|b| pts.iter().any(|p| b.contains(p)) || target.contains(false, &b.center)).collect();
    let mut k = 0;
    balls.retain(|_| {
        k += 1;
        covered[k - 1]
    });
    repaired
}

/// Searches for a covering of the unit box by at most `n` Korányi balls
/// with small gap functional.
pub fn estimate_vn(n: u64, seed: u64, cfg: &OptimizerConfig) -> Result<VnResult> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    if cfg.restarts == 0 {
        return invalid("at least one restart is required");
    }
    let init = initial_balls(n)?;
    let target = crate::heis::HBox::unit();
    let shared = build_shared(&init, cfg, target);
    let chains: Vec<Result<(f64, Vec<KoranyiBall>)>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|c| run_chain(&shared, &init, cfg, seed, c))
        .collect();
    let mut best: Option<(f64, u32, Vec<KoranyiBall>)> = None;
    for (c, r) in chains.into_iter().enumerate() {
        let (obj, balls) = r?;
        if best.as_ref().is_none_or(|b| obj < b.0) {
            best = Some((obj, c as u32, balls));
        }
    }
    let (surrogate, chain, mut balls) = best.expect("at least one chain");
    let repaired = certify(&mut balls, target, cfg.verify_points);
    let config = BallConfiguration { balls, target };
    let coverage = coverage_verify(&config, cfg.verify_points)?;
    if !coverage.covered {
        return Err(Error::Infeasible(format!("optimizer output failed coverage (margin {:.3e})", coverage.worst_margin)));
    }
    let gap = config.gap(&IntegrationSpec::monte_carlo(cfg.eval_samples, mix_seed(seed, 0xe7a1, n)))?;
    Ok(VnResult {
        record: AsymptoticRecord::new(n, gap),
        config,
        coverage,
        surrogate_gap: surrogate,
        chain,
        repaired,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnessRow {
    pub k: u32,
    pub lattice: AsymptoticRecord,
    pub optimized: AsymptoticRecord,
    pub optimized_radius4_sum: f64,
    pub optimized_balls: usize,
}

/// For `k = 1..=k_max`, the lattice covering `P_k` and an optimized
/// covering with `|Σ_k|` balls.
pub fn asymptotics_harness(k_max: u32, seed: u64, cfg: &OptimizerConfig) -> Result<Vec<HarnessRow>> {
    if k_max < 2 {
        return invalid("k_max must be at least 2");
    }
    let mut rows = Vec::new();
    for k in 1..=k_max {
        let n = sigma_k_count(k);
        let lat = pk_configuration(k)?;
        let lg = lat.gap(&IntegrationSpec::monte_carlo(cfg.eval_samples, mix_seed(seed, 0x1a77, k as u64)))?;
        let opt = estimate_vn(n, mix_seed(seed, 0x0b7, k as u64), cfg)?;
        rows.push(HarnessRow {
            k,
            lattice: AsymptoticRecord::new(n, lg),
            optimized: opt.record,
            optimized_radius4_sum: opt.config.radius4_sum(),
            optimized_balls: opt.config.balls.len(),
        });
    }
    Ok(rows)
}
