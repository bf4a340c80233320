use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{stream_rng, Estimate, NeumaierSum};

const CHUNK: u64 = 1 << 15;

/// A finite union of sampling boxes carrying an integrand that vanishes
/// outside the union.
pub trait BoxUnion: Sync {
    type Point;

    fn box_count(&self) -> usize;

    fn box_volume(&self, i: usize) -> f64;

    /// Uniform sample of box `i`.
    fn sample_box(&self, i: usize, rng: &mut ChaCha8Rng) -> Self::Point;

    /// Number of boxes containing `p` (at least one for sampled points)
    /// and the integrand value at `p`.
    fn weigh(&self, p: &Self::Point) -> (u32, f64);
}

/// Monte-Carlo integral over a union of boxes, stratified by box.
///
/// Box `i` receives a share of the budget proportional to its volume.
/// A point drawn in box `i` is weighted by `1/m(p)`, with `m(p)` the number
/// of boxes covering it, so overlapping boxes are not double counted.
pub fn integrate_union<U: BoxUnion>(u: &U, samples: u64, seed: u64) -> Estimate {
    let nb = u.box_count();
    let vols: Vec<f64> = (0..nb).map(|i| u.box_volume(i)).collect();
    let total: f64 = vols.iter().sum();
    if nb == 0 || total <= 0.0 {
        return Estimate::exact(0.0);
    }
    let alloc: Vec<u64> = vols
        .iter()
        .map(|v| ((samples as f64 * v / total).round() as u64).max(2))
        .collect();

    let mut jobs = Vec::new();
    for (i, &n) in alloc.iter().enumerate() {
        let mut start = 0;
        let mut c = 0u64;
        while start < n {
            let len = CHUNK.min(n - start);
            jobs.push((i, c, len));
            start += len;
            c += 1;
        }
    }

    let partial: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|&(i, c, len)| {
            let mut rng = stream_rng(seed, i as u64, c);
            let mut s = NeumaierSum::new();
            let mut s2 = NeumaierSum::new();
            for _ in 0..len {
                let p = u.sample_box(i, &mut rng);
                let (m, f) = u.weigh(&p);
                let w = if m == 0 { 0.0 } else { f / m as f64 };
                s.add(w);
                s2.add(w * w);
            }
            (s.value(), s2.value())
        })
        .collect();

    let mut sums = vec![(NeumaierSum::new(), NeumaierSum::new()); nb];
    for (&(i, _, _), &(a, b)) in jobs.iter().zip(&partial) {
        sums[i].0.add(a);
        sums[i].1.add(b);
    }

    let mut value = NeumaierSum::new();
    let mut var = NeumaierSum::new();
    for i in 0..nb {
        let n = alloc[i] as f64;
        let mean = sums[i].0.value() / n;
        let m2 = sums[i].1.value() / n;
        let s2 = (m2 - mean * mean).max(0.0) * n / (n - 1.0);
        value.add(vols[i] * mean);
        var.add(vols[i] * vols[i] * s2 / n);
    }
    Estimate {
        value: value.value(),
        stderr: var.value().sqrt(),
    }
}

/// Midpoint-rule quadrature of `f` over the box `[lo, hi]` with `res`
/// cells per axis.
pub fn integrate_grid<const D: usize, F>(lo: [f64; D], hi: [f64; D], res: u32, f: F) -> f64
where
    F: Fn(&[f64; D]) -> f64 + Sync,
{
    assert!(D >= 1 && res >= 1);
    let h: [f64; D] = std::array::from_fn(|k| (hi[k] - lo[k]) / res as f64);
    let cell: f64 = h.iter().product();
    let inner = (res as u64).pow(D as u32 - 1);
    let slabs: Vec<f64> = (0..res)
        .into_par_iter()
        .map(|i0| {
            let mut s = NeumaierSum::new();
            let mut x = [0.0; D];
            x[0] = lo[0] + (i0 as f64 + 0.5) * h[0];
            for mut j in 0..inner {
                for k in 1..D {
                    let ik = j % res as u64;
                    j /= res as u64;
                    x[k] = lo[k] + (ik as f64 + 0.5) * h[k];
                }
                s.add(f(&x));
            }
            s.value()
        })
        .collect();
    slabs.into_iter().collect::<NeumaierSum>().value() * cell
}

/// Uniform sample from `[lo, hi)`.
pub(crate) fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}
