//! Uniform bucket grid over axis-aligned squares in the horizontal plane.

#[derive(Clone, Debug)]
pub struct SquareIndex {
    x0: f64,
    y0: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

const MAX_SIDE: usize = 512;

impl SquareIndex {
    /// `squares[i] = (cx, cy, half_width)`.
    pub fn new(squares: &[(f64, f64, f64)]) -> Self {
        if squares.is_empty() {
            return SquareIndex {
                x0: 0.0,
                y0: 0.0,
                cell: 1.0,
                nx: 0,
                ny: 0,
                buckets: Vec::new(),
            };
        }
        let (mut xl, mut yl, mut xh, mut yh) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        let mut halves: Vec<f64> = Vec::with_capacity(squares.len());
        for &(cx, cy, h) in squares {
            xl = xl.min(cx - h);
            yl = yl.min(cy - h);
            xh = xh.max(cx + h);
            yh = yh.max(cy + h);
            halves.push(h);
        }
        halves.sort_by(f64::total_cmp);
        let median = halves[halves.len() / 2];
        let extent = (xh - xl).max(yh - yl).max(1e-300);
        let cell = (2.0 * median).max(extent / MAX_SIDE as f64).max(1e-300);
        let nx = (((xh - xl) / cell).ceil() as usize).clamp(1, MAX_SIDE);
        let ny = (((yh - yl) / cell).ceil() as usize).clamp(1, MAX_SIDE);
        let mut idx = SquareIndex {
            x0: xl,
            y0: yl,
            cell,
            nx,
            ny,
            buckets: vec![Vec::new(); nx * ny],
        };
        for (i, &(cx, cy, h)) in squares.iter().enumerate() {
            let (ia, ib) = idx.range(cx - h, cx + h, idx.x0, idx.nx);
            let (ja, jb) = idx.range(cy - h, cy + h, idx.y0, idx.ny);
            for jx in ia..=ib {
                for jy in ja..=jb {
                    idx.buckets[jy * nx + jx].push(i as u32);
                }
            }
        }
        idx
    }

    fn range(&self, lo: f64, hi: f64, origin: f64, n: usize) -> (usize, usize) {
        let a = ((lo - origin) / self.cell).floor().max(0.0) as usize;
        let b = ((hi - origin) / self.cell).floor().max(0.0) as usize;
        (a.min(n - 1), b.min(n - 1))
    }

    /// Indices of squares that may contain `(x, y)`.
    pub fn query(&self, x: f64, y: f64) -> &[u32] {
        if self.nx == 0 {
            return &[];
        }
        let fx = (x - self.x0) / self.cell;
        let fy = (y - self.y0) / self.cell;
        let slack = 1e-9;
        let inside = fx >= -slack
            && fy >= -slack
            && fx <= self.nx as f64 + slack
            && fy <= self.ny as f64 + slack;
        if !inside {
            return &[];
        }
        let ix = (fx.max(0.0) as usize).min(self.nx - 1);
        let iy = (fy.max(0.0) as usize).min(self.ny - 1);
        &self.buckets[iy * self.nx + ix]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn query_returns_every_containing_square() {
        let mut rng = crate::numerics::stream_rng(5, 0, 0);
        let squares: Vec<(f64, f64, f64)> = (0..200)
            .map(|_| {
                (
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(0.01..0.8),
                )
            })
            .collect();
        let idx = SquareIndex::new(&squares);
        for _ in 0..20_000 {
            let x = rng.random_range(-4.0..4.0);
            let y = rng.random_range(-4.0..4.0);
            let cand = idx.query(x, y);
            for (i, &(cx, cy, h)) in squares.iter().enumerate() {
                if (x - cx).abs() <= h && (y - cy).abs() <= h {
                    assert!(cand.contains(&(i as u32)));
                }
            }
        }
        // exact corner of a square
        let (cx, cy, h) = squares[0];
        assert!(idx.query(cx + h, cy - h).contains(&0));
    }
}
