use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::ls_slope;

/// Slopes within `±SLOPE_TOL` count as flat.
pub const SLOPE_TOL: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ConvergingPositive,
    ConvergingZero,
    Inconclusive,
}

/// A statistic tabulated against the number of cuts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub n_values: Vec<u64>,
    pub statistic: Vec<f64>,
    pub verdict: Verdict,
    /// Log-log slope over the tail used for the verdict.
    pub tail_slope: f64,
}

impl TrendReport {
    pub fn new(n_values: Vec<u64>, statistic: Vec<f64>) -> Result<Self> {
        if n_values.len() != statistic.len() {
            return invalid("n_values and statistic differ in length");
        }
        if n_values.is_empty() {
            return invalid("a trend needs at least one point");
        }
        if n_values.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("n_values must be strictly increasing");
        }
        let (verdict, tail_slope) = trend_verdict(&n_values, &statistic);
        Ok(TrendReport {
            n_values,
            statistic,
            verdict,
            tail_slope,
        })
    }
}

/// Number of trailing points entering the slope: `max(2, ⌈len/3⌉)`.
pub fn tail_len(len: usize) -> usize {
    len.div_ceil(3).max(2).min(len)
}

/// Least-squares slope of `ln stat` against `ln n` over the last third of
/// the points. A flat tail means a positive limit, a clearly negative slope
/// means decay to zero.
pub fn trend_verdict(n_values: &[u64], statistic: &[f64]) -> (Verdict, f64) {
    if n_values.len() < 2 {
        return (Verdict::Inconclusive, f64::NAN);
    }
    let t = tail_len(n_values.len());
    let ns = &n_values[n_values.len() - t..];
    let st = &statistic[statistic.len() - t..];
    if st.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return (Verdict::Inconclusive, f64::NAN);
    }
    if st.iter().all(|s| *s == 0.0) {
        return (Verdict::ConvergingZero, f64::NEG_INFINITY);
    }
    if st.iter().any(|s| *s == 0.0) {
        return (Verdict::Inconclusive, f64::NAN);
    }
    let xs: Vec<f64> = ns.iter().map(|n| (*n as f64).ln()).collect();
    let ys: Vec<f64> = st.iter().map(|s| s.ln()).collect();
    let slope = ls_slope(&xs, &ys);
    let verdict = if slope.abs() <= SLOPE_TOL {
        Verdict::ConvergingPositive
    } else if slope < -SLOPE_TOL {
        Verdict::ConvergingZero
    } else {
        Verdict::Inconclusive
    };
    (verdict, slope)
}
